//! A small sequence language for scripting pulse/kick experiments.
//!
//! Programs are straight-line lists of operator applications with a `repeat`
//! block, measurement points, and in-place reversal:
//!
//! ```text
//! # 15-step walk
//! measure(init);
//! gate(pi/2, pi);
//! kick(-k, k);
//! free(4*pi);
//! measure(step);
//! repeat 14 {
//!     coin(pi/2, -pi/2);
//!     kick(-k, k);
//!     free(4*pi);
//!     measure(step);
//! }
//! ```
//!
//! Angles are arithmetic expressions over reals, `pi`, and named constants
//! (bound before interpretation), with `+ - * /` and unary minus. Comments
//! run from `#` to end of line. The conventional file extension is `.qws`.

use std::collections::BTreeMap;
use std::fmt;

use crate::coin::{biased_coin, coin_matrix, BiasVariant};
use crate::engine::{ReversalMode, ResolvedGrid, RunMeta, ShiftTrace, WalkConfig, WalkRecord};
use crate::error::{Result, WalkError};
use crate::kick::{completeness_order, default_angle_points, default_truncation, KickParams};
use crate::state::Distribution;

/// Syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Names the expected token class.
    pub message: String,
    /// The offending token's text (`"end of input"` at EOF).
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}; found {}",
            self.line, self.column, self.message, self.found
        )
    }
}

impl std::error::Error for ParseError {}

/// Arithmetic expression preserved from source for exact re-printing.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Pi,
    Constant(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluates against a constant table; returns the first unbound name on
    /// failure.
    pub fn eval(&self, constants: &BTreeMap<String, f64>) -> std::result::Result<f64, String> {
        match self {
            Expr::Number(v) => Ok(*v),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Constant(name) => constants
                .get(name)
                .copied()
                .ok_or_else(|| name.clone()),
            Expr::Neg(e) => Ok(-e.eval(constants)?),
            Expr::Add(a, b) => Ok(a.eval(constants)? + b.eval(constants)?),
            Expr::Sub(a, b) => Ok(a.eval(constants)? - b.eval(constants)?),
            Expr::Mul(a, b) => Ok(a.eval(constants)? * b.eval(constants)?),
            Expr::Div(a, b) => Ok(a.eval(constants)? / b.eval(constants)?),
        }
    }

    /// Collects constant names into `out`.
    fn collect_constants(&self, out: &mut Vec<String>) {
        match self {
            Expr::Constant(name) => out.push(name.clone()),
            Expr::Neg(e) => e.collect_constants(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_constants(out);
                b.collect_constants(out);
            }
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            _ => 4,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < min_prec;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Number(v) => write!(f, "{v}")?,
            Expr::Pi => write!(f, "pi")?,
            Expr::Constant(name) => write!(f, "{name}")?,
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.write_prec(f, 3)?;
            }
            Expr::Add(a, b) => {
                a.write_prec(f, 1)?;
                write!(f, " + ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.write_prec(f, 1)?;
                write!(f, " - ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.write_prec(f, 2)?;
                write!(f, " * ")?;
                b.write_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.write_prec(f, 2)?;
                write!(f, " / ")?;
                b.write_prec(f, 3)?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

/// One program statement.
#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Gate { alpha: Expr, chi: Expr },
    Coin { alpha: Expr, chi: Expr },
    BiasedCoin { rho: Expr, variant: BiasVariant },
    Kick { k1: Expr, k2: Expr },
    Free { tau: Expr },
    IdealShift { q: Expr },
    Repeat { count: usize, body: Vec<Spanned> },
    Reverse { mode: ReversalMode },
    Measure { label: String },
}

/// A statement with its source position and pre-order index (1-based).
#[derive(Debug, Clone)]
pub struct Spanned {
    pub statement: Statement,
    pub line: usize,
    pub column: usize,
    pub index: usize,
}

impl PartialEq for Spanned {
    /// Structural equality: positions and indices are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.statement == other.statement
    }
}

/// A parsed program plus its constant bindings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceProgram {
    pub statements: Vec<Spanned>,
    pub constants: BTreeMap<String, f64>,
}

impl SequenceProgram {
    pub fn define_constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.define_constant(name, value);
        self
    }

    /// Verifies every constant used by the program is bound.
    pub fn type_check(&self) -> Result<()> {
        fn visit(statements: &[Spanned], constants: &BTreeMap<String, f64>) -> Result<()> {
            for spanned in statements {
                let mut names = Vec::new();
                match &spanned.statement {
                    Statement::Gate { alpha, chi } | Statement::Coin { alpha, chi } => {
                        alpha.collect_constants(&mut names);
                        chi.collect_constants(&mut names);
                    }
                    Statement::BiasedCoin { rho, .. } => rho.collect_constants(&mut names),
                    Statement::Kick { k1, k2 } => {
                        k1.collect_constants(&mut names);
                        k2.collect_constants(&mut names);
                    }
                    Statement::Free { tau } => tau.collect_constants(&mut names),
                    Statement::IdealShift { q } => q.collect_constants(&mut names),
                    Statement::Repeat { body, .. } => visit(body, constants)?,
                    Statement::Reverse { .. } | Statement::Measure { .. } => {}
                }
                for name in names {
                    if !constants.contains_key(&name) {
                        return Err(WalkError::Script {
                            statement: spanned.index,
                            message: format!(
                                "unknown constant `{name}`; bind it before interpreting"
                            ),
                        });
                    }
                }
            }
            Ok(())
        }
        visit(&self.statements, &self.constants)
    }

    /// Canonical source form; re-parsing it yields a structurally identical
    /// program.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        write_statements(&mut out, &self.statements, 0);
        out
    }
}

impl fmt::Display for SequenceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

fn write_statements(out: &mut String, statements: &[Spanned], depth: usize) {
    use fmt::Write;
    for spanned in statements {
        for _ in 0..depth {
            out.push_str("    ");
        }
        match &spanned.statement {
            Statement::Gate { alpha, chi } => {
                let _ = writeln!(out, "gate({alpha}, {chi});");
            }
            Statement::Coin { alpha, chi } => {
                let _ = writeln!(out, "coin({alpha}, {chi});");
            }
            Statement::BiasedCoin { rho, variant } => {
                let name = match variant {
                    BiasVariant::Pi => "pi",
                    BiasVariant::MinusHalfPi => "minus_half_pi",
                };
                let _ = writeln!(out, "biased_coin({rho}, {name});");
            }
            Statement::Kick { k1, k2 } => {
                let _ = writeln!(out, "kick({k1}, {k2});");
            }
            Statement::Free { tau } => {
                let _ = writeln!(out, "free({tau});");
            }
            Statement::IdealShift { q } => {
                let _ = writeln!(out, "ideal_shift({q});");
            }
            Statement::Repeat { count, body } => {
                let _ = writeln!(out, "repeat {count} {{");
                write_statements(out, body, depth + 1);
                for _ in 0..depth {
                    out.push_str("    ");
                }
                out.push_str("}\n");
            }
            Statement::Reverse { mode } => {
                let name = match mode {
                    ReversalMode::Adjoint => "adjoint",
                    ReversalMode::Composed => "composed",
                };
                let _ = writeln!(out, "reverse({name});");
            }
            Statement::Measure { label } => {
                let _ = writeln!(out, "measure({label});");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Ident(String),
    Number { value: f64, integral: bool },
    Punct(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    line: usize,
    column: usize,
    text: String,
}

impl Token {
    fn found(&self) -> String {
        match self.kind {
            TokenKind::Eof => "end of input".to_string(),
            _ => format!("`{}`", self.text),
        }
    }
}

fn lex(source: &str) -> std::result::Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = source.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c == '\n' {
            chars.next();
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            column += 1;
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                column += 1;
            }
            continue;
        }
        let (start_line, start_column) = (line, column);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    text.push(c);
                    chars.next();
                    column += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident(text.clone()),
                line: start_line,
                column: start_column,
                text,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            let mut integral = true;
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    chars.next();
                    column += 1;
                } else {
                    break;
                }
            }
            if chars.peek() == Some(&'.') {
                integral = false;
                text.push('.');
                chars.next();
                column += 1;
                let mut saw_digit = false;
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        text.push(c);
                        chars.next();
                        column += 1;
                        saw_digit = true;
                    } else {
                        break;
                    }
                }
                if !saw_digit {
                    return Err(ParseError {
                        line: start_line,
                        column: start_column,
                        message: "expected digits after the decimal point".to_string(),
                        found: format!("`{text}`"),
                    });
                }
            }
            if matches!(chars.peek(), Some('e') | Some('E')) {
                integral = false;
                text.push('e');
                chars.next();
                column += 1;
                if matches!(chars.peek(), Some('+') | Some('-')) {
                    text.push(*chars.peek().unwrap());
                    chars.next();
                    column += 1;
                }
                let mut saw_digit = false;
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        text.push(c);
                        chars.next();
                        column += 1;
                        saw_digit = true;
                    } else {
                        break;
                    }
                }
                if !saw_digit {
                    return Err(ParseError {
                        line: start_line,
                        column: start_column,
                        message: "expected digits in the exponent".to_string(),
                        found: format!("`{text}`"),
                    });
                }
            }
            let value: f64 = text.parse().map_err(|_| ParseError {
                line: start_line,
                column: start_column,
                message: "expected a valid number literal".to_string(),
                found: format!("`{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    line: start_line,
                    column: start_column,
                    message: "expected a number literal in range".to_string(),
                    found: format!("`{text}`"),
                });
            }
            tokens.push(Token {
                kind: TokenKind::Number { value, integral },
                line: start_line,
                column: start_column,
                text,
            });
            continue;
        }
        if "();,{}+-*/".contains(c) {
            chars.next();
            column += 1;
            tokens.push(Token {
                kind: TokenKind::Punct(c),
                line: start_line,
                column: start_column,
                text: c.to_string(),
            });
            continue;
        }
        return Err(ParseError {
            line: start_line,
            column: start_column,
            message: "expected a statement, operator, or punctuation".to_string(),
            found: format!("`{c}`"),
        });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        column,
        text: String::new(),
    });
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_index: usize,
}

const OPERATIONS: &str =
    "gate, coin, biased_coin, kick, free, ideal_shift, repeat, reverse, measure";

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        token
    }

    fn error(&self, token: &Token, message: impl Into<String>) -> ParseError {
        ParseError {
            line: token.line,
            column: token.column,
            message: message.into(),
            found: token.found(),
        }
    }

    fn expect_punct(&mut self, c: char, context: &str) -> std::result::Result<Token, ParseError> {
        let token = self.peek().clone();
        if token.kind == TokenKind::Punct(c) {
            Ok(self.advance())
        } else {
            Err(self.error(&token, format!("expected `{c}` {context}")))
        }
    }

    fn parse_program(&mut self) -> std::result::Result<Vec<Spanned>, ParseError> {
        let mut statements = Vec::new();
        while self.peek().kind != TokenKind::Eof {
            statements.push(self.parse_statement()?);
        }
        Ok(statements)
    }

    fn parse_block(&mut self) -> std::result::Result<Vec<Spanned>, ParseError> {
        self.expect_punct('{', "to open the repeat block")?;
        let mut statements = Vec::new();
        loop {
            let token = self.peek().clone();
            match token.kind {
                TokenKind::Punct('}') => {
                    self.advance();
                    return Ok(statements);
                }
                TokenKind::Eof => {
                    return Err(self.error(&token, "expected `}` to close the repeat block"))
                }
                _ => statements.push(self.parse_statement()?),
            }
        }
    }

    fn parse_statement(&mut self) -> std::result::Result<Spanned, ParseError> {
        let token = self.peek().clone();
        let name = match &token.kind {
            TokenKind::Ident(name) => name.clone(),
            _ => {
                return Err(self.error(
                    &token,
                    format!("expected an operation name ({OPERATIONS})"),
                ))
            }
        };
        self.advance();
        let index = self.next_index;
        self.next_index += 1;

        if name == "repeat" {
            let count_token = self.peek().clone();
            let count = match count_token.kind {
                TokenKind::Number { value, integral }
                    if integral && value >= 1.0 && value <= usize::MAX as f64 =>
                {
                    self.advance();
                    value as usize
                }
                _ => {
                    return Err(self.error(
                        &count_token,
                        "expected a positive integer repeat count",
                    ))
                }
            };
            let body = self.parse_block()?;
            return Ok(Spanned {
                statement: Statement::Repeat { count, body },
                line: token.line,
                column: token.column,
                index,
            });
        }

        self.expect_punct('(', "to open the argument list")?;
        let mut args: Vec<(Expr, usize, usize)> = Vec::new();
        if self.peek().kind != TokenKind::Punct(')') {
            loop {
                let at = self.peek().clone();
                let expr = self.parse_expr()?;
                args.push((expr, at.line, at.column));
                let next = self.peek().clone();
                match next.kind {
                    TokenKind::Punct(',') => {
                        self.advance();
                    }
                    TokenKind::Punct(')') => break,
                    _ => {
                        return Err(
                            self.error(&next, "expected `,` or `)` in the argument list")
                        )
                    }
                }
            }
        }
        let close = self.expect_punct(')', "to close the argument list")?;
        self.expect_punct(';', "to end the statement")?;

        let statement = self.lower_call(&name, &token, &close, args)?;
        Ok(Spanned {
            statement,
            line: token.line,
            column: token.column,
            index,
        })
    }

    fn lower_call(
        &self,
        name: &str,
        at: &Token,
        close: &Token,
        mut args: Vec<(Expr, usize, usize)>,
    ) -> std::result::Result<Statement, ParseError> {
        // Anchored at the closing paren: a wrong count only becomes apparent
        // once the argument list ends.
        let arity = |n: usize| -> std::result::Result<(), ParseError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(self.error(
                    close,
                    format!(
                        "expected {n} argument{} to `{name}`, not {}",
                        if n == 1 { "" } else { "s" },
                        args.len()
                    ),
                ))
            }
        };
        match name {
            "gate" => {
                arity(2)?;
                let chi = args.pop().unwrap().0;
                let alpha = args.pop().unwrap().0;
                Ok(Statement::Gate { alpha, chi })
            }
            "coin" => {
                arity(2)?;
                let chi = args.pop().unwrap().0;
                let alpha = args.pop().unwrap().0;
                Ok(Statement::Coin { alpha, chi })
            }
            "biased_coin" => {
                arity(2)?;
                let (variant_expr, vline, vcol) = args.pop().unwrap();
                let rho = args.pop().unwrap().0;
                let variant = match &variant_expr {
                    Expr::Pi => BiasVariant::Pi,
                    Expr::Constant(s) if s == "minus_half_pi" => BiasVariant::MinusHalfPi,
                    _ => {
                        return Err(ParseError {
                            line: vline,
                            column: vcol,
                            message: "expected a coin variant name (pi or minus_half_pi)"
                                .to_string(),
                            found: format!("`{variant_expr}`"),
                        })
                    }
                };
                Ok(Statement::BiasedCoin { rho, variant })
            }
            "kick" => {
                arity(2)?;
                let k2 = args.pop().unwrap().0;
                let k1 = args.pop().unwrap().0;
                Ok(Statement::Kick { k1, k2 })
            }
            "free" => {
                arity(1)?;
                Ok(Statement::Free {
                    tau: args.pop().unwrap().0,
                })
            }
            "ideal_shift" => {
                arity(1)?;
                Ok(Statement::IdealShift {
                    q: args.pop().unwrap().0,
                })
            }
            "reverse" => {
                arity(1)?;
                let (mode_expr, mline, mcol) = args.pop().unwrap();
                let mode = match &mode_expr {
                    Expr::Constant(s) if s == "adjoint" => ReversalMode::Adjoint,
                    Expr::Constant(s) if s == "composed" => ReversalMode::Composed,
                    _ => {
                        return Err(ParseError {
                            line: mline,
                            column: mcol,
                            message: "expected a reversal mode (adjoint or composed)".to_string(),
                            found: format!("`{mode_expr}`"),
                        })
                    }
                };
                Ok(Statement::Reverse { mode })
            }
            "measure" => {
                arity(1)?;
                let (label_expr, lline, lcol) = args.pop().unwrap();
                let label = match &label_expr {
                    Expr::Constant(s) => s.clone(),
                    Expr::Pi => "pi".to_string(),
                    _ => {
                        return Err(ParseError {
                            line: lline,
                            column: lcol,
                            message: "expected a measurement label (identifier)".to_string(),
                            found: format!("`{label_expr}`"),
                        })
                    }
                };
                Ok(Statement::Measure { label })
            }
            _ => Err(self.error(
                at,
                format!("expected an operation name ({OPERATIONS})"),
            )),
        }
    }

    fn parse_expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek().kind {
                TokenKind::Punct('+') => {
                    self.advance();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                TokenKind::Punct('-') => {
                    self.advance();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek().kind {
                TokenKind::Punct('*') => {
                    self.advance();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                TokenKind::Punct('/') => {
                    self.advance();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> std::result::Result<Expr, ParseError> {
        if self.peek().kind == TokenKind::Punct('-') {
            self.advance();
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> std::result::Result<Expr, ParseError> {
        let token = self.peek().clone();
        match &token.kind {
            TokenKind::Number { value, .. } => {
                let value = *value;
                self.advance();
                Ok(Expr::Number(value))
            }
            TokenKind::Ident(name) => {
                let name = name.clone();
                self.advance();
                if name == "pi" {
                    Ok(Expr::Pi)
                } else {
                    Ok(Expr::Constant(name))
                }
            }
            TokenKind::Punct('(') => {
                self.advance();
                let inner = self.parse_expr()?;
                self.expect_punct(')', "to close the parenthesized expression")?;
                Ok(inner)
            }
            _ => Err(self.error(
                &token,
                "expected a number, constant, `pi`, unary `-`, or `(`",
            )),
        }
    }
}

/// Parses a program. The grammar:
///
/// ```text
/// program := stmt*
/// stmt    := call ';' | 'repeat' INT '{' stmt* '}'
/// call    := IDENT '(' (expr (',' expr)*)? ')'
/// expr    := arithmetic over reals, 'pi', constants with + - * / and unary -
/// ```
pub fn parse(source: &str) -> std::result::Result<SequenceProgram, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        next_index: 1,
    };
    let statements = parser.parse_program()?;
    Ok(SequenceProgram {
        statements,
        constants: BTreeMap::new(),
    })
}

// ---------------------------------------------------------------------------
// Interpreter
// ---------------------------------------------------------------------------

fn script_err(statement: usize, message: impl Into<String>) -> WalkError {
    WalkError::Script {
        statement,
        message: message.into(),
    }
}

fn eval_finite(
    expr: &Expr,
    constants: &BTreeMap<String, f64>,
    statement: usize,
    what: &str,
) -> Result<f64> {
    let value = expr
        .eval(constants)
        .map_err(|name| script_err(statement, format!("unknown constant `{name}`")))?;
    if !value.is_finite() {
        return Err(script_err(
            statement,
            format!("{what} evaluates to a non-finite number"),
        ));
    }
    Ok(value)
}

/// Walks expanded statements (repeat bodies unrolled) in execution order.
fn visit_expanded<'p>(
    statements: &'p [Spanned],
    f: &mut impl FnMut(&'p Spanned) -> Result<()>,
) -> Result<()> {
    for spanned in statements {
        if let Statement::Repeat { count, body } = &spanned.statement {
            for _ in 0..*count {
                visit_expanded(body, f)?;
            }
        } else {
            f(spanned)?;
        }
    }
    Ok(())
}

/// Sizes the momentum window for a program: counts shifts (including those a
/// reversal replays) and tracks the strongest kick.
fn size_program(program: &SequenceProgram, config: &WalkConfig) -> Result<ResolvedGrid> {
    let constants = &program.constants;
    let mut physical_shifts = 0usize;
    let mut ideal_reach = 0usize;
    let mut open_physical = 0usize;
    let mut open_ideal = 0usize;
    let mut max_k = config.kick.max_strength();
    visit_expanded(&program.statements, &mut |spanned| {
        match &spanned.statement {
            Statement::Kick { k1, k2 } => {
                let k1 = eval_finite(k1, constants, spanned.index, "kick strength")?;
                let k2 = eval_finite(k2, constants, spanned.index, "kick strength")?;
                max_k = max_k.max(k1.abs()).max(k2.abs());
                physical_shifts += 1;
                open_physical += 1;
            }
            Statement::IdealShift { q } => {
                let q = eval_finite(q, constants, spanned.index, "shift distance")?;
                let reach = q.abs().ceil() as usize;
                ideal_reach += reach;
                open_ideal += reach;
            }
            Statement::Reverse { .. } => {
                // Reversal replays every shift applied since the last one.
                physical_shifts += open_physical;
                ideal_reach += open_ideal;
                open_physical = 0;
                open_ideal = 0;
            }
            _ => {}
        }
        Ok(())
    })?;
    // Same footprint rule the direct runners use: a physical kick spreads by
    // its truncation order in both directions, an ideal shift moves the
    // support by |q| bins, and the initial components plus a safety apron of
    // 4 bins are always held.
    let half_width = config.grid_half_width.unwrap_or_else(|| {
        let physical_spread = 2 * physical_shifts * completeness_order(max_k);
        (4 + physical_spread).max(config.initial.components + 4) + ideal_reach
    });
    Ok(ResolvedGrid {
        half_width,
        truncation_order: default_truncation(max_k),
        angle_points: default_angle_points(half_width),
    })
}

/// Executes a program against a configuration: pulses, shifts, and flights
/// map 1:1 onto operator applications; `measure` statements define the
/// record's rows; `reverse` undoes the open steps (appending one row per
/// reversed step, the way direct reversal runs do). Single-trajectory: the
/// configured quasimomentum is used as-is, and pulse jitter follows the
/// trajectory's own RNG stream, so a program spelling out a built-in
/// experiment reproduces its record bit for bit.
pub fn interpret(program: &SequenceProgram, config: &WalkConfig) -> Result<WalkRecord> {
    config.validate()?;
    program.type_check()?;
    let constants = &program.constants;
    let grid = size_program(program, config)?;

    let mut prop = crate::engine::Propagator::new(config, grid, 0, false)?;
    let mut distributions: Vec<Distribution> = Vec::new();
    let mut stats = Vec::new();

    {
        let mut record_row = |state: &crate::state::SpinorState| {
            let dist = state.distribution();
            stats.push(crate::engine::row_stats(&dist, state.coin_density()));
            distributions.push(dist);
        };

        visit_expanded(&program.statements, &mut |spanned| {
            let idx = spanned.index;
            let wrap = |e: WalkError| match e {
                WalkError::Script { .. } => e,
                other => script_err(idx, other.to_string()),
            };
            match &spanned.statement {
                Statement::Gate { alpha, chi } => {
                    let alpha = eval_finite(alpha, constants, idx, "pulse area")?;
                    let chi = eval_finite(chi, constants, idx, "pulse phase")?;
                    prop.apply_pulse(coin_matrix(alpha, chi), true, true)
                        .map_err(wrap)?;
                }
                Statement::Coin { alpha, chi } => {
                    let alpha = eval_finite(alpha, constants, idx, "pulse area")?;
                    let chi = eval_finite(chi, constants, idx, "pulse phase")?;
                    prop.apply_pulse(coin_matrix(alpha, chi), false, true)
                        .map_err(wrap)?;
                }
                Statement::BiasedCoin { rho, variant } => {
                    let rho = eval_finite(rho, constants, idx, "coin bias")?;
                    let matrix = biased_coin(rho, *variant).map_err(wrap)?;
                    prop.apply_pulse(matrix, false, true).map_err(wrap)?;
                }
                Statement::Kick { k1, k2 } => {
                    let k1 = eval_finite(k1, constants, idx, "kick strength")?;
                    let k2 = eval_finite(k2, constants, idx, "kick strength")?;
                    let params = KickParams::new(k1, k2).map_err(wrap)?;
                    prop.apply_shift(&ShiftTrace::Kick(params), false, idx, true)
                        .map_err(wrap)?;
                }
                Statement::Free { tau } => {
                    let tau = eval_finite(tau, constants, idx, "flight period")?;
                    prop.apply_free(tau, true).map_err(wrap)?;
                }
                Statement::IdealShift { q } => {
                    let q_val = eval_finite(q, constants, idx, "shift distance")?;
                    let rounded = q_val.round();
                    if (q_val - rounded).abs() > 1e-9 {
                        return Err(script_err(
                            idx,
                            format!("shift distance must be an integer; got {q_val}"),
                        ));
                    }
                    prop.apply_shift(&ShiftTrace::Ideal(rounded as i64), false, idx, true)
                        .map_err(wrap)?;
                }
                Statement::Reverse { mode } => {
                    let mut sink = |_row: usize, state: &crate::state::SpinorState| {
                        record_row(state);
                    };
                    match mode {
                        ReversalMode::Adjoint => prop.reverse_adjoint(&mut sink).map_err(wrap)?,
                        ReversalMode::Composed => {
                            prop.reverse_composed(&mut sink).map_err(wrap)?
                        }
                    }
                }
                Statement::Measure { .. } => record_row(&prop.state),
                Statement::Repeat { .. } => unreachable!("expanded by visit_expanded"),
            }
            Ok(())
        })?;
    }

    let meta = RunMeta {
        seed: config.seed,
        trajectories: 1,
        half_width: grid.half_width,
        truncation_order: grid.truncation_order,
        angle_points: grid.angle_points,
    };
    Ok(WalkRecord {
        distributions,
        stats,
        final_state: Some(prop.state),
        meta,
    })
}

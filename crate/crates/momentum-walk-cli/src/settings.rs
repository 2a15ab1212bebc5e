//! Resolved run settings: defaults, config-file parsing, flag overrides, and
//! the manifest writer.
//!
//! A config file (and the manifest every run writes) is a flat list of
//! `key = value` lines.  `#` starts a comment, blank lines are skipped, and
//! unknown keys are rejected so typos fail loudly.  Keys prefixed `meta_` are
//! informational and ignored on read, which lets a manifest be fed straight
//! back in as `--config` to reproduce the run byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use momentum_walk::{
    biased_coin, coin_matrix, BiasVariant, GlobalPhasePolicy, InitialSpec, KickParams,
    ReversalMode, ShiftRealization, WalkConfig, RESONANT_TAU,
};

/// Default symmetric kick magnitude.
pub const DEFAULT_K: f64 = 1.45;

/// Every tunable the tool understands, in its fully resolved form.
///
/// One struct covers all subcommands; fields a given subcommand does not use
/// are carried along unchanged so the manifest is complete no matter which
/// subcommand wrote it.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub steps: usize,
    pub k1: f64,
    pub k2: f64,
    pub seed: u64,
    pub noise: f64,
    pub beta: f64,
    pub beta_fwhm: f64,
    pub thermal: f64,
    pub beta_samples: usize,
    pub noise_realizations: usize,
    pub shift: String,
    pub policy: String,
    pub explicit_phase: f64,
    pub tau: f64,
    pub components: usize,
    pub ratchet_phase: f64,
    /// `None` means "size the grid automatically".
    pub grid: Option<usize>,
    pub rho: f64,
    pub variant: String,
    pub points: usize,
    pub at_steps: Vec<usize>,
    pub levels: Vec<f64>,
    pub mode: String,
    pub bias: f64,
    /// Embedded sequence program (set by `script`, replayed from manifests).
    pub program: Option<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            steps: 15,
            k1: -DEFAULT_K,
            k2: DEFAULT_K,
            seed: 1,
            noise: 0.0,
            beta: 0.0,
            beta_fwhm: 0.0,
            thermal: 0.0,
            beta_samples: 1,
            noise_realizations: 1,
            shift: "bessel".to_string(),
            policy: "compensated".to_string(),
            explicit_phase: 2.0 * DEFAULT_K,
            tau: RESONANT_TAU,
            components: 2,
            ratchet_phase: std::f64::consts::FRAC_PI_2,
            grid: None,
            rho: 0.7,
            variant: "minus_half_pi".to_string(),
            points: 64,
            at_steps: vec![2, 5],
            levels: vec![0.0, 0.1, 0.2, 0.5, 1.0],
            mode: "composed".to_string(),
            bias: 0.5,
            program: None,
        }
    }
}

/// Usage-level error: bad flag value, malformed config file, unknown key.
#[derive(Debug)]
pub struct SettingsError(pub String);

impl std::fmt::Display for SettingsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for SettingsError {}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, SettingsError> {
    value
        .parse::<T>()
        .map_err(|_| SettingsError(format!("invalid value for `{key}`: `{value}`")))
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>, SettingsError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value::<usize>(key, s))
        .collect()
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, SettingsError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value::<f64>(key, s))
        .collect()
}

/// Escape an embedded program for a single manifest line.  Newlines become
/// `\n` and hash marks become `\h`, so the value never collides with the
/// config format's line breaks or comments.
fn escape_program(source: &str) -> String {
    let mut out = String::with_capacity(source.len() + 16);
    for ch in source.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '#' => out.push_str("\\h"),
            _ => out.push(ch),
        }
    }
    out
}

/// Inverse of [`escape_program`].
fn unescape_program(line: &str) -> Result<String, SettingsError> {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('h') => out.push('#'),
            Some('\\') => out.push('\\'),
            other => {
                return Err(SettingsError(format!(
                    "invalid escape `\\{}` in program value",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl Settings {
    /// Apply one `key = value` pair.  Unknown keys are errors; `meta_*` keys
    /// are informational output and silently skipped so manifests round-trip.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SettingsError> {
        if key.starts_with("meta_") {
            return Ok(());
        }
        match key {
            "steps" => self.steps = parse_value(key, value)?,
            "k1" => self.k1 = parse_value(key, value)?,
            "k2" => self.k2 = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "noise" => self.noise = parse_value(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            "beta_fwhm" => self.beta_fwhm = parse_value(key, value)?,
            "thermal" => self.thermal = parse_value(key, value)?,
            "beta_samples" => self.beta_samples = parse_value(key, value)?,
            "noise_realizations" => self.noise_realizations = parse_value(key, value)?,
            "shift" => self.shift = Self::checked_shift(value)?,
            "policy" => self.policy = Self::checked_policy(value)?,
            "explicit_phase" => self.explicit_phase = parse_value(key, value)?,
            "tau" => self.tau = parse_value(key, value)?,
            "components" => self.components = parse_value(key, value)?,
            "ratchet_phase" => self.ratchet_phase = parse_value(key, value)?,
            "grid" => {
                self.grid = if value == "auto" {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "rho" => self.rho = parse_value(key, value)?,
            "variant" => self.variant = Self::checked_variant(value)?,
            "points" => self.points = parse_value(key, value)?,
            "at_steps" => self.at_steps = parse_usize_list(key, value)?,
            "levels" => self.levels = parse_f64_list(key, value)?,
            "mode" => self.mode = Self::checked_mode(value)?,
            "bias" => self.bias = parse_value(key, value)?,
            "program" => self.program = Some(unescape_program(value)?),
            _ => return Err(SettingsError(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    fn checked_shift(value: &str) -> Result<String, SettingsError> {
        match value {
            "bessel" | "grid" | "ideal" => Ok(value.to_string()),
            _ => Err(SettingsError(format!(
                "invalid shift `{value}` (expected bessel, grid, or ideal)"
            ))),
        }
    }

    fn checked_policy(value: &str) -> Result<String, SettingsError> {
        match value {
            "compensated" | "uncompensated" | "explicit" => Ok(value.to_string()),
            _ => Err(SettingsError(format!(
                "invalid policy `{value}` (expected compensated, uncompensated, or explicit)"
            ))),
        }
    }

    fn checked_variant(value: &str) -> Result<String, SettingsError> {
        match value {
            "pi" | "minus_half_pi" => Ok(value.to_string()),
            _ => Err(SettingsError(format!(
                "invalid variant `{value}` (expected pi or minus_half_pi)"
            ))),
        }
    }

    fn checked_mode(value: &str) -> Result<String, SettingsError> {
        match value {
            "adjoint" | "composed" => Ok(value.to_string()),
            _ => Err(SettingsError(format!(
                "invalid mode `{value}` (expected adjoint or composed)"
            ))),
        }
    }

    /// Parse a config file's text into `self`, overriding current values.
    pub fn apply_config_text(&mut self, text: &str, origin: &str) -> Result<(), SettingsError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SettingsError(format!(
                    "{origin}:{}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| SettingsError(format!("{origin}:{}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Load and apply a config file from disk.
    pub fn apply_config_file(&mut self, path: &Path) -> Result<(), SettingsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SettingsError(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_config_text(&text, &path.display().to_string())
    }

    /// Reversal mode as the engine enum.
    pub fn reversal_mode(&self) -> ReversalMode {
        match self.mode.as_str() {
            "adjoint" => ReversalMode::Adjoint,
            _ => ReversalMode::Composed,
        }
    }

    /// Biased-coin variant as the engine enum.
    pub fn bias_variant(&self) -> BiasVariant {
        match self.variant.as_str() {
            "pi" => BiasVariant::Pi,
            _ => BiasVariant::MinusHalfPi,
        }
    }

    /// Build the engine configuration for the standard pulse arrangement.
    pub fn to_walk_config(&self) -> Result<WalkConfig, SettingsError> {
        let kick = KickParams::new(self.k1, self.k2)
            .map_err(|e| SettingsError(format!("invalid kick strengths: {e}")))?;
        let shift = match self.shift.as_str() {
            "grid" => ShiftRealization::Grid,
            "ideal" => ShiftRealization::Ideal,
            _ => ShiftRealization::Bessel,
        };
        let phase_policy = match self.policy.as_str() {
            "uncompensated" => GlobalPhasePolicy::Uncompensated,
            "explicit" => GlobalPhasePolicy::Explicit(self.explicit_phase),
            _ => GlobalPhasePolicy::Compensated,
        };
        let config = WalkConfig {
            steps: self.steps,
            kick,
            gate: coin_matrix(std::f64::consts::FRAC_PI_2, std::f64::consts::PI),
            coin: coin_matrix(std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2),
            phase_policy,
            shift,
            tau: self.tau,
            beta: self.beta,
            noise_fraction: self.noise,
            beta_fwhm: self.beta_fwhm,
            thermal_fraction: self.thermal,
            num_beta_samples: self.beta_samples,
            num_noise_realizations: self.noise_realizations,
            seed: self.seed,
            grid_half_width: self.grid,
            initial: InitialSpec {
                components: self.components,
                phase: self.ratchet_phase,
            },
        };
        config
            .validate()
            .map_err(|e| SettingsError(e.to_string()))?;
        Ok(config)
    }

    /// Same as [`to_walk_config`](Self::to_walk_config) but with both pulses
    /// replaced by the biased rotation.
    pub fn to_biased_config(&self) -> Result<WalkConfig, SettingsError> {
        let mut config = self.to_walk_config()?;
        let pulse = biased_coin(self.rho, self.bias_variant())
            .map_err(|e| SettingsError(e.to_string()))?;
        config.gate = pulse;
        config.coin = pulse;
        Ok(config)
    }

    /// Render the full resolved state as a manifest.
    ///
    /// The body is a valid config file: feeding it back via `--config`
    /// reproduces the run exactly.  `meta_*` lines record provenance and are
    /// skipped on read.
    pub fn manifest(&self, subcommand: &str, outputs: &[&str]) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# mwalk manifest; rerun with: mwalk {subcommand} --config <this file>"
        );
        let _ = writeln!(
            out,
            "meta_tool = mwalk {}",
            env!("CARGO_PKG_VERSION")
        );
        let _ = writeln!(out, "meta_subcommand = {subcommand}");
        let _ = writeln!(out, "meta_outputs = {}", outputs.join(","));
        let _ = writeln!(out, "steps = {}", self.steps);
        let _ = writeln!(out, "k1 = {}", self.k1);
        let _ = writeln!(out, "k2 = {}", self.k2);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "noise = {}", self.noise);
        let _ = writeln!(out, "beta = {}", self.beta);
        let _ = writeln!(out, "beta_fwhm = {}", self.beta_fwhm);
        let _ = writeln!(out, "thermal = {}", self.thermal);
        let _ = writeln!(out, "beta_samples = {}", self.beta_samples);
        let _ = writeln!(out, "noise_realizations = {}", self.noise_realizations);
        let _ = writeln!(out, "shift = {}", self.shift);
        let _ = writeln!(out, "policy = {}", self.policy);
        let _ = writeln!(out, "explicit_phase = {}", self.explicit_phase);
        let _ = writeln!(out, "tau = {}", self.tau);
        let _ = writeln!(out, "components = {}", self.components);
        let _ = writeln!(out, "ratchet_phase = {}", self.ratchet_phase);
        let _ = writeln!(
            out,
            "grid = {}",
            self.grid.map_or_else(|| "auto".to_string(), |g| g.to_string())
        );
        let _ = writeln!(out, "rho = {}", self.rho);
        let _ = writeln!(out, "variant = {}", self.variant);
        let _ = writeln!(out, "points = {}", self.points);
        let _ = writeln!(out, "at_steps = {}", join_usize(&self.at_steps));
        let _ = writeln!(out, "levels = {}", join_f64(&self.levels));
        let _ = writeln!(out, "mode = {}", self.mode);
        let _ = writeln!(out, "bias = {}", self.bias);
        if let Some(program) = &self.program {
            let _ = writeln!(out, "program = {}", escape_program(program));
        }
        out
    }
}

//! Property tests for the structural invariants: operator unitarity, route
//! equivalence, exact formulas, metric axioms, gauge freedom, and the
//! sequence language's print/parse round trip.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;

use momentum_walk::dsl::{Expr, Spanned, Statement};
use momentum_walk::{
    apply_coin, apply_free_evolution, apply_kick_bessel, biased_coin, classical_walk_reference,
    coin_matrix, default_truncation, parse, run_walk, total_variation, BiasVariant, Distribution,
    KickParams, ReversalMode, SequenceProgram, SpinorState, WalkConfig,
};

const HALF_WIDTH: usize = 48;
const SUPPORT: usize = 6;

/// Raw amplitudes for a state supported on `|n| <= SUPPORT`.
fn amplitude_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2 * (2 * SUPPORT + 1))
}

fn build_state(raw: &[(f64, f64)], beta: f64) -> Option<SpinorState> {
    let bins = 2 * HALF_WIDTH + 1;
    let width = 2 * SUPPORT + 1;
    let mut channels = [
        vec![Complex64::new(0.0, 0.0); bins],
        vec![Complex64::new(0.0, 0.0); bins],
    ];
    for (i, &(re, im)) in raw.iter().enumerate() {
        let (ch, offset) = (i / width, i % width);
        channels[ch][HALF_WIDTH - SUPPORT + offset] = Complex64::new(re, im);
    }
    let norm: f64 = channels
        .iter()
        .flat_map(|c| c.iter())
        .map(|a| a.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if norm < 1e-3 {
        return None;
    }
    for ch in &mut channels {
        for a in ch.iter_mut() {
            *a /= norm;
        }
    }
    Some(SpinorState::from_amplitudes(HALF_WIDTH, beta, channels).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every pulse rotation preserves the norm exactly.
    #[test]
    fn pulses_preserve_norm(
        raw in amplitude_strategy(),
        beta in 0.0..1.0f64,
        alpha in 0.0..(2.0 * PI),
        chi in -PI..PI,
        rho in 0.0..=1.0f64,
    ) {
        prop_assume!(beta < 1.0);
        let Some(state) = build_state(&raw, beta) else { return Ok(()); };
        for matrix in [
            coin_matrix(alpha, chi),
            biased_coin(rho, BiasVariant::Pi).unwrap(),
            biased_coin(rho, BiasVariant::MinusHalfPi).unwrap(),
        ] {
            let mut s = state.clone();
            apply_coin(&mut s, &matrix).unwrap();
            prop_assert!((s.norm_sq() - 1.0).abs() <= 1e-12);
        }
    }

    /// Kicks preserve the norm when the support keeps clear of the edges.
    #[test]
    fn kicks_preserve_norm(
        raw in amplitude_strategy(),
        k1 in -3.0..3.0f64,
        k2 in -3.0..3.0f64,
    ) {
        let Some(mut state) = build_state(&raw, 0.37) else { return Ok(()); };
        let params = KickParams::new(k1, k2).unwrap();
        apply_kick_bessel(&mut state, &params, default_truncation(params.max_strength())).unwrap();
        prop_assert!((state.norm_sq() - 1.0).abs() <= 1e-12);
    }

    /// Free flights preserve the norm and compose additively.
    #[test]
    fn free_flights_compose(
        raw in amplitude_strategy(),
        beta in 0.0..1.0f64,
        tau1 in 0.0..(8.0 * PI),
        tau2 in 0.0..(8.0 * PI),
    ) {
        prop_assume!(beta < 1.0);
        let Some(state) = build_state(&raw, beta) else { return Ok(()); };
        let mut split = state.clone();
        apply_free_evolution(&mut split, tau1).unwrap();
        apply_free_evolution(&mut split, tau2).unwrap();
        let mut joined = state;
        apply_free_evolution(&mut joined, tau1 + tau2).unwrap();
        prop_assert!((split.norm_sq() - 1.0).abs() <= 1e-12);
        for ch in 0..2 {
            for n in -(SUPPORT as i64)..=(SUPPORT as i64) {
                let dev = (split.amplitude(n, ch) - joined.amplitude(n, ch)).norm();
                prop_assert!(dev <= 1e-9, "amplitude ({n},{ch}) differs by {dev:.3e}");
            }
        }
    }

    /// The single-kick momentum current follows -k sin(phi) / 2 exactly.
    #[test]
    fn ratchet_current_formula(
        k in 0.2..3.0f64,
        phi in 0.0..(2.0 * PI),
    ) {
        let state = SpinorState::ratchet(2, phi, 0.0, HALF_WIDTH).unwrap();
        let before = state.mean_momentum();
        let mut kicked = state;
        let params = KickParams::uniform(k).unwrap();
        apply_kick_bessel(&mut kicked, &params, default_truncation(k)).unwrap();
        let change = kicked.mean_momentum() - before;
        prop_assert!((change - (-k * phi.sin() / 2.0)).abs() <= 1e-10);
    }

    /// Conjugating a kick by the channel-swap pulses turns it into the
    /// swapped-strength kick (the identity behind echo reversal).
    #[test]
    fn reflection_sandwich_swaps_kick_strengths(
        raw in amplitude_strategy(),
        k in 0.2..2.0f64,
    ) {
        let Some(state) = build_state(&raw, 0.0) else { return Ok(()); };
        let params = KickParams::new(-k, k).unwrap();
        let swapped = KickParams::new(k, -k).unwrap();
        let order = default_truncation(k);

        let mut sandwiched = state.clone();
        apply_coin(&mut sandwiched, &coin_matrix(PI, -FRAC_PI_2)).unwrap();
        apply_kick_bessel(&mut sandwiched, &params, order).unwrap();
        apply_coin(&mut sandwiched, &coin_matrix(PI, FRAC_PI_2)).unwrap();

        let mut direct = state;
        apply_kick_bessel(&mut direct, &swapped, order).unwrap();

        for ch in 0..2 {
            for n in -((SUPPORT + order) as i64)..=((SUPPORT + order) as i64) {
                let dev = (sandwiched.amplitude(n, ch) - direct.amplitude(n, ch)).norm();
                prop_assert!(dev <= 1e-12, "amplitude ({n},{ch}) differs by {dev:.3e}");
            }
        }
    }

    /// Total variation is a metric on distributions (up to the identity of
    /// indiscernibles, checked as d(a, a) = 0).
    #[test]
    fn total_variation_is_a_metric(
        pa in prop::collection::vec(0.0..1.0f64, 21),
        pb in prop::collection::vec(0.0..1.0f64, 21),
        pc in prop::collection::vec(0.0..1.0f64, 21),
    ) {
        let normalize = |v: &[f64]| -> Option<Distribution> {
            let total: f64 = v.iter().sum();
            if total < 1e-6 {
                return None;
            }
            let probs: Vec<f64> = v.iter().map(|p| p / total).collect();
            Some(Distribution::from_total(10, probs).unwrap())
        };
        let (Some(a), Some(b), Some(c)) = (normalize(&pa), normalize(&pb), normalize(&pc)) else {
            return Ok(());
        };
        let dab = total_variation(&a, &b).unwrap();
        let dba = total_variation(&b, &a).unwrap();
        let dac = total_variation(&a, &c).unwrap();
        let dcb = total_variation(&c, &b).unwrap();
        prop_assert!(total_variation(&a, &a).unwrap() == 0.0);
        prop_assert!((dab - dba).abs() <= 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&dab));
        prop_assert!(dab <= dac + dcb + 1e-12);
    }

    /// The classical reference is a proper distribution with the binomial
    /// mean and strict parity.
    #[test]
    fn classical_reference_shape(
        steps in 1usize..40,
        bias in 0.0..=1.0f64,
    ) {
        let dist = classical_walk_reference(steps, bias).unwrap();
        prop_assert!((dist.total_mass() - 1.0).abs() <= 1e-12);
        let expected_mean = steps as f64 * (2.0 * bias - 1.0);
        prop_assert!((dist.mean() - expected_mean).abs() <= 1e-9);
        for idx in 0..dist.num_bins() {
            let n = dist.momentum_at(idx);
            if (n - steps as i64) % 2 != 0 {
                prop_assert!(dist.total()[idx] == 0.0, "odd-parity bin {n} populated");
            }
        }
    }
}

proptest! {
    // Walk-level properties run full simulations; keep the case count low.
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Shifting every pulse phase by a common offset is a gauge
    /// transformation: the measured distributions do not move.
    #[test]
    fn uniform_pulse_phase_is_gauge(offset in -PI..PI) {
        let base = WalkConfig {
            steps: 3,
            ..WalkConfig::default()
        };
        let shifted = WalkConfig {
            gate: base.gate.chi_shifted(offset),
            coin: base.coin.chi_shifted(offset),
            ..base.clone()
        };
        let a = run_walk(&base).unwrap();
        let b = run_walk(&shifted).unwrap();
        for (da, db) in a.distributions.iter().zip(b.distributions.iter()) {
            for (pa, pb) in da.total().iter().zip(db.total().iter()) {
                prop_assert!((pa - pb).abs() <= 1e-12);
            }
        }
    }

    /// Any forward walk returns exactly under adjoint reversal, whatever the
    /// quasimomentum, pulse jitter, or kick asymmetry.
    #[test]
    fn adjoint_reversal_always_returns(
        steps in 1usize..6,
        beta in 0.0..1.0f64,
        noise in 0.0..0.5f64,
        seed in 0u64..1000,
    ) {
        prop_assume!(beta < 1.0);
        let config = WalkConfig {
            steps,
            beta,
            noise_fraction: noise,
            seed,
            ..WalkConfig::default()
        };
        let record = momentum_walk::reverse_walk(&config, steps, ReversalMode::Adjoint).unwrap();
        let final_state = record.final_state.expect("single trajectory keeps the state");
        let initial = SpinorState::ratchet(2, FRAC_PI_2, beta, final_state.half_width()).unwrap();
        let fidelity = final_state.fidelity(&initial).unwrap();
        prop_assert!((fidelity - 1.0).abs() <= 1e-10, "fidelity {fidelity}");
    }

    /// Identical configurations give bit-identical records.
    #[test]
    fn runs_are_reproducible(seed in 0u64..10_000, noise in 0.0..1.0f64) {
        let config = WalkConfig {
            steps: 3,
            noise_fraction: noise,
            seed,
            ..WalkConfig::default()
        };
        let a = run_walk(&config).unwrap();
        let b = run_walk(&config).unwrap();
        for (da, db) in a.distributions.iter().zip(b.distributions.iter()) {
            prop_assert!(da.total() == db.total());
        }
    }
}

// --- sequence-language round trip ---------------------------------------

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..100.0f64).prop_map(Expr::Number),
        Just(Expr::Pi),
        prop_oneof![Just("k"), Just("rho"), Just("x1")]
            .prop_map(|s: &str| Expr::Constant(s.to_string())),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
        ]
    })
}

fn statement_strategy() -> impl Strategy<Value = Statement> {
    let call = prop_oneof![
        (expr_strategy(), expr_strategy()).prop_map(|(alpha, chi)| Statement::Gate { alpha, chi }),
        (expr_strategy(), expr_strategy()).prop_map(|(alpha, chi)| Statement::Coin { alpha, chi }),
        (expr_strategy(), prop::bool::ANY).prop_map(|(rho, pi)| Statement::BiasedCoin {
            rho,
            variant: if pi { BiasVariant::Pi } else { BiasVariant::MinusHalfPi },
        }),
        (expr_strategy(), expr_strategy()).prop_map(|(k1, k2)| Statement::Kick { k1, k2 }),
        expr_strategy().prop_map(|tau| Statement::Free { tau }),
        expr_strategy().prop_map(|q| Statement::IdealShift { q }),
        prop::bool::ANY.prop_map(|adj| Statement::Reverse {
            mode: if adj { ReversalMode::Adjoint } else { ReversalMode::Composed },
        }),
        prop_oneof![Just("init"), Just("step"), Just("probe")]
            .prop_map(|label: &str| Statement::Measure { label: label.to_string() }),
    ];
    call.prop_recursive(2, 12, 3, |inner| {
        (1usize..4, prop::collection::vec(inner, 1..4)).prop_map(|(count, body)| {
            Statement::Repeat {
                count,
                body: body.into_iter().map(spanned).collect(),
            }
        })
    })
}

fn spanned(statement: Statement) -> Spanned {
    Spanned {
        statement,
        line: 0,
        column: 0,
        index: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Printing a program and parsing it back yields the same tree.
    #[test]
    fn programs_round_trip_through_the_printer(
        statements in prop::collection::vec(statement_strategy(), 1..6)
    ) {
        let program = SequenceProgram {
            statements: statements.into_iter().map(spanned).collect(),
            constants: Default::default(),
        };
        let printed = program.pretty();
        let reparsed = parse(&printed).unwrap_or_else(|e| {
            panic!("canonical text failed to parse: {e}\n{printed}")
        });
        prop_assert_eq!(&reparsed.statements, &program.statements, "text:\n{}", printed);
        // The printer is a fixed point: printing the reparse changes nothing.
        prop_assert_eq!(reparsed.pretty(), printed);
    }

    /// A stray character anywhere in a valid program is reported at or after
    /// the point it was inserted, never before.
    #[test]
    fn parse_errors_localize_corruption(position_seed in 0usize..10_000) {
        let source = "measure(init);\ngate(pi/2, pi);\nkick(-k, k);\nfree(4*pi);\nrepeat 3 {\n    coin(pi/2, -pi/2);\n    kick(-k, k);\n    free(4*pi);\n    measure(step);\n}\n";
        let position = position_seed % source.len();
        // Split points inside a UTF-8 sequence do not arise: the program is
        // pure ASCII.
        let corrupted = format!("{}[{}", &source[..position], &source[position..]);
        let err = parse(&corrupted).expect_err("stray '[' must not parse");
        let (mut line, mut column) = (1usize, 1usize);
        for ch in source[..position].chars() {
            if ch == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        prop_assert!(
            (err.line, err.column) >= (line, column),
            "error at {}:{} precedes corruption at {line}:{column}",
            err.line,
            err.column
        );
    }
}

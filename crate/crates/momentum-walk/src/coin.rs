//! Internal-level (coin) rotations driven by resonant microwave pulses.
//!
//! Every pulse is the SU(2) rotation
//!
//! ```text
//! M(alpha, chi) = [  cos(alpha/2)            e^{-i chi} sin(alpha/2) ]
//!                 [ -e^{i chi} sin(alpha/2)  cos(alpha/2)            ]
//! ```
//!
//! acting on the two internal channels at every momentum class at once.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Result, WalkError};
use crate::state::SpinorState;

/// Unitarity deviation allowed for any pulse matrix.
pub const UNITARITY_TOL: f64 = 1e-12;

/// What role a pulse plays in a sequence. Purely descriptive; the entries
/// alone determine the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinLabel {
    /// Initial beam-splitting pulse `M(pi/2, pi)`.
    Gate,
    /// Per-step balanced pulse `M(pi/2, -pi/2)`.
    Coin,
    /// Unbalanced variant of the gate, `M(alpha_rho, pi)`.
    BiasedGate,
    /// Unbalanced variant of the step coin, `M(alpha_rho, -pi/2)`.
    BiasedCoin,
    /// Mid-sequence time-reversal pulse `M(pi, -pi/2)`.
    Reflection,
    /// Anything else.
    Custom,
}

impl CoinLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoinLabel::Gate => "gate",
            CoinLabel::Coin => "coin",
            CoinLabel::BiasedGate => "biased_gate",
            CoinLabel::BiasedCoin => "biased_coin",
            CoinLabel::Reflection => "reflection",
            CoinLabel::Custom => "custom",
        }
    }
}

/// Which of the two standard axis phases a biased pulse uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasVariant {
    /// `chi = pi` (step-coin axis).
    Pi,
    /// `chi = -pi/2` (gate axis).
    MinusHalfPi,
}

impl BiasVariant {
    pub fn chi(&self) -> f64 {
        match self {
            BiasVariant::Pi => PI,
            BiasVariant::MinusHalfPi => -FRAC_PI_2,
        }
    }
}

/// A 2x2 unitary acting on the internal levels, with a descriptive label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinMatrix {
    pub entries: [[Complex64; 2]; 2],
    pub label: CoinLabel,
}

impl CoinMatrix {
    /// Builds from raw entries, verifying unitarity.
    pub fn from_entries(entries: [[Complex64; 2]; 2], label: CoinLabel) -> Result<Self> {
        let m = Self { entries, label };
        let dev = m.unitarity_deviation();
        if dev > UNITARITY_TOL {
            return Err(WalkError::NonUnitaryCoin { deviation: dev });
        }
        Ok(m)
    }

    /// The rotation `M(alpha, chi)` with the given label.
    pub fn rotation(alpha: f64, chi: f64, label: CoinLabel) -> Self {
        let (c, s) = ((alpha / 2.0).cos(), (alpha / 2.0).sin());
        let e_minus = Complex64::from_polar(1.0, -chi);
        let e_plus = Complex64::from_polar(1.0, chi);
        Self {
            entries: [
                [Complex64::new(c, 0.0), e_minus * s],
                [-e_plus * s, Complex64::new(c, 0.0)],
            ],
            label,
        }
    }

    /// Hermitian adjoint. For rotations, `M(alpha, chi)^dag = M(alpha, chi + pi)`.
    pub fn adjoint(&self) -> Self {
        let e = &self.entries;
        Self {
            entries: [
                [e[0][0].conj(), e[1][0].conj()],
                [e[0][1].conj(), e[1][1].conj()],
            ],
            label: self.label,
        }
    }

    /// Conjugation by `diag(1, e^{i c})`, which shifts the axis phase:
    /// `D(c) M(alpha, chi) D(c)^dag = M(alpha, chi + c)`. Works for any
    /// entries, not only explicit rotations.
    pub fn chi_shifted(&self, c: f64) -> Self {
        let d = Complex64::from_polar(1.0, c);
        let e = &self.entries;
        Self {
            entries: [
                [e[0][0], e[0][1] * d.conj()],
                [e[1][0] * d, e[1][1]],
            ],
            label: self.label,
        }
    }

    /// Conjugation by the channel swap `sigma_x`. For rotations this flips the
    /// axis-phase sign of the adjoint: `sigma_x M(alpha, chi)^dag sigma_x =
    /// M(alpha, -chi)`.
    pub fn flip_conjugated(&self) -> Self {
        let e = &self.entries;
        Self {
            entries: [[e[1][1], e[1][0]], [e[0][1], e[0][0]]],
            label: self.label,
        }
    }

    /// Matrix product `self * rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        let a = &self.entries;
        let b = &rhs.entries;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self {
            entries: out,
            label: CoinLabel::Custom,
        }
    }

    /// Max-abs deviation of `M^dag M` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.adjoint().compose(self);
        let mut dev: f64 = 0.0;
        for (i, row) in prod.entries.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((cell - Complex64::new(target, 0.0)).norm());
            }
        }
        dev
    }

    /// Axis phase recovered from the lower-left entry (`-e^{i chi} sin(alpha/2)`
    /// for rotations); `None` when the matrix is diagonal and the axis is
    /// undefined.
    pub fn axis_phase(&self) -> Option<f64> {
        let e = self.entries[1][0];
        if e.norm() < 1e-12 {
            None
        } else {
            Some((-e).arg())
        }
    }
}

/// The balanced rotation `M(alpha, chi)` labeled by its axis phase: the gate
/// axis (`chi = -pi/2`) or the step-coin axis (`chi = pi`) get their role
/// labels, anything else is custom.
pub fn coin_matrix(alpha: f64, chi: f64) -> CoinMatrix {
    let label = standard_label(alpha, chi);
    CoinMatrix::rotation(alpha, chi, label)
}

fn standard_label(alpha: f64, chi: f64) -> CoinLabel {
    let is = |x: f64, y: f64| (x - y).abs() < 1e-12;
    if is(alpha, FRAC_PI_2) && is(chi, PI) {
        CoinLabel::Gate
    } else if is(alpha, FRAC_PI_2) && is(chi, -FRAC_PI_2) {
        CoinLabel::Coin
    } else if is(alpha, PI) && is(chi, -FRAC_PI_2) {
        CoinLabel::Reflection
    } else {
        CoinLabel::Custom
    }
}

/// The unbalanced pulse `M(2 arccos(sqrt(rho)), chi)`: `rho` is the
/// probability weight the pulse leaves on the incumbent channel.
///
/// `rho = 1/2` reproduces the balanced pulse; `rho = 1` is the identity
/// rotation; `rho = 0` is a pure channel swap (up to phase).
pub fn biased_coin(rho: f64, variant: BiasVariant) -> Result<CoinMatrix> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(WalkError::InvalidParameter(format!(
            "bias weight rho must lie in [0, 1]; got {rho}"
        )));
    }
    let alpha = 2.0 * rho.sqrt().acos();
    let label = match variant {
        BiasVariant::Pi => CoinLabel::BiasedGate,
        BiasVariant::MinusHalfPi => CoinLabel::BiasedCoin,
    };
    Ok(CoinMatrix::rotation(alpha, variant.chi(), label))
}

/// Applies a pulse to every momentum class of the state, after checking the
/// matrix is unitary.
pub fn apply_coin(state: &mut SpinorState, m: &CoinMatrix) -> Result<()> {
    let dev = m.unitarity_deviation();
    if dev > UNITARITY_TOL {
        return Err(WalkError::NonUnitaryCoin { deviation: dev });
    }
    let e = m.entries;
    let [ch0, ch1] = state.channels_mut();
    for (a, b) in ch0.iter_mut().zip(ch1.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = e[0][0] * x + e[0][1] * y;
        *b = e[1][0] * x + e[1][1] * y;
    }
    Ok(())
}

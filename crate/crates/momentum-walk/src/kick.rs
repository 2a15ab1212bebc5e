//! The pulsed standing-wave shift operator and its idealized limit.
//!
//! One physical kick of strength `k_sigma` on channel `sigma` acts in momentum
//! space as the banded convolution
//!
//! ```text
//! c'[n - m] += e^{-i k} (-i)^m J_m(k) c[n]
//! ```
//!
//! (the `e^{-i k}` prefactor is the spatially uniform part of the standing
//! wave and is always kept: it is what the axis-phase compensation schedule
//! tracks). The same operator can be evaluated by sampling the conjugate
//! angle coordinate, multiplying by `e^{-i k (1 + cos theta)}`, and returning
//! to momentum space; both routes agree to high accuracy and serve as mutual
//! checks. The ideal limit replaces the Bessel fan-out with a deterministic
//! one-bin shift whose direction depends on the channel.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, WalkError};
use crate::state::{SpinorState, NORM_TOL};

/// Largest kick strength the truncated propagation is validated for.
pub const MAX_KICK_STRENGTH: f64 = 5.0;

/// Bessel-weight completeness required of a truncation order.
pub const COMPLETENESS_TOL: f64 = 1e-12;

/// Baseline truncation half-bandwidth for the convolution route.
pub const BASE_TRUNCATION: usize = 40;

/// Per-channel kick strengths for one standing-wave pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickParams {
    k1: f64,
    k2: f64,
}

impl KickParams {
    /// Validates both strengths against [`MAX_KICK_STRENGTH`].
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        for (name, k) in [("k1", k1), ("k2", k2)] {
            if !k.is_finite() || k.abs() > MAX_KICK_STRENGTH {
                return Err(WalkError::InvalidParameter(format!(
                    "kick strength {name} = {k} outside validated range |k| <= {MAX_KICK_STRENGTH}"
                )));
            }
        }
        Ok(Self { k1, k2 })
    }

    /// Equal strength on both channels.
    pub fn uniform(k: f64) -> Result<Self> {
        Self::new(k, k)
    }

    /// Strength on channel 0 (internal level |1>).
    pub fn k1(&self) -> f64 {
        self.k1
    }

    /// Strength on channel 1 (internal level |2>).
    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// Difference `k2 - k1` whose accumulation the compensation schedule
    /// cancels.
    pub fn differential(&self) -> f64 {
        self.k2 - self.k1
    }

    /// Parameters of the exact inverse kick.
    pub fn inverse(&self) -> Self {
        Self {
            k1: -self.k1,
            k2: -self.k2,
        }
    }

    pub fn max_strength(&self) -> f64 {
        self.k1.abs().max(self.k2.abs())
    }
}

/// Bessel function of the first kind `J_m(x)` for any integer order and sign
/// of argument, via the reflection identities
/// `J_{-m}(x) = (-1)^m J_m(x)` and `J_m(-x) = (-1)^m J_m(x)`.
pub fn bessel_jn(order: i64, x: f64) -> f64 {
    let mut sign = 1.0;
    let n = if order < 0 {
        if order % 2 != 0 {
            sign = -sign;
        }
        (-order) as i32
    } else {
        order as i32
    };
    let ax = if x < 0.0 {
        if n % 2 != 0 {
            sign = -sign;
        }
        -x
    } else {
        x
    };
    sign * libm::jn(n, ax)
}

/// Weight `1 - sum_{|m| <= order} J_m(k)^2` missing from a truncated fan-out.
pub fn completeness_deficit(k: f64, order: usize) -> f64 {
    let mut total = bessel_jn(0, k).powi(2);
    for m in 1..=order as i64 {
        total += 2.0 * bessel_jn(m, k).powi(2);
    }
    (1.0 - total).max(0.0)
}

/// Smallest half-bandwidth whose Bessel weights capture all but
/// [`COMPLETENESS_TOL`] of a single kick's probability.
pub fn completeness_order(k: f64) -> usize {
    let mut order = 0;
    while completeness_deficit(k, order) > COMPLETENESS_TOL {
        order += 1;
        assert!(order < 10_000, "completeness search diverged");
    }
    order
}

/// Default convolution half-bandwidth: a generous fixed floor, escalated when
/// an unusually strong kick needs more.
pub fn default_truncation(k: f64) -> usize {
    BASE_TRUNCATION.max(2 * completeness_order(k))
}

/// Convolution weights `w[m] = e^{-ik} (-i)^m J_m(k)` for `m in [-order, order]`,
/// indexed by `m + order`.
pub fn kick_weights(k: f64, order: usize) -> Vec<Complex64> {
    let prefactor = Complex64::from_polar(1.0, -k);
    // Powers of (-i) cycle with period 4.
    let unit_powers = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let order_i = order as i64;
    (-order_i..=order_i)
        .map(|m| prefactor * unit_powers[m.rem_euclid(4) as usize] * bessel_jn(m, k))
        .collect()
}

/// Applies one standing-wave kick by truncated Bessel convolution.
///
/// Errors if the truncation order cannot account for the kick's weight, and
/// verifies afterwards that the norm survived within [`NORM_TOL`] (the signal
/// that the state's support kept clear of the window edges).
pub fn apply_kick_bessel(
    state: &mut SpinorState,
    params: &KickParams,
    truncation_order: usize,
) -> Result<()> {
    for k in [params.k1, params.k2] {
        let deficit = completeness_deficit(k, truncation_order);
        if deficit > COMPLETENESS_TOL {
            return Err(WalkError::TruncationInsufficient {
                order: truncation_order,
                k,
                deficit,
            });
        }
    }
    let bins = state.num_bins();
    let order = truncation_order as i64;
    for (channel, k) in [(0usize, params.k1), (1usize, params.k2)] {
        let weights = kick_weights(k, truncation_order);
        let src = state.channel(channel).to_vec();
        let dst = state.channel_mut(channel);
        for (q, slot) in dst.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in -order..=order {
                let from = q as i64 + m;
                if from >= 0 && (from as usize) < bins {
                    acc += weights[(m + order) as usize] * src[from as usize];
                }
            }
            *slot = acc;
        }
    }
    state.check_norm()
}

/// Smallest power of two at least `4 * (2N + 1)`: the default angle-grid
/// resolution for a window of half-width `N`.
pub fn default_angle_points(half_width: usize) -> usize {
    let floor = 4 * (2 * half_width + 1);
    floor.next_power_of_two()
}

/// Applies one standing-wave kick by transforming to the conjugate angle
/// coordinate, multiplying the potential phase `e^{-i k (1 + cos theta)}`,
/// and transforming back.
///
/// `num_angle_points` must be at least twice the number of momentum bins so
/// the circular embedding cannot alias the fan-out back into the window.
pub fn apply_kick_grid(
    state: &mut SpinorState,
    params: &KickParams,
    num_angle_points: usize,
) -> Result<()> {
    let bins = state.num_bins();
    if num_angle_points < 2 * bins {
        return Err(WalkError::GridTooSmall(format!(
            "angle grid of {num_angle_points} points cannot hold {bins} momentum bins twice over"
        )));
    }
    let l = num_angle_points;
    let half_width = state.half_width() as i64;
    let mut planner = FftPlanner::new();
    let to_angle = planner.plan_fft_inverse(l);
    let to_momentum = planner.plan_fft_forward(l);
    let phase_for = |k: f64| -> Vec<Complex64> {
        (0..l)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / l as f64;
                Complex64::from_polar(1.0, -k * (1.0 + theta.cos()))
            })
            .collect()
    };
    for (channel, k) in [(0usize, params.k1), (1usize, params.k2)] {
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        for idx in 0..bins {
            let n = idx as i64 - half_width;
            buf[n.rem_euclid(l as i64) as usize] = state.channel(channel)[idx];
        }
        to_angle.process(&mut buf);
        for (b, ph) in buf.iter_mut().zip(phase_for(k).iter()) {
            *b *= ph;
        }
        to_momentum.process(&mut buf);
        let scale = 1.0 / l as f64;
        let dst = state.channel_mut(channel);
        for (idx, slot) in dst.iter_mut().enumerate() {
            let n = idx as i64 - half_width;
            *slot = buf[n.rem_euclid(l as i64) as usize] * scale;
        }
    }
    state.check_norm()
}

/// The idealized one-bin shift: channel 0 moves up by `q`, channel 1 moves
/// down by `q`. Errors if any population would leave the window.
pub fn apply_ideal_shift(state: &mut SpinorState, q: i64) -> Result<()> {
    let bins = state.num_bins() as i64;
    for (channel, step) in [(0usize, q), (1usize, -q)] {
        let src = state.channel(channel).to_vec();
        let dst = state.channel_mut(channel);
        dst.fill(Complex64::new(0.0, 0.0));
        let mut dropped = 0.0;
        for (idx, amp) in src.into_iter().enumerate() {
            let to = idx as i64 + step;
            if to < 0 || to >= bins {
                dropped += amp.norm_sqr();
            } else {
                dst[to as usize] = amp;
            }
        }
        if dropped > NORM_TOL {
            return Err(WalkError::GridTooSmall(format!(
                "ideal shift by {step} pushes probability {dropped:.3e} off the window"
            )));
        }
    }
    Ok(())
}

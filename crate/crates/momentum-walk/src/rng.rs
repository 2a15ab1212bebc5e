//! Deterministic randomness: one counter-based stream per trajectory, with a
//! fixed draw order, so ensembles are bit-reproducible under any parallel
//! schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as RandDistribution, StandardNormal};
use std::f64::consts::PI;

/// Independent stream for one trajectory: the seed picks the key, the
/// trajectory index picks the stream. Streams never overlap, and trajectory
/// `i`'s draws are independent of how many other trajectories run or on which
/// threads.
pub fn trajectory_rng(seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

/// Gaussian standard deviation equivalent to a full width at half maximum.
pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * 2.0f64.ln()).sqrt())
}

/// Draws one trajectory's quasimomentum.
///
/// With probability `thermal_fraction` the value is uniform on `[0, 1)` (the
/// broad thermal background); otherwise it is Gaussian around `center` with
/// FWHM `fwhm`, wrapped into `[0, 1)`. When both widths are zero the center
/// is returned directly and **no randomness is consumed**, so degenerate
/// ensembles replay exactly like single trajectories.
pub fn sample_beta(rng: &mut ChaCha8Rng, center: f64, fwhm: f64, thermal_fraction: f64) -> f64 {
    if fwhm == 0.0 && thermal_fraction == 0.0 {
        return center;
    }
    let selector: f64 = rng.gen();
    if selector < thermal_fraction {
        rng.gen::<f64>()
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (center + sigma_from_fwhm(fwhm) * z).rem_euclid(1.0)
    }
}

/// Draws one pulse's phase error: uniform over an interval of total width
/// `fraction * 2 pi` centered on zero. Zero fraction consumes no randomness.
pub fn sample_pulse_noise(rng: &mut ChaCha8Rng, fraction: f64) -> f64 {
    if fraction == 0.0 {
        return 0.0;
    }
    rng.gen_range(-fraction * PI..fraction * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut rng = trajectory_rng(7, 3);
            (0..4).map(|_| rng.gen()).collect()
        };
        let b: Vec<u64> = {
            let mut rng = trajectory_rng(7, 3);
            (0..4).map(|_| rng.gen()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut rng = trajectory_rng(7, 4);
            (0..4).map(|_| rng.gen()).collect()
        };
        assert_ne!(a, c);
        let d: Vec<u64> = {
            let mut rng = trajectory_rng(8, 3);
            (0..4).map(|_| rng.gen()).collect()
        };
        assert_ne!(a, d);
    }

    #[test]
    fn degenerate_beta_sampling_consumes_nothing() {
        let mut rng = trajectory_rng(11, 0);
        let beta = sample_beta(&mut rng, 0.3, 0.0, 0.0);
        assert_eq!(beta, 0.3);
        let next: u64 = rng.gen();
        let mut fresh = trajectory_rng(11, 0);
        assert_eq!(next, fresh.gen::<u64>());
    }

    #[test]
    fn zero_noise_consumes_nothing() {
        let mut rng = trajectory_rng(11, 0);
        assert_eq!(sample_pulse_noise(&mut rng, 0.0), 0.0);
        let mut fresh = trajectory_rng(11, 0);
        assert_eq!(rng.gen::<u64>(), fresh.gen::<u64>());
    }

    #[test]
    fn noise_respects_width() {
        let mut rng = trajectory_rng(5, 0);
        for _ in 0..2000 {
            let eps = sample_pulse_noise(&mut rng, 0.2);
            assert!(eps.abs() <= 0.2 * PI);
        }
        // Full randomization spans essentially the whole circle.
        let mut max_seen: f64 = 0.0;
        for _ in 0..2000 {
            max_seen = max_seen.max(sample_pulse_noise(&mut rng, 1.0).abs());
        }
        assert!(max_seen > 0.95 * PI);
    }

    #[test]
    fn thermal_fraction_one_is_uniform() {
        let mut rng = trajectory_rng(13, 2);
        let mut sum = 0.0;
        for _ in 0..4000 {
            let b = sample_beta(&mut rng, 0.0, 0.0, 1.0);
            assert!((0.0..1.0).contains(&b));
            sum += b;
        }
        assert_abs_diff_eq!(sum / 4000.0, 0.5, epsilon = 0.03);
    }

    #[test]
    fn condensate_part_wraps_and_concentrates() {
        let sigma = sigma_from_fwhm(0.025);
        assert_abs_diff_eq!(
            sigma,
            0.025 / (2.0 * (2.0 * 2.0f64.ln()).sqrt()),
            epsilon = 1e-18
        );
        let mut rng = trajectory_rng(17, 1);
        let mut near = 0;
        for _ in 0..2000 {
            let b = sample_beta(&mut rng, 0.0, 0.025, 0.0);
            assert!((0.0..1.0).contains(&b));
            // Wrapped Gaussian around 0: mass within 3 sigma of 0 or 1.
            if b < 3.5 * sigma || b > 1.0 - 3.5 * sigma {
                near += 1;
            }
        }
        assert!(near > 1980, "only {near}/2000 samples near the condensate");
    }
}

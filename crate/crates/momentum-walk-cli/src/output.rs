//! CSV writers for the run products.
//!
//! All numbers are written with Rust's shortest round-trip float formatting,
//! so re-parsing a file recovers the exact bits, and identical runs produce
//! byte-identical files.  Lines end with `\n` on every platform.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use momentum_walk::{Distribution, ScanPoint, WalkRecord};

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Momentum distributions, one measured row per `(step, n)` pair, with the
/// per-channel split alongside the merged probability.
pub fn write_walk_csv(path: &Path, record: &WalkRecord) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "step,n,P,P_sigma1,P_sigma2")?;
    for (step, dist) in record.distributions.iter().enumerate() {
        let ch0 = dist.channel(0);
        let ch1 = dist.channel(1);
        for idx in 0..dist.num_bins() {
            let n = dist.momentum_at(idx);
            let p = dist.total()[idx];
            let p0 = ch0.map_or(0.0, |c| c[idx]);
            let p1 = ch1.map_or(0.0, |c| c[idx]);
            writeln!(w, "{step},{n},{p},{p0},{p1}")?;
        }
    }
    w.flush()
}

/// Scalar observables per measured row.
pub fn write_stats_csv(path: &Path, record: &WalkRecord) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "step,mean_p,energy,stddev,entropy")?;
    for (step, stats) in record.stats.iter().enumerate() {
        writeln!(
            w,
            "{step},{},{},{},{}",
            stats.mean_momentum, stats.mean_energy, stats.std_dev, stats.coin_entropy
        )?;
    }
    w.flush()
}

/// Coin-phase scan: one row per `(phi_c, step)` pair.
pub fn write_scan_csv(path: &Path, points: &[ScanPoint], at_steps: &[usize]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "phi_c,step,mean_p")?;
    for point in points {
        for (step, mean) in at_steps.iter().zip(point.mean_momentum.iter()) {
            writeln!(w, "{},{step},{mean}", point.coin_phase)?;
        }
    }
    w.flush()
}

/// Noise-sweep summary: scalar observables per (noise level, step).
pub fn write_noise_sweep_csv(path: &Path, sweeps: &[(f64, WalkRecord)]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "noise,step,mean_p,energy,stddev,entropy")?;
    for (noise, record) in sweeps {
        for (step, stats) in record.stats.iter().enumerate() {
            writeln!(
                w,
                "{noise},{step},{},{},{},{}",
                stats.mean_momentum, stats.mean_energy, stats.std_dev, stats.coin_entropy
            )?;
        }
    }
    w.flush()
}

/// Classical reference distribution on the parity-matched lattice sites.
pub fn write_classical_csv(path: &Path, dist: &Distribution, steps: usize) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "n,P")?;
    let j = steps as i64;
    let mut n = -j;
    while n <= j {
        writeln!(w, "{n},{}", dist.probability(n))?;
        n += 2;
    }
    w.flush()
}

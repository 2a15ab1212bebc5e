//! The step sequencer: full walks, noise/quasimomentum ensembles, time
//! reversal, coin-phase scans, and the classical reference distribution.
//!
//! One walk step is pulse → standing-wave shift → free evolution. The
//! standing wave's uniform phase `e^{-i k_sigma}` makes consecutive pulses see
//! an ever-growing relative phase between the internal levels; the engine
//! compensates by advancing the m-th pulse's axis phase by `-m * (k2 - k1)`
//! (the `compensated` policy), exposes the raw drift (`uncompensated`), or
//! sweeps a caller-chosen advance on the step coins while the gate keeps the
//! true compensation (`explicit`). Idealized one-bin shifts carry no uniform
//! phase, so walks built on them bypass the schedule under every policy.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::coin::{apply_coin, coin_matrix, CoinMatrix};
use crate::error::{Result, WalkError};
use crate::free::{apply_free_evolution, RESONANT_TAU};
use crate::kick::{
    apply_ideal_shift, apply_kick_bessel, apply_kick_grid, completeness_order,
    default_angle_points, default_truncation, KickParams,
};
use crate::rng::{sample_beta, sample_pulse_noise, trajectory_rng};
use crate::state::{coin_entropy_from_density, Distribution, SpinorState};

/// How the axis phases of successive pulses track the standing wave's uniform
/// phase drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlobalPhasePolicy {
    /// Every pulse (gate included) is advanced by the exact per-kick
    /// differential `k2 - k1`.
    Compensated,
    /// No adjustment; the drift is left in.
    Uncompensated,
    /// The step coins are advanced by the given phase per kick while the gate
    /// keeps the exact compensation — the sweep used to locate the symmetry
    /// points.
    Explicit(f64),
}

/// Which implementation realizes the momentum shift each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRealization {
    /// Physical kick by truncated Bessel convolution (default).
    Bessel,
    /// Physical kick via the conjugate angle grid (cross-check route).
    Grid,
    /// Idealized deterministic one-bin shift (no uniform phase, no schedule).
    Ideal,
}

/// How a walk is undone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReversalMode {
    /// Exact adjoint of every applied operation, in reverse order.
    Adjoint,
    /// The laboratory echo: a reflection pulse, channel-swapped conjugate
    /// pulses with forward kicks, and closing pulses. Requires antisymmetric
    /// kicks (`k2 = -k1`).
    Composed,
}

/// Initial directed state: `components` consecutive momentum classes with a
/// relative phase ramp `phase`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub components: usize,
    pub phase: f64,
}

/// Complete description of a walk experiment.
#[derive(Debug, Clone)]
pub struct WalkConfig {
    /// Number of steps `j` (each step = one pulse + one shift + free flight).
    pub steps: usize,
    /// Per-channel kick strengths.
    pub kick: KickParams,
    /// Pulse used at step 1.
    pub gate: CoinMatrix,
    /// Pulse used at steps 2..j.
    pub coin: CoinMatrix,
    pub phase_policy: GlobalPhasePolicy,
    pub shift: ShiftRealization,
    /// Free-flight phase period between shifts.
    pub tau: f64,
    /// Quasimomentum of the single-trajectory walk and center of the
    /// condensate ensemble.
    pub beta: f64,
    /// Pulse phase jitter as a fraction of the full circle.
    pub noise_fraction: f64,
    /// Condensate quasimomentum spread (full width at half maximum).
    pub beta_fwhm: f64,
    /// Fraction of trajectories drawn from the uniform thermal background.
    pub thermal_fraction: f64,
    pub num_beta_samples: usize,
    pub num_noise_realizations: usize,
    pub seed: u64,
    /// Momentum window half-width; `None` sizes it from the kick strength and
    /// step count.
    pub grid_half_width: Option<usize>,
    pub initial: InitialSpec,
}

impl Default for WalkConfig {
    /// The standard 15-step walk: `k = 1.45` antisymmetric kicks, gate
    /// `M(pi/2, pi)`, coin `M(pi/2, -pi/2)`, compensated phases, resonant free
    /// flight, two-component directed initial state, no ensembles.
    fn default() -> Self {
        Self {
            steps: 15,
            kick: KickParams::new(-1.45, 1.45).expect("default kick in range"),
            gate: coin_matrix(FRAC_PI_2, PI),
            coin: coin_matrix(FRAC_PI_2, -FRAC_PI_2),
            phase_policy: GlobalPhasePolicy::Compensated,
            shift: ShiftRealization::Bessel,
            tau: RESONANT_TAU,
            beta: 0.0,
            noise_fraction: 0.0,
            beta_fwhm: 0.0,
            thermal_fraction: 0.0,
            num_beta_samples: 1,
            num_noise_realizations: 1,
            seed: 1,
            grid_half_width: None,
            initial: InitialSpec {
                components: 2,
                phase: FRAC_PI_2,
            },
        }
    }
}

impl WalkConfig {
    /// The standard walk with a symmetric kick magnitude `k` (channel 0 gets
    /// `-k`, channel 1 gets `+k`).
    pub fn with_kick_magnitude(k: f64) -> Result<Self> {
        Ok(Self {
            kick: KickParams::new(-k, k)?,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(WalkError::InvalidParameter(format!(
                "noise fraction must lie in [0, 1]; got {}",
                self.noise_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.thermal_fraction) {
            return Err(WalkError::InvalidParameter(format!(
                "thermal fraction must lie in [0, 1]; got {}",
                self.thermal_fraction
            )));
        }
        if !self.beta_fwhm.is_finite() || self.beta_fwhm < 0.0 {
            return Err(WalkError::InvalidParameter(format!(
                "quasimomentum spread must be a finite non-negative width; got {}",
                self.beta_fwhm
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(WalkError::InvalidParameter(format!(
                "quasimomentum must lie in [0, 1); got {}",
                self.beta
            )));
        }
        if !self.tau.is_finite() {
            return Err(WalkError::InvalidParameter(
                "free-flight period must be finite".into(),
            ));
        }
        if self.num_beta_samples == 0 || self.num_noise_realizations == 0 {
            return Err(WalkError::InvalidParameter(
                "ensemble sizes must be at least 1".into(),
            ));
        }
        if self.initial.components == 0 {
            return Err(WalkError::InvalidParameter(
                "initial state needs at least one momentum component".into(),
            ));
        }
        if let GlobalPhasePolicy::Explicit(phi) = self.phase_policy {
            if !phi.is_finite() {
                return Err(WalkError::InvalidParameter(
                    "explicit coin-phase advance must be finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of independent trajectories an ensemble run propagates.
    pub fn total_trajectories(&self) -> usize {
        self.num_beta_samples * self.num_noise_realizations
    }

    fn ensemble_active(&self) -> bool {
        self.beta_fwhm > 0.0 || self.thermal_fraction > 0.0
    }
}

/// Window half-width that comfortably holds `total_kicks` shifts: each kick
/// spreads at most its completeness order per application (ideal shifts spread
/// exactly one bin), plus margin for the initial state and the leak guard.
pub fn default_half_width(config: &WalkConfig, total_kicks: usize) -> usize {
    let floor = config.initial.components + 4;
    match config.shift {
        ShiftRealization::Ideal => (config.initial.components + total_kicks + 4).max(floor),
        _ => {
            let order = completeness_order(config.kick.max_strength());
            (4 + 2 * total_kicks * order).max(floor)
        }
    }
}

/// Grid and truncation parameters fixed for a run.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedGrid {
    pub half_width: usize,
    pub truncation_order: usize,
    pub angle_points: usize,
}

fn resolve_grid(config: &WalkConfig, total_kicks: usize) -> ResolvedGrid {
    let half_width = config
        .grid_half_width
        .unwrap_or_else(|| default_half_width(config, total_kicks));
    ResolvedGrid {
        half_width,
        truncation_order: default_truncation(config.kick.max_strength()),
        angle_points: default_angle_points(half_width),
    }
}

/// Scalar observables of one recorded row, computed from the (possibly
/// ensemble-averaged) distribution and reduced coin density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub mean_momentum: f64,
    pub mean_energy: f64,
    pub std_dev: f64,
    pub coin_entropy: f64,
}

/// Reproducibility metadata attached to every record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunMeta {
    pub seed: u64,
    pub trajectories: usize,
    pub half_width: usize,
    pub truncation_order: usize,
    pub angle_points: usize,
}

/// Time series of a walk: one row per recorded instant (row 0 = initial
/// state).
#[derive(Debug, Clone)]
pub struct WalkRecord {
    pub distributions: Vec<Distribution>,
    pub stats: Vec<StepStats>,
    /// Final wavefunction, kept for single-trajectory runs.
    pub final_state: Option<SpinorState>,
    pub meta: RunMeta,
}

impl WalkRecord {
    pub fn num_rows(&self) -> usize {
        self.distributions.len()
    }

    /// `(step, sigma)` pairs for scaling fits.
    pub fn sigma_series(&self) -> Vec<(usize, f64)> {
        self.stats
            .iter()
            .enumerate()
            .map(|(j, s)| (j, s.std_dev))
            .collect()
    }
}

pub(crate) fn row_stats(dist: &Distribution, density: (f64, f64, Complex64)) -> StepStats {
    StepStats {
        mean_momentum: dist.mean(),
        mean_energy: dist.mean_energy(),
        std_dev: dist.std_dev(),
        coin_entropy: coin_entropy_from_density(density.0, density.1, density.2),
    }
}

/// What one trajectory does.
#[derive(Debug, Clone, Copy)]
enum RunPlan {
    Forward(usize),
    Echo { j_forward: usize, mode: ReversalMode },
}

impl RunPlan {
    fn rows(&self) -> usize {
        match self {
            RunPlan::Forward(steps) => steps + 1,
            RunPlan::Echo { j_forward, .. } => 2 * j_forward + 1,
        }
    }

    fn total_kicks(&self) -> usize {
        match self {
            RunPlan::Forward(steps) => *steps,
            RunPlan::Echo { j_forward, .. } => 2 * j_forward,
        }
    }
}

/// How one step's momentum shift was realized, for replay during reversal.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ShiftTrace {
    Kick(KickParams),
    Ideal(i64),
}

/// Everything needed to undo one applied step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepTrace {
    /// The pulse exactly as applied (schedule and jitter folded in).
    applied: CoinMatrix,
    /// The pulse with only its jitter — what the echo sequence conjugates.
    echo: CoinMatrix,
    /// Momentum shift that followed the pulse; filled when it is applied.
    shift: Option<ShiftTrace>,
    /// Net free-flight period accumulated after the shift.
    tau: f64,
}

/// A single trajectory's propagation engine. Owns the state, the trajectory
/// RNG, the kick counter that drives the phase schedule, and the step history
/// that reversal replays.
pub(crate) struct Propagator<'a> {
    config: &'a WalkConfig,
    grid: ResolvedGrid,
    pub(crate) state: SpinorState,
    rng: ChaCha8Rng,
    kicks_applied: usize,
    history: Vec<StepTrace>,
    /// Set when the applied operations stop decomposing into
    /// pulse-shift-flight steps; such sequences cannot be reversed.
    unreplayable: bool,
}

impl<'a> Propagator<'a> {
    pub(crate) fn new(
        config: &'a WalkConfig,
        grid: ResolvedGrid,
        trajectory: u64,
        draw_beta: bool,
    ) -> Result<Self> {
        let mut rng = trajectory_rng(config.seed, trajectory);
        let beta = if draw_beta && config.ensemble_active() {
            sample_beta(
                &mut rng,
                config.beta,
                config.beta_fwhm,
                config.thermal_fraction,
            )
        } else {
            config.beta
        };
        let state = SpinorState::ratchet(
            config.initial.components,
            config.initial.phase,
            beta,
            grid.half_width,
        )?;
        Ok(Self {
            config,
            grid,
            state,
            rng,
            kicks_applied: 0,
            history: Vec::new(),
            unreplayable: false,
        })
    }

    /// Axis-phase advance the schedule gives the next pulse. Idealized shifts
    /// have no uniform phase, so there is nothing to track.
    fn schedule_shift(&self, is_gate: bool) -> f64 {
        if self.config.shift == ShiftRealization::Ideal {
            return 0.0;
        }
        let per_kick = match self.config.phase_policy {
            GlobalPhasePolicy::Compensated => self.config.kick.differential(),
            GlobalPhasePolicy::Uncompensated => 0.0,
            GlobalPhasePolicy::Explicit(phi) => {
                if is_gate {
                    self.config.kick.differential()
                } else {
                    phi
                }
            }
        };
        -((self.kicks_applied + 1) as f64) * per_kick
    }

    /// Applies a pulse through the schedule. Forward pulses draw jitter and
    /// open a new step trace; echo pulses are replayed without fresh draws.
    pub(crate) fn apply_pulse(
        &mut self,
        nominal: CoinMatrix,
        is_gate: bool,
        forward: bool,
    ) -> Result<()> {
        let eps = if forward {
            sample_pulse_noise(&mut self.rng, self.config.noise_fraction)
        } else {
            0.0
        };
        let applied = nominal.chi_shifted(self.schedule_shift(is_gate) + eps);
        apply_coin(&mut self.state, &applied)?;
        if forward {
            self.history.push(StepTrace {
                applied,
                echo: nominal.chi_shifted(eps),
                shift: None,
                tau: 0.0,
            });
        }
        Ok(())
    }

    /// Applies a momentum shift. With `trace` set, the shift is recorded into
    /// the trace of the pulse it follows (a shift with no open trace slot
    /// makes the sequence unreplayable).
    pub(crate) fn apply_shift(
        &mut self,
        shift: &ShiftTrace,
        inverse: bool,
        step_label: usize,
        trace: bool,
    ) -> Result<()> {
        match shift {
            ShiftTrace::Kick(params) => {
                let params = if inverse { params.inverse() } else { *params };
                match self.config.shift {
                    ShiftRealization::Grid => {
                        apply_kick_grid(&mut self.state, &params, self.grid.angle_points)?
                    }
                    _ => apply_kick_bessel(&mut self.state, &params, self.grid.truncation_order)?,
                }
            }
            ShiftTrace::Ideal(q) => {
                apply_ideal_shift(&mut self.state, if inverse { -q } else { *q })?
            }
        }
        self.kicks_applied += 1;
        if trace {
            match self.history.last_mut() {
                Some(last) if last.shift.is_none() => last.shift = Some(*shift),
                _ => self.unreplayable = true,
            }
        }
        self.state.check_leakage(step_label)
    }

    /// Applies free flight. With `trace` set, the period accumulates on the
    /// current step's trace (flight before the step's shift cannot be undone
    /// by the step template and marks the sequence unreplayable).
    pub(crate) fn apply_free(&mut self, tau: f64, trace: bool) -> Result<()> {
        if trace {
            match self.history.last_mut() {
                Some(last) if last.shift.is_some() => last.tau += tau,
                _ => self.unreplayable = true,
            }
        }
        apply_free_evolution(&mut self.state, tau)
    }

    /// Number of steps available for reversal, after checking the history
    /// decomposes into complete pulse-shift-flight steps.
    fn reversible_steps(&self) -> Result<usize> {
        if self.unreplayable {
            return Err(WalkError::InvalidParameter(
                "the applied sequence does not decompose into pulse-shift-flight steps, \
                 so reversal is undefined"
                    .into(),
            ));
        }
        if self.history.is_empty() {
            return Err(WalkError::InvalidParameter(
                "reversal needs at least one completed forward step".into(),
            ));
        }
        if self.history.iter().any(|t| t.shift.is_none()) {
            return Err(WalkError::InvalidParameter(
                "every pulse must be followed by a momentum shift before reversal".into(),
            ));
        }
        Ok(self.history.len())
    }

    fn default_shift_trace(&self) -> ShiftTrace {
        match self.config.shift {
            ShiftRealization::Ideal => ShiftTrace::Ideal(1),
            _ => ShiftTrace::Kick(self.config.kick),
        }
    }

    /// One forward walk step: pulse, shift, free flight.
    fn forward_step(&mut self, step: usize) -> Result<()> {
        let is_gate = step == 1;
        let nominal = if is_gate {
            self.config.gate
        } else {
            self.config.coin
        };
        let shift = self.default_shift_trace();
        self.apply_pulse(nominal, is_gate, true)?;
        self.apply_shift(&shift, false, step, true)?;
        self.apply_free(self.config.tau, true)
    }

    /// Exact adjoint of every traced step, newest first: undo the free
    /// flight, undo the shift, undo the pulse. `sink` receives one row per
    /// reversed step; the trace is consumed.
    pub(crate) fn reverse_adjoint(
        &mut self,
        sink: &mut dyn FnMut(usize, &SpinorState),
    ) -> Result<()> {
        let j = self.reversible_steps()?;
        for m in (1..=j).rev() {
            let trace = self.history[m - 1];
            let shift = trace.shift.expect("validated by reversible_steps");
            let row = 2 * j + 1 - m;
            self.apply_free(-trace.tau, false)?;
            self.apply_shift(&shift, true, row, false)?;
            apply_coin(&mut self.state, &trace.applied.adjoint())?;
            sink(row, &self.state);
        }
        self.history.clear();
        Ok(())
    }

    /// The laboratory echo: reflection pulse + forward shift, then for each
    /// interior step the channel-swapped conjugate pulse + forward shift,
    /// then the closing pulse pair. The channel swap turns each antisymmetric
    /// forward shift into its own inverse, so the sequence telescopes to the
    /// identity; the last row is recorded after the closing pulses.
    pub(crate) fn reverse_composed(
        &mut self,
        sink: &mut dyn FnMut(usize, &SpinorState),
    ) -> Result<()> {
        let j = self.reversible_steps()?;
        for trace in &self.history {
            if let Some(ShiftTrace::Kick(params)) = trace.shift {
                if (params.k1() + params.k2()).abs() > 1e-12 {
                    return Err(WalkError::ComposedReversalUnsupported {
                        k1: params.k1(),
                        k2: params.k2(),
                    });
                }
            }
        }

        // Reflection step, echoing the most recent forward step's shift.
        let last = self.history[j - 1];
        let last_shift = last.shift.expect("validated by reversible_steps");
        self.apply_pulse(coin_matrix(PI, -FRAC_PI_2), false, false)?;
        self.apply_shift(&last_shift, false, j + 1, false)?;
        self.apply_free(last.tau, false)?;
        if j > 1 {
            sink(j + 1, &self.state);
        }

        // Interior steps m = j .. 2, each paired with its forward shift.
        for m in (2..=j).rev() {
            let trace = self.history[m - 1];
            let shift = trace.shift.expect("validated by reversible_steps");
            let pulse = trace.echo.adjoint().flip_conjugated();
            let row = 2 * j + 2 - m;
            self.apply_pulse(pulse, false, false)?;
            self.apply_shift(&shift, false, row, false)?;
            self.apply_free(trace.tau, false)?;
            if m > 2 {
                sink(row, &self.state);
            }
        }

        // Closing pulse pair: the anti-reflection and the jitter-adjusted
        // gate conjugate. The final row lands after both.
        let gate_echo = self.history[0].echo;
        self.apply_pulse(coin_matrix(PI, FRAC_PI_2), false, false)?;
        self.apply_pulse(gate_echo.adjoint(), false, false)?;
        sink(2 * j, &self.state);
        self.history.clear();
        Ok(())
    }
}

fn execute_plan(
    prop: &mut Propagator,
    plan: RunPlan,
    sink: &mut dyn FnMut(usize, &SpinorState),
) -> Result<()> {
    sink(0, &prop.state);
    match plan {
        RunPlan::Forward(steps) => {
            for step in 1..=steps {
                prop.forward_step(step)?;
                sink(step, &prop.state);
            }
        }
        RunPlan::Echo { j_forward, mode } => {
            for step in 1..=j_forward {
                prop.forward_step(step)?;
                sink(step, &prop.state);
            }
            match mode {
                ReversalMode::Adjoint => prop.reverse_adjoint(sink)?,
                ReversalMode::Composed => prop.reverse_composed(sink)?,
            }
        }
    }
    Ok(())
}

/// Row-wise sums over trajectories, merged in a fixed order so results do not
/// depend on the parallel schedule.
struct EnsembleAccumulator {
    bins: usize,
    ch0: Vec<f64>,
    ch1: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
    coherence: Vec<Complex64>,
}

impl EnsembleAccumulator {
    fn new(rows: usize, bins: usize) -> Self {
        Self {
            bins,
            ch0: vec![0.0; rows * bins],
            ch1: vec![0.0; rows * bins],
            p0: vec![0.0; rows],
            p1: vec![0.0; rows],
            coherence: vec![Complex64::new(0.0, 0.0); rows],
        }
    }

    fn add_state(&mut self, row: usize, state: &SpinorState) {
        let base = row * self.bins;
        for (idx, amp) in state.channel(0).iter().enumerate() {
            self.ch0[base + idx] += amp.norm_sqr();
        }
        for (idx, amp) in state.channel(1).iter().enumerate() {
            self.ch1[base + idx] += amp.norm_sqr();
        }
        let (p0, p1, coh) = state.coin_density();
        self.p0[row] += p0;
        self.p1[row] += p1;
        self.coherence[row] += coh;
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.ch0.iter_mut().zip(other.ch0.iter()) {
            *a += b;
        }
        for (a, b) in self.ch1.iter_mut().zip(other.ch1.iter()) {
            *a += b;
        }
        for (a, b) in self.p0.iter_mut().zip(other.p0.iter()) {
            *a += b;
        }
        for (a, b) in self.p1.iter_mut().zip(other.p1.iter()) {
            *a += b;
        }
        for (a, b) in self.coherence.iter_mut().zip(other.coherence.iter()) {
            *a += b;
        }
    }

    fn finalize(
        self,
        rows: usize,
        trajectories: usize,
        half_width: usize,
        meta: RunMeta,
        final_state: Option<SpinorState>,
    ) -> Result<WalkRecord> {
        let scale = 1.0 / trajectories as f64;
        let mut distributions = Vec::with_capacity(rows);
        let mut stats = Vec::with_capacity(rows);
        for row in 0..rows {
            let base = row * self.bins;
            let ch0: Vec<f64> = self.ch0[base..base + self.bins]
                .iter()
                .map(|p| p * scale)
                .collect();
            let ch1: Vec<f64> = self.ch1[base..base + self.bins]
                .iter()
                .map(|p| p * scale)
                .collect();
            let dist = Distribution::from_channels(half_width, [ch0, ch1])?;
            let density = (
                self.p0[row] * scale,
                self.p1[row] * scale,
                self.coherence[row] * scale,
            );
            stats.push(row_stats(&dist, density));
            distributions.push(dist);
        }
        Ok(WalkRecord {
            distributions,
            stats,
            final_state,
            meta,
        })
    }
}

/// Trajectories per parallel work unit. Fixed so the floating-point reduction
/// tree — and therefore every output bit — is independent of thread count.
const TRAJECTORIES_PER_BLOCK: usize = 32;

fn run_plan(config: &WalkConfig, plan: RunPlan) -> Result<WalkRecord> {
    config.validate()?;
    let grid = resolve_grid(config, plan.total_kicks());
    let trajectories = config.total_trajectories();
    let rows = plan.rows();
    let meta = RunMeta {
        seed: config.seed,
        trajectories,
        half_width: grid.half_width,
        truncation_order: grid.truncation_order,
        angle_points: grid.angle_points,
    };

    if trajectories == 1 {
        let mut acc = EnsembleAccumulator::new(rows, 2 * grid.half_width + 1);
        let mut prop = Propagator::new(config, grid, 0, true)?;
        execute_plan(&mut prop, plan, &mut |row, state| acc.add_state(row, state))?;
        return acc.finalize(rows, 1, grid.half_width, meta, Some(prop.state));
    }

    let num_blocks = trajectories.div_ceil(TRAJECTORIES_PER_BLOCK);
    let partials: Result<Vec<EnsembleAccumulator>> = (0..num_blocks)
        .into_par_iter()
        .map(|block| {
            let lo = block * TRAJECTORIES_PER_BLOCK;
            let hi = ((block + 1) * TRAJECTORIES_PER_BLOCK).min(trajectories);
            let mut acc = EnsembleAccumulator::new(rows, 2 * grid.half_width + 1);
            for trajectory in lo..hi {
                let mut prop = Propagator::new(config, grid, trajectory as u64, true)?;
                execute_plan(&mut prop, plan, &mut |row, state| acc.add_state(row, state))?;
            }
            Ok(acc)
        })
        .collect();
    let partials = partials?;
    let mut total = EnsembleAccumulator::new(rows, 2 * grid.half_width + 1);
    for partial in &partials {
        total.merge(partial);
    }
    total.finalize(rows, trajectories, grid.half_width, meta, None)
}

/// Propagates one trajectory with the configured quasimomentum held fixed
/// (ensemble widths are ignored; pulse jitter still uses the trajectory's own
/// draws). Record rows: initial state plus one per step.
pub fn run_walk(config: &WalkConfig) -> Result<WalkRecord> {
    config.validate()?;
    let plan = RunPlan::Forward(config.steps);
    let grid = resolve_grid(config, plan.total_kicks());
    let rows = plan.rows();
    let meta = RunMeta {
        seed: config.seed,
        trajectories: 1,
        half_width: grid.half_width,
        truncation_order: grid.truncation_order,
        angle_points: grid.angle_points,
    };
    let mut acc = EnsembleAccumulator::new(rows, 2 * grid.half_width + 1);
    let mut prop = Propagator::new(config, grid, 0, false)?;
    execute_plan(&mut prop, plan, &mut |row, state| acc.add_state(row, state))?;
    acc.finalize(rows, 1, grid.half_width, meta, Some(prop.state))
}

/// Propagates `num_beta_samples * num_noise_realizations` trajectories —
/// trajectory `i` uses the RNG stream derived from `(seed, i)` — and averages
/// their distributions arithmetically. Scalar rows are recomputed from the
/// averaged distribution and averaged coin density. The degenerate ensemble
/// (no widths, one trajectory) reproduces `run_walk` exactly.
pub fn run_ensemble(config: &WalkConfig) -> Result<WalkRecord> {
    run_plan(config, RunPlan::Forward(config.steps))
}

/// Runs `j_forward` steps and then undoes them in the chosen mode; honors
/// ensembles the same way `run_ensemble` does. Record rows: `2 j_forward + 1`.
pub fn reverse_walk(
    config: &WalkConfig,
    j_forward: usize,
    mode: ReversalMode,
) -> Result<WalkRecord> {
    if j_forward == 0 {
        return Err(WalkError::InvalidParameter(
            "reversal needs at least one forward step".into(),
        ));
    }
    if mode == ReversalMode::Composed && config.shift != ShiftRealization::Ideal {
        let (k1, k2) = (config.kick.k1(), config.kick.k2());
        if (k1 + k2).abs() > 1e-12 {
            return Err(WalkError::ComposedReversalUnsupported { k1, k2 });
        }
    }
    run_plan(config, RunPlan::Echo { j_forward, mode })
}

/// One point of a coin-phase sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub coin_phase: f64,
    /// Mean momentum at each requested step, parallel to `at_steps`.
    pub mean_momentum: Vec<f64>,
}

/// Sweeps the per-kick coin-phase advance over `phi_values`, running the walk
/// at each value and reading the mean momentum at the requested steps.
pub fn scan_coin_phase(
    config: &WalkConfig,
    phi_values: &[f64],
    at_steps: &[usize],
) -> Result<Vec<ScanPoint>> {
    config.validate()?;
    for &step in at_steps {
        if step > config.steps {
            return Err(WalkError::InvalidParameter(format!(
                "scan requests step {step} but the walk has {} steps",
                config.steps
            )));
        }
    }
    phi_values
        .iter()
        .map(|&phi| {
            let mut swept = config.clone();
            swept.phase_policy = GlobalPhasePolicy::Explicit(phi);
            let record = run_ensemble(&swept)?;
            Ok(ScanPoint {
                coin_phase: phi,
                mean_momentum: at_steps
                    .iter()
                    .map(|&s| record.stats[s].mean_momentum)
                    .collect(),
            })
        })
        .collect()
}

/// Per-step pulse phases (nominal axis phase plus jitter) one trajectory
/// would see: the noise model in isolation. Uses the same draw order as the
/// propagation engine.
pub fn apply_noise_schedule(config: &WalkConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (1..=config.steps)
        .map(|step| {
            let nominal = if step == 1 { &config.gate } else { &config.coin };
            let base = nominal.axis_phase().unwrap_or(0.0);
            base + sample_pulse_noise(rng, config.noise_fraction)
        })
        .collect()
}

/// The directed classical reference: a `steps`-step binomial on the parity
/// class of `steps`, with `step_bias` the probability of a `+1` move.
pub fn classical_walk_reference(steps: usize, step_bias: f64) -> Result<Distribution> {
    if !(0.0..=1.0).contains(&step_bias) {
        return Err(WalkError::InvalidParameter(format!(
            "step bias must lie in [0, 1]; got {step_bias}"
        )));
    }
    let j = steps;
    let half_width = j;
    let mut total = vec![0.0; 2 * half_width + 1];
    let p = step_bias;
    let q = 1.0 - step_bias;
    let mut coefficient = 1.0f64; // C(j, i), updated multiplicatively
    for i in 0..=j {
        let n = 2 * i as i64 - j as i64;
        total[(n + half_width as i64) as usize] =
            coefficient * p.powi(i as i32) * q.powi((j - i) as i32);
        if i < j {
            coefficient *= (j - i) as f64 / (i + 1) as f64;
        }
    }
    Distribution::from_total(half_width, total)
}

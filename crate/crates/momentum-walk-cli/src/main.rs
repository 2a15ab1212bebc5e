//! `mwalk` — command-line driver for the momentum-walk simulator.
//!
//! Every subcommand resolves its settings in the same order (built-in
//! defaults, then `--config FILE`, then individual flags), writes its data as
//! CSV, and drops a manifest alongside.  The manifest is itself a config
//! file: `mwalk <subcommand> --config <manifest>` reproduces the run byte for
//! byte.  All randomness derives from `seed`; nothing is read from the
//! environment.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical guard tripped
//! (leaked grid, broken norm, unsupported reversal, ...).

mod settings;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use momentum_walk::{
    apply_kick_bessel, apply_kick_grid, classical_walk_reference, default_angle_points,
    default_truncation, parse, reverse_walk, run_ensemble, scan_coin_phase, KickParams,
    SequenceProgram, SpinorState, WalkError, WalkRecord, RESONANT_TAU,
};

use settings::{Settings, SettingsError, DEFAULT_K};

#[derive(Parser)]
#[command(
    name = "mwalk",
    version,
    about = "Discrete-time walks on the momentum ladder of a kicked two-level atom",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the standard walk and write distributions plus scalar observables.
    Run(RunArgs),
    /// Execute a pulse-sequence script (.qws file).
    Script(ScriptArgs),
    /// Sweep the per-step coin phase and record the mean momentum.
    ScanPhase(ScanPhaseArgs),
    /// Run the walk at several pulse-noise levels.
    NoiseSweep(NoiseSweepArgs),
    /// Walk forward, then run the echo sequence back to the start.
    Reverse(ReverseArgs),
    /// Walk with biased pulses in place of the balanced ones.
    Bias(BiasArgs),
    /// Classical random-walk reference distribution.
    Classical(ClassicalArgs),
    /// Quick internal consistency checks; exits non-zero on failure.
    Selftest,
}

/// Flags shared by the simulating subcommands.  Every flag overrides the
/// matching config-file key; unset flags leave the resolved value alone.
#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Config file of `key = value` lines (a previous run's manifest works).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Symmetric kick magnitude; sets k1 = -K and k2 = +K.
    #[arg(long, value_name = "K", allow_negative_numbers = true)]
    k: Option<f64>,
    /// Kick strength on channel 1 (overrides --k).
    #[arg(long, value_name = "K1", allow_negative_numbers = true)]
    k1: Option<f64>,
    /// Kick strength on channel 2 (overrides --k).
    #[arg(long, value_name = "K2", allow_negative_numbers = true)]
    k2: Option<f64>,
    /// Number of walk steps.
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Random seed; identical seeds give byte-identical outputs.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Pulse-phase noise fraction r (uniform in [-r*pi, r*pi] per pulse).
    #[arg(long, value_name = "R", allow_negative_numbers = true)]
    noise: Option<f64>,
    /// Quasimomentum for single-trajectory runs, in [0, 1).
    #[arg(long, value_name = "BETA", allow_negative_numbers = true)]
    beta: Option<f64>,
    /// FWHM of the Gaussian quasimomentum spread (enables ensembles).
    #[arg(long = "beta-fwhm", value_name = "FWHM", allow_negative_numbers = true)]
    beta_fwhm: Option<f64>,
    /// Fraction of trajectories drawing quasimomentum uniformly.
    #[arg(long, value_name = "F", allow_negative_numbers = true)]
    thermal: Option<f64>,
    /// Trajectory count for ensemble averages.
    #[arg(long, value_name = "T")]
    trajectories: Option<usize>,
    /// Grid half-width (momentum bins run -N..N); default sizes automatically.
    #[arg(long, value_name = "N")]
    grid: Option<String>,
    /// Kick realization: bessel, grid, or ideal.
    #[arg(long, value_name = "KIND")]
    shift: Option<String>,
    /// Phase ledger: compensated, uncompensated, or explicit.
    #[arg(long, value_name = "POLICY")]
    policy: Option<String>,
    /// Per-kick phase advance used when --policy explicit.
    #[arg(long = "explicit-phase", value_name = "PHI", allow_negative_numbers = true)]
    explicit_phase: Option<f64>,
    /// Biased-pulse weight rho in [0, 1].
    #[arg(long, value_name = "RHO", allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Directory for output files (created if missing; default ".").
    #[arg(long = "out-dir", value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ScriptArgs {
    /// Sequence program to execute; omit to replay one embedded in --config.
    #[arg(value_name = "FILE.qws")]
    file: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ScanPhaseArgs {
    /// Number of evenly spaced phase samples in [0, 2*pi).
    #[arg(long, value_name = "N")]
    points: Option<usize>,
    /// Comma-separated steps at which to record the mean momentum.
    #[arg(long = "at-steps", value_name = "LIST")]
    at_steps: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct NoiseSweepArgs {
    /// Comma-separated noise fractions to sweep.
    #[arg(long, value_name = "LIST")]
    levels: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ReverseArgs {
    /// Echo construction: composed (laboratory pulses) or adjoint (exact).
    #[arg(long, value_name = "MODE")]
    mode: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BiasArgs {
    /// Matrix variant: minus_half_pi (imaginary off-diagonals) or pi (real).
    #[arg(long, value_name = "VARIANT")]
    variant: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ClassicalArgs {
    /// Per-step probability of moving toward positive momentum.
    #[arg(long, value_name = "P", allow_negative_numbers = true)]
    bias: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

/// Anything that stops a run, tagged with the exit code it maps to.
enum CliError {
    /// Bad flags, malformed config or script, unreadable input: exit 1.
    Usage(String),
    /// A numerical guard tripped mid-run: exit 2.
    Guard(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Guard(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Guard(m) => m,
        }
    }
}

impl From<SettingsError> for CliError {
    fn from(e: SettingsError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        match e {
            WalkError::GridTooSmall(_)
            | WalkError::GridLeakage { .. }
            | WalkError::NormViolation { .. }
            | WalkError::StateMismatch(_)
            | WalkError::GridMismatch(..)
            | WalkError::NonUnitaryCoin { .. }
            | WalkError::TruncationInsufficient { .. }
            | WalkError::ComposedReversalUnsupported { .. } => CliError::Guard(e.to_string()),
            WalkError::InvalidParameter(_) | WalkError::Parse(_) | WalkError::Script { .. } => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

fn io_error(context: &str, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and succeed; real usage errors
            // print the clap message and exit 1.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Script(args) => cmd_script(args),
        Command::ScanPhase(args) => cmd_scan_phase(args),
        Command::NoiseSweep(args) => cmd_noise_sweep(args),
        Command::Reverse(args) => cmd_reverse(args),
        Command::Bias(args) => cmd_bias(args),
        Command::Classical(args) => cmd_classical(args),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mwalk: error: {}", e.message());
            e.code()
        }
    }
}

/// Defaults -> config file -> flags, in that order.
fn resolve_settings(common: &CommonArgs) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        s.apply_config_file(path)?;
    }
    if let Some(k) = common.k {
        s.k1 = -k;
        s.k2 = k;
    }
    if let Some(k1) = common.k1 {
        s.k1 = k1;
    }
    if let Some(k2) = common.k2 {
        s.k2 = k2;
    }
    if let Some(steps) = common.steps {
        s.steps = steps;
    }
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if let Some(noise) = common.noise {
        s.noise = noise;
    }
    if let Some(beta) = common.beta {
        s.beta = beta;
    }
    if let Some(fwhm) = common.beta_fwhm {
        s.beta_fwhm = fwhm;
    }
    if let Some(thermal) = common.thermal {
        s.thermal = thermal;
    }
    if let Some(t) = common.trajectories {
        // The trajectory count is one knob: T quasimomentum samples, one
        // noise realization each.
        s.beta_samples = t;
        s.noise_realizations = 1;
    }
    if let Some(grid) = &common.grid {
        s.set("grid", grid)?;
    }
    if let Some(shift) = &common.shift {
        s.set("shift", shift)?;
    }
    if let Some(policy) = &common.policy {
        s.set("policy", policy)?;
    }
    if let Some(phase) = common.explicit_phase {
        s.explicit_phase = phase;
    }
    if let Some(rho) = common.rho {
        s.rho = rho;
    }
    Ok(s)
}

/// Ensure the output directory exists and return the full path of `name`.
fn out_path(common: &CommonArgs, name: &str) -> Result<PathBuf, CliError> {
    let dir = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| io_error(&format!("cannot create {}", dir.display()), e))?;
    Ok(dir.join(name))
}

fn write_manifest(
    common: &CommonArgs,
    settings: &Settings,
    subcommand: &str,
    outputs: &[&str],
    name: &str,
) -> Result<(), CliError> {
    let path = out_path(common, name)?;
    std::fs::write(&path, settings.manifest(subcommand, outputs))
        .map_err(|e| io_error(&format!("cannot write {}", path.display()), e))
}

fn write_record(
    common: &CommonArgs,
    record: &WalkRecord,
    dist_name: &str,
    stats_name: &str,
) -> Result<(), CliError> {
    let dist_path = out_path(common, dist_name)?;
    output::write_walk_csv(&dist_path, record)
        .map_err(|e| io_error(&format!("cannot write {}", dist_path.display()), e))?;
    let stats_path = out_path(common, stats_name)?;
    output::write_stats_csv(&stats_path, record)
        .map_err(|e| io_error(&format!("cannot write {}", stats_path.display()), e))?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let settings = resolve_settings(&args.common)?;
    let config = settings.to_walk_config()?;
    // The ensemble runner reduces to the plain walk for one trajectory, so a
    // single code path covers both.
    let record = run_ensemble(&config)?;
    write_record(&args.common, &record, "walk.csv", "walk_stats.csv")?;
    write_manifest(
        &args.common,
        &settings,
        "run",
        &["walk.csv", "walk_stats.csv"],
        "walk.manifest",
    )?;
    println!(
        "run: {} rows, {} trajectories, final <p> = {:.6}",
        record.num_rows(),
        record.meta.trajectories,
        record.stats.last().map_or(f64::NAN, |s| s.mean_momentum)
    );
    Ok(())
}

fn cmd_script(args: ScriptArgs) -> Result<(), CliError> {
    let mut settings = resolve_settings(&args.common)?;
    if let Some(path) = &args.file {
        let source = std::fs::read_to_string(path)
            .map_err(|e| io_error(&format!("cannot read script {}", path.display()), e))?;
        settings.program = Some(source);
    }
    let Some(source) = settings.program.clone() else {
        return Err(CliError::Usage(
            "no script: pass a .qws file or a config with an embedded program".into(),
        ));
    };
    if settings.beta_samples != 1 || settings.noise_realizations != 1 {
        return Err(CliError::Usage(
            "script runs are single-trajectory; drop --trajectories".into(),
        ));
    }
    let config = settings.to_walk_config()?;
    let program = parse(&source).map_err(WalkError::Parse)?;
    let program = bind_constants(program, &settings);
    let record = momentum_walk::interpret(&program, &config)?;
    write_record(&args.common, &record, "script.csv", "script_stats.csv")?;
    write_manifest(
        &args.common,
        &settings,
        "script",
        &["script.csv", "script_stats.csv"],
        "script.manifest",
    )?;
    println!(
        "script: {} statements, {} measured rows",
        program.statements.len(),
        record.num_rows()
    );
    Ok(())
}

/// Make the conventional names available to scripts: the kick strengths from
/// the resolved settings plus the biased-pulse weight.
fn bind_constants(program: SequenceProgram, settings: &Settings) -> SequenceProgram {
    program
        .with_constant("k", settings.k2.abs())
        .with_constant("k1", settings.k1)
        .with_constant("k2", settings.k2)
        .with_constant("rho", settings.rho)
}

fn parse_at_steps(text: &str) -> Result<Vec<usize>, CliError> {
    let steps: Result<Vec<usize>, _> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<usize>)
        .collect();
    let steps = steps.map_err(|_| CliError::Usage(format!("invalid --at-steps `{text}`")))?;
    if steps.is_empty() {
        return Err(CliError::Usage("--at-steps needs at least one step".into()));
    }
    Ok(steps)
}

fn cmd_scan_phase(args: ScanPhaseArgs) -> Result<(), CliError> {
    let mut settings = resolve_settings(&args.common)?;
    if let Some(points) = args.points {
        settings.points = points;
    }
    if let Some(text) = &args.at_steps {
        settings.at_steps = parse_at_steps(text)?;
    }
    if settings.points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    // The scan only needs to run out to the last requested step.
    let max_step = settings.at_steps.iter().copied().max().unwrap_or(0);
    settings.steps = settings.steps.max(max_step);
    let config = settings.to_walk_config()?;
    let phis: Vec<f64> = (0..settings.points)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / settings.points as f64)
        .collect();
    let points = scan_coin_phase(&config, &phis, &settings.at_steps)?;
    let path = out_path(&args.common, "scan.csv")?;
    output::write_scan_csv(&path, &points, &settings.at_steps)
        .map_err(|e| io_error(&format!("cannot write {}", path.display()), e))?;
    write_manifest(
        &args.common,
        &settings,
        "scan-phase",
        &["scan.csv"],
        "scan.manifest",
    )?;
    println!(
        "scan-phase: {} phases x {} steps",
        points.len(),
        settings.at_steps.len()
    );
    Ok(())
}

fn cmd_noise_sweep(args: NoiseSweepArgs) -> Result<(), CliError> {
    let mut settings = resolve_settings(&args.common)?;
    if let Some(text) = &args.levels {
        let levels: Result<Vec<f64>, _> = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        settings.levels =
            levels.map_err(|_| CliError::Usage(format!("invalid --levels `{text}`")))?;
    }
    if settings.levels.is_empty() {
        return Err(CliError::Usage("--levels needs at least one value".into()));
    }
    let mut sweeps = Vec::with_capacity(settings.levels.len());
    for &level in &settings.levels {
        let mut config = settings.to_walk_config()?;
        config.noise_fraction = level;
        config.validate().map_err(CliError::from)?;
        let record = run_ensemble(&config)?;
        sweeps.push((level, record));
    }
    let path = out_path(&args.common, "noise_sweep.csv")?;
    output::write_noise_sweep_csv(&path, &sweeps)
        .map_err(|e| io_error(&format!("cannot write {}", path.display()), e))?;
    write_manifest(
        &args.common,
        &settings,
        "noise-sweep",
        &["noise_sweep.csv"],
        "noise_sweep.manifest",
    )?;
    println!("noise-sweep: {} levels", sweeps.len());
    Ok(())
}

fn cmd_reverse(args: ReverseArgs) -> Result<(), CliError> {
    let mut settings = resolve_settings(&args.common)?;
    if let Some(mode) = &args.mode {
        settings.set("mode", mode)?;
    }
    let config = settings.to_walk_config()?;
    let record = reverse_walk(&config, settings.steps, settings.reversal_mode())?;
    write_record(&args.common, &record, "reverse.csv", "reverse_stats.csv")?;
    write_manifest(
        &args.common,
        &settings,
        "reverse",
        &["reverse.csv", "reverse_stats.csv"],
        "reverse.manifest",
    )?;
    let initial = record.stats.first().map_or(f64::NAN, |s| s.mean_energy);
    let final_e = record.stats.last().map_or(f64::NAN, |s| s.mean_energy);
    println!(
        "reverse ({}): {} rows, energy {:.6} -> {:.6}",
        settings.mode,
        record.num_rows(),
        initial,
        final_e
    );
    Ok(())
}

fn cmd_bias(args: BiasArgs) -> Result<(), CliError> {
    let mut settings = resolve_settings(&args.common)?;
    if let Some(variant) = &args.variant {
        settings.set("variant", variant)?;
    }
    let config = settings.to_biased_config()?;
    let record = run_ensemble(&config)?;
    write_record(&args.common, &record, "bias.csv", "bias_stats.csv")?;
    write_manifest(
        &args.common,
        &settings,
        "bias",
        &["bias.csv", "bias_stats.csv"],
        "bias.manifest",
    )?;
    println!(
        "bias (rho = {}, {}): final <p> = {:.6}",
        settings.rho,
        settings.variant,
        record.stats.last().map_or(f64::NAN, |s| s.mean_momentum)
    );
    Ok(())
}

fn cmd_classical(args: ClassicalArgs) -> Result<(), CliError> {
    let mut settings = resolve_settings(&args.common)?;
    if let Some(bias) = args.bias {
        settings.bias = bias;
    }
    let dist = classical_walk_reference(settings.steps, settings.bias)?;
    let path = out_path(&args.common, "classical.csv")?;
    output::write_classical_csv(&path, &dist, settings.steps)
        .map_err(|e| io_error(&format!("cannot write {}", path.display()), e))?;
    write_manifest(
        &args.common,
        &settings,
        "classical",
        &["classical.csv"],
        "classical.manifest",
    )?;
    println!(
        "classical: {} steps, bias {}, sigma = {:.6}",
        settings.steps,
        settings.bias,
        dist.std_dev()
    );
    Ok(())
}

/// Three quick cross-checks of the numerical core.  Each prints one PASS/FAIL
/// line; any failure exits with the guard code.
fn cmd_selftest() -> Result<(), CliError> {
    let mut failed = false;

    // 1. The banded convolution and the angle-grid transform must agree.
    let check = selftest_kick_routes();
    report("kick routes (banded vs angle grid)", check, &mut failed);

    // 2. A single kick on the two-component superposition must move the mean
    //    by -k sin(phi) / 2.
    let check = selftest_current_formula();
    report("single-kick current formula", check, &mut failed);

    // 3. Walking forward and running the echo back must return the start.
    let check = selftest_reversal();
    report("echo reversal fidelity", check, &mut failed);

    if failed {
        Err(CliError::Guard("selftest failed".into()))
    } else {
        Ok(())
    }
}

fn report(label: &str, check: Result<f64, String>, failed: &mut bool) {
    match check {
        Ok(dev) => println!("selftest: {label}: PASS (deviation {dev:.3e})"),
        Err(msg) => {
            println!("selftest: {label}: FAIL ({msg})");
            *failed = true;
        }
    }
}

fn selftest_kick_routes() -> Result<f64, String> {
    let half_width = 40;
    let mut banded = SpinorState::ratchet(2, std::f64::consts::FRAC_PI_2, 0.17, half_width)
        .map_err(|e| e.to_string())?;
    let mut grid = banded.clone();
    let params = KickParams::new(-DEFAULT_K, 0.8).map_err(|e| e.to_string())?;
    apply_kick_bessel(&mut banded, &params, default_truncation(params.max_strength()))
        .map_err(|e| e.to_string())?;
    apply_kick_grid(&mut grid, &params, default_angle_points(half_width))
        .map_err(|e| e.to_string())?;
    let mut max_dev: f64 = 0.0;
    let da = banded.distribution();
    let db = grid.distribution();
    for (a, b) in da.total().iter().zip(db.total().iter()) {
        max_dev = max_dev.max((a - b).abs());
    }
    if max_dev < 1e-10 {
        Ok(max_dev)
    } else {
        Err(format!("distributions differ by {max_dev:.3e}"))
    }
}

fn selftest_current_formula() -> Result<f64, String> {
    let half_width = 32;
    let phi = std::f64::consts::FRAC_PI_2;
    let state = SpinorState::ratchet(2, phi, 0.0, half_width).map_err(|e| e.to_string())?;
    let before = state.mean_momentum();
    let params = KickParams::uniform(DEFAULT_K).map_err(|e| e.to_string())?;
    let mut kicked = state;
    apply_kick_bessel(&mut kicked, &params, default_truncation(params.max_strength()))
        .map_err(|e| e.to_string())?;
    let shift = kicked.mean_momentum() - before;
    let expected = -DEFAULT_K * phi.sin() / 2.0;
    let dev = (shift - expected).abs();
    if dev < 1e-10 {
        Ok(dev)
    } else {
        Err(format!(
            "mean moved by {shift:.12}, expected {expected:.12}"
        ))
    }
}

fn selftest_reversal() -> Result<f64, String> {
    let config = momentum_walk::WalkConfig {
        steps: 4,
        tau: RESONANT_TAU,
        ..momentum_walk::WalkConfig::default()
    };
    let mut worst: f64 = 0.0;
    for mode in [
        momentum_walk::ReversalMode::Adjoint,
        momentum_walk::ReversalMode::Composed,
    ] {
        let record = reverse_walk(&config, 4, mode).map_err(|e| e.to_string())?;
        let first = record.stats.first().ok_or("empty record")?;
        let last = record.stats.last().ok_or("empty record")?;
        let dev = (last.mean_energy - first.mean_energy).abs()
            + (last.mean_momentum - first.mean_momentum).abs();
        worst = worst.max(dev);
    }
    if worst < 1e-9 {
        Ok(worst)
    } else {
        Err(format!("echo misses the start by {worst:.3e}"))
    }
}

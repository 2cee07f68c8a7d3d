//! Command-line front end: analytical curves, threshold optimization, Monte
//! Carlo sweeps, and canned reproduction recipes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{ber_bound, throughput_lower_bound, BoundParams};
use crate::config::{mix_seed, ChannelMode, CrcMode, ModulationSpec, ProtocolConfig};
use crate::optimizer::{optimize_tau, GridSpec, TauTable};
use crate::protocol::Scheme;
use crate::sim::{run_sweep, sweep_to_csv, tune_tau_measured, MeasureBudget, SweepSpec, TauPolicy};
use crate::{Error, Result};

pub const ANALYZE_CSV_HEADER: &str = "snr_db,mu,tau,ber_bound,eta_bound";

/// Link-level study of selective-retransmission HARQ over OFDM: closed-form
/// bounds, threshold optimization, and Monte Carlo validation.
#[derive(Debug, Parser)]
#[command(name = "ccsr", version, about)]
pub struct Cli {
    /// TOML file with baseline channel/protocol settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "CCSR_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the closed-form error-rate and throughput bounds.
    Analyze(AnalyzeArgs),
    /// Search the marking threshold that maximizes the throughput bound.
    Optimize(OptimizeArgs),
    /// Measure operating points by Monte Carlo simulation.
    Simulate(SimulateArgs),
    /// Re-run a canned experiment recipe into the output directory.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// SNR points in dB: a single value or start:step:stop.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: String,
    /// Rounds per cycle, comma-separated.
    #[arg(long, default_value = "1")]
    pub mu: String,
    /// Marking threshold: a number, or "opt" to optimize per point.
    #[arg(long, default_value = "0")]
    pub tau: String,
    /// Frame size for the frame-error terms.
    #[arg(long)]
    pub frame_bits: Option<usize>,
    /// Constellation order (4 or 16).
    #[arg(long)]
    pub mod_order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// SNR points in dB: a single value or start:step:stop.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: String,
    /// Rounds per cycle, comma-separated.
    #[arg(long, default_value = "1,2,3,4")]
    pub mu: String,
    /// Frame size for the frame-error terms.
    #[arg(long)]
    pub frame_bits: Option<usize>,
    /// Constellation order (4 or 16).
    #[arg(long)]
    pub mod_order: Option<usize>,
    /// Threshold grid step.
    #[arg(long, default_value_t = 1e-3)]
    pub grid_step: f64,
    /// Threshold grid upper edge.
    #[arg(long, default_value_t = 4.0)]
    pub grid_max: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// SNR points in dB: a single value or start:step:stop.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: String,
    /// Rounds per cycle, comma-separated.
    #[arg(long, default_value = "1")]
    pub mu: String,
    /// Schemes to run, comma-separated (ccsr, cc).
    #[arg(long, default_value = "ccsr,cc")]
    pub scheme: String,
    /// Threshold policy: a number, "opt", or "table:PATH".
    #[arg(long, default_value = "opt")]
    pub tau: String,
    /// Stop a point after this many bit errors.
    #[arg(long, default_value_t = 100)]
    pub target_errors: u64,
    /// Hard cap on demodulated bits per point.
    #[arg(long, default_value_t = 100_000_000)]
    pub bit_cap: u64,
    /// First batch size in frames.
    #[arg(long, default_value_t = 200)]
    pub initial_frames: u64,
    /// Run exactly this many frames per point instead of adapting.
    #[arg(long, conflicts_with_all = ["target_errors", "bit_cap", "initial_frames"])]
    pub frames: Option<u64>,
    /// Subcarriers per OFDM symbol (frame size follows).
    #[arg(long)]
    pub subcarriers: Option<usize>,
    /// Channel taps in tap mode.
    #[arg(long)]
    pub taps: Option<usize>,
    /// Channel model: taps or iid_gains.
    #[arg(long)]
    pub channel: Option<String>,
    /// Frame check: genie or crc24.
    #[arg(long)]
    pub crc: Option<String>,
    /// Constellation order (4 or 16).
    #[arg(long)]
    pub mod_order: Option<usize>,
    /// Encode frames with the bundled rate-1/2 LDPC code.
    #[arg(long, default_value_t = false)]
    pub fec: bool,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Recipe name: fig4, fig5, fig6, fig7, or fig8.
    pub recipe: String,
}

// ---------------------------------------------------------------------------
// Argument parsing helpers
// ---------------------------------------------------------------------------

/// Parses `start:step:stop` (inclusive) or a single value.
pub fn parse_snr_spec(s: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::InvalidInput(m);
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("bad number in SNR spec: {t}")))
    };
    match parts.as_slice() {
        [one] => Ok(vec![num(one)?]),
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step <= 0.0 {
                return Err(bad(format!("SNR step must be positive, got {step}")));
            }
            if stop < start {
                return Err(bad(format!("SNR stop {stop} below start {start}")));
            }
            let n = ((stop - start) / step + 0.5).floor() as usize + 1;
            let mut v: Vec<f64> = (0..n).map(|i| start + i as f64 * step).collect();
            if let Some(last) = v.last_mut() {
                if (*last - stop).abs() < 1e-9 {
                    *last = stop;
                }
            }
            v.retain(|&x| x <= stop + 1e-9);
            Ok(v)
        }
        _ => Err(bad(format!("SNR spec must be VALUE or START:STEP:STOP, got {s}"))),
    }
}

/// Parses a comma-separated list of cycle lengths.
pub fn parse_mu_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::InvalidInput(format!("bad mu value: {t}")))
        })
        .collect()
}

/// Parses a comma-separated scheme list.
pub fn parse_scheme_list(s: &str) -> Result<Vec<Scheme>> {
    s.split(',')
        .map(|t| match t.trim() {
            "ccsr" => Ok(Scheme::Ccsr),
            "cc" => Ok(Scheme::Chase),
            other => Err(Error::InvalidInput(format!("unknown scheme: {other}"))),
        })
        .collect()
}

/// Threshold argument: fixed value, analytical optimum, or a table file.
#[derive(Clone, Debug, PartialEq)]
pub enum TauArg {
    Fixed(f64),
    Optimal,
    Table(PathBuf),
}

pub fn parse_tau_arg(s: &str) -> Result<TauArg> {
    let t = s.trim();
    if t == "opt" {
        return Ok(TauArg::Optimal);
    }
    if let Some(path) = t.strip_prefix("table:") {
        if path.is_empty() {
            return Err(Error::InvalidInput("empty table path".into()));
        }
        return Ok(TauArg::Table(PathBuf::from(path)));
    }
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .map(TauArg::Fixed)
        .ok_or_else(|| Error::InvalidInput(format!("bad tau argument: {s}")))
}

fn parse_channel(s: &str) -> Result<ChannelMode> {
    match s {
        "taps" => Ok(ChannelMode::Taps),
        "iid_gains" | "iid" => Ok(ChannelMode::IidGains),
        other => Err(Error::InvalidInput(format!("unknown channel mode: {other}"))),
    }
}

fn parse_crc(s: &str) -> Result<CrcMode> {
    match s {
        "genie" => Ok(CrcMode::Genie),
        "crc24" => Ok(CrcMode::Crc24),
        other => Err(Error::InvalidInput(format!("unknown crc mode: {other}"))),
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Parses the process arguments and runs; returns the process exit code.
/// Usage errors exit with code 2 via clap before this returns.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    fs::create_dir_all(&cli.out)?;
    let base = load_base_config(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(base.seed);
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(cli, &base, a),
        Command::Optimize(a) => cmd_optimize(cli, &base, a),
        Command::Simulate(a) => cmd_simulate(cli, &base, a, seed),
        Command::Reproduce(a) => cmd_reproduce(cli, &base, a, seed),
    }
}

fn load_base_config(path: Option<&Path>) -> Result<ProtocolConfig> {
    match path {
        None => Ok(ProtocolConfig::default()),
        Some(p) => ProtocolConfig::from_toml_str(&fs::read_to_string(p)?),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn modulation_for(order: Option<usize>, base: &ProtocolConfig) -> Result<ModulationSpec> {
    match order {
        Some(m) => ModulationSpec::qam(m),
        None => Ok(base.modulation.clone()),
    }
}

/// Bound rows for the cartesian product of the argument lists.
fn analyze_rows(
    snrs: &[f64],
    mus: &[u32],
    tau_arg: &TauArg,
    frame_bits: usize,
    modulation: &ModulationSpec,
) -> Result<String> {
    let mut out = String::from(ANALYZE_CSV_HEADER);
    out.push('\n');
    for &mu in mus {
        for &snr in snrs {
            let tau = match tau_arg {
                TauArg::Fixed(t) => *t,
                TauArg::Optimal => {
                    optimize_tau(snr, mu, frame_bits, modulation, &GridSpec::default()).tau
                }
                TauArg::Table(_) => {
                    return Err(Error::InvalidInput(
                        "analyze does not take a threshold table".into(),
                    ))
                }
            };
            let bp = BoundParams::from_ebn0_db(snr, modulation);
            let ber = ber_bound(&bp, tau, mu);
            let eta = throughput_lower_bound(snr, tau, mu, frame_bits, modulation).unwrap_or(0.0);
            out.push_str(&format!("{snr},{mu},{tau},{ber},{eta}\n"));
        }
    }
    Ok(out)
}

fn cmd_analyze(cli: &Cli, base: &ProtocolConfig, a: &AnalyzeArgs) -> Result<()> {
    let snrs = parse_snr_spec(&a.snr)?;
    let mus = parse_mu_list(&a.mu)?;
    let tau = parse_tau_arg(&a.tau)?;
    let modulation = modulation_for(a.mod_order, base)?;
    let frame_bits = a.frame_bits.unwrap_or(base.frame_bits);
    let csv = analyze_rows(&snrs, &mus, &tau, frame_bits, &modulation)?;
    write_file(&cli.out.join("analyze.csv"), &csv)
}

fn cmd_optimize(cli: &Cli, base: &ProtocolConfig, a: &OptimizeArgs) -> Result<()> {
    let snrs = parse_snr_spec(&a.snr)?;
    let mus = parse_mu_list(&a.mu)?;
    let modulation = modulation_for(a.mod_order, base)?;
    let frame_bits = a.frame_bits.unwrap_or(base.frame_bits);
    if a.grid_step <= 0.0 || a.grid_max <= 0.0 {
        return Err(Error::InvalidInput("grid step and max must be positive".into()));
    }
    let grid = GridSpec {
        lo: 0.0,
        hi: a.grid_max,
        step: a.grid_step,
    };
    let table = TauTable::build(&snrs, &mus, frame_bits, &modulation, &grid);
    for w in table.monotonicity_warnings() {
        eprintln!("warning: {w}");
    }
    write_file(&cli.out.join("tau_table.csv"), &table.to_csv())
}

fn cmd_simulate(cli: &Cli, base: &ProtocolConfig, a: &SimulateArgs, seed: u64) -> Result<()> {
    let spec = build_sweep_spec(base, a)?;
    let results = run_sweep(&spec, seed, cli.workers)?;
    write_file(&cli.out.join("sweep.csv"), &sweep_to_csv(&results))
}

fn build_sweep_spec(base: &ProtocolConfig, a: &SimulateArgs) -> Result<SweepSpec> {
    let mut cfg = base.clone();
    if let Some(order) = a.mod_order {
        cfg.modulation = ModulationSpec::qam(order)?;
    }
    if let Some(n) = a.subcarriers {
        cfg.n_subcarriers = n;
    }
    if let Some(t) = a.taps {
        cfg.n_taps = t;
    }
    if let Some(c) = &a.channel {
        cfg.channel_mode = parse_channel(c)?;
    }
    if let Some(c) = &a.crc {
        cfg.crc_mode = parse_crc(c)?;
    }
    if a.fec {
        cfg.enable_fec();
    } else if !cfg.fec_enabled {
        cfg.frame_bits = cfg.coded_bits_per_frame();
    }

    let tau_policy = match parse_tau_arg(&a.tau)? {
        TauArg::Fixed(t) => TauPolicy::Fixed(t),
        TauArg::Optimal => TauPolicy::Optimal(GridSpec::default()),
        TauArg::Table(path) => {
            TauPolicy::Table(TauTable::from_csv(&fs::read_to_string(path)?)?)
        }
    };
    let budget = match a.frames {
        Some(n) if n >= 1 => MeasureBudget {
            target_errors: 0,
            bit_cap: u64::MAX,
            initial_frames: n,
        },
        Some(_) => return Err(Error::InvalidInput("frames must be at least 1".into())),
        None => MeasureBudget {
            target_errors: a.target_errors,
            bit_cap: a.bit_cap,
            initial_frames: a.initial_frames.max(1),
        },
    };
    Ok(SweepSpec {
        base: cfg,
        schemes: parse_scheme_list(&a.scheme)?,
        mus: parse_mu_list(&a.mu)?,
        snrs_db: parse_snr_spec(&a.snr)?,
        tau_policy,
        budget,
    })
}

// ---------------------------------------------------------------------------
// Reproduction recipes
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest {
    recipe: String,
    description: String,
    seed: u64,
    workers: usize,
    parameters: serde_json::Value,
    files: Vec<String>,
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(m)
        .map_err(|e| Error::InvalidInput(format!("manifest: {e}")))?;
    write_file(&dir.join("manifest.json"), &(text + "\n"))
}

fn cmd_reproduce(cli: &Cli, base: &ProtocolConfig, a: &ReproduceArgs, seed: u64) -> Result<()> {
    let dir = cli.out.join(&a.recipe);
    fs::create_dir_all(&dir)?;
    match a.recipe.as_str() {
        "fig4" => recipe_fig4(&dir, base, seed, cli.workers),
        "fig5" => recipe_fig5(&dir, base, seed, cli.workers),
        "fig6" => recipe_fig6(&dir, base, seed, cli.workers),
        "fig7" => recipe_fig7(&dir, base, seed, cli.workers),
        "fig8" => recipe_fig8(&dir, base, seed, cli.workers),
        other => Err(Error::InvalidInput(format!(
            "unknown recipe {other}; expected fig4..fig8"
        ))),
    }
}

/// Error-rate bounds against measurement across SNR, one and two rounds.
fn recipe_fig4(dir: &Path, base: &ProtocolConfig, seed: u64, workers: usize) -> Result<()> {
    let tau = 1.0;
    let bounds = analyze_rows(
        &parse_snr_spec("0:1:20")?,
        &[1, 2],
        &TauArg::Fixed(tau),
        base.frame_bits,
        &base.modulation,
    )?;
    write_file(&dir.join("fig4_bounds.csv"), &bounds)?;

    let spec = SweepSpec {
        base: base.clone(),
        schemes: vec![Scheme::Ccsr],
        mus: vec![1, 2],
        snrs_db: parse_snr_spec("0:4:16")?,
        tau_policy: TauPolicy::Fixed(tau),
        budget: MeasureBudget {
            target_errors: 200,
            bit_cap: 20_000_000,
            initial_frames: 200,
        },
    };
    let measured = run_sweep(&spec, seed, workers)?;
    write_file(&dir.join("fig4_measured.csv"), &sweep_to_csv(&measured))?;
    write_manifest(
        dir,
        &Manifest {
            recipe: "fig4".into(),
            description: "Post-combining error rate: closed-form upper bounds and Monte Carlo \
                          measurements across SNR at a fixed marking threshold."
                .into(),
            seed,
            workers,
            parameters: serde_json::json!({
                "tau": tau, "mu": [1, 2], "bounds_snr": "0:1:20", "measured_snr": "0:4:16",
            }),
            files: vec!["fig4_bounds.csv".into(), "fig4_measured.csv".into()],
        },
    )
}

/// Error rate as a function of the marking threshold at a fixed SNR.
fn recipe_fig5(dir: &Path, base: &ProtocolConfig, seed: u64, workers: usize) -> Result<()> {
    let snr = 8.0;
    let taus = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let mut bounds = String::from(ANALYZE_CSV_HEADER);
    bounds.push('\n');
    for mu in [1u32, 2] {
        for &tau in &taus {
            let bp = BoundParams::from_ebn0_db(snr, &base.modulation);
            let ber = ber_bound(&bp, tau, mu);
            let eta =
                throughput_lower_bound(snr, tau, mu, base.frame_bits, &base.modulation)
                    .unwrap_or(0.0);
            bounds.push_str(&format!("{snr},{mu},{tau},{ber},{eta}\n"));
        }
    }
    write_file(&dir.join("fig5_bounds.csv"), &bounds)?;

    let mut measured = Vec::new();
    for &tau in &taus {
        let spec = SweepSpec {
            base: base.clone(),
            schemes: vec![Scheme::Ccsr],
            mus: vec![1, 2],
            snrs_db: vec![snr],
            tau_policy: TauPolicy::Fixed(tau),
            budget: MeasureBudget {
                target_errors: 200,
                bit_cap: 20_000_000,
                initial_frames: 200,
            },
        };
        measured.extend(run_sweep(&spec, seed ^ tau.to_bits(), workers)?);
    }
    write_file(&dir.join("fig5_measured.csv"), &sweep_to_csv(&measured))?;
    write_manifest(
        dir,
        &Manifest {
            recipe: "fig5".into(),
            description: "Post-combining error rate as a function of the marking threshold at \
                          8 dB, bounds and measurements."
                .into(),
            seed,
            workers,
            parameters: serde_json::json!({ "snr_db": snr, "mu": [1, 2], "taus": taus }),
            files: vec!["fig5_bounds.csv".into(), "fig5_measured.csv".into()],
        },
    )
}

/// Optimized marking threshold across SNR and cycle length.
fn recipe_fig6(dir: &Path, base: &ProtocolConfig, seed: u64, workers: usize) -> Result<()> {
    let snrs = parse_snr_spec("0:1:20")?;
    let mus = [1u32, 2, 3, 4];
    let table = TauTable::build(
        &snrs,
        &mus,
        base.frame_bits,
        &base.modulation,
        &GridSpec::default(),
    );
    for w in table.monotonicity_warnings() {
        eprintln!("warning: {w}");
    }
    write_file(&dir.join("fig6_tau_table.csv"), &table.to_csv())?;
    write_manifest(
        dir,
        &Manifest {
            recipe: "fig6".into(),
            description: "Throughput-optimal marking threshold over SNR for cycle lengths one \
                          through four."
                .into(),
            seed,
            workers,
            parameters: serde_json::json!({
                "snr": "0:1:20", "mu": mus, "frame_bits": base.frame_bits,
                "grid": { "lo": 0.0, "hi": 4.0, "step": 1e-3 },
            }),
            files: vec!["fig6_tau_table.csv".into()],
        },
    )
}

/// Throughput of the selective scheme against plain Chase combining.
fn recipe_fig7(dir: &Path, base: &ProtocolConfig, seed: u64, workers: usize) -> Result<()> {
    let snrs = parse_snr_spec("8:2:20")?;
    let mus = vec![1u32, 2, 4];
    let mut bounds = String::from("scheme,snr_db,mu,tau,eta_bound\n");
    for &mu in &mus {
        for &snr in &snrs {
            let opt = optimize_tau(snr, mu, base.frame_bits, &base.modulation, &GridSpec::default());
            let cc =
                throughput_lower_bound(snr, 0.0, mu, base.frame_bits, &base.modulation)
                    .unwrap_or(0.0);
            bounds.push_str(&format!("ccsr,{snr},{mu},{},{}\n", opt.tau, opt.eta));
            bounds.push_str(&format!("cc,{snr},{mu},0,{cc}\n"));
        }
    }
    write_file(&dir.join("fig7_bounds.csv"), &bounds)?;

    let spec = SweepSpec {
        base: base.clone(),
        schemes: vec![Scheme::Ccsr, Scheme::Chase],
        mus,
        snrs_db: snrs,
        tau_policy: TauPolicy::Optimal(GridSpec::default()),
        budget: MeasureBudget {
            target_errors: 100,
            bit_cap: 10_000_000,
            initial_frames: 200,
        },
    };
    let measured = run_sweep(&spec, seed, workers)?;
    write_file(&dir.join("fig7_measured.csv"), &sweep_to_csv(&measured))?;
    write_manifest(
        dir,
        &Manifest {
            recipe: "fig7".into(),
            description: "Protocol throughput across SNR: analytical lower bounds at the \
                          optimized threshold and Monte Carlo measurements, selective scheme \
                          versus plain Chase combining."
                .into(),
            seed,
            workers,
            parameters: serde_json::json!({ "snr": "8:2:20", "mu": [1, 2, 4] }),
            files: vec!["fig7_bounds.csv".into(), "fig7_measured.csv".into()],
        },
    )
}

/// Coded against uncoded throughput at low SNR, thresholds tuned by pilots.
fn recipe_fig8(dir: &Path, base: &ProtocolConfig, seed: u64, workers: usize) -> Result<()> {
    let snrs = parse_snr_spec("-8:2:8")?;
    let mu = 2u32;
    let candidates = [0.0, 1.0, 5.0];
    let pilot_frames = 50;

    // Coded frames burn the full cycle cap when the point is hopeless, so
    // probe each point cheaply first and spend frames only where something
    // is ever delivered.
    let run_track = |coded: bool, salt: u64| -> Result<Vec<crate::sim::PointResult>> {
        let mut cfg = base.clone();
        if coded {
            cfg.enable_fec();
        }
        let mut results = Vec::new();
        for (i, &snr) in snrs.iter().enumerate() {
            cfg.snr_db = snr;
            cfg.mu = mu;
            let mut probe_cfg = cfg.clone();
            probe_cfg.tau = *candidates.last().unwrap();
            let probe = crate::sim::run_point(
                &probe_cfg,
                Scheme::Ccsr,
                &MeasureBudget {
                    target_errors: 0,
                    bit_cap: u64::MAX,
                    initial_frames: 10,
                },
                mix_seed(seed ^ salt, 0x5000 + i as u64),
            )?;
            let dead = coded && probe.eta == 0.0;
            let tau = if dead {
                0.0
            } else {
                tune_tau_measured(&cfg, Scheme::Ccsr, mu, snr, &candidates, pilot_frames, seed ^ salt)?
            };
            let frames = if dead { 30 } else { 400 };
            let spec = SweepSpec {
                base: cfg.clone(),
                schemes: vec![Scheme::Ccsr],
                mus: vec![mu],
                snrs_db: vec![snr],
                tau_policy: TauPolicy::Fixed(tau),
                budget: MeasureBudget {
                    target_errors: 0,
                    bit_cap: u64::MAX,
                    initial_frames: frames,
                },
            };
            results.extend(run_sweep(&spec, seed.wrapping_add(salt + i as u64), workers)?);
        }
        Ok(results)
    };

    let uncoded = run_track(false, 0x5555)?;
    let coded = run_track(true, 0xAAAA)?;
    write_file(&dir.join("fig8_uncoded.csv"), &sweep_to_csv(&uncoded))?;
    write_file(&dir.join("fig8_coded.csv"), &sweep_to_csv(&coded))?;

    let mut tau_rows = String::from("snr_db,mu,tau_o,eta\n");
    for p in &coded {
        tau_rows.push_str(&format!("{},{},{},{}\n", p.snr_db, p.mu, p.tau, p.eta));
    }
    write_file(&dir.join("fig8_coded_tau.csv"), &tau_rows)?;
    write_manifest(
        dir,
        &Manifest {
            recipe: "fig8".into(),
            description: "Low-SNR throughput with and without the bundled rate-1/2 LDPC code; \
                          marking thresholds tuned per point by pilot measurement."
                .into(),
            seed,
            workers,
            parameters: serde_json::json!({
                "snr": "-8:2:8", "mu": mu, "tau_candidates": candidates,
                "pilot_frames": pilot_frames, "frames_per_point": 400,
            }),
            files: vec![
                "fig8_uncoded.csv".into(),
                "fig8_coded.csv".into(),
                "fig8_coded_tau.csv".into(),
            ],
        },
    )
}

//! Command-line definitions and subcommand drivers.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cpcs_core::oracle::mc_trajectories;
use cpcs_core::output::{
    format_sig, read_scan_csv, write_clicks_csv, write_map_csv, write_scan_csv, write_spectrum_csv, Header,
};
use cpcs_core::regression::{auto_stride, coincidence_probability_map, pairs_per_cycle};
use cpcs_core::scan::{run_delay_scan, spectrum_of_series, CoincidenceMethod, ScanResult, Window};
use cpcs_core::propagator::TrajectoryDiagnostics;
use cpcs_core::UnitContext;

use crate::config::{load_config, RawModel, RunConfig};
use crate::quantity;

/// Environment variable that overrides the output precision (significant digits).
pub const PRECISION_ENV: &str = "CPCS_PRECISION";

/// Tolerances reported by `validate`.
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "cpcs", version, about = "Two-pulse coincidence and fluorescence spectroscopy simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (JSON); bundled presets are found by file name.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Integration step, e.g. `0.25 au`.
    #[arg(long, global = true)]
    pub dt: Option<String>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed of the trajectory sampler.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Abort when the window truncates the emission.
    #[arg(long, global = true, conflicts_with = "warn")]
    pub strict: bool,
    /// Only warn when the window truncates the emission.
    #[arg(long, global = true)]
    pub warn: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-photon probability map p(t1, t2) at one delay.
    G2map {
        /// Pulse delay, e.g. `72 fs`.
        #[arg(long)]
        delay: Option<String>,
        /// Launch every n-th grid point as t1; automatic when absent.
        #[arg(long)]
        t1_stride: Option<usize>,
        /// Write G2 instead of the per-bin probability.
        #[arg(long)]
        raw_g2: bool,
    },
    /// Coincidence and fluorescence rates over a delay range.
    Scan {
        /// Biexciton binding energy (exciton-biexciton model).
        #[arg(long)]
        delta: Option<String>,
        /// Dipole coupling (coupled-emitter model).
        #[arg(long)]
        coupling: Option<String>,
        #[arg(long)]
        t_min: Option<String>,
        #[arg(long)]
        t_max: Option<String>,
        #[arg(long)]
        t_step: Option<String>,
    },
    /// Fourier spectrum of a scan CSV.
    Spectrum {
        /// Scan CSV written by `scan`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ChannelArg::C)]
        channel: ChannelArg,
        #[arg(long, value_enum, default_value_t = WindowArg::None)]
        window: WindowArg,
        /// Keep the mean (DC) component.
        #[arg(long)]
        keep_mean: bool,
    },
    /// State invariants and a Monte-Carlo cross-check of the pair rate.
    Validate {
        #[arg(long)]
        delay: Option<String>,
        #[arg(long, default_value_t = 2000)]
        trajectories: usize,
    },
    /// Converts a unit-tagged quantity, e.g. `convert-units "72 fs" --to au`.
    ConvertUnits {
        value: String,
        #[arg(long)]
        to: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    C,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    None,
    Hann,
}

/// Runs the parsed command line on a pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::G2map { delay, t1_stride, raw_g2 } => g2map(g, delay.as_deref(), *t1_stride, *raw_g2),
        Command::Scan { delta, coupling, t_min, t_max, t_step } => scan(
            g,
            &ScanOverrides {
                delta: delta.clone(),
                coupling: coupling.clone(),
                t_min: t_min.clone(),
                t_max: t_max.clone(),
                t_step: t_step.clone(),
            },
        ),
        Command::Spectrum { input, channel, window, keep_mean } => spectrum(g, input, *channel, *window, !keep_mean),
        Command::Validate { delay, trajectories } => validate(g, delay.as_deref(), *trajectories),
        Command::ConvertUnits { value, to } => {
            let (v, dim) = quantity::convert(value, to)?;
            println!("{v:e} {to} ({dim})");
            Ok(())
        }
    }
}

/// Loads the configuration and applies the global physics overrides.
pub fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let path = g.config.as_ref().context("this command needs --config")?;
    let cfg = load_config(path)?;
    let dt = g.dt.clone();
    let truncation = if g.strict {
        Some("strict")
    } else if g.warn {
        Some("warn")
    } else {
        None
    };
    Ok(cfg.modified(|r| {
        if let Some(dt) = dt {
            r.numerics.dt = Some(dt);
        }
        if let Some(t) = truncation {
            r.numerics.truncation = Some(t.into());
        }
    })?)
}

fn precision(cfg: &RunConfig) -> Result<usize> {
    match std::env::var(PRECISION_ENV) {
        Ok(v) => {
            let p: usize = v.trim().parse().with_context(|| format!("{PRECISION_ENV}={v}"))?;
            if !(1..=17).contains(&p) {
                bail!("{PRECISION_ENV} must lie in 1..=17");
            }
            Ok(p)
        }
        Err(_) => Ok(cfg.output.precision),
    }
}

fn out_dir(g: &GlobalArgs, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    let dir = match (&g.out, cfg) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => PathBuf::from(&c.output.directory),
        (None, None) => PathBuf::from("out"),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_summary(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn header(cfg: &RunConfig) -> Header {
    Header::new(cfg.hash()).with("model", cfg.model.kind())
}

fn diagnostics_json(d: &TrajectoryDiagnostics) -> serde_json::Value {
    json!({
        "max_trace_drift": d.max_trace_drift,
        "max_hermiticity_defect": d.max_hermiticity_defect,
        "min_eigenvalue": d.min_eigenvalue,
    })
}

fn g2map(g: &GlobalArgs, delay: Option<&str>, t1_stride: Option<usize>, raw_g2: bool) -> Result<()> {
    let started = Instant::now();
    let delay = delay.map(str::to_string);
    let cfg = resolve_config(g)?.modified(|r| {
        if let Some(d) = delay {
            r.numerics.map_delay = Some(d);
        }
        if t1_stride.is_some() {
            r.numerics.t1_stride = t1_stride;
        }
    })?;
    let digits = precision(&cfg)?;
    let dir = out_dir(g, Some(&cfg))?;
    let u = UnitContext::default();
    let s = &cfg.scan;
    let engine = s.engine(cfg.map_delay)?;
    let grid = *engine.grid();
    let max_launches = match s.method {
        CoincidenceMethod::Grid { max_launches, .. } => max_launches,
        CoincidenceMethod::Adjoint { .. } => cpcs_core::scan::DEFAULT_MAX_LAUNCHES,
    };
    let stride = cfg.t1_stride.unwrap_or_else(|| auto_stride(grid.n_steps, max_launches));
    let g2 = engine.g2_grid(stride, cfg.map_delay)?;
    let gamma_f = s.detection.gamma_f;
    let pairs = pairs_per_cycle(g2.triangle_integral(), gamma_f);
    let map = if raw_g2 { g2 } else { coincidence_probability_map(&g2, gamma_f, grid.dt) };
    let (i, j, peak) = map.argmax();

    if cfg.output.csv {
        let h = header(&cfg)
            .with("quantity", if raw_g2 { "G2" } else { "p" })
            .with("delay_fs", format_sig(u.time_au_to_fs(cfg.map_delay), digits))
            .with("t1_stride", stride.to_string());
        let mut w = create(&dir.join("g2map.csv"))?;
        write_map_csv(&mut w, &map, &h, digits)?;
        w.flush()?;
    }
    let t1 = u.time_au_to_fs(grid.time(i));
    let t2 = u.time_au_to_fs(grid.time(j));
    println!("argmax t1 = {t1:.3} fs, t2 = {t2:.3} fs, value = {peak:.6e}");
    if cfg.output.summary {
        write_summary(
            &dir.join("g2map.json"),
            &json!({
                "command": "g2map",
                "config_hash": cfg.hash(),
                "config": serde_json::to_value(cfg.canonical())?,
                "delay_fs": u.time_au_to_fs(cfg.map_delay),
                "t1_stride": stride,
                "grid_points": grid.n_steps + 1,
                "quantity": if raw_g2 { "G2" } else { "p" },
                "argmax": { "t1_fs": t1, "t2_fs": t2, "value": peak },
                "pairs_per_cycle": pairs,
                "max_imag_residue": map.max_imag_residue,
                "truncation_residual": engine.truncation_residual(),
                "elapsed_s": started.elapsed().as_secs_f64(),
            }),
        )?;
    }
    Ok(())
}

#[derive(Debug, Default, Clone)]
pub struct ScanOverrides {
    pub delta: Option<String>,
    pub coupling: Option<String>,
    pub t_min: Option<String>,
    pub t_max: Option<String>,
    pub t_step: Option<String>,
}

/// Applies model and range overrides from the `scan` command line.
pub fn apply_scan_overrides(cfg: &RunConfig, o: &ScanOverrides) -> Result<RunConfig> {
    match (&cfg.canonical().model, &o.delta, &o.coupling) {
        (RawModel::ExcitonBiexciton(_), _, Some(_)) | (RawModel::Tls(_), _, Some(_)) => {
            bail!("--coupling applies to the coupled-emitter model only")
        }
        (RawModel::CoupledEmitters(_), Some(_), _) | (RawModel::Tls(_), Some(_), _) => {
            bail!("--delta applies to the exciton-biexciton model only")
        }
        _ => {}
    }
    let o = o.clone();
    Ok(cfg.modified(|r| {
        match &mut r.model {
            RawModel::ExcitonBiexciton(m) => {
                if let Some(d) = o.delta {
                    m.delta = d;
                }
            }
            RawModel::CoupledEmitters(m) => {
                if let Some(c) = o.coupling {
                    m.coupling = c;
                }
            }
            RawModel::Tls(_) => {}
        }
        let d = r.numerics.delays.get_or_insert_with(Default::default);
        if let Some(v) = o.t_min {
            d.min = v;
        }
        if let Some(v) = o.t_max {
            d.max = v;
        }
        if let Some(v) = o.t_step {
            d.step = v;
        }
    })?)
}

fn scan(g: &GlobalArgs, overrides: &ScanOverrides) -> Result<()> {
    let started = Instant::now();
    let cfg = apply_scan_overrides(&resolve_config(g)?, overrides)?;
    let digits = precision(&cfg)?;
    let dir = out_dir(g, Some(&cfg))?;
    let result = run_delay_scan(&cfg.scan)?;
    if cfg.output.csv {
        let mut w = create(&dir.join("scan.csv"))?;
        write_scan_csv(&mut w, &result, &header(&cfg), digits)?;
        w.flush()?;
    }
    let d = result.diagnostics();
    println!(
        "{} delays; c in [{:.4e}, {:.4e}] s^-1; f in [{:.4e}, {:.4e}] s^-1",
        result.points.len(),
        min_of(&result.coincidence()),
        max_of(&result.coincidence()),
        min_of(&result.fluorescence()),
        max_of(&result.fluorescence()),
    );
    if cfg.output.summary {
        write_summary(&dir.join("scan.json"), &scan_summary(&cfg, &result, &d, started.elapsed().as_secs_f64())?)?;
    }
    Ok(())
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn scan_summary(cfg: &RunConfig, r: &ScanResult, d: &TrajectoryDiagnostics, elapsed: f64) -> Result<serde_json::Value> {
    let worst_residual = r.points.iter().map(|p| p.truncation_residual).fold(0.0, f64::max);
    let peak_excitation = r.points.iter().map(|p| p.peak_excitation).fold(0.0, f64::max);
    Ok(json!({
        "command": "scan",
        "config_hash": cfg.hash(),
        "config": serde_json::to_value(cfg.canonical())?,
        "delays": r.points.len(),
        "coincidence_hz": { "min": min_of(&r.coincidence()), "max": max_of(&r.coincidence()) },
        "fluorescence_hz": { "min": min_of(&r.fluorescence()), "max": max_of(&r.fluorescence()) },
        "max_peak_excitation": peak_excitation,
        "max_truncation_residual": worst_residual,
        "diagnostics": diagnostics_json(d),
        "elapsed_s": elapsed,
    }))
}

fn spectrum(g: &GlobalArgs, input: &Path, channel: ChannelArg, window: WindowArg, subtract_mean: bool) -> Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let table = read_scan_csv(BufReader::new(file))?;
    let values = match channel {
        ChannelArg::C => &table.coincidence,
        ChannelArg::F => &table.fluorescence,
    };
    let window = match window {
        WindowArg::None => Window::None,
        WindowArg::Hann => Window::Hann,
    };
    let s = spectrum_of_series(&table.delays, values, window, subtract_mean)?;
    let hash = table
        .comments
        .iter()
        .find_map(|c| c.strip_prefix("config_hash=").map(str::to_string))
        .unwrap_or_default();
    let name = match channel {
        ChannelArg::C => "c",
        ChannelArg::F => "f",
    };
    let digits = match std::env::var(PRECISION_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{PRECISION_ENV}={v}"))?,
        Err(_) => cpcs_core::output::DEFAULT_SIGNIFICANT_DIGITS,
    };
    let dir = out_dir(g, None)?;
    let h = Header::new(hash)
        .with("source", input.display().to_string())
        .with("channel", name)
        .with("window", format!("{window:?}").to_lowercase())
        .with("mean_subtracted", subtract_mean.to_string());
    let mut w = create(&dir.join(format!("spectrum_{name}.csv")))?;
    write_spectrum_csv(&mut w, &s, &h, digits)?;
    w.flush()?;
    if let Some(p) = s.dominant_peak() {
        println!("dominant peak at {:.6e} au ({:.4} eV), bin width {:.3e} au", p.omega, UnitContext::default().energy_au_to_ev(p.omega), s.bin_width());
    }
    Ok(())
}

fn validate(g: &GlobalArgs, delay: Option<&str>, trajectories: usize) -> Result<()> {
    let started = Instant::now();
    let delay = delay.map(str::to_string);
    let cfg = resolve_config(g)?.modified(|r| {
        if let Some(d) = delay {
            r.numerics.map_delay = Some(d);
        }
    })?;
    let digits = precision(&cfg)?;
    let dir = out_dir(g, Some(&cfg))?;
    let s = &cfg.scan;
    let engine = s.engine(cfg.map_delay)?;
    let grid = *engine.grid();
    let d = TrajectoryDiagnostics::of(engine.trajectory(), 1);
    let pairs_me = pairs_per_cycle(engine.triangle_integral_adjoint(1)?, s.detection.gamma_f);

    let run = mc_trajectories(&s.system, &s.drive(cfg.map_delay), grid, trajectories, g.seed)?;
    let est = run.estimate();
    let z = if est.pairs_se > 0.0 { (est.pairs_hat - pairs_me) / est.pairs_se } else { f64::NAN };
    if cfg.output.csv {
        let h = header(&cfg).with("seed", g.seed.to_string()).with("trajectories", trajectories.to_string());
        let mut w = create(&dir.join("clicks.csv"))?;
        write_clicks_csv(&mut w, &run, &h, digits)?;
        w.flush()?;
    }

    let checks = [
        ("trace", d.max_trace_drift < TRACE_TOL),
        ("hermiticity", d.max_hermiticity_defect < HERMITICITY_TOL),
        ("positivity", d.min_eigenvalue > -POSITIVITY_TOL),
        ("truncation", engine.truncation_residual() < cpcs_core::regression::TRUNCATION_LIMIT),
    ];
    for (name, ok) in checks {
        println!("{name:<12} {}", if ok { "ok" } else { "FAILED" });
    }
    println!("pairs/cycle  master equation {pairs_me:.6e}, trajectories {:.6e} ± {:.2e} (z = {z:.2})", est.pairs_hat, est.pairs_se);
    if cfg.output.summary {
        write_summary(
            &dir.join("validate.json"),
            &json!({
                "command": "validate",
                "config_hash": cfg.hash(),
                "config": serde_json::to_value(cfg.canonical())?,
                "diagnostics": diagnostics_json(&d),
                "truncation_residual": engine.truncation_residual(),
                "pairs_per_cycle": pairs_me,
                "monte_carlo": {
                    "trajectories": est.n_traj,
                    "seed": g.seed,
                    "pairs_per_cycle": est.pairs_hat,
                    "standard_error": est.pairs_se,
                    "z": z,
                    "max_step_probability": run.max_step_probability,
                },
                "elapsed_s": started.elapsed().as_secs_f64(),
            }),
        )?;
    }
    if checks.iter().any(|c| !c.1) {
        bail!("state invariants violated");
    }
    Ok(())
}

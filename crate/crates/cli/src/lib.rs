//! Command-line front end: configuration files, presets, run orchestration
//! and output files. Nothing else in the workspace touches the filesystem.

pub mod config;
pub mod output;
pub mod presets;

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

use config::{parse_config, ConfigError, ConfigFile};
use output::{unix_seconds, Cell, Format, OutputDir, RunManifest, Table};
use qjump_core::experiment::{
    fringe_period, prepare, sample_parallel, total_variation, two_emitter_maxima, visibility, ExperimentSpec,
};
use qjump_core::jumps::{jump_weights, normalize, sample_jump, Outcome, ProbabilityTable};
use qjump_core::model::ModelConfig;
use qjump_core::oracle::{
    channel_probabilities, evolve, excitation_counts, first_order_prediction, max_time_step, CoupledState,
};
use qjump_core::scattering::{channel_open, elastic_source, far_field, inelastic_source, DetectorPlane};
use qjump_core::{ErrorKind, Grid, MultiIndex, ScalarField};

pub const EXIT_OK: i32 = 0;
/// Bad command line or configuration.
pub const EXIT_CONFIG: i32 = 2;
/// The physics checks rejected the run.
pub const EXIT_PHYSICS: i32 = 3;
/// A quadrature or memory budget was exceeded.
pub const EXIT_RESOURCE: i32 = 4;
/// Reading the configuration or writing outputs failed.
pub const EXIT_IO: i32 = 5;

/// Relative agreement required between full evolution and first order.
pub const ORACLE_AGREEMENT: f64 = 0.05;
/// Largest transition probability for which first order is trusted.
pub const ORACLE_WEAK_LIMIT: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "qjump", version, about = "Oscillator-array scattering with sampled quantum jumps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Use a bundled configuration instead of a file.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the shot count in the configuration.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "QJUMP_OUT", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for sampling; never changes the results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Jump weights and outcome probabilities of the [model] section.
    Weights,
    /// Far-field elastic and inelastic intensity on the [plane] screen.
    Diffract,
    /// Sample single jumps of the [model] section ([sampling] section).
    Detect,
    /// Two-stage diffraction and detection run ([experiment] section).
    Experiment,
    /// Full coupled-channel evolution against first order ([oracle] section).
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Weights => "weights",
            Command::Diffract => "diffract",
            Command::Detect => "detect",
            Command::Experiment => "experiment",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] qjump_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Outputs were written but a reported check failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_CONFIG,
            CliError::Config(ConfigError::Invalid { source, .. }) => match source.kind() {
                ErrorKind::Resource => EXIT_RESOURCE,
                _ => EXIT_CONFIG,
            },
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Physics => EXIT_PHYSICS,
                ErrorKind::Resource => EXIT_RESOURCE,
            },
            CliError::Io(_) => EXIT_IO,
            CliError::Check(_) => EXIT_PHYSICS,
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("qjump {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

/// Runs a parsed command line and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let text = match (&cli.config, &cli.preset) {
        (Some(path), _) => std::fs::read_to_string(path)?,
        (None, Some(name)) => presets::preset(name)
            .ok_or_else(|| {
                let known: Vec<&str> = presets::PRESETS.iter().map(|p| p.0).collect();
                CliError::Usage(format!("unknown preset `{name}`; known: {}", known.join(", ")))
            })?
            .to_string(),
        (None, None) => return Err(CliError::Usage("missing --config".into())),
    };
    let mut config = parse_config(&text)?;
    apply_overrides(&mut config, cli);
    let workers = effective_workers(&config, cli.command);
    let started = unix_seconds();
    let mut out = OutputDir::create(&cli.out)?;
    let seed = match cli.command {
        Command::Detect => config.sampling.map(|s| s.seed),
        Command::Experiment => config.experiment.as_ref().map(|e| e.seed),
        _ => None,
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name().to_string(),
        config_hash: config_hash(&config),
        seed,
        workers,
        started,
        finished: started,
        outputs: Vec::new(),
    };
    let outcome = match cli.command {
        Command::Weights => weights(&config, &mut out, cli.format),
        Command::Diffract => diffract(&config, &mut out, cli.format),
        Command::Detect => detect(&config, &mut out, cli.format),
        Command::Experiment => experiment(&config, &mut out, cli.format),
        Command::Oracle => oracle(&config, &mut out),
    };
    match outcome {
        Ok(()) => Ok(out.finish(manifest)?),
        Err(e @ CliError::Check(_)) => {
            out.finish(manifest)?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn apply_overrides(config: &mut ConfigFile, cli: &Cli) {
    if let Some(s) = config.sampling.as_mut() {
        s.seed = cli.seed.unwrap_or(s.seed);
        s.shots = cli.shots.unwrap_or(s.shots);
        s.workers = cli.workers.unwrap_or(s.workers);
    }
    if let Some(e) = config.experiment.as_mut() {
        e.seed = cli.seed.unwrap_or(e.seed);
        e.shots = cli.shots.unwrap_or(e.shots);
        e.workers = cli.workers.unwrap_or(e.workers);
    }
}

fn effective_workers(config: &ConfigFile, command: Command) -> usize {
    match command {
        Command::Detect => config.sampling.map_or(1, |s| s.workers),
        Command::Experiment => config.experiment.as_ref().map_or(1, |e| e.workers),
        _ => 1,
    }
}

/// SHA-256 of the effective configuration with worker counts cleared,
/// since they never change any output.
pub fn config_hash(config: &ConfigFile) -> String {
    let mut c = config.clone();
    if let Some(s) = c.sampling.as_mut() {
        s.workers = 1;
    }
    if let Some(e) = c.experiment.as_mut() {
        e.workers = 1;
    }
    output::sha256_hex(c.to_toml().as_bytes())
}

fn incident_field(config: &ConfigFile, model: &ModelConfig) -> Result<ScalarField, CliError> {
    let grid = Grid::covering(&model.sites, model.dim, config.grid.spacing, config.grid.margin)?;
    Ok(ScalarField::incident(&grid, &model.incident))
}

fn level_header(dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("n{j}")).collect()
}

fn with_levels(head: &[&str], dim: usize, tail: &[&str]) -> Table {
    let mut h: Vec<String> = head.iter().map(|s| s.to_string()).collect();
    h.extend(level_header(dim));
    h.extend(tail.iter().map(|s| s.to_string()));
    Table { header: h, rows: Vec::new() }
}

#[derive(Serialize)]
struct WeightsSummary {
    elastic_weight: f64,
    inelastic_weight: f64,
    tail_bound: f64,
    incident_norm: f64,
    elastic_probability: f64,
    /// Sum of the `probability` column.
    inelastic_probability: f64,
    total_probability: f64,
}

fn weights(config: &ConfigFile, out: &mut OutputDir, format: Format) -> Result<(), CliError> {
    let model = config.model()?;
    let psi = incident_field(config, &model)?;
    let raw = jump_weights(&psi, &model)?;
    let table = normalize(&raw, model.inelastic_branching)?;
    let mut t = with_levels(&["site"], model.dim, &["open", "weight", "probability"]);
    let mut inelastic_probability = 0.0;
    for e in &raw.entries {
        let p = table.probability(&Outcome::Jump { site: e.site, n: e.n });
        inelastic_probability += p;
        let mut row = vec![Cell::from(e.site)];
        row.extend(e.n.levels().iter().map(|&n| Cell::from(n)));
        row.extend([Cell::from(e.open), Cell::from(e.weight), Cell::from(p)]);
        t.push(row);
    }
    out.table("weights", &t, format)?;
    let summary = WeightsSummary {
        elastic_weight: raw.elastic_weight,
        inelastic_weight: raw.inelastic_mass(),
        tail_bound: raw.tail,
        incident_norm: raw.incident_norm,
        elastic_probability: table.elastic_probability(),
        inelastic_probability,
        total_probability: table.total(),
    };
    out.write("weights_summary.json", &output::pretty(&summary))?;
    Ok(())
}

fn diffract(config: &ConfigFile, out: &mut OutputDir, format: Format) -> Result<(), CliError> {
    let model = config.model()?;
    let plane = config.plane.ok_or(ConfigError::Missing("plane"))?;
    let l = model.scale.length;
    let screen = DetectorPlane::line(plane.distance / l, plane.pixel_count, plane.pixel_spacing / l)?;
    let psi = incident_field(config, &model)?;
    let elastic = far_field(&elastic_source(&psi, &model), &screen)?;
    let k_in = model.wavenumber();
    let mut inelastic = vec![0.0; screen.pixels.len()];
    for site in 0..model.sites.len() {
        for n in MultiIndex::all_upto(model.dim, model.n_max) {
            if n.is_zero() || !channel_open(k_in, &n, model.particle_mass) {
                continue;
            }
            let amp = far_field(&inelastic_source(&psi, &model, site, &n)?, &screen)?;
            inelastic.iter_mut().zip(&amp).for_each(|(acc, a)| *acc += a.norm_sqr());
        }
    }
    let mut t = Table::new(&["pixel", "position", "elastic_intensity", "inelastic_intensity"]);
    for (p, px) in screen.pixels.iter().enumerate() {
        t.push(vec![Cell::from(p), Cell::from(px[0] * l), Cell::from(elastic[p].norm_sqr()), Cell::from(inelastic[p])]);
    }
    out.table("far_field", &t, format)?;
    Ok(())
}

#[derive(Serialize)]
struct DetectSummary {
    shots: u64,
    seed: u64,
    elastic: u64,
    detections: u64,
    elastic_probability: f64,
}

fn site_table(model: &ModelConfig, counts: &[u64], table: &ProbabilityTable, shots: u64) -> Table {
    let axes: Vec<String> = (0..model.dim).map(|j| format!("x{j}")).collect();
    let mut header = vec!["site".to_string()];
    header.extend(axes);
    header.extend(["count".to_string(), "expected".to_string()]);
    let mut t = Table { header, rows: Vec::new() };
    let marginals = table.site_marginals();
    for (i, a) in model.sites.iter().enumerate() {
        let mut row = vec![Cell::from(i)];
        row.extend((0..model.dim).map(|j| Cell::from(a[j] * model.scale.length)));
        row.extend([Cell::from(counts[i]), Cell::from(marginals[i] * shots as f64)]);
        t.push(row);
    }
    t
}

fn detect(config: &ConfigFile, out: &mut OutputDir, format: Format) -> Result<(), CliError> {
    let model = config.model()?;
    let sampling = config.sampling.ok_or(ConfigError::Missing("sampling"))?;
    let psi = incident_field(config, &model)?;
    let raw = jump_weights(&psi, &model)?;
    let table = normalize(&raw, model.inelastic_branching)?;
    let h = sample_parallel(&table, sampling.seed, sampling.shots, sampling.workers, raw.fingerprint)?;
    out.table("counts", &site_table(&model, &h.site_counts, &table, h.shots), format)?;
    if sampling.events {
        let mut t = with_levels(&["shot", "outcome", "site"], model.dim, &["deposited_energy"]);
        for shot in 0..sampling.shots {
            let ev = sample_jump(&table, sampling.seed, shot)?;
            let (kind, site, levels) = match ev.outcome {
                Outcome::Elastic => ("elastic", None, vec![0; model.dim]),
                Outcome::Jump { site, n } => ("jump", Some(site), n.levels().to_vec()),
            };
            let mut row = vec![Cell::from(shot), Cell::from(kind), Cell::from(site)];
            row.extend(levels.into_iter().map(Cell::from));
            row.push(Cell::from(ev.deposited_energy * model.scale.energy));
            t.push(row);
        }
        out.table("events", &t, format)?;
    }
    let summary = DetectSummary {
        shots: h.shots,
        seed: sampling.seed,
        elastic: h.elastic,
        detections: h.detections(),
        elastic_probability: table.elastic_probability(),
    };
    out.write("detect_summary.json", &output::pretty(&summary))?;
    Ok(())
}

#[derive(Serialize)]
struct ExperimentSummary {
    shots: u64,
    seed: u64,
    detections: u64,
    elastic: u64,
    elastic_probability: f64,
    /// `None` when the central lobe holds too few counts.
    visibility: Option<f64>,
    expected_visibility: Option<f64>,
    /// Mean spacing of the bright fringes in pixels.
    fringe_period: Option<f64>,
    /// Two-emitter structure-factor period in pixels over the same span of
    /// diffraction orders as the detected fringes (two sites only).
    predicted_period: Option<f64>,
    total_variation: f64,
    config_hash: String,
}

fn experiment(config: &ConfigFile, out: &mut OutputDir, format: Format) -> Result<(), CliError> {
    let spec = config.experiment()?;
    let prep = prepare(&spec)?;
    let h = prep.run()?;
    let expected = prep.expected_counts(h.shots);
    let positions = spec.pixel_positions();

    let mut t = Table::new(&["pixel", "position", "count", "expected"]);
    for (p, x) in positions.iter().enumerate() {
        t.push(vec![Cell::from(p), Cell::from(*x), Cell::from(h.site_counts[p]), Cell::from(expected[p])]);
    }
    out.table("histogram", &t, format)?;
    let mut t = Table::new(&["pixel", "position", "intensity", "detection_probability"]);
    for (p, pt) in prep.profile.iter().enumerate() {
        t.push(vec![
            Cell::from(p),
            Cell::from(pt.position),
            Cell::from(pt.intensity),
            Cell::from(pt.detection_probability),
        ]);
    }
    out.table("profile", &t, format)?;

    let counts: Vec<f64> = h.site_counts.iter().map(|&c| c as f64).collect();
    let measured = fringe_period(&counts, spec.visibility.smoothing);
    let predicted_period = match (&measured, spec.diffractor.sites.len()) {
        (Some((_, peaks)), 2) => structure_period(&spec, peaks),
        _ => None,
    };
    let summary = ExperimentSummary {
        shots: h.shots,
        seed: h.seed,
        detections: h.detections(),
        elastic: h.elastic,
        elastic_probability: prep.table.elastic_probability(),
        visibility: visibility(&h, &spec.visibility).ok(),
        expected_visibility: qjump_core::experiment::visibility_of(&expected, &spec.visibility).ok(),
        fringe_period: measured.map(|p| p.0),
        predicted_period,
        total_variation: total_variation(&h, &prep.table),
        config_hash: format!("{:016x}", prep.config_hash),
    };
    out.write("summary.json", &output::pretty(&summary))?;
    Ok(())
}

/// Mean spacing in pixels of the two-emitter maxima between the orders
/// nearest the first and last detected peaks.
pub fn structure_period(spec: &ExperimentSpec, peaks: &[f64]) -> Option<f64> {
    let a = &spec.diffractor.sites;
    let sep = (0..3).map(|j| (a[1][j] - a[0][j]).powi(2)).sum::<f64>().sqrt() * spec.diffractor.scale.length;
    let positions = spec.pixel_positions();
    let pitch = positions[1] - positions[0];
    let order = |j: i64| two_emitter_maxima(spec, sep, j..=j).first().copied();
    let nearest = |px: f64| {
        let x = positions[0] + px * pitch;
        (0..)
            .map_while(|j: i64| order(j).map(|v| (j, v)))
            .flat_map(|(j, v)| [(j, v), (-j, -v)])
            .min_by(|p, q| (p.1 - x).abs().total_cmp(&(q.1 - x).abs()))
    };
    let (ja, xa) = nearest(*peaks.first()?)?;
    let (jb, xb) = nearest(*peaks.last()?)?;
    (jb != ja).then(|| (xb - xa) / (jb - ja) as f64 / pitch)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub levels: Vec<u32>,
    pub probability: f64,
    /// First-order probability (singly excited channels only).
    pub first_order: Option<f64>,
    pub relative_error: Option<f64>,
    /// Open at the packet's central energy.
    pub open: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleDiagnostics {
    pub norm_drift: f64,
    pub absorbed: f64,
    /// Population of every channel with a site in its highest level.
    pub top_level_population: f64,
    /// Largest relative change of an open channel's probability when the
    /// step is halved.
    pub step_halving_change: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub parameters: ConfigFile,
    pub time: f64,
    pub time_step: f64,
    pub steps: usize,
    pub channels: Vec<ChannelReport>,
    pub single_excitation: f64,
    pub multiple_excitation: f64,
    pub max_transition_probability: f64,
    pub max_relative_error: Option<f64>,
    pub diagnostics: OracleDiagnostics,
    pub within_tolerance: bool,
}

/// Runs the full evolution and the first-order prediction for the
/// `[model]` and `[oracle]` sections.
pub fn oracle_report(config: &ConfigFile) -> Result<OracleReport, CliError> {
    let model = config.model()?;
    let sec = config.oracle.ok_or(ConfigError::Missing("oracle"))?;
    let t = sec.time / model.scale.time;
    let bound = max_time_step(&model, sec.grid.spacing);
    let dt = sec.time_step.map_or(bound, |s| s / model.scale.time);
    let start = CoupledState::initial(&model, &sec.grid)?;
    let state = evolve(start.clone(), &model, t, dt)?;
    let steps = (t / dt - 1e-9).ceil().max(0.0) as usize;
    let probs = channel_probabilities(&state);
    let first = first_order_prediction(&model, t, &sec.first_order)?;
    let k_in = model.wavenumber();

    let halved =
        if sec.step_halving { Some(channel_probabilities(&evolve(start, &model, t, dt / 2.0)?)) } else { None };
    let mut channels = Vec::with_capacity(probs.len());
    let mut step_change: Option<f64> = None;
    for (i, p) in probs.iter().enumerate() {
        let excited: u32 = p.levels.iter().sum();
        let open = excited > 0 && channel_open(k_in, &MultiIndex::new(&[excited]), model.particle_mass);
        let first_order = first.iter().find(|c| c.levels == p.levels).map(|c| c.probability);
        let relative_error = match first_order {
            Some(f) if open && f > 0.0 => Some((p.probability - f).abs() / f),
            _ => None,
        };
        if let (Some(h), true) = (&halved, open) {
            let q = h[i].probability;
            if q > 0.0 {
                let c = (p.probability - q).abs() / q;
                step_change = Some(step_change.map_or(c, |s: f64| s.max(c)));
            }
        }
        channels.push(ChannelReport {
            levels: p.levels.clone(),
            probability: p.probability,
            first_order,
            relative_error,
            open,
        });
    }
    let (single, multiple) = excitation_counts(&probs);
    let max_transition =
        channels.iter().filter(|c| c.levels.iter().any(|&n| n > 0)).map(|c| c.probability).fold(0.0, f64::max);
    let max_relative_error = channels.iter().filter_map(|c| c.relative_error).reduce(f64::max);
    let top = probs.iter().filter(|p| p.levels.contains(&model.n_max)).map(|p| p.probability).sum();
    let norm_drift = (state.total_norm() + state.absorbed - 1.0).abs();
    let within_tolerance = max_transition <= ORACLE_WEAK_LIMIT
        && max_relative_error.is_some_and(|e| e < ORACLE_AGREEMENT)
        && norm_drift <= qjump_core::oracle::NORM_TOLERANCE;
    Ok(OracleReport {
        parameters: ConfigFile { model: config.model.clone(), oracle: Some(sec), ..ConfigFile::default() },
        time: sec.time,
        time_step: t / steps.max(1) as f64 * model.scale.time,
        steps,
        channels,
        single_excitation: single,
        multiple_excitation: multiple,
        max_transition_probability: max_transition,
        max_relative_error,
        diagnostics: OracleDiagnostics {
            norm_drift,
            absorbed: state.absorbed,
            top_level_population: top,
            step_halving_change: step_change,
        },
        within_tolerance,
    })
}

fn oracle(config: &ConfigFile, out: &mut OutputDir) -> Result<(), CliError> {
    let report = oracle_report(config)?;
    out.write("oracle.json", &output::pretty(&report))?;
    if report.within_tolerance {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "first order and full evolution disagree (max relative error {:?}, max transition probability {:e})",
            report.max_relative_error, report.max_transition_probability
        )))
    }
}

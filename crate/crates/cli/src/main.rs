//! Command-line front end for the penalised t-walk toolkit.
//!
//! Four subcommands cover the full workflow:
//!
//! * `run` — sample a target with the plain or penalised kernel and write
//!   the trace (CSV + metadata sidecar) plus a diagnostics report.
//! * `table1` — tabulate the penalty normalising constant 𝔷 over a grid of
//!   shapes, dimensions, and strengths.
//! * `combine` — merge two mode-trapped samples with the pseudo-marginal
//!   index chain and write the combined sample plus a summary.
//! * `diag` — recompute diagnostics (and optionally a 2-d KDE grid) for a
//!   saved trace.
//!
//! Option precedence for `run` is: command-line flags, then the optional
//! TOML config file, then built-in defaults. Every random quantity derives
//! from the single `--seed` through fixed per-purpose stream ids, so equal
//! invocations produce byte-identical outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ptwalk::combine::{combine_run, LooKdeConfig, RegionSample};
use ptwalk::diagnostics::{kde_grid, report};
use ptwalk::penalty::{normconst_mc, PenaltyConfig, PenaltyShape, PenaltyVariant, ProposalFamily};
use ptwalk::rng::{stream_rng, STREAM_COMBINE, STREAM_TABLE1_BASE};
use ptwalk::targets::{builtin, load_spec, Builtin, GaussianMixture};
use ptwalk::twalk::{run, KernelConfig};
use ptwalk::{Target, Trace};

/// Multimodal MCMC toolkit: penalised t-walk sampling, penalty
/// normalising-constant tables, pseudo-marginal sample combination, and
/// trace diagnostics.
#[derive(Parser)]
#[command(name = "ptwalk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampler on a target and write the trace plus diagnostics.
    Run(RunArgs),
    /// Tabulate the penalty normalising constant over a parameter grid.
    #[command(name = "table1")]
    Table1(Table1Args),
    /// Merge two mode-trapped samples with the pseudo-marginal index chain.
    Combine(CombineArgs),
    /// Recompute diagnostics for a saved trace.
    Diag(DiagArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Table1(a) => cmd_table1(a),
        Command::Combine(a) => cmd_combine(a),
        Command::Diag(a) => cmd_diag(a),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Parses a nonnegative whole number given either plainly (`500000`) or in
/// scientific notation (`5e5`, `1.2e6`).
fn parse_count(s: &str) -> Result<u64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = t
        .parse()
        .map_err(|_| anyhow!("'{s}' is not a count (use e.g. 500000 or 5e5)"))?;
    ensure!(
        v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53),
        "'{s}' is not a nonnegative whole number"
    );
    Ok(v as u64)
}

/// clap adapter for [`parse_count`].
fn parse_count_arg(s: &str) -> std::result::Result<u64, String> {
    parse_count(s).map_err(|e| e.to_string())
}

/// Resolves a target description: first as a builtin name, then as a path
/// to a TOML mixture spec.
fn resolve_target(spec: &str) -> Result<GaussianMixture> {
    if let Ok(b) = spec.parse::<Builtin>() {
        return Ok(builtin(b));
    }
    let path = Path::new(spec);
    if path.exists() {
        return load_spec(path).with_context(|| format!("loading target spec {}", path.display()));
    }
    bail!(
        "unknown target '{spec}': expected a builtin name (example1, example1_weighted, \
         cube9, banana10) or a path to a TOML mixture spec"
    )
}

/// Derives the path of a companion file written next to `out`
/// (`trace.csv` + `diag.json` → `trace.diag.json`).
fn companion(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Penalty-move handling for a run.
#[derive(ValueEnum, Clone, Copy, PartialEq, Eq, Debug)]
enum PenaltyMode {
    /// Penalised kernel; the extra move uses the rejection sampler.
    Rejection,
    /// Penalised kernel; the extra move uses the gradient flip sampler
    /// (requires a target with gradients).
    Gradient,
    /// Plain kernel: the penalty move is never attempted.
    None,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file supplying defaults for the other options.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Target: a builtin name (example1, example1_weighted, cube9,
    /// banana10) or a path to a TOML mixture spec.
    #[arg(long)]
    target: Option<String>,
    /// Number of kernel iterations (accepts scientific notation, e.g. 5e5).
    #[arg(long, value_parser = parse_count_arg)]
    iters: Option<u64>,
    /// Store every thin-th state.
    #[arg(long, value_parser = parse_count_arg)]
    thin: Option<u64>,
    /// Master seed; the chain stream is derived from it with a fixed
    /// stream id, so equal seeds give byte-identical outputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Penalty move variant, or `none` for the plain kernel.
    #[arg(long, value_enum)]
    penalty: Option<PenaltyMode>,
    /// Probability of attempting the penalty move at each iteration.
    #[arg(long)]
    penalty_prob: Option<f64>,
    /// Penalty strength κ (scales the penalty geometry).
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Penalty shape: gaussian, t, t:<df>, or bump.
    #[arg(long)]
    shape: Option<String>,
    /// Proposal family g: gaussian, t, or t:<df>.
    #[arg(long)]
    proposal: Option<String>,
    /// Trial cap for the rejection variant before the move counts as failed.
    #[arg(long)]
    max_trials: Option<u32>,
    /// First start point, comma separated (defaults to the origin).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "X,X,...")]
    x0: Option<Vec<f64>>,
    /// Second start point, comma separated (defaults to all ones).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "X,X,...")]
    y0: Option<Vec<f64>>,
    /// Output trace CSV; a .meta.json sidecar and a .diag.json report are
    /// written alongside.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A count in a TOML config file: either an integer or a string in
/// scientific notation ("5e5").
#[derive(Deserialize)]
#[serde(untagged)]
enum CountValue {
    Int(u64),
    Text(String),
}

impl CountValue {
    fn value(&self) -> Result<u64> {
        match self {
            CountValue::Int(v) => Ok(*v),
            CountValue::Text(s) => parse_count(s),
        }
    }
}

/// Config-file counterpart of [`RunArgs`]; every field is optional and
/// fills in only where the command line is silent.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    target: Option<String>,
    iters: Option<CountValue>,
    thin: Option<CountValue>,
    seed: Option<u64>,
    penalty: Option<String>,
    penalty_prob: Option<f64>,
    kappa: Option<f64>,
    shape: Option<String>,
    proposal: Option<String>,
    max_trials: Option<u32>,
    x0: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    out: Option<PathBuf>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(p) = path else {
        return Ok(FileConfig::default());
    };
    let text =
        std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
}

fn parse_mode(s: &str) -> Result<PenaltyMode> {
    match s.to_ascii_lowercase().as_str() {
        "rejection" => Ok(PenaltyMode::Rejection),
        "gradient" => Ok(PenaltyMode::Gradient),
        "none" => Ok(PenaltyMode::None),
        other => bail!("unknown penalty mode '{other}' (expected rejection, gradient, or none)"),
    }
}

/// Fully resolved `run` settings after merging flags, config file, and
/// defaults.
struct RunSettings {
    target: String,
    iters: u64,
    thin: u64,
    kernel: KernelConfig,
    x0: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    out: PathBuf,
}

fn resolve_run(args: &RunArgs) -> Result<RunSettings> {
    let file = load_file_config(args.config.as_deref())?;
    let base = KernelConfig::default();

    let target = args
        .target
        .clone()
        .or_else(|| file.target.clone())
        .unwrap_or_else(|| "example1".to_string());
    let iters = match (args.iters, &file.iters) {
        (Some(v), _) => v,
        (None, Some(c)) => c.value().context("config field 'iters'")?,
        (None, None) => 100_000,
    };
    let thin = match (args.thin, &file.thin) {
        (Some(v), _) => v,
        (None, Some(c)) => c.value().context("config field 'thin'")?,
        (None, None) => 10,
    };
    let mode = match (args.penalty, &file.penalty) {
        (Some(m), _) => m,
        (None, Some(s)) => parse_mode(s).context("config field 'penalty'")?,
        (None, None) => PenaltyMode::Rejection,
    };
    let shape = match (&args.shape, &file.shape) {
        (Some(s), _) => s.parse::<PenaltyShape>()?,
        (None, Some(s)) => s.parse::<PenaltyShape>().context("config field 'shape'")?,
        (None, None) => base.penalty.shape,
    };
    let proposal = match (&args.proposal, &file.proposal) {
        (Some(s), _) => s.parse::<ProposalFamily>()?,
        (None, Some(s)) => s
            .parse::<ProposalFamily>()
            .context("config field 'proposal'")?,
        (None, None) => base.penalty.proposal_family,
    };

    let mut kernel = base;
    kernel.seed = args.seed.or(file.seed).unwrap_or(0);
    kernel.penalty_prob = if mode == PenaltyMode::None {
        0.0
    } else {
        args.penalty_prob
            .or(file.penalty_prob)
            .unwrap_or(kernel.penalty_prob)
    };
    kernel.penalty.shape = shape;
    kernel.penalty.proposal_family = proposal;
    kernel.penalty.kappa = args.kappa.or(file.kappa).unwrap_or(kernel.penalty.kappa);
    kernel.penalty.max_trials = args
        .max_trials
        .or(file.max_trials)
        .unwrap_or(kernel.penalty.max_trials);
    kernel.penalty.variant = match mode {
        PenaltyMode::Gradient => PenaltyVariant::Gradient,
        PenaltyMode::Rejection | PenaltyMode::None => PenaltyVariant::Rejection,
    };

    Ok(RunSettings {
        target,
        iters,
        thin,
        kernel,
        x0: args.x0.clone().or_else(|| file.x0.clone()),
        y0: args.y0.clone().or_else(|| file.y0.clone()),
        out: args
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("trace.csv")),
    })
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let st = resolve_run(args)?;
    let target = resolve_target(&st.target)?;
    let d = target.dim();
    let x0 = st.x0.unwrap_or_else(|| vec![0.0; d]);
    let y0 = st.y0.unwrap_or_else(|| vec![1.0; d]);
    ensure!(
        x0.len() == d && y0.len() == d,
        "start points must have {d} coordinates for target '{}' (got {} and {})",
        target.name(),
        x0.len(),
        y0.len()
    );

    let trace = run(&target, &st.kernel, &x0, &y0, st.iters, st.thin)?;
    trace.save(&st.out)?;

    println!(
        "target {} (d={}), {} iterations, thin {}, seed {}",
        target.name(),
        d,
        st.iters,
        st.thin,
        st.kernel.seed
    );

    // Diagnostics are best-effort here: a run too short to support them
    // still yields its trace and sidecar.
    let centres = target.mode_centres();
    let mut written = vec![
        st.out.display().to_string(),
        companion(&st.out, "meta.json").display().to_string(),
    ];
    match report(&trace, centres.as_deref()) {
        Ok(rep) => {
            let diag_path = companion(&st.out, "diag.json");
            let mut json = serde_json::to_string_pretty(&rep)?;
            json.push('\n');
            std::fs::write(&diag_path, json)?;
            written.push(diag_path.display().to_string());

            println!("global acceptance {:.4}", rep.global_acceptance);
            for (kind, rate) in &rep.per_move_acceptance {
                println!("  {kind}: {rate:.4}");
            }
            if !rep.mode_occupancy.is_empty() {
                let parts: Vec<String> =
                    rep.mode_occupancy.iter().map(|v| format!("{v:.3}")).collect();
                println!("mode occupancy [{}]", parts.join(", "));
            }
        }
        Err(e) => eprintln!("note: diagnostics skipped ({e})"),
    }
    println!("wrote {}", written.join(", "));
    Ok(())
}

// ---------------------------------------------------------------------------
// table1
// ---------------------------------------------------------------------------

#[derive(Args)]
struct Table1Args {
    /// Dimensions to tabulate, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16])]
    dims: Vec<usize>,
    /// Penalty strengths κ, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0])]
    kappas: Vec<f64>,
    /// Penalty shapes, comma separated (gaussian, t, t:<df>, bump).
    #[arg(long, value_delimiter = ',',
          default_values_t = ["gaussian".to_string(), "t".to_string()])]
    shapes: Vec<String>,
    /// Proposal family used for the Monte Carlo estimate.
    #[arg(long, default_value = "t")]
    proposal: String,
    /// Monte Carlo draws per cell (accepts scientific notation, e.g. 1e6).
    #[arg(long, value_parser = parse_count_arg, default_value = "1e6")]
    samples: u64,
    /// Master seed; each cell uses its own derived stream, so the table is
    /// reproducible regardless of worker count.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_table1(args: &Table1Args) -> Result<()> {
    ensure!(args.samples > 0, "samples must be at least 1");
    ensure!(
        !args.dims.is_empty() && !args.kappas.is_empty() && !args.shapes.is_empty(),
        "dims, kappas, and shapes must each list at least one value"
    );
    let proposal: ProposalFamily = args.proposal.parse()?;
    let shapes: Vec<PenaltyShape> = args
        .shapes
        .iter()
        .map(|s| s.parse::<PenaltyShape>())
        .collect::<std::result::Result<_, _>>()?;

    struct Cell {
        shape: PenaltyShape,
        d: usize,
        kappa: f64,
        stream: u64,
    }
    let mut cells = Vec::new();
    for shape in &shapes {
        for &d in &args.dims {
            for &kappa in &args.kappas {
                ensure!(d > 0, "dimensions must be positive");
                ensure!(
                    kappa.is_finite() && kappa > 0.0,
                    "kappa values must be positive (got {kappa})"
                );
                let stream = STREAM_TABLE1_BASE + cells.len() as u64;
                cells.push(Cell { shape: *shape, d, kappa, stream });
            }
        }
    }

    // Each cell draws from its own seed-derived stream, so fanning the
    // cells across workers cannot change any estimate.
    let rows: Vec<_> = cells
        .par_iter()
        .map(|c| {
            let cfg = PenaltyConfig {
                shape: c.shape,
                kappa: c.kappa,
                proposal_family: proposal,
                ..PenaltyConfig::default()
            };
            let mut rng = stream_rng(args.seed, c.stream);
            (c, normconst_mc(&cfg, c.d, args.samples, &mut rng))
        })
        .collect();

    let mut csv = String::from("penalty_shape,proposal,d,kappa,n,z_hat,std_err\n");
    for (c, est) in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            c.shape.label(),
            proposal.label(),
            c.d,
            c.kappa,
            est.n,
            est.z_hat,
            est.std_err
        )?;
    }
    match &args.out {
        Some(p) => {
            std::fs::write(p, csv)?;
            println!("wrote {} ({} rows)", p.display(), rows.len());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// combine
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CombineArgs {
    /// First mode-trapped sample: a trace CSV written by `run`, or a bare
    /// numeric matrix CSV with one point per row.
    sample_a: PathBuf,
    /// Second mode-trapped sample (same formats).
    sample_b: PathBuf,
    /// Target density (builtin name or TOML spec path).
    #[arg(long)]
    target: String,
    /// Index-chain iterations (accepts scientific notation, e.g. 1e5).
    #[arg(long, value_parser = parse_count_arg, default_value = "1e5")]
    iters: u64,
    /// Master seed; the combination stream is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points to discard from the front of each input (for a trace CSV,
    /// stored rows after the initial state; the initial state is always
    /// dropped).
    #[arg(long, value_parser = parse_count_arg, default_value = "0")]
    burn_in: u64,
    /// Output CSV for the combined sample; a .summary.json is written
    /// alongside.
    #[arg(long, default_value = "combined.csv")]
    out: PathBuf,
}

/// Loads one region sample: a trace CSV (first-point series after
/// burn-in) or a bare numeric matrix (rows after burn-in).
fn load_points(path: &Path, burn_in: u64) -> Result<Vec<Vec<f64>>> {
    if let Ok(trace) = Trace::load(path) {
        let skip = burn_in as usize + 1; // also drop the initial state
        ensure!(
            trace.states.len() >= skip + 2,
            "{}: only {} stored states, need at least burn-in + 2",
            path.display(),
            trace.states.len()
        );
        return Ok(trace.states[skip..].iter().map(|s| s.x.clone()).collect());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    anyhow!(
                        "{}: '{f}' is not a number; expected a trace CSV or a numeric matrix",
                        path.display()
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            ensure!(
                row.len() == first.len(),
                "{}: rows have inconsistent widths ({} vs {})",
                path.display(),
                row.len(),
                first.len()
            );
        }
        rows.push(row);
    }
    let kept: Vec<Vec<f64>> = rows.into_iter().skip(burn_in as usize).collect();
    ensure!(
        kept.len() >= 2,
        "{}: need at least 2 points after burn-in",
        path.display()
    );
    Ok(kept)
}

/// Summary sidecar written next to the combined CSV.
#[derive(Serialize)]
struct CombineSummary<'a> {
    target: &'a str,
    n_region_1: usize,
    n_region_2: usize,
    iters: u64,
    seed: u64,
    acceptance: f64,
    occupancy: [f64; 2],
    bandwidth_region_1: &'a [f64],
    bandwidth_region_2: &'a [f64],
    overlap_warning: bool,
}

fn cmd_combine(args: &CombineArgs) -> Result<()> {
    ensure!(args.iters > 0, "iters must be at least 1");
    let target = resolve_target(&args.target)?;
    let points_a = load_points(&args.sample_a, args.burn_in)?;
    let points_b = load_points(&args.sample_b, args.burn_in)?;
    let n1 = points_a.len();
    let n2 = points_b.len();
    let sample_a = RegionSample::new(points_a, 1, &target)?;
    let sample_b = RegionSample::new(points_b, 2, &target)?;

    let cfg = LooKdeConfig::default();
    let mut rng = stream_rng(args.seed, STREAM_COMBINE);
    let result = combine_run(&sample_a, &sample_b, &cfg, args.iters, &mut rng)?;
    if result.overlap_warning {
        eprintln!(
            "warning: the two samples overlap within one KDE bandwidth; \
             they may cover the same region, making the combined weights unreliable"
        );
    }

    let d = target.dim();
    let mut csv = String::from("step,region,index");
    for k in 0..d {
        write!(csv, ",x_{k}")?;
    }
    csv.push('\n');
    for (step, (state, point)) in result.index_trace.iter().zip(&result.points).enumerate() {
        write!(csv, "{step},{},{}", state.m, state.i)?;
        for v in point {
            write!(csv, ",{v}")?;
        }
        csv.push('\n');
    }
    std::fs::write(&args.out, csv)?;

    let summary = CombineSummary {
        target: target.name(),
        n_region_1: n1,
        n_region_2: n2,
        iters: args.iters,
        seed: args.seed,
        acceptance: result.acceptance,
        occupancy: result.occupancy,
        bandwidth_region_1: &result.bandwidth_1,
        bandwidth_region_2: &result.bandwidth_2,
        overlap_warning: result.overlap_warning,
    };
    let summary_path = companion(&args.out, "summary.json");
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    std::fs::write(&summary_path, json)?;

    println!(
        "combined {} + {} points over {} index-chain iterations",
        n1, n2, args.iters
    );
    println!(
        "acceptance {:.4}, occupancy [{:.4}, {:.4}]",
        result.acceptance, result.occupancy[0], result.occupancy[1]
    );
    println!("wrote {}, {}", args.out.display(), summary_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// diag
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DiagArgs {
    /// Trace CSV produced by `run`.
    trace: PathBuf,
    /// Target (builtin name or TOML spec path); enables mode occupancy.
    #[arg(long)]
    target: Option<String>,
    /// Stored rows to discard after the initial state (the initial state
    /// is always dropped).
    #[arg(long, value_parser = parse_count_arg, default_value = "0")]
    burn_in: u64,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// When set, also write a 2-d KDE grid CSV (columns x,y,density) here.
    #[arg(long)]
    kde_out: Option<PathBuf>,
    /// Coordinate pair for the KDE grid.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1], value_name = "I,J")]
    kde_dims: Vec<usize>,
    /// KDE grid resolution (cells per axis).
    #[arg(long, value_delimiter = ',', default_values_t = [40usize, 40], value_name = "NX,NY")]
    kde_res: Vec<usize>,
}

fn cmd_diag(args: &DiagArgs) -> Result<()> {
    let full = Trace::load(&args.trace)?;
    let skip = args.burn_in as usize;
    ensure!(
        full.states.len() >= skip + 3 && full.records.len() >= skip + 2,
        "{}: {} stored states is too few for burn-in {} (need burn-in + 3)",
        args.trace.display(),
        full.states.len(),
        args.burn_in
    );
    // A loaded trace has one record per stored row; record i describes the
    // transition into state i + 1, so the two slices below stay aligned.
    let trace = Trace {
        records: full.records[skip..].to_vec(),
        states: full.states[skip + 1..].to_vec(),
        thin: full.thin,
        meta: full.meta.clone(),
    };

    let target = args
        .target
        .as_deref()
        .map(resolve_target)
        .transpose()?;
    let centres = target.as_ref().and_then(|t| t.mode_centres());
    let rep = report(&trace, centres.as_deref())?;
    let mut json = serde_json::to_string_pretty(&rep)?;
    json.push('\n');
    match &args.out {
        Some(p) => {
            std::fs::write(p, json)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{json}"),
    }

    if let Some(kde_path) = &args.kde_out {
        ensure!(
            args.kde_dims.len() == 2,
            "--kde-dims takes exactly two comma-separated coordinates"
        );
        ensure!(
            args.kde_res.len() == 2,
            "--kde-res takes exactly two comma-separated cell counts"
        );
        let points: Vec<Vec<f64>> = trace.states.iter().map(|s| s.x.clone()).collect();
        let grid = kde_grid(
            &points,
            (args.kde_dims[0], args.kde_dims[1]),
            (args.kde_res[0], args.kde_res[1]),
        )?;
        let mut csv = String::from("x,y,density\n");
        for (iy, y) in grid.ys.iter().enumerate() {
            for (ix, x) in grid.xs.iter().enumerate() {
                writeln!(csv, "{x},{y},{}", grid.density[iy][ix])?;
            }
        }
        std::fs::write(kde_path, csv)?;
        eprintln!("wrote {}", kde_path.display());
    }
    Ok(())
}

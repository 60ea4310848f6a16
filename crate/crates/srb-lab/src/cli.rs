//! Config-driven command-line front end. Every experiment writes a CSV and a
//! JSON summary named `<kind>-<confighash>.{csv,json}` under the output
//! directory; flags override values from `--config FILE`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::artifacts::{artifact_paths, config_hash, json_bytes, write_atomic, Csv};
use crate::error::{Error, Result};
use crate::experiments::{
    estimate_exceptional_measure, estimate_recovery_depth, growth_survey, lyapunov_vertical,
    stability_sweep, StabilityConfig,
};
use crate::induced::{build_induced, return_time_tail};
use crate::maps::SkewMapParams;
use crate::symbolic::HyperbolicParams;
use crate::transfer::{build_ulam, invariant_density, Grid};

#[derive(Parser)]
#[command(
    name = "srb-lab",
    version,
    about = "Skew-product map experiments: orbits, transfer operators, induced schemes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// L¹ movement of the invariant density under a(θ)-perturbations
    Stability(CommonArgs),
    /// Decay of the exceptional-set fractions with n
    Endecay(CommonArgs),
    /// Recovery depth after visits near the critical line
    Recovery(CommonArgs),
    /// Fiber-segment growth and attractor-section cover times
    Growth(CommonArgs),
    /// Induced return-time scheme and its tail statistics
    Induced(CommonArgs),
    /// Vertical Lyapunov exponent distribution
    Lyapunov(CommonArgs),
    /// Ulam matrix dump plus invariant-density diagnostics
    Ulam(CommonArgs),
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::Stability(_) => "stability",
            Command::Endecay(_) => "endecay",
            Command::Recovery(_) => "recovery",
            Command::Growth(_) => "growth",
            Command::Induced(_) => "induced",
            Command::Lyapunov(_) => "lyapunov",
            Command::Ulam(_) => "ulam",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Stability(a)
            | Command::Endecay(a)
            | Command::Recovery(a)
            | Command::Growth(a)
            | Command::Induced(a)
            | Command::Lyapunov(a)
            | Command::Ulam(a) => a,
        }
    }
}

#[derive(Args)]
pub struct CommonArgs {
    /// JSON file with the same fields as the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub raw: RawConfig,
}

/// Flat option bag shared by the subcommands and the config file. Fields a
/// given experiment does not use are ignored by it.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    /// Map variant: viana | test_doubling_product | test_linear
    #[arg(long)]
    pub variant: Option<String>,
    /// Circle-expansion degree d
    #[arg(long)]
    pub degree: Option<u32>,
    /// Quadratic parameter a₀
    #[arg(long)]
    pub a0: Option<f64>,
    /// Coupling strength α
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated α list (recovery sweep)
    #[arg(long)]
    pub alphas: Option<String>,
    /// Comma-separated perturbation amplitudes δ; must include 0 for stability
    #[arg(long)]
    pub deltas: Option<String>,
    /// Grid as THETAxX, e.g. 256x256
    #[arg(long)]
    pub grid: Option<String>,
    /// Ulam sample points per grid cell
    #[arg(long)]
    pub subsamples: Option<usize>,
    /// Monte-Carlo sample count
    #[arg(long)]
    pub samples: Option<usize>,
    /// Orbit length for per-sample statistics
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated n values (endecay)
    #[arg(long)]
    pub n_list: Option<String>,
    /// Deep-return exponent η ∈ (0, 1/4)
    #[arg(long)]
    pub eta: Option<f64>,
    /// Orbit-scan cap (recovery, induced)
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Number of random fibers (growth)
    #[arg(long)]
    pub fibers: Option<usize>,
    /// Fiber segment length |J| (growth)
    #[arg(long)]
    pub segment_len: Option<f64>,
    /// Iteration cap per fiber (growth)
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Probes per cell (induced)
    #[arg(long)]
    pub probes: Option<usize>,
    /// Smallest admissible hyperbolic return (induced)
    #[arg(long)]
    pub p_start: Option<usize>,
    /// Comma-separated tail truncation levels N (induced)
    #[arg(long)]
    pub tail_n: Option<String>,
    /// Tail norm exponent q (induced)
    #[arg(long)]
    pub q: Option<f64>,
    /// Birkhoff orbit count (stability cross-check)
    #[arg(long)]
    pub orbits: Option<usize>,
    /// Birkhoff orbit length (stability cross-check)
    #[arg(long)]
    pub length: Option<usize>,
    /// Birkhoff burn-in (stability cross-check)
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Invariant-density residual target
    #[arg(long)]
    pub density_tol: Option<f64>,
    /// Invariant-density iteration cap
    #[arg(long)]
    pub density_max_iter: Option<usize>,
    /// RNG seed (required; no wall-clock seeding)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Artifact directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),+ $(,)?) => {
        RawConfig { $($f: $flags.$f.clone().or($file.$f.clone())),+ }
    };
}

fn merge(flags: &RawConfig, file: &RawConfig) -> RawConfig {
    merge_fields!(
        flags,
        file,
        variant,
        degree,
        a0,
        alpha,
        alphas,
        deltas,
        grid,
        subsamples,
        samples,
        n,
        n_list,
        eta,
        max_steps,
        fibers,
        segment_len,
        max_iter,
        probes,
        p_start,
        tail_n,
        q,
        orbits,
        length,
        burn_in,
        density_tol,
        density_max_iter,
        seed,
        out_dir,
    )
}

fn load_config_file(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(|tok| tok.trim().parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("malformed {what} list: {s:?}")))?;
    if items.is_empty() {
        return Err(Error::Config(format!("{what} list is empty")));
    }
    Ok(items)
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("grid must look like 256x256, got {s:?}")))?;
    let nt = a
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad grid dims {s:?}")))?;
    let nx = b
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad grid dims {s:?}")))?;
    Ok((nt, nx))
}

/// Fully resolved run description; its JSON encoding is what gets hashed
/// into the artifact file names.
#[derive(Clone, Debug, Serialize)]
struct ResolvedConfig {
    kind: String,
    variant: String,
    degree: u32,
    a0: f64,
    alpha: f64,
    alphas: Vec<f64>,
    deltas: Vec<f64>,
    n_theta: usize,
    n_x: usize,
    subsamples: usize,
    samples: usize,
    n: usize,
    n_list: Vec<usize>,
    eta: f64,
    max_steps: usize,
    fibers: usize,
    segment_len: f64,
    max_iter: usize,
    probes: usize,
    p_start: usize,
    tail_n: Vec<usize>,
    q: f64,
    orbits: usize,
    length: usize,
    burn_in: usize,
    density_tol: f64,
    density_max_iter: usize,
    seed: u64,
}

fn resolve(kind: &str, raw: &RawConfig) -> Result<(ResolvedConfig, PathBuf)> {
    let seed = raw
        .seed
        .ok_or_else(|| Error::Config("--seed is required (no wall-clock seeding)".into()))?;
    let variant = raw.variant.clone().unwrap_or_else(|| "viana".into());
    match variant.as_str() {
        "viana" | "test_doubling_product" | "test_linear" => {}
        other => {
            return Err(Error::Config(format!(
                "unknown variant {other:?}; expected viana | test_doubling_product | test_linear"
            )))
        }
    }
    let alpha = raw.alpha.unwrap_or(0.01);
    let (n_theta, n_x) = parse_grid(raw.grid.as_deref().unwrap_or("64x64"))?;
    let cfg = ResolvedConfig {
        kind: kind.to_string(),
        variant,
        degree: raw.degree.unwrap_or(16),
        a0: raw.a0.unwrap_or(1.9),
        alpha,
        alphas: match &raw.alphas {
            Some(s) => parse_list(s, "alphas")?,
            None => vec![alpha],
        },
        deltas: match &raw.deltas {
            Some(s) => parse_list(s, "deltas")?,
            None => vec![0.0, 1e-3, 1e-2, 1e-1],
        },
        n_theta,
        n_x,
        subsamples: raw.subsamples.unwrap_or(16),
        samples: raw.samples.unwrap_or(10_000),
        n: raw.n.unwrap_or(10_000),
        n_list: match &raw.n_list {
            Some(s) => parse_list(s, "n")?,
            None => (1..=20).map(|k| k * 10).collect(),
        },
        eta: raw.eta.unwrap_or(0.1),
        max_steps: raw.max_steps.unwrap_or(5_000),
        fibers: raw.fibers.unwrap_or(100),
        segment_len: raw.segment_len.unwrap_or(1e-3),
        max_iter: raw.max_iter.unwrap_or(200),
        probes: raw.probes.unwrap_or(3),
        p_start: raw.p_start.unwrap_or(20),
        tail_n: match &raw.tail_n {
            Some(s) => parse_list(s, "tail-n")?,
            None => vec![5, 10, 20, 50, 100],
        },
        q: raw.q.unwrap_or(2.0),
        orbits: raw.orbits.unwrap_or(1_000),
        length: raw.length.unwrap_or(10_000),
        burn_in: raw.burn_in.unwrap_or(1_000),
        density_tol: raw.density_tol.unwrap_or(1e-6),
        density_max_iter: raw.density_max_iter.unwrap_or(50_000),
        seed,
    };
    let out_dir = raw
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("artifacts"));
    Ok((cfg, out_dir))
}

impl ResolvedConfig {
    fn map_params(&self) -> Result<SkewMapParams> {
        match self.variant.as_str() {
            "viana" => SkewMapParams::viana(self.degree, self.a0, self.alpha, vec![]),
            "test_doubling_product" => Ok(SkewMapParams::test_doubling_product()),
            "test_linear" => Ok(SkewMapParams::test_linear()),
            _ => unreachable!("validated in resolve"),
        }
    }
}

#[derive(Serialize)]
struct Summary<T: Serialize> {
    config_hash: String,
    config: ResolvedConfig,
    result: T,
}

struct RunOutput {
    csv: Csv,
    json: Vec<u8>,
    hash: String,
    line: String,
}

fn finish<T: Serialize>(
    cfg: ResolvedConfig,
    csv: Csv,
    result: T,
    line: String,
) -> Result<RunOutput> {
    let hash = config_hash(&cfg)?;
    let json = json_bytes(&Summary {
        config_hash: hash.clone(),
        config: cfg,
        result,
    })?;
    Ok(RunOutput {
        csv,
        json,
        hash,
        line,
    })
}

pub fn run(cli: Cli) -> Result<String> {
    let kind = cli.command.kind();
    let args = cli.command.args();
    let file_cfg = match &args.config {
        Some(p) => load_config_file(p)?,
        None => RawConfig::default(),
    };
    let raw = merge(&args.raw, &file_cfg);
    let (cfg, out_dir) = resolve(kind, &raw)?;

    let out = match kind {
        "stability" => run_stability(cfg)?,
        "endecay" => run_endecay(cfg)?,
        "recovery" => run_recovery(cfg)?,
        "growth" => run_growth(cfg)?,
        "induced" => run_induced(cfg)?,
        "lyapunov" => run_lyapunov(cfg)?,
        "ulam" => run_ulam(cfg)?,
        _ => unreachable!(),
    };

    let paths = artifact_paths(&out_dir, kind, &out.hash);
    write_atomic(&paths.csv, &out.csv.into_bytes())?;
    write_atomic(&paths.json, &out.json)?;
    Ok(format!(
        "{} | {} | {}",
        out.line,
        paths.csv.display(),
        paths.json.display()
    ))
}

fn run_stability(cfg: ResolvedConfig) -> Result<RunOutput> {
    if cfg.variant != "viana" {
        return Err(Error::Config(
            "stability sweep is defined for the viana variant".into(),
        ));
    }
    let sc = StabilityConfig {
        n_theta: cfg.n_theta,
        n_x: cfg.n_x,
        subsamples: cfg.subsamples,
        density_max_iter: cfg.density_max_iter,
        density_tol: cfg.density_tol,
        birkhoff_orbits: cfg.orbits,
        birkhoff_length: cfg.length,
        birkhoff_burn_in: cfg.burn_in,
        seed: cfg.seed,
    };
    let report = stability_sweep(cfg.degree, cfg.a0, cfg.alpha, &cfg.deltas, &sc)?;
    let mut csv = Csv::new(&["delta", "l1", "birkhoff_crosscheck", "density_residual"]);
    for e in &report.entries {
        csv.row(&[
            e.delta.into(),
            e.l1.into(),
            e.birkhoff_crosscheck.into(),
            e.density_residual.into(),
        ]);
    }
    let line = format!(
        "stability: {} deltas, {} failures, max l1 {:.3e}",
        report.entries.len(),
        report.failures.len(),
        report.entries.iter().fold(0.0f64, |m, e| m.max(e.l1))
    );
    finish(cfg, csv, report, line)
}

fn run_endecay(cfg: ResolvedConfig) -> Result<RunOutput> {
    let params = cfg.map_params()?;
    let report =
        estimate_exceptional_measure(&params, &cfg.n_list, cfg.samples, cfg.eta, cfg.seed)?;
    let mut csv = Csv::new(&["n", "fraction"]);
    for &(n, f) in &report.entries {
        csv.row(&[n.into(), f.into()]);
    }
    let line = match report.gamma_hat {
        Some(g) => format!(
            "endecay: gamma_hat {:.4}, r2 {:.3}",
            g,
            report.r_squared.unwrap()
        ),
        None => "endecay: all fractions zero, fit skipped".to_string(),
    };
    finish(cfg, csv, report, line)
}

#[derive(Serialize)]
struct RecoveryRow {
    alpha: f64,
    median_depth: Option<f64>,
    censored: usize,
    samples: usize,
    /// median / log(1/alpha), the per-alpha scaling constant.
    c1: Option<f64>,
}

fn run_recovery(cfg: ResolvedConfig) -> Result<RunOutput> {
    if cfg.variant != "viana" {
        return Err(Error::Config(
            "recovery depth is defined for the viana variant".into(),
        ));
    }
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        let params = SkewMapParams::viana(cfg.degree, cfg.a0, alpha, vec![])?;
        let rep = estimate_recovery_depth(&params, cfg.samples, cfg.max_steps, cfg.eta, cfg.seed)?;
        let log_inv = (1.0 / alpha).ln();
        rows.push(RecoveryRow {
            alpha,
            median_depth: rep.median_depth,
            censored: rep.censored,
            samples: cfg.samples,
            c1: rep.median_depth.map(|m| m / log_inv),
        });
    }
    let mut csv = Csv::new(&["alpha", "median_depth", "censored", "samples", "c1"]);
    for r in &rows {
        csv.row(&[
            r.alpha.into(),
            r.median_depth.into(),
            r.censored.into(),
            r.samples.into(),
            r.c1.into(),
        ]);
    }
    let line = format!(
        "recovery: {} alphas, medians {:?}",
        rows.len(),
        rows.iter().map(|r| r.median_depth).collect::<Vec<_>>()
    );
    finish(cfg, csv, rows, line)
}

#[derive(Serialize)]
struct GrowthResult {
    fraction_all_crossed: f64,
    fibers: usize,
}

fn run_growth(cfg: ResolvedConfig) -> Result<RunOutput> {
    let params = cfg.map_params()?;
    let (logs, frac) = growth_survey(
        &params,
        cfg.fibers,
        cfg.segment_len,
        cfg.eta,
        cfg.max_iter,
        cfg.seed,
    )?;
    let mut csv = Csv::new(&[
        "theta0",
        "cross_shallow",
        "cross_sqrt",
        "cross_const",
        "cover_time",
    ]);
    for l in &logs {
        csv.row(&[
            l.theta0.into(),
            l.cross_shallow.map(u64::from).into(),
            l.cross_sqrt.map(u64::from).into(),
            l.cross_const.map(u64::from).into(),
            l.cover_time.map(u64::from).into(),
        ]);
    }
    let line = format!(
        "growth: {:.1}% of {} fibers crossed all thresholds",
        100.0 * frac,
        cfg.fibers
    );
    let result = GrowthResult {
        fraction_all_crossed: frac,
        fibers: cfg.fibers,
    };
    finish(cfg, csv, result, line)
}

#[derive(Serialize)]
struct InducedResult {
    hp: HyperbolicParams,
    undecided_fraction: f64,
    mean_disagreement: f64,
    tails: Vec<(usize, f64)>,
}

fn run_induced(cfg: ResolvedConfig) -> Result<RunOutput> {
    let params = cfg.map_params()?;
    let grid = Grid::new(cfg.n_theta, cfg.n_x, params.domain)?;
    let hp = HyperbolicParams::calibrated(&params, cfg.p_start, cfg.seed)?;
    let scheme = build_induced(&params, grid, hp, cfg.probes, cfg.max_steps, cfg.seed)?;
    let mut csv = Csv::new(&["truncate_n", "tail_q_norm"]);
    let mut tails = Vec::new();
    for &n in &cfg.tail_n {
        let t = return_time_tail(&scheme, n, cfg.q)?;
        csv.row(&[n.into(), t.tail_q_norm.into()]);
        tails.push((n, t.tail_q_norm));
    }
    let mean_dis = scheme.disagreement.iter().sum::<f64>() / scheme.disagreement.len() as f64;
    let line = format!(
        "induced: decided {:.1}%, mean disagreement {:.3}",
        100.0 * scheme.decided_fraction(),
        mean_dis
    );
    let result = InducedResult {
        hp,
        undecided_fraction: scheme.undecided_fraction,
        mean_disagreement: mean_dis,
        tails,
    };
    finish(cfg, csv, result, line)
}

#[derive(Serialize)]
struct LyapunovResult {
    median: f64,
    fraction_positive: f64,
    zero_hits: usize,
}

fn run_lyapunov(cfg: ResolvedConfig) -> Result<RunOutput> {
    let params = cfg.map_params()?;
    let s = lyapunov_vertical(&params, cfg.samples, cfg.n, cfg.seed)?;
    let mut csv = Csv::new(&["sample", "exponent"]);
    for (i, e) in s.exponents.iter().enumerate() {
        csv.row(&[i.into(), (*e).into()]);
    }
    let line = format!(
        "lyapunov: median {:.5}, {:.1}% positive",
        s.median,
        100.0 * s.fraction_positive
    );
    let result = LyapunovResult {
        median: s.median,
        fraction_positive: s.fraction_positive,
        zero_hits: s.zero_hits,
    };
    finish(cfg, csv, result, line)
}

#[derive(Serialize)]
struct UlamResult {
    cells: usize,
    nonzeros: usize,
    max_row_sum_defect: f64,
    invariant_residual: f64,
    invariant_iterations: usize,
}

fn run_ulam(cfg: ResolvedConfig) -> Result<RunOutput> {
    let params = cfg.map_params()?;
    let grid = Grid::new(cfg.n_theta, cfg.n_x, params.domain)?;
    let op = build_ulam(&params, grid, cfg.subsamples, cfg.seed)?;
    let inv = invariant_density(&op, cfg.density_tol, cfg.density_max_iter)?;
    let mut csv = Csv::new(&["row", "col", "value"]);
    let mut nnz = 0usize;
    for i in 0..op.n_rows() {
        for (j, v) in op.row(i) {
            csv.row(&[i.into(), j.into(), v.into()]);
            nnz += 1;
        }
    }
    let line = format!(
        "ulam: {} cells, {} nonzeros, invariant residual {:.3e}",
        op.n_rows(),
        nnz,
        inv.residual
    );
    let result = UlamResult {
        cells: op.n_rows(),
        nonzeros: nnz,
        max_row_sum_defect: op.row_sum_defect(),
        invariant_residual: inv.residual,
        invariant_iterations: inv.iterations,
    };
    finish(cfg, csv, result, line)
}

/// 2 for configuration problems, 1 for runtime failures.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParams(_)
        | Error::InvalidArgument(_)
        | Error::Config(_)
        | Error::GridMismatch(_) => 2,
        _ => 1,
    }
}

//! Argument definitions and handlers for every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tidt_core::experiments::{
    bench_csv, loglog_slope, mae, rmse, run_phase_transition, run_scaling_bench, MetricScope, PhaseGridSpec,
};
use tidt_core::sampling::{
    gen_bernoulli, gen_pattern, gen_prediction, min_temporal_sampling_rate, theory_bound, MaskPattern, PatternKind,
    SamplingMask, DEFAULT_ALPHA,
};
use tidt_core::{admm_solve, DenseTensor, HankelConfig, Padding, SolverConfig, TransformKind};

use crate::manifest::{provenance_path, sha256_hex, FileRef, MaskProvenance, MaskRef, RunManifest, MANIFEST_VERSION};
use crate::{csv_io, tensor_file};

/// Process exit status of a successful command run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The solver hit its iteration cap; the output was still written.
    NotConverged,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tidt", version, about = "Low-rank completion of multidimensional time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recover missing entries of a tensor file.
    Recover(RecoverArgs),
    /// Observation mask utilities.
    #[command(subcommand)]
    Mask(MaskCommand),
    /// Print the recovery-theory diagnostics of a tensor as JSON.
    Analyze(AnalyzeArgs),
    /// Synthetic experiments.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Time solver iterations on random cubes.
    Bench(BenchArgs),
    /// Print MAE and RMSE between two tensors.
    Metrics(MetricsArgs),
    /// Convert a CSV file into a tensor file plus observation mask.
    Ingest(IngestArgs),
    /// Convert a tensor file into CSV.
    Export(ExportArgs),
    /// Re-run a recovery from its manifest and check the output hash.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TransformArg {
    Dft,
    Dct,
    Rot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PadArg {
    None,
    Symmetric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScopeArg {
    Missing,
    All,
}

impl From<ScopeArg> for MetricScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Missing => MetricScope::Missing,
            ScopeArg::All => MetricScope::All,
        }
    }
}

/// Solver flags shared by `recover` and `simulate`. Unset flags fall back to
/// the config file, then to the built-in defaults.
#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Hankel window length (default: the temporal length).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub transform: Option<TransformArg>,
    /// Seed of the random orthogonal transform.
    #[arg(long, default_value_t = 0)]
    pub rot_seed: u64,
    #[arg(long, value_enum)]
    pub pad: Option<PadArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub mu0: Option<f64>,
    /// JSON file with solver settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl SolverArgs {
    pub fn resolve(&self) -> anyhow::Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("{}: invalid solver config", path.display()))?
            }
            None => SolverConfig::default(),
        };
        if let Some(k) = self.k {
            cfg.k = Some(k);
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(t) = self.transform {
            cfg.transform = match t {
                TransformArg::Dft => TransformKind::Dft,
                TransformArg::Dct => TransformKind::Dct,
                TransformArg::Rot => TransformKind::RandomOrthogonal { seed: self.rot_seed },
            };
        }
        if let Some(p) = self.pad {
            cfg.padding = match p {
                PadArg::None => Padding::None,
                PadArg::Symmetric => Padding::Symmetric,
            };
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.mu0 {
            cfg.mu0 = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground truth; enables MAE/RMSE in the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Where to write the JSON run manifest.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "missing")]
    pub scope: ScopeArg,
}

#[derive(Debug, Subcommand)]
pub enum MaskCommand {
    /// Generate a mask file (with a `.json` provenance sidecar).
    Gen(MaskGenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PatternArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    Bernoulli,
    Prediction,
}

#[derive(Debug, Args)]
pub struct MaskGenArgs {
    #[arg(long, value_enum)]
    pub pattern: PatternArg,
    /// Comma-separated extents, time first.
    #[arg(long, value_delimiter = ',', required = true)]
    pub shape: Vec<usize>,
    /// Observed rate for patterns 1 to 3.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "dft")]
    pub transform: TransformArg,
    #[arg(long, default_value_t = 0)]
    pub rot_seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Success/failure sweep over (rank, sampling rate).
    Phase(PhaseArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GridPatternArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    Bernoulli,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 21)]
    pub t: usize,
    /// Series per mode (default: t).
    #[arg(long)]
    pub n: Option<usize>,
    /// Even target ranks (default: 2, 4, … below t).
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    /// Observed rates (default: j/t for j = 1 … t−1).
    #[arg(long, value_delimiter = ',')]
    pub rhos: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "1")]
    pub pattern: GridPatternArg,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub success_rmse: f64,
    #[arg(long, value_enum, default_value = "missing")]
    pub scope: ScopeArg,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "TIDT_JOBS", default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out_grid: PathBuf,
    #[arg(long)]
    pub out_records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,15,20")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Observation mask; with scope `missing` only its zeros are scored.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "missing")]
    pub scope: ScopeArg,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Mask output (default: `<out>.mask`).
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    /// Rows are time steps (default: columns are).
    #[arg(long)]
    pub time_major: bool,
    /// Reshape to these extents, time first.
    #[arg(long, value_delimiter = ',')]
    pub shape: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub time_major: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also write the reproduced tensor here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Recover(a) => recover(&a),
        Command::Mask(MaskCommand::Gen(a)) => mask_gen(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Simulate(SimulateCommand::Phase(a)) => simulate_phase(&a),
        Command::Bench(a) => bench(&a),
        Command::Metrics(a) => metrics(&a),
        Command::Ingest(a) => ingest(&a),
        Command::Export(a) => export(&a),
        Command::Replay(a) => replay(&a),
    }
}

fn read_bytes(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("{}", path.display()))
}

fn decode_file(path: &Path, bytes: &[u8]) -> anyhow::Result<DenseTensor> {
    tensor_file::decode(bytes).with_context(|| format!("{}", path.display()))
}

fn read_tensor(path: &Path) -> anyhow::Result<DenseTensor> {
    decode_file(path, &read_bytes(path)?)
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    Ok(tensor_file::write_atomic(path, text.as_bytes())?)
}

fn read_provenance(mask: &Path) -> anyhow::Result<Option<MaskProvenance>> {
    let side = provenance_path(mask);
    if !side.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&side).with_context(|| format!("{}", side.display()))?;
    let prov = serde_json::from_str(&text).with_context(|| format!("{}: invalid mask provenance", side.display()))?;
    Ok(Some(prov))
}

/// Scope tensor for the error metrics; `None` scores every entry.
fn metric_scope(mask: &SamplingMask, scope: MetricScope) -> Option<DenseTensor> {
    match scope {
        MetricScope::Missing if mask.observed_count() < mask.tensor().len() => Some(mask.complement()),
        _ => None,
    }
}

struct Solved {
    output: DenseTensor,
    report: tidt_core::RecoveryReport,
}

fn solve(
    input: &DenseTensor,
    mask: DenseTensor,
    kind: PatternKind,
    cfg: &SolverConfig,
    truth: Option<&DenseTensor>,
    scope: MetricScope,
) -> anyhow::Result<Solved> {
    input.ensure_same_shape(mask.shape()).context("input and mask shapes differ")?;
    let mask = SamplingMask::new(mask, kind)?;
    let (output, mut report) = admm_solve(input, &mask, cfg)?;
    if let Some(truth) = truth {
        truth.ensure_same_shape(input.shape()).context("truth and input shapes differ")?;
        let sc = metric_scope(&mask, scope);
        report.mae = Some(mae(&output, truth, sc.as_ref())?);
        report.rmse = Some(rmse(&output, truth, sc.as_ref())?);
    }
    Ok(Solved { output, report })
}

fn print_report(report: &tidt_core::RecoveryReport) {
    let mut line = format!("iterations {} converged {}", report.iterations, report.converged);
    if let (Some(m), Some(r)) = (report.mae, report.rmse) {
        line.push_str(&format!(" mae {m:?} rmse {r:?}"));
    }
    println!("{line}");
}

fn recover(a: &RecoverArgs) -> anyhow::Result<Outcome> {
    let cfg = a.solver.resolve()?;
    // Everything is read and validated before the first write.
    let input_bytes = read_bytes(&a.input)?;
    let input = decode_file(&a.input, &input_bytes)?;
    let mask_bytes = read_bytes(&a.mask)?;
    let mask = decode_file(&a.mask, &mask_bytes)?;
    let provenance = read_provenance(&a.mask)?;
    let truth = match &a.truth {
        Some(p) => {
            let bytes = read_bytes(p)?;
            Some((FileRef::of(p, &bytes), decode_file(p, &bytes)?))
        }
        None => None,
    };
    let kind = provenance.as_ref().map_or(PatternKind::Custom, |p| p.pattern);
    let scope = MetricScope::from(a.scope);
    let solved = solve(&input, mask, kind, &cfg, truth.as_ref().map(|t| &t.1), scope)?;
    let out_bytes = tensor_file::encode(&solved.output);
    tensor_file::write_atomic(&a.out, &out_bytes)?;
    if let Some(path) = &a.report {
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            solver: cfg,
            input: FileRef::of(&a.input, &input_bytes),
            mask: MaskRef { file: FileRef::of(&a.mask, &mask_bytes), generator: provenance },
            truth: truth.map(|t| t.0),
            scope,
            output: FileRef::of(&a.out, &out_bytes),
            report: solved.report.clone(),
        };
        write_text(path, &serde_json::to_string_pretty(&manifest)?)?;
    }
    print_report(&solved.report);
    Ok(if solved.report.converged { Outcome::Success } else { Outcome::NotConverged })
}

fn mask_gen(a: &MaskGenArgs) -> anyhow::Result<Outcome> {
    let need = |v: Option<f64>, flag: &str| v.with_context(|| format!("--{flag} is required for this pattern"));
    let (mask, rate, seed) = match a.pattern {
        PatternArg::One | PatternArg::Two | PatternArg::Three => {
            let pattern = match a.pattern {
                PatternArg::One => MaskPattern::Pattern1,
                PatternArg::Two => MaskPattern::Pattern2,
                _ => MaskPattern::Pattern3,
            };
            let rate = need(a.rate, "rate")?;
            (gen_pattern(pattern, &a.shape, rate, a.seed)?, Some(rate), Some(a.seed))
        }
        PatternArg::Bernoulli => {
            let theta = need(a.theta.or(a.rate), "theta")?;
            (gen_bernoulli(&a.shape, theta, a.seed)?, Some(theta), Some(a.seed))
        }
        PatternArg::Prediction => {
            let horizon = a.horizon.context("--horizon is required for this pattern")?;
            (gen_prediction(&a.shape, horizon)?, None, None)
        }
    };
    let rho = min_temporal_sampling_rate(&mask);
    let provenance = MaskProvenance { pattern: mask.kind(), shape: a.shape.clone(), rate, seed, rho };
    tensor_file::write(&a.out, mask.tensor())?;
    write_text(&provenance_path(&a.out), &serde_json::to_string_pretty(&provenance)?)?;
    println!("rho {rho:?}");
    Ok(Outcome::Success)
}

fn transform_kind(t: TransformArg, seed: u64) -> TransformKind {
    match t {
        TransformArg::Dft => TransformKind::Dft,
        TransformArg::Dct => TransformKind::Dct,
        TransformArg::Rot => TransformKind::RandomOrthogonal { seed },
    }
}

fn analyze(a: &AnalyzeArgs) -> anyhow::Result<Outcome> {
    let input = read_tensor(&a.input)?;
    let mask = match &a.mask {
        Some(p) => SamplingMask::new(read_tensor(p)?, PatternKind::Custom)?,
        None => SamplingMask::full(input.shape())?,
    };
    let diag = theory_bound(&input, &mask, &HankelConfig::new(a.k), transform_kind(a.transform, a.rot_seed), a.alpha)?;
    println!("{}", serde_json::to_string_pretty(&diag)?);
    Ok(Outcome::Success)
}

fn simulate_phase(a: &PhaseArgs) -> anyhow::Result<Outcome> {
    if a.t < 2 {
        bail!("--t must be at least 2");
    }
    let mut solver = a.solver.resolve()?;
    if solver.k.is_none() {
        solver.k = Some(a.t);
    }
    let spec = PhaseGridSpec {
        t: a.t,
        n: a.n.unwrap_or(a.t),
        rank_values: a.ranks.clone().unwrap_or_else(|| (2..a.t).step_by(2).collect()),
        rho_values: a.rhos.clone().unwrap_or_else(|| (1..a.t).map(|j| j as f64 / a.t as f64).collect()),
        pattern: match a.pattern {
            GridPatternArg::One => MaskPattern::Pattern1,
            GridPatternArg::Two => MaskPattern::Pattern2,
            GridPatternArg::Three => MaskPattern::Pattern3,
            GridPatternArg::Bernoulli => MaskPattern::Bernoulli,
        },
        trials: a.trials,
        success_rmse: a.success_rmse,
        seed: a.seed,
        scope: a.scope.into(),
    };
    let result = run_phase_transition(&spec, &solver, a.jobs)?;
    write_text(&a.out_grid, &result.grid_csv())?;
    if let Some(path) = &a.out_records {
        write_text(path, &serde_json::to_string_pretty(&result)?)?;
    }
    let cells = result.success.iter().flatten().count();
    let wins = result.success.iter().flatten().filter(|&&s| s).count();
    println!("cells {cells} success {wins}");
    Ok(Outcome::Success)
}

fn bench(a: &BenchArgs) -> anyhow::Result<Outcome> {
    let rows = run_scaling_bench(&a.sizes, a.reps)?;
    write_text(&a.out, &bench_csv(&rows))?;
    for row in &rows {
        println!("a {} seconds_per_iter {:.6e}", row.a, row.seconds_per_iter);
    }
    if let Some(slope) = loglog_slope(&rows) {
        println!("loglog_slope {slope:.3}");
    }
    Ok(Outcome::Success)
}

fn metrics(a: &MetricsArgs) -> anyhow::Result<Outcome> {
    let est = read_tensor(&a.est)?;
    let truth = read_tensor(&a.truth)?;
    let scope = match &a.mask {
        Some(p) => metric_scope(&SamplingMask::new(read_tensor(p)?, PatternKind::Custom)?, a.scope.into()),
        None => None,
    };
    println!("{:?} {:?}", mae(&est, &truth, scope.as_ref())?, rmse(&est, &truth, scope.as_ref())?);
    Ok(Outcome::Success)
}

fn ingest(a: &IngestArgs) -> anyhow::Result<Outcome> {
    let got = csv_io::ingest(&a.csv, a.time_major, a.shape.as_deref())?;
    let mask_out = a.mask_out.clone().unwrap_or_else(|| {
        let mut name = a.out.as_os_str().to_os_string();
        name.push(".mask");
        PathBuf::from(name)
    });
    tensor_file::write(&a.out, &got.tensor)?;
    tensor_file::write(&mask_out, &got.mask)?;
    println!("shape {:?} missing {}", got.tensor.shape(), got.missing_count());
    Ok(Outcome::Success)
}

fn export(a: &ExportArgs) -> anyhow::Result<Outcome> {
    let t = read_tensor(&a.input)?;
    write_text(&a.out, &csv_io::export_str(&t, a.time_major))?;
    Ok(Outcome::Success)
}

fn verified(file: &FileRef, what: &str) -> anyhow::Result<Vec<u8>> {
    let bytes = read_bytes(&file.path)?;
    let found = sha256_hex(&bytes);
    if found != file.sha256 {
        bail!("{what} {} changed since the run (sha256 {found}, recorded {})", file.path.display(), file.sha256);
    }
    Ok(bytes)
}

fn replay(a: &ReplayArgs) -> anyhow::Result<Outcome> {
    let text = fs::read_to_string(&a.manifest).with_context(|| format!("{}", a.manifest.display()))?;
    let m: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("{}: invalid manifest", a.manifest.display()))?;
    if m.manifest_version != MANIFEST_VERSION {
        bail!("unsupported manifest version {}", m.manifest_version);
    }
    let input = decode_file(&m.input.path, &verified(&m.input, "input")?)?;
    let mask = decode_file(&m.mask.file.path, &verified(&m.mask.file, "mask")?)?;
    let truth = match &m.truth {
        Some(f) => Some(decode_file(&f.path, &verified(f, "truth")?)?),
        None => None,
    };
    let kind = m.mask.generator.as_ref().map_or(PatternKind::Custom, |p| p.pattern);
    let solved = solve(&input, mask, kind, &m.solver, truth.as_ref(), m.scope)?;
    let out_bytes = tensor_file::encode(&solved.output);
    if let Some(path) = &a.out {
        tensor_file::write_atomic(path, &out_bytes)?;
    }
    let hash = sha256_hex(&out_bytes);
    if hash != m.output.sha256 {
        bail!("replayed output differs (sha256 {hash}, recorded {})", m.output.sha256);
    }
    println!("reproduced {hash}");
    Ok(if solved.report.converged { Outcome::Success } else { Outcome::NotConverged })
}

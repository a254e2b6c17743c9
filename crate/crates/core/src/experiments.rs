//! Synthetic data, error metrics, phase-transition sweeps and the
//! per-iteration timing benchmark.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TidtError};
use crate::sampling::{apply_mask, gen_pattern, MaskPattern, SamplingMask};
use crate::solver::{admm_solve, SolverConfig};
use crate::tensor::DenseTensor;

/// `t × n × n` tensor whose fiber `(i₁, i₂)` is `Σ_{l=1}^{a} sin(2π l i_t / t)`
/// with 1-based `i_t`. The per-fiber `a` is uniform on `1..=a_max`, except the
/// last fiber which always uses `a_max`.
pub fn generate_synthetic(t: usize, n: usize, a_max: usize, seed: u64) -> Result<DenseTensor> {
    if a_max == 0 {
        return Err(TidtError::InvalidArgument("a_max must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fibers = n * n;
    let mut counts: Vec<usize> = (0..fibers).map(|_| rng.gen_range(1..=a_max)).collect();
    if let Some(last) = counts.last_mut() {
        *last = a_max;
    }
    DenseTensor::from_fn(&[t, n, n], |i| {
        let a = counts[i[1] * n + i[2]];
        let it = (i[0] + 1) as f64;
        (1..=a).map(|l| (2.0 * PI * l as f64 * it / t as f64).sin()).sum()
    })
}

fn scoped_errors<'a>(
    est: &'a DenseTensor,
    truth: &'a DenseTensor,
    scope: Option<&'a DenseTensor>,
) -> Result<impl Iterator<Item = f64> + 'a> {
    est.ensure_same_shape(truth.shape())?;
    if let Some(s) = scope {
        est.ensure_same_shape(s.shape())?;
        if !s.data().iter().any(|&v| v != 0.0) {
            return Err(TidtError::EmptyScope);
        }
    }
    Ok(est
        .data()
        .iter()
        .zip(truth.data())
        .enumerate()
        .filter(move |(i, _)| scope.is_none_or(|s| s.data()[*i] != 0.0))
        .map(|(_, (a, b))| a - b))
}

/// Mean absolute error over the entries where `scope` is nonzero (all
/// entries when `scope` is `None`).
pub fn mae(est: &DenseTensor, truth: &DenseTensor, scope: Option<&DenseTensor>) -> Result<f64> {
    let (sum, count) = scoped_errors(est, truth, scope)?.fold((0.0, 0usize), |(s, c), e| (s + e.abs(), c + 1));
    Ok(sum / count as f64)
}

/// Root-mean-square error over the entries where `scope` is nonzero.
pub fn rmse(est: &DenseTensor, truth: &DenseTensor, scope: Option<&DenseTensor>) -> Result<f64> {
    let (sum, count) = scoped_errors(est, truth, scope)?.fold((0.0, 0usize), |(s, c), e| (s + e * e, c + 1));
    Ok((sum / count as f64).sqrt())
}

/// Adds i.i.d. `N(0, sigma²)` noise.
pub fn add_noise(x: &DenseTensor, sigma: f64, seed: u64) -> Result<DenseTensor> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(TidtError::InvalidArgument(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|_| TidtError::InvalidArgument(format!("sigma must be finite and >= 0, got {sigma}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = x.data().iter().map(|v| v + normal.sample(&mut rng)).collect();
    DenseTensor::from_vec(x.shape(), data)
}

/// Which entries the error metrics are computed over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScope {
    #[default]
    Missing,
    All,
}

/// Grid of (rank, sampling-rate) cells for a phase-transition sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGridSpec {
    pub t: usize,
    pub n: usize,
    /// Target t-SVD ranks; each must be even, generated with `a_max = r / 2`.
    pub rank_values: Vec<usize>,
    pub rho_values: Vec<f64>,
    pub pattern: MaskPattern,
    pub trials: usize,
    pub success_rmse: f64,
    pub seed: u64,
    #[serde(default)]
    pub scope: MetricScope,
}

impl Default for PhaseGridSpec {
    fn default() -> Self {
        Self {
            t: 21,
            n: 21,
            rank_values: (1..=10).map(|i| 2 * i).collect(),
            rho_values: (1..=20).map(|j| j as f64 / 21.0).collect(),
            pattern: MaskPattern::Pattern1,
            trials: 50,
            success_rmse: 0.01,
            seed: 0,
            scope: MetricScope::Missing,
        }
    }
}

impl PhaseGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.rank_values.is_empty() || self.rho_values.is_empty() {
            return Err(TidtError::InvalidArgument("grid needs at least one rank, rate and trial".into()));
        }
        if let Some(r) = self.rank_values.iter().find(|&&r| r == 0 || r % 2 != 0) {
            return Err(TidtError::InvalidArgument(format!("rank values must be even and positive, got {r}")));
        }
        Ok(())
    }
}

/// Result of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_secs: f64,
    pub error: Option<String>,
}

/// Aggregate result of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub rank: usize,
    pub rho: f64,
    pub rank_index: usize,
    pub rho_index: usize,
    pub mean_rmse: f64,
    pub mean_mae: f64,
    /// `mean_rmse < success_rmse`; failed trials count as infinite error.
    pub success: bool,
    pub trials: Vec<TrialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

/// Success matrix (rows = ranks, columns = rates) and the per-cell records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub spec: PhaseGridSpec,
    pub solver: SolverConfig,
    pub success: Vec<Vec<bool>>,
    pub records: Vec<ExperimentRecord>,
}

impl PhaseResult {
    /// CSV with one row per rank and one 0/1 column per rate.
    pub fn grid_csv(&self) -> String {
        let mut out = String::from("rank");
        for rho in &self.spec.rho_values {
            out.push_str(&format!(",{rho:.6}"));
        }
        out.push('\n');
        for (r, row) in self.spec.rank_values.iter().zip(&self.success) {
            out.push_str(&r.to_string());
            for &ok in row {
                out.push_str(if ok { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

/// Seed of one trial, derived from the sweep seed and the cell/trial indices.
pub fn trial_seed(seed: u64, rank_index: usize, rho_index: usize, trial: usize) -> u64 {
    // splitmix64 over the packed indices
    let mut z = seed ^ ((rank_index as u64) << 40) ^ ((rho_index as u64) << 20) ^ trial as u64;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one synthetic completion instance and returns its record.
pub fn run_trial(
    spec: &PhaseGridSpec,
    solver: &SolverConfig,
    rank: usize,
    rho: f64,
    trial: usize,
    seed: u64,
) -> TrialRecord {
    let start = Instant::now();
    let outcome = (|| -> Result<_> {
        let truth = generate_synthetic(spec.t, spec.n, rank / 2, seed)?;
        let mask = gen_pattern(spec.pattern, truth.shape(), rho, seed.wrapping_add(1))?;
        let (x, report) = admm_solve(&apply_mask(&truth, &mask)?, &mask, solver)?;
        let scope = match spec.scope {
            MetricScope::Missing if mask.observed_count() < mask.tensor().len() => Some(mask.complement()),
            _ => None,
        };
        Ok((rmse(&x, &truth, scope.as_ref())?, mae(&x, &truth, scope.as_ref())?, report))
    })();
    let wall_time_secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok((r, m, report)) => TrialRecord {
            trial,
            seed,
            rmse: Some(r),
            mae: Some(m),
            iterations: report.iterations,
            converged: report.converged,
            wall_time_secs,
            error: None,
        },
        Err(e) => TrialRecord {
            trial,
            seed,
            rmse: None,
            mae: None,
            iterations: 0,
            converged: false,
            wall_time_secs,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every cell of `spec`; trial failures are recorded, never propagated.
///
/// `jobs` bounds the worker threads (0 = rayon's default).
pub fn run_phase_transition(spec: &PhaseGridSpec, solver: &SolverConfig, jobs: usize) -> Result<PhaseResult> {
    spec.validate()?;
    solver.validate()?;
    let tasks: Vec<(usize, usize, usize)> = (0..spec.rank_values.len())
        .flat_map(|ri| (0..spec.rho_values.len()).flat_map(move |pi| (0..spec.trials).map(move |tr| (ri, pi, tr))))
        .collect();
    let run = || -> Vec<TrialRecord> {
        tasks
            .par_iter()
            .map(|&(ri, pi, tr)| {
                let seed = trial_seed(spec.seed, ri, pi, tr);
                run_trial(spec, solver, spec.rank_values[ri], spec.rho_values[pi], tr, seed)
            })
            .collect()
    };
    let trials = if jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TidtError::InvalidArgument(format!("cannot build thread pool: {e}")))?
            .install(run)
    };

    let mut records = Vec::new();
    let mut success = vec![vec![false; spec.rho_values.len()]; spec.rank_values.len()];
    for (cell, chunk) in trials.chunks(spec.trials).enumerate() {
        let (ri, pi) = (cell / spec.rho_values.len(), cell % spec.rho_values.len());
        let mean = |f: fn(&TrialRecord) -> Option<f64>| {
            chunk.iter().map(|r| f(r).unwrap_or(f64::INFINITY)).sum::<f64>() / chunk.len() as f64
        };
        let mean_rmse = mean(|r| r.rmse);
        let ok = mean_rmse < spec.success_rmse;
        success[ri][pi] = ok;
        records.push(ExperimentRecord {
            rank: spec.rank_values[ri],
            rho: spec.rho_values[pi],
            rank_index: ri,
            rho_index: pi,
            mean_rmse,
            mean_mae: mean(|r| r.mae),
            success: ok,
            trials: chunk.to_vec(),
            noise_sigma: None,
        });
    }
    Ok(PhaseResult { spec: spec.clone(), solver: *solver, success, records })
}

/// Number of success/failure flips along each row of a success matrix.
pub fn row_flips(success: &[Vec<bool>]) -> Vec<usize> {
    success.iter().map(|row| row.windows(2).filter(|w| w[0] != w[1]).count()).collect()
}

/// One row of the timing table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub a: usize,
    pub seconds_per_iter: f64,
}

/// Iterations timed per repetition of the benchmark.
pub const BENCH_ITERS: usize = 5;

/// Per-iteration solver time on random `a × a × a` tensors with `k = a` and
/// half the entries observed. The fastest repetition is reported.
///
/// A large initial penalty keeps every face above the shrinkage threshold, so
/// each iteration pays for the full set of face SVDs.
pub fn run_scaling_bench(sizes: &[usize], reps: usize) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Err(TidtError::InvalidArgument("reps must be at least 1".into()));
    }
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(TidtError::InvalidArgument("sizes must be sorted ascending".into()));
    }
    sizes
        .iter()
        .map(|&a| {
            let mut rng = ChaCha8Rng::seed_from_u64(a as u64);
            let x = DenseTensor::from_fn(&[a, a, a], |_| rng.gen_range(-1.0..1.0))?;
            let mask = SamplingMask::new(
                DenseTensor::from_fn(&[a, a, a], |_| if rng.gen::<bool>() { 1.0 } else { 0.0 })?,
                crate::sampling::PatternKind::Bernoulli { theta: 0.5 },
            )?;
            let cfg = SolverConfig {
                k: Some(a),
                mu0: 1e3,
                max_iters: BENCH_ITERS,
                tol: f64::MIN_POSITIVE,
                ..SolverConfig::default()
            };
            let y = apply_mask(&x, &mask)?;
            let mut best = f64::INFINITY;
            for _ in 0..reps {
                let start = Instant::now();
                let (_, report) = admm_solve(&y, &mask, &cfg)?;
                best = best.min(start.elapsed().as_secs_f64() / report.iterations as f64);
            }
            Ok(BenchRow { a, seconds_per_iter: best })
        })
        .collect()
}

/// CSV rendering of a timing table.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("a,seconds_per_iter\n");
    for row in rows {
        out.push_str(&format!("{},{:.9e}\n", row.a, row.seconds_per_iter));
    }
    out
}

/// Least-squares slope of `log(seconds)` against `log(a)`.
pub fn loglog_slope(rows: &[BenchRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.a as f64).ln(), r.seconds_per_iter.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

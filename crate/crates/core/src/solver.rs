//! ADMM solver for low-rank completion of the temporal Hankel tensor:
//!
//! `min ‖H_k(X)‖_⊛ + (λ/2)‖P_Ω(X − Y)‖_F²`, split as `Z = H_k(X)`.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TidtError};
use crate::hankel::{hankel_forward, pad_symmetric, unpad_symmetric, HankelConfig, Padding};
use crate::sampling::{apply_mask, SamplingMask};
use crate::talgebra::{svt_faces, tnn};
use crate::tensor::DenseTensor;
use crate::transform::{FaceStack, TransformKind, TransformSpec, TubeWork, REAL_OUTPUT_TOL};

/// Solver parameters. `k = None` uses the full temporal length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub k: Option<usize>,
    pub lambda: f64,
    pub mu0: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub transform: TransformKind,
    pub padding: Padding,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: None,
            lambda: 1e10,
            mu0: 1e-6,
            mu_growth: 1.1,
            mu_max: 1e12,
            max_iters: 500,
            tol: 1e-7,
            transform: TransformKind::Dft,
            padding: Padding::None,
        }
    }
}

impl SolverConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let problem = if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            Some(format!("lambda must be finite and >= 0, got {}", self.lambda))
        } else if !positive(self.mu0) {
            Some(format!("mu0 must be positive, got {}", self.mu0))
        } else if !(self.mu_growth > 1.0 && self.mu_growth.is_finite()) {
            Some(format!("mu_growth must exceed 1, got {}", self.mu_growth))
        } else if !(self.mu_max >= self.mu0 && self.mu_max.is_finite()) {
            Some(format!("mu_max must be finite and >= mu0, got {}", self.mu_max))
        } else if !positive(self.tol) {
            Some(format!("tol must be positive, got {}", self.tol))
        } else if self.max_iters == 0 {
            Some("max_iters must be at least 1".to_string())
        } else {
            None
        };
        problem.map_or(Ok(()), |p| Err(TidtError::InvalidArgument(p)))
    }

    /// Hankel configuration for a series of temporal length `t`.
    pub fn hankel(&self, t: usize) -> HankelConfig {
        HankelConfig { k: self.k.unwrap_or(t), padding: self.padding }
    }
}

/// Outcome of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub iterations: usize,
    /// `‖Z − H_k(X)‖_F` after every iteration.
    pub primal_residuals: Vec<f64>,
    /// `‖Z‖_⊛ + (λ/2)‖P_Ω(X − Y)‖_F²` after every iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub wall_time: Duration,
}

/// State of one iteration, handed to an observer after the multiplier update.
///
/// Original-domain tensors live in the solver's working domain (padded when
/// symmetric padding is on). `Z`, `N` and `H_k(X)` are kept as transform-domain
/// face slices; the multiplier update is linear, so it reads the same there.
pub struct IterationView<'a> {
    pub iteration: usize,
    /// Penalty `μ_j` used by this iteration.
    pub mu: f64,
    pub lambda: f64,
    pub mask: &'a DenseTensor,
    /// `P_Ω(Y)`.
    pub observed: &'a DenseTensor,
    pub x_next: &'a DenseTensor,
    /// Right-hand side `H_k*(μZ + N) + λP_Ω(Y)` of the X update.
    pub rhs: &'a DenseTensor,
    pub z: &'a FaceStack,
    pub n_prev: &'a FaceStack,
    pub n_next: &'a FaceStack,
    pub hx_next: &'a FaceStack,
}

/// One entry of the multiplier update `N + μ(Z − H_k(X))`.
#[inline]
pub fn multiplier_step(n: Complex64, z: Complex64, hx: Complex64, mu: f64) -> Complex64 {
    n + (z - hx) * mu
}

/// Transforms a series `x` (time along the first mode) tube by tube; the
/// result is row-major `[time][face]`.
fn forward_series(x: &DenseTensor, spec: &TransformSpec, work: &mut TubeWork) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spec.transform_tubes(&mut out, false, work);
    out
}

fn inverse_series(
    mut data: Vec<Complex64>,
    shape: &[usize],
    spec: &TransformSpec,
    work: &mut TubeWork,
) -> Result<DenseTensor> {
    spec.transform_tubes(&mut data, true, work);
    let scale = data.iter().map(|v| v.re.abs()).fold(1.0, f64::max);
    let residue = data.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if residue > REAL_OUTPUT_TOL * scale {
        return Err(TidtError::ImaginaryResidue { residue, limit: REAL_OUTPUT_TOL * scale });
    }
    DenseTensor::from_vec(shape, data.iter().map(|v| v.re).collect())
}

/// Face slices of `H_k(x)` from the transformed series `[time][face]`.
fn hankel_faces(series: &[Complex64], t: usize, k: usize, count: usize) -> FaceStack {
    let scale = 1.0 / (k as f64).sqrt();
    let mut faces = FaceStack::zeros(t, k, count);
    let plane = t * k;
    let data = faces.data_mut();
    for j in 0..k {
        for i in 0..t {
            let row = &series[((i + j) % t) * count..((i + j) % t + 1) * count];
            for (f, v) in row.iter().enumerate() {
                data[f * plane + j * t + i] = v * scale;
            }
        }
    }
    faces
}

/// Adjoint of [`hankel_faces`].
fn dehankel_faces(faces: &FaceStack) -> Vec<Complex64> {
    let (t, k, count) = (faces.rows(), faces.cols(), faces.count());
    let scale = 1.0 / (k as f64).sqrt();
    let mut out = vec![Complex64::default(); t * count];
    for f in 0..count {
        let face = faces.face(f);
        for j in 0..k {
            for i in 0..t {
                out[((i + j) % t) * count + f] += face[j * t + i];
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

fn face_norm(faces: &FaceStack) -> f64 {
    faces.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Unconstrained objective `‖H_k(x)‖_⊛ + (λ/2)‖P_Ω(x − y)‖_F²`.
pub fn objective(x: &DenseTensor, y: &DenseTensor, mask: &SamplingMask, cfg: &SolverConfig) -> Result<f64> {
    x.ensure_same_shape(y.shape())?;
    let h = hankel_forward(x, &cfg.hankel(x.shape()[0]))?;
    let spec = TransformSpec::for_shape(cfg.transform, h.shape())?;
    let fit = apply_mask(&x.sub(y)?, mask)?.frobenius_norm();
    Ok(tnn(&h, &spec)? + 0.5 * cfg.lambda * fit * fit)
}

/// Recovers the missing entries of `y` (entries outside `mask` are ignored).
pub fn admm_solve(y: &DenseTensor, mask: &SamplingMask, cfg: &SolverConfig) -> Result<(DenseTensor, RecoveryReport)> {
    admm_solve_observed(y, mask, cfg, |_| {})
}

/// [`admm_solve`] with a callback invoked once per iteration.
pub fn admm_solve_observed(
    y: &DenseTensor,
    mask: &SamplingMask,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&IterationView<'_>),
) -> Result<(DenseTensor, RecoveryReport)> {
    let start = Instant::now();
    cfg.validate()?;
    y.ensure_same_shape(mask.shape())?;
    let t = y.shape()[0];
    let hcfg = cfg.hankel(t);
    // validates k against the (padded) temporal length
    hankel_forward(&DenseTensor::zeros(&[t])?, &hcfg)?;

    // symmetric padding: solve on the mirrored series, average back at the end
    let (omega, observed) = match cfg.padding {
        Padding::None => (mask.tensor().clone(), apply_mask(y, mask)?),
        Padding::Symmetric => {
            (pad_symmetric(mask.tensor()), pad_symmetric(&apply_mask(y, mask)?))
        }
    };
    let lambda = cfg.lambda;
    let denom = omega.map(|w| lambda * w);
    let lambda_obs = observed.scaled(lambda);

    let (t_work, k) = (observed.shape()[0], hcfg.k);
    let spec = TransformSpec::new(cfg.transform, &observed.shape()[1..])?;
    let count = spec.face_count();
    // Parseval: ‖x̂‖_F = √ℓ ‖x‖_F
    let root_ell = spec.ell().sqrt();
    let mut work = TubeWork::default();

    let mut x = observed.clone();
    let mut hx = hankel_faces(&forward_series(&x, &spec, &mut work), t_work, k, count);
    let mut n = FaceStack::zeros(t_work, k, count);
    let mut mu = cfg.mu0;

    let mut report = RecoveryReport {
        iterations: 0,
        primal_residuals: Vec::new(),
        objective_trace: Vec::new(),
        converged: false,
        mae: None,
        rmse: None,
        wall_time: Duration::ZERO,
    };

    for iteration in 0..cfg.max_iters {
        // Z update: t-SVT of H(X) − N/μ with threshold 1/μ
        let inv_mu = 1.0 / mu;
        let mut shifted = hx.clone();
        for (d, m) in shifted.data_mut().iter_mut().zip(n.data()) {
            *d -= m * inv_mu;
        }
        let (z, nuclear) = svt_faces(&shifted, inv_mu, &spec)?;

        // X update: entry-wise division by λΩ + μ
        let mut combined = z.clone();
        for (c, m) in combined.data_mut().iter_mut().zip(n.data()) {
            *c = *c * mu + m;
        }
        let back = inverse_series(dehankel_faces(&combined), observed.shape(), &spec, &mut work)?;
        let rhs = back.add(&lambda_obs)?;
        let x_next = rhs.zip_map(&denom, |r, d| r / (d + mu))?;
        if !x_next.all_finite() {
            return Err(TidtError::NonFinite { iteration });
        }
        let hx_next = hankel_faces(&forward_series(&x_next, &spec, &mut work), t_work, k, count);

        let mut n_next = n.clone();
        for ((np, &zv), &hv) in n_next.data_mut().iter_mut().zip(z.data()).zip(hx_next.data()) {
            *np = multiplier_step(*np, zv, hv, mu);
        }

        let residual = z
            .data()
            .iter()
            .zip(hx_next.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / root_ell;
        let change = x_next.distance(&x)? / x.frobenius_norm().max(1.0);
        let fit = x_next.sub(&observed)?.hadamard(&omega)?.frobenius_norm();
        report.primal_residuals.push(residual);
        report.objective_trace.push(nuclear / spec.ell() + 0.5 * lambda * fit * fit);
        report.iterations = iteration + 1;

        observe(&IterationView {
            iteration,
            mu,
            lambda,
            mask: &omega,
            observed: &observed,
            x_next: &x_next,
            rhs: &rhs,
            z: &z,
            n_prev: &n,
            n_next: &n_next,
            hx_next: &hx_next,
        });

        x = x_next;
        hx = hx_next;
        n = n_next;
        mu = (mu * cfg.mu_growth).min(cfg.mu_max);

        // small relative change alone also happens while μ is still tiny and
        // Z is thresholded to zero, so feasibility is required as well
        if change < cfg.tol && residual < cfg.tol * face_norm(&hx) / root_ell {
            report.converged = true;
            break;
        }
    }

    let x_hat = match cfg.padding {
        Padding::None => x,
        Padding::Symmetric => unpad_symmetric(&x)?,
    };
    report.wall_time = start.elapsed();
    Ok((x_hat, report))
}

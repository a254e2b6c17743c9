//! Observation masks, the temporal Hankel sampling set, and the sampling /
//! incoherence diagnostics behind the exact-recovery condition.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TidtError};
use crate::hankel::{hankel_forward, hankelize_unscaled, HankelConfig};
use crate::talgebra::{thin_face_svds, RANK_TOL};
use crate::tensor::DenseTensor;
use crate::transform::{TransformKind, TransformSpec, TubeWork};

/// Default α for the noiseless diagnostics.
pub const DEFAULT_ALPHA: f64 = 0.99;

/// Slack used when turning a fractional missing count into an integer, so
/// that e.g. `(1 − 20/21)·21` rounds to 1 rather than 2.
const COUNT_EPS: f64 = 1e-9;

/// How a mask was produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternKind {
    /// One time window missing across every series.
    Pattern1,
    /// Each series loses its own contiguous window.
    Pattern2,
    /// Each time slice loses a random subset of series.
    Pattern3,
    Bernoulli { theta: f64 },
    Prediction { horizon: usize },
    Custom,
}

/// Mask generators addressable by a single observed-rate parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPattern {
    Pattern1,
    Pattern2,
    Pattern3,
    /// `rate` is used as the Bernoulli probability θ.
    Bernoulli,
}

/// Binary observation tensor `Ω̄` (1 = observed), time along the first mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    mask: DenseTensor,
    kind: PatternKind,
}

impl SamplingMask {
    pub fn new(mask: DenseTensor, kind: PatternKind) -> Result<Self> {
        if let Some(v) = mask.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(TidtError::InvalidArgument(format!(
                "mask entries must be exactly 0 or 1, found {v}"
            )));
        }
        Ok(Self { mask, kind })
    }

    pub fn full(shape: &[usize]) -> Result<Self> {
        Ok(Self { mask: DenseTensor::ones(shape)?, kind: PatternKind::Custom })
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.mask
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.mask
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn shape(&self) -> &[usize] {
        self.mask.shape()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.data().iter().filter(|&&v| v == 1.0).count()
    }

    pub fn observed_fraction(&self) -> f64 {
        self.observed_count() as f64 / self.mask.len() as f64
    }

    /// Indicator of the unobserved entries.
    pub fn complement(&self) -> DenseTensor {
        self.mask.map(|v| 1.0 - v)
    }
}

/// `P_Ω(x) = Ω̄ ∘ x`.
pub fn apply_mask(x: &DenseTensor, m: &SamplingMask) -> Result<DenseTensor> {
    x.hadamard(&m.mask)
}

/// Temporal Hankel sampling tensor `Ω̄_H`, the unscaled Hankelization of `Ω̄`.
pub fn hankel_mask(m: &SamplingMask, cfg: &HankelConfig) -> Result<SamplingMask> {
    SamplingMask::new(hankelize_unscaled(&m.mask, cfg)?, PatternKind::Custom)
}

/// Number of observed time points of every series, in storage order.
pub fn temporal_sampling_numbers(m: &SamplingMask) -> Vec<usize> {
    let t = m.shape()[0];
    let fibers = m.mask.len() / t;
    let data = m.mask.data();
    (0..fibers)
        .map(|s| (0..t).filter(|&i| data[i * fibers + s] == 1.0).count())
        .collect()
}

/// `ρ(Ω)`: the smallest fraction of observed time points over all series.
pub fn min_temporal_sampling_rate(m: &SamplingMask) -> f64 {
    let t = m.shape()[0];
    temporal_sampling_numbers(m).into_iter().min().unwrap_or(0) as f64 / t as f64
}

fn missing_count(rate: f64, len: usize) -> usize {
    ((1.0 - rate) * len as f64 - COUNT_EPS).ceil().max(0.0) as usize
}

fn check_rate(rate: f64, what: &str) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(TidtError::InvalidArgument(format!("{what} must lie in (0, 1], got {rate}")));
    }
    Ok(())
}

/// Generates one of the structured non-random patterns (or a Bernoulli mask
/// with θ = `rate`).
///
/// Pattern 1 removes one window of `⌈(1−rate)t⌉` time points from every
/// series; pattern 2 removes such a window per series at its own offset;
/// pattern 3 removes `⌈(1−rate)n⌉` randomly chosen series from every time
/// slice, `n` being the number of series.
pub fn gen_pattern(pattern: MaskPattern, shape: &[usize], rate: f64, seed: u64) -> Result<SamplingMask> {
    if pattern == MaskPattern::Bernoulli {
        return gen_bernoulli(shape, rate, seed);
    }
    check_rate(rate, "rate")?;
    let mut mask = DenseTensor::ones(shape)?;
    let t = shape[0];
    let fibers = mask.len() / t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = mask.data_mut();
    let kind = match pattern {
        MaskPattern::Pattern1 | MaskPattern::Pattern2 => {
            let block = missing_count(rate, t);
            if block >= t {
                return Err(TidtError::InvalidArgument(format!(
                    "rate {rate} removes {block} of {t} time points, leaving a series empty"
                )));
            }
            if pattern == MaskPattern::Pattern1 {
                let start = rng.gen_range(0..=t - block);
                data[start * fibers..(start + block) * fibers].fill(0.0);
                PatternKind::Pattern1
            } else {
                for s in 0..fibers {
                    let start = rng.gen_range(0..=t - block);
                    for i in start..start + block {
                        data[i * fibers + s] = 0.0;
                    }
                }
                PatternKind::Pattern2
            }
        }
        MaskPattern::Pattern3 => {
            let drop = missing_count(rate, fibers);
            if drop >= fibers && drop > 0 {
                return Err(TidtError::InvalidArgument(format!(
                    "rate {rate} removes all {fibers} series from every time slice"
                )));
            }
            for i in 0..t {
                for s in sample(&mut rng, fibers, drop) {
                    data[i * fibers + s] = 0.0;
                }
            }
            PatternKind::Pattern3
        }
        MaskPattern::Bernoulli => unreachable!("handled above"),
    };
    SamplingMask::new(mask, kind)
}

/// I.i.d. Bernoulli(θ) observations.
pub fn gen_bernoulli(shape: &[usize], theta: f64, seed: u64) -> Result<SamplingMask> {
    check_rate(theta, "theta")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = DenseTensor::from_fn(shape, |_| if rng.gen::<f64>() < theta { 1.0 } else { 0.0 })?;
    SamplingMask::new(mask, PatternKind::Bernoulli { theta })
}

/// History of `t − h` observed time points followed by `h` missing ones.
pub fn gen_prediction(shape: &[usize], horizon: usize) -> Result<SamplingMask> {
    let t = shape.first().copied().unwrap_or(0);
    if horizon >= t {
        return Err(TidtError::InvalidArgument(format!("horizon {horizon} must be below t = {t}")));
    }
    let mask = DenseTensor::from_fn(shape, |i| if i[0] < t - horizon { 1.0 } else { 0.0 })?;
    SamplingMask::new(mask, PatternKind::Prediction { horizon })
}

/// Rank profile and incoherence of a temporal Hankel tensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelIncoherence {
    pub mu: f64,
    /// t-SVD rank.
    pub r: usize,
    /// Multi-rank sum.
    pub r_s: usize,
}

/// Smallest `μ` satisfying both temporal Hankel incoherence conditions for
/// `H_k(m)`, using the skinny t-SVD restricted to singular values above
/// [`RANK_TOL`].
pub fn incoherence_mu(m: &DenseTensor, cfg: &HankelConfig, kind: TransformKind) -> Result<f64> {
    Ok(hankel_incoherence(m, cfg, kind)?.mu)
}

pub fn hankel_incoherence(
    m: &DenseTensor,
    cfg: &HankelConfig,
    kind: TransformKind,
) -> Result<HankelIncoherence> {
    let h = hankel_forward(m, cfg)?;
    let spec = TransformSpec::for_shape(kind, h.shape())?;
    let faces = spec.to_faces(&h)?;
    let svds = thin_face_svds(&faces, &spec)?;
    let sigma_max = svds.iter().flat_map(|s| s.s.iter().copied()).fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Err(TidtError::ZeroRank);
    }
    let cutoff = RANK_TOL * sigma_max;
    let ranks: Vec<usize> = svds.iter().map(|s| s.s.iter().filter(|&&v| v > cutoff).count()).collect();
    let r = ranks.iter().copied().max().unwrap_or(0);
    let r_s: usize = ranks.iter().sum();
    if r == 0 {
        return Err(TidtError::ZeroRank);
    }

    let (t, k) = (faces.rows(), faces.cols());
    let count = spec.face_count();
    // row energies of the retained singular vectors, per face
    let row_energy = |vectors: &[Complex64], len: usize, rank: usize| -> Vec<f64> {
        (0..len)
            .map(|i| (0..rank).map(|c| vectors[c * len + i].norm_sqr()).sum())
            .collect()
    };
    let u_energy: Vec<Vec<f64>> =
        svds.iter().zip(&ranks).map(|(s, &rf)| row_energy(&s.u, t, rf)).collect();
    let v_energy: Vec<Vec<f64>> =
        svds.iter().zip(&ranks).map(|(s, &rf)| row_energy(&s.v, k, rf)).collect();

    // |L δ_s|² per face for every spatial basis position s; unit modulus
    // for the DFT, so a single position suffices there.
    let positions = if spec.is_real_domain() { count } else { 1 };
    let mut work = TubeWork::default();
    let weights: Vec<Vec<f64>> = (0..positions)
        .map(|s| {
            let mut tube = vec![Complex64::default(); count];
            tube[s] = Complex64::new(1.0, 0.0);
            spec.transform_tube(&mut tube, false, &mut work);
            tube.iter().map(|z| z.norm_sqr()).collect()
        })
        .collect();

    let max_energy = |energy: &[Vec<f64>], len: usize| -> f64 {
        let mut best = 0.0f64;
        for w in &weights {
            for i in 0..len {
                let e: f64 = (0..count).map(|f| w[f] * energy[f][i]).sum();
                best = best.max(e / spec.ell());
            }
        }
        best
    };
    let n = count as f64;
    let rf = r as f64;
    let mu_u = t as f64 * n / rf * max_energy(&u_energy, t);
    let mu_v = k as f64 * n / rf * max_energy(&v_energy, k);
    Ok(HankelIncoherence { mu: mu_u.max(mu_v), r, r_s })
}

/// Computable form of the exact/approximate recovery condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryDiagnostics {
    pub rho: f64,
    pub mu: f64,
    pub r: usize,
    pub r_s: usize,
    /// `1 − α k / (2 μ r (r_s + 1) t)`, clamped to `[0, 1]`.
    pub rho_bound: f64,
    pub alpha: f64,
    pub satisfied: bool,
    /// Largest admissible forecast horizon, `k / (2 μ r (r_s + 1))`.
    pub h_max: f64,
}

/// Assembles `ρ`, `μ`, `r`, `r_s` of `H_k(m)` and checks `ρ > rho_bound`.
pub fn theory_bound(
    m: &DenseTensor,
    mask: &SamplingMask,
    cfg: &HankelConfig,
    kind: TransformKind,
    alpha: f64,
) -> Result<TheoryDiagnostics> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TidtError::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    m.ensure_same_shape(mask.shape())?;
    let inc = hankel_incoherence(m, cfg, kind)?;
    let rho = min_temporal_sampling_rate(mask);
    let t = cfg.embedded_len(m.shape()[0]) as f64;
    let denom = 2.0 * inc.mu * inc.r as f64 * (inc.r_s as f64 + 1.0);
    let rho_bound = (1.0 - alpha * cfg.k as f64 / (denom * t)).clamp(0.0, 1.0);
    Ok(TheoryDiagnostics {
        rho,
        mu: inc.mu,
        r: inc.r,
        r_s: inc.r_s,
        rho_bound,
        alpha,
        satisfied: rho > rho_bound,
        h_max: cfg.k as f64 / denom,
    })
}

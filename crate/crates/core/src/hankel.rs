//! Temporal isometric delay-embedding (temporal Hankel transform).
//!
//! A tensor `m` of shape `t × n_1 × … × n_p` (time first) maps to
//! `H_k(m)` of shape `t × k × n_1 × … × n_p` whose column `j` is the temporal
//! fiber cyclically shifted by `j` steps, scaled by `1/√k`. Every face slice
//! is the first `k` columns of an anti-circulant Hankel matrix and the map is
//! an isometry, so its adjoint is also its left inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TidtError};
use crate::talgebra::face_spectra;
use crate::tensor::DenseTensor;
use crate::transform::{TransformKind, TransformSpec};

/// Slack allowed when comparing the two sides of a rank-error bound.
pub const BOUND_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    None,
    /// Mirror the series in time, `[m_1 … m_t m_t … m_1]`, before embedding.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HankelConfig {
    /// Number of Hankel columns.
    pub k: usize,
    #[serde(default)]
    pub padding: Padding,
}

impl HankelConfig {
    pub fn new(k: usize) -> Self {
        Self { k, padding: Padding::None }
    }

    pub fn symmetric(k: usize) -> Self {
        Self { k, padding: Padding::Symmetric }
    }

    /// Temporal length after padding.
    pub fn embedded_len(&self, t: usize) -> usize {
        match self.padding {
            Padding::None => t,
            Padding::Symmetric => 2 * t,
        }
    }

    fn validate(&self, t: usize) -> Result<()> {
        let limit = self.embedded_len(t);
        if self.k == 0 || self.k > limit {
            return Err(TidtError::InvalidArgument(format!(
                "k = {} outside 1..={limit} for temporal length {t} ({:?} padding)",
                self.k, self.padding
            )));
        }
        Ok(())
    }
}

fn split_time(shape: &[usize]) -> (usize, usize) {
    (shape[0], shape[1..].iter().product())
}

/// Mirrors `m` along time: `[m_1, …, m_t, m_t, …, m_1]`.
pub fn pad_symmetric(m: &DenseTensor) -> DenseTensor {
    let (t, fiber) = split_time(m.shape());
    let mut shape = m.shape().to_vec();
    shape[0] = 2 * t;
    let src = m.data();
    let mut data = Vec::with_capacity(2 * src.len());
    data.extend_from_slice(src);
    for i in (0..t).rev() {
        data.extend_from_slice(&src[i * fiber..(i + 1) * fiber]);
    }
    DenseTensor::from_vec(&shape, data).expect("padded shape is consistent")
}

/// Averages the two mirrored halves of a length-`2t` series back to length `t`.
pub fn unpad_symmetric(m: &DenseTensor) -> Result<DenseTensor> {
    let (len, fiber) = split_time(m.shape());
    if len % 2 != 0 {
        return Err(TidtError::ShapeMismatch(format!(
            "symmetric un-padding needs an even temporal length, got {len}"
        )));
    }
    let t = len / 2;
    let mut shape = m.shape().to_vec();
    shape[0] = t;
    let src = m.data();
    let mut data = Vec::with_capacity(t * fiber);
    for i in 0..t {
        let mirror = len - 1 - i;
        for s in 0..fiber {
            data.push(0.5 * (src[i * fiber + s] + src[mirror * fiber + s]));
        }
    }
    DenseTensor::from_vec(&shape, data)
}

/// Hankelization with an explicit column scale (no padding).
fn hankelize(m: &DenseTensor, k: usize, scale: f64) -> DenseTensor {
    let (t, fiber) = split_time(m.shape());
    let mut shape = vec![t, k];
    shape.extend_from_slice(&m.shape()[1..]);
    let src = m.data();
    let mut data = Vec::with_capacity(t * k * fiber);
    for i in 0..t {
        for j in 0..k {
            let row = (i + j) % t;
            data.extend(src[row * fiber..(row + 1) * fiber].iter().map(|v| v * scale));
        }
    }
    DenseTensor::from_vec(&shape, data).expect("Hankel shape is consistent")
}

/// `H_k(m)` with the `1/√k` scale dropped, so binary masks stay binary.
pub fn hankelize_unscaled(m: &DenseTensor, cfg: &HankelConfig) -> Result<DenseTensor> {
    cfg.validate(m.shape()[0])?;
    let base = match cfg.padding {
        Padding::None => m.clone(),
        Padding::Symmetric => pad_symmetric(m),
    };
    Ok(hankelize(&base, cfg.k, 1.0))
}

/// Temporal Hankel transform `H_k`.
pub fn hankel_forward(m: &DenseTensor, cfg: &HankelConfig) -> Result<DenseTensor> {
    cfg.validate(m.shape()[0])?;
    let scale = 1.0 / (cfg.k as f64).sqrt();
    Ok(match cfg.padding {
        Padding::None => hankelize(m, cfg.k, scale),
        Padding::Symmetric => hankelize(&pad_symmetric(m), cfg.k, scale),
    })
}

/// Adjoint `H_k*` of the unpadded transform: entry `i` gathers the `k`
/// Hankel entries it was copied to.
fn dehankelize(z: &DenseTensor, k: usize) -> Result<DenseTensor> {
    if z.order() < 2 || z.shape()[1] != k {
        return Err(TidtError::ShapeMismatch(format!(
            "expected a t × {k} × … Hankel tensor, got {:?}",
            z.shape()
        )));
    }
    let t = z.shape()[0];
    let fiber: usize = z.shape()[2..].iter().product();
    let scale = 1.0 / (k as f64).sqrt();
    let src = z.data();
    let mut data = vec![0.0; t * fiber];
    for i in 0..t {
        for j in 0..k {
            let row = (i + j) % t;
            let from = &src[(i * k + j) * fiber..(i * k + j + 1) * fiber];
            for (dst, v) in data[row * fiber..(row + 1) * fiber].iter_mut().zip(from) {
                *dst += v;
            }
        }
    }
    data.iter_mut().for_each(|v| *v *= scale);
    let mut shape = vec![t];
    shape.extend_from_slice(&z.shape()[2..]);
    DenseTensor::from_vec(&shape, data)
}

/// Inverse (and, without padding, adjoint) of [`hankel_forward`]. With
/// symmetric padding the two mirrored halves are averaged.
pub fn hankel_inverse(z: &DenseTensor, cfg: &HankelConfig) -> Result<DenseTensor> {
    let x = dehankelize(z, cfg.k)?;
    match cfg.padding {
        Padding::None => Ok(x),
        Padding::Symmetric => unpad_symmetric(&x),
    }
}

/// `S^steps(m)`: cyclic shift along time, `out_i = m_{(i + steps) mod t}`.
pub fn cyclic_shift(m: &DenseTensor, steps: usize) -> DenseTensor {
    let (t, fiber) = split_time(m.shape());
    let src = m.data();
    let mut data = Vec::with_capacity(src.len());
    for i in 0..t {
        let row = (i + steps) % t;
        data.extend_from_slice(&src[row * fiber..(row + 1) * fiber]);
    }
    DenseTensor::from_vec(m.shape(), data).expect("shift keeps the shape")
}

/// Smoothness `η(m) = ‖m − S(m)‖_F`.
pub fn smoothness(m: &DenseTensor) -> f64 {
    m.distance(&cyclic_shift(m, 1)).expect("same shape")
}

/// Periodicity `β_τ(m) = ‖m − S^τ(m)‖_F`.
pub fn periodicity(m: &DenseTensor, tau: usize) -> Result<f64> {
    let t = m.shape()[0];
    if tau == 0 || tau > t {
        return Err(TidtError::InvalidArgument(format!("period {tau} outside 1..={t}")));
    }
    m.distance(&cyclic_shift(m, tau))
}

/// Best rank-`r` t-SVD approximation error of `z` (Eckart–Young per face).
pub fn rank_error(z: &DenseTensor, r: usize, spec: &TransformSpec) -> Result<f64> {
    if z.order() < 2 {
        return Err(TidtError::InvalidShape(format!("need order >= 2, got {:?}", z.shape())));
    }
    let max_rank = z.shape()[0].min(z.shape()[1]);
    if r > max_rank {
        return Err(TidtError::InvalidArgument(format!("rank {r} outside 0..={max_rank}")));
    }
    let tail: f64 = face_spectra(z, spec)?
        .iter()
        .flat_map(|s| s.iter().skip(r))
        .map(|s| s * s)
        .sum();
    Ok((tail / spec.ell()).sqrt())
}

/// Both sides of a rank-error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + BOUND_SLACK }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn dft_rank_error(m: &DenseTensor, k: usize, r: usize) -> Result<f64> {
    let h = hankel_forward(m, &HankelConfig::new(k))?;
    let spec = TransformSpec::for_shape(TransformKind::Dft, h.shape())?;
    rank_error(&h, r, &spec)
}

/// `ε_r(H_k(m)) ≤ √((k−r)/3k) ⌈k/r⌉ η(m)`.
pub fn check_smoothness_bound(m: &DenseTensor, k: usize, r: usize) -> Result<BoundCheck> {
    let t = m.shape()[0];
    if r == 0 || r > k.min(t) {
        return Err(TidtError::InvalidArgument(format!(
            "rank {r} outside 1..={}",
            k.min(t)
        )));
    }
    let lhs = dft_rank_error(m, k, r)?;
    let (kf, rf) = (k as f64, r as f64);
    let rhs = ((kf - rf) / (3.0 * kf)).sqrt() * k.div_ceil(r) as f64 * smoothness(m);
    Ok(BoundCheck::new(lhs, rhs))
}

/// `ε_τ(H_k(m)) ≤ (τ/√k)(⌈k/τ⌉ − 1) β_τ(m)`, checked at rank `r = τ`
/// (capped at `k`, where the error vanishes).
pub fn check_periodicity_bound(m: &DenseTensor, k: usize, tau: usize) -> Result<BoundCheck> {
    let beta = periodicity(m, tau)?;
    let t = m.shape()[0];
    if k == 0 || k > t {
        return Err(TidtError::InvalidArgument(format!("k = {k} outside 1..={t}")));
    }
    let lhs = dft_rank_error(m, k, tau.min(k))?;
    let rhs = tau as f64 / (k as f64).sqrt() * (k.div_ceil(tau) - 1) as f64 * beta;
    Ok(BoundCheck::new(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vector(values: &[f64]) -> DenseTensor {
        DenseTensor::from_vec(&[values.len()], values.to_vec()).unwrap()
    }

    #[test]
    fn small_example() {
        let h = hankel_forward(&vector(&[1.0, 2.0, 3.0]), &HankelConfig::new(2)).unwrap();
        let s = 0.5f64.sqrt();
        assert_eq!(h.shape(), &[3, 2]);
        let want = [1.0, 2.0, 2.0, 3.0, 3.0, 1.0];
        for (got, w) in h.data().iter().zip(want) {
            assert!((got - w * s).abs() < 1e-15);
        }
        assert!((h.frobenius_norm().powi(2) - 14.0).abs() < 1e-12);
    }

    #[test]
    fn k_one_is_a_reshape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DenseTensor::from_fn(&[5, 2, 3], |_| rng.gen()).unwrap();
        let h = hankel_forward(&m, &HankelConfig::new(1)).unwrap();
        assert_eq!(h.shape(), &[5, 1, 2, 3]);
        assert_eq!(h.data(), m.data());
    }

    #[test]
    fn k_out_of_range() {
        let m = vector(&[1.0, 2.0, 3.0]);
        assert!(hankel_forward(&m, &HankelConfig::new(0)).is_err());
        assert!(hankel_forward(&m, &HankelConfig::new(4)).is_err());
        assert!(hankel_forward(&m, &HankelConfig::symmetric(6)).is_ok());
        assert!(hankel_forward(&m, &HankelConfig::symmetric(7)).is_err());
    }

    #[test]
    fn inverse_and_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DenseTensor::from_fn(&[6, 2, 2], |_| rng.gen_range(-1.0..1.0)).unwrap();
        for cfg in [HankelConfig::new(4), HankelConfig::symmetric(9)] {
            let back = hankel_inverse(&hankel_forward(&x, &cfg).unwrap(), &cfg).unwrap();
            assert!(back.distance(&x).unwrap() < 1e-12);
        }
        let cfg = HankelConfig::new(4);
        let z = DenseTensor::from_fn(&[6, 4, 2, 2], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let lhs = hankel_forward(&x, &cfg).unwrap().inner(&z).unwrap();
        let rhs = x.inner(&hankel_inverse(&z, &cfg).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let zero = DenseTensor::zeros(&[6, 4, 2, 2]).unwrap();
        assert_eq!(hankel_inverse(&zero, &cfg).unwrap().frobenius_norm(), 0.0);
        assert!(hankel_inverse(&zero, &HankelConfig::new(3)).is_err());
    }

    #[test]
    fn faces_are_hankel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DenseTensor::from_fn(&[7, 3], |_| rng.gen()).unwrap();
        let h = hankel_forward(&m, &HankelConfig::new(5)).unwrap();
        for s in 0..3 {
            for i in 0..7 {
                for j in 1..5 {
                    let a = h.get(&[i, j, s]).unwrap();
                    let b = h.get(&[(i + 1) % 7, j - 1, s]).unwrap();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn symmetric_padding_layout() {
        let m = vector(&[1.0, 2.0, 3.0]);
        assert_eq!(pad_symmetric(&m).data(), &[1.0, 2.0, 3.0, 3.0, 2.0, 1.0]);
        let p = vector(&[1.0, 2.0, 3.0, 5.0, 4.0, 3.0]);
        assert_eq!(unpad_symmetric(&p).unwrap().data(), &[2.0, 3.0, 4.0]);
        assert!(unpad_symmetric(&vector(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn smoothness_and_periodicity() {
        let m = vector(&[1.0, 2.0, 3.0, 4.0]);
        assert!((smoothness(&m) - 12f64.sqrt()).abs() < 1e-15);
        assert_eq!(smoothness(&vector(&[2.0; 5])), 0.0);
        let periodic = vector(&[1.0, -1.0, 3.0, 1.0, -1.0, 3.0]);
        assert_eq!(periodicity(&periodic, 3).unwrap(), 0.0);
        assert!(periodicity(&periodic, 0).is_err());
        assert!(periodicity(&periodic, 7).is_err());
    }

    #[test]
    fn rank_error_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = DenseTensor::from_fn(&[6, 2], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let h = hankel_forward(&m, &HankelConfig::new(4)).unwrap();
        let spec = TransformSpec::for_shape(TransformKind::Dft, h.shape()).unwrap();
        assert!(rank_error(&h, 4, &spec).unwrap() < 1e-12);
        assert!((rank_error(&h, 0, &spec).unwrap() - h.frobenius_norm()).abs() < 1e-12);
        assert!(rank_error(&h, 5, &spec).is_err());

        let c = vector(&[1.5; 8]);
        let hc = hankel_forward(&c, &HankelConfig::new(5)).unwrap();
        let spec = TransformSpec::for_shape(TransformKind::Dft, hc.shape()).unwrap();
        assert!(rank_error(&hc, 1, &spec).unwrap() < 1e-12);
    }

    #[test]
    fn bound_checks_on_trivial_signals() {
        let c = vector(&[0.7; 10]);
        let s = check_smoothness_bound(&c, 6, 2).unwrap();
        assert!(s.holds && s.rhs == 0.0 && s.lhs < 1e-12);
        let p = DenseTensor::from_fn(&[12], |i| [1.0, 4.0, -2.0][i[0] % 3]).unwrap();
        let b = check_periodicity_bound(&p, 9, 3).unwrap();
        assert!(b.holds && b.rhs == 0.0 && b.lhs < 1e-12);
        assert!(check_smoothness_bound(&c, 6, 0).is_err());
    }
}

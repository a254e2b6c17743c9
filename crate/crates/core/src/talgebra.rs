//! t-product algebra: products, transposes, t-SVD, ranks, norms and t-SVT,
//! all computed face-wise in the transform domain.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, TidtError};
use crate::tensor::DenseTensor;
use crate::transform::{FaceStack, TransformSpec};

/// Relative tolerance (against the largest singular value) for rank counting.
pub const RANK_TOL: f64 = 1e-8;

/// Factors `z = U * S * Vᵀ` of a t-SVD.
#[derive(Clone, Debug)]
pub struct TSvdFactors {
    pub u: DenseTensor,
    pub s: DenseTensor,
    pub v: DenseTensor,
    pub transform: TransformSpec,
}

/// Singular triplets of one face, vectors stored column-major.
pub(crate) struct FaceSvd {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) u: Vec<Complex64>,
    pub(crate) u_cols: usize,
    pub(crate) s: Vec<f64>,
    pub(crate) v: Vec<Complex64>,
    pub(crate) v_cols: usize,
}

impl FaceSvd {
    fn conj(&self) -> FaceSvd {
        FaceSvd {
            rows: self.rows,
            cols: self.cols,
            u: self.u.iter().map(|z| z.conj()).collect(),
            u_cols: self.u_cols,
            s: self.s.clone(),
            v: self.v.iter().map(|z| z.conj()).collect(),
            v_cols: self.v_cols,
        }
    }
}

/// Face pairs `(f, partner)` with `f ≤ partner`; the partner's slice is the
/// conjugate of `f`'s for real input.
pub(crate) fn canonical_faces(spec: &TransformSpec) -> Vec<(usize, usize)> {
    (0..spec.face_count())
        .filter_map(|f| {
            let p = spec.conjugate_partner(f);
            (f <= p).then_some((f, p))
        })
        .collect()
}

fn face_svd(
    face: &[Complex64],
    rows: usize,
    cols: usize,
    real: bool,
    full: bool,
    index: usize,
) -> Result<FaceSvd> {
    let fail = |_| TidtError::SvdNonConvergence { face: index };
    if real {
        let m = Mat::<f64>::from_fn(rows, cols, |i, j| face[j * rows + i].re);
        let svd = if full { m.svd() } else { m.thin_svd() }.map_err(fail)?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        Ok(FaceSvd {
            rows,
            cols,
            u: (0..u.ncols())
                .flat_map(|c| (0..rows).map(move |r| Complex64::new(u[(r, c)], 0.0)))
                .collect(),
            u_cols: u.ncols(),
            s: (0..s.nrows()).map(|i| s[i]).collect(),
            v: (0..v.ncols())
                .flat_map(|c| (0..cols).map(move |r| Complex64::new(v[(r, c)], 0.0)))
                .collect(),
            v_cols: v.ncols(),
        })
    } else {
        let m = Mat::<Complex64>::from_fn(rows, cols, |i, j| face[j * rows + i]);
        let svd = if full { m.svd() } else { m.thin_svd() }.map_err(fail)?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        Ok(FaceSvd {
            rows,
            cols,
            u: (0..u.ncols()).flat_map(|c| (0..rows).map(move |r| u[(r, c)])).collect(),
            u_cols: u.ncols(),
            s: (0..s.nrows()).map(|i| s[i].re).collect(),
            v: (0..v.ncols()).flat_map(|c| (0..cols).map(move |r| v[(r, c)])).collect(),
            v_cols: v.ncols(),
        })
    }
}

/// Thin SVD of every face (partners filled by conjugation).
pub(crate) fn thin_face_svds(faces: &FaceStack, spec: &TransformSpec) -> Result<Vec<FaceSvd>> {
    let (rows, cols) = (faces.rows(), faces.cols());
    let pairs = canonical_faces(spec);
    let svds = pairs
        .par_iter()
        .map(|&(f, _)| face_svd(faces.face(f), rows, cols, face_is_real(spec, f), false, f))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<Option<FaceSvd>> = (0..spec.face_count()).map(|_| None).collect();
    for (&(f, p), svd) in pairs.iter().zip(svds) {
        if p != f {
            out[p] = Some(svd.conj());
        }
        out[f] = Some(svd);
    }
    Ok(out.into_iter().map(|s| s.expect("every face is covered")).collect())
}

fn face_singular_values(
    face: &[Complex64],
    rows: usize,
    cols: usize,
    real: bool,
    index: usize,
) -> Result<Vec<f64>> {
    let fail = |_| TidtError::SvdNonConvergence { face: index };
    if real {
        Mat::<f64>::from_fn(rows, cols, |i, j| face[j * rows + i].re)
            .singular_values()
            .map_err(fail)
    } else {
        Mat::<Complex64>::from_fn(rows, cols, |i, j| face[j * rows + i])
            .singular_values()
            .map_err(fail)
    }
}

/// Whether face `f` of a real tensor is itself real in the transform domain.
fn face_is_real(spec: &TransformSpec, f: usize) -> bool {
    spec.is_real_domain() || spec.conjugate_partner(f) == f
}

/// Rotates each singular pair so the largest-magnitude entry of `u_i` is real
/// and positive; completion columns are normalized on their own.
fn normalize_phases(svd: &mut FaceSvd) {
    let k = svd.s.len();
    let rotate = |col: &mut [Complex64]| -> Complex64 {
        let pivot = col
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_default();
        if pivot.norm() == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let phase = (pivot / pivot.norm()).conj();
        col.iter_mut().for_each(|z| *z *= phase);
        phase
    };
    for c in 0..svd.u_cols {
        let phase = rotate(&mut svd.u[c * svd.rows..(c + 1) * svd.rows]);
        if c < k && c < svd.v_cols {
            svd.v[c * svd.cols..(c + 1) * svd.cols].iter_mut().for_each(|z| *z *= phase);
        }
    }
    for c in k..svd.v_cols {
        rotate(&mut svd.v[c * svd.cols..(c + 1) * svd.cols]);
    }
}

fn check_order(z: &DenseTensor, min: usize) -> Result<()> {
    if z.order() < min {
        return Err(TidtError::InvalidShape(format!(
            "operation needs order >= {min}, got shape {:?}",
            z.shape()
        )));
    }
    Ok(())
}

/// `a * b`: face-wise products in the transform domain.
pub fn t_product(a: &DenseTensor, b: &DenseTensor, spec: &TransformSpec) -> Result<DenseTensor> {
    check_order(a, 2)?;
    check_order(b, 2)?;
    if a.shape()[1] != b.shape()[0] {
        return Err(TidtError::ShapeMismatch(format!(
            "inner dimensions differ: {:?} * {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.shape()[2..] != b.shape()[2..] {
        return Err(TidtError::ShapeMismatch(format!(
            "trailing modes differ: {:?} * {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let fa = spec.to_faces(a)?;
    let fb = spec.to_faces(b)?;
    let (n1, inner, n2) = (fa.rows(), fa.cols(), fb.cols());
    let mut out = FaceStack::zeros(n1, n2, spec.face_count());
    for (f, p) in canonical_faces(spec) {
        let (x, y) = (fa.face(f), fb.face(f));
        let mut prod = vec![Complex64::default(); n1 * n2];
        for c in 0..n2 {
            for j in 0..inner {
                let yv = y[c * inner + j];
                if yv == Complex64::default() {
                    continue;
                }
                for r in 0..n1 {
                    prod[c * n1 + r] += x[j * n1 + r] * yv;
                }
            }
        }
        if p != f {
            for (dst, src) in out.face_mut(p).iter_mut().zip(&prod) {
                *dst = src.conj();
            }
        }
        out.face_mut(f).copy_from_slice(&prod);
    }
    spec.from_faces(&out)
}

/// Tensor transpose: every transform-domain face is conjugate-transposed.
pub fn t_transpose(a: &DenseTensor, spec: &TransformSpec) -> Result<DenseTensor> {
    check_order(a, 2)?;
    let fa = spec.to_faces(a)?;
    let (rows, cols) = (fa.rows(), fa.cols());
    let mut out = FaceStack::zeros(cols, rows, spec.face_count());
    for f in 0..spec.face_count() {
        for r in 0..rows {
            for c in 0..cols {
                out.set(f, c, r, fa.get(f, r, c).conj());
            }
        }
    }
    spec.from_faces(&out)
}

/// Identity tensor `I_n`: every transform-domain face is the `n × n` identity.
pub fn identity_tensor(n: usize, spec: &TransformSpec) -> Result<DenseTensor> {
    let mut faces = FaceStack::zeros(n, n, spec.face_count());
    for f in 0..spec.face_count() {
        for i in 0..n {
            faces.set(f, i, i, Complex64::new(1.0, 0.0));
        }
    }
    spec.from_faces(&faces)
}

/// Full t-SVD with square orthogonal `U` (`n_1 × n_1 × …`) and `V`
/// (`n_2 × n_2 × …`) and f-diagonal `S`.
pub fn t_svd(z: &DenseTensor, spec: &TransformSpec) -> Result<TSvdFactors> {
    check_order(z, 2)?;
    let faces = spec.to_faces(z)?;
    let (n1, n2) = (faces.rows(), faces.cols());
    let count = spec.face_count();
    let mut fu = FaceStack::zeros(n1, n1, count);
    let mut fs = FaceStack::zeros(n1, n2, count);
    let mut fv = FaceStack::zeros(n2, n2, count);
    let pairs = canonical_faces(spec);
    let svds = pairs
        .par_iter()
        .map(|&(f, _)| {
            let mut svd = face_svd(faces.face(f), n1, n2, face_is_real(spec, f), true, f)?;
            normalize_phases(&mut svd);
            Ok(svd)
        })
        .collect::<Result<Vec<_>>>()?;
    for (&(f, p), svd) in pairs.iter().zip(svds) {
        let conj = (p != f).then(|| svd.conj());
        for (face, svd) in std::iter::once((f, &svd)).chain(conj.as_ref().map(|s| (p, s))) {
            fu.face_mut(face).copy_from_slice(&svd.u);
            fv.face_mut(face).copy_from_slice(&svd.v);
            for (i, &s) in svd.s.iter().enumerate() {
                fs.set(face, i, i, Complex64::new(s, 0.0));
            }
        }
    }
    Ok(TSvdFactors {
        u: spec.from_faces(&fu)?,
        s: spec.from_faces(&fs)?,
        v: spec.from_faces(&fv)?,
        transform: spec.clone(),
    })
}

impl TSvdFactors {
    /// `U * S * Vᵀ`.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let us = t_product(&self.u, &self.s, &self.transform)?;
        t_product(&us, &t_transpose(&self.v, &self.transform)?, &self.transform)
    }
}

/// Singular values of every transform-domain face, indexed by face.
pub fn face_spectra(z: &DenseTensor, spec: &TransformSpec) -> Result<Vec<Vec<f64>>> {
    check_order(z, 2)?;
    let faces = spec.to_faces(z)?;
    spectra_of_faces(&faces, spec)
}

pub(crate) fn spectra_of_faces(faces: &FaceStack, spec: &TransformSpec) -> Result<Vec<Vec<f64>>> {
    let (rows, cols) = (faces.rows(), faces.cols());
    let pairs = canonical_faces(spec);
    let values = pairs
        .par_iter()
        .map(|&(f, _)| face_singular_values(faces.face(f), rows, cols, face_is_real(spec, f), f))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![Vec::new(); spec.face_count()];
    for (&(f, p), s) in pairs.iter().zip(values) {
        out[p] = s.clone();
        out[f] = s;
    }
    Ok(out)
}

fn ranks_from_spectra(spectra: &[Vec<f64>]) -> Vec<usize> {
    let sigma_max = spectra
        .iter()
        .flat_map(|s| s.iter().copied())
        .fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return vec![0; spectra.len()];
    }
    let cutoff = RANK_TOL * sigma_max;
    spectra.iter().map(|s| s.iter().filter(|&&v| v > cutoff).count()).collect()
}

/// Per-face ranks of `bdiag(z_L)`.
pub fn multi_rank(z: &DenseTensor, spec: &TransformSpec) -> Result<Vec<usize>> {
    Ok(ranks_from_spectra(&face_spectra(z, spec)?))
}

/// Number of nonzero diagonal tubes of `S`, i.e. the largest face rank.
pub fn tsvd_rank(z: &DenseTensor, spec: &TransformSpec) -> Result<usize> {
    Ok(multi_rank(z, spec)?.into_iter().max().unwrap_or(0))
}

/// `r_s`, the sum of the multi-rank.
pub fn multi_rank_sum(z: &DenseTensor, spec: &TransformSpec) -> Result<usize> {
    Ok(multi_rank(z, spec)?.into_iter().sum())
}

/// Tensor nuclear norm `‖bdiag(z_L)‖_* / ℓ`.
pub fn tnn(z: &DenseTensor, spec: &TransformSpec) -> Result<f64> {
    let total: f64 = face_spectra(z, spec)?.iter().flatten().sum();
    Ok(total / spec.ell())
}

/// Tensor spectral norm: the largest singular value over all faces.
pub fn spectral_norm(z: &DenseTensor, spec: &TransformSpec) -> Result<f64> {
    Ok(face_spectra(z, spec)?.iter().flatten().copied().fold(0.0, f64::max))
}

/// Tensor singular value thresholding, the proximal map of `τ‖·‖_⊛`.
pub fn t_svt(z: &DenseTensor, tau: f64, spec: &TransformSpec) -> Result<DenseTensor> {
    Ok(t_svt_with_norm(z, tau, spec)?.0)
}

/// [`t_svt`] that also returns the tensor nuclear norm of its output.
pub fn t_svt_with_norm(z: &DenseTensor, tau: f64, spec: &TransformSpec) -> Result<(DenseTensor, f64)> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(TidtError::InvalidArgument(format!("threshold must be >= 0, got {tau}")));
    }
    check_order(z, 2)?;
    let faces = spec.to_faces(z)?;
    let (shrunk, nuclear) = svt_faces(&faces, tau, spec)?;
    Ok((spec.from_faces(&shrunk)?, nuclear / spec.ell()))
}

/// Shrinks every face; returns the new faces and the unnormalized sum of the
/// shrunk singular values over all faces.
pub(crate) fn svt_faces(faces: &FaceStack, tau: f64, spec: &TransformSpec) -> Result<(FaceStack, f64)> {
    let (rows, cols) = (faces.rows(), faces.cols());
    let pairs = canonical_faces(spec);
    let shrunk = pairs
        .par_iter()
        .map(|&(f, _)| -> Result<Option<(Vec<Complex64>, f64)>> {
            let face = faces.face(f);
            // σ_max ≤ ‖face‖_F, so the whole face shrinks to zero
            let frob = face.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if frob <= tau {
                return Ok(None);
            }
            let svd = face_svd(face, rows, cols, face_is_real(spec, f), false, f)?;
            let mut out = vec![Complex64::default(); rows * cols];
            let mut kept = 0.0;
            for (i, &s) in svd.s.iter().enumerate() {
                let d = s - tau;
                if d <= 0.0 {
                    break;
                }
                kept += d;
                let u = &svd.u[i * rows..(i + 1) * rows];
                let v = &svd.v[i * cols..(i + 1) * cols];
                for (c, vc) in v.iter().enumerate() {
                    let w = vc.conj() * d;
                    for (dst, ur) in out[c * rows..(c + 1) * rows].iter_mut().zip(u) {
                        *dst += ur * w;
                    }
                }
            }
            Ok(Some((out, kept)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut result = FaceStack::zeros(rows, cols, spec.face_count());
    let mut nuclear = 0.0;
    for (&(f, p), face) in pairs.iter().zip(shrunk) {
        let Some((data, kept)) = face else { continue };
        if p != f {
            for (dst, src) in result.face_mut(p).iter_mut().zip(&data) {
                *dst = src.conj();
            }
            nuclear += kept;
        }
        nuclear += kept;
        result.face_mut(f).copy_from_slice(&data);
    }
    Ok((result, nuclear))
}

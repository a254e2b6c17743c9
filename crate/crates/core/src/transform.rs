//! Invertible transforms along the trailing modes (3..d) that define the
//! t-product algebra, and the face-slice view of a transformed tensor.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TidtError};
use crate::tensor::{ComplexTensor, DenseTensor};

/// Imaginary parts below this are dropped when returning to the real domain.
pub const REAL_OUTPUT_TOL: f64 = 1e-9;

/// Which invertible transform is applied along every trailing mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    #[default]
    Dft,
    Dct,
    RandomOrthogonal { seed: u64 },
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::Dft => write!(f, "dft"),
            TransformKind::Dct => write!(f, "dct"),
            TransformKind::RandomOrthogonal { seed } => write!(f, "rot(seed={seed})"),
        }
    }
}

#[derive(Clone)]
enum ModeTransform {
    Fft { n: usize, forward: Arc<dyn Fft<f64>>, inverse: Arc<dyn Fft<f64>> },
    /// Real orthogonal matrix, row-major; the inverse is its transpose.
    Orthogonal { n: usize, matrix: Vec<f64> },
}

impl ModeTransform {
    fn len(&self) -> usize {
        match self {
            ModeTransform::Fft { n, .. } | ModeTransform::Orthogonal { n, .. } => *n,
        }
    }
}

/// A transform kind bound to concrete trailing extents `n_3, …, n_d`.
///
/// Every per-mode matrix satisfies `L* L = c_j I`; `ell` is `∏ c_j`, which is
/// `∏ n_j` for the DFT and 1 for the orthonormal DCT and random rotations.
#[derive(Clone)]
pub struct TransformSpec {
    kind: TransformKind,
    trailing: Vec<usize>,
    modes: Vec<ModeTransform>,
    ell: f64,
}

impl fmt::Debug for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformSpec")
            .field("kind", &self.kind)
            .field("trailing", &self.trailing)
            .field("ell", &self.ell)
            .finish()
    }
}

impl TransformSpec {
    pub fn new(kind: TransformKind, trailing: &[usize]) -> Result<Self> {
        if trailing.contains(&0) {
            return Err(TidtError::InvalidShape(format!("zero trailing extent in {trailing:?}")));
        }
        let mut planner = FftPlanner::<f64>::new();
        let modes = trailing
            .iter()
            .enumerate()
            .map(|(pos, &n)| match kind {
                TransformKind::Dft => ModeTransform::Fft {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                },
                TransformKind::Dct => ModeTransform::Orthogonal { n, matrix: dct_matrix(n) },
                TransformKind::RandomOrthogonal { seed } => ModeTransform::Orthogonal {
                    n,
                    matrix: random_orthogonal_matrix(n, mode_seed(seed, pos, n)),
                },
            })
            .collect();
        let ell = match kind {
            TransformKind::Dft => trailing.iter().map(|&n| n as f64).product(),
            _ => 1.0,
        };
        Ok(Self { kind, trailing: trailing.to_vec(), modes, ell })
    }

    /// Spec for a tensor of the given shape (trailing modes are `shape[2..]`).
    pub fn for_shape(kind: TransformKind, shape: &[usize]) -> Result<Self> {
        Self::new(kind, shape.get(2..).unwrap_or(&[]))
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn trailing(&self) -> &[usize] {
        &self.trailing
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Number of face slices, `n_3 ⋯ n_d` (1 for order ≤ 2).
    pub fn face_count(&self) -> usize {
        self.trailing.iter().product()
    }

    /// Whether transform-domain faces of a real tensor are real.
    pub fn is_real_domain(&self) -> bool {
        !matches!(self.kind, TransformKind::Dft)
    }

    /// Face whose transform-domain slice is the complex conjugate of `face`
    /// for real input. Only the DFT pairs distinct faces.
    pub fn conjugate_partner(&self, face: usize) -> usize {
        if self.is_real_domain() {
            return face;
        }
        let mut rest = face;
        let mut partner = 0usize;
        let mut stride = 1usize;
        for &n in self.trailing.iter().rev() {
            let i = rest % n;
            rest /= n;
            partner += ((n - i) % n) * stride;
            stride *= n;
        }
        partner
    }

    /// Explicit matrix `L_{n_j}` of trailing mode `mode` (row-major), for oracles.
    pub fn mode_matrix(&self, mode: usize) -> Vec<Complex64> {
        match &self.modes[mode] {
            ModeTransform::Fft { n, .. } => {
                let n = *n;
                let mut m = Vec::with_capacity(n * n);
                for r in 0..n {
                    for c in 0..n {
                        let angle = -2.0 * std::f64::consts::PI * ((r * c) % n) as f64 / n as f64;
                        m.push(Complex64::from_polar(1.0, angle));
                    }
                }
                m
            }
            ModeTransform::Orthogonal { matrix, .. } => {
                matrix.iter().map(|&v| Complex64::new(v, 0.0)).collect()
            }
        }
    }

    fn check_trailing(&self, shape: &[usize]) -> Result<()> {
        let trailing = shape.get(2..).unwrap_or(&[]);
        if trailing != self.trailing.as_slice() {
            return Err(TidtError::ShapeMismatch(format!(
                "tensor trailing extents {trailing:?} do not match transform extents {:?}",
                self.trailing
            )));
        }
        Ok(())
    }

    /// Transforms one tube (row-major over the trailing modes) in place.
    pub fn transform_tube(&self, tube: &mut [Complex64], inverse: bool, work: &mut TubeWork) {
        debug_assert_eq!(tube.len(), self.face_count());
        self.transform_tubes(tube, inverse, work);
    }

    /// Transforms a run of consecutive tubes in place, one mode at a time
    /// over the whole batch.
    pub fn transform_tubes(&self, data: &mut [Complex64], inverse: bool, work: &mut TubeWork) {
        debug_assert_eq!(data.len() % self.face_count(), 0);
        let mut stride = self.face_count();
        for mode in &self.modes {
            let n = mode.len();
            stride /= n;
            if n == 1 {
                if let ModeTransform::Orthogonal { matrix, .. } = mode {
                    let s = matrix[0];
                    data.iter_mut().for_each(|v| *v *= s);
                }
                continue;
            }
            let block = n * stride;
            // lines along this mode, gathered contiguously unless already so
            let lines: &mut [Complex64] = if stride == 1 {
                data
            } else {
                work.lines.resize(data.len(), Complex64::default());
                for (src, dst) in data.chunks(block).zip(work.lines.chunks_mut(block)) {
                    for inner in 0..stride {
                        for q in 0..n {
                            dst[inner * n + q] = src[inner + q * stride];
                        }
                    }
                }
                &mut work.lines
            };
            match mode {
                ModeTransform::Fft { forward, inverse: inv, .. } => {
                    let plan = if inverse { inv } else { forward };
                    work.scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
                    plan.process_with_scratch(lines, &mut work.scratch);
                    if inverse {
                        let s = 1.0 / n as f64;
                        lines.iter_mut().for_each(|v| *v *= s);
                    }
                }
                ModeTransform::Orthogonal { matrix, .. } => {
                    work.line.resize(n, Complex64::default());
                    for line in lines.chunks_mut(n) {
                        work.line.copy_from_slice(line);
                        for (r, dst) in line.iter_mut().enumerate() {
                            let mut acc = Complex64::default();
                            for c in 0..n {
                                let l = if inverse { matrix[c * n + r] } else { matrix[r * n + c] };
                                acc += work.line[c] * l;
                            }
                            *dst = acc;
                        }
                    }
                }
            }
            if stride != 1 {
                for (dst, src) in data.chunks_mut(block).zip(work.lines.chunks(block)) {
                    for inner in 0..stride {
                        for q in 0..n {
                            dst[inner + q * stride] = src[inner * n + q];
                        }
                    }
                }
            }
        }
    }

    /// `x ×_3 L_{n_3} ⋯ ×_d L_{n_d}`; orders 1 and 2 pass through.
    pub fn forward(&self, x: &DenseTensor) -> Result<ComplexTensor> {
        self.forward_complex(&x.to_complex())
    }

    pub fn forward_complex(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        self.apply(x, false)
    }

    pub fn inverse(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        self.apply(x, true)
    }

    /// Inverse transform followed by the real-output check.
    pub fn inverse_real(&self, x: &ComplexTensor) -> Result<DenseTensor> {
        let out = self.inverse(x)?;
        into_real(&out)
    }

    fn apply(&self, x: &ComplexTensor, inverse: bool) -> Result<ComplexTensor> {
        self.check_trailing(x.shape())?;
        let mut out = x.clone();
        let tube_len = self.face_count();
        if tube_len == 1 && self.modes.is_empty() {
            return Ok(out);
        }
        self.transform_tubes(out.data_mut(), inverse, &mut TubeWork::default());
        Ok(out)
    }

    /// Transforms a real tensor of order ≥ 2 and regroups it into face slices.
    pub fn to_faces(&self, x: &DenseTensor) -> Result<FaceStack> {
        if x.order() < 2 {
            return Err(TidtError::InvalidShape(format!(
                "face slices need order >= 2, got shape {:?}",
                x.shape()
            )));
        }
        self.check_trailing(x.shape())?;
        let (rows, cols) = (x.shape()[0], x.shape()[1]);
        let count = self.face_count();
        let mut faces = FaceStack::zeros(rows, cols, count);
        let mut tubes: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_tubes(&mut tubes, false, &mut TubeWork::default());
        let plane = rows * cols;
        for i in 0..rows {
            for j in 0..cols {
                let tube = &tubes[(i * cols + j) * count..(i * cols + j + 1) * count];
                let pos = j * rows + i;
                for (f, &v) in tube.iter().enumerate() {
                    faces.data[f * plane + pos] = v;
                }
            }
        }
        Ok(faces)
    }

    /// Inverse of [`TransformSpec::to_faces`], returning a real tensor.
    pub fn from_faces(&self, faces: &FaceStack) -> Result<DenseTensor> {
        if faces.count != self.face_count() {
            return Err(TidtError::ShapeMismatch(format!(
                "{} faces for a transform over {} faces",
                faces.count,
                self.face_count()
            )));
        }
        let (rows, cols, count) = (faces.rows, faces.cols, faces.count);
        let mut shape = vec![rows, cols];
        shape.extend_from_slice(&self.trailing);
        let plane = rows * cols;
        let mut tubes = vec![Complex64::default(); plane * count];
        for i in 0..rows {
            for j in 0..cols {
                let pos = j * rows + i;
                let tube = &mut tubes[(i * cols + j) * count..(i * cols + j + 1) * count];
                for (f, dst) in tube.iter_mut().enumerate() {
                    *dst = faces.data[f * plane + pos];
                }
            }
        }
        self.transform_tubes(&mut tubes, true, &mut TubeWork::default());
        let residue = tubes.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
        let out: Vec<f64> = tubes.iter().map(|v| v.re).collect();
        if residue > REAL_OUTPUT_TOL {
            return Err(TidtError::ImaginaryResidue { residue, limit: REAL_OUTPUT_TOL });
        }
        DenseTensor::from_vec(&shape, out)
    }
}

/// Reusable buffers for [`TransformSpec::transform_tube`].
#[derive(Default)]
pub struct TubeWork {
    line: Vec<Complex64>,
    lines: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// Drops imaginary parts, failing if any exceeds [`REAL_OUTPUT_TOL`].
pub fn into_real(x: &ComplexTensor) -> Result<DenseTensor> {
    let residue = x.max_imag();
    if residue > REAL_OUTPUT_TOL {
        return Err(TidtError::ImaginaryResidue { residue, limit: REAL_OUTPUT_TOL });
    }
    Ok(x.real_part())
}

/// Transform-domain tensor `x_L`.
pub fn transform_forward(x: &DenseTensor, spec: &TransformSpec) -> Result<ComplexTensor> {
    spec.forward(x)
}

pub fn transform_inverse(x: &ComplexTensor, spec: &TransformSpec) -> Result<ComplexTensor> {
    spec.inverse(x)
}

/// Stack of `rows × cols` complex matrices, one per trailing multi-index,
/// each stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceStack {
    rows: usize,
    cols: usize,
    count: usize,
    data: Vec<Complex64>,
}

impl FaceStack {
    pub fn zeros(rows: usize, cols: usize, count: usize) -> Self {
        Self { rows, cols, count, data: vec![Complex64::default(); rows * cols * count] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// All faces back to back, each column-major.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn face(&self, f: usize) -> &[Complex64] {
        let plane = self.rows * self.cols;
        &self.data[f * plane..(f + 1) * plane]
    }

    pub fn face_mut(&mut self, f: usize) -> &mut [Complex64] {
        let plane = self.rows * self.cols;
        &mut self.data[f * plane..(f + 1) * plane]
    }

    pub fn get(&self, f: usize, r: usize, c: usize) -> Complex64 {
        self.data[f * self.rows * self.cols + c * self.rows + r]
    }

    pub fn set(&mut self, f: usize, r: usize, c: usize, v: Complex64) {
        let plane = self.rows * self.cols;
        self.data[f * plane + c * self.rows + r] = v;
    }
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut m = Vec::with_capacity(n * n);
    for k in 0..n {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for j in 0..n {
            let angle = std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf);
            m.push(scale * angle.cos());
        }
    }
    m
}

fn mode_seed(seed: u64, mode: usize, n: usize) -> u64 {
    seed ^ (mode as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (n as u64).rotate_left(32)
}

/// Haar-distributed orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
fn random_orthogonal_matrix(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // rows of `q` are orthonormalized in turn
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    for i in 0..n {
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for j in 0..i {
                let dot: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = q.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= dot * b;
                }
            }
        }
        let norm = q[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        q[i].iter_mut().for_each(|v| *v /= norm);
    }
    q.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
    }

    /// O(n²) DFT by direct summation along every trailing mode.
    fn naive_dft(x: &DenseTensor) -> ComplexTensor {
        let shape = x.shape().to_vec();
        ComplexTensor::from_fn(&shape, |out| {
            let mut acc = Complex64::default();
            let mut src = vec![0usize; shape.len()];
            src[0] = out[0];
            src[1] = out[1];
            let trailing = &shape[2..];
            let count: usize = trailing.iter().product();
            for lin in 0..count {
                let mut rest = lin;
                let mut phase = 0.0;
                for (m, &n) in trailing.iter().enumerate().rev() {
                    let j = rest % n;
                    rest /= n;
                    src[m + 2] = j;
                    phase += (out[m + 2] * j) as f64 / n as f64;
                }
                let w = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase);
                acc += w * x.get(&src).unwrap();
            }
            acc
        })
        .unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let x = DenseTensor::zeros(&[2, 3, 4, 2]).unwrap();
        for kind in [TransformKind::Dft, TransformKind::Dct, TransformKind::RandomOrthogonal { seed: 3 }] {
            let spec = TransformSpec::for_shape(kind, x.shape()).unwrap();
            assert_eq!(spec.forward(&x).unwrap().frobenius_norm(), 0.0);
        }
    }

    #[test]
    fn dft_of_constant_concentrates_on_first_face() {
        let x = DenseTensor::ones(&[2, 2, 4]).unwrap();
        let spec = TransformSpec::for_shape(TransformKind::Dft, x.shape()).unwrap();
        let xf = spec.forward(&x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((xf.get(&[i, j, 0]).unwrap() - Complex64::new(4.0, 0.0)).norm() < 1e-14);
                for f in 1..4 {
                    assert!(xf.get(&[i, j, f]).unwrap().norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn dft_matches_direct_summation() {
        for (seed, shape) in [(1u64, vec![2, 2, 3]), (2, vec![2, 3, 4, 3]), (3, vec![1, 2, 5])] {
            let x = random_tensor(&shape, seed);
            let spec = TransformSpec::for_shape(TransformKind::Dft, &shape).unwrap();
            let fast = spec.forward(&x).unwrap();
            let slow = naive_dft(&x);
            let err = fast
                .data()
                .iter()
                .zip(slow.data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "shape {shape:?}: {err}");
        }
    }

    #[test]
    fn round_trip_all_kinds() {
        let x = random_tensor(&[3, 2, 4, 3], 9);
        for kind in [TransformKind::Dft, TransformKind::Dct, TransformKind::RandomOrthogonal { seed: 11 }] {
            let spec = TransformSpec::for_shape(kind, x.shape()).unwrap();
            let back = spec.inverse_real(&spec.forward(&x).unwrap()).unwrap();
            assert!(back.distance(&x).unwrap() / x.frobenius_norm() < 1e-10, "{kind}");
            let via_faces = spec.from_faces(&spec.to_faces(&x).unwrap()).unwrap();
            assert!(via_faces.distance(&x).unwrap() / x.frobenius_norm() < 1e-10, "{kind}");
        }
    }

    #[test]
    fn ell_matches_gram_identity() {
        let trailing = [3usize, 4];
        for kind in [TransformKind::Dft, TransformKind::Dct, TransformKind::RandomOrthogonal { seed: 5 }] {
            let spec = TransformSpec::new(kind, &trailing).unwrap();
            let mut prod = 1.0;
            for (mode, &n) in trailing.iter().enumerate() {
                let l = spec.mode_matrix(mode);
                // L* L = c I
                let c = (0..n).map(|r| l[r * n].norm_sqr()).sum::<f64>();
                for a in 0..n {
                    for b in 0..n {
                        let g: Complex64 = (0..n).map(|r| l[r * n + a].conj() * l[r * n + b]).sum();
                        let want = if a == b { c } else { 0.0 };
                        assert!((g - want).norm() < 1e-12);
                    }
                }
                prod *= c;
            }
            assert!((prod - spec.ell()).abs() < 1e-12);
        }
    }

    #[test]
    fn low_orders_pass_through() {
        let x = random_tensor(&[3, 4], 1);
        let spec = TransformSpec::for_shape(TransformKind::Dft, x.shape()).unwrap();
        assert_eq!(spec.forward(&x).unwrap().real_part(), x);
        assert_eq!(spec.ell(), 1.0);
        let v = random_tensor(&[5], 2);
        let spec = TransformSpec::for_shape(TransformKind::Dct, v.shape()).unwrap();
        assert_eq!(spec.forward(&v).unwrap().real_part(), v);
    }

    #[test]
    fn mismatched_extents_are_rejected() {
        let spec = TransformSpec::new(TransformKind::Dft, &[4]).unwrap();
        let x = random_tensor(&[2, 2, 3], 1);
        assert!(matches!(spec.forward(&x), Err(TidtError::ShapeMismatch(_))));
    }

    #[test]
    fn conjugate_partner_faces() {
        let spec = TransformSpec::new(TransformKind::Dft, &[3, 4]).unwrap();
        let x = random_tensor(&[2, 2, 3, 4], 4);
        let faces = spec.to_faces(&x).unwrap();
        for f in 0..12 {
            let p = spec.conjugate_partner(f);
            assert_eq!(spec.conjugate_partner(p), f);
            for (a, b) in faces.face(f).iter().zip(faces.face(p)) {
                assert!((a - b.conj()).norm() < 1e-12);
            }
        }
        assert_eq!(spec.conjugate_partner(0), 0);
    }

    #[test]
    fn imaginary_residue_is_reported() {
        let spec = TransformSpec::new(TransformKind::Dft, &[4]).unwrap();
        let mut faces = FaceStack::zeros(1, 1, 4);
        faces.set(1, 0, 0, Complex64::new(0.0, 1.0));
        assert!(matches!(spec.from_faces(&faces), Err(TidtError::ImaginaryResidue { .. })));
    }
}

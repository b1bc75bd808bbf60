//! Dense complex linear algebra over multipartite systems.
//!
//! All composite indices follow the Kronecker convention with the left
//! factor as the slow index: for dims `(d0, d1, ..., dk)` the basis state
//! `|i0 i1 ... ik⟩` sits at flat index `((i0 * d1 + i1) * d2 + i2) ...`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance on the Euclidean norm of state vectors and the trace of
/// density operators.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on Hermiticity and on negative eigenvalues.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Singular values at or below this count as zero in Schmidt decompositions.
pub const SCHMIDT_TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemShape {
    dims: Vec<usize>,
}

impl SystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("no subsystems".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidShape(format!("subsystem dimension {d}")));
        }
        Ok(Self { dims })
    }

    /// `n` subsystems of equal dimension `d`.
    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &SystemShape) -> SystemShape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SystemShape { dims }
    }

    /// Dims of the listed subsystems, in the listed order.
    pub fn select(&self, idx: &[usize]) -> Result<SystemShape> {
        check_subset(self.len(), idx, false)?;
        SystemShape::new(idx.iter().map(|&i| self.dims[i]).collect())
    }

    /// Replace the shape with another of the same total dimension, e.g. to
    /// merge two adjacent qubits into one ququart.
    pub fn regroup(&self, dims: Vec<usize>) -> Result<SystemShape> {
        let s = SystemShape::new(dims)?;
        if s.total_dim() != self.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                found: s.total_dim(),
            });
        }
        Ok(s)
    }
}

fn check_subset(n: usize, idx: &[usize], allow_empty: bool) -> Result<()> {
    if idx.is_empty() && !allow_empty {
        return Err(Error::InvalidSubsystems("empty selection".into()));
    }
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(Error::InvalidSubsystems(format!("index {i} out of range for {n} subsystems")));
        }
        if seen[i] {
            return Err(Error::InvalidSubsystems(format!("index {i} repeated")));
        }
        seen[i] = true;
    }
    Ok(())
}

fn check_permutation(n: usize, perm: &[usize]) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidSubsystems(format!(
            "permutation of length {} for {n} subsystems",
            perm.len()
        )));
    }
    check_subset(n, perm, true)
}

/// Row-major strides for `dims` (last index fastest).
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For each new flat index, the old flat index it is read from when the
/// subsystems are reordered so that new position `k` holds old subsystem
/// `perm[k]`.
pub(crate) fn permutation_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total: usize = dims.iter().product();
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    for _ in 0..total {
        let old: usize = digits
            .iter()
            .zip(perm)
            .map(|(&dgt, &p)| dgt * old_strides[p])
            .sum();
        map.push(old);
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < new_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    map
}

pub(crate) fn permute_vector(dims: &[usize], v: &DVector<C64>, perm: &[usize]) -> DVector<C64> {
    let map = permutation_map(dims, perm);
    DVector::from_iterator(map.len(), map.iter().map(|&o| v[o]))
}

pub(crate) fn permute_matrix(dims: &[usize], m: &DMatrix<C64>, perm: &[usize]) -> DMatrix<C64> {
    let map = permutation_map(dims, perm);
    let n = map.len();
    DMatrix::from_fn(n, n, |r, c| m[(map[r], map[c])])
}

/// Contract the last subsystem (dimension `d`) of an unnormalized vector
/// with the bra `⟨e|`.
pub(crate) fn contract_last_vector(v: &DVector<C64>, e: &DVector<C64>) -> DVector<C64> {
    let d = e.len();
    let rest = v.len() / d;
    DVector::from_fn(rest, |r, _| (0..d).map(|i| e[i].conj() * v[r * d + i]).sum())
}

/// `(I ⊗ ⟨e|) m (I ⊗ |e⟩)` on the last subsystem.
pub(crate) fn contract_last_matrix(m: &DMatrix<C64>, e: &DVector<C64>) -> DMatrix<C64> {
    let d = e.len();
    let rest = m.nrows() / d;
    // (rest*d) x rest intermediate: m (I ⊗ |e⟩)
    let right: DMatrix<C64> = DMatrix::from_fn(m.nrows(), rest, |r, c| {
        (0..d).map(|j| m[(r, c * d + j)] * e[j]).sum::<C64>()
    });
    DMatrix::from_fn(rest, rest, |r, c| {
        (0..d).map(|i| e[i].conj() * right[(r * d + i, c)]).sum::<C64>()
    })
}

/// `tr_last[(I ⊗ E) m]` for an arbitrary operator `E` on the last subsystem.
pub(crate) fn apply_effect_last(m: &DMatrix<C64>, effect: &DMatrix<C64>) -> DMatrix<C64> {
    let d = effect.nrows();
    let rest = m.nrows() / d;
    DMatrix::from_fn(rest, rest, |r, c| {
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                let e = effect[(i, j)];
                if e != ZERO {
                    acc += e * m[(r * d + j, c * d + i)];
                }
            }
        }
        acc
    })
}

pub(crate) fn partial_trace_matrix(dims: &[usize], m: &DMatrix<C64>, keep: &[usize]) -> DMatrix<C64> {
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let perm: Vec<usize> = keep_sorted.iter().chain(traced.iter()).copied().collect();
    let kd: usize = keep_sorted.iter().map(|&i| dims[i]).product();
    let td: usize = traced.iter().map(|&i| dims[i]).product();
    let p = if traced.is_empty() { m.clone() } else { permute_matrix(dims, m, &perm) };
    DMatrix::from_fn(kd, kd, |r, c| (0..td).map(|t| p[(r * td + t, c * td + t)]).sum())
}

fn kron_vec(a: &DVector<C64>, b: &DVector<C64>) -> DVector<C64> {
    let nb = b.len();
    DVector::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    shape: SystemShape,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(shape: SystemShape, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != shape.total_dim() {
            return Err(Error::DimensionMismatch { expected: shape.total_dim(), found: amps.len() });
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { shape, amps })
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn from_unnormalized(shape: SystemShape, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != shape.total_dim() {
            return Err(Error::DimensionMismatch { expected: shape.total_dim(), found: amps.len() });
        }
        let norm = amps.norm();
        if norm < 1e-300 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { shape, amps: amps / C64::new(norm, 0.0) })
    }

    pub fn from_real(dims: Vec<usize>, amps: &[f64]) -> Result<Self> {
        let shape = SystemShape::new(dims)?;
        Self::from_unnormalized(shape, DVector::from_iterator(amps.len(), amps.iter().map(|&a| C64::new(a, 0.0))))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(shape: SystemShape, index: usize) -> Result<Self> {
        let n = shape.total_dim();
        if index >= n {
            return Err(Error::InvalidParameter(format!("basis index {index} >= {n}")));
        }
        let mut amps = DVector::from_element(n, ZERO);
        amps[index] = ONE;
        Ok(Self { shape, amps })
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.amps.len() != other.amps.len() {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), found: other.amps.len() });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector { shape: self.shape.concat(&other.shape), amps: kron_vec(&self.amps, &other.amps) }
    }

    /// Reorder subsystems: new position `k` holds old subsystem `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<StateVector> {
        check_permutation(self.shape.len(), perm)?;
        Ok(StateVector {
            shape: SystemShape::new(perm.iter().map(|&p| self.shape.dims[p]).collect())?,
            amps: permute_vector(&self.shape.dims, &self.amps, perm),
        })
    }

    pub fn regroup(&self, dims: Vec<usize>) -> Result<StateVector> {
        Ok(StateVector { shape: self.shape.regroup(dims)?, amps: self.amps.clone() })
    }

    pub fn projector(&self) -> DensityOperator {
        DensityOperator { shape: self.shape.clone(), matrix: &self.amps * self.amps.adjoint() }
    }

    pub fn map_phase(&self, phase: f64) -> StateVector {
        StateVector { shape: self.shape.clone(), amps: &self.amps * C64::from_polar(1.0, phase) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    shape: SystemShape,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(shape: SystemShape, matrix: DMatrix<C64>) -> Result<Self> {
        let n = shape.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        let herm_err = (&matrix - matrix.adjoint()).camax();
        if herm_err > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm_err:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let rho = Self { shape, matrix };
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(rho)
    }

    /// Normalizes an unnormalized positive operator by its trace.
    pub(crate) fn from_unnormalized(shape: SystemShape, matrix: DMatrix<C64>) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidDensity(format!("non-positive trace {tr}")));
        }
        let m = (&matrix + matrix.adjoint()) * C64::new(0.5 / tr, 0.0);
        Ok(Self { shape, matrix: m })
    }

    pub fn maximally_mixed(shape: SystemShape) -> Self {
        let n = shape.total_dim();
        Self { shape, matrix: DMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0) }
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        DensityOperator { shape: self.shape.concat(&other.shape), matrix: self.matrix.kronecker(&other.matrix) }
    }

    pub fn permute(&self, perm: &[usize]) -> Result<DensityOperator> {
        check_permutation(self.shape.len(), perm)?;
        Ok(DensityOperator {
            shape: SystemShape::new(perm.iter().map(|&p| self.shape.dims[p]).collect())?,
            matrix: permute_matrix(&self.shape.dims, &self.matrix, perm),
        })
    }

    pub fn regroup(&self, dims: Vec<usize>) -> Result<DensityOperator> {
        Ok(DensityOperator { shape: self.shape.regroup(dims)?, matrix: self.matrix.clone() })
    }

    pub fn expectation(&self, op: &LinearOperator) -> Result<C64> {
        if op.shape.total_dim() != self.shape.total_dim() {
            return Err(Error::DimensionMismatch { expected: self.shape.total_dim(), found: op.shape.total_dim() });
        }
        Ok((&op.matrix * &self.matrix).trace())
    }

    /// Apply `U ρ U†`.
    pub fn conjugate_by(&self, u: &DMatrix<C64>) -> Result<DensityOperator> {
        if u.nrows() != self.matrix.nrows() || !u.is_square() {
            return Err(Error::DimensionMismatch { expected: self.matrix.nrows(), found: u.nrows() });
        }
        Ok(DensityOperator { shape: self.shape.clone(), matrix: u * &self.matrix * u.adjoint() })
    }
}

impl From<&StateVector> for DensityOperator {
    fn from(psi: &StateVector) -> Self {
        psi.projector()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    shape: SystemShape,
    matrix: DMatrix<C64>,
}

impl LinearOperator {
    pub fn new(shape: SystemShape, matrix: DMatrix<C64>) -> Result<Self> {
        let n = shape.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        Ok(Self { shape, matrix })
    }

    pub fn identity(shape: SystemShape) -> Self {
        let n = shape.total_dim();
        Self { shape, matrix: DMatrix::identity(n, n) }
    }

    /// `|v⟩⟨v|` on a single subsystem of dimension `v.len()`.
    pub fn rank_one(v: &DVector<C64>) -> Self {
        Self { shape: SystemShape { dims: vec![v.len()] }, matrix: v * v.adjoint() }
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn tensor(&self, other: &LinearOperator) -> LinearOperator {
        LinearOperator { shape: self.shape.concat(&other.shape), matrix: self.matrix.kronecker(&other.matrix) }
    }

    pub fn permute(&self, perm: &[usize]) -> Result<LinearOperator> {
        check_permutation(self.shape.len(), perm)?;
        Ok(LinearOperator {
            shape: SystemShape::new(perm.iter().map(|&p| self.shape.dims[p]).collect())?,
            matrix: permute_matrix(&self.shape.dims, &self.matrix, perm),
        })
    }

    pub fn regroup(&self, dims: Vec<usize>) -> Result<LinearOperator> {
        Ok(LinearOperator { shape: self.shape.regroup(dims)?, matrix: self.matrix.clone() })
    }
}

/// Kronecker product of two objects of the same kind.
pub trait TensorProduct: Sized {
    fn tensor_product(&self, other: &Self) -> Self;
}

impl TensorProduct for StateVector {
    fn tensor_product(&self, other: &Self) -> Self {
        self.tensor(other)
    }
}

impl TensorProduct for DensityOperator {
    fn tensor_product(&self, other: &Self) -> Self {
        self.tensor(other)
    }
}

impl TensorProduct for LinearOperator {
    fn tensor_product(&self, other: &Self) -> Self {
        self.tensor(other)
    }
}

pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> T {
    a.tensor_product(b)
}

/// `a ⊗ a ⊗ ... ⊗ a` (`copies` factors).
pub fn tensor_power<T: TensorProduct + Clone>(a: &T, copies: usize) -> T {
    let mut acc = a.clone();
    for _ in 1..copies {
        acc = acc.tensor_product(a);
    }
    acc
}

/// Reduced state on `keep`; the kept subsystems stay in their original order.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    check_subset(rho.shape.len(), keep, false)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    Ok(DensityOperator {
        shape: rho.shape.select(&keep_sorted)?,
        matrix: partial_trace_matrix(&rho.shape.dims, &rho.matrix, &keep_sorted),
    })
}

/// Reduced state of a pure state, without forming the global projector.
pub fn reduced_state(psi: &StateVector, keep: &[usize]) -> Result<DensityOperator> {
    let m = bipartition_matrix(psi, keep)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    Ok(DensityOperator { shape: psi.shape.select(&keep_sorted)?, matrix: &m * m.adjoint() })
}

/// `|⟨psi|phi⟩|²`.
pub fn fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr().min(1.0))
}

/// Amplitudes reshaped into a (part) × (rest) matrix.
fn bipartition_matrix(psi: &StateVector, part: &[usize]) -> Result<DMatrix<C64>> {
    let n = psi.shape.len();
    check_subset(n, part, false)?;
    if part.len() == n {
        return Err(Error::InvalidSubsystems("bipartition must leave a non-empty complement".into()));
    }
    let mut part_sorted = part.to_vec();
    part_sorted.sort_unstable();
    let rest: Vec<usize> = (0..n).filter(|i| !part_sorted.contains(i)).collect();
    let perm: Vec<usize> = part_sorted.iter().chain(rest.iter()).copied().collect();
    let rows: usize = part_sorted.iter().map(|&i| psi.shape.dims[i]).product();
    let cols = psi.shape.total_dim() / rows;
    let v = permute_vector(&psi.shape.dims, &psi.amps, &perm);
    Ok(DMatrix::from_fn(rows, cols, |r, c| v[r * cols + c]))
}

/// Schmidt coefficients across `part | rest`, descending, zeros included.
pub fn schmidt_coefficients(psi: &StateVector, part: &[usize]) -> Result<Vec<f64>> {
    let m = bipartition_matrix(psi, part)?;
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

pub fn schmidt_rank(psi: &StateVector, part: &[usize]) -> Result<usize> {
    Ok(schmidt_coefficients(psi, part)?.into_iter().filter(|&s| s > SCHMIDT_TOL).count())
}

/// Fidelity with the closest maximally entangled state of Schmidt rank
/// `min(d_part, d_rest)`: `(Σ s_k)² / d_min`.
pub fn max_entangled_fidelity(psi: &StateVector, part: &[usize]) -> Result<f64> {
    let s = schmidt_coefficients(psi, part)?;
    let d = s.len() as f64;
    let sum: f64 = s.iter().sum();
    Ok((sum * sum / d).min(1.0))
}

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

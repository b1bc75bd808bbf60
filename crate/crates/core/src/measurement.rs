//! POVMs, projective and Bell-basis measurements, and the analytic
//! two-qubit CHSH maximum.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{c, permute_vector, DensityOperator, LinearOperator, SystemShape, C64, HERMITIAN_TOL, ONE, ZERO};

/// A positive operator-valued measure on one (possibly composite) party.
///
/// Outcomes are labelled `0..k`. When built from orthonormal vectors the
/// vectors are kept so rank-one effects can be contracted directly.
#[derive(Clone, Debug)]
pub struct Povm {
    local_dim: usize,
    effects: Vec<LinearOperator>,
    vectors: Option<Vec<DVector<C64>>>,
}

impl Povm {
    pub fn new(effects: Vec<DMatrix<C64>>) -> Result<Self> {
        let d = effects.first().map(|e| e.nrows()).ok_or_else(|| Error::InvalidMeasurement("no effects".into()))?;
        let shape = SystemShape::new(vec![d])?;
        let mut sum = DMatrix::<C64>::zeros(d, d);
        let mut ops = Vec::with_capacity(effects.len());
        for (k, e) in effects.into_iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::InvalidMeasurement(format!("effect {k} has wrong size")));
            }
            if (&e - e.adjoint()).camax() > HERMITIAN_TOL {
                return Err(Error::InvalidMeasurement(format!("effect {k} is not Hermitian")));
            }
            let min_eig = e.clone().symmetric_eigenvalues().min();
            if min_eig < -HERMITIAN_TOL {
                return Err(Error::InvalidMeasurement(format!("effect {k} has eigenvalue {min_eig:e}")));
            }
            sum += &e;
            ops.push(LinearOperator::new(shape.clone(), e)?);
        }
        let dev = (sum - DMatrix::<C64>::identity(d, d)).camax();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidMeasurement(format!("effects sum to identity only within {dev:e}")));
        }
        Ok(Self { local_dim: d, effects: ops, vectors: None })
    }

    /// Projective measurement onto an orthonormal basis (or any set of
    /// vectors whose projectors sum to the identity).
    pub fn from_vectors(vectors: Vec<DVector<C64>>) -> Result<Self> {
        let effects = vectors.iter().map(|v| v * v.adjoint()).collect();
        let mut p = Self::new(effects)?;
        p.vectors = Some(vectors);
        Ok(p)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[LinearOperator] {
        &self.effects
    }

    pub fn effect(&self, k: usize) -> &DMatrix<C64> {
        self.effects[k].matrix()
    }

    /// The vectors `|e_k⟩` with `E_k = |e_k⟩⟨e_k|`; fails if an effect has
    /// rank above one.
    pub fn rank_one_vectors(&self) -> Result<Vec<DVector<C64>>> {
        if let Some(v) = &self.vectors {
            return Ok(v.clone());
        }
        self.effects
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let eig = SymmetricEigen::new(e.matrix().clone());
                let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
                if eig.eigenvalues.len() > 1 && eig.eigenvalues[order[1]] > 1e-9 {
                    return Err(Error::InvalidMeasurement(format!("effect {k} is not rank one")));
                }
                let lam = eig.eigenvalues[order[0]].max(0.0);
                Ok(eig.eigenvectors.column(order[0]).into_owned() * c(lam.sqrt()))
            })
            .collect()
    }

    /// Same measurement on a party whose subsystems are listed in a
    /// different order (see `StateVector::permute`).
    pub fn permute_subsystems(&self, dims: &[usize], perm: &[usize]) -> Result<Povm> {
        let vectors = self.rank_one_vectors()?;
        Povm::from_vectors(vectors.iter().map(|v| permute_vector(dims, v, perm)).collect())
    }

    /// Product measurement; outcome `i * other.outcomes() + j`.
    pub fn tensor(&self, other: &Povm) -> Result<Povm> {
        match (&self.vectors, &other.vectors) {
            (Some(a), Some(b)) => Povm::from_vectors(
                a.iter()
                    .flat_map(|x| b.iter().map(move |y| x.kronecker(y)))
                    .collect(),
            ),
            _ => Povm::new(
                self.effects
                    .iter()
                    .flat_map(|x| other.effects.iter().map(move |y| x.matrix().kronecker(y.matrix())))
                    .collect(),
            ),
        }
    }
}

/// Per-party list of settings; party `i`, setting `x` is `settings[i][x]`.
#[derive(Clone, Debug)]
pub struct MeasurementAssignment {
    settings: Vec<Vec<Povm>>,
}

impl MeasurementAssignment {
    pub fn new(settings: Vec<Vec<Povm>>) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::InvalidMeasurement("no parties".into()));
        }
        for (i, party) in settings.iter().enumerate() {
            let first = party
                .first()
                .ok_or_else(|| Error::InvalidMeasurement(format!("party {i} has no settings")))?;
            for p in party {
                if p.local_dim() != first.local_dim() {
                    return Err(Error::InvalidMeasurement(format!("party {i}: settings disagree on local dimension")));
                }
                if p.outcomes() != first.outcomes() {
                    return Err(Error::InvalidMeasurement(format!("party {i}: settings disagree on outcome count")));
                }
            }
        }
        Ok(Self { settings })
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn party(&self, i: usize) -> &[Povm] {
        &self.settings[i]
    }

    pub fn settings_cardinality(&self) -> Vec<usize> {
        self.settings.iter().map(Vec::len).collect()
    }

    pub fn outcomes_cardinality(&self) -> Vec<usize> {
        self.settings.iter().map(|p| p[0].outcomes()).collect()
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.settings.iter().map(|p| p[0].local_dim()).collect()
    }
}

pub fn pauli(i: usize) -> DMatrix<C64> {
    let i_ = C64::new(0.0, 1.0);
    match i {
        0 => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        1 => DMatrix::from_row_slice(2, 2, &[ZERO, -i_, i_, ZERO]),
        2 => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => DMatrix::identity(2, 2),
    }
}

/// `n·σ` for a real 3-vector.
pub fn bloch_observable(n: &Vector3<f64>) -> DMatrix<C64> {
    pauli(0) * c(n[0]) + pauli(1) * c(n[1]) + pauli(2) * c(n[2])
}

/// Polar and azimuthal angles of a (not necessarily unit) direction.
pub fn bloch_angles(n: &Vector3<f64>) -> (f64, f64) {
    let r = n.norm();
    if r < 1e-300 {
        return (0.0, 0.0);
    }
    ((n[2] / r).clamp(-1.0, 1.0).acos(), n[1].atan2(n[0]))
}

pub fn bloch_direction(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Qubit projective measurement along the Bloch direction `(θ, φ)`;
/// outcome 0 is the +1 eigenvector.
pub fn projective_from_bloch(theta: f64, phi: f64) -> Povm {
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let ph = C64::from_polar(1.0, phi);
    let plus = DVector::from_vec(vec![c(ch), ph * sh]);
    let minus = DVector::from_vec(vec![c(sh), -ph * ch]);
    Povm::from_vectors(vec![plus, minus]).expect("orthonormal qubit basis")
}

pub fn projective_along(n: &Vector3<f64>) -> Povm {
    let (t, p) = bloch_angles(n);
    projective_from_bloch(t, p)
}

pub fn computational_basis(d: usize) -> Povm {
    Povm::from_vectors(
        (0..d)
            .map(|k| {
                let mut v = DVector::from_element(d, ZERO);
                v[k] = ONE;
                v
            })
            .collect(),
    )
    .expect("orthonormal basis")
}

/// Discrete Fourier basis `|f_m⟩ = Σ_k ω^{mk} |k⟩ / √d`.
pub fn fourier_basis(d: usize) -> Povm {
    let norm = 1.0 / (d as f64).sqrt();
    Povm::from_vectors(
        (0..d)
            .map(|m| DVector::from_fn(d, |k, _| C64::from_polar(norm, 2.0 * PI * (m * k) as f64 / d as f64)))
            .collect(),
    )
    .expect("orthonormal basis")
}

/// X-type basis: `X^{⊗k}` eigenbasis when `d = 2^k`, the Fourier basis
/// otherwise. Outcome 0 is `|+…+⟩`.
pub fn x_basis(d: usize) -> Povm {
    if d.is_power_of_two() && d >= 2 {
        let x = projective_from_bloch(PI / 2.0, 0.0);
        let mut acc = x.clone();
        let mut dim = 2;
        while dim < d {
            acc = acc.tensor(&x).expect("qubit product");
            dim *= 2;
        }
        acc
    } else {
        fourier_basis(d)
    }
}

/// Two-qubit Bell basis in the order (Φ⁺, Φ⁻, Ψ⁺, Ψ⁻).
pub fn bell_basis() -> Povm {
    generalized_bell_basis(2)
}

/// Generalized Bell basis on two qudits; outcome `n·d + m` is
/// `Σ_k ω^{mk} |k, k⊕n⟩ / √d`.
pub fn generalized_bell_basis(d: usize) -> Povm {
    let norm = 1.0 / (d as f64).sqrt();
    let mut vectors = Vec::with_capacity(d * d);
    for n in 0..d {
        for m in 0..d {
            let mut v = DVector::from_element(d * d, ZERO);
            for k in 0..d {
                v[k * d + (k + n) % d] = C64::from_polar(norm, 2.0 * PI * (m * k) as f64 / d as f64);
            }
            vectors.push(v);
        }
    }
    Povm::from_vectors(vectors).expect("orthonormal basis")
}

/// Joint measurement on two ququarts `V = (V₁, V₂)` and `V̂ = (V̂₁, V̂₂)`:
/// Bell basis on (V₁, V̂₁) times Bell basis on (V₂, V̂₂). The operand order is
/// V₁ V₂ V̂₁ V̂₂; outcome `4i + j` pairs Bell outcome `i` on the first qubits
/// with `j` on the second.
pub fn paired_bell_basis() -> Povm {
    let b = bell_basis();
    b.tensor(&b)
        .and_then(|p| p.permute_subsystems(&[2, 2, 2, 2], &[0, 2, 1, 3]))
        .expect("fixed layout")
}

/// Default joint measurement for two parties of local dimension `d`.
pub fn default_joint_measurement(d: usize) -> Povm {
    match d {
        2 => bell_basis(),
        4 => paired_bell_basis(),
        _ => generalized_bell_basis(d),
    }
}

/// `±1`-valued observable as a two-outcome measurement: outcome 0 is the
/// `+1` eigenspace.
pub fn binary_from_observable(obs: &DMatrix<C64>) -> Result<Povm> {
    let d = obs.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    Povm::new(vec![(&id + obs) * c(0.5), (&id - obs) * c(0.5)])
}

fn require_two_qubits(rho: &DensityOperator) -> Result<()> {
    if rho.shape().dims() != [2, 2] {
        return Err(Error::InvalidShape(format!("expected two qubits, got {:?}", rho.shape().dims())));
    }
    Ok(())
}

/// `T_ij = tr[ρ σ_i ⊗ σ_j]`.
pub fn correlation_matrix(rho: &DensityOperator) -> Result<Matrix3<f64>> {
    require_two_qubits(rho)?;
    let mut t = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            t[(i, j)] = (pauli(i).kronecker(&pauli(j)) * rho.matrix()).trace().re;
        }
    }
    Ok(t)
}

fn top_two_eigen(t: &Matrix3<f64>) -> [(f64, Vector3<f64>); 2] {
    let eig = SymmetricEigen::new(t.transpose() * t);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    [0, 1].map(|k| (eig.eigenvalues[order[k]].max(0.0), eig.eigenvectors.column(order[k]).into_owned()))
}

/// Maximum CHSH value over projective qubit settings:
/// `2 √(λ₁ + λ₂)` for the two largest eigenvalues of `TᵀT`.
pub fn horodecki_chsh_max(rho: &DensityOperator) -> Result<f64> {
    let t = correlation_matrix(rho)?;
    let [(l1, _), (l2, _)] = top_two_eigen(&t);
    Ok(2.0 * (l1 + l2).sqrt())
}

/// Bloch directions `([a0, a1], [b0, b1])` attaining the maximum of
/// `E00 + E01 + E10 − E11`.
pub fn horodecki_settings(rho: &DensityOperator) -> Result<([Vector3<f64>; 2], [Vector3<f64>; 2])> {
    let t = correlation_matrix(rho)?;
    let [(l1, c1), (l2, c2)] = top_two_eigen(&t);
    let (cos, sin) = if l1 + l2 > 0.0 {
        ((l1 / (l1 + l2)).sqrt(), (l2 / (l1 + l2)).sqrt())
    } else {
        (1.0, 0.0)
    };
    let b0 = c1 * cos + c2 * sin;
    let b1 = c1 * cos - c2 * sin;
    let unit = |v: Vector3<f64>, fallback: Vector3<f64>| {
        let n = v.norm();
        if n > 1e-14 {
            v / n
        } else {
            fallback
        }
    };
    let a0 = unit(t * (b0 + b1), Vector3::z());
    let a1 = unit(t * (b0 - b1), Vector3::x());
    Ok(([a0, a1], [unit(b0, Vector3::z()), unit(b1, Vector3::x())]))
}

//! Constructors for the state families used by the experiments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{c, schmidt_rank, DensityOperator, StateVector, SystemShape, ZERO};

/// Generalized GHZ state on `n` parties of local dimension `d`.
///
/// For qubits this is `cos θ |0…0⟩ + sin θ |1…1⟩`. For `d > 2` the uniform
/// superposition `Σ_k |k…k⟩ / √d` is returned and `theta` is ignored.
pub fn make_ghz(n: usize, theta: f64, d: usize) -> Result<StateVector> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("GHZ needs n >= 2, got {n}")));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!("GHZ needs d >= 2, got {d}")));
    }
    let shape = SystemShape::uniform(n, d)?;
    let total = shape.total_dim();
    // |k…k⟩ sits at k * (1 + d + d² + … + d^{n-1})
    let step: usize = (0..n).map(|k| d.pow(k as u32)).sum();
    let mut amps = DVector::from_element(total, ZERO);
    if d == 2 {
        amps[0] = c(theta.cos());
        amps[step] = c(theta.sin());
    } else {
        let a = 1.0 / (d as f64).sqrt();
        for k in 0..d {
            amps[k * step] = c(a);
        }
    }
    StateVector::from_unnormalized(shape, amps)
}

/// `Σ_i |ii⟩ / √d`.
pub fn make_epr(d: usize) -> Result<StateVector> {
    make_ghz(2, std::f64::consts::FRAC_PI_4, d)
}

/// Two-qubit `cos θ |00⟩ + sin θ |11⟩`.
pub fn make_pair(theta: f64) -> StateVector {
    make_ghz(2, theta, 2).expect("valid qubit pair")
}

/// White-noise mixture `(1 - v) I / D + v |Φ⟩⟨Φ|`.
pub fn make_werner(phi: &StateVector, v: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("visibility {v} outside [0, 1]")));
    }
    let n = phi.shape().total_dim();
    let proj = phi.projector();
    let m = proj.matrix() * c(v) + DMatrix::identity(n, n) * c((1.0 - v) / n as f64);
    DensityOperator::new(phi.shape().clone(), m)
}

/// Triangle network of three maximally entangled qubit pairs.
///
/// Links are A₁–B₂, B₁–C₂ and C₁–A₂. Party X holds qubits (X₁, X₂) in that
/// order, so the state has shape (4, 4, 4) and qubit order
/// A₁ A₂ B₁ B₂ C₁ C₂.
pub fn make_triangle_state() -> StateVector {
    let q = std::f64::consts::FRAC_PI_4;
    make_triangle_state_with_edges([q, q, q])
}

/// Triangle state with link `k` in `cos θ_k |00⟩ + sin θ_k |11⟩`; links are
/// ordered (A₁B₂, B₁C₂, C₁A₂).
pub fn make_triangle_state_with_edges(thetas: [f64; 3]) -> StateVector {
    let [ab, bc, ca] = thetas.map(make_pair);
    // qubit order before regrouping: A1 B2 | B1 C2 | C1 A2
    let raw = ab.tensor(&bc).tensor(&ca);
    raw.permute(&[0, 5, 2, 1, 4, 3])
        .and_then(|s| s.regroup(vec![4, 4, 4]))
        .expect("fixed triangle layout")
}

/// All bipartitions `I | Ī` of `n` parties, each listed once by the side
/// that contains party 0.
pub fn bipartitions(n: usize) -> Vec<Vec<usize>> {
    (0..(1usize << (n - 1)) - 1)
        .map(|mask| {
            // party 0 always in I; bits of mask choose parties 1..n on the same side
            let mut part = vec![0];
            part.extend((1..n).filter(|&i| mask >> (i - 1) & 1 == 1));
            part
        })
        .collect()
}

/// Pure-state genuine multipartite entanglement: entangled across every
/// bipartition.
pub fn genuine_entanglement_check(psi: &StateVector) -> bool {
    let n = psi.shape().len();
    if n < 2 {
        return false;
    }
    bipartitions(n)
        .iter()
        .all(|part| schmidt_rank(psi, part).map(|r| r >= 2).unwrap_or(false))
}

//! CHSH maximization by alternating optimization and bisection solvers for
//! noise-visibility thresholds.

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{max_adapted_chsh, tripartite_cases, QuantumCase};
use crate::error::{Error, Result};
use crate::measurement::{bloch_angles, bloch_observable, horodecki_chsh_max, pauli, projective_from_bloch, Povm};
use crate::network::{chain_inflation, tripartite_inflation, SourceState};
use crate::states::{make_epr, make_ghz, make_werner};
use crate::swapping::{count_epr_outcomes, Projections, EPR_TOL};
use crate::tensor::{DensityOperator, C64};

/// Random starting points of [`maximize_chsh`].
pub const RESTARTS: usize = 8;
const MAX_SWEEPS: usize = 2000;
const SWEEP_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshOptimum {
    pub value: f64,
    /// `(θ, φ)` Bloch angles of A0, A1, B0, B1 (qubits only).
    pub settings: Vec<(f64, f64)>,
}

/// `±1` observable `P₊ − P₋` of a Hermitian matrix; zero modes go to `+1`.
fn sign_of(k: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (k + k.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let d = eig.eigenvalues.len();
    let s = DMatrix::from_fn(d, d, |i, j| if i == j { C64::new(if eig.eigenvalues[i] >= 0.0 { 1.0 } else { -1.0 }, 0.0) } else { C64::new(0.0, 0.0) });
    &eig.eigenvectors * s * eig.eigenvectors.adjoint()
}

/// `tr_B[ρ (I ⊗ M)]` as the operator `K` with `tr[ρ (A ⊗ M)] = tr[A K]`.
fn alice_operator(rho: &DMatrix<C64>, da: usize, db: usize, m: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(da, da, |i, k| {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..db {
            for l in 0..db {
                acc += rho[(i * db + j, k * db + l)] * m[(l, j)];
            }
        }
        acc
    })
}

/// `tr_A[ρ (M ⊗ I)]` with `tr[ρ (M ⊗ B)] = tr[B K]`.
fn bob_operator(rho: &DMatrix<C64>, da: usize, db: usize, m: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(db, db, |j, l| {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..da {
            for k in 0..da {
                acc += rho[(i * db + j, k * db + l)] * m[(k, i)];
            }
        }
        acc
    })
}

/// Best observable against `K`: `sign(K)` in general, `k̂·σ` with `k` the
/// Bloch part of `K` for qubits (traceless, both outcomes possible).
fn best_response(k: &DMatrix<C64>, previous: &DMatrix<C64>) -> DMatrix<C64> {
    if k.nrows() != 2 {
        return sign_of(k);
    }
    let v = bloch_vector(k);
    if v.norm() < 1e-300 {
        return previous.clone();
    }
    bloch_observable(&v.normalize())
}

fn random_observable(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    if d == 2 {
        let v: Vector3<f64> = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        return bloch_observable(&(v / v.norm().max(1e-12)));
    }
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    sign_of(&(&g + g.adjoint()))
}

fn chsh_of(rho: &DMatrix<C64>, da: usize, db: usize, a: &[DMatrix<C64>; 2], b: &[DMatrix<C64>; 2]) -> f64 {
    let k0 = alice_operator(rho, da, db, &(&b[0] + &b[1]));
    let k1 = alice_operator(rho, da, db, &(&b[0] - &b[1]));
    ((&a[0] * k0).trace() + (&a[1] * k1).trace()).re
}

/// Maximum CHSH over binary projective measurements on a bipartite state.
/// Qubit observables are restricted to `n·σ` (both outcomes possible).
///
/// Alternating sweeps: with Bob fixed, Alice's best observables are read
/// off `K = tr_B[ρ(I ⊗ (B0 ± B1))]` (its sign, or for qubits the direction
/// of its Bloch part), and symmetrically for Bob. Each sweep
/// cannot decrease the value. The best of [`RESTARTS`] seeded random starts
/// is returned.
pub fn maximize_chsh(rho: &DensityOperator) -> Result<ChshOptimum> {
    maximize_chsh_seeded(rho, 0x5eed)
}

pub fn maximize_chsh_seeded(rho: &DensityOperator, seed: u64) -> Result<ChshOptimum> {
    let dims = rho.shape().dims();
    if dims.len() != 2 {
        return Err(Error::InvalidShape(format!("bipartite state expected, got dims {dims:?}")));
    }
    let (da, db) = (dims[0], dims[1]);
    let m = rho.matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, [DMatrix<C64>; 2], [DMatrix<C64>; 2])> = None;
    for _ in 0..RESTARTS {
        let mut b = [random_observable(db, &mut rng), random_observable(db, &mut rng)];
        let mut a = [random_observable(da, &mut rng), random_observable(da, &mut rng)];
        let mut value = chsh_of(m, da, db, &a, &b);
        for _ in 0..MAX_SWEEPS {
            a = [
                best_response(&alice_operator(m, da, db, &(&b[0] + &b[1])), &a[0]),
                best_response(&alice_operator(m, da, db, &(&b[0] - &b[1])), &a[1]),
            ];
            b = [
                best_response(&bob_operator(m, da, db, &(&a[0] + &a[1])), &b[0]),
                best_response(&bob_operator(m, da, db, &(&a[0] - &a[1])), &b[1]),
            ];
            let next = chsh_of(m, da, db, &a, &b);
            let done = next - value < SWEEP_TOL;
            value = value.max(next);
            if done {
                break;
            }
        }
        if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
            best = Some((value, a, b));
        }
    }
    let (value, a, b) = best.expect("at least one restart");
    let settings = if da == 2 && db == 2 {
        a.iter().chain(b.iter()).map(|o| bloch_angles(&bloch_vector(o))).collect()
    } else {
        Vec::new()
    };
    Ok(ChshOptimum { value, settings })
}

fn bloch_vector(o: &DMatrix<C64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| 0.5 * (o * pauli(i)).trace().re)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    /// Smallest visibility with value above the criterion; `None` if the
    /// criterion is not reached inside the bracket.
    pub threshold: Option<f64>,
    pub criterion: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Bisection for the smallest `v` in `bracket` with `f(v) > criterion`.
///
/// `f` must be nondecreasing; this is spot-checked on five evenly spaced
/// points and a violation is an error.
pub fn visibility_threshold(mut f: impl FnMut(f64) -> Result<f64>, criterion: f64, bracket: (f64, f64)) -> Result<VisibilityResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty bracket {bracket:?}")));
    }
    let mut evaluations = 0;
    let mut prev = f64::NEG_INFINITY;
    let mut at_hi = 0.0;
    for k in 0..5 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = f(v)?;
        evaluations += 1;
        if y < prev - 1e-9 {
            return Err(Error::InvalidParameter(format!("experiment is not monotone in v near {v}")));
        }
        prev = y;
        at_hi = y;
    }
    let result = |threshold, evaluations| VisibilityResult { threshold, criterion, bracket, evaluations };
    if at_hi <= criterion {
        return Ok(result(None, evaluations));
    }
    if f(lo)? > criterion {
        return Ok(result(Some(lo), evaluations + 1));
    }
    evaluations += 1;
    while hi - lo >= 1e-4 {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if f(mid)? > criterion {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(result(Some(0.5 * (lo + hi)), evaluations))
}

/// Two-qubit Werner state of visibility `v`: its maximal CHSH.
pub fn pair_experiment(v: f64) -> Result<f64> {
    horodecki_chsh_max(&make_werner(&make_epr(2)?, v)?)
}

/// Both copies of a GHZ(θ) source with white noise `v`: the largest
/// outcome-adapted activated CHSH over the six tests.
pub fn inflation_experiment(theta: f64, v: f64, single: Option<Povm>) -> Result<f64> {
    let src = SourceState::Mixed(make_werner(&make_ghz(3, theta, 2)?, v)?);
    let cases = tripartite_cases(&tripartite_inflation(), single, None)?;
    max_adapted_chsh(&cases, &src)
}

/// Chain of `n − 1` noisy GHZ_n(π/4) copies: the largest post-selected
/// end-to-end CHSH.
pub fn chain_experiment(n: usize, v: f64) -> Result<f64> {
    let src = SourceState::Mixed(make_werner(&make_ghz(n, std::f64::consts::FRAC_PI_4, 2)?, v)?);
    let cases = [QuantumCase::defaults("chain", chain_inflation(n)?)];
    max_adapted_chsh(&cases, &src)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSearch {
    pub theta: f64,
    pub phi: f64,
    pub epr_count: usize,
    pub total: usize,
}

/// Grid search over a common Bloch direction for every conditioned qubit
/// party, maximizing the number of EPR-flagged outcomes summed over the
/// six tests. Joint parties keep the Bell basis.
pub fn search_projections(source: &SourceState, steps: usize) -> Result<ProjectionSearch> {
    if steps < 2 {
        return Err(Error::InvalidParameter("grid needs at least two steps".into()));
    }
    let base = tripartite_inflation();
    let mut best: Option<ProjectionSearch> = None;
    for i in 0..=steps {
        let theta = std::f64::consts::PI * i as f64 / steps as f64;
        for j in 0..2 * steps {
            let phi = std::f64::consts::PI * j as f64 / steps as f64;
            let single = projective_from_bloch(theta, phi);
            let mut count = 0;
            let mut total = 0;
            for case in tripartite_cases(&base, Some(single.clone()), None)? {
                let proj = Projections { conditioned: case.proj.conditioned.clone(), joint: case.proj.joint.clone() };
                let c = count_epr_outcomes(&case.net, source, &proj, EPR_TOL)?;
                count += c.count;
                total += c.total;
            }
            if best.as_ref().is_none_or(|b| count > b.epr_count) {
                best = Some(ProjectionSearch { theta, phi, epr_count: count, total });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::make_pair;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    #[test]
    fn optimizer_examples() {
        let epr = DensityOperator::from(&make_epr(2).unwrap());
        assert_abs_diff_eq!(maximize_chsh(&epr).unwrap().value, 2.0 * SQRT_2, epsilon = 1e-6);
        let prod = DensityOperator::from(&make_pair(0.0));
        assert_abs_diff_eq!(maximize_chsh(&prod).unwrap().value, 2.0, epsilon = 1e-6);
        let w = make_werner(&make_epr(2).unwrap(), 0.8).unwrap();
        assert_abs_diff_eq!(maximize_chsh(&w).unwrap().value, 0.8 * 2.0 * SQRT_2, epsilon = 1e-6);
        assert_eq!(maximize_chsh(&epr).unwrap().settings.len(), 4);
    }

    #[test]
    fn werner_pair_threshold() {
        let r = visibility_threshold(pair_experiment, 2.0, (0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(r.threshold.unwrap(), 1.0 / SQRT_2, epsilon = 1e-3);
        let none = visibility_threshold(pair_experiment, 3.0, (0.0, 1.0)).unwrap();
        assert!(none.threshold.is_none());
    }

    #[test]
    fn non_monotone_family_is_rejected() {
        assert!(visibility_threshold(|v| Ok((v - 0.5).abs()), 0.1, (0.0, 1.0)).is_err());
    }

    #[test]
    fn projection_search_finds_x_basis_counts() {
        let src = SourceState::Pure(make_ghz(3, std::f64::consts::FRAC_PI_4, 2).unwrap());
        let r = search_projections(&src, 2).unwrap();
        assert_eq!(r.total, 96);
        assert!(r.epr_count >= 48);
    }
}

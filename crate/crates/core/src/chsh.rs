//! The CHSH expression and outcome-adapted measurement settings.
//!
//! Sign convention: `CHSH = E00 + E01 + E10 − E11` with
//! `E_xy = Σ_ab (−1)^(a+b) P(ab|xy)`.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::born::{joint_distribution, joint_distribution_pure, ConditionalDistribution};
use crate::error::{Error, Result};
use crate::measurement::{binary_from_observable, bloch_observable, horodecki_settings, projective_along, MeasurementAssignment};
use crate::network::SourceState;
use crate::tensor::{c, DensityOperator, StateVector, C64, ZERO};

/// Slack allowed on `|E| ≤ 1` and similar bounds.
pub const BOUND_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChshSettings {
    /// Given distribution, no settings chosen here.
    Given,
    /// Qubit Bloch directions for Alice's and Bob's two settings.
    Bloch { alice: [[f64; 3]; 2], bob: [[f64; 3]; 2] },
    /// Qubit settings embedded in `blocks` two-dimensional Schmidt blocks.
    SchmidtBlocks { blocks: usize, alice: Vec<[[f64; 3]; 2]>, bob: Vec<[[f64; 3]; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub value: f64,
    pub settings: ChshSettings,
    pub correlators: [[f64; 2]; 2],
}

fn check_chsh_shape(p: &ConditionalDistribution) -> Result<()> {
    if p.settings() != [2, 2] || p.outcomes() != [2, 2] {
        return Err(Error::InvalidDistribution(format!(
            "CHSH needs two parties with 2 settings and 2 outcomes, got settings {:?} outcomes {:?}",
            p.settings(),
            p.outcomes()
        )));
    }
    Ok(())
}

/// `E(x, y) = Σ_ab (−1)^(a+b) P(ab|xy)`.
pub fn correlator(p: &ConditionalDistribution, x: usize, y: usize) -> Result<f64> {
    check_chsh_shape(p)?;
    if x > 1 || y > 1 {
        return Err(Error::InvalidParameter(format!("settings ({x}, {y}) out of range")));
    }
    Ok(p.get(&[x, y], &[0, 0]) - p.get(&[x, y], &[0, 1]) - p.get(&[x, y], &[1, 0]) + p.get(&[x, y], &[1, 1]))
}

fn correlators(p: &ConditionalDistribution) -> Result<[[f64; 2]; 2]> {
    let mut e = [[0.0; 2]; 2];
    for (x, row) in e.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            *v = correlator(p, x, y)?;
        }
    }
    Ok(e)
}

pub fn chsh_value(p: &ConditionalDistribution) -> Result<ChshReport> {
    let e = correlators(p)?;
    Ok(ChshReport { value: e[0][0] + e[0][1] + e[1][0] - e[1][1], settings: ChshSettings::Given, correlators: e })
}

/// Largest of the eight CHSH variants obtained by relabelling inputs and
/// outputs: `max_k |ΣE − 2E_k|`.
pub fn chsh_max_variant(p: &ConditionalDistribution) -> Result<f64> {
    let e = correlators(p)?;
    let s: f64 = e.iter().flatten().sum();
    Ok(e.iter().flatten().map(|&ek| (s - 2.0 * ek).abs()).fold(0.0, f64::max))
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn qubit_assignment(alice: &[Vector3<f64>; 2], bob: &[Vector3<f64>; 2]) -> MeasurementAssignment {
    MeasurementAssignment::new(vec![
        alice.iter().map(projective_along).collect(),
        bob.iter().map(projective_along).collect(),
    ])
    .expect("qubit settings")
}

/// CHSH of `state` with settings chosen for it: the Horodecki-optimal pair
/// for two qubits, and for pure `d × d` states the optimal qubit settings
/// inside consecutive pairs of Schmidt vectors (`+1` on a leftover vector).
pub fn adapted_chsh(state: &SourceState) -> Result<ChshReport> {
    let dims = state.dims().to_vec();
    if dims.len() != 2 {
        return Err(Error::InvalidShape(format!("activated pair expected, got dims {dims:?}")));
    }
    if dims == [2, 2] {
        let rho = state.to_density();
        let (a, b) = horodecki_settings(&rho)?;
        let m = qubit_assignment(&a, &b);
        let p = match state {
            SourceState::Pure(s) => joint_distribution_pure(s, &m)?,
            SourceState::Mixed(r) => joint_distribution(r, &m)?,
        };
        let mut r = chsh_value(&p)?;
        r.settings = ChshSettings::Bloch { alice: [arr(&a[0]), arr(&a[1])], bob: [arr(&b[0]), arr(&b[1])] };
        return Ok(r);
    }
    match state {
        SourceState::Pure(s) => schmidt_block_chsh(s),
        SourceState::Mixed(_) => Err(Error::Unsupported(format!("adapted settings for mixed states of dims {dims:?}"))),
    }
}

fn schmidt_block_chsh(psi: &StateVector) -> Result<ChshReport> {
    let dims = psi.shape().dims();
    let d = dims[0];
    if dims[1] != d {
        return Err(Error::Unsupported(format!("Schmidt-block settings need equal dims, got {dims:?}")));
    }
    let m = DMatrix::from_fn(d, d, |r, col| psi.amplitudes()[r * d + col]);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    // ψ = Σ_k s_k u_k ⊗ w_k with w_k the k-th row of v_t
    let alice_basis: Vec<DVector<C64>> = order.iter().map(|&k| u.column(k).into_owned()).collect();
    let bob_basis: Vec<DVector<C64>> = order.iter().map(|&k| vt.row(k).transpose()).collect();
    let s: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();

    let blocks = d / 2;
    let mut alice_obs = [DMatrix::<C64>::zeros(d, d), DMatrix::<C64>::zeros(d, d)];
    let mut bob_obs = alice_obs.clone();
    let (mut alice_dirs, mut bob_dirs) = (Vec::new(), Vec::new());
    for blk in 0..blocks {
        let (s0, s1) = (s[2 * blk], s[2 * blk + 1]);
        let (a, b) = if s0 * s0 + s1 * s1 > 1e-24 {
            let q = StateVector::from_real(vec![2, 2], &[s0, 0.0, 0.0, s1])?;
            horodecki_settings(&DensityOperator::from(&q))?
        } else {
            ([Vector3::z(), Vector3::z()], [Vector3::z(), Vector3::z()])
        };
        for x in 0..2 {
            embed(&mut alice_obs[x], &bloch_observable(&a[x]), &alice_basis[2 * blk..2 * blk + 2]);
            embed(&mut bob_obs[x], &bloch_observable(&b[x]), &bob_basis[2 * blk..2 * blk + 2]);
        }
        alice_dirs.push([arr(&a[0]), arr(&a[1])]);
        bob_dirs.push([arr(&b[0]), arr(&b[1])]);
    }
    if d % 2 == 1 {
        let one = DMatrix::from_element(1, 1, c(1.0));
        for x in 0..2 {
            embed(&mut alice_obs[x], &one, &alice_basis[d - 1..]);
            embed(&mut bob_obs[x], &one, &bob_basis[d - 1..]);
        }
    }
    let settings = vec![
        alice_obs.iter().map(binary_from_observable).collect::<Result<Vec<_>>>()?,
        bob_obs.iter().map(binary_from_observable).collect::<Result<Vec<_>>>()?,
    ];
    let p = joint_distribution_pure(psi, &MeasurementAssignment::new(settings)?)?;
    let mut r = chsh_value(&p)?;
    r.settings = ChshSettings::SchmidtBlocks { blocks, alice: alice_dirs, bob: bob_dirs };
    Ok(r)
}

/// `target += Σ_ij op_ij |basis_i⟩⟨basis_j|`.
fn embed(target: &mut DMatrix<C64>, op: &DMatrix<C64>, basis: &[DVector<C64>]) {
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            if op[(i, j)] != ZERO {
                *target += bi * bj.adjoint() * op[(i, j)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{horodecki_chsh_max, projective_from_bloch};
    use crate::states::{make_epr, make_pair, make_werner};
    use crate::tensor::{tensor_product, SystemShape};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn dist(f: impl Fn(usize, usize, usize, usize) -> f64) -> ConditionalDistribution {
        ConditionalDistribution::from_fn(vec![2, 2], vec![2, 2], |x, a| f(x[0], x[1], a[0], a[1])).unwrap()
    }

    fn epr_optimal() -> ConditionalDistribution {
        let m = MeasurementAssignment::new(vec![
            vec![projective_from_bloch(0.0, 0.0), projective_from_bloch(FRAC_PI_2, 0.0)],
            vec![projective_from_bloch(FRAC_PI_4, 0.0), projective_from_bloch(-FRAC_PI_4, 0.0)],
        ])
        .unwrap();
        joint_distribution_pure(&make_epr(2).unwrap(), &m).unwrap()
    }

    #[test]
    fn correlator_examples() {
        let corr = dist(|_, _, a, b| if a == b { 0.5 } else { 0.0 });
        assert_abs_diff_eq!(correlator(&corr, 0, 0).unwrap(), 1.0);
        let uni = dist(|_, _, _, _| 0.25);
        assert_abs_diff_eq!(correlator(&uni, 1, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(correlator(&epr_optimal(), 0, 0).unwrap(), 1.0 / SQRT_2, epsilon = 1e-14);
        let wrong = ConditionalDistribution::from_fn(vec![2, 2], vec![2, 3], |_, _| 1.0 / 6.0).unwrap();
        assert!(correlator(&wrong, 0, 0).is_err());
    }

    #[test]
    fn chsh_examples() {
        let pr = dist(|x, y, a, b| if (a ^ b) == (x & y) { 0.5 } else { 0.0 });
        assert_abs_diff_eq!(chsh_value(&pr).unwrap().value, 4.0);
        let det = dist(|_, _, a, b| if a == 0 && b == 0 { 1.0 } else { 0.0 });
        assert_abs_diff_eq!(chsh_value(&det).unwrap().value, 2.0);
        assert_abs_diff_eq!(chsh_value(&epr_optimal()).unwrap().value, 2.0 * SQRT_2, epsilon = 1e-14);
        // a = x, b = 0: E = (−1)^x, so 1 + 1 − 1 − (−1)
        let ax = dist(|x, _, a, b| if a == x && b == 0 { 1.0 } else { 0.0 });
        assert_abs_diff_eq!(chsh_value(&ax).unwrap().correlators.iter().flatten().sum::<f64>(), 0.0);
        assert_abs_diff_eq!(chsh_value(&ax).unwrap().value, 2.0);
        assert_abs_diff_eq!(chsh_max_variant(&ax).unwrap(), 2.0);
    }

    #[test]
    fn adapted_matches_horodecki() {
        for state in [make_pair(0.3), make_pair(FRAC_PI_4), make_pair(1.2)] {
            let rho = DensityOperator::from(&state);
            let r = adapted_chsh(&SourceState::Pure(state)).unwrap();
            assert_abs_diff_eq!(r.value, horodecki_chsh_max(&rho).unwrap(), epsilon = 1e-9);
        }
        let w = make_werner(&make_epr(2).unwrap(), 0.8).unwrap();
        let r = adapted_chsh(&SourceState::Mixed(w)).unwrap();
        assert_abs_diff_eq!(r.value, 0.8 * 2.0 * SQRT_2, epsilon = 1e-9);
    }

    #[test]
    fn schmidt_blocks_reach_tsirelson_on_embedded_bell_pairs() {
        // (|0⟩|1⟩) ⊗ EPR regrouped as two ququarts
        let zero = StateVector::basis(SystemShape::new(vec![2]).unwrap(), 0).unwrap();
        let one = StateVector::basis(SystemShape::new(vec![2]).unwrap(), 1).unwrap();
        let s = tensor_product(&tensor_product(&zero, &one), &make_epr(2).unwrap());
        let s = s.permute(&[0, 2, 1, 3]).unwrap().regroup(vec![4, 4]).unwrap();
        let r = adapted_chsh(&SourceState::Pure(s)).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 * SQRT_2, epsilon = 1e-9);
        let r = adapted_chsh(&SourceState::Pure(make_epr(4).unwrap())).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 * SQRT_2, epsilon = 1e-9);
        // odd rank: one block plus a +1 remainder
        let r = adapted_chsh(&SourceState::Pure(make_epr(3).unwrap())).unwrap();
        assert_abs_diff_eq!(r.value, (2.0 * 2.0 * SQRT_2 + 2.0) / 3.0, epsilon = 1e-9);
    }
}

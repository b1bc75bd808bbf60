//! Post-selected states of the activated parties (generalized
//! entanglement swapping).
//!
//! The network route conditions each source copy on its own conditioned
//! parties, tensors the copies' open parties together and only then applies
//! the joint measurements, so no global state of the whole inflation is
//! formed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::born::{tuples, ZERO_PROBABILITY};
use crate::error::{Error, Result};
use crate::measurement::{default_joint_measurement, x_basis, Povm};
use crate::network::{InflatedNetwork, SourceState};
use crate::tensor::{
    apply_effect_last, contract_last_matrix, contract_last_vector, permute_matrix, permute_vector,
    schmidt_coefficients, DensityOperator, StateVector, SystemShape, C64,
};

/// Default tolerance of the maximally-entangled test.
pub const EPR_TOL: f64 = 1e-9;

/// Post-selected state of the kept subsystems. `state` is `None` when the
/// outcome has probability below [`ZERO_PROBABILITY`].
#[derive(Clone, Debug)]
pub struct Collapse {
    pub probability: f64,
    pub state: Option<SourceState>,
}

#[derive(Clone, Debug)]
enum Effect {
    Ket(DVector<C64>),
    Op(DMatrix<C64>),
}

#[derive(Clone, Debug)]
enum Raw {
    Ket(DVector<C64>),
    Op(DMatrix<C64>),
}

impl Raw {
    fn into_op(self) -> DMatrix<C64> {
        match self {
            Raw::Ket(v) => &v * v.adjoint(),
            Raw::Op(m) => m,
        }
    }

    fn kron(&self, other: &Raw) -> Raw {
        match (self, other) {
            (Raw::Ket(a), Raw::Ket(b)) => Raw::Ket(a.kronecker(b)),
            _ => Raw::Op(self.clone().into_op().kronecker(&other.clone().into_op())),
        }
    }
}

/// Contract the subsystem groups in `proj` and return the unnormalized
/// remainder on the other subsystems (original order) with their dims.
fn project_out(data: Raw, dims: &[usize], proj: &[(Vec<usize>, &Effect)]) -> (Raw, Vec<usize>) {
    let hit: Vec<usize> = proj.iter().flat_map(|(g, _)| g.iter().copied()).collect();
    let keep: Vec<usize> = (0..dims.len()).filter(|i| !hit.contains(i)).collect();
    let perm: Vec<usize> = keep.iter().chain(&hit).copied().collect();
    let identity = perm.iter().enumerate().all(|(k, &p)| k == p);
    let needs_op = proj.iter().any(|(_, e)| matches!(e, Effect::Op(_)));
    let mut data = match (data, needs_op) {
        (Raw::Ket(v), true) => Raw::Op(&v * v.adjoint()),
        (d, _) => d,
    };
    if !identity {
        data = match data {
            Raw::Ket(v) => Raw::Ket(permute_vector(dims, &v, &perm)),
            Raw::Op(m) => Raw::Op(permute_matrix(dims, &m, &perm)),
        };
    }
    for (_, e) in proj.iter().rev() {
        data = match (data, e) {
            (Raw::Ket(v), Effect::Ket(k)) => Raw::Ket(contract_last_vector(&v, k)),
            (Raw::Op(m), Effect::Ket(k)) => Raw::Op(contract_last_matrix(&m, k)),
            (Raw::Op(m), Effect::Op(o)) => Raw::Op(apply_effect_last(&m, o)),
            (Raw::Ket(_), Effect::Op(_)) => unreachable!("kets promoted above"),
        };
    }
    (data, keep.iter().map(|&i| dims[i]).collect())
}

fn finish(data: Raw, dims: Vec<usize>) -> Result<Collapse> {
    let shape = SystemShape::new(dims)?;
    match data {
        Raw::Ket(v) => {
            let p = v.norm_squared();
            if p < ZERO_PROBABILITY {
                return Ok(Collapse { probability: p, state: None });
            }
            let s = StateVector::from_unnormalized(shape, v)?;
            Ok(Collapse { probability: p, state: Some(SourceState::Pure(s)) })
        }
        Raw::Op(m) => {
            let p = m.trace().re;
            if p < ZERO_PROBABILITY {
                return Ok(Collapse { probability: p.max(0.0), state: None });
            }
            let rho = DensityOperator::from_unnormalized(shape, m)?;
            Ok(Collapse { probability: p, state: Some(SourceState::Mixed(rho)) })
        }
    }
}

fn effect_of(povm: &Povm, outcome: usize) -> Result<Effect> {
    if outcome >= povm.outcomes() {
        return Err(Error::InvalidParameter(format!("outcome {outcome} of a {}-outcome measurement", povm.outcomes())));
    }
    Ok(match povm.rank_one_vectors() {
        Ok(v) => Effect::Ket(v[outcome].clone()),
        Err(_) => Effect::Op(povm.effect(outcome).clone()),
    })
}

/// `(⊗⟨e_i| ⊗ I_rest)|global⟩`, normalized. `kets[i]` is the bra applied to
/// subsystem `i`, `None` for kept subsystems.
pub fn collapsed_state(global: &StateVector, kets: &[Option<DVector<C64>>]) -> Result<Collapse> {
    let dims = global.shape().dims();
    if kets.len() != dims.len() {
        return Err(Error::DimensionMismatch { expected: dims.len(), found: kets.len() });
    }
    let effects: Vec<(usize, Effect)> = kets
        .iter()
        .enumerate()
        .filter_map(|(i, k)| k.clone().map(|k| (i, Effect::Ket(k))))
        .collect();
    for (i, e) in &effects {
        if let Effect::Ket(k) = e {
            if k.len() != dims[*i] {
                return Err(Error::DimensionMismatch { expected: dims[*i], found: k.len() });
            }
        }
    }
    if effects.len() == dims.len() {
        return Err(Error::InvalidSubsystems("nothing left after projection".into()));
    }
    let proj: Vec<(Vec<usize>, &Effect)> = effects.iter().map(|(i, e)| (vec![*i], e)).collect();
    let (data, rest) = project_out(Raw::Ket(global.amplitudes().clone()), dims, &proj);
    finish(data, rest)
}

/// Measurements applied to the conditioning nodes of a network.
#[derive(Clone, Debug)]
pub struct Projections {
    /// One per conditioned party, in [`InflatedNetwork::conditioned`] order.
    pub conditioned: Vec<Povm>,
    /// One per joint group.
    pub joint: Vec<Povm>,
}

impl Projections {
    /// X-type basis on single parties, Bell-type basis on joint groups.
    pub fn defaults(net: &InflatedNetwork) -> Self {
        let d = net.parties[0].dim;
        Self::uniform(net, x_basis(d), default_joint_measurement(d))
    }

    pub fn uniform(net: &InflatedNetwork, single: Povm, joint: Povm) -> Self {
        Self { conditioned: vec![single; net.conditioned().len()], joint: vec![joint; net.joint_groups.len()] }
    }

    /// Outcome cardinalities of the conditioning nodes, in node order.
    pub fn cardinalities(&self) -> Vec<usize> {
        self.conditioned.iter().chain(&self.joint).map(Povm::outcomes).collect()
    }

    fn check(&self, net: &InflatedNetwork) -> Result<()> {
        let cond = net.conditioned();
        if self.conditioned.len() != cond.len() || self.joint.len() != net.joint_groups.len() {
            return Err(Error::InvalidMeasurement("projection count does not match the network".into()));
        }
        for (p, &i) in self.conditioned.iter().zip(&cond) {
            if p.local_dim() != net.parties[i].dim {
                return Err(Error::DimensionMismatch { expected: net.parties[i].dim, found: p.local_dim() });
            }
        }
        for (p, g) in self.joint.iter().zip(&net.joint_groups) {
            let d = net.parties[g[0]].dim * net.parties[g[1]].dim;
            if p.local_dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.local_dim() });
            }
        }
        Ok(())
    }
}

/// State of the activated parties after the conditioning nodes report
/// `outcome` (node order: conditioned singles, then joint groups).
pub fn collapse_network(
    net: &InflatedNetwork,
    source: &SourceState,
    proj: &Projections,
    outcome: &[usize],
) -> Result<Collapse> {
    net.check_source(source.dims())?;
    proj.check(net)?;
    let cond = net.conditioned();
    if outcome.len() != cond.len() + net.joint_groups.len() {
        return Err(Error::DimensionMismatch { expected: cond.len() + net.joint_groups.len(), found: outcome.len() });
    }
    let k = net.source_size();
    let src_dims = net.source_dims();
    let base = match source {
        SourceState::Pure(s) => Raw::Ket(s.amplitudes().clone()),
        SourceState::Mixed(r) => Raw::Op(r.matrix().clone()),
    };
    let mut effects = Vec::with_capacity(cond.len());
    for (j, &party) in cond.iter().enumerate() {
        effects.push((party, effect_of(&proj.conditioned[j], outcome[j])?));
    }
    // per copy: condition locally, keep open parties in slot order
    let mut open: Vec<usize> = Vec::new();
    let mut acc: Option<Raw> = None;
    for copy in 0..net.copies {
        let local: Vec<(Vec<usize>, &Effect)> = effects
            .iter()
            .filter(|(p, _)| net.parties[*p].copy == copy)
            .map(|(p, e)| (vec![p - copy * k], e))
            .collect();
        let (data, _) = project_out(base.clone(), &src_dims, &local);
        open.extend((0..k).map(|s| copy * k + s).filter(|p| !cond.contains(p)));
        acc = Some(match acc {
            None => data,
            Some(a) => a.kron(&data),
        });
    }
    let data = acc.expect("at least one copy");
    let open_dims: Vec<usize> = open.iter().map(|&p| net.parties[p].dim).collect();
    let joint_effects: Vec<Effect> = proj
        .joint
        .iter()
        .zip(&outcome[cond.len()..])
        .map(|(p, &o)| effect_of(p, o))
        .collect::<Result<_>>()?;
    let groups: Vec<(Vec<usize>, &Effect)> = net
        .joint_groups
        .iter()
        .zip(&joint_effects)
        .map(|(g, e)| (g.iter().map(|p| open.iter().position(|q| q == p).expect("joint party is open")).collect(), e))
        .collect();
    let (data, rest) = project_out(data, &open_dims, &groups);
    finish(data, rest)
}

/// One conditioning tuple and what it leaves on the activated parties.
#[derive(Clone, Debug)]
pub struct OutcomeCollapse {
    pub tuple: Vec<usize>,
    pub collapse: Collapse,
}

/// Collapse for every conditioning tuple, in lexicographic tuple order.
pub fn enumerate_collapses(net: &InflatedNetwork, source: &SourceState, proj: &Projections) -> Result<Vec<OutcomeCollapse>> {
    let card = proj.cardinalities();
    let all: Vec<Vec<usize>> = tuples(&card).collect();
    all.into_par_iter()
        .map(|tuple| {
            let collapse = collapse_network(net, source, proj, &tuple)?;
            Ok(OutcomeCollapse { tuple, collapse })
        })
        .collect()
}

/// Whether a bipartite pure state is maximally entangled up to local
/// unitaries on a support of even Schmidt rank: its nonzero Schmidt
/// coefficients are all equal. For qubits this means both equal `1/√2`.
pub fn is_epr_pure(psi: &StateVector, tol: f64) -> Result<bool> {
    if psi.shape().len() != 2 {
        return Err(Error::InvalidShape("EPR test needs a bipartite state".into()));
    }
    let s = schmidt_coefficients(psi, &[0])?;
    let nonzero: Vec<f64> = s.iter().copied().filter(|&x| x > tol).collect();
    let r = nonzero.len();
    if r < 2 || r % 2 == 1 {
        return Ok(false);
    }
    let target = 1.0 / (r as f64).sqrt();
    Ok(nonzero.iter().all(|&x| (x - target).abs() <= tol))
}

/// EPR test for either representation. A mixed state qualifies only if it
/// is pure within `tol`.
pub fn is_epr(state: &SourceState, tol: f64) -> Result<bool> {
    match state {
        SourceState::Pure(p) => is_epr_pure(p, tol),
        SourceState::Mixed(r) => match dominant_vector(r, tol)? {
            Some(v) => is_epr_pure(&v, tol),
            None => Ok(false),
        },
    }
}

/// The leading eigenvector of `rho` if its eigenvalue is at least `1 − tol`.
pub fn dominant_vector(rho: &DensityOperator, tol: f64) -> Result<Option<StateVector>> {
    let eig = SymmetricEigen::new(rho.matrix().clone());
    let k = eig.eigenvalues.imax();
    if eig.eigenvalues[k] < 1.0 - tol {
        return Ok(None);
    }
    Ok(Some(StateVector::from_unnormalized(rho.shape().clone(), eig.eigenvectors.column(k).into_owned())?))
}

#[derive(Clone, Debug)]
pub struct EprOutcome {
    pub tuple: Vec<usize>,
    pub probability: f64,
    pub epr: bool,
}

#[derive(Clone, Debug)]
pub struct EprCount {
    pub count: usize,
    pub total: usize,
    pub outcomes: Vec<EprOutcome>,
}

/// Count the conditioning tuples whose collapsed activated pair is
/// maximally entangled.
pub fn count_epr_outcomes(net: &InflatedNetwork, source: &SourceState, proj: &Projections, tol: f64) -> Result<EprCount> {
    let all = enumerate_collapses(net, source, proj)?;
    let mut outcomes = Vec::with_capacity(all.len());
    for oc in all {
        let epr = match &oc.collapse.state {
            Some(s) => is_epr(s, tol)?,
            None => false,
        };
        outcomes.push(EprOutcome { tuple: oc.tuple, probability: oc.collapse.probability, epr });
    }
    let count = outcomes.iter().filter(|o| o.epr).count();
    Ok(EprCount { count, total: outcomes.len(), outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::bell_basis;
    use crate::network::{chain_inflation, tripartite_inflation, TestSpec};
    use crate::states::{make_epr, make_ghz, make_werner};
    use crate::tensor::{fidelity, max_entangled_fidelity, tensor_product};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn ket(p: &Povm, k: usize) -> Option<DVector<C64>> {
        Some(p.rank_one_vectors().unwrap()[k].clone())
    }

    #[test]
    fn textbook_swapping() {
        // qubits 0-1 and 2-3 are EPR pairs; Bell measurement on (1, 2)
        let e = make_epr(2).unwrap();
        let g = tensor_product(&e, &e).permute(&[0, 3, 1, 2]).unwrap().regroup(vec![2, 2, 4]).unwrap();
        let out = collapsed_state(&g, &[None, None, ket(&bell_basis(), 0)]).unwrap();
        assert_abs_diff_eq!(out.probability, 0.25, epsilon = 1e-14);
        let Some(SourceState::Pure(s)) = out.state else { panic!("pure state expected") };
        assert_abs_diff_eq!(fidelity(&s, &e).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ghz_swap_is_maximally_entangled() {
        for th in [FRAC_PI_4, PI / 3.0] {
            let net = tripartite_inflation();
            let src = make_ghz(3, th, 2).unwrap().into();
            let out = collapse_network(&net, &src, &Projections::defaults(&net), &[0, 0, 0]).unwrap();
            let Some(SourceState::Pure(s)) = out.state else { panic!() };
            let f = max_entangled_fidelity(&s, &[0]).unwrap();
            if th == FRAC_PI_4 {
                assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
            }
            assert!(out.probability > 0.0);
        }
        // Ψ outcomes are maximally entangled for any θ
        let net = tripartite_inflation();
        let src = make_ghz(3, PI / 3.0, 2).unwrap().into();
        let out = collapse_network(&net, &src, &Projections::defaults(&net), &[0, 0, 2]).unwrap();
        let Some(SourceState::Pure(s)) = out.state else { panic!() };
        assert_abs_diff_eq!(max_entangled_fidelity(&s, &[0]).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn network_route_matches_global_route() {
        let src = make_ghz(3, 0.37, 2).unwrap();
        for t in TestSpec::all() {
            let net = tripartite_inflation().for_test(&t).unwrap();
            let proj = Projections::defaults(&net);
            let global = net.global_pure(&src).unwrap();
            for tuple in tuples(&proj.cardinalities()) {
                let a = collapse_network(&net, &src.clone().into(), &proj, &tuple).unwrap();
                let kets = vec![
                    None,
                    None,
                    ket(&proj.conditioned[0], tuple[0]),
                    ket(&proj.conditioned[1], tuple[1]),
                    ket(&proj.joint[0], tuple[2]),
                ];
                let b = collapsed_state(&global, &kets).unwrap();
                assert_abs_diff_eq!(a.probability, b.probability, epsilon = 1e-13);
                if let (Some(SourceState::Pure(x)), Some(SourceState::Pure(y))) = (a.state, b.state) {
                    assert_abs_diff_eq!(fidelity(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixed_route_matches_pure_route() {
        let g = make_ghz(3, 0.9, 2).unwrap();
        let rho = crate::tensor::DensityOperator::from(&g);
        let net = tripartite_inflation();
        let proj = Projections::defaults(&net);
        for tuple in tuples(&proj.cardinalities()) {
            let a = collapse_network(&net, &g.clone().into(), &proj, &tuple).unwrap();
            let b = collapse_network(&net, &rho.clone().into(), &proj, &tuple).unwrap();
            assert_abs_diff_eq!(a.probability, b.probability, epsilon = 1e-13);
            match (a.state, b.state) {
                (Some(x), Some(y)) => assert!((x.to_density().matrix() - y.to_density().matrix()).camax() < 1e-12),
                (None, None) => {}
                _ => panic!("definedness differs"),
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let net = tripartite_inflation();
        let src: SourceState = make_werner(&make_ghz(3, 0.5, 2).unwrap(), 0.7).unwrap().into();
        let all = enumerate_collapses(&net, &src, &Projections::defaults(&net)).unwrap();
        let total: f64 = all.iter().map(|o| o.collapse.probability).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn epr_counts() {
        for th in [PI / 8.0, FRAC_PI_4, 3.0 * PI / 8.0] {
            let src: SourceState = make_ghz(3, th, 2).unwrap().into();
            for t in TestSpec::all() {
                let net = tripartite_inflation().for_test(&t).unwrap();
                let n = count_epr_outcomes(&net, &src, &Projections::defaults(&net), EPR_TOL).unwrap();
                assert_eq!(n.total, 16);
                assert!(n.count >= 8, "θ={th} {}: {}", t.name(), n.count);
            }
        }
        let zero: SourceState = StateVector::basis(SystemShape::uniform(3, 2).unwrap(), 0).unwrap().into();
        let net = tripartite_inflation();
        assert_eq!(count_epr_outcomes(&net, &zero, &Projections::defaults(&net), EPR_TOL).unwrap().count, 0);
    }

    #[test]
    fn chain_swaps_to_the_ends() {
        let net = chain_inflation(4).unwrap();
        let src: SourceState = make_ghz(4, FRAC_PI_4, 2).unwrap().into();
        let n = count_epr_outcomes(&net, &src, &Projections::defaults(&net), EPR_TOL).unwrap();
        let realized = n.outcomes.iter().filter(|o| o.probability > ZERO_PROBABILITY).count();
        assert!(realized > 0);
        assert_eq!(n.count, realized);
    }

    #[test]
    fn epr_test_rejects_partial_entanglement() {
        let s = crate::states::make_pair(0.3);
        assert!(!is_epr_pure(&s, EPR_TOL).unwrap());
        assert!(is_epr_pure(&make_epr(2).unwrap(), EPR_TOL).unwrap());
        assert!(is_epr_pure(&make_epr(4).unwrap(), EPR_TOL).unwrap());
        assert!(!is_epr_pure(&make_epr(3).unwrap(), EPR_TOL).unwrap());
    }
}

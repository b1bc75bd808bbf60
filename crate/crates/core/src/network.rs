//! Inflated networks: copies of one source wired into a Bell test.
//!
//! Parties are indexed copy-major: party `copy * k + slot` is observer
//! `slot` of source copy `copy`, where `k` is the number of observers per
//! source. Measurements and distributions use the *node* order instead:
//!
//! 1. activated parties, copy-major;
//! 2. conditioned single parties, copy-major;
//! 3. joint groups, in the order listed, each acting on its two members
//!    (first member as the slow factor).
//!
//! For a tripartite test `W_{U;V}` the node order is therefore
//! `(W, Ŵ, U, Û, VV̂)` and conditioning tuples read `(u, û, vv̂)`.

use serde::{Deserialize, Serialize};

use crate::born::{joint_distribution, joint_distribution_pure, ConditionalDistribution};
use crate::error::{Error, Result};
use crate::measurement::MeasurementAssignment;
use crate::tensor::{tensor_power, DensityOperator, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Two settings; its statistics are audited.
    Activated,
    /// One setting; its outcome is post-selected on.
    Conditioned,
    /// Measured together with a party of another copy.
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Party {
    pub name: String,
    pub copy: usize,
    pub slot: usize,
    pub dim: usize,
    pub role: Role,
    pub settings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceCopy {
    pub id: String,
    pub parties: Vec<usize>,
}

/// One Bell-type test `W_{U;V}` on the tripartite inflation, by observer
/// slot (A = 0, B = 1, C = 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpec {
    pub conditioned: usize,
    pub joint: usize,
    pub activated: usize,
}

const SLOT_NAMES: [&str; 3] = ["A", "B", "C"];

impl TestSpec {
    /// `W_{U;V}`: `U` measured singly in both copies, `V` jointly across
    /// copies, the remaining observer activated.
    pub fn new(conditioned: usize, joint: usize) -> Result<Self> {
        if conditioned > 2 || joint > 2 || conditioned == joint {
            return Err(Error::InvalidParameter(format!("invalid test roles U={conditioned} V={joint}")));
        }
        Ok(Self { conditioned, joint, activated: 3 - conditioned - joint })
    }

    /// The six tests in the order W_AB, W_BA, W_AC, W_CA, W_BC, W_CB.
    pub fn all() -> [TestSpec; 6] {
        [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)].map(|(u, v)| TestSpec::new(u, v).expect("fixed roles"))
    }

    pub fn name(&self) -> String {
        format!("W_{}{}", SLOT_NAMES[self.conditioned], SLOT_NAMES[self.joint])
    }

    /// Parses `W_BC`, `BC` or `W_{B;C}`.
    pub fn parse(s: &str) -> Result<Self> {
        let letters: Vec<usize> = s
            .trim_start_matches("W_")
            .chars()
            .filter_map(|ch| SLOT_NAMES.iter().position(|n| n.starts_with(ch)))
            .collect();
        match letters.as_slice() {
            [u, v] => Self::new(*u, *v),
            _ => Err(Error::InvalidParameter(format!("unknown test {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Tripartite,
    Chain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflatedNetwork {
    pub topology: Topology,
    pub sources: Vec<SourceCopy>,
    pub parties: Vec<Party>,
    pub joint_groups: Vec<[usize; 2]>,
    pub copies: usize,
    /// The test this network is wired for (tripartite only).
    pub test: Option<TestSpec>,
    pub tests: Vec<TestSpec>,
}

/// A measured unit: a single party or a joint group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub parties: Vec<usize>,
    pub dim: usize,
    pub settings: usize,
}

/// Source state for the quantum realization.
#[derive(Clone, Debug)]
pub enum SourceState {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl SourceState {
    pub fn dims(&self) -> &[usize] {
        match self {
            SourceState::Pure(s) => s.shape().dims(),
            SourceState::Mixed(r) => r.shape().dims(),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            SourceState::Pure(s) => s.into(),
            SourceState::Mixed(r) => r.clone(),
        }
    }
}

impl From<StateVector> for SourceState {
    fn from(s: StateVector) -> Self {
        SourceState::Pure(s)
    }
}

impl From<DensityOperator> for SourceState {
    fn from(r: DensityOperator) -> Self {
        SourceState::Mixed(r)
    }
}

fn hat(name: &str) -> String {
    format!("{name}\u{0302}")
}

/// Two copies S, Ŝ of a tripartite qubit source, wired for `W_{B;C}`.
pub fn tripartite_inflation() -> InflatedNetwork {
    tripartite_inflation_with_dims([2, 2, 2])
}

/// Tripartite inflation for a source with the given local dimensions.
pub fn tripartite_inflation_with_dims(dims: [usize; 3]) -> InflatedNetwork {
    let mut parties = Vec::with_capacity(6);
    for copy in 0..2 {
        for (slot, &dim) in dims.iter().enumerate() {
            let base = SLOT_NAMES[slot];
            let name = if copy == 0 { base.to_string() } else { hat(base) };
            parties.push(Party { name, copy, slot, dim, role: Role::Conditioned, settings: 1 });
        }
    }
    let base = InflatedNetwork {
        topology: Topology::Tripartite,
        sources: vec![
            SourceCopy { id: "S".into(), parties: vec![0, 1, 2] },
            SourceCopy { id: hat("S"), parties: vec![3, 4, 5] },
        ],
        parties,
        joint_groups: Vec::new(),
        copies: 2,
        test: None,
        tests: TestSpec::all().to_vec(),
    };
    base.for_test(&TestSpec::new(1, 2).expect("W_BC")).expect("tripartite layout")
}

/// Chain of `n − 1` copies of an `n`-partite source. Copy `i` (1-based)
/// shares observer `A_{i+1}` with copy `i + 1` through a joint
/// measurement; `A_1` of the first copy and `A_n` of the last are
/// activated; every other observer is conditioned.
pub fn chain_inflation(n: usize) -> Result<InflatedNetwork> {
    chain_inflation_with_dim(n, 2)
}

pub fn chain_inflation_with_dim(n: usize, d: usize) -> Result<InflatedNetwork> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("chain inflation needs n >= 3, got {n}")));
    }
    let copies = n - 1;
    let joint_groups: Vec<[usize; 2]> = (0..copies - 1).map(|i| [i * n + i + 1, (i + 1) * n + i + 1]).collect();
    let ends = [0, copies * n - 1];
    let mut parties = Vec::with_capacity(n * copies);
    let mut sources = Vec::with_capacity(copies);
    for copy in 0..copies {
        sources.push(SourceCopy { id: format!("S{}", copy + 1), parties: (copy * n..(copy + 1) * n).collect() });
        for slot in 0..n {
            let idx = copy * n + slot;
            let role = if ends.contains(&idx) {
                Role::Activated
            } else if joint_groups.iter().any(|g| g.contains(&idx)) {
                Role::Joint
            } else {
                Role::Conditioned
            };
            let settings = if role == Role::Activated { 2 } else { 1 };
            parties.push(Party { name: format!("A{}({})", slot + 1, copy + 1), copy, slot, dim: d, role, settings });
        }
    }
    Ok(InflatedNetwork { topology: Topology::Chain, sources, parties, joint_groups, copies, test: None, tests: Vec::new() })
}

impl InflatedNetwork {
    /// Parties per source copy.
    pub fn source_size(&self) -> usize {
        self.sources[0].parties.len()
    }

    /// Local dimensions of one source copy.
    pub fn source_dims(&self) -> Vec<usize> {
        self.sources[0].parties.iter().map(|&p| self.parties[p].dim).collect()
    }

    pub fn party_index(&self, copy: usize, slot: usize) -> usize {
        copy * self.source_size() + slot
    }

    /// Rewire the tripartite inflation for another test.
    pub fn for_test(&self, test: &TestSpec) -> Result<InflatedNetwork> {
        if self.topology != Topology::Tripartite {
            return Err(Error::Unsupported("tests apply to the tripartite inflation only".into()));
        }
        let mut net = self.clone();
        for p in &mut net.parties {
            let role = if p.slot == test.activated {
                Role::Activated
            } else if p.slot == test.joint {
                Role::Joint
            } else {
                Role::Conditioned
            };
            p.role = role;
            p.settings = if role == Role::Activated { 2 } else { 1 };
        }
        net.joint_groups = vec![[test.joint, 3 + test.joint]];
        net.test = Some(*test);
        Ok(net)
    }

    fn with_role(&self, role: Role) -> Vec<usize> {
        (0..self.parties.len()).filter(|&i| self.parties[i].role == role).collect()
    }

    pub fn activated(&self) -> Vec<usize> {
        self.with_role(Role::Activated)
    }

    pub fn conditioned(&self) -> Vec<usize> {
        self.with_role(Role::Conditioned)
    }

    /// Measured units in node order (see module docs).
    pub fn nodes(&self) -> Vec<Node> {
        let single = |i: usize| Node { parties: vec![i], dim: self.parties[i].dim, settings: self.parties[i].settings };
        let mut nodes: Vec<Node> = self.activated().into_iter().map(single).collect();
        nodes.extend(self.conditioned().into_iter().map(single));
        nodes.extend(self.joint_groups.iter().map(|g| Node {
            parties: g.to_vec(),
            dim: self.parties[g[0]].dim * self.parties[g[1]].dim,
            settings: 1,
        }));
        nodes
    }

    pub fn node_dims(&self) -> Vec<usize> {
        self.nodes().iter().map(|n| n.dim).collect()
    }

    /// Node indices that are post-selected on (everything but the
    /// activated parties).
    pub fn conditioning_nodes(&self) -> std::ops::Range<usize> {
        self.activated().len()..self.nodes().len()
    }

    /// Permutation taking the copy-major party order to node order.
    pub fn layout_permutation(&self) -> Vec<usize> {
        self.nodes().into_iter().flat_map(|n| n.parties).collect()
    }

    pub fn global_pure(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_source(psi.shape().dims())?;
        tensor_power(psi, self.copies).permute(&self.layout_permutation())?.regroup(self.node_dims())
    }

    pub fn global_mixed(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        self.check_source(rho.shape().dims())?;
        tensor_power(rho, self.copies).permute(&self.layout_permutation())?.regroup(self.node_dims())
    }

    pub(crate) fn check_source(&self, dims: &[usize]) -> Result<()> {
        let want = self.source_dims();
        if dims != want.as_slice() {
            return Err(Error::InvalidShape(format!("source dims {dims:?}, network expects {want:?}")));
        }
        Ok(())
    }

    /// Born-rule distribution over the nodes, sources independent.
    pub fn realize_quantum(&self, source: &SourceState, m: &MeasurementAssignment) -> Result<ConditionalDistribution> {
        let want: Vec<usize> = self.nodes().iter().map(|n| n.settings).collect();
        if m.settings_cardinality() != want {
            return Err(Error::InvalidMeasurement(format!(
                "node settings {:?}, expected {want:?}",
                m.settings_cardinality()
            )));
        }
        match source {
            SourceState::Pure(psi) => joint_distribution_pure(&self.global_pure(psi)?, m),
            SourceState::Mixed(rho) => joint_distribution(&self.global_mixed(rho)?, m),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn check_invariants(&self) -> Result<()> {
        let mut owner = vec![None; self.parties.len()];
        for (s, src) in self.sources.iter().enumerate() {
            for &p in &src.parties {
                if owner[p].replace(s).is_some() {
                    return Err(Error::InvalidParameter(format!("party {p} in two sources")));
                }
            }
        }
        if owner.iter().any(Option::is_none) {
            return Err(Error::InvalidParameter("party without source".into()));
        }
        for g in &self.joint_groups {
            if self.parties[g[0]].copy == self.parties[g[1]].copy {
                return Err(Error::InvalidParameter(format!("joint group {g:?} within one copy")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::born::{condition_on, tuples, validate_no_signalling, Fixed};
    use crate::measurement::{bell_basis, computational_basis, projective_from_bloch, x_basis};
    use crate::states::make_ghz;
    use crate::tensor::{fidelity, max_entangled_fidelity};
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn six_tests_and_96_tuples() {
        let net = tripartite_inflation();
        assert_eq!(net.tests.len(), 6);
        let names: Vec<String> = net.tests.iter().map(|t| t.name()).collect();
        assert_eq!(names, ["W_AB", "W_BA", "W_AC", "W_CA", "W_BC", "W_CB"]);
        let mut total = 0;
        for t in &net.tests {
            let n = net.for_test(t).unwrap();
            let card: usize = n.nodes()[n.conditioning_nodes()].iter().map(|x| x.dim).product();
            assert_eq!(card, 16);
            total += card;
        }
        assert_eq!(total, 96);
    }

    #[test]
    fn bc_test_activates_a() {
        let t = TestSpec::parse("W_BC").unwrap();
        assert_eq!(t.activated, 0);
        let net = tripartite_inflation().for_test(&t).unwrap();
        let act: Vec<&str> = net.activated().iter().map(|&i| net.parties[i].name.as_str()).collect();
        assert_eq!(act, ["A", "A\u{0302}"]);
        assert_eq!(net.joint_groups, vec![[2, 5]]);
        assert_eq!(TestSpec::parse("W_{C;A}").unwrap().name(), "W_CA");
        assert!(TestSpec::parse("W_BB").is_err());
    }

    #[test]
    fn chain_shapes() {
        let c3 = chain_inflation(3).unwrap();
        assert_eq!((c3.copies, c3.joint_groups.len(), c3.parties.len()), (2, 1, 6));
        let c4 = chain_inflation(4).unwrap();
        assert_eq!((c4.copies, c4.joint_groups.len(), c4.parties.len()), (3, 2, 12));
        for n in 3..8 {
            let c = chain_inflation(n).unwrap();
            assert_eq!(c.joint_groups.len(), n - 2);
            c.check_invariants().unwrap();
            let act = c.activated();
            assert_eq!(act, vec![0, c.parties.len() - 1]);
            for (i, p) in c.parties.iter().enumerate() {
                assert_eq!(p.settings, if act.contains(&i) { 2 } else { 1 });
            }
        }
        assert!(chain_inflation(2).is_err());
        // A2 of copy 1 pairs with A2 of copy 2
        assert_eq!(c4.joint_groups, vec![[1, 5], [6, 10]]);
    }

    #[test]
    fn network_json_lists_structure() {
        let v: serde_json::Value = serde_json::from_str(&tripartite_inflation().to_json()).unwrap();
        for key in ["sources", "parties", "joint_groups", "copies"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    fn node_measurements(net: &InflatedNetwork, single: impl Fn() -> Vec<crate::measurement::Povm>) -> MeasurementAssignment {
        let nodes = net.nodes();
        let m = nodes
            .iter()
            .map(|n| if n.parties.len() == 2 { vec![bell_basis()] } else if n.settings == 2 { single() } else { vec![x_basis(2)] })
            .collect();
        MeasurementAssignment::new(m).unwrap()
    }

    #[test]
    fn z_everywhere_is_product_of_copies() {
        let net = tripartite_inflation();
        let g = make_ghz(3, FRAC_PI_4, 2).unwrap();
        assert_eq!(net.global_pure(&g).unwrap().shape().total_dim(), 64);
        // every party measured singly in Z: regroup the joint node as two qubits
        let z = || vec![computational_basis(2), computational_basis(2)];
        let nodes = net.nodes();
        let m: Vec<_> = nodes
            .iter()
            .map(|n| match (n.parties.len(), n.settings) {
                (2, _) => vec![computational_basis(4)],
                (_, 2) => z(),
                _ => vec![computational_basis(2)],
            })
            .collect();
        let p = net.realize_quantum(&g.clone().into(), &MeasurementAssignment::new(m).unwrap()).unwrap();
        // node order A Â B B̂ (CĈ); copy 0 = (A, B, C), copy 1 = (Â, B̂, Ĉ)
        for x in tuples(&[2, 2, 1, 1, 1]) {
            for a in tuples(&[2, 2, 2, 2, 4]) {
                let (c0, c1) = (a[4] / 2, a[4] % 2);
                let s0 = a[0] == a[2] && a[2] == c0;
                let s1 = a[1] == a[3] && a[3] == c1;
                let want = if s0 && s1 { 0.25 } else { 0.0 };
                assert!((p.get(&x, &a) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn born_output_is_no_signalling() {
        let net = tripartite_inflation();
        let g = make_ghz(3, 0.4, 2).unwrap();
        let m = node_measurements(&net, || vec![projective_from_bloch(0.3, 0.1), projective_from_bloch(1.7, 2.0)]);
        let p = net.realize_quantum(&g.into(), &m).unwrap();
        assert!(validate_no_signalling(&p) < 1e-10);
    }

    #[test]
    fn product_sources_give_product_activated_statistics() {
        let zero = StateVector::basis(crate::tensor::SystemShape::uniform(3, 2).unwrap(), 3).unwrap();
        for t in TestSpec::all() {
            let net = tripartite_inflation().for_test(&t).unwrap();
            let m = node_measurements(&net, || vec![projective_from_bloch(0.9, 0.2), projective_from_bloch(2.1, 1.0)]);
            let p = net.realize_quantum(&zero.clone().into(), &m).unwrap();
            for ct in tuples(&[2, 2, 4]) {
                let fixed: Vec<Fixed> = ct.iter().enumerate().map(|(k, &o)| Fixed::new(k + 2, o)).collect();
                let Some(q) = condition_on(&p, &fixed).unwrap().conditional else { continue };
                let m0 = q.marginal(&[0]).unwrap();
                let m1 = q.marginal(&[1]).unwrap();
                for x in tuples(&[2, 2]) {
                    for a in tuples(&[2, 2]) {
                        let prod = m0.get(&x[..1], &a[..1]) * m1.get(&x[1..], &a[1..]);
                        assert!((q.get(&x, &a) - prod).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn swapping_on_the_bc_test() {
        // b = b̂ = +, cĉ = Φ⁺ leaves A Â maximally entangled
        let net = tripartite_inflation();
        let g = make_ghz(3, FRAC_PI_4, 2).unwrap();
        let global = net.global_pure(&g).unwrap();
        let v = global.amplitudes();
        // contract nodes B, B̂ with |+⟩ and CĈ with Φ⁺
        let plus = x_basis(2).rank_one_vectors().unwrap()[0].clone();
        let phi = bell_basis().rank_one_vectors().unwrap()[0].clone();
        let mut w = crate::tensor::contract_last_vector(v, &phi);
        w = crate::tensor::contract_last_vector(&w, &plus);
        w = crate::tensor::contract_last_vector(&w, &plus);
        let pair = StateVector::from_unnormalized(crate::tensor::SystemShape::uniform(2, 2).unwrap(), w).unwrap();
        assert!((max_entangled_fidelity(&pair, &[0]).unwrap() - 1.0).abs() < 1e-12);
        let epr = crate::states::make_epr(2).unwrap();
        assert!((fidelity(&pair, &epr).unwrap() - 1.0).abs() < 1e-12);
        let _ = PI;
    }
}

//! No-signalling boxes, biseparable box sources and their wiring into
//! inflated networks.
//!
//! Every box has binary inputs and outputs per party. A network party
//! interacts with its share of a source copy through a *response*: an input
//! choice and a relabelling of the output. A joint node queries its two
//! shares one after the other, choosing the second input from the first
//! output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::born::{tuples, validate_no_signalling, ConditionalDistribution};
use crate::error::{Error, Result};
use crate::lp::maximize;
use crate::network::InflatedNetwork;
use crate::states::bipartitions;

/// NS residual allowed for a box.
pub const NS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConditionalDistribution", into = "ConditionalDistribution")]
pub struct NsBox(ConditionalDistribution);

impl TryFrom<ConditionalDistribution> for NsBox {
    type Error = Error;

    fn try_from(p: ConditionalDistribution) -> Result<Self> {
        NsBox::new(p)
    }
}

impl From<NsBox> for ConditionalDistribution {
    fn from(b: NsBox) -> Self {
        b.0
    }
}

impl NsBox {
    pub fn new(p: ConditionalDistribution) -> Result<Self> {
        let r = validate_no_signalling(&p);
        if r >= NS_TOL {
            return Err(Error::InvalidDistribution(format!("signalling residual {r:e}")));
        }
        Ok(Self(p))
    }

    pub fn distribution(&self) -> &ConditionalDistribution {
        &self.0
    }

    pub fn parties(&self) -> usize {
        self.0.parties()
    }

    pub fn get(&self, x: &[usize], a: &[usize]) -> f64 {
        self.0.get(x, a)
    }
}

fn binary_box(n: usize, f: impl FnMut(&[usize], &[usize]) -> f64) -> NsBox {
    NsBox::new(ConditionalDistribution::from_fn(vec![2; n], vec![2; n], f).expect("valid table")).expect("no-signalling")
}

/// `P(ab|xy) = 1/2` iff `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ`.
pub fn make_pr_type_box(alpha: usize, beta: usize, gamma: usize) -> NsBox {
    binary_box(2, |x, a| {
        let rhs = (x[0] & x[1]) ^ (alpha & x[0]) ^ (beta & x[1]) ^ gamma;
        if (a[0] ^ a[1]) == (rhs & 1) {
            0.5
        } else {
            0.0
        }
    })
}

pub fn make_pr_box() -> NsBox {
    make_pr_type_box(0, 0, 0)
}

/// Local deterministic box: Alice outputs `a[x]`, Bob outputs `b[y]`.
pub fn make_deterministic_box(a: [usize; 2], b: [usize; 2]) -> NsBox {
    binary_box(2, |x, o| if o[0] == a[x[0]] && o[1] == b[x[1]] { 1.0 } else { 0.0 })
}

/// The 16 local deterministic boxes, `a0 a1 b0 b1` read as a binary number.
pub fn deterministic_vertices() -> Vec<NsBox> {
    (0..16)
        .map(|k| make_deterministic_box([k >> 3 & 1, k >> 2 & 1], [k >> 1 & 1, k & 1]))
        .collect()
}

/// The 24 extremal boxes of the two-party binary NS polytope.
pub fn extremal_boxes() -> Vec<NsBox> {
    let mut v = deterministic_vertices();
    for k in 0..8 {
        v.push(make_pr_type_box(k >> 2 & 1, k >> 1 & 1, k & 1));
    }
    v
}

/// `q·PR + (1 − q)·uniform` with `q = chsh / 4`, whose CHSH value is `chsh`.
pub fn make_isotropic_box(chsh: f64) -> Result<NsBox> {
    if !(0.0..=4.0).contains(&chsh) {
        return Err(Error::InvalidParameter(format!("isotropic CHSH value {chsh} outside [0, 4]")));
    }
    let q = chsh / 4.0;
    let pr = make_pr_box();
    Ok(binary_box(2, |x, a| q * pr.get(x, a) + (1.0 - q) * 0.25))
}

fn check_chsh_box(p: &ConditionalDistribution) -> Result<()> {
    if p.settings() != [2, 2] || p.outcomes() != [2, 2] {
        return Err(Error::InvalidDistribution("expected a two-party binary box".into()));
    }
    Ok(())
}

/// Smallest `p` with `P = p·Q + (1 − p)·L`, `Q` no-signalling and `L`
/// local: one minus the largest total weight of deterministic vertices
/// that fits under `P` entrywise.
pub fn lp_min_p(p: &ConditionalDistribution) -> Result<f64> {
    check_chsh_box(p)?;
    let r = validate_no_signalling(p);
    if r >= 1e-9 {
        return Err(Error::InvalidDistribution(format!("box signals (residual {r:e})")));
    }
    let verts = deterministic_vertices();
    let mut a = Vec::with_capacity(16);
    let mut b = Vec::with_capacity(16);
    for x in tuples(&[2, 2]) {
        for o in tuples(&[2, 2]) {
            a.push(verts.iter().map(|v| v.get(&x, &o)).collect());
            b.push(p.get(&x, &o).max(0.0));
        }
    }
    let sol = maximize(&[1.0; 16], &a, &b)?;
    Ok((1.0 - sol.value).clamp(0.0, 1.0))
}

/// Weights on the simplex with a randomly chosen concentration: `sharp`
/// = 1 is uniform on the simplex, larger values favour few dominant terms.
fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let sharp = [1.0, 4.0, 16.0][rng.gen_range(0..3)];
    let w: Vec<f64> = (0..k).map(|_| (-(1.0 - rng.gen::<f64>()).ln()).powf(sharp)).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.into_iter().map(|v| v / s).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

/// Random convex mixture of the 24 extremal two-party boxes.
pub fn random_bipartite_box(rng: &mut ChaCha8Rng) -> NsBox {
    let ext = extremal_boxes();
    let w = random_weights(rng, ext.len());
    binary_box(2, |x, a| ext.iter().zip(&w).map(|(b, wi)| wi * b.get(x, a)).sum())
}

/// Random one-party box `p(a|x)`.
pub fn random_local_box(rng: &mut ChaCha8Rng) -> NsBox {
    let p0 = [rng.gen::<f64>(), rng.gen::<f64>()];
    binary_box(1, |x, a| if a[0] == 0 { p0[x[0]] } else { 1.0 - p0[x[0]] })
}

/// Random `m`-party box. For `m ≥ 3` it is a wiring of bipartite boxes on
/// neighbouring members; each member feeds its input to its boxes and
/// outputs the XOR of their outputs.
pub fn random_group_box(m: usize, rng: &mut ChaCha8Rng) -> NsBox {
    match m {
        0 => panic!("empty group"),
        1 => random_local_box(rng),
        2 => random_bipartite_box(rng),
        _ => {
            let links: Vec<NsBox> = (0..m - 1).map(|_| random_bipartite_box(rng)).collect();
            xor_chain(m, &links)
        }
    }
}

/// Members `i, i+1` share `links[i]`; member output = XOR of its links.
fn xor_chain(m: usize, links: &[NsBox]) -> NsBox {
    let mut table = vec![0.0; (1 << m) * (1 << m)];
    for (xi, x) in tuples(&vec![2; m]).enumerate() {
        for bits in tuples(&vec![2; 2 * (m - 1)]) {
            let mut p = 1.0;
            let mut out = vec![0usize; m];
            for (i, l) in links.iter().enumerate() {
                let (o0, o1) = (bits[2 * i], bits[2 * i + 1]);
                p *= l.get(&[x[i], x[i + 1]], &[o0, o1]);
                out[i] ^= o0;
                out[i + 1] ^= o1;
            }
            if p > 0.0 {
                let ai = out.iter().fold(0, |acc, &b| acc * 2 + b);
                table[xi * (1 << m) + ai] += p;
            }
        }
    }
    NsBox::new(ConditionalDistribution::new(vec![2; m], vec![2; m], table).expect("valid table")).expect("wirings of NS boxes are NS")
}

/// One term `p_I · P_I ⊗ P_Ī` of a biseparable source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub group: Vec<usize>,
    pub group_box: NsBox,
    pub rest: Vec<usize>,
    pub rest_box: NsBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiseparableNsSource {
    pub parties: usize,
    pub terms: Vec<Term>,
}

impl BiseparableNsSource {
    pub fn new(parties: usize, terms: Vec<Term>) -> Result<Self> {
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > 1e-12 || terms.iter().any(|t| t.weight < 0.0) {
            return Err(Error::InvalidParameter(format!("term weights sum to {total}")));
        }
        for t in &terms {
            let mut all: Vec<usize> = t.group.iter().chain(&t.rest).copied().collect();
            all.sort_unstable();
            if all != (0..parties).collect::<Vec<_>>() || t.group.is_empty() || t.rest.is_empty() {
                return Err(Error::InvalidParameter(format!("{:?} | {:?} is not a bipartition", t.group, t.rest)));
            }
            if t.group_box.parties() != t.group.len() || t.rest_box.parties() != t.rest.len() {
                return Err(Error::InvalidParameter("box size does not match its side of the cut".into()));
            }
        }
        Ok(Self { parties, terms })
    }

    /// Source with a single term.
    pub fn single(parties: usize, group: Vec<usize>, group_box: NsBox, rest_box: NsBox) -> Result<Self> {
        let rest = (0..parties).filter(|i| !group.contains(i)).collect();
        Self::new(parties, vec![Term { weight: 1.0, group, group_box, rest, rest_box }])
    }

    /// Random weights over every bipartition, each side a random box.
    pub fn random(parties: usize, rng: &mut ChaCha8Rng) -> Self {
        let cuts = bipartitions(parties);
        let w = random_weights(rng, cuts.len());
        let terms = cuts
            .into_iter()
            .zip(w)
            .map(|(group, weight)| {
                let rest: Vec<usize> = (0..parties).filter(|i| !group.contains(i)).collect();
                let group_box = random_group_box(group.len(), rng);
                let rest_box = random_group_box(rest.len(), rng);
                Term { weight, group, group_box, rest, rest_box }
            })
            .collect();
        Self::new(parties, terms).expect("weights normalized")
    }

    /// The source as one box over all parties, party order `0..n`.
    pub fn joint_box(&self) -> NsBox {
        let n = self.parties;
        let mut table = vec![0.0; (1 << n) * (1 << n)];
        for t in &self.terms {
            let prod = t.group_box.distribution().product(t.rest_box.distribution());
            let order: Vec<usize> = t.group.iter().chain(&t.rest).copied().collect();
            let perm: Vec<usize> = (0..n).map(|p| order.iter().position(|&q| q == p).expect("bipartition")).collect();
            let p = prod.permute_parties(&perm).expect("permutation");
            for (v, e) in table.iter_mut().zip(p.table()) {
                *v += t.weight * e;
            }
        }
        NsBox::new(ConditionalDistribution::new(vec![2; n], vec![2; n], table).expect("mixture")).expect("mixture of NS boxes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let src: Self = serde_json::from_str(s).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Self::new(src.parties, src.terms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relabel {
    Keep,
    Flip,
    Zero,
    One,
}

impl Relabel {
    pub fn apply(self, bit: usize) -> usize {
        match self {
            Relabel::Keep => bit,
            Relabel::Flip => 1 - bit,
            Relabel::Zero => 0,
            Relabel::One => 1,
        }
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        [Relabel::Keep, Relabel::Flip, Relabel::Zero, Relabel::One][rng.gen_range(0..4)]
    }
}

/// Input fed to the share and relabelling of its output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalResponse {
    pub input: usize,
    pub relabel: Relabel,
}

impl LocalResponse {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        Self { input: rng.gen_range(0..2), relabel: Relabel::random(rng) }
    }
}

/// Sequential query of a joint node's two shares. Member `first` is
/// queried with `input`; the other member gets `second_input[o₁]`; the
/// node outputs `output[o_first][o_second]` in `0..4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointResponse {
    pub first: usize,
    pub input: usize,
    pub second_input: [usize; 2],
    pub output: [[usize; 2]; 2],
}

impl JointResponse {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut out = || rng.gen_range(0..4);
        let output = [[out(), out()], [out(), out()]];
        Self {
            first: rng.gen_range(0..2),
            input: rng.gen_range(0..2),
            second_input: [rng.gen_range(0..2), rng.gen_range(0..2)],
            output,
        }
    }

    /// Output `2·o_first + o_second`, the box analogue of a two-bit Bell
    /// measurement.
    pub fn copy_both(first: usize, input: usize, second_input: usize) -> Self {
        Self { first, input, second_input: [second_input; 2], output: [[0, 1], [2, 3]] }
    }
}

/// Responses for every non-source node of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxResponses {
    /// Per activated party, one response per setting.
    pub activated: Vec<[LocalResponse; 2]>,
    pub conditioned: Vec<LocalResponse>,
    pub joint: Vec<JointResponse>,
}

impl BoxResponses {
    pub fn random(net: &InflatedNetwork, rng: &mut ChaCha8Rng) -> Self {
        let activated = net.activated().iter().map(|_| [LocalResponse::random(rng), LocalResponse::random(rng)]).collect();
        let conditioned = net.conditioned().iter().map(|_| LocalResponse::random(rng)).collect();
        let joint = net.joint_groups.iter().map(|_| JointResponse::random(rng)).collect();
        Self { activated, conditioned, joint }
    }

    /// Activated parties use input `x` unrelabelled, conditioned parties
    /// input 0, joint nodes report both outputs.
    pub fn plain(net: &InflatedNetwork) -> Self {
        let keep = |input| LocalResponse { input, relabel: Relabel::Keep };
        Self {
            activated: net.activated().iter().map(|_| [keep(0), keep(1)]).collect(),
            conditioned: net.conditioned().iter().map(|_| keep(0)).collect(),
            joint: net.joint_groups.iter().map(|_| JointResponse::copy_both(0, 0, 0)).collect(),
        }
    }
}

/// Distribution over the network's nodes (node order, see
/// [`crate::network`]) when copy `c` of the source is `copies[c]`.
/// Single nodes output one bit, joint nodes one of four values.
pub fn simulate_network(net: &InflatedNetwork, copies: &[&BiseparableNsSource], responses: &BoxResponses) -> Result<ConditionalDistribution> {
    if copies.len() != net.copies {
        return Err(Error::DimensionMismatch { expected: net.copies, found: copies.len() });
    }
    let k = net.source_size();
    if copies.iter().any(|s| s.parties != k) {
        return Err(Error::InvalidParameter(format!("sources must have {k} parties")));
    }
    let act = net.activated();
    let cond = net.conditioned();
    if responses.activated.len() != act.len() || responses.conditioned.len() != cond.len() || responses.joint.len() != net.joint_groups.len() {
        return Err(Error::InvalidParameter("responses do not match the network".into()));
    }
    let boxes: Vec<NsBox> = copies.iter().map(|s| s.joint_box()).collect();
    let n = net.parties.len();
    let settings: Vec<usize> = act.iter().map(|_| 2).chain(cond.iter().map(|_| 1)).chain(net.joint_groups.iter().map(|_| 1)).collect();
    let outcomes: Vec<usize> = act.iter().map(|_| 2).chain(cond.iter().map(|_| 2)).chain(net.joint_groups.iter().map(|_| 4)).collect();
    let na: usize = outcomes.iter().product();
    let mut table = vec![0.0; settings.iter().product::<usize>() * na];
    let mut input = vec![0usize; n];
    for (i, &p) in cond.iter().enumerate() {
        input[p] = responses.conditioned[i].input;
    }
    for (xi, xs) in tuples(&settings).enumerate() {
        for (j, &p) in act.iter().enumerate() {
            input[p] = responses.activated[j][xs[j]].input;
        }
        for raw in tuples(&vec![2; n]) {
            for (g, jr) in net.joint_groups.iter().zip(&responses.joint) {
                let (f, s) = (g[jr.first], g[1 - jr.first]);
                input[f] = jr.input;
                input[s] = jr.second_input[raw[f]];
            }
            let mut p = 1.0;
            for (c, b) in boxes.iter().enumerate() {
                p *= b.get(&input[c * k..(c + 1) * k], &raw[c * k..(c + 1) * k]);
                if p == 0.0 {
                    break;
                }
            }
            if p == 0.0 {
                continue;
            }
            let mut node_out = Vec::with_capacity(outcomes.len());
            for (j, &q) in act.iter().enumerate() {
                node_out.push(responses.activated[j][xs[j]].relabel.apply(raw[q]));
            }
            for (i, &q) in cond.iter().enumerate() {
                node_out.push(responses.conditioned[i].relabel.apply(raw[q]));
            }
            for (g, jr) in net.joint_groups.iter().zip(&responses.joint) {
                node_out.push(jr.output[raw[g[jr.first]]][raw[g[1 - jr.first]]]);
            }
            let ai = node_out.iter().zip(&outcomes).fold(0, |acc, (&o, &m)| acc * m + o);
            table[xi * na + ai] += p;
        }
    }
    ConditionalDistribution::new(settings, outcomes, table)
}

/// Activated-pair distribution for each conditioning tuple of a test.
/// Zero-probability tuples carry `None`.
pub fn simulate_inflated_test(
    net: &InflatedNetwork,
    source: &BiseparableNsSource,
    copy: &BiseparableNsSource,
    responses: &BoxResponses,
) -> Result<Vec<(Vec<usize>, crate::born::Conditioned)>> {
    let p = simulate_network(net, &[source, copy], responses)?;
    post_select(&p, net.activated().len())
}

/// Condition a node distribution on every tuple of its last nodes.
pub fn post_select(p: &ConditionalDistribution, activated: usize) -> Result<Vec<(Vec<usize>, crate::born::Conditioned)>> {
    let card = p.outcomes()[activated..].to_vec();
    tuples(&card)
        .map(|t| {
            let fixed: Vec<crate::born::Fixed> =
                t.iter().enumerate().map(|(k, &o)| crate::born::Fixed::new(activated + k, o)).collect();
            Ok((t, crate::born::condition_on(p, &fixed)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::{chsh_max_variant, chsh_value};
    use crate::network::{chain_inflation, tripartite_inflation, TestSpec};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn pr_box_examples() {
        let pr = make_pr_box();
        assert_abs_diff_eq!(chsh_value(pr.distribution()).unwrap().value, 4.0);
        assert!(validate_no_signalling(pr.distribution()) < 1e-14);
        let m = pr.distribution().marginal(&[0]).unwrap();
        assert_abs_diff_eq!(m.get(&[1], &[0]), 0.5);
    }

    #[test]
    fn deterministic_examples() {
        assert_abs_diff_eq!(chsh_value(make_deterministic_box([0, 1], [0, 0]).distribution()).unwrap().value, 2.0);
        assert_abs_diff_eq!(chsh_value(make_deterministic_box([0, 0], [0, 0]).distribution()).unwrap().value, 2.0);
        let verts = deterministic_vertices();
        assert_eq!(verts.len(), 16);
        for v in &verts {
            assert!(chsh_value(v.distribution()).unwrap().value.abs() <= 2.0 + 1e-12);
        }
        assert_eq!(extremal_boxes().len(), 24);
    }

    #[test]
    fn lp_examples() {
        assert_abs_diff_eq!(lp_min_p(make_pr_box().distribution()).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(lp_min_p(make_isotropic_box(3.0).unwrap().distribution()).unwrap(), 0.5, epsilon = 1e-9);
        for v in deterministic_vertices() {
            assert_abs_diff_eq!(lp_min_p(v.distribution()).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(lp_min_p(make_isotropic_box(2.0).unwrap().distribution()).unwrap(), 0.0, epsilon = 1e-9);
        assert!(make_isotropic_box(4.5).is_err());
    }

    #[test]
    fn isotropic_family_saturates_the_bound() {
        for k in 0..=8 {
            let r = 2.0 + 0.25 * k as f64;
            let b = make_isotropic_box(r).unwrap();
            let p = lp_min_p(b.distribution()).unwrap();
            assert_abs_diff_eq!(chsh_value(b.distribution()).unwrap().value, r, epsilon = 1e-12);
            assert_abs_diff_eq!(2.0 + 2.0 * p, r, epsilon = 1e-6);
        }
    }

    #[test]
    fn random_sources_are_valid_and_reproducible() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        for n in [3, 4] {
            let a = BiseparableNsSource::random(n, &mut r1);
            let b = BiseparableNsSource::random(n, &mut r2);
            assert_eq!(a, b);
            assert_eq!(a.terms.len(), (1 << (n - 1)) - 1);
            assert!(validate_no_signalling(a.joint_box().distribution()) < NS_TOL);
            let back = BiseparableNsSource::from_json(&a.to_json()).unwrap();
            assert_eq!(back.terms.len(), a.terms.len());
        }
    }

    #[test]
    fn deterministic_sources_give_deterministic_activated_pairs() {
        let det = |o: usize| binary_box(1, move |_, a| if a[0] == o { 1.0 } else { 0.0 });
        let pair = make_deterministic_box([1, 0], [0, 1]);
        let src = BiseparableNsSource::single(3, vec![0], det(1), pair).unwrap();
        let net = tripartite_inflation();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let resp = BoxResponses::random(&net, &mut rng);
            for (_, c) in simulate_inflated_test(&net, &src, &src, &resp).unwrap() {
                if let Some(q) = c.conditional {
                    assert!(q.table().iter().all(|&v| v.abs() < 1e-12 || (v - 1.0).abs() < 1e-12));
                    assert!(chsh_max_variant(&q).unwrap() <= 2.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn pr_on_bc_cut_stays_below_the_bound() {
        let local = binary_box(1, |_, _| 0.5);
        let src = BiseparableNsSource::single(3, vec![0], local, make_pr_box()).unwrap();
        for t in TestSpec::all() {
            let net = tripartite_inflation().for_test(&t).unwrap();
            // enumerate every joint response that reports both bits
            for first in 0..2 {
                for input in 0..2 {
                    for second in 0..2 {
                        let mut resp = BoxResponses::plain(&net);
                        resp.joint[0] = JointResponse::copy_both(first, input, second);
                        for (_, c) in simulate_inflated_test(&net, &src, &src, &resp).unwrap() {
                            if let Some(q) = c.conditional {
                                assert!(validate_no_signalling(&q) < NS_TOL);
                                assert!(chsh_max_variant(&q).unwrap() <= 2.5 + 1e-9);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn network_distribution_is_no_signalling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = chain_inflation(3).unwrap();
        let s = BiseparableNsSource::random(3, &mut rng);
        let resp = BoxResponses::random(&net, &mut rng);
        let p = simulate_network(&net, &[&s, &s], &resp).unwrap();
        assert!(validate_no_signalling(&p) < NS_TOL);
        assert_eq!(p.outcomes(), &[2, 2, 2, 2, 4]);
    }
}

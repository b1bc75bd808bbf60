//! Conditional outcome distributions and the Born rule.
//!
//! Tables are dense and lexicographic: the flat index of `(x⃗, a⃗)` is
//! `x_index * outcome_tuples + a_index`, where both tuple indices treat
//! party 0 as the slowest digit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measurement::{MeasurementAssignment, Povm};
use crate::tensor::{apply_effect_last, c, contract_last_vector, DensityOperator, StateVector, C64};

/// Entries may dip this far below zero from rounding.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Per-setting normalization tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Outcomes rarer than this cannot be conditioned on.
pub const ZERO_PROBABILITY: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DistributionFile", try_from = "DistributionFile")]
pub struct ConditionalDistribution {
    settings: Vec<usize>,
    outcomes: Vec<usize>,
    table: Vec<f64>,
}

/// Mixed-radix counter over a tuple of cardinalities, party 0 slowest.
pub fn tuples(card: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = card.iter().product();
    let mut cur = vec![0usize; card.len()];
    (0..total).map(move |k| {
        if k > 0 {
            for j in (0..card.len()).rev() {
                cur[j] += 1;
                if cur[j] < card[j] {
                    break;
                }
                cur[j] = 0;
            }
        }
        cur.clone()
    })
}

pub fn tuple_index(card: &[usize], t: &[usize]) -> usize {
    t.iter().zip(card).fold(0, |acc, (&v, &n)| acc * n + v)
}

impl ConditionalDistribution {
    pub fn new(settings: Vec<usize>, outcomes: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if settings.is_empty() || settings.len() != outcomes.len() {
            return Err(Error::InvalidDistribution("settings and outcomes must list every party".into()));
        }
        if settings.iter().chain(&outcomes).any(|&n| n == 0) {
            return Err(Error::InvalidDistribution("zero cardinality".into()));
        }
        let nx: usize = settings.iter().product();
        let na: usize = outcomes.iter().product();
        if table.len() != nx * na {
            return Err(Error::InvalidDistribution(format!("table has {} entries, expected {}", table.len(), nx * na)));
        }
        if let Some(p) = table.iter().find(|&&p| p < -NEGATIVE_TOL || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!("entry {p}")));
        }
        for x in 0..nx {
            let s: f64 = table[x * na..(x + 1) * na].iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidDistribution(format!("setting tuple {x} sums to {s}")));
            }
        }
        Ok(Self { settings, outcomes, table })
    }

    pub fn from_fn(settings: Vec<usize>, outcomes: Vec<usize>, mut f: impl FnMut(&[usize], &[usize]) -> f64) -> Result<Self> {
        let mut table = Vec::with_capacity(settings.iter().product::<usize>() * outcomes.iter().product::<usize>());
        for x in tuples(&settings) {
            for a in tuples(&outcomes) {
                table.push(f(&x, &a));
            }
        }
        Self::new(settings, outcomes, table)
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn outcome_tuples(&self) -> usize {
        self.outcomes.iter().product()
    }

    pub fn get(&self, x: &[usize], a: &[usize]) -> f64 {
        self.table[tuple_index(&self.settings, x) * self.outcome_tuples() + tuple_index(&self.outcomes, a)]
    }

    /// Marginal on `keep` (in the given order). The discarded parties'
    /// settings are fixed to 0, which is exact for no-signalling tables.
    pub fn marginal(&self, keep: &[usize]) -> Result<ConditionalDistribution> {
        check_parties(self.parties(), keep)?;
        let settings: Vec<usize> = keep.iter().map(|&i| self.settings[i]).collect();
        let outcomes: Vec<usize> = keep.iter().map(|&i| self.outcomes[i]).collect();
        let mut table = vec![0.0; settings.iter().product::<usize>() * outcomes.iter().product::<usize>()];
        let na_keep: usize = outcomes.iter().product();
        let mut x_full = vec![0usize; self.parties()];
        for xk in tuples(&settings) {
            for (slot, &i) in keep.iter().enumerate() {
                x_full[i] = xk[slot];
            }
            let xi = tuple_index(&self.settings, &x_full) * self.outcome_tuples();
            let base = tuple_index(&settings, &xk) * na_keep;
            for (ai, a) in tuples(&self.outcomes).enumerate() {
                let ak: Vec<usize> = keep.iter().map(|&i| a[i]).collect();
                table[base + tuple_index(&outcomes, &ak)] += self.table[xi + ai];
            }
        }
        Self::new(settings, outcomes, table)
    }

    /// Reorder parties: new party `k` is old party `perm[k]`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<ConditionalDistribution> {
        if perm.len() != self.parties() {
            return Err(Error::InvalidParameter("permutation length".into()));
        }
        check_parties(self.parties(), perm)?;
        let settings: Vec<usize> = perm.iter().map(|&p| self.settings[p]).collect();
        let outcomes: Vec<usize> = perm.iter().map(|&p| self.outcomes[p]).collect();
        let mut xo = vec![0; perm.len()];
        let mut ao = vec![0; perm.len()];
        Self::from_fn(settings, outcomes, |x, a| {
            for (k, &p) in perm.iter().enumerate() {
                xo[p] = x[k];
                ao[p] = a[k];
            }
            self.get(&xo, &ao)
        })
    }

    /// Independent parties side by side: `self` first.
    pub fn product(&self, other: &ConditionalDistribution) -> ConditionalDistribution {
        let settings = [self.settings.clone(), other.settings.clone()].concat();
        let outcomes = [self.outcomes.clone(), other.outcomes.clone()].concat();
        let n = self.parties();
        Self::from_fn(settings, outcomes, |x, a| self.get(&x[..n], &a[..n]) * other.get(&x[n..], &a[n..]))
            .expect("product of valid distributions")
    }

    /// `Σ w_k P_k` over tables of identical layout.
    pub fn mixture(parts: &[(f64, &ConditionalDistribution)]) -> Result<ConditionalDistribution> {
        let (_, first) = parts.first().ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let mut table = vec![0.0; first.table.len()];
        for (w, p) in parts {
            if p.settings != first.settings || p.outcomes != first.outcomes {
                return Err(Error::InvalidParameter("mixture of differently shaped tables".into()));
            }
            for (t, v) in table.iter_mut().zip(&p.table) {
                *t += w * v;
            }
        }
        Self::new(first.settings.clone(), first.outcomes.clone(), table)
    }

    pub fn to_csv(&self) -> String {
        let n = self.parties();
        let mut out = String::new();
        let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain((1..=n).map(|i| format!("a{i}"))).collect();
        let _ = writeln!(out, "{},p", header.join(","));
        let na = self.outcome_tuples();
        for (xi, x) in tuples(&self.settings).enumerate() {
            for (ai, a) in tuples(&self.outcomes).enumerate() {
                let cols: Vec<String> = x.iter().chain(&a).map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{},{}", cols.join(","), self.table[xi * na + ai]);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DistributionFile::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: DistributionFile = serde_json::from_str(s).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        f.try_into()
    }
}

/// On-disk layout shared by the JSON export and import.
#[derive(Clone, Serialize, Deserialize)]
struct DistributionFile {
    parties: usize,
    settings: Vec<usize>,
    outcomes: Vec<usize>,
    #[serde(default)]
    layout: String,
    table: Vec<f64>,
}

impl From<&ConditionalDistribution> for DistributionFile {
    fn from(p: &ConditionalDistribution) -> Self {
        Self {
            parties: p.parties(),
            settings: p.settings.clone(),
            outcomes: p.outcomes.clone(),
            layout: "p[x1..xn][a1..an], lexicographic, party 1 slowest".into(),
            table: p.table.clone(),
        }
    }
}

impl From<ConditionalDistribution> for DistributionFile {
    fn from(p: ConditionalDistribution) -> Self {
        (&p).into()
    }
}

impl TryFrom<DistributionFile> for ConditionalDistribution {
    type Error = Error;

    fn try_from(f: DistributionFile) -> Result<Self> {
        if f.parties != f.settings.len() {
            return Err(Error::InvalidDistribution("party count disagrees with settings".into()));
        }
        Self::new(f.settings, f.outcomes, f.table)
    }
}

fn check_parties(n: usize, idx: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n || seen[i] {
            return Err(Error::InvalidParameter(format!("party index {i} invalid or repeated")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// A party fixed to an outcome. `setting: None` is allowed only for parties
/// with a single setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fixed {
    pub party: usize,
    pub setting: Option<usize>,
    pub outcome: usize,
}

impl Fixed {
    pub fn new(party: usize, outcome: usize) -> Self {
        Self { party, setting: None, outcome }
    }
}

/// Result of post-selection. `conditional` is `None` when the fixed outcome
/// has (numerically) zero probability.
#[derive(Clone, Debug)]
pub struct Conditioned {
    pub probability: f64,
    pub conditional: Option<ConditionalDistribution>,
}

impl Conditioned {
    pub fn is_defined(&self) -> bool {
        self.conditional.is_some()
    }
}

/// Post-select on the outcomes of `fixed`, returning the distribution of the
/// remaining parties (original order). The reported probability is that of
/// the fixed outcomes with every free party at setting 0.
pub fn condition_on(p: &ConditionalDistribution, fixed: &[Fixed]) -> Result<Conditioned> {
    let n = p.parties();
    check_parties(n, &fixed.iter().map(|f| f.party).collect::<Vec<_>>())?;
    let mut fx = vec![None; n];
    for f in fixed {
        let s = match f.setting {
            Some(s) if s < p.settings[f.party] => s,
            Some(s) => return Err(Error::InvalidParameter(format!("setting {s} out of range for party {}", f.party))),
            None if p.settings[f.party] == 1 => 0,
            None => return Err(Error::InvalidParameter(format!("party {} has several settings; one must be given", f.party))),
        };
        if f.outcome >= p.outcomes[f.party] {
            return Err(Error::InvalidParameter(format!("outcome {} out of range for party {}", f.outcome, f.party)));
        }
        fx[f.party] = Some((s, f.outcome));
    }
    let free: Vec<usize> = (0..n).filter(|&i| fx[i].is_none()).collect();
    if free.is_empty() {
        return Err(Error::InvalidParameter("cannot condition on every party".into()));
    }
    let settings: Vec<usize> = free.iter().map(|&i| p.settings[i]).collect();
    let outcomes: Vec<usize> = free.iter().map(|&i| p.outcomes[i]).collect();
    let na: usize = outcomes.iter().product();
    let mut table = Vec::with_capacity(settings.iter().product::<usize>() * na);
    let mut x = vec![0; n];
    let mut a = vec![0; n];
    for i in 0..n {
        if let Some((s, o)) = fx[i] {
            x[i] = s;
            a[i] = o;
        }
    }
    let mut probability = None;
    for xf in tuples(&settings) {
        for (k, &i) in free.iter().enumerate() {
            x[i] = xf[k];
        }
        let start = table.len();
        for af in tuples(&outcomes) {
            for (k, &i) in free.iter().enumerate() {
                a[i] = af[k];
            }
            table.push(p.get(&x, &a));
        }
        let w: f64 = table[start..].iter().sum();
        probability.get_or_insert(w);
        if w < ZERO_PROBABILITY {
            return Ok(Conditioned { probability: w.max(0.0), conditional: None });
        }
        for t in &mut table[start..] {
            *t /= w;
        }
    }
    let probability = probability.unwrap_or(0.0);
    let conditional = ConditionalDistribution::new(settings, outcomes, table)?;
    Ok(Conditioned { probability, conditional: Some(conditional) })
}

/// Largest change of any party-`j`-marginal when party `j`'s setting is
/// varied, over all `j` and all other settings and outcomes. Zero iff no
/// party can signal to the rest.
pub fn validate_no_signalling(p: &ConditionalDistribution) -> f64 {
    let n = p.parties();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        if p.settings[j] < 2 {
            continue;
        }
        let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        if others.is_empty() {
            continue;
        }
        let os: Vec<usize> = others.iter().map(|&i| p.settings[i]).collect();
        let oa: Vec<usize> = others.iter().map(|&i| p.outcomes[i]).collect();
        let mut x = vec![0; n];
        let mut a = vec![0; n];
        for xr in tuples(&os) {
            for (k, &i) in others.iter().enumerate() {
                x[i] = xr[k];
            }
            for ar in tuples(&oa) {
                for (k, &i) in others.iter().enumerate() {
                    a[i] = ar[k];
                }
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for xj in 0..p.settings[j] {
                    x[j] = xj;
                    let m: f64 = (0..p.outcomes[j])
                        .map(|aj| {
                            a[j] = aj;
                            p.get(&x, &a)
                        })
                        .sum();
                    lo = lo.min(m);
                    hi = hi.max(m);
                }
                worst = worst.max(hi - lo);
            }
        }
    }
    worst
}

fn check_dims(dims: &[usize], m: &MeasurementAssignment) -> Result<()> {
    let md = m.local_dims();
    if dims != md.as_slice() {
        return Err(Error::InvalidShape(format!("state dims {dims:?} but measurement dims {md:?}")));
    }
    Ok(())
}

/// `P(a⃗|x⃗) = tr[(⊗ M^{a_i}_{x_i}) ρ]`.
pub fn joint_distribution(rho: &DensityOperator, m: &MeasurementAssignment) -> Result<ConditionalDistribution> {
    check_dims(rho.shape().dims(), m)?;
    let n = m.parties();
    let settings = m.settings_cardinality();
    let outcomes = m.outcomes_cardinality();
    let na: usize = outcomes.iter().product();
    let mut table = vec![0.0; settings.iter().product::<usize>() * na];
    let mut x = vec![0; n];
    let mut a = vec![0; n];
    descend_mixed(rho.matrix(), n, m, &settings, &outcomes, &mut x, &mut a, &mut table, na);
    finish(settings, outcomes, table)
}

#[allow(clippy::too_many_arguments)]
fn descend_mixed(
    op: &DMatrix<C64>,
    level: usize,
    m: &MeasurementAssignment,
    settings: &[usize],
    outcomes: &[usize],
    x: &mut Vec<usize>,
    a: &mut Vec<usize>,
    table: &mut [f64],
    na: usize,
) {
    if level == 0 {
        let idx = tuple_index(settings, x) * na + tuple_index(outcomes, a);
        table[idx] += op[(0, 0)].re;
        return;
    }
    let j = level - 1;
    for (xj, povm) in m.party(j).iter().enumerate() {
        x[j] = xj;
        for aj in 0..povm.outcomes() {
            a[j] = aj;
            let reduced = apply_effect_last(op, povm.effect(aj));
            descend_mixed(&reduced, j, m, settings, outcomes, x, a, table, na);
        }
    }
}

/// Vectors `v_k` with `E = Σ_k v_k v_k†` for every effect of `povm`.
fn kraus_vectors(povm: &Povm) -> Vec<Vec<DVector<C64>>> {
    if let Ok(v) = povm.rank_one_vectors() {
        return v.into_iter().map(|x| vec![x]).collect();
    }
    povm.effects()
        .iter()
        .map(|e| {
            let eig = SymmetricEigen::new(e.matrix().clone());
            (0..eig.eigenvalues.len())
                .filter(|&k| eig.eigenvalues[k] > 1e-15)
                .map(|k| eig.eigenvectors.column(k).into_owned() * c(eig.eigenvalues[k].sqrt()))
                .collect()
        })
        .collect()
}

/// Born rule for a pure state without forming its projector.
pub fn joint_distribution_pure(psi: &StateVector, m: &MeasurementAssignment) -> Result<ConditionalDistribution> {
    check_dims(psi.shape().dims(), m)?;
    let n = m.parties();
    let settings = m.settings_cardinality();
    let outcomes = m.outcomes_cardinality();
    let na: usize = outcomes.iter().product();
    let kraus: Vec<Vec<Vec<Vec<DVector<C64>>>>> =
        (0..n).map(|j| m.party(j).iter().map(kraus_vectors).collect()).collect();
    let mut table = vec![0.0; settings.iter().product::<usize>() * na];
    let mut x = vec![0; n];
    let mut a = vec![0; n];
    descend_pure(psi.amplitudes(), n, &kraus, &settings, &outcomes, &mut x, &mut a, &mut table, na);
    finish(settings, outcomes, table)
}

#[allow(clippy::too_many_arguments)]
fn descend_pure(
    v: &DVector<C64>,
    level: usize,
    kraus: &[Vec<Vec<Vec<DVector<C64>>>>],
    settings: &[usize],
    outcomes: &[usize],
    x: &mut Vec<usize>,
    a: &mut Vec<usize>,
    table: &mut [f64],
    na: usize,
) {
    if level == 0 {
        let idx = tuple_index(settings, x) * na + tuple_index(outcomes, a);
        table[idx] += v[0].norm_sqr();
        return;
    }
    let j = level - 1;
    for (xj, effects) in kraus[j].iter().enumerate() {
        x[j] = xj;
        for (aj, vecs) in effects.iter().enumerate() {
            a[j] = aj;
            for e in vecs {
                let reduced = contract_last_vector(v, e);
                descend_pure(&reduced, j, kraus, settings, outcomes, x, a, table, na);
            }
        }
    }
}

fn finish(settings: Vec<usize>, outcomes: Vec<usize>, mut table: Vec<f64>) -> Result<ConditionalDistribution> {
    for t in &mut table {
        if *t < 0.0 && *t > -NEGATIVE_TOL {
            *t = 0.0;
        }
    }
    ConditionalDistribution::new(settings, outcomes, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{bell_basis, computational_basis, projective_from_bloch};
    use crate::states::{make_epr, make_ghz};
    use approx::assert_abs_diff_eq;

    fn z_everywhere(n: usize) -> MeasurementAssignment {
        MeasurementAssignment::new(vec![vec![computational_basis(2)]; n]).unwrap()
    }

    #[test]
    fn epr_z_statistics() {
        let p = joint_distribution_pure(&make_epr(2).unwrap(), &z_everywhere(2)).unwrap();
        assert_abs_diff_eq!(p.get(&[0, 0], &[0, 0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(&[0, 0], &[1, 1]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(&[0, 0], &[0, 1]), 0.0, epsilon = 1e-15);
        let q = joint_distribution(&make_epr(2).unwrap().projector(), &z_everywhere(2)).unwrap();
        assert!(p.table().iter().zip(q.table()).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn ghz_z_statistics() {
        let th = 0.37;
        let p = joint_distribution_pure(&make_ghz(3, th, 2).unwrap(), &z_everywhere(3)).unwrap();
        assert_abs_diff_eq!(p.get(&[0, 0, 0], &[0, 0, 0]), th.cos().powi(2), epsilon = 1e-14);
        assert_abs_diff_eq!(p.get(&[0, 0, 0], &[1, 1, 1]), th.sin().powi(2), epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = joint_distribution_pure(&make_ghz(3, 0.3, 2).unwrap(), &z_everywhere(2));
        assert!(err.is_err());
    }

    #[test]
    fn swapping_identity_through_condition_on() {
        // EPR(0,1) ⊗ EPR(2,3); Bell measurement on (1,2) as one party.
        let psi = make_epr(2).unwrap().tensor(&make_epr(2).unwrap()).regroup(vec![2, 4, 2]).unwrap();
        let x = |t: f64| projective_from_bloch(t, 0.3);
        let m = MeasurementAssignment::new(vec![
            vec![x(0.2), x(1.1)],
            vec![bell_basis()],
            vec![x(0.7), x(2.0)],
        ])
        .unwrap();
        let p = joint_distribution_pure(&psi, &m).unwrap();
        let cond = condition_on(&p, &[Fixed::new(1, 0)]).unwrap();
        assert_abs_diff_eq!(cond.probability, 0.25, epsilon = 1e-14);
        let ends = cond.conditional.unwrap();
        let direct = joint_distribution_pure(
            &make_epr(2).unwrap(),
            &MeasurementAssignment::new(vec![vec![x(0.2), x(1.1)], vec![x(0.7), x(2.0)]]).unwrap(),
        )
        .unwrap();
        assert!(ends.table().iter().zip(direct.table()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn conditioning_on_certain_and_impossible_outcomes() {
        let zero = StateVector::basis(crate::tensor::SystemShape::new(vec![2]).unwrap(), 0).unwrap();
        let psi = zero.tensor(&make_epr(2).unwrap());
        let m = MeasurementAssignment::new(vec![
            vec![computational_basis(2)],
            vec![projective_from_bloch(0.0, 0.0), projective_from_bloch(1.0, 0.0)],
            vec![projective_from_bloch(0.5, 0.0), projective_from_bloch(1.5, 0.0)],
        ])
        .unwrap();
        let p = joint_distribution_pure(&psi, &m).unwrap();
        let sure = condition_on(&p, &[Fixed::new(0, 0)]).unwrap();
        assert_abs_diff_eq!(sure.probability, 1.0, epsilon = 1e-14);
        let rest = p.marginal(&[1, 2]).unwrap();
        assert!(sure.conditional.unwrap().table().iter().zip(rest.table()).all(|(a, b)| (a - b).abs() < 1e-14));
        let never = condition_on(&p, &[Fixed::new(0, 1)]).unwrap();
        assert!(!never.is_defined());
        assert_eq!(never.probability, 0.0);
    }

    #[test]
    fn condition_requires_setting_for_multi_setting_party() {
        let p = ConditionalDistribution::from_fn(vec![2, 2], vec![2, 2], |_, _| 0.25).unwrap();
        assert!(condition_on(&p, &[Fixed::new(0, 0)]).is_err());
        let ok = condition_on(&p, &[Fixed { party: 0, setting: Some(1), outcome: 0 }]).unwrap();
        assert_abs_diff_eq!(ok.probability, 0.5);
    }

    #[test]
    fn pr_box_is_no_signalling() {
        let pr = ConditionalDistribution::from_fn(vec![2, 2], vec![2, 2], |x, a| {
            if (a[0] ^ a[1]) == (x[0] & x[1]) {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(validate_no_signalling(&pr) < 1e-14);
    }

    #[test]
    fn signalling_table_is_detected() {
        // Alice's outcome copies Bob's setting with bias 0.3.
        let bias = 0.3;
        let p = ConditionalDistribution::from_fn(vec![2, 2], vec![2, 2], |x, a| {
            let pa = if a[0] == x[1] { 0.5 + bias / 2.0 } else { 0.5 - bias / 2.0 };
            pa * 0.5
        })
        .unwrap();
        assert_abs_diff_eq!(validate_no_signalling(&p), bias, epsilon = 1e-14);
    }

    #[test]
    fn normalization_is_enforced() {
        assert!(ConditionalDistribution::new(vec![1], vec![2], vec![0.5, 0.4]).is_err());
        assert!(ConditionalDistribution::new(vec![1], vec![2], vec![1.1, -0.1]).is_err());
        assert!(ConditionalDistribution::new(vec![1], vec![2], vec![1.0]).is_err());
    }

    #[test]
    fn csv_and_json_layout() {
        let p = ConditionalDistribution::from_fn(vec![2, 1], vec![2, 2], |x, a| {
            if a[0] == x[0] && a[1] == 0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x1,x2,a1,a2,p"));
        assert_eq!(lines.next(), Some("0,0,0,0,1"));
        assert_eq!(lines.next(), Some("0,0,0,1,0"));
        assert_eq!(csv.lines().count(), 9);
        let back = ConditionalDistribution::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn permute_and_product() {
        let a = ConditionalDistribution::from_fn(vec![2], vec![2], |x, o| if o[0] == x[0] { 0.9 } else { 0.1 }).unwrap();
        let b = ConditionalDistribution::from_fn(vec![1], vec![3], |_, o| [0.2, 0.3, 0.5][o[0]]).unwrap();
        let ab = a.product(&b);
        let ba = ab.permute_parties(&[1, 0]).unwrap();
        assert_abs_diff_eq!(ba.get(&[0, 1], &[2, 1]), 0.5 * 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(ab.get(&[1, 0], &[1, 2]), 0.5 * 0.9, epsilon = 1e-15);
    }
}

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gmn_core::born::{joint_distribution, joint_distribution_pure, validate_no_signalling};
use gmn_core::chsh::{chsh_max_variant, chsh_value};
use gmn_core::measurement::{horodecki_chsh_max, projective_from_bloch, MeasurementAssignment};
use gmn_core::ns::{lp_min_p, make_isotropic_box, random_bipartite_box};
use gmn_core::optimizer::maximize_chsh;
use gmn_core::tensor::{fidelity, partial_trace, reduced_state, DensityOperator, StateVector, SystemShape, C64};

fn ket(dims: Vec<usize>, re: &[f64], im: &[f64]) -> Option<StateVector> {
    let n: usize = dims.iter().product();
    let amps = DVector::from_fn(n, |i, _| C64::new(re[i], im[i]));
    (amps.norm() > 1e-3).then(|| StateVector::from_unnormalized(SystemShape::new(dims).unwrap(), amps).unwrap())
}

fn density(dims: Vec<usize>, re: &[f64], im: &[f64]) -> DensityOperator {
    let n: usize = dims.iter().product();
    let g = DMatrix::from_fn(n, n, |i, j| C64::new(re[i * n + j], im[i * n + j]));
    let m = &g * g.adjoint() + DMatrix::identity(n, n) * C64::new(1e-6, 0.0);
    let tr = m.trace();
    DensityOperator::new(SystemShape::new(dims).unwrap(), m / tr).unwrap()
}

fn amps(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-1.0..1.0f64, n), prop::collection::vec(-1.0..1.0f64, n))
}

fn angles(k: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..std::f64::consts::PI, 0.0..2.0 * std::f64::consts::PI), k)
}

fn qubit_settings(a: &[(f64, f64)]) -> MeasurementAssignment {
    MeasurementAssignment::new(vec![
        vec![projective_from_bloch(a[0].0, a[0].1), projective_from_bloch(a[1].0, a[1].1)],
        vec![projective_from_bloch(a[2].0, a[2].1), projective_from_bloch(a[3].0, a[3].1)],
    ])
    .unwrap()
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_product_is_associative((r1, i1) in amps(2), (r2, i2) in amps(3), (r3, i3) in amps(2)) {
        let (Some(a), Some(b), Some(c)) = (ket(vec![2], &r1, &i1), ket(vec![3], &r2, &i2), ket(vec![2], &r3, &i3)) else {
            return Ok(());
        };
        let left = a.tensor(&b).tensor(&c);
        let right = a.tensor(&b.tensor(&c));
        prop_assert_eq!(left.shape().dims(), right.shape().dims());
        prop_assert!((left.amplitudes() - right.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_undoes_tensor((r1, i1) in amps(36), (r2, i2) in amps(4)) {
        let rho = density(vec![2, 3], &r1, &i1);
        let sigma = density(vec![2], &r2, &i2);
        let back = partial_trace(&rho.tensor(&sigma), &[0, 1]).unwrap();
        prop_assert!(max_diff(back.matrix(), rho.matrix()) < 1e-10);
        let other = partial_trace(&rho.tensor(&sigma), &[2]).unwrap();
        prop_assert!(max_diff(other.matrix(), sigma.matrix()) < 1e-10);
    }

    #[test]
    fn reduced_state_matches_partial_trace_of_projector((re, im) in amps(12)) {
        let Some(psi) = ket(vec![2, 3, 2], &re, &im) else { return Ok(()); };
        for keep in [vec![0], vec![1, 2], vec![2, 0]] {
            let a = reduced_state(&psi, &keep).unwrap();
            let b = partial_trace(&psi.projector(), &keep).unwrap();
            prop_assert!(max_diff(a.matrix(), b.matrix()) < 1e-10);
        }
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded((r1, i1) in amps(4), (r2, i2) in amps(4)) {
        let (Some(a), Some(b)) = (ket(vec![2, 2], &r1, &i1), ket(vec![2, 2], &r2, &i2)) else { return Ok(()); };
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        prop_assert!((f - fidelity(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn born_distributions_are_no_signalling((re, im) in amps(16), a in angles(4)) {
        let rho = density(vec![2, 2], &re, &im);
        let p = joint_distribution(&rho, &qubit_settings(&a)).unwrap();
        prop_assert!(validate_no_signalling(&p) < 1e-10);
    }

    #[test]
    fn tripartite_born_marginal_is_born_of_reduced_state((re, im) in amps(8), a in angles(6)) {
        let Some(psi) = ket(vec![2, 2, 2], &re, &im) else { return Ok(()); };
        let povm = |k: usize| vec![projective_from_bloch(a[2 * k].0, a[2 * k].1), projective_from_bloch(a[2 * k + 1].0, a[2 * k + 1].1)];
        let full = joint_distribution_pure(&psi, &MeasurementAssignment::new(vec![povm(0), povm(1), povm(2)]).unwrap()).unwrap();
        prop_assert!(validate_no_signalling(&full) < 1e-10);
        let marginal = full.marginal(&[0, 2]).unwrap();
        let direct = joint_distribution(&reduced_state(&psi, &[0, 2]).unwrap(), &MeasurementAssignment::new(vec![povm(0), povm(2)]).unwrap()).unwrap();
        for (x, y) in marginal.table().iter().zip(direct.table()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn quantum_chsh_respects_tsirelson((re, im) in amps(16), a in angles(4)) {
        let rho = density(vec![2, 2], &re, &im);
        let p = joint_distribution(&rho, &qubit_settings(&a)).unwrap();
        let tsirelson = 2.0 * 2f64.sqrt();
        prop_assert!(chsh_value(&p).unwrap().value.abs() <= tsirelson + 1e-9);
        prop_assert!(chsh_max_variant(&p).unwrap() <= horodecki_chsh_max(&rho).unwrap().max(2.0) + 1e-9);
    }

    #[test]
    fn optimizer_never_exceeds_horodecki((re, im) in amps(16)) {
        let rho = density(vec![2, 2], &re, &im);
        let opt = maximize_chsh(&rho).unwrap();
        let oracle = horodecki_chsh_max(&rho).unwrap();
        prop_assert!(opt.value <= oracle + 1e-9);
        prop_assert!(opt.value >= oracle - 1e-6);
        prop_assert_eq!(opt.settings.len(), 4);
    }

    #[test]
    fn isotropic_boxes_saturate_the_lp_bound(chsh in 2.0..4.0f64) {
        let b = make_isotropic_box(chsh).unwrap();
        let p = lp_min_p(b.distribution()).unwrap();
        prop_assert!((chsh - (2.0 + 2.0 * p)).abs() < 1e-6);
    }
}

#[test]
fn lp_bound_holds_on_random_ns_boxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let b = random_bipartite_box(&mut rng);
        assert!(validate_no_signalling(b.distribution()) < 1e-10);
        let p = lp_min_p(b.distribution()).unwrap();
        assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        assert!(chsh_max_variant(b.distribution()).unwrap() <= 2.0 + 2.0 * p + 1e-9);
    }
}

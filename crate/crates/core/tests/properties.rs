use periodic_inclusions::cauchy::{Evolution, StepConfig};
use periodic_inclusions::grid::{
    hausdorff_finite, sup_distance, weak_norm, ForcingPath, SpaceGrid, StateVector, TimeGrid, Trajectory,
};
use periodic_inclusions::monotone::{OperatorSpec, PhiSpec, ScalarGraph};
use periodic_inclusions::periodic::{find_periodic, poincare, PeriodicOptions};
use proptest::prelude::*;

fn forcing(values: &[f64], b: f64) -> ForcingPath {
    let g = TimeGrid::new(b, values.len()).unwrap();
    ForcingPath::new(g, SpaceGrid::scalar(), values.iter().map(|&v| StateVector::scalar(v)).collect()).unwrap()
}

fn trajectory(values: &[f64]) -> Trajectory {
    let g = TimeGrid::new(1.0, values.len() - 1).unwrap();
    Trajectory::new(g, SpaceGrid::scalar(), values.iter().map(|&v| StateVector::scalar(v)).collect()).unwrap()
}

proptest! {
    #[test]
    fn weak_norm_dominated_by_l1(values in prop::collection::vec(-4.0..4.0f64, 2..200), b in 0.1..5.0f64) {
        let h = forcing(&values, b);
        prop_assert!(weak_norm(&h) <= h.l1_norm() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn sup_distance_is_a_metric(
        abc in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64), 3..40)
    ) {
        let a = trajectory(&abc.iter().map(|t| t.0).collect::<Vec<_>>());
        let b = trajectory(&abc.iter().map(|t| t.1).collect::<Vec<_>>());
        let c = trajectory(&abc.iter().map(|t| t.2).collect::<Vec<_>>());
        let ab = sup_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, sup_distance(&b, &a).unwrap());
        prop_assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= sup_distance(&a, &c).unwrap() + sup_distance(&c, &b).unwrap() + 1e-12);
        if abc.iter().any(|t| t.0 != t.1) {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn hausdorff_zero_iff_equal_sets(
        pts in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 1..8),
        shift in 1e-6..1.0f64,
        pick in 0usize..8,
    ) {
        let mut shuffled = pts.clone();
        shuffled.reverse();
        shuffled.push(pts[0].clone());
        prop_assert_eq!(hausdorff_finite(&pts, &shuffled).unwrap(), 0.0);
        let mut moved = pts.clone();
        let i = pick % moved.len();
        // Move one point off every other point of the set.
        moved[i][0] = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + shift;
        prop_assert!(hausdorff_finite(&pts, &moved).unwrap() > 0.0);
    }

    #[test]
    fn refinement_keeps_weak_norm(values in prop::collection::vec(-3.0..3.0f64, 2..100)) {
        let h = forcing(&values, 1.0);
        let doubled: Vec<f64> = values.iter().flat_map(|&v| [v, v]).collect();
        let h2 = forcing(&doubled, 1.0);
        let (w, w2) = (weak_norm(&h), weak_norm(&h2));
        prop_assert!((w - w2).abs() <= 1e-12 * (1.0 + w), "{} vs {}", w, w2);
    }
}

fn evo(a: f64, graph: ScalarGraph) -> Evolution {
    Evolution::new(
        SpaceGrid::scalar(),
        OperatorSpec::scalar_linear(a).unwrap(),
        PhiSpec::new(graph).unwrap(),
        StepConfig::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn poincare_ratio_below_energy_rate(
        c in 0.2..3.0f64,
        x in -5.0..5.0f64,
        y in -5.0..5.0f64,
        amp in 0.0..2.0f64,
        weight in 0.0..0.5f64,
    ) {
        prop_assume!((x - y).abs() > 1e-3);
        let e = evo(c, ScalarGraph::Abs { weight });
        let g = TimeGrid::new(1.0, 400).unwrap();
        let h = ForcingPath::from_fn(g, SpaceGrid::scalar(), |t| StateVector::scalar(amp * (3.0 * t).sin())).unwrap();
        let kx = poincare(&e, &g, &StateVector::scalar(x), &h).unwrap().as_slice()[0];
        let ky = poincare(&e, &g, &StateVector::scalar(y), &h).unwrap().as_slice()[0];
        let ratio = (kx - ky).abs() / (x - y).abs();
        prop_assert!(ratio <= (-c).exp() * 1.05, "ratio {} rate {}", ratio, (-c).exp());
    }

    #[test]
    fn periodic_solution_independent_of_start(x in -4.0..4.0f64, y in -4.0..4.0f64, amp in -2.0..2.0f64) {
        let e = evo(1.0, ScalarGraph::Linear { slope: 0.5 });
        let g = TimeGrid::new(2.0, 400).unwrap();
        let h = ForcingPath::from_fn(g, SpaceGrid::scalar(), |t| StateVector::scalar(amp * t.cos())).unwrap();
        let opts = PeriodicOptions::default();
        let (u, _) = find_periodic(&e, &g, &h, &StateVector::scalar(x), &opts).unwrap();
        let (v, _) = find_periodic(&e, &g, &h, &StateVector::scalar(y), &opts).unwrap();
        prop_assert!(sup_distance(&u, &v).unwrap() <= 10.0 * opts.outer_tol);
    }
}

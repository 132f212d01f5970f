mod common;

use ambig_pricer::ambiguity::{distance_to_constraint, support_value};
use ambig_pricer::prelude::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn agrees_with_grid_search() {
    let failures = common::oracle_agreement(1, 120);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn positively_homogeneous_on_cones() {
    let failures = common::homogeneity(2, 300);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn minimizer_is_certified() {
    let failures = common::argmin_certificate(3, 300, 200);
    assert!(failures.is_empty(), "{failures:#?}");
}

fn kappa() -> impl Strategy<Value = f64> {
    0.0..0.6f64
}

proptest! {
    #[test]
    fn nonnegative_and_zero_when_feasible(
        z in prop::collection::vec(-3.0..3.0f64, 2),
        lo in prop::collection::vec(kappa(), 2),
        hi in prop::collection::vec(kappa(), 2),
        off in -0.1..0.1f64,
        pi in prop::collection::vec(0.0..5.0f64, 2),
    ) {
        let amb = AmbiguityRectangle::new(lo, hi).unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, off, 0.25]);
        let d = distance_to_constraint(&z, &amb, &ConstraintSpec::Orthant, &sigma).unwrap();
        prop_assert!(d.value >= 0.0);
        // −z̄ = σᵀπ with π ≥ 0 is reachable
        let reachable: Vec<f64> = (0..2).map(|i| -(0..2).map(|j| sigma[(j, i)] * pi[j]).sum::<f64>()).collect();
        let d = distance_to_constraint(&reachable, &amb, &ConstraintSpec::Orthant, &sigma).unwrap();
        prop_assert!(d.value.abs() < 1e-12, "{}", d.value);
    }

    #[test]
    fn support_function_is_sublinear(
        a in prop::collection::vec(-2.0..2.0f64, 3),
        b in prop::collection::vec(-2.0..2.0f64, 3),
        k in kappa(),
    ) {
        let amb = AmbiguityRectangle::ignorance(3, k).unwrap();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = support_value(&sum, &amb).unwrap();
        let rhs = support_value(&a, &amb).unwrap() + support_value(&b, &amb).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn wider_box_never_increases_distance(
        z in -2.0..2.0f64,
        k in kappa(),
        r in 0.0..3.0f64,
        grow in 0.0..3.0f64,
    ) {
        let amb = AmbiguityRectangle::ignorance(1, k).unwrap();
        let sigma = DMatrix::from_element(1, 1, 0.2);
        let narrow = ConstraintSpec::boxed(vec![-r], vec![r]).unwrap();
        let wide = ConstraintSpec::boxed(vec![-r - grow], vec![r + grow]).unwrap();
        let a = distance_to_constraint(&[z], &amb, &narrow, &sigma).unwrap().value;
        let b = distance_to_constraint(&[z], &amb, &wide, &sigma).unwrap().value;
        prop_assert!(b <= a + 1e-15);
    }
}

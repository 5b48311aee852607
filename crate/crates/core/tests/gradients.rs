mod common;

use common::*;

const TOL: f64 = 1e-4;

#[test]
fn logistic_gradient_matches_central_differences() {
    let errors = gradient_errors(0, 25, |s| Some(lr_gradient_error(s)));
    assert_eq!(errors.len(), 25);
    for (seed, e) in errors.iter().enumerate() {
        assert!(*e < TOL, "seed {seed}: {e}");
    }
}

#[test]
fn svm_subgradient_matches_central_differences_off_the_hinge() {
    let errors = gradient_errors(500, 25, svm_gradient_error);
    assert_eq!(errors.len(), 25);
    assert!(errors.iter().all(|&e| e < TOL), "{errors:?}");
}

#[test]
fn mlp_backprop_matches_central_differences() {
    let errors = gradient_errors(900, 25, mlp_gradient_error);
    assert_eq!(errors.len(), 25);
    assert!(errors.iter().all(|&e| e < TOL), "{errors:?}");
}

#[test]
fn the_checker_detects_a_wrong_gradient() {
    // a deliberately wrong derivative must register as a large error
    let mut p = vec![1.5];
    let numeric = central_difference(&mut p, 0, &mut |q: &[f64]| q[0] * q[0]);
    assert!(relative_error(3.0, numeric) < 1e-8);
    assert!(relative_error(3.3, numeric) > 1e-2);
}

use proptest::prelude::*;
use ravine::problems::{logistic_data, low_rank_design, Problem};
use ravine::{Matrix, Vector};

fn problems() -> Vec<Problem> {
    let (x, y) = logistic_data(30, 4, 2);
    vec![
        Problem::quadratic_from_spectrum(&[3.0, 1.0, 0.2, 0.01], Some(5), Vector::from_vec(vec![1.0, -1.0, 0.5, 0.0]))
            .unwrap(),
        Problem::least_squares(low_rank_design(6, 4, 2, 8), Vector::from_vec(vec![1.0, 2.0, 0.0, -1.0, 0.5, 3.0]))
            .unwrap(),
        Problem::logistic(x, y, 0.05).unwrap(),
    ]
}

fn vec4() -> impl Strategy<Value = Vector> {
    prop::collection::vec(-3.0f64..3.0, 4).prop_map(Vector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(x in vec4(), which in 0usize..3) {
        let p = &problems()[which];
        let g = p.gradient(&x).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut e = Vector::zeros(4);
            e[i] = h;
            let fd = (p.evaluate(&(&x + &e)).unwrap() - p.evaluate(&(&x - &e)).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "i={} fd={} g={}", i, fd, g[i]);
        }
    }

    #[test]
    fn hessian_vec_matches_gradient_differences(x in vec4(), v in vec4(), which in 0usize..3) {
        let p = &problems()[which];
        let hv = p.hessian_vec(&x, &v).unwrap();
        let h = 1e-5;
        let fd = (p.gradient(&(&x + &v * h)).unwrap() - p.gradient(&(&x - &v * h)).unwrap()) / (2.0 * h);
        prop_assert!((&fd - &hv).norm() <= 1e-6 * (1.0 + hv.norm()));
    }

    #[test]
    fn convex_along_segments(x in vec4(), y in vec4(), theta in 0.0f64..1.0, which in 0usize..3) {
        let p = &problems()[which];
        let mid = &x * theta + &y * (1.0 - theta);
        let lhs = p.evaluate(&mid).unwrap();
        let rhs = theta * p.evaluate(&x).unwrap() + (1.0 - theta) * p.evaluate(&y).unwrap();
        prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn gradient_is_lipschitz(x in vec4(), y in vec4(), which in 0usize..3) {
        let p = &problems()[which];
        let dg = (p.gradient(&x).unwrap() - p.gradient(&y).unwrap()).norm();
        prop_assert!(dg <= p.lipschitz() * (&x - &y).norm() * (1.0 + 1e-8) + 1e-12);
    }

    #[test]
    fn gap_nonnegative_and_zero_at_minimizer(x in vec4(), which in 0usize..3) {
        let p = &problems()[which];
        prop_assert!(p.gap(&x).unwrap() >= -1e-12);
        let star = p.project(&x).unwrap();
        prop_assert!(p.gap(&star).unwrap().abs() <= 1e-9);
        prop_assert!(p.gradient(&star).unwrap().norm() <= 1e-6);
    }
}

#[test]
fn hessian_of_quadratic_is_the_matrix() {
    let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
    let p = Problem::quadratic(a.clone(), Vector::zeros(2)).unwrap();
    let v = Vector::from_vec(vec![0.3, -1.2]);
    assert_eq!(p.hessian_vec(&Vector::zeros(2), &v).unwrap(), &a * &v);
}

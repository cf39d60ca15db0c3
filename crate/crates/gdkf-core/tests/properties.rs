//! Property tests over randomized inputs for the numeric kernel and the
//! Hebbian update structure.

use gdkf_core::gradient::{compute_errors, grad_a, grad_b, grad_c, GradientFilterState};
use gdkf_core::linalg::{finite_diff_grad, solve_spd, Mat, Vector};
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(entry(), rows * cols)
        .prop_map(move |data| Mat::new(rows, cols, data).unwrap())
}

fn vector(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(entry(), dim).prop_map(|data| Vector::new(data).unwrap())
}

fn spd(n: usize) -> impl Strategy<Value = Mat> {
    mat(n, n).prop_map(move |g| {
        g.transpose()
            .matmul(&g)
            .unwrap()
            .add(&Mat::identity(n))
            .unwrap()
            .symmetrize()
    })
}

proptest! {
    #[test]
    fn matmul_is_associative(
        a in mat(3, 4),
        b in mat(4, 2),
        c in mat(2, 5),
    ) {
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        let scale = left.max_abs().max(1.0);
        prop_assert!(left.sub(&right).unwrap().max_abs() <= 1e-9 * scale);
    }

    #[test]
    fn solve_spd_reconstructs_rhs(m in spd(4), rhs in vector(4)) {
        let x = solve_spd(&m, &rhs).unwrap();
        let resid = m.mul_vec(&x).unwrap().sub(&rhs).unwrap().inf_norm();
        prop_assert!(resid <= 1e-9 * rhs.inf_norm().max(1.0));
    }

    #[test]
    fn finite_diff_matches_quadratic_gradient(
        m in mat(3, 3),
        b in vector(3),
        x in vector(3),
    ) {
        // f(v) = vᵀMv + bᵀv has gradient (M + Mᵀ)v + b
        let f = |v: &[f64]| {
            let vv = Vector::new(v.to_vec()).unwrap();
            vv.dot(&m.mul_vec(&vv).unwrap()).unwrap() + b.dot(&vv).unwrap()
        };
        let fd = finite_diff_grad(f, x.as_slice(), 1e-5).unwrap();
        let expect = m
            .add(&m.transpose())
            .unwrap()
            .mul_vec(&x)
            .unwrap()
            .add(&b)
            .unwrap();
        for i in 0..3 {
            let scale = expect.get(i).abs().max(1.0);
            prop_assert!((fd[i] - expect.get(i)).abs() <= 1e-5 * scale);
        }
    }

    #[test]
    fn weight_gradients_are_rank_one(
        a_hat in mat(3, 3),
        b_hat in mat(3, 1),
        c_hat in mat(3, 3),
        pi_x in spd(3),
        pi_z in spd(3),
        mu_prev in vector(3),
        mu_next in vector(3),
        u in vector(1),
        y in vector(3),
    ) {
        let state = GradientFilterState::new(
            a_hat, b_hat, c_hat, pi_x, pi_z, Vector::zeros(3),
        ).unwrap();
        let errors = compute_errors(&state, &mu_next, &mu_prev, &u, &y).unwrap();
        let grads = [
            grad_a(&state, &errors, &mu_prev).unwrap(),
            grad_b(&state, &errors, &u).unwrap(),
            grad_c(&state, &errors, &mu_next).unwrap(),
        ];
        for g in &grads {
            let scale = g.max_abs().max(1.0);
            for i in 0..g.rows() {
                for j in (i + 1)..g.rows() {
                    for p in 0..g.cols() {
                        for q in (p + 1)..g.cols() {
                            let minor = g.get(i, p) * g.get(j, q) - g.get(i, q) * g.get(j, p);
                            prop_assert!(minor.abs() <= 1e-12 * scale * scale);
                        }
                    }
                }
            }
        }
    }
}

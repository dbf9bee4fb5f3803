use iqc_observer::analysis::hinf_norm;
use iqc_observer::linalg::{eye, max_sym_eigenvalue, min_sym_eigenvalue, spectral_abscissa};
use iqc_observer::lmi::{minimize_gamma_squared, solve, ClarabelBackend, LmiExpression, SdpProblem, SolveStatus};
use iqc_observer::{Mat, StateSpace};
use proptest::prelude::*;

fn shifted(entries: &[f64], n: usize, target_abscissa: f64) -> Mat {
    let mut a = Mat::from_row_slice(n, n, &entries[..n * n]);
    let s = spectral_abscissa(&a).unwrap();
    a -= eye(n) * (s - target_abscissa);
    a
}

fn lyapunov(a: &Mat) -> (SolveStatus, Option<Mat>) {
    let n = a.nrows();
    let mut prob = SdpProblem::new();
    let p = prob.sym_var(n);
    // the inequality is homogeneous in P, so P ⪰ I loses nothing and keeps
    // the unstable case infeasible by a wide margin
    prob.lmi_pos("P >= I", p.expr.add_const(&-eye(n)).unwrap()).unwrap();
    prob.lmi_neg("lyap", p.expr.right_mul(a).unwrap().he().unwrap()).unwrap();
    let sol = solve(&prob, &ClarabelBackend::default()).unwrap();
    let pv = (sol.status == SolveStatus::Optimal).then(|| sol.value_of(&p));
    (sol.status, pv)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lyapunov_feasible_iff_hurwitz(
        n in 1usize..5,
        entries in prop::collection::vec(-2.0f64..2.0, 16),
        margin in 0.05f64..1.0,
    ) {
        let stable = shifted(&entries, n, -margin);
        let (status, p) = lyapunov(&stable);
        prop_assert_eq!(status, SolveStatus::Optimal);
        let p = p.unwrap();
        prop_assert!(min_sym_eigenvalue(&p) > 1.0 - 1e-6);
        let lyap = &p * &stable + stable.transpose() * &p;
        prop_assert!(max_sym_eigenvalue(&lyap) < 0.0);

        let unstable = shifted(&entries, n, margin);
        prop_assert_eq!(lyapunov(&unstable).0, SolveStatus::Infeasible);
    }

    #[test]
    fn bounded_real_lemma_matches_hamiltonian_norm(
        n in 1usize..4,
        entries in prop::collection::vec(-2.0f64..2.0, 9),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        c in prop::collection::vec(-1.0f64..1.0, 3),
        margin in 0.2f64..1.0,
    ) {
        let a = shifted(&entries, n, -margin);
        let b = Mat::from_column_slice(n, 1, &b[..n]);
        let c = Mat::from_row_slice(1, n, &c[..n]);
        prop_assume!(b.norm() > 0.1 && c.norm() > 0.1);
        let sys = StateSpace::new(a.clone(), b.clone(), c.clone(), Mat::zeros(1, 1)).unwrap();
        let h = hinf_norm(&sys, 1e-9).unwrap();
        prop_assume!(h > 1e-3);

        let mut prob = SdpProblem::new();
        let p = prob.sym_var(n);
        let g = prob.scalar_var();
        let pb = p.expr.right_mul(&b).unwrap();
        let top = p.expr.right_mul(&a).unwrap().he().unwrap().add_const(&(c.transpose() * &c)).unwrap();
        let corner = LmiExpression::term(g.handles[0], Mat::from_element(1, 1, -1.0));
        let lmi = LmiExpression::blocks(&[vec![top, pb.clone()], vec![pb.transpose(), corner]]).unwrap();
        prob.lmi_pos("P", p.expr.clone()).unwrap();
        prob.lmi_neg("BRL", lmi).unwrap();
        let out = minimize_gamma_squared(&prob, g.handles[0], &ClarabelBackend::default(), 1e6).unwrap();
        prop_assert_eq!(out.status, SolveStatus::Optimal);
        prop_assert!((out.gamma - h).abs() / h < 2e-3, "BRL {} vs Hamiltonian {}", out.gamma, h);
    }
}

use aggregation_core::fv2d::{build_kernel, compute_velocity, fv_update, Grid2D, VelocityAssembler, VelocityAssembly};
use aggregation_core::particles::particle_rhs;
use aggregation_core::{DiscreteMeasure, FvState64, Measure64, Particles64, Potential64};
use proptest::prelude::*;

fn potential() -> impl Strategy<Value = Potential64> {
    prop_oneof![
        (0.5f64..8.0).prop_map(|a| Potential64::morse(a).unwrap()),
        Just(Potential64::absolute_value()),
    ]
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-1.5f64..1.5, -1.5f64..1.5).prop_map(|(x, y)| [x, y])
}

fn atoms(max: usize) -> impl Strategy<Value = Measure64> {
    prop::collection::vec((point(), 0.05f64..1.0), 2..max).prop_map(|v| {
        let total: f64 = v.iter().map(|a| a.1).sum();
        DiscreteMeasure::planar(v.iter().map(|a| a.0).collect(), v.iter().map(|a| a.1 / total).collect()).unwrap()
    })
}

fn density(n: usize) -> impl Strategy<Value = FvState64> {
    prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |w| {
        let grid = Grid2D::square_box(-0.5, 0.5, 1.0 / n as f64).unwrap();
        let total: f64 = w.iter().sum::<f64>() * grid.cell_area();
        FvState64::from_density(grid, w.iter().map(|x| x / total.max(1e-300)).collect()).unwrap()
    })
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn gradient_is_odd_and_bounded(p in potential(), x in point()) {
        let g = p.grad_hat(x);
        let h = p.grad_hat([-x[0], -x[1]]);
        prop_assert!(norm(g) <= p.w_inf() * (1.0 + 1e-12));
        prop_assert!((g[0] + h[0]).abs() <= 1e-15 && (g[1] + h[1]).abs() <= 1e-15);
        prop_assert_eq!(p.grad_hat([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn potential_is_lambda_convex(p in potential(), x in point(), y in point()) {
        let mid = [(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0];
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        let chord = 0.5 * (p.eval(x) + p.eval(y)) - p.lambda() * d2 / 8.0;
        prop_assert!(p.eval(mid) <= chord + 1e-12);
        prop_assert!((p.eval(x) - p.eval([-x[0], -x[1]])).abs() <= 1e-15);
        prop_assert_eq!(p.eval([0.0, 0.0]), 0.0);
    }

    #[test]
    fn mollifier_only_changes_the_cap(p in potential(), eps in 1e-3f64..0.2, x in point()) {
        let m = p.mollify(eps).unwrap();
        prop_assert!(norm(m.grad_hat(x)) <= p.w_inf() * (1.0 + 1e-12));
        if norm(x) >= eps {
            let (a, b) = (m.grad_hat(x), p.grad_hat(x));
            prop_assert!((a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn particle_velocities_balance(p in potential(), mu in atoms(12)) {
        let sys = Particles64::new(&mu, p, None).unwrap();
        let v = particle_rhs(&sys);
        let mut momentum = [0.0, 0.0];
        for (vi, m) in v.iter().zip(sys.masses()) {
            prop_assert!(norm(*vi) <= p.w_inf() * (1.0 + 1e-12));
            momentum[0] += m * vi[0];
            momentum[1] += m * vi[1];
        }
        prop_assert!(norm(momentum) <= 1e-14);
    }

    #[test]
    fn particle_steps_conserve_mass_and_center(p in potential(), mu in atoms(12), dt in 1e-3f64..0.05) {
        let mut sys = Particles64::new(&mu, p, None).unwrap();
        let c0 = mu.center_of_mass().unwrap();
        for _ in 0..5 {
            sys.step(dt).unwrap();
        }
        let state = sys.state();
        let c1 = state.center_of_mass().unwrap();
        prop_assert!((state.total_mass() - 1.0).abs() <= 1e-14);
        prop_assert!(norm([c1[0] - c0[0], c1[1] - c0[1]]) <= 1e-13);
        let mut ids: Vec<usize> = sys.merge_log().iter().flat_map(|e| e.merged.clone()).collect();
        ids.extend(sys.ids());
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids, (0..mu.len()).collect::<Vec<_>>());
    }

    #[test]
    fn particle_energy_never_rises(p in potential(), mu in atoms(10), dt in 1e-3f64..0.05) {
        let mut sys = Particles64::new(&mu, p, None).unwrap();
        let mut e = mu.interaction_energy(&p);
        for _ in 0..60 {
            sys.step(dt).unwrap();
            let next = sys.state().interaction_energy(&p);
            prop_assert!(next <= e + 1e-8, "rise {:e} at t = {}", next - e, sys.time());
            e = next;
        }
    }

    #[test]
    fn fv_step_conserves_mass_and_sign(p in potential(), s in density(10), safety in 0.1f64..1.0) {
        let k = build_kernel(&p, &s.grid);
        let v = compute_velocity(&s, &k).unwrap();
        prop_assert!(v.max_component() <= p.w_inf() * (1.0 + 1e-12));
        let dt = safety * 0.5 / (p.w_inf() * (1.0 / s.grid.dx + 1.0 / s.grid.dy));
        let next = fv_update(&s, &v, p.w_inf(), dt);
        prop_assert!((next.mass() - s.mass()).abs() <= 1e-13);
        prop_assert!(next.rho.iter().all(|&r| r >= -1e-15));
    }

    #[test]
    fn fft_assembly_matches_direct(p in potential(), s in density(9)) {
        let k = build_kernel(&p, &s.grid);
        let direct = VelocityAssembler::new(k.clone(), VelocityAssembly::Direct).velocity(&s).unwrap();
        let fft = VelocityAssembler::new(k, VelocityAssembly::Fft).velocity(&s).unwrap();
        prop_assert!(direct.max_difference(&fft) <= 1e-12);
    }
}

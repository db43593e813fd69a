use std::f64::consts::PI;

use proptest::prelude::*;

use nematic::config::{parse_config, Experiment, InitialSelector, RunConfig};
use nematic::constitutive::{ericksen_stress, gl_linearized};
use nematic::diagnostics::bump;
use nematic::field::norms::{norm_h1, norm_l2, weighted_l2};
use nematic::field::ops::{grad, interpolate, laplacian};
use nematic::parabolic::{spd_solve, LinearOperatorSpec, SolverConfig};
use nematic::picard::psi_distance;
use nematic::transport::solve_transport;
use nematic::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (5usize..40, 0.5f64..3.0).prop_map(|(n, l)| GridSpec::line(l, n).unwrap()),
        (5usize..12, 5usize..12, 0.5f64..2.0, 0.5f64..2.0)
            .prop_map(|(nx, ny, lx, ly)| GridSpec::new(2, &[lx, ly], &[nx, ny]).unwrap()),
    ]
}

fn field_on(grid: GridSpec, ncomp: usize) -> impl Strategy<Value = Field> {
    prop::collection::vec(-10.0f64..10.0, grid.node_count() * ncomp)
        .prop_map(move |v| Field::from_values(grid, ncomp, v).unwrap())
}

fn grid_and_field(ncomp: usize) -> impl Strategy<Value = Field> {
    grid_strategy().prop_flat_map(move |g| field_on(g, ncomp))
}

fn close(a: &Field, b: &Field, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constants_have_zero_derivatives(g in grid_strategy(), c in -1e3f64..1e3) {
        let f = Field::constant(g, &[c]);
        prop_assert_eq!(grad(&f).max_abs(), 0.0);
        prop_assert_eq!(laplacian(&f).max_abs(), 0.0);
    }

    #[test]
    fn laplacian_is_linear(f in grid_and_field(2), a in -5.0f64..5.0) {
        let h = f.map(|x| x.sin());
        let lhs = laplacian(&f.scale(a).add(&h));
        let rhs = laplacian(&f).scale(a).add(&laplacian(&h));
        let scale = 1.0 / f.grid().min_spacing().powi(2);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * scale * (1.0 + a.abs()) * 10.0);
    }

    #[test]
    fn interpolation_is_a_convex_combination(f in grid_and_field(1), t in prop::array::uniform2(0.0f64..=1.0)) {
        let g = *f.grid();
        let x: Vec<f64> = (0..g.dim()).map(|a| t[a] * g.extent()[a]).collect();
        let v = interpolate(&f, &x).unwrap()[0];
        prop_assert!(v >= f.min() - 1e-12 && v <= f.max() + 1e-12);
    }

    #[test]
    fn interpolation_reproduces_nodes(f in grid_and_field(3), pick in 0usize..1000) {
        let g = *f.grid();
        let k = pick % g.node_count();
        let x = g.coords(k);
        prop_assert_eq!(interpolate(&f, &x[..g.dim()]).unwrap(), f.node_value(k));
    }

    #[test]
    fn l2_norm_is_a_norm((f, h) in grid_strategy().prop_flat_map(|g| (field_on(g, 2), field_on(g, 2))), a in -4.0f64..4.0) {
        let tol = 1e-12 * (1.0 + norm_l2(&f) + norm_l2(&h));
        prop_assert!(norm_l2(&f.add(&h)) <= norm_l2(&f) + norm_l2(&h) + tol);
        prop_assert!((norm_l2(&f.scale(a)) - a.abs() * norm_l2(&f)).abs() <= tol * (1.0 + a.abs()));
        prop_assert!(norm_h1(&f) + tol >= norm_l2(&f));
    }

    #[test]
    fn unit_density_weighting_is_plain_l2(f in grid_and_field(2)) {
        let one = Field::constant(*f.grid(), &[1.0]);
        let w = weighted_l2(&one, &f).unwrap();
        prop_assert!((w - norm_l2(&f)).abs() <= 1e-12 * (1.0 + w));
    }

    #[test]
    fn linearized_penalty_is_affine_in_d(
        (n, d1, d2) in grid_strategy().prop_flat_map(|g| (field_on(g, 3), field_on(g, 3), field_on(g, 3))),
        a in -2.0f64..2.0,
        axis in 0usize..3,
    ) {
        let mut m = [0.0; 3];
        m[axis] = 1.0;
        let mix = d1.scale(a).add(&d2.scale(1.0 - a));
        let lhs = gl_linearized(&n, &mix, m, 0.7).unwrap();
        let rhs = gl_linearized(&n, &d1, m, 0.7).unwrap().scale(a)
            .add(&gl_linearized(&n, &d2, m, 0.7).unwrap().scale(1.0 - a));
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn ericksen_stress_is_symmetric(d in grid_strategy().prop_filter("2D", |g| g.dim() == 2).prop_flat_map(|g| field_on(g, 3))) {
        let s = ericksen_stress(&d, 1.0);
        prop_assert_eq!(s.comp(1), s.comp(2));
    }

    #[test]
    fn psi_vanishes_only_between_equal_states(
        (r, u, d, dr) in grid_strategy().prop_flat_map(|g| (field_on(g, 1), field_on(g, g.dim()), field_on(g, 3), field_on(g, 1)))
    ) {
        let rho = r.map(f64::abs);
        let a = FluidState::new(rho.clone(), u.clone(), d.clone(), 0.0).unwrap();
        prop_assert_eq!(psi_distance(&a, &a).unwrap(), 0.0);
        let b = FluidState::new(rho.add(&dr.map(|x| x.abs() + 0.1)), u, d, 0.0).unwrap();
        prop_assert!(psi_distance(&b, &a).unwrap() > 0.0);
    }

    #[test]
    fn implicit_operator_keeps_nonnegative_data_nonnegative(
        (rhs, bc) in grid_strategy().prop_flat_map(|g| (field_on(g, 1), field_on(g, 1))),
        mass in 0.1f64..1e3,
        kappa in 1e-3f64..10.0,
    ) {
        let op = LinearOperatorSpec::uniform_mass(*rhs.grid(), mass, kappa, bc.map(f64::abs)).unwrap();
        // rough data with kappa / (mass h^2) up to ~1e7: keep the tolerance attainable
        let cfg = SolverConfig::with_tol(1e-8);
        let (x, _) = spd_solve(&op, &rhs.map(f64::abs), None, &cfg).unwrap();
        prop_assert!(x.min() >= -1e-9 * (1.0 + x.max_abs()));
    }

    #[test]
    fn transport_respects_the_positivity_certificate(
        nodes in 9usize..60,
        amp in -0.8f64..0.8,
        floor in 1e-4f64..1.0,
        steps in 1usize..20,
    ) {
        let g = GridSpec::line(1.0, nodes).unwrap();
        let rho0 = Field::scalar_fn(g, |x| floor + bump(&g, x));
        let tg = TimeGrid::new(0.2, steps).unwrap();
        let v: Vec<Field> = (0..=steps)
            .map(|n| {
                let t = tg.time(n);
                Field::scalar_fn(g, |x| amp * (1.0 + t) * (PI * x[0]).sin() * (2.0 * PI * x[0]).sin()).zero_boundary()
            })
            .collect();
        let sol = solve_transport(&rho0, &v, &tg).unwrap();
        for (r, b) in sol.rho.iter().zip(&sol.lower_bound) {
            prop_assert!(r.min() >= b - 1e-12);
        }
    }

    #[test]
    fn config_round_trips(cfg in config_strategy()) {
        let text = cfg.serialize();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), text);
    }
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    let initial = prop_oneof![
        (0.0f64..5.0).prop_map(|alpha| InitialSelector::Equilibrium { alpha }),
        (0.0f64..0.99, 0.0f64..5.0).prop_map(|(theta, alpha)| InitialSelector::ScaledBumps { theta, alpha }),
        Just(InitialSelector::Manufactured { case: "smooth-1d".into() }),
    ];
    (
        (1usize..=2, 5usize..300, 0.1f64..10.0),
        (1e-3f64..5.0, 1usize..5000),
        (prop::array::uniform3(1e-3f64..1e3), prop_oneof![(1e-2f64..1e2), Just(f64::INFINITY)], 0.0f64..0.999),
        (0usize..3, any::<bool>(), 1e-2f64..10.0, 1.01f64..3.0),
        initial,
        (1e-20f64..1e-2, 1usize..100, 1usize..10, 1e-14f64..1e-2, prop::option::of(1usize..100_000)),
        (0usize..7, prop::collection::vec(0.0f64..1.0, 2..5), 1.0f64..100.0, 1usize..10),
        (prop::option::of("[a-z]{1,8}(/[a-z0-9_]{1,8}){0,2}"), prop::collection::vec(0.0f64..1.0, 0..4)),
    )
        .prop_map(|(grid, time, model, law, initial, picard, exp, out)| {
            let mut c = RunConfig::default();
            (c.grid.dim, c.grid.nodes, c.grid.length) = grid;
            (c.time.t_end, c.time.steps) = time;
            let ([mu, lambda, nu], sigma, delta) = model;
            c.model.mu = mu;
            c.model.lambda = lambda;
            c.model.nu = nu;
            c.model.sigma = sigma;
            c.model.delta = delta;
            let (axis, neg, a, gamma) = law;
            c.model.m = [0.0; 3];
            c.model.m[axis] = if neg { -1.0 } else { 1.0 };
            c.model.pressure_a = a;
            c.model.pressure_gamma = gamma;
            c.initial = initial;
            if matches!(c.initial, InitialSelector::Manufactured { .. }) {
                c.grid.dim = 1;
                c.grid.length = 1.0;
            }
            (
                c.picard.psi_tol,
                c.picard.max_sweeps,
                c.picard.divergence_patience,
                c.picard.solver_tol,
                c.picard.solver_max_iterations,
            ) = picard;
            let (kind, mut scales, cap, count) = exp;
            c.experiment.kind = Experiment::ALL[kind];
            if c.experiment.kind == Experiment::Smalldata && !matches!(c.initial, InitialSelector::ScaledBumps { .. }) {
                c.experiment.kind = Experiment::Simulate;
            }
            scales.extend([1e-2, 1e-3]);
            c.experiment.scales = scales;
            c.experiment.growth_cap = cap;
            c.experiment.delta_count = count;
            let (dir, times) = out;
            c.output.dir = dir.map(Into::into);
            c.output.snapshot_times = times.iter().map(|t| t * c.time.t_end).collect();
            c
        })
}

//! Manufactured-solution convergence studies for the three subsolvers, the
//! compatibility round trip, and the stress-force identity defect.
//!
//! All studies run in 1D on `[0, 1]`. Errors are discrete L^2 norms at the
//! final time. Manufactured forcings are evaluated at `t_n`, the level of every
//! other explicit coupling.

use std::f64::consts::PI;

use crate::constitutive::{elastic_force, ericksen_stress, gl_force, ModelParams};
use crate::error::Result;
use crate::field::norms::norm_l2;
use crate::field::ops::div_tensor;
use crate::field::{DirectorField, Field, GridSpec, ScalarField, TimeGrid, VectorField};
use crate::parabolic::{
    compute_g, director_step, momentum_step, solve_initial_velocity, SolverConfig, StepOptions,
};
use crate::transport::{solve_transport, solve_transport_forced};

/// Accepted error ratio under halving of `h`.
pub const SPACE_WINDOW: (f64, f64) = (3.2, 4.8);
/// Accepted error ratio under halving of `dt`.
pub const TIME_WINDOW: (f64, f64) = (1.6, 2.4);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Refinement {
    Space,
    Time,
}

impl Refinement {
    pub fn window(self) -> (f64, f64) {
        match self {
            Refinement::Space => SPACE_WINDOW,
            Refinement::Time => TIME_WINDOW,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Refinement::Space => "space",
            Refinement::Time => "time",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub name: &'static str,
    pub refinement: Refinement,
    /// `h` or `dt` per run, coarsest first.
    pub sizes: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ConvergenceStudy {
    /// Successive error ratios `e_i / e_{i+1}`.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }

    /// The ratio of the two finest runs.
    pub fn finest_ratio(&self) -> f64 {
        *self.ratios().last().expect("at least two runs")
    }

    pub fn passes(&self) -> bool {
        let (lo, hi) = self.refinement.window();
        let r = self.finest_ratio();
        (lo..=hi).contains(&r)
    }
}

fn solver() -> SolverConfig {
    SolverConfig::with_tol(1e-13)
}

fn line(n: usize) -> GridSpec {
    GridSpec::line(1.0, n).expect("valid grid")
}

/// Exact density for `v = c sin(k x)`, `k = pi`, from `rho0` along characteristics.
fn sine_flow_density(rho0: impl Fn(f64) -> f64, c: f64, t: f64, x: f64) -> f64 {
    let k = PI;
    let q = (-c * k * t).exp();
    let th = 0.5 * k * x;
    let x0 = 2.0 / k * (q * th.sin()).atan2(th.cos());
    let jac = q / (th.cos().powi(2) + q * q * th.sin().powi(2));
    rho0(x0) * jac
}

/// The scheme's own time discretization applied with exact spatial operations:
/// composed RK2 feet and trapezoidal divergence factors of the analytic flow
/// `v = c sin(pi x)`. Its distance to the computed density is purely spatial error.
fn sine_flow_time_discrete(rho0: impl Fn(f64) -> f64, c: f64, tg: TimeGrid, x: f64) -> f64 {
    let dt = tg.dt();
    let v = |x: f64| c * (PI * x).sin();
    let div = |x: f64| c * PI * (PI * x).cos();
    let mut point = x;
    let mut factor = 1.0;
    for _ in 0..tg.steps() {
        let mid = (point - 0.5 * dt * v(point)).clamp(0.0, 1.0);
        let foot = (point - dt * v(mid)).clamp(0.0, 1.0);
        factor *= (-0.5 * dt * (div(foot) + div(point))).exp();
        point = foot;
    }
    rho0(point) * factor
}

fn transport_sine_errors(nodes: usize, tg: TimeGrid) -> Result<(f64, f64)> {
    let c = 0.5;
    let g = line(nodes);
    let rho0 = |x: f64| 1.0 + 0.5 * (PI * x).cos();
    let v = Field::scalar_fn(g, |x| c * (PI * x[0]).sin()).zero_boundary();
    let traj = vec![v; tg.steps() + 1];
    let sol = solve_transport(&Field::scalar_fn(g, |x| rho0(x[0])), &traj, &tg)?;
    let rho = sol.rho.last().expect("levels");
    let exact = Field::scalar_fn(g, |x| sine_flow_density(rho0, c, tg.t_end(), x[0]));
    let discrete = Field::scalar_fn(g, |x| sine_flow_time_discrete(rho0, c, tg, x[0]));
    Ok((norm_l2(&rho.sub(&exact)), norm_l2(&rho.sub(&discrete))))
}

/// Compressive flow `v = 0.5 sin(pi x)` at a fixed step of `0.1`, measured against the
/// time-discrete exact solution. At fixed `dt` the interpolation error accumulates
/// as `h^2 / dt`; the step is long enough that feet cross several cells.
pub fn transport_space() -> Result<ConvergenceStudy> {
    let tg = TimeGrid::new(0.5, 5)?;
    let nodes = [129, 257, 513];
    let errors = nodes
        .iter()
        .map(|&n| transport_sine_errors(n, tg).map(|e| e.1))
        .collect::<Result<_>>()?;
    Ok(ConvergenceStudy {
        name: "transport",
        refinement: Refinement::Space,
        sizes: nodes.iter().map(|&n| 1.0 / (n - 1) as f64).collect(),
        errors,
    })
}

/// Unforced temporal ratio of the same flow on a fine grid. The tracing and the
/// divergence quadrature are both second order in time, so this ratio is near 4;
/// it is reported for information only.
pub fn transport_time_unforced() -> Result<ConvergenceStudy> {
    let steps = [5, 10, 20];
    let errors = steps
        .iter()
        .map(|&s| transport_sine_errors(2049, TimeGrid::new(0.5, s)?).map(|e| e.0))
        .collect::<Result<_>>()?;
    Ok(ConvergenceStudy {
        name: "transport (unforced)",
        refinement: Refinement::Time,
        sizes: steps.iter().map(|&s| 0.5 / s as f64).collect(),
        errors,
    })
}

/// `rho = 1 + b(t) (x - 1/2)` with `b = sin(3t)`, transported by `v = 0.5 x (1 - x)`
/// with the source `s = rho_t + (rho v)_x`.
pub fn transport_time() -> Result<ConvergenceStudy> {
    let g = line(257);
    let b = |t: f64| (3.0 * t).sin();
    let db = |t: f64| 3.0 * (3.0 * t).cos();
    let v = |x: f64| 0.5 * x * (1.0 - x);
    let dv = |x: f64| 0.5 * (1.0 - 2.0 * x);
    let rho = move |t: f64, x: f64| 1.0 + b(t) * (x - 0.5);
    let steps = [25, 50, 100];
    let mut errors = Vec::new();
    for &s in &steps {
        let tg = TimeGrid::new(1.0, s)?;
        let vel = Field::scalar_fn(g, |x| v(x[0])).zero_boundary();
        let traj = vec![vel; s + 1];
        let out = solve_transport_forced(&Field::scalar_fn(g, |x| rho(0.0, x[0])), &traj, &tg, |n| {
            let t = tg.time(n);
            Field::scalar_fn(g, |x| {
                let x = x[0];
                db(t) * (x - 0.5) + b(t) * v(x) + rho(t, x) * dv(x)
            })
        })?;
        let exact = Field::scalar_fn(g, |x| rho(1.0, x[0]));
        errors.push(norm_l2(&out.last().expect("levels").sub(&exact)));
    }
    Ok(ConvergenceStudy {
        name: "transport",
        refinement: Refinement::Time,
        sizes: steps.iter().map(|&s| 1.0 / s as f64).collect(),
        errors,
    })
}

/// Director field from component functions.
fn director(g: GridSpec, f: impl Fn(f64) -> [f64; 3]) -> DirectorField {
    Field::from_fn(g, 3, |x, o| o.copy_from_slice(&f(x[0])))
}

/// Steady director `d* = (0.5 sin(pi x), 0.3 sin(2 pi x), cos(x / 2))` with
/// `v = 0.3 sin(pi x)` and `n = d*`, marched to steady state.
fn director_space_error(nodes: usize, params: &ModelParams) -> Result<f64> {
    let g = line(nodes);
    let ds = |x: f64| [0.5 * (PI * x).sin(), 0.3 * (2.0 * PI * x).sin(), (0.5 * x).cos()];
    let dds = |x: f64| [0.5 * PI * (PI * x).cos(), 0.6 * PI * (2.0 * PI * x).cos(), -0.5 * (0.5 * x).sin()];
    let d2ds = |x: f64| {
        [
            -0.5 * PI * PI * (PI * x).sin(),
            -1.2 * PI * PI * (2.0 * PI * x).sin(),
            -0.25 * (0.5 * x).cos(),
        ]
    };
    let vf = |x: f64| 0.3 * (PI * x).sin();
    let exact = director(g, ds);
    let gl = gl_force(&exact, params.sigma);
    let forcing = Field::from_fn(g, 3, |x, o| {
        let k = (x[0] * (nodes - 1) as f64).round() as usize;
        let (d1, d2) = (dds(x[0]), d2ds(x[0]));
        for c in 0..3 {
            o[c] = vf(x[0]) * d1[c] - params.nu * (d2[c] - gl.at(c, k));
        }
    });
    let v = Field::scalar_fn(g, |x| vf(x[0])).zero_boundary();
    let opts = StepOptions {
        forcing: Some(&forcing),
        ..StepOptions::with_solver(solver())
    };
    let tg = TimeGrid::new(3.0, 150)?;
    let mut d = exact.clone();
    for _ in 0..tg.steps() {
        d = director_step(&d, &v, &exact, params, tg.dt(), &opts)?.0;
    }
    Ok(norm_l2(&d.sub(&exact)))
}

pub fn director_space() -> Result<ConvergenceStudy> {
    let params = ModelParams::default();
    let nodes = [17, 33, 65];
    let errors = nodes
        .iter()
        .map(|&n| director_space_error(n, &params))
        .collect::<Result<_>>()?;
    Ok(ConvergenceStudy {
        name: "director",
        refinement: Refinement::Space,
        sizes: nodes.iter().map(|&n| 1.0 / (n - 1) as f64).collect(),
        errors,
    })
}

/// `d = m + a(t) x (1 - x) e1`, `a = sin(2t)`, `v = 0.4 x (1 - x)`, `n` the exact
/// solution at `t_n`. The stencils are exact on these polynomials, leaving only
/// the time error.
pub fn director_time() -> Result<ConvergenceStudy> {
    let params = ModelParams::default();
    let g = line(33);
    let a = |t: f64| (2.0 * t).sin();
    let da = |t: f64| 2.0 * (2.0 * t).cos();
    let exact = |t: f64| director(g, |x| [a(t) * x * (1.0 - x), 0.0, 1.0]);
    let v = Field::scalar_fn(g, |x| 0.4 * x[0] * (1.0 - x[0])).zero_boundary();
    let steps = [20, 40, 80];
    let mut errors = Vec::new();
    for &s in &steps {
        let tg = TimeGrid::new(1.0, s)?;
        let mut d = exact(0.0);
        for n in 0..s {
            let t = tg.time(n);
            let dn = exact(t);
            let gl = gl_force(&dn, params.sigma);
            let forcing = Field::from_fn(g, 3, |x, o| {
                let x = x[0];
                let k = (x * 32.0).round() as usize;
                let vx = 0.4 * x * (1.0 - x);
                o[0] = da(t) * x * (1.0 - x) + vx * a(t) * (1.0 - 2.0 * x) - params.nu * (-2.0 * a(t) - gl.at(0, k));
                o[1] = params.nu * gl.at(1, k);
                o[2] = params.nu * gl.at(2, k);
            });
            let opts = StepOptions {
                forcing: Some(&forcing),
                ..StepOptions::with_solver(solver())
            };
            d = director_step(&d, &v, &dn, &params, tg.dt(), &opts)?.0;
        }
        errors.push(norm_l2(&d.sub(&exact(1.0))));
    }
    Ok(ConvergenceStudy {
        name: "director",
        refinement: Refinement::Time,
        sizes: steps.iter().map(|&s| 1.0 / s as f64).collect(),
        errors,
    })
}

/// Steady `u* = 0.3 sin(pi x)` with `rho = 1 + 0.3 cos(pi x)`, `v = u*` and a
/// nonconstant director `d = (0.2 sin(pi x), 0, 1)`, marched to steady state.
fn momentum_space_error(nodes: usize, params: &ModelParams) -> Result<f64> {
    let g = line(nodes);
    let law = params.pressure;
    let rho_f = |x: f64| 1.0 + 0.3 * (PI * x).cos();
    let drho = |x: f64| -0.3 * PI * (PI * x).sin();
    let us = |x: f64| 0.3 * (PI * x).sin();
    let dus = |x: f64| 0.3 * PI * (PI * x).cos();
    let d2us = |x: f64| -0.3 * PI * PI * (PI * x).sin();
    // d = (e sin(pi x), 0, 1): d' = (e pi cos, 0, 0), d'' = (-e pi^2 sin, 0, 0)
    let e = 0.2;
    let d = director(g, |x| [e * (PI * x).sin(), 0.0, 1.0]);
    let gl = gl_force(&d, params.sigma);
    let forcing = Field::from_fn(g, 1, |x, o| {
        let k = (x[0] * (nodes - 1) as f64).round() as usize;
        let x = x[0];
        let d1 = e * PI * (PI * x).cos();
        let d2 = -e * PI * PI * (PI * x).sin();
        let elastic = -params.lambda * d1 * (d2 - gl.at(0, k));
        o[0] = rho_f(x) * us(x) * dus(x) + law.dp(rho_f(x)) * drho(x) - params.mu * d2us(x) - elastic;
    });
    let rho = Field::scalar_fn(g, |x| rho_f(x[0]));
    let exact = Field::scalar_fn(g, |x| us(x[0])).zero_boundary();
    let opts = StepOptions {
        forcing: Some(&forcing),
        ..StepOptions::with_solver(solver())
    };
    let tg = TimeGrid::new(3.0, 150)?;
    let mut u = exact.clone();
    for _ in 0..tg.steps() {
        u = momentum_step(&rho, &u, &exact, &d, params, tg.dt(), &opts)?.0;
    }
    Ok(norm_l2(&u.sub(&exact)))
}

pub fn momentum_space() -> Result<ConvergenceStudy> {
    let params = ModelParams::default();
    let nodes = [17, 33, 65];
    let errors = nodes
        .iter()
        .map(|&n| momentum_space_error(n, &params))
        .collect::<Result<_>>()?;
    Ok(ConvergenceStudy {
        name: "momentum",
        refinement: Refinement::Space,
        sizes: nodes.iter().map(|&n| 1.0 / (n - 1) as f64).collect(),
        errors,
    })
}

/// `u = a(t) x (1 - x)`, `a = sin(2t)`, constant density 1.5, `d = m`, `v` the exact
/// velocity at `t_n`.
pub fn momentum_time() -> Result<ConvergenceStudy> {
    let params = ModelParams::default();
    let g = line(33);
    let rho_c = 1.5;
    let a = |t: f64| (2.0 * t).sin();
    let da = |t: f64| 2.0 * (2.0 * t).cos();
    let exact = |t: f64| Field::scalar_fn(g, |x| a(t) * x[0] * (1.0 - x[0])).zero_boundary();
    let rho = Field::constant(g, &[rho_c]);
    let d = Field::constant(g, &params.m);
    let steps = [20, 40, 80];
    let mut errors = Vec::new();
    for &s in &steps {
        let tg = TimeGrid::new(1.0, s)?;
        let mut u = exact(0.0);
        for n in 0..s {
            let t = tg.time(n);
            let forcing = Field::scalar_fn(g, |x| {
                let x = x[0];
                let (q, dq) = (x * (1.0 - x), 1.0 - 2.0 * x);
                rho_c * (da(t) * q + a(t) * q * a(t) * dq) + 2.0 * params.mu * a(t)
            });
            let opts = StepOptions {
                forcing: Some(&forcing),
                ..StepOptions::with_solver(solver())
            };
            u = momentum_step(&rho, &u, &exact(t), &d, &params, tg.dt(), &opts)?.0;
        }
        errors.push(norm_l2(&u.sub(&exact(1.0))));
    }
    Ok(ConvergenceStudy {
        name: "momentum",
        refinement: Refinement::Time,
        sizes: steps.iter().map(|&s| 1.0 / s as f64).collect(),
        errors,
    })
}

/// The six studies gated by the acceptance windows.
pub fn mms_studies() -> Result<Vec<ConvergenceStudy>> {
    Ok(vec![
        transport_space()?,
        transport_time()?,
        director_space()?,
        director_time()?,
        momentum_space()?,
        momentum_time()?,
    ])
}

/// Smooth 1D data for the compatibility round trip: `rho0 >= 0.5`, `u0` zero on the boundary.
pub fn compat_data(nodes: usize) -> (ScalarField, VectorField, DirectorField) {
    let g = line(nodes);
    let rho = Field::scalar_fn(g, |x| 1.0 + 0.4 * (PI * x[0]).cos());
    let u = Field::scalar_fn(g, |x| (PI * x[0]).sin() + 0.5 * (2.0 * PI * x[0]).sin()).zero_boundary();
    let d = director(g, |x| {
        let a = 0.3 * (PI * x).sin();
        [a.sin(), 0.0, a.cos()]
    });
    (rho, u, d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundTrip {
    pub nodes: Vec<usize>,
    pub errors: Vec<f64>,
    /// `error / h^2` per resolution.
    pub constants: Vec<f64>,
}

impl RoundTrip {
    /// Relative spread `|C_1 - C_0| / C_0` of the two finest estimates.
    pub fn constant_spread(&self) -> f64 {
        let n = self.constants.len();
        (self.constants[n - 1] - self.constants[n - 2]).abs() / self.constants[n - 2]
    }
}

/// `u0 -> compute_g -> solve_initial_velocity` with `delta = 0`.
pub fn compat_roundtrip(nodes: &[usize]) -> Result<RoundTrip> {
    let params = ModelParams {
        delta: 0.0,
        ..ModelParams::default()
    };
    let mut out = RoundTrip {
        nodes: nodes.to_vec(),
        errors: Vec::new(),
        constants: Vec::new(),
    };
    for &n in nodes {
        let (rho, u, d) = compat_data(n);
        let g = compute_g(&u, &rho, &d, &params, 0.5)?;
        let back = solve_initial_velocity(&g, &rho, &d, &params, &solver())?;
        let err = norm_l2(&back.sub(&u));
        let h = rho.grid().h(0);
        out.errors.push(err);
        out.constants.push(err / (h * h));
    }
    Ok(out)
}

/// Fixed smooth 2D director `m + b(x) w(x)` with `b` the wall bump
/// `sin^2(pi x) sin^2(pi y)` and `w = (0.5 cos(pi y), 0.4 sin(pi x), 0.2)`, so that
/// `grad d` vanishes on the walls.
pub fn identity_director(nodes: usize) -> DirectorField {
    let g = GridSpec::square(1.0, nodes).expect("valid grid");
    let m = ModelParams::default().m;
    Field::from_fn(g, 3, |x, o| {
        let b = ((PI * x[0]).sin() * (PI * x[1]).sin()).powi(2);
        let w = [0.5 * (PI * x[1]).cos(), 0.4 * (PI * x[0]).sin(), 0.2];
        for c in 0..3 {
            o[c] = m[c] + b * w[c];
        }
    })
}

/// `||div S(d) - (grad d)^T (Laplacian d - f(d))||_{L^2}`.
pub fn stress_identity_defect(d: &DirectorField) -> f64 {
    let params = ModelParams::default();
    let div_s = div_tensor(&ericksen_stress(d, params.sigma));
    // elastic_force is -lambda (grad d)^T (Laplacian d - f), with lambda = 1 here
    norm_l2(&div_s.add(&elastic_force(d, &params)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sine_flow_at_time_zero_is_identity() {
        for x in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let r = sine_flow_density(|x| 1.0 + x, 0.5, 0.0, x);
            assert!((r - (1.0 + x)).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_sine_flow_conserves_mass() {
        let n = 4001;
        let h = 1.0 / (n - 1) as f64;
        let mass: f64 = (0..n)
            .map(|k| {
                let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
                w * sine_flow_density(|x| 1.0 + 0.5 * (PI * x).cos(), 0.5, 0.7, k as f64 * h)
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }
}

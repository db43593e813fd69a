//! Implicit-Euler steps with explicit couplings evaluated at `t_n`.

use super::solver::{spd_solve, LinearOperatorSpec, SolveStats, SolverConfig};
use crate::constitutive::{elastic_force, ericksen_stress, gl_linearized, pressure, ModelParams};
use crate::error::{Error, Result};
use crate::field::ops::{advect, div_tensor, grad, laplacian};
use crate::field::{DirectorField, Field, ScalarField, TimeGrid, VectorField, DIRECTOR_COMPONENTS};

/// Above this advective CFL number a step logs a warning.
pub const CFL_WARN: f64 = 0.5;
/// Above this advective CFL number a step fails.
pub const CFL_LIMIT: f64 = 2.0;

/// Diagnostics of one implicit step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepRecord {
    pub iterations: usize,
    pub relative_residual: f64,
    pub cfl: f64,
}

impl StepRecord {
    fn new(stats: SolveStats, cfl: f64) -> Self {
        StepRecord {
            iterations: stats.iterations,
            relative_residual: stats.relative_residual,
            cfl,
        }
    }
}

/// Knobs shared by the director and momentum steps.
#[derive(Clone, Copy, Debug)]
pub struct StepOptions<'a> {
    pub solver: SolverConfig,
    /// Extra right-hand side (manufactured-solution forcing), evaluated at `t_n`.
    pub forcing: Option<&'a Field>,
    /// Minimum admissible density in the momentum step. A check, never a clamp.
    pub rho_floor: f64,
}

impl Default for StepOptions<'_> {
    fn default() -> Self {
        StepOptions {
            solver: SolverConfig::default(),
            forcing: None,
            rho_floor: f64::MIN_POSITIVE,
        }
    }
}

impl StepOptions<'_> {
    pub fn with_solver(solver: SolverConfig) -> Self {
        StepOptions {
            solver,
            ..Self::default()
        }
    }
}

/// `dt * max_a max_k |v_a(k)| / h_a`.
pub fn advective_cfl(v: &VectorField, dt: f64) -> f64 {
    let grid = v.grid();
    (0..grid.dim())
        .map(|a| v.comp(a).iter().fold(0.0f64, |m, x| m.max(x.abs())) * dt / grid.h(a))
        .fold(0.0, f64::max)
}

fn check_cfl(v: &VectorField, dt: f64) -> Result<f64> {
    let cfl = advective_cfl(v, dt);
    if cfl > CFL_LIMIT {
        return Err(Error::Cfl { cfl, limit: CFL_LIMIT });
    }
    if cfl > CFL_WARN {
        log::warn!("advective CFL number {cfl:.3} exceeds {CFL_WARN}");
    }
    Ok(cfl)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::param("dt", format!("must be positive, got {dt}")))
    }
}

fn check_velocity(v: &VectorField, like: &Field, what: &str) -> Result<()> {
    v.ensure_same_grid(like, what)?;
    if v.ncomp() != v.grid().dim() {
        return Err(Error::GridMismatch(format!("{what}: velocity needs {} components", v.grid().dim())));
    }
    Ok(())
}

fn check_director(d: &Field, what: &str) -> Result<()> {
    if d.ncomp() != DIRECTOR_COMPONENTS {
        return Err(Error::GridMismatch(format!("{what}: director needs 3 components")));
    }
    Ok(())
}

/// One implicit-Euler step of `phi_t = kappa * Laplacian(phi)` with the boundary values of `phi`.
pub fn diffusion_step(phi: &Field, kappa: f64, dt: f64, solver: &SolverConfig) -> Result<(Field, SolveStats)> {
    check_dt(dt)?;
    let op = LinearOperatorSpec::uniform_mass(*phi.grid(), 1.0, kappa * dt, phi.clone())?;
    spd_solve(&op, phi, Some(phi), solver)
}

/// Implicit-Euler heat flow `(I - dt Laplacian) phi^{n+1} = phi^n` from `u0`, zero Dirichlet.
pub fn heat_flow(u0: &VectorField, tg: &TimeGrid, solver: &SolverConfig) -> Result<Vec<VectorField>> {
    let b = u0.boundary_max_abs();
    if b > 0.0 {
        return Err(Error::Precondition(format!("heat_flow: u0 is nonzero on the boundary (max {b:e})")));
    }
    let mut out = Vec::with_capacity(tg.steps() + 1);
    out.push(u0.clone());
    for n in 0..tg.steps() {
        let (next, _) = diffusion_step(&out[n], 1.0, tg.dt(), solver)?;
        out.push(next);
    }
    Ok(out)
}

/// Linearized director step:
/// `(I - nu dt Laplacian) d^{n+1} = d^n - dt (v . grad) d^n - dt nu glin(n, d^n) + dt F`,
/// with the boundary values of `d_n`.
pub fn director_step(
    d_n: &DirectorField,
    v: &VectorField,
    n: &DirectorField,
    params: &ModelParams,
    dt: f64,
    opts: &StepOptions<'_>,
) -> Result<(DirectorField, StepRecord)> {
    check_dt(dt)?;
    check_director(d_n, "director_step")?;
    check_director(n, "director_step")?;
    check_velocity(v, d_n, "director_step")?;
    d_n.ensure_same_grid(n, "director_step")?;
    let cfl = check_cfl(v, dt)?;

    let penalty = gl_linearized(n, d_n, params.m, params.sigma)?;
    let mut rhs = d_n.axpy(-dt, &advect(v, d_n)).axpy(-dt * params.nu, &penalty);
    if let Some(f) = opts.forcing {
        f.ensure_same_shape(d_n, "director forcing")?;
        rhs = rhs.axpy(dt, f);
    }
    let op = LinearOperatorSpec::uniform_mass(*d_n.grid(), 1.0, params.nu * dt, d_n.clone())?;
    let (d, stats) = spd_solve(&op, &rhs, Some(d_n), &opts.solver)?;
    Ok((d, StepRecord::new(stats, cfl)))
}

/// Linearized momentum step:
/// `(rho/dt) u^{n+1} - mu Laplacian u^{n+1} = (rho/dt) u^n - rho (v . grad) u^n - grad p(rho) + E(d_n) + F`,
/// zero Dirichlet, with `rho = rho_np1` and `E` the elastic force.
pub fn momentum_step(
    rho_np1: &ScalarField,
    u_n: &VectorField,
    v_n: &VectorField,
    d_n: &DirectorField,
    params: &ModelParams,
    dt: f64,
    opts: &StepOptions<'_>,
) -> Result<(VectorField, StepRecord)> {
    check_dt(dt)?;
    check_velocity(u_n, rho_np1, "momentum_step")?;
    check_velocity(v_n, rho_np1, "momentum_step")?;
    check_director(d_n, "momentum_step")?;
    d_n.ensure_same_grid(rho_np1, "momentum_step")?;
    if !(opts.rho_floor > 0.0) {
        return Err(Error::param("rho_floor", "must be positive"));
    }
    if let Some(k) = rho_np1.comp(0).iter().position(|&r| !(r >= opts.rho_floor)) {
        return Err(Error::Precondition(format!(
            "momentum_step: density {} at node {k} is below the floor {} (is the vacuum regularization on?)",
            rho_np1.at(0, k),
            opts.rho_floor
        )));
    }
    let cfl = check_cfl(v_n, dt)?;

    let grid = *rho_np1.grid();
    let rho = rho_np1.comp(0);
    let mass: Vec<f64> = rho.iter().map(|r| r / dt).collect();
    let adv = advect(v_n, u_n);
    let grad_p = grad(&pressure(rho_np1, &params.pressure)?);
    let elastic = elastic_force(d_n, params);
    let mut rhs = Field::zeros(grid, grid.dim());
    for a in 0..grid.dim() {
        let dst = rhs.comp_mut(a);
        for k in 0..grid.node_count() {
            dst[k] = mass[k] * u_n.at(a, k) - rho[k] * adv.at(a, k) - grad_p.at(a, k) + elastic.at(a, k);
        }
    }
    if let Some(f) = opts.forcing {
        f.ensure_same_shape(u_n, "momentum forcing")?;
        rhs = rhs.add(f);
    }
    let op = LinearOperatorSpec::new(mass, params.mu, Field::zeros(grid, grid.dim()))?;
    let (u, stats) = spd_solve(&op, &rhs, Some(u_n), &opts.solver)?;
    Ok((u, StepRecord::new(stats, cfl)))
}

fn sqrt_density(rho: &ScalarField, shift: f64) -> Result<Vec<f64>> {
    rho.comp(0)
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let s = r + shift;
            if s >= 0.0 {
                Ok(s.sqrt())
            } else {
                Err(Error::Precondition(format!("negative density {r} at node {k}")))
            }
        })
        .collect()
}

/// Velocity of the regularized compatibility problem:
/// `mu Laplacian u = (rho0 + delta)^{1/2} g + grad p(rho0 + delta) + lambda div S(d0)`,
/// with `S` the Ericksen stress and zero Dirichlet data.
pub fn solve_initial_velocity(
    g: &VectorField,
    rho0: &ScalarField,
    d0: &DirectorField,
    params: &ModelParams,
    solver: &SolverConfig,
) -> Result<VectorField> {
    check_velocity(g, rho0, "solve_initial_velocity")?;
    check_director(d0, "solve_initial_velocity")?;
    d0.ensure_same_grid(rho0, "solve_initial_velocity")?;
    let grid = *rho0.grid();
    let root = sqrt_density(rho0, params.delta)?;
    let rho_delta = rho0.map(|r| r + params.delta);
    let grad_p = grad(&pressure(&rho_delta, &params.pressure)?);
    let div_s = div_tensor(&ericksen_stress(d0, params.sigma));
    // the operator is -mu Laplacian, so the source enters with a minus sign
    let mut rhs = Field::zeros(grid, grid.dim());
    for a in 0..grid.dim() {
        let dst = rhs.comp_mut(a);
        for k in 0..grid.node_count() {
            dst[k] = -(root[k] * g.at(a, k) + grad_p.at(a, k) + params.lambda * div_s.at(a, k));
        }
    }
    let op = LinearOperatorSpec::uniform_mass(grid, 0.0, params.mu, Field::zeros(grid, grid.dim()))?;
    let (u, _) = spd_solve(&op, &rhs, None, solver)?;
    Ok(u)
}

/// Compatibility datum `g = rho0^{-1/2} (mu Laplacian u0 + E(d0) - grad p(rho0))`, with
/// `E(d0) = -lambda (grad d0)^T (Laplacian d0 - f(d0))` the elastic force of the
/// momentum step.
pub fn compute_g(
    u0: &VectorField,
    rho0: &ScalarField,
    d0: &DirectorField,
    params: &ModelParams,
    rho_min: f64,
) -> Result<VectorField> {
    check_velocity(u0, rho0, "compute_g")?;
    check_director(d0, "compute_g")?;
    d0.ensure_same_grid(rho0, "compute_g")?;
    if !(rho_min > 0.0) {
        return Err(Error::param("rho_min", "must be positive"));
    }
    if let Some(k) = rho0.comp(0).iter().position(|&r| !(r >= rho_min)) {
        return Err(Error::Precondition(format!(
            "compute_g: rho0 = {} at node {k} is below rho_min = {rho_min}; supply g directly",
            rho0.at(0, k)
        )));
    }
    let grid = *rho0.grid();
    let lap = laplacian(u0);
    let elastic = elastic_force(d0, params);
    let grad_p = grad(&pressure(rho0, &params.pressure)?);
    let mut g = Field::zeros(grid, grid.dim());
    for a in 0..grid.dim() {
        let dst = g.comp_mut(a);
        for k in 0..grid.node_count() {
            let balance = params.mu * lap.at(a, k) + elastic.at(a, k) - grad_p.at(a, k);
            dst[k] = balance / rho0.at(0, k).sqrt();
        }
    }
    g.check_finite("compute_g")
}

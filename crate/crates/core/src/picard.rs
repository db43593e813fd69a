//! Global-in-time Picard iteration.
//!
//! Each sweep freezes the previous iterate's velocity and director
//! trajectories `(v, n)` and solves the three linear problems in dependency
//! order: density by transport along `v`, director from `(v, n)`, velocity
//! from the new density and director.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::constitutive::{elastic_force, gl_force, pressure, ModelParams};
use crate::diagnostics::{monitor_norms, NormBundle};
use crate::error::{Error, Result};
use crate::field::norms::{norm_l2, seminorm, weighted_l2};
use crate::field::ops::{advect, div, grad, laplacian};
use crate::field::{
    DirectorField, Field, FluidState, GridSpec, ScalarField, TimeGrid, Trajectory, VectorField, DIRECTOR_COMPONENTS,
};
use crate::parabolic::{
    director_step, heat_flow, momentum_step, solve_initial_velocity, SolverConfig, StepOptions,
};
use crate::transport::solve_transport;

/// Tolerance for the boundary constraints on initial data and the
/// initial-value agreement of linearization inputs.
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    rho0: ScalarField,
    u0: VectorField,
    d0: DirectorField,
    g: Option<VectorField>,
}

impl InitialData {
    /// Checks `rho0 >= 0`, `u0 = 0` and `|d0| = 1` on the boundary (within
    /// [`CONSTRAINT_TOL`]). Boundary velocities inside the tolerance are set to exactly zero.
    pub fn new(rho0: ScalarField, u0: VectorField, d0: DirectorField, g: Option<VectorField>) -> Result<Self> {
        let grid = *rho0.grid();
        if rho0.ncomp() != 1 {
            return Err(Error::GridMismatch("rho0 must be scalar".into()));
        }
        if u0.grid() != &grid || u0.ncomp() != grid.dim() {
            return Err(Error::GridMismatch("u0 must be a velocity field on the density grid".into()));
        }
        if d0.grid() != &grid || d0.ncomp() != DIRECTOR_COMPONENTS {
            return Err(Error::GridMismatch("d0 must be a director field on the density grid".into()));
        }
        if let Some(g) = &g {
            if g.grid() != &grid || g.ncomp() != grid.dim() {
                return Err(Error::GridMismatch("g must be a velocity-shaped field on the density grid".into()));
            }
        }
        for f in [&rho0, &u0, &d0] {
            if !f.is_finite() {
                return Err(Error::NonFinite("initial data".into()));
            }
        }
        if let Some(k) = rho0.comp(0).iter().position(|&r| r < 0.0) {
            return Err(Error::Precondition(format!("rho0 is negative at node {k}")));
        }
        let b = u0.boundary_max_abs();
        if b > CONSTRAINT_TOL {
            return Err(Error::Precondition(format!("u0 is nonzero on the boundary (max {b:e})")));
        }
        for k in grid.boundary_nodes() {
            let norm2: f64 = (0..3).map(|c| d0.at(c, k).powi(2)).sum();
            if (norm2.sqrt() - 1.0).abs() > CONSTRAINT_TOL {
                return Err(Error::Precondition(format!(
                    "|d0| = {} at boundary node {k}, expected 1",
                    norm2.sqrt()
                )));
            }
        }
        Ok(InitialData {
            u0: u0.zero_boundary(),
            rho0,
            d0,
            g,
        })
    }

    /// Builds `u0` from `g` through the regularized compatibility problem.
    pub fn from_compatibility(
        rho0: ScalarField,
        d0: DirectorField,
        g: VectorField,
        params: &ModelParams,
        solver: &SolverConfig,
    ) -> Result<Self> {
        let u0 = solve_initial_velocity(&g, &rho0, &d0, params, solver)?;
        Self::new(rho0, u0, d0, Some(g))
    }

    /// `(alpha, 0, m)`.
    pub fn equilibrium(grid: GridSpec, alpha: f64, m: [f64; 3]) -> Result<Self> {
        Self::new(
            Field::constant(grid, &[alpha]),
            Field::zeros(grid, grid.dim()),
            Field::constant(grid, &m),
            None,
        )
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho0.grid()
    }

    pub fn rho0(&self) -> &ScalarField {
        &self.rho0
    }

    pub fn u0(&self) -> &VectorField {
        &self.u0
    }

    pub fn d0(&self) -> &DirectorField {
        &self.d0
    }

    pub fn g(&self) -> Option<&VectorField> {
        self.g.as_ref()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardConfig {
    pub time: TimeGrid,
    pub psi_tol: f64,
    pub max_sweeps: usize,
    /// Consecutive non-contracting sweeps tolerated before declaring divergence.
    pub divergence_patience: usize,
    pub solver: SolverConfig,
}

impl PicardConfig {
    pub fn new(time: TimeGrid) -> Self {
        PicardConfig {
            time,
            psi_tol: 1e-10,
            max_sweeps: 50,
            divergence_patience: 3,
            solver: SolverConfig::with_tol(1e-12),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi_tol > 0.0 && self.psi_tol.is_finite()) {
            return Err(Error::param("psi_tol", format!("must be positive, got {}", self.psi_tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::param("max_sweeps", "must be at least 1"));
        }
        if self.divergence_patience == 0 {
            return Err(Error::param("divergence_patience", "must be at least 1"));
        }
        self.solver.validate()
    }
}

/// Heat-flow velocity and frozen director: the iterates that start the first sweep.
pub fn initial_iterates(
    data: &InitialData,
    tg: &TimeGrid,
    solver: &SolverConfig,
) -> Result<(Vec<VectorField>, Vec<DirectorField>)> {
    let u = heat_flow(&data.u0, tg, solver)?;
    let d = vec![data.d0.clone(); tg.steps() + 1];
    Ok((u, d))
}

/// Aggregates of one linearized solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepStats {
    pub solver_iterations: usize,
    pub cfl_max: f64,
    pub min_rho: f64,
    /// Smallest value of the certified density lower bound over time.
    pub rho_bound: f64,
    /// `min_{n,k} rho_k^n - delta exp(-int_0^{t_n} ||div v||_inf)`; nonnegative up to
    /// rounding whenever the certificate holds.
    pub positivity_margin: f64,
}

#[derive(Clone, Debug)]
pub struct LinearizedSolution {
    pub trajectory: Trajectory,
    pub stats: SweepStats,
}

fn check_inputs(data: &InitialData, v: &[VectorField], n: &[DirectorField], tg: &TimeGrid) -> Result<()> {
    let levels = tg.steps() + 1;
    if v.len() != levels || n.len() != levels {
        return Err(Error::Precondition(format!(
            "linearization inputs have {} and {} levels, time grid needs {levels}",
            v.len(),
            n.len()
        )));
    }
    for (l, (vl, nl)) in v.iter().zip(n).enumerate() {
        vl.ensure_same_shape(&data.u0, &format!("velocity input level {l}"))?;
        nl.ensure_same_shape(&data.d0, &format!("director input level {l}"))?;
    }
    let dv = v[0].max_abs_diff(&data.u0);
    if dv > CONSTRAINT_TOL {
        return Err(Error::Precondition(format!("v(0) differs from u0 by {dv:e}")));
    }
    let dn = n[0].max_abs_diff(&data.d0);
    if dn > CONSTRAINT_TOL {
        return Err(Error::Precondition(format!("n(0) differs from d0 by {dn:e}")));
    }
    Ok(())
}

/// One sweep: density from `v`, director from `(v, n)`, velocity from `(rho, d, v)`.
///
/// The density starts from `rho0 + delta`. The momentum steps use half the
/// certified density bound as their floor; a vanishing bound is an error.
pub fn solve_linearized(
    data: &InitialData,
    v: &[VectorField],
    n: &[DirectorField],
    params: &ModelParams,
    tg: &TimeGrid,
    solver: &SolverConfig,
) -> Result<LinearizedSolution> {
    params.validate()?;
    check_inputs(data, v, n, tg)?;
    let dt = tg.dt();
    let rho0 = data.rho0.map(|r| r + params.delta);
    let transport = solve_transport(&rho0, v, tg)?;
    let mut stats = SweepStats {
        min_rho: transport.rho.iter().map(Field::min).fold(f64::INFINITY, f64::min),
        rho_bound: transport.lower_bound.iter().copied().fold(f64::INFINITY, f64::min),
        ..SweepStats::default()
    };
    let delta_bound = transport.bound_from(params.delta, dt);
    stats.positivity_margin = transport
        .rho
        .iter()
        .zip(&delta_bound)
        .map(|(r, b)| r.min() - b)
        .fold(f64::INFINITY, f64::min);
    if !(stats.rho_bound > 0.0) {
        return Err(Error::Precondition(
            "density lower bound vanishes; vacuum data need delta > 0".into(),
        ));
    }

    let opts = StepOptions::with_solver(*solver);
    let mut d = Vec::with_capacity(v.len());
    d.push(data.d0.clone());
    for k in 0..tg.steps() {
        let (next, rec) = director_step(&d[k], &v[k], &n[k], params, dt, &opts)?;
        stats.solver_iterations += rec.iterations;
        stats.cfl_max = stats.cfl_max.max(rec.cfl);
        d.push(next);
    }

    let mut u = Vec::with_capacity(v.len());
    u.push(data.u0.clone());
    for k in 0..tg.steps() {
        let step_opts = StepOptions {
            rho_floor: 0.5 * transport.lower_bound[k + 1],
            ..opts
        };
        let (next, rec) = momentum_step(&transport.rho[k + 1], &u[k], &v[k], &d[k], params, dt, &step_opts)?;
        stats.solver_iterations += rec.iterations;
        stats.cfl_max = stats.cfl_max.max(rec.cfl);
        u.push(next);
    }

    let states = transport
        .rho
        .into_iter()
        .zip(u)
        .zip(d)
        .enumerate()
        .map(|(l, ((r, u), d))| FluidState::new(r, u, d, tg.time(l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearizedSolution {
        trajectory: Trajectory::new(*tg, states)?,
        stats,
    })
}

/// Squared distance `||rho_a - rho_b||^2 + ||d_a - d_b||^2 + ||grad(d_a - d_b)||^2
/// + ||sqrt(rho_a) (u_a - u_b)||^2`, weighted by the density of `newer`.
pub fn psi_distance(newer: &FluidState, older: &FluidState) -> Result<f64> {
    newer.rho.ensure_same_shape(&older.rho, "psi_distance")?;
    newer.u.ensure_same_shape(&older.u, "psi_distance")?;
    newer.d.ensure_same_shape(&older.d, "psi_distance")?;
    let dd = newer.d.sub(&older.d);
    let rho = norm_l2(&newer.rho.sub(&older.rho)).powi(2);
    let dir = norm_l2(&dd).powi(2) + seminorm(&dd, 1).powi(2);
    let vel = weighted_l2(&newer.rho, &newer.u.sub(&older.u))?.powi(2);
    Ok(rho + dir + vel)
}

/// `max_l psi_distance(newer_l, older_l)` over time levels.
pub fn psi_sup(newer: &Trajectory, older: &Trajectory) -> Result<f64> {
    if newer.len() != older.len() {
        return Err(Error::GridMismatch("trajectories have different lengths".into()));
    }
    newer
        .states()
        .iter()
        .zip(older.states())
        .try_fold(0.0f64, |m, (a, b)| Ok(m.max(psi_distance(a, b)?)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    Diverged,
    MaxSweeps,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Diverged => "diverged",
            Termination::MaxSweeps => "max_sweeps",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    /// 1-based sweep number.
    pub sweep: usize,
    /// Distance to the previous sweep's trajectory; absent for sweep 1.
    pub psi_sup: Option<f64>,
    /// `psi_sup` over the previous sweep's `psi_sup`; present from sweep 3 on.
    pub ratio: Option<f64>,
    /// Running sum of `psi_sup`.
    pub cumulative: f64,
    pub stats: SweepStats,
    /// Sup-in-time monitored norms of this sweep's trajectory.
    pub norms: NormBundle,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardReport {
    pub sweeps: Vec<SweepRecord>,
    pub delta: f64,
    pub psi_tol: f64,
    pub termination: Termination,
}

impl PicardReport {
    pub fn psi_sups(&self) -> Vec<f64> {
        self.sweeps.iter().filter_map(|s| s.psi_sup).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.sweeps.iter().filter_map(|s| s.ratio).collect()
    }

    /// Partial sums of `psi_sup`, one per sweep that has a distance.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.sweeps
            .iter()
            .filter(|s| s.psi_sup.is_some())
            .map(|s| s.cumulative)
            .collect()
    }

    pub fn sweep_count(&self) -> usize {
        self.sweeps.len()
    }

    /// One row per sweep. Wall-clock time is left out so that the table is
    /// reproducible byte for byte; see [`PicardReport::timing_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,psi_sup,ratio,cumulative,solver_iterations,cfl_max,min_rho,rho_bound,positivity_margin");
        for name in NormBundle::NAMES {
            out.push_str(",sup_");
            out.push_str(name);
        }
        out.push('\n');
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        for s in &self.sweeps {
            let _ = write!(
                out,
                "{},{},{},{:e},{},{:e},{:e},{:e},{:e}",
                s.sweep,
                opt(s.psi_sup),
                opt(s.ratio),
                s.cumulative,
                s.stats.solver_iterations,
                s.stats.cfl_max,
                s.stats.min_rho,
                s.stats.rho_bound,
                s.stats.positivity_margin
            );
            for v in s.norms.values() {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("sweep,wall_seconds\n");
        for s in &self.sweeps {
            let _ = writeln!(out, "{},{:.6}", s.sweep, s.wall_seconds);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Iterates linearized sweeps with `(v, n)` taken from the previous sweep until
/// `psi_sup < psi_tol`.
///
/// Fails with [`Error::Diverged`] after `divergence_patience` consecutive ratios
/// `>= 1` and with [`Error::NotConverged`] after `max_sweeps`; both carry the report.
pub fn picard_solve(data: &InitialData, params: &ModelParams, cfg: &PicardConfig) -> Result<(Trajectory, PicardReport)> {
    params.validate()?;
    cfg.validate()?;
    let tg = cfg.time;
    let (mut v, mut n) = initial_iterates(data, &tg, &cfg.solver)?;
    let mut report = PicardReport {
        sweeps: Vec::new(),
        delta: params.delta,
        psi_tol: cfg.psi_tol,
        termination: Termination::MaxSweeps,
    };
    let mut previous: Option<Trajectory> = None;
    let mut cumulative = 0.0;
    let mut non_contracting = 0;
    for sweep in 1..=cfg.max_sweeps {
        let clock = Instant::now();
        let sol = solve_linearized(data, &v, &n, params, &tg, &cfg.solver)?;
        let psi = previous.as_ref().map(|p| psi_sup(&sol.trajectory, p)).transpose()?;
        if let Some(p) = psi {
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("Picard distance at sweep {sweep}")));
            }
        }
        let last_psi = report.sweeps.last().and_then(|s| s.psi_sup);
        let ratio = match (psi, last_psi) {
            (Some(p), Some(q)) if q > 0.0 => Some(p / q),
            (Some(p), Some(_)) => Some(if p > 0.0 { f64::INFINITY } else { 0.0 }),
            _ => None,
        };
        cumulative += psi.unwrap_or(0.0);
        let norms = monitor_norms(&sol.trajectory)?.sup;
        report.sweeps.push(SweepRecord {
            sweep,
            psi_sup: psi,
            ratio,
            cumulative,
            stats: sol.stats,
            norms,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        log::info!(
            "sweep {sweep}: psi_sup = {}, ratio = {}",
            psi.map_or("-".into(), |p| format!("{p:.3e}")),
            ratio.map_or("-".into(), |r| format!("{r:.3}"))
        );
        if psi.is_some_and(|p| p < cfg.psi_tol) {
            report.termination = Termination::Converged;
            return Ok((sol.trajectory, report));
        }
        if ratio.is_some_and(|r| r >= 1.0) {
            non_contracting += 1;
            if non_contracting >= cfg.divergence_patience {
                report.termination = Termination::Diverged;
                return Err(Error::Diverged(Box::new(report)));
            }
        } else {
            non_contracting = 0;
        }
        v = sol.trajectory.velocities();
        n = sol.trajectory.directors();
        previous = Some(sol.trajectory);
    }
    Err(Error::NotConverged(Box::new(report)))
}

/// Residual norms of the nonlinear equations at one interior time level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearResidual {
    pub level: usize,
    pub continuity: f64,
    pub momentum: f64,
    pub director: f64,
}

/// Discrete residuals of the continuity, momentum and director equations at
/// every interior time level, with central time differences and L^2 norms over
/// interior nodes:
///
/// - `rho_t + div(rho u)`
/// - `rho u_t + rho (u . grad) u + grad p - mu Laplacian u - E(d)`
/// - `d_t + (u . grad) d - nu (Laplacian d - f(d))`
pub fn nonlinear_residual(traj: &Trajectory, params: &ModelParams) -> Result<Vec<NonlinearResidual>> {
    let dt = traj.timegrid().dt();
    let s = traj.states();
    let mut out = Vec::new();
    for l in 1..s.len().saturating_sub(1) {
        let (prev, cur, next) = (&s[l - 1], &s[l], &s[l + 1]);
        let grid = *cur.rho.grid();
        let inv = 0.5 / dt;

        let rho_t = next.rho.sub(&prev.rho).scale(inv);
        let mut flux = Field::zeros(grid, grid.dim());
        for a in 0..grid.dim() {
            for (k, f) in flux.comp_mut(a).iter_mut().enumerate() {
                *f = cur.rho.at(0, k) * cur.u.at(a, k);
            }
        }
        let continuity = rho_t.add(&div(&flux));

        let u_t = next.u.sub(&prev.u).scale(inv);
        let adv = advect(&cur.u, &cur.u);
        let grad_p = grad(&pressure(&cur.rho, &params.pressure)?);
        let visc = laplacian(&cur.u).scale(params.mu);
        let elastic = elastic_force(&cur.d, params);
        let mut momentum = grad_p.sub(&visc).sub(&elastic);
        for a in 0..grid.dim() {
            for (k, m) in momentum.comp_mut(a).iter_mut().enumerate() {
                *m += cur.rho.at(0, k) * (u_t.at(a, k) + adv.at(a, k));
            }
        }

        let d_t = next.d.sub(&prev.d).scale(inv);
        let molecular = laplacian(&cur.d).sub(&gl_force(&cur.d, params.sigma));
        let director = d_t.add(&advect(&cur.u, &cur.d)).axpy(-params.nu, &molecular);

        out.push(NonlinearResidual {
            level: l,
            continuity: norm_l2(&continuity.zero_boundary()),
            momentum: norm_l2(&momentum.zero_boundary()),
            director: norm_l2(&director.zero_boundary()),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::momentum_step;
    use std::f64::consts::PI;

    #[test]
    fn initial_data_constraints() {
        let g = GridSpec::line(1.0, 9).unwrap();
        let rho = Field::constant(g, &[1.0]);
        let m = Field::constant(g, &[0.0, 0.0, 1.0]);
        let moving = Field::constant(g, &[0.1]);
        assert!(InitialData::new(rho.clone(), moving, m.clone(), None).is_err());
        let short = Field::constant(g, &[0.0, 0.0, 0.9]);
        assert!(InitialData::new(rho.clone(), Field::zeros(g, 1), short, None).is_err());
        let sine = Field::scalar_fn(g, |x| (PI * x[0]).sin());
        let data = InitialData::new(rho, sine, m, None).unwrap();
        assert_eq!(data.u0().boundary_max_abs(), 0.0);
    }

    #[test]
    fn psi_distance_hand_example() {
        // h = 0.25, weights (0.125, 0.25, 0.25, 0.25, 0.125)
        // rho: a - b = (0, 1, 0, 1, 0) -> 0.5
        // d: difference (0, 0, 1, 0, 0) in component 0 -> L2^2 = 0.25
        //    its derivative (one-sided at ends): (-2, 2, 0, -2, 2) -> 0.125*4*2 + 0.25*8 = 3
        // u: difference (0, 2, 0, -1, 0), rho_a (1, 2, 1, 3, 1) -> 0.25*(2*4 + 3*1) = 2.75
        let g = GridSpec::line(1.0, 5).unwrap();
        let state = |rho: Vec<f64>, u: Vec<f64>, d0: Vec<f64>| {
            let mut d = Field::constant(g, &[0.0, 0.0, 1.0]);
            d.comp_mut(0).copy_from_slice(&d0);
            FluidState::new(
                Field::from_values(g, 1, rho).unwrap(),
                Field::from_values(g, 1, u).unwrap(),
                d,
                0.0,
            )
            .unwrap()
        };
        let a = state(vec![1.0, 2.0, 1.0, 3.0, 1.0], vec![0.0, 2.0, 0.0, -1.0, 0.0], vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = state(vec![1.0, 1.0, 1.0, 2.0, 1.0], vec![0.0; 5], vec![0.0; 5]);
        let psi = psi_distance(&a, &b).unwrap();
        assert!((psi - (0.5 + 0.25 + 3.0 + 2.75)).abs() < 1e-13, "{psi}");
        assert_eq!(psi_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn psi_velocity_only_difference() {
        let g = GridSpec::line(1.0, 9).unwrap();
        let rho = Field::constant(g, &[1.0]);
        let d = Field::constant(g, &[0.0, 0.0, 1.0]);
        let ua = Field::scalar_fn(g, |x| x[0] * (1.0 - x[0]));
        let a = FluidState::new(rho.clone(), ua.clone(), d.clone(), 0.0).unwrap();
        let b = FluidState::new(rho, Field::zeros(g, 1), d, 0.0).unwrap();
        let expect = norm_l2(&ua).powi(2);
        assert!((psi_distance(&a, &b).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_converges_at_sweep_two() {
        let g = GridSpec::line(1.0, 17).unwrap();
        let params = ModelParams::default();
        let data = InitialData::equilibrium(g, 1.0, params.m).unwrap();
        let cfg = PicardConfig::new(TimeGrid::new(0.01, 10).unwrap());
        let (traj, report) = picard_solve(&data, &params, &cfg).unwrap();
        assert_eq!(report.sweep_count(), 2);
        assert_eq!(report.termination, Termination::Converged);
        assert_eq!(report.sweeps[1].psi_sup, Some(0.0));
        for s in traj.states() {
            assert!((s.rho.max_abs() - 1.001).abs() < 1e-14);
            assert_eq!(s.u.max_abs(), 0.0);
        }
        for r in nonlinear_residual(&traj, &params).unwrap() {
            assert!(r.continuity <= 1e-10 && r.momentum <= 1e-10 && r.director <= 1e-10);
        }
    }

    #[test]
    fn sweep_is_composition_of_steps() {
        let g = GridSpec::line(1.0, 17).unwrap();
        let params = ModelParams::default();
        let tg = TimeGrid::new(0.01, 4).unwrap();
        let rho0 = Field::scalar_fn(g, |x| 1.0 + 0.2 * (PI * x[0]).cos());
        let u0 = Field::scalar_fn(g, |x| 0.1 * (PI * x[0]).sin());
        let d0 = Field::from_fn(g, 3, |x, o| {
            o[0] = 0.1 * (PI * x[0]).sin();
            o[2] = 1.0;
        });
        let data = InitialData::new(rho0, u0, d0, None).unwrap();
        let solver = SolverConfig::with_tol(1e-12);
        let (v, n) = initial_iterates(&data, &tg, &solver).unwrap();
        let sol = solve_linearized(&data, &v, &n, &params, &tg, &solver).unwrap();
        let s = sol.trajectory.states();
        let opts = StepOptions::with_solver(solver);
        let (d1, _) = director_step(&s[1].d, &v[1], &n[1], &params, tg.dt(), &opts).unwrap();
        assert_eq!(d1, s[2].d);
        let floor = StepOptions {
            rho_floor: 1e-3,
            ..opts
        };
        let (u1, _) = momentum_step(&s[2].rho, &s[1].u, &v[1], &s[1].d, &params, tg.dt(), &floor).unwrap();
        assert_eq!(u1, s[2].u);
        for st in s {
            assert_eq!(st.u.boundary_max_abs(), 0.0);
            for k in g.boundary_nodes() {
                assert_eq!(st.d.node_value(k), data.d0().node_value(k));
            }
        }
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let g = GridSpec::line(1.0, 9).unwrap();
        let params = ModelParams::default();
        let tg = TimeGrid::new(0.01, 2).unwrap();
        let data = InitialData::equilibrium(g, 1.0, params.m).unwrap();
        let v = vec![Field::scalar_fn(g, |x| 0.1 * x[0] * (1.0 - x[0])); 3];
        let n = vec![data.d0().clone(); 3];
        let solver = SolverConfig::default();
        assert!(matches!(
            solve_linearized(&data, &v, &n, &params, &tg, &solver),
            Err(Error::Precondition(_))
        ));
        let vacuum = InitialData::equilibrium(g, 0.0, params.m).unwrap();
        let no_delta = ModelParams { delta: 0.0, ..params };
        let (v, n) = initial_iterates(&vacuum, &tg, &solver).unwrap();
        assert!(solve_linearized(&vacuum, &v, &n, &no_delta, &tg, &solver).is_err());
    }
}

//! Semi-Lagrangian solver for the linear continuity equation `rho_t + div(rho v) = 0`.
//!
//! Each step traces the characteristic through a node back over one time
//! interval and applies the characteristic representation
//! `rho(t+dt, x) = rho(t, y) exp(-int div v)` on that segment.

use crate::error::{Error, Result};
use crate::field::ops::{div, sample};
use crate::field::{Field, GridSpec, ScalarField, TimeGrid, VectorField};

/// Velocity on `[t_n, t_n + dt]`, linear in time between the two end fields.
#[derive(Clone, Copy, Debug)]
pub struct VelocitySlab<'a> {
    old: &'a VectorField,
    new: &'a VectorField,
    dt: f64,
}

impl<'a> VelocitySlab<'a> {
    pub fn new(old: &'a VectorField, new: &'a VectorField, dt: f64) -> Result<Self> {
        old.ensure_same_shape(new, "velocity slab")?;
        if old.ncomp() != old.grid().dim() {
            return Err(Error::GridMismatch("slab velocity needs dim components".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        Ok(VelocitySlab { old, new, dt })
    }

    pub fn grid(&self) -> &GridSpec {
        self.old.grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Velocity at fraction `theta` of the slab (0 = start, 1 = end) and point `x`.
    fn velocity(&self, theta: f64, x: &[f64; 2]) -> [f64; 2] {
        let grid = self.grid();
        let mut v = [0.0; 2];
        for (a, va) in v.iter_mut().enumerate().take(grid.dim()) {
            let o = sample(grid, self.old.comp(a), x);
            let n = sample(grid, self.new.comp(a), x);
            *va = (1.0 - theta) * o + theta * n;
        }
        v
    }
}

fn clamped(grid: &GridSpec, mut x: [f64; 2]) -> [f64; 2] {
    grid.clamp(&mut x);
    x
}

/// Foot at `t_n` of the characteristic through `x` at `t_n + dt`: one backward
/// midpoint (RK2) step, clamped to the closed box.
pub fn trace_characteristic(slab: &VelocitySlab<'_>, x: &[f64]) -> [f64; 2] {
    let grid = slab.grid();
    let dim = grid.dim();
    let mut start = [0.0; 2];
    start[..dim].copy_from_slice(&x[..dim]);
    let start = clamped(grid, start);
    let v_end = slab.velocity(1.0, &start);
    let mut mid = start;
    for a in 0..dim {
        mid[a] -= 0.5 * slab.dt * v_end[a];
    }
    let mid = clamped(grid, mid);
    let v_mid = slab.velocity(0.5, &mid);
    let mut foot = start;
    for a in 0..dim {
        foot[a] -= slab.dt * v_mid[a];
    }
    clamped(grid, foot)
}

fn step_inner(
    rho_n: &ScalarField,
    slab: &VelocitySlab<'_>,
    div_old: &ScalarField,
    div_new: &ScalarField,
    source: Option<&ScalarField>,
) -> ScalarField {
    let grid = *rho_n.grid();
    let dt = slab.dt;
    let values = (0..grid.node_count())
        .map(|k| {
            let x = grid.coords(k);
            let foot = trace_characteristic(slab, &x);
            // trapezoid rule for the divergence integral along the segment
            let integral = 0.5 * dt * (sample(&grid, div_old.comp(0), &foot) + div_new.at(0, k));
            let mut carried = sample(&grid, rho_n.comp(0), &foot);
            if let Some(s) = source {
                carried += dt * sample(&grid, s.comp(0), &foot);
            }
            carried * (-integral).exp()
        })
        .collect();
    Field::from_raw(grid, 1, values)
}

fn check_density(rho: &ScalarField) -> Result<()> {
    if rho.ncomp() != 1 {
        return Err(Error::GridMismatch("transported density must be scalar".into()));
    }
    if rho.min() < 0.0 {
        return Err(Error::Precondition("transport requires a nonnegative density".into()));
    }
    Ok(())
}

/// Advances `rho_n` across one slab.
pub fn transport_step(rho_n: &ScalarField, slab: &VelocitySlab<'_>) -> Result<ScalarField> {
    check_density(rho_n)?;
    rho_n.ensure_same_grid(slab.old, "transport_step")?;
    let out = step_inner(rho_n, slab, &div(slab.old), &div(slab.new), None);
    out.check_finite("transport_step")
}

/// One step with an additional source `s` in `rho_t + div(rho v) = s`, applied
/// explicitly at the foot at `t_n`. Used by manufactured-solution studies.
pub fn transport_step_forced(
    rho_n: &ScalarField,
    slab: &VelocitySlab<'_>,
    source: &ScalarField,
) -> Result<ScalarField> {
    rho_n.ensure_same_grid(slab.old, "transport_step_forced")?;
    rho_n.ensure_same_grid(source, "transport_step_forced")?;
    let out = step_inner(rho_n, slab, &div(slab.old), &div(slab.new), Some(source));
    out.check_finite("transport_step_forced")
}

/// Density trajectory plus the data of the positivity certificate.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub rho: Vec<ScalarField>,
    /// `max |div v(t_n)|` per time level.
    pub div_max: Vec<f64>,
    /// Certified lower bound `min(rho_0) exp(-int_0^t ||div v||_inf)` per level,
    /// with the integral by the trapezoid rule over `div_max`.
    pub lower_bound: Vec<f64>,
}

impl TransportSolution {
    /// Lower bound the certificate yields for a start value `floor` instead of `min(rho_0)`.
    pub fn bound_from(&self, floor: f64, dt: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.div_max.len());
        let mut integral = 0.0;
        out.push(floor);
        for w in self.div_max.windows(2) {
            integral += 0.5 * dt * (w[0] + w[1]);
            out.push(floor * (-integral).exp());
        }
        out
    }
}

/// Absolute slack allowed below the certified bound.
pub const POSITIVITY_SLACK: f64 = 1e-12;

pub(crate) fn check_velocity_trajectory(v: &[VectorField], grid: &GridSpec, tg: &TimeGrid) -> Result<()> {
    if v.len() != tg.steps() + 1 {
        return Err(Error::Precondition(format!(
            "velocity trajectory has {} levels, time grid needs {}",
            v.len(),
            tg.steps() + 1
        )));
    }
    for (n, vn) in v.iter().enumerate() {
        if vn.grid() != grid || vn.ncomp() != grid.dim() {
            return Err(Error::GridMismatch(format!("velocity level {n} does not match the density grid")));
        }
        let b = vn.boundary_max_abs();
        if b > 1e-12 {
            return Err(Error::Precondition(format!(
                "velocity level {n} is nonzero on the boundary (max {b:e})"
            )));
        }
    }
    Ok(())
}

/// Transports `rho0` along the velocity trajectory and checks the positivity certificate
/// at every node and level; a violation is an error.
pub fn solve_transport(rho0: &ScalarField, v: &[VectorField], tg: &TimeGrid) -> Result<TransportSolution> {
    check_density(rho0)?;
    check_velocity_trajectory(v, rho0.grid(), tg)?;
    let divs: Vec<ScalarField> = v.iter().map(div).collect();
    let div_max: Vec<f64> = divs.iter().map(Field::max_abs).collect();
    let mut rho = Vec::with_capacity(v.len());
    rho.push(rho0.clone());
    for n in 0..tg.steps() {
        let slab = VelocitySlab::new(&v[n], &v[n + 1], tg.dt())?;
        let next = step_inner(&rho[n], &slab, &divs[n], &divs[n + 1], None).check_finite("solve_transport")?;
        rho.push(next);
    }
    let mut sol = TransportSolution {
        rho,
        div_max,
        lower_bound: Vec::new(),
    };
    sol.lower_bound = sol.bound_from(rho0.min(), tg.dt());
    for (level, (r, &bound)) in sol.rho.iter().zip(&sol.lower_bound).enumerate() {
        for (node, &value) in r.comp(0).iter().enumerate() {
            if value < 0.0 || value < bound - POSITIVITY_SLACK {
                return Err(Error::Positivity {
                    level,
                    node,
                    value,
                    bound,
                });
            }
        }
    }
    Ok(sol)
}

/// Transport with a source term, without the positivity certificate (sources may be negative).
pub fn solve_transport_forced(
    rho0: &ScalarField,
    v: &[VectorField],
    tg: &TimeGrid,
    mut source: impl FnMut(usize) -> ScalarField,
) -> Result<Vec<ScalarField>> {
    check_velocity_trajectory(v, rho0.grid(), tg)?;
    let divs: Vec<ScalarField> = v.iter().map(div).collect();
    let mut rho = vec![rho0.clone()];
    for n in 0..tg.steps() {
        let slab = VelocitySlab::new(&v[n], &v[n + 1], tg.dt())?;
        let s = source(n);
        rho0.ensure_same_grid(&s, "transport source")?;
        let next = step_inner(&rho[n], &slab, &divs[n], &divs[n + 1], Some(&s)).check_finite("solve_transport_forced")?;
        rho.push(next);
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    #[test]
    fn zero_velocity_keeps_feet_and_density() {
        let g = GridSpec::square(1.0, 9).unwrap();
        let v = Field::zeros(g, 2);
        let slab = VelocitySlab::new(&v, &v, 0.1).unwrap();
        for k in 0..g.node_count() {
            let x = g.coords(k);
            assert_eq!(trace_characteristic(&slab, &x), x);
        }
        let rho = Field::scalar_fn(g, |x| 1.0 + x[0] * x[1]);
        assert_eq!(transport_step(&rho, &slab).unwrap(), rho);
    }

    #[test]
    fn constant_velocity_foot_is_exact() {
        let g = GridSpec::square(1.0, 9).unwrap();
        let v = Field::constant(g, &[0.3, -0.2]);
        let slab = VelocitySlab::new(&v, &v, 0.05).unwrap();
        let foot = trace_characteristic(&slab, &[0.5, 0.5]);
        assert!((foot[0] - (0.5 - 0.015)).abs() < 1e-15);
        assert!((foot[1] - (0.5 + 0.01)).abs() < 1e-15);
        // feet leaving the box are clamped
        let foot = trace_characteristic(&slab, &[0.0, 1.0]);
        assert_eq!(foot, [0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = GridSpec::line(1.0, 9).unwrap();
        let tg = TimeGrid::new(0.1, 2).unwrap();
        let v = vec![Field::zeros(g, 1); 3];
        assert!(solve_transport(&Field::constant(g, &[-1.0]), &v, &tg).is_err());
        assert!(solve_transport(&Field::constant(g, &[1.0]), &v[..2], &tg).is_err());
        let moving_wall = vec![Field::constant(g, &[0.1]); 3];
        assert!(matches!(
            solve_transport(&Field::constant(g, &[1.0]), &moving_wall, &tg),
            Err(Error::Precondition(_))
        ));
    }
}

//! Grids, grid-sampled fields, discrete differential operators and norms.

mod grid;
pub mod norms;
pub mod ops;
pub mod snapshot;

pub use grid::{GridSpec, TimeGrid, MIN_NODES};

use crate::error::{Error, Result};

/// Values sampled at every node of a [`GridSpec`], with one or more components.
///
/// Storage is component-major: component `c` of node `k` lives at
/// `values[c * node_count + k]`. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    ncomp: usize,
    values: Vec<f64>,
}

/// One value per node (density, pressure, divergence).
pub type ScalarField = Field;
/// `dim` components per node (velocity).
pub type VectorField = Field;
/// Three components per node regardless of the spatial dimension.
pub type DirectorField = Field;

pub const DIRECTOR_COMPONENTS: usize = 3;

impl Field {
    pub fn zeros(grid: GridSpec, ncomp: usize) -> Self {
        assert!(ncomp > 0, "a field needs at least one component");
        Field {
            grid,
            ncomp,
            values: vec![0.0; ncomp * grid.node_count()],
        }
    }

    pub fn constant(grid: GridSpec, value: &[f64]) -> Self {
        let mut f = Self::zeros(grid, value.len());
        for (c, &v) in value.iter().enumerate() {
            f.comp_mut(c).fill(v);
        }
        f
    }

    /// Builds a field from component-major values, rejecting wrong lengths and non-finite entries.
    pub fn from_values(grid: GridSpec, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if ncomp == 0 || values.len() != ncomp * grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} components on {} nodes",
                values.len(),
                ncomp,
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field construction (entry {k})")));
        }
        Ok(Field { grid, ncomp, values })
    }

    pub fn from_components(grid: GridSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        let ncomp = comps.len();
        let n = grid.node_count();
        if comps.iter().any(|c| c.len() != n) {
            return Err(Error::GridMismatch(format!("component length differs from {n} nodes")));
        }
        Self::from_values(grid, ncomp, comps.concat())
    }

    /// Samples `f(x)` at every node; `f` writes `ncomp` values into its output slice.
    pub fn from_fn(grid: GridSpec, ncomp: usize, mut f: impl FnMut([f64; 2], &mut [f64])) -> Self {
        let n = grid.node_count();
        let mut out = Self::zeros(grid, ncomp);
        let mut buf = vec![0.0; ncomp];
        for k in 0..n {
            f(grid.coords(k), &mut buf);
            for c in 0..ncomp {
                out.values[c * n + k] = buf[c];
            }
        }
        debug_assert!(out.is_finite());
        out
    }

    pub fn scalar_fn(grid: GridSpec, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        Self::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    /// Internal constructor for operator outputs; finiteness is checked by the callers that can fail.
    pub(crate) fn from_raw(grid: GridSpec, ncomp: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), ncomp * grid.node_count());
        Field { grid, ncomp, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.node_count();
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn components(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.node_count())
    }

    #[inline]
    pub fn at(&self, c: usize, node: usize) -> f64 {
        self.values[c * self.grid.node_count() + node]
    }

    pub fn node_value(&self, node: usize) -> Vec<f64> {
        (0..self.ncomp).map(|c| self.at(c, node)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(self, context: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    pub fn ensure_same_shape(&self, other: &Field, context: &str) -> Result<()> {
        if self.grid != other.grid || self.ncomp != other.ncomp {
            return Err(Error::GridMismatch(format!(
                "{context}: {} comps on {:?} vs {} comps on {:?}",
                self.ncomp,
                self.grid.nodes(),
                other.ncomp,
                other.grid.nodes()
            )));
        }
        Ok(())
    }

    pub fn ensure_same_grid(&self, other: &Field, context: &str) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{context}: grids differ")));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.ncomp, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// `self + s * other`; panics on shape mismatch.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "axpy on different grids");
        assert_eq!(self.ncomp, other.ncomp, "axpy on different component counts");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Field::from_raw(self.grid, self.ncomp, values)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest Euclidean magnitude over nodes.
    pub fn max_magnitude(&self) -> f64 {
        let n = self.grid.node_count();
        (0..n)
            .map(|k| (0..self.ncomp).map(|c| self.at(c, k).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest |difference| over all entries.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest absolute value over boundary nodes of every component.
    pub fn boundary_max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in self.grid.boundary_nodes() {
            for c in 0..self.ncomp {
                m = m.max(self.at(c, k).abs());
            }
        }
        m
    }

    /// Copy of `self` whose boundary nodes take the values of `src`.
    pub fn with_boundary_of(&self, src: &Field) -> Field {
        let mut out = self.clone();
        for k in self.grid.boundary_nodes() {
            for c in 0..self.ncomp {
                let n = self.grid.node_count();
                out.values[c * n + k] = src.values[c * n + k];
            }
        }
        out
    }

    /// Copy of `self` with every boundary entry set to zero.
    pub fn zero_boundary(&self) -> Field {
        let mut out = self.clone();
        let n = self.grid.node_count();
        for k in self.grid.boundary_nodes() {
            for c in 0..self.ncomp {
                out.values[c * n + k] = 0.0;
            }
        }
        out
    }
}

/// Density, velocity and director at one time level on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub rho: ScalarField,
    pub u: VectorField,
    pub d: DirectorField,
    pub time: f64,
}

impl FluidState {
    pub fn new(rho: ScalarField, u: VectorField, d: DirectorField, time: f64) -> Result<Self> {
        let grid = *rho.grid();
        if rho.ncomp() != 1 {
            return Err(Error::GridMismatch("density must be scalar".into()));
        }
        if u.ncomp() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "velocity has {} components on a {}-D grid",
                u.ncomp(),
                grid.dim()
            )));
        }
        if d.ncomp() != DIRECTOR_COMPONENTS {
            return Err(Error::GridMismatch("director must have 3 components".into()));
        }
        rho.ensure_same_grid(&u, "state velocity")?;
        rho.ensure_same_grid(&d, "state director")?;
        if rho.min() < 0.0 {
            return Err(Error::Precondition("density must be nonnegative".into()));
        }
        Ok(FluidState { rho, u, d, time })
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }
}

/// States at `t = 0, dt, ..., t_end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    timegrid: TimeGrid,
    states: Vec<FluidState>,
}

impl Trajectory {
    pub fn new(timegrid: TimeGrid, states: Vec<FluidState>) -> Result<Self> {
        if states.len() != timegrid.steps() + 1 {
            return Err(Error::Precondition(format!(
                "trajectory has {} states for {} steps",
                states.len(),
                timegrid.steps()
            )));
        }
        for (k, s) in states.iter().enumerate() {
            let t = timegrid.time(k);
            if (s.time - t).abs() > 1e-12 * timegrid.t_end().max(1.0) {
                return Err(Error::Precondition(format!("state {k} has time {} instead of {t}", s.time)));
            }
            if s.grid() != states[0].grid() {
                return Err(Error::GridMismatch(format!("state {k} lives on a different grid")));
            }
        }
        Ok(Trajectory { timegrid, states })
    }

    pub fn timegrid(&self) -> &TimeGrid {
        &self.timegrid
    }

    pub fn states(&self) -> &[FluidState] {
        &self.states
    }

    pub fn state(&self, level: usize) -> &FluidState {
        &self.states[level]
    }

    pub fn last(&self) -> &FluidState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn grid(&self) -> &GridSpec {
        self.states[0].grid()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn velocities(&self) -> Vec<VectorField> {
        self.states.iter().map(|s| s.u.clone()).collect()
    }

    pub fn directors(&self) -> Vec<DirectorField> {
        self.states.iter().map(|s| s.d.clone()).collect()
    }

    pub fn densities(&self) -> Vec<ScalarField> {
        self.states.iter().map(|s| s.rho.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_shape_and_finiteness() {
        let g = GridSpec::line(1.0, 5).unwrap();
        assert!(Field::from_values(g, 1, vec![0.0; 4]).is_err());
        assert!(Field::from_values(g, 1, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
        let f = Field::from_values(g, 2, (0..10).map(f64::from).collect()).unwrap();
        assert_eq!(f.comp(1), &[5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(f.at(0, 3), 3.0);
    }

    #[test]
    fn state_requires_matching_shapes() {
        let g = GridSpec::square(1.0, 5).unwrap();
        let rho = Field::constant(g, &[1.0]);
        let u = Field::zeros(g, 2);
        let d = Field::constant(g, &[0.0, 0.0, 1.0]);
        assert!(FluidState::new(rho.clone(), u.clone(), d.clone(), 0.0).is_ok());
        assert!(FluidState::new(rho.clone(), Field::zeros(g, 1), d.clone(), 0.0).is_err());
        assert!(FluidState::new(rho.scale(-1.0), u, d, 0.0).is_err());
    }

    #[test]
    fn trajectory_checks_levels() {
        let g = GridSpec::line(1.0, 5).unwrap();
        let tg = TimeGrid::new(0.1, 2).unwrap();
        let s = |t| {
            FluidState::new(
                Field::constant(g, &[1.0]),
                Field::zeros(g, 1),
                Field::constant(g, &[0.0, 0.0, 1.0]),
                t,
            )
            .unwrap()
        };
        assert!(Trajectory::new(tg, vec![s(0.0), s(0.05), s(0.1)]).is_ok());
        assert!(Trajectory::new(tg, vec![s(0.0), s(0.05)]).is_err());
        assert!(Trajectory::new(tg, vec![s(0.0), s(0.07), s(0.1)]).is_err());
    }
}

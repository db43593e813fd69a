use crate::error::{Error, Result};

/// Uniform node-centred grid on the box `(0, L0) x (0, L1)`.
///
/// Nodes sit on both ends of every axis; boundary nodes carry the Dirichlet
/// data. Node `(i, j)` has flat index `i + nodes[0] * j` (x varies fastest).
/// For `dim == 1` the second axis is degenerate (`nodes[1] == 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    extent: [f64; 2],
    nodes: [usize; 2],
    spacing: [f64; 2],
}

pub const MIN_NODES: usize = 5;

impl GridSpec {
    pub fn new(dim: usize, extent: &[f64], nodes: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::param("dim", format!("must be 1 or 2, got {dim}")));
        }
        if extent.len() != dim || nodes.len() != dim {
            return Err(Error::param(
                "extent/nodes",
                format!("expected {dim} entries, got {} and {}", extent.len(), nodes.len()),
            ));
        }
        let mut grid = GridSpec {
            dim,
            extent: [0.0; 2],
            nodes: [1; 2],
            spacing: [0.0; 2],
        };
        for axis in 0..dim {
            let (len, n) = (extent[axis], nodes[axis]);
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::param("extent", format!("axis {axis} length must be positive, got {len}")));
            }
            if n < MIN_NODES {
                return Err(Error::param("nodes", format!("axis {axis} needs at least {MIN_NODES} nodes, got {n}")));
            }
            let h = len / (n - 1) as f64;
            grid.nodes[axis] = n;
            grid.spacing[axis] = h;
            // Stored extent is recomputed from the spacing so that h * (n - 1) == L holds exactly.
            grid.extent[axis] = h * (n - 1) as f64;
        }
        Ok(grid)
    }

    pub fn line(length: f64, nodes: usize) -> Result<Self> {
        Self::new(1, &[length], &[nodes])
    }

    pub fn square(length: f64, nodes: usize) -> Result<Self> {
        Self::new(2, &[length, length], &[nodes, nodes])
    }

    /// Same box, with `2 (n - 1) + 1` nodes per axis (spacing halved).
    pub fn refined(&self) -> Self {
        let nodes: Vec<usize> = (0..self.dim).map(|a| 2 * (self.nodes[a] - 1) + 1).collect();
        Self::new(self.dim, &self.extent[..self.dim], &nodes).expect("refinement of a valid grid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn node_count(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn measure(&self) -> f64 {
        self.extent().iter().product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nodes[0] * j
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nodes[0], idx / self.nodes[0])
    }

    /// Offset between neighbouring nodes along `axis` in flat indexing.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.nodes[0]
        }
    }

    /// Position of `idx` along `axis` (the i or j index).
    #[inline]
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        let (i, j) = self.ij(idx);
        if axis == 0 {
            i
        } else {
            j
        }
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        [i as f64 * self.spacing[0], j as f64 * self.spacing[1]]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        (0..self.dim).any(|axis| {
            let k = self.axis_index(idx, axis);
            k == 0 || k == self.nodes[axis] - 1
        })
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&idx| self.is_boundary(idx))
    }

    /// Trapezoidal quadrature weight of a node.
    pub fn weight(&self, idx: usize) -> f64 {
        let mut w = 1.0;
        for axis in 0..self.dim {
            let k = self.axis_index(idx, axis);
            let half = k == 0 || k == self.nodes[axis] - 1;
            w *= if half { 0.5 * self.spacing[axis] } else { self.spacing[axis] };
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count()).map(|idx| self.weight(idx)).collect()
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() >= self.dim && (0..self.dim).all(|a| x[a] >= 0.0 && x[a] <= self.extent[a])
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for a in 0..self.dim {
            x[a] = x[a].clamp(0.0, self.extent[a]);
        }
    }
}

/// Uniform partition of `[0, t_end]` into `steps` intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::param("t_end", format!("must be positive, got {t_end}")));
        }
        if steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        let dt = t_end / steps as f64;
        Ok(TimeGrid {
            t_end: dt * steps as f64,
            steps,
            dt,
        })
    }

    /// Grid with `steps` intervals of width `dt`.
    pub fn with_step(dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        Self::new(dt * steps as f64, steps)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn refined(&self) -> Self {
        Self::new(self.t_end, 2 * self.steps).expect("refinement of a valid time grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_times_intervals_equals_extent() {
        for n in [5, 7, 33, 128, 129, 1000] {
            for len in [1.0, 0.3, 2.7, std::f64::consts::PI] {
                let g = GridSpec::line(len, n).unwrap();
                assert_eq!(g.h(0) * (n - 1) as f64, g.extent()[0]);
                assert!((g.extent()[0] - len).abs() <= 4.0 * f64::EPSILON * len);
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(3, &[1.0; 3], &[5; 3]).is_err());
        assert!(GridSpec::line(1.0, 4).is_err());
        assert!(GridSpec::line(-1.0, 9).is_err());
        assert!(GridSpec::new(2, &[1.0], &[9]).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 10).is_err());
    }

    #[test]
    fn weights_integrate_the_box() {
        let g = GridSpec::new(2, &[2.0, 0.5], &[9, 13]).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert_eq!(g.boundary_nodes().count(), 2 * 9 + 2 * 13 - 4);
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = GridSpec::square(1.0, 17).unwrap();
        let r = g.refined();
        assert_eq!(r.nodes(), &[33, 33]);
        assert!((r.h(0) - 0.5 * g.h(0)).abs() < 1e-16);
        let t = TimeGrid::new(0.2, 200).unwrap();
        assert_eq!(t.refined().steps(), 400);
        assert_eq!(t.dt() * t.steps() as f64, t.t_end());
    }
}

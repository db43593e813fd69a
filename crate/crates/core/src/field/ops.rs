//! Finite-difference operators on node-centred grids.
//!
//! Interior nodes use second-order central stencils; boundary nodes use
//! second-order one-sided stencils, so every operator is total on a valid
//! field and exact on polynomials up to degree two.

use super::{Field, GridSpec, ScalarField, VectorField};
use crate::error::{Error, Result};

/// First derivative of one component along `axis`.
pub fn partial(grid: &GridSpec, f: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.nodes()[axis];
    let s = grid.stride(axis);
    let inv2h = 0.5 / grid.h(axis);
    (0..f.len())
        .map(|idx| {
            let k = grid.axis_index(idx, axis);
            if k == 0 {
                // written in differences so constants give exactly zero
                (4.0 * (f[idx + s] - f[idx]) - (f[idx + 2 * s] - f[idx])) * inv2h
            } else if k == n - 1 {
                ((f[idx - 2 * s] - f[idx]) - 4.0 * (f[idx - s] - f[idx])) * inv2h
            } else {
                (f[idx + s] - f[idx - s]) * inv2h
            }
        })
        .collect()
}

/// Second derivative of one component along `axis`: 3-point stencil inside,
/// 4-point one-sided (second order) on the two end nodes.
pub fn second_partial(grid: &GridSpec, f: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.nodes()[axis];
    let s = grid.stride(axis);
    let inv_h2 = 1.0 / (grid.h(axis) * grid.h(axis));
    (0..f.len())
        .map(|idx| {
            let k = grid.axis_index(idx, axis);
            if k == 0 {
                let d = |j: usize| f[idx + j * s] - f[idx];
                (-5.0 * d(1) + 4.0 * d(2) - d(3)) * inv_h2
            } else if k == n - 1 {
                let d = |j: usize| f[idx - j * s] - f[idx];
                (-5.0 * d(1) + 4.0 * d(2) - d(3)) * inv_h2
            } else {
                ((f[idx - s] - f[idx]) + (f[idx + s] - f[idx])) * inv_h2
            }
        })
        .collect()
}

/// Gradient of a scalar field (`dim` components).
pub fn grad(f: &ScalarField) -> VectorField {
    assert_eq!(f.ncomp(), 1, "grad expects a scalar field");
    let grid = *f.grid();
    let comps: Vec<Vec<f64>> = (0..grid.dim()).map(|a| partial(&grid, f.comp(0), a)).collect();
    Field::from_raw(grid, grid.dim(), comps.concat())
}

/// All first partials of every component, ordered `c * dim + axis`.
pub fn jacobian(f: &Field) -> Field {
    let grid = *f.grid();
    let dim = grid.dim();
    let mut comps = Vec::with_capacity(f.ncomp() * dim);
    for c in 0..f.ncomp() {
        for a in 0..dim {
            comps.push(partial(&grid, f.comp(c), a));
        }
    }
    Field::from_raw(grid, f.ncomp() * dim, comps.concat())
}

pub fn div(v: &VectorField) -> ScalarField {
    let grid = *v.grid();
    assert_eq!(v.ncomp(), grid.dim(), "div expects dim components");
    let mut out = vec![0.0; grid.node_count()];
    for a in 0..grid.dim() {
        for (o, d) in out.iter_mut().zip(partial(&grid, v.comp(a), a)) {
            *o += d;
        }
    }
    Field::from_raw(grid, 1, out)
}

/// Row-wise divergence of a `dim x dim` tensor field stored as `S[i * dim + j]`:
/// `(div S)_j = sum_i d_i S_ij`.
pub fn div_tensor(s: &Field) -> VectorField {
    let grid = *s.grid();
    let dim = grid.dim();
    assert_eq!(s.ncomp(), dim * dim, "div_tensor expects dim*dim components");
    let n = grid.node_count();
    let mut out = vec![0.0; dim * n];
    for j in 0..dim {
        for i in 0..dim {
            let d = partial(&grid, s.comp(i * dim + j), i);
            for (o, v) in out[j * n..(j + 1) * n].iter_mut().zip(d) {
                *o += v;
            }
        }
    }
    Field::from_raw(grid, dim, out)
}

/// Componentwise Laplacian.
pub fn laplacian(f: &Field) -> Field {
    let grid = *f.grid();
    let n = grid.node_count();
    let mut out = vec![0.0; f.ncomp() * n];
    for c in 0..f.ncomp() {
        let dst = &mut out[c * n..(c + 1) * n];
        for a in 0..grid.dim() {
            for (o, v) in dst.iter_mut().zip(second_partial(&grid, f.comp(c), a)) {
                *o += v;
            }
        }
    }
    Field::from_raw(grid, f.ncomp(), out)
}

/// `(v . grad) f` for every component of `f`.
pub fn advect(v: &VectorField, f: &Field) -> Field {
    let grid = *f.grid();
    assert_eq!(v.grid(), f.grid(), "advect on different grids");
    let n = grid.node_count();
    let mut out = vec![0.0; f.ncomp() * n];
    for c in 0..f.ncomp() {
        let dst = &mut out[c * n..(c + 1) * n];
        for a in 0..grid.dim() {
            let d = partial(&grid, f.comp(c), a);
            for ((o, dv), va) in dst.iter_mut().zip(d).zip(v.comp(a)) {
                *o += va * dv;
            }
        }
    }
    Field::from_raw(grid, f.ncomp(), out)
}

/// Bilinear (or linear) interpolation of one component at a point of the closed box.
/// The caller guarantees `x` is inside.
#[inline]
pub(crate) fn sample(grid: &GridSpec, f: &[f64], x: &[f64]) -> f64 {
    let locate = |axis: usize| -> (usize, f64) {
        let n = grid.nodes()[axis];
        let mut s = x[axis] / grid.h(axis);
        // snap points that are nodes up to rounding, so nodal values are reproduced exactly
        let r = s.round();
        if (s - r).abs() <= 1e-12 * r.max(1.0) {
            s = r;
        }
        let cell = (s.floor().max(0.0) as usize).min(n - 2);
        (cell, s - cell as f64)
    };
    let (i, tx) = locate(0);
    if grid.dim() == 1 {
        return f[i] * (1.0 - tx) + f[i + 1] * tx;
    }
    let (j, ty) = locate(1);
    let k = grid.index(i, j);
    let up = grid.stride(1);
    let lower = f[k] * (1.0 - tx) + f[k + 1] * tx;
    let upper = f[k + up] * (1.0 - tx) + f[k + up + 1] * tx;
    lower * (1.0 - ty) + upper * ty
}

/// Multilinear interpolation of every component at `x`.
pub fn interpolate(f: &Field, x: &[f64]) -> Result<Vec<f64>> {
    let grid = f.grid();
    if x.len() != grid.dim() || !grid.contains(x) {
        return Err(Error::Domain { point: x.to_vec() });
    }
    Ok(f.components().map(|c| sample(grid, c, x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(n: usize) -> GridSpec {
        GridSpec::line(1.0, n).unwrap()
    }

    #[test]
    fn gradient_of_constant_and_affine() {
        let g = line(9);
        let c = Field::constant(g, &[2.5]);
        assert_eq!(grad(&c).max_abs(), 0.0);
        let f = Field::scalar_fn(g, |x| 3.0 * x[0]);
        for v in grad(&f).comp(0) {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_affine_vector_field() {
        let g = GridSpec::square(1.0, 9).unwrap();
        let v = Field::from_fn(g, 2, |x, out| {
            out[0] = x[0];
            out[1] = x[1];
        });
        for d in div(&v).comp(0) {
            assert!((d - 2.0).abs() < 1e-12);
        }
        assert_eq!(div(&Field::constant(g, &[1.0, -2.0])).max_abs(), 0.0);
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = line(11);
        let f = Field::scalar_fn(g, |x| x[0] * x[0]);
        for v in laplacian(&f).comp(0) {
            assert!((v - 2.0).abs() < 1e-9);
        }
        let affine = Field::scalar_fn(g, |x| 1.0 - 4.0 * x[0]);
        assert!(laplacian(&affine).max_abs() < 1e-9);
        let g2 = GridSpec::square(2.0, 9).unwrap();
        let q = Field::scalar_fn(g2, |x| x[0] * x[0] + 3.0 * x[1] * x[1] - x[0] * x[1]);
        for v in laplacian(&q).comp(0) {
            assert!((v - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_at_nodes_and_on_affine_fields() {
        let g = GridSpec::new(2, &[1.0, 2.0], &[6, 9]).unwrap();
        let f = Field::scalar_fn(g, |x| 1.0 + 2.0 * x[0] - 0.5 * x[1]);
        for k in 0..g.node_count() {
            let x = g.coords(k);
            assert_eq!(interpolate(&f, &x).unwrap()[0], f.at(0, k));
        }
        for &(x, y) in &[(0.13, 1.71), (0.999, 0.001), (1.0, 2.0), (0.0, 0.0)] {
            let v = interpolate(&f, &[x, y]).unwrap()[0];
            assert!((v - (1.0 + 2.0 * x - 0.5 * y)).abs() < 1e-13);
        }
        assert!(matches!(interpolate(&f, &[1.2, 0.5]), Err(Error::Domain { .. })));
        assert!(interpolate(&f, &[-1e-9, 0.5]).is_err());
    }

    #[test]
    fn sine_derivatives_are_second_order() {
        let k = 2.0 * PI;
        let errors: Vec<(f64, f64)> = [65, 129]
            .iter()
            .map(|&n| {
                let g = line(n);
                let f = Field::scalar_fn(g, |x| (k * x[0] + 0.3).sin());
                let df = grad(&f);
                let lf = laplacian(&f);
                let mut e1: f64 = 0.0;
                let mut e2: f64 = 0.0;
                for i in 0..n {
                    let x = g.coords(i)[0];
                    e1 = e1.max((df.at(0, i) - k * (k * x + 0.3).cos()).abs());
                    e2 = e2.max((lf.at(0, i) + k * k * (k * x + 0.3).sin()).abs());
                }
                (e1, e2)
            })
            .collect();
        let r1 = errors[0].0 / errors[1].0;
        let r2 = errors[0].1 / errors[1].1;
        assert!((3.2..=4.8).contains(&r1), "grad ratio {r1}");
        assert!((3.2..=4.8).contains(&r2), "laplacian ratio {r2}");
    }

    #[test]
    fn tensor_divergence_matches_componentwise() {
        let g = GridSpec::square(1.0, 9).unwrap();
        let s = Field::from_fn(g, 4, |x, out| {
            out[0] = x[0] * x[0];
            out[1] = x[1];
            out[2] = 3.0 * x[0];
            out[3] = x[0] * x[1];
        });
        let d = div_tensor(&s);
        for k in 0..g.node_count() {
            let [x, _y] = g.coords(k);
            // (div S)_0 = d_x S00 + d_y S10 = 2x + 0; (div S)_1 = d_x S01 + d_y S11 = 0 + x
            assert!((d.at(0, k) - 2.0 * x).abs() < 1e-11);
            assert!((d.at(1, k) - x).abs() < 1e-11);
        }
    }
}

//! Discrete Lebesgue and Sobolev norms with trapezoidal weights.
//!
//! Pointwise magnitudes are Euclidean over components (and over all partials
//! for derivative levels). Derivatives use the stencils of [`super::ops`]:
//! pure second derivatives the compact stencil, mixed ones composed first
//! differences.

use super::ops::{partial, second_partial};
use super::{Field, GridSpec, ScalarField};
use crate::error::{Error, Result};

fn check_exponent(q: f64) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::param("q", format!("norm exponent must be >= 1, got {q}")));
    }
    Ok(())
}

/// L^q norm of the pointwise Euclidean magnitude of a set of same-grid arrays.
fn lq_arrays(grid: &GridSpec, arrays: &[&[f64]], q: f64) -> f64 {
    let n = grid.node_count();
    let mag2 = |k: usize| arrays.iter().map(|a| a[k] * a[k]).sum::<f64>();
    if q.is_infinite() {
        return (0..n).map(|k| mag2(k).sqrt()).fold(0.0, f64::max);
    }
    let sum: f64 = (0..n)
        .map(|k| {
            let w = grid.weight(k);
            if q == 2.0 {
                w * mag2(k)
            } else {
                w * mag2(k).sqrt().powf(q)
            }
        })
        .sum();
    sum.powf(1.0 / q)
}

/// All partial derivatives of order `order` (0..=3) of every component.
pub fn derivatives(f: &Field, order: usize) -> Vec<Vec<f64>> {
    let grid = f.grid();
    let dim = grid.dim();
    let mut out = Vec::new();
    for comp in f.components() {
        match order {
            0 => out.push(comp.to_vec()),
            1 => (0..dim).for_each(|a| out.push(partial(grid, comp, a))),
            2 | 3 => {
                let firsts: Vec<Vec<f64>> = (0..dim).map(|a| partial(grid, comp, a)).collect();
                for a in 0..dim {
                    for b in 0..dim {
                        let second = if a == b {
                            second_partial(grid, comp, a)
                        } else {
                            partial(grid, &firsts[a], b)
                        };
                        if order == 2 {
                            out.push(second);
                        } else {
                            (0..dim).for_each(|e| out.push(partial(grid, &second, e)));
                        }
                    }
                }
            }
            _ => panic!("derivative order {order} is not supported"),
        }
    }
    out
}

fn level_lq(f: &Field, order: usize, q: f64) -> f64 {
    let d = derivatives(f, order);
    let refs: Vec<&[f64]> = d.iter().map(Vec::as_slice).collect();
    lq_arrays(f.grid(), &refs, q)
}

/// `(sum_k w_k |f_k|^q)^(1/q)`; `q = f64::INFINITY` gives the max norm.
pub fn norm_lq(f: &Field, q: f64) -> Result<f64> {
    check_exponent(q)?;
    let refs: Vec<&[f64]> = f.components().collect();
    Ok(lq_arrays(f.grid(), &refs, q))
}

pub fn norm_l2(f: &Field) -> f64 {
    level_lq(f, 0, 2.0)
}

/// `(||f||_q^q + ||grad f||_q^q)^(1/q)`.
pub fn norm_w1q(f: &Field, q: f64) -> Result<f64> {
    check_exponent(q)?;
    let (a, b) = (level_lq(f, 0, q), level_lq(f, 1, q));
    if q.is_infinite() {
        Ok(a.max(b))
    } else {
        Ok((a.powf(q) + b.powf(q)).powf(1.0 / q))
    }
}

/// L^2 norm of the `order`-th derivative tensor.
pub fn seminorm(f: &Field, order: usize) -> f64 {
    level_lq(f, order, 2.0)
}

/// H^k norm as the root of the summed squared seminorms of orders `0..=k`.
pub fn norm_hk(f: &Field, k: usize) -> f64 {
    (0..=k).map(|o| seminorm(f, o).powi(2)).sum::<f64>().sqrt()
}

pub fn norm_h1(f: &Field) -> f64 {
    norm_hk(f, 1)
}

pub fn norm_h2(f: &Field) -> f64 {
    norm_hk(f, 2)
}

pub fn norm_h3(f: &Field) -> f64 {
    norm_hk(f, 3)
}

/// `(sum_k w_k rho_k |w_k|^2)^(1/2)`, the discrete `||sqrt(rho) w||_{L^2}`.
pub fn weighted_l2(rho: &ScalarField, w: &Field) -> Result<f64> {
    rho.ensure_same_grid(w, "weighted_l2")?;
    if rho.ncomp() != 1 {
        return Err(Error::GridMismatch("weighted_l2 weight must be scalar".into()));
    }
    let grid = rho.grid();
    let mut sum = 0.0;
    for k in 0..grid.node_count() {
        let r = rho.at(0, k);
        if r < 0.0 {
            return Err(Error::Precondition(format!("weighted_l2: negative density {r} at node {k}")));
        }
        let mag2: f64 = (0..w.ncomp()).map(|c| w.at(c, k).powi(2)).sum();
        sum += grid.weight(k) * r * mag2;
    }
    Ok(sum.sqrt())
}

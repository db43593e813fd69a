//! Pressure law, Ginzburg-Landau penalty, and the Ericksen elastic stress.

use crate::error::{Error, Result};
use crate::field::ops::{jacobian, laplacian};
use crate::field::{DirectorField, Field, ScalarField, VectorField, DIRECTOR_COMPONENTS};

/// `p(rho) = a rho^gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureLaw {
    pub a: f64,
    pub gamma: f64,
}

impl PressureLaw {
    pub fn new(a: f64, gamma: f64) -> Result<Self> {
        let law = PressureLaw { a, gamma };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::param("pressure_a", format!("must be positive, got {}", self.a)));
        }
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(Error::param("pressure_gamma", format!("must exceed 1, got {}", self.gamma)));
        }
        Ok(())
    }

    #[inline]
    pub fn p(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }

    #[inline]
    pub fn dp(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 1.0)
    }

    /// Internal energy density `a rho^gamma / (gamma - 1)`, so that `rho P' - P = p`.
    #[inline]
    pub fn internal_energy(&self, rho: f64) -> f64 {
        self.p(rho) / (self.gamma - 1.0)
    }
}

impl Default for PressureLaw {
    fn default() -> Self {
        PressureLaw { a: 1.0, gamma: 1.4 }
    }
}

/// Material and regularization constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Viscosity.
    pub mu: f64,
    /// Elastic coupling strength.
    pub lambda: f64,
    /// Director relaxation rate.
    pub nu: f64,
    /// Ginzburg-Landau length; `f64::INFINITY` switches the penalty off.
    pub sigma: f64,
    /// Vacuum regularization added to the initial density, in `[0, 1)`.
    pub delta: f64,
    /// Unit anchor vector of the linearized penalty.
    pub m: [f64; 3],
    pub pressure: PressureLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            mu: 1.0,
            lambda: 1.0,
            nu: 1.0,
            sigma: 1.0,
            delta: 1e-3,
            m: [0.0, 0.0, 1.0],
            pressure: PressureLaw::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("lambda", self.lambda), ("nu", self.nu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::param("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in [0, 1), got {}", self.delta)));
        }
        let norm2: f64 = self.m.iter().map(|c| c * c).sum();
        if !norm2.is_finite() || (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::param("m", format!("must be a unit vector, |m|^2 = {norm2}")));
        }
        self.pressure.validate()
    }

    /// `1 / sigma^2`.
    pub fn gl_stiffness(&self) -> f64 {
        gl_stiffness(self.sigma)
    }
}

fn gl_stiffness(sigma: f64) -> f64 {
    1.0 / (sigma * sigma)
}

fn check_density(rho: &ScalarField, context: &str) -> Result<()> {
    if rho.ncomp() != 1 {
        return Err(Error::GridMismatch(format!("{context}: density must be scalar")));
    }
    if let Some(k) = rho.comp(0).iter().position(|&r| r < 0.0) {
        return Err(Error::Precondition(format!("{context}: negative density at node {k}")));
    }
    Ok(())
}

pub fn pressure(rho: &ScalarField, law: &PressureLaw) -> Result<ScalarField> {
    check_density(rho, "pressure")?;
    Ok(rho.map(|r| law.p(r)))
}

pub fn pressure_deriv(rho: &ScalarField, law: &PressureLaw) -> Result<ScalarField> {
    check_density(rho, "pressure_deriv")?;
    Ok(rho.map(|r| law.dp(r)))
}

// Error-free transformations for the penalty scalars. Evaluating
// |d|^2 - 1 and (n + m).(d - m) naively loses every digit near the unit
// sphere, and the two forms must agree when n = d.

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated dot product (Ogita, Rump, Oishi): as accurate as twice the working precision.
fn dot2(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut p = 0.0;
    let mut s = 0.0;
    for (x, y) in pairs {
        let (h, r) = two_prod(x, y);
        let (np, q) = two_sum(p, h);
        p = np;
        s += q + r;
    }
    p + s
}

/// `|d|^2 - 1`, accurately.
#[inline]
pub(crate) fn unit_defect(d: [f64; 3]) -> f64 {
    dot2([(d[0], d[0]), (d[1], d[1]), (d[2], d[2]), (-1.0, 1.0)])
}

/// `(n + m) . (d - m)`, accurately.
#[inline]
pub(crate) fn linearized_defect(n: [f64; 3], d: [f64; 3], m: [f64; 3]) -> f64 {
    let mut terms = [(0.0, 0.0); 12];
    for k in 0..3 {
        let (a, ae) = two_sum(n[k], m[k]);
        let (b, be) = two_sum(d[k], -m[k]);
        terms[4 * k] = (a, b);
        terms[4 * k + 1] = (a, be);
        terms[4 * k + 2] = (ae, b);
        terms[4 * k + 3] = (ae, be);
    }
    dot2(terms)
}

fn check_director(d: &DirectorField, context: &str) -> Result<()> {
    if d.ncomp() != DIRECTOR_COMPONENTS {
        return Err(Error::GridMismatch(format!("{context}: director needs 3 components, got {}", d.ncomp())));
    }
    Ok(())
}

#[inline]
fn director_at(d: &DirectorField, k: usize) -> [f64; 3] {
    [d.at(0, k), d.at(1, k), d.at(2, k)]
}

/// `f(d) = (|d|^2 - 1) d / sigma^2`.
pub fn gl_force(d: &DirectorField, sigma: f64) -> DirectorField {
    assert_eq!(d.ncomp(), DIRECTOR_COMPONENTS);
    let s = gl_stiffness(sigma);
    let n = d.grid().node_count();
    let mut out = Field::zeros(*d.grid(), 3);
    for k in 0..n {
        let dk = director_at(d, k);
        let scale = s * unit_defect(dk);
        for c in 0..3 {
            out.comp_mut(c)[k] = scale * dk[c];
        }
    }
    out
}

/// `F(d) = (|d|^2 - 1)^2 / (4 sigma^2)`.
pub fn gl_potential(d: &DirectorField, sigma: f64) -> ScalarField {
    assert_eq!(d.ncomp(), DIRECTOR_COMPONENTS);
    let s = gl_stiffness(sigma);
    let n = d.grid().node_count();
    let values = (0..n)
        .map(|k| {
            let e = unit_defect(director_at(d, k));
            0.25 * s * e * e
        })
        .collect();
    Field::from_raw(*d.grid(), 1, values)
}

/// `((n + m) . (d - m)) n / sigma^2`, the penalty force linearized about `n`.
/// Reduces to [`gl_force`] when `n = d` and `|m| = 1`.
pub fn gl_linearized(n: &DirectorField, d: &DirectorField, m: [f64; 3], sigma: f64) -> Result<DirectorField> {
    check_director(n, "gl_linearized")?;
    check_director(d, "gl_linearized")?;
    n.ensure_same_grid(d, "gl_linearized")?;
    let s = gl_stiffness(sigma);
    let mut out = Field::zeros(*d.grid(), 3);
    for k in 0..d.grid().node_count() {
        let nk = director_at(n, k);
        let scale = s * linearized_defect(nk, director_at(d, k), m);
        for c in 0..3 {
            out.comp_mut(c)[k] = scale * nk[c];
        }
    }
    Ok(out)
}

/// Ericksen stress `grad d (.) grad d - (|grad d|^2 / 2 + F(d)) I`, stored row-major
/// as `dim * dim` components.
pub fn ericksen_stress(d: &DirectorField, sigma: f64) -> Field {
    assert_eq!(d.ncomp(), DIRECTOR_COMPONENTS);
    let grid = *d.grid();
    let dim = grid.dim();
    let jac = jacobian(d);
    let pot = gl_potential(d, sigma);
    let mut out = Field::zeros(grid, dim * dim);
    for k in 0..grid.node_count() {
        let g = |c: usize, a: usize| jac.at(c * dim + a, k);
        let mut grad2 = 0.0;
        for c in 0..3 {
            for a in 0..dim {
                grad2 += g(c, a) * g(c, a);
            }
        }
        let iso = 0.5 * grad2 + pot.at(0, k);
        for i in 0..dim {
            for j in i..dim {
                let mut sij: f64 = (0..3).map(|c| g(c, i) * g(c, j)).sum();
                if i == j {
                    sij -= iso;
                }
                out.comp_mut(i * dim + j)[k] = sij;
                out.comp_mut(j * dim + i)[k] = sij;
            }
        }
    }
    out
}

/// `-lambda (grad d)^T (Laplacian d - f(d))`, one component per spatial axis.
pub fn elastic_force(d: &DirectorField, params: &ModelParams) -> VectorField {
    assert_eq!(d.ncomp(), DIRECTOR_COMPONENTS);
    let grid = *d.grid();
    let dim = grid.dim();
    let jac = jacobian(d);
    let molecular = laplacian(d).sub(&gl_force(d, params.sigma));
    let mut out = Field::zeros(grid, dim);
    for j in 0..dim {
        let dst = out.comp_mut(j);
        for c in 0..3 {
            for (k, o) in dst.iter_mut().enumerate() {
                *o -= params.lambda * jac.at(c * dim + j, k) * molecular.at(c, k);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    fn grid() -> GridSpec {
        GridSpec::line(1.0, 9).unwrap()
    }

    #[test]
    fn pressure_values() {
        let g = grid();
        let law = PressureLaw::new(1.0, 1.4).unwrap();
        assert_eq!(pressure(&Field::zeros(g, 1), &law).unwrap().max_abs(), 0.0);
        let p1 = pressure(&Field::constant(g, &[1.0]), &PressureLaw::new(2.5, 1.4).unwrap()).unwrap();
        assert!(p1.comp(0).iter().all(|&v| v == 2.5));
        // 2^1.4 = exp(1.4 ln 2) = 2.6390158215457884
        let p2 = pressure(&Field::constant(g, &[2.0]), &law).unwrap();
        assert!((p2.at(0, 0) - 2.639_015_821_545_788_4).abs() < 1e-14);
        assert!(pressure(&Field::constant(g, &[-0.1]), &law).is_err());
        assert!(PressureLaw::new(1.0, 1.0).is_err());
        let dp = pressure_deriv(&Field::constant(g, &[1.0]), &law).unwrap();
        assert!((dp.at(0, 3) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn penalty_hand_values() {
        let g = grid();
        let unit = Field::constant(g, &[0.0, 0.6, 0.8]);
        assert!(gl_force(&Field::constant(g, &[0.0, 0.0, 1.0]), 1.0).max_abs() == 0.0);
        assert!(gl_force(&unit, 1.0).max_abs() < 1e-15);
        assert_eq!(gl_force(&Field::zeros(g, 3), 1.0).max_abs(), 0.0);
        let f = gl_force(&Field::constant(g, &[2.0, 0.0, 0.0]), 1.0);
        assert_eq!(f.node_value(4), vec![6.0, 0.0, 0.0]);
        let pot = gl_potential(&Field::zeros(g, 3), 1.0);
        assert_eq!(pot.at(0, 2), 0.25);
        assert_eq!(gl_potential(&Field::constant(g, &[1.0, 0.0, 0.0]), 0.3).max_abs(), 0.0);
    }

    #[test]
    fn linearized_penalty_hand_value() {
        let g = grid();
        let n = Field::constant(g, &[1.0, 0.0, 0.0]);
        let d = Field::constant(g, &[0.0, 1.0, 0.0]);
        let out = gl_linearized(&n, &d, [0.0, 0.0, 1.0], 1.0).unwrap();
        assert_eq!(out.node_value(0), vec![-1.0, 0.0, 0.0]);
        let at_anchor = gl_linearized(&n, &Field::constant(g, &[0.0, 0.0, 1.0]), [0.0, 0.0, 1.0], 1.0).unwrap();
        assert_eq!(at_anchor.max_abs(), 0.0);
        let other = GridSpec::line(1.0, 11).unwrap();
        assert!(gl_linearized(&n, &Field::zeros(other, 3), [0.0, 0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn stress_of_constant_directors() {
        let g = GridSpec::square(1.0, 7).unwrap();
        let s = ericksen_stress(&Field::constant(g, &[0.0, 0.0, 1.0]), 1.0);
        assert_eq!(s.max_abs(), 0.0);
        let s = ericksen_stress(&Field::zeros(g, 3), 1.0);
        // -F(0) I with F(0) = 1/4
        assert_eq!(s.node_value(10), vec![-0.25, 0.0, 0.0, -0.25]);
        let params = ModelParams::default();
        assert_eq!(elastic_force(&Field::constant(g, &[0.3, 0.1, 2.0]), &params).max_abs(), 0.0);
    }

    #[test]
    fn stress_hand_value_1d() {
        // d = (x, x^2, 1): at x = 0.5, d' = (1, 1, 0), |d'|^2 = 2, |d|^2 - 1 = 0.3125,
        // F = 0.3125^2 / 4; S11 = 2 - (1 + F)
        let g = GridSpec::line(1.0, 9).unwrap();
        let d = Field::from_fn(g, 3, |x, out| {
            out[0] = x[0];
            out[1] = x[0] * x[0];
            out[2] = 1.0;
        });
        let s = ericksen_stress(&d, 1.0);
        let f = 0.3125f64 * 0.3125 / 4.0;
        assert!((s.at(0, 4) - (1.0 - f)).abs() < 1e-13);
    }

    #[test]
    fn stress_is_symmetric() {
        let g = GridSpec::square(1.0, 9).unwrap();
        let d = Field::from_fn(g, 3, |x, out| {
            out[0] = (3.0 * x[0]).sin() * x[1];
            out[1] = x[0] * x[1] * x[1];
            out[2] = (x[0] - x[1]).cos();
        });
        let s = ericksen_stress(&d, 0.7);
        assert_eq!(s.comp(1), s.comp(2));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let mut p = ModelParams::default();
        p.delta = -0.1;
        assert!(p.validate().is_err());
        p = ModelParams::default();
        p.m = [0.0, 1.0, 1.0];
        assert!(p.validate().is_err());
        p = ModelParams::default();
        p.sigma = f64::INFINITY;
        assert!(p.validate().is_ok());
        assert_eq!(p.gl_stiffness(), 0.0);
    }
}

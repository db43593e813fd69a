//! Energy accounting, the monitored norm bundle, and the continuous-dependence
//! and small-data experiments.

use std::f64::consts::PI;

use crate::constitutive::{gl_force, gl_potential, ModelParams};
use crate::error::{Error, Result};
use crate::field::norms::{norm_h1, norm_hk, norm_l2, norm_lq, norm_w1q, seminorm, weighted_l2};
use crate::field::ops::laplacian;
use crate::field::{Field, FluidState, GridSpec, Trajectory, VectorField};
use crate::parabolic::SolverConfig;
use crate::picard::{picard_solve, psi_distance, InitialData, PicardConfig, PicardReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    /// `1/2 int rho |u|^2`
    pub kinetic: f64,
    /// `int a rho^gamma / (gamma - 1)`
    pub internal: f64,
    /// `lambda int (|grad d|^2 / 2 + F(d))`
    pub elastic: f64,
    pub total: f64,
}

pub fn energy(state: &FluidState, params: &ModelParams) -> Result<EnergyBreakdown> {
    let grid = state.grid();
    let kinetic = 0.5 * weighted_l2(&state.rho, &state.u)?.powi(2);
    let internal: f64 = (0..grid.node_count())
        .map(|k| grid.weight(k) * params.pressure.internal_energy(state.rho.at(0, k)))
        .sum();
    let pot = gl_potential(&state.d, params.sigma);
    let potential: f64 = (0..grid.node_count()).map(|k| grid.weight(k) * pot.at(0, k)).sum();
    let elastic = params.lambda * (0.5 * seminorm(&state.d, 1).powi(2) + potential);
    Ok(EnergyBreakdown {
        kinetic,
        internal,
        elastic,
        total: kinetic + internal + elastic,
    })
}

/// `mu ||grad u||^2 + lambda nu ||Laplacian d - f(d)||^2`. The director term is
/// integrated over interior nodes, where `d` is free.
pub fn dissipation(state: &FluidState, params: &ModelParams) -> f64 {
    let molecular = laplacian(&state.d).sub(&gl_force(&state.d, params.sigma)).zero_boundary();
    params.mu * seminorm(&state.u, 1).powi(2) + params.lambda * params.nu * norm_l2(&molecular).powi(2)
}

/// Per step `max(0, E^{n+1} - E^n + dt (D^n + D^{n+1}) / 2)`.
pub fn energy_decay_check(traj: &Trajectory, params: &ModelParams) -> Result<Vec<f64>> {
    let dt = traj.timegrid().dt();
    let e: Vec<f64> = traj
        .states()
        .iter()
        .map(|s| energy(s, params).map(|b| b.total))
        .collect::<Result<_>>()?;
    let d: Vec<f64> = traj.states().iter().map(|s| dissipation(s, params)).collect();
    Ok((0..e.len().saturating_sub(1))
        .map(|n| (e[n + 1] - e[n] + 0.5 * dt * (d[n] + d[n + 1])).max(0.0))
        .collect())
}

/// Norms monitored at one time level.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormBundle {
    pub rho_w16: f64,
    pub rho_t_l6: f64,
    pub u_h1: f64,
    pub u_hess_l2: f64,
    pub sqrt_rho_u_t_l2: f64,
    pub d_h1: f64,
    pub d_t_h1: f64,
    pub d_hess_l2: f64,
    pub grad_d_h2: f64,
}

impl NormBundle {
    pub const NAMES: [&'static str; 9] = [
        "rho_w16",
        "rho_t_l6",
        "u_h1",
        "u_hess_l2",
        "sqrt_rho_u_t_l2",
        "d_h1",
        "d_t_h1",
        "d_hess_l2",
        "grad_d_h2",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.rho_w16,
            self.rho_t_l6,
            self.u_h1,
            self.u_hess_l2,
            self.sqrt_rho_u_t_l2,
            self.d_h1,
            self.d_t_h1,
            self.d_hess_l2,
            self.grad_d_h2,
        ]
    }

    pub fn from_values(v: [f64; 9]) -> Self {
        NormBundle {
            rho_w16: v[0],
            rho_t_l6: v[1],
            u_h1: v[2],
            u_hess_l2: v[3],
            sqrt_rho_u_t_l2: v[4],
            d_h1: v[5],
            d_t_h1: v[6],
            d_hess_l2: v[7],
            grad_d_h2: v[8],
        }
    }

    /// Entrywise maximum.
    pub fn max(&self, other: &NormBundle) -> NormBundle {
        let (a, b) = (self.values(), other.values());
        NormBundle::from_values(std::array::from_fn(|i| a[i].max(b[i])))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormSeries {
    pub levels: Vec<NormBundle>,
    pub sup: NormBundle,
}

/// `||grad d||_{H^2}`: root of the summed squared seminorms of orders 1 to 3.
fn grad_h2(d: &Field) -> f64 {
    (1..=3).map(|o| seminorm(d, o).powi(2)).sum::<f64>().sqrt()
}

/// Norm bundle at every level. Time derivatives are forward differences, the
/// last level a backward difference.
pub fn monitor_norms(traj: &Trajectory) -> Result<NormSeries> {
    let s = traj.states();
    if s.len() < 2 {
        return Err(Error::Precondition("monitor_norms needs at least two time levels".into()));
    }
    let dt = traj.timegrid().dt();
    let mut levels = Vec::with_capacity(s.len());
    for l in 0..s.len() {
        let (a, b) = if l + 1 < s.len() { (l, l + 1) } else { (l - 1, l) };
        let rho_t = s[b].rho.sub(&s[a].rho).scale(1.0 / dt);
        let u_t = s[b].u.sub(&s[a].u).scale(1.0 / dt);
        let d_t = s[b].d.sub(&s[a].d).scale(1.0 / dt);
        let st = &s[l];
        let bundle = NormBundle {
            rho_w16: norm_w1q(&st.rho, 6.0)?,
            rho_t_l6: norm_lq(&rho_t, 6.0)?,
            u_h1: norm_h1(&st.u),
            u_hess_l2: seminorm(&st.u, 2),
            sqrt_rho_u_t_l2: weighted_l2(&st.rho, &u_t)?,
            d_h1: norm_h1(&st.d),
            d_t_h1: norm_h1(&d_t),
            d_hess_l2: seminorm(&st.d, 2),
            grad_d_h2: grad_h2(&st.d),
        };
        if bundle.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("norm bundle at level {l}")));
        }
        levels.push(bundle);
    }
    let sup = levels.iter().fold(NormBundle::default(), |m, b| m.max(b));
    Ok(NormSeries { levels, sup })
}

/// `prod_a sin^2(pi x_a / L_a)`: smooth, nonnegative, peak 1, zero on the boundary
/// together with its first derivatives.
pub fn bump(grid: &GridSpec, x: [f64; 2]) -> f64 {
    (0..grid.dim())
        .map(|a| (PI * x[a] / grid.extent()[a]).sin().powi(2))
        .product()
}

/// The two unit vectors completing `m` to an orthonormal frame.
pub fn orthonormal_complement(m: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if m[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot: f64 = (0..3).map(|i| pick[i] * m[i]).sum();
    let mut e1: [f64; 3] = std::array::from_fn(|i| pick[i] - dot * m[i]);
    let n1 = e1.iter().map(|c| c * c).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|c| *c /= n1);
    let e2 = [
        m[1] * e1[2] - m[2] * e1[1],
        m[2] * e1[0] - m[0] * e1[2],
        m[0] * e1[1] - m[1] * e1[0],
    ];
    (e1, e2)
}

/// Small data on the scaled-bump family:
///
/// - `rho0 = alpha + theta * b`
/// - `d0 = m + theta * b * e1`
/// - `g = theta * b * (1, ..., 1)`, `u0` from the regularized compatibility problem
///
/// where `b` is [`bump`] and `e1` a fixed unit vector orthogonal to `m`.
pub fn scaled_bump_data(
    grid: GridSpec,
    theta: f64,
    alpha: f64,
    params: &ModelParams,
    solver: &SolverConfig,
) -> Result<InitialData> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::param("theta", format!("must lie in [0, 1), got {theta}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be nonnegative, got {alpha}")));
    }
    let (e1, _) = orthonormal_complement(params.m);
    let rho0 = Field::scalar_fn(grid, |x| alpha + theta * bump(&grid, x));
    let d0 = Field::from_fn(grid, 3, |x, o| {
        let b = theta * bump(&grid, x);
        for c in 0..3 {
            o[c] = params.m[c] + b * e1[c];
        }
    });
    let g = Field::from_fn(grid, grid.dim(), |x, o| o.fill(theta * bump(&grid, x)));
    InitialData::from_compatibility(rho0, d0, g, params, solver)
}

/// The fixed perturbation direction of the continuity experiment:
/// `(b, b sin(pi x / L) per axis, b e2)`, zero on the boundary.
pub fn perturbation(grid: GridSpec, m: [f64; 3]) -> (Field, VectorField, Field) {
    let (_, e2) = orthonormal_complement(m);
    let rho = Field::scalar_fn(grid, |x| bump(&grid, x));
    let u = Field::from_fn(grid, grid.dim(), |x, o| {
        for (a, oa) in o.iter_mut().enumerate() {
            *oa = bump(&grid, x) * (PI * x[a] / grid.extent()[a]).sin();
        }
    })
    .zero_boundary();
    let d = Field::from_fn(grid, 3, |x, o| {
        let b = bump(&grid, x);
        for c in 0..3 {
            o[c] = b * e2[c];
        }
    });
    (rho, u, d)
}

/// `data + eps * perturbation`.
pub fn perturb(data: &InitialData, eps: f64, m: [f64; 3]) -> Result<InitialData> {
    let (pr, pu, pd) = perturbation(*data.grid(), m);
    InitialData::new(
        data.rho0().axpy(eps, &pr),
        data.u0().axpy(eps, &pu),
        data.d0().axpy(eps, &pd),
        None,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityRow {
    pub eps: f64,
    pub psi0: f64,
    pub psi_sup: f64,
    /// `||d - d~||_{H^1}` at the final time.
    pub d_h1_final: f64,
    /// `||rho - rho~||_{L^6}` at the final time.
    pub rho_l6_final: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityTable {
    pub rows: Vec<ContinuityRow>,
    /// Least-squares slope of `ln psi_sup` against `ln psi0` over the rows with `eps > 0`.
    pub slope: Option<f64>,
    pub base_report: PicardReport,
}

/// Least-squares slope of `y` against `x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves the base problem and, for each `eps`, the problem with data shifted by
/// `eps` times the fixed [`perturbation`]. Distances use the perturbed state as the
/// newer one.
pub fn continuity_experiment(
    base: &InitialData,
    scales: &[f64],
    params: &ModelParams,
    cfg: &PicardConfig,
) -> Result<ContinuityTable> {
    let (base_traj, base_report) = picard_solve(base, params, cfg)?;
    let mut rows = Vec::with_capacity(scales.len());
    for &eps in scales {
        let data = perturb(base, eps, params.m)?;
        let (traj, _) = picard_solve(&data, params, cfg)?;
        let mut psi0 = 0.0;
        let mut sup = 0.0f64;
        for (l, (a, b)) in traj.states().iter().zip(base_traj.states()).enumerate() {
            let psi = psi_distance(a, b)?;
            if l == 0 {
                psi0 = psi;
            }
            sup = sup.max(psi);
        }
        let (a, b) = (traj.last(), base_traj.last());
        rows.push(ContinuityRow {
            eps,
            psi0,
            psi_sup: sup,
            d_h1_final: norm_h1(&a.d.sub(&b.d)),
            rho_l6_final: norm_lq(&a.rho.sub(&b.rho), 6.0)?,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.eps > 0.0).map(|r| (r.psi0, r.psi_sup)).collect();
    Ok(ContinuityTable {
        slope: loglog_slope(&pts),
        rows,
        base_report,
    })
}

/// Default growth cap of the small-data experiment.
pub const GROWTH_CAP: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SmallDataReport {
    pub theta: f64,
    pub alpha: f64,
    pub initial: NormBundle,
    pub sup: NormBundle,
    /// Per bundle entry: `sup <= cap * initial` (with a `1e-12` absolute allowance).
    pub within_cap: [bool; 9],
    /// Sup in time of `||rho - alpha - delta||_{W^{1,6}}`, `||u||_{H^2}`, `||d - m||_{H^3}`.
    pub deviation_sup: [f64; 3],
    pub finite: bool,
    /// Set when the Picard iteration diverged or did not converge.
    pub failure: Option<String>,
    pub report: Option<PicardReport>,
    pub trajectory: Option<Trajectory>,
}

impl SmallDataReport {
    pub fn bounded(&self) -> bool {
        self.failure.is_none() && self.finite && self.within_cap.iter().all(|&b| b)
    }
}

fn deviations(traj: &Trajectory, alpha: f64, params: &ModelParams) -> Result<[f64; 3]> {
    let mut out = [0.0f64; 3];
    let m = Field::constant(*traj.grid(), &params.m);
    for s in traj.states() {
        let r = norm_w1q(&s.rho.map(|r| r - alpha - params.delta), 6.0)?;
        out[0] = out[0].max(r);
        out[1] = out[1].max(norm_hk(&s.u, 2));
        out[2] = out[2].max(norm_hk(&s.d.sub(&m), 3));
    }
    Ok(out)
}

/// Runs [`picard_solve`] on [`scaled_bump_data`] over `cfg.time` and reports the
/// norm bundle against its initial values. Divergence and non-convergence are
/// reported, not raised.
pub fn smalldata_experiment(
    grid: GridSpec,
    theta: f64,
    alpha: f64,
    params: &ModelParams,
    cfg: &PicardConfig,
    cap: f64,
) -> Result<SmallDataReport> {
    let data = scaled_bump_data(grid, theta, alpha, params, &cfg.solver)?;
    let mut out = SmallDataReport {
        theta,
        alpha,
        initial: NormBundle::default(),
        sup: NormBundle::default(),
        within_cap: [false; 9],
        deviation_sup: [f64::NAN; 3],
        finite: false,
        failure: None,
        report: None,
        trajectory: None,
    };
    match picard_solve(&data, params, cfg) {
        Ok((traj, report)) => {
            let series = monitor_norms(&traj)?;
            out.initial = series.levels[0];
            out.sup = series.sup;
            let (i, s) = (out.initial.values(), out.sup.values());
            out.within_cap = std::array::from_fn(|k| s[k] <= cap * i[k] + 1e-12);
            out.deviation_sup = deviations(&traj, alpha, params)?;
            out.finite = traj.states().iter().all(|s| s.rho.is_finite() && s.u.is_finite() && s.d.is_finite());
            out.report = Some(report);
            out.trajectory = Some(traj);
        }
        Err(Error::Diverged(report)) => {
            out.failure = Some("diverged".into());
            out.report = Some(*report);
        }
        Err(Error::NotConverged(report)) => {
            out.failure = Some("not converged".into());
            out.report = Some(*report);
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Summary of one run of the delta sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaRow {
    pub delta: f64,
    pub sweeps: usize,
    pub final_psi: f64,
    pub min_rho: f64,
    pub sup: NormBundle,
}

/// Repeats the Picard solve with `delta` halved `count - 1` times.
pub fn delta_sweep(
    data: &InitialData,
    params: &ModelParams,
    cfg: &PicardConfig,
    count: usize,
) -> Result<Vec<DeltaRow>> {
    let mut rows = Vec::with_capacity(count);
    let mut p = *params;
    for _ in 0..count {
        let (traj, report) = picard_solve(data, &p, cfg)?;
        let last = report.sweeps.last().expect("at least one sweep");
        rows.push(DeltaRow {
            delta: p.delta,
            sweeps: report.sweep_count(),
            final_psi: last.psi_sup.unwrap_or(0.0),
            min_rho: last.stats.min_rho,
            sup: monitor_norms(&traj)?.sup,
        });
        p.delta *= 0.5;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TimeGrid;
    use crate::parabolic::heat_flow;

    fn equilibrium_state(grid: GridSpec, rho: f64, params: &ModelParams) -> FluidState {
        FluidState::new(
            Field::constant(grid, &[rho]),
            Field::zeros(grid, grid.dim()),
            Field::constant(grid, &params.m),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_energy_hand_value() {
        let g = GridSpec::new(2, &[1.0, 2.0], &[9, 5]).unwrap();
        let p = ModelParams::default();
        let e = energy(&equilibrium_state(g, 1.001, &p), &p).unwrap();
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.elastic, 0.0);
        let expect = 1.001f64.powf(1.4) / 0.4 * 2.0;
        assert!((e.internal - expect).abs() < 1e-13);
        assert_eq!(e.total, e.kinetic + e.internal + e.elastic);
        assert_eq!(dissipation(&equilibrium_state(g, 1.0, &p), &p), 0.0);
    }

    #[test]
    fn kinetic_energy_is_quadratic() {
        let g = GridSpec::line(1.0, 17).unwrap();
        let p = ModelParams::default();
        let rho = Field::scalar_fn(g, |x| 1.0 + x[0]);
        let u = Field::scalar_fn(g, |x| (PI * x[0]).sin());
        let d = Field::from_fn(g, 3, |x, o| {
            o[0] = 0.2 * x[0];
            o[2] = 1.0;
        });
        let e1 = energy(&FluidState::new(rho.clone(), u.clone(), d.clone(), 0.0).unwrap(), &p).unwrap();
        let e2 = energy(&FluidState::new(rho, u.scale(2.0), d, 0.0).unwrap(), &p).unwrap();
        assert!((e2.kinetic - 4.0 * e1.kinetic).abs() < 1e-14);
        assert_eq!(e2.internal, e1.internal);
        assert_eq!(e2.elastic, e1.elastic);
    }

    #[test]
    fn heat_flow_energy_and_norms_decrease() {
        let g = GridSpec::line(1.0, 33).unwrap();
        let p = ModelParams::default();
        let tg = TimeGrid::new(0.05, 20).unwrap();
        let u0 = Field::scalar_fn(g, |x| (PI * x[0]).sin() + 0.3 * (3.0 * PI * x[0]).sin()).zero_boundary();
        let u = heat_flow(&u0, &tg, &SolverConfig::with_tol(1e-12)).unwrap();
        let states: Vec<FluidState> = u
            .into_iter()
            .enumerate()
            .map(|(l, u)| {
                FluidState::new(
                    Field::constant(g, &[1.0]),
                    u,
                    Field::constant(g, &p.m),
                    tg.time(l),
                )
                .unwrap()
            })
            .collect();
        let traj = Trajectory::new(tg, states).unwrap();
        let e: Vec<f64> = traj.states().iter().map(|s| energy(s, &p).unwrap().kinetic).collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]));
        let series = monitor_norms(&traj).unwrap();
        assert!(series.levels.windows(2).all(|w| w[1].u_h1 <= w[0].u_h1));
        for b in &series.levels {
            assert_eq!(b.rho_t_l6, 0.0);
            assert_eq!(b.d_t_h1, 0.0);
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [1e-4, 1e-6, 1e-8].iter().map(|&x: &f64| (x, 3.0 * x.powf(1.1))).collect();
        assert!((loglog_slope(&pts).unwrap() - 1.1).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn frame_is_orthonormal() {
        for m in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.6, 0.8, 0.0]] {
            let (a, b) = orthonormal_complement(m);
            let dot = |x: [f64; 3], y: [f64; 3]| (0..3).map(|i| x[i] * y[i]).sum::<f64>();
            assert!(dot(a, m).abs() < 1e-15 && dot(b, m).abs() < 1e-15 && dot(a, b).abs() < 1e-15);
            assert!((dot(a, a) - 1.0).abs() < 1e-15 && (dot(b, b) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_theta_is_equilibrium() {
        let g = GridSpec::line(1.0, 17).unwrap();
        let p = ModelParams::default();
        let cfg = PicardConfig::new(TimeGrid::new(0.01, 5).unwrap());
        let rep = smalldata_experiment(g, 0.0, 0.0, &p, &cfg, GROWTH_CAP).unwrap();
        assert!(rep.failure.is_none());
        assert!(rep.deviation_sup.iter().all(|&v| v <= 1e-12), "{:?}", rep.deviation_sup);
    }
}

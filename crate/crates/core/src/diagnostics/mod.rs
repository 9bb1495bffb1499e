//! Blow-up functionals of the hydrostatic flow and the inequalities they
//! obey.
//!
//! All quantities are computed with the channel quadrature. Functionals that
//! divide by `ω_y` are suspended (returned as `None`) once `min ω_y ≤ 0`.

mod certify;
mod series;

pub use certify::{
    identity_suite, CheckKind, CheckStatus, CheckSummary, Certifier, DiagnosticRecord, IdentityPoint, IdentityReport,
    StationarityProbe, StationarityVerdict, ACCURACY_CHECKS, CHECK_NAMES,
};
pub use series::{write_csv, CSV_COLUMNS};

use crate::error::{Error, Result};
use crate::grid::reduce::{max_abs, pairwise_sum};
use crate::grid::{ChannelGrid, ScalarField2D, YWeight};
use crate::hydrostatic::FlowState;

/// Instantaneous functionals of one state.
#[derive(Debug, Clone, Default)]
pub struct Functionals {
    pub t: f64,
    pub min_rayleigh: f64,
    pub kinetic: f64,
    pub u_inf: f64,
    pub omega_inf: f64,
    /// `∫_𝕋 P_x² dx`.
    pub px_l2: f64,
    /// `max_x |∫_0^1 u dy|`.
    pub momentum: f64,
    pub collapsed: bool,
    pub rayleigh: Option<RayleighFunctionals>,
}

/// The part that needs `ω_y > 0`.
#[derive(Debug, Clone, Default)]
pub struct RayleighFunctionals {
    pub e1: f64,
    /// `∫(ωω_x/ω_y − u_x)`; equals `e1` in the continuum.
    pub e1_alt: f64,
    pub e2: f64,
    /// `∫(u²(ωω_x/ω_y − u_x) − uP_x)`.
    pub e2_alt: f64,
    pub d1: f64,
    pub d2: f64,
    /// `∫ log(∂_yω₀/ω_y)`; `None` without a reference slope field.
    pub log_rayleigh: Option<f64>,
    /// `∫ ω_x²(1 + 1/ω_y²)`.
    pub growth_integrand: f64,
    /// `‖ωω_x/ω_y − u_x‖∞`.
    pub defect_sup: f64,
    /// `∫ ω_x²/ω_y`.
    pub weighted_slope: f64,
    pub omega_y_max: f64,
    /// `‖1/ω_y‖∞`.
    pub inv_omega_y_max: f64,
}

/// Evaluate everything at `state`. `omega0_y` is `∂_yω₀` on the same grid,
/// used by the log-Rayleigh functional.
pub fn evaluate(
    grid: &ChannelGrid,
    state: &FlowState,
    omega0_y: Option<&ScalarField2D>,
) -> Result<Functionals> {
    let c = state.cache();
    let omega = state.omega();
    let u = &c.u;
    let kinetic = grid.integrate_unchecked(&u.values().iter().map(|v| v * v).collect::<Vec<_>>());
    let momentum = max_abs(&grid.integrate_y(u, YWeight::One)?);
    let px_l2 = pairwise_sum(&c.px.iter().map(|p| p * p).collect::<Vec<_>>()) / grid.nx() as f64;
    let min_rayleigh = c.omega_y.min();
    let mut out = Functionals {
        t: state.t,
        min_rayleigh,
        kinetic,
        u_inf: u.max_abs(),
        omega_inf: omega.max_abs(),
        px_l2,
        momentum,
        collapsed: !(min_rayleigh > 0.0),
        rayleigh: None,
    };
    if out.collapsed {
        return Ok(out);
    }

    let ux = grid.ddx_unchecked(u);
    let ny = grid.ny();
    let (w, wx, wy, uu, uxv) = (
        omega.values(),
        c.omega_x.values(),
        c.omega_y.values(),
        u.values(),
        ux.values(),
    );
    let px = &c.px;
    let q = |k: usize| w[k] * wx[k] / wy[k];
    let defect = |k: usize| q(k) - uxv[k];
    let e1 = grid.integrate_by(q);
    let e1_alt = grid.integrate_by(defect);
    let e2 = grid.integrate_by(|k| uu[k] * uu[k] * q(k));
    let e2_alt = grid.integrate_by(|k| uu[k] * uu[k] * defect(k) - uu[k] * px[k / ny]);
    let d1 = grid.integrate_by(|k| defect(k) * defect(k));
    let d2 = grid.integrate_by(|k| {
        let r = px[k / ny] - uu[k] * defect(k);
        r * r
    });
    let growth_integrand = grid.integrate_by(|k| wx[k] * wx[k] * (1.0 + 1.0 / (wy[k] * wy[k])));
    let weighted_slope = grid.integrate_by(|k| wx[k] * wx[k] / wy[k]);
    let defect_sup = (0..w.len()).fold(0.0_f64, |m, k| m.max(defect(k).abs()));
    let log_rayleigh = omega0_y.map(|oy0| {
        let r = oy0.values();
        grid.integrate_by(|k| (r[k] / wy[k]).ln())
    });
    out.rayleigh = Some(RayleighFunctionals {
        e1,
        e1_alt,
        e2,
        e2_alt,
        d1,
        d2,
        log_rayleigh,
        growth_integrand,
        defect_sup,
        weighted_slope,
        omega_y_max: c.omega_y.max(),
        inv_omega_y_max: 1.0 / min_rayleigh,
    });
    Ok(out)
}

fn rayleigh_part(grid: &ChannelGrid, state: &FlowState) -> Result<RayleighFunctionals> {
    let f = evaluate(grid, state, None)?;
    f.rayleigh.ok_or(Error::RayleighCollapse {
        min_slope: f.min_rayleigh,
    })
}

/// `E1 = ∫ ωω_x/ω_y`. Errors with a collapse when `min ω_y ≤ 0`.
pub fn e1(grid: &ChannelGrid, state: &FlowState) -> Result<f64> {
    Ok(rayleigh_part(grid, state)?.e1)
}

/// `E2 = ∫ u² ωω_x/ω_y`.
pub fn e2(grid: &ChannelGrid, state: &FlowState) -> Result<f64> {
    Ok(rayleigh_part(grid, state)?.e2)
}

/// `(D1, D2)`, the two dissipation integrals.
pub fn dissipations(grid: &ChannelGrid, state: &FlowState) -> Result<(f64, f64)> {
    let r = rayleigh_part(grid, state)?;
    Ok((r.d1, r.d2))
}

/// `∫ log(∂_yω₀/ω_y)` for two slope fields on the same grid.
pub fn log_rayleigh(
    grid: &ChannelGrid,
    omega_y: &ScalarField2D,
    omega0_y: &ScalarField2D,
) -> Result<f64> {
    grid.check(omega_y)?;
    grid.check(omega0_y)?;
    let min = omega_y.min().min(omega0_y.min());
    if !(min > 0.0) {
        return Err(Error::RayleighCollapse { min_slope: min });
    }
    let (a, b) = (omega0_y.values(), omega_y.values());
    Ok(grid.integrate_by(|k| (a[k] / b[k]).ln()))
}

/// Constants fixed by `ω₀` for the whole run.
#[derive(Debug, Clone)]
pub struct BoundConstants {
    pub e1_0: f64,
    pub e2_0: f64,
    pub omega0_inf: f64,
    /// `‖u‖₂²`, time-invariant.
    pub u_l2_sq: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `min|ω₀|` when positive.
    pub omega0_min_abs: Option<f64>,
    /// `3 + 2‖ω₀‖∞/min|ω₀|`.
    pub c_omega: Option<f64>,
    /// `1/2 + C(ω₀)/2`.
    pub c_tilde: Option<f64>,
    pub slope0_inf: f64,
    pub inv_slope0_inf: f64,
    /// `‖∂_xω₀/√∂_yω₀‖₂`.
    pub weighted0: f64,
    /// `∫ log(2‖ω₀‖∞/∂_yω₀)`.
    pub log_budget: f64,
}

impl BoundConstants {
    pub fn from_initial(grid: &ChannelGrid, state0: &FlowState) -> Result<Self> {
        let f = evaluate(grid, state0, None)?;
        let r = f.rayleigh.ok_or(Error::RayleighCollapse {
            min_slope: f.min_rayleigh,
        })?;
        let omega0_inf = f.omega_inf;
        let u_l2_sq = f.kinetic;
        let ratio4 = (1.5 * omega0_inf).powi(4) / (u_l2_sq * u_l2_sq);
        let c2 = ratio4;
        let c1 = ratio4 * r.e1.abs() + r.e2 / u_l2_sq;
        let c3 = 2.0 * omega0_inf * omega0_inf + 2.0 / (std::f64::consts::PI.powi(2));
        let c4 = 2.0 * (3.0 / std::f64::consts::PI * omega0_inf).powi(2)
            + 2.0 * (1.5 * omega0_inf).powi(2) * c3;
        let min_abs = state0
            .omega()
            .values()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let omega0_min_abs = (min_abs > 0.0).then_some(min_abs);
        let c_omega = omega0_min_abs.map(|m| 3.0 + 2.0 * omega0_inf / m);
        let c_tilde = c_omega.map(|c| 0.5 + 0.5 * c);
        let oy = state0.cache().omega_y.values();
        let log_budget = grid.integrate_by(|k| (2.0 * omega0_inf / oy[k]).ln());
        Ok(Self {
            e1_0: r.e1,
            e2_0: r.e2,
            omega0_inf,
            u_l2_sq,
            c1,
            c2,
            c3,
            c4,
            omega0_min_abs,
            c_omega,
            c_tilde,
            slope0_inf: r.omega_y_max,
            inv_slope0_inf: r.inv_omega_y_max,
            weighted0: r.weighted_slope.sqrt(),
            log_budget,
        })
    }

    /// Upper bound on the blow-up time implied by `E1(0) > 0`.
    pub fn e1_pole(&self) -> Option<f64> {
        (self.e1_0 > 0.0).then(|| 1.0 / self.e1_0)
    }

    pub fn e2_pole(&self) -> Option<f64> {
        (self.e2_0 > 0.0).then(|| self.u_l2_sq / self.e2_0)
    }
}

/// A lower-bound value, or why it has none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundValue {
    Value(f64),
    NotApplicable,
    /// `t` is at or beyond the pole of the bound.
    PoleReached,
}

impl BoundValue {
    pub fn value(self) -> Option<f64> {
        match self {
            BoundValue::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBounds {
    /// `1/(1/E1(0) − t)`.
    pub e1: BoundValue,
    /// `‖u‖₂²/(‖u‖₂²/E2(0) − t)`.
    pub e2: BoundValue,
    /// `log(1/(1 − t E1(0)))`, bounds the log-Rayleigh functional from below.
    pub log_e1: BoundValue,
    /// `log(1/(1 − t E2(0)/‖u‖₂²))`, bounded above by
    /// `t C1 + C2·logRayleigh`.
    pub log_e2: BoundValue,
}

pub fn lower_bounds(t: f64, e1_0: f64, e2_0: f64, u_l2_sq: f64) -> LowerBounds {
    let pair = |e0: f64, scale: f64| -> (BoundValue, BoundValue) {
        if !(e0 > 0.0) {
            return (BoundValue::NotApplicable, BoundValue::NotApplicable);
        }
        let pole = scale / e0;
        if t >= pole {
            return (BoundValue::PoleReached, BoundValue::PoleReached);
        }
        (
            BoundValue::Value(scale / (pole - t)),
            BoundValue::Value((pole / (pole - t)).ln()),
        )
    };
    let (e1, log_e1) = pair(e1_0, 1.0);
    let (e2, log_e2) = pair(e2_0, u_l2_sq);
    LowerBounds {
        e1,
        e2,
        log_e1,
        log_e2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::XDerivative;

    #[test]
    fn lower_bound_examples() {
        let b = lower_bounds(0.5, 1.0, -1.0, 1.0);
        assert_eq!(b.e1, BoundValue::Value(2.0));
        assert_eq!(b.e2, BoundValue::NotApplicable);
        let b = lower_bounds(0.0, 0.97201, 0.2, 0.13);
        assert_eq!(b.e1, BoundValue::Value(0.97201));
        assert_eq!(b.log_e1, BoundValue::Value(0.0));
        assert_eq!(lower_bounds(2.0, 1.0, 0.0, 1.0).e1, BoundValue::PoleReached);
    }

    #[test]
    fn x_independent_data_has_vanishing_functionals() {
        let g = ChannelGrid::new(16, 65, XDerivative::Spectral).unwrap();
        let s = FlowState::new(&g, 0.0, g.sample(|_, y| 2.0 * y + 3.0)).unwrap();
        assert!(e1(&g, &s).unwrap().abs() < 1e-12);
        assert!(e2(&g, &s).unwrap().abs() < 1e-12);
        let (d1, d2) = dissipations(&g, &s).unwrap();
        assert!(d1 < 1e-24 && d2 < 1e-24);
    }

    #[test]
    fn log_rayleigh_of_doubled_slope() {
        let g = ChannelGrid::new(16, 33, XDerivative::Spectral).unwrap();
        let oy0 = g.sample(|x, y| 2.0 + (2.0 * std::f64::consts::PI * x - y).cos());
        let oy = oy0.map(|v| 2.0 * v);
        assert!((log_rayleigh(&g, &oy, &oy0).unwrap() + 2f64.ln()).abs() < 1e-14);
        assert_eq!(log_rayleigh(&g, &oy0, &oy0).unwrap(), 0.0);
    }

    #[test]
    fn collapse_suspends_functionals() {
        let g = ChannelGrid::new(16, 33, XDerivative::Spectral).unwrap();
        let s = FlowState::new(&g, 0.0, g.sample(|_, y| (y - 0.5).powi(2))).unwrap();
        assert!(matches!(e1(&g, &s), Err(Error::RayleighCollapse { .. })));
        let f = evaluate(&g, &s, None).unwrap();
        assert!(f.collapsed && f.rayleigh.is_none());
    }
}

//! Vorticity form of the hydrostatic Euler equations on 𝕋×(0,1):
//! `ω_t + u ω_x + v ω_y = 0`, with `u`, `v` reconstructed from `ω` by the
//! closed-form column integrals.

mod run;

pub use run::{run, RunControl, RunOutcome, StopReason};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, CumDirection, ScalarField2D, YWeight};

/// Fields derived from `ω`, recomputed whenever `ω` changes.
#[derive(Debug, Clone)]
pub struct FlowCache {
    pub omega_x: ScalarField2D,
    pub omega_y: ScalarField2D,
    pub stream: ScalarField2D,
    pub u: ScalarField2D,
    pub v: ScalarField2D,
    /// `P_x` per x-node.
    pub px: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    omega: ScalarField2D,
    cache: FlowCache,
}

impl FlowState {
    pub fn new(grid: &ChannelGrid, t: f64, omega: ScalarField2D) -> Result<Self> {
        grid.check(&omega)?;
        let cache = derive(grid, &omega);
        Ok(Self { t, omega, cache })
    }

    /// Project `ω₀` onto the dealiased band first (spectral-x only).
    pub fn initial(grid: &ChannelGrid, omega0: ScalarField2D) -> Result<Self> {
        let omega = grid.dealias_x(&omega0)?;
        Self::new(grid, 0.0, omega)
    }

    pub fn omega(&self) -> &ScalarField2D {
        &self.omega
    }

    pub fn cache(&self) -> &FlowCache {
        &self.cache
    }
}

fn derive(grid: &ChannelGrid, omega: &ScalarField2D) -> FlowCache {
    let omega_x = grid.ddx_unchecked(omega);
    let omega_y = grid.ddy_unchecked(omega);
    let u = u_from_omega(grid, omega);
    let v = kernel(grid, &omega_x);
    let stream = kernel(grid, omega);
    let px = px_from_u(grid, &u);
    FlowCache {
        omega_x,
        omega_y,
        stream,
        u,
        v,
        px,
    }
}

/// `(1−y)∫_0^y z g dz + y∫_y^1 (1−z) g dz`; zero at both walls.
fn kernel(grid: &ChannelGrid, g: &ScalarField2D) -> ScalarField2D {
    let lower = grid.cumint_unchecked(g, YWeight::Z, CumDirection::FromZero);
    let upper = grid.cumint_unchecked(g, YWeight::OneMinusZ, CumDirection::ToOne);
    let ny = grid.ny();
    let mut out = lower;
    for (k, (o, up)) in out.values_mut().iter_mut().zip(upper.values()).enumerate() {
        let y = grid.y(k % ny);
        *o = (1.0 - y) * *o + y * up;
    }
    out
}

/// `u = ∫_0^1 zω dz − ∫_y^1 ω dz`. The first term is evaluated as the
/// trapezoid mean of `C = ∫_y^1 ω`, which is the same integral after
/// swapping the order; this makes the discrete column mean of `u` vanish
/// to roundoff.
fn u_from_omega(grid: &ChannelGrid, omega: &ScalarField2D) -> ScalarField2D {
    let ny = grid.ny();
    let mut c = grid.cumint_unchecked(omega, YWeight::One, CumDirection::ToOne);
    for col in c.values_mut().chunks_mut(ny) {
        let mean = crate::grid::trapezoid(col);
        for v in col.iter_mut() {
            *v = mean - *v;
        }
    }
    c
}

fn px_from_u(grid: &ChannelGrid, u: &ScalarField2D) -> Vec<f64> {
    let usq = u.map(|v| v * v);
    let energy = grid.integrate_y(&usq, YWeight::One).expect("finite u");
    let d = grid.ddx_line(&grid.dealias_line(&energy));
    d.into_iter().map(|v| -v).collect()
}

pub fn stream_function(grid: &ChannelGrid, omega: &ScalarField2D) -> Result<ScalarField2D> {
    grid.check(omega)?;
    Ok(kernel(grid, omega))
}

pub fn velocity_u(grid: &ChannelGrid, omega: &ScalarField2D) -> Result<ScalarField2D> {
    grid.check(omega)?;
    Ok(u_from_omega(grid, omega))
}

pub fn velocity_v(grid: &ChannelGrid, omega: &ScalarField2D) -> Result<ScalarField2D> {
    let omega_x = grid.ddx(omega)?;
    Ok(kernel(grid, &omega_x))
}

/// `P_x = −∂_x ∫_0^1 u² dy` per x-node.
pub fn pressure_gradient(grid: &ChannelGrid, u: &ScalarField2D) -> Result<Vec<f64>> {
    grid.check(u)?;
    Ok(px_from_u(grid, u))
}

/// `−(u ω_x + v ω_y)`, dealiased under spectral-x.
pub fn rhs(grid: &ChannelGrid, omega: &ScalarField2D) -> Result<ScalarField2D> {
    grid.check(omega)?;
    Ok(rhs_unchecked(grid, omega))
}

fn rhs_unchecked(grid: &ChannelGrid, omega: &ScalarField2D) -> ScalarField2D {
    let omega_x = grid.ddx_unchecked(omega);
    let omega_y = grid.ddy_unchecked(omega);
    let u = u_from_omega(grid, omega);
    let v = kernel(grid, &omega_x);
    let mut adv = grid.zeros();
    let (ox, oy, uu, vv) = (
        omega_x.values(),
        omega_y.values(),
        u.values(),
        v.values(),
    );
    adv.values_mut()
        .par_iter_mut()
        .enumerate()
        .for_each(|(k, a)| *a = -(uu[k] * ox[k] + vv[k] * oy[k]));
    grid.dealias_unchecked(&adv)
}

/// `u_max·dt·nx + v_max·dt·(ny−1)`.
pub fn cfl_number(grid: &ChannelGrid, state: &FlowState, dt: f64) -> f64 {
    let c = state.cache();
    dt * (c.u.max_abs() * grid.nx() as f64 + c.v.max_abs() * (grid.ny() - 1) as f64)
}

/// Largest `dt` with CFL number at most `cfl_max`.
pub fn admissible_dt(grid: &ChannelGrid, state: &FlowState, cfl_max: f64) -> f64 {
    let per_dt = cfl_number(grid, state, 1.0);
    if per_dt > 0.0 {
        cfl_max / per_dt
    } else {
        f64::INFINITY
    }
}

/// One classical RK4 step.
pub fn step_rk4(grid: &ChannelGrid, state: &FlowState, dt: f64, cfl_max: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let cfl = cfl_number(grid, state, dt);
    if cfl > cfl_max {
        return Err(Error::CflViolation {
            cfl,
            cfl_max,
            admissible_dt: admissible_dt(grid, state, cfl_max),
        });
    }
    let w0 = state.omega();
    let stage = |base: &ScalarField2D, k: &ScalarField2D, c: f64| base.zip_map(k, |a, b| a + c * b);
    let k1 = rhs_unchecked(grid, w0);
    let k2 = rhs_unchecked(grid, &stage(w0, &k1, 0.5 * dt));
    let k3 = rhs_unchecked(grid, &stage(w0, &k2, 0.5 * dt));
    let k4 = rhs_unchecked(grid, &stage(w0, &k3, dt));
    let mut next = w0.clone();
    let (a, b, c, d) = (k1.values(), k2.values(), k3.values(), k4.values());
    for (k, w) in next.values_mut().iter_mut().enumerate() {
        *w += dt / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
    }
    if !next.is_finite() {
        return Err(Error::NonFiniteField);
    }
    FlowState::new(grid, state.t + dt, next)
}

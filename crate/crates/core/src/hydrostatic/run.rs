use serde::Serialize;

use super::{cfl_number, step_rk4, FlowState};
use crate::error::{Error, Result};
use crate::grid::ChannelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ReachedTEnd,
    /// `min ω_y` fell below the Rayleigh floor.
    RayleighCollapse,
    /// Spectral tail of `ω` exceeded its threshold.
    ResolutionLoss,
    NanDetected,
    /// Semi-Lagrangian only: `min h_a` reached zero.
    HaCollapse,
    /// Semi-Lagrangian only: `‖curl v‖∞` exceeded the drift budget.
    CurlDrift,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ReachedTEnd => "reached-t-end",
            StopReason::RayleighCollapse => "rayleigh-collapse",
            StopReason::ResolutionLoss => "resolution-loss",
            StopReason::NanDetected => "nan-detected",
            StopReason::HaCollapse => "ha-collapse",
            StopReason::CurlDrift => "curl-drift",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunControl {
    /// Base step; samples land on multiples of it.
    pub dt: f64,
    pub t_end: f64,
    pub cfl_max: f64,
    /// Observe every this many base steps.
    pub sample_every: usize,
    /// Collapse floor as a fraction of `min ∂_yω₀`.
    pub rayleigh_fraction: f64,
    pub tail_threshold: f64,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            cfl_max: 0.5,
            sample_every: 1,
            rayleigh_fraction: 1e-3,
            tail_threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub stop: StopReason,
    /// Time at which the stop condition was detected.
    pub t_stop: f64,
    /// Last state handed to the observer.
    pub last_observed: FlowState,
    pub base_steps: usize,
    pub rk_steps: usize,
}

/// Integrate from `initial` until `t_end` or a stop condition. When the CFL
/// number of the base step exceeds `cfl_max`, the step is split into equal
/// substeps so sample times stay on the base grid. The state that triggers a
/// stop is not observed.
pub fn run<F>(
    grid: &ChannelGrid,
    initial: FlowState,
    ctl: &RunControl,
    mut observe: F,
) -> Result<RunOutcome>
where
    F: FnMut(&FlowState) -> Result<()>,
{
    if !(ctl.dt > 0.0 && ctl.dt.is_finite()) {
        return Err(Error::InvalidTimeStep(ctl.dt));
    }
    let every = ctl.sample_every.max(1);
    let floor = ctl.rayleigh_fraction * initial.cache().omega_y.min();
    let t0 = initial.t;
    let n_steps = ((ctl.t_end - t0) / ctl.dt).round().max(0.0) as usize;

    let stop_check = |s: &FlowState| -> Result<Option<StopReason>> {
        if !s.omega().is_finite() {
            return Ok(Some(StopReason::NanDetected));
        }
        if s.cache().omega_y.min() < floor {
            return Ok(Some(StopReason::RayleighCollapse));
        }
        if grid.x_tail_fraction(s.omega())? > ctl.tail_threshold {
            return Ok(Some(StopReason::ResolutionLoss));
        }
        Ok(None)
    };

    let mut state = initial;
    observe(&state)?;
    let mut last_observed = state.clone();
    let mut rk_steps = 0;
    if let Some(stop) = stop_check(&state)? {
        return Ok(RunOutcome {
            stop,
            t_stop: state.t,
            last_observed,
            base_steps: 0,
            rk_steps,
        });
    }

    for step in 1..=n_steps {
        let cfl = cfl_number(grid, &state, ctl.dt);
        let m = if cfl.is_finite() {
            ((cfl / ctl.cfl_max) * (1.0 + 1e-12)).ceil().max(1.0) as usize
        } else {
            1
        };
        let sub = ctl.dt / m as f64;
        let mut next = state;
        let mut failed = false;
        for _ in 0..m {
            match step_rk4(grid, &next, sub, ctl.cfl_max) {
                Ok(s) => next = s,
                Err(Error::NonFiniteField) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            rk_steps += 1;
        }
        let t = t0 + step as f64 * ctl.dt;
        if failed {
            return Ok(RunOutcome {
                stop: StopReason::NanDetected,
                t_stop: t,
                last_observed,
                base_steps: step,
                rk_steps,
            });
        }
        next.t = t;
        state = next;
        if let Some(stop) = stop_check(&state)? {
            return Ok(RunOutcome {
                stop,
                t_stop: t,
                last_observed,
                base_steps: step,
                rk_steps,
            });
        }
        if step % every == 0 || step == n_steps {
            observe(&state)?;
            last_observed = state.clone();
        }
    }
    Ok(RunOutcome {
        stop: StopReason::ReachedTEnd,
        t_stop: state.t,
        last_observed,
        base_steps: n_steps,
        rk_steps,
    })
}

//! Semi-Lagrangian system on 𝕋^d × [0,1]_a: velocity `v(x,a)` and label
//! density `h_a(x,a)` driven by an a-independent pressure.

mod certify;
mod dictionary;
mod levelset;

pub use certify::{write_sl_csv, SlCertifier, SlRecord, SL_ACCURACY_CHECKS, SL_CHECK_NAMES};
pub use dictionary::{
    dictionary_study, evolve_to, observed_order, verify_dictionary, DictionaryReport,
    DictionarySample, DictionaryStudy, RESIDUAL_NAMES, ROUNDOFF_FLOOR,
};
pub use levelset::{compose, monotone_slopes, sl_from_vorticity, ColumnInterp, LevelSetMap, SlLift};

use crate::error::{Error, Result};
use crate::grid::{poisson_inverse_torus, TorusField, TorusGrid};
use crate::hydrostatic::StopReason;

#[derive(Debug, Clone)]
pub struct SlState {
    pub t: f64,
    /// `d` components.
    pub v: TorusField,
    pub ha: TorusField,
    /// Base vorticity level; only meaningful for states lifted from a
    /// channel flow.
    pub k: Option<f64>,
}

impl SlState {
    pub fn new(grid: &TorusGrid, t: f64, v: TorusField, ha: TorusField) -> Result<Self> {
        check_pair(grid, &v, &ha)?;
        Ok(Self { t, v, ha, k: None })
    }
}

fn check_pair(grid: &TorusGrid, v: &TorusField, ha: &TorusField) -> Result<()> {
    grid.check(v)?;
    grid.check(ha)?;
    if v.ncomp() != grid.d() || ha.ncomp() != 1 || v.na() != grid.na() || ha.na() != grid.na() {
        return Err(Error::ShapeMismatch {
            expected: format!("v: {} comps × na={}, ha: 1 comp × na={}", grid.d(), grid.na(), grid.na()),
            actual: format!(
                "v: {} × {}, ha: {} × {}",
                v.ncomp(),
                v.na(),
                ha.ncomp(),
                ha.na()
            ),
        });
    }
    Ok(())
}

/// Repeat an a-independent field along `a`.
fn broadcast(grid: &TorusGrid, f: &TorusField) -> TorusField {
    let na = grid.na();
    let values = f.values().iter().flat_map(|&x| std::iter::repeat_n(x, na)).collect();
    TorusField::new(f.d(), f.n(), na, f.ncomp(), values).expect("shape from grid")
}

fn stack(grid: &TorusGrid, comps: &[TorusField]) -> TorusField {
    let values = comps.iter().flat_map(|c| c.values().iter().copied()).collect();
    TorusField::new(grid.d(), grid.n(), comps[0].na(), comps.len(), values).expect("shape from grid")
}

fn product(grid: &TorusGrid, a: &TorusField, b: &TorusField) -> Result<TorusField> {
    grid.dealias(&a.zip_map(b, |x, y| x * y))
}

/// `P` with `−ΔP = Σ_ij ∂_i∂_j ∫ v_i v_j h_a da`, zero mean.
pub fn pressure(grid: &TorusGrid, v: &TorusField, ha: &TorusField) -> Result<TorusField> {
    check_pair(grid, v, ha)?;
    let d = grid.d();
    let mut g: Option<TorusField> = None;
    for i in 0..d {
        let vi = v.component_field(i);
        for j in i..d {
            let vj = v.component_field(j);
            let q = grid.integrate_a(&product(grid, &vi.zip_map(&vj, |x, y| x * y), ha)?)?;
            let term = grid.partial(&grid.partial(&q, i)?, j)?;
            let mult = if i == j { 1.0 } else { 2.0 };
            g = Some(match g {
                None => term.map(|x| mult * x),
                Some(acc) => acc.axpy(mult, &term),
            });
        }
    }
    Ok(poisson_inverse_torus(grid, &g.expect("d ≥ 1"))?.field)
}

/// Time derivatives `(∂_t v, ∂_t h_a)`:
/// `∂_t v = −∇(|v|²/2 + P)`, `∂_t h_a = −∇·(v h_a)`.
pub fn hsle_rhs(grid: &TorusGrid, state: &SlState) -> Result<(TorusField, TorusField)> {
    let (v, ha) = (&state.v, &state.ha);
    let p = pressure(grid, v, ha)?;
    let d = grid.d();
    let mut energy = broadcast(grid, &p);
    let mut fluxes = Vec::with_capacity(d);
    for i in 0..d {
        let vi = v.component_field(i);
        energy = energy.axpy(0.5, &product(grid, &vi, &vi)?);
        fluxes.push(product(grid, &vi, ha)?);
    }
    let dv = grid.gradient(&energy)?.map(|x| -x);
    let dha = grid.divergence(&stack(grid, &fluxes))?.map(|x| -x);
    Ok((dv, dha))
}

/// `dt · Σ_i max|v_i| · n`.
pub fn sl_cfl_number(grid: &TorusGrid, state: &SlState, dt: f64) -> f64 {
    let n = grid.n() as f64;
    (0..grid.d())
        .map(|c| dt * n * crate::grid::reduce::max_abs(state.v.component(c)))
        .sum()
}

pub fn sl_step_rk4(grid: &TorusGrid, state: &SlState, dt: f64, cfl_max: f64) -> Result<SlState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let cfl = sl_cfl_number(grid, state, dt);
    if cfl > cfl_max {
        return Err(Error::CflViolation {
            cfl,
            cfl_max,
            admissible_dt: dt * cfl_max / cfl,
        });
    }
    let stage = |s: &SlState, k: &(TorusField, TorusField), c: f64| SlState {
        t: s.t + c,
        v: s.v.axpy(c, &k.0),
        ha: s.ha.axpy(c, &k.1),
        k: s.k,
    };
    let k1 = hsle_rhs(grid, state)?;
    let k2 = hsle_rhs(grid, &stage(state, &k1, 0.5 * dt))?;
    let k3 = hsle_rhs(grid, &stage(state, &k2, 0.5 * dt))?;
    let k4 = hsle_rhs(grid, &stage(state, &k3, dt))?;
    let combine = |f: &TorusField, a: &TorusField, b: &TorusField, c: &TorusField, d: &TorusField| {
        f.axpy(dt / 6.0, a)
            .axpy(dt / 3.0, b)
            .axpy(dt / 3.0, c)
            .axpy(dt / 6.0, d)
    };
    let next = SlState {
        t: state.t + dt,
        v: combine(&state.v, &k1.0, &k2.0, &k3.0, &k4.0),
        ha: combine(&state.ha, &k1.1, &k2.1, &k3.1, &k4.1),
        k: state.k,
    };
    if !next.v.is_finite() || !next.ha.is_finite() {
        return Err(Error::NonFiniteField);
    }
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct SlControl {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_max: f64,
    pub sample_every: usize,
    /// Stop once `‖curl v‖∞` exceeds this (d = 2).
    pub curl_budget: f64,
    pub tail_threshold: f64,
}

impl Default for SlControl {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            cfl_max: 0.5,
            sample_every: 1,
            curl_budget: 1e-6,
            tail_threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlOutcome {
    pub stop: StopReason,
    pub t_stop: f64,
    pub last_observed: SlState,
    pub base_steps: usize,
    pub rk_steps: usize,
}

/// Same contract as the channel-flow `run`: substeps under CFL, samples on
/// the base grid, the stop-triggering state is not observed.
pub fn sl_run<F>(grid: &TorusGrid, initial: SlState, ctl: &SlControl, mut observe: F) -> Result<SlOutcome>
where
    F: FnMut(&SlState) -> Result<()>,
{
    if !(ctl.dt > 0.0 && ctl.dt.is_finite()) {
        return Err(Error::InvalidTimeStep(ctl.dt));
    }
    check_pair(grid, &initial.v, &initial.ha)?;
    let every = ctl.sample_every.max(1);
    let t0 = initial.t;
    let n_steps = ((ctl.t_end - t0) / ctl.dt).round().max(0.0) as usize;

    let stop_check = |s: &SlState| -> Result<Option<StopReason>> {
        if !s.v.is_finite() || !s.ha.is_finite() {
            return Ok(Some(StopReason::NanDetected));
        }
        if s.ha.min() <= 0.0 {
            return Ok(Some(StopReason::HaCollapse));
        }
        if grid.d() == 2 && grid.curl(&s.v)?.max_abs() > ctl.curl_budget {
            return Ok(Some(StopReason::CurlDrift));
        }
        let tail = grid.tail_fraction(&s.v)?.max(grid.tail_fraction(&s.ha)?);
        if tail > ctl.tail_threshold {
            return Ok(Some(StopReason::ResolutionLoss));
        }
        Ok(None)
    };

    let mut state = initial;
    observe(&state)?;
    let mut last_observed = state.clone();
    let mut rk_steps = 0;
    let outcome = |stop, t_stop, last_observed, base_steps, rk_steps| SlOutcome {
        stop,
        t_stop,
        last_observed,
        base_steps,
        rk_steps,
    };
    if let Some(stop) = stop_check(&state)? {
        return Ok(outcome(stop, state.t, last_observed, 0, 0));
    }
    for step in 1..=n_steps {
        let cfl = sl_cfl_number(grid, &state, ctl.dt);
        let m = if cfl.is_finite() {
            ((cfl / ctl.cfl_max) * (1.0 + 1e-12)).ceil().max(1.0) as usize
        } else {
            1
        };
        let sub = ctl.dt / m as f64;
        let mut next = state;
        let t = t0 + step as f64 * ctl.dt;
        for _ in 0..m {
            match sl_step_rk4(grid, &next, sub, ctl.cfl_max) {
                Ok(s) => next = s,
                Err(Error::NonFiniteField) => {
                    return Ok(outcome(StopReason::NanDetected, t, last_observed, step, rk_steps));
                }
                Err(e) => return Err(e),
            }
            rk_steps += 1;
        }
        next.t = t;
        state = next;
        if let Some(stop) = stop_check(&state)? {
            return Ok(outcome(stop, t, last_observed, step, rk_steps));
        }
        if step % every == 0 || step == n_steps {
            observe(&state)?;
            last_observed = state.clone();
        }
    }
    let t_stop = state.t;
    Ok(outcome(StopReason::ReachedTEnd, t_stop, last_observed, n_steps, rk_steps))
}

/// Add an a-independent gradient `∇ψ` to `v` so the label-averaged flux
/// `∫ v h_a da` becomes divergence free. Requires `∫ h_a da = 1`.
pub fn project_flux(grid: &TorusGrid, v: &TorusField, ha: &TorusField) -> Result<TorusField> {
    check_pair(grid, v, ha)?;
    let comps: Vec<TorusField> = (0..grid.d())
        .map(|i| grid.integrate_a(&product(grid, &v.component_field(i), ha)?))
        .collect::<Result<_>>()?;
    let div = grid.divergence(&stack(grid, &comps))?;
    let psi = poisson_inverse_torus(grid, &div)?.field;
    let grad = broadcast(grid, &grid.gradient(&psi)?);
    Ok(v.axpy(1.0, &grad))
}

/// Functionals of one SL state.
#[derive(Debug, Clone)]
pub struct SlFunctionals {
    pub t: f64,
    /// `−∫(∇·v) h_a`.
    pub e1: f64,
    /// `∫ v·v_t h_a`, `v_t` from the right-hand side.
    pub e2: f64,
    /// `∫ h_a log h_a`.
    pub entropy: f64,
    /// `∫|v|² h_a`.
    pub kinetic: f64,
    /// `∫_a |∫_x v|² ∫_x h_a`.
    pub bcc_lhs: f64,
    /// `∫|∇v|² h_a`.
    pub diss1: f64,
    /// `∫|v_t|² h_a`.
    pub diss2: f64,
    /// `max_x |∫ h_a da − 1|`.
    pub mass_dev: f64,
    pub curl_sup: f64,
    pub min_ha: f64,
}

pub fn sl_diagnostics(grid: &TorusGrid, state: &SlState) -> Result<SlFunctionals> {
    let (v, ha) = (&state.v, &state.ha);
    let min_ha = ha.min();
    if !(min_ha > 0.0) {
        return Err(Error::Domain(format!("h_a not positive (min {min_ha:e})")));
    }
    let d = grid.d();
    let (vt, _) = hsle_rhs(grid, state)?;
    let weighted = |f: &TorusField| -> Result<f64> {
        Ok(grid.integrate_full(&f.zip_map(ha, |x, h| x * h))?[0])
    };
    let dot = |a: &TorusField, b: &TorusField| {
        let mut acc = a.component_field(0).zip_map(&b.component_field(0), |x, y| x * y);
        for c in 1..d {
            acc = acc.axpy(1.0, &a.component_field(c).zip_map(&b.component_field(c), |x, y| x * y));
        }
        acc
    };
    let div = grid.divergence(v)?;
    let mut grad_sq: Option<TorusField> = None;
    for j in 0..d {
        let g = grid.gradient(&v.component_field(j))?;
        let s = dot(&g, &g);
        grad_sq = Some(match grad_sq {
            None => s,
            Some(acc) => acc.axpy(1.0, &s),
        });
    }

    // ∫_x v and ∫_x h_a per label
    let na = grid.na();
    let ns = grid.spatial_len() as f64;
    let x_mean = |f: &TorusField, c: usize| -> Vec<f64> {
        (0..na)
            .map(|m| {
                crate::grid::reduce::pairwise_sum_by(grid.spatial_len(), &|s| f.at(c, s, m)) / ns
            })
            .collect()
    };
    let mean_ha = x_mean(ha, 0);
    let mean_v: Vec<Vec<f64>> = (0..d).map(|c| x_mean(v, c)).collect();
    let bcc: Vec<f64> = (0..na)
        .map(|m| mean_v.iter().map(|mv| mv[m] * mv[m]).sum::<f64>() * mean_ha[m])
        .collect();
    let mass = grid.integrate_a(ha)?;

    Ok(SlFunctionals {
        t: state.t,
        e1: -weighted(&div)?,
        e2: weighted(&dot(v, &vt))?,
        entropy: weighted(&ha.map(f64::ln))?,
        kinetic: weighted(&dot(v, v))?,
        bcc_lhs: crate::grid::trapezoid(&bcc),
        diss1: weighted(&grad_sq.expect("d ≥ 1"))?,
        diss2: weighted(&dot(&vt, &vt))?,
        mass_dev: mass.values().iter().fold(0.0_f64, |m, x| m.max((x - 1.0).abs())),
        curl_sup: grid.curl(v)?.max_abs(),
        min_ha,
    })
}

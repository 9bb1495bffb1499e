//! Per-sample certification of the hydrostatic inequalities and run-level
//! accumulators.

use serde::Serialize;

use super::{evaluate, lower_bounds, BoundConstants, BoundValue, Functionals, LowerBounds};
use crate::error::Result;
use crate::grid::{ChannelGrid, ScalarField2D};
use crate::hydrostatic::FlowState;

/// Every certified relation, in report and CSV order.
pub const CHECK_NAMES: &[&str] = &[
    "cs-e1",
    "cs-e2",
    "lb-e1",
    "log-lb-e1",
    "lb-e2",
    "log-lb-e2",
    "growth-e1",
    "growth-e2",
    "monotone-e1",
    "monotone-e2",
    "u-inf",
    "kinetic-drift",
    "momentum",
    "max-principle",
    "cont-inv-slope",
    "cont-slope",
    "cont-weighted",
    "cont-e1",
    "cont-e2",
    "pressure-budget",
    "e1-budget",
    "accum-d1",
    "accum-d2",
    "stationarity",
    "identity-e1",
    "identity-e2",
    "identity-log",
];

/// Checks that measure discretization accuracy rather than a proven
/// inequality. They are reported but never count as violations.
pub const ACCURACY_CHECKS: &[&str] = &[
    "kinetic-drift",
    "momentum",
    "max-principle",
    "accum-d1",
    "accum-d2",
    "identity-e1",
    "identity-e2",
    "identity-log",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Certification,
    Accuracy,
}

impl CheckKind {
    pub fn of(name: &str) -> Self {
        if ACCURACY_CHECKS.contains(&name) {
            CheckKind::Accuracy
        } else {
            CheckKind::Certification
        }
    }
}

const SLACK_ABS: f64 = 1e-9;
const SLACK_REL: f64 = 1e-6;
const MONOTONE_REL: f64 = 1e-8;
const MONOTONE_ABS: f64 = 1e-12;
const KINETIC_DRIFT: f64 = 1e-6;
const MOMENTUM_REL: f64 = 1e-10;
const MAX_PRINCIPLE_REL: f64 = 1e-6;
/// x-refinement used to locate the sup of `ω₀` between nodes.
const SUP_REFINE: usize = 64;
const U_INF_ABS: f64 = 1e-8;
const ACCUM_REL: f64 = 1e-3;
const IDENTITY_REL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::NotApplicable => "na",
        }
    }
}

/// `lhs ≤ rhs` up to the certification slack.
fn leq(lhs: f64, rhs: f64) -> CheckStatus {
    let scale = lhs.abs().max(rhs.abs());
    if lhs <= rhs + SLACK_ABS + SLACK_REL * scale {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

fn flag(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// `|a − b| ≤ rel·max(|a|, |b|)` with a roundoff floor.
fn rel_close(a: f64, b: f64, rel: f64, floor: f64) -> CheckStatus {
    flag((a - b).abs() <= rel * a.abs().max(b.abs()) + floor)
}

#[derive(Debug, Clone)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub min_rayleigh: f64,
    pub log_rayleigh: Option<f64>,
    pub kinetic: f64,
    pub u_inf: f64,
    pub px_l2: f64,
    /// `M(t) = ∫_0^t ‖ωω_x/ω_y − u_x‖∞`.
    pub m: f64,
    pub cum_d1: f64,
    pub cum_d2: f64,
    pub cum_px2: f64,
    pub cum_abs_e1: f64,
    pub bounds: LowerBounds,
    pub e1_alt_gap: Option<f64>,
    pub e2_alt_gap: Option<f64>,
    /// `∫_0^t ∫ω_x²(1+1/ω_y²)`.
    pub cum_growth: f64,
    pub momentum: f64,
    pub omega_inf: f64,
    pub defect_sup: Option<f64>,
    /// `‖ω_x/√ω_y‖₂`.
    pub weighted_slope: Option<f64>,
    /// Indexed like [`CHECK_NAMES`].
    pub flags: Vec<CheckStatus>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub kind: CheckKind,
    pub status: CheckStatus,
    pub evaluated: usize,
    pub violations: usize,
    pub first_violation_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationarityVerdict {
    NotTriggered,
    Pass,
    Fail,
}

/// Watches for a sample with vanishing `D1`; from then on `ω` must stay
/// frozen and x-independent.
#[derive(Debug, Clone)]
pub struct StationarityProbe {
    pub d1_tol: f64,
    pub drift_tol: f64,
    pub slope_tol: f64,
    frozen: Option<(f64, ScalarField2D)>,
    verdict: StationarityVerdict,
}

impl Default for StationarityProbe {
    fn default() -> Self {
        Self {
            d1_tol: 1e-12,
            drift_tol: 1e-8,
            slope_tol: 1e-6,
            frozen: None,
            verdict: StationarityVerdict::NotTriggered,
        }
    }
}

impl StationarityProbe {
    /// Feed one sample; returns the status of this sample.
    pub fn observe(&mut self, t: f64, d1: Option<f64>, omega: &ScalarField2D, omega_x_sup: f64) -> CheckStatus {
        if self.frozen.is_none() {
            match d1 {
                Some(d) if d < self.d1_tol => {
                    self.frozen = Some((t, omega.clone()));
                    self.verdict = StationarityVerdict::Pass;
                }
                _ => return CheckStatus::NotApplicable,
            }
        }
        let (_, w) = self.frozen.as_ref().expect("frozen above");
        let ok = omega.sup_distance(w) < self.drift_tol && omega_x_sup < self.slope_tol;
        if !ok {
            self.verdict = StationarityVerdict::Fail;
        }
        flag(ok)
    }

    pub fn verdict(&self) -> StationarityVerdict {
        self.verdict
    }

    pub fn trigger_time(&self) -> Option<f64> {
        self.frozen.as_ref().map(|(t, _)| *t)
    }
}

/// Consumes samples in time order and certifies them.
#[derive(Debug, Clone)]
pub struct Certifier {
    pub constants: BoundConstants,
    omega0_y: ScalarField2D,
    kinetic0: f64,
    /// Sup of the interpolant of `ω₀`, the max-principle reference.
    omega0_sup: f64,
    probe: StationarityProbe,
    prev: Option<(Functionals, DiagnosticRecord)>,
    /// E1 has been negative at every sample so far.
    e1_negative_throughout: bool,
    records: Vec<DiagnosticRecord>,
}

impl Certifier {
    pub fn new(grid: &ChannelGrid, state0: &FlowState) -> Result<Self> {
        let constants = BoundConstants::from_initial(grid, state0)?;
        Ok(Self {
            kinetic0: constants.u_l2_sq,
            omega0_sup: grid
                .x_interpolated_sup(state0.omega(), SUP_REFINE)?
                .max(constants.omega0_inf),
            constants,
            omega0_y: state0.cache().omega_y.clone(),
            probe: StationarityProbe::default(),
            prev: None,
            e1_negative_throughout: true,
            records: Vec::new(),
        })
    }

    pub fn records(&self) -> &[DiagnosticRecord] {
        &self.records
    }

    pub fn probe(&self) -> &StationarityProbe {
        &self.probe
    }

    pub fn push(&mut self, grid: &ChannelGrid, state: &FlowState) -> Result<&DiagnosticRecord> {
        let f = evaluate(grid, state, Some(&self.omega0_y))?;
        let k = &self.constants;
        let r = f.rayleigh.as_ref();
        let t = f.t;

        let trap = |prev: Option<f64>, now: Option<f64>, dt: f64| match (prev, now) {
            (Some(a), Some(b)) => 0.5 * dt * (a + b),
            _ => 0.0,
        };
        let (m, cum_d1, cum_d2, cum_px2, cum_abs_e1, cum_growth) = match &self.prev {
            None => (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Some((pf, pr)) => {
                let dt = t - pf.t;
                let pr_r = pf.rayleigh.as_ref();
                (
                    pr.m + trap(pr_r.map(|x| x.defect_sup), r.map(|x| x.defect_sup), dt),
                    pr.cum_d1 + trap(pr_r.map(|x| x.d1), r.map(|x| x.d1), dt),
                    pr.cum_d2 + trap(pr_r.map(|x| x.d2), r.map(|x| x.d2), dt),
                    pr.cum_px2 + 0.5 * dt * (pf.px_l2 + f.px_l2),
                    pr.cum_abs_e1 + trap(pr_r.map(|x| x.e1.abs()), r.map(|x| x.e1.abs()), dt),
                    pr.cum_growth
                        + trap(
                            pr_r.map(|x| x.growth_integrand),
                            r.map(|x| x.growth_integrand),
                            dt,
                        ),
                )
            }
        };
        let bounds = lower_bounds(t, k.e1_0, k.e2_0, k.u_l2_sq);

        let na = CheckStatus::NotApplicable;
        let mut flags = vec![na; CHECK_NAMES.len()];
        let mut set = |name: &str, s: CheckStatus| {
            let i = CHECK_NAMES.iter().position(|n| *n == name).expect("known check");
            flags[i] = s;
        };

        set("u-inf", flag(f.u_inf <= 1.5 * k.omega0_inf + U_INF_ABS));
        set(
            "kinetic-drift",
            flag((f.kinetic - self.kinetic0).abs() <= KINETIC_DRIFT * self.kinetic0),
        );
        set("momentum", flag(f.momentum <= MOMENTUM_REL * f.u_inf + 1e-15));
        set(
            "max-principle",
            flag(f.omega_inf <= self.omega0_sup * (1.0 + MAX_PRINCIPLE_REL)),
        );
        set(
            "pressure-budget",
            leq(
                cum_px2,
                2.0 * (r.map_or(k.e2_0, |x| x.e2) - k.e2_0)
                    + 4.5 * k.omega0_inf * k.omega0_inf * (r.map_or(k.e1_0, |x| x.e1) - k.e1_0),
            ),
        );

        if let Some(r) = r {
            set("cs-e1", leq(r.e1 * r.e1, r.d1));
            set("cs-e2", leq(r.e2 * r.e2, f.kinetic * r.d2));
            if let BoundValue::Value(lb) = bounds.e1 {
                set("lb-e1", leq(lb, r.e1));
            }
            if let (BoundValue::Value(lb), Some(lr)) = (bounds.log_e1, r.log_rayleigh) {
                set("log-lb-e1", leq(lb, lr));
            }
            if let BoundValue::Value(lb) = bounds.e2 {
                set("lb-e2", leq(lb, r.e2));
            }
            if let (BoundValue::Value(lb), Some(lr)) = (bounds.log_e2, r.log_rayleigh) {
                set("log-lb-e2", leq(lb, t * k.c1 + k.c2 * lr));
            }
            set("growth-e1", leq(r.e1 - k.e1_0, k.c3 * cum_growth));
            set("growth-e2", leq(r.e2 - k.e2_0, k.c4 * cum_growth));
            if let Some((_, pr)) = &self.prev {
                if let (Some(a), Some(b)) = (pr.e1, pr.e2) {
                    let mono = |prev: f64, now: f64| {
                        flag(now >= prev - MONOTONE_ABS - MONOTONE_REL * prev.abs().max(now.abs()))
                    };
                    set("monotone-e1", mono(a, r.e1));
                    set("monotone-e2", mono(b, r.e2));
                }
                let de1 = r.e1 - k.e1_0;
                let de2 = r.e2 - k.e2_0;
                set("accum-d1", rel_close(cum_d1, de1, ACCUM_REL, 1e-12));
                set("accum-d2", rel_close(cum_d2, de2, ACCUM_REL, 1e-12));
            }
            let grow = m.exp();
            set("cont-inv-slope", leq(r.inv_omega_y_max, k.inv_slope0_inf * grow));
            set("cont-slope", leq(r.omega_y_max, k.slope0_inf * grow));
            if let (Some(c), Some(ct)) = (k.c_omega, k.c_tilde) {
                set(
                    "cont-weighted",
                    leq(r.weighted_slope.sqrt(), k.weighted0 * (0.5 * c * m).exp()),
                );
                let base = k.weighted0 * k.inv_slope0_inf.sqrt() * (ct * m).exp();
                set("cont-e1", leq(r.e1, base * k.omega0_inf));
                set("cont-e2", leq(r.e2, 2.25 * base * k.omega0_inf.powi(3)));
            }
            self.e1_negative_throughout &= r.e1 < 0.0;
            if k.e1_0 < 0.0 && k.e2_0 < 0.0 && self.e1_negative_throughout {
                set("e1-budget", leq(cum_abs_e1, k.log_budget));
            }
        }

        let omega_x_sup = state.cache().omega_x.max_abs();
        set(
            "stationarity",
            self.probe.observe(t, r.map(|x| x.d1), state.omega(), omega_x_sup),
        );

        let record = DiagnosticRecord {
            t,
            e1: r.map(|x| x.e1),
            e2: r.map(|x| x.e2),
            d1: r.map(|x| x.d1),
            d2: r.map(|x| x.d2),
            min_rayleigh: f.min_rayleigh,
            log_rayleigh: r.and_then(|x| x.log_rayleigh),
            kinetic: f.kinetic,
            u_inf: f.u_inf,
            px_l2: f.px_l2,
            m,
            cum_d1,
            cum_d2,
            cum_px2,
            cum_abs_e1,
            bounds,
            e1_alt_gap: r.map(|x| x.e1_alt - x.e1),
            e2_alt_gap: r.map(|x| x.e2_alt - x.e2),
            cum_growth,
            momentum: f.momentum,
            omega_inf: f.omega_inf,
            defect_sup: r.map(|x| x.defect_sup),
            weighted_slope: r.map(|x| x.weighted_slope.sqrt()),
            flags,
        };
        self.records.push(record.clone());
        self.prev = Some((f, record));
        Ok(self.records.last().expect("just pushed"))
    }

    /// Run-level summary: per-sample checks folded, plus the time-derivative
    /// identities evaluated on the finished series.
    pub fn summarize(&self) -> (Vec<CheckSummary>, IdentityReport) {
        let ident = identity_suite(&self.records);
        let mut out: Vec<CheckSummary> = CHECK_NAMES
            .iter()
            .enumerate()
            .map(|(i, &name)| {
                let mut s = CheckSummary {
                    name,
                    kind: CheckKind::of(name),
                    status: CheckStatus::NotApplicable,
                    evaluated: 0,
                    violations: 0,
                    first_violation_t: None,
                };
                for r in &self.records {
                    match r.flags[i] {
                        CheckStatus::NotApplicable => {}
                        CheckStatus::Pass => s.evaluated += 1,
                        CheckStatus::Fail => {
                            s.evaluated += 1;
                            s.violations += 1;
                            s.first_violation_t.get_or_insert(r.t);
                        }
                    }
                }
                s
            })
            .collect();
        for (name, series) in [
            ("identity-e1", &ident.e1_vs_d1),
            ("identity-e2", &ident.e2_vs_d2),
            ("identity-log", &ident.log_vs_e1),
        ] {
            let s = out.iter_mut().find(|s| s.name == name).expect("known");
            for p in series {
                s.evaluated += 1;
                if p.rel_err > IDENTITY_REL {
                    s.violations += 1;
                    s.first_violation_t.get_or_insert(p.t);
                }
            }
        }
        for s in &mut out {
            s.status = if s.evaluated == 0 {
                CheckStatus::NotApplicable
            } else if s.violations > 0 {
                CheckStatus::Fail
            } else {
                CheckStatus::Pass
            };
        }
        (out, ident)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityPoint {
    pub t: f64,
    pub derivative: f64,
    pub reference: f64,
    pub rel_err: f64,
}

/// Central-difference time derivatives against their instantaneous
/// counterparts: `dE1/dt = D1`, `dE2/dt = D2`, `d/dt logRayleigh = E1`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IdentityReport {
    pub e1_vs_d1: Vec<IdentityPoint>,
    pub e2_vs_d2: Vec<IdentityPoint>,
    pub log_vs_e1: Vec<IdentityPoint>,
}

impl IdentityReport {
    pub fn max_rel_err(points: &[IdentityPoint]) -> f64 {
        points.iter().fold(0.0_f64, |m, p| m.max(p.rel_err))
    }
}

pub fn identity_suite(records: &[DiagnosticRecord]) -> IdentityReport {
    let mut rep = IdentityReport::default();
    let point = |t: f64, derivative: f64, reference: f64| {
        let denom = reference.abs().max(derivative.abs());
        let err = (derivative - reference).abs();
        let rel_err = if err <= 1e-12 { 0.0 } else { err / denom };
        IdentityPoint {
            t,
            derivative,
            reference,
            rel_err,
        }
    };
    for w in records.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let span = c.t - a.t;
        if !(span > 0.0) {
            continue;
        }
        if let (Some(e0), Some(e2), Some(d)) = (a.e1, c.e1, b.d1) {
            rep.e1_vs_d1.push(point(b.t, (e2 - e0) / span, d));
        }
        if let (Some(e0), Some(e2), Some(d)) = (a.e2, c.e2, b.d2) {
            rep.e2_vs_d2.push(point(b.t, (e2 - e0) / span, d));
        }
        // d/dt ∫ log(∂_yω₀/ω_y) = E1
        if let (Some(l0), Some(l2), Some(e)) = (a.log_rayleigh, c.log_rayleigh, b.e1) {
            rep.log_vs_e1.push(point(b.t, (l2 - l0) / span, e));
        }
    }
    rep
}

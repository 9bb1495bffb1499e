use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::output::{write_snapshot, SnapshotField};
use super::{Initial, Scenario, System, SCHEMA_VERSION};
use crate::diagnostics::{write_csv, Certifier, CheckKind, CheckStatus, CheckSummary, IdentityReport};
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, TorusGrid, XDerivative};
use crate::hydrostatic::{run, FlowState, RunControl};
use crate::logmean::{limit_study, LimitStudy, WeightedSamples};
use crate::semilagrangian::{
    dictionary_study, project_flux, sl_run, write_sl_csv, DictionaryStudy, SlCertifier, SlControl, SlState,
};

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub nx: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub na: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: String,
    pub system: System,
    pub initial_data: Vec<String>,
    pub grid: GridSummary,
    pub dt: f64,
    pub t_end: f64,
    pub stop_reason: String,
    pub t_stop: f64,
    /// Time of the last certified sample.
    pub horizon: f64,
    pub samples: usize,
    /// Functionals at `t = 0`.
    pub initial: BTreeMap<String, f64>,
    /// Time by which the E1 lower bound forces blow-up, when `E1(0) > 0`.
    pub pole_estimate: Option<f64>,
    pub checks: Vec<CheckSummary>,
    /// Largest relative error per identity.
    pub identities: BTreeMap<String, f64>,
    /// No certification check was violated (accuracy checks do not count).
    pub certification_passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_mean: Option<LimitStudy>,
    pub manifest: Vec<String>,
    pub wall_clock_s: f64,
    pub base_steps: usize,
    pub rk_steps: usize,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.certification_passed {
            0
        } else {
            2
        }
    }
}

fn certified(checks: &[CheckSummary]) -> bool {
    !checks
        .iter()
        .any(|c| c.kind == CheckKind::Certification && c.status == CheckStatus::Fail)
}

fn write_file(out: &Path, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<String> {
    let mut w = BufWriter::new(fs::File::create(out.join(name))?);
    f(&mut w)?;
    w.flush()?;
    Ok(name.to_string())
}

struct Outcome {
    stop: &'static str,
    t_stop: f64,
    horizon: f64,
    samples: usize,
    initial: BTreeMap<String, f64>,
    pole: Option<f64>,
    checks: Vec<CheckSummary>,
    identities: BTreeMap<String, f64>,
    log_mean: Option<LimitStudy>,
    manifest: Vec<String>,
    base_steps: usize,
    rk_steps: usize,
    sources: Vec<String>,
}

/// Execute one scenario, writing `series.csv`, `report.json` and snapshots
/// under `s.out`. Certification failures are recorded, never raised.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    let clock = Instant::now();
    fs::create_dir_all(&s.out)?;
    let o = match s.system {
        System::Hydrostatic => hydrostatic(s)?,
        System::Semilagrangian1d | System::Semilagrangian2d => semilagrangian(s)?,
        System::LogMeanStudy => log_mean(s)?,
    };
    let mut manifest = o.manifest;
    manifest.push("report.json".into());
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        system: s.system,
        initial_data: o.sources,
        grid: match s.system {
            System::Hydrostatic => GridSummary {
                nx: s.nx,
                ny: Some(s.ny),
                na: None,
                d: None,
            },
            System::LogMeanStudy => GridSummary {
                nx: s.nodes,
                ny: None,
                na: None,
                d: None,
            },
            sys => GridSummary {
                nx: s.nx,
                ny: None,
                na: Some(s.na),
                d: sys.torus_dim(),
            },
        },
        dt: s.dt,
        t_end: s.t_end,
        stop_reason: o.stop.to_string(),
        t_stop: o.t_stop,
        horizon: o.horizon,
        samples: o.samples,
        initial: o.initial,
        pole_estimate: o.pole,
        certification_passed: certified(&o.checks) && o.log_mean.as_ref().is_none_or(|l| l.monotone && l.jensen),
        checks: o.checks,
        identities: o.identities,
        log_mean: o.log_mean,
        manifest,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        base_steps: o.base_steps,
        rk_steps: o.rk_steps,
    };
    write_file(&s.out, "report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        Ok(w.write_all(b"\n")?)
    })?;
    Ok(report)
}

fn hydrostatic(s: &Scenario) -> Result<Outcome> {
    let Initial::Omega(expr) = &s.initial else {
        return Err(Error::Config("channel flow needs initial.omega".into()));
    };
    let grid = ChannelGrid::new(s.nx, s.ny, XDerivative::Spectral)?;
    let s0 = FlowState::initial(&grid, grid.sample(|x, y| expr.eval(x, y, 0.0)))?;
    let mut cert = Certifier::new(&grid, &s0)?;
    let ctl = RunControl {
        dt: s.dt,
        t_end: s.t_end,
        cfl_max: s.cfl_max,
        sample_every: s.sample_every,
        rayleigh_fraction: s.rayleigh_fraction,
        tail_threshold: s.tail_threshold,
    };
    let (nx, ny) = (s.nx, s.ny);
    let mut manifest = Vec::new();
    let snap = |index: usize, st: &FlowState, manifest: &mut Vec<String>| -> Result<()> {
        let f = [SnapshotField {
            name: "omega",
            shape: vec![nx, ny],
            axes: &["x", "y"],
            values: st.omega().values(),
        }];
        manifest.extend(write_snapshot(&s.out, index, st.t, &f)?);
        Ok(())
    };
    let mut n_samples = 0;
    let mut last_snap = None;
    let out = run(&grid, s0, &ctl, |st| {
        cert.push(&grid, st)?;
        if n_samples == 0 || (s.snapshot_every > 0 && n_samples % s.snapshot_every == 0) {
            snap(n_samples, st, &mut manifest)?;
            last_snap = Some(n_samples);
        }
        n_samples += 1;
        Ok(())
    })?;
    if last_snap != Some(n_samples - 1) {
        snap(n_samples - 1, &out.last_observed, &mut manifest)?;
    }
    manifest.push(write_file(&s.out, "series.csv", |w| write_csv(w, cert.records()))?);

    let (checks, ids) = cert.summarize();
    let c = &cert.constants;
    let initial = BTreeMap::from([
        ("E1".to_string(), c.e1_0),
        ("E2".to_string(), c.e2_0),
        ("kinetic".to_string(), c.u_l2_sq),
        ("omegaInf".to_string(), c.omega0_inf),
    ]);
    let identities = BTreeMap::from([
        ("identity-e1".to_string(), IdentityReport::max_rel_err(&ids.e1_vs_d1)),
        ("identity-e2".to_string(), IdentityReport::max_rel_err(&ids.e2_vs_d2)),
        ("identity-log".to_string(), IdentityReport::max_rel_err(&ids.log_vs_e1)),
    ]);
    Ok(Outcome {
        stop: out.stop.as_str(),
        t_stop: out.t_stop,
        horizon: out.last_observed.t,
        samples: cert.records().len(),
        pole: (c.e1_0 > 0.0).then(|| 1.0 / c.e1_0),
        initial,
        checks,
        identities,
        log_mean: None,
        manifest,
        base_steps: out.base_steps,
        rk_steps: out.rk_steps,
        sources: vec![expr.to_string()],
    })
}

fn semilagrangian(s: &Scenario) -> Result<Outcome> {
    let Initial::Labels { v, ha, project_flux: project } = &s.initial else {
        return Err(Error::Config("semi-Lagrangian run needs initial.v and initial.ha".into()));
    };
    let d = s.system.torus_dim().expect("torus system");
    let grid = TorusGrid::new(d, s.nx, s.na)?;
    let mut v0 = grid.sample(d, true, |c, x, a| v[c].eval(x[0], x[1], a));
    let ha0 = grid.sample(1, true, |_, x, a| ha.eval(x[0], x[1], a));
    if *project {
        v0 = project_flux(&grid, &v0, &ha0)?;
    }
    let s0 = SlState::new(&grid, 0.0, v0, ha0)?;
    let mut cert = SlCertifier::new(&grid, s.p_list.clone(), s.curl_budget);
    let ctl = SlControl {
        dt: s.dt,
        t_end: s.t_end,
        cfl_max: s.cfl_max,
        sample_every: s.sample_every,
        curl_budget: s.curl_budget,
        tail_threshold: s.tail_threshold,
    };
    let ns = grid.spatial_len();
    let snap = |index: usize, st: &SlState, manifest: &mut Vec<String>| -> Result<()> {
        let f = [
            SnapshotField {
                name: "v",
                shape: vec![d, ns, st.v.na()],
                axes: &["component", "x", "a"],
                values: st.v.values(),
            },
            SnapshotField {
                name: "ha",
                shape: vec![ns, st.ha.na()],
                axes: &["x", "a"],
                values: st.ha.values(),
            },
        ];
        manifest.extend(write_snapshot(&s.out, index, st.t, &f)?);
        Ok(())
    };
    let mut manifest = Vec::new();
    let mut n_samples = 0;
    let mut last_snap = None;
    let out = sl_run(&grid, s0, &ctl, |st| {
        cert.push(&grid, st)?;
        if n_samples == 0 || (s.snapshot_every > 0 && n_samples % s.snapshot_every == 0) {
            snap(n_samples, st, &mut manifest)?;
            last_snap = Some(n_samples);
        }
        n_samples += 1;
        Ok(())
    })?;
    if last_snap != Some(n_samples - 1) {
        snap(n_samples - 1, &out.last_observed, &mut manifest)?;
    }
    manifest.push(write_file(&s.out, "series.csv", |w| write_sl_csv(w, cert.records()))?);

    let f0 = cert.initial().expect("initial sample observed").clone();
    let initial = BTreeMap::from([
        ("E1".to_string(), f0.e1),
        ("E2".to_string(), f0.e2),
        ("entropy".to_string(), f0.entropy),
        ("kinetic".to_string(), f0.kinetic),
        ("bccLHS".to_string(), f0.bcc_lhs),
    ]);
    let identities = cert
        .identities()
        .into_iter()
        .map(|(name, pts)| (name.to_string(), IdentityReport::max_rel_err(&pts)))
        .collect();
    let mut sources: Vec<String> = v.iter().map(|e| e.to_string()).collect();
    sources.push(ha.to_string());
    Ok(Outcome {
        stop: out.stop.as_str(),
        t_stop: out.t_stop,
        horizon: out.last_observed.t,
        samples: cert.records().len(),
        pole: (f0.e1 > 0.0).then(|| d as f64 / f0.e1),
        initial,
        checks: cert.summarize(),
        identities,
        log_mean: None,
        manifest,
        base_steps: out.base_steps,
        rk_steps: out.rk_steps,
        sources,
    })
}

fn log_mean(s: &Scenario) -> Result<Outcome> {
    let Initial::Samples(f) = &s.initial else {
        return Err(Error::Config("log-mean study needs initial.f".into()));
    };
    let samples = WeightedSamples::trapezoid(|x| f.eval(x, 0.0, 0.0), s.nodes)?;
    let mut ps = s.p_list.clone();
    ps.sort_by(|a, b| b.total_cmp(a));
    ps.dedup();
    let study = limit_study(&samples, &ps)?;
    let csv = write_file(&s.out, "series.csv", |w| {
        writeln!(w, "p,norm,difference")?;
        for (i, (p, n)) in study.p.iter().zip(&study.norms).enumerate() {
            let diff = if i == 0 { f64::NAN } else { study.differences[i - 1] };
            writeln!(w, "{p:.16e},{n:.16e},{diff:.16e}")?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        stop: "completed",
        t_stop: 0.0,
        horizon: 0.0,
        samples: study.p.len(),
        initial: BTreeMap::from([("geometricMean".to_string(), study.geometric_mean)]),
        pole: None,
        checks: Vec::new(),
        identities: BTreeMap::new(),
        log_mean: Some(study),
        manifest: vec![csv],
        base_steps: 0,
        rk_steps: 0,
        sources: vec![f.to_string()],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DictionaryOutput {
    pub scenario: String,
    pub k: f64,
    pub t_eval: f64,
    pub min_order: Option<f64>,
    pub study: DictionaryStudy,
}

/// Refinement study of the label-coordinate identities; writes
/// `dictionary.json`.
pub fn verify_dictionary_scenario(s: &Scenario) -> Result<DictionaryOutput> {
    let Initial::Omega(expr) = &s.initial else {
        return Err(Error::Config("dictionary check needs channel-flow initial data".into()));
    };
    let k = s
        .k
        .ok_or_else(|| Error::Config("dictionary check needs the base vorticity level k".into()))?;
    let levels: Vec<(usize, usize, usize)> = s.dictionary.levels.iter().map(|l| (l[0], l[1], l[2])).collect();
    let omega0 = |x: f64, y: f64| expr.eval(x, y, 0.0);
    let study = dictionary_study(&levels, &omega0, k, s.dictionary.t_eval)?;
    let out = DictionaryOutput {
        scenario: s.name.clone(),
        k,
        t_eval: s.dictionary.t_eval,
        min_order: study.min_order(),
        study,
    };
    fs::create_dir_all(&s.out)?;
    write_file(&s.out, "dictionary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &out)?;
        Ok(w.write_all(b"\n")?)
    })?;
    Ok(out)
}

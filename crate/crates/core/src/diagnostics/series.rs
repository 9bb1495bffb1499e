//! Time series output.

use std::io::Write;

use super::certify::{DiagnosticRecord, CHECK_NAMES};
use crate::error::Result;

/// Leading columns of `series.csv`; extras and per-check flags follow.
pub const CSV_COLUMNS: &[&str] = &[
    "t",
    "E1",
    "E2",
    "D1",
    "D2",
    "minRayleigh",
    "logRayleigh",
    "kinetic",
    "uInf",
    "pxL2",
    "M",
    "cumD1",
    "cumD2",
    "cumPx2",
    "cumAbsE1",
    "LB_E1",
    "LB_E2",
    "logLB_E1",
    "logLB_E2",
];

const EXTRA_COLUMNS: &[&str] = &[
    "E1_altGap",
    "E2_altGap",
    "cumGrowth",
    "momentum",
    "omegaInf",
    "defectSup",
    "weightedSlope",
];

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    num(x.unwrap_or(f64::NAN))
}

pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticRecord]) -> Result<()> {
    let mut header: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(EXTRA_COLUMNS.iter().map(|s| s.to_string()));
    header.extend(CHECK_NAMES.iter().map(|s| format!("ok:{s}")));
    writeln!(w, "{}", header.join(","))?;
    for r in records {
        let mut row = vec![
            num(r.t),
            opt(r.e1),
            opt(r.e2),
            opt(r.d1),
            opt(r.d2),
            num(r.min_rayleigh),
            opt(r.log_rayleigh),
            num(r.kinetic),
            num(r.u_inf),
            num(r.px_l2),
            num(r.m),
            num(r.cum_d1),
            num(r.cum_d2),
            num(r.cum_px2),
            num(r.cum_abs_e1),
            opt(r.bounds.e1.value()),
            opt(r.bounds.e2.value()),
            opt(r.bounds.log_e1.value()),
            opt(r.bounds.log_e2.value()),
            opt(r.e1_alt_gap),
            opt(r.e2_alt_gap),
            num(r.cum_growth),
            num(r.momentum),
            num(r.omega_inf),
            opt(r.defect_sup),
            opt(r.weighted_slope),
        ];
        row.extend(r.flags.iter().map(|f| f.as_str().to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

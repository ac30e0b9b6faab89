//! Diagnostics table, run-level verdicts and their serialisation.
//!
//! Verdicts are computed only from the rows of the table plus a small amount
//! of run metadata, so an offline re-check of a stored table reproduces them
//! exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostics::c1_from_area;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "t,L,volume_part,wall_part,envelope,residual_26,residual_27,slack_28,schwarz_vol,schwarz_wall,riccati_slack,p_min,wall_p_integral,energy,area,dt";

/// One row of `diagnostics.csv`. Residuals and slacks are stored relative to
/// their scales; `p_min` relative to `max(1, max|p|)`. Undefined entries are
/// NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l: f64,
    pub volume_part: f64,
    pub wall_part: f64,
    pub envelope: f64,
    pub volume_residual: f64,
    pub wall_residual: f64,
    pub pressure_slack: f64,
    pub schwarz_vol: f64,
    pub schwarz_wall: f64,
    pub riccati_slack: f64,
    pub p_min: f64,
    pub wall_p_integral: f64,
    pub energy: f64,
    pub area: f64,
    pub dt: f64,
}

impl DiagnosticsRecord {
    fn fields(&self) -> [f64; 16] {
        [
            self.t,
            self.l,
            self.volume_part,
            self.wall_part,
            self.envelope,
            self.volume_residual,
            self.wall_residual,
            self.pressure_slack,
            self.schwarz_vol,
            self.schwarz_wall,
            self.riccati_slack,
            self.p_min,
            self.wall_p_integral,
            self.energy,
            self.area,
            self.dt,
        ]
    }

    fn from_fields(f: [f64; 16]) -> Self {
        Self {
            t: f[0],
            l: f[1],
            volume_part: f[2],
            wall_part: f[3],
            envelope: f[4],
            volume_residual: f[5],
            wall_residual: f[6],
            pressure_slack: f[7],
            schwarz_vol: f[8],
            schwarz_wall: f[9],
            riccati_slack: f[10],
            p_min: f[11],
            wall_p_integral: f[12],
            energy: f[13],
            area: f[14],
            dt: f[15],
        }
    }
}

/// 17 significant digits; round-trips through `str::parse`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 * 16 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let line: Vec<String> = r.fields().iter().map(|&v| fmt_num(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Argument("diagnostics table has a missing or unexpected header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 16 {
            return Err(Error::Argument(format!("row {} has {} columns, expected 16", i + 1, cols.len())));
        }
        let mut f = [0.0; 16];
        for (k, c) in cols.iter().enumerate() {
            f[k] = c
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("row {} column {}: cannot parse {c:?}", i + 1, k + 1)))?;
        }
        rows.push(DiagnosticsRecord::from_fields(f));
    }
    if rows.is_empty() {
        return Err(Error::Argument("diagnostics table has no rows".into()));
    }
    Ok(rows)
}

/// Check tolerances; every entry must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub area_tol: f64,
    pub energy_tol: f64,
    pub ident_tol: f64,
    pub positivity_tol: f64,
    pub riccati_tol: f64,
    pub deriv_tol: f64,
    pub check_tol: f64,
    pub bound_slack: f64,
    pub a_agreement_tol: f64,
    pub compat_tol: f64,
    pub corner_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            area_tol: 1e-3,
            energy_tol: 1e-2,
            ident_tol: 5e-2,
            positivity_tol: 1e-3,
            riccati_tol: 1e-2,
            deriv_tol: 1e-2,
            check_tol: 1e-3,
            bound_slack: 0.05,
            a_agreement_tol: 1e-3,
            compat_tol: 1e-8,
            corner_tol: 1e-2,
        }
    }
}

impl Tolerances {
    pub fn entries(&self) -> [(&'static str, f64); 11] {
        [
            ("area_tol", self.area_tol),
            ("energy_tol", self.energy_tol),
            ("ident_tol", self.ident_tol),
            ("positivity_tol", self.positivity_tol),
            ("riccati_tol", self.riccati_tol),
            ("deriv_tol", self.deriv_tol),
            ("check_tol", self.check_tol),
            ("bound_slack", self.bound_slack),
            ("a_agreement_tol", self.a_agreement_tol),
            ("compat_tol", self.compat_tol),
            ("corner_tol", self.corner_tol),
        ]
    }
}

/// Run metadata needed alongside the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMeta {
    pub ended_by_breakdown: bool,
    pub t_break: Option<f64>,
    pub t_final: f64,
}

/// Outcome of a check that may not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Evaluated,
    Skipped,
    Insufficient,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Evaluated => "evaluated",
            CheckStatus::Skipped => "skipped (A <= 0)",
            CheckStatus::Insufficient => "insufficient records",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdicts {
    pub a: f64,
    pub c1: f64,
    pub t_star: Option<f64>,
    pub riccati_status: CheckStatus,
    pub derivative_status: CheckStatus,
    pub identity_status: CheckStatus,
    pub riccati_dominated: Option<bool>,
    pub derivative_inequality_held: Option<bool>,
    pub pressure_positive: Option<bool>,
    pub identities_converged: Option<bool>,
    pub schwarz_held: Option<bool>,
    pub pressure_bound_held: Option<bool>,
    pub energy_conserved: Option<bool>,
    pub area_conserved: Option<bool>,
    pub blowup_bound_held: Option<bool>,
    pub riccati_margin: Option<f64>,
    pub derivative_margin: Option<f64>,
    pub positivity_margin: Option<f64>,
    pub volume_residual_max: Option<f64>,
    pub wall_residual_max: Option<f64>,
    pub pressure_slack_min: Option<f64>,
    pub schwarz_vol_min: Option<f64>,
    pub schwarz_wall_min: Option<f64>,
    pub energy_drift_max: Option<f64>,
    pub area_drift_max: Option<f64>,
}

impl Verdicts {
    pub fn booleans(&self) -> [(&'static str, Option<bool>); 9] {
        [
            ("riccati_dominated", self.riccati_dominated),
            ("derivative_inequality_held", self.derivative_inequality_held),
            ("pressure_positive", self.pressure_positive),
            ("identities_converged", self.identities_converged),
            ("schwarz_held", self.schwarz_held),
            ("pressure_bound_held", self.pressure_bound_held),
            ("energy_conserved", self.energy_conserved),
            ("area_conserved", self.area_conserved),
            ("blowup_bound_held", self.blowup_bound_held),
        ]
    }

    /// Every evaluated check passed.
    pub fn all_passed(&self) -> bool {
        self.booleans().iter().all(|(_, b)| b.unwrap_or(true))
    }
}

/// Extremes that propagate NaN, so an undefined entry fails its check.
fn fold_min(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |m, v| Some(m.map_or(v, |m: f64| if m.is_nan() || v.is_nan() { f64::NAN } else { m.min(v) })))
}

fn fold_max(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |m, v| Some(m.map_or(v, |m: f64| if m.is_nan() || v.is_nan() { f64::NAN } else { m.max(v) })))
}

/// `v ≥ bound`; NaN fails.
fn at_least(v: Option<f64>, bound: f64) -> Option<bool> {
    v.map(|v| v >= bound)
}

fn at_most(v: Option<f64>, bound: f64) -> Option<bool> {
    v.map(|v| v <= bound)
}

/// Centered `L′` at each interior row of `rows`.
pub fn centered_l_primes(rows: &[DiagnosticsRecord]) -> Vec<(usize, f64)> {
    (1..rows.len().saturating_sub(1))
        .map(|k| (k, (rows[k + 1].l - rows[k - 1].l) / (rows[k + 1].t - rows[k - 1].t)))
        .collect()
}

/// Number of leading rows entering the conservation and difference checks:
/// the final record is dropped when the run ended in breakdown.
pub fn checked_window(rows: &[DiagnosticsRecord], meta: &RunMeta) -> usize {
    if meta.ended_by_breakdown && rows.len() > 1 {
        rows.len() - 1
    } else {
        rows.len()
    }
}

pub fn evaluate(rows: &[DiagnosticsRecord], meta: &RunMeta, tol: &Tolerances) -> Result<Verdicts> {
    if rows.is_empty() {
        return Err(Error::Argument("no diagnostics records".into()));
    }
    let first = rows[0];
    let a = first.l;
    let c1 = c1_from_area(first.area);
    let positive_a = a > 0.0;
    let t_star = positive_a.then(|| c1 / a);
    let w = checked_window(rows, meta);
    let window = &rows[..w];
    let interior = if w >= 3 { &window[1..w - 1] } else { &window[..0] };

    let drift = |get: fn(&DiagnosticsRecord) -> f64| {
        let base = get(&first);
        fold_max(window.iter().map(|r| ((get(r) - base) / base).abs()))
    };
    let area_drift_max = drift(|r| r.area);
    let energy_drift_max = if first.energy > 0.0 {
        drift(|r| r.energy)
    } else {
        fold_max(window.iter().map(|r| r.energy.abs()))
    };

    let positivity_margin = fold_min(rows.iter().map(|r| r.p_min));
    let pressure_slack_min = fold_min(rows.iter().map(|r| r.pressure_slack));
    let schwarz_vol_min = fold_min(rows.iter().map(|r| r.schwarz_vol));
    let schwarz_wall_min = fold_min(rows.iter().map(|r| r.schwarz_wall));
    let volume_residual_max = fold_max(interior.iter().map(|r| r.volume_residual));
    let wall_residual_max = fold_max(interior.iter().map(|r| r.wall_residual));
    let identity_status = if interior.is_empty() { CheckStatus::Insufficient } else { CheckStatus::Evaluated };

    let (riccati_status, riccati_margin) = if let Some(ts) = t_star {
        let m = fold_min(rows.iter().filter(|r| r.t < ts).map(|r| {
            let env = a / (1.0 - a * r.t / c1);
            (r.l - env) / r.l.powi(2).max(1.0)
        }));
        (CheckStatus::Evaluated, m)
    } else {
        (CheckStatus::Skipped, None)
    };
    let (derivative_status, derivative_margin) = if !positive_a {
        (CheckStatus::Skipped, None)
    } else if interior.is_empty() {
        (CheckStatus::Insufficient, None)
    } else {
        let m = fold_min(
            centered_l_primes(window)
                .into_iter()
                .map(|(k, lp)| (lp - window[k].l.powi(2) / c1) / window[k].l.powi(2)),
        );
        (CheckStatus::Evaluated, m)
    };
    let blowup_bound_held = t_star.and_then(|ts| {
        let bound = ts * (1.0 + tol.bound_slack);
        match meta.t_break {
            Some(tb) => Some(tb <= bound),
            None if meta.t_final > bound => Some(false),
            None => None,
        }
    });

    let identities = match (volume_residual_max, wall_residual_max) {
        (Some(rv), Some(rw)) => Some(rv <= tol.ident_tol && rw <= tol.ident_tol),
        _ => None,
    };
    let schwarz = match (at_least(schwarz_vol_min, -tol.check_tol), at_least(schwarz_wall_min, -tol.check_tol)) {
        (Some(x), Some(y)) => Some(x && y),
        _ => None,
    };

    Ok(Verdicts {
        a,
        c1,
        t_star,
        riccati_status,
        derivative_status,
        identity_status,
        riccati_dominated: at_least(riccati_margin, -tol.riccati_tol),
        derivative_inequality_held: at_least(derivative_margin, -tol.deriv_tol),
        pressure_positive: at_least(positivity_margin, -tol.positivity_tol),
        identities_converged: identities,
        schwarz_held: schwarz,
        pressure_bound_held: at_least(pressure_slack_min, -tol.check_tol),
        energy_conserved: at_most(energy_drift_max, tol.energy_tol),
        area_conserved: at_most(area_drift_max, tol.area_tol),
        blowup_bound_held,
        riccati_margin,
        derivative_margin,
        positivity_margin,
        volume_residual_max,
        wall_residual_max,
        pressure_slack_min,
        schwarz_vol_min,
        schwarz_wall_min,
        energy_drift_max,
        area_drift_max,
    })
}

/// A JSON scalar for the flat report object.
#[derive(Debug, Clone, PartialEq)]
pub enum JsonField {
    Num(Option<f64>),
    Int(u64),
    Str(Option<String>),
    Bool(Option<bool>),
}

/// Flat JSON object with keys in the given order, numbers at 17 significant
/// digits and non-finite or missing values as `null`.
pub fn write_flat_json(fields: &[(&str, JsonField)]) -> String {
    let mut out = String::from("{\n");
    for (i, (key, value)) in fields.iter().enumerate() {
        let v = match value {
            JsonField::Num(Some(x)) if x.is_finite() => fmt_num(*x),
            JsonField::Int(n) => n.to_string(),
            JsonField::Str(Some(s)) => serde_json::to_string(s).expect("string serialisation"),
            JsonField::Bool(Some(b)) => b.to_string(),
            _ => "null".to_string(),
        };
        let sep = if i + 1 == fields.len() { "" } else { "," };
        let _ = writeln!(out, "  {}: {v}{sep}", serde_json::to_string(key).expect("key"));
    }
    out.push_str("}\n");
    out
}

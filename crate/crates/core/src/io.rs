//! Text formats: 12-significant-digit numbers, CSV tables and rounded JSON.
//! Output is byte-for-byte reproducible for identical inputs.

use std::fmt::Write as _;
use std::io::Read;

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::Value;

use crate::dynamics::{Pulse, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::optimize::{parameter_names, SweepPoint};
use crate::transfer::TransferReport;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Like C's `%.12g`: shortest of fixed or scientific, trailing zeros dropped.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&fmt_num(v));
    }
    out.push('\n');
}

/// `t, re_c0, im_c0, re_<ring>, im_<ring>, ..., re_e, im_e, p_tls, p_waveguide_cum`.
/// Full-model trajectories have `e_plus` and `e_minus` columns instead of `e`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,re_c0,im_c0");
    for label in &traj.basis_labels[1..] {
        let _ = write!(out, ",re_{label},im_{label}");
    }
    let outputs: Vec<&str> = if traj.outputs.len() == 1 {
        vec!["e"]
    } else {
        vec!["e_plus", "e_minus"]
    };
    for name in &outputs {
        let _ = write!(out, ",re_{name},im_{name}");
    }
    out.push_str(",p_tls,p_waveguide_cum\n");
    for (k, t) in traj.grid.times().into_iter().enumerate() {
        let mut row = vec![t, traj.c0[k].re, traj.c0[k].im];
        for ring in &traj.rings {
            row.extend([ring[k].re, ring[k].im]);
        }
        for p in &traj.outputs {
            row.extend([p.samples[k].re, p.samples[k].im]);
        }
        row.extend([traj.c0[k].norm_sqr(), traj.leaks.waveguide[k]]);
        push_row(&mut out, row);
    }
    out
}

/// `t, re_e, im_e, abs2_e` followed by `re_e<n>, im_e<n>` per component.
pub fn pulse_csv(pulse: &Pulse, components: &[Pulse]) -> String {
    let mut out = String::from("t,re_e,im_e,abs2_e");
    for n in 1..=components.len() {
        let _ = write!(out, ",re_e{n},im_e{n}");
    }
    out.push('\n');
    for (k, t) in pulse.grid.times().into_iter().enumerate() {
        let e = pulse.samples[k];
        let mut row = vec![t, e.re, e.im, e.norm_sqr()];
        for c in components {
            row.extend([c.samples[k].re, c.samples[k].im]);
        }
        push_row(&mut out, row);
    }
    out
}

/// `J12, ..., kappa, beta`, one row per grid point.
pub fn sweep_csv(n_rings: usize, points: &[SweepPoint]) -> String {
    let mut out = parameter_names(n_rings).join(",");
    out.push_str(",beta\n");
    for p in points {
        push_row(&mut out, p.params.iter().copied().chain(std::iter::once(p.beta)));
    }
    out
}

pub const COMBINED_HEADER: [&str; 6] = [
    "t",
    "sender_tls",
    "sender_rings",
    "pulse_intensity",
    "receiver_tls",
    "receiver_rings",
];

/// Both nodes and the pulse in flight on one time axis.
pub fn combined_csv(report: &TransferReport) -> String {
    let mut out = COMBINED_HEADER.join(",");
    out.push('\n');
    for row in report.combined_rows() {
        push_row(&mut out, row);
    }
    out
}

/// Numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Reads a numeric CSV. Empty input, ragged rows and non-numbers are errors.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse("empty file".to_string()));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".to_string()));
    }
    Ok(Table { headers, rows })
}

/// Pulse from a table with columns `t, re_e, im_e` on a uniform grid.
pub fn pulse_from_table(table: &Table) -> Result<Pulse> {
    let t = table.column("t")?;
    let re = table.column("re_e")?;
    let im = table.column("im_e")?;
    if t.len() < 2 {
        return Err(Error::Parse("a pulse needs at least two samples".to_string()));
    }
    let grid = TimeGrid::new(t[0], t[t.len() - 1], t.len()).map_err(|e| Error::Parse(e.to_string()))?;
    let dt = grid.step();
    for (k, &tk) in t.iter().enumerate() {
        if (tk - grid.time(k)).abs() > 1e-6 * dt {
            return Err(Error::Parse(format!("row {}: time samples are not uniform", k + 1)));
        }
    }
    Pulse::new(grid, re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect())
}

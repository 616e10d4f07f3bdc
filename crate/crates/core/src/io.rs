//! Artifact output: JSON with every float at 17 significant digits, CSV with
//! shortest round-trip floats, and atomic file replacement.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

use crate::error::{domain, Result};
use crate::radial::RadialSolution;
use crate::spherical::HomothetySweep;
use crate::variational::{DiscreteProfile, TraceEntry};

/// `printf("%.17g")`: enough digits to round-trip any `f64`, with a fixed
/// rule so identical inputs give identical bytes.
pub fn format_f64_17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if (-5..17).contains(&exp) {
        let s = if exp >= 0 {
            let split = exp as usize + 1;
            format!("{}.{}", &digits[..split], &digits[split..])
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        let s = s.trim_end_matches('0').trim_end_matches('.');
        format!("{sign}{s}")
    } else {
        let m = format!("{}.{}", &digits[..1], &digits[1..]);
        let m = m.trim_end_matches('0').trim_end_matches('.');
        format!("{sign}{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// Compact JSON with [`format_f64_17`] floats.
struct Json17;

impl Formatter for Json17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64_17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        CompactFormatter.write_f32(writer, value)
    }
}

/// Serialize to deterministic JSON (field order as declared, 17-digit floats).
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Json17);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Write `bytes` to a sibling temporary file, then rename over `path`, so a
/// failed run never leaves a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| domain(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| -> io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Columns `t, H, dH_dt, eta` at the grid nodes of a solution.
pub fn solution_csv(sol: &RadialSolution) -> Result<Vec<u8>> {
    let rows = sol
        .grid_t()
        .iter()
        .zip(sol.grid_h())
        .zip(sol.grid_eta())
        .map(|((&t, &h), &eta)| vec![t, h, sol.deriv(t), eta]);
    csv_bytes(&["t", "H", "dH_dt", "eta"], rows)
}

/// Columns `t, H`.
pub fn profile_csv(p: &DiscreteProfile) -> Result<Vec<u8>> {
    let rows = p.t().iter().zip(p.h()).map(|(&t, &h)| vec![t, h]);
    csv_bytes(&["t", "H"], rows)
}

/// Columns `lambda, energy`.
pub fn sweep_csv(s: &HomothetySweep) -> Result<Vec<u8>> {
    let rows = s.lambda.iter().zip(&s.energy).map(|(&l, &e)| vec![l, e]);
    csv_bytes(&["lambda", "energy"], rows)
}

/// A profile read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub profile: DiscreteProfile,
    /// The `dH_dt` column, when present.
    pub dh_dt: Option<Vec<f64>>,
}

/// Read a profile from CSV with columns `t`, `H` and optionally `dH_dt`
/// (others ignored).
pub fn read_profile_csv(path: &Path) -> Result<ProfileTable> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let col = |name: &str| find(name).ok_or_else(|| domain(format!("profile CSV lacks column {name:?}")));
    let (it, ih, id) = (col("t")?, col("H")?, find("dH_dt"));
    let (mut t, mut h, mut d) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field
                .trim()
                .parse()
                .map_err(|_| domain(format!("bad number {field:?} in profile CSV")))
        };
        t.push(parse(it)?);
        h.push(parse(ih)?);
        if let Some(i) = id {
            d.push(parse(i)?);
        }
    }
    Ok(ProfileTable {
        profile: DiscreteProfile::new(t, h)?,
        dh_dt: id.map(|_| d),
    })
}

/// One JSON object per optimizer iteration.
pub fn trace_jsonl(trace: &[TraceEntry]) -> Result<String> {
    let mut out = String::new();
    for e in trace {
        out.push_str(&to_json(e)?);
    }
    Ok(out)
}

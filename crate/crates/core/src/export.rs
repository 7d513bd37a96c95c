//! CSV and JSON output with byte-stable formatting.
//!
//! Every float is written with 12 significant digits. JSON floats are
//! rounded the same way before serialization and object keys come out
//! sorted, so a fixed result always produces the same bytes.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimate::{MarginSeries, NormSeriesEstimate};
use crate::portrait::Portrait;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// `x` rounded to 12 significant digits, in plain decimal notation when the
/// exponent is in [-6, 15) and scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };
    if !(-6..15).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        return if frac.is_empty() {
            format!("{sign}{}e{exp}", &digits[..1])
        } else {
            format!("{sign}{}.{frac}e{exp}", &digits[..1])
        };
    }
    let body = if exp >= 0 {
        let split = (exp + 1) as usize;
        let (int, frac) = if split >= digits.len() {
            (format!("{digits}{}", "0".repeat(split - digits.len())), String::new())
        } else {
            (digits[..split].to_string(), digits[split..].to_string())
        };
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int
        } else {
            format!("{int}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{}", digits.trim_end_matches('0'))
    };
    format!("{sign}{body}")
}

fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        format!("{:.11e}", x).parse().expect("round trip")
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
        Value::Array(xs) => xs.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to 12 significant digits and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Result types with a tabular form.
pub trait CsvExport {
    fn to_csv(&self) -> String;
}

impl CsvExport for NormSeriesEstimate {
    fn to_csv(&self) -> String {
        let mut out = String::from("t,estimate,ci_half_width,mode\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.t,
                format_sig(p.estimate),
                format_sig(p.ci_half_width),
                self.mode.name()
            ));
        }
        out
    }
}

impl CsvExport for MarginSeries {
    fn to_csv(&self) -> String {
        let mut out = String::from("t,margin,ci_half_width,mode\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.t,
                format_sig(p.margin),
                format_sig(p.ci_half_width),
                self.mode.name()
            ));
        }
        out
    }
}

impl CsvExport for Portrait {
    fn to_csv(&self) -> String {
        let mut out = String::from("traj_id,t,y1,y2\n");
        for tr in &self.trajectories {
            for p in &tr.points {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    tr.id,
                    format_sig(p.t),
                    format_sig(p.y[0]),
                    format_sig(p.y[1])
                ));
            }
        }
        out
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn render<T: Serialize + CsvExport>(result: &T, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Csv => Ok(result.to_csv()),
        ExportFormat::Json => to_json(result),
    }
}

pub fn export_results<T: Serialize + CsvExport>(result: &T, format: ExportFormat, path: &Path) -> Result<()> {
    write_file(path, &render(result, format)?)
}

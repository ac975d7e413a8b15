use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::engine::MetricsRow;
use crate::error::{Error, Result};

pub const CI_METHOD: &str =
    "empirical 2.5% and 97.5% quantiles (type 7) of the replicate estimates";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Parameter(format!("unknown output format '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub ci_method: String,
    pub notes: Vec<String>,
}

/// JSON rendering of a metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub metadata: TableMetadata,
    pub rows: Vec<MetricsRow>,
}

/// `%.{digits}g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn format_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format_sig(x, 6)).unwrap_or_default()
}

/// Renders metrics rows as CSV (six significant digits) or JSON.
pub fn emit_table(rows: &[MetricsRow], format: OutputFormat) -> Result<String> {
    emit_table_with_notes(rows, format, &[])
}

pub fn emit_table_with_notes(
    rows: &[MetricsRow],
    format: OutputFormat,
    notes: &[String],
) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Parameter("no metrics rows to render".into()));
    }
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(
                "estimator,coefficient,n,bias,rmse,ci_low,ci_high,mean,sd,replications,seed,\
                 mc_se,failures,mean_se_gm,mean_se_hc3\n",
            );
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.estimator,
                    r.coefficient,
                    r.n,
                    format_sig(r.bias, 6),
                    format_sig(r.rmse, 6),
                    format_sig(r.ci_low, 6),
                    format_sig(r.ci_high, 6),
                    format_sig(r.mean, 6),
                    format_sig(r.sd, 6),
                    r.replications,
                    r.seed,
                    format_sig(r.mc_se, 6),
                    r.failures,
                    opt(r.mean_se_gm),
                    opt(r.mean_se_hc3),
                )
                .expect("writing to a String");
            }
            Ok(out)
        }
        OutputFormat::Json => {
            let doc = TableDocument {
                metadata: TableMetadata {
                    ci_method: CI_METHOD.into(),
                    notes: notes.to_vec(),
                },
                rows: rows.to_vec(),
            };
            Ok(serde_json::to_string_pretty(&doc)? + "\n")
        }
    }
}

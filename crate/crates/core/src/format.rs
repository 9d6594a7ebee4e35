//! Channel files (JSON) and CSV emitters for sweeps.
//!
//! A channel file looks like
//!
//! ```json
//! {
//!   "name": "bssc(1, 0.5)",
//!   "input_size": 2,
//!   "output_size": 2,
//!   "kernel": [[[1.0, 0.0], [0.5, 0.5]], [[0.5, 0.5], [0.0, 1.0]]],
//!   "cost": [[1, 0], [0, 1]]
//! }
//! ```
//!
//! `kernel` is indexed `[b_prev][a][b]` and the optional `cost` `[b_prev][a]`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bssc::SweepPoint;
use crate::channel::UnitMemoryChannel;
use crate::constrained::{CostFunction, CurvePoint};
use crate::error::{Error, Result};
use crate::exponent::{ErrorBound, ExponentCurve};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    input_size: usize,
    output_size: usize,
    kernel: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<Vec<Vec<f64>>>,
}

/// A parsed channel file.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDocument {
    pub name: Option<String>,
    pub channel: UnitMemoryChannel,
    pub cost: Option<CostFunction>,
}

pub fn load_channel_document(text: &str) -> Result<ChannelDocument> {
    let file: ChannelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.kernel.len() != file.output_size {
        return Err(Error::DimensionMismatch {
            what: "kernel previous-output axis",
            expected: file.output_size,
            found: file.kernel.len(),
        });
    }
    for block in &file.kernel {
        if block.len() != file.input_size {
            return Err(Error::DimensionMismatch {
                what: "kernel input axis",
                expected: file.input_size,
                found: block.len(),
            });
        }
        if let Some(row) = block.iter().find(|r| r.len() != file.output_size) {
            return Err(Error::DimensionMismatch {
                what: "kernel output axis",
                expected: file.output_size,
                found: row.len(),
            });
        }
    }
    let channel = UnitMemoryChannel::new(file.input_size, file.output_size, file.kernel.concat().concat())?;
    let cost = file
        .cost
        .map(|rows| {
            let c = CostFunction::from_rows(rows)?;
            c.check_against(&channel)?;
            Ok::<_, Error>(c)
        })
        .transpose()?;
    Ok(ChannelDocument {
        name: file.name,
        channel,
        cost,
    })
}

pub fn load_channel(text: &str) -> Result<UnitMemoryChannel> {
    load_channel_document(text).map(|d| d.channel)
}

pub fn serialize_channel(channel: &UnitMemoryChannel, cost: Option<&CostFunction>, name: Option<&str>) -> String {
    let file = ChannelFile {
        name: name.map(str::to_owned),
        input_size: channel.input_size(),
        output_size: channel.output_size(),
        kernel: channel.to_nested(),
        cost: cost.map(CostFunction::to_rows),
    };
    serde_json::to_string_pretty(&file).expect("channel file serializes")
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `kappa,capacity_bits,multiplier,achieved_cost,binding`; failed points
/// are left out.
pub fn capacity_curve_csv(points: &[CurvePoint]) -> String {
    let mut w = csv_writer();
    w.write_record(["kappa", "capacity_bits", "multiplier", "achieved_cost", "binding"])
        .expect("write");
    for p in points {
        if let Ok(r) = &p.result {
            w.write_record([
                num(p.kappa),
                num(r.capacity),
                num(r.multiplier),
                num(r.achieved_cost),
                r.binding.to_string(),
            ])
            .expect("write");
        }
    }
    finish(w)
}

/// Closed-form sweep rows; failed points keep their error text.
pub fn bssc_sweep_csv(points: &[SweepPoint]) -> String {
    let mut w = csv_writer();
    w.write_record([
        "alpha",
        "beta",
        "kappa",
        "lambda",
        "nu",
        "bssc_exponent",
        "lambda_bar",
        "constrained",
        "capacity_bits",
        "error",
    ])
    .expect("write");
    for p in points {
        let mut rec = vec![num(p.alpha), num(p.beta), opt(p.kappa)];
        match &p.solution {
            Ok(s) => rec.extend([
                num(s.lambda),
                num(s.nu),
                num(s.bssc_exponent),
                opt(s.lambda_bar),
                s.constrained.to_string(),
                num(s.capacity),
                s.warning.clone().unwrap_or_default(),
            ]),
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec).expect("write");
    }
    finish(w)
}

/// `rho,lambda_max,F_infinity_bits,eigen_ratio`.
pub fn exponent_curve_csv(curve: &ExponentCurve) -> String {
    let mut w = csv_writer();
    w.write_record(["rho", "lambda_max", "F_infinity_bits", "eigen_ratio"])
        .expect("write");
    for s in &curve.samples {
        w.write_record([num(s.rho), num(s.lambda_max), num(s.f_infinity), num(s.eigen_ratio)])
            .expect("write");
    }
    finish(w)
}

/// `rate_bits,E_r_bits,rho_star,bound_at_n,log2_raw_bound`.
pub fn error_bound_csv(bounds: &[ErrorBound]) -> String {
    let mut w = csv_writer();
    w.write_record(["rate_bits", "E_r_bits", "rho_star", "bound_at_n", "log2_raw_bound"])
        .expect("write");
    for b in bounds {
        w.write_record([
            num(b.rate),
            num(b.e_r),
            num(b.rho_star),
            num(b.bound),
            num(b.log2_raw_bound),
        ])
        .expect("write");
    }
    finish(w)
}

/// Plain-text matrix, one row per line.
pub fn format_matrix(rows: &[Vec<f64>], precision: usize) -> String {
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.precision$}")).collect();
        let _ = writeln!(out, "  [{}]", cells.join(" "));
    }
    out
}

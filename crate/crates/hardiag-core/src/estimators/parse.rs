//! Estimator shorthand grammar:
//!
//! ```text
//! kernel:<name>:M=<bandwidth>        kernel:@weights.csv
//! eicker:identity
//! am
//! vogelsang:c=1,i=1,V=A,U=poly:1     (U also accepts @file.csv)
//! bvfixed:<kernel>:M=<bw>:c=<c>[:U=…]
//! bvdd:@params.json
//! ```
//!
//! The data-driven parameter file holds
//! `{"a": […], "abar": […], "h": […], "p": […], "U": "poly:1"?}`.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::design::DesignProblem;
use crate::{Error, Result};

use super::{EstimatorSpec, JVariant, KernelName, OmegaKind, VKind};
use super::kernels::kernel_weight_matrix;

/// Parse a whitespace/comma separated numeric matrix (one row per line).
pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number `{t}`", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("matrix text contains no rows".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("matrix text has ragged rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn parse_u(design: &DesignProblem, text: &str) -> Result<DMatrix<f64>> {
    if let Some(path) = text.strip_prefix('@') {
        return matrix_from_csv(&std::fs::read_to_string(path)?);
    }
    if let Some(m_text) = text.strip_prefix("poly:") {
        let m: usize = m_text
            .parse()
            .map_err(|_| Error::Parse(format!("bad polynomial block size `{m_text}`")))?;
        if m == 0 {
            return Err(Error::Parse("polynomial block size must be ≥ 1".into()));
        }
        // the next m polynomial orders beyond the design's column count
        let k = design.k();
        return Ok(DMatrix::from_fn(design.n(), m, |i, j| {
            ((i + 1) as f64).powi((k + j) as i32)
        }));
    }
    Err(Error::Parse(format!("unrecognized augmenting block `{text}`")))
}

fn parse_kv(pairs: &str) -> Vec<(String, String)> {
    pairs
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .filter_map(|t| {
            t.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

#[derive(Deserialize)]
struct BvParams {
    a: Vec<f64>,
    abar: Vec<f64>,
    h: Vec<f64>,
    p: Vec<f64>,
    #[serde(rename = "U")]
    u: Option<String>,
}

/// Build an estimator from its shorthand string, bound to `design`.
pub fn parse_estimator(text: &str, design: &DesignProblem) -> Result<EstimatorSpec> {
    let text = text.trim();
    let n = design.n();
    if text == "am" {
        return EstimatorSpec::new(design.clone(), OmegaKind::AmPrewhitened);
    }
    if let Some(rest) = text.strip_prefix("kernel:") {
        if let Some(path) = rest.strip_prefix('@') {
            let w = matrix_from_csv(&std::fs::read_to_string(path)?)?;
            return EstimatorSpec::new(
                design.clone(),
                OmegaKind::Kernel { w, name: format!("custom({path})") },
            );
        }
        let (name_text, m_text) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("kernel shorthand needs `name:M=…`: `{text}`")))?;
        let name = KernelName::parse(name_text)?;
        let bw = m_text
            .strip_prefix("M=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Parse(format!("bad bandwidth in `{text}`")))?;
        let w = kernel_weight_matrix(name, bw, n)?;
        return EstimatorSpec::new(
            design.clone(),
            OmegaKind::Kernel { w, name: format!("{}:M={bw}", name.as_str()) },
        );
    }
    if let Some(rest) = text.strip_prefix("eicker:") {
        if rest == "identity" {
            return EstimatorSpec::new(
                design.clone(),
                OmegaKind::Eicker { w: DMatrix::identity(n, n) },
            );
        }
        if let Some(path) = rest.strip_prefix('@') {
            let w = matrix_from_csv(&std::fs::read_to_string(path)?)?;
            return EstimatorSpec::new(design.clone(), OmegaKind::Eicker { w });
        }
        return Err(Error::Parse(format!("unrecognized weight `{rest}`")));
    }
    if let Some(rest) = text.strip_prefix("vogelsang:") {
        let mut c = None;
        let mut variant = None;
        let mut vkind = None;
        let mut u = None;
        for (key, value) in parse_kv(rest) {
            match key.as_str() {
                "c" => {
                    c = Some(value.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("bad tuning constant `{value}`"))
                    })?)
                }
                "i" => {
                    variant = Some(match value.as_str() {
                        "1" => JVariant::J1,
                        "2" => JVariant::J2,
                        other => {
                            return Err(Error::Parse(format!("variant must be 1 or 2, got {other}")))
                        }
                    })
                }
                "V" => {
                    vkind = Some(match value.as_str() {
                        "A" => VKind::RunningSum,
                        "I" => VKind::Identity,
                        other => {
                            return Err(Error::Parse(format!("V must be A or I, got {other}")))
                        }
                    })
                }
                "U" => u = Some(parse_u(design, &value)?),
                other => return Err(Error::Parse(format!("unknown key `{other}`"))),
            }
        }
        let u = match u {
            Some(u) => u,
            // default: one polynomial order above the design
            None => parse_u(design, "poly:1")?,
        };
        return EstimatorSpec::new(
            design.clone(),
            OmegaKind::Vogelsang {
                c: c.ok_or_else(|| Error::Parse("vogelsang needs c=…".into()))?,
                u,
                variant: variant.ok_or_else(|| Error::Parse("vogelsang needs i=1|2".into()))?,
                v: vkind.ok_or_else(|| Error::Parse("vogelsang needs V=A|I".into()))?,
            },
        );
    }
    if let Some(rest) = text.strip_prefix("bvfixed:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() < 3 {
            return Err(Error::Parse(format!(
                "bvfixed shorthand is `bvfixed:kernel:M=…:c=…[:U=…]`, got `{text}`"
            )));
        }
        let name = KernelName::parse(parts[0])?;
        let bw = parts[1]
            .strip_prefix("M=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Parse(format!("bad bandwidth in `{text}`")))?;
        let c = parts[2]
            .strip_prefix("c=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Parse(format!("bad tuning constant in `{text}`")))?;
        let u = match parts.get(3) {
            None => None,
            Some(t) => Some(parse_u(
                design,
                t.strip_prefix("U=")
                    .ok_or_else(|| Error::Parse(format!("expected U=… in `{text}`")))?,
            )?),
        };
        let w = kernel_weight_matrix(name, bw, n)?;
        return EstimatorSpec::new(
            design.clone(),
            OmegaKind::BvFixed { w, name: format!("{}:M={bw}", name.as_str()), c, u },
        );
    }
    if let Some(rest) = text.strip_prefix("bvdd:") {
        let path = rest
            .strip_prefix('@')
            .ok_or_else(|| Error::Parse("bvdd takes a parameter file: `bvdd:@params.json`".into()))?;
        let body = std::fs::read_to_string(path)?;
        let params: BvParams = serde_json::from_str(&body)
            .map_err(|e| Error::Parse(format!("{path}: {e}")))?;
        let u = match &params.u {
            None => None,
            Some(text) => Some(parse_u(design, text)?),
        };
        return EstimatorSpec::new(
            design.clone(),
            OmegaKind::BvDataDriven {
                a: params.a,
                abar: params.abar,
                h: params.h,
                p: params.p,
                u,
            },
        );
    }
    Err(Error::Parse(format!("unrecognized estimator `{text}`")))
}

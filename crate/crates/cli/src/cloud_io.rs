//! Point-cloud CSV files.
//!
//! ```text
//! # optional comment lines
//! dim=2
//! 0.0,1.0,0.75
//! 0.5,1.0,0.25
//! ```
//!
//! Each row holds `n` coordinates and an optional trailing weight.
//!
//! Either every row carries a weight or none does. Weights are normalised
//! unless they already sum to one.

use std::path::Path;

use lipflow::geometry::{Point, PointCloud, WEIGHT_SUM_TOL};

use crate::output::Header;
use crate::CliError;

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_cloud(&text, &path.display().to_string())
}

/// `label` names the source in error messages.
pub fn parse_cloud(text: &str, label: &str) -> Result<PointCloud, CliError> {
    let mut dim: Option<usize> = None;
    let mut weighted: Option<bool> = None;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let (line, body) = (i + 1, raw.trim());
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let rec: Vec<&str> = body.split(',').map(str::trim).collect();
        let Some(n) = dim else {
            let n = rec[0]
                .strip_prefix("dim=")
                .and_then(|v| v.trim().parse::<usize>().ok())
                .filter(|n| *n > 0 && rec.len() == 1)
                .ok_or_else(|| parse_err(label, line, format!("expected header `dim=<n>`, got `{body}`")))?;
            dim = Some(n);
            continue;
        };
        let has_weight = match rec.len() {
            l if l == n => false,
            l if l == n + 1 => true,
            l => return Err(parse_err(label, line, format!("expected {n} or {} fields, got {l}", n + 1))),
        };
        if *weighted.get_or_insert(has_weight) != has_weight {
            return Err(parse_err(label, line, "weight column present on some rows but not others"));
        }
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(label, line, format!("not a number: `{f}`"))))
            .collect::<Result<Vec<f64>, _>>()?;
        let coords = vals[..n].to_vec();
        if has_weight {
            weights.push(vals[n]);
        }
        points.push(Point::new(coords).map_err(|e| parse_err(label, line, e.to_string()))?);
    }
    if dim.is_none() {
        return Err(parse_err(label, 1, "missing header `dim=<n>`"));
    }
    if points.is_empty() {
        return Err(parse_err(label, 1, "no points"));
    }
    let cloud = if weighted == Some(true) {
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() <= WEIGHT_SUM_TOL {
            PointCloud::new(points, weights)
        } else {
            PointCloud::from_masses(points, weights)
        }
    } else {
        PointCloud::uniform(points)
    };
    cloud.map_err(|e| CliError::Core {
        context: label.to_string(),
        source: e,
    })
}

/// Renders a cloud in the format [`parse_cloud`] reads; weights are written
/// only for non-uniform clouds.
pub fn render_cloud(cloud: &PointCloud, header: &Header) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let uniform = cloud.is_uniform();
    for (p, weight) in cloud.iter() {
        let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        if !uniform {
            row.push(weight.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    format!("{}dim={}\n{body}", header.csv_comment(), cloud.dim())
}

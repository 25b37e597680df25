//! Plain-text point cloud files and `key = value` settings.
//!
//! A cloud file holds one point per line, `x y z [nx ny nz] [label]`, with `#` comments.
//! Every data line in a file has the same columns. A normal written as `0 0 0` marks a
//! point without a valid normal. Coordinates are written with 17 significant digits so
//! a write/read cycle reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Unit;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, UnitVec3, Vec3};

/// Split `key = value` (or `key=value`). Returns `None` for anything else.
pub fn parse_key_value(line: &str) -> Option<(String, String)> {
    let (k, v) = line.split_once('=')?;
    let k = k.trim();
    if k.is_empty() || k.contains(char::is_whitespace) {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

/// Parse a settings file of `key = value` lines with `#` comments.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = parse_key_value(line)
            .ok_or_else(|| Error::parse(idx + 1, format!("expected `key = value`, found `{line}`")))?;
        out.insert(k, v);
    }
    Ok(out)
}

pub fn format_cloud(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 80);
    out.push_str("# x y z");
    if cloud.normals().is_some() {
        out.push_str(" nx ny nz");
    }
    if cloud.labels().is_some() {
        out.push_str(" label");
    }
    out.push('\n');
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
        if let Some(normals) = cloud.normals() {
            let n = normals[i].map(|n| n.into_inner()).unwrap_or_else(Vec3::zeros);
            let _ = write!(out, " {:.16e} {:.16e} {:.16e}", n.x, n.y, n.z);
        }
        if let Some(labels) = cloud.labels() {
            let _ = write!(out, " {}", labels[i]);
        }
        out.push('\n');
    }
    out
}

pub fn parse_cloud(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals: Vec<Option<UnitVec3>> = Vec::new();
    let mut labels = Vec::new();
    let mut columns: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let width = tokens.len();
        if !matches!(width, 3 | 4 | 6 | 7) {
            return Err(Error::parse(
                line_no,
                format!("expected 3, 4, 6 or 7 columns, found {width}"),
            ));
        }
        match columns {
            None => columns = Some(width),
            Some(c) if c != width => {
                return Err(Error::parse(
                    line_no,
                    format!("found {width} columns but earlier lines have {c}"),
                ))
            }
            _ => {}
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = tokens[k]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("`{}` is not a number", tokens[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(line_no, format!("`{}` is not finite", tokens[k])))
            }
        };
        points.push(Vec3::new(num(0)?, num(1)?, num(2)?));
        if width >= 6 {
            let n = Vec3::new(num(3)?, num(4)?, num(5)?);
            if n == Vec3::zeros() {
                normals.push(None);
            } else if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::parse(line_no, "normal is not unit length"));
            } else {
                normals.push(Some(Unit::new_unchecked(n)));
            }
        }
        if width == 4 || width == 7 {
            let tok = tokens[width - 1];
            labels.push(
                tok.parse::<u32>()
                    .map_err(|_| Error::parse(line_no, format!("`{tok}` is not a face label")))?,
            );
        }
    }

    let width = columns.unwrap_or(3);
    let mut cloud = PointCloud::new(points)?;
    if width >= 6 {
        cloud = cloud.with_normals(normals)?;
    }
    if width == 4 || width == 7 {
        cloud = cloud.with_labels(labels)?;
    }
    Ok(cloud)
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_cloud(cloud))?;
    Ok(())
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_cloud(&text).map_err(|e| e.with_path(path))
}

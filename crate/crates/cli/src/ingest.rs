use std::path::Path;

use anyhow::{bail, Context, Result};
use miclab::dist::Dataset;

/// Reads a points CSV with header `x,y`. The dataset seed is 0.
pub fn ingest_points(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening points file {}", path.display()))?;
    let header = reader.headers().with_context(|| format!("{}: reading header", path.display()))?.clone();
    if header.is_empty() {
        bail!("{}: empty file, expected header `x,y`", path.display());
    }
    if header.iter().collect::<Vec<_>>() != ["x", "y"] {
        bail!("{}: line 1: header must be `x,y`, found `{}`", path.display(), header.iter().collect::<Vec<_>>().join(","));
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("{}: malformed row", path.display()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            bail!("{}: line {line}: expected 2 fields, found {}", path.display(), record.len());
        }
        let coord = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = record[i]
                .parse()
                .with_context(|| format!("{}: line {line}: {name} = `{}` is not a number", path.display(), &record[i]))?;
            if !(0.0..=1.0).contains(&v) {
                bail!("{}: line {line}: {name} = {v} is outside [0, 1]", path.display());
            }
            Ok(v)
        };
        points.push((coord(0, "x")?, coord(1, "y")?));
    }
    if points.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Dataset::new(points, 0)?)
}

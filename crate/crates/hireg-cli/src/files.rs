//! Plain-text input formats: anchor files and measurement streams.
//!
//! Anchor files hold one `x,y,z` row per anchor (meters); the last row is
//! the differencing reference. Measurement files start with a
//! `tick,d1,...,dN` header followed by numeric rows. Blank lines and lines
//! starting with `#` are ignored in both.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::Vector3;

use hireg::{AnchorSet, RangeMeasurement};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
}

pub fn read_anchors(path: &Path) -> anyhow::Result<AnchorSet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading anchor file {}", path.display()))?;
    let mut positions = Vec::new();
    for (line_no, line) in data_lines(&text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            bail!(
                "{}:{line_no}: expected 3 comma-separated coordinates, got {}",
                path.display(),
                fields.len()
            );
        }
        let mut coords = [0.0; 3];
        for (i, field) in fields.iter().enumerate() {
            coords[i] = field
                .parse::<f64>()
                .with_context(|| format!("{}:{line_no}: bad number '{field}'", path.display()))?;
        }
        positions.push(Vector3::new(coords[0], coords[1], coords[2]));
    }
    AnchorSet::new(positions)
        .with_context(|| format!("anchor file {}", path.display()))
}

pub fn read_measurements(path: &Path, anchor_count: usize) -> anyhow::Result<Vec<RangeMeasurement>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading measurement file {}", path.display()))?;
    let mut lines = data_lines(&text);
    let Some((header_no, header)) = lines.next() else {
        bail!("{}: empty measurement file", path.display());
    };
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields.len() != anchor_count + 1 || !header_fields[0].eq_ignore_ascii_case("tick") {
        bail!(
            "{}:{header_no}: expected header 'tick,d1,...,d{anchor_count}', got '{header}'",
            path.display()
        );
    }
    let mut measurements = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != anchor_count + 1 {
            bail!(
                "{}:{line_no}: expected {} fields, got {}",
                path.display(),
                anchor_count + 1,
                fields.len()
            );
        }
        let tick: usize = fields[0]
            .parse()
            .with_context(|| format!("{}:{line_no}: bad tick '{}'", path.display(), fields[0]))?;
        let mut distances = Vec::with_capacity(anchor_count);
        for field in &fields[1..] {
            distances.push(field.parse::<f64>().with_context(|| {
                format!("{}:{line_no}: bad distance '{field}'", path.display())
            })?);
        }
        measurements.push(
            RangeMeasurement::new(distances, tick)
                .with_context(|| format!("{}:{line_no}", path.display()))?,
        );
    }
    if measurements.is_empty() {
        bail!("{}: no measurement rows", path.display());
    }
    Ok(measurements)
}

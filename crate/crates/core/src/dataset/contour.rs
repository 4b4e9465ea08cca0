//! Lumen and external elastic lamina (EEL) contour annotations.
//!
//! Contour coordinates are continuous Cartesian pixel coordinates: pixel
//! `(row, col)` covers `[col, col + 1) x [row, row + 1)`, so its center is at
//! `(col + 0.5, row + 0.5)`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct ContourAnnotation {
    lumen: Vec<Point>,
    eel: Vec<Point>,
    source_image_id: String,
}

impl ContourAnnotation {
    /// Validates point counts and that every lumen vertex lies strictly
    /// inside the EEL polygon.
    pub fn new(lumen: Vec<Point>, eel: Vec<Point>, source_image_id: impl Into<String>) -> Result<Self> {
        let source_image_id = source_image_id.into();
        for (name, c) in [("lumen", &lumen), ("eel", &eel)] {
            if c.len() < 3 {
                return Err(Error::Annotation(format!(
                    "{source_image_id}: {name} contour has {} points, need at least 3",
                    c.len()
                )));
            }
            if let Some(p) = c.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
                return Err(Error::Annotation(format!("{source_image_id}: {name} contour has non-finite point {p:?}")));
            }
        }
        if let Some((i, p)) = lumen.iter().enumerate().find(|(_, p)| !strictly_inside(p.0, p.1, &eel)) {
            return Err(Error::Annotation(format!(
                "{source_image_id}: lumen vertex {i} at ({:.2}, {:.2}) is not strictly inside the EEL contour",
                p.0, p.1
            )));
        }
        Ok(Self { lumen, eel, source_image_id })
    }

    pub fn lumen(&self) -> &[Point] {
        &self.lumen
    }

    pub fn eel(&self) -> &[Point] {
        &self.eel
    }

    pub fn source_image_id(&self) -> &str {
        &self.source_image_id
    }
}

/// Even-odd crossing test. Points exactly on an edge may land either way.
pub fn point_in_polygon(x: f64, y: f64, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) {
            let x_cross = xj + (y - yj) * (xi - xj) / (yi - yj);
            if x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn distance_to_segment(px: f64, py: f64, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0) };
    (px - (a.0 + t * dx)).hypot(py - (a.1 + t * dy))
}

pub fn strictly_inside(x: f64, y: f64, poly: &[Point]) -> bool {
    let n = poly.len();
    let on_edge = (0..n).any(|i| distance_to_segment(x, y, poly[i], poly[(i + 1) % n]) < 1e-9);
    !on_edge && point_in_polygon(x, y, poly)
}

/// Parses a contour file: one whitespace-separated `x y` pair per line.
/// Blank lines and lines starting with `#` are ignored.
pub fn read_contour_file(path: &Path) -> Result<Vec<Point>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_contour(&text).map_err(|msg| Error::format(path, msg))
}

pub fn parse_contour(text: &str) -> std::result::Result<Vec<Point>, String> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(x), Some(y), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(format!("line {}: expected two numbers, got {line:?}", lineno + 1));
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {s:?}: {e}", lineno + 1));
        points.push((parse(x)?, parse(y)?));
    }
    Ok(points)
}

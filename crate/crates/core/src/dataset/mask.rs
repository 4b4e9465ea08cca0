use ndarray::Array2;

use super::contour::{point_in_polygon, ContourAnnotation};
use crate::error::{Error, Result};
use crate::imaging::{cartesian_pixel_to_polar, TissueClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Polar,
    Cartesian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TissueLabelMask {
    data: Array2<TissueClass>,
    domain: Domain,
}

impl TissueLabelMask {
    pub fn new(data: Array2<TissueClass>, domain: Domain) -> Result<Self> {
        let (h, w) = data.dim();
        if h == 0 || w == 0 {
            return Err(Error::Dims("mask must be non-empty".into()));
        }
        if domain == Domain::Cartesian && h != w {
            return Err(Error::Dims(format!("cartesian mask must be square, got {h}x{w}")));
        }
        Ok(Self { data, domain })
    }

    pub fn data(&self) -> &Array2<TissueClass> {
        &self.data
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for c in self.data.iter() {
            counts[c.index()] += 1;
        }
        counts
    }

    pub(crate) fn require_polar(&self) -> Result<()> {
        match self.domain {
            Domain::Polar => Ok(()),
            Domain::Cartesian => Err(Error::Param("operation requires a polar-domain mask".into())),
        }
    }

    /// True when every column reads LUMEN*, MEDIA*, EXTERNA* from the
    /// catheter outwards.
    pub fn is_radially_ordered(&self) -> bool {
        self.domain == Domain::Polar
            && self.data.columns().into_iter().all(|col| col.iter().zip(col.iter().skip(1)).all(|(a, b)| a <= b))
    }
}

fn classify(x: f64, y: f64, ann: &ContourAnnotation) -> TissueClass {
    if point_in_polygon(x, y, ann.lumen()) {
        TissueClass::Lumen
    } else if point_in_polygon(x, y, ann.eel()) {
        TissueClass::Media
    } else {
        TissueClass::Externa
    }
}

/// Rasterizes an annotation onto a `side x side` Cartesian grid by testing
/// each pixel center against both contours (even-odd rule).
pub fn rasterize_mask(ann: &ContourAnnotation, side: usize) -> Result<TissueLabelMask> {
    if side == 0 {
        return Err(Error::Dims("mask side must be positive".into()));
    }
    let data = Array2::from_shape_fn((side, side), |(r, c)| classify(c as f64 + 0.5, r as f64 + 0.5, ann));
    TissueLabelMask::new(data, Domain::Cartesian)
}

/// Rasterizes an annotation directly on the polar grid of a `side x side`
/// acquisition: each polar sample is classified at its Cartesian location.
pub fn rasterize_mask_polar(ann: &ContourAnnotation, side: usize, n_radial: usize, n_angular: usize) -> Result<TissueLabelMask> {
    if side == 0 || n_radial == 0 || n_angular == 0 {
        return Err(Error::Dims("mask grid must be non-empty".into()));
    }
    let c = side as f64 / 2.0;
    let data = Array2::from_shape_fn((n_radial, n_angular), |(k, j)| {
        let r = k as f64 / n_radial as f64 * c;
        let alpha = j as f64 / n_angular as f64 * std::f64::consts::TAU;
        classify(c + r * alpha.cos(), c + r * alpha.sin(), ann)
    });
    TissueLabelMask::new(data, Domain::Polar)
}

/// Nearest-neighbour scan conversion of a polar mask; pixels outside the
/// valid disk are labelled EXTERNA.
pub fn mask_to_cartesian(mask: &TissueLabelMask, side: usize) -> Result<TissueLabelMask> {
    mask.require_polar()?;
    let (nr, na) = mask.dim();
    let data = Array2::from_shape_fn((side, side), |(row, col)| match cartesian_pixel_to_polar(row, col, side, nr, na) {
        Some((u, v)) => {
            let k = (u.round() as usize).min(nr - 1);
            let j = (v.round() as usize) % na;
            mask.data[[k, j]]
        }
        None => TissueClass::Externa,
    });
    TissueLabelMask::new(data, Domain::Cartesian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn circle(cx: f64, cy: f64, r: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect()
    }

    #[test]
    fn concentric_circle_areas() {
        let ann = ContourAnnotation::new(circle(64.0, 64.0, 20.0, 360), circle(64.0, 64.0, 40.0, 360), "c").unwrap();
        let mask = rasterize_mask(&ann, 128).unwrap();
        let [lumen, media, externa] = mask.class_counts();
        let lumen_area = PI * 400.0;
        let media_area = PI * (1600.0 - 400.0);
        assert!((lumen as f64 - lumen_area).abs() / lumen_area < 0.03, "{lumen}");
        assert!((media as f64 - media_area).abs() / media_area < 0.03, "{media}");
        assert_eq!(lumen + media + externa, 128 * 128);
    }

    #[test]
    fn square_contours_match_brute_force() {
        // integer-aligned squares: pixel centers sit on half-integers and are
        // never on an edge, so the oracle is a plain bounds check
        let lumen = vec![(10.0, 10.0), (20.0, 10.0), (20.0, 20.0), (10.0, 20.0)];
        let eel = vec![(5.0, 5.0), (27.0, 5.0), (27.0, 27.0), (5.0, 27.0)];
        let ann = ContourAnnotation::new(lumen, eel, "sq").unwrap();
        let mask = rasterize_mask(&ann, 32).unwrap();
        let inside = |x: f64, y: f64, lo: f64, hi: f64| x > lo && x < hi && y > lo && y < hi;
        for ((r, c), &cls) in mask.data().indexed_iter() {
            let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
            let expected = if inside(x, y, 10.0, 20.0) {
                TissueClass::Lumen
            } else if inside(x, y, 5.0, 27.0) {
                TissueClass::Media
            } else {
                TissueClass::Externa
            };
            assert_eq!(cls, expected, "pixel ({r},{c})");
        }
        assert_eq!(mask.class_counts(), [100, 22 * 22 - 100, 32 * 32 - 22 * 22]);
    }

    #[test]
    fn polar_rasterization_is_ordered_for_star_shaped_contours() {
        let ann = ContourAnnotation::new(circle(64.0, 64.0, 15.0, 64), circle(64.0, 64.0, 45.0, 64), "p").unwrap();
        let mask = rasterize_mask_polar(&ann, 128, 64, 96).unwrap();
        assert!(mask.is_radially_ordered());
        let counts = mask.class_counts();
        assert!(counts.iter().all(|&n| n > 0));
    }

    #[test]
    fn lumen_inside_eel_pixelwise() {
        let ann = ContourAnnotation::new(circle(30.0, 34.0, 9.0, 40), circle(32.0, 32.0, 25.0, 40), "x").unwrap();
        let mask = rasterize_mask(&ann, 64).unwrap();
        for ((r, c), &cls) in mask.data().indexed_iter() {
            if cls == TissueClass::Lumen {
                assert!(point_in_polygon(c as f64 + 0.5, r as f64 + 0.5, ann.eel()));
            }
        }
    }
}

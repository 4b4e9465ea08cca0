//! 8-bit grayscale PNG I/O. Intensities are quantized only here.
//!
//! Files carry a domain tag before the extension: `name.polar.png` for
//! depth x angle grids and `name.cart.png` for scan-converted images. Masks
//! use `name.mask.polar.png` / `name.mask.cart.png` with lumen, media and
//! externa stored as 0, 128 and 255.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::imaging::TissueClass;

pub const POLAR_SUFFIX: &str = ".polar.png";
pub const CART_SUFFIX: &str = ".cart.png";
pub const MASK_POLAR_SUFFIX: &str = ".mask.polar.png";
pub const MASK_CART_SUFFIX: &str = ".mask.cart.png";

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_gray(path: &Path, data: &Array2<f64>) -> Result<()> {
    let bytes: Vec<u8> = data.iter().map(|&v| quantize(v)).collect();
    write_bytes(path, data.ncols(), data.nrows(), &bytes)
}

pub fn read_gray(path: &Path) -> Result<Array2<f64>> {
    let (w, h, bytes) = read_bytes(path)?;
    Ok(Array2::from_shape_vec((h, w), bytes.into_iter().map(|b| b as f64 / 255.0).collect())
        .expect("decoded buffer matches header dims"))
}

pub fn mask_code(c: TissueClass) -> u8 {
    match c {
        TissueClass::Lumen => 0,
        TissueClass::Media => 128,
        TissueClass::Externa => 255,
    }
}

pub fn mask_from_code(b: u8) -> TissueClass {
    match b {
        0..=63 => TissueClass::Lumen,
        64..=191 => TissueClass::Media,
        _ => TissueClass::Externa,
    }
}

pub fn write_labels(path: &Path, labels: &Array2<TissueClass>) -> Result<()> {
    let bytes: Vec<u8> = labels.iter().map(|&c| mask_code(c)).collect();
    write_bytes(path, labels.ncols(), labels.nrows(), &bytes)
}

pub fn read_labels(path: &Path) -> Result<Array2<TissueClass>> {
    let (w, h, bytes) = read_bytes(path)?;
    Ok(Array2::from_shape_vec((h, w), bytes.into_iter().map(mask_from_code).collect())
        .expect("decoded buffer matches header dims"))
}

fn write_bytes(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| Error::format(path, e.to_string()))?;
    writer.write_image_data(bytes).map_err(|e| Error::format(path, e.to_string()))?;
    writer.finish().map_err(|e| Error::format(path, e.to_string()))
}

fn read_bytes(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    buf.truncate(info.buffer_size());
    let gray = match info.color_type {
        png::ColorType::Grayscale => buf,
        png::ColorType::GrayscaleAlpha => buf.chunks(2).map(|p| p[0]).collect(),
        png::ColorType::Rgb | png::ColorType::Rgba => buf
            .chunks(channels)
            .map(|p| ((p[0] as u32 * 299 + p[1] as u32 * 587 + p[2] as u32 * 114 + 500) / 1000) as u8)
            .collect(),
        png::ColorType::Indexed => return Err(Error::format(path, "indexed PNG not expanded")),
    };
    if gray.len() != w * h {
        return Err(Error::format(path, format!("expected {} pixels, decoded {}", w * h, gray.len())));
    }
    Ok((w, h, gray))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip_is_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.polar.png");
        let data = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 / 34.0);
        write_gray(&path, &data).unwrap();
        let back = read_gray(&path).unwrap();
        assert_eq!(back.dim(), (5, 7));
        for (a, b) in data.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mask.polar.png");
        let labels = Array2::from_shape_fn((4, 6), |(r, _)| TissueClass::ALL[r % 3]);
        write_labels(&path, &labels).unwrap();
        assert_eq!(read_labels(&path).unwrap(), labels);
    }
}

use std::path::Path;

use crate::numeric::ComplexGrid;

use super::{atomic_write, FileError};

/// Magnitudes mapped linearly from `window` (default `(0, max|grid|)`) to
/// `0..=255`, rounding half up and clamping outside the window.
pub fn to_gray8(grid: &ComplexGrid, window: Option<(f64, f64)>) -> Result<Vec<u8>, FileError> {
    let (lo, hi) = window.unwrap_or((0.0, grid.max_abs()));
    if !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(FileError::Layout {
            message: format!("invalid display window ({lo}, {hi})"),
        });
    }
    let span = hi - lo;
    Ok(grid
        .data()
        .iter()
        .map(|z| {
            if span == 0.0 {
                return if z.norm() > lo { 255 } else { 0 };
            }
            let v = (z.norm() - lo) / span * 255.0;
            (v + 0.5).floor().clamp(0.0, 255.0) as u8
        })
        .collect())
}

/// Encoded 8-bit grayscale PNG of the magnitude image.
pub fn png_bytes(grid: &ComplexGrid, window: Option<(f64, f64)>) -> Result<Vec<u8>, FileError> {
    let pixels = to_gray8(grid, window)?;
    let mut out = Vec::new();
    let err = |e: png::EncodingError| FileError::Layout {
        message: format!("PNG encoding failed: {e}"),
    };
    let mut enc = png::Encoder::new(&mut out, grid.width() as u32, grid.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(err)?;
    writer.write_image_data(&pixels).map_err(err)?;
    writer.finish().map_err(err)?;
    Ok(out)
}

pub fn export_png(
    grid: &ComplexGrid,
    path: impl AsRef<Path>,
    window: Option<(f64, f64)>,
) -> Result<(), FileError> {
    let path = path.as_ref();
    let bytes = png_bytes(grid, window).map_err(|e| match e {
        FileError::Layout { message } => FileError::Io {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })?;
    atomic_write(path, &bytes)
}

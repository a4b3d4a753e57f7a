//! Line-chart rasterization of a context window, the image fed to the
//! vision encoder.
//!
//! The chart is a bare polyline: no axes or labels. Values are min-max
//! scaled into the plot area, so any positive affine map of the series
//! renders to the same pixels.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MARGIN: usize = 2;
pub const MIN_SIDE: usize = 16;

/// Single-channel image, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl RasterImage {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    fn stamp(&mut self, x: i64, y: i64, thickness: usize) {
        let lo = -((thickness as i64 - 1) / 2);
        let hi = thickness as i64 / 2;
        for dy in lo..=hi {
            for dx in lo..=hi {
                let (px, py) = (x + dx, y + dy);
                if px >= 0 && py >= 0 && (px as usize) < self.width && (py as usize) < self.height {
                    self.pixels[py as usize * self.width + px as usize] = 1.0;
                }
            }
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0.0).count()
    }

    /// Binary PGM (P5), 8 bits per pixel.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.pixels
                .iter()
                .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Plot `values` as a polyline on a `width × height` canvas.
pub fn render_series(values: &[f64], width: usize, height: usize, thickness: usize) -> Result<RasterImage> {
    if values.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 points to render, got {}",
            values.len()
        )));
    }
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::Input(format!(
            "image must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}"
        )));
    }
    if thickness == 0 {
        return Err(Error::Input("line thickness must be positive".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("cannot render non-finite values".into()));
    }

    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let flat = hi - lo <= 4.0 * f64::EPSILON * scale;

    let x_span = (width - 1 - 2 * MARGIN) as f64;
    let y_span = (height - 1 - 2 * MARGIN) as f64;
    let n = values.len();
    let points: Vec<(i64, i64)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = MARGIN as f64 + (i as f64 * x_span / (n - 1) as f64).round();
            let y = if flat {
                (height / 2) as f64
            } else {
                let s = (v - lo) / (hi - lo);
                MARGIN as f64 + ((1.0 - s) * y_span).round()
            };
            (x as i64, y as i64)
        })
        .collect();

    let mut img = RasterImage::blank(width, height);
    for pair in points.windows(2) {
        draw_line(&mut img, pair[0], pair[1], thickness);
    }
    Ok(img)
}

/// Integer Bresenham between two points, inclusive of both ends.
fn draw_line(img: &mut RasterImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), thickness: usize) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    loop {
        img.stamp(x, y, thickness);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

//! Bilinear gray-level interpolation.

use crate::error::{DicError, Result};
use crate::image::GrayImage;

/// Coefficients of `G(x', y') = a00 + a10 x' + a01 y' + a11 x' y'` on one pixel cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpCoeffs {
    pub a00: f64,
    pub a10: f64,
    pub a01: f64,
    pub a11: f64,
}

impl InterpCoeffs {
    /// Solves the coefficients from the gray levels at (0,0), (1,0), (0,1), (1,1).
    #[inline]
    pub fn from_corners(f00: f64, f10: f64, f01: f64, f11: f64) -> Self {
        Self {
            a00: f00,
            a10: f10 - f00,
            a01: f01 - f00,
            a11: f11 - f10 - f01 + f00,
        }
    }

    #[inline]
    pub fn eval(&self, fx: f64, fy: f64) -> f64 {
        self.a00 + self.a10 * fx + self.a01 * fy + self.a11 * fx * fy
    }

    /// Partial derivatives `(dG/dx, dG/dy)` inside the cell.
    #[inline]
    pub fn gradient(&self, fx: f64, fy: f64) -> (f64, f64) {
        (self.a10 + self.a11 * fy, self.a01 + self.a11 * fx)
    }
}

/// Locates the cell containing `(x, y)`; returns the cell coefficients and fractional offsets.
#[inline]
pub(crate) fn cell(image: &GrayImage, x: f64, y: f64) -> Option<(InterpCoeffs, f64, f64)> {
    let w = image.width();
    let h = image.height();
    // the negated comparisons also reject NaN
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let c = InterpCoeffs::from_corners(
        image.get(x0, y0),
        image.get(x1, y0),
        image.get(x0, y1),
        image.get(x1, y1),
    );
    Some((c, fx, fy))
}

/// Gray level at the sub-pixel position `(x, y)`.
pub fn interp_bilinear(image: &GrayImage, x: f64, y: f64) -> Result<f64> {
    cell(image, x, y)
        .map(|(c, fx, fy)| c.eval(fx, fy))
        .ok_or(DicError::OutOfDomain(x, y))
}

/// Gray level and its in-cell spatial gradient at `(x, y)`.
#[inline]
pub(crate) fn sample_with_gradient(image: &GrayImage, x: f64, y: f64) -> Option<(f64, f64, f64)> {
    cell(image, x, y).map(|(c, fx, fy)| {
        let (gx, gy) = c.gradient(fx, fy);
        (c.eval(fx, fy), gx, gy)
    })
}

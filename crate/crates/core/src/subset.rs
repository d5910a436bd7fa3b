//! Subset geometry and the point-of-interest grid.

use crate::error::{DicError, Result};
use crate::image::GrayImage;

/// A point of interest with half-width `M`, covering a `(2M+1) x (2M+1)` window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsetSpec {
    pub center_x: usize,
    pub center_y: usize,
    pub half_width: usize,
}

impl SubsetSpec {
    /// Checked constructor: the footprint must lie inside a `width x height` image.
    pub fn new(
        center_x: usize,
        center_y: usize,
        half_width: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let spec = Self {
            center_x,
            center_y,
            half_width,
        };
        if half_width == 0 {
            return Err(DicError::InvalidConfig(
                "subset half-width must be >= 1".into(),
            ));
        }
        if !spec.fits(width, height, 0, 0) {
            return Err(DicError::WindowOutOfRange);
        }
        Ok(spec)
    }

    #[inline]
    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether the subset displaced by `(dx, dy)` lies inside the image.
    #[inline]
    pub fn fits(&self, width: usize, height: usize, dx: i64, dy: i64) -> bool {
        let m = self.half_width as i64;
        let cx = self.center_x as i64 + dx;
        let cy = self.center_y as i64 + dy;
        cx - m >= 0 && cy - m >= 0 && cx + m < width as i64 && cy + m < height as i64
    }

    /// Inclusive displacement range `(lo, hi)` along x for which the subset stays in bounds.
    pub fn dx_range(&self, width: usize) -> (i64, i64) {
        let m = self.half_width as i64;
        (
            m - self.center_x as i64,
            width as i64 - 1 - m - self.center_x as i64,
        )
    }

    pub fn dy_range(&self, height: usize) -> (i64, i64) {
        let m = self.half_width as i64;
        (
            m - self.center_y as i64,
            height as i64 - 1 - m - self.center_y as i64,
        )
    }
}

/// Parameters of the regular point-of-interest grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub half_width: usize,
    pub spacing: usize,
    pub margin: usize,
}

/// Regular grid of subset centers in row-major order.
///
/// Centers run from `margin` in steps of `spacing` up to `extent - margin`,
/// further restricted so that every subset footprint lies in the image.
/// Only the image dimensions are consulted.
pub fn grid_subsets(image: &GrayImage, params: &GridParams) -> Result<Vec<SubsetSpec>> {
    grid_for_dims(image.width(), image.height(), params)
}

pub fn grid_for_dims(width: usize, height: usize, params: &GridParams) -> Result<Vec<SubsetSpec>> {
    if params.spacing == 0 {
        return Err(DicError::InvalidConfig("grid spacing must be >= 1".into()));
    }
    if params.half_width == 0 {
        return Err(DicError::InvalidConfig(
            "subset half-width must be >= 1".into(),
        ));
    }
    let m = params.half_width;
    let axis = |extent: usize| -> Vec<usize> {
        let lo = params.margin.max(m);
        let hi = extent
            .saturating_sub(params.margin)
            .min(extent.saturating_sub(1 + m));
        if extent < 2 * m + 1 || lo > hi {
            return Vec::new();
        }
        (lo..=hi).step_by(params.spacing).collect()
    };
    let xs = axis(width);
    let ys = axis(height);
    if xs.is_empty() || ys.is_empty() {
        return Err(DicError::ImageTooSmall);
    }
    Ok(ys
        .iter()
        .flat_map(|&y| {
            xs.iter().map(move |&x| SubsetSpec {
                center_x: x,
                center_y: y,
                half_width: m,
            })
        })
        .collect())
}

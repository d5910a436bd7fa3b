//! Zero-normalized cross-correlation between a reference subset and a
//! displaced window of the target image.

use std::collections::HashMap;

use crate::error::{DicError, Result};
use crate::image::GrayImage;
use crate::subset::SubsetSpec;

/// Mean, centered samples and centered norm of one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetStats {
    pub mean: f64,
    /// `sqrt(sum (f - mean)^2)`
    pub norm: f64,
    /// Row-major `(2M+1)^2` samples minus the mean.
    pub centered: Vec<f64>,
    pub half_width: usize,
}

impl SubsetStats {
    pub fn is_degenerate(&self) -> bool {
        self.norm <= 0.0
    }
}

pub fn subset_stats(image: &GrayImage, spec: &SubsetSpec) -> SubsetStats {
    let m = spec.half_width;
    let side = spec.side();
    let mut samples = Vec::with_capacity(side * side);
    for y in spec.center_y - m..=spec.center_y + m {
        samples.extend_from_slice(&image.row(y)[spec.center_x - m..=spec.center_x + m]);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut sq = 0.0;
    for v in &mut samples {
        *v -= mean;
        sq += *v * *v;
    }
    SubsetStats {
        mean,
        norm: sq.sqrt(),
        centered: samples,
        half_width: m,
    }
}

/// Correlation of the reference subset with the target window centred at
/// `spec` displaced by `(dx, dy)`.
pub fn zncc(
    ref_stats: &SubsetStats,
    image: &GrayImage,
    spec: &SubsetSpec,
    displacement: (i64, i64),
) -> Result<f64> {
    if ref_stats.is_degenerate() {
        return Err(DicError::DegenerateReference);
    }
    let (dx, dy) = displacement;
    if !spec.fits(image.width(), image.height(), dx, dy) {
        return Err(DicError::WindowOutOfRange);
    }
    let m = spec.half_width;
    let side = spec.side();
    let x0 = (spec.center_x as i64 + dx) as usize - m;
    let y0 = (spec.center_y as i64 + dy) as usize - m;

    let mut sum = 0.0;
    for row in 0..side {
        sum += image.row(y0 + row)[x0..x0 + side].iter().sum::<f64>();
    }
    let g_mean = sum / (side * side) as f64;

    let mut cross = 0.0;
    let mut g_sq = 0.0;
    for row in 0..side {
        let g_row = &image.row(y0 + row)[x0..x0 + side];
        let f_row = &ref_stats.centered[row * side..(row + 1) * side];
        for (&f, &g) in f_row.iter().zip(g_row) {
            let gc = g - g_mean;
            cross += f * gc;
            g_sq += gc * gc;
        }
    }
    if g_sq <= 0.0 {
        return Err(DicError::DegenerateTarget);
    }
    Ok(cross / (ref_stats.norm * g_sq.sqrt()))
}

/// Per-subset look-up table of integer-displacement correlations.
///
/// Degenerate windows are cached as `None` so they count as one evaluation.
#[derive(Debug, Default, Clone)]
pub struct CorrelationMemo {
    table: HashMap<(i64, i64), Option<f64>>,
    hits: u64,
    misses: u64,
}

impl CorrelationMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Number of distinct displacements evaluated.
    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn contains(&self, displacement: (i64, i64)) -> bool {
        self.table.contains_key(&displacement)
    }
}

/// Memoized [`zncc`]; returns exactly the value a fresh evaluation would.
pub fn zncc_memo(
    memo: &mut CorrelationMemo,
    ref_stats: &SubsetStats,
    image: &GrayImage,
    spec: &SubsetSpec,
    displacement: (i64, i64),
) -> Result<f64> {
    if let Some(cached) = memo.table.get(&displacement) {
        memo.hits += 1;
        return cached.ok_or(DicError::DegenerateTarget);
    }
    match zncc(ref_stats, image, spec, displacement) {
        Ok(c) => {
            memo.misses += 1;
            memo.table.insert(displacement, Some(c));
            Ok(c)
        }
        Err(DicError::DegenerateTarget) => {
            memo.misses += 1;
            memo.table.insert(displacement, None);
            Err(DicError::DegenerateTarget)
        }
        // out-of-range probes are not evaluations
        Err(e) => Err(e),
    }
}

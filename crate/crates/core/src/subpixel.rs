//! Sub-pixel refinement of a first-order subset warp.
//!
//! Both refiners minimize the zero-normalized sum of squared differences
//! `ZNSSD = sum (f^ - g^)^2 = 2 (1 - ZNCC)`, where `f^` and `g^` are the
//! mean-removed, unit-norm reference and target subsets. Target samples are
//! taken through the warp with bilinear interpolation.
//!
//! * [`refine_nr`] is the classic forward-additive Newton-Raphson scheme: at
//!   every iteration the target is re-sampled, target gradients are
//!   interpolated and the Jacobian and Gauss-Newton Hessian are rebuilt.
//! * [`refine_icgn`] is the inverse-compositional Gauss-Newton scheme: the
//!   steepest-descent images and the Hessian live on the reference subset and
//!   are computed once by [`icgn_precompute`]; each iteration only re-samples
//!   the target and composes the current warp with the inverted increment.

use nalgebra::{Cholesky, Matrix6, SymmetricEigen, Vector6};

use crate::correlation::{subset_stats, SubsetStats};
use crate::error::{DicError, Result};
use crate::image::GrayImage;
use crate::interp::{cell, sample_with_gradient};
use crate::subset::SubsetSpec;

/// First-order warp `(u, u_x, u_y, v, v_x, v_y)` of a subset about its centre.
///
/// A local offset `(xi, eta)` maps to
/// `(xi + u + u_x xi + u_y eta, eta + v + v_x xi + v_y eta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpParams(pub [f64; 6]);

impl WarpParams {
    pub const ZERO: WarpParams = WarpParams([0.0; 6]);

    pub fn translation(u: f64, v: f64) -> Self {
        WarpParams([u, 0.0, 0.0, v, 0.0, 0.0])
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn v(&self) -> f64 {
        self.0[3]
    }

    /// Warped local offset.
    #[inline]
    pub fn apply(&self, xi: f64, eta: f64) -> (f64, f64) {
        let p = &self.0;
        (
            xi + p[0] + p[1] * xi + p[2] * eta,
            eta + p[3] + p[4] * xi + p[5] * eta,
        )
    }

    /// Determinant of the linear part `[[1 + u_x, u_y], [v_x, 1 + v_y]]`.
    pub fn determinant(&self) -> f64 {
        let p = &self.0;
        (1.0 + p[1]) * (1.0 + p[5]) - p[2] * p[4]
    }

    /// `W(self) o W(delta)^-1`.
    ///
    /// Linear parts are handled as deviations from the identity so a zero
    /// increment returns `self` bit-for-bit.
    pub fn compose_inverse(&self, delta: &WarpParams) -> Result<WarpParams> {
        let det = delta.determinant();
        if !(det.abs() > 1e-8) {
            return Err(DicError::NonInvertibleWarp);
        }
        let d = &delta.0;
        // (I + Gd)^-1 = I + H
        let h = [
            (1.0 + d[5]) / det - 1.0,
            -d[2] / det,
            -d[4] / det,
            (1.0 + d[1]) / det - 1.0,
        ];
        // inverse translation s = -(I + H) t_d
        let s = [
            -(d[0] + h[0] * d[0] + h[1] * d[3]),
            -(d[3] + h[2] * d[0] + h[3] * d[3]),
        ];
        let p = &self.0;
        let g = [p[1], p[2], p[4], p[5]];
        // (I + G)(I + H) = I + G + H + G H
        let gh = [
            g[0] * h[0] + g[1] * h[2],
            g[0] * h[1] + g[1] * h[3],
            g[2] * h[0] + g[3] * h[2],
            g[2] * h[1] + g[3] * h[3],
        ];
        let out = WarpParams([
            p[0] + (s[0] + (g[0] * s[0] + g[1] * s[1])),
            g[0] + h[0] + gh[0],
            g[1] + h[1] + gh[1],
            p[3] + (s[1] + (g[2] * s[0] + g[3] * s[1])),
            g[2] + h[2] + gh[2],
            g[3] + h[3] + gh[3],
        ]);
        if !(out.determinant().abs() > 1e-8) || out.0.iter().any(|v| !v.is_finite()) {
            return Err(DicError::NonInvertibleWarp);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    /// Stop once `max(|du|, |dv|)` of an update falls below this, pixels.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Minimum distance, beyond the half-width, between the warped subset
    /// centre and the target border.
    pub guard: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.01,
            max_iter: 20,
            guard: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubpixelResult {
    pub warp: WarpParams,
    pub displacement: (f64, f64),
    pub zncc: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Local offsets `(xi, eta)` of a subset, row-major.
fn offsets(spec: &SubsetSpec) -> impl Iterator<Item = (f64, f64)> {
    let m = spec.half_width as i64;
    (-m..=m).flat_map(move |eta| (-m..=m).map(move |xi| (xi as f64, eta as f64)))
}

fn check_guard(target: &GrayImage, spec: &SubsetSpec, p: &WarpParams, guard: usize) -> Result<()> {
    let band = (spec.half_width + guard) as f64;
    let cx = spec.center_x as f64 + p.u();
    let cy = spec.center_y as f64 + p.v();
    let ok = cx >= band
        && cy >= band
        && cx <= target.width() as f64 - 1.0 - band
        && cy <= target.height() as f64 - 1.0 - band;
    if ok {
        Ok(())
    } else {
        Err(DicError::DriftedOutOfBounds)
    }
}

/// Target gray levels through the warp.
fn sample_target(target: &GrayImage, spec: &SubsetSpec, p: &WarpParams) -> Result<Vec<f64>> {
    let (cx, cy) = (spec.center_x as f64, spec.center_y as f64);
    offsets(spec)
        .map(|(xi, eta)| {
            let (wx, wy) = p.apply(xi, eta);
            cell(target, cx + wx, cy + wy)
                .map(|(c, fx, fy)| c.eval(fx, fy))
                .ok_or(DicError::DriftedOutOfBounds)
        })
        .collect()
}

/// Target gray levels and interpolated gradients through the warp.
fn sample_target_with_gradient(
    target: &GrayImage,
    spec: &SubsetSpec,
    p: &WarpParams,
) -> Result<Vec<(f64, f64, f64)>> {
    let (cx, cy) = (spec.center_x as f64, spec.center_y as f64);
    offsets(spec)
        .map(|(xi, eta)| {
            let (wx, wy) = p.apply(xi, eta);
            sample_with_gradient(target, cx + wx, cy + wy).ok_or(DicError::DriftedOutOfBounds)
        })
        .collect()
}

/// Mean and centred norm of a sample vector.
fn center(samples: &[f64]) -> (f64, f64) {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let sq: f64 = samples.iter().map(|g| (g - mean) * (g - mean)).sum();
    (mean, sq.sqrt())
}

fn correlation_of(ref_stats: &SubsetStats, samples: &[f64]) -> Result<f64> {
    let (mean, norm) = center(samples);
    if !(norm > 0.0) {
        return Err(DicError::DegenerateTarget);
    }
    let cross: f64 = ref_stats
        .centered
        .iter()
        .zip(samples)
        .map(|(f, g)| f * (g - mean))
        .sum();
    Ok(cross / (ref_stats.norm * norm))
}

/// ZNCC between the reference subset and the warped target subset.
pub fn warped_zncc(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    p: &WarpParams,
) -> Result<f64> {
    correlation_of(ref_stats, &sample_target(target, spec, p)?)
}

/// Zero-normalized SSD between the reference subset and the warped target subset.
pub fn znssd(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    p: &WarpParams,
) -> Result<f64> {
    let samples = sample_target(target, spec, p)?;
    let (mean, norm) = center(&samples);
    if !(norm > 0.0) {
        return Err(DicError::DegenerateTarget);
    }
    Ok(ref_stats
        .centered
        .iter()
        .zip(&samples)
        .map(|(f, g)| {
            let r = f / ref_stats.norm - (g - mean) / norm;
            r * r
        })
        .sum())
}

/// Normal equations of one Newton-Raphson step at `p`.
struct NrSystem {
    hessian: Matrix6<f64>,
    /// `sum r_i D_i`, equal to minus half the criterion gradient.
    rhs: Vector6<f64>,
}

fn nr_system(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    p: &WarpParams,
) -> Result<NrSystem> {
    let samples = sample_target_with_gradient(target, spec, p)?;
    let n = samples.len() as f64;
    let g_mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let g_norm = samples
        .iter()
        .map(|s| (s.0 - g_mean).powi(2))
        .sum::<f64>()
        .sqrt();
    if !(g_norm > 0.0) {
        return Err(DicError::DegenerateSubset);
    }

    // derivatives of the raw target samples with respect to p
    let dg: Vec<Vector6<f64>> = samples
        .iter()
        .zip(offsets(spec))
        .map(|(&(_, gx, gy), (xi, eta))| Vector6::new(gx, gx * xi, gx * eta, gy, gy * xi, gy * eta))
        .collect();
    let dg_mean = dg.iter().sum::<Vector6<f64>>() / n;
    let g_hat: Vec<f64> = samples.iter().map(|s| (s.0 - g_mean) / g_norm).collect();
    let proj = g_hat
        .iter()
        .zip(&dg)
        .map(|(&gh, d)| d * gh)
        .sum::<Vector6<f64>>();

    let mut hessian = Matrix6::zeros();
    let mut rhs = Vector6::zeros();
    for ((d, &gh), &fc) in dg.iter().zip(&g_hat).zip(&ref_stats.centered) {
        // derivative of the normalized target sample
        let dn = (d - dg_mean - proj * gh) / g_norm;
        let r = fc / ref_stats.norm - gh;
        hessian.ger(1.0, &dn, &dn, 1.0);
        rhs += dn * r;
    }
    Ok(NrSystem { hessian, rhs })
}

/// Analytic gradient of [`znssd`] with respect to the six warp parameters.
pub fn znssd_gradient(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    p: &WarpParams,
) -> Result<[f64; 6]> {
    let sys = nr_system(ref_stats, target, spec, p)?;
    let g = sys.rhs * -2.0;
    Ok([g[0], g[1], g[2], g[3], g[4], g[5]])
}

fn start(init: (i64, i64)) -> WarpParams {
    WarpParams::translation(init.0 as f64, init.1 as f64)
}

/// Newton-Raphson refinement seeded with an integer displacement.
pub fn refine_nr(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    init: (i64, i64),
    cfg: &RefineConfig,
) -> Result<SubpixelResult> {
    if ref_stats.is_degenerate() {
        return Err(DicError::DegenerateSubset);
    }
    let mut p = start(init);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        check_guard(target, spec, &p, cfg.guard)?;
        let sys = nr_system(ref_stats, target, spec, &p)?;
        let step = Cholesky::new(sys.hessian)
            .map(|c| c.solve(&sys.rhs))
            .ok_or(DicError::DegenerateSubset)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(DicError::DegenerateSubset);
        }
        for (pi, si) in p.0.iter_mut().zip(step.iter()) {
            *pi += si;
        }
        if step[0].abs().max(step[3].abs()) < cfg.tolerance {
            converged = true;
            break;
        }
    }
    check_guard(target, spec, &p, cfg.guard)?;
    let zncc = warped_zncc(ref_stats, target, spec, &p).map_err(|_| DicError::DegenerateSubset)?;
    Ok(SubpixelResult {
        warp: p,
        displacement: (p.u(), p.v()),
        zncc,
        iterations,
        converged,
    })
}

/// Reference-side quantities reused by every inverse-compositional iteration.
#[derive(Debug, Clone)]
pub struct RefinerState {
    pub spec: SubsetSpec,
    pub stats: SubsetStats,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// `grad f . dW/dp` per subset pixel, row-major.
    pub steepest: Vec<[f64; 6]>,
    pub hessian: Matrix6<f64>,
    chol: Cholesky<f64, nalgebra::U6>,
}

/// Hessians with a larger eigenvalue ratio are rejected as textureless.
pub const MAX_HESSIAN_CONDITION: f64 = 1e12;

/// Central-difference gradients of `image` over the subset, row-major.
/// Needs a one-pixel band around the subset.
pub fn central_gradients(image: &GrayImage, spec: &SubsetSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let banded = SubsetSpec {
        half_width: spec.half_width + 1,
        ..*spec
    };
    if !banded.fits(image.width(), image.height(), 0, 0) {
        return Err(DicError::WindowOutOfRange);
    }
    let (gx, gy) = offsets(spec)
        .map(|(xi, eta)| {
            let x = (spec.center_x as i64 + xi as i64) as usize;
            let y = (spec.center_y as i64 + eta as i64) as usize;
            (
                0.5 * (image.get(x + 1, y) - image.get(x - 1, y)),
                0.5 * (image.get(x, y + 1) - image.get(x, y - 1)),
            )
        })
        .unzip();
    Ok((gx, gy))
}

pub fn icgn_precompute(reference: &GrayImage, spec: &SubsetSpec) -> Result<RefinerState> {
    let (grad_x, grad_y) = central_gradients(reference, spec)?;
    let stats = subset_stats(reference, spec);
    if stats.is_degenerate() {
        return Err(DicError::DegenerateTexture);
    }
    let mut steepest = Vec::with_capacity(spec.len());
    let mut hessian = Matrix6::zeros();
    for ((xi, eta), (&gx, &gy)) in offsets(spec).zip(grad_x.iter().zip(&grad_y)) {
        let sd = [gx, gx * xi, gx * eta, gy, gy * xi, gy * eta];
        let v = Vector6::from_column_slice(&sd);
        hessian.ger(1.0, &v, &v, 1.0);
        steepest.push(sd);
    }
    let eig = SymmetricEigen::new(hessian).eigenvalues;
    let lo = eig.min();
    let hi = eig.max();
    if !(lo > 0.0) || hi / lo > MAX_HESSIAN_CONDITION {
        return Err(DicError::DegenerateTexture);
    }
    let chol = Cholesky::new(hessian).ok_or(DicError::DegenerateTexture)?;
    Ok(RefinerState {
        spec: *spec,
        stats,
        grad_x,
        grad_y,
        steepest,
        hessian,
        chol,
    })
}

impl RefinerState {
    /// Inverse-compositional increment `H^-1 sum sd_i e_i` for the current
    /// target samples, with `e_i` the zero-normalized error.
    pub fn increment(&self, samples: &[f64]) -> Result<WarpParams> {
        let (mean, norm) = center(samples);
        if !(norm > 0.0) {
            return Err(DicError::DegenerateSubset);
        }
        let scale = self.stats.norm / norm;
        let mut b = Vector6::zeros();
        for ((sd, &fc), &g) in self.steepest.iter().zip(&self.stats.centered).zip(samples) {
            let e = scale * (g - mean) - fc;
            for k in 0..6 {
                b[k] += sd[k] * e;
            }
        }
        let d = self.chol.solve(&b);
        Ok(WarpParams([d[0], d[1], d[2], d[3], d[4], d[5]]))
    }
}

/// Inverse-compositional Gauss-Newton refinement seeded with an integer displacement.
pub fn refine_icgn(
    state: &RefinerState,
    target: &GrayImage,
    init: (i64, i64),
    cfg: &RefineConfig,
) -> Result<SubpixelResult> {
    let spec = &state.spec;
    let mut p = start(init);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        check_guard(target, spec, &p, cfg.guard)?;
        let samples = sample_target(target, spec, &p)?;
        let delta = state.increment(&samples)?;
        p = p.compose_inverse(&delta)?;
        if delta.u().abs().max(delta.v().abs()) < cfg.tolerance {
            converged = true;
            break;
        }
    }
    check_guard(target, spec, &p, cfg.guard)?;
    let zncc =
        warped_zncc(&state.stats, target, spec, &p).map_err(|_| DicError::DegenerateSubset)?;
    Ok(SubpixelResult {
        warp: p,
        displacement: (p.u(), p.v()),
        zncc,
        iterations,
        converged,
    })
}

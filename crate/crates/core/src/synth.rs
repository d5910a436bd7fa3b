//! Synthetic speckle patterns and warped image pairs with known displacement.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DicError, Result};
use crate::image::GrayImage;
use crate::interp::interp_bilinear;
use crate::subset::SubsetSpec;

/// Random Gaussian blobs summed over a flat background.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleParams {
    pub blob_count: usize,
    /// Gaussian standard deviation of each blob, pixels.
    pub blob_sigma: f64,
    /// Peak amplitude of a blob, gray levels; each blob is randomly bright or dark.
    pub contrast: f64,
    pub background: f64,
    /// Minimum gray-level variance required in every `texture_window` square.
    pub texture_floor: f64,
    pub texture_window: usize,
}

impl SpeckleParams {
    /// Density-scaled defaults for a `width x height` image.
    pub fn for_size(width: usize, height: usize) -> Self {
        let sigma = 4.0;
        let area = (width * height) as f64;
        // each point covered by about three overlapping blobs
        let blob_count = (3.0 * area / (2.0 * sigma * sigma)).round() as usize;
        Self {
            blob_count,
            blob_sigma: sigma,
            contrast: 60.0,
            background: 128.0,
            texture_floor: 25.0,
            texture_window: 31,
        }
    }
}

/// Deterministic speckle image for a fixed `(seed, params)`.
pub fn synth_speckle(
    width: usize,
    height: usize,
    seed: u64,
    params: &SpeckleParams,
) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(DicError::ZeroDimension);
    }
    if !(params.blob_sigma > 0.0) || !params.contrast.is_finite() {
        return Err(DicError::InvalidConfig(
            "blob sigma must be positive and contrast finite".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![params.background; width * height];
    let reach = (4.0 * params.blob_sigma).ceil() as i64;
    let inv_two_var = 1.0 / (2.0 * params.blob_sigma * params.blob_sigma);
    for _ in 0..params.blob_count {
        let bx = rng.random_range(-(reach as f64)..(width as f64 + reach as f64));
        let by = rng.random_range(-(reach as f64)..(height as f64 + reach as f64));
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let amp = sign * params.contrast * rng.random_range(0.5..1.0);
        let x_lo = ((bx.floor() as i64) - reach).max(0);
        let x_hi = ((bx.ceil() as i64) + reach).min(width as i64 - 1);
        let y_lo = ((by.floor() as i64) - reach).max(0);
        let y_hi = ((by.ceil() as i64) + reach).min(height as i64 - 1);
        for y in y_lo..=y_hi {
            let dy = y as f64 - by;
            let row = &mut acc[y as usize * width..(y as usize + 1) * width];
            for x in x_lo..=x_hi {
                let dx = x as f64 - bx;
                row[x as usize] += amp * (-(dx * dx + dy * dy) * inv_two_var).exp();
            }
        }
    }
    for v in &mut acc {
        *v = v.clamp(0.0, 255.0);
    }
    let img = GrayImage::new(width, height, acc)?;
    if min_window_variance(&img, params.texture_window) <= params.texture_floor {
        return Err(DicError::TexturelessPattern);
    }
    Ok(img)
}

/// Smallest gray-level variance over all `win x win` windows (the whole image if smaller).
pub fn min_window_variance(image: &GrayImage, win: usize) -> f64 {
    let w = image.width();
    let h = image.height();
    let ww = win.clamp(1, w);
    let wh = win.clamp(1, h);
    // summed-area tables of values and squared values
    let stride = w + 1;
    let mut s1 = vec![0.0f64; stride * (h + 1)];
    let mut s2 = vec![0.0f64; stride * (h + 1)];
    for y in 0..h {
        let mut r1 = 0.0;
        let mut r2 = 0.0;
        for x in 0..w {
            let v = image.get(x, y);
            r1 += v;
            r2 += v * v;
            s1[(y + 1) * stride + x + 1] = s1[y * stride + x + 1] + r1;
            s2[(y + 1) * stride + x + 1] = s2[y * stride + x + 1] + r2;
        }
    }
    let n = (ww * wh) as f64;
    let rect = |s: &[f64], x: usize, y: usize| {
        s[(y + wh) * stride + x + ww] - s[y * stride + x + ww] - s[(y + wh) * stride + x]
            + s[y * stride + x]
    };
    let mut min = f64::INFINITY;
    for y in 0..=(h - wh) {
        for x in 0..=(w - ww) {
            let mean = rect(&s1, x, y) / n;
            let var = (rect(&s2, x, y) / n - mean * mean).max(0.0);
            min = min.min(var);
        }
    }
    min
}

/// Displacement model applied to the reference to produce the target.
///
/// The affine form maps a reference point `q` to
/// `q + t + G (q - origin)` with `t = (u, v)` and `G = [[u_x, u_y], [v_x, v_y]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warp {
    Translation {
        u: f64,
        v: f64,
    },
    Affine {
        /// `(u, u_x, u_y, v, v_x, v_y)`
        params: [f64; 6],
        origin: (f64, f64),
    },
}

impl Warp {
    /// Displacement of the reference point `(x, y)`.
    pub fn displacement_at(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Warp::Translation { u, v } => (u, v),
            Warp::Affine { params: p, origin } => {
                let (rx, ry) = (x - origin.0, y - origin.1);
                (p[0] + p[1] * rx + p[2] * ry, p[3] + p[4] * rx + p[5] * ry)
            }
        }
    }

    /// Reference point that lands on target point `(x, y)`.
    pub fn inverse_map(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        match *self {
            Warp::Translation { u, v } => Ok((x - u, y - v)),
            Warp::Affine { params: p, origin } => {
                let a = 1.0 + p[1];
                let b = p[2];
                let c = p[4];
                let d = 1.0 + p[5];
                let det = a * d - b * c;
                if det.abs() < 1e-8 {
                    return Err(DicError::NonInvertibleWarp);
                }
                let rx = x - origin.0 - p[0];
                let ry = y - origin.1 - p[3];
                Ok((
                    origin.0 + (d * rx - b * ry) / det,
                    origin.1 + (a * ry - c * rx) / det,
                ))
            }
        }
    }

    /// Local first-order warp `(u, u_x, u_y, v, v_x, v_y)` at reference point `(x, y)`.
    pub fn local_params(&self, x: f64, y: f64) -> [f64; 6] {
        let (u, v) = self.displacement_at(x, y);
        match *self {
            Warp::Translation { .. } => [u, 0.0, 0.0, v, 0.0, 0.0],
            Warp::Affine { params: p, .. } => [u, p[1], p[2], v, p[4], p[5]],
        }
    }
}

impl FromStr for Warp {
    type Err = DicError;

    /// Parses `"u=3.25,v=-1.5"`; any of `ux, uy, vx, vy` makes the warp affine
    /// (origin at the image origin unless `ox, oy` are given).
    fn from_str(s: &str) -> Result<Self> {
        let mut vals = [0.0f64; 6];
        let mut origin = (0.0, 0.0);
        let mut affine = false;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| DicError::Parse(format!("warp term {part:?} is not key=value")))?;
            let val: f64 = val
                .trim()
                .parse()
                .map_err(|_| DicError::Parse(format!("warp value {val:?} is not a number")))?;
            if !val.is_finite() {
                return Err(DicError::Parse(format!("warp value {val} is not finite")));
            }
            match key.trim() {
                "u" => vals[0] = val,
                "ux" => (vals[1], affine) = (val, true),
                "uy" => (vals[2], affine) = (val, true),
                "v" => vals[3] = val,
                "vx" => (vals[4], affine) = (val, true),
                "vy" => (vals[5], affine) = (val, true),
                "ox" => origin.0 = val,
                "oy" => origin.1 = val,
                other => return Err(DicError::Parse(format!("unknown warp key {other:?}"))),
            }
        }
        Ok(if affine {
            Warp::Affine {
                params: vals,
                origin,
            }
        } else {
            Warp::Translation {
                u: vals[0],
                v: vals[3],
            }
        })
    }
}

/// Exact warp used to synthesize a pair, with the valid-pixel mask of the target.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub warp: Warp,
    pub width: usize,
    pub height: usize,
    /// `true` where the target pixel was sampled from inside the reference.
    pub valid: Vec<bool>,
}

impl GroundTruth {
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn displacement_at(&self, x: f64, y: f64) -> (f64, f64) {
        self.warp.displacement_at(x, y)
    }

    /// `x,y,u,v` table with one row per point of interest.
    pub fn to_csv(&self, subsets: &[SubsetSpec]) -> String {
        let mut out = String::from("x,y,u,v\n");
        for s in subsets {
            let (u, v) = self.displacement_at(s.center_x as f64, s.center_y as f64);
            let _ = writeln!(out, "{},{},{:.12},{:.12}", s.center_x, s.center_y, u, v);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, subsets: &[SubsetSpec]) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv(subsets)).map_err(|e| DicError::io(path, e))
    }
}

/// Target image whose pixel `q` is the bilinear sample of `reference` at the
/// reference point mapped onto `q`. Pixels whose source falls outside the
/// reference are filled with the reference mean and flagged invalid.
pub fn synth_warped_pair(reference: &GrayImage, warp: &Warp) -> Result<(GrayImage, GroundTruth)> {
    let w = reference.width();
    let h = reference.height();
    let fill = reference.data().iter().sum::<f64>() / (w * h) as f64;
    let mut data = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = warp.inverse_map(x as f64, y as f64)?;
            match interp_bilinear(reference, sx, sy) {
                Ok(g) => {
                    data.push(g);
                    valid.push(true);
                }
                Err(_) => {
                    data.push(fill);
                    valid.push(false);
                }
            }
        }
    }
    if !valid.iter().any(|&v| v) {
        return Err(DicError::WarpOutOfBounds);
    }
    let target = GrayImage::new(w, h, data)?.with_id(reference.id() + 1);
    Ok((
        target,
        GroundTruth {
            warp: *warp,
            width: w,
            height: h,
            valid,
        },
    ))
}

/// Frame `k` is the speckle reference translated by `k * step`.
pub fn synth_sequence(
    width: usize,
    height: usize,
    frames: usize,
    seed: u64,
    step: (f64, f64),
) -> Result<Vec<GrayImage>> {
    if frames < 2 {
        return Err(DicError::InsufficientImages { found: frames });
    }
    let reference = synth_speckle(width, height, seed, &SpeckleParams::for_size(width, height))?;
    let mut out = Vec::with_capacity(frames);
    for k in 0..frames {
        let warp = Warp::Translation {
            u: step.0 * k as f64,
            v: step.1 * k as f64,
        };
        out.push(synth_warped_pair(&reference, &warp)?.0.with_id(k));
    }
    Ok(out)
}

/// Writes `frame_0000.pgm`, `frame_0001.pgm`, ... into `dir`.
pub fn write_sequence(images: &[GrayImage], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| DicError::io(dir, e))?;
    for (k, img) in images.iter().enumerate() {
        img.save_pgm(dir.join(format!("frame_{k:04}.pgm")))?;
    }
    Ok(())
}

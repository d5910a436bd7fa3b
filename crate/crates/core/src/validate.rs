//! Self-contained accuracy check against synthetic ground truth.
//!
//! A speckle image is shifted by sub-pixel translations around several
//! integer offsets; every method combination analyzes each pair and its
//! displacements are compared with the known shift.

use std::fmt::Write as _;

use crate::error::Result;
use crate::image::GrayImage;
use crate::pipeline::{analyze_pair, IntegerMethod, RunConfig, SubpixelMethod};
use crate::search::BfsDomain;
use crate::synth::{synth_speckle, synth_warped_pair, GroundTruth, SpeckleParams, Warp};

/// Maximum error allowed for refined methods.
pub const REFINED_MAX_ERROR: f64 = 0.1;
/// Mean error above which a refined combination is flagged.
pub const REFINED_MEAN_FLAG: f64 = 0.05;
/// Maximum error allowed for integer-only results.
pub const INTEGER_MAX_ERROR: f64 = 0.5 + 1e-9;
/// Maximum error allowed for the zero-displacement case.
pub const ZERO_WARP_MAX_ERROR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateConfig {
    pub size: usize,
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub offsets: Vec<i64>,
    pub integer_methods: Vec<IntegerMethod>,
    pub subpixel_methods: Vec<SubpixelMethod>,
    /// Shared settings; method fields are overridden per combination.
    pub base: RunConfig,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        let mut base = RunConfig::default();
        base.search.bfs_domain = BfsDomain::Window;
        base.grid.spacing = 30;
        Self {
            size: 192,
            seed: 0,
            fractions: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            offsets: vec![-3, 0, 4],
            integer_methods: IntegerMethod::ALL.to_vec(),
            subpixel_methods: vec![SubpixelMethod::Nr, SubpixelMethod::Icgn],
            base,
        }
    }
}

impl ValidateConfig {
    /// Translations of the sweep, `u = k + f`, `v = k - f`.
    pub fn translations(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.offsets.len() * self.fractions.len());
        for &k in &self.offsets {
            for &f in &self.fractions {
                out.push((k as f64 + f, k as f64 - f));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// Passes the maximum-error bound but the mean is high.
    Flag,
    Fail,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Flag => "FLAG",
            Verdict::Fail => "FAIL",
        }
    }

    pub fn passed(&self) -> bool {
        !matches!(self, Verdict::Fail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComboAccuracy {
    pub integer_method: IntegerMethod,
    pub subpixel_method: SubpixelMethod,
    /// Per-component absolute error over all sweep points.
    pub max_error: f64,
    pub mean_error: f64,
    pub points: usize,
    /// Points that did not converge (counted with their error).
    pub unconverged: usize,
    /// Error components above the combination's bound.
    pub over_bound: usize,
    pub zero_warp_max_error: f64,
    pub verdict: Verdict,
}

impl ComboAccuracy {
    pub fn label(&self) -> String {
        format!("{}+{}", self.integer_method, self.subpixel_method)
    }

    pub fn zero_warp_ok(&self) -> bool {
        self.zero_warp_max_error < ZERO_WARP_MAX_ERROR
    }

    fn within_bound(subpixel_method: SubpixelMethod, error: f64) -> bool {
        if subpixel_method == SubpixelMethod::None {
            error <= INTEGER_MAX_ERROR
        } else {
            error < REFINED_MAX_ERROR
        }
    }

    fn judge(&mut self) {
        self.verdict = if self.subpixel_method == SubpixelMethod::None {
            if Self::within_bound(self.subpixel_method, self.max_error) {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        } else if !Self::within_bound(self.subpixel_method, self.max_error) {
            Verdict::Fail
        } else if self.mean_error >= REFINED_MEAN_FLAG {
            Verdict::Flag
        } else {
            Verdict::Pass
        };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateReport {
    pub combos: Vec<ComboAccuracy>,
    pub cases: usize,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.combos.iter().all(|c| c.verdict.passed())
    }

    pub fn render(&self) -> String {
        let mut out = String::from(
            "combo        max_err    mean_err   over  points unconv zero_err   verdict\n",
        );
        for c in &self.combos {
            let _ = writeln!(
                out,
                "{:<12} {:<10.6} {:<10.6} {:<5} {:<6} {:<6} {:<10.2e} {}",
                c.label(),
                c.max_error,
                c.mean_error,
                c.over_bound,
                c.points,
                c.unconverged,
                c.zero_warp_max_error,
                c.verdict.name()
            );
        }
        out
    }
}

/// True when every target pixel under the displaced subset is valid.
fn window_valid(truth: &GroundTruth, x: usize, y: usize, m: usize, u: f64, v: f64) -> bool {
    let x0 = (x as f64 + u).floor() as i64 - m as i64 - 1;
    let y0 = (y as f64 + v).floor() as i64 - m as i64 - 1;
    let side = 2 * m as i64 + 3;
    (y0..y0 + side).all(|yy| {
        (x0..x0 + side).all(|xx| {
            xx >= 0
                && yy >= 0
                && (xx as usize) < truth.width
                && (yy as usize) < truth.height
                && truth.is_valid(xx as usize, yy as usize)
        })
    })
}

/// Appends the per-component errors of one analyzed pair.
fn pair_errors(
    reference: &GrayImage,
    target: &GrayImage,
    truth: &GroundTruth,
    cfg: &RunConfig,
    pair_index: usize,
    errors: &mut Vec<f64>,
    unconverged: &mut usize,
) -> Result<()> {
    let field = analyze_pair(reference, target, cfg, pair_index)?;
    for r in &field.records {
        let (tu, tv) = truth.displacement_at(r.x as f64, r.y as f64);
        if !window_valid(truth, r.x, r.y, cfg.grid.half_width, tu, tv) {
            continue;
        }
        if !r.converged {
            *unconverged += 1;
        }
        for e in [(r.u - tu).abs(), (r.v - tv).abs()] {
            errors.push(if e.is_nan() { f64::INFINITY } else { e });
        }
    }
    Ok(())
}

/// Runs the sweep for every configured method combination.
pub fn run_validation(cfg: &ValidateConfig) -> Result<ValidateReport> {
    let reference = synth_speckle(
        cfg.size,
        cfg.size,
        cfg.seed,
        &SpeckleParams::for_size(cfg.size, cfg.size),
    )?;
    let mut cases = Vec::new();
    for (u, v) in cfg.translations() {
        cases.push(synth_warped_pair(&reference, &Warp::Translation { u, v })?);
    }
    let (zero_target, zero_truth) =
        synth_warped_pair(&reference, &Warp::Translation { u: 0.0, v: 0.0 })?;

    let mut combos = Vec::new();
    for &integer_method in &cfg.integer_methods {
        for &subpixel_method in &cfg.subpixel_methods {
            let run = RunConfig {
                integer_method,
                subpixel_method,
                ..cfg.base.clone()
            };
            let mut errors = Vec::new();
            let mut unconverged = 0;
            for (k, (target, truth)) in cases.iter().enumerate() {
                pair_errors(
                    &reference,
                    target,
                    truth,
                    &run,
                    k,
                    &mut errors,
                    &mut unconverged,
                )?;
            }
            let mut zero_errors = Vec::new();
            let mut zero_unconverged = 0;
            pair_errors(
                &reference,
                &zero_target,
                &zero_truth,
                &run,
                cases.len(),
                &mut zero_errors,
                &mut zero_unconverged,
            )?;
            let max_error = errors.iter().copied().fold(0.0, f64::max);
            let mean_error = if errors.is_empty() {
                f64::INFINITY
            } else {
                errors.iter().sum::<f64>() / errors.len() as f64
            };
            let mut combo = ComboAccuracy {
                integer_method,
                subpixel_method,
                max_error: if errors.is_empty() {
                    f64::INFINITY
                } else {
                    max_error
                },
                mean_error,
                points: errors.len() / 2,
                unconverged: unconverged + zero_unconverged,
                over_bound: errors
                    .iter()
                    .filter(|&&e| !ComboAccuracy::within_bound(subpixel_method, e))
                    .count(),
                zero_warp_max_error: zero_errors.iter().copied().fold(0.0, f64::max),
                verdict: Verdict::Fail,
            };
            combo.judge();
            combos.push(combo);
        }
    }
    Ok(ValidateReport {
        combos,
        cases: cases.len(),
    })
}

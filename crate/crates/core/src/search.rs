//! Integer-pixel displacement search: exhaustive scan and two particle swarm variants.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::correlation::{zncc, zncc_memo, CorrelationMemo, SubsetStats};
use crate::error::{DicError, Result};
use crate::image::GrayImage;
use crate::subset::SubsetSpec;

/// Region scanned by the brute-force search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfsDomain {
    /// Displacements with `|dx|, |dy| <= search_radius`.
    Window,
    /// Every position where the subset fits in the target.
    WholeImage,
}

impl FromStr for BfsDomain {
    type Err = DicError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(Self::Window),
            "whole" | "whole_image" => Ok(Self::WholeImage),
            _ => Err(DicError::Parse(format!("unknown BFS domain {s:?}"))),
        }
    }
}

impl fmt::Display for BfsDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Window => "window",
            Self::WholeImage => "whole",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub search_radius: usize,
    pub bfs_domain: BfsDomain,
    pub particle_count: usize,
    pub max_generations: usize,
    pub stop_threshold: f64,
    /// Cognitive acceleration coefficient.
    pub c1: f64,
    /// Social acceleration coefficient.
    pub c2: f64,
    pub rng_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            search_radius: 25,
            bfs_domain: BfsDomain::WholeImage,
            particle_count: 50,
            max_generations: 5,
            stop_threshold: 0.995,
            c1: 2.0,
            c2: 2.0,
            rng_seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DicError::InvalidConfig(m.into()));
        if self.particle_count == 0 {
            return bad("particle_count must be >= 1");
        }
        if self.max_generations == 0 {
            return bad("max_generations must be >= 1");
        }
        if !(self.stop_threshold > 0.0 && self.stop_threshold <= 1.0) {
            return bad("stop_threshold must lie in (0, 1]");
        }
        if self.search_radius == 0 {
            return bad("search_radius must be >= 1");
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return bad("acceleration coefficients must be positive");
        }
        Ok(())
    }
}

/// Inertia weight of generation `t`: `0.9 - t / (2 G_max)`.
#[inline]
pub fn inertia_weight(t: usize, max_generations: usize) -> f64 {
    0.9 - t as f64 / (2.0 * max_generations as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegerResult {
    pub displacement: (i64, i64),
    pub correlation: f64,
    /// Distinct correlation evaluations.
    pub evaluations: u64,
    /// Distinct evaluations made while initializing the swarm (0 for BFS).
    pub init_evaluations: u64,
    /// Distinct evaluations made during velocity/position updates (0 for BFS).
    pub update_evaluations: u64,
    pub generations_used: usize,
}

/// Independent random stream for one (pair, subset) work item.
pub fn subset_rng(seed: u64, pair_index: usize, subset_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((pair_index as u64) << 32) | subset_index as u64);
    rng
}

/// Inclusive displacement bounds of the search window, clipped to the image.
fn window_bounds(target: &GrayImage, spec: &SubsetSpec, radius: usize) -> Option<[(i64, i64); 2]> {
    let r = radius as i64;
    let (xl, xh) = spec.dx_range(target.width());
    let (yl, yh) = spec.dy_range(target.height());
    let x = (xl.max(-r), xh.min(r));
    let y = (yl.max(-r), yh.min(r));
    (x.0 <= x.1 && y.0 <= y.1).then_some([x, y])
}

/// `a` beats `b` on higher correlation, then on smaller `(dy, dx)`.
#[inline]
fn better(a: (f64, (i64, i64)), b: (f64, (i64, i64))) -> bool {
    a.0 > b.0 || (a.0 == b.0 && (a.1 .1, a.1 .0) < (b.1 .1, b.1 .0))
}

/// Exhaustive argmax of the correlation over the configured domain.
pub fn bfs_search(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    cfg: &SearchConfig,
) -> Result<IntegerResult> {
    if ref_stats.is_degenerate() {
        return Err(DicError::DegenerateReference);
    }
    let [(xl, xh), (yl, yh)] = match cfg.bfs_domain {
        BfsDomain::Window => {
            window_bounds(target, spec, cfg.search_radius).ok_or(DicError::NoValidPosition)?
        }
        BfsDomain::WholeImage => {
            let x = spec.dx_range(target.width());
            let y = spec.dy_range(target.height());
            if x.0 > x.1 || y.0 > y.1 {
                return Err(DicError::NoValidPosition);
            }
            [x, y]
        }
    };
    let mut best: Option<(f64, (i64, i64))> = None;
    let mut evaluations = 0u64;
    // row-major scan with strict improvement keeps the smallest (dy, dx) on ties
    for dy in yl..=yh {
        for dx in xl..=xh {
            match zncc(ref_stats, target, spec, (dx, dy)) {
                Ok(c) => {
                    evaluations += 1;
                    if best.is_none_or(|b| c > b.0) {
                        best = Some((c, (dx, dy)));
                    }
                }
                Err(DicError::DegenerateTarget) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let (correlation, displacement) = best.ok_or(DicError::AllPositionsDegenerate)?;
    Ok(IntegerResult {
        displacement,
        correlation,
        evaluations,
        init_evaluations: 0,
        update_evaluations: 0,
        generations_used: 0,
    })
}

#[derive(Debug, Clone, Copy)]
struct Particle {
    pos: [f64; 2],
    vel: [f64; 2],
    best_pos: (i64, i64),
    best_c: f64,
}

struct Swarm<'a> {
    ref_stats: &'a SubsetStats,
    target: &'a GrayImage,
    spec: &'a SubsetSpec,
    bounds: [(i64, i64); 2],
    star: bool,
}

impl Swarm<'_> {
    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.bounds[0].0 as f64, self.bounds[0].1 as f64),
            p[1].clamp(self.bounds[1].0 as f64, self.bounds[1].1 as f64),
        ]
    }

    fn in_window(&self, d: (i64, i64)) -> bool {
        (self.bounds[0].0..=self.bounds[0].1).contains(&d.0)
            && (self.bounds[1].0..=self.bounds[1].1).contains(&d.1)
    }

    fn probe(&self, memo: &mut CorrelationMemo, d: (i64, i64)) -> Result<f64> {
        match zncc_memo(memo, self.ref_stats, self.target, self.spec, d) {
            Ok(c) => Ok(c),
            Err(DicError::DegenerateTarget) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Evaluates the particle at its rounded position (plus the 4-neighbourhood
    /// when star search is on) and returns the best probe.
    fn evaluate(&self, memo: &mut CorrelationMemo, pos: [f64; 2]) -> Result<(f64, (i64, i64))> {
        let center = (pos[0].round() as i64, pos[1].round() as i64);
        let mut best = (self.probe(memo, center)?, center);
        if self.star {
            for (ox, oy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let d = (center.0 + ox, center.1 + oy);
                if self.in_window(d) {
                    let cand = (self.probe(memo, d)?, d);
                    if better(cand, best) {
                        best = cand;
                    }
                }
            }
        }
        Ok(best)
    }
}

/// One star-search step from `center`: best of the position and its 4-neighbourhood.
pub fn star_step(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    radius: usize,
    memo: &mut CorrelationMemo,
    center: (i64, i64),
) -> Result<((i64, i64), f64)> {
    let bounds = window_bounds(target, spec, radius).ok_or(DicError::NoValidPosition)?;
    let swarm = Swarm {
        ref_stats,
        target,
        spec,
        bounds,
        star: true,
    };
    let (c, d) = swarm.evaluate(memo, [center.0 as f64, center.1 as f64])?;
    Ok((d, c))
}

fn swarm_search(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    cfg: &SearchConfig,
    memo: &mut CorrelationMemo,
    rng: &mut impl Rng,
    star: bool,
) -> Result<IntegerResult> {
    cfg.validate()?;
    if ref_stats.is_degenerate() {
        return Err(DicError::DegenerateReference);
    }
    let bounds = window_bounds(target, spec, cfg.search_radius).ok_or(DicError::NoValidPosition)?;
    let swarm = Swarm {
        ref_stats,
        target,
        spec,
        bounds,
        star,
    };
    let misses_before = memo.misses();
    let half_v = cfg.search_radius as f64 / 2.0;

    let mut particles = Vec::with_capacity(cfg.particle_count);
    let mut g_best: (f64, (i64, i64)) = (f64::NEG_INFINITY, (0, 0));
    let mut have_best = false;
    for _ in 0..cfg.particle_count {
        let pos = [
            rng.random_range(bounds[0].0 as f64..=bounds[0].1 as f64),
            rng.random_range(bounds[1].0 as f64..=bounds[1].1 as f64),
        ];
        let vel = [
            rng.random_range(-half_v..=half_v),
            rng.random_range(-half_v..=half_v),
        ];
        let (c, at) = swarm.evaluate(memo, pos)?;
        let pos = if star {
            [at.0 as f64, at.1 as f64]
        } else {
            pos
        };
        particles.push(Particle {
            pos,
            vel,
            best_pos: at,
            best_c: c,
        });
        if c > f64::NEG_INFINITY && (!have_best || better((c, at), g_best)) {
            g_best = (c, at);
            have_best = true;
        }
    }
    let init_evaluations = memo.misses() - misses_before;

    let mut generations_used = 0;
    if !(have_best && g_best.0 >= cfg.stop_threshold) {
        for t in 0..cfg.max_generations {
            let w = inertia_weight(t, cfg.max_generations);
            let gb = [g_best.1 .0 as f64, g_best.1 .1 as f64];
            for p in &mut particles {
                let pb = [p.best_pos.0 as f64, p.best_pos.1 as f64];
                for d in 0..2 {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    p.vel[d] = w * p.vel[d]
                        + cfg.c1 * r1 * (pb[d] - p.pos[d])
                        + cfg.c2 * r2 * (gb[d] - p.pos[d]);
                }
                p.pos = swarm.clamp([p.pos[0] + p.vel[0], p.pos[1] + p.vel[1]]);
                let (c, at) = swarm.evaluate(memo, p.pos)?;
                if star {
                    p.pos = [at.0 as f64, at.1 as f64];
                }
                if better((c, at), (p.best_c, p.best_pos)) && c > f64::NEG_INFINITY {
                    p.best_c = c;
                    p.best_pos = at;
                }
                if c > f64::NEG_INFINITY && (!have_best || better((c, at), g_best)) {
                    g_best = (c, at);
                    have_best = true;
                }
            }
            generations_used = t + 1;
            if have_best && g_best.0 >= cfg.stop_threshold {
                break;
            }
        }
    }
    if !have_best {
        return Err(DicError::AllPositionsDegenerate);
    }
    let evaluations = memo.misses() - misses_before;
    Ok(IntegerResult {
        displacement: g_best.1,
        correlation: g_best.0,
        evaluations,
        init_evaluations,
        update_evaluations: evaluations - init_evaluations,
        generations_used,
    })
}

/// Standard particle swarm search over the `±search_radius` window.
pub fn pso_search(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    cfg: &SearchConfig,
    memo: &mut CorrelationMemo,
    rng: &mut impl Rng,
) -> Result<IntegerResult> {
    swarm_search(ref_stats, target, spec, cfg, memo, rng, false)
}

/// Particle swarm search where every particle evaluation takes one star-search
/// step: the particle moves to the best of its position and 4-neighbourhood.
pub fn mpso_search(
    ref_stats: &SubsetStats,
    target: &GrayImage,
    spec: &SubsetSpec,
    cfg: &SearchConfig,
    memo: &mut CorrelationMemo,
    rng: &mut impl Rng,
) -> Result<IntegerResult> {
    swarm_search(ref_stats, target, spec, cfg, memo, rng, true)
}

//! Pair and sequence analysis under the three execution strategies.
//!
//! Every (pair, subset) work item is a pure function of the two images, the
//! subset and the configuration; its random stream is derived from the run
//! seed, the pair index and the subset index. Work is split into contiguous
//! balanced chunks, one per worker, and results are reassembled in pair and
//! grid order, so every mode and worker count yields bit-identical fields.

use std::fmt::{self, Write as _};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::mpsc;
use std::thread;

use crate::correlation::{subset_stats, CorrelationMemo};
use crate::error::{DicError, Result};
use crate::image::GrayImage;
use crate::search::{bfs_search, mpso_search, pso_search, subset_rng, IntegerResult, SearchConfig};
use crate::subpixel::{icgn_precompute, refine_icgn, refine_nr, RefineConfig, SubpixelResult};
use crate::subset::{grid_subsets, GridParams, SubsetSpec};

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $($text:literal)|+),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(&self) -> &'static str {
                match self { $($name::$variant => [$($text),+][0]),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = DicError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($($text)|+ => Ok($name::$variant),)+
                    _ => Err(DicError::Parse(format!(concat!("unknown ", stringify!($name), " {:?}"), s))),
                }
            }
        }
    };
}

named_enum!(
    /// Integer-pixel search method.
    IntegerMethod { Bfs => "bfs", Pso => "pso", Mpso => "mpso" }
);

named_enum!(
    /// Sub-pixel refinement method.
    SubpixelMethod { Nr => "nr", Icgn => "icgn", None => "none" }
);

named_enum!(
    /// How work is distributed across workers.
    ExecutionMode {
        Serial => "serial",
        SubimageParallel => "subimage" | "subimage_parallel",
        ImageParallel => "image" | "image_parallel",
    }
);

named_enum!(
    /// Which frame each target is compared against.
    ReferencePolicy {
        UpdateEveryPair => "update" | "update_every_pair",
        FixedFirst => "fixed" | "fixed_first",
    }
);

/// Subset grid settings; `margin = None` derives it from the search radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub half_width: usize,
    pub spacing: usize,
    pub margin: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 15,
            spacing: 10,
            margin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub integer_method: IntegerMethod,
    pub subpixel_method: SubpixelMethod,
    pub mode: ExecutionMode,
    pub reference_policy: ReferencePolicy,
    pub worker_count: usize,
    pub search: SearchConfig,
    pub refine: RefineConfig,
    pub grid: GridConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            integer_method: IntegerMethod::Mpso,
            subpixel_method: SubpixelMethod::Nr,
            mode: ExecutionMode::Serial,
            reference_policy: ReferencePolicy::UpdateEveryPair,
            worker_count: 4,
            search: SearchConfig::default(),
            refine: RefineConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.worker_count == 0 {
            return Err(DicError::InvalidConfig("worker_count must be >= 1".into()));
        }
        self.search.validate()
    }

    pub fn effective_workers(&self) -> usize {
        match self.mode {
            ExecutionMode::Serial => 1,
            _ => self.worker_count.max(1),
        }
    }

    /// Subset-centre margin: half-width plus search radius plus the refinement guard band.
    pub fn margin(&self) -> usize {
        self.grid
            .margin
            .unwrap_or(self.grid.half_width + self.search.search_radius + self.refine.guard)
    }

    pub fn grid_params(&self) -> GridParams {
        GridParams {
            half_width: self.grid.half_width,
            spacing: self.grid.spacing,
            margin: self.margin(),
        }
    }

    /// Short label such as `pso+nr/image`.
    pub fn label(&self) -> String {
        format!(
            "{}+{}/{}",
            self.integer_method, self.subpixel_method, self.mode
        )
    }

    /// Fully materialized configuration as `key=value` lines.
    pub fn manifest_lines(&self) -> Vec<(String, String)> {
        let s = &self.search;
        let r = &self.refine;
        vec![
            ("integer_method".into(), self.integer_method.to_string()),
            ("subpixel_method".into(), self.subpixel_method.to_string()),
            ("mode".into(), self.mode.to_string()),
            ("reference_policy".into(), self.reference_policy.to_string()),
            ("worker_count".into(), self.worker_count.to_string()),
            (
                "effective_workers".into(),
                self.effective_workers().to_string(),
            ),
            ("search_radius".into(), s.search_radius.to_string()),
            ("bfs_domain".into(), s.bfs_domain.to_string()),
            ("particle_count".into(), s.particle_count.to_string()),
            ("max_generations".into(), s.max_generations.to_string()),
            ("stop_threshold".into(), s.stop_threshold.to_string()),
            ("c1".into(), s.c1.to_string()),
            ("c2".into(), s.c2.to_string()),
            ("seed".into(), s.rng_seed.to_string()),
            ("tolerance".into(), r.tolerance.to_string()),
            ("max_iter".into(), r.max_iter.to_string()),
            ("guard".into(), r.guard.to_string()),
            ("half_width".into(), self.grid.half_width.to_string()),
            ("spacing".into(), self.grid.spacing.to_string()),
            ("margin".into(), self.margin().to_string()),
        ]
    }
}

/// Outcome for one point of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoiRecord {
    pub x: usize,
    pub y: usize,
    pub u: f64,
    pub v: f64,
    pub zncc: f64,
    pub converged: bool,
    /// Refinement iterations (0 without refinement).
    pub iterations: usize,
    /// Distinct integer-search correlation evaluations.
    pub evaluations: u64,
    /// Swarm generations used by the integer search.
    pub generations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub pair_index: usize,
    pub reference_id: usize,
    pub target_id: usize,
    pub records: Vec<PoiRecord>,
}

pub const FIELD_CSV_HEADER: &str = "x,y,u,v,zncc,converged,iterations,evaluations";

impl DisplacementField {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(FIELD_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.x, r.y, r.u, r.v, r.zncc, r.converged, r.iterations, r.evaluations
            );
        }
        out
    }

    pub fn file_name(&self) -> String {
        field_file_name(self.pair_index)
    }

    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(self.file_name());
        fs::write(&path, self.to_csv()).map_err(|e| DicError::io(&path, e))?;
        Ok(path)
    }

    pub fn evaluations(&self) -> u64 {
        self.records.iter().map(|r| r.evaluations).sum()
    }

    pub fn converged_count(&self) -> usize {
        self.records.iter().filter(|r| r.converged).count()
    }
}

pub fn field_file_name(pair_index: usize) -> String {
    format!("field_{pair_index:04}.csv")
}

fn integer_search(
    cfg: &RunConfig,
    reference: &GrayImage,
    target: &GrayImage,
    spec: &SubsetSpec,
    pair_index: usize,
    subset_index: usize,
) -> Result<IntegerResult> {
    let stats = subset_stats(reference, spec);
    match cfg.integer_method {
        IntegerMethod::Bfs => bfs_search(&stats, target, spec, &cfg.search),
        IntegerMethod::Pso | IntegerMethod::Mpso => {
            let mut memo = CorrelationMemo::new();
            let mut rng = subset_rng(cfg.search.rng_seed, pair_index, subset_index);
            if cfg.integer_method == IntegerMethod::Pso {
                pso_search(&stats, target, spec, &cfg.search, &mut memo, &mut rng)
            } else {
                mpso_search(&stats, target, spec, &cfg.search, &mut memo, &mut rng)
            }
        }
    }
}

fn refine(
    cfg: &RunConfig,
    reference: &GrayImage,
    target: &GrayImage,
    spec: &SubsetSpec,
    init: (i64, i64),
) -> Result<Option<SubpixelResult>> {
    match cfg.subpixel_method {
        SubpixelMethod::None => Ok(None),
        SubpixelMethod::Nr => {
            let stats = subset_stats(reference, spec);
            refine_nr(&stats, target, spec, init, &cfg.refine).map(Some)
        }
        SubpixelMethod::Icgn => {
            let state = icgn_precompute(reference, spec)?;
            refine_icgn(&state, target, init, &cfg.refine).map(Some)
        }
    }
}

/// Integer search then optional refinement for one subset. Failures are
/// recorded with `converged = false`.
pub fn analyze_subset(
    cfg: &RunConfig,
    reference: &GrayImage,
    target: &GrayImage,
    spec: &SubsetSpec,
    pair_index: usize,
    subset_index: usize,
) -> PoiRecord {
    let mut rec = PoiRecord {
        x: spec.center_x,
        y: spec.center_y,
        u: f64::NAN,
        v: f64::NAN,
        zncc: f64::NAN,
        converged: false,
        iterations: 0,
        evaluations: 0,
        generations: 0,
    };
    let int = match integer_search(cfg, reference, target, spec, pair_index, subset_index) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("pair {pair_index} subset {subset_index}: integer search failed: {e}");
            return rec;
        }
    };
    rec.u = int.displacement.0 as f64;
    rec.v = int.displacement.1 as f64;
    rec.zncc = int.correlation;
    rec.evaluations = int.evaluations;
    rec.generations = int.generations_used;
    match refine(cfg, reference, target, spec, int.displacement) {
        Ok(None) => rec.converged = true,
        Ok(Some(sub)) => {
            rec.u = sub.displacement.0;
            rec.v = sub.displacement.1;
            rec.zncc = sub.zncc;
            rec.iterations = sub.iterations;
            rec.converged = sub.converged;
        }
        Err(e) => log::debug!("pair {pair_index} subset {subset_index}: refinement failed: {e}"),
    }
    rec
}

/// Contiguous balanced partition of `0..n` into at most `workers` chunks;
/// the first `n % workers` chunks hold one extra item.
pub fn balanced_chunks(n: usize, workers: usize) -> Vec<Range<usize>> {
    let workers = workers.max(1).min(n.max(1));
    let base = n / workers;
    let extra = n % workers;
    let mut out = Vec::with_capacity(workers);
    let mut start = 0;
    for w in 0..workers {
        let len = base + usize::from(w < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Runs `job` over `0..n` on `workers` scoped threads with static chunking,
/// collecting results through a channel and returning them in index order.
fn run_partitioned<T, F>(n: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if workers <= 1 || n <= 1 {
        return (0..n).map(job).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let (tx, rx) = mpsc::channel::<(usize, T)>();
    thread::scope(|scope| {
        for chunk in balanced_chunks(n, workers) {
            let tx = tx.clone();
            let job = &job;
            scope.spawn(move || {
                for i in chunk {
                    // the receiver outlives every worker
                    let _ = tx.send((i, job(i)));
                }
            });
        }
        drop(tx);
        for (i, out) in rx {
            slots[i] = Some(out);
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every work item reports back"))
        .collect()
}

fn check_dims(reference: &GrayImage, target: &GrayImage) -> Result<()> {
    if reference.width() != target.width() || reference.height() != target.height() {
        return Err(DicError::DimensionMismatch(
            reference.width(),
            reference.height(),
            target.width(),
            target.height(),
        ));
    }
    Ok(())
}

fn analyze_pair_with(
    reference: &GrayImage,
    target: &GrayImage,
    cfg: &RunConfig,
    pair_index: usize,
    subset_workers: usize,
) -> Result<DisplacementField> {
    check_dims(reference, target)?;
    let grid = grid_subsets(reference, &cfg.grid_params())?;
    if grid.is_empty() {
        return Err(DicError::EmptyGrid);
    }
    let records = run_partitioned(grid.len(), subset_workers, |i| {
        analyze_subset(cfg, reference, target, &grid[i], pair_index, i)
    });
    Ok(DisplacementField {
        pair_index,
        reference_id: reference.id(),
        target_id: target.id(),
        records,
    })
}

/// Displacement field of one image pair. Subsets are spread across workers
/// only in sub-image-parallel mode.
pub fn analyze_pair(
    reference: &GrayImage,
    target: &GrayImage,
    cfg: &RunConfig,
    pair_index: usize,
) -> Result<DisplacementField> {
    cfg.validate()?;
    let workers = match cfg.mode {
        ExecutionMode::SubimageParallel => cfg.effective_workers(),
        _ => 1,
    };
    analyze_pair_with(reference, target, cfg, pair_index, workers)
}

/// `(reference, target)` image indices for each pair under `policy`.
pub fn pair_indices(count: usize, policy: ReferencePolicy) -> Vec<(usize, usize)> {
    match policy {
        ReferencePolicy::UpdateEveryPair => {
            (0..count.saturating_sub(1)).map(|i| (i, i + 1)).collect()
        }
        ReferencePolicy::FixedFirst => (1..count).map(|i| (0, i)).collect(),
    }
}

/// One field per pair, in pair order. A failing pair is reported in place
/// and does not stop the others.
pub fn analyze_sequence(
    images: &[GrayImage],
    cfg: &RunConfig,
) -> Result<Vec<Result<DisplacementField>>> {
    cfg.validate()?;
    if images.len() < 2 {
        return Err(DicError::InsufficientImages {
            found: images.len(),
        });
    }
    let workers = cfg.effective_workers();
    if let Ok(avail) = thread::available_parallelism() {
        if workers > avail.get() {
            log::warn!(
                "{workers} workers requested but only {} hardware threads available",
                avail.get()
            );
        }
    }
    let pairs = pair_indices(images.len(), cfg.reference_policy);
    let run_pair = |k: usize, subset_workers: usize| {
        let (r, t) = pairs[k];
        analyze_pair_with(&images[r], &images[t], cfg, k, subset_workers)
    };
    Ok(match cfg.mode {
        ExecutionMode::Serial => (0..pairs.len()).map(|k| run_pair(k, 1)).collect(),
        ExecutionMode::SubimageParallel => (0..pairs.len()).map(|k| run_pair(k, workers)).collect(),
        ExecutionMode::ImageParallel => run_partitioned(pairs.len(), workers, |k| run_pair(k, 1)),
    })
}

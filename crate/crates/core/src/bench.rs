//! Timed runs of the method x mode matrix.
//!
//! Each cell is timed end to end: load the image sequence from disk, analyze
//! every pair, write one field CSV per pair. One untimed warm-up precedes the
//! timed repeats. Cells run strictly one after another.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::error::{DicError, Result};
use crate::image::load_sequence;
use crate::pipeline::{analyze_sequence, ExecutionMode, IntegerMethod, RunConfig, SubpixelMethod};

/// How many timed repeats a cell gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepeatPolicy {
    Fixed(usize),
    /// Chosen from the warm-up duration.
    Auto,
}

impl FromStr for RepeatPolicy {
    type Err = DicError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(RepeatPolicy::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(RepeatPolicy::Fixed(n)),
            _ => Err(DicError::Parse(format!(
                "repeats must be 'auto' or a positive integer, got {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for RepeatPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RepeatPolicy::Fixed(n) => write!(f, "{n}"),
            RepeatPolicy::Auto => f.write_str("auto"),
        }
    }
}

/// Repeat count for a cell whose single run took `seconds`.
pub fn repeats_for_duration(seconds: f64) -> usize {
    if seconds > 60.0 {
        25
    } else if seconds >= 10.0 {
        100
    } else if seconds >= 1.0 {
        250
    } else {
        1000
    }
}

impl RepeatPolicy {
    pub fn resolve(&self, warmup_seconds: f64) -> usize {
        match *self {
            RepeatPolicy::Fixed(n) => n.max(1),
            RepeatPolicy::Auto => repeats_for_duration(warmup_seconds),
        }
    }
}

/// An on-disk image sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub id: String,
    pub dir: PathBuf,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub integer_method: IntegerMethod,
    pub subpixel_method: SubpixelMethod,
    pub mode: ExecutionMode,
    pub workers: usize,
    pub dataset: String,
    pub pairs: usize,
    pub repeats: usize,
    pub mean_seconds: f64,
    pub stddev_seconds: f64,
    pub per_pair_seconds: f64,
    pub frame_rate_hz: f64,
    pub evaluations: u64,
    /// Set when the cell could not be completed.
    pub failure: Option<String>,
}

impl BenchRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    fn key(&self) -> (IntegerMethod, SubpixelMethod, ExecutionMode, &str) {
        (
            self.integer_method,
            self.subpixel_method,
            self.mode,
            &self.dataset,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub cpu: String,
    pub available_parallelism: usize,
    pub timestamp_unix: u64,
}

impl Environment {
    pub fn capture() -> Self {
        let cpu = fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_string())
            })
            .unwrap_or_else(|| std::env::consts::ARCH.to_string());
        Self {
            cpu,
            available_parallelism: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub environment: Environment,
    pub repeat_policy: RepeatPolicy,
    pub datasets: Vec<Dataset>,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One whole-process run: returns (pairs, evaluations).
fn run_once(cfg: &RunConfig, dataset: &Dataset, out_dir: &Path) -> Result<(usize, u64)> {
    let images = load_sequence(&dataset.dir, &dataset.pattern)?;
    let fields = analyze_sequence(&images, cfg)?;
    let mut evaluations = 0;
    for field in &fields {
        let field = field
            .as_ref()
            .map_err(|e| DicError::InvalidImage(e.to_string()))?;
        field.write_csv(out_dir)?;
        evaluations += field.evaluations();
    }
    Ok((fields.len(), evaluations))
}

fn cell_dir(root: &Path, cfg: &RunConfig, dataset: &Dataset) -> PathBuf {
    root.join(format!(
        "{}_{}_{}_{}",
        dataset.id, cfg.integer_method, cfg.subpixel_method, cfg.mode
    ))
}

fn bench_cell(
    cfg: &RunConfig,
    dataset: &Dataset,
    policy: RepeatPolicy,
    root: &Path,
) -> BenchRecord {
    let mut rec = BenchRecord {
        integer_method: cfg.integer_method,
        subpixel_method: cfg.subpixel_method,
        mode: cfg.mode,
        workers: cfg.effective_workers(),
        dataset: dataset.id.clone(),
        pairs: 0,
        repeats: 0,
        mean_seconds: f64::NAN,
        stddev_seconds: f64::NAN,
        per_pair_seconds: f64::NAN,
        frame_rate_hz: f64::NAN,
        evaluations: 0,
        failure: None,
    };
    let dir = cell_dir(root, cfg, dataset);
    if let Err(e) = fs::create_dir_all(&dir) {
        rec.failure = Some(DicError::io(&dir, e).to_string());
        return rec;
    }
    let warm = Instant::now();
    let (pairs, evaluations) = match run_once(cfg, dataset, &dir) {
        Ok(v) => v,
        Err(e) => {
            rec.failure = Some(e.to_string());
            return rec;
        }
    };
    let repeats = policy.resolve(warm.elapsed().as_secs_f64());
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        match run_once(cfg, dataset, &dir) {
            Ok((_, evals)) if evals != evaluations => {
                rec.failure = Some(format!(
                    "evaluation count changed between runs: {evaluations} vs {evals}"
                ));
                return rec;
            }
            Ok(_) => times.push(start.elapsed().as_secs_f64()),
            Err(e) => {
                rec.failure = Some(e.to_string());
                return rec;
            }
        }
    }
    let (mean, std) = mean_std(&times);
    rec.pairs = pairs;
    rec.repeats = repeats;
    rec.mean_seconds = mean;
    rec.stddev_seconds = std;
    rec.per_pair_seconds = mean / pairs as f64;
    rec.frame_rate_hz = pairs as f64 / mean;
    rec.evaluations = evaluations;
    rec
}

/// Times every configuration in `matrix` on every dataset. Field CSVs are
/// written below `out_dir`, one directory per cell.
pub fn run_bench(
    matrix: &[RunConfig],
    datasets: &[Dataset],
    policy: RepeatPolicy,
    out_dir: impl AsRef<Path>,
) -> Result<BenchReport> {
    if matrix.is_empty() || datasets.is_empty() {
        return Err(DicError::EmptyMatrix);
    }
    for cfg in matrix {
        cfg.validate()?;
    }
    let root = out_dir.as_ref().join("fields");
    let mut records = Vec::with_capacity(matrix.len() * datasets.len());
    for dataset in datasets {
        for cfg in matrix {
            let rec = bench_cell(cfg, dataset, policy, &root);
            match &rec.failure {
                Some(e) => log::warn!("cell {} on {} failed: {e}", cfg.label(), dataset.id),
                None => log::info!(
                    "cell {} on {}: {:.4} s mean over {} repeats",
                    cfg.label(),
                    dataset.id,
                    rec.mean_seconds,
                    rec.repeats
                ),
            }
            records.push(rec);
        }
    }
    Ok(BenchReport {
        records,
        environment: Environment::capture(),
        repeat_policy: policy,
        datasets: datasets.to_vec(),
    })
}

/// Every (integer, subpixel, mode) combination, optionally including
/// integer-only cells, each built from `base`.
pub fn default_matrix(base: &RunConfig, include_none: bool) -> Vec<RunConfig> {
    let mut out = Vec::new();
    for &integer_method in IntegerMethod::ALL {
        for &subpixel_method in SubpixelMethod::ALL {
            if subpixel_method == SubpixelMethod::None && !include_none {
                continue;
            }
            for &mode in ExecutionMode::ALL {
                out.push(RunConfig {
                    integer_method,
                    subpixel_method,
                    mode,
                    ..base.clone()
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioKind {
    BfsVsPso,
    SerialVsImageParallel,
    SerialVsSubimageParallel,
}

impl RatioKind {
    pub fn name(&self) -> &'static str {
        match self {
            RatioKind::BfsVsPso => "bfs_vs_pso",
            RatioKind::SerialVsImageParallel => "serial_vs_image_parallel",
            RatioKind::SerialVsSubimageParallel => "serial_vs_subimage_parallel",
        }
    }

    /// Qualitative finding this ratio is compared against.
    pub fn reference_finding(&self) -> &'static str {
        match self {
            RatioKind::BfsVsPso => "brute force 3-5x slower than PSO",
            RatioKind::SerialVsImageParallel => "image parallel 2-3x faster than serial",
            RatioKind::SerialVsSubimageParallel => {
                "sub-image parallel inferior to serial in most cases"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub kind: RatioKind,
    /// `int+sub/mode` label of the numerator cell.
    pub numerator: String,
    /// `int+sub/mode` label of the denominator cell.
    pub denominator: String,
    pub dataset: String,
    pub numerator_seconds: f64,
    pub denominator_seconds: f64,
    /// `None` when a cell is missing or failed.
    pub ratio: Option<f64>,
    pub note: String,
}

impl RatioRow {
    pub fn observed(&self) -> &'static str {
        match self.ratio {
            None => "n/a",
            Some(r) if r > 1.0 => "numerator slower",
            Some(r) if r < 1.0 => "numerator faster",
            Some(_) => "equal",
        }
    }
}

pub fn time_ratio(numerator_seconds: f64, denominator_seconds: f64) -> f64 {
    numerator_seconds / denominator_seconds
}

fn label(i: IntegerMethod, s: SubpixelMethod, m: ExecutionMode) -> String {
    format!("{i}+{s}/{m}")
}

/// Slowdown and speedup ratios between cells of `records`.
pub fn derive_ratios(records: &[BenchRecord]) -> Vec<RatioRow> {
    let index: BTreeMap<_, &BenchRecord> = records.iter().map(|r| (r.key(), r)).collect();
    let mut datasets: Vec<&str> = records.iter().map(|r| r.dataset.as_str()).collect();
    datasets.dedup();
    let mut seen = std::collections::BTreeSet::new();
    datasets.retain(|d| seen.insert(*d));

    let make = |kind: RatioKind,
                num: (IntegerMethod, SubpixelMethod, ExecutionMode),
                den: (IntegerMethod, SubpixelMethod, ExecutionMode),
                dataset: &str| {
        let a = index.get(&(num.0, num.1, num.2, dataset));
        let b = index.get(&(den.0, den.1, den.2, dataset));
        let mut row = RatioRow {
            kind,
            numerator: label(num.0, num.1, num.2),
            denominator: label(den.0, den.1, den.2),
            dataset: dataset.to_string(),
            numerator_seconds: a.map_or(f64::NAN, |r| r.mean_seconds),
            denominator_seconds: b.map_or(f64::NAN, |r| r.mean_seconds),
            ratio: None,
            note: String::new(),
        };
        match (a, b) {
            (Some(a), Some(b)) if !a.failed() && !b.failed() => {
                row.ratio = Some(time_ratio(a.mean_seconds, b.mean_seconds));
            }
            (None, _) => row.note = format!("missing cell {}", row.numerator),
            (_, None) => row.note = format!("missing cell {}", row.denominator),
            _ => row.note = "failed cell".into(),
        }
        row
    };

    let mut out = Vec::new();
    for dataset in &datasets {
        let present = |i: IntegerMethod, s: SubpixelMethod, m: ExecutionMode| {
            index.contains_key(&(i, s, m, *dataset))
        };
        for &sub in SubpixelMethod::ALL {
            for &mode in ExecutionMode::ALL {
                if present(IntegerMethod::Bfs, sub, mode) || present(IntegerMethod::Pso, sub, mode)
                {
                    out.push(make(
                        RatioKind::BfsVsPso,
                        (IntegerMethod::Bfs, sub, mode),
                        (IntegerMethod::Pso, sub, mode),
                        dataset,
                    ));
                }
            }
        }
        for &int in IntegerMethod::ALL {
            for &sub in SubpixelMethod::ALL {
                let serial = (int, sub, ExecutionMode::Serial);
                for (kind, mode) in [
                    (
                        RatioKind::SerialVsImageParallel,
                        ExecutionMode::ImageParallel,
                    ),
                    (
                        RatioKind::SerialVsSubimageParallel,
                        ExecutionMode::SubimageParallel,
                    ),
                ] {
                    if present(int, sub, ExecutionMode::Serial) || present(int, sub, mode) {
                        out.push(make(kind, serial, (int, sub, mode), dataset));
                    }
                }
            }
        }
    }
    out
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

impl BenchReport {
    pub fn total_evaluations(&self) -> u64 {
        self.records.iter().map(|r| r.evaluations).sum()
    }

    pub fn failed_cells(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }

    pub fn ratios(&self) -> Vec<RatioRow> {
        derive_ratios(&self.records)
    }

    /// Long-form record listing.
    pub fn records_csv(&self) -> String {
        let mut out = String::from(
            "integer_method,subpixel_method,mode,workers,dataset,pairs,repeats,mean_s,stddev_s,per_pair_s,hz,evaluations,status\n",
        );
        for r in &self.records {
            let status = r.failure.as_deref().map_or("ok".to_string(), |e| {
                format!("failed: {}", e.replace(',', ";"))
            });
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.integer_method,
                r.subpixel_method,
                r.mode,
                r.workers,
                r.dataset,
                r.pairs,
                r.repeats,
                fmt_f(r.mean_seconds),
                fmt_f(r.stddev_seconds),
                fmt_f(r.per_pair_seconds),
                fmt_f(r.frame_rate_hz),
                r.evaluations,
                status
            );
        }
        out
    }

    /// Seconds per cell: one row per method pair, one column per dataset and mode.
    pub fn table_csv(&self) -> String {
        let mut columns: Vec<(String, ExecutionMode)> = Vec::new();
        let mut rows: Vec<(IntegerMethod, SubpixelMethod)> = Vec::new();
        for r in &self.records {
            let col = (r.dataset.clone(), r.mode);
            if !columns.contains(&col) {
                columns.push(col);
            }
            if !rows.contains(&(r.integer_method, r.subpixel_method)) {
                rows.push((r.integer_method, r.subpixel_method));
            }
        }
        let mut out = String::from("integer_method,subpixel_method");
        for (d, m) in &columns {
            let _ = write!(out, ",{d}:{m}");
        }
        out.push('\n');
        for (i, s) in rows {
            let _ = write!(out, "{i},{s}");
            for (d, m) in &columns {
                let cell = self.records.iter().find(|r| {
                    r.integer_method == i
                        && r.subpixel_method == s
                        && r.mode == *m
                        && &r.dataset == d
                });
                let v = match cell {
                    Some(r) if !r.failed() => fmt_f(r.mean_seconds),
                    Some(_) => "failed".into(),
                    None => String::new(),
                };
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn ratios_csv(&self) -> String {
        let mut out = String::from(
            "ratio,dataset,numerator,denominator,numerator_s,denominator_s,value,observed,reference_finding,note\n",
        );
        for r in self.ratios() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.kind.name(),
                r.dataset,
                r.numerator,
                r.denominator,
                fmt_f(r.numerator_seconds),
                fmt_f(r.denominator_seconds),
                r.ratio.map(fmt_f).unwrap_or_default(),
                r.observed(),
                r.kind.reference_finding(),
                r.note
            );
        }
        out
    }

    /// `key=value` lines: environment, timing boundary, datasets and totals.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let env = &self.environment;
        let _ = writeln!(out, "cpu={}", env.cpu);
        let _ = writeln!(out, "available_parallelism={}", env.available_parallelism);
        let _ = writeln!(out, "timestamp_unix={}", env.timestamp_unix);
        let _ = writeln!(out, "repeat_policy={}", self.repeat_policy);
        let _ = writeln!(out, "warmup_runs=1");
        let _ = writeln!(
            out,
            "timing_boundary=load images -> analyze all pairs -> write field csvs (display replaced by csv write)"
        );
        for (k, d) in self.datasets.iter().enumerate() {
            let _ = writeln!(out, "dataset.{k}.id={}", d.id);
            let _ = writeln!(out, "dataset.{k}.dir={}", d.dir.display());
            let _ = writeln!(out, "dataset.{k}.pattern={}", d.pattern);
        }
        let _ = writeln!(out, "cells={}", self.records.len());
        let _ = writeln!(out, "failed_cells={}", self.failed_cells());
        let _ = writeln!(out, "total_evaluations={}", self.total_evaluations());
        out
    }

    /// Writes `bench_table.csv`, `bench_records.csv`, `bench_ratios.csv` and
    /// `bench_manifest.txt` into `dir`, returning the paths.
    pub fn write(
        &self,
        dir: impl AsRef<Path>,
        extra_manifest: &[(String, String)],
    ) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| DicError::io(dir, e))?;
        let mut manifest = self.manifest();
        for (k, v) in extra_manifest {
            let _ = writeln!(manifest, "{k}={v}");
        }
        let files = [
            ("bench_table.csv", self.table_csv()),
            ("bench_records.csv", self.records_csv()),
            ("bench_ratios.csv", self.ratios_csv()),
            ("bench_manifest.txt", manifest),
        ];
        let mut paths = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| DicError::io(&path, e))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::SearchConfig;
    use crate::synth::{synth_speckle, synth_warped_pair, SpeckleParams, Warp};

    fn record(i: IntegerMethod, s: SubpixelMethod, m: ExecutionMode, secs: f64) -> BenchRecord {
        BenchRecord {
            integer_method: i,
            subpixel_method: s,
            mode: m,
            workers: 4,
            dataset: "set1".into(),
            pairs: 10,
            repeats: 25,
            mean_seconds: secs,
            stddev_seconds: 0.0,
            per_pair_seconds: secs / 10.0,
            frame_rate_hz: 10.0 / secs,
            evaluations: 0,
            failure: None,
        }
    }

    fn find(rows: &[RatioRow], kind: RatioKind, numerator: &str) -> RatioRow {
        rows.iter()
            .find(|r| r.kind == kind && r.numerator == numerator)
            .cloned()
            .unwrap()
    }

    #[test]
    fn repeat_bands() {
        assert_eq!(repeats_for_duration(61.0), 25);
        assert_eq!(repeats_for_duration(3345.5), 25);
        assert_eq!(repeats_for_duration(60.0), 100);
        assert_eq!(repeats_for_duration(10.0), 100);
        assert_eq!(repeats_for_duration(9.99), 250);
        assert_eq!(repeats_for_duration(1.0), 250);
        assert_eq!(repeats_for_duration(0.2), 1000);
        assert_eq!(RepeatPolicy::Fixed(3).resolve(100.0), 3);
        assert_eq!("auto".parse::<RepeatPolicy>().unwrap(), RepeatPolicy::Auto);
        assert_eq!("7".parse::<RepeatPolicy>().unwrap(), RepeatPolicy::Fixed(7));
        assert!("0".parse::<RepeatPolicy>().is_err());
    }

    #[test]
    fn reference_table_ratios() {
        use ExecutionMode::*;
        use IntegerMethod::*;
        use SubpixelMethod::Nr;
        let recs = vec![
            record(Bfs, Nr, Serial, 3345.5),
            record(Pso, Nr, Serial, 582.4),
            record(Pso, Nr, ImageParallel, 152.8),
        ];
        let rows = derive_ratios(&recs);
        let bfs = find(&rows, RatioKind::BfsVsPso, "bfs+nr/serial");
        assert!((bfs.ratio.unwrap() - 5.74).abs() < 0.005);
        let img = find(&rows, RatioKind::SerialVsImageParallel, "pso+nr/serial");
        assert!((img.ratio.unwrap() - 3.81).abs() < 0.005);
        // the sub-image cell was never run
        let sub = find(&rows, RatioKind::SerialVsSubimageParallel, "pso+nr/serial");
        assert!(sub.ratio.is_none());
        assert!(sub.note.contains("missing"));
    }

    #[test]
    fn identical_cells_ratio_one() {
        use ExecutionMode::*;
        let recs = vec![
            record(IntegerMethod::Mpso, SubpixelMethod::Icgn, Serial, 2.5),
            record(
                IntegerMethod::Mpso,
                SubpixelMethod::Icgn,
                ImageParallel,
                2.5,
            ),
        ];
        let rows = derive_ratios(&recs);
        let r = find(&rows, RatioKind::SerialVsImageParallel, "mpso+icgn/serial");
        assert_eq!(r.ratio, Some(1.0));
        assert_eq!(r.observed(), "equal");
    }

    #[test]
    fn failed_cells_give_no_ratio() {
        use ExecutionMode::*;
        let mut bad = record(IntegerMethod::Pso, SubpixelMethod::Nr, Serial, 1.0);
        bad.failure = Some("boom".into());
        let recs = vec![
            record(IntegerMethod::Bfs, SubpixelMethod::Nr, Serial, 4.0),
            bad,
        ];
        let rows = derive_ratios(&recs);
        let r = find(&rows, RatioKind::BfsVsPso, "bfs+nr/serial");
        assert!(r.ratio.is_none());
        assert_eq!(r.note, "failed cell");
    }

    #[test]
    fn matrix_sizes() {
        let base = RunConfig::default();
        assert_eq!(default_matrix(&base, false).len(), 18);
        assert_eq!(default_matrix(&base, true).len(), 27);
        let bfs = default_matrix(&base, false)
            .into_iter()
            .filter(|c| c.integer_method == IntegerMethod::Bfs)
            .count();
        assert_eq!(bfs, 6);
    }

    #[test]
    fn empty_matrix_is_rejected() {
        let ds = Dataset {
            id: "x".into(),
            dir: PathBuf::from("."),
            pattern: "*.pgm".into(),
        };
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_bench(&[], &[ds], RepeatPolicy::Fixed(1), tmp.path()),
            Err(DicError::EmptyMatrix)
        ));
    }

    #[test]
    fn small_bench_end_to_end() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("seq");
        fs::create_dir_all(&data).unwrap();
        let base = synth_speckle(80, 80, 11, &SpeckleParams::for_size(80, 80)).unwrap();
        for i in 0..3 {
            let w = Warp::Translation {
                u: 0.3 * i as f64,
                v: 0.2 * i as f64,
            };
            let (img, _) = synth_warped_pair(&base, &w).unwrap();
            img.save_pgm(data.join(format!("img_{i:03}.pgm"))).unwrap();
        }
        let ds = Dataset {
            id: "tiny".into(),
            dir: data,
            pattern: "*.pgm".into(),
        };
        let base_cfg = RunConfig {
            search: SearchConfig {
                search_radius: 4,
                bfs_domain: crate::search::BfsDomain::Window,
                ..SearchConfig::default()
            },
            grid: crate::pipeline::GridConfig {
                half_width: 8,
                spacing: 20,
                margin: None,
            },
            worker_count: 2,
            ..RunConfig::default()
        };
        let matrix: Vec<RunConfig> = default_matrix(&base_cfg, false)
            .into_iter()
            .filter(|c| c.subpixel_method == SubpixelMethod::Nr)
            .collect();
        let report = run_bench(
            &matrix,
            std::slice::from_ref(&ds),
            RepeatPolicy::Fixed(2),
            tmp.path().join("out"),
        )
        .unwrap();
        assert_eq!(report.records.len(), 9);
        assert_eq!(report.failed_cells(), 0);
        for r in &report.records {
            assert_eq!(r.pairs, 2);
            assert_eq!(r.repeats, 2);
            assert!(r.stddev_seconds >= 0.0);
            assert!((r.frame_rate_hz - r.pairs as f64 / r.mean_seconds).abs() < 1e-9);
        }
        // modes of one method agree on counts
        let bfs: Vec<u64> = report
            .records
            .iter()
            .filter(|r| r.integer_method == IntegerMethod::Bfs)
            .map(|r| r.evaluations)
            .collect();
        assert!(bfs.windows(2).all(|w| w[0] == w[1]));
        let again = run_bench(
            &matrix,
            &[ds],
            RepeatPolicy::Fixed(1),
            tmp.path().join("out2"),
        )
        .unwrap();
        let counts = |r: &BenchReport| r.records.iter().map(|c| c.evaluations).collect::<Vec<_>>();
        assert_eq!(counts(&report), counts(&again));

        let paths = report.write(tmp.path().join("report"), &[]).unwrap();
        assert_eq!(paths.len(), 4);
        let table = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(table.lines().count(), 4);
        assert!(table.lines().next().unwrap().contains("tiny:image"));
    }

    #[test]
    fn missing_dataset_is_a_failed_cell() {
        let tmp = tempfile::tempdir().unwrap();
        let ds = Dataset {
            id: "ghost".into(),
            dir: tmp.path().join("nope"),
            pattern: "*.pgm".into(),
        };
        let report = run_bench(
            &[RunConfig::default()],
            &[ds],
            RepeatPolicy::Fixed(1),
            tmp.path(),
        )
        .unwrap();
        assert_eq!(report.failed_cells(), 1);
        assert!(report.table_csv().contains("failed"));
    }
}

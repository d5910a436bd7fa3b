//! `dic`: analyze image sequences, synthesize test data, validate accuracy
//! and benchmark the method x mode matrix.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use dic_core::bench::{default_matrix, run_bench, Dataset, RepeatPolicy};
use dic_core::pipeline::{GridConfig, ReferencePolicy};
use dic_core::subset::grid_for_dims;
use dic_core::validate::{run_validation, ValidateConfig};
use dic_core::{
    analyze_sequence, load_sequence, synth_sequence, synth_speckle, synth_warped_pair,
    write_sequence, BfsDomain, ExecutionMode, IntegerMethod, RefineConfig, RunConfig, SearchConfig,
    SpeckleParams, SubpixelMethod, Warp,
};

fn run_defaults() -> RunConfig {
    RunConfig::default()
}

#[derive(Parser, Debug)]
#[command(
    name = "dic",
    version,
    about = "Subset-based 2D digital image correlation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute one displacement field per image pair of a sequence.
    Analyze(AnalyzeArgs),
    /// Write a speckle reference, a warped target and the true displacements.
    Synth(SynthArgs),
    /// Check sub-pixel accuracy on synthetic translations.
    Validate(ValidateArgs),
    /// Time the integer x sub-pixel x mode matrix.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Subset half-width M (subset side 2M+1).
    #[arg(long, default_value_t = GridConfig::default().half_width)]
    half_width: usize,
    /// Grid step between subset centres, pixels.
    #[arg(long, default_value_t = GridConfig::default().spacing)]
    spacing: usize,
    /// Border kept free of subset centres [default: half-width + radius + guard].
    #[arg(long)]
    margin: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// Search radius around each subset, pixels.
    #[arg(long, default_value_t = SearchConfig::default().search_radius)]
    radius: usize,
    /// Brute-force domain: `window` or `whole`.
    #[arg(long, default_value_t = SearchConfig::default().bfs_domain)]
    bfs_domain: BfsDomain,
    #[arg(long, default_value_t = SearchConfig::default().particle_count)]
    particles: usize,
    /// Maximum swarm generations.
    #[arg(long, default_value_t = SearchConfig::default().max_generations)]
    generations: usize,
    /// Swarm stops once the best correlation reaches this value.
    #[arg(long, default_value_t = SearchConfig::default().stop_threshold)]
    threshold: f64,
    #[arg(long, default_value_t = SearchConfig::default().c1)]
    c1: f64,
    #[arg(long, default_value_t = SearchConfig::default().c2)]
    c2: f64,
    /// Master seed for all random streams.
    #[arg(long, default_value_t = SearchConfig::default().rng_seed)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct RefineArgs {
    /// Refinement stops when max(|du|, |dv|) of an update is below this.
    #[arg(long, default_value_t = RefineConfig::default().tolerance)]
    tol: f64,
    #[arg(long, default_value_t = RefineConfig::default().max_iter)]
    max_iter: usize,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Integer search: bfs, pso or mpso.
    #[arg(long = "int", default_value_t = run_defaults().integer_method)]
    integer: IntegerMethod,
    /// Sub-pixel refinement: nr, icgn or none.
    #[arg(long = "sub", default_value_t = run_defaults().subpixel_method)]
    subpixel: SubpixelMethod,
    /// Execution mode: serial, subimage or image.
    #[arg(long, default_value_t = run_defaults().mode)]
    mode: ExecutionMode,
    /// Worker threads for the parallel modes.
    #[arg(long, env = "DIC_WORKERS", default_value_t = run_defaults().worker_count)]
    workers: usize,
    /// Reference frame policy: update (previous frame) or fixed (first frame).
    #[arg(long, default_value_t = run_defaults().reference_policy)]
    policy: ReferencePolicy,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    refine: RefineArgs,
    #[command(flatten)]
    grid: GridArgs,
}

impl RunArgs {
    fn to_config(&self) -> RunConfig {
        let s = &self.search;
        RunConfig {
            integer_method: self.integer,
            subpixel_method: self.subpixel,
            mode: self.mode,
            reference_policy: self.policy,
            worker_count: self.workers,
            search: SearchConfig {
                search_radius: s.radius,
                bfs_domain: s.bfs_domain,
                particle_count: s.particles,
                max_generations: s.generations,
                stop_threshold: s.threshold,
                c1: s.c1,
                c2: s.c2,
                rng_seed: s.seed,
            },
            refine: RefineConfig {
                tolerance: self.refine.tol,
                max_iter: self.refine.max_iter,
                ..RefineConfig::default()
            },
            grid: GridConfig {
                half_width: self.grid.half_width,
                spacing: self.grid.spacing,
                margin: self.grid.margin,
            },
        }
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Directory holding the image sequence.
    dir: PathBuf,
    /// File-name glob selecting the frames, sorted by name.
    #[arg(long, default_value = "*.pgm")]
    pattern: String,
    /// Output directory for field CSVs and the run manifest.
    #[arg(long, default_value = "dic_out")]
    out: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, default_value = "512x512", value_parser = parse_size)]
    size: (usize, usize),
    /// Warp such as `u=3.25,v=-1.5`; `ux,uy,vx,vy` add gradients, `ox,oy` the origin.
    #[arg(long, default_value = "u=0,v=0")]
    warp: Warp,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synth_out")]
    out: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Search radius used for the truth grid margin.
    #[arg(long, default_value_t = SearchConfig::default().search_radius)]
    radius: usize,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Integer methods to check, comma separated.
    #[arg(long = "int", value_delimiter = ',', default_values_t = IntegerMethod::ALL.to_vec())]
    integer: Vec<IntegerMethod>,
    /// Sub-pixel methods to check, comma separated.
    #[arg(long = "sub", value_delimiter = ',', default_values_t = vec![SubpixelMethod::Nr, SubpixelMethod::Icgn])]
    subpixel: Vec<SubpixelMethod>,
    /// Side of the square test image.
    #[arg(long, default_value_t = ValidateConfig::default().size)]
    size: usize,
    /// Seed for both the speckle pattern and the swarms.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ValidateConfig::default().base.grid.spacing)]
    spacing: usize,
    /// Brute-force domain: `window` or `whole`.
    #[arg(long, default_value_t = ValidateConfig::default().base.search.bfs_domain)]
    bfs_domain: BfsDomain,
    /// Search radius around each subset, pixels.
    #[arg(long, default_value_t = SearchConfig::default().search_radius)]
    radius: usize,
    #[arg(long, default_value_t = SearchConfig::default().particle_count)]
    particles: usize,
    /// Maximum swarm generations.
    #[arg(long, default_value_t = SearchConfig::default().max_generations)]
    generations: usize,
    /// Directory for the run manifest.
    #[arg(long, default_value = "validate_out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Directory holding an image sequence (omit with --synthetic).
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "*.pgm")]
    pattern: String,
    /// Generate a synthetic sequence instead of reading one.
    #[arg(long)]
    synthetic: bool,
    /// Pairs in the synthetic sequence.
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    /// Synthetic frame size as WIDTHxHEIGHT.
    #[arg(long, default_value = "256x256", value_parser = parse_size)]
    size: (usize, usize),
    /// `auto` (by warm-up duration) or a fixed count.
    #[arg(long, default_value = "auto")]
    repeats: RepeatPolicy,
    /// Cell filter such as `int=bfs,mode=serial`; repeat to add filters.
    #[arg(long)]
    only: Vec<String>,
    /// Also time integer-only cells.
    #[arg(long)]
    include_none: bool,
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w
        .trim()
        .parse()
        .map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h
        .trim()
        .parse()
        .map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("image dimensions must be positive".into());
    }
    Ok((w, h))
}

fn write_manifest(dir: &Path, command: &str, entries: &[(String, String)]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut body = format!("command={command}\n");
    for (k, v) in entries {
        let _ = writeln!(body, "{k}={v}");
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<bool> {
    let cfg = args.run.to_config();
    cfg.validate()?;
    let start = Instant::now();
    let images = load_sequence(&args.dir, &args.pattern)?;
    let fields = analyze_sequence(&images, &cfg)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (mut pois, mut converged, mut evaluations, mut failed) = (0usize, 0usize, 0u64, 0usize);
    for (k, field) in fields.iter().enumerate() {
        match field {
            Ok(f) => {
                f.write_csv(&args.out)?;
                pois += f.records.len();
                converged += f.converged_count();
                evaluations += f.evaluations();
            }
            Err(e) => {
                eprintln!("pair {k}: {e}");
                failed += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pairs = fields.len();
    let mut entries = cfg.manifest_lines();
    entries.extend([
        ("input_dir".to_string(), args.dir.display().to_string()),
        ("pattern".to_string(), args.pattern.clone()),
        ("images".to_string(), images.len().to_string()),
        ("pairs".to_string(), pairs.to_string()),
        ("failed_pairs".to_string(), failed.to_string()),
        ("pois".to_string(), pois.to_string()),
        ("evaluations".to_string(), evaluations.to_string()),
        ("elapsed_s".to_string(), format!("{elapsed:.6}")),
    ]);
    write_manifest(&args.out, "analyze", &entries)?;
    let rate = if pois == 0 {
        0.0
    } else {
        converged as f64 / pois as f64
    };
    println!(
        "pairs={pairs} failed={failed} pois={pois} converged={:.1}% evaluations={evaluations} elapsed={elapsed:.3}s rate={:.3}Hz",
        100.0 * rate,
        pairs as f64 / elapsed
    );
    Ok(failed == 0)
}

fn cmd_synth(args: &SynthArgs) -> Result<bool> {
    let (w, h) = args.size;
    let reference = synth_speckle(w, h, args.seed, &SpeckleParams::for_size(w, h))?;
    let (target, truth) = synth_warped_pair(&reference, &args.warp)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    reference.save_pgm(args.out.join("reference.pgm"))?;
    target.save_pgm(args.out.join("target.pgm"))?;
    let grid_cfg = RunConfig {
        search: SearchConfig {
            search_radius: args.radius,
            ..SearchConfig::default()
        },
        grid: GridConfig {
            half_width: args.grid.half_width,
            spacing: args.grid.spacing,
            margin: args.grid.margin,
        },
        ..RunConfig::default()
    };
    let subsets = grid_for_dims(w, h, &grid_cfg.grid_params())?;
    truth.write_csv(args.out.join("truth.csv"), &subsets)?;
    let entries = vec![
        ("width".to_string(), w.to_string()),
        ("height".to_string(), h.to_string()),
        ("warp".to_string(), format!("{:?}", args.warp)),
        ("seed".to_string(), args.seed.to_string()),
        ("half_width".to_string(), args.grid.half_width.to_string()),
        ("spacing".to_string(), args.grid.spacing.to_string()),
        ("margin".to_string(), grid_cfg.margin().to_string()),
        ("truth_rows".to_string(), subsets.len().to_string()),
    ];
    write_manifest(&args.out, "synth", &entries)?;
    println!(
        "wrote reference.pgm, target.pgm, truth.csv ({} points) to {}",
        subsets.len(),
        args.out.display()
    );
    Ok(true)
}

fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let mut cfg = ValidateConfig {
        size: args.size,
        seed: args.seed,
        integer_methods: args.integer.clone(),
        subpixel_methods: args.subpixel.clone(),
        ..ValidateConfig::default()
    };
    cfg.base.search.rng_seed = args.seed;
    cfg.base.search.bfs_domain = args.bfs_domain;
    cfg.base.search.search_radius = args.radius;
    cfg.base.search.particle_count = args.particles;
    cfg.base.search.max_generations = args.generations;
    cfg.base.grid.spacing = args.spacing;
    cfg.base.validate()?;
    let start = Instant::now();
    let report = run_validation(&cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    print!("{}", report.render());
    let mut entries = cfg.base.manifest_lines();
    entries.extend([
        ("size".to_string(), cfg.size.to_string()),
        ("speckle_seed".to_string(), cfg.seed.to_string()),
        ("cases".to_string(), report.cases.to_string()),
        ("elapsed_s".to_string(), format!("{elapsed:.3}")),
    ]);
    for c in &report.combos {
        entries.push((
            format!("combo.{}.max_error", c.label()),
            c.max_error.to_string(),
        ));
        entries.push((
            format!("combo.{}.mean_error", c.label()),
            c.mean_error.to_string(),
        ));
        entries.push((
            format!("combo.{}.verdict", c.label()),
            c.verdict.name().to_string(),
        ));
    }
    write_manifest(&args.out, "validate", &entries)?;
    let passed = report.passed();
    println!(
        "validate: {} combos, {} cases, {elapsed:.1}s, {}",
        report.combos.len(),
        report.cases,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(passed)
}

/// Keeps matrix cells matching every `key=value` term of every filter.
fn apply_only(matrix: Vec<RunConfig>, filters: &[String]) -> Result<Vec<RunConfig>> {
    let mut ints: Vec<IntegerMethod> = Vec::new();
    let mut subs: Vec<SubpixelMethod> = Vec::new();
    let mut modes: Vec<ExecutionMode> = Vec::new();
    for filter in filters {
        for term in filter.split(',').filter(|t| !t.is_empty()) {
            let Some((key, value)) = term.split_once('=') else {
                bail!("--only term {term:?} is not key=value");
            };
            match key.trim() {
                "int" => ints.push(value.trim().parse()?),
                "sub" => subs.push(value.trim().parse()?),
                "mode" => modes.push(value.trim().parse()?),
                other => bail!("--only key {other:?} must be int, sub or mode"),
            }
        }
    }
    Ok(matrix
        .into_iter()
        .filter(|c| ints.is_empty() || ints.contains(&c.integer_method))
        .filter(|c| subs.is_empty() || subs.contains(&c.subpixel_method))
        .filter(|c| modes.is_empty() || modes.contains(&c.mode))
        .collect())
}

fn cmd_bench(args: &BenchArgs) -> Result<bool> {
    let base = args.run.to_config();
    let include_none = args.include_none || args.only.iter().any(|f| f.contains("sub=none"));
    let matrix = apply_only(default_matrix(&base, include_none), &args.only)?;
    if matrix.is_empty() {
        bail!("--only filter leaves no cells");
    }
    let dataset = match (&args.dataset, args.synthetic) {
        (Some(dir), false) => Dataset {
            id: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            dir: dir.clone(),
            pattern: args.pattern.clone(),
        },
        (None, true) => {
            let (w, h) = args.size;
            let dir = args.out.join("dataset");
            let frames = synth_sequence(w, h, args.pairs + 1, base.search.rng_seed, (0.35, -0.2))?;
            write_sequence(&frames, &dir)?;
            Dataset {
                id: format!("synthetic{w}x{h}"),
                dir,
                pattern: "frame_*.pgm".into(),
            }
        }
        (Some(_), true) => bail!("give either a dataset directory or --synthetic, not both"),
        (None, false) => Cli::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                "a dataset directory is required unless --synthetic is given",
            )
            .exit(),
    };
    let report = run_bench(
        &matrix,
        std::slice::from_ref(&dataset),
        args.repeats,
        &args.out,
    )?;
    let mut extra = base.manifest_lines();
    extra.retain(|(k, _)| !matches!(k.as_str(), "integer_method" | "subpixel_method" | "mode"));
    extra.push(("synthetic".into(), args.synthetic.to_string()));
    extra.push(("only".into(), args.only.join(";")));
    report.write(&args.out, &extra)?;
    let mut entries = vec![("cells".to_string(), matrix.len().to_string())];
    entries.extend(extra);
    write_manifest(&args.out, "bench", &entries)?;
    for r in &report.records {
        match &r.failure {
            None => println!(
                "{:<5} {:<5} {:<9} {:>10.4}s +/- {:<8.4} {:>8.3}Hz  evals={} repeats={}",
                r.integer_method,
                r.subpixel_method,
                r.mode,
                r.mean_seconds,
                r.stddev_seconds,
                r.frame_rate_hz,
                r.evaluations,
                r.repeats
            ),
            Some(e) => println!(
                "{:<5} {:<5} {:<9} FAILED: {e}",
                r.integer_method, r.subpixel_method, r.mode
            ),
        }
    }
    for r in report.ratios() {
        if let Some(v) = r.ratio {
            println!(
                "{} {} / {} = {v:.3} ({}; reference: {})",
                r.kind.name(),
                r.numerator,
                r.denominator,
                r.observed(),
                r.kind.reference_finding()
            );
        }
    }
    println!(
        "bench: {} cells, {} failed, report in {}",
        report.records.len(),
        report.failed_cells(),
        args.out.display()
    );
    Ok(report.failed_cells() == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

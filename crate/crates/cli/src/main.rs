//! `polysplat`: fit kernels, render, compare and benchmark splat scenes.
//!
//! Exit codes: 0 ok, 1 runtime or IO error, 2 usage error.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use polysplat::kernel_math::{extended_fit_range_xmax, FitError, KernelFile};
use polysplat::metrics::compare;
use polysplat::scene_io::{
    generate_synthetic_scene, load_cameras, load_ply, synthetic_cameras, write_cameras, write_ply,
    write_png, CameraEntry, SyntheticKind,
};
use polysplat::{
    count_pairs, culling_radius, fit_polynomial, render, CullingMode, FitConfig, KernelSpec,
    RasterConfig, SceneFile, StandardKernel, DEFAULT_EPSILON,
};

use report::{BenchRow, BenchSummary, CompareRow};

#[derive(Debug, Parser)]
#[command(
    name = "polysplat",
    version,
    about = "Splatting with ReLU-polynomial kernels"
)]
struct Cli {
    /// Worker threads for rendering (defaults to all cores).
    #[arg(long, global = true, env = "POLYSPLAT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a ReLU polynomial to exp(-x/2) and write a kernel file.
    Fit(FitArgs),
    /// Render one camera of a scene to PNG.
    Render(RenderArgs),
    /// Compare two kernel/culling configurations on one camera.
    Compare(CompareArgs),
    /// Render every camera and aggregate performance counters.
    Bench(BenchArgs),
    /// Write a synthetic scene and camera set.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    order: usize,
    /// Threshold, as a decimal or a fraction such as `1/255`.
    #[arg(long, default_value = "1/255", value_parser = parse_number)]
    epsilon: f64,
    /// Fit over the range needed by tight tile culling instead of the
    /// epsilon-cutoff range.
    #[arg(long)]
    extended_range: bool,
    #[arg(long, default_value_t = 16.0, requires = "extended_range")]
    tile_size: f64,
    /// Smallest screen-space standard deviation, in pixels.
    #[arg(long, default_value = "0.5477225575051661", value_parser = parse_number, requires = "extended_range")]
    s_min: f64,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Binary little-endian 3DGS PLY.
    #[arg(long)]
    scene: PathBuf,
    /// Camera JSON list.
    #[arg(long)]
    cameras: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    input: SceneArgs,
    /// Camera id; defaults to the first camera.
    #[arg(long)]
    camera_id: Option<i64>,
    /// `exp`, `f1`, `f2`, `f2p`, `f3` or a kernel file.
    #[arg(long, default_value = "exp")]
    kernel: String,
    /// `stp`, `zero` or `opacity`.
    #[arg(long, default_value = "stp")]
    culling: String,
    #[arg(long, default_value = "1/255", value_parser = parse_number)]
    epsilon: f64,
    #[arg(long)]
    clamp_before_blend: bool,
    #[arg(long)]
    out: PathBuf,
    /// Write performance counters as JSON.
    #[arg(long)]
    counters: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    input: SceneArgs,
    #[arg(long)]
    camera_id: Option<i64>,
    /// Reference configuration, `kernel,culling`.
    #[arg(long, default_value = "exp,stp")]
    a: String,
    /// Candidate configuration, `kernel,culling`.
    #[arg(long, required_unless_present = "ablate")]
    b: Option<String>,
    /// Compare every ablation cell against `--a`.
    #[arg(long)]
    ablate: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    input: SceneArgs,
    #[arg(long, default_value = "f1")]
    kernel: String,
    #[arg(long, default_value = "opacity")]
    culling: String,
    /// Configuration whose tile pairs form the ratio denominator.
    #[arg(long, default_value = "exp,stp")]
    baseline: String,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// `grid`, `random` or `overexposed-sky`.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of cameras on the orbit.
    #[arg(long = "camera-count", default_value_t = 4)]
    camera_count: usize,
    #[arg(long)]
    out_scene: PathBuf,
    #[arg(long)]
    out_cameras: PathBuf,
}

/// Kernel and culling cells of the ablation, reference first.
const ABLATION: [(&str, &str); 7] = [
    ("exp", "stp"),
    ("f1", "stp"),
    ("f1", "zero"),
    ("f1", "opacity"),
    ("f2p", "opacity"),
    ("f3", "stp"),
    ("f3", "opacity"),
];

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn parse_number(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{s}`"))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{s}`"))?;
            n / d
        }
        None => s
            .trim()
            .parse()
            .map_err(|_| format!("`{s}` is not a number"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn load_kernel(name: &str) -> CliResult<KernelSpec> {
    if let Some(k) = StandardKernel::from_label(name) {
        return Ok(k.spec());
    }
    let path = Path::new(name);
    if !path.exists() {
        return usage(format!(
            "unknown kernel `{name}`: expected exp, f1, f2, f2p, f3 or a kernel file"
        ));
    }
    Ok(KernelFile::read(path)
        .with_context(|| format!("reading kernel file {}", path.display()))?
        .kernel)
}

fn parse_culling(name: &str) -> CliResult<CullingMode> {
    match CullingMode::from_label(name) {
        Some(m) => Ok(m),
        None => usage(format!(
            "unknown culling `{name}`: expected stp, zero or opacity"
        )),
    }
}

fn raster_config(
    kernel: &str,
    culling: &str,
    epsilon: f64,
    threads: Option<usize>,
) -> CliResult<RasterConfig> {
    let kernel = load_kernel(kernel)?;
    let mode = parse_culling(culling)?;
    let mut cfg = RasterConfig::new(kernel, mode);
    cfg.epsilon = epsilon;
    cfg.threads = threads;
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    Ok(cfg)
}

fn split_pair(spec: &str) -> CliResult<(&str, &str)> {
    match spec.split_once(',') {
        Some((k, c)) => Ok((k.trim(), c.trim())),
        None => usage(format!("expected `kernel,culling`, got `{spec}`")),
    }
}

fn load_inputs(args: &SceneArgs) -> CliResult<(SceneFile, Vec<CameraEntry>)> {
    let scene =
        load_ply(&args.scene).with_context(|| format!("loading {}", args.scene.display()))?;
    let cameras = load_cameras(&args.cameras)
        .with_context(|| format!("loading {}", args.cameras.display()))?;
    Ok((scene, cameras))
}

fn pick_camera(cameras: &[CameraEntry], id: Option<i64>) -> CliResult<&CameraEntry> {
    match id {
        None => match cameras.first() {
            Some(c) => Ok(c),
            None => usage("camera file has no cameras"),
        },
        Some(id) => match cameras.iter().find(|c| c.id == id) {
            Some(c) => Ok(c),
            None => usage(format!("no camera with id {id}")),
        },
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_csv_file<T: serde::Serialize>(path: &Path, rows: &[T]) -> CliResult {
    let file =
        std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    report::write_csv(rows, file)?;
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> CliResult {
    let mut cfg = FitConfig::with_order(args.order);
    cfg.epsilon = args.epsilon;
    cfg.iterations = args.iterations;
    if args.extended_range {
        if !(args.tile_size > 0.0 && args.s_min > 0.0) {
            return usage("--tile-size and --s-min must be positive");
        }
        cfg.x_max_override = Some(extended_fit_range_xmax(
            args.tile_size,
            args.s_min,
            args.epsilon,
        ));
    }
    let result = match fit_polynomial(&cfg) {
        Ok(r) => r,
        Err(e @ FitError::InvalidConfig(_)) => return usage(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let root = result.kernel.first_root();
    let coeffs: Vec<String> = result
        .kernel
        .coeffs()
        .iter()
        .map(|c| format!("{c:.6}"))
        .collect();
    println!("order = {}", args.order);
    println!("coefficients = {}", coeffs.join(", "));
    println!("first_root = {root:.6}");
    println!("culling_radius_sigma = {:.6}", root.sqrt());
    if let Ok(b) = culling_radius(&result.kernel, 1.0, args.epsilon) {
        println!("epsilon_radius_sigma = {:.6}", b.radius_sigma);
    }
    println!("l1_loss = {:.6e}", result.final_l1_loss);
    println!("fit_range = {:.6}", result.range);
    if let Some(out) = &args.out {
        KernelFile::new(result.kernel, args.epsilon, result.range)
            .write(out)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn cmd_render(args: &RenderArgs, threads: Option<usize>) -> CliResult {
    let mut cfg = raster_config(&args.kernel, &args.culling, args.epsilon, threads)?;
    cfg.clamp_before_blend = args.clamp_before_blend;
    let (scene, cameras) = load_inputs(&args.input)?;
    let cam = pick_camera(&cameras, args.camera_id)?;
    let (fb, counters) = render(&scene.splats, scene.sh_degree, &cam.camera, &cfg)?;
    write_png(&fb, &args.out, cfg.background)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.counters {
        write_json(path, &counters)?;
    }
    println!("{}", serde_json::to_string(&counters)?);
    Ok(())
}

fn cmd_compare(args: &CompareArgs, threads: Option<usize>) -> CliResult {
    let a = split_pair(&args.a)?;
    let cells: Vec<(&str, &str)> = if args.ablate {
        ABLATION.to_vec()
    } else {
        vec![split_pair(args.b.as_deref().unwrap_or_default())?]
    };
    let cfg_a = raster_config(a.0, a.1, DEFAULT_EPSILON, threads)?;
    let cfgs = cells
        .iter()
        .map(|&(k, c)| raster_config(k, c, DEFAULT_EPSILON, threads))
        .collect::<CliResult<Vec<_>>>()?;
    let (scene, cameras) = load_inputs(&args.input)?;
    let cam = pick_camera(&cameras, args.camera_id)?;

    let mut rows = Vec::with_capacity(cells.len());
    for (cell, cfg_b) in cells.iter().zip(&cfgs) {
        let r = compare(&scene, &cam.camera, &cfg_a, cfg_b)?;
        rows.push(CompareRow::new(cam.id, a, *cell, &r));
    }
    print!("{}", report::compare_table(&rows));
    if let Some(path) = &args.csv {
        write_csv_file(path, &rows)?;
    }
    if let Some(path) = &args.json {
        write_json(path, &rows)?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs, threads: Option<usize>) -> CliResult {
    let cfg = raster_config(&args.kernel, &args.culling, DEFAULT_EPSILON, threads)?;
    let (bk, bc) = split_pair(&args.baseline)?;
    let baseline = raster_config(bk, bc, DEFAULT_EPSILON, threads)?;
    let (scene, cameras) = load_inputs(&args.input)?;
    if cameras.is_empty() {
        return usage("camera file has no cameras");
    }

    let mut rows = Vec::with_capacity(cameras.len());
    for entry in &cameras {
        let start = Instant::now();
        let (_, counters) = render(&scene.splats, scene.sh_degree, &entry.camera, &cfg)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let base = count_pairs(&scene.splats, scene.sh_degree, &entry.camera, &baseline)?;
        rows.push(BenchRow::new(entry.id, &counters, &base, wall_ms));
    }
    let summary = BenchSummary::from_rows(&rows).expect("nonempty sweep");

    println!("camera_id,pairs_coarse,pairs_tight,baseline_pairs_tight,fragments_blended,wall_ms");
    for r in &rows {
        println!(
            "{},{},{},{},{},{:.2}",
            r.camera_id,
            r.pairs_coarse,
            r.pairs_tight,
            r.baseline_pairs_tight,
            r.fragments_blended,
            r.wall_ms
        );
    }
    println!(
        "pairs_tight mean {:.1} min {} max {}",
        summary.pairs_tight_mean, summary.pairs_tight_min, summary.pairs_tight_max
    );
    println!(
        "pair_ratio {:.4} ({}/{} vs {})",
        summary.pair_ratio, args.kernel, args.culling, args.baseline
    );
    println!("wall_ms_total {:.1}", summary.wall_ms_total);

    if let Some(path) = &args.csv {
        write_csv_file(path, &rows)?;
    }
    if let Some(path) = &args.json {
        write_json(
            path,
            &serde_json::json!({ "cameras": rows, "summary": summary }),
        )?;
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> CliResult {
    let Some(kind) = SyntheticKind::from_label(&args.kind) else {
        return usage(format!(
            "unknown scene kind `{}`: expected grid, random or overexposed-sky",
            args.kind
        ));
    };
    let scene = generate_synthetic_scene(kind, args.seed);
    write_ply(&scene, &args.out_scene)
        .with_context(|| format!("writing {}", args.out_scene.display()))?;
    write_cameras(&synthetic_cameras(args.camera_count), &args.out_cameras)
        .with_context(|| format!("writing {}", args.out_cameras.display()))?;
    println!(
        "{} splats, {} cameras",
        scene.splats.len(),
        args.camera_count
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    if cli.threads == Some(0) {
        return usage("--threads must be positive");
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Render(a) => cmd_render(a, cli.threads),
        Command::Compare(a) => cmd_compare(a, cli.threads),
        Command::Bench(a) => cmd_bench(a, cli.threads),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

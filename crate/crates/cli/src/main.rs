use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use forge_core::camera::PinholeCamera;
use forge_core::dataset::{
    self, DatasetExample, ExampleFiles, GenConfig, DEPTH_FILE, INPUT_FILE, META_FILE, RESHADED_FILE, VALIDITY_FILE,
};
use forge_core::image_io::{read_mask_png, read_pfm, write_mask_png, write_pfm, HdrImage, LdrImage, Mask};
use forge_core::math::Vec3;
use forge_core::relocation::{forward_warp, load_pose};
use forge_core::scene::load_scene;
use forge_core::signal::{depth_to_disparity, frequency_encode, masked_l1, psnr};
use forge_core::tracer::{render, RenderSettings};

#[derive(Parser)]
#[command(name = "forge", version, about = "Reshading-aware path tracer and dataset tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scene file.
    Validate { scene: PathBuf },
    /// Render one input/reshaded pair.
    Render(RenderArgs),
    /// Generate a dataset from a directory of scenes.
    Dataset(DatasetArgs),
    /// Frequency-encode the disparity of a depth map into a stacked PFM.
    Encode {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR and masked L1 between two PFM images, clamped to [0, 1].
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Forward-warp an image into a novel camera.
    Warp {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        pose: PathBuf,
        #[arg(long)]
        fill: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Camera record JSON: position, look_at, up, fov_deg, width, height.
    #[arg(long)]
    camera: PathBuf,
    /// Novel offset "dx,dy,dz" in input-camera axes (right, up, backward).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    novel: Vec3,
    #[arg(long, default_value_t = 256)]
    spp: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = forge_core::tracer::DEFAULT_MAX_DEPTH)]
    max_depth: u32,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pairs: u32,
    /// Resolution as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_resolution, default_value = "256x256")]
    res: (usize, usize),
    #[arg(long, default_value_t = 256)]
    spp: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    radius_min: f32,
    #[arg(long, default_value_t = 0.3)]
    radius_max: f32,
    #[arg(long, default_value_t = forge_core::tracer::DEFAULT_MAX_DEPTH)]
    max_depth: u32,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>().map_err(|e| format!("bad component {p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected three finite numbers \"dx,dy,dz\", got {s:?}")),
    }
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
    let h: usize = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("resolution must be positive".into());
    }
    Ok((w, h))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("building worker pool")
}

fn cmd_validate(path: &Path) -> Result<()> {
    let scene = load_scene(path).with_context(|| format!("loading {}", path.display()))?;
    println!(
        "ok: {} materials, {} primitives, lights: {}",
        scene.materials.len(),
        scene.primitives.len(),
        if scene.has_light() { "yes" } else { "none" }
    );
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<()> {
    if args.spp == 0 {
        bail!("--spp must be positive");
    }
    let scene = load_scene(&args.scene).with_context(|| format!("loading {}", args.scene.display()))?;
    let text = fs::read_to_string(&args.camera).with_context(|| format!("reading {}", args.camera.display()))?;
    let camera: PinholeCamera = serde_json::from_str(&text).context("parsing camera record")?;
    let novel = camera.position() + camera.camera_to_world_offset(args.novel);
    let settings = RenderSettings { spp: args.spp, seed: args.seed, max_depth: args.max_depth };
    let out = pool(args.workers)?.install(|| render(&scene, &camera, novel, &settings));

    fs::create_dir_all(&args.out)?;
    write_pfm(&out.input, args.out.join(INPUT_FILE))?;
    write_pfm(&out.reshaded, args.out.join(RESHADED_FILE))?;
    write_pfm(&out.depth, args.out.join(DEPTH_FILE))?;
    write_mask_png(&out.validity, args.out.join(VALIDITY_FILE))?;
    let scene_id = args.scene.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let meta = DatasetExample {
        example_id: scene_id.clone(),
        scene_id,
        camera,
        novel_offset: args.novel,
        spp: args.spp,
        seed: args.seed,
        files: ExampleFiles {
            input: INPUT_FILE.into(),
            reshaded: RESHADED_FILE.into(),
            depth: DEPTH_FILE.into(),
            validity: VALIDITY_FILE.into(),
        },
    };
    fs::write(args.out.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    println!(
        "rendered {}x{} at {} spp; {} of {} pixels valid",
        camera.width(),
        camera.height(),
        args.spp,
        out.validity.count_true(),
        out.validity.data.len()
    );
    Ok(())
}

fn cmd_dataset(args: &DatasetArgs) -> Result<bool> {
    let cfg = GenConfig {
        pairs_per_scene: args.pairs,
        width: args.res.0,
        height: args.res.1,
        spp: args.spp,
        radius_range: [args.radius_min, args.radius_max],
        seed: args.seed,
        max_depth: args.max_depth,
        ..GenConfig::default()
    };
    cfg.validate()?;
    let scenes = dataset::load_scene_dir(&args.scenes)?;
    let summary = pool(args.workers)?.install(|| dataset::generate_dataset(&scenes, &cfg, &args.out))?;
    println!(
        "{} scenes: {} examples ({} generated, {} skipped), {} failed",
        scenes.len(),
        summary.examples.len(),
        summary.generated.len(),
        summary.skipped.len(),
        summary.failed.len()
    );
    for (id, err) in &summary.failed {
        eprintln!("failed {id}: {err}");
    }
    Ok(summary.failed.is_empty())
}

fn cmd_encode(depth: &Path, out: &Path) -> Result<()> {
    let depth = read_pfm(depth).with_context(|| format!("reading {}", depth.display()))?;
    let encoded = frequency_encode(&depth_to_disparity(&depth)?)?;
    write_pfm(&encoded.to_stacked(), out)?;
    Ok(())
}

fn clamp_to_ldr(img: &HdrImage) -> Result<LdrImage> {
    let data = img.data.iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect();
    Ok(LdrImage::from_data(img.width, img.height, img.channels, data)?)
}

#[derive(Serialize)]
struct Metrics {
    psnr: f64,
    masked_l1: f64,
}

fn cmd_metrics(a: &Path, b: &Path, mask: Option<&Path>) -> Result<()> {
    let a = clamp_to_ldr(&read_pfm(a).with_context(|| format!("reading {}", a.display()))?)?;
    let b = clamp_to_ldr(&read_pfm(b).with_context(|| format!("reading {}", b.display()))?)?;
    let mask = match mask {
        Some(p) => read_mask_png(p).with_context(|| format!("reading {}", p.display()))?,
        None => Mask::filled(a.width, a.height, true),
    };
    let m = Metrics { psnr: psnr(&a, &b)?, masked_l1: masked_l1(&a, &b, &mask)? };
    println!("{}", serde_json::to_string(&m)?);
    Ok(())
}

fn cmd_warp(image: &Path, depth: &Path, pose: &Path, fill: bool, out: &Path) -> Result<()> {
    let image = read_pfm(image).with_context(|| format!("reading {}", image.display()))?;
    let depth = read_pfm(depth).with_context(|| format!("reading {}", depth.display()))?;
    let pair = load_pose(pose).with_context(|| format!("reading {}", pose.display()))?;
    let result = forward_warp(&image, &depth, &pair, fill)?;
    fs::create_dir_all(out)?;
    write_pfm(&result.warped, out.join("warped.pfm"))?;
    write_mask_png(&result.holes, out.join("holes.png"))?;
    println!("{} hole pixels", result.holes.count_true());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { scene } => cmd_validate(&scene)?,
        Command::Render(args) => cmd_render(&args)?,
        Command::Dataset(args) => return cmd_dataset(&args),
        Command::Encode { depth, out } => cmd_encode(&depth, &out)?,
        Command::Metrics { a, b, mask } => cmd_metrics(&a, &b, mask.as_deref())?,
        Command::Warp { image, depth, pose, fill, out } => cmd_warp(&image, &depth, &pose, fill, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_offsets() {
        assert_eq!(parse_vec3("0.1,-0.2, 3").unwrap(), Vec3::new(0.1, -0.2, 3.0));
        assert!(parse_vec3("1,2").is_err());
        assert!(parse_vec3("1,2,nan").is_err());
    }

    #[test]
    fn parses_resolutions() {
        assert_eq!(parse_resolution("64x32").unwrap(), (64, 32));
        assert!(parse_resolution("0x4").is_err());
        assert!(parse_resolution("64").is_err());
    }
}

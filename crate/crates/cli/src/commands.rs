use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use foldsplat_core::edit::{apply_edits, EditSpec};
use foldsplat_core::eval::{evaluate as run_evaluation, Ablation};
use foldsplat_core::gaussian::Mode;
use foldsplat_core::io::{
    load_frame_stack, load_scene, read_volume, save_scene, volume_to_frames, write_frame_stack, write_pgm, BitDepth,
};
use foldsplat_core::mesh::{
    extract_mesh, read_obj, sample_surface, surface_distances, write_obj, MeshOptions,
};
use foldsplat_core::metrics::{format_table, score_frame, MetricReport};
use foldsplat_core::phantom::{DiskPhantom, SpherePhantom};
use foldsplat_core::train::{train_with_observer, TrainConfig};
use foldsplat_core::{render_frame, FrameStack};
use serde::Serialize;

use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{
    ConfigArgs, Depth, EditArgs, EvaluateArgs, FramesArgs, InterpolateArgs, MeshArgs, MetricsArgs, PhantomArgs,
    PhantomKind, RenderArgs, TrainArgs,
};

/// Bad flags or settings; exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 2 for usage errors, 4 for numerical failures, 3 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(core) = cause.downcast_ref::<foldsplat_core::Error>() {
            if core.is_numerical() {
                return 4;
            }
            if matches!(core, foldsplat_core::Error::InvalidArgument(_)) {
                return 2;
            }
            return 3;
        }
    }
    3
}

/// The error chain on one line, skipping causes already quoted by their parent.
pub fn describe(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

impl From<Depth> for BitDepth {
    fn from(d: Depth) -> Self {
        match d {
            Depth::Eight => BitDepth::Eight,
            Depth::Sixteen => BitDepth::Sixteen,
        }
    }
}

/// Loads the stack and lists the files it came from.
fn load_frames(args: &FramesArgs) -> Result<(FrameStack, Vec<PathBuf>)> {
    if args.frames.is_file() {
        let vol = read_volume(&args.frames)?;
        return Ok((volume_to_frames(&vol)?, vec![args.frames.clone()]));
    }
    let stack = load_frame_stack(&args.frames, &args.pattern)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&args.frames)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| foldsplat_core::io::frames::wildcard_match(&args.pattern, n))
        })
        .collect();
    files.sort();
    Ok((stack, files))
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(args: &ConfigArgs) -> Result<TrainConfig> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    let mut from_file = TrainConfig::default();
    from_file
        .apply_text(&text)
        .map_err(|e| usage(format!("config file: {e}")))?;
    let mode: Mode = match &args.mode {
        Some(m) => m.parse().map_err(usage)?,
        None => from_file.mode,
    };
    let mut config = TrainConfig::for_mode(mode);
    config
        .apply_text(&text)
        .map_err(|e| usage(format!("config file: {e}")))?;
    config.mode = mode;
    if let Some(n) = args.iterations {
        config = config.with_iterations(n);
    }
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(n) = args.gaussians {
        config.initial_gaussian_count = n;
    }
    if let Some(n) = args.max_gaussians {
        config.max_gaussians = n;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got `{kv}`")))?;
        config.set(k.trim(), v.trim()).map_err(|e| usage(e.to_string()))?;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_json_lines<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn phantom(args: PhantomArgs) -> Result<()> {
    if args.frames < 2 || args.size == 0 {
        bail!(usage("phantoms need at least 2 frames and a positive size"));
    }
    let mut manifest = ManifestBuilder::new("phantom");
    let stack = match args.kind {
        PhantomKind::Translating | PhantomKind::Sinusoidal => {
            let mut p = match args.kind {
                PhantomKind::Translating => DiskPhantom::translating(args.frames, args.size),
                _ => DiskPhantom::sinusoidal(args.frames, args.size),
            };
            p.noise = args.noise;
            p.seed = args.seed;
            manifest.config(serde_json::json!({
                "kind": format!("{:?}", args.kind).to_lowercase(),
                "frames": p.frames,
                "size": p.size,
                "radius": p.radius,
                "intensity": p.intensity,
                "noise": p.noise,
            }))?;
            p.stack()?
        }
        PhantomKind::Sphere => {
            let p = SpherePhantom::new(args.frames, args.size);
            manifest.config(serde_json::json!({
                "kind": "sphere",
                "frames": p.frames,
                "size": p.size,
                "center": p.center,
                "radius": p.radius,
                "slice_spacing": p.slice_spacing,
            }))?;
            p.stack()?
        }
    };
    manifest.seed(args.seed);
    let written = write_frame_stack(&stack, &args.out, args.depth.into())?;
    let outputs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    manifest.write(&manifest_path(&args.out), &outputs)?;
    println!("wrote {} frames to {}", written.len(), args.out.display());
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let config = resolve_config(&args.config)?;
    let mut manifest = ManifestBuilder::new("train");
    manifest.config(&config)?.seed(config.rng_seed);
    let (stack, files) = load_frames(&args.input)?;
    manifest.inputs(&files)?;
    if config.mode == Mode::Mesh && !stack.is_binary() {
        eprintln!(
            "warning: mesh mode disables in-between frame regularization, and the input frames look non-binary \
             (expected 0/1 masks)"
        );
    }
    let (w, h) = stack.dims();
    eprintln!(
        "training {} frames of {w}x{h}, mode {}, {} iterations",
        stack.len(),
        config.mode.as_str(),
        config.iterations
    );
    let every = (config.iterations / 10).max(1);
    let outcome = train_with_observer(&stack, &config, |rec| {
        if (rec.iteration + 1) % every == 0 {
            eprintln!(
                "  iteration {:>6}  loss {:.5}  gaussians {}",
                rec.iteration + 1,
                rec.loss.total,
                rec.gaussians
            );
        }
    })?;
    save_scene(&outcome.scene, &args.out)?;
    let log = args.log.clone().unwrap_or_else(|| with_suffix(&args.out, ".log.jsonl"));
    write_json_lines(&log, &outcome.log)?;
    manifest.write(&manifest_path(&args.out), &[&args.out, &log])?;
    println!("wrote {} ({} gaussians)", args.out.display(), outcome.scene.len());
    Ok(())
}

fn parse_ablations(names: &[String]) -> Result<Vec<Ablation>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(Ablation::ALL);
            continue;
        }
        out.push(name.parse::<Ablation>().map_err(usage)?);
    }
    // Always train the full model so every variant has a reference row.
    if !out.contains(&Ablation::Full) {
        out.insert(0, Ablation::Full);
    }
    let mut seen = Vec::new();
    out.retain(|a| {
        let fresh = !seen.contains(a);
        seen.push(*a);
        fresh
    });
    Ok(out)
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let config = resolve_config(&args.config)?;
    let ablations = parse_ablations(&args.ablate)?;
    let mut manifest = ManifestBuilder::new("evaluate");
    manifest.config(serde_json::json!({
        "train": &config,
        "stride": args.stride,
        "ablations": ablations.iter().map(|a| a.label()).collect::<Vec<_>>(),
    }))?;
    manifest.seed(config.rng_seed);
    let (stack, files) = load_frames(&args.input)?;
    manifest.inputs(&files)?;
    if args.stride < 2 || args.stride >= stack.len() {
        bail!(usage(format!(
            "stride {} must be at least 2 and below the frame count {}",
            args.stride,
            stack.len()
        )));
    }
    let ev = run_evaluation(&stack, args.stride, &config, &ablations)?;
    let reports = ev.reports();
    print!(
        "{}",
        format_table(&format!("leave-frame-out, stride {}", args.stride), &reports)
    );
    if let Some(out) = &args.out {
        let text: String = reports.iter().map(MetricReport::to_json_lines).collect();
        fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
        manifest.write(&manifest_path(out), &[out])?;
    }
    Ok(())
}

fn output_dims(scene: &foldsplat_core::Scene, width: Option<usize>, height: Option<usize>) -> (usize, usize) {
    (width.unwrap_or(scene.width), height.unwrap_or(scene.height))
}

pub fn interpolate(args: InterpolateArgs) -> Result<()> {
    if args.factor == 0 {
        bail!(usage("--factor must be positive"));
    }
    let mut manifest = ManifestBuilder::new("interpolate");
    manifest.input(&args.scene)?;
    let scene = load_scene(&args.scene)?;
    let (w, h) = output_dims(&scene, args.width, args.height);
    let count = (scene.frame_count.max(2) - 1) * args.factor + 1;
    manifest.config(serde_json::json!({"factor": args.factor, "width": w, "height": h, "frames": count}))?;
    let frames = (0..count)
        .map(|j| render_frame(&scene, j as f64 / (count - 1) as f64, w, h))
        .collect::<foldsplat_core::Result<Vec<_>>>()?;
    let stack = FrameStack::from_frames(frames)?;
    let written = write_frame_stack(&stack, &args.out, args.depth.into())?;
    let outputs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    manifest.write(&manifest_path(&args.out), &outputs)?;
    println!("wrote {count} frames to {}", args.out.display());
    Ok(())
}

pub fn render(args: RenderArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.t) {
        bail!(usage(format!("--t {} outside [0, 1]", args.t)));
    }
    let mut manifest = ManifestBuilder::new("render");
    manifest.input(&args.scene)?;
    let scene = load_scene(&args.scene)?;
    let (w, h) = output_dims(&scene, args.width, args.height);
    manifest.config(serde_json::json!({"t": args.t, "width": w, "height": h}))?;
    let img = render_frame(&scene, args.t, w, h)?;
    write_pgm(&img, &args.out, args.depth.into())?;
    manifest.write(&manifest_path(&args.out), &[&args.out])?;
    println!("wrote {} ({w}x{h})", args.out.display());
    Ok(())
}

pub fn mesh(args: MeshArgs) -> Result<()> {
    let opts = MeshOptions {
        upsample: args.upsample,
        iso: args.iso,
        binarize: args.binarize,
        slice_spacing: args.slice_spacing,
    };
    let mut manifest = ManifestBuilder::new("mesh");
    manifest.config(opts)?.input(&args.scene)?;
    let scene = load_scene(&args.scene)?;
    let mesh = extract_mesh(&scene, &opts)?;
    write_obj(&mesh, &args.out)?;
    manifest.write(&manifest_path(&args.out), &[&args.out])?;
    println!(
        "wrote {}: {} vertices, {} triangles, watertight {}, euler characteristic {}",
        args.out.display(),
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.is_watertight(),
        mesh.euler_characteristic()
    );
    Ok(())
}

pub fn metrics(args: MetricsArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("metrics");
    let rows: Vec<serde_json::Value> = if let Some(paths) = &args.mesh {
        manifest
            .config(serde_json::json!({"samples": args.samples}))?
            .seed(args.seed)
            .inputs(paths)?;
        let a = read_obj(&paths[0])?;
        let b = read_obj(&paths[1])?;
        let pa = sample_surface(&a, args.samples, args.seed)?;
        let pb = sample_surface(&b, args.samples, args.seed)?;
        let d = surface_distances(&pa, &pb)?;
        println!(
            "chamfer {:.6}  hausdorff {:.6}  hd95 {:.6}",
            d.chamfer, d.hausdorff, d.hd95
        );
        vec![serde_json::to_value(d)?]
    } else {
        let paths = args.frames.as_ref().expect("clap requires one input kind");
        let load = |dir: &PathBuf| {
            load_frames(&FramesArgs {
                frames: dir.clone(),
                pattern: args.pattern.clone(),
            })
        };
        let (a, files_a) = load(&paths[0])?;
        let (b, files_b) = load(&paths[1])?;
        manifest
            .config(serde_json::json!({"threshold": args.threshold}))?
            .inputs(files_a.iter().chain(&files_b))?;
        if a.len() != b.len() {
            bail!("stacks differ in length: {} vs {}", a.len(), b.len());
        }
        let mut report = MetricReport::new(paths[0].display().to_string(), args.threshold);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            report.frames.push(score_frame(fa, fb, args.threshold)?);
        }
        print!("{}", format_table("frame metrics", std::slice::from_ref(&report)));
        report
            .to_json_lines()
            .lines()
            .map(serde_json::from_str)
            .collect::<serde_json::Result<_>>()?
    };
    if let Some(out) = &args.out {
        write_json_lines(out, &rows)?;
        manifest.write(&manifest_path(out), &[out])?;
    }
    Ok(())
}

pub fn edit(args: EditArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("edit");
    manifest.inputs([&args.scene, &args.spec])?;
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: EditSpec = text.parse()?;
    manifest.config(serde_json::json!({"rules": spec.to_string()}))?;
    let scene = load_scene(&args.scene)?;
    let edited = apply_edits(&scene, &spec)?;
    save_scene(&edited, &args.out)?;
    manifest.write(&manifest_path(&args.out), &[&args.out])?;
    println!("applied {} rules, wrote {}", spec.rules.len(), args.out.display());
    Ok(())
}

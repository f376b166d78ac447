//! The `mfsr` command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mfsr_core::degrade::{default_ad_shifts, degrade_scene, ImagingModel, SceneStack};
use mfsr_core::enhance::{EnhancerKind, EnhancerSpec, Enhancer, Interpolator};
use mfsr_core::evolve::{self, Evaluator, GaConfig, Genome, History};
use mfsr_core::metrics::MetricSet;
use mfsr_core::pipeline::{self, Fused, PipelineConfig, PreparedScene};
use mfsr_core::refine::RefineParams;
use mfsr_core::{rng, Image, Shift};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::external::ExternalEnhancer;
use crate::formats::{
    json_hash, load_scene, read_json, read_shifts, save_scene, scene_inputs, sha256_file, to_json_pretty, write_json,
    Provenance, SCENE_FILE,
};
use crate::io::{read_image, write_counts, write_image};

#[derive(Debug, Parser)]
#[command(name = "mfsr", version, about = "Multiple-image super-resolution toolkit")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize low-resolution scene directories from HR images.
    Degrade(DegradeArgs),
    /// Estimate per-frame shifts of a scene.
    Register(RegisterArgs),
    /// Reconstruct a scene.
    Reconstruct(ReconstructArgs),
    /// Tune the refinement parameters with the genetic algorithm.
    Train(TrainArgs),
    /// Score reconstructions against references.
    Evaluate(EvaluateArgs),
    /// Degrade, reconstruct and evaluate one HR image.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Imaging model JSON; an empty shift list is filled with random shifts.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Frames per scene when the model does not list shifts.
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// An HR image or a directory of them.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    pub scene: PathBuf,
    /// Write the shifts here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EnhancerArgs {
    /// Built-in enhancer.
    #[arg(long, value_parser = parse_kind, default_value = "bicubic")]
    pub enhancer: EnhancerKind,
    /// Command line of an external ENH/1 enhancer (implies `--enhancer external`).
    #[arg(long)]
    pub enhancer_command: Option<String>,
    /// Fuse the original frames directly, without enhancement.
    #[arg(long)]
    pub skip_enhancer: bool,
    /// Register the enhanced frames instead of the originals.
    #[arg(long)]
    pub register_enhanced: bool,
}

fn parse_kind(s: &str) -> std::result::Result<EnhancerKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "expected identity_nearest, bilinear, bicubic, lanczos3 or external".to_string())
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub enhancer: EnhancerArgs,
    /// Refinement parameters JSON (default: the untrained prior).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Stop after fusion.
    #[arg(long)]
    pub skip_evoim: bool,
    /// Shifts JSON (LR pixels) used instead of registration.
    #[arg(long)]
    pub shifts_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of scene directories, each with a reference image.
    pub train_dir: PathBuf,
    #[arg(long)]
    pub out_params: PathBuf,
    /// History JSON (default: next to the parameters).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub ga_config: Option<PathBuf>,
    /// Non-evolved settings (iterations, BTV radius and decay).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Continue from a previous history file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub enhancer: EnhancerArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Pairs manifest JSON.
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// HR image.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match cli.command {
        Command::Degrade(a) => cmd_degrade(&a).map(|_| ()),
        Command::Register(a) => cmd_register(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a.scene, &a.out, &a.run, None).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Pipeline(a) => cmd_pipeline(&a),
    }
}

fn load_model(m: &ModelArgs, seed: u64) -> Result<ImagingModel> {
    let mut model = match &m.config {
        Some(p) => read_json::<ImagingModel>(p)?,
        None => ImagingModel::ad_default(m.frames, seed),
    };
    if model.shifts.is_empty() {
        model.shifts = default_ad_shifts(m.frames, model.r, seed);
    }
    model.validate().map_err(|e| Error::Usage(format!("imaging model: {e}")))?;
    Ok(model)
}

fn image_files(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| ["png", "pgm"].contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Usage(format!("{}: no PNG or PGM images", input.display())));
    }
    Ok(files)
}

/// Degrades one HR image into `dir`.
pub fn degrade_one(hr_path: &Path, dir: &Path, m: &ModelArgs, seed: u64) -> Result<SceneStack> {
    let hr = read_image(hr_path)?;
    let model = load_model(m, seed)?;
    let stack = degrade_scene(&hr, &model, seed)?;
    let prov = Provenance {
        seed: Some(seed),
        model: Some(model),
        source: hr_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        source_hash: Some(sha256_file(hr_path)?),
    };
    save_scene(dir, &stack, &prov)?;
    Ok(stack)
}

pub fn cmd_degrade(a: &DegradeArgs) -> Result<Vec<PathBuf>> {
    let files = image_files(&a.input)?;
    let single = a.input.is_file();
    files
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("scene{i}"));
            let dir = if single { a.out.clone() } else { a.out.join(stem) };
            let seed = if single { a.model.seed } else { rng::derive_seed(a.model.seed, &[i as u64]) };
            degrade_one(f, &dir, &a.model, seed)?;
            Ok(dir)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ShiftsReport {
    shifts: Vec<Shift>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_error: Option<f64>,
}

fn cmd_register(a: &RegisterArgs) -> Result<()> {
    let (stack, _) = load_scene(&a.scene)?;
    let shifts = mfsr_core::register::register_stack(&stack)?;
    let mean_error = stack.true_shifts.as_ref().map(|t| {
        let errs: Vec<f64> = shifts.iter().zip(t).skip(1).map(|(s, t)| s.distance(*t)).collect();
        errs.iter().sum::<f64>() / errs.len().max(1) as f64
    });
    let report = ShiftsReport { shifts, mean_error };
    match &a.out {
        Some(p) => write_json(p, &report),
        None => {
            print!("{}", to_json_pretty(&report));
            Ok(())
        }
    }
}

/// Built-in or external enhancer, or none.
pub fn make_enhancer(e: &EnhancerArgs) -> Result<Option<Box<dyn Enhancer>>> {
    if e.skip_enhancer {
        if e.register_enhanced {
            return Err(Error::Usage("--register-enhanced needs an enhancer".into()));
        }
        return Ok(None);
    }
    let spec = enhancer_spec(e).expect("not skipped");
    spec.validate().map_err(|err| Error::Usage(err.to_string()))?;
    if spec.kind == EnhancerKind::External {
        let ext = ExternalEnhancer::spawn(spec.external_command.as_deref().expect("validated"), spec.scale)?;
        if !ext.deterministic() {
            return Err(Error::Protocol("external enhancer declares itself nondeterministic".into()));
        }
        return Ok(Some(Box::new(ext)));
    }
    Ok(Some(Box::new(Interpolator::from_spec(&spec)?)))
}

pub fn as_dyn(e: &mut Option<Box<dyn Enhancer>>) -> Option<&mut dyn Enhancer> {
    e.as_deref_mut().map(|e| e as &mut dyn Enhancer)
}

fn enhancer_spec(e: &EnhancerArgs) -> Option<EnhancerSpec> {
    if e.skip_enhancer {
        return None;
    }
    Some(match &e.enhancer_command {
        Some(cmd) => EnhancerSpec { kind: EnhancerKind::External, scale: 2, external_command: Some(cmd.clone()) },
        None => EnhancerSpec::builtin(e.enhancer),
    })
}

fn load_params(p: Option<&Path>) -> Result<RefineParams> {
    match p {
        Some(p) => read_json(p),
        None => Ok(RefineParams::default()),
    }
}

/// Provenance and timings of one reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub enhancer: Option<EnhancerSpec>,
    pub register_enhanced: bool,
    pub skip_evoim: bool,
    pub shifts_source: String,
    /// Shifts used, in low-resolution pixels.
    pub shifts: Vec<Shift>,
    pub params: RefineParams,
    pub params_hash: String,
    pub input_hashes: BTreeMap<String, String>,
    pub output: String,
    pub output_size: [usize; 2],
    pub output_hash: String,
    /// Wall time per stage in milliseconds; the only field that varies between identical runs.
    pub timings_ms: BTreeMap<String, f64>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the stages on a loaded stack, timing each.
pub fn reconstruct_stack(
    stack: &SceneStack,
    enhancer: Option<&mut dyn Enhancer>,
    params: &RefineParams,
    cfg: &PipelineConfig,
    timings: &mut BTreeMap<String, f64>,
) -> mfsr_core::Result<(Image, Fused)> {
    let t = Instant::now();
    let (enhanced, scale) = match enhancer {
        Some(e) => {
            let s = e.scale();
            (Some(mfsr_core::enhance::enhance_stack(e, &stack.frames)?), s)
        }
        None => (None, 1),
    };
    timings.insert("enhance".into(), ms(t));
    let t = Instant::now();
    let shifts = pipeline::estimate_shifts(&stack.frames, enhanced.as_deref(), scale, cfg)?;
    timings.insert("register".into(), ms(t));
    let t = Instant::now();
    let grid = enhanced.as_deref().unwrap_or(&stack.frames);
    let fused_shifts = mfsr_core::fuse::scale_shifts_by(&shifts, scale as f64);
    let (x0, counts) = mfsr_core::fuse::median_shift_and_add(grid, &fused_shifts, cfg.fuse_factor)?;
    timings.insert("fuse".into(), ms(t));
    let fused = Fused { shifts, enhance_scale: scale, x0, counts };
    let t = Instant::now();
    let out = pipeline::finish(&fused, params, cfg)?;
    timings.insert("refine".into(), ms(t));
    Ok((out, fused))
}

pub fn cmd_reconstruct(scene: &Path, out: &Path, a: &RunArgs, seed: Option<u64>) -> Result<RunRecord> {
    let (stack, manifest) = load_scene(scene)?;
    let params = load_params(a.params.as_deref())?;
    params.validate().map_err(|e| Error::Usage(format!("params: {e}")))?;
    let shifts = a.shifts_file.as_deref().map(read_shifts).transpose()?;
    let shifts_source = match (&shifts, a.enhancer.register_enhanced) {
        (Some(_), _) => "file",
        (None, true) => "registered_enhanced",
        (None, false) => "registered",
    };
    let cfg = PipelineConfig {
        register_enhanced: a.enhancer.register_enhanced,
        skip_refine: a.skip_evoim,
        shifts,
        ..Default::default()
    };
    let mut enhancer = make_enhancer(&a.enhancer)?;
    let mut timings = BTreeMap::new();
    let total = Instant::now();
    let (sr, fused) = reconstruct_stack(&stack, as_dyn(&mut enhancer), &params, &cfg, &mut timings)
        .map_err(|e| annotate(e, scene))?;
    timings.insert("total".into(), ms(total));
    drop(enhancer);

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let sr_path = out.join("sr.png");
    write_image(&sr_path, &sr)?;
    write_image(&out.join("x0.png"), &fused.x0)?;
    write_counts(&out.join("counts.png"), &fused.counts)?;

    let mut input_hashes = BTreeMap::new();
    for p in scene_inputs(scene, &manifest) {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        input_hashes.insert(name, sha256_file(&p)?);
    }
    if let Some(p) = &a.params {
        input_hashes.insert("params".into(), sha256_file(p)?);
    }
    if let Some(p) = &a.shifts_file {
        input_hashes.insert("shifts_file".into(), sha256_file(p)?);
    }
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: seed.or(manifest.seed),
        enhancer: enhancer_spec(&a.enhancer),
        register_enhanced: a.enhancer.register_enhanced,
        skip_evoim: a.skip_evoim,
        shifts_source: shifts_source.into(),
        shifts: fused.shifts.clone(),
        params_hash: json_hash(&params),
        params,
        input_hashes,
        output: "sr.png".into(),
        output_size: [sr.width(), sr.height()],
        output_hash: sha256_file(&sr_path)?,
        timings_ms: timings,
    };
    write_json(&out.join("run.json"), &record)?;
    Ok(record)
}

fn annotate(e: mfsr_core::Error, scene: &Path) -> Error {
    match e {
        mfsr_core::Error::InvalidArgument(m) | mfsr_core::Error::DimensionMismatch(m) => {
            Error::Usage(format!("{}: {m}", scene.display()))
        }
        other => Error::Core(other),
    }
}

/// Fitness over a prepared training set; genomes are scored in parallel.
pub struct TrainingSet {
    pub scenes: Vec<PreparedScene>,
    pub base: RefineParams,
}

impl TrainingSet {
    pub fn fitness(&self, g: &Genome) -> f64 {
        let p = g.to_params(&self.base);
        let scores: Vec<f64> = self.scenes.iter().map(|s| s.psnr_hf(&p).unwrap_or(f64::NAN)).collect();
        pipeline::mean_score(&scores).unwrap_or(f64::NAN)
    }
}

impl Evaluator for TrainingSet {
    fn evaluate(&self, genomes: &[Genome]) -> Vec<f64> {
        genomes.par_iter().map(|g| self.fitness(g)).collect()
    }
}

fn scene_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SCENE_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Usage(format!("{}: no scene directories", dir.display())));
    }
    Ok(dirs)
}

/// Loads and prepares every training scene; registration failures skip the scene.
pub fn prepare_training(dirs: &[PathBuf], e: &EnhancerArgs) -> Result<Vec<PreparedScene>> {
    let mut loaded = Vec::new();
    let mut missing = Vec::new();
    for d in dirs {
        let (stack, _) = load_scene(d)?;
        if stack.reference_hr.is_none() {
            missing.push(d.display().to_string());
        }
        loaded.push((d, stack));
    }
    if !missing.is_empty() {
        return Err(Error::Usage(format!("scenes without a reference image: {}", missing.join(", "))));
    }
    let cfg = PipelineConfig { register_enhanced: e.register_enhanced, ..Default::default() };
    let mut scenes = Vec::new();
    for (d, stack) in loaded {
        let mut enhancer = make_enhancer(e)?;
        match PreparedScene::prepare(&stack, as_dyn(&mut enhancer), &cfg) {
            Ok(s) => scenes.push(s),
            Err(err @ (mfsr_core::Error::NoRegistrableContent | mfsr_core::Error::Frame { .. })) => {
                eprintln!("warning: skipping {}: {err}", d.display());
            }
            Err(err) => return Err(err.into()),
        }
    }
    if scenes.is_empty() {
        return Err(Error::Core(mfsr_core::Error::InvalidArgument("no usable training scenes".into())));
    }
    Ok(scenes)
}

pub fn cmd_train(a: &TrainArgs) -> Result<History> {
    let cfg: GaConfig = match &a.ga_config {
        Some(p) => read_json(p)?,
        None => GaConfig::default(),
    };
    cfg.validate().map_err(|e| Error::Usage(format!("GA config: {e}")))?;
    let base = load_params(a.params.as_deref())?;
    let set = TrainingSet { scenes: prepare_training(&scene_dirs(&a.train_dir)?, &a.enhancer)?, base };
    let history = match &a.resume {
        Some(p) => {
            let prior: History = read_json(p)?;
            eprintln!("resuming at generation {}", prior.next_generation());
            evolve::resume(&set, &cfg, prior, cfg.generations)
        }
        None => evolve::evolve(&set, &cfg, a.seed),
    }
    .map_err(|e| Error::Usage(e.to_string()))?;
    for g in &history.generations {
        eprintln!("generation {:3}: best {:.4} mean {:.4} best-ever {:.4}", g.generation, g.best, g.mean, g.best_ever);
    }
    if let Some(dir) = a.out_params.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_json(&a.out_params, &history.best.to_params(&set.base))?;
    let hist_path = a.history.clone().unwrap_or_else(|| a.out_params.with_extension("history.json"));
    write_json(&hist_path, &history)?;
    Ok(history)
}

/// One entry of a pairs manifest; paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub pair_id: String,
    #[serde(default)]
    pub method: Option<String>,
    pub reference: PathBuf,
    pub candidate: PathBuf,
    /// Wall time of the method, reported as a column when present.
    #[serde(default)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsManifest {
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair_id: String,
    pub method: String,
    #[serde(flatten)]
    pub metrics: MetricSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub count: usize,
    #[serde(flatten)]
    pub metrics: MetricSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub pair_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub pairs: Vec<PairScore>,
    pub aggregate: Vec<MethodRow>,
    pub errors: Vec<PairError>,
}

/// Reference-sized candidate: exact size as is, exactly twice the size downscaled with bicubic.
pub fn comparable(candidate: &Image, reference: &Image) -> Result<Image> {
    let (rw, rh) = reference.dims();
    match candidate.dims() {
        d if d == (rw, rh) => Ok(candidate.clone()),
        (w, h) if (w, h) == (2 * rw, 2 * rh) => Ok(pipeline::to_reference_size(candidate, reference)),
        (w, h) => Err(Error::Core(mfsr_core::Error::DimensionMismatch(format!(
            "candidate {w}x{h} vs reference {rw}x{rh}"
        )))),
    }
}

fn score_pair(base: &Path, p: &Pair) -> Result<PairScore> {
    let reference = read_image(&base.join(&p.reference))?;
    let candidate = read_image(&base.join(&p.candidate))?;
    let metrics = MetricSet::compute(&reference, &comparable(&candidate, &reference)?)?;
    Ok(PairScore {
        pair_id: p.pair_id.clone(),
        method: p.method.clone().unwrap_or_else(|| "default".into()),
        metrics,
        seconds: p.seconds,
    })
}

/// Per-method means, in order of first appearance.
pub fn aggregate(scores: &[PairScore]) -> Vec<MethodRow> {
    let mut order: Vec<String> = Vec::new();
    for s in scores {
        if !order.contains(&s.method) {
            order.push(s.method.clone());
        }
    }
    order
        .into_iter()
        .map(|method| {
            let rows: Vec<&PairScore> = scores.iter().filter(|s| s.method == method).collect();
            let sets: Vec<MetricSet> = rows.iter().map(|s| s.metrics).collect();
            let times: Vec<f64> = rows.iter().filter_map(|s| s.seconds).collect();
            MethodRow {
                method,
                count: rows.len(),
                metrics: MetricSet::mean(&sets).expect("non-empty group"),
                seconds: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
            }
        })
        .collect()
}

pub fn format_table(rows: &[MethodRow]) -> String {
    let mut s = format!(
        "{:<24} {:>4} {:>8} {:>8} {:>8} {:>7} {:>7} {:>8} {:>7} {:>9}\n",
        "method", "n", "PSNR", "PSNR_HF", "PSNR_LS", "SSIM", "UIQI", "IFC", "VIF", "time [s]"
    );
    for r in rows {
        let m = &r.metrics;
        let t = r.seconds.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        s += &format!(
            "{:<24} {:>4} {:>8.3} {:>8.3} {:>8.3} {:>7.4} {:>7.4} {:>8.2} {:>7.4} {:>9}\n",
            r.method, r.count, m.psnr, m.psnr_hf, m.psnr_ls, m.ssim, m.uiqi, m.ifc, m.vif, t
        );
    }
    s
}

pub fn evaluate_pairs(base: &Path, manifest: &PairsManifest) -> EvaluationReport {
    let results: Vec<(String, Result<PairScore>)> =
        manifest.pairs.par_iter().map(|p| (p.pair_id.clone(), score_pair(base, p))).collect();
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (id, r) in results {
        match r {
            Ok(s) => pairs.push(s),
            Err(e) => errors.push(PairError { pair_id: id, error: e.to_string() }),
        }
    }
    EvaluationReport { aggregate: aggregate(&pairs), pairs, errors }
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<EvaluationReport> {
    let manifest: PairsManifest = read_json(&a.pairs)?;
    let base = a.pairs.parent().unwrap_or(Path::new("."));
    let report = evaluate_pairs(base, &manifest);
    for e in &report.errors {
        eprintln!("warning: pair {}: {}", e.pair_id, e.error);
    }
    print!("{}", format_table(&report.aggregate));
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }
    if report.pairs.is_empty() && !manifest.pairs.is_empty() {
        return Err(Error::Core(mfsr_core::Error::InvalidArgument("no pair could be evaluated".into())));
    }
    Ok(report)
}

fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let scene = a.out.join("scene");
    let stack = degrade_one(&a.input, &scene, &a.model, a.model.seed)?;
    let recon = a.out.join("reconstruction");
    let t = Instant::now();
    cmd_reconstruct(&scene, &recon, &a.run, Some(a.model.seed))?;
    let sr_seconds = t.elapsed().as_secs_f64();

    let baselines = a.out.join("baselines");
    fs::create_dir_all(&baselines).map_err(|e| Error::io(&baselines, e))?;
    let t = Instant::now();
    let single = pipeline::single_frame_baseline(&stack, reference_factor(&stack))?;
    let single_seconds = t.elapsed().as_secs_f64();
    write_image(&baselines.join("single_frame_bicubic.png"), &single)?;

    let mut pairs = vec![
        Pair {
            pair_id: "sr".into(),
            method: Some("pipeline".into()),
            reference: "scene/reference.png".into(),
            candidate: "reconstruction/sr.png".into(),
            seconds: Some(sr_seconds),
        },
        Pair {
            pair_id: "single_frame_bicubic".into(),
            method: Some("single_frame_bicubic".into()),
            reference: "scene/reference.png".into(),
            candidate: "baselines/single_frame_bicubic.png".into(),
            seconds: Some(single_seconds),
        },
    ];
    if !a.run.enhancer.skip_enhancer {
        let t = Instant::now();
        let params = load_params(a.run.params.as_deref())?;
        let cfg = PipelineConfig { skip_refine: a.run.skip_evoim, ..Default::default() };
        let (fusion_only, _) = pipeline::run(&stack, None, &params, &cfg)?;
        write_image(&baselines.join("without_enhancer.png"), &fusion_only)?;
        pairs.push(Pair {
            pair_id: "without_enhancer".into(),
            method: Some("without_enhancer".into()),
            reference: "scene/reference.png".into(),
            candidate: "baselines/without_enhancer.png".into(),
            seconds: Some(t.elapsed().as_secs_f64()),
        });
    }
    let manifest = PairsManifest { pairs };
    write_json(&a.out.join("pairs.json"), &manifest)?;
    let mut report = evaluate_pairs(&a.out, &manifest);
    print!("{}", format_table(&report.aggregate));
    // timings are reported on stdout only so that metrics.json is reproducible
    for p in &mut report.pairs {
        p.seconds = None;
    }
    for r in &mut report.aggregate {
        r.seconds = None;
    }
    write_json(&a.out.join("metrics.json"), &report)?;
    if let Some(e) = report.errors.first() {
        return Err(Error::Core(mfsr_core::Error::InvalidArgument(format!("pair {}: {}", e.pair_id, e.error))));
    }
    Ok(())
}

fn reference_factor(stack: &SceneStack) -> usize {
    match (&stack.reference_hr, stack.frames.first()) {
        (Some(r), Some(f)) if f.width() > 0 => (r.width() / f.width()).max(1),
        _ => 2,
    }
}

//! On-disk pipeline commands behind the `flowfill` binary.
//!
//! Every command reads and validates all of its inputs before it creates the
//! output directory, so a failed run leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::completion::{complete_sequence_default, CompletedFlows, CompletionConfig};
use crate::error::{Error, Result};
use crate::flow_io::{
    load_sequence, read_frame_file, read_mask_file, write_file, write_flo, write_frame_png, write_mask_png,
    SequenceManifest,
};
use crate::grid::{FlowDirection, Frame, Mask, Scale, SequenceBundle};
use crate::losses::{epe_sum, hfem_loss, masked_l1, split_smooth_hard, HfemConfig};
use crate::maskgen::{synthesize_masks, MaskGenConfig};
use crate::metrics::{evaluate_frames, FlowEpeReport, MetricScope, MetricsReport};
use crate::propagation::{propagate, PropagationConfig, PropagationStats};
use crate::unseen::{fill_loop, DiffusionInpainter, FillLoopConfig, FillOutcome};

/// Everything a run can be configured with. Loaded from JSON; any section
/// left out takes its defaults, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// The one seed all randomness derives from. Overrides `maskgen.seed`.
    pub seed: u64,
    pub completion: CompletionConfig,
    pub propagation: PropagationConfig,
    pub fill_loop: FillLoopConfig,
    pub inpainter: DiffusionInpainter,
    pub hfem: HfemConfig,
    pub maskgen: MaskGenConfig,
    pub metric_scope: MetricScope,
    /// Local ground-truth flow variance at or below which a hole cell counts
    /// as smooth in flow reports.
    pub smooth_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            out: None,
            seed: 0,
            completion: CompletionConfig::default(),
            propagation: PropagationConfig::default(),
            fill_loop: FillLoopConfig::default(),
            inpainter: DiffusionInpainter::default(),
            hfem: HfemConfig::default(),
            maskgen: MaskGenConfig::default(),
            metric_scope: MetricScope::default(),
            smooth_threshold: 1.0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::flow_io::read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::format(e.utf8_error().valid_up_to(), "config is not UTF-8").in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    pub fn validate(&self) -> Result<()> {
        self.completion.validate()?;
        self.propagation.validate()?;
        self.fill_loop.validate()?;
        self.hfem.validate()?;
        self.maskgen_config().validate()?;
        if !(self.inpainter.tolerance > 0.0 && self.inpainter.tolerance.is_finite()) {
            return Err(Error::Config("inpainter.tolerance must be positive".into()));
        }
        if self.inpainter.max_iters == 0 {
            return Err(Error::Config("inpainter.max_iters must be at least 1".into()));
        }
        if self.smooth_threshold.is_nan() || self.smooth_threshold < 0.0 {
            return Err(Error::Config("smooth_threshold must be non-negative".into()));
        }
        Ok(())
    }

    /// Mask generator settings with the run seed applied.
    pub fn maskgen_config(&self) -> MaskGenConfig {
        MaskGenConfig {
            seed: self.seed,
            ..self.maskgen.clone()
        }
    }

    /// The config as recorded in outputs: paths dropped so that identical
    /// runs into different directories write identical files.
    fn recorded(&self) -> Self {
        Self {
            manifest: None,
            out: None,
            maskgen: self.maskgen_config(),
            ..self.clone()
        }
    }

    fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no input manifest given".into()))
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given".into()))
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub metric_scope: Option<MetricScope>,
    /// Fill-loop iteration cap.
    pub max_iters: Option<usize>,
    pub epsilon: Option<f64>,
    pub hard_percent: Option<f64>,
    pub hard_weight: Option<f64>,
}

impl Overrides {
    pub fn apply(self, mut cfg: PipelineConfig) -> Result<PipelineConfig> {
        if self.manifest.is_some() {
            cfg.manifest = self.manifest;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.metric_scope {
            cfg.metric_scope = v;
        }
        if let Some(v) = self.max_iters {
            cfg.fill_loop.max_iterations = v;
        }
        if let Some(v) = self.epsilon {
            cfg.propagation.epsilon = v;
        }
        if let Some(v) = self.hard_percent {
            cfg.hfem.hard_percent = v;
        }
        if let Some(v) = self.hard_weight {
            cfg.hfem.hard_weight = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn frame_file_name(i: usize) -> String {
    format!("frame_{i:05}.png")
}

pub fn mask_file_name(i: usize) -> String {
    format!("mask_{i:05}.png")
}

pub fn flow_file_name(direction: FlowDirection, pair: usize) -> String {
    match direction {
        FlowDirection::Forward => format!("flow_fwd_{pair:05}.flo"),
        FlowDirection::Backward => format!("flow_bwd_{pair:05}.flo"),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_file(path, text.as_bytes())
}

fn load_input(cfg: &PipelineConfig) -> Result<(SequenceManifest, PathBuf, SequenceBundle)> {
    let (manifest, base) = SequenceManifest::load(cfg.manifest_path()?)?;
    let bundle = load_sequence(&manifest, &base)?;
    Ok((manifest, base, bundle))
}

/// Hole EPE of one set of flows, pooled over every pair and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStageMetrics {
    pub stage: usize,
    pub scale: Scale,
    pub epe: FlowEpeReport,
    /// Pooled masked L1 over all hole cells.
    pub masked_l1: f64,
    /// Mean per-field hard-mined loss over fields with a nonempty hole.
    pub hfem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub hole_cells: usize,
    pub smooth_threshold: f64,
    pub hfem: HfemConfig,
    pub stages: Vec<FlowStageMetrics>,
}

fn score_flows(
    bundle: &SequenceBundle,
    pred: &CompletedFlows,
    gt: &CompletedFlows,
    cfg: &PipelineConfig,
) -> Result<Option<(FlowEpeReport, f64, f64)>> {
    let (mut total, mut n) = (0f64, 0usize);
    let (mut smooth, mut n_smooth) = (0f64, 0usize);
    let (mut hard, mut n_hard) = (0f64, 0usize);
    let (mut l1, mut hfem, mut fields) = (0f64, 0f64, 0usize);
    for dir in [FlowDirection::Forward, FlowDirection::Backward] {
        for (p, (pf, gf)) in pred.get(dir).iter().zip(gt.get(dir)).enumerate() {
            let hole = bundle.flow_mask(p, dir);
            if hole.is_empty() {
                continue;
            }
            total += epe_sum(pf, gf, hole);
            n += hole.count();
            let (s, h) = split_smooth_hard(gf, hole, cfg.smooth_threshold)?;
            smooth += epe_sum(pf, gf, &s);
            n_smooth += s.count();
            hard += epe_sum(pf, gf, &h);
            n_hard += h.count();
            l1 += masked_l1(pf, gf, hole)? * (2 * hole.count()) as f64;
            hfem += hfem_loss(pf, gf, hole, &cfg.hfem)?;
            fields += 1;
        }
    }
    if n == 0 {
        return Ok(None);
    }
    let ratio = |s: f64, c: usize| (c > 0).then(|| s / c as f64);
    Ok(Some((
        FlowEpeReport {
            overall: total / n as f64,
            smooth: ratio(smooth, n_smooth),
            hard: ratio(hard, n_hard),
        },
        l1 / (2 * n) as f64,
        hfem / fields as f64,
    )))
}

fn check_gt_flows(gt: &CompletedFlows, bundle: &SequenceBundle) -> Result<()> {
    if gt.pairs() + 1 != bundle.len() {
        return Err(Error::Invalid(
            "ground-truth flow count does not match the sequence".into(),
        ));
    }
    Ok(())
}

/// Completes every flow of the sequence and writes `flow_fwd_%05d.flo` /
/// `flow_bwd_%05d.flo`. With ground-truth flows in the manifest, also writes
/// `metrics.json` scoring each stage over the holes.
pub fn cmd_complete_flow(cfg: &PipelineConfig) -> Result<Option<FlowMetrics>> {
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let (manifest, base, bundle) = load_input(cfg)?;
    let gt = manifest
        .load_gt_flows(&base)?
        .map(|(forward, backward)| CompletedFlows { forward, backward });
    if let Some(gt) = &gt {
        check_gt_flows(gt, &bundle)?;
    }
    let result = complete_sequence_default(&bundle, &cfg.completion)?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for dir in [FlowDirection::Forward, FlowDirection::Backward] {
        for (p, f) in result.flows.get(dir).iter().enumerate() {
            files.push((flow_file_name(dir, p), write_flo(f)?));
        }
    }
    let metrics = match &gt {
        Some(gt) => {
            let mut stages = Vec::new();
            for snap in &result.stages {
                let lifted = result.stage_at_full_res(&bundle, snap.stage)?;
                if let Some((epe, l1, hfem)) = score_flows(&bundle, &lifted, gt, cfg)? {
                    stages.push(FlowStageMetrics {
                        stage: snap.stage,
                        scale: snap.scale,
                        epe,
                        masked_l1: l1,
                        hfem,
                    });
                }
            }
            let hole_cells = (0..bundle.len() - 1)
                .flat_map(|p| [FlowDirection::Forward, FlowDirection::Backward].map(|d| bundle.flow_mask(p, d).count()))
                .sum();
            Some(FlowMetrics {
                hole_cells,
                smooth_threshold: cfg.smooth_threshold,
                hfem: cfg.hfem,
                stages,
            })
        }
        None => None,
    };

    create_dir(out)?;
    for (name, bytes) in &files {
        write_file(&out.join(name), bytes)?;
    }
    if let Some(m) = &metrics {
        write_json(&out.join("metrics.json"), m)?;
    }
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintStats {
    pub seed: u64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub hole_pixels: usize,
    pub propagation: PropagationStats,
    pub fill: FillOutcome,
    pub config: PipelineConfig,
}

/// Result of the in-memory inpainting pipeline.
#[derive(Debug, Clone)]
pub struct InpaintRun {
    pub frames: Vec<Frame>,
    /// Pixels propagation left for the fill loop, per frame.
    pub unfilled: Vec<Mask>,
    pub stats: InpaintStats,
}

/// Flow completion, propagation and the unseen-region fill on a loaded
/// sequence.
pub fn inpaint_sequence(bundle: &SequenceBundle, cfg: &PipelineConfig) -> Result<InpaintRun> {
    cfg.validate()?;
    let completed = complete_sequence_default(bundle, &cfg.completion)?;
    let prop = propagate(bundle, &completed.flows, &cfg.propagation)?;
    let unfilled = prop.unfilled.clone();
    let propagation = prop.stats.clone();
    let fill = fill_loop(prop, &completed.flows, &cfg.inpainter, &cfg.fill_loop)?;
    let (width, height) = bundle.dims();
    Ok(InpaintRun {
        frames: fill.frames.clone(),
        unfilled,
        stats: InpaintStats {
            seed: cfg.seed,
            frames: bundle.len(),
            width,
            height,
            hole_pixels: bundle.masks().iter().map(Mask::count).sum(),
            propagation,
            fill,
            config: cfg.recorded(),
        },
    })
}

/// Runs the whole pipeline and writes `frame_%05d.png`, `unfilled_%05d.png`,
/// `stats.json` and, with ground-truth frames in the manifest,
/// `metrics.json`. If the fill loop runs out of iterations the leftover
/// pixels are written as `residual_%05d.png` before the error is returned.
pub fn cmd_inpaint(cfg: &PipelineConfig) -> Result<InpaintRun> {
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let (manifest, base, bundle) = load_input(cfg)?;
    let gt = manifest.load_gt_frames(&base)?;
    let run = match inpaint_sequence(&bundle, cfg) {
        Ok(run) => run,
        Err(Error::FillExhausted {
            iterations,
            remaining,
            residual,
        }) => {
            create_dir(out)?;
            for (i, m) in residual.iter().enumerate() {
                write_file(&out.join(format!("residual_{i:05}.png")), &write_mask_png(m)?)?;
            }
            return Err(Error::FillExhausted {
                iterations,
                remaining,
                residual,
            });
        }
        Err(e) => return Err(e),
    };
    let metrics = gt
        .map(|gt| evaluate_frames(&run.frames, &gt, Some(bundle.masks()), cfg.metric_scope))
        .transpose()?;

    let mut files = Vec::new();
    for (i, (f, u)) in run.frames.iter().zip(&run.unfilled).enumerate() {
        files.push((frame_file_name(i), write_frame_png(f)?));
        files.push((format!("unfilled_{i:05}.png"), write_mask_png(u)?));
    }
    create_dir(out)?;
    for (name, bytes) in &files {
        write_file(&out.join(name), bytes)?;
    }
    write_json(&out.join("stats.json"), &run.stats)?;
    if let Some(m) = &metrics {
        write_json(&out.join("metrics.json"), m)?;
    }
    Ok(run)
}

/// Frame count and size for mask synthesis when no manifest is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthShape {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

/// Writes `mask_%05d.png` for each frame plus a `manifest.json` pointing at
/// them. With an input manifest its frames, flows and size are kept (paths
/// made absolute); otherwise `shape` decides and the frame lists stay empty
/// apart from the masks.
pub fn cmd_synth_masks(cfg: &PipelineConfig, shape: Option<SynthShape>) -> Result<SequenceManifest> {
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let (mut manifest, n) = match (&cfg.manifest, shape) {
        (Some(path), _) => {
            let (mut m, base) = SequenceManifest::load(path)?;
            let abs = |p: &PathBuf| -> Result<PathBuf> {
                std::path::absolute(base.join(p)).map_err(|source| Error::Io {
                    path: p.clone(),
                    source,
                })
            };
            for list in [
                &mut m.frame_paths,
                &mut m.fwd_flow_paths,
                &mut m.bwd_flow_paths,
                &mut m.gt_frame_paths,
                &mut m.gt_fwd_flow_paths,
                &mut m.gt_bwd_flow_paths,
            ] {
                *list = list.iter().map(abs).collect::<Result<_>>()?;
            }
            let n = m.frame_paths.len();
            (m, n)
        }
        (None, Some(s)) => (SequenceManifest::new(s.width, s.height, Vec::new()), s.frames),
        (None, None) => {
            return Err(Error::Config(
                "synth-masks needs a manifest or a width, height and frame count".into(),
            ));
        }
    };
    if n == 0 {
        return Err(Error::Invalid("n_frames must be at least 1".into()));
    }
    let gen = cfg.maskgen_config();
    let masks = synthesize_masks(manifest.width, manifest.height, n, &gen)?;
    let files = masks
        .iter()
        .enumerate()
        .map(|(i, m)| Ok((mask_file_name(i), write_mask_png(m)?)))
        .collect::<Result<Vec<_>>>()?;
    manifest.mask_paths = files.iter().map(|(name, _)| PathBuf::from(name)).collect();
    manifest.maskgen = Some(gen);

    create_dir(out)?;
    for (name, bytes) in &files {
        write_file(&out.join(name), bytes)?;
    }
    write_file(&out.join("manifest.json"), manifest.to_json()?.as_bytes())?;
    Ok(manifest)
}

fn numbered_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let io = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with(prefix) && name.ends_with(".png") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Scores `frame_*.png` in `pred_dir` against the same names' order in
/// `gt_dir`. Hole scope reads `mask_*.png` from `mask_dir`. Writes
/// `metrics.json` into the configured output directory when one is set.
pub fn cmd_evaluate(
    pred_dir: &Path,
    gt_dir: &Path,
    mask_dir: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<MetricsReport> {
    let load = |paths: Vec<PathBuf>| -> Result<Vec<Frame>> {
        paths.iter().enumerate().map(|(i, p)| read_frame_file(p, i)).collect()
    };
    let pred = load(numbered_files(pred_dir, "frame_")?)?;
    let gt = load(numbered_files(gt_dir, "frame_")?)?;
    if pred.len() != gt.len() {
        return Err(Error::Invalid(format!(
            "{} predicted frames in {} but {} reference frames in {}",
            pred.len(),
            pred_dir.display(),
            gt.len(),
            gt_dir.display()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Invalid(format!("no frame_*.png in {}", pred_dir.display())));
    }
    let masks = match mask_dir {
        Some(d) => Some(
            numbered_files(d, "mask_")?
                .iter()
                .map(|p| read_mask_file(p))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let report = evaluate_frames(&pred, &gt, masks.as_deref(), cfg.metric_scope)?;
    if let Some(out) = &cfg.out {
        create_dir(out)?;
        write_json(&out.join("metrics.json"), &report)?;
    }
    Ok(report)
}

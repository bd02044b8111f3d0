//! Flow hole completion: harmonic hole initialization, per-stage input
//! stacking and the coarse-to-fine stage orchestration.
//!
//! Stage 0 completes each flow from a window of same-direction flows. Later
//! stages see forward and backward windows together and return both center
//! flows. Between stages results are resampled to the next scale, and after
//! every stage the known cells are restored so only masked cells can change.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{resize_flow_to, resize_mask_to, FlowDirection, FlowField, Mask, Scale, SequenceBundle};
use crate::laplace::LaplacePlan;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompletionConfig {
    /// Half-width `k` of the temporal window; each stage sees `2k + 1` flows per direction.
    pub temporal_radius: usize,
    pub stage_scales: Vec<Scale>,
    /// Convergence threshold on the largest per-cell update of one sweep, in pixels.
    pub diffusion_tolerance: f64,
    pub diffusion_max_iters: usize,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            temporal_radius: 5,
            stage_scales: vec![Scale::new(1, 2).unwrap(), Scale::new(2, 3).unwrap(), Scale::ONE],
            diffusion_tolerance: 1e-4,
            diffusion_max_iters: 10_000,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        match self.stage_scales.last() {
            None => return Err(Error::Config("stage_scales is empty".into())),
            Some(s) if !s.is_one() => return Err(Error::Config(format!("last stage scale is {s}, must be 1"))),
            _ => {}
        }
        if !(self.diffusion_tolerance > 0.0 && self.diffusion_tolerance.is_finite()) {
            return Err(Error::Config("diffusion_tolerance must be positive".into()));
        }
        if self.diffusion_max_iters == 0 {
            return Err(Error::Config("diffusion_max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        2 * self.temporal_radius + 1
    }

    fn stage_dims(&self, stage: usize, full: (usize, usize)) -> (usize, usize) {
        let s = self.stage_scales[stage];
        (s.apply(full.0), s.apply(full.1))
    }
}

/// Harmonic fill of a flow's masked cells; both channels solved separately.
///
/// `warm_start` keeps the current hole values as the initial guess, otherwise
/// the hole starts at the mean of the known cells bordering it.
pub fn harmonic_fill(
    flow: &FlowField,
    mask: &Mask,
    tolerance: f64,
    max_iters: usize,
    warm_start: bool,
) -> Result<FlowField> {
    crate::grid::check_dims("hole mask", flow.dims(), mask.dims())?;
    if mask.is_empty() {
        return Ok(flow.clone());
    }
    let plan = LaplacePlan::new(mask)?;
    let mut out = flow.clone();
    for c in 0..2 {
        let mut values = flow.channel(c);
        if !warm_start || values.iter().any(|v| !v.is_finite()) {
            plan.seed_boundary_mean(&mut values);
        }
        plan.solve(&mut values, tolerance, max_iters);
        out.set_channel(c, &values);
    }
    Ok(out)
}

/// Fills the masked cells of `flow` by interpolating the known values at the
/// hole boundary inward (discrete Laplace equation). Known cells are kept.
pub fn initialize_hole(flow: &FlowField, mask: &Mask, cfg: &CompletionConfig) -> Result<FlowField> {
    harmonic_fill(flow, mask, cfg.diffusion_tolerance, cfg.diffusion_max_iters, false)
}

/// Forward and backward flows for every adjacent frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedFlows {
    pub forward: Vec<FlowField>,
    pub backward: Vec<FlowField>,
}

impl CompletedFlows {
    pub fn from_bundle(bundle: &SequenceBundle) -> Self {
        Self {
            forward: bundle.fwd_flows().to_vec(),
            backward: bundle.bwd_flows().to_vec(),
        }
    }

    pub fn pairs(&self) -> usize {
        self.forward.len()
    }

    pub fn get(&self, direction: FlowDirection) -> &[FlowField] {
        match direction {
            FlowDirection::Forward => &self.forward,
            FlowDirection::Backward => &self.backward,
        }
    }
}

/// Channel stack fed to one stage completer.
///
/// Layout with `n = 2k + 1` window slots (slot `k` is the center pair):
/// * unidirectional: `[dx_0, dy_0, .., dx_{n-1}, dy_{n-1}, m_0, .., m_{n-1}]`, `3n` channels;
/// * bidirectional: forward flows (`2n`), backward flows (`2n`), forward-flow
///   masks (`n`), backward-flow masks (`n`), `6n` channels.
///
/// Masks are stored as 0.0 (known) / 1.0 (missing).
#[derive(Debug, Clone)]
pub struct StageInput {
    pub stage: usize,
    pub scale: Scale,
    pub width: usize,
    pub height: usize,
    pub temporal_radius: usize,
    /// Pair index being completed.
    pub center_index: usize,
    /// `None` for bidirectional stages.
    pub direction: Option<FlowDirection>,
    pub channels: Vec<Vec<f32>>,
}

impl StageInput {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn window_len(&self) -> usize {
        2 * self.temporal_radius + 1
    }

    pub fn is_bidirectional(&self) -> bool {
        self.direction.is_none()
    }

    fn flow_base(&self, direction: FlowDirection) -> Result<usize> {
        let n = self.window_len();
        match (self.direction, direction) {
            (None, FlowDirection::Forward) => Ok(0),
            (None, FlowDirection::Backward) => Ok(2 * n),
            (Some(d), want) if d == want => Ok(0),
            (Some(d), want) => Err(Error::Invalid(format!(
                "stage input carries {d:?} flows only, {want:?} requested"
            ))),
        }
    }

    fn mask_base(&self, direction: FlowDirection) -> Result<usize> {
        let n = self.window_len();
        let flows = self.flow_base(direction)?;
        Ok(match self.direction {
            Some(_) => 2 * n,
            None => 4 * n + if flows == 0 { 0 } else { n },
        })
    }

    /// Flow in window slot `slot` (0..2k+1).
    pub fn flow(&self, slot: usize, direction: FlowDirection) -> Result<FlowField> {
        let base = self.flow_base(direction)? + 2 * slot;
        let (dx, dy) = (&self.channels[base], &self.channels[base + 1]);
        let data = dx.iter().zip(dy).flat_map(|(&a, &b)| [a, b]).collect();
        FlowField::from_vec(self.width, self.height, data, direction)
    }

    pub fn mask(&self, slot: usize, direction: FlowDirection) -> Result<Mask> {
        let ch = &self.channels[self.mask_base(direction)? + slot];
        Mask::from_bits(self.width, self.height, ch.iter().map(|&v| v > 0.5).collect())
    }

    pub fn center_flow(&self, direction: FlowDirection) -> Result<FlowField> {
        self.flow(self.temporal_radius, direction)
    }

    pub fn center_mask(&self, direction: FlowDirection) -> Result<Mask> {
        self.mask(self.temporal_radius, direction)
    }

    /// Directions a completer must return for this input.
    pub fn output_directions(&self) -> &'static [FlowDirection] {
        match self.direction {
            Some(FlowDirection::Forward) => &[FlowDirection::Forward],
            Some(FlowDirection::Backward) => &[FlowDirection::Backward],
            None => &[FlowDirection::Forward, FlowDirection::Backward],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub forward: Option<FlowField>,
    pub backward: Option<FlowField>,
}

impl StageOutput {
    pub fn get(&self, direction: FlowDirection) -> Option<&FlowField> {
        match direction {
            FlowDirection::Forward => self.forward.as_ref(),
            FlowDirection::Backward => self.backward.as_ref(),
        }
    }

    fn take(&mut self, direction: FlowDirection) -> Option<FlowField> {
        match direction {
            FlowDirection::Forward => self.forward.take(),
            FlowDirection::Backward => self.backward.take(),
        }
    }

    pub fn set(&mut self, flow: FlowField) {
        match flow.direction() {
            FlowDirection::Forward => self.forward = Some(flow),
            FlowDirection::Backward => self.backward = Some(flow),
        }
    }
}

/// One stage of the completion stack. Must return a finite flow of the input's
/// size for every direction in [`StageInput::output_directions`].
pub trait StageCompleter: Send + Sync {
    fn complete(&self, input: &StageInput) -> Result<StageOutput>;
}

impl<F> StageCompleter for F
where
    F: Fn(&StageInput) -> Result<StageOutput> + Send + Sync,
{
    fn complete(&self, input: &StageInput) -> Result<StageOutput> {
        self(input)
    }
}

/// Default completer: [`initialize_hole`] on the center flow(s) at the stage
/// scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionFill {
    pub tolerance: f64,
    pub max_iters: usize,
    /// Start from the incoming hole values instead of the boundary mean.
    /// Fewer sweeps, but the update-size stopping rule then fires while the
    /// smooth part of the error is still large.
    pub warm_start: bool,
}

impl RegionFill {
    pub fn from_config(cfg: &CompletionConfig) -> Self {
        Self {
            tolerance: cfg.diffusion_tolerance,
            max_iters: cfg.diffusion_max_iters,
            warm_start: false,
        }
    }
}

impl StageCompleter for RegionFill {
    fn complete(&self, input: &StageInput) -> Result<StageOutput> {
        let mut out = StageOutput::default();
        for &dir in input.output_directions() {
            let flow = input.center_flow(dir)?;
            let mask = input.center_mask(dir)?;
            out.set(harmonic_fill(
                &flow,
                &mask,
                self.tolerance,
                self.max_iters,
                self.warm_start,
            )?);
        }
        Ok(out)
    }
}

fn window_slot(center: usize, offset: isize, pairs: usize) -> usize {
    (center as isize + offset).clamp(0, pairs as isize - 1) as usize
}

/// Stacks the temporal window around pair `center` for `stage`.
///
/// Stage 0 reads `prior` (or the bundle's raw flows when `None`) in
/// `direction` only. Later stages need `prior` and stack both directions;
/// `direction` is ignored for them. Window slots past either end of the
/// sequence replicate the first/last pair.
pub fn assemble_stage_input(
    bundle: &SequenceBundle,
    stage: usize,
    center: usize,
    direction: FlowDirection,
    prior: Option<&CompletedFlows>,
    cfg: &CompletionConfig,
) -> Result<StageInput> {
    if stage >= cfg.stage_scales.len() {
        return Err(Error::Invalid(format!(
            "stage {stage} out of range for {} stages",
            cfg.stage_scales.len()
        )));
    }
    let pairs = bundle.len() - 1;
    if center >= pairs {
        return Err(Error::Invalid(format!(
            "center pair {center} out of range for {pairs} pairs"
        )));
    }
    let owned;
    let flows = match (stage, prior) {
        (_, Some(p)) => p,
        (0, None) => {
            owned = CompletedFlows::from_bundle(bundle);
            &owned
        }
        (s, None) => return Err(Error::Invalid(format!("stage {s} needs the previous stage's flows"))),
    };
    if flows.forward.len() != pairs || flows.backward.len() != pairs {
        return Err(Error::Invalid(format!(
            "prior flows cover {}/{} pairs, expected {pairs}",
            flows.forward.len(),
            flows.backward.len()
        )));
    }
    let (w, h) = cfg.stage_dims(stage, bundle.dims());
    let k = cfg.temporal_radius as isize;
    let directions: &[FlowDirection] = if stage == 0 {
        match direction {
            FlowDirection::Forward => &[FlowDirection::Forward],
            FlowDirection::Backward => &[FlowDirection::Backward],
        }
    } else {
        &[FlowDirection::Forward, FlowDirection::Backward]
    };
    let mut flow_channels = Vec::new();
    let mut mask_channels = Vec::new();
    for &dir in directions {
        for off in -k..=k {
            let p = window_slot(center, off, pairs);
            let f = resize_flow_to(&flows.get(dir)[p], w, h);
            let data = f.data();
            flow_channels.push(data.iter().step_by(2).copied().collect::<Vec<f32>>());
            flow_channels.push(data.iter().skip(1).step_by(2).copied().collect());
            let m = resize_mask_to(bundle.flow_mask(p, dir), w, h);
            mask_channels.push(m.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect());
        }
    }
    flow_channels.extend(mask_channels);
    Ok(StageInput {
        stage,
        scale: cfg.stage_scales[stage],
        width: w,
        height: h,
        temporal_radius: cfg.temporal_radius,
        center_index: center,
        direction: (stage == 0).then_some(direction),
        channels: flow_channels,
    })
}

/// Output of one stage, at that stage's resolution.
#[derive(Debug, Clone)]
pub struct StageSnapshot {
    pub stage: usize,
    pub scale: Scale,
    pub flows: CompletedFlows,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    /// Final full-resolution flows.
    pub flows: CompletedFlows,
    pub stages: Vec<StageSnapshot>,
}

impl CompletionResult {
    /// A stage's flows resampled to full resolution with known cells restored,
    /// for scoring intermediate stages against ground truth.
    pub fn stage_at_full_res(&self, bundle: &SequenceBundle, stage: usize) -> Result<CompletedFlows> {
        let snap = self
            .stages
            .get(stage)
            .ok_or_else(|| Error::Invalid(format!("no stage {stage}")))?;
        let (w, h) = bundle.dims();
        let lift = |dir: FlowDirection| -> Result<Vec<FlowField>> {
            snap.flows
                .get(dir)
                .iter()
                .enumerate()
                .map(|(p, f)| {
                    let mut up = resize_flow_to(f, w, h);
                    up.reimpose_known(&bundle.flows(dir)[p], bundle.flow_mask(p, dir))?;
                    Ok(up)
                })
                .collect()
        };
        Ok(CompletedFlows {
            forward: lift(FlowDirection::Forward)?,
            backward: lift(FlowDirection::Backward)?,
        })
    }
}

fn check_output(stage: usize, dims: (usize, usize), flow: &FlowField) -> Result<()> {
    if flow.dims() != dims {
        return Err(Error::Completer {
            stage,
            message: format!(
                "returned {}x{} flow, expected {}x{}",
                flow.width(),
                flow.height(),
                dims.0,
                dims.1
            ),
        });
    }
    if !flow.is_finite() {
        return Err(Error::Completer {
            stage,
            message: "returned non-finite flow".into(),
        });
    }
    Ok(())
}

/// Runs the full stack: hole initialization, then each stage at its scale
/// with `completers[stage]`. Pairs within a stage run concurrently.
pub fn complete_sequence(
    bundle: &SequenceBundle,
    completers: &[&dyn StageCompleter],
    cfg: &CompletionConfig,
) -> Result<CompletionResult> {
    cfg.validate()?;
    if completers.len() != cfg.stage_scales.len() {
        return Err(Error::Config(format!(
            "{} completers for {} stages",
            completers.len(),
            cfg.stage_scales.len()
        )));
    }
    let pairs = bundle.len() - 1;
    let full = bundle.dims();
    let dirs = [FlowDirection::Forward, FlowDirection::Backward];

    // initial flows: holes filled from their boundary
    let initial = par::map_range(2 * pairs, |j| {
        let (dir, p) = (dirs[j / pairs], j % pairs);
        initialize_hole(&bundle.flows(dir)[p], bundle.flow_mask(p, dir), cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut initial = initial.into_iter();
    let initial = CompletedFlows {
        forward: initial.by_ref().take(pairs).collect(),
        backward: initial.collect(),
    };

    let mut prior = initial.clone();
    let mut stages = Vec::with_capacity(cfg.stage_scales.len());
    for (stage, completer) in completers.iter().enumerate() {
        let dims = cfg.stage_dims(stage, full);
        // resample once per stage; assembly then only copies. Resampling
        // blends hole values into the cells next to the hole, so the known
        // cells are put back before the completer sees them.
        let known_at_scale = par::map_range(2 * pairs, |j| {
            let (dir, p) = (dirs[j / pairs], j % pairs);
            (
                resize_flow_to(&initial.get(dir)[p], dims.0, dims.1),
                resize_mask_to(bundle.flow_mask(p, dir), dims.0, dims.1),
            )
        });
        let resized_flows = par::map_range(2 * pairs, |j| -> Result<FlowField> {
            let (dir, p) = (dirs[j / pairs], j % pairs);
            let mut f = resize_flow_to(&prior.get(dir)[p], dims.0, dims.1);
            let (known, mask) = &known_at_scale[j];
            f.reimpose_known(known, mask)?;
            Ok(f)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut resized_flows = resized_flows.into_iter();
        let resized = CompletedFlows {
            forward: resized_flows.by_ref().take(pairs).collect(),
            backward: resized_flows.collect(),
        };
        let jobs: Vec<(usize, Option<FlowDirection>)> = if stage == 0 {
            dirs.iter()
                .flat_map(|&d| (0..pairs).map(move |p| (p, Some(d))))
                .collect()
        } else {
            (0..pairs).map(|p| (p, None)).collect()
        };
        let results = par::map_range(jobs.len(), |j| -> Result<Vec<FlowField>> {
            let (p, dir) = jobs[j];
            let input = assemble_stage_input(bundle, stage, p, dir.unwrap_or_default(), Some(&resized), cfg)?;
            let mut out = completer.complete(&input)?;
            input
                .output_directions()
                .iter()
                .map(|&d| {
                    let mut f = out.take(d).ok_or_else(|| Error::Completer {
                        stage,
                        message: format!("no {d:?} flow returned for pair {p}"),
                    })?;
                    check_output(stage, dims, &f)?;
                    f = f.with_direction(d);
                    let j = match d {
                        FlowDirection::Forward => p,
                        FlowDirection::Backward => pairs + p,
                    };
                    let (known, mask) = &known_at_scale[j];
                    f.reimpose_known(known, mask)?;
                    Ok(f)
                })
                .collect()
        });
        let mut next = CompletedFlows {
            forward: Vec::with_capacity(pairs),
            backward: Vec::with_capacity(pairs),
        };
        for r in results {
            for f in r? {
                match f.direction() {
                    FlowDirection::Forward => next.forward.push(f),
                    FlowDirection::Backward => next.backward.push(f),
                }
            }
        }
        stages.push(StageSnapshot {
            stage,
            scale: cfg.stage_scales[stage],
            flows: next.clone(),
        });
        prior = next;
    }

    for dir in dirs {
        let flows = match dir {
            FlowDirection::Forward => &mut prior.forward,
            FlowDirection::Backward => &mut prior.backward,
        };
        for (p, f) in flows.iter_mut().enumerate() {
            f.reimpose_known(&bundle.flows(dir)[p], bundle.flow_mask(p, dir))?;
        }
    }
    Ok(CompletionResult { flows: prior, stages })
}

/// [`complete_sequence`] with [`RegionFill`] at every stage.
pub fn complete_sequence_default(bundle: &SequenceBundle, cfg: &CompletionConfig) -> Result<CompletionResult> {
    let fill = RegionFill::from_config(cfg);
    let completers: Vec<&dyn StageCompleter> = vec![&fill; cfg.stage_scales.len()];
    complete_sequence(bundle, &completers, cfg)
}

//! Fill for pixels no flow chain reaches: inpaint one frame's leftover hole
//! with a single-image inpainter, feed the result back into propagation as
//! new sources, repeat until nothing is left.

use serde::{Deserialize, Serialize};

use crate::completion::CompletedFlows;
use crate::error::{Error, Result};
use crate::grid::{check_dims, Frame, Mask, RgbImageF32};
use crate::laplace::LaplacePlan;
use crate::propagation::{blend, sweep_both, BlendedFrame, FillStatus, PropagationOutcome};

/// Single-image inpainting: replace the masked pixels of a frame.
pub trait ImageInpainter: Send + Sync {
    fn inpaint(&self, frame: &Frame, mask: &Mask) -> Result<Frame>;
}

impl<F> ImageInpainter for F
where
    F: Fn(&Frame, &Mask) -> Result<Frame> + Send + Sync,
{
    fn inpaint(&self, frame: &Frame, mask: &Mask) -> Result<Frame> {
        self(frame, mask)
    }
}

/// Harmonic (Laplace) fill of each RGB channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionInpainter {
    /// Convergence threshold in grey levels.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for DiffusionInpainter {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iters: 10_000,
        }
    }
}

impl DiffusionInpainter {
    /// Unquantized fill; known pixels keep their exact values.
    pub fn fill_values(&self, frame: &Frame, mask: &Mask) -> Result<RgbImageF32> {
        check_dims("inpaint mask", frame.dims(), mask.dims())?;
        let mut img = frame.to_float();
        if mask.is_empty() {
            return Ok(img);
        }
        let plan = LaplacePlan::new(mask)?;
        for c in 0..3 {
            let mut values: Vec<f64> = img.data.iter().skip(c).step_by(3).map(|&v| v as f64).collect();
            plan.seed_boundary_mean(&mut values);
            plan.solve(&mut values, self.tolerance, self.max_iters);
            for (dst, v) in img.data.iter_mut().skip(c).step_by(3).zip(values) {
                *dst = v as f32;
            }
        }
        Ok(img)
    }
}

impl ImageInpainter for DiffusionInpainter {
    fn inpaint(&self, frame: &Frame, mask: &Mask) -> Result<Frame> {
        Ok(self.fill_values(frame, mask)?.quantize(frame.index()))
    }
}

/// [`DiffusionInpainter`] with default settings.
pub fn diffusion_inpaint(frame: &Frame, mask: &Mask) -> Result<Frame> {
    DiffusionInpainter::default().inpaint(frame, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameSelection {
    /// Most unfilled pixels; ties go to the earliest frame.
    #[default]
    LargestUnfilled,
    /// Earliest frame with any unfilled pixel.
    Earliest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FillLoopConfig {
    pub max_iterations: usize,
    pub frame_selection: FrameSelection,
}

impl Default for FillLoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            frame_selection: FrameSelection::default(),
        }
    }
}

impl FillLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillOutcome {
    #[serde(skip)]
    pub frames: Vec<Frame>,
    pub iterations: usize,
    /// Total unfilled pixels before the first iteration and after each one.
    pub unfilled_per_iteration: Vec<usize>,
    /// Frame inpainted at each iteration.
    pub selected_frames: Vec<usize>,
}

fn unfilled_count(b: &BlendedFrame) -> usize {
    b.status.iter().filter(|&&s| s == FillStatus::Unfilled).count()
}

fn select_frame(resolved: &[BlendedFrame], policy: FrameSelection) -> Option<usize> {
    let counts = resolved.iter().map(unfilled_count);
    match policy {
        FrameSelection::Earliest => counts.enumerate().find(|&(_, c)| c > 0).map(|(i, _)| i),
        FrameSelection::LargestUnfilled => counts
            .enumerate()
            .filter(|&(_, c)| c > 0)
            // max_by_key keeps the last maximum; reverse the index to prefer the first
            .max_by_key(|&(i, c)| (c, std::cmp::Reverse(i)))
            .map(|(i, _)| i),
    }
}

/// Repeats inpaint-then-propagate until every pixel is filled.
///
/// Pixels resolved earlier keep their values; each round only adopts values
/// for pixels that were still unfilled.
pub fn fill_loop(
    outcome: PropagationOutcome,
    flows: &CompletedFlows,
    inpainter: &dyn ImageInpainter,
    cfg: &FillLoopConfig,
) -> Result<FillOutcome> {
    cfg.validate()?;
    let PropagationOutcome {
        frames,
        blended: mut resolved,
        mut state,
        validity,
        ..
    } = outcome;
    let indices: Vec<usize> = frames.iter().map(Frame::index).collect();
    let total = |r: &[BlendedFrame]| r.iter().map(unfilled_count).sum::<usize>();
    let mut counts = vec![total(&resolved)];
    let mut selected = Vec::new();

    while let Some(f) = select_frame(&resolved, cfg.frame_selection) {
        if selected.len() == cfg.max_iterations {
            return Err(Error::FillExhausted {
                iterations: selected.len(),
                remaining: total(&resolved),
                residual: resolved.iter().map(BlendedFrame::unfilled_mask).collect(),
            });
        }
        let hole = resolved[f].unfilled_mask();
        let current = resolved[f].values.quantize(indices[f]);
        let patched = inpainter.inpaint(&current, &hole)?;
        check_dims("inpainted frame", current.dims(), patched.dims())?;
        state.inject(f, &hole, &patched)?;
        state.reset_sides();
        sweep_both(&mut state, flows, &validity)?;
        let fresh = blend(&state);
        for (old, new) in resolved.iter_mut().zip(fresh) {
            for (i, st) in old.status.iter_mut().enumerate() {
                if *st == FillStatus::Unfilled && new.status[i] != FillStatus::Unfilled {
                    *st = new.status[i];
                    old.values.data[3 * i..3 * i + 3].copy_from_slice(&new.values.data[3 * i..3 * i + 3]);
                }
            }
        }
        selected.push(f);
        counts.push(total(&resolved));
    }

    let frames = resolved
        .iter()
        .zip(&indices)
        .map(|(b, &idx)| b.values.quantize(idx))
        .collect();
    Ok(FillOutcome {
        frames,
        iterations: selected.len(),
        unfilled_per_iteration: counts,
        selected_frames: selected,
    })
}

//! Flow-guided pixel propagation.
//!
//! 1. Every flow is checked against its reverse flow: a pixel is trusted only
//!    if following the flow and then the reverse flow lands within `epsilon`
//!    pixels of where it started.
//! 2. A forward-in-time sweep fills missing pixels of frame `i` from frame
//!    `i - 1` through the backward flow; a backward-in-time sweep mirrors it
//!    from frame `i + 1` through the forward flow. Each sweep is one ordered
//!    pass, so fills chain through consecutive missing frames. Each side keeps
//!    its own values and hop counts.
//! 3. Pixels reached from both sides take the inverse-hop-distance weighted
//!    mean of the two candidates.

use serde::{Deserialize, Serialize};

use crate::completion::CompletedFlows;
use crate::error::{Error, Result};
use crate::grid::{bilinear_sample, bilinear_support, check_dims, FlowField, Frame, Mask, RgbImageF32, SequenceBundle};
use crate::par;

/// Hop distance of a pixel not reached from a side.
pub const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    /// Round-trip threshold in full-resolution pixels.
    pub epsilon: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self { epsilon: 5.0 }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

/// Distance between `(x, y)` and where it lands after `flow` then `reverse`,
/// or `None` if the reverse flow cannot be sampled there.
pub fn round_trip_residual(flow: &FlowField, reverse: &FlowField, x: usize, y: usize) -> Option<f64> {
    let [dx, dy] = flow.get(x, y);
    let (tx, ty) = (x as f32 + dx, y as f32 + dy);
    let s = bilinear_sample::<_, 2>(reverse, tx, ty);
    if !s.in_bounds {
        return None;
    }
    let rx = tx as f64 + s.value[0] as f64 - x as f64;
    let ry = ty as f64 + s.value[1] as f64 - y as f64;
    Some(rx.hypot(ry))
}

/// Forward-backward consistency of `flow` against `reverse`, on `flow`'s
/// grid. Unlike fill masks, `true` here means the flow is **valid**.
///
/// Pass `(fwd, bwd)` to validate a forward flow and `(bwd, fwd)` for a
/// backward flow.
pub fn validity_mask(flow: &FlowField, reverse: &FlowField, cfg: &PropagationConfig) -> Result<Mask> {
    check_dims("reverse flow", flow.dims(), reverse.dims())?;
    let (w, h) = flow.dims();
    let eps = cfg.epsilon;
    let rows = par::map_range(h, |y| {
        (0..w)
            .map(|x| matches!(round_trip_residual(flow, reverse, x, y), Some(r) if r < eps))
            .collect::<Vec<bool>>()
    });
    Mask::from_bits(w, h, rows.concat())
}

/// Validity of every flow in a sequence (`true` = valid).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowValidity {
    /// `forward[p]` on frame `p`'s grid.
    pub forward: Vec<Mask>,
    /// `backward[p]` on frame `p + 1`'s grid.
    pub backward: Vec<Mask>,
}

impl FlowValidity {
    pub fn compute(flows: &CompletedFlows, cfg: &PropagationConfig) -> Result<Self> {
        cfg.validate()?;
        let pairs = flows.pairs();
        let all = par::map_range(2 * pairs, |j| {
            let p = j % pairs;
            if j < pairs {
                validity_mask(&flows.forward[p], &flows.backward[p], cfg)
            } else {
                validity_mask(&flows.backward[p], &flows.forward[p], cfg)
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut all = all.into_iter();
        Ok(Self {
            forward: all.by_ref().take(pairs).collect(),
            backward: all.collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillStatus {
    Known,
    /// Injected as a new source by single-image inpainting.
    Inpainted,
    FilledForward,
    FilledBackward,
    FilledBoth,
    Unfilled,
}

impl FillStatus {
    pub fn is_filled(self) -> bool {
        !matches!(self, FillStatus::Unfilled)
    }
}

/// Values and hop counts reached from one temporal side.
#[derive(Debug, Clone)]
pub struct SideState {
    pub value: RgbImageF32,
    /// Frames traversed from the source; [`UNREACHED`] when none.
    pub hop: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    /// Earlier frames fill later ones (frame `i - 1` -> `i`).
    ForwardInTime,
    /// Later frames fill earlier ones (frame `i + 1` -> `i`).
    BackwardInTime,
}

/// Per-frame propagation bookkeeping.
#[derive(Debug, Clone)]
pub struct PropagationState {
    width: usize,
    height: usize,
    /// Pixels that seed the sweeps: known pixels plus injected ones.
    source: Vec<Vec<bool>>,
    inpainted: Vec<Vec<bool>>,
    source_value: Vec<RgbImageF32>,
    forward: Vec<SideState>,
    backward: Vec<SideState>,
}

impl PropagationState {
    /// Sources are the unmasked pixels of each frame.
    pub fn new(bundle: &SequenceBundle) -> Self {
        let (w, h) = bundle.dims();
        let source: Vec<Vec<bool>> = bundle.masks().iter().map(|m| m.not().bits().to_vec()).collect();
        let source_value: Vec<RgbImageF32> = bundle
            .frames()
            .iter()
            .zip(&source)
            .map(|(f, src)| {
                let mut img = f.to_float();
                for (i, _) in src.iter().enumerate().filter(|(_, &s)| !s) {
                    img.data[3 * i..3 * i + 3].fill(0.0);
                }
                img
            })
            .collect();
        let mut state = Self {
            width: w,
            height: h,
            inpainted: vec![vec![false; w * h]; source.len()],
            source,
            source_value,
            forward: Vec::new(),
            backward: Vec::new(),
        };
        state.reset_sides();
        state
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn forward(&self) -> &[SideState] {
        &self.forward
    }

    pub fn backward(&self) -> &[SideState] {
        &self.backward
    }

    /// Clears both sides back to the source pixels (hop 0).
    pub fn reset_sides(&mut self) {
        let fresh: Vec<SideState> = self
            .source
            .iter()
            .zip(&self.source_value)
            .map(|(src, val)| SideState {
                value: val.clone(),
                hop: src.iter().map(|&s| if s { 0 } else { UNREACHED }).collect(),
            })
            .collect();
        self.forward = fresh.clone();
        self.backward = fresh;
    }

    /// Adds the `mask`ed pixels of `values` as new sources in frame `frame`.
    /// Takes effect at the next [`reset_sides`](Self::reset_sides).
    pub fn inject(&mut self, frame: usize, mask: &Mask, values: &Frame) -> Result<()> {
        check_dims("injected mask", (self.width, self.height), mask.dims())?;
        check_dims("injected frame", (self.width, self.height), values.dims())?;
        for i in mask.indices() {
            if self.source[frame][i] {
                continue;
            }
            self.source[frame][i] = true;
            self.inpainted[frame][i] = true;
            for c in 0..3 {
                self.source_value[frame].data[3 * i + c] = values.rgb()[3 * i + c] as f32;
            }
        }
        Ok(())
    }

    fn sides_mut(&mut self, dir: SweepDirection) -> &mut Vec<SideState> {
        match dir {
            SweepDirection::ForwardInTime => &mut self.forward,
            SweepDirection::BackwardInTime => &mut self.backward,
        }
    }
}

/// Fills frame `target` of `side` from `src` through `flow` where `valid`.
fn fill_frame(target: &mut SideState, src: &SideState, flow: &FlowField, valid: &Mask, width: usize, height: usize) {
    let target_ro: &SideState = target;
    let rows = par::map_range(height, |y| {
        let mut updates: Vec<(usize, [f32; 3], u32)> = Vec::new();
        for x in 0..width {
            let i = y * width + x;
            if target_ro.hop[i] != UNREACHED || !valid.get(x, y) {
                continue;
            }
            let [dx, dy] = flow.get(x, y);
            let Some(support) = bilinear_support(width, height, x as f32 + dx, y as f32 + dy) else {
                continue;
            };
            // every contributing pixel must already hold a value on this side
            if support.cells().iter().any(|&(j, _)| src.hop[j] == UNREACHED) {
                continue;
            }
            let mut v = [0f32; 3];
            let mut hop = 0;
            for &(j, wgt) in support.cells() {
                for (c, vc) in v.iter_mut().enumerate() {
                    *vc += wgt * src.value.data[3 * j + c];
                }
                hop = hop.max(src.hop[j]);
            }
            updates.push((i, v, hop + 1));
        }
        updates
    });
    for (i, v, hop) in rows.into_iter().flatten() {
        target.value.data[3 * i..3 * i + 3].copy_from_slice(&v);
        target.hop[i] = hop;
    }
}

fn sweep_side(
    sides: &mut [SideState],
    flows: &CompletedFlows,
    validity: &FlowValidity,
    dir: SweepDirection,
    width: usize,
    height: usize,
) {
    let n = sides.len();
    match dir {
        SweepDirection::ForwardInTime => {
            for i in 1..n {
                let (done, rest) = sides.split_at_mut(i);
                fill_frame(
                    &mut rest[0],
                    &done[i - 1],
                    &flows.backward[i - 1],
                    &validity.backward[i - 1],
                    width,
                    height,
                );
            }
        }
        SweepDirection::BackwardInTime => {
            for i in (0..n.saturating_sub(1)).rev() {
                let (head, done) = sides.split_at_mut(i + 1);
                fill_frame(
                    &mut head[i],
                    &done[0],
                    &flows.forward[i],
                    &validity.forward[i],
                    width,
                    height,
                );
            }
        }
    }
}

fn check_flows(state: &PropagationState, flows: &CompletedFlows, validity: &FlowValidity) -> Result<()> {
    let pairs = state.len().saturating_sub(1);
    if flows.forward.len() != pairs
        || flows.backward.len() != pairs
        || validity.forward.len() != pairs
        || validity.backward.len() != pairs
    {
        return Err(Error::Invalid(format!(
            "flows/validity do not cover the {pairs} frame pairs"
        )));
    }
    let dims = (state.width, state.height);
    for f in flows.forward.iter().chain(&flows.backward) {
        check_dims("propagation flow", dims, f.dims())?;
    }
    Ok(())
}

/// One single-pass sweep in `dir`, updating that side of `state`.
pub fn sweep(
    state: &mut PropagationState,
    flows: &CompletedFlows,
    validity: &FlowValidity,
    dir: SweepDirection,
) -> Result<()> {
    check_flows(state, flows, validity)?;
    let (w, h) = (state.width, state.height);
    sweep_side(state.sides_mut(dir), flows, validity, dir, w, h);
    Ok(())
}

/// Both sweeps, run concurrently on their own sides.
pub fn sweep_both(state: &mut PropagationState, flows: &CompletedFlows, validity: &FlowValidity) -> Result<()> {
    check_flows(state, flows, validity)?;
    let (w, h) = (state.width, state.height);
    let (fwd, bwd) = (&mut state.forward, &mut state.backward);
    par::join(
        || sweep_side(fwd, flows, validity, SweepDirection::ForwardInTime, w, h),
        || sweep_side(bwd, flows, validity, SweepDirection::BackwardInTime, w, h),
    );
    Ok(())
}

/// Weights `(w_f, w_b)` for candidates at hop distances `d_f`, `d_b`:
/// inversely proportional to distance, summing to one.
pub fn blend_weights(d_f: u32, d_b: u32) -> (f64, f64) {
    let total = d_f as f64 + d_b as f64;
    if total == 0.0 {
        return (0.5, 0.5);
    }
    (d_b as f64 / total, d_f as f64 / total)
}

pub fn blend_value(v_f: f32, d_f: u32, v_b: f32, d_b: u32) -> f32 {
    let (wf, wb) = blend_weights(d_f, d_b);
    (wf * v_f as f64 + wb * v_b as f64) as f32
}

/// Per-frame result of [`blend`].
#[derive(Debug, Clone)]
pub struct BlendedFrame {
    pub values: RgbImageF32,
    pub status: Vec<FillStatus>,
}

impl BlendedFrame {
    pub fn unfilled_mask(&self) -> Mask {
        Mask::from_bits(
            self.values.width,
            self.values.height,
            self.status.iter().map(|&s| s == FillStatus::Unfilled).collect(),
        )
        .expect("status length matches frame")
    }
}

/// Resolves each pixel from the two sides.
pub fn blend(state: &PropagationState) -> Vec<BlendedFrame> {
    let npx = state.width * state.height;
    (0..state.len())
        .map(|f| {
            let (fw, bw) = (&state.forward[f], &state.backward[f]);
            let mut values = RgbImageF32::zeros(state.width, state.height);
            let mut status = Vec::with_capacity(npx);
            for i in 0..npx {
                let px = 3 * i..3 * i + 3;
                let st = if state.source[f][i] {
                    values.data[px.clone()].copy_from_slice(&state.source_value[f].data[px]);
                    if state.inpainted[f][i] {
                        FillStatus::Inpainted
                    } else {
                        FillStatus::Known
                    }
                } else {
                    match (fw.hop[i], bw.hop[i]) {
                        (UNREACHED, UNREACHED) => FillStatus::Unfilled,
                        (_, UNREACHED) => {
                            values.data[px.clone()].copy_from_slice(&fw.value.data[px]);
                            FillStatus::FilledForward
                        }
                        (UNREACHED, _) => {
                            values.data[px.clone()].copy_from_slice(&bw.value.data[px]);
                            FillStatus::FilledBackward
                        }
                        (df, db) => {
                            for k in px {
                                values.data[k] = blend_value(fw.value.data[k], df, bw.value.data[k], db);
                            }
                            FillStatus::FilledBoth
                        }
                    }
                };
                status.push(st);
            }
            BlendedFrame { values, status }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub known: usize,
    pub filled_forward_only: usize,
    pub filled_backward_only: usize,
    pub filled_both: usize,
    pub unfilled: usize,
    /// Mean hop distance of the candidates used by filled pixels.
    pub mean_hop_distance: f64,
    /// Fraction of consistency checks failed by flows leaving missing pixels.
    pub invalid_flow_fraction: f64,
}

impl PropagationStats {
    pub fn collect(state: &PropagationState, blended: &[BlendedFrame], validity: &FlowValidity) -> Self {
        let mut s = PropagationStats::default();
        let mut hop_sum = 0f64;
        let mut hop_n = 0usize;
        for (f, b) in blended.iter().enumerate() {
            for (i, st) in b.status.iter().enumerate() {
                let (hf, hb) = (state.forward[f].hop[i], state.backward[f].hop[i]);
                match st {
                    FillStatus::Known | FillStatus::Inpainted => s.known += 1,
                    FillStatus::FilledForward => {
                        s.filled_forward_only += 1;
                        hop_sum += hf as f64;
                        hop_n += 1;
                    }
                    FillStatus::FilledBackward => {
                        s.filled_backward_only += 1;
                        hop_sum += hb as f64;
                        hop_n += 1;
                    }
                    FillStatus::FilledBoth => {
                        s.filled_both += 1;
                        hop_sum += hf as f64 + hb as f64;
                        hop_n += 2;
                    }
                    FillStatus::Unfilled => s.unfilled += 1,
                }
            }
        }
        s.mean_hop_distance = if hop_n > 0 { hop_sum / hop_n as f64 } else { 0.0 };
        let (mut checks, mut invalid) = (0usize, 0usize);
        let n = state.len();
        for f in 0..n {
            for (i, &src) in state.source[f].iter().enumerate() {
                if src && !state.inpainted[f][i] {
                    continue;
                }
                if f > 0 {
                    checks += 1;
                    invalid += !validity.backward[f - 1].bits()[i] as usize;
                }
                if f + 1 < n {
                    checks += 1;
                    invalid += !validity.forward[f].bits()[i] as usize;
                }
            }
        }
        s.invalid_flow_fraction = if checks > 0 {
            invalid as f64 / checks as f64
        } else {
            0.0
        };
        s
    }
}

#[derive(Debug, Clone)]
pub struct PropagationOutcome {
    /// Quantized output frames.
    pub frames: Vec<Frame>,
    /// Per-frame pixels still unfilled.
    pub unfilled: Vec<Mask>,
    pub blended: Vec<BlendedFrame>,
    pub state: PropagationState,
    pub validity: FlowValidity,
    pub stats: PropagationStats,
}

/// Consistency check, both sweeps and blending.
pub fn propagate(
    bundle: &SequenceBundle,
    flows: &CompletedFlows,
    cfg: &PropagationConfig,
) -> Result<PropagationOutcome> {
    let validity = FlowValidity::compute(flows, cfg)?;
    let mut state = PropagationState::new(bundle);
    sweep_both(&mut state, flows, &validity)?;
    let blended = blend(&state);
    let stats = PropagationStats::collect(&state, &blended, &validity);
    let frames = blended
        .iter()
        .enumerate()
        .map(|(i, b)| b.values.quantize(bundle.frames()[i].index()))
        .collect();
    let unfilled = blended.iter().map(BlendedFrame::unfilled_mask).collect();
    Ok(PropagationOutcome {
        frames,
        unfilled,
        blended,
        state,
        validity,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FlowDirection;

    fn flows(n: usize, w: usize, h: usize, fwd: [f32; 2], bwd: [f32; 2]) -> CompletedFlows {
        CompletedFlows {
            forward: vec![FlowField::constant(w, h, fwd, FlowDirection::Forward); n - 1],
            backward: vec![FlowField::constant(w, h, bwd, FlowDirection::Backward); n - 1],
        }
    }

    #[test]
    fn exact_inverse_pair_is_valid_inside() {
        let f = FlowField::constant(10, 6, [2.0, 0.0], FlowDirection::Forward);
        let b = FlowField::constant(10, 6, [-2.0, 0.0], FlowDirection::Backward);
        let v = validity_mask(&f, &b, &PropagationConfig::default()).unwrap();
        for y in 0..6 {
            for x in 0..10 {
                assert_eq!(v.get(x, y), x < 8, "({x},{y})");
            }
        }
    }

    #[test]
    fn inconsistent_pair_is_invalid() {
        let f = FlowField::constant(20, 4, [2.0, 0.0], FlowDirection::Forward);
        let b = FlowField::constant(20, 4, [-8.0, 0.0], FlowDirection::Backward);
        assert_eq!(round_trip_residual(&f, &b, 10, 1), Some(6.0));
        let v = validity_mask(&f, &b, &PropagationConfig::default()).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn out_of_grid_target_is_invalid() {
        let f = FlowField::constant(4, 4, [0.0, 10.0], FlowDirection::Forward);
        let b = FlowField::zeros(4, 4, FlowDirection::Backward);
        assert!(validity_mask(&f, &b, &PropagationConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn blend_arithmetic() {
        assert_eq!(blend_value(10.0, 1, 20.0, 3), 12.5);
        assert_eq!(blend_value(10.0, 2, 20.0, 2), 15.0);
        assert_eq!(blend_value(42.0, 1, 42.0, 7), 42.0);
        let (a, b) = blend_weights(3, 5);
        assert_eq!(a + b, 1.0);
    }

    fn static_bundle(n: usize, w: usize, h: usize, masks: Vec<Mask>) -> SequenceBundle {
        let frames = (0..n)
            .map(|i| Frame::from_fn(w, h, i, |x, y| [(x * 13 + y * 7) as u8, (x * y) as u8, 200]))
            .collect();
        SequenceBundle::new(
            frames,
            masks,
            vec![FlowField::zeros(w, h, FlowDirection::Forward); n - 1],
            vec![FlowField::zeros(w, h, FlowDirection::Backward); n - 1],
        )
        .unwrap()
    }

    #[test]
    fn static_scene_single_frame_hole() {
        let (w, h) = (12, 10);
        let hole = Mask::rect(w, h, 3, 3, 4, 4);
        let mut masks = vec![Mask::empty(w, h); 5];
        masks[2] = hole.clone();
        let b = static_bundle(5, w, h, masks);
        let fl = flows(5, w, h, [0.0; 2], [0.0; 2]);
        let out = propagate(&b, &fl, &PropagationConfig::default()).unwrap();
        assert!(out.unfilled.iter().all(Mask::is_empty));
        for (o, g) in out.frames.iter().zip(b.frames()) {
            assert_eq!(o, g);
        }
        for i in hole.indices() {
            assert_eq!(out.state.forward()[2].hop[i], 1);
            assert_eq!(out.state.backward()[2].hop[i], 1);
            assert_eq!(out.blended[2].status[i], FillStatus::FilledBoth);
        }
    }

    #[test]
    fn hop_counts_chain() {
        let (w, h) = (8, 8);
        let hole = Mask::rect(w, h, 2, 2, 3, 3);
        let masks = (0..5)
            .map(|i| {
                if (1..=3).contains(&i) {
                    hole.clone()
                } else {
                    Mask::empty(w, h)
                }
            })
            .collect();
        let b = static_bundle(5, w, h, masks);
        let out = propagate(&b, &flows(5, w, h, [0.0; 2], [0.0; 2]), &PropagationConfig::default()).unwrap();
        let i = hole.indices().next().unwrap();
        assert_eq!(out.state.forward()[2].hop[i], 2);
        assert_eq!(out.state.backward()[2].hop[i], 2);
        assert_eq!(out.state.forward()[1].hop[i], 1);
        assert_eq!(out.state.backward()[1].hop[i], 3);
    }

    #[test]
    fn unreachable_region_reported() {
        let (w, h) = (8, 8);
        let hole = Mask::rect(w, h, 1, 1, 2, 5);
        let b = static_bundle(4, w, h, vec![hole.clone(); 4]);
        let out = propagate(&b, &flows(4, w, h, [0.0; 2], [0.0; 2]), &PropagationConfig::default()).unwrap();
        for m in &out.unfilled {
            assert_eq!(m, &hole);
        }
        assert_eq!(out.stats.unfilled, 4 * hole.count());
    }

    #[test]
    fn empty_masks_unchanged() {
        let b = static_bundle(3, 6, 5, vec![Mask::empty(6, 5); 3]);
        let out = propagate(
            &b,
            &flows(3, 6, 5, [1.0, 0.0], [-1.0, 0.0]),
            &PropagationConfig::default(),
        )
        .unwrap();
        assert_eq!(out.frames, b.frames());
        assert!(out.unfilled.iter().all(Mask::is_empty));
    }

    #[test]
    fn subpixel_fill_needs_full_support() {
        // source frame 0 known except column 4; target pixel samples between 3 and 4
        let (w, h) = (8, 1);
        let masks = vec![Mask::rect(w, h, 4, 0, 1, 1), Mask::rect(w, h, 2, 0, 2, 1)];
        let b = static_bundle(2, w, h, masks);
        let fl = CompletedFlows {
            forward: vec![FlowField::constant(w, h, [-1.5, 0.0], FlowDirection::Forward)],
            backward: vec![FlowField::constant(w, h, [1.5, 0.0], FlowDirection::Backward)],
        };
        let out = propagate(&b, &fl, &PropagationConfig::default()).unwrap();
        // x=2 -> 3.5 touches unfilled column 4; x=3 -> 4.5 as well
        assert_eq!(out.blended[1].status[2], FillStatus::Unfilled);
        assert_eq!(out.blended[1].status[3], FillStatus::Unfilled);
    }
}

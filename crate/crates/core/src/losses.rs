//! Flow-completion losses and errors: masked L1, hard-example mining, EPE,
//! and the smooth/hard region split by local ground-truth variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_dims, FlowField, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HfemConfig {
    /// Percentage of masked cells labelled hard, in `(0, 100]`.
    pub hard_percent: f64,
    /// Weight of the hard-cell term, `>= 0`.
    pub hard_weight: f64,
}

impl Default for HfemConfig {
    fn default() -> Self {
        Self {
            hard_percent: 50.0,
            hard_weight: 1.0,
        }
    }
}

impl HfemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hard_percent > 0.0 && self.hard_percent <= 100.0) {
            return Err(Error::Config(format!(
                "hard_percent {} outside (0, 100]",
                self.hard_percent
            )));
        }
        if !(self.hard_weight >= 0.0 && self.hard_weight.is_finite()) {
            return Err(Error::Config(format!(
                "hard_weight {} must be finite and non-negative",
                self.hard_weight
            )));
        }
        Ok(())
    }
}

fn check_inputs(pred: &FlowField, gt: &FlowField, mask: &Mask) -> Result<()> {
    check_dims("ground-truth flow", pred.dims(), gt.dims())?;
    check_dims("mask", pred.dims(), mask.dims())?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

#[inline]
fn cell_l1(pred: &FlowField, gt: &FlowField, i: usize) -> f64 {
    let (p, g) = (pred.data(), gt.data());
    (p[2 * i] as f64 - g[2 * i] as f64).abs() + (p[2 * i + 1] as f64 - g[2 * i + 1] as f64).abs()
}

/// Sum of absolute channel differences over masked cells, divided by
/// `2 * |mask|` (the mask counts once per flow channel).
pub fn masked_l1(pred: &FlowField, gt: &FlowField, mask: &Mask) -> Result<f64> {
    check_inputs(pred, gt, mask)?;
    let sum: f64 = mask.indices().map(|i| cell_l1(pred, gt, i)).sum();
    Ok(sum / (2 * mask.count()) as f64)
}

/// The `ceil(p% * |mask|)` masked cells with the largest per-cell L1 error.
/// Ties go to the earlier cell in row-major order.
pub fn mine_hard_mask(pred: &FlowField, gt: &FlowField, mask: &Mask, cfg: &HfemConfig) -> Result<Mask> {
    check_inputs(pred, gt, mask)?;
    cfg.validate()?;
    let mut cells: Vec<(usize, f64)> = mask.indices().map(|i| (i, cell_l1(pred, gt, i))).collect();
    let keep = ((cfg.hard_percent * cells.len() as f64 / 100.0).ceil() as usize).clamp(1, cells.len());
    // stable: equal losses stay in row-major order
    cells.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut bits = vec![false; mask.bits().len()];
    for &(i, _) in &cells[..keep] {
        bits[i] = true;
    }
    Mask::from_bits(mask.width(), mask.height(), bits)
}

/// Masked L1 plus `hard_weight` times the masked L1 over the mined hard cells.
pub fn hfem_loss(pred: &FlowField, gt: &FlowField, mask: &Mask, cfg: &HfemConfig) -> Result<f64> {
    let base = masked_l1(pred, gt, mask)?;
    let hard = mine_hard_mask(pred, gt, mask, cfg)?;
    Ok(base + cfg.hard_weight * masked_l1(pred, gt, &hard)?)
}

/// Mean end-point error (Euclidean norm of the difference) over `region`.
pub fn epe(pred: &FlowField, gt: &FlowField, region: &Mask) -> Result<f64> {
    check_inputs(pred, gt, region)?;
    Ok(epe_sum(pred, gt, region) / region.count() as f64)
}

pub(crate) fn epe_sum(pred: &FlowField, gt: &FlowField, region: &Mask) -> f64 {
    let (p, g) = (pred.data(), gt.data());
    region
        .indices()
        .map(|i| {
            let dx = p[2 * i] as f64 - g[2 * i] as f64;
            let dy = p[2 * i + 1] as f64 - g[2 * i + 1] as f64;
            dx.hypot(dy)
        })
        .sum()
}

/// Local variance of `gt` at each cell: population variance over the 3x3
/// window clipped to the grid, summed over both channels.
pub fn local_variance(gt: &FlowField) -> Vec<f64> {
    let (w, h) = gt.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut n = 0f64;
            let mut s = [0f64; 2];
            let mut s2 = [0f64; 2];
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    let v = gt.get(xx, yy);
                    for c in 0..2 {
                        s[c] += v[c] as f64;
                        s2[c] += (v[c] as f64).powi(2);
                    }
                    n += 1.0;
                }
            }
            let var: f64 = (0..2).map(|c| (s2[c] / n - (s[c] / n).powi(2)).max(0.0)).sum();
            out.push(var);
        }
    }
    out
}

/// Splits `region` into cells whose local variance is `<= threshold`
/// (smooth) and the rest (hard).
pub fn split_smooth_hard(gt: &FlowField, region: &Mask, threshold: f64) -> Result<(Mask, Mask)> {
    check_dims("region", gt.dims(), region.dims())?;
    if region.is_empty() {
        return Err(Error::EmptyMask);
    }
    let var = local_variance(gt);
    let (w, h) = gt.dims();
    let smooth = Mask::from_bits(
        w,
        h,
        region
            .bits()
            .iter()
            .zip(&var)
            .map(|(&r, &v)| r && v <= threshold)
            .collect(),
    )?;
    let hard = region.difference(&smooth)?;
    Ok((smooth, hard))
}

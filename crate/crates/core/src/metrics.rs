//! PSNR and SSIM against reference frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_dims, Frame, Mask};
use crate::par;

/// Reported PSNR when the two frames are identical.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP)
}

/// `10 log10(255^2 / MSE)` over all pixels and channels, capped at [`PSNR_CAP`].
pub fn psnr(pred: &Frame, gt: &Frame) -> Result<f64> {
    check_dims("reference frame", pred.dims(), gt.dims())?;
    let se: f64 = pred
        .rgb()
        .iter()
        .zip(gt.rgb())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    Ok(psnr_from_mse(se / pred.rgb().len() as f64))
}

/// PSNR restricted to the pixels selected by `region`.
pub fn psnr_region(pred: &Frame, gt: &Frame, region: &Mask) -> Result<f64> {
    check_dims("reference frame", pred.dims(), gt.dims())?;
    check_dims("region", pred.dims(), region.dims())?;
    if region.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (p, g) = (pred.rgb(), gt.rgb());
    let se: f64 = region
        .indices()
        .flat_map(|i| 3 * i..3 * i + 3)
        .map(|k| (p[k] as f64 - g[k] as f64).powi(2))
        .sum();
    Ok(psnr_from_mse(se / (3 * region.count()) as f64))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k: [f64; SSIM_WINDOW] =
        std::array::from_fn(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-mode separable filter of a `w x h` plane.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0f64; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0f64; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|j| k[j] * tmp[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// SSIM per valid window position, averaged over the three channels.
/// Position `(x, y)` is the window centred on pixel `(x + 5, y + 5)`.
#[derive(Debug, Clone)]
pub struct SsimMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

pub fn ssim_map(pred: &Frame, gt: &Frame) -> Result<SsimMap> {
    check_dims("reference frame", pred.dims(), gt.dims())?;
    let (w, h) = pred.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let k = gaussian_kernel();
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let per_channel = par::map_range(3, |c| {
        let plane = |f: &Frame| -> Vec<f64> { f.rgb().iter().skip(c).step_by(3).map(|&v| v as f64).collect() };
        let (x, y) = (plane(pred), plane(gt));
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let sxx = filter_valid(&xx, w, h, &k);
        let syy = filter_valid(&yy, w, h, &k);
        let sxy = filter_valid(&xy, w, h, &k);
        (0..mx.len())
            .map(|i| {
                let (ux, uy) = (mx[i], my[i]);
                let vx = sxx[i] - ux * ux;
                let vy = syy[i] - uy * uy;
                let cov = sxy[i] - ux * uy;
                ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
            })
            .collect::<Vec<f64>>()
    });
    let values = (0..per_channel[0].len())
        .map(|i| (per_channel[0][i] + per_channel[1][i] + per_channel[2][i]) / 3.0)
        .collect();
    Ok(SsimMap {
        width: w + 1 - SSIM_WINDOW,
        height: h + 1 - SSIM_WINDOW,
        values,
    })
}

/// Single-scale SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01,
/// K2 = 0.03, L = 255), per channel then averaged, over valid windows.
pub fn ssim(pred: &Frame, gt: &Frame) -> Result<f64> {
    let map = ssim_map(pred, gt)?;
    Ok(map.values.iter().sum::<f64>() / map.values.len() as f64)
}

/// SSIM averaged over windows centred inside `region`; `None` when no valid
/// window centre falls in it.
pub fn ssim_region(pred: &Frame, gt: &Frame, region: &Mask) -> Result<Option<f64>> {
    check_dims("region", pred.dims(), region.dims())?;
    let map = ssim_map(pred, gt)?;
    let r = SSIM_WINDOW / 2;
    let (mut sum, mut n) = (0f64, 0usize);
    for y in 0..map.height {
        for x in 0..map.width {
            if region.get(x + r, y + r) {
                sum += map.values[y * map.width + x];
                n += 1;
            }
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricScope {
    #[default]
    Full,
    /// Only pixels inside each frame's hole mask.
    Hole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub index: usize,
    pub psnr: f64,
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEpeReport {
    pub overall: f64,
    pub smooth: Option<f64>,
    pub hard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scope: MetricScope,
    pub frames: Vec<FrameMetrics>,
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowEpeReport>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Scores `pred` against `gt` frame by frame. Under [`MetricScope::Hole`],
/// frames whose mask is empty are left out.
pub fn evaluate_frames(
    pred: &[Frame],
    gt: &[Frame],
    masks: Option<&[Mask]>,
    scope: MetricScope,
) -> Result<MetricsReport> {
    if pred.len() != gt.len() {
        return Err(Error::Invalid(format!(
            "{} predicted frames vs {} reference frames",
            pred.len(),
            gt.len()
        )));
    }
    let masks = match (scope, masks) {
        (MetricScope::Hole, None) => {
            return Err(Error::Invalid("hole scope needs masks".into()));
        }
        (MetricScope::Hole, Some(m)) if m.len() != pred.len() => {
            return Err(Error::Invalid(format!("{} masks for {} frames", m.len(), pred.len())));
        }
        (_, m) => m,
    };
    let rows = par::map_range(pred.len(), |i| -> Result<Option<FrameMetrics>> {
        let (p, g) = (&pred[i], &gt[i]);
        match scope {
            MetricScope::Full => Ok(Some(FrameMetrics {
                index: g.index(),
                psnr: psnr(p, g)?,
                ssim: Some(ssim(p, g)?),
            })),
            MetricScope::Hole => {
                let m = &masks.expect("checked above")[i];
                if m.is_empty() {
                    return Ok(None);
                }
                Ok(Some(FrameMetrics {
                    index: g.index(),
                    psnr: psnr_region(p, g, m)?,
                    ssim: ssim_region(p, g, m)?,
                }))
            }
        }
    });
    let frames: Vec<FrameMetrics> = rows.into_iter().filter_map(Result::transpose).collect::<Result<_>>()?;
    Ok(MetricsReport {
        scope,
        mean_psnr: mean(frames.iter().map(|f| f.psnr)),
        mean_ssim: mean(frames.iter().filter_map(|f| f.ssim)),
        frames,
        flow: None,
    })
}

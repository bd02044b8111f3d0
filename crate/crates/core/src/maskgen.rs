//! Synthetic hole masks: a centered `H/4 x W/4` box, or a random polygon that
//! drifts and wobbles from frame to frame.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mask;

const SHAPE_RETRIES: usize = 64;
const JITTER_RETRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskSetting {
    /// Random moving shape standing in for an object to remove.
    #[default]
    ObjectRemoval,
    /// Fixed centered box in every frame.
    FixedRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskGenConfig {
    pub setting: MaskSetting,
    pub seed: u64,
    /// Inclusive `[min, max]` polygon vertex count.
    pub vertex_count: [usize; 2],
    /// Inclusive `[min, max]` fraction of the frame covered by each mask.
    pub area_fraction: [f64; 2],
    /// Largest per-frame step of the random-walk translation, in whole pixels.
    pub max_translation: u32,
    /// Largest per-vertex jitter, in pixels.
    pub max_jitter: f64,
}

impl Default for MaskGenConfig {
    fn default() -> Self {
        Self {
            setting: MaskSetting::ObjectRemoval,
            seed: 0,
            vertex_count: [5, 12],
            area_fraction: [0.05, 0.20],
            max_translation: 5,
            max_jitter: 2.0,
        }
    }
}

impl MaskGenConfig {
    pub fn validate(&self) -> Result<()> {
        let [vmin, vmax] = self.vertex_count;
        if vmin < 3 || vmin > vmax {
            return Err(Error::Config(format!(
                "vertex_count [{vmin}, {vmax}] must be a nonempty range starting at 3 or more"
            )));
        }
        let [amin, amax] = self.area_fraction;
        if !(amin > 0.0 && amin <= amax && amax < 1.0) {
            return Err(Error::Config(format!(
                "area_fraction [{amin}, {amax}] must be a nonempty range inside (0, 1)"
            )));
        }
        if !(self.max_jitter >= 0.0 && self.max_jitter.is_finite()) {
            return Err(Error::Config("max_jitter must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Centered box of `round(H/4)` rows by `round(W/4)` columns.
pub fn fixed_square_mask(width: usize, height: usize) -> Result<Mask> {
    if width < 4 || height < 4 {
        return Err(Error::Invalid(format!(
            "fixed region needs at least 4x4 frames, got {width}x{height}"
        )));
    }
    let bw = (width + 2) / 4;
    let bh = (height + 2) / 4;
    Ok(Mask::rect(width, height, (width - bw) / 2, (height - bh) / 2, bw, bh))
}

type Point = (f64, f64);

fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() / 2.0
}

/// Even-odd scanline fill sampled at pixel centres, clipped to the grid.
pub fn rasterize_polygon(poly: &[Point], width: usize, height: usize) -> Mask {
    let mut bits = vec![false; width * height];
    let mut xs = Vec::with_capacity(poly.len());
    for y in 0..height {
        let yc = y as f64 + 0.5;
        xs.clear();
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            // half-open so shared vertices are counted once
            if (a.1 <= yc) != (b.1 <= yc) {
                xs.push(a.0 + (yc - a.1) / (b.1 - a.1) * (b.0 - a.0));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let start = (span[0] - 0.5).ceil().max(0.0);
            let end = (span[1] - 0.5).ceil().min(width as f64);
            if end <= start {
                continue;
            }
            for x in start as usize..end as usize {
                bits[y * width + x] = true;
            }
        }
    }
    Mask::from_bits(width, height, bits).expect("sized above")
}

fn fraction_ok(mask: &Mask, cfg: &MaskGenConfig) -> bool {
    let f = mask.count() as f64 / (mask.width() * mask.height()) as f64;
    mask.count() > 0 && f >= cfg.area_fraction[0] && f <= cfg.area_fraction[1]
}

/// Star-shaped polygon around the frame centre: sorted random angles and
/// radii, scaled to the target area. Always simple.
fn random_polygon(rng: &mut ChaCha8Rng, width: usize, height: usize, cfg: &MaskGenConfig) -> Vec<Point> {
    let n = rng.random_range(cfg.vertex_count[0]..=cfg.vertex_count[1]);
    let target = rng.random_range(cfg.area_fraction[0]..=cfg.area_fraction[1]) * (width * height) as f64;
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let unit: Vec<Point> = angles
        .iter()
        .map(|&a| {
            let r = rng.random_range(0.5..=1.0);
            (r * a.cos(), r * a.sin())
        })
        .collect();
    let area = polygon_area(&unit);
    let s = if area > 0.0 { (target / area).sqrt() } else { 0.0 };
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    unit.iter().map(|&(x, y)| (cx + s * x, cy + s * y)).collect()
}

fn bbox(poly: &[Point]) -> (f64, f64, f64, f64) {
    poly.iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
    )
}

fn fits(b: (f64, f64, f64, f64), t: (i64, i64), width: usize, height: usize) -> bool {
    b.0 + t.0 as f64 >= 0.0
        && b.1 + t.1 as f64 >= 0.0
        && b.2 + t.0 as f64 <= width as f64
        && b.3 + t.1 as f64 <= height as f64
}

/// Per-frame masks of one random polygon under a random-walk translation and
/// independent per-vertex jitter. Deterministic in `cfg.seed`.
pub fn moving_shape_masks(width: usize, height: usize, n_frames: usize, cfg: &MaskGenConfig) -> Result<Vec<Mask>> {
    cfg.validate()?;
    if n_frames == 0 {
        return Err(Error::Invalid("n_frames must be at least 1".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::Invalid(format!("degenerate frame size {width}x{height}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = (0..SHAPE_RETRIES)
        .map(|_| random_polygon(&mut rng, width, height, cfg))
        .find(|p| fits(bbox(p), (0, 0), width, height) && fraction_ok(&rasterize_polygon(p, width, height), cfg))
        .ok_or_else(|| {
            Error::Invalid(format!(
                "no polygon within the area range fits a {width}x{height} frame after {SHAPE_RETRIES} attempts"
            ))
        })?;
    let bounds = bbox(&base);
    let step = cfg.max_translation as i64;
    let mut t = (0i64, 0i64);
    let mut masks = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        if frame > 0 && step > 0 {
            let d = (rng.random_range(-step..=step), rng.random_range(-step..=step));
            t = [(t.0 + d.0, t.1 + d.1), (t.0 - d.0, t.1 - d.1)]
                .into_iter()
                .find(|&c| fits(bounds, c, width, height))
                .unwrap_or(t);
        }
        let mut accepted = None;
        for _ in 0..JITTER_RETRIES {
            let poly: Vec<Point> = base
                .iter()
                .map(|&(x, y)| {
                    let (jx, jy) = if cfg.max_jitter > 0.0 {
                        (
                            rng.random_range(-cfg.max_jitter..=cfg.max_jitter),
                            rng.random_range(-cfg.max_jitter..=cfg.max_jitter),
                        )
                    } else {
                        (0.0, 0.0)
                    };
                    (x + t.0 as f64 + jx, y + t.1 as f64 + jy)
                })
                .collect();
            if polygon_area(&poly) <= 0.0 {
                continue;
            }
            let m = rasterize_polygon(&poly, width, height);
            if fraction_ok(&m, cfg) {
                accepted = Some(m);
                break;
            }
        }
        masks.push(accepted.ok_or_else(|| {
            Error::Invalid(format!(
                "frame {frame}: jittered shape left the area range {JITTER_RETRIES} times"
            ))
        })?);
    }
    Ok(masks)
}

/// Masks for `n_frames` frames in the configured setting.
pub fn synthesize_masks(width: usize, height: usize, n_frames: usize, cfg: &MaskGenConfig) -> Result<Vec<Mask>> {
    match cfg.setting {
        MaskSetting::FixedRegion => {
            if n_frames == 0 {
                return Err(Error::Invalid("n_frames must be at least 1".into()));
            }
            Ok(vec![fixed_square_mask(width, height)?; n_frames])
        }
        MaskSetting::ObjectRemoval => moving_shape_masks(width, height, n_frames, cfg),
    }
}

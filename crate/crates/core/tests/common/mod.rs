//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use flowfill::completion::CompletedFlows;
use flowfill::{FlowDirection, FlowField, Frame, Mask, SequenceBundle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(a0 + a1 x + a2 y, b0 + b1 x + b2 y)`.
pub fn affine(w: usize, h: usize, a: [f64; 3], b: [f64; 3], dir: FlowDirection) -> FlowField {
    FlowField::from_fn(w, h, dir, |x, y| {
        let (x, y) = (x as f64, y as f64);
        [(a[0] + a[1] * x + a[2] * y) as f32, (b[0] + b[1] * x + b[2] * y) as f32]
    })
}

pub fn random_affine(rng: &mut ChaCha8Rng, w: usize, h: usize, dir: FlowDirection) -> FlowField {
    let mut coef = || -> [f64; 3] {
        [
            rng.random_range(-4.0..4.0),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
        ]
    };
    let (a, b) = (coef(), coef());
    affine(w, h, a, b, dir)
}

/// Functions that are exactly harmonic on the grid: affine terms plus
/// multiples of `x^2 - y^2` and `x y`, centred on the grid.
pub fn random_harmonic(rng: &mut ChaCha8Rng, w: usize, h: usize, dir: FlowDirection) -> FlowField {
    let mut coef = || -> [f64; 5] {
        [
            rng.random_range(-4.0..4.0),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.01..0.01),
            rng.random_range(-0.01..0.01),
        ]
    };
    let (a, b) = (coef(), coef());
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    FlowField::from_fn(w, h, dir, |x, y| {
        let (u, v) = (x as f64 - cx, y as f64 - cy);
        let eval = |c: &[f64; 5]| c[0] + c[1] * u + c[2] * v + c[3] * (u * u - v * v) + c[4] * u * v;
        [eval(&a) as f32, eval(&b) as f32]
    })
}

/// A union of random rectangles and discs that leaves a one-cell frame of
/// known cells around the grid and covers at most `max_fraction` of it.
pub fn random_interior_hole(rng: &mut ChaCha8Rng, w: usize, h: usize, max_fraction: f64) -> Mask {
    let limit = (max_fraction * (w * h) as f64).floor() as usize;
    let mut bits = vec![false; w * h];
    let mut count = 0;
    for _ in 0..40 {
        let mut next = bits.clone();
        if rng.random_bool(0.5) {
            let bw = rng.random_range(1..=(w - 2) / 2);
            let bh = rng.random_range(1..=(h - 2) / 2);
            let x0 = rng.random_range(1..=w - 1 - bw);
            let y0 = rng.random_range(1..=h - 1 - bh);
            for y in y0..y0 + bh {
                for x in x0..x0 + bw {
                    next[y * w + x] = true;
                }
            }
        } else {
            let r: f64 = rng.random_range(1.0..(w.min(h) as f64 / 4.0));
            let cx: f64 = rng.random_range(1.0..(w - 1) as f64);
            let cy: f64 = rng.random_range(1.0..(h - 1) as f64);
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                        next[y * w + x] = true;
                    }
                }
            }
        }
        let n = next.iter().filter(|&&b| b).count();
        if n > limit {
            continue;
        }
        bits = next;
        count = n;
    }
    if count == 0 {
        bits[(h / 2) * w + w / 2] = true;
    }
    Mask::from_bits(w, h, bits).unwrap()
}

/// Copy of `flow` whose masked cells hold an unrelated value.
pub fn scribble(flow: &FlowField, mask: &Mask, value: [f32; 2]) -> FlowField {
    let mut out = flow.clone();
    for i in mask.indices() {
        out.set(i % flow.width(), i / flow.width(), value);
    }
    out
}

/// Deterministic texture defined on all integer coordinates.
pub fn texture(x: i64, y: i64) -> [u8; 3] {
    let h = (x.wrapping_mul(0x9E37_79B9) ^ y.wrapping_mul(0x85EB_CA6B)).wrapping_mul(0xC2B2_AE35) as u64;
    [(h >> 8) as u8, (h >> 24) as u8, (h >> 40) as u8]
}

/// A scene translating by `step` pixels per frame with exact flows.
pub struct Translation {
    pub step: (i64, i64),
    pub truth: Vec<Frame>,
    pub masks: Vec<Mask>,
    pub bundle: SequenceBundle,
    pub flows: CompletedFlows,
}

/// Frame `t` shows the texture shifted by `t * step`; hole pixels are blacked
/// out in the bundle so nothing can leak from them.
pub fn translation(n: usize, w: usize, h: usize, step: (i64, i64), hole_at: impl Fn(usize) -> Mask) -> Translation {
    let truth: Vec<Frame> = (0..n)
        .map(|t| {
            Frame::from_fn(w, h, t, |x, y| {
                texture(x as i64 - t as i64 * step.0, y as i64 - t as i64 * step.1)
            })
        })
        .collect();
    let masks: Vec<Mask> = (0..n).map(&hole_at).collect();
    let holed = truth
        .iter()
        .zip(&masks)
        .map(|(f, m)| Frame::from_fn(w, h, f.index(), |x, y| if m.get(x, y) { [0; 3] } else { f.get(x, y) }))
        .collect();
    let d = [step.0 as f32, step.1 as f32];
    let flows = CompletedFlows {
        forward: vec![FlowField::constant(w, h, d, FlowDirection::Forward); n - 1],
        backward: vec![FlowField::constant(w, h, [-d[0], -d[1]], FlowDirection::Backward); n - 1],
    };
    let bundle = SequenceBundle::new(holed, masks.clone(), flows.forward.clone(), flows.backward.clone()).unwrap();
    Translation {
        step,
        truth,
        masks,
        bundle,
        flows,
    }
}

/// Hop count to the nearest known source walking the exact flow chain
/// towards earlier frames (`dir = -1`) or later frames (`dir = 1`).
pub fn chain_hop(tr: &Translation, t: usize, x: usize, y: usize, dir: i64) -> Option<u32> {
    let (w, h) = tr.bundle.dims();
    let n = tr.bundle.len() as i64;
    let mut hop = 0;
    let mut s = t as i64;
    let (mut px, mut py) = (x as i64, y as i64);
    loop {
        if !tr.masks[s as usize].get(px as usize, py as usize) {
            return Some(hop);
        }
        s += dir;
        px += dir * tr.step.0;
        py += dir * tr.step.1;
        hop += 1;
        if s < 0 || s >= n || px < 0 || py < 0 || px >= w as i64 || py >= h as i64 {
            return None;
        }
    }
}

/// True when `a` and `b` hold bit-identical values.
pub fn same_bits(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

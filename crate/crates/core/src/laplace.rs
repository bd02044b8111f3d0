//! Harmonic fill of masked cells: each unknown becomes the mean of its
//! in-grid 4-neighbours, with known cells as fixed boundary values.
//!
//! Solved with red-black successive over-relaxation. Cells of one colour only
//! read cells of the other colour (or known cells), so each half-sweep is a
//! pure map over the colour's cells followed by an ordered scatter. The
//! result does not depend on thread count.

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::par;

#[derive(Debug, Clone, Copy)]
struct Unknown {
    idx: u32,
    nbrs: [u32; 4],
    n: u8,
}

/// Precomputed neighbourhoods for one mask; reusable across channels.
#[derive(Debug, Clone)]
pub struct LaplacePlan {
    colors: [Vec<Unknown>; 2],
    omega: f64,
    boundary: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub max_update: f64,
    pub converged: bool,
}

impl LaplacePlan {
    /// Fails when every cell is masked (nothing to interpolate from).
    pub fn new(mask: &Mask) -> Result<Self> {
        let (w, h) = mask.dims();
        if mask.is_full() {
            return Err(Error::NoKnownData(format!("all {w}x{h} cells are masked")));
        }
        let mut colors: [Vec<Unknown>; 2] = [Vec::new(), Vec::new()];
        let mut boundary = Vec::new();
        let (mut x_min, mut x_max, mut y_min, mut y_max) = (usize::MAX, 0, usize::MAX, 0);
        for y in 0..h {
            for x in 0..w {
                let idx = y * w + x;
                let mut nbrs = [0u32; 4];
                let mut n = 0u8;
                let mut push = |nx: usize, ny: usize| {
                    nbrs[n as usize] = (ny * w + nx) as u32;
                    n += 1;
                };
                if x > 0 {
                    push(x - 1, y);
                }
                if x + 1 < w {
                    push(x + 1, y);
                }
                if y > 0 {
                    push(x, y - 1);
                }
                if y + 1 < h {
                    push(x, y + 1);
                }
                if mask.get(x, y) {
                    x_min = x_min.min(x);
                    x_max = x_max.max(x);
                    y_min = y_min.min(y);
                    y_max = y_max.max(y);
                    colors[(x + y) % 2].push(Unknown {
                        idx: idx as u32,
                        nbrs,
                        n,
                    });
                } else if nbrs[..n as usize].iter().any(|&j| mask.bits()[j as usize]) {
                    boundary.push(idx as u32);
                }
            }
        }
        let extent = if x_min == usize::MAX {
            1
        } else {
            (x_max - x_min + 1).max(y_max - y_min + 1)
        };
        // optimal SOR factor for a square of this extent
        let omega = 2.0 / (1.0 + (std::f64::consts::PI / (extent as f64 + 1.0)).sin());
        Ok(Self {
            colors,
            omega,
            boundary,
        })
    }

    pub fn unknown_count(&self) -> usize {
        self.colors[0].len() + self.colors[1].len()
    }

    pub fn relaxation(&self) -> f64 {
        self.omega
    }

    /// Sets every unknown to the mean of the known cells bordering the holes.
    pub fn seed_boundary_mean(&self, values: &mut [f64]) {
        if self.boundary.is_empty() {
            return;
        }
        let mean = self.boundary.iter().map(|&i| values[i as usize]).sum::<f64>() / self.boundary.len() as f64;
        for u in self.colors.iter().flatten() {
            values[u.idx as usize] = mean;
        }
    }

    /// Iterates until a full sweep moves no cell by `tolerance` or more, or
    /// `max_iters` sweeps have run. Known cells are never written.
    pub fn solve(&self, values: &mut [f64], tolerance: f64, max_iters: usize) -> SolveStats {
        let mut stats = SolveStats {
            iterations: 0,
            max_update: 0.0,
            converged: self.unknown_count() == 0,
        };
        if stats.converged {
            return stats;
        }
        let omega = self.omega;
        let mut buf: Vec<f64> = Vec::new();
        while stats.iterations < max_iters {
            let mut max_update = 0f64;
            for color in &self.colors {
                {
                    let vals: &[f64] = values;
                    par::map_slice_into(color, &mut buf, |u| {
                        let sum: f64 = u.nbrs[..u.n as usize].iter().map(|&j| vals[j as usize]).sum();
                        let old = vals[u.idx as usize];
                        old + omega * (sum / u.n as f64 - old)
                    });
                }
                for (u, &new) in color.iter().zip(&buf) {
                    let slot = &mut values[u.idx as usize];
                    max_update = max_update.max((new - *slot).abs());
                    *slot = new;
                }
            }
            stats.iterations += 1;
            stats.max_update = max_update;
            if max_update < tolerance {
                stats.converged = true;
                break;
            }
        }
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_is_neighbour_mean() {
        // 4x4, hole at (1,1) with neighbours 1,2,3,4
        let mut v = vec![0.0; 16];
        v[4] = 1.0; // (0,1)
        v[6] = 2.0; // (2,1)
        v[1] = 3.0; // (1,0)
        v[9] = 4.0; // (1,2)
        v[5] = 100.0;
        let mask = Mask::rect(4, 4, 1, 1, 1, 1);
        let plan = LaplacePlan::new(&mask).unwrap();
        let s = plan.solve(&mut v, 1e-12, 100);
        assert!(s.converged);
        assert_eq!(v[5], 2.5);
    }

    #[test]
    fn full_mask_is_an_error() {
        assert!(matches!(
            LaplacePlan::new(&Mask::full(3, 3)),
            Err(Error::NoKnownData(_))
        ));
    }

    #[test]
    fn empty_mask_is_noop() {
        let plan = LaplacePlan::new(&Mask::empty(3, 3)).unwrap();
        let mut v = vec![1.0; 9];
        let s = plan.solve(&mut v, 1e-6, 10);
        assert!(s.converged);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn border_touching_hole_uses_available_neighbours() {
        // left column masked in a constant field stays constant
        let mask = Mask::rect(5, 5, 0, 0, 1, 5);
        let plan = LaplacePlan::new(&mask).unwrap();
        let mut v = vec![3.0; 25];
        for y in 0..5 {
            v[y * 5] = -50.0;
        }
        plan.solve(&mut v, 1e-12, 10_000);
        for y in 0..5 {
            assert!((v[y * 5] - 3.0).abs() < 1e-9);
        }
    }
}

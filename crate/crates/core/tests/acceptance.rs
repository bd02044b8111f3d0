//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each, and
//! exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use flowfill::completion::{complete_sequence_default, initialize_hole, CompletedFlows, CompletionConfig};
use flowfill::flow_io::{read_flo, read_frame_png, read_mask_png, write_flo, write_frame_png, write_mask_png};
use flowfill::grid::FlowDirection::{Backward, Forward};
use flowfill::losses::{epe, hfem_loss, masked_l1, mine_hard_mask, HfemConfig};
use flowfill::metrics::{psnr, ssim, PSNR_CAP};
use flowfill::pipeline::{cmd_inpaint, PipelineConfig};
use flowfill::propagation::{
    blend_weights, propagate, round_trip_residual, validity_mask, FillStatus, PropagationConfig,
};
use flowfill::unseen::{fill_loop, DiffusionInpainter, FillLoopConfig};
use flowfill::{FlowField, Frame, Mask, SequenceBundle};
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn hole_epe(pred: &FlowField, gt: &FlowField, hole: &Mask) -> f64 {
    epe(pred, gt, hole).unwrap()
}

fn harmonic_exactness() -> Outcome {
    let mut rng = rng(11);
    let cfg = CompletionConfig::default();
    let (mut worst, mut slowest) = (0f64, Duration::ZERO);
    let mut max_cover = 0f64;
    for _ in 0..40 {
        let gt = random_affine(&mut rng, 32, 32, Forward);
        let hole = random_interior_hole(&mut rng, 32, 32, 0.5);
        let input = scribble(&gt, &hole, [1e3, -1e3]);
        let t = Instant::now();
        let out = initialize_hole(&input, &hole, &cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        worst = worst.max(hole_epe(&out, &gt, &hole));
        max_cover = max_cover.max(hole.count() as f64 / 1024.0);
    }
    check(worst < 1e-3, || format!("hole EPE {worst:.3e} >= 1e-3"))?;
    check(slowest < Duration::from_secs(1), || {
        format!("slowest field took {slowest:?}")
    })?;
    Ok(format!(
        "40 fields, holes up to {:.0}% of the grid, worst hole EPE {worst:.2e}, slowest {slowest:.1?}",
        100.0 * max_cover
    ))
}

fn harmonic_bundle(
    rng: &mut rand_chacha::ChaCha8Rng,
    n: usize,
    w: usize,
    h: usize,
) -> (SequenceBundle, CompletedFlows) {
    let frames = (0..n).map(|i| Frame::from_fn(w, h, i, |_, _| [0; 3])).collect();
    let masks: Vec<Mask> = (0..n).map(|_| random_interior_hole(rng, w, h, 0.35)).collect();
    let gt = CompletedFlows {
        forward: (0..n - 1).map(|_| random_harmonic(rng, w, h, Forward)).collect(),
        backward: (0..n - 1).map(|_| random_harmonic(rng, w, h, Backward)).collect(),
    };
    let fwd = (0..n - 1)
        .map(|p| scribble(&gt.forward[p], &masks[p], [7.0, 7.0]))
        .collect();
    let bwd = (0..n - 1)
        .map(|p| scribble(&gt.backward[p], &masks[p + 1], [-7.0, 7.0]))
        .collect();
    (SequenceBundle::new(frames, masks, fwd, bwd).unwrap(), gt)
}

fn pooled_hole_epe(bundle: &SequenceBundle, pred: &CompletedFlows, gt: &CompletedFlows) -> f64 {
    let (mut sum, mut n) = (0f64, 0usize);
    for dir in [Forward, Backward] {
        for p in 0..bundle.len() - 1 {
            let hole = bundle.flow_mask(p, dir);
            sum += hole_epe(&pred.get(dir)[p], &gt.get(dir)[p], hole) * hole.count() as f64;
            n += hole.count();
        }
    }
    sum / n as f64
}

fn region_fill_semantics() -> Outcome {
    let mut rng = rng(12);
    let cfg = CompletionConfig::default();
    let mut report = Vec::new();
    for (n, w, h) in [(4, 32, 32), (3, 48, 40), (5, 30, 27), (3, 64, 64)] {
        let (bundle, gt) = harmonic_bundle(&mut rng, n, w, h);
        let result = complete_sequence_default(&bundle, &cfg).map_err(|e| e.to_string())?;
        for dir in [Forward, Backward] {
            for p in 0..n - 1 {
                let (out, src) = (&result.flows.get(dir)[p], &bundle.flows(dir)[p]);
                let known = bundle.flow_mask(p, dir).not();
                for i in known.indices() {
                    let (a, b) = (&out.data()[2 * i..2 * i + 2], &src.data()[2 * i..2 * i + 2]);
                    check(same_bits(a, b), || {
                        format!("{w}x{h} {dir:?} pair {p}: known cell {i} changed")
                    })?;
                }
            }
        }
        let first = result.stage_at_full_res(&bundle, 0).map_err(|e| e.to_string())?;
        let e1 = pooled_hole_epe(&bundle, &first, &gt);
        let e3 = pooled_hole_epe(&bundle, &result.flows, &gt);
        check(e3 <= e1 + 1e-6, || {
            format!("{w}x{h}: stage 3 EPE {e3:.3e} > stage 1 EPE {e1:.3e} + 1e-6")
        })?;
        report.push(format!("{w}x{h} {e1:.2e}->{e3:.2e}"));
    }
    Ok(format!(
        "known cells bit-exact; hole EPE stage 1 -> 3: {}",
        report.join(", ")
    ))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs().max(1e-12)
}

fn loss_oracles() -> Outcome {
    let mut rng = rng(13);
    let lambdas = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0];
    let fixtures = 60;
    for k in 0..fixtures {
        let (w, h) = (rng.random_range(1..=8), rng.random_range(1..=8));
        // every third fixture uses a coarse value grid to force ties
        let coarse = k % 3 == 0;
        let val = |r: &mut rand_chacha::ChaCha8Rng| -> f32 {
            if coarse {
                r.random_range(-2..=2) as f32
            } else {
                r.random_range(-10.0f32..10.0)
            }
        };
        let pred = FlowField::from_vec(w, h, (0..2 * w * h).map(|_| val(&mut rng)).collect(), Forward).unwrap();
        let gt = FlowField::from_vec(w, h, (0..2 * w * h).map(|_| val(&mut rng)).collect(), Forward).unwrap();
        let mut bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.6)).collect();
        let forced = rng.random_range(0..w * h);
        bits[forced] = true;
        let mask = Mask::from_bits(w, h, bits.clone()).unwrap();
        let percent = [10.0, 25.0, 50.0, 75.0, 100.0, rng.random_range(0.5..100.0)][k % 6];

        let (p, g) = (pred.data(), gt.data());
        let cells: Vec<usize> = (0..w * h).filter(|&i| bits[i]).collect();
        let err = |i: usize| {
            ((p[2 * i] as f64) - (g[2 * i] as f64)).abs() + ((p[2 * i + 1] as f64) - (g[2 * i + 1] as f64)).abs()
        };
        let l1_over = |set: &[usize]| set.iter().map(|&i| err(i)).sum::<f64>() / (2.0 * set.len() as f64);

        let l1 = masked_l1(&pred, &gt, &mask).map_err(|e| e.to_string())?;
        check(close(l1, l1_over(&cells)), || {
            format!("fixture {k}: masked_l1 {l1} vs {}", l1_over(&cells))
        })?;

        // a cell is hard when fewer than `keep` cells beat it (larger error,
        // or equal error and earlier in row-major order)
        let keep = ((percent * cells.len() as f64 / 100.0).ceil() as usize).clamp(1, cells.len());
        let hard: Vec<usize> = cells
            .iter()
            .copied()
            .filter(|&i| {
                cells
                    .iter()
                    .filter(|&&j| err(j) > err(i) || (err(j) == err(i) && j < i))
                    .count()
                    < keep
            })
            .collect();
        let cfg = HfemConfig {
            hard_percent: percent,
            hard_weight: 1.0,
        };
        let mined = mine_hard_mask(&pred, &gt, &mask, &cfg).map_err(|e| e.to_string())?;
        let mined_cells: Vec<usize> = mined.indices().collect();
        check(mined_cells == hard, || {
            format!("fixture {k}: mined {mined_cells:?} vs oracle {hard:?}")
        })?;

        let mut last = f64::NEG_INFINITY;
        for &lambda in &lambdas {
            let cfg = HfemConfig {
                hard_percent: percent,
                hard_weight: lambda,
            };
            let got = hfem_loss(&pred, &gt, &mask, &cfg).map_err(|e| e.to_string())?;
            let want = l1_over(&cells) + lambda * l1_over(&hard);
            check(close(got, want), || {
                format!("fixture {k}, lambda {lambda}: hfem {got} vs {want}")
            })?;
            check(got >= last, || {
                format!("fixture {k}: hfem decreased at lambda {lambda}")
            })?;
            last = got;
        }

        let e = epe(&pred, &gt, &mask).map_err(|e| e.to_string())?;
        let want = cells
            .iter()
            .map(|&i| {
                let dx = p[2 * i] as f64 - g[2 * i] as f64;
                let dy = p[2 * i + 1] as f64 - g[2 * i + 1] as f64;
                (dx * dx + dy * dy).sqrt()
            })
            .sum::<f64>()
            / cells.len() as f64;
        check(close(e, want), || format!("fixture {k}: epe {e} vs {want}"))?;
    }
    Ok(format!(
        "{fixtures} fixtures up to 8x8, lambda grid of {}",
        lambdas.len()
    ))
}

fn consistency_boundary() -> Outcome {
    let cfg = PropagationConfig::default();
    check(cfg.epsilon == 5.0, || format!("default epsilon is {}", cfg.epsilon))?;
    let (w, h) = (24, 24);
    let mut lines = Vec::new();
    for (k, angle) in [0.0f64, 0.5, 1.3, 2.7, 4.0].into_iter().enumerate() {
        // forward moves by whole pixels, so the reverse is sampled on-grid
        let step = [3.0f32, -2.0];
        for (residual, valid) in [(4.99f64, true), (5.01, false)] {
            let r = [residual * angle.cos(), residual * angle.sin()];
            let fwd = FlowField::constant(w, h, step, Forward);
            let rev = FlowField::constant(w, h, [(-3.0 + r[0]) as f32, (2.0 + r[1]) as f32], Backward);
            let m = validity_mask(&fwd, &rev, &cfg).map_err(|e| e.to_string())?;
            for y in 4..h - 4 {
                for x in 4..w - 4 {
                    let got = round_trip_residual(&fwd, &rev, x, y).unwrap();
                    check((got - residual).abs() < 1e-5, || format!("residual {got} at ({x},{y})"))?;
                    check(m.get(x, y) == valid, || {
                        format!("angle {k}: residual {residual} classified valid={}", m.get(x, y))
                    })?;
                }
            }
        }
        lines.push(angle);
    }
    Ok(format!("4.99 valid and 5.01 invalid along {} directions", lines.len()))
}

fn moving_hole(w: usize, h: usize) -> impl Fn(usize) -> Mask {
    move |t| Mask::rect(w, h, 6 + 4 * t, 20 + 2 * t, 16, 16)
}

fn propagation_exactness() -> Outcome {
    let tr = translation(10, 64, 64, (2, 1), moving_hole(64, 64));
    let t0 = Instant::now();
    let out = propagate(&tr.bundle, &tr.flows, &PropagationConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let (mut reachable, mut both) = (0usize, 0usize);
    for t in 0..tr.bundle.len() {
        let b = &out.blended[t];
        for i in tr.masks[t].indices() {
            let (x, y) = (i % 64, i / 64);
            let hf = chain_hop(&tr, t, x, y, -1);
            let hb = chain_hop(&tr, t, x, y, 1);
            let status = b.status[i];
            let want = match (hf, hb) {
                (Some(_), Some(_)) => FillStatus::FilledBoth,
                (Some(_), None) => FillStatus::FilledForward,
                (None, Some(_)) => FillStatus::FilledBackward,
                (None, None) => FillStatus::Unfilled,
            };
            check(status == want, || {
                format!("frame {t} ({x},{y}): {status:?}, oracle {want:?}")
            })?;
            if want == FillStatus::Unfilled {
                continue;
            }
            reachable += 1;
            check(out.frames[t].get(x, y) == tr.truth[t].get(x, y), || {
                format!(
                    "frame {t} ({x},{y}): {:?} vs truth {:?}",
                    out.frames[t].get(x, y),
                    tr.truth[t].get(x, y)
                )
            })?;
            if let Some(h) = hf {
                check(out.state.forward()[t].hop[i] == h, || {
                    format!("frame {t} ({x},{y}): forward hop")
                })?;
            }
            if let Some(h) = hb {
                check(out.state.backward()[t].hop[i] == h, || {
                    format!("frame {t} ({x},{y}): backward hop")
                })?;
            }
            if status == FillStatus::FilledBoth {
                both += 1;
                let (wf, wb) = blend_weights(out.state.forward()[t].hop[i], out.state.backward()[t].hop[i]);
                check((wf + wb - 1.0).abs() < 1e-12, || format!("weights sum to {}", wf + wb))?;
            }
        }
    }
    check(elapsed < Duration::from_secs(2), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{reachable} reachable hole pixels bit-equal to truth ({both} from both sides), {elapsed:.1?}"
    ))
}

fn invalid_flow_safety() -> Outcome {
    let mut tr = translation(10, 64, 64, (2, 1), moving_hole(64, 64));
    let t = 5;
    let corrupt = Mask::rect(64, 64, 6 + 4 * t + 4, 20 + 2 * t + 4, 8, 8);
    check(corrupt.is_subset_of(&tr.masks[t]), || {
        "corrupted region outside the hole".into()
    })?;
    // pushing the reverse step 20 px sideways makes the round trip miss by 20
    for i in corrupt.indices() {
        let (x, y) = (i % 64, i / 64);
        tr.flows.forward[t].set(x, y, [2.0 + 20.0, 1.0]);
        tr.flows.backward[t - 1].set(x, y, [-2.0 + 20.0, -1.0]);
    }
    let cfg = PropagationConfig::default();
    let out = propagate(&tr.bundle, &tr.flows, &cfg).map_err(|e| e.to_string())?;
    for i in corrupt.indices() {
        let (x, y) = (i % 64, i / 64);
        let r = round_trip_residual(&tr.flows.backward[t - 1], &tr.flows.forward[t - 1], x, y);
        check(r.is_none_or(|r| r > cfg.epsilon), || {
            format!("({x},{y}) residual {r:?} not above epsilon")
        })?;
    }
    let filled = corrupt
        .indices()
        .filter(|&i| out.blended[t].status[i].is_filled())
        .count();
    check(filled == 0, || {
        format!("{filled} corrupted pixels filled by propagation")
    })?;
    check(corrupt.is_subset_of(&out.unfilled[t]), || {
        "corrupted pixels missing from the unfilled set".into()
    })?;
    let flows = tr.flows.clone();
    let fill = fill_loop(out, &flows, &DiffusionInpainter::default(), &FillLoopConfig::default())
        .map_err(|e| e.to_string())?;
    check(fill.unfilled_per_iteration.last() == Some(&0), || {
        "fill loop left pixels".into()
    })?;
    Ok(format!(
        "0 of {} corrupted pixels propagated; fill loop resolved them in {} iteration(s)",
        corrupt.count(),
        fill.iterations
    ))
}

fn fill_loop_static() -> Outcome {
    let (n, w, h) = (6, 40, 32);
    let hole = Mask::rect(w, h, 12, 10, 10, 8);
    let truth = Frame::from_fn(w, h, 0, |x, y| texture(x as i64, y as i64));
    let frames = (0..n)
        .map(|t| Frame::from_fn(w, h, t, |x, y| if hole.get(x, y) { [0; 3] } else { truth.get(x, y) }))
        .collect();
    let bundle = SequenceBundle::new(
        frames,
        vec![hole.clone(); n],
        vec![FlowField::zeros(w, h, Forward); n - 1],
        vec![FlowField::zeros(w, h, Backward); n - 1],
    )
    .map_err(|e| e.to_string())?;
    let flows = CompletedFlows::from_bundle(&bundle);
    let out = propagate(&bundle, &flows, &PropagationConfig::default()).map_err(|e| e.to_string())?;
    check(out.stats.unfilled == n * hole.count(), || {
        "propagation filled part of an unseen hole".into()
    })?;
    let fill = fill_loop(out, &flows, &DiffusionInpainter::default(), &FillLoopConfig::default())
        .map_err(|e| e.to_string())?;
    check(fill.iterations == 1, || format!("{} iterations", fill.iterations))?;
    let patch = |f: &Frame| hole.indices().map(|i| f.get(i % w, i / w)).collect::<Vec<_>>();
    let first = patch(&fill.frames[0]);
    for f in &fill.frames[1..] {
        check(patch(f) == first, || format!("frame {} patch differs", f.index()))?;
        check(
            (0..w * h)
                .filter(|&i| !hole.bits()[i])
                .all(|i| f.get(i % w, i / w) == truth.get(i % w, i / w)),
            || "known pixels changed".into(),
        )?;
    }
    Ok(format!(
        "1 iteration, identical {}-pixel patch in all {n} frames",
        hole.count()
    ))
}

fn io_round_trips() -> Outcome {
    let mut rng = rng(14);
    for k in 0..100 {
        let (w, h) = (rng.random_range(1..=48), rng.random_range(1..=48));
        let data: Vec<f32> = (0..2 * w * h)
            .map(|_| match rng.random_range(0..4) {
                0 => rng.random_range(-1e3f32..1e3),
                1 => f32::from_bits(rng.random_range(0..0x0080_0000)), // subnormal
                2 => -0.0,
                _ => rng.random_range(-1.0f32..1.0) * 1e30,
            })
            .collect();
        let flow = FlowField::from_vec(w, h, data, Forward).unwrap();
        let back = read_flo(&write_flo(&flow).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check(
            back.dims() == flow.dims() && same_bits(back.data(), flow.data()),
            || format!(".flo fixture {k}"),
        )?;

        let rgb: Vec<u8> = (0..3 * w * h).map(|_| rng.random()).collect();
        let frame = Frame::new(w, h, rgb, k).unwrap();
        let back =
            read_frame_png(&write_frame_png(&frame).map_err(|e| e.to_string())?, k).map_err(|e| e.to_string())?;
        check(back == frame, || format!("frame PNG fixture {k}"))?;

        let mask = Mask::from_bits(w, h, (0..w * h).map(|_| rng.random_bool(0.3)).collect()).unwrap();
        let back = read_mask_png(&write_mask_png(&mask).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check(back == mask, || format!("mask PNG fixture {k}"))?;
    }
    Ok("100 randomized .flo, frame PNG and mask PNG fixtures".into())
}

fn metrics_sanity() -> Outcome {
    let mut rng = rng(15);
    let rand_frame = |r: &mut rand_chacha::ChaCha8Rng, w: usize, h: usize| {
        Frame::new(w, h, (0..3 * w * h).map(|_| r.random()).collect(), 0).unwrap()
    };
    let a = rand_frame(&mut rng, 32, 24);
    check(psnr(&a, &a).unwrap() == PSNR_CAP, || "PSNR of identical frames".into())?;
    check(ssim(&a, &a).unwrap() == 1.0, || "SSIM of identical frames".into())?;
    let black = Frame::from_fn(16, 16, 0, |_, _| [0; 3]);
    let white = Frame::from_fn(16, 16, 0, |_, _| [255; 3]);
    let p = psnr(&black, &white).unwrap();
    check(p == 0.0, || format!("PSNR at maximal error is {p}"))?;
    let mut worst = 0f64;
    for _ in 0..50 {
        let (w, h) = (rng.random_range(11..=40), rng.random_range(11..=40));
        let x = rand_frame(&mut rng, w, h);
        // half the pairs are related, half independent
        let y = if rng.random_bool(0.5) {
            let noise: Vec<u8> = x
                .rgb()
                .iter()
                .map(|&v| v.saturating_add(rng.random_range(0..40)))
                .collect();
            Frame::new(w, h, noise, 0).unwrap()
        } else {
            rand_frame(&mut rng, w, h)
        };
        let (s1, s2) = (ssim(&x, &y).unwrap(), ssim(&y, &x).unwrap());
        worst = worst.max((s1 - s2).abs());
    }
    check(worst <= 1e-12, || format!("SSIM asymmetry {worst:e}"))?;
    Ok(format!(
        "identity at cap / 1.0, 0 dB at maximal error, SSIM asymmetry {worst:.1e} over 50 pairs"
    ))
}

fn write_sequence(dir: &Path) -> PathBuf {
    use flowfill::flow_io::SequenceManifest;
    let (n, w, h) = (6, 40, 32);
    let tr = translation(n, w, h, (1, 1), |t| Mask::rect(w, h, 8 + 3 * t, 6 + t, 10, 9));
    let mut m = SequenceManifest::new(w, h, Vec::new());
    for t in 0..n {
        let name = format!("in_{t}.png");
        std::fs::write(dir.join(&name), write_frame_png(&tr.bundle.frames()[t]).unwrap()).unwrap();
        m.frame_paths.push(name.into());
        let name = format!("gt_{t}.png");
        std::fs::write(dir.join(&name), write_frame_png(&tr.truth[t]).unwrap()).unwrap();
        m.gt_frame_paths.push(name.into());
        let name = format!("mask_{t}.png");
        std::fs::write(dir.join(&name), write_mask_png(&tr.masks[t]).unwrap()).unwrap();
        m.mask_paths.push(name.into());
    }
    for p in 0..n - 1 {
        // holes in the input flows hold junk; completion has to replace it
        let f = scribble(&tr.flows.forward[p], &tr.masks[p], [9.0, -9.0]);
        let b = scribble(&tr.flows.backward[p], &tr.masks[p + 1], [-9.0, 9.0]);
        let (fname, bname) = (format!("f_{p}.flo"), format!("b_{p}.flo"));
        std::fs::write(dir.join(&fname), write_flo(&f).unwrap()).unwrap();
        std::fs::write(dir.join(&bname), write_flo(&b).unwrap()).unwrap();
        m.fwd_flow_paths.push(fname.into());
        m.bwd_flow_paths.push(bname.into());
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, m.to_json().unwrap()).unwrap();
    path
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_sequence(tmp.path());
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let cfg = PipelineConfig {
            manifest: Some(manifest.clone()),
            out: Some(tmp.path().join(run)),
            seed: 1234,
            ..Default::default()
        };
        cmd_inpaint(&cfg).map_err(|e| e.to_string())?;
        trees.push(read_tree(&tmp.path().join(run)));
    }
    check(trees[0] == trees[1], || "output trees differ".into())?;
    check(
        trees[0].contains_key("stats.json") && trees[0].contains_key("metrics.json"),
        || format!("missing outputs: {:?}", trees[0].keys().collect::<Vec<_>>()),
    )?;
    let bytes: usize = trees[0].values().map(Vec::len).sum();
    Ok(format!(
        "{} files, {bytes} bytes, identical across runs",
        trees[0].len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("harmonic exactness", harmonic_exactness),
        ("region-fill semantics", region_fill_semantics),
        ("loss oracles", loss_oracles),
        ("consistency threshold", consistency_boundary),
        ("propagation exactness", propagation_exactness),
        ("invalid-flow safety", invalid_flow_safety),
        ("fill-loop termination", fill_loop_static),
        ("i/o round-trips", io_round_trips),
        ("metrics sanity", metrics_sanity),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

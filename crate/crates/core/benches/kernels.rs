//! Hot kernels on rayon's global pool against a one-thread pool, which runs
//! the same code with no parallel speedup. Build with
//! `--no-default-features` to time the plain sequential fallback instead
//! (that build has no rayon, so this bench is skipped there).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowfill::completion::{initialize_hole, CompletedFlows, CompletionConfig};
use flowfill::metrics::ssim;
use flowfill::propagation::{propagate, validity_mask, PropagationConfig};
use flowfill::{FlowDirection, FlowField, Frame, Mask, SequenceBundle};

const W: usize = 256;
const H: usize = 192;

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    [("parallel", build(0)), ("one_thread", build(1))]
}

fn smooth_flow(dir: FlowDirection) -> FlowField {
    FlowField::from_fn(W, H, dir, |x, y| {
        let (u, v) = (x as f32 / W as f32, y as f32 / H as f32);
        [2.0 + 3.0 * u - v, -1.0 + u * v]
    })
}

fn texture(rng: &mut ChaCha8Rng, index: usize) -> Frame {
    Frame::new(W, H, (0..3 * W * H).map(|_| rng.random()).collect(), index).unwrap()
}

fn bench_harmonic_fill(c: &mut Criterion) {
    let flow = smooth_flow(FlowDirection::Forward);
    let mask = Mask::rect(W, H, W / 4, H / 4, W / 3, H / 3);
    let cfg = CompletionConfig::default();
    let mut g = c.benchmark_group("initialize_hole");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| initialize_hole(&flow, &mask, &cfg).unwrap()))
        });
    }
    g.finish();
}

fn bench_validity(c: &mut Criterion) {
    let fwd = smooth_flow(FlowDirection::Forward);
    let bwd = FlowField::from_fn(W, H, FlowDirection::Backward, |x, y| {
        let v = fwd.get(x, y);
        [-v[0], -v[1]]
    });
    let cfg = PropagationConfig::default();
    let mut g = c.benchmark_group("validity_mask");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| validity_mask(&fwd, &bwd, &cfg).unwrap()))
        });
    }
    g.finish();
}

fn bench_propagate(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 8;
    let frames: Vec<Frame> = (0..n).map(|i| texture(&mut rng, i)).collect();
    let masks: Vec<Mask> = (0..n).map(|t| Mask::rect(W, H, 20 + 12 * t, 40, 48, 48)).collect();
    let flows = CompletedFlows {
        forward: vec![FlowField::constant(W, H, [1.0, 0.0], FlowDirection::Forward); n - 1],
        backward: vec![FlowField::constant(W, H, [-1.0, 0.0], FlowDirection::Backward); n - 1],
    };
    let bundle = SequenceBundle::new(frames, masks, flows.forward.clone(), flows.backward.clone()).unwrap();
    let cfg = PropagationConfig::default();
    let mut g = c.benchmark_group("propagate");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| propagate(&bundle, &flows, &cfg).unwrap()))
        });
    }
    g.finish();
}

fn bench_ssim(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, b2) = (texture(&mut rng, 0), texture(&mut rng, 0));
    let mut g = c.benchmark_group("ssim");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| ssim(&a, &b2).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_harmonic_fill,
    bench_validity,
    bench_propagate,
    bench_ssim
);
criterion_main!(benches);

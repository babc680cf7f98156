use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use recdrop_bench::{lm_fixture, random_matrix};
use recdrop_core::bptt::{backward_sequence, forward_sequence};
use recdrop_core::dropout::{mask_plan, sample_mask};
use recdrop_core::{Arch, DropoutConfig, DropoutSpec, Matrix, Phase, Rng, SamplingMode, Scaling, Variant};
use std::hint::black_box;

fn matmul(c: &mut Criterion) {
    let mut g = c.benchmark_group("matmul_nt");
    for n in [64, 128, 256] {
        let x = random_matrix(32, n, 1);
        let w = random_matrix(4 * n, n, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| Matrix::matmul_nt(black_box(&x), black_box(&w))));
    }
    g.finish();
}

fn unroll(c: &mut Criterion) {
    let drop = DropoutConfig::recurrent(DropoutSpec::new(Variant::UpdateDrop, 0.25, SamplingMode::PerStep, Scaling::TestScale).unwrap());
    let mut g = c.benchmark_group("unroll");
    g.sample_size(20);
    for arch in Arch::ALL {
        let f = lm_fixture(arch, 128, 32, 50);
        g.bench_function(BenchmarkId::new("forward", arch), |b| {
            b.iter(|| {
                let mut rng = Rng::new(3);
                forward_sequence(&f.model, &f.batch, &drop, &mut rng, Phase::Train).unwrap().loss()
            })
        });
        g.bench_function(BenchmarkId::new("forward_backward", arch), |b| {
            b.iter(|| {
                let mut rng = Rng::new(3);
                let tape = forward_sequence(&f.model, &f.batch, &drop, &mut rng, Phase::Train).unwrap();
                backward_sequence(tape).unwrap()
            })
        });
    }
    g.finish();
}

fn masks(c: &mut Criterion) {
    let mut rng = Rng::new(4);
    c.bench_function("sample_mask_4096", |b| b.iter(|| sample_mask(4096, 0.5, &mut rng).unwrap()));
    let spec = DropoutSpec::new(Variant::Gal, 0.5, SamplingMode::PerStep, Scaling::TrainScale).unwrap();
    c.bench_function("mask_plan_100x32x128", |b| b.iter(|| mask_plan(&spec, 100, 32 * 128, &mut rng).unwrap()));
}

criterion_group!(benches, matmul, unroll, masks);
criterion_main!(benches);

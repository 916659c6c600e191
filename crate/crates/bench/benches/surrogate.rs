use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gradmatch::autodiff::{directional_derivative, forward_value, input_gradient, Tangent};
use gradmatch::training::{batch_loss_gradient, segment_integral, train, TrainConfig, TrainMode};
use gradmatch::ArchitectureSpec;
use gradmatch_bench::{default_model, shekel_dataset, trajectories, DIM};

fn evaluation(c: &mut Criterion) {
    let model = default_model();
    let p = model.params();
    let x = [0.3, -0.2, 0.8, 0.1];
    let v = Tangent::new(vec![1.0, 0.5, -0.5, 0.25]).unwrap();
    let mut g = c.benchmark_group("evaluation");
    g.bench_function("forward_value", |b| b.iter(|| forward_value(p, black_box(&x)).unwrap()));
    g.bench_function("input_gradient", |b| b.iter(|| input_gradient(p, black_box(&x)).unwrap()));
    g.bench_function("directional_derivative", |b| {
        b.iter(|| directional_derivative(p, black_box(&x), &v).unwrap())
    });
    g.finish();
}

fn integral(c: &mut Criterion) {
    let model = default_model();
    let (x, y) = ([0.3, -0.2, 0.8, 0.1], [-0.5, 0.4, 0.2, 1.0]);
    let mut g = c.benchmark_group("segment_integral");
    for kappa in [1, 5, 20] {
        g.bench_with_input(BenchmarkId::from_parameter(kappa), &kappa, |b, &k| {
            b.iter(|| segment_integral(model.params(), black_box(&x), &y, k).unwrap())
        });
    }
    g.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let model = default_model();
    let ds = shekel_dataset(1000);
    let batch = trajectories(&ds, 10, 16);
    let mut g = c.benchmark_group("batch_loss_gradient");
    g.sample_size(10);
    for mode in [TrainMode::GradMatch, TrainMode::Regression, TrainMode::Combined] {
        g.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| batch_loss_gradient(model.params(), black_box(&batch), mode, 5, 1.0).unwrap())
        });
    }
    g.finish();
}

fn training_epoch(c: &mut Criterion) {
    let ds = shekel_dataset(5000);
    let arch = ArchitectureSpec::new(DIM);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    g.bench_function("one_epoch_default", |b| b.iter(|| train(black_box(&ds), &arch, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, evaluation, integral, batch_gradient, training_epoch);
criterion_main!(benches);

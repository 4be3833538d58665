use cawe::cbow::{cbow_step, CbowParams};
use cawe::eval::spearman;
use cawe::Rng;
use cawe_bench::{desk_fixture, gaussian_vec};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn a2w(c: &mut Criterion) {
    let (params, features, transcript) = desk_fixture();
    c.bench_function("encode 60 frames", |b| b.iter(|| params.encode(black_box(&features)).unwrap()));
    c.bench_function("teacher-forced forward", |b| {
        b.iter(|| params.forward_teacher_forced(black_box(&features), &transcript).unwrap())
    });
    c.bench_function("loss and gradient", |b| {
        b.iter(|| params.backward(black_box(&features), &transcript).unwrap())
    });
}

fn cbow(c: &mut Criterion) {
    let mut params = CbowParams::init(1000, 32, &mut Rng::new(3));
    let context = [10, 11, 13, 14];
    let negatives = [50, 60, 70, 80, 90];
    c.bench_function("cbow step", |b| {
        b.iter(|| cbow_step(&mut params, black_box(12), &context, &negatives, 1e-3))
    });
}

fn ranks(c: &mut Criterion) {
    let xs = gaussian_vec(1000, 4);
    let ys = gaussian_vec(1000, 5);
    c.bench_function("spearman 1000", |b| b.iter(|| spearman(black_box(&xs), black_box(&ys)).unwrap()));
}

criterion_group!(benches, a2w, cbow, ranks);
criterion_main!(benches);

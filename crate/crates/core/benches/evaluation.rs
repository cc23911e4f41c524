use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reserve_lab::evaluation::{rank_corpus, rank_models, EvalOptions};
use reserve_lab::{datasets, Execution, Mode, Model, RunOffTriangle};

fn random_triangle(rng: &mut impl Rng, m: usize) -> RunOffTriangle {
    let decay: f64 = rng.random_range(0.35..0.8);
    let rows = (0..=m)
        .map(|k| {
            let level = 1000.0 * rng.random_range(0.5..2.0) * (1.0 + 0.03 * k as f64);
            (0..=m - k)
                .map(|j| level * decay.powi(j as i32) * rng.random_range(-0.25f64..0.25).exp())
                .collect()
        })
        .collect();
    RunOffTriangle::from_incremental_rows(rows, Mode::Strict).unwrap()
}

fn corpus() -> Vec<(String, reserve_lab::Result<RunOffTriangle>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut out: Vec<_> = datasets::corpus()
        .into_iter()
        .map(|(n, t)| (n.to_string(), Ok(t)))
        .collect();
    for i in 0..27 {
        out.push((
            format!("random{i}"),
            Ok(random_triangle(&mut rng, 6 + i % 8)),
        ));
    }
    out
}

fn options(execution: Execution) -> EvalOptions {
    EvalOptions {
        execution,
        ..EvalOptions::default()
    }
}

fn bench_corpus(c: &mut Criterion) {
    let corpus = corpus();
    let models = Model::ranking_set();
    let mut group = c.benchmark_group("rank_corpus_30");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{execution:?}")),
            &execution,
            |b, &e| b.iter(|| rank_corpus(black_box(&corpus), &models, &options(e))),
        );
    }
    group.finish();
}

fn bench_single(c: &mut Criterion) {
    let models = Model::ranking_set();
    let mut group = c.benchmark_group("rank_models_by_size");
    group.sample_size(10);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in [8, 14, 20] {
        let tri = random_triangle(&mut rng, m);
        for execution in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(
                BenchmarkId::new(format!("{execution:?}"), m),
                &tri,
                |b, t| b.iter(|| rank_models(black_box(t), &models, &options(execution))),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, bench_corpus, bench_single);
criterion_main!(benches);

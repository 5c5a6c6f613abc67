use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use ecobench_bench::fixture;
use ecobench_core::analysis::roc_auc;
use ecobench_core::eco::{pareto_front, EcoRow};
use ecobench_core::models::{train, Family, Hyperparams};
use ecobench_core::preprocess::pca_fit;
use ecobench_core::rng::keyed_rng;
use rand::Rng;

fn training(c: &mut Criterion) {
    let (train_set, test) = fixture(2300, 42);
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    for family in Family::ALL {
        let hp = Hyperparams::new(family, 42);
        g.bench_function(family.name(), |b| b.iter(|| train(black_box(&train_set), &hp).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("score");
    for family in Family::ALL {
        let model = train(&train_set, &Hyperparams::new(family, 42)).unwrap();
        g.bench_function(family.name(), |b| {
            b.iter(|| model.score(black_box(&test.values)).unwrap())
        });
    }
    g.finish();
}

fn analysis(c: &mut Criterion) {
    let (train_set, _) = fixture(2300, 42);
    c.bench_function("pca_fit_0.9", |b| {
        b.iter(|| pca_fit(black_box(&train_set), 0.9).unwrap())
    });

    let mut rng = keyed_rng(&[7]);
    let y: Vec<u8> = (0..10_000).map(|_| u8::from(rng.random_bool(0.25))).collect();
    let s: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    c.bench_function("roc_auc_10k", |b| {
        b.iter(|| roc_auc(black_box(&y), black_box(&s)).unwrap())
    });

    c.bench_function("pareto_front_1k", |b| {
        b.iter_batched(
            || {
                (0..1000)
                    .map(|i| {
                        let f1: f64 = rng.random();
                        let e: f64 = rng.random::<f64>() * 1e-4;
                        EcoRow {
                            model: format!("m{i}"),
                            accuracy: f1,
                            f1,
                            roc_auc: f1,
                            train_energy_kwh: e,
                            infer_energy_kwh: 0.0,
                            total_energy_kwh: e,
                            total_emissions_g: e * 400.0,
                            eei: 0.0,
                        }
                    })
                    .collect::<Vec<_>>()
            },
            |rows| pareto_front(&rows),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, training, analysis);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use typoemb_bench::{random_matrix, synthetic_batches};
use typoemb_core::corpus::WordVectors;
use typoemb_core::eval::{loo_predict, spectral_cluster, Category, ClassifierConfig, FeatureTable};
use typoemb_core::model::{Denoiser, ModelConfig};
use typoemb_core::nn::{LayerState, LstmLayer};
use typoemb_core::SeededRng;

fn gemm(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    let mut rng = SeededRng::new(0);
    for n in [32, 128, 256] {
        let a = random_matrix(n, n, &mut rng);
        let b = random_matrix(n, n, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| black_box(a.matmul(&b).unwrap()))
        });
    }
    group.finish();
}

fn lstm(c: &mut Criterion) {
    let (steps, batch, input, hidden) = (20, 16, 64, 128);
    let mut rng = SeededRng::new(1);
    let mut layer = LstmLayer::new("bench", input, hidden, &mut rng);
    let xs = random_matrix(steps * batch, input, &mut rng);
    let init = LayerState::zeros(batch, hidden);
    let mask = vec![true; steps * batch];
    c.bench_function("lstm_forward", |b| {
        b.iter(|| black_box(layer.forward(&xs, batch, &init, &mask).unwrap()))
    });
    let (hs, _, cache) = layer.forward(&xs, batch, &init, &mask).unwrap();
    let d_final = LayerState::zeros(batch, hidden);
    c.bench_function("lstm_backward", |b| {
        b.iter(|| black_box(layer.backward(&cache, &hs, &d_final)))
    });
}

fn training_step(c: &mut Criterion) {
    let (batches, vocab_size, languages) = synthetic_batches(8, 32);
    let config = ModelConfig {
        vocab_size,
        languages,
        ..ModelConfig::default()
    };
    let mut model = Denoiser::new(config).unwrap();
    let batch = &batches[0];
    let mut group = c.benchmark_group("denoiser");
    group.sample_size(10);
    group.bench_function("forward_backward", |b| {
        b.iter(|| {
            model.zero_grad();
            black_box(model.forward_backward(batch).unwrap())
        })
    });
    group.finish();
}

/// 30 languages in three clusters with two label features tracking them.
fn eval_fixture() -> (WordVectors, FeatureTable) {
    let mut rng = SeededRng::new(2);
    let n = 30;
    let languages: Vec<String> = (0..n).map(|i| format!("l{i:02}")).collect();
    let mut vectors = random_matrix(n, 16, &mut rng);
    for i in 0..n {
        vectors.row_mut(i)[i % 3] += 4.0;
    }
    let features = vec![
        ("a".to_string(), Category::Syntax),
        ("b".to_string(), Category::PartMorph),
    ];
    let labels = (0..n)
        .map(|i| vec![Some(format!("v{}", i % 3)), Some(format!("w{}", i % 2))])
        .collect();
    let table = FeatureTable::from_labels(languages.clone(), features, labels).unwrap();
    (WordVectors::new(languages, vectors).unwrap(), table)
}

fn evaluation(c: &mut Criterion) {
    let (embeddings, table) = eval_fixture();
    let config = ClassifierConfig::default();
    let mut group = c.benchmark_group("eval");
    group.sample_size(10);
    group.bench_function("loo_predict_5_repeats", |b| {
        b.iter(|| black_box(loo_predict(&embeddings, &table, 5, &config, &mut SeededRng::new(4)).unwrap()))
    });
    group.bench_function("spectral_cluster_k3", |b| {
        b.iter(|| black_box(spectral_cluster(&embeddings.vectors, 3, &mut SeededRng::new(5)).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, gemm, lstm, training_step, evaluation);
criterion_main!(benches);

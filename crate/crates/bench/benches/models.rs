use std::hint::black_box;

use clickstream_bench::{series, sessions};
use clickstream_core::markov::{fit_mixture, DEFAULT_ALPHA};
use clickstream_core::neural::{lstm_backward, lstm_forward, LstmParams, PaddedBatch};
use clickstream_core::visibility::{enumerate_admissible_motifs, hvg, hvg_bruteforce, motif_profile};
use clickstream_core::PriorMode;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_hvg(c: &mut Criterion) {
    let mut group = c.benchmark_group("hvg");
    for len in [20, 200, 2000] {
        let s = series(len, 1);
        group.bench_with_input(BenchmarkId::new("stack", len), &s, |b, s| b.iter(|| hvg(black_box(s)).unwrap()));
        if len <= 200 {
            group.bench_with_input(BenchmarkId::new("bruteforce", len), &s, |b, s| {
                b.iter(|| hvg_bruteforce(black_box(s)).unwrap())
            });
        }
    }
    group.finish();

    let catalog = enumerate_admissible_motifs(4, 6).unwrap();
    let s = series(60, 2);
    c.bench_function("motif_profile/60", |b| b.iter(|| motif_profile(black_box(&s), &catalog).unwrap()));
}

fn bench_markov(c: &mut Criterion) {
    let data = sessions(1000, 3);
    let mut group = c.benchmark_group("markov_fit");
    for order in [1, 5] {
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &k| {
            b.iter(|| fit_mixture(black_box(&data), k, DEFAULT_ALPHA, PriorMode::Empirical).unwrap())
        });
    }
    group.finish();
}

fn bench_lstm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let seqs: Vec<Vec<usize>> = (0..20)
        .map(|_| (0..rng.gen_range(10..=40)).map(|_| rng.gen_range(0..6)).collect())
        .collect();
    let batch = PaddedBatch::from_sequences(&seqs).unwrap();
    let mut group = c.benchmark_group("lstm");
    for hidden in [10, 40] {
        let params = LstmParams::init(6, hidden, &mut rng);
        group.bench_with_input(BenchmarkId::new("forward", hidden), &params, |b, p| {
            b.iter(|| lstm_forward(black_box(p), &batch).unwrap())
        });
        let out = lstm_forward(&params, &batch).unwrap();
        let d_hidden: Vec<Vec<f64>> = seqs.iter().map(|s| vec![0.01; s.len() * hidden]).collect();
        group.bench_with_input(BenchmarkId::new("backward", hidden), &params, |b, p| {
            b.iter(|| {
                let mut grads = LstmParams::zeros(6, hidden);
                lstm_backward(black_box(p), &out, &d_hidden, &mut grads).unwrap();
                grads
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_hvg, bench_markov, bench_lstm);
criterion_main!(benches);

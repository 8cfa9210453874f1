use clickstream_core::lm::{lm_loss_and_grad, LmModel};
use clickstream_core::neural::{grad_check, PaddedBatch, Parameterized};
use clickstream_core::seq2label::{s2l_loss_and_grad, Pooling, S2lModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn random_seqs(rng: &mut ChaCha8Rng, n: usize, vocab: usize, max_len: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            (0..len).map(|_| rng.gen_range(0..vocab)).collect()
        })
        .collect()
}

fn perturb_biases<P: Parameterized>(p: &mut P, rng: &mut ChaCha8Rng) {
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.5..0.5);
        }
    }
}

#[test]
fn lm_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut model = LmModel::init(5, 5, &mut rng);
    perturb_biases(&mut model, &mut rng);
    let seqs = random_seqs(&mut rng, 3, 5, 5);
    let batch = model.input_batch(&seqs).unwrap();
    let report = grad_check(
        |m: &LmModel| lm_loss_and_grad(m, &batch, 1.0),
        &model,
        STEP,
        TOLERANCE,
        400,
        1,
    )
    .unwrap();
    println!("lm: {report:?}");
    assert!(report.checked >= 200);
    assert!(report.passed(), "{report:?}");
}

#[test]
fn s2l_gradients_match_finite_differences() {
    for pooling in [Pooling::Last, Pooling::Avg] {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut model = S2lModel::init(5, pooling, &mut rng);
        perturb_biases(&mut model, &mut rng);
        let seqs = random_seqs(&mut rng, 4, 5, 6);
        let labels = [true, false, true, false];
        let batch = PaddedBatch::from_sequences(&seqs).unwrap();
        let report = grad_check(
            |m: &S2lModel| s2l_loss_and_grad(m, &batch, &labels, 1.0),
            &model,
            STEP,
            TOLERANCE,
            400,
            2,
        )
        .unwrap();
        println!("{pooling}: {report:?}");
        assert!(report.passed(), "{pooling}: {report:?}");
    }
}

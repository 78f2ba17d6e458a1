//! Timing parity criterion: at matched desk-scale configurations and equal
//! batch size, the median IPA optimizer-step time stays within 1.35x of the
//! GPT baseline's. Kept in its own test binary so no other test competes
//! for cores while the clock runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use train_harness::{median_step_ms, AdamState, Corpus, ModelSpec, TrainConfig};

#[test]
fn c08_timing_parity() {
    let vocab = 2048usize;
    let (n, m) = (64usize, 48usize);
    let ipa_spec = ModelSpec::Ipa {
        embed_dim: n,
        max_seq_len: m,
        layers: 2,
        col_experts: 4,
        row_experts: 4,
        rank: 16,
        tie_head: true,
        residual: false,
        layernorm: false,
        prefix_scale: false,
    };
    let gpt_spec = ModelSpec::Gpt {
        embed_dim: n,
        max_seq_len: m,
        layers: 2,
        heads: 4,
        ff_dim: 4 * n,
        tie_head: true,
        layernorm: false,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let stream: Vec<u32> = (0..20_000).map(|_| rng.random_range(0..vocab as u32)).collect();
    let corpus = Corpus {
        train: stream.clone(),
        valid: stream.clone(),
        test: stream,
    };
    let mut cfg = TrainConfig::new(m, 0);
    cfg.batch_size = 2;
    cfg.learning_rate = 3e-4;

    // Median over 25 measured steps after 5 warmup steps, per model.
    let mut medians = Vec::new();
    for (name, spec) in [("ipa", &ipa_spec), ("gpt", &gpt_spec)] {
        let mut model = spec.build(vocab, 0, autodiff_core::Precision::F64).unwrap();
        let mut adam = AdamState::new(model.params());
        let ms = median_step_ms(model.as_mut(), &mut adam, &corpus, &cfg, 5, 25).unwrap();
        println!("{name}: median step time {ms:.1} ms (5 warmup, 25 samples)");
        medians.push(ms);
    }

    let ratio = medians[0] / medians[1];
    assert!(
        ratio <= 1.35,
        "ipa step {:.1} ms vs gpt {:.1} ms: ratio {ratio:.3} exceeds 1.35",
        medians[0],
        medians[1]
    );
    println!("criterion 8 PASS: step-time ratio ipa/gpt {ratio:.3} (budget 1.35)");
}

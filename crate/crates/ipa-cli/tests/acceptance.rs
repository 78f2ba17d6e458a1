//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Heavy training-based criteria live in the
//! acceptance_learning / acceptance_parity / acceptance_timing targets so
//! the binaries run sequentially and timing stays clean.

use std::process::Command;
use std::time::Instant;

use autodiff_core::{Graph, ParamSet, Tensor};
use baseline_gpt::{GptConfig, GptModel};
use ipa_core::{IpaModel, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracle;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn toy_corpus_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy.txt")
}

#[test]
fn c01_gradient_fidelity() {
    // Tiny models at 64-bit: max relative error vs central finite
    // differences below 1e-5, in under a minute for both architectures.
    let t0 = Instant::now();
    let mut errors = Vec::new();
    for kind in ["ipa", "gpt"] {
        let out = Command::new(env!("CARGO_BIN_EXE_ipa"))
            .args(["gradcheck", "--model-kind", kind, "--seed", "0"])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "gradcheck {kind} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        let err: f64 = text
            .split("max relative error ")
            .nth(1)
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| panic!("unparseable gradcheck output: {text}"));
        assert!(err < 1e-5, "{kind} gradient error {err:.3e} >= 1e-5");
        errors.push((kind, err));
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "gradcheck took {secs:.1}s, budget is 60s");
    println!(
        "criterion 1 PASS: gradient fidelity ipa {:.3e}, gpt {:.3e} in {secs:.1}s",
        errors[0].1, errors[1].1
    );
}

#[test]
fn c02_oracle_equivalence() {
    // 50 random tiny instances: column/row operations, attention, and both
    // full forwards match straight-loop oracles within 1e-9.
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let mut r = rng(9_000 + trial);
        let n = r.random_range(2..=6);
        let m = r.random_range(1..=6);
        let k = r.random_range(1..=n);
        let p_col = r.random_range(1..=3);
        let p_row = r.random_range(1..=3);
        let vocab = r.random_range(5..=12);

        // IPA sublayers and full forward.
        let cfg = ModelConfig::new(n, m, 2, p_col, p_row, k, vocab);
        let model = IpaModel::new(cfg, 10_000 + trial).unwrap();
        let x = Tensor::from_fn(&[n, m], |_| r.random_range(-1.0..1.0));

        let mut g = Graph::new(&model.params);
        let xv = g.constant(x.clone());
        let layer = &model.layers[0];
        let col = ipa_core::column_forward(&mut g, xv, &layer.column, false).unwrap();
        let col_oracle = oracle::ipa_column_forward(&model.params, &layer.column, &x);
        worst = worst.max(oracle::max_diff_2d(g.value(col), &col_oracle));

        let row = ipa_core::row_forward(&mut g, xv, &layer.row).unwrap();
        let row_oracle = oracle::ipa_row_forward(&model.params, &layer.row, &x);
        worst = worst.max(oracle::max_diff_2d(g.value(row), &row_oracle));

        let ids: Vec<usize> = (0..m).map(|_| r.random_range(0..vocab)).collect();
        let logits = ipa_core::ipa_forward(&mut g, &ids, &model).unwrap();
        let full_oracle = oracle::ipa_forward(&model, &ids);
        worst = worst.max(oracle::max_diff_2d(g.value(logits), &full_oracle));

        // GPT attention and full forward; head count must divide n.
        let heads = *[1usize, 2]
            .iter()
            .filter(|&&h| n % h == 0)
            .last()
            .unwrap();
        let gcfg = GptConfig::new(n, heads, 2 * n, 2, m, vocab);
        let gpt = GptModel::new(gcfg, 20_000 + trial).unwrap();
        let mut gg = Graph::new(&gpt.params);
        let xv = gg.constant(x.clone());
        let (attn, _) =
            baseline_gpt::multi_head_attention(&mut gg, xv, &gpt.layers[0], heads).unwrap();
        let attn_oracle = oracle::gpt_attention(&gpt.params, &gpt.layers[0], heads, &x);
        worst = worst.max(oracle::max_diff_2d(gg.value(attn), &attn_oracle));

        let glogits = baseline_gpt::gpt_forward(&mut gg, &ids, &gpt).unwrap();
        let gpt_oracle = oracle::gpt_forward(&gpt, &ids);
        worst = worst.max(oracle::max_diff_2d(gg.value(glogits), &gpt_oracle));
    }
    assert!(worst < 1e-9, "worst oracle deviation {worst:.3e}");
    println!("criterion 2 PASS: oracle equivalence, worst deviation {worst:.3e} over 50 instances");
}

#[test]
fn c03_causality_suite() {
    // 100 random (model, input, j, l > j) cases split across both
    // architectures: logits at positions <= j are exactly unchanged.
    for case in 0..100u64 {
        let mut r = rng(30_000 + case);
        let n = r.random_range(4..=8);
        let m = r.random_range(2..=8);
        let vocab = r.random_range(8..=20);
        let ids: Vec<usize> = (0..m).map(|_| r.random_range(0..vocab)).collect();
        let j = r.random_range(0..m - 1);
        let l = r.random_range(j + 1..m);
        let mut perturbed = ids.clone();
        perturbed[l] = (perturbed[l] + 1 + r.random_range(0..vocab - 1)) % vocab;

        let (a, b) = if case % 2 == 0 {
            let k = r.random_range(1..=n);
            let cfg = ModelConfig::new(n, m, 2, 2, 2, k, vocab);
            let model = IpaModel::new(cfg, case).unwrap();
            let mut g1 = Graph::new(&model.params);
            let v1 = ipa_core::ipa_forward(&mut g1, &ids, &model).unwrap();
            let mut g2 = Graph::new(&model.params);
            let v2 = ipa_core::ipa_forward(&mut g2, &perturbed, &model).unwrap();
            (g1.value(v1).clone(), g2.value(v2).clone())
        } else {
            let heads = if n % 2 == 0 { 2 } else { 1 };
            let cfg = GptConfig::new(n, heads, 2 * n, 2, m, vocab);
            let model = GptModel::new(cfg, case).unwrap();
            let mut g1 = Graph::new(&model.params);
            let v1 = baseline_gpt::gpt_forward(&mut g1, &ids, &model).unwrap();
            let mut g2 = Graph::new(&model.params);
            let v2 = baseline_gpt::gpt_forward(&mut g2, &perturbed, &model).unwrap();
            (g1.value(v1).clone(), g2.value(v2).clone())
        };
        for v in 0..vocab {
            for pos in 0..=j {
                assert_eq!(
                    a.at(&[v, pos]),
                    b.at(&[v, pos]),
                    "case {case}: perturbing position {l} leaked into {pos}"
                );
            }
        }
    }
    println!("criterion 3 PASS: causality exact over 100 cases, both architectures");
}

#[test]
fn c04_kernel_normalization() {
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let mut r = rng(40_000 + case);
        let n = r.random_range(2..=6);
        let m = r.random_range(1..=6);
        let k = r.random_range(1..=n);
        let p_col = r.random_range(1..=4);
        let p_row = r.random_range(1..=4);

        let mut params = ParamSet::new();
        let col =
            ipa_core::ColumnOpParams::init(&mut params, "c", n, k, p_col, m, &mut r);
        let row = ipa_core::RowOpParams::init(&mut params, "r", n, p_row, m, &mut r);
        let x = Tensor::from_fn(&[n, m], |_| r.random_range(-2.0..2.0));

        let mut g = Graph::new(&params);
        let xv = g.constant(x);
        let ck = ipa_core::column_kernel(&mut g, xv, &col).unwrap();
        let rk = ipa_core::row_kernel(&mut g, xv, &row).unwrap();
        for j in 0..m {
            for l in 0..=j {
                let s: f64 = (0..p_col).map(|p| g.value(ck).at(&[p, j, l])).sum();
                worst = worst.max((s - 1.0).abs());
            }
            let s: f64 = (0..p_row).map(|p| g.value(rk).at(&[p, j])).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    assert!(worst < 1e-12, "kernel sums off by {worst:.3e}");
    println!("criterion 4 PASS: kernel normalization within {worst:.3e} over 100 instances");
}

#[test]
fn c05_parameter_accounting() {
    // Reference configuration: n=120, L=4, P_col=8, k=15, P_row=4 against
    // the published table (totals in millions, sequence lengths 100/250/500).
    let ipa_cfg = |m_max: usize| ModelConfig::new(120, m_max, 4, 8, 4, 15, 1);
    let gpt_cfg = |m_max: usize| GptConfig::new(120, 8, 480, 4, m_max, 1);

    let ipa_count = |v: usize, m: usize| {
        let mut c = ipa_cfg(m);
        c.vocab_size = v;
        ipa_core::param_count_ipa(&c, m).unwrap()
    };
    let gpt_count = |v: usize, m: usize| {
        let mut c = gpt_cfg(m);
        c.vocab_size = v;
        baseline_gpt::param_count_gpt(&c, m).unwrap()
    };

    // Slopes in m do not depend on the vocabulary.
    let ipa_delta = ipa_count(1000, 500) - ipa_count(1000, 100);
    assert_eq!(ipa_delta, 192_000, "ipa m-slope");
    let table_ipa_delta = 190_000.0; // 4.68M - 4.49M
    let gap = (ipa_delta as f64 - table_ipa_delta).abs() / table_ipa_delta;
    assert!(gap <= 0.02, "ipa delta {ipa_delta} vs table 0.19M: {:.2}%", gap * 100.0);

    let gpt_delta = gpt_count(1000, 500) - gpt_count(1000, 100);
    assert_eq!(gpt_delta, 48_000, "gpt m-slope");
    let table_gpt_delta = 50_000.0; // 4.50M - 4.45M
    let gap = (gpt_delta as f64 - table_gpt_delta).abs() / table_gpt_delta;
    assert!(gap <= 0.05, "gpt delta {gpt_delta} vs table 0.05M: {:.2}%", gap * 100.0);

    // Absolute totals: tied head, vocabulary unreported; search V in
    // [30000, 34000] for the best fit and require every entry within 8%.
    let table: [(u64, f64, bool); 6] = [
        (100, 4.49e6, true),
        (250, 4.56e6, true),
        (500, 4.68e6, true),
        (100, 4.45e6, false),
        (250, 4.47e6, false),
        (500, 4.50e6, false),
    ];
    let max_gap_at = |v: usize| -> f64 {
        table
            .iter()
            .map(|&(m, expected, is_ipa)| {
                let got = if is_ipa {
                    ipa_count(v, m as usize)
                } else {
                    gpt_count(v, m as usize)
                } as f64;
                (got - expected).abs() / expected
            })
            .fold(0.0, f64::max)
    };
    let (best_v, best_gap) = (30_000..=34_000)
        .map(|v| (v, max_gap_at(v)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    assert!(
        best_gap <= 0.08,
        "best V {best_v} still deviates {:.2}% from the reference totals",
        best_gap * 100.0
    );
    println!(
        "criterion 5 PASS: deltas 192000/48000 exact; V={best_v} fits all six totals within {:.2}% (budget 8%)",
        best_gap * 100.0
    );
}

#[test]
fn c09_tokenizer_roundtrip_and_determinism() {
    let toy = std::fs::read(toy_corpus_path()).unwrap();
    let tok_a = tokenizer_bpe::bpe_train(&toy, 2048).unwrap();
    let tok_b = tokenizer_bpe::bpe_train(&toy, 2048).unwrap();
    assert_eq!(tok_a.merges(), tok_b.merges(), "retraining changed the merge list");
    assert_eq!(tok_a, tok_b);

    // Whole corpus.
    let ids = tok_a.encode(&toy);
    assert_eq!(tok_a.decode(&ids).unwrap(), toy);

    // 1000 random byte strings.
    let mut r = rng(90_000);
    for _ in 0..1000 {
        let len = r.random_range(0..300);
        let bytes: Vec<u8> = (0..len).map(|_| r.random::<u8>()).collect();
        let ids = tok_a.encode(&bytes);
        assert_eq!(tok_a.decode(&ids).unwrap(), bytes);
    }
    println!(
        "criterion 9 PASS: tokenizer roundtrip on toy corpus + 1000 random strings; retraining deterministic ({} merges)",
        tok_a.merges().len()
    );
}

#[test]
fn c10_piecewise_demo_beats_single_line() {
    use ipa_core::{piecewise_affine_1d, Center};
    let grid: Vec<f64> = (0..=800)
        .map(|i| std::f64::consts::PI * i as f64 / 800.0)
        .collect();

    // Dense sweep oracle for the best single tangent line.
    let best_single = grid
        .iter()
        .map(|&x0| {
            let c = Center::new(x0, x0.sin(), x0.cos());
            grid.iter()
                .map(|&x| (c.line(x) - x.sin()).abs())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min);

    let centers: Vec<Center> = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI]
        .iter()
        .map(|&x0| Center::new(x0, x0.sin(), x0.cos()))
        .collect();
    let bw = vec![0.45; 3];
    let piecewise = grid
        .iter()
        .map(|&x| (piecewise_affine_1d(x, &centers, &bw).unwrap() - x.sin()).abs())
        .fold(0.0, f64::max);

    assert!(
        piecewise * 2.0 < best_single,
        "piecewise max error {piecewise:.4} not 2x better than best line {best_single:.4}"
    );
    println!(
        "criterion 10 PASS: piecewise max error {piecewise:.4} vs best single line {best_single:.4} ({:.1}x better)",
        best_single / piecewise
    );
}

#[test]
fn c11_persistence_and_resumption() {
    use train_harness::{
        load_checkpoint, save_checkpoint, train, AdamState, CheckpointMeta, Corpus, ModelSpec,
        TokenizerRef, TrainConfig, TrainHooks,
    };
    let spec = ModelSpec::Ipa {
        embed_dim: 12,
        max_seq_len: 12,
        layers: 1,
        col_experts: 2,
        row_experts: 2,
        rank: 4,
        tie_head: true,
        residual: false,
        layernorm: false,
        prefix_scale: false,
    };
    let stream: Vec<u32> = (0..600).map(|i| (i * 7 % 41) as u32).collect();
    let corpus = Corpus {
        train: stream.clone(),
        valid: stream.clone(),
        test: stream,
    };
    let mut cfg = TrainConfig::new(12, 20);
    cfg.batch_size = 2;
    cfg.eval_interval = 5;
    cfg.eval_windows = 4;
    cfg.learning_rate = 1e-3;

    // Uninterrupted 20 steps.
    let mut model_a = spec.build(41, 5, autodiff_core::Precision::F64).unwrap();
    let mut adam_a = AdamState::new(model_a.params());
    let mut meta_a = CheckpointMeta::fresh(spec.clone(), cfg.clone(), 41, TokenizerRef::ByteLevel);
    let out_a = train(
        model_a.as_mut(),
        &mut adam_a,
        &mut meta_a,
        &corpus,
        &mut TrainHooks::default(),
    )
    .unwrap();

    // 10 steps, checkpoint, reload, 10 more.
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("mid.bin");
    let mut half = cfg.clone();
    half.max_steps = 10;
    let mut model_b = spec.build(41, 5, autodiff_core::Precision::F64).unwrap();
    let mut adam_b = AdamState::new(model_b.params());
    let mut meta_b = CheckpointMeta::fresh(spec, half, 41, TokenizerRef::ByteLevel);
    let mut hooks = TrainHooks {
        final_checkpoint: Some(&ckpt),
        ..Default::default()
    };
    train(model_b.as_mut(), &mut adam_b, &mut meta_b, &corpus, &mut hooks).unwrap();

    let (mut meta_c, mut model_c, mut adam_c) = load_checkpoint(&ckpt).unwrap();

    // Bit-identical logits after the roundtrip.
    let ids: Vec<usize> = (0..12).map(|i| (i * 3) % 41).collect();
    let mut g1 = Graph::new(model_b.params());
    let l1 = model_b.forward(&mut g1, &ids).unwrap();
    let mut g2 = Graph::new(model_c.params());
    let l2 = model_c.forward(&mut g2, &ids).unwrap();
    assert_eq!(g1.value(l1).data(), g2.value(l2).data(), "logits changed across save/load");

    meta_c.train.max_steps = 20;
    let out_c = train(
        model_c.as_mut(),
        &mut adam_c,
        &mut meta_c,
        &corpus,
        &mut TrainHooks::default(),
    )
    .unwrap();

    // Resumed run reproduces the uninterrupted loss sequence exactly.
    let mut compared = 0;
    for ra in &out_a.history {
        for rc in &out_c.history {
            if ra.step == rc.step && ra.split == rc.split {
                assert_eq!(
                    ra.loss.to_bits(),
                    rc.loss.to_bits(),
                    "loss at step {} ({}) differs",
                    ra.step,
                    ra.split
                );
                compared += 1;
            }
        }
    }
    assert!(compared >= 4, "too few overlapping eval records ({compared})");
    for ((_, pa), (_, pc)) in model_a.params().iter().zip(model_c.params().iter()) {
        assert_eq!(pa.value().data(), pc.value().data(), "{} diverged", pa.name());
    }

    // save -> load -> save byte equality.
    let again = dir.path().join("again.bin");
    let (m2, model2, adam2) = load_checkpoint(&ckpt).unwrap();
    save_checkpoint(&again, &m2, model2.as_ref(), &adam2).unwrap();
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(&again).unwrap());

    println!("criterion 11 PASS: checkpoint roundtrip bit-identical; resumption exact ({compared} records compared)");
}

mod common;

use common::{random_model, random_video, small_config};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use sgn::datamodel::{AblationFlags, SgnRng, Vocabulary};
use sgn::Scalar;

fn vocab() -> Vocabulary {
    Vocabulary::from_words(["red", "ball", "then", "dog", "jumps", "blue"]).unwrap()
}

fn flag_sets() -> Vec<AblationFlags> {
    ["sa,ps,ca", "sa,ps", "sa", "sa,word", "none"]
        .iter()
        .map(|s| AblationFlags::parse_list(s).unwrap())
        .collect()
}

fn assert_rows_sum_to_one<T: Scalar>(m: &Array2<T>, tol: f64, what: &str) {
    for (i, row) in m.rows().into_iter().enumerate() {
        let s: f64 = row.iter().map(|v| v.as_f64()).sum();
        assert!((s - 1.0).abs() <= tol, "{what} row {i} sums to {s}");
        assert!(row.iter().all(|v| v.as_f64() >= 0.0), "{what} row {i} has a negative entry");
    }
}

fn assert_sums_to_one<T: Scalar>(v: &Array1<T>, tol: f64, what: &str) {
    let s: f64 = v.iter().map(|x| x.as_f64()).sum();
    assert!((s - 1.0).abs() <= tol, "{what} sums to {s}");
}

/// Runs a free-running decode from a random prefix and checks every distribution.
fn check<T: Scalar>(flags: AblationFlags, seed: u64, prefix_len: usize, layers: usize, tol: f64) {
    let mut cfg = small_config(6);
    cfg.enc_layers = layers;
    let v = vocab();
    let model = random_model::<T>(&cfg, &v, flags, seed, 1.5);
    let video = random_video::<T>(&cfg, seed + 1000);
    let mut rng = SgnRng::seed_from_u64(seed);
    let mut state = model.initial_state();
    state.prefix = (0..prefix_len).map(|_| rng.random_range(4..v.len())).collect();
    for _ in prefix_len..cfg.max_len {
        let (mut next, out, tape) = model.step(&video, &state, None).unwrap();
        assert_sums_to_one(&out.probs, tol, "word distribution");
        assert_sums_to_one(&out.beta, tol, "group attention");
        if flags.use_semantic_aligner {
            assert_rows_sum_to_one(tape.word_attention.as_ref().unwrap(), tol, "word attention");
            let alpha = tape.alpha.as_ref().unwrap();
            assert_eq!(alpha.nrows(), tape.kept.len());
            assert_eq!(out.beta.len(), tape.kept.len());
            assert_rows_sum_to_one(alpha, tol, "frame attention");
        } else {
            assert_eq!(out.beta.len(), cfg.n_frames);
        }
        next.prefix.push(rng.random_range(4..v.len()));
        state = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_normalized_f64(seed in 0u64..10_000, prefix in 0usize..4, layers in 1usize..3, f in 0usize..5) {
        check::<f64>(flag_sets()[f], seed, prefix, layers, 1e-9);
    }

    #[test]
    fn distributions_normalized_f32(seed in 0u64..10_000, prefix in 0usize..4, layers in 1usize..3, f in 0usize..5) {
        check::<f32>(flag_sets()[f], seed, prefix, layers, 1e-5);
    }
}

#[test]
fn teacher_forced_contrastive_probabilities_lie_in_unit_interval() {
    let cfg = small_config(6);
    let v = vocab();
    let model = random_model::<f64>(&cfg, &v, AblationFlags::FULL, 9, 1.0);
    let video = random_video::<f64>(&cfg, 1);
    let neg = random_video::<f64>(&cfg, 2);
    let cap = v.encode(&["red", "ball", "then", "dog"], 6).unwrap();
    let pass = model.teacher_forced(&video, &cap, Some(&neg)).unwrap();
    assert_eq!(pass.p_ca.len(), pass.n_groups);
    assert!(pass.p_ca.iter().all(|&p| p > 0.0 && p < 1.0));
    let ca_from_p: f64 = pass.p_ca.iter().map(|p| -p.ln()).sum();
    assert!((ca_from_p - pass.ca).abs() < 1e-9);
}

//! Scores on a four-video toy corpus against values from the independent
//! script in `fixtures/metrics_oracle.py`.

use serde_json::Value;
use sgn::metrics::{evaluate, metric_tokens, rouge_l};

fn fixture() -> Value {
    serde_json::from_str(include_str!("fixtures/metrics_toy.json")).unwrap()
}

fn toy() -> (Vec<String>, Vec<&'static str>, Vec<Vec<&'static str>>) {
    let ids = (1..=4).map(|i| format!("v{i}")).collect();
    let cands = vec![
        "a man is playing a guitar",
        "a woman is slicing an onion",
        "a dog runs on the grass",
        "a cat is sleeping",
    ];
    let refs = vec![
        vec!["a man plays the guitar", "a person is playing a guitar"],
        vec!["a woman slices an onion", "someone is cutting onions"],
        vec!["a dog is running in a field", "the dog runs across the grass"],
        vec!["a cat sleeps on a sofa"],
    ];
    (ids, cands, refs)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6
}

fn floats(v: &Value, key: &str) -> Vec<f64> {
    v[key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn corpus_scores_match_oracle() {
    let f = fixture();
    let (ids, cands, refs) = toy();
    let r = evaluate(&ids, &cands, &refs).unwrap();
    assert!(close(r.bleu4, f["bleu4"].as_f64().unwrap()), "bleu {}", r.bleu4);
    assert!(close(r.cider_d, f["cider_d"].as_f64().unwrap()), "cider {}", r.cider_d);
    assert!(close(r.rouge_l, f["rouge_l"].as_f64().unwrap()), "rouge {}", r.rouge_l);
    assert!(!r.cider_df_fallback);
    assert_eq!(r.n_videos, 4);
}

#[test]
fn per_video_scores_match_oracle() {
    let f = fixture();
    let (ids, cands, refs) = toy();
    let r = evaluate(&ids, &cands, &refs).unwrap();
    for (i, v) in r.per_video.iter().enumerate() {
        assert_eq!(v.video_id, ids[i]);
        assert!(close(v.bleu4, floats(&f, "bleu4_per_video")[i]));
        assert!(close(v.cider_d, floats(&f, "cider_d_per_video")[i]));
        assert!(close(v.rouge_l, floats(&f, "rouge_l_per_video")[i]));
    }
}

#[test]
fn rouge_single_pair_matches_oracle() {
    let f = fixture();
    let (score, _) = rouge_l(&[metric_tokens("a b c d")], &[vec![metric_tokens("a c d")]]).unwrap();
    assert!(close(score, f["rouge_l_abcd"].as_f64().unwrap()));
}

#[test]
fn perfect_candidates_score_maximal_bleu_and_rouge() {
    let ids: Vec<String> = vec!["a".into(), "b".into()];
    let cands = vec!["the quick brown fox jumps", "a slow green turtle walks"];
    let refs = vec![vec![cands[0]], vec![cands[1]]];
    let r = evaluate(&ids, &cands, &refs).unwrap();
    assert!((r.bleu4 - 1.0).abs() < 1e-12);
    assert!((r.rouge_l - 1.0).abs() < 1e-12);
    assert!(r.cider_d > 0.0);
}

#[test]
fn mismatched_inputs_are_errors() {
    let ids: Vec<String> = vec!["a".into()];
    assert!(evaluate(&ids, &["x y"], &[vec![]]).is_err());
    assert!(evaluate(&ids, &["x y", "z"], &[vec!["x"]]).is_err());
}

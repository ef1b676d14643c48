use ndarray::Array2;
use rand::Rng;
use sgn::datamodel::{AblationFlags, Caption, Config, SgnRng, VideoFeatures, Vocabulary};
use sgn::model::Model;

fn setup(flags: AblationFlags) -> (Model<f64>, VideoFeatures<f64>, VideoFeatures<f64>, Caption) {
    let vocab = Vocabulary::from_words(["red", "ball", "then", "dog", "jumps"]).unwrap();
    let cfg = Config {
        n_frames: 4,
        d_a: 2,
        d_m: 1,
        d_w: 5,
        d_h: 6,
        d_s: Some(4),
        d_att: Some(3),
        max_len: 6,
        enc_layers: 2,
        tau: 0.2,
        lambda: 0.7,
        ..Config::default()
    };
    let mut rng = SgnRng::seed_from_u64(11);
    let mut model = Model::<f64>::new(&cfg, &vocab, flags, &mut rng).unwrap();
    // larger weights than init so every path carries a visible gradient
    for s in model.params.slices_mut() {
        for x in s.iter_mut() {
            *x = rng.random_range(-0.6..0.6);
        }
    }
    let mut frames = |id: &str| {
        let f = Array2::from_shape_simple_fn((4, 3), || rng.random_range(-1.0..1.0));
        VideoFeatures::new(id, f, 2, 1).unwrap()
    };
    let video = frames("pos");
    let negative = frames("neg");
    let caption = vocab.encode(&["red", "ball", "then", "dog"], 6).unwrap();
    (model, video, negative, caption)
}

fn objective(model: &Model<f64>, v: &VideoFeatures<f64>, n: &VideoFeatures<f64>, c: &Caption) -> f64 {
    let pass = model.teacher_forced(v, c, Some(n)).unwrap();
    pass.objective(model.lambda)
}

fn check(flags: AblationFlags) {
    let (mut model, video, negative, caption) = setup(flags);
    let (_, grads) = model.loss_and_grad(&video, &caption, Some(&negative), 1.0).unwrap();
    let kept_before = model.teacher_forced(&video, &caption, Some(&negative)).unwrap();
    let kept_before: Vec<Vec<usize>> = kept_before.steps.iter().map(|s| s.kept.clone()).collect();
    let names = model.params.shapes();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let mut pick = SgnRng::seed_from_u64(3);
    let h = 1e-6;
    let mut nonzero = 0;
    for (t, (name, _)) in names.iter().enumerate() {
        let len = analytic[t].len();
        for _ in 0..8.min(len) {
            let i = pick.random_range(0..len);
            let orig = model.params.slices()[t][i];
            model.params.slices_mut()[t][i] = orig + h;
            let up = objective(&model, &video, &negative, &caption);
            model.params.slices_mut()[t][i] = orig - h;
            let down = objective(&model, &video, &negative, &caption);
            model.params.slices_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t][i];
            let err = (numeric - a).abs() / (1e-6 + numeric.abs().max(a.abs()));
            assert!(err < 1e-4 || (numeric - a).abs() < 1e-8, "{flags} {name}[{i}]: analytic {a} numeric {numeric}");
            if a.abs() > 1e-9 {
                nonzero += 1;
            }
        }
    }
    assert!(nonzero > 20, "{flags}: gradients vanish ({nonzero} nonzero probes)");
    let again = model.teacher_forced(&video, &caption, Some(&negative)).unwrap();
    let kept_after: Vec<Vec<usize>> = again.steps.iter().map(|s| s.kept.clone()).collect();
    assert_eq!(kept_before, kept_after);
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    check(AblationFlags::FULL);
}

#[test]
fn temporal_attention_baseline_gradient() {
    check(AblationFlags::TA_BASELINE);
}

#[test]
fn ablated_variants_gradient() {
    for list in ["sa", "sa,ps", "sa,ca", "sa,ca,word"] {
        check(AblationFlags::parse_list(list).unwrap());
    }
}

#[test]
fn unused_parameters_receive_zero_gradient() {
    let (model, video, negative, caption) = setup(AblationFlags::TA_BASELINE);
    let (_, g) = model.loss_and_grad(&video, &caption, Some(&negative), 1.0).unwrap();
    for (name, s) in model.params.shapes().iter().zip(g.slices()) {
        if name.0.starts_with("enc") || name.0.starts_with("align") || name.0 == "pos" {
            assert!(s.iter().all(|&x| x == 0.0), "{} should be untouched", name.0);
        }
    }
}

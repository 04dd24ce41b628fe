use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{Characteristics, Span};
use crate::pipeline::decode_stage2_output;

fn random_batch(seed: u64, n: usize, dim: u32) -> (Vec<FeatureVector>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = (0..n)
        .map(|_| {
            let mut idx: Vec<u32> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0..dim)).collect();
            idx.sort_unstable();
            idx.dedup();
            FeatureVector { dim, entries: idx.into_iter().map(|i| (i, rng.random_range(1..3) as f64)).collect() }
        })
        .collect();
    let ys = (0..n).map(|i| i % 3 == 0 || rng.random_bool(0.3)).collect();
    (xs, ys)
}

fn random_model(seed: u64, dim: u32) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LinearModel {
        dim,
        bias: rng.random_range(-0.5..0.5),
        weights: (0..dim).map(|i| (i, rng.random_range(-1.0..1.0))).collect(),
    }
}

/// Two clusters of sentences with disjoint cue words and shared filler.
fn separable_corpus(seed: u64, n: usize) -> (Vec<String>, Vec<bool>) {
    let pos = ["traitors", "liars", "criminals", "corrupt", "enemies"];
    let neg = ["budget", "committee", "education", "roads", "health"];
    let filler = ["the", "today", "we", "discuss", "government", "minister", "about"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % 2 == 0;
        let cues = if y { &pos } else { &neg };
        let mut words: Vec<&str> = (0..4).map(|_| filler[rng.random_range(0..filler.len())]).collect();
        words.insert(rng.random_range(0..words.len()), cues[rng.random_range(0..cues.len())]);
        texts.push(words.join(" "));
        labels.push(y);
    }
    (texts, labels)
}

fn accuracy(model: &LinearModel, xs: &[FeatureVector], ys: &[bool]) -> f64 {
    let hits = xs.iter().zip(ys).filter(|(x, y)| (model.predict_proba(x) >= 0.5) == **y).count();
    hits as f64 / ys.len() as f64
}

#[test]
fn separable_clusters_reach_full_accuracy() {
    let (texts, ys) = separable_corpus(3, 200);
    let f = Featurizer::new(1 << 12).unwrap();
    let xs: Vec<_> = texts.iter().map(|t| f.featurize(t)).collect();
    for loss in [LossConfig::Default, LossConfig::ClassWeights { weights: None }, LossConfig::focal()] {
        let cfg = TrainConfig { loss, epochs: 200, ..Default::default() };
        let trained = train_linear(&xs, &ys, &cfg).unwrap();
        assert_eq!(accuracy(&trained.model, &xs, &ys), 1.0, "{loss:?}");
    }
}

#[test]
fn deterministic_given_seed() {
    let (xs, ys) = random_batch(5, 60, 128);
    for batch_size in [None, Some(8)] {
        let cfg = TrainConfig { epochs: 30, seed: 9, batch_size, learning_rate: 0.3, ..Default::default() };
        let a = train_linear(&xs, &ys, &cfg).unwrap();
        let b = train_linear(&xs, &ys, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_history, b.loss_history);
    }
}

#[test]
fn full_batch_history_is_monotone() {
    let (xs, ys) = random_batch(6, 80, 64);
    for loss in [LossConfig::Default, LossConfig::ClassWeights { weights: None }, LossConfig::focal()] {
        let cfg = TrainConfig { loss, epochs: 100, learning_rate: 5.0, ..Default::default() };
        let h = train_linear(&xs, &ys, &cfg).unwrap().loss_history;
        assert!(h.windows(2).all(|w| w[1] <= w[0]), "{loss:?}");
        assert!(h.last().unwrap() < &h[0]);
    }
}

#[test]
fn single_class_is_degenerate() {
    let (xs, _) = random_batch(1, 5, 32);
    assert!(matches!(
        train_linear(&xs, &[true; 5], &TrainConfig::default()),
        Err(Error::Degenerate(_))
    ));
    assert!(train_linear(&xs, &[true; 4], &TrainConfig::default()).is_err());
}

#[test]
fn heavier_positive_weight_does_not_lower_recall() {
    let (xs, ys) = random_batch(21, 300, 32);
    let recall = |m: &LinearModel| {
        let tp = xs.iter().zip(&ys).filter(|(x, y)| **y && m.predict_proba(x) >= 0.5).count();
        tp as f64 / ys.iter().filter(|y| **y).count() as f64
    };
    let base = train_linear(&xs, &ys, &TrainConfig { epochs: 300, ..Default::default() }).unwrap();
    let mut last = recall(&base.model);
    for w in [2.0, 5.0, 20.0] {
        let cfg = TrainConfig {
            loss: LossConfig::ClassWeights { weights: Some([1.0, w]) },
            epochs: 300,
            ..Default::default()
        };
        let r = recall(&train_linear(&xs, &ys, &cfg).unwrap().model);
        assert!(r >= last, "w={w}: {r} < {last}");
        last = r;
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..5 {
        let (xs, ys) = random_batch(100 + seed, 25, 48);
        let model = random_model(200 + seed, 48);
        for loss in [
            LossConfig::Default,
            LossConfig::ClassWeights { weights: Some([0.6, 2.5]) },
            LossConfig::focal(),
            LossConfig::Focal { gamma: 0.5, alpha: 0.25 },
        ] {
            let dev = grad_check(&model, &xs, &ys, &loss).unwrap();
            assert!(dev < 1e-4, "seed {seed} {loss:?}: {dev}");
        }
    }
}

#[test]
fn multitask_gradient_matches_finite_differences() {
    let (xs, _) = random_batch(7, 20, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gold: Vec<Characteristics> = (0..20)
        .map(|_| Characteristics {
            intensity: rng.random_range(0..3),
            incivility: rng.random_bool(0.5),
            outgroup: rng.random_bool(0.5),
            common_good: rng.random_bool(0.5),
            group: rng.random_bool(0.5),
            person: rng.random_bool(0.5),
            institute: rng.random_bool(0.5),
        })
        .collect();
    let mut model = MultiTaskModel::zeros(32);
    for (h, head) in model.heads.iter_mut().enumerate() {
        *head = random_model(300 + h as u64, 32);
    }
    let dev = grad_check_multitask(&model, &xs, &gold).unwrap();
    assert!(dev < 1e-4, "{dev}");
}

#[test]
fn bias_gradient_at_zero_model() {
    let (xs, mut ys) = random_batch(9, 40, 16);
    let half = ys.len() / 2;
    for (i, y) in ys.iter_mut().enumerate() {
        *y = i < half;
    }
    ys[0] = false;
    let mean_label = ys.iter().filter(|y| **y).count() as f64 / ys.len() as f64;
    let (_, grad) = linear_gradient(&LinearModel::zeros(16), &xs, &ys, &LossConfig::Default).unwrap();
    assert!((grad.last().unwrap() - (0.5 - mean_label)).abs() < 1e-12);
}

#[test]
fn class_weight_scale_with_matching_step_is_invariant() {
    let (xs, ys) = random_batch(12, 50, 32);
    let train = |w: [f64; 2], lr: f64| {
        let cfg = TrainConfig {
            loss: LossConfig::ClassWeights { weights: Some(w) },
            learning_rate: lr,
            epochs: 40,
            ..Default::default()
        };
        train_linear(&xs, &ys, &cfg).unwrap()
    };
    let a = train([1.0, 3.0], 1.0);
    let b = train([4.0, 12.0], 0.25);
    assert!((a.model.bias - b.model.bias).abs() < 1e-9);
    for (k, w) in &a.model.weights {
        assert!((w - b.model.weights[k]).abs() < 1e-9);
    }
    for (x, y) in a.loss_history.iter().zip(&b.loss_history) {
        assert!((4.0 * x - y).abs() < 1e-9 * y.abs().max(1.0));
    }
}

#[test]
fn multitask_training_fits_cues() {
    let texts = ["liars and traitors", "the corrupt court", "those fascists again", "a calm remark"];
    let gold = [
        Characteristics { intensity: 2, incivility: true, person: true, ..Default::default() },
        Characteristics { intensity: 1, institute: true, ..Default::default() },
        Characteristics { intensity: 2, outgroup: true, group: true, ..Default::default() },
        Characteristics { intensity: 0, ..Default::default() },
    ];
    let f = Featurizer::new(1 << 10).unwrap();
    let xs: Vec<_> = texts.iter().map(|t| f.featurize(t)).collect();
    let trained = train_multitask(&xs, &gold, &TrainConfig { epochs: 300, ..Default::default() }).unwrap();
    let h = &trained.loss_history;
    assert!(h.windows(2).all(|w| w[1] <= w[0]));
    for (x, g) in xs.iter().zip(&gold) {
        assert_eq!(trained.model.predict(x).to_characteristics(), *g);
    }
}

#[test]
fn model_files_serve_as_backends() {
    let dir = tempfile::tempdir().unwrap();
    let map = LabelMap::default();
    let (texts, ys) = separable_corpus(4, 40);
    let f = Featurizer::new(1 << 10).unwrap();
    let xs: Vec<_> = texts.iter().map(|t| f.featurize(t)).collect();
    let cfg = TrainConfig::default();
    let trained = train_linear(&xs, &ys, &cfg).unwrap();
    let file = ModelFile {
        header: ModelHeader::new(TaskKind::Binary, 1 << 10, &cfg, Some(trained.loss)),
        body: ModelBody::Binary(trained.model.clone()),
    };
    let path = dir.path().join("binary.json");
    file.save(&path).unwrap();
    assert_eq!(ModelFile::load(&path).unwrap(), file);

    let backend = BaselineBackend::load("lin", &path, &map).unwrap();
    assert_eq!(backend.descriptor().kind, TaskKind::Binary);
    let out = backend.infer(&texts[..2]).unwrap();
    let p0: f64 = out[0].as_ref().unwrap().parse().unwrap();
    let p1: f64 = out[1].as_ref().unwrap().parse().unwrap();
    assert!(p0 > 0.5 && p1 < 0.5);

    let mt = ModelFile {
        header: ModelHeader::new(TaskKind::Characteristics, 1 << 10, &cfg, None),
        body: ModelBody::Characteristics(MultiTaskModel::zeros(1 << 10)),
    };
    let b = BaselineBackend::new("mt", mt, &map).unwrap();
    let raw = b.infer(&["x".into()]).unwrap().remove(0).unwrap();
    assert!(decode_stage2_output(&raw, &map).unwrap().parse_ok);

    let lex = ModelFile {
        header: ModelHeader::new(TaskKind::Span, 0, &cfg, None),
        body: ModelBody::Span(SpanLexicon::train([("the minister lies", &[Span::new(4, 12)][..])], 10)),
    };
    let b = BaselineBackend::new("lex", lex, &map).unwrap();
    assert_eq!(b.infer(&["a minister".into()]).unwrap()[0], Ok("a %%%minister%%%".to_string()));

    let mut bad = file.clone();
    bad.header.task = TaskKind::Span;
    bad.save(&path).unwrap();
    assert!(ModelFile::load(&path).is_err());
}

use proptest::prelude::*;

use super::*;
use crate::corpus::{RawRecord, Source, Span};

fn pred(id: &str, delegit: bool, c: Option<Characteristics>, spans: Option<Vec<Span>>) -> PredictionRecord {
    PredictionRecord {
        sentence_id: id.into(),
        delegit,
        stage1_score: if delegit { 1.0 } else { 0.0 },
        characteristics: c,
        target_spans: spans,
        model_id: "m".into(),
        stage2_parse_ok: true,
        error: None,
    }
}

fn records_from_labels(p: &[bool], g: &[bool]) -> (Vec<PredictionRecord>, Vec<PddAnnotation>) {
    let preds = p.iter().enumerate().map(|(i, &d)| pred(&format!("s{i}"), d, None, None)).collect();
    let gold = g
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let id = format!("s{i}");
            if d {
                PddAnnotation::positive(id, "g")
            } else {
                PddAnnotation::negative(id, "g")
            }
        })
        .collect();
    (preds, gold)
}

#[test]
fn confusion_example() {
    let m = BinaryMetrics::from_counts(3, 1, 2, 4);
    assert_eq!((m.precision, m.recall, m.accuracy), (0.75, 0.6, 0.7));
    assert!((m.f1 - 0.6667).abs() < 5e-5);

    let p = [true, true, true, true, false, false, false, false, false, false];
    let g = [true, true, true, false, true, true, false, false, false, false];
    let (preds, gold) = records_from_labels(&p, &g);
    assert_eq!(binary_metrics(&preds, &gold).unwrap(), m);
}

#[test]
fn perfect_predictions() {
    let labels = [true, false, true, false, false];
    let (preds, gold) = records_from_labels(&labels, &labels);
    let m = binary_metrics(&preds, &gold).unwrap();
    assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
}

#[test]
fn published_rows_algebra() {
    assert!((f1_score(0.756, 0.714) - 0.735).abs() <= 0.0015);
    assert_eq!(round_half_even(f1_score(0.750, 0.600), 3), 0.667);
    let table5 = [
        ([0.587, 0.528, 0.776, 0.769, 0.737, 0.717, 0.533], 0.664),
        ([0.583, 0.275, 0.649, 0.792, 0.792, 0.720, 0.622], 0.633),
    ];
    for (vals, avg) in table5 {
        let mean = vals.iter().sum::<f64>() / 7.0;
        assert_eq!(round_half_even(mean, 3), avg);
    }
}

#[test]
fn rounding_half_even() {
    assert_eq!(round_half_even(0.0625, 3), 0.062);
    assert_eq!(round_half_even(0.0635, 3), 0.064);
    assert_eq!(round_half_even(0.6665, 3), 0.666);
    assert_eq!(round_half_even(0.12345, 3), 0.123);
    assert_eq!(round_half_even(2.0 / 3.0, 3), 0.667);
}

#[test]
fn id_mismatches() {
    let (preds, gold) = records_from_labels(&[true, false], &[true, false, true]);
    assert!(matches!(binary_metrics(&preds, &gold), Err(Error::IdMismatch(_))));
    let (mut preds, gold) = records_from_labels(&[true, false], &[true, false]);
    preds[1].sentence_id = "zz".into();
    assert!(matches!(binary_metrics(&preds, &gold), Err(Error::IdMismatch(_))));
    assert!(binary_metrics(&[], &[]).is_err());
}

fn rich(id: &str, c: Characteristics, spans: Vec<Span>) -> PddAnnotation {
    PddAnnotation::positive(id, "g").with_characteristics(&c).with_spans(spans)
}

#[test]
fn characteristics_equal_gold() {
    let cs = [
        Characteristics { intensity: 2, person: true, incivility: true, ..Default::default() },
        Characteristics { intensity: 1, institute: true, ..Default::default() },
        Characteristics { intensity: 0, group: true, outgroup: true, common_good: true, ..Default::default() },
    ];
    let gold: Vec<_> = cs.iter().enumerate().map(|(i, c)| rich(&format!("s{i}"), *c, vec![])).collect();
    let preds: Vec<_> = cs.iter().enumerate().map(|(i, c)| pred(&format!("s{i}"), true, Some(*c), Some(vec![]))).collect();
    let m = characteristic_metrics(&preds, &gold).unwrap();
    assert_eq!(m.values(), [1.0; 7]);
    assert_eq!(m.avg_f1, 1.0);
    assert_eq!(m.n, 3);
}

#[test]
fn characteristics_parse_failures_score_zero() {
    let c = Characteristics { intensity: 1, person: true, ..Default::default() };
    let gold = vec![rich("a", c, vec![]), rich("b", c, vec![]), PddAnnotation::negative("n", "g")];
    let mut bad = pred("b", true, Some(c), Some(vec![]));
    bad.stage2_parse_ok = false;
    let preds = vec![pred("a", true, Some(c), Some(vec![])), bad, pred("n", false, None, None)];
    let m = characteristic_metrics(&preds, &gold).unwrap();
    assert_eq!(m.n, 2);
    assert!((m.person - 2.0 / 3.0).abs() < 1e-12);
    // intensity classes {0, 1}: class 1 F1 = 2/3, class 0 F1 = 0
    assert!((m.intensity - 1.0 / 3.0).abs() < 1e-12);
    assert!((m.avg_f1 - m.values().iter().sum::<f64>() / 7.0).abs() < 1e-15);

    let only_negative = vec![PddAnnotation::negative("n", "g")];
    assert!(characteristic_metrics(&[pred("n", false, None, None)], &only_negative).is_err());
}

#[test]
fn macro_f1_classes() {
    assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2]), 1.0);
    assert!((macro_f1(&[1, 1], &[1, 2]) - (2.0 / 3.0) / 2.0).abs() < 1e-12);
}

#[test]
fn span_example() {
    let items = [SpanItem {
        text: "x".repeat(30),
        gold: vec![Span::new(0, 5), Span::new(10, 15)],
        predicted: vec![Span::new(0, 5), Span::new(20, 25)],
    }];
    let m = span_metrics(&items, SpanMode::Exact);
    assert_eq!((m.tp_count, m.fp, m.fn_), (1, 1, 1));
    assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
}

#[test]
fn span_trimming_and_multiset() {
    let text = "the  minister  lies".to_string();
    let items = [SpanItem {
        text: text.clone(),
        gold: vec![Span::new(5, 13)],
        predicted: vec![Span::new(4, 14), Span::new(5, 13)],
    }];
    let m = span_metrics(&items, SpanMode::Exact);
    assert_eq!((m.tp_count, m.fp, m.fn_), (1, 1, 0));
    let perfect = [SpanItem { text, gold: vec![Span::new(0, 3), Span::new(5, 13)], predicted: vec![Span::new(0, 3), Span::new(5, 13)] }];
    let m = span_metrics(&perfect, SpanMode::Exact);
    assert_eq!((m.precision, m.recall, m.f1, m.tp_count), (1.0, 1.0, 1.0, 2));
}

#[test]
fn overlap_mode() {
    let items = [SpanItem {
        text: "y".repeat(40),
        gold: vec![Span::new(0, 10), Span::new(20, 30)],
        predicted: vec![Span::new(0, 8), Span::new(22, 40)],
    }];
    assert_eq!(span_metrics(&items, SpanMode::Exact).tp_count, 0);
    // 8/10 and 8/20
    assert_eq!(span_metrics(&items, SpanMode::Overlap).tp_count, 1);
}

#[test]
fn evaluate_report_and_csv() {
    let mut corpus = Corpus::new();
    corpus
        .ingest(
            ["the minister lies", "calm words"].iter().enumerate().map(|(i, t)| RawRecord {
                id: format!("s{i}"),
                text: Some(t.to_string()),
                date: "2020-01-01".into(),
                speaker_id: None,
                doc_id: None,
            }),
            Source::Facebook,
        )
        .unwrap();
    let c = Characteristics { intensity: 2, person: true, ..Default::default() };
    let gold = vec![rich("s0", c, vec![Span::new(4, 12)]), PddAnnotation::negative("s1", "g")];
    let preds = vec![pred("s0", true, Some(c), Some(vec![Span::new(4, 12)])), pred("s1", false, None, None)];
    let report = evaluate(&preds, &gold, Some(&corpus)).unwrap();
    assert_eq!(report.binary.f1, 1.0);
    assert_eq!(report.characteristics.unwrap().avg_f1, 1.0);
    assert_eq!(report.spans.unwrap().tp_count, 1);
    let csv = report.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 17);
    assert_eq!(
        lines.next().unwrap(),
        "m,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1"
    );
    let no_corpus = evaluate(&preds, &gold, None).unwrap();
    assert!(no_corpus.spans.is_none() && no_corpus.characteristics.is_some());
}

fn brute_force(pred: &[Span], gold: &[Span], mode: SpanMode, used: &mut Vec<bool>) -> usize {
    let Some((first, rest)) = pred.split_first() else { return 0 };
    let mut best = brute_force(rest, gold, mode, used);
    for j in 0..gold.len() {
        let ok = match mode {
            SpanMode::Exact => *first == gold[j],
            SpanMode::Overlap => {
                let inter = first.end.min(gold[j].end).saturating_sub(first.start.max(gold[j].start));
                let union = first.len() + gold[j].len() - inter;
                union > 0 && 2 * inter >= union
            }
        };
        if ok && !used[j] {
            used[j] = true;
            best = best.max(1 + brute_force(rest, gold, mode, used));
            used[j] = false;
        }
    }
    best
}

fn arb_spans() -> impl Strategy<Value = Vec<Span>> {
    proptest::collection::vec((0usize..12, 1usize..6).prop_map(|(s, l)| Span::new(s, s + l)), 0..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn matching_equals_brute_force(pred in arb_spans(), gold in arb_spans()) {
        for mode in [SpanMode::Exact, SpanMode::Overlap] {
            let fast = match_count(&pred, &gold, mode);
            let slow = brute_force(&pred, &gold, mode, &mut vec![false; gold.len()]);
            prop_assert_eq!(fast, slow);
        }
    }

    #[test]
    fn f1_between_p_and_r(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
        let (p, r, f) = prf(tp, fp, fn_);
        prop_assert!(p.min(r) - 1e-12 <= f && f <= p.max(r) + 1e-12);
        if (p - r).abs() > 1e-12 {
            prop_assert!(p.min(r) < f && f < p.max(r) || p.min(r) == 0.0);
        }
    }

    #[test]
    fn permutation_invariant(labels in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (p, g): (Vec<bool>, Vec<bool>) = labels.iter().copied().unzip();
        let (preds, gold) = records_from_labels(&p, &g);
        let base = binary_metrics(&preds, &gold).unwrap();
        let mut shuffled = preds.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(binary_metrics(&shuffled, &gold).unwrap(), base);
    }

    #[test]
    fn correct_addition_never_hurts(labels in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60), extra in any::<bool>()) {
        let (mut p, mut g): (Vec<bool>, Vec<bool>) = labels.iter().copied().unzip();
        let before = BinaryMetrics::from_labels(&p, &g).unwrap();
        p.push(extra);
        g.push(extra);
        let after = BinaryMetrics::from_labels(&p, &g).unwrap();
        if before.tp + before.fp + before.fn_ > 0 {
            prop_assert!(after.precision >= before.precision);
            prop_assert!(after.recall >= before.recall);
            prop_assert!(after.f1 >= before.f1);
        }
        prop_assert!(after.accuracy >= before.accuracy);
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use pdd_core::analysis::plot::{Marker, PlotData, PlotKind, Series};
use pdd_core::analysis::{
    before_after, bloc_key, characteristics_profile, coalition_cohort, compare_groups, density_estimate, gender_key,
    read_events, read_speaker_meta, span_term_counts, speaker_aggregate, temporal_series, weighted_log_odds, Binning,
    Event, EventKind, GroupComparison, SentenceFilter, SpeakerMeta, SpeakerShare,
};
use pdd_core::corpus::{parse_date, Attribute, Corpus, Source};
use pdd_core::pipeline::PredictionRecord;
use serde_json::json;

use super::{load_corpus, read_records, write_output};
use crate::args::{AnalysisTarget, AnalyzeArgs, BinArg};
use crate::config::Config;
use crate::manifest::RunRecord;
use crate::UsageError;

struct Inputs {
    preds: Vec<PredictionRecord>,
    corpus: Corpus,
    filter: SentenceFilter,
    speakers: Option<BTreeMap<String, SpeakerMeta>>,
    events: Vec<Event>,
}

impl Inputs {
    fn speakers(&self, target: &str) -> anyhow::Result<&BTreeMap<String, SpeakerMeta>> {
        self.speakers
            .as_ref()
            .ok_or_else(|| UsageError(format!("analyze {target} needs --speakers")).into())
    }
}

struct Emitter<'a> {
    dir: &'a Path,
    svg: bool,
}

impl Emitter<'_> {
    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>], record: &mut RunRecord) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        write_output(&self.dir.join(format!("{name}.csv")), w.into_inner()?, record)
    }

    fn plot(&self, name: &str, plot: &PlotData, record: &mut RunRecord) -> anyhow::Result<()> {
        write_output(&self.dir.join(format!("{name}.plot.json")), serde_json::to_string_pretty(plot)? + "\n", record)?;
        if self.svg {
            write_output(&self.dir.join(format!("{name}.svg")), plot.render_svg(), record)?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

fn date_arg(s: &Option<String>, name: &'static str) -> anyhow::Result<Option<NaiveDate>> {
    s.as_deref()
        .map(|d| parse_date(d).map_err(|e| UsageError(format!("--{name}: {e}")).into()))
        .transpose()
}

pub fn analyze(a: &AnalyzeArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    let filter = SentenceFilter {
        source: a
            .source
            .as_deref()
            .map(|s| s.parse::<Source>().map_err(|e| UsageError(e.to_string())))
            .transpose()?,
        from: date_arg(&a.from, "from")?,
        to: date_arg(&a.to, "to")?,
    };
    let speakers = match &a.speakers {
        Some(p) => {
            record.input(p);
            Some(read_speaker_meta(p).with_context(|| format!("reading {}", p.display()))?)
        }
        None => None,
    };
    let events = match &a.events {
        Some(p) => {
            record.input(p);
            read_events(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => Vec::new(),
    };
    let inputs = Inputs {
        preds: read_records(&a.pred, record)?,
        corpus: load_corpus(&a.corpus, record)?,
        filter,
        speakers,
        events,
    };
    record.output(&a.out_dir);
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let out = Emitter { dir: &a.out_dir, svg: !a.no_svg };
    let bin = match (a.bin, config.analyze.bin.as_deref()) {
        (Some(BinArg::HalfYear), _) => Some(Binning::HalfYear),
        (Some(BinArg::Week), _) => Some(Binning::Week),
        (None, Some(s)) => Some(Binning::parse(s).map_err(|e| UsageError(e.to_string()))?),
        (None, None) => None,
    };
    match a.target {
        AnalysisTarget::Temporal => temporal(&inputs, bin.unwrap_or(Binning::HalfYear), &out, record),
        AnalysisTarget::Gender => gender(&inputs, &out, record),
        AnalysisTarget::Bloc => bloc(&inputs, bin, &out, record),
        AnalysisTarget::Platform => platform(&inputs, &out, record),
        AnalysisTarget::Logodds => {
            let alpha0 = a.alpha0.or(config.analyze.alpha0).unwrap_or(100.0);
            let k = a.top_k.or(config.analyze.top_k).unwrap_or(10);
            logodds(&inputs, alpha0, k, &out, record)
        }
        AnalysisTarget::BeforeAfter => before_after_target(&inputs, a.event.as_deref(), &out, record),
    }
}

fn markers(events: &[Event], binning: Binning) -> Vec<Marker> {
    events.iter().map(|e| Marker { label: e.name.clone(), x: binning.bin(e.date).to_string() }).collect()
}

fn series_of(name: &str, shares: &[SpeakerShare]) -> (Series, Vec<Vec<String>>) {
    let points = temporal_series(shares);
    let rows = points
        .iter()
        .map(|p| vec![name.to_string(), p.period.to_string(), opt(p.value), p.n_speakers.to_string()])
        .collect();
    let series = Series {
        name: name.to_string(),
        x: points.iter().map(|p| p.period.to_string()).collect(),
        y: points.iter().map(|p| p.value).collect(),
    };
    (series, rows)
}

fn temporal(i: &Inputs, binning: Binning, out: &Emitter<'_>, record: &mut RunRecord) -> anyhow::Result<()> {
    let agg = speaker_aggregate(&i.preds, &i.corpus, Some(binning), &i.filter)?;
    let (series, rows) = series_of("all speakers", &agg.shares);
    out.csv("temporal", &["series", "period", "mean_share", "n_speakers"], &rows, record)?;
    let plot = PlotData {
        title: "Mean speaker PDD share over time".into(),
        x_label: "period".into(),
        y_label: "mean share".into(),
        kind: PlotKind::Line,
        series: vec![series],
        markers: markers(&i.events, binning),
    };
    out.plot("temporal", &plot, record)?;
    println!("{} periods, {} speaker-period cells, {} speakerless sentences", rows.len(), agg.shares.len(), agg.speakerless);
    record.details = json!({ "periods": rows.len(), "speakerless": agg.speakerless });
    Ok(())
}

fn comparison_outputs(name: &str, cmp: &GroupComparison, out: &Emitter<'_>, record: &mut RunRecord) -> anyhow::Result<()> {
    let rows: Vec<Vec<String>> = cmp
        .groups
        .iter()
        .map(|g| vec![g.group.clone(), g.n_speakers.to_string(), format!("{:.6}", g.mean), format!("{:.6}", g.sd)])
        .collect();
    out.csv(name, &["group", "n_speakers", "mean_share", "sd"], &rows, record)?;
    let tests: Vec<Vec<String>> = cmp
        .tests
        .iter()
        .map(|t| {
            let r = t.result;
            vec![
                t.group_a.clone(),
                t.group_b.clone(),
                opt(r.map(|r| r.t)),
                opt(r.map(|r| r.df)),
                opt(r.map(|r| r.p)),
            ]
        })
        .collect();
    out.csv(&format!("{name}_tests"), &["group_a", "group_b", "t", "df", "p"], &tests, record)?;
    for w in &cmp.warnings {
        eprintln!("warning: {w}");
    }
    for g in &cmp.groups {
        println!("{:<10} n={:<4} mean {:.4}", g.group, g.n_speakers, g.mean);
    }
    for t in &cmp.tests {
        if let Some(r) = t.result {
            println!("{} vs {}: t = {:.3}, df = {:.1}, p = {:.4}", t.group_a, t.group_b, r.t, r.df, r.p);
        }
    }
    Ok(())
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if x < first.0 || x > last.0 {
        return 0.0;
    }
    let k = points.partition_point(|p| p.0 < x);
    if k == 0 {
        return first.1;
    }
    let (a, b) = (points[k - 1], points[k.min(points.len() - 1)]);
    if b.0 == a.0 {
        a.1
    } else {
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    }
}

fn gender(i: &Inputs, out: &Emitter<'_>, record: &mut RunRecord) -> anyhow::Result<()> {
    let meta = i.speakers("gender")?;
    let agg = speaker_aggregate(&i.preds, &i.corpus, None, &i.filter)?;
    let cmp = compare_groups(&agg.shares, gender_key(meta))?;
    comparison_outputs("gender", &cmp, out, record)?;
    let mut curves = Vec::new();
    for g in &cmp.groups {
        match density_estimate(&g.shares) {
            Ok(d) => curves.push((g.group.clone(), d)),
            Err(e) => eprintln!("warning: no density for {}: {e}", g.group),
        }
    }
    if !curves.is_empty() {
        let lo = curves.iter().map(|(_, d)| d.points[0].0).fold(f64::INFINITY, f64::min);
        let hi = curves.iter().map(|(_, d)| d.points[d.points.len() - 1].0).fold(f64::NEG_INFINITY, f64::max);
        let grid: Vec<f64> = (0..128).map(|k| lo + (hi - lo) * k as f64 / 127.0).collect();
        let labels: Vec<String> = grid.iter().map(|x| format!("{x:.3}")).collect();
        let mut rows = Vec::new();
        let series = curves
            .iter()
            .map(|(name, d)| {
                let y: Vec<f64> = grid.iter().map(|x| interpolate(&d.points, *x)).collect();
                rows.extend(grid.iter().zip(&y).map(|(x, v)| vec![name.clone(), format!("{x:.6}"), format!("{v:.6}")]));
                Series { name: name.clone(), x: labels.clone(), y: y.into_iter().map(Some).collect() }
            })
            .collect();
        out.csv("gender_density", &["group", "share", "density"], &rows, record)?;
        let plot = PlotData {
            title: "Density of speaker PDD share by gender".into(),
            x_label: "speaker PDD share".into(),
            y_label: "density".into(),
            kind: PlotKind::Line,
            series,
            markers: Vec::new(),
        };
        out.plot("gender_density", &plot, record)?;
    }
    record.details = json!({ "groups": cmp.groups.len(), "warnings": cmp.warnings });
    Ok(())
}

fn bloc(i: &Inputs, bin: Option<Binning>, out: &Emitter<'_>, record: &mut RunRecord) -> anyhow::Result<()> {
    let meta = i.speakers("bloc")?;
    let agg = speaker_aggregate(&i.preds, &i.corpus, None, &i.filter)?;
    let cmp = compare_groups(&agg.shares, bloc_key(meta))?;
    comparison_outputs("bloc", &cmp, out, record)?;
    let plot = PlotData {
        title: "Mean speaker PDD share by bloc".into(),
        x_label: "bloc".into(),
        y_label: "mean share".into(),
        kind: PlotKind::Bar,
        series: vec![Series {
            name: "mean share".into(),
            x: cmp.groups.iter().map(|g| g.group.clone()).collect(),
            y: cmp.groups.iter().map(|g| Some(g.mean)).collect(),
        }],
        markers: Vec::new(),
    };
    out.plot("bloc", &plot, record)?;
    if let Some(binning) = bin {
        let binned = speaker_aggregate(&i.preds, &i.corpus, Some(binning), &i.filter)?;
        let key = bloc_key(meta);
        let mut by_bloc: BTreeMap<String, Vec<SpeakerShare>> = BTreeMap::new();
        for s in binned.shares {
            if let Some(b) = key(&s.speaker_id) {
                by_bloc.entry(b).or_default().push(s);
            }
        }
        let mut rows = Vec::new();
        let mut series = Vec::new();
        for (b, shares) in &by_bloc {
            let (s, r) = series_of(b, shares);
            series.push(s);
            rows.extend(r);
        }
        out.csv("bloc_temporal", &["bloc", "period", "mean_share", "n_speakers"], &rows, record)?;
        let plot = PlotData {
            title: "Mean speaker PDD share by bloc over time".into(),
            x_label: "period".into(),
            y_label: "mean share".into(),
            kind: PlotKind::Line,
            series,
            markers: markers(&i.events, binning),
        };
        out.plot("bloc_temporal", &plot, record)?;
    }
    record.details = json!({ "groups": cmp.groups.len(), "warnings": cmp.warnings });
    Ok(())
}

fn platform(i: &Inputs, out: &Emitter<'_>, record: &mut RunRecord) -> anyhow::Result<()> {
    let sources: Vec<Source> = match i.filter.source {
        Some(s) => vec![s],
        None => Source::ALL.to_vec(),
    };
    let mut profiles = Vec::new();
    for s in &sources {
        let filter = SentenceFilter { source: Some(*s), ..i.filter.clone() };
        let p = characteristics_profile(&i.preds, &i.corpus, &filter)?;
        if p.n_speakers > 0 {
            profiles.push((*s, p));
        }
    }
    if profiles.is_empty() {
        bail!(pdd_core::Error::Degenerate("no speaker-attributed sentences in the selection".into()));
    }
    let mut header = vec!["metric".to_string()];
    header.extend(profiles.iter().map(|(s, _)| s.to_string()));
    let mut rows = vec![
        std::iter::once("speakers".to_string()).chain(profiles.iter().map(|(_, p)| p.n_speakers.to_string())).collect(),
        std::iter::once("sentences".to_string()).chain(profiles.iter().map(|(_, p)| p.n_sentences.to_string())).collect(),
        std::iter::once("pdd_share".to_string()).chain(profiles.iter().map(|(_, p)| opt(p.pdd_share))).collect(),
        std::iter::once("intensity_mean".to_string()).chain(profiles.iter().map(|(_, p)| opt(p.mean_intensity))).collect(),
    ];
    for (k, attr) in Attribute::ALL.iter().enumerate() {
        rows.push(
            std::iter::once(format!("{}_pct", attr.as_str()))
                .chain(profiles.iter().map(|(_, p)| opt(p.attributes[k].percent)))
                .collect(),
        );
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("platform", &header_refs, &rows, record)?;
    let plot = PlotData {
        title: "Characteristics of PDD by platform".into(),
        x_label: "characteristic".into(),
        y_label: "% of PDD sentences (speaker mean)".into(),
        kind: PlotKind::Bar,
        series: profiles
            .iter()
            .map(|(s, p)| Series {
                name: s.to_string(),
                x: Attribute::ALL.iter().map(|a| a.as_str().to_string()).collect(),
                y: p.attributes.iter().map(|r| r.percent).collect(),
            })
            .collect(),
        markers: Vec::new(),
    };
    out.plot("platform", &plot, record)?;
    println!("{}", header.join("\t"));
    for row in &rows {
        println!("{}", row.join("\t"));
    }
    Ok(())
}

fn logodds(i: &Inputs, alpha0: f64, k: usize, out: &Emitter<'_>, record: &mut RunRecord) -> anyhow::Result<()> {
    if alpha0.is_nan() || alpha0 <= 0.0 {
        bail!(UsageError(format!("--alpha0 must be positive, got {alpha0}")));
    }
    let meta = i.speakers("logodds")?;
    let counts = span_term_counts(&i.preds, &i.corpus, &i.filter, bloc_key(meta))?;
    let ranked = weighted_log_odds(&counts, alpha0, k)?;
    let mut rows = Vec::new();
    for (group, entries) in &ranked {
        println!("{group}:");
        for (rank, e) in entries.iter().enumerate() {
            println!("  {:>2}. {} (z = {:.2})", rank + 1, e.term, e.z);
            rows.push(vec![
                group.clone(),
                (rank + 1).to_string(),
                e.term.clone(),
                format!("{:.6}", e.z),
                format!("{:.6}", e.delta),
                format!("{}", e.y_i),
                format!("{}", e.y_j),
            ]);
        }
    }
    out.csv("logodds", &["group", "rank", "term", "z", "delta", "count_group", "count_rest"], &rows, record)?;
    record.details = json!({ "alpha0": alpha0, "top_k": k, "groups": ranked.len() });
    Ok(())
}

fn before_after_target(i: &Inputs, name: Option<&str>, out: &Emitter<'_>, record: &mut RunRecord) -> anyhow::Result<()> {
    let meta = i.speakers("before-after")?;
    let event = match name {
        Some(n) => i.events.iter().find(|e| e.name == n),
        None => i.events.iter().find(|e| e.kind == EventKind::Government),
    }
    .ok_or_else(|| UsageError("before-after needs --events with a matching (or government) event".into()))?;
    let agg = speaker_aggregate(&i.preds, &i.corpus, Some(Binning::Event(event.date)), &i.filter)?;
    let table = before_after(&agg.shares, event.date, coalition_cohort(meta, event.date))?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| vec![r.cohort.clone(), opt(r.before), opt(r.after), r.n_before.to_string(), r.n_after.to_string()])
        .collect();
    out.csv("before_after", &["cohort", "before", "after", "n_before", "n_after"], &rows, record)?;
    let cohorts: Vec<String> = table.rows.iter().map(|r| r.cohort.clone()).collect();
    let plot = PlotData {
        title: format!("PDD before and after {} ({})", event.name, event.date),
        x_label: "cohort".into(),
        y_label: "mean share".into(),
        kind: PlotKind::Bar,
        series: vec![
            Series { name: "before".into(), x: cohorts.clone(), y: table.rows.iter().map(|r| r.before).collect() },
            Series { name: "after".into(), x: cohorts, y: table.rows.iter().map(|r| r.after).collect() },
        ],
        markers: Vec::new(),
    };
    out.plot("before_after", &plot, record)?;
    for r in &table.rows {
        println!("{:<11} before {}  after {}", r.cohort, opt(r.before), opt(r.after));
    }
    record.details = json!({ "event": event, "warnings": table.warnings });
    Ok(())
}

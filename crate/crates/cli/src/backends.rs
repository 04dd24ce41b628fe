//! Backend specifications accepted on the command line.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context};
use pdd_core::corpus::{render_span_markup, Characteristics, Corpus, PddAnnotation, MARKER};
use pdd_core::jsonl::read_jsonl;
use pdd_core::pipeline::{
    encode_stage1_target, encode_stage2_target, Backend, BackendDescriptor, ConstantBackend, EchoBackend,
    FixtureBackend, FnBackend, LabelMap, TaskKind, WireBackend, WireConfig,
};

use crate::config;
use crate::UsageError;

/// Everything a spec may need besides its own text.
pub struct BackendContext<'a> {
    pub map: &'a LabelMap,
    pub corpus: Option<&'a Corpus>,
    pub wire: &'a config::WireConfig,
}

/// Parses one of `mock:all-false`, `mock:all-true`, `const:TEXT`, `echo`,
/// `fixture:PATH`, `gold:PATH`, `baseline:PATH`, `wire:URL`.
pub fn build_backend(spec: &str, kind: TaskKind, ctx: &BackendContext<'_>) -> anyhow::Result<Box<dyn Backend>> {
    let (scheme, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let desc = BackendDescriptor::in_process(spec, kind, &ctx.map.id);
    let backend: Box<dyn Backend> = match scheme {
        "mock" => match rest {
            "all-false" => constant(desc, kind, false, ctx.map)?,
            "all-true" => constant(desc, kind, true, ctx.map)?,
            other => bail!(UsageError(format!("unknown mock `{other}` (all-false or all-true)"))),
        },
        "const" => Box::new(ConstantBackend::new(desc, rest)),
        "echo" => Box::new(EchoBackend::new(desc)),
        "fixture" => Box::new(
            FixtureBackend::load(desc, rest, None).with_context(|| format!("loading fixture backend {rest}"))?,
        ),
        "gold" => {
            let corpus = ctx
                .corpus
                .ok_or_else(|| UsageError("gold: backends need a corpus".into()))?;
            Box::new(FixtureBackend::new(desc, gold_outputs(Path::new(rest), corpus, kind, ctx.map)?, None))
        }
        "baseline" => {
            let backend = pdd_core::baseline::BaselineBackend::load(spec, rest, ctx.map)
                .with_context(|| format!("loading baseline model {rest}"))?;
            if backend.descriptor().kind != kind {
                bail!(UsageError(format!(
                    "model {rest} is a {} model, expected {}",
                    backend.descriptor().kind.as_str(),
                    kind.as_str()
                )));
            }
            Box::new(backend)
        }
        "wire" => {
            let mut cfg = WireConfig::new(rest);
            if let Some(t) = ctx.wire.timeout_secs {
                cfg.timeout = Duration::from_secs_f64(t);
            }
            if let Some(r) = ctx.wire.retries {
                cfg.retries = r;
            }
            if let Some(b) = ctx.wire.batch_size {
                cfg.batch_size = b;
            }
            Box::new(WireBackend::new(spec, kind, &ctx.map.id, cfg))
        }
        _ => bail!(UsageError(format!("unknown backend `{spec}`"))),
    };
    Ok(backend)
}

fn constant(desc: BackendDescriptor, kind: TaskKind, value: bool, map: &LabelMap) -> anyhow::Result<Box<dyn Backend>> {
    Ok(match kind {
        TaskKind::Binary => Box::new(ConstantBackend::new(desc, encode_stage1_target(value, map))),
        TaskKind::Characteristics => {
            let c = Characteristics {
                intensity: if value { 2 } else { 0 },
                incivility: value,
                outgroup: value,
                common_good: value,
                group: value,
                person: value,
                institute: value,
            };
            Box::new(ConstantBackend::new(desc, encode_stage2_target(&c, map)?))
        }
        TaskKind::Span if value => Box::new(FnBackend::new(desc, |s: &str| Ok(format!("{MARKER}{s}{MARKER}")))),
        TaskKind::Span => Box::new(EchoBackend::new(desc)),
    })
}

/// Maps sentence text to the output a perfect model would produce.
pub fn gold_outputs(
    path: &Path,
    corpus: &Corpus,
    kind: TaskKind,
    map: &LabelMap,
) -> anyhow::Result<HashMap<String, String>> {
    let gold: Vec<PddAnnotation> = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::with_capacity(gold.len());
    for ann in &gold {
        let Some(record) = corpus.get(&ann.sentence_id) else { continue };
        let text = match kind {
            TaskKind::Binary => encode_stage1_target(ann.delegit, map),
            TaskKind::Characteristics => {
                let c = if ann.has_characteristics() { ann.characteristics()? } else { Characteristics::default() };
                encode_stage2_target(&c, map)?
            }
            TaskKind::Span => render_span_markup(&record.text, &ann.target_spans)?,
        };
        out.insert(record.text.clone(), text);
    }
    Ok(out)
}

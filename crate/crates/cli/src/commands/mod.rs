pub mod analyze;
pub mod annotate;
pub mod data;
pub mod model;

use std::path::Path;

use anyhow::Context;
use pdd_core::corpus::{Corpus, CorpusSplit, PddAnnotation, SplitName, SplitRecord};
use pdd_core::jsonl::read_jsonl;
use pdd_core::pipeline::LabelMap;
use serde::de::DeserializeOwned;

use crate::args::{Part, SplitSelection};
use crate::config::Config;
use crate::manifest::RunRecord;

pub(crate) fn read_records<T: DeserializeOwned>(path: &Path, record: &mut RunRecord) -> anyhow::Result<Vec<T>> {
    record.input(path);
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

pub(crate) fn load_corpus(path: &Path, record: &mut RunRecord) -> anyhow::Result<Corpus> {
    record.input(path);
    Corpus::load(path).with_context(|| format!("loading corpus {}", path.display()))
}

pub(crate) fn load_annotations(path: &Path, record: &mut RunRecord) -> anyhow::Result<Vec<PddAnnotation>> {
    read_records(path, record)
}

pub(crate) fn load_label_map(path: Option<&Path>, config: &Config, record: &mut RunRecord) -> anyhow::Result<LabelMap> {
    let path = path.map(Path::to_path_buf).or_else(|| config.label_map.as_ref().map(Into::into));
    match path {
        Some(p) => {
            record.input(&p);
            LabelMap::load(&p).with_context(|| format!("loading label map {}", p.display()))
        }
        None => Ok(LabelMap::default()),
    }
}

/// Sentence ids chosen by `--split/--part`, in corpus order when no split
/// is given.
pub(crate) fn selected_ids(sel: &SplitSelection, corpus: &Corpus, record: &mut RunRecord) -> anyhow::Result<Vec<String>> {
    let Some(path) = &sel.split else {
        if sel.part != Part::All {
            anyhow::bail!(crate::UsageError("--part needs --split".into()));
        }
        return Ok(corpus.ids().map(String::from).collect());
    };
    let split = CorpusSplit::from_records(read_records::<SplitRecord>(path, record)?)?;
    let ids = match sel.part {
        Part::Train => split.ids(SplitName::Train).to_vec(),
        Part::Validation => split.ids(SplitName::Validation).to_vec(),
        Part::Test => split.ids(SplitName::Test).to_vec(),
        Part::All => SplitName::ALL.iter().flat_map(|n| split.ids(*n).iter().cloned()).collect(),
    };
    Ok(ids)
}

pub(crate) fn write_output(path: &Path, contents: impl AsRef<[u8]>, record: &mut RunRecord) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    record.output(path);
    Ok(())
}

use std::sync::Arc;

use anyhow::Context;
use pdd_core::annotation::{agreement_report, AnnotationService, AssignmentPlan};

use super::{load_annotations, load_corpus, write_output};
use crate::args::{AgreementArgs, ServeAnnotationArgs};
use crate::config::Config;
use crate::manifest::RunRecord;
use crate::server::{annotation_router, serve_until_ctrl_c};

pub fn serve(a: &ServeAnnotationArgs, config: &Config, record: &mut RunRecord) -> anyhow::Result<()> {
    let corpus = load_corpus(&a.corpus, record)?;
    let seed = a.seed.or(config.seed).unwrap_or(0);
    record.seed = Some(seed);
    let plan = AssignmentPlan::with_shared_sample(&corpus, &a.annotators, a.shared, seed);
    let mut service = AnnotationService::new(&corpus, plan);
    if let Some(log) = &a.event_log {
        service = service
            .with_event_log(log)
            .with_context(|| format!("opening event log {}", log.display()))?;
    }
    let router = annotation_router(Arc::new(service));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr).await.with_context(|| format!("binding {}", a.addr))?;
        eprintln!("annotation service listening on http://{}", listener.local_addr()?);
        serve_until_ctrl_c(listener, router).await?;
        anyhow::Ok(())
    })?;
    if let Some(log) = &a.event_log {
        record.output(log);
    }
    Ok(())
}

pub fn agreement(a: &AgreementArgs, record: &mut RunRecord) -> anyhow::Result<()> {
    let annotations = load_annotations(&a.annotations, record)?;
    let report = agreement_report(&annotations)?;
    println!("annotators\t{}", report.annotators.join(","));
    println!("shared items\t{}", report.n_shared);
    for p in &report.pairs {
        let r = p.correlation.map_or("-".to_string(), |r| format!("{r:.2}"));
        println!("{} vs {}\tkappa {:.2}\tr {}\tn {}", p.annotator_a, p.annotator_b, p.kappa, r, p.n_shared);
    }
    let mean_r = report.mean_correlation.map_or("-".to_string(), |r| format!("{r:.2}"));
    println!("mean\tkappa {:.2}\tr {}", report.mean_kappa, mean_r);
    println!("disagreements\t{}", report.disagreements.len());
    if let Some(path) = &a.json {
        write_output(path, serde_json::to_string_pretty(&report)? + "\n", record)?;
    }
    Ok(())
}

#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::process::{Command, Output};

use axum::Router;
use chrono::NaiveDate;
use pdd_core::corpus::{Corpus, SentenceRecord, Source};

/// Serves `router` on an ephemeral port from a background runtime and returns the base URL.
pub fn spawn(router: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

pub fn sentence(id: &str, text: &str) -> SentenceRecord {
    SentenceRecord {
        id: id.into(),
        text: text.into(),
        source: Source::Knesset,
        date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        speaker_id: Some("sp1".into()),
        doc_id: None,
    }
}

pub fn small_corpus(n: usize) -> Corpus {
    Corpus::from_records((0..n).map(|k| sentence(&format!("s{k}"), &format!("sentence number {k} about the media")))).unwrap()
}

pub fn pdd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdd")).current_dir(dir).args(args).output().expect("running pdd")
}

pub fn pdd_ok(dir: &Path, args: &[&str]) -> String {
    let out = pdd(dir, args);
    assert!(
        out.status.success(),
        "pdd {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

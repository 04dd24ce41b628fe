//! Sentence segmentation.
//!
//! The built-in [`RuleSegmenter`] breaks after a run of terminal punctuation
//! (plus any closing quotes or brackets) that is followed by whitespace, and
//! always at blank lines. A single period does not end a sentence after a
//! listed abbreviation, a dotted acronym (`U.S.`), a lone Latin capital
//! (`J. Smith`) or a one- or two-digit number (`section 4.`).
//!
//! Any other tool can be plugged in through [`Segmenter`];
//! [`CommandSegmenter`] runs an external program that prints one sentence
//! per line.

use std::collections::HashSet;
use std::io::Write;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};

pub trait Segmenter: Send + Sync {
    fn segment(&self, raw: &str) -> Result<Vec<String>>;
}

/// Period-terminated abbreviations that do not end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    // Hebrew
    "עמ", "מס", "פרופ", "רח", "טל", "וכו", "וכד", "דר", "גב", "סע", "פס", "ע\"י", "מר",
    // Latin
    "mr", "mrs", "ms", "dr", "prof", "st", "no", "vs", "etc", "jr", "sr", "inc", "ltd", "cf", "al",
];

const TERMINALS: &[char] = &['.', '!', '?', '…', '׃'];
const CLOSERS: &[char] = &['"', '\'', '”', '’', ')', ']', '»', '״', '׳'];
const OPENERS: &[char] = &['"', '\'', '“', '‘', '(', '[', '«', '״'];

#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: HashSet<String>,
    /// Treat every line break (not only blank lines) as a boundary.
    pub newline_is_boundary: bool,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        RuleSegmenter {
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
            newline_is_boundary: false,
        }
    }
}

impl RuleSegmenter {
    pub fn with_abbreviations<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.abbreviations
            .extend(extra.into_iter().map(|s| s.into().to_lowercase()));
        self
    }

    pub fn split(&self, raw: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = raw.char_indices().collect();
        let mut out = Vec::new();
        let mut seg_start = 0usize; // byte offset
        let mut i = 0usize;

        let push = |from: usize, to: usize, out: &mut Vec<String>| {
            let s = raw[from..to].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
        };

        while i < chars.len() {
            let (byte, ch) = chars[i];
            if ch == '\n' {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                    j += 1;
                }
                let blank = j < chars.len() && chars[j].1 == '\n';
                if blank || self.newline_is_boundary {
                    push(seg_start, byte, &mut out);
                    seg_start = byte;
                }
                i += 1;
                continue;
            }
            if !TERMINALS.contains(&ch) {
                i += 1;
                continue;
            }
            let run_start = i;
            let mut j = i;
            while j < chars.len() && TERMINALS.contains(&chars[j].1) {
                j += 1;
            }
            let single_period = j - run_start == 1 && ch == '.';
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let at_break = j == chars.len() || chars[j].1.is_whitespace();
            if at_break && !(single_period && self.suppresses(raw, &chars, run_start)) {
                let end = chars.get(j).map_or(raw.len(), |c| c.0);
                push(seg_start, end, &mut out);
                seg_start = end;
            }
            i = j.max(i + 1);
        }
        push(seg_start, raw.len(), &mut out);
        out
    }

    /// Whether the word ending in the period at `dot` is a non-final abbreviation.
    fn suppresses(&self, raw: &str, chars: &[(usize, char)], dot: usize) -> bool {
        let mut k = dot;
        while k > 0 && !chars[k - 1].1.is_whitespace() {
            k -= 1;
        }
        let word = raw[chars[k].0..chars[dot].0].trim_start_matches(OPENERS);
        if word.is_empty() {
            return false;
        }
        if word.contains('.') {
            return true;
        }
        let mut wc = word.chars();
        if let (Some(c), None) = (wc.next(), wc.next()) {
            if c.is_ascii_uppercase() {
                return true;
            }
        }
        if word.len() <= 2 && word.chars().all(|c| c.is_ascii_digit()) {
            return true;
        }
        self.abbreviations.contains(&word.to_lowercase())
    }
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, raw: &str) -> Result<Vec<String>> {
        Ok(self.split(raw))
    }
}

/// Segments with the default rules.
pub fn segment_text(raw: &str) -> Vec<String> {
    RuleSegmenter::default().split(raw)
}

/// Delegates to an external program: document on stdin, one sentence per
/// output line.
#[derive(Debug, Clone)]
pub struct CommandSegmenter {
    pub program: String,
    pub args: Vec<String>,
}

impl Segmenter for CommandSegmenter {
    fn segment(&self, raw: &str) -> Result<Vec<String>> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        child
            .stdin
            .take()
            .expect("stdin piped")
            .write_all(raw.as_bytes())?;
        let output = child.wait_with_output()?;
        if !output.status.success() {
            return Err(Error::Backend {
                backend: self.program.clone(),
                reason: format!("segmenter exited with {}", output.status),
            });
        }
        Ok(String::from_utf8_lossy(&output.stdout)
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect())
    }
}

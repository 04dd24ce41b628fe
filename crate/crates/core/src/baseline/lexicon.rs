use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{render_span_markup, Span};

/// Target-span baseline: remembers gold target strings and marks their
/// whole-word occurrences, longest first, without overlaps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpanLexicon {
    pub terms: Vec<String>,
}

impl SpanLexicon {
    pub fn train<'a>(examples: impl IntoIterator<Item = (&'a str, &'a [Span])>, max_terms: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (text, spans) in examples {
            for s in spans {
                if s.end > text.chars().count() {
                    continue;
                }
                let term = s.slice(text).trim();
                if term.chars().count() >= 2 {
                    *counts.entry(term.to_string()).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_terms);
        Self::from_terms(ranked.into_iter().map(|(t, _)| t))
    }

    pub fn from_terms(terms: impl IntoIterator<Item = String>) -> Self {
        let mut terms: Vec<String> = terms.into_iter().filter(|t| !t.trim().is_empty()).collect();
        terms.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
        terms.dedup();
        SpanLexicon { terms }
    }

    pub fn matcher(&self) -> LexiconMatcher {
        let mut by_first: HashMap<char, Vec<Vec<char>>> = HashMap::new();
        for t in &self.terms {
            let chars: Vec<char> = t.chars().collect();
            by_first.entry(chars[0]).or_default().push(chars);
        }
        LexiconMatcher { by_first }
    }
}

pub struct LexiconMatcher {
    by_first: HashMap<char, Vec<Vec<char>>>,
}

impl LexiconMatcher {
    pub fn find(&self, text: &str) -> Vec<Span> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < n {
            let at_boundary = i == 0 || !chars[i - 1].is_alphanumeric();
            let hit = at_boundary
                .then(|| self.by_first.get(&chars[i]))
                .flatten()
                .and_then(|cands| {
                    cands.iter().find(|t| {
                        let end = i + t.len();
                        end <= n && chars[i..end] == t[..] && (end == n || !chars[end].is_alphanumeric())
                    })
                });
            match hit {
                Some(t) => {
                    spans.push(Span::new(i, i + t.len()));
                    i += t.len();
                }
                None => i += 1,
            }
        }
        spans
    }

    /// `text` with matches wrapped in markers; unmarked if rendering fails.
    pub fn mark(&self, text: &str) -> String {
        render_span_markup(text, &self.find(text)).unwrap_or_else(|_| text.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_whole_word_matches() {
        let text = "the prime minister and the minister";
        let spans = [Span::new(4, 18), Span::new(27, 35)];
        let lex = SpanLexicon::train([(text, &spans[..])], 10);
        assert_eq!(lex.terms, vec!["prime minister", "minister"]);
        let m = lex.matcher();
        assert_eq!(m.find("a minister, the prime minister!"), vec![Span::new(2, 10), Span::new(16, 30)]);
        assert!(m.find("ministers").is_empty());
        assert_eq!(m.mark("the minister lies"), "the %%%minister%%% lies");
    }

    #[test]
    fn hebrew_terms() {
        let lex = SpanLexicon::from_terms(["הממשלה".to_string()]);
        let m = lex.matcher();
        assert_eq!(m.find("הממשלה הזאת משקרת"), vec![Span::new(0, 6)]);
    }
}

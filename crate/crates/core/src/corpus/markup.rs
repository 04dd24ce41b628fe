//! `%%%` target-span markup. Markers pair up left to right: the first opens a
//! span, the next closes it, so nesting cannot be expressed.

use super::{validate_spans, Span};
use crate::error::{Error, Result};

pub const MARKER: &str = "%%%";

/// Strips markers from `marked` and returns the clean text together with the
/// character ranges they wrapped.
pub fn parse_span_markup(marked: &str) -> Result<(String, Vec<Span>)> {
    let mut clean = String::with_capacity(marked.len());
    let mut spans = Vec::new();
    let mut clean_chars = 0usize;
    let mut open: Option<usize> = None;
    let mut rest = marked;
    let mut consumed_chars = 0usize;

    while let Some(pos) = rest.find(MARKER) {
        let chunk = &rest[..pos];
        let n = chunk.chars().count();
        clean.push_str(chunk);
        clean_chars += n;
        consumed_chars += n;
        match open.take() {
            None => open = Some(clean_chars),
            Some(start) => {
                if start == clean_chars {
                    return Err(Error::MarkupParse {
                        position: consumed_chars,
                        reason: "empty target span".into(),
                    });
                }
                spans.push(Span::new(start, clean_chars));
            }
        }
        consumed_chars += MARKER.len();
        rest = &rest[pos + MARKER.len()..];
    }
    if open.is_some() {
        return Err(Error::MarkupParse {
            position: consumed_chars,
            reason: "odd number of `%%%` markers".into(),
        });
    }
    clean.push_str(rest);
    Ok((clean, spans))
}

/// Wraps each span of `clean` in markers. Fails on invalid spans, and on text
/// whose `%` characters would make the rendering ambiguous.
pub fn render_span_markup(clean: &str, spans: &[Span]) -> Result<String> {
    let len = clean.chars().count();
    validate_spans(spans, Some(len))?;
    if spans.is_empty() && !clean.contains(MARKER) {
        return Ok(clean.to_string());
    }

    let mut out = String::with_capacity(clean.len() + spans.len() * 2 * MARKER.len());
    let mut bounds = spans.iter().flat_map(|s| [s.start, s.end]).peekable();
    for (i, ch) in clean.chars().enumerate() {
        while bounds.peek() == Some(&i) {
            out.push_str(MARKER);
            bounds.next();
        }
        out.push(ch);
    }
    for _ in bounds {
        out.push_str(MARKER);
    }

    match parse_span_markup(&out) {
        Ok((c, s)) if c == clean && s == spans => Ok(out),
        _ => Err(Error::MarkupParse {
            position: 0,
            reason: "text contains `%` sequences that collide with span markers".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_single_target() {
        let (clean, spans) = parse_span_markup("we must stop %%%the Left%%% now").unwrap();
        assert_eq!(clean, "we must stop the Left now");
        assert_eq!(spans, vec![Span::new(13, 21)]);
        assert_eq!(spans[0].slice(&clean), "the Left");
    }

    #[test]
    fn parse_without_markers_is_identity() {
        assert_eq!(
            parse_span_markup("no markers here").unwrap(),
            ("no markers here".to_string(), vec![])
        );
    }

    #[test]
    fn parse_two_targets() {
        let (clean, spans) = parse_span_markup("a %%%b%%% c %%%d%%%").unwrap();
        assert_eq!(clean, "a b c d");
        assert_eq!(spans, vec![Span::new(2, 3), Span::new(6, 7)]);
    }

    #[test]
    fn parse_hebrew_offsets_in_chars() {
        let (clean, spans) = parse_span_markup("אני קורא לחקור את %%%ניצן הורוביץ%%%").unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].slice(&clean), "ניצן הורוביץ");
        assert_eq!(spans[0], Span::new(18, 30));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_span_markup("a %%%b c"), Err(Error::MarkupParse { .. })));
        assert!(matches!(parse_span_markup("a %%%%%% c"), Err(Error::MarkupParse { .. })));
    }

    #[test]
    fn render_examples() {
        assert_eq!(render_span_markup("X did Y", &[Span::new(0, 1)]).unwrap(), "%%%X%%% did Y");
        assert_eq!(render_span_markup("plain", &[]).unwrap(), "plain");
        assert_eq!(
            render_span_markup("abcd", &[Span::new(0, 2), Span::new(2, 4)]).unwrap(),
            "%%%ab%%%%%%cd%%%"
        );
    }

    #[test]
    fn render_rejects_overlap_and_ambiguity() {
        assert!(render_span_markup("abcdef", &[Span::new(0, 3), Span::new(2, 4)]).is_err());
        assert!(render_span_markup("%ab", &[Span::new(1, 3)]).is_err());
        assert!(render_span_markup("50%%% off", &[]).is_err());
        // a lone percent sign away from span boundaries is fine
        assert_eq!(render_span_markup("50% off", &[Span::new(4, 7)]).unwrap(), "50% %%%off%%%");
    }

    fn text_and_spans() -> impl Strategy<Value = (String, Vec<Span>)> {
        proptest::collection::vec(
            prop_oneof![Just('א'), Just('ב'), Just('ש'), Just('a'), Just('Z'), Just(' '), Just('.'), Just('"')],
            0..40,
        )
        .prop_flat_map(|chars| {
            let n = chars.len();
            let text: String = chars.into_iter().collect();
            (Just(text), proptest::collection::btree_set(0..=n, 0..8))
        })
        .prop_map(|(text, cuts)| {
            let cuts: Vec<usize> = cuts.into_iter().collect();
            let spans = cuts.chunks_exact(2).map(|c| Span::new(c[0], c[1])).collect();
            (text, spans)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn render_parse_round_trip((text, spans) in text_and_spans()) {
            let marked = render_span_markup(&text, &spans).unwrap();
            let (clean, back) = parse_span_markup(&marked).unwrap();
            prop_assert_eq!(clean, text);
            prop_assert_eq!(back, spans);
        }

        #[test]
        fn parse_render_round_trip((text, spans) in text_and_spans()) {
            let marked = render_span_markup(&text, &spans).unwrap();
            let (clean, parsed) = parse_span_markup(&marked).unwrap();
            prop_assert_eq!(render_span_markup(&clean, &parsed).unwrap(), marked);
        }
    }
}

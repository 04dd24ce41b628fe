//! Text formats exchanged with classifier backends.

use serde_json::Value;

use super::label_map::LabelMap;
use crate::corpus::{parse_span_markup, Characteristics, Span};
use crate::error::{Error, Result};

pub fn encode_stage1_target(label: bool, map: &LabelMap) -> String {
    map.token(label).to_string()
}

/// Reads a stage-1 output as a probability of the positive class: either a
/// number in [0, 1] or one of the label-map tokens.
pub fn decode_stage1_output(raw: &str, map: &LabelMap) -> Result<f64> {
    let s = raw.trim();
    if s == map.true_token.trim() {
        return Ok(1.0);
    }
    if s == map.false_token.trim() {
        return Ok(0.0);
    }
    match s.parse::<f64>() {
        Ok(p) if (0.0..=1.0).contains(&p) => Ok(p),
        Ok(p) => Err(Error::Domain(format!("stage-1 score {p} outside [0, 1]"))),
        Err(_) => Err(Error::Domain(format!("unrecognized stage-1 output `{s}`"))),
    }
}

/// Single-line JSON object with the label-map keys in label-map order.
pub fn encode_stage2_target(c: &Characteristics, map: &LabelMap) -> Result<String> {
    if c.intensity > 2 {
        return Err(Error::Domain(format!("intensity {} outside 0..=2", c.intensity)));
    }
    let mut out = String::from("{");
    for (i, entry) in map.keys.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(&entry.key)?);
        out.push(':');
        out.push_str(&entry.field.value(c).to_string());
    }
    out.push('}');
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Decoded {
    pub characteristics: Characteristics,
    /// False when any key was missing, unreadable or out of range.
    pub parse_ok: bool,
    pub issues: Vec<String>,
}

/// Byte ranges of balanced `{...}` candidates, skipping braces inside strings.
fn balanced_objects(raw: &str) -> Vec<(usize, usize)> {
    let bytes = raw.as_bytes();
    let mut found = Vec::new();
    let mut start = 0;
    while let Some(off) = raw[start..].find('{') {
        let open = start + off;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        let mut end = None;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i + 1);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(e) => {
                found.push((open, e));
                start = open + 1;
            }
            None => break,
        }
    }
    found
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::Bool(b) => Some(*b as u8 as f64),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Lenient stage-2 parser: takes the first balanced JSON object in `raw`,
/// ignoring any text around it. Missing or unreadable keys become 0 and
/// out-of-range values are clamped; both clear `parse_ok`. Fails only when
/// no JSON object can be found.
pub fn decode_stage2_output(raw: &str, map: &LabelMap) -> Result<Stage2Decoded> {
    let obj = balanced_objects(raw)
        .into_iter()
        .find_map(|(s, e)| match serde_json::from_str::<Value>(&raw[s..e]) {
            Ok(Value::Object(o)) => Some(o),
            _ => None,
        })
        .ok_or_else(|| Error::Stage2Parse("no JSON object in output".into()))?;

    let mut c = Characteristics::default();
    let mut issues = Vec::new();
    for entry in &map.keys {
        let Some(v) = obj.get(&entry.key) else {
            issues.push(format!("missing key `{}`", entry.key));
            continue;
        };
        let Some(x) = numeric(v) else {
            issues.push(format!("non-numeric value for `{}`", entry.key));
            continue;
        };
        match entry.field.attribute() {
            None => {
                let r = x.round();
                if r != x || !(0.0..=2.0).contains(&r) {
                    issues.push(format!("intensity {x} clamped"));
                }
                c.intensity = r.clamp(0.0, 2.0) as u8;
            }
            Some(a) => {
                if x != 0.0 && x != 1.0 {
                    issues.push(format!("value {x} for `{}` clamped", entry.key));
                }
                c.set(a, x >= 0.5);
            }
        }
    }
    Ok(Stage2Decoded {
        characteristics: c,
        parse_ok: issues.is_empty(),
        issues,
    })
}

/// Span-task output: the input sentence with `%%%`-wrapped targets. Outputs
/// whose text differs from `sentence` once markers are removed are rejected.
pub fn decode_span_output(raw: &str, sentence: &str) -> Result<Vec<Span>> {
    let raw = raw.strip_suffix('\n').unwrap_or(raw);
    let (clean, spans) = parse_span_markup(raw)?;
    if clean != sentence {
        return Err(Error::Stage2Parse("span output does not reconstruct the input".into()));
    }
    Ok(spans)
}

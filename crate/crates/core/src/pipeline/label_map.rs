use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Attribute, Characteristics};
use crate::error::{Error, Result};

const DEFAULT_JSON: &str = include_str!("../../data/label_map_he_v1.json");

/// A characteristic field as named in the label map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Intensity,
    Incivility,
    Outgroup,
    CommonGood,
    Group,
    Person,
    Institute,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Intensity,
        Field::Incivility,
        Field::Outgroup,
        Field::CommonGood,
        Field::Group,
        Field::Person,
        Field::Institute,
    ];

    pub fn attribute(self) -> Option<Attribute> {
        match self {
            Field::Intensity => None,
            Field::Incivility => Some(Attribute::Incivility),
            Field::Outgroup => Some(Attribute::Outgroup),
            Field::CommonGood => Some(Attribute::CommonGood),
            Field::Group => Some(Attribute::Group),
            Field::Person => Some(Attribute::Person),
            Field::Institute => Some(Attribute::Institute),
        }
    }

    pub fn value(self, c: &Characteristics) -> u8 {
        match self.attribute() {
            None => c.intensity,
            Some(a) => c.get(a) as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub field: Field,
    pub key: String,
}

/// Output vocabulary shared by training export and decoding: the stage-1
/// label strings and the ordered stage-2 JSON keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub id: String,
    pub true_token: String,
    pub false_token: String,
    pub keys: Vec<KeyEntry>,
}

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap::from_json(DEFAULT_JSON).expect("bundled label map is valid")
    }
}

impl LabelMap {
    pub fn from_json(s: &str) -> Result<Self> {
        let map: LabelMap = serde_json::from_str(s)?;
        map.check()?;
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let t = self.true_token.trim();
        let f = self.false_token.trim();
        if t.is_empty() || f.is_empty() || t == f {
            return Err(Error::invalid("label_map", "true and false tokens must be distinct and non-empty"));
        }
        for field in Field::ALL {
            let n = self.keys.iter().filter(|k| k.field == field).count();
            if n != 1 {
                return Err(Error::invalid("label_map", format!("field {field:?} mapped {n} times")));
            }
        }
        if self.keys.len() != Field::ALL.len() {
            return Err(Error::invalid("label_map", "exactly seven keys expected"));
        }
        let mut names: Vec<&str> = self.keys.iter().map(|k| k.key.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.keys.len() {
            return Err(Error::invalid("label_map", "duplicate output key"));
        }
        Ok(())
    }

    pub fn token(&self, label: bool) -> &str {
        if label {
            &self.true_token
        } else {
            &self.false_token
        }
    }

    pub fn key(&self, field: Field) -> &str {
        &self
            .keys
            .iter()
            .find(|k| k.field == field)
            .expect("checked on construction")
            .key
    }
}

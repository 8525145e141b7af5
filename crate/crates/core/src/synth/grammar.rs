use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::world::WorldSpec;
use crate::error::{Error, Result};

/// A slot/value pair, e.g. `("nose", "pointy")`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotValue {
    pub slot: String,
    pub value: String,
}

impl SlotValue {
    pub fn new(slot: impl Into<String>, value: impl Into<String>) -> Self {
        SlotValue {
            slot: slot.into(),
            value: value.into(),
        }
    }
}

/// Surface phrases for every slot value. Surfaces are globally unique, so a
/// phrase parses to at most one slot value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "GrammarFile", into = "GrammarFile")]
pub struct Grammar {
    templates: BTreeMap<SlotValue, Vec<String>>,
    parse_index: HashMap<String, SlotValue>,
}

#[derive(Serialize, Deserialize)]
struct GrammarFile {
    templates: Vec<(SlotValue, Vec<String>)>,
}

impl From<GrammarFile> for Grammar {
    fn from(f: GrammarFile) -> Self {
        Grammar::from_templates(f.templates.into_iter().collect()).expect("stored grammar is valid")
    }
}

impl From<Grammar> for GrammarFile {
    fn from(g: Grammar) -> Self {
        GrammarFile {
            templates: g.templates.into_iter().collect(),
        }
    }
}

const DEFAULT_TEMPLATES: &[(&str, &str, [&str; 3])] = &[
    ("body_color", "red", ["red body", "red paint", "painted red"]),
    ("body_color", "blue", ["blue body", "blue paint", "painted blue"]),
    ("body_color", "green", ["green body", "green paint", "painted green"]),
    ("body_color", "white", ["white body", "white paint", "painted white"]),
    ("body_color", "yellow", ["yellow body", "yellow paint", "painted yellow"]),
    ("size", "small", ["small plane", "small size", "tiny aircraft"]),
    ("size", "medium", ["medium plane", "medium size", "mid sized aircraft"]),
    ("size", "large", ["large plane", "large size", "huge aircraft"]),
    ("nose", "pointy", ["pointy nose", "sharp nose", "pointed nose"]),
    ("nose", "round", ["round nose", "rounded nose", "blunt nose"]),
    ("engines", "one", ["one engine", "single engine", "single propeller"]),
    ("engines", "two", ["two engines", "twin engines", "double engines"]),
    ("engines", "four", ["four engines", "four jets", "many engines"]),
    ("tail", "high", ["high tail", "tail on top", "stabilizer on top of tail"]),
    ("tail", "low", ["low tail", "tail at bottom", "stabilizer at bottom of tail"]),
    ("background", "sky", ["in the sky", "flying", "in the air"]),
    ("background", "grass", ["on grass", "on the grass", "green grass"]),
    ("background", "concrete", ["on concrete", "on the runway", "on the ground"]),
];

impl Grammar {
    pub fn from_templates(templates: BTreeMap<SlotValue, Vec<String>>) -> Result<Self> {
        let mut parse_index = HashMap::new();
        for (sv, surfaces) in &templates {
            if surfaces.is_empty() {
                return Err(Error::InvalidWorld(format!(
                    "{}={} has no surface phrase",
                    sv.slot, sv.value
                )));
            }
            for s in surfaces {
                if crate::data::normalize_tokens(s).join(" ") != *s {
                    return Err(Error::InvalidWorld(format!("surface {s:?} is not normalized")));
                }
                if s.split(' ').any(|t| t == crate::data::PAIR_SEPARATOR) {
                    return Err(Error::InvalidWorld(format!("surface {s:?} uses the separator")));
                }
                if let Some(prev) = parse_index.insert(s.clone(), sv.clone()) {
                    return Err(Error::InvalidWorld(format!(
                        "surface {s:?} shared by {}={} and {}={}",
                        prev.slot, prev.value, sv.slot, sv.value
                    )));
                }
            }
        }
        Ok(Grammar {
            templates,
            parse_index,
        })
    }

    /// The built-in airplane grammar when the world uses the default slots,
    /// otherwise generated `"<value> <slot>"`-style surfaces.
    pub fn for_world(spec: &WorldSpec) -> Result<Self> {
        let mut templates = BTreeMap::new();
        for slot in &spec.slots {
            for value in &slot.values {
                let builtin = DEFAULT_TEMPLATES
                    .iter()
                    .find(|(s, v, _)| *s == slot.name && *v == value);
                let surfaces: Vec<String> = match builtin {
                    Some((_, _, t)) => t.iter().map(|s| s.to_string()).collect(),
                    None => {
                        let slot_words = slot.name.replace('_', " ");
                        vec![
                            format!("{value} {slot_words}"),
                            format!("{slot_words} is {value}"),
                        ]
                    }
                };
                templates.insert(SlotValue::new(&slot.name, value), surfaces);
            }
        }
        Self::from_templates(templates)
    }

    pub fn surfaces(&self, sv: &SlotValue) -> &[String] {
        self.templates.get(sv).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn templates(&self) -> impl Iterator<Item = (&SlotValue, &Vec<String>)> {
        self.templates.iter()
    }

    pub fn parse(&self, tokens: &[String]) -> Option<&SlotValue> {
        self.parse_index.get(&tokens.join(" "))
    }

    pub fn parse_text(&self, text: &str) -> Option<&SlotValue> {
        self.parse_index.get(text)
    }

    /// Every surface token, deduplicated and sorted.
    pub fn surface_tokens(&self) -> Vec<String> {
        let mut toks: Vec<String> = self
            .parse_index
            .keys()
            .flat_map(|s| s.split(' ').map(String::from))
            .collect();
        toks.sort();
        toks.dedup();
        toks
    }

    pub fn num_surfaces(&self) -> usize {
        self.parse_index.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grammar_is_valid_and_unique() {
        let g = Grammar::for_world(&WorldSpec::default()).unwrap();
        assert_eq!(g.num_surfaces(), 18 * 3);
        for (sv, surfaces) in g.templates() {
            assert!(surfaces.len() >= 2);
            for s in surfaces {
                assert_eq!(g.parse_text(s), Some(sv));
            }
        }
    }

    #[test]
    fn duplicate_surface_rejected() {
        let mut t = BTreeMap::new();
        t.insert(SlotValue::new("a", "x"), vec!["same".to_string()]);
        t.insert(SlotValue::new("b", "y"), vec!["same".to_string()]);
        assert!(Grammar::from_templates(t).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let g = Grammar::for_world(&WorldSpec::default()).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: Grammar = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}

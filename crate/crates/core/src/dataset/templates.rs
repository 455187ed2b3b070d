use serde::{Deserialize, Serialize};

use super::VerbObjectPair;
use crate::error::{Error, Result};

/// Shipped template inventory.
pub const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.txt");

/// Shipped nonce words for the unknown-noun setting.
pub const DEFAULT_NONCES: &str = include_str!("../../data/nonces.txt");

const VERB: &str = "{verb}";
const OBJECT: &str = "{object}";

/// How commands are phrased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandMode {
    #[serde(rename = "verb-only")]
    VerbOnly,
    #[serde(rename = "verb+noun")]
    VerbNoun,
    /// Noun templates with the object slot filled by a nonce word.
    #[serde(rename = "verb+unknown-noun")]
    VerbUnknownNoun,
}

impl CommandMode {
    pub fn uses_object_slot(self) -> bool {
        !matches!(self, CommandMode::VerbOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CommandMode::VerbOnly => "verb-only",
            CommandMode::VerbNoun => "verb+noun",
            CommandMode::VerbUnknownNoun => "verb+unknown-noun",
        }
    }
}

impl std::str::FromStr for CommandMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verb-only" => Ok(CommandMode::VerbOnly),
            "verb+noun" => Ok(CommandMode::VerbNoun),
            "verb+unknown-noun" => Ok(CommandMode::VerbUnknownNoun),
            _ => Err(Error::config(format!("unknown command mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for CommandMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    pattern: String,
}

impl CommandTemplate {
    pub fn new(pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        if pattern.matches(VERB).count() != 1 {
            return Err(Error::config(format!("template {pattern:?} must contain {VERB} exactly once")));
        }
        if pattern.matches(OBJECT).count() > 1 {
            return Err(Error::config(format!("template {pattern:?} contains {OBJECT} more than once")));
        }
        Ok(CommandTemplate { pattern })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn has_object_slot(&self) -> bool {
        self.pattern.contains(OBJECT)
    }

    pub fn applies_to(&self, mode: CommandMode) -> bool {
        self.has_object_slot() == mode.uses_object_slot()
    }

    pub fn render(&self, verb: &str, object: &str) -> String {
        self.pattern.replace(VERB, verb).replace(OBJECT, object)
    }
}

/// Parses a templates file: one pattern per line, blank lines and `#` comments skipped.
pub fn parse_templates(text: &str) -> Result<Vec<CommandTemplate>> {
    let templates = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(CommandTemplate::new)
        .collect::<Result<Vec<_>>>()?;
    if templates.is_empty() {
        return Err(Error::config("template file is empty"));
    }
    Ok(templates)
}

pub fn default_templates() -> Vec<CommandTemplate> {
    parse_templates(DEFAULT_TEMPLATES).expect("shipped templates are valid")
}

pub fn default_nonces() -> Vec<String> {
    DEFAULT_NONCES.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// Templates usable for `mode`, or an error if there are none.
pub fn templates_for(templates: &[CommandTemplate], mode: CommandMode) -> Result<Vec<&CommandTemplate>> {
    let chosen: Vec<_> = templates.iter().filter(|t| t.applies_to(mode)).collect();
    if chosen.is_empty() {
        return Err(Error::config(format!("no templates applicable to mode {mode}")));
    }
    Ok(chosen)
}

/// Splits each mode's templates into two disjoint halves (train, test) by alternating position.
pub fn split_templates(templates: &[CommandTemplate]) -> (Vec<CommandTemplate>, Vec<CommandTemplate>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for with_object in [false, true] {
        let group = templates.iter().filter(|t| t.has_object_slot() == with_object);
        for (i, t) in group.enumerate() {
            if i % 2 == 0 { &mut train } else { &mut test }.push(t.clone());
        }
    }
    (train, test)
}

/// One rendered command per template applicable to `mode`.
///
/// In `VerbUnknownNoun` mode the object slot receives the pair's class name;
/// callers substitute nonce words through [`CommandTemplate::render`] directly.
pub fn expand_templates(pair: &VerbObjectPair, templates: &[CommandTemplate], mode: CommandMode) -> Result<Vec<String>> {
    Ok(templates_for(templates, mode)?
        .into_iter()
        .map(|t| t.render(&pair.verb, &pair.object_class))
        .collect())
}

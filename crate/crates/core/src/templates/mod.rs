//! Paraphrase template banks.
//!
//! A bank is a set of groups keyed by `(env_id, kind, event)`. Every template
//! in a group says the same thing with the same named slots, so a message can
//! be rendered through any of them and its slot values recovered again with
//! [`TemplateBank::extract_slots`].
//!
//! Asset format (UTF-8):
//!
//! ```text
//! # comment
//! [group gridworld feedback:fn avoid_door]
//! Do not go {door} next.
//! Avoid the {door} door on your next move.
//! ```
//!
//! One template per line, `{slot}` placeholders, `{{` and `}}` for literal
//! braces. Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use regex::Regex;
use thiserror::Error;

use crate::feedback::FeedbackKind;

pub const MIN_GROUP_SIZE: usize = 4;
pub const MAX_GROUP_SIZE: usize = 20;

/// Slot values, pre-rendered to text.
pub type Slots = BTreeMap<String, String>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("{origin}:{line}: {message}")]
    Parse { origin: String, line: usize, message: String },
    #[error("duplicate template group [{0}]")]
    DuplicateGroup(String),
    #[error("template group [{group}] has {count} templates, expected {MIN_GROUP_SIZE}..={MAX_GROUP_SIZE}")]
    GroupSize { group: String, count: usize },
    #[error("template `{template}` in [{group}] does not declare the group's slot set")]
    SlotSetMismatch { group: String, template: String },
    #[error("unknown template group [{0}]")]
    UnknownGroup(String),
    #[error("missing slot `{slot}` for [{group}]")]
    MissingSlot { group: String, slot: String },
    #[error("unexpected slot `{slot}` for [{group}]")]
    UnexpectedSlot { group: String, slot: String },
    #[error("no template in [{0}] matches the given text")]
    NoTemplateMatches(String),
}

/// What a template group produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateKind {
    Instruction,
    Feedback(FeedbackKind),
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateKind::Instruction => f.write_str("instruction"),
            TemplateKind::Feedback(k) => write!(f, "feedback:{}", k.code()),
        }
    }
}

impl FromStr for TemplateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "instruction" {
            return Ok(TemplateKind::Instruction);
        }
        s.strip_prefix("feedback:")
            .and_then(|k| k.parse::<FeedbackKind>().ok())
            .map(TemplateKind::Feedback)
            .ok_or_else(|| format!("unknown template kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub env_id: String,
    pub kind: TemplateKind,
    pub event: String,
}

impl GroupKey {
    pub fn new(env_id: &str, kind: TemplateKind, event: &str) -> Self {
        Self { env_id: env_id.to_owned(), kind, event: event.to_owned() }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.env_id, self.kind, self.event)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub pattern: String,
    segments: Vec<Segment>,
    matcher: Regex,
    capture_names: Vec<String>,
}

impl Template {
    fn parse(id: String, pattern: &str) -> Result<Self, String> {
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut chars = pattern.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) if ch.is_ascii_lowercase() || ch == '_' || ch.is_ascii_digit() => {
                                name.push(ch)
                            }
                            Some(ch) => return Err(format!("invalid character `{ch}` in slot name")),
                            None => return Err("unclosed `{`".into()),
                        }
                    }
                    if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
                        return Err(format!("invalid slot name `{name}`"));
                    }
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    if matches!(segments.last(), Some(Segment::Slot(_))) {
                        return Err("adjacent slots cannot be told apart".into());
                    }
                    segments.push(Segment::Slot(name));
                }
                '}' => return Err("orphan `}`".into()),
                other => text.push(other),
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }

        let mut re = String::from("(?s)^");
        let mut capture_names = Vec::new();
        for seg in &segments {
            match seg {
                Segment::Text(t) => re.push_str(&regex::escape(t)),
                Segment::Slot(name) => {
                    re.push_str("(.+?)");
                    capture_names.push(name.clone());
                }
            }
        }
        re.push('$');
        let matcher = Regex::new(&re).map_err(|e| e.to_string())?;
        Ok(Self { id, pattern: pattern.to_owned(), segments, matcher, capture_names })
    }

    pub fn slot_names(&self) -> BTreeSet<String> {
        self.capture_names.iter().cloned().collect()
    }

    fn fill(&self, slots: &Slots) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => out.push_str(&slots[name]),
            }
        }
        out
    }

    fn extract(&self, rendered: &str) -> Option<Slots> {
        let caps = self.matcher.captures(rendered)?;
        let mut slots = Slots::new();
        for (i, name) in self.capture_names.iter().enumerate() {
            let value = caps.get(i + 1)?.as_str();
            match slots.get(name) {
                Some(prev) if prev != value => return None,
                Some(_) => {}
                None => {
                    slots.insert(name.clone(), value.to_owned());
                }
            }
        }
        Some(slots)
    }
}

#[derive(Debug, Clone)]
pub struct TemplateGroup {
    pub key: GroupKey,
    templates: Vec<Template>,
    slots: BTreeSet<String>,
}

impl TemplateGroup {
    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn slot_names(&self) -> &BTreeSet<String> {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    fn check_slots(&self, slots: &Slots) -> Result<(), TemplateError> {
        if let Some(missing) = self.slots.iter().find(|s| !slots.contains_key(*s)) {
            return Err(TemplateError::MissingSlot {
                group: self.key.to_string(),
                slot: missing.clone(),
            });
        }
        if let Some(extra) = slots.keys().find(|s| !self.slots.contains(*s)) {
            return Err(TemplateError::UnexpectedSlot {
                group: self.key.to_string(),
                slot: extra.clone(),
            });
        }
        Ok(())
    }

    /// Render through one specific template.
    pub fn render_with(&self, index: usize, slots: &Slots) -> Result<String, TemplateError> {
        self.check_slots(slots)?;
        Ok(self.templates[index].fill(slots))
    }

    /// Index of the first template that reproduces `rendered`, with its slots.
    pub fn extract(&self, rendered: &str) -> Result<(usize, Slots), TemplateError> {
        self.templates
            .iter()
            .enumerate()
            .find_map(|(i, t)| t.extract(rendered).map(|s| (i, s)))
            .ok_or_else(|| TemplateError::NoTemplateMatches(self.key.to_string()))
    }
}

/// Immutable collection of validated template groups.
#[derive(Debug, Clone, Default)]
pub struct TemplateBank {
    groups: BTreeMap<GroupKey, TemplateGroup>,
}

impl TemplateBank {
    /// Parse and validate a bank from `(origin, source)` pairs.
    pub fn from_sources<'a, I>(sources: I) -> Result<Self, TemplateError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut groups: BTreeMap<GroupKey, TemplateGroup> = BTreeMap::new();
        for (origin, source) in sources {
            parse_source(origin, source, &mut groups)?;
        }
        for group in groups.values() {
            let count = group.templates.len();
            if !(MIN_GROUP_SIZE..=MAX_GROUP_SIZE).contains(&count) {
                return Err(TemplateError::GroupSize { group: group.key.to_string(), count });
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> impl Iterator<Item = &TemplateGroup> {
        self.groups.values()
    }

    pub fn group(&self, env_id: &str, kind: TemplateKind, event: &str) -> Result<&TemplateGroup, TemplateError> {
        let key = GroupKey::new(env_id, kind, event);
        self.groups.get(&key).ok_or_else(|| TemplateError::UnknownGroup(key.to_string()))
    }

    /// Render a message. With `randomize` the template is drawn uniformly
    /// from the group; otherwise template 0 is used and `rng` is untouched.
    pub fn render<R: Rng + ?Sized>(
        &self,
        env_id: &str,
        kind: TemplateKind,
        event: &str,
        slots: &Slots,
        rng: &mut R,
        randomize: bool,
    ) -> Result<String, TemplateError> {
        let group = self.group(env_id, kind, event)?;
        group.check_slots(slots)?;
        let index = if randomize { rng.random_range(0..group.templates.len()) } else { 0 };
        Ok(group.templates[index].fill(slots))
    }

    /// Recover the slot values from a rendered message.
    pub fn extract_slots(
        &self,
        rendered: &str,
        env_id: &str,
        kind: TemplateKind,
        event: &str,
    ) -> Result<Slots, TemplateError> {
        self.group(env_id, kind, event)?.extract(rendered).map(|(_, s)| s)
    }

    /// Find which event of `env_id`/`kind` produced `rendered`.
    pub fn identify(&self, rendered: &str, env_id: &str, kind: TemplateKind) -> Option<(&str, Slots)> {
        self.groups
            .values()
            .filter(|g| g.key.env_id == env_id && g.key.kind == kind)
            .find_map(|g| g.extract(rendered).ok().map(|(_, s)| (g.key.event.as_str(), s)))
    }
}

fn parse_source(
    origin: &str,
    source: &str,
    groups: &mut BTreeMap<GroupKey, TemplateGroup>,
) -> Result<(), TemplateError> {
    let err = |line: usize, message: String| TemplateError::Parse { origin: origin.to_owned(), line, message };
    let mut current: Option<GroupKey> = None;
    for (idx, raw) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix("[group ") {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| err(lineno, "unterminated group header".into()))?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [env_id, kind, event] = parts[..] else {
                return Err(err(lineno, "group header needs `env_id kind event`".into()));
            };
            let kind: TemplateKind = kind.parse().map_err(|e| err(lineno, e))?;
            let key = GroupKey::new(env_id, kind, event);
            if groups.contains_key(&key) {
                return Err(TemplateError::DuplicateGroup(key.to_string()));
            }
            groups.insert(key.clone(), TemplateGroup { key: key.clone(), templates: Vec::new(), slots: BTreeSet::new() });
            current = Some(key);
            continue;
        }
        let key = current.as_ref().ok_or_else(|| err(lineno, "template before any group header".into()))?;
        let group = groups.get_mut(key).expect("group inserted with header");
        let id = format!("{}/{}/{}#{}", key.env_id, key.kind, key.event, group.templates.len());
        let template = Template::parse(id, line).map_err(|m| err(lineno, m))?;
        if group.templates.is_empty() {
            group.slots = template.slot_names();
        } else if template.slot_names() != group.slots {
            return Err(TemplateError::SlotSetMismatch { group: key.to_string(), template: line.to_owned() });
        }
        group.templates.push(template);
    }
    Ok(())
}

/// Build a slot map from `(name, value)` pairs.
pub fn slots<K: Into<String>, V: Into<String>, I: IntoIterator<Item = (K, V)>>(pairs: I) -> Slots {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

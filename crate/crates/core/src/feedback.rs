//! Feedback taxonomy: the five atomic feedback kinds, the selector passed at
//! make-time, and the per-step collection of rendered feedback messages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::EnvError;

/// One atomic feedback kind.
///
/// `R` verbalizes performance, `Hp`/`Hn` explain a past action, `Fp`/`Fn`
/// suggest (or warn against) future actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeedbackKind {
    R,
    Hp,
    Hn,
    Fp,
    Fn,
}

impl FeedbackKind {
    pub const ALL: [FeedbackKind; 5] = [
        FeedbackKind::R,
        FeedbackKind::Hp,
        FeedbackKind::Hn,
        FeedbackKind::Fp,
        FeedbackKind::Fn,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FeedbackKind::R => "r",
            FeedbackKind::Hp => "hp",
            FeedbackKind::Hn => "hn",
            FeedbackKind::Fp => "fp",
            FeedbackKind::Fn => "fn",
        }
    }

    pub fn all() -> BTreeSet<FeedbackKind> {
        Self::ALL.into_iter().collect()
    }
}

impl fmt::Display for FeedbackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for FeedbackKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "r" => Ok(FeedbackKind::R),
            "hp" => Ok(FeedbackKind::Hp),
            "hn" => Ok(FeedbackKind::Hn),
            "fp" => Ok(FeedbackKind::Fp),
            "fn" => Ok(FeedbackKind::Fn),
            other => Err(EnvError::InvalidConfig(format!("unknown feedback kind `{other}`"))),
        }
    }
}

impl Serialize for FeedbackKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for FeedbackKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which feedback kinds an environment should emit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FeedbackSelector {
    /// Every kind the environment supports.
    #[default]
    All,
    /// A random non-empty subset of the supported kinds, redrawn every step.
    Mix,
    /// No feedback at all.
    None,
    /// A fixed, non-empty set of atomic kinds.
    Subset(BTreeSet<FeedbackKind>),
}

impl FeedbackSelector {
    pub fn subset<I: IntoIterator<Item = FeedbackKind>>(kinds: I) -> Result<Self, EnvError> {
        let set: BTreeSet<_> = kinds.into_iter().collect();
        if set.is_empty() {
            return Err(EnvError::InvalidConfig("feedback subset must not be empty".into()));
        }
        Ok(FeedbackSelector::Subset(set))
    }

    pub fn code(&self) -> String {
        match self {
            FeedbackSelector::All => "a".into(),
            FeedbackSelector::Mix => "m".into(),
            FeedbackSelector::None => "n".into(),
            FeedbackSelector::Subset(set) => {
                set.iter().map(|k| k.code()).collect::<Vec<_>>().join(",")
            }
        }
    }
}

impl fmt::Display for FeedbackSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for FeedbackSelector {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "a" | "all" => Ok(FeedbackSelector::All),
            "m" | "mix" => Ok(FeedbackSelector::Mix),
            "n" | "none" => Ok(FeedbackSelector::None),
            list => FeedbackSelector::subset(
                list.split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(FeedbackKind::from_str)
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        }
    }
}

impl Serialize for FeedbackSelector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for FeedbackSelector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Resolve a selector against an environment's supported kinds for one step.
///
/// `Mix` includes each supported kind independently with probability 1/2 and
/// redraws until the result is non-empty.
pub fn effective_feedback_types<R: Rng + ?Sized>(
    selector: &FeedbackSelector,
    supported: &BTreeSet<FeedbackKind>,
    rng: &mut R,
) -> BTreeSet<FeedbackKind> {
    match selector {
        FeedbackSelector::All => supported.clone(),
        FeedbackSelector::None => BTreeSet::new(),
        FeedbackSelector::Subset(set) => set.intersection(supported).copied().collect(),
        FeedbackSelector::Mix => {
            if supported.is_empty() {
                return BTreeSet::new();
            }
            loop {
                let drawn: BTreeSet<_> =
                    supported.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                if !drawn.is_empty() {
                    return drawn;
                }
            }
        }
    }
}

/// Feedback messages for one step, grouped by kind.
///
/// A kind may carry several messages (one per violated poem line, say); its
/// text is those messages in order. Rendering puts each message on its own
/// line, kinds in the canonical `r, hp, hn, fp, fn` order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeedbackSet(BTreeMap<FeedbackKind, Vec<String>>);

impl FeedbackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, kind: FeedbackKind, message: impl Into<String>) {
        let message = message.into();
        if !message.is_empty() {
            self.0.entry(kind).or_default().push(message);
        }
    }

    pub fn messages(&self, kind: FeedbackKind) -> &[String] {
        self.0.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, kind: FeedbackKind) -> bool {
        !self.messages(kind).is_empty()
    }

    /// Kinds with at least one message.
    pub fn kinds(&self) -> BTreeSet<FeedbackKind> {
        self.0.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| *k).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(Vec::is_empty)
    }

    /// Drop every kind outside `keep`.
    pub fn retain(&mut self, keep: &BTreeSet<FeedbackKind>) {
        self.0.retain(|k, v| keep.contains(k) && !v.is_empty());
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeedbackKind, &str)> {
        self.0.iter().flat_map(|(k, msgs)| msgs.iter().map(move |m| (*k, m.as_str())))
    }

    pub fn render(&self) -> String {
        self.iter().map(|(_, m)| m).collect::<Vec<_>>().join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(codes: &[&str]) -> BTreeSet<FeedbackKind> {
        codes.iter().map(|c| c.parse().unwrap()).collect()
    }

    #[test]
    fn selector_parsing() {
        assert_eq!("a".parse::<FeedbackSelector>().unwrap(), FeedbackSelector::All);
        assert_eq!("m".parse::<FeedbackSelector>().unwrap(), FeedbackSelector::Mix);
        assert_eq!("n".parse::<FeedbackSelector>().unwrap(), FeedbackSelector::None);
        assert_eq!(
            "r, hp".parse::<FeedbackSelector>().unwrap(),
            FeedbackSelector::Subset(set(&["r", "hp"]))
        );
        assert!("".parse::<FeedbackSelector>().is_err());
        assert!("r,xx".parse::<FeedbackSelector>().is_err());
        assert_eq!(FeedbackSelector::Subset(set(&["fn", "r"])).code(), "r,fn");
    }

    #[test]
    fn all_and_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let supported = set(&["r", "hp", "hn"]);
        assert_eq!(effective_feedback_types(&FeedbackSelector::All, &supported, &mut rng), supported);
        assert!(effective_feedback_types(&FeedbackSelector::None, &supported, &mut rng).is_empty());
        let sub = FeedbackSelector::Subset(set(&["r", "fp"]));
        assert_eq!(effective_feedback_types(&sub, &supported, &mut rng), set(&["r"]));
    }

    #[test]
    fn mix_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let supported = FeedbackKind::all();
        let mut counts = [0usize; 5];
        let draws = 10_000;
        for _ in 0..draws {
            let eff = effective_feedback_types(&FeedbackSelector::Mix, &supported, &mut rng);
            assert!(!eff.is_empty());
            for (i, k) in FeedbackKind::ALL.iter().enumerate() {
                if eff.contains(k) {
                    counts[i] += 1;
                }
            }
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.5).abs() <= 0.03, "frequency {freq}");
        }
    }

    #[test]
    fn render_order_and_retain() {
        let mut fb = FeedbackSet::new();
        fb.push(FeedbackKind::Fn, "avoid west");
        fb.push(FeedbackKind::R, "not yet");
        fb.push(FeedbackKind::Hn, "");
        assert_eq!(fb.render(), "not yet\navoid west");
        assert_eq!(fb.kinds(), set(&["r", "fn"]));
        fb.retain(&set(&["fn"]));
        assert_eq!(fb.render(), "avoid west");
    }
}

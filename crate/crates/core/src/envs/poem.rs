//! Syllable- and line-constrained poem writing (haiku, tanka, custom).
//!
//! Syllables come from a CMU-format pronouncing dictionary. A word with
//! several pronunciations may count any of them, so a line is acceptable when
//! some choice of per-word counts hits its target exactly.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;
use thiserror::Error;

use crate::assets;
use crate::env::{Ctx, Problem, ResetOutput, Transition};
use crate::error::EnvError;
use crate::feedback::{FeedbackKind, FeedbackSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PoemError {
    #[error("word is empty after normalization")]
    EmptyWord,
}

/// Word to the set of syllable counts over its pronunciations.
#[derive(Debug, Clone, Default)]
pub struct SyllableLexicon {
    entries: BTreeMap<String, BTreeSet<u32>>,
}

impl SyllableLexicon {
    /// Parse `WORD PH1 PH2 ...` lines. Alternate pronunciations use a `(n)`
    /// suffix; `;;;` lines and `#` trailing comments are ignored. Vowel
    /// phonemes are the ones carrying a stress digit.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.starts_with(";;;") {
                continue;
            }
            let line = raw.split('#').next().unwrap_or("");
            let mut parts = line.split_whitespace();
            let Some(head) = parts.next() else {
                continue;
            };
            let word = match head.find('(') {
                Some(idx) if head.ends_with(')') => &head[..idx],
                _ => head,
            };
            let phonemes: Vec<&str> = parts.collect();
            if phonemes.is_empty() {
                return Err(format!("dictionary line {}: `{head}` has no phonemes", i + 1));
            }
            let vowels = phonemes.iter().filter(|p| p.ends_with(['0', '1', '2'])).count() as u32;
            if vowels > 0 {
                entries.entry(word.to_lowercase()).or_default().insert(vowels);
            }
        }
        if entries.is_empty() {
            return Err("pronouncing dictionary is empty".into());
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, &BTreeSet<u32>)> {
        self.entries.iter().map(|(w, c)| (w.as_str(), c))
    }

    pub fn lookup(&self, word: &str) -> Option<&BTreeSet<u32>> {
        let w = normalize_word(word);
        self.entries.get(&w).or_else(|| self.entries.get(w.trim_matches('\'')))
    }

    /// Possible syllable counts for one word.
    pub fn syllable_counts(&self, word: &str) -> Result<BTreeSet<u32>, PoemError> {
        let w = normalize_word(word);
        if w.trim_matches('\'').is_empty() {
            return Err(PoemError::EmptyWord);
        }
        Ok(self.lookup(&w).cloned().unwrap_or_else(|| BTreeSet::from([heuristic_syllables(&w)])))
    }
}

/// Lowercase and strip surrounding punctuation, keeping inner apostrophes.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_lowercase()
}

/// Vowel-group count with a trailing silent-e correction, at least 1.
pub fn heuristic_syllables(word: &str) -> u32 {
    let letters: Vec<char> = word.to_lowercase().chars().filter(|c| c.is_ascii_alphabetic()).collect();
    let is_vowel = |c: char| "aeiouy".contains(c);
    let mut groups = 0u32;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = letters.len();
    if groups > 1 && n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]) {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Split a line into words: whitespace, hyphens, dashes and slashes
/// separate; tokens that are pure punctuation are dropped.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split(|c: char| c.is_whitespace() || matches!(c, '-' | '\u{2013}' | '\u{2014}' | '/'))
        .map(normalize_word)
        .filter(|w| !w.trim_matches('\'').is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineReport {
    pub achievable: bool,
    /// Smallest and largest attainable syllable totals.
    pub counts: (u32, u32),
    /// Attainable total closest to the target, lower on ties.
    pub chosen: u32,
}

/// Every attainable syllable total for a line.
pub fn attainable_totals(lexicon: &SyllableLexicon, line: &str) -> BTreeSet<u32> {
    let mut sums = BTreeSet::from([0u32]);
    for word in tokenize(line) {
        let counts = lexicon.syllable_counts(&word).expect("tokens are non-empty");
        sums = sums.iter().flat_map(|s| counts.iter().map(move |c| s + c)).collect();
    }
    sums
}

pub fn check_line(lexicon: &SyllableLexicon, line: &str, target: u32) -> LineReport {
    let sums = attainable_totals(lexicon, line);
    let lo = *sums.first().expect("contains 0 at least");
    let hi = *sums.last().expect("non-empty");
    let chosen = *sums
        .iter()
        .min_by_key(|&&s| (s.abs_diff(target), s))
        .expect("non-empty");
    LineReport { achievable: target >= 1 && sums.contains(&target), counts: (lo, hi), chosen }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoemConstraint {
    pub form: String,
    pub line_syllables: Vec<u32>,
    pub strict_line_count: bool,
}

impl PoemConstraint {
    pub fn haiku() -> Self {
        Self { form: "haiku".into(), line_syllables: vec![5, 7, 5], strict_line_count: true }
    }

    pub fn tanka() -> Self {
        Self { form: "tanka".into(), line_syllables: vec![5, 7, 5, 7, 7], strict_line_count: true }
    }

    pub fn custom(line_syllables: Vec<u32>) -> Result<Self, EnvError> {
        if line_syllables.is_empty() || line_syllables.contains(&0) {
            return Err(EnvError::InvalidConfig("poem lines need positive syllable targets".into()));
        }
        Ok(Self { form: "poem".into(), line_syllables, strict_line_count: true })
    }

    /// `haiku` (default), `tanka`, or a dash-separated list like `5-7-5-7`.
    pub fn parse(variant: Option<&str>) -> Result<Self, EnvError> {
        match variant.map(|v| v.trim().to_lowercase()).as_deref() {
            None | Some("haiku") => Ok(Self::haiku()),
            Some("tanka") => Ok(Self::tanka()),
            Some(list) => {
                let targets: Result<Vec<u32>, _> = list.split('-').map(|p| p.trim().parse::<u32>()).collect();
                match targets {
                    Ok(t) => Self::custom(t),
                    Err(_) => Err(EnvError::UnknownEnv(format!("poem:{list}"))),
                }
            }
        }
    }

    pub fn pattern(&self) -> String {
        self.line_syllables.iter().map(u32::to_string).collect::<Vec<_>>().join("-")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineEval {
    pub index: usize,
    pub text: String,
    pub target: u32,
    pub report: LineReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoemReport {
    pub lines: Vec<LineEval>,
    pub submitted: usize,
    pub required: usize,
    pub satisfied: usize,
    pub reward: f64,
    pub success: bool,
}

/// Score a submission. Blank lines are ignored; every missing or extra line
/// counts as one violation, so the score is satisfied / max(submitted, required).
pub fn evaluate_poem(lexicon: &SyllableLexicon, constraint: &PoemConstraint, poem: &str) -> PoemReport {
    let submitted: Vec<&str> = poem.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let required = constraint.line_syllables.len();
    let lines: Vec<LineEval> = submitted
        .iter()
        .zip(&constraint.line_syllables)
        .enumerate()
        .map(|(index, (text, &target))| LineEval {
            index,
            text: (*text).to_owned(),
            target,
            report: check_line(lexicon, text, target),
        })
        .collect();
    let satisfied = lines.iter().filter(|l| l.report.achievable).count();
    let slots = submitted.len().max(required);
    PoemReport {
        submitted: submitted.len(),
        required,
        satisfied,
        reward: satisfied as f64 / slots as f64,
        success: submitted.len() == required && satisfied == required,
        lines,
    }
}

fn syllables(n: u32) -> String {
    if n == 1 {
        "1 syllable".into()
    } else {
        format!("{n} syllables")
    }
}

fn lines_word(n: usize) -> String {
    if n == 1 {
        "1 line".into()
    } else {
        format!("{n} lines")
    }
}

#[derive(Debug, Clone)]
pub struct PoemProblem {
    constraint: PoemConstraint,
    lexicon: &'static SyllableLexicon,
}

impl PoemProblem {
    pub fn from_variant(variant: Option<&str>) -> Result<Self, EnvError> {
        Ok(Self { constraint: PoemConstraint::parse(variant)?, lexicon: assets::lexicon()? })
    }

    pub fn constraint(&self) -> &PoemConstraint {
        &self.constraint
    }

    pub fn lexicon(&self) -> &'static SyllableLexicon {
        self.lexicon
    }
}

impl Problem for PoemProblem {
    fn reset(&mut self, ctx: &mut Ctx<'_>, _fresh_session: bool) -> Result<ResetOutput, EnvError> {
        let c = &self.constraint;
        let instruction = ctx.instruction(
            "basic",
            &[
                ("form", c.form.clone()),
                ("lines", lines_word(c.line_syllables.len())),
                ("pattern", c.pattern()),
            ],
        )?;
        Ok(ResetOutput { observation: "No poem has been submitted yet.".into(), instruction })
    }

    fn step(&mut self, ctx: &mut Ctx<'_>, action: &str) -> Result<Transition, EnvError> {
        use FeedbackKind::*;
        let report = evaluate_poem(self.lexicon, &self.constraint, action);
        let mut fb = FeedbackSet::new();
        let slots_total = report.submitted.max(report.required);
        ctx.emit(&mut fb, R, "score", &[("satisfied", report.satisfied.to_string()), ("total", slots_total.to_string())])?;
        for line in &report.lines {
            let n = (line.index + 1).to_string();
            if line.report.achievable {
                ctx.emit(&mut fb, Hp, "line_ok", &[("line", n)])?;
            } else {
                let chosen = line.report.chosen;
                ctx.emit(
                    &mut fb,
                    Hn,
                    "line_syllables",
                    &[("line", n.clone()), ("count", syllables(chosen)), ("target", syllables(line.target))],
                )?;
                let event = if chosen < line.target { "add_syllables" } else { "remove_syllables" };
                let delta = chosen.abs_diff(line.target);
                ctx.emit(&mut fb, Fp, event, &[("line", n.clone()), ("delta", syllables(delta))])?;
                ctx.emit(&mut fb, Fn, "repeat_syllables", &[("line", n), ("count", syllables(chosen))])?;
            }
        }
        if report.submitted != report.required {
            let submitted = lines_word(report.submitted);
            let required = lines_word(report.required);
            ctx.emit(&mut fb, Hn, "line_count", &[("submitted", submitted.clone()), ("required", required.clone())])?;
            ctx.emit(&mut fb, Fp, "line_count", &[("required", required)])?;
            ctx.emit(&mut fb, Fn, "repeat_line_count", &[("submitted", submitted)])?;
        }
        let info = [
            ("success", json!(report.success)),
            ("satisfied", json!(report.satisfied)),
            ("submitted_lines", json!(report.submitted)),
            ("required_lines", json!(report.required)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        Ok(Transition {
            observation: format!("You submitted a poem of {}.", lines_word(report.submitted)),
            reward: report.reward,
            terminated: true,
            feedback: fb,
            info,
        })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = "\
;;; comment
a AH0
a(2) EY1
an AE1 N
fire F AY1 ER0
fire(2) F AY1 R
hello HH AH0 L OW1
old OW1 L D
pond P AA1 N D
silent S AY1 L AH0 N T
aalborg AO1 L B AO0 R G # place, danish
";

    fn lex() -> SyllableLexicon {
        SyllableLexicon::parse(MINI).unwrap()
    }

    fn set(xs: &[u32]) -> BTreeSet<u32> {
        xs.iter().copied().collect()
    }

    #[test]
    fn dictionary_counts() {
        let lex = lex();
        assert_eq!(lex.syllable_counts("hello").unwrap(), set(&[2]));
        assert_eq!(lex.syllable_counts("Fire!").unwrap(), set(&[1, 2]));
        assert_eq!(lex.syllable_counts("a").unwrap(), set(&[1]));
        assert_eq!(lex.syllable_counts("Aalborg").unwrap(), set(&[2]));
        assert_eq!(lex.syllable_counts("..."), Err(PoemError::EmptyWord));
    }

    #[test]
    fn heuristic_cases() {
        assert_eq!(heuristic_syllables("cake"), 1);
        assert_eq!(heuristic_syllables("table"), 2);
        assert_eq!(heuristic_syllables("banana"), 3);
        assert_eq!(heuristic_syllables("the"), 1);
        assert_eq!(heuristic_syllables("rhythm"), 1);
        assert_eq!(heuristic_syllables("42"), 1);
        assert_eq!(heuristic_syllables("see"), 1);
    }

    #[test]
    fn line_checks() {
        let lex = lex();
        let r = check_line(&lex, "an old silent pond", 5);
        assert!(r.achievable);
        assert_eq!(r.counts, (5, 5));
        let r = check_line(&lex, "", 5);
        assert_eq!(r, LineReport { achievable: false, counts: (0, 0), chosen: 0 });
        let r = check_line(&lex, "fire fire", 3);
        assert!(r.achievable);
        assert_eq!(r.counts, (2, 4));
        let r = check_line(&lex, "hello hello", 3);
        assert_eq!(r, LineReport { achievable: false, counts: (4, 4), chosen: 4 });
    }

    #[test]
    fn tokenizing() {
        assert_eq!(tokenize("Old-pond, a frog's leap -- splash!"), vec!["old", "pond", "a", "frog's", "leap", "splash"]);
    }

    #[test]
    fn constraints() {
        assert_eq!(PoemConstraint::parse(None).unwrap().line_syllables, vec![5, 7, 5]);
        assert_eq!(PoemConstraint::parse(Some("Tanka")).unwrap().line_syllables, vec![5, 7, 5, 7, 7]);
        assert_eq!(PoemConstraint::parse(Some("3-4")).unwrap().pattern(), "3-4");
        assert!(matches!(PoemConstraint::parse(Some("limerick")), Err(EnvError::UnknownEnv(_))));
        assert!(PoemConstraint::parse(Some("5-0")).is_err());
    }

    #[test]
    fn scoring() {
        let lex = lex();
        let c = PoemConstraint::custom(vec![5, 2]).unwrap();
        let r = evaluate_poem(&lex, &c, "an old silent pond\nhello\n");
        assert!(r.success);
        assert_eq!(r.reward, 1.0);
        let r = evaluate_poem(&lex, &c, "an old silent pond\nhello\nhello");
        assert!(!r.success);
        assert_eq!(r.reward, 2.0 / 3.0);
        let r = evaluate_poem(&lex, &c, "an old pond\n");
        assert_eq!(r.reward, 0.0);
    }
}

//! Movie and TV recommendation against a simulated user's preferences.

use std::any::Any;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::json;
use thiserror::Error;

use crate::assets;
use crate::env::{Ctx, Problem, ResetOutput, Transition};
use crate::error::EnvError;
use crate::feedback::{FeedbackKind, FeedbackSet};
use crate::text::join_list;

pub const MAJOR_GENRES: [&str; 6] = ["Action", "Comedy", "Documentary", "Drama", "Horror", "Science Fiction"];
pub const GENRES: [&str; 12] = [
    "Action", "Comedy", "Documentary", "Drama", "Horror", "Science Fiction",
    "Adventure", "Animation", "Crime", "Fantasy", "Romance", "Thriller",
];
pub const MIN_CELL_ITEMS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecoError {
    #[error("no recommendation given")]
    EmptyRecommendation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MediaType {
    Movie,
    TvShow,
}

impl MediaType {
    pub const ALL: [MediaType; 2] = [MediaType::Movie, MediaType::TvShow];

    pub fn code(self) -> &'static str {
        match self {
            MediaType::Movie => "movie",
            MediaType::TvShow => "tv_show",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MediaType::Movie => "movie",
            MediaType::TvShow => "TV show",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum YearRange {
    Eighties,
    Nineties,
    TwoThousands,
    Recent,
}

impl YearRange {
    pub const ALL: [YearRange; 4] = [YearRange::Eighties, YearRange::Nineties, YearRange::TwoThousands, YearRange::Recent];

    pub fn bounds(self) -> (i32, i32) {
        match self {
            YearRange::Eighties => (1980, 1989),
            YearRange::Nineties => (1990, 1999),
            YearRange::TwoThousands => (2000, 2009),
            YearRange::Recent => (2010, 2025),
        }
    }

    /// Range containing `year`; years before 1980 belong to none.
    pub fn of_year(year: i32) -> Option<Self> {
        Self::ALL.into_iter().find(|r| {
            let (lo, hi) = r.bounds();
            (lo..=hi).contains(&year)
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            YearRange::Eighties => "the 1980s",
            YearRange::Nineties => "the 1990s",
            YearRange::TwoThousands => "the 2000s",
            YearRange::Recent => "2010 or later",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgeRating {
    FamilyFriendly,
    RRated,
}

impl AgeRating {
    pub const ALL: [AgeRating; 2] = [AgeRating::FamilyFriendly, AgeRating::RRated];

    pub fn code(self) -> &'static str {
        match self {
            AgeRating::FamilyFriendly => "family_friendly",
            AgeRating::RRated => "r_rated",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeRating::FamilyFriendly => "family-friendly",
            AgeRating::RRated => "R-rated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogItem {
    pub title: String,
    pub media_type: MediaType,
    pub year: i32,
    pub genres: BTreeSet<String>,
    pub rating: AgeRating,
}

/// Lowercase, punctuation to spaces, articles dropped, whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    title
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !matches!(*w, "the" | "a" | "an"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    items: Vec<CatalogItem>,
    index: HashMap<String, usize>,
}

impl Catalog {
    /// Parse `title|type|year|genres|rating` records; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut catalog = Catalog::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| format!("catalog line {}: {m}", i + 1);
            let fields: Vec<&str> = line.split('|').map(str::trim).collect();
            let [title, kind, year, genres, rating] = fields[..] else {
                return Err(err("expected 5 `|`-separated fields"));
            };
            let media_type = MediaType::ALL.into_iter().find(|m| m.code() == kind).ok_or_else(|| err("bad type"))?;
            let year: i32 = year.parse().map_err(|_| err("bad year"))?;
            if !(1970..=2025).contains(&year) {
                return Err(err("year outside 1970..=2025"));
            }
            let genres: BTreeSet<String> = genres.split(',').map(|g| g.trim().to_owned()).collect();
            if genres.iter().any(|g| !GENRES.contains(&g.as_str())) {
                return Err(err("unknown genre"));
            }
            let rating = AgeRating::ALL.into_iter().find(|r| r.code() == rating).ok_or_else(|| err("bad rating"))?;
            let key = normalize_title(title);
            if key.is_empty() || catalog.index.contains_key(&key) {
                return Err(err("empty or duplicate title after normalization"));
            }
            catalog.index.insert(key, catalog.items.len());
            catalog.items.push(CatalogItem { title: title.to_owned(), media_type, year, genres, rating });
        }
        Ok(catalog)
    }

    pub fn items(&self) -> &[CatalogItem] {
        &self.items
    }

    /// Exact match on the normalized title.
    pub fn match_item(&self, recommendation: &str) -> Option<&CatalogItem> {
        self.index.get(&normalize_title(recommendation)).map(|&i| &self.items[i])
    }

    /// Every (type, range, rating) cell holds enough items of each major genre.
    pub fn check_coverage(&self) -> Result<(), String> {
        for m in MediaType::ALL {
            for r in YearRange::ALL {
                for a in AgeRating::ALL {
                    for g in MAJOR_GENRES {
                        let n = self
                            .items
                            .iter()
                            .filter(|i| {
                                i.media_type == m && YearRange::of_year(i.year) == Some(r) && i.rating == a && i.genres.contains(g)
                            })
                            .count();
                        if n < MIN_CELL_ITEMS {
                            return Err(format!("only {n} {g} items for {m:?}/{r:?}/{a:?}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceProfile {
    pub media_type: MediaType,
    pub year_range: YearRange,
    pub genres: BTreeSet<String>,
    pub age: AgeRating,
}

impl PreferenceProfile {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let media_type = *MediaType::ALL.choose(rng).expect("non-empty");
        let year_range = *YearRange::ALL.choose(rng).expect("non-empty");
        let k = rng.random_range(1..=3);
        let mut pool = MAJOR_GENRES.to_vec();
        pool.shuffle(rng);
        let genres = pool[..k].iter().map(|g| g.to_string()).collect();
        let age = *AgeRating::ALL.choose(rng).expect("non-empty");
        Self { media_type, year_range, genres, age }
    }

    pub fn genre_list(&self) -> String {
        let genres: Vec<&str> = self.genres.iter().map(String::as_str).collect();
        match genres[..] {
            [one] => one.to_owned(),
            [ref init @ .., last] => format!("{} or {last}", init.join(", ")),
            [] => String::new(),
        }
    }

    pub fn satisfied_by(&self, item: &CatalogItem) -> bool {
        violations(self, Some(item)).is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    UnknownTitle,
    MediaType,
    YearRange,
    Genre,
    Age,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::UnknownTitle => "unknown_title",
            Violation::MediaType => "media_type",
            Violation::YearRange => "year_range",
            Violation::Genre => "genre",
            Violation::Age => "age",
        })
    }
}

pub fn violations(profile: &PreferenceProfile, item: Option<&CatalogItem>) -> Vec<Violation> {
    let Some(item) = item else {
        return vec![Violation::UnknownTitle];
    };
    let mut v = Vec::new();
    if item.media_type != profile.media_type {
        v.push(Violation::MediaType);
    }
    if YearRange::of_year(item.year) != Some(profile.year_range) {
        v.push(Violation::YearRange);
    }
    if item.genres.is_disjoint(&profile.genres) {
        v.push(Violation::Genre);
    }
    if item.rating != profile.age {
        v.push(Violation::Age);
    }
    v
}

/// Per-item violations and the fraction of items with none.
pub fn evaluate_items(
    profile: &PreferenceProfile,
    items: &[Option<&CatalogItem>],
) -> Result<(Vec<Vec<Violation>>, f64), RecoError> {
    if items.is_empty() {
        return Err(RecoError::EmptyRecommendation);
    }
    let per_item: Vec<Vec<Violation>> = items.iter().map(|i| violations(profile, *i)).collect();
    let satisfied = per_item.iter().filter(|v| v.is_empty()).count();
    Ok((per_item, satisfied as f64 / items.len() as f64))
}

/// Split an answer into candidate titles on newlines and semicolons, strip
/// list markers and quotes, and drop duplicates under title normalization.
pub fn parse_recommendations(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for raw in text.split(['\n', ';']) {
        let mut s = raw.trim();
        s = s.trim_start_matches(['-', '*', '\u{2022}']).trim_start();
        let digits = s.chars().take_while(char::is_ascii_digit).count();
        if digits > 0 && s[digits..].starts_with(['.', ')']) {
            s = s[digits + 1..].trim_start();
        }
        let s = s.trim_matches(|c: char| c == '"' || c == '\'' || c == '\u{201c}' || c == '\u{201d}').trim();
        let key = normalize_title(s);
        if !key.is_empty() && seen.insert(key) {
            out.push(s.to_owned());
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RecoProblem {
    catalog: &'static Catalog,
    profile: Option<PreferenceProfile>,
}

impl RecoProblem {
    pub fn from_variant(variant: Option<&str>) -> Result<Self, EnvError> {
        if let Some(v) = variant {
            return Err(EnvError::UnknownEnv(format!("reco-movie:{v}")));
        }
        Ok(Self { catalog: assets::catalog()?, profile: None })
    }

    pub fn catalog(&self) -> &'static Catalog {
        self.catalog
    }

    pub fn profile(&self) -> Option<&PreferenceProfile> {
        self.profile.as_ref()
    }
}

impl Problem for RecoProblem {
    fn reset(&mut self, ctx: &mut Ctx<'_>, fresh_session: bool) -> Result<ResetOutput, EnvError> {
        if fresh_session || self.profile.is_none() {
            self.profile = Some(PreferenceProfile::sample(ctx.latent));
        }
        let p = self.profile.as_ref().expect("profile drawn");
        let instruction = ctx.instruction(
            "basic",
            &[
                ("media", p.media_type.label().to_owned()),
                ("years", p.year_range.label().to_owned()),
                ("genres", p.genre_list()),
                ("rating", p.age.label().to_owned()),
            ],
        )?;
        Ok(ResetOutput { observation: "No recommendations have been made yet.".into(), instruction })
    }

    fn step(&mut self, ctx: &mut Ctx<'_>, action: &str) -> Result<Transition, EnvError> {
        use FeedbackKind::*;
        let profile = self.profile.clone().expect("reco used before reset");
        let recs = parse_recommendations(action);
        let items: Vec<Option<&CatalogItem>> = recs.iter().map(|r| self.catalog.match_item(r)).collect();
        let mut fb = FeedbackSet::new();

        let Ok((per_item, reward)) = evaluate_items(&profile, &items) else {
            ctx.emit(&mut fb, Hn, "empty", &[])?;
            let info = [("success", json!(false)), ("recommended", json!(0)), ("malformed_action", json!(true))]
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v))
                .collect();
            return Ok(Transition {
                observation: "You did not recommend anything.".into(),
                reward: 0.0,
                terminated: true,
                feedback: fb,
                info,
            });
        };

        let satisfied = per_item.iter().filter(|v| v.is_empty()).count();
        ctx.emit(&mut fb, R, "score", &[("satisfied", satisfied.to_string()), ("total", recs.len().to_string())])?;
        for ((rec, item), violations) in recs.iter().zip(&items).zip(&per_item) {
            let Some(item) = item else {
                ctx.emit(&mut fb, Hn, "unknown_title", &[("title", rec.clone())])?;
                ctx.emit(&mut fb, Fn, "avoid_title", &[("title", rec.clone())])?;
                continue;
            };
            let title = item.title.clone();
            if violations.is_empty() {
                ctx.emit(&mut fb, Hp, "good_item", &[("title", title)])?;
                continue;
            }
            for v in violations {
                let t = ("title", title.clone());
                match v {
                    Violation::MediaType => ctx.emit(
                        &mut fb,
                        Hn,
                        "media_type",
                        &[t, ("actual", item.media_type.label().into()), ("wanted", profile.media_type.label().into())],
                    )?,
                    Violation::YearRange => ctx.emit(
                        &mut fb,
                        Hn,
                        "year_range",
                        &[t, ("year", item.year.to_string()), ("wanted", profile.year_range.label().into())],
                    )?,
                    Violation::Genre => {
                        let actual: Vec<&str> = item.genres.iter().map(String::as_str).collect();
                        ctx.emit(
                            &mut fb,
                            Hn,
                            "genre",
                            &[t, ("actual", join_list(&actual)), ("wanted", profile.genre_list())],
                        )?
                    }
                    Violation::Age => ctx.emit(
                        &mut fb,
                        Hn,
                        "age",
                        &[t, ("actual", item.rating.label().into()), ("wanted", profile.age.label().into())],
                    )?,
                    Violation::UnknownTitle => unreachable!("matched items have titles"),
                }
            }
            ctx.emit(&mut fb, Fn, "avoid_title", &[("title", title)])?;
        }
        if satisfied < recs.len() {
            let recommended: BTreeSet<String> = recs.iter().map(|r| normalize_title(r)).collect();
            let candidates: Vec<&CatalogItem> = self
                .catalog
                .items()
                .iter()
                .filter(|i| profile.satisfied_by(i) && !recommended.contains(&normalize_title(&i.title)))
                .collect();
            if let Some(pick) = candidates.choose(ctx.latent) {
                ctx.emit(&mut fb, Fp, "try_title", &[("title", pick.title.clone())])?;
            }
        }

        let info = [
            ("success", json!(satisfied == recs.len())),
            ("recommended", json!(recs.len())),
            ("satisfied", json!(satisfied)),
            ("malformed_action", json!(false)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        Ok(Transition {
            observation: format!("You recommended {} title(s).", recs.len()),
            reward,
            terminated: true,
            feedback: fb,
            info,
        })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

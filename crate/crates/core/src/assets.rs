//! Bundled data assets: template banks, the pronouncing dictionary and the
//! movie catalog.
//!
//! Assets are compiled into the binary. Setting `LANGFEED_ASSET_DIR` points
//! the loader at a directory laid out like `crates/core/assets/`; any file
//! present there replaces its embedded counterpart.

use std::path::PathBuf;
use std::sync::OnceLock;

use crate::envs::poem::SyllableLexicon;
use crate::envs::reco::Catalog;
use crate::error::EnvError;
use crate::templates::TemplateBank;

pub const ASSET_DIR_VAR: &str = "LANGFEED_ASSET_DIR";

const TEMPLATE_FILES: [(&str, &str); 7] = [
    ("templates/common.txt", include_str!("../assets/templates/common.txt")),
    ("templates/bandit.txt", include_str!("../assets/templates/bandit.txt")),
    ("templates/poem.txt", include_str!("../assets/templates/poem.txt")),
    ("templates/reco-movie.txt", include_str!("../assets/templates/reco-movie.txt")),
    ("templates/optimization.txt", include_str!("../assets/templates/optimization.txt")),
    ("templates/parking.txt", include_str!("../assets/templates/parking.txt")),
    ("templates/gridworld.txt", include_str!("../assets/templates/gridworld.txt")),
];

const CMUDICT: (&str, &str) = ("cmudict.dict", include_str!("../assets/cmudict.dict"));
const MOVIES: (&str, &str) = ("movies.txt", include_str!("../assets/movies.txt"));

static TEMPLATES: OnceLock<Result<TemplateBank, String>> = OnceLock::new();
static LEXICON: OnceLock<Result<SyllableLexicon, String>> = OnceLock::new();
static CATALOG: OnceLock<Result<Catalog, String>> = OnceLock::new();

fn source(relative: &str, embedded: &'static str) -> Result<std::borrow::Cow<'static, str>, String> {
    if let Some(dir) = std::env::var_os(ASSET_DIR_VAR) {
        let path = PathBuf::from(dir).join(relative);
        if path.exists() {
            return std::fs::read_to_string(&path)
                .map(Into::into)
                .map_err(|e| format!("{}: {e}", path.display()));
        }
    }
    Ok(embedded.into())
}

fn cached<T>(cell: &'static OnceLock<Result<T, String>>, load: impl FnOnce() -> Result<T, String>) -> Result<&'static T, EnvError> {
    cell.get_or_init(load).as_ref().map_err(|e| EnvError::Assets(e.clone()))
}

pub fn templates() -> Result<&'static TemplateBank, EnvError> {
    cached(&TEMPLATES, || {
        let sources = TEMPLATE_FILES
            .iter()
            .map(|(name, text)| source(name, text).map(|s| (*name, s)))
            .collect::<Result<Vec<_>, _>>()?;
        TemplateBank::from_sources(sources.iter().map(|(n, s)| (*n, s.as_ref()))).map_err(|e| e.to_string())
    })
}

pub fn lexicon() -> Result<&'static SyllableLexicon, EnvError> {
    cached(&LEXICON, || SyllableLexicon::parse(&source(CMUDICT.0, CMUDICT.1)?))
}

pub fn catalog() -> Result<&'static Catalog, EnvError> {
    cached(&CATALOG, || Catalog::parse(&source(MOVIES.0, MOVIES.1)?))
}

/// Counts reported by `validate-assets`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetSummary {
    pub template_groups: usize,
    pub templates: usize,
    pub dictionary_words: usize,
    pub catalog_items: usize,
}

/// Load and validate every asset.
pub fn validate_all() -> Result<AssetSummary, EnvError> {
    let bank = templates()?;
    let lexicon = lexicon()?;
    let catalog = catalog()?;
    catalog.check_coverage().map_err(EnvError::Assets)?;
    Ok(AssetSummary {
        template_groups: bank.groups().count(),
        templates: bank.groups().map(|g| g.len()).sum(),
        dictionary_words: lexicon.len(),
        catalog_items: catalog.items().len(),
    })
}

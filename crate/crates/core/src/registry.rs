//! Environment registry: ids, per-family properties, and `make`.
//!
//! Ids are `family` or `family:variant`, e.g. `bandit:TenArmedGaussian`,
//! `poem:tanka`, `optimization:booth`, `gridworld:rooms=12,distance=4`.

use std::fmt;

use crate::assets;
use crate::env::{Env, EnvConfig, InstructionType};
use crate::envs::{bandit, gridworld, optimization, parking, poem, reco};
use crate::error::EnvError;
use crate::feedback::{FeedbackKind, FeedbackSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Bandit,
    Poem,
    RecoMovie,
    Optimization,
    Parking,
    Gridworld,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Bandit,
        Family::Poem,
        Family::RecoMovie,
        Family::Optimization,
        Family::Parking,
        Family::Gridworld,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Family::Bandit => "bandit",
            Family::Poem => "poem",
            Family::RecoMovie => "reco-movie",
            Family::Optimization => "optimization",
            Family::Parking => "parking",
            Family::Gridworld => "gridworld",
        }
    }

    pub fn info(self) -> &'static ProblemInfo {
        PROBLEMS.iter().find(|p| p.family == self).expect("every family has an entry")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Static properties of one problem set.
#[derive(Debug)]
pub struct ProblemInfo {
    pub family: Family,
    pub horizon: u32,
    pub stateful: bool,
    pub instructions: &'static [InstructionType],
    pub feedback: &'static [FeedbackKind],
}

use FeedbackKind::{Fn as FN, Fp as FP, Hn as HN, Hp as HP, R};
use InstructionType::{Basic as B, Complete as C, Practical as P};

const ALL_FEEDBACK: &[FeedbackKind] = &[R, HP, HN, FP, FN];

pub static PROBLEMS: [ProblemInfo; 6] = [
    ProblemInfo { family: Family::Bandit, horizon: 1, stateful: false, instructions: &[B, P, C], feedback: ALL_FEEDBACK },
    ProblemInfo { family: Family::Poem, horizon: 1, stateful: false, instructions: &[B], feedback: ALL_FEEDBACK },
    ProblemInfo { family: Family::RecoMovie, horizon: 1, stateful: false, instructions: &[B], feedback: ALL_FEEDBACK },
    ProblemInfo { family: Family::Optimization, horizon: 10, stateful: true, instructions: &[B], feedback: ALL_FEEDBACK },
    ProblemInfo { family: Family::Parking, horizon: 100, stateful: true, instructions: &[B], feedback: &[R, HP, HN] },
    ProblemInfo { family: Family::Gridworld, horizon: 20, stateful: true, instructions: &[B, P, C], feedback: ALL_FEEDBACK },
];

/// A parsed environment id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvId {
    pub family: Family,
    pub variant: Option<String>,
}

impl EnvId {
    pub fn parse(id: &str) -> Result<Self, EnvError> {
        let id = id.trim();
        let (family, variant) = match id.split_once(':') {
            Some((f, v)) => (f, Some(v.trim().to_owned())),
            None => (id, None),
        };
        let family = Family::ALL
            .into_iter()
            .find(|f| f.id() == family)
            .ok_or_else(|| EnvError::UnknownEnv(id.to_owned()))?;
        Ok(Self { family, variant: variant.filter(|v| !v.is_empty()) })
    }
}

/// Shape of an environment's action space, for scripted agents.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(Vec<String>),
    Continuous(Vec<(f64, f64)>),
    Text,
}

pub fn action_space(env_id: &str) -> Result<ActionSpace, EnvError> {
    let id = EnvId::parse(env_id)?;
    let variant = id.variant.as_deref();
    Ok(match id.family {
        Family::Bandit => ActionSpace::Discrete(bandit::arm_names(variant)?),
        Family::Gridworld => {
            gridworld::GridParams::parse(variant)?;
            ActionSpace::Discrete(gridworld::Direction::ALL.iter().map(|d| d.to_string()).collect())
        }
        Family::Optimization => {
            let f = optimization::TestFunction::parse(variant)?;
            ActionSpace::Continuous(vec![f.domain(); f.dim()])
        }
        Family::Parking => ActionSpace::Continuous(vec![
            (-1.0, 1.0),
            (-parking::DynamicsParams::default().max_steer, parking::DynamicsParams::default().max_steer),
        ]),
        Family::Poem | Family::RecoMovie => ActionSpace::Text,
    })
}

/// Registered ids, one per bundled problem.
pub fn registered_ids() -> Vec<String> {
    let mut ids = Vec::new();
    ids.extend(bandit::CATALOGUE.iter().map(|b| format!("bandit:{}", b.name)));
    ids.extend(["poem:haiku", "poem:tanka"].map(String::from));
    ids.push("reco-movie".into());
    ids.extend(optimization::TestFunction::ALL.iter().map(|f| format!("optimization:{}", f.name())));
    ids.push("parking".into());
    ids.push("gridworld".into());
    ids
}

/// Build an environment. The handle must be reset before stepping.
pub fn make(config: EnvConfig) -> Result<Env, EnvError> {
    let id = EnvId::parse(&config.env_id)?;
    let info = id.family.info();
    if !info.instructions.contains(&config.instruction_type) {
        return Err(EnvError::UnsupportedInstructionType {
            env: config.env_id.clone(),
            kind: config.instruction_type,
        });
    }
    if let FeedbackSelector::Subset(set) = &config.feedback {
        let unsupported: Vec<_> = set.iter().copied().filter(|k| !info.feedback.contains(k)).collect();
        if !unsupported.is_empty() {
            return Err(EnvError::UnsupportedFeedbackType { env: config.env_id.clone(), kinds: unsupported });
        }
    }
    if config.horizon_override == Some(0) {
        return Err(EnvError::InvalidConfig("horizon must be positive".into()));
    }
    let variant = id.variant.as_deref();
    let problem: Box<dyn crate::env::Problem> = match id.family {
        Family::Bandit => Box::new(bandit::BanditProblem::from_variant(variant)?),
        Family::Poem => Box::new(poem::PoemProblem::from_variant(variant)?),
        Family::RecoMovie => Box::new(reco::RecoProblem::from_variant(variant)?),
        Family::Optimization => Box::new(optimization::OptimizationProblem::from_variant(variant)?),
        Family::Parking => Box::new(parking::ParkingProblem::from_variant(variant)?),
        Family::Gridworld => Box::new(gridworld::GridworldProblem::from_variant(variant)?),
    };
    Ok(Env::new(config, info, problem, assets::templates()?))
}

//! Verbalized multi-armed bandits.
//!
//! Eight named problems. Arms keep stable colour names; each reset shuffles
//! the order they are listed in, so a numeric answer refers to the listing.

use std::any::Any;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::env::{Ctx, EpisodeTranscript, InstructionType, Problem, ResetOutput, Transition};
use crate::error::EnvError;
use crate::feedback::{FeedbackKind, FeedbackSet};
use crate::text::{join_list, numbers, reward as fmt_reward};

pub const ARM_NAMES: [&str; 10] = ["red", "orange", "yellow", "green", "blue", "purple", "pink", "brown", "gray", "white"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmSpec {
    Bernoulli(f64),
    /// A zero standard deviation gives a deterministic payout.
    Gaussian { mean: f64, sd: f64 },
}

impl ArmSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            ArmSpec::Bernoulli(p) => p,
            ArmSpec::Gaussian { mean, .. } => mean,
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            ArmSpec::Bernoulli(p) => (p * (1.0 - p)).sqrt(),
            ArmSpec::Gaussian { sd, .. } => sd,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ArmSpec::Bernoulli(p) => {
                if rng.random_bool(p) {
                    1.0
                } else {
                    0.0
                }
            }
            ArmSpec::Gaussian { mean, sd: 0.0 } => mean,
            ArmSpec::Gaussian { mean, sd } => Normal::new(mean, sd).expect("finite sd").sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BanditKind {
    Bernoulli,
    Gaussian,
}

/// How an entry's arm parameters come about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmParams {
    Fixed(&'static [f64]),
    /// p ~ U[0,1], drawn once per session.
    UniformPerSession,
    /// p ~ U[0,1], redrawn on every reset.
    UniformPerReset,
    /// means ~ N(0,1), unit variance, drawn once per session.
    NormalMeans,
    /// deterministic payouts ~ U[0,1], drawn once per session.
    UniformDeterministic,
}

#[derive(Debug)]
pub struct CatalogueEntry {
    pub name: &'static str,
    pub arms: usize,
    pub kind: BanditKind,
    pub params: ArmParams,
}

pub static CATALOGUE: [CatalogueEntry; 8] = [
    CatalogueEntry { name: "TwoArmedDeterministic", arms: 2, kind: BanditKind::Bernoulli, params: ArmParams::Fixed(&[1.0, 0.0]) },
    CatalogueEntry { name: "TwoArmedHighLow", arms: 2, kind: BanditKind::Bernoulli, params: ArmParams::Fixed(&[0.8, 0.2]) },
    CatalogueEntry { name: "TwoArmedHighHigh", arms: 2, kind: BanditKind::Bernoulli, params: ArmParams::Fixed(&[0.9, 0.8]) },
    CatalogueEntry { name: "TwoArmedLowLow", arms: 2, kind: BanditKind::Bernoulli, params: ArmParams::Fixed(&[0.2, 0.1]) },
    CatalogueEntry { name: "TenArmedRandomFixed", arms: 10, kind: BanditKind::Bernoulli, params: ArmParams::UniformPerSession },
    CatalogueEntry { name: "TenArmedRandomRandom", arms: 10, kind: BanditKind::Bernoulli, params: ArmParams::UniformPerReset },
    CatalogueEntry { name: "TenArmedGaussian", arms: 10, kind: BanditKind::Gaussian, params: ArmParams::NormalMeans },
    CatalogueEntry { name: "TenArmedUniform", arms: 10, kind: BanditKind::Gaussian, params: ArmParams::UniformDeterministic },
];

pub const DEFAULT_PROBLEM: &str = "TwoArmedHighLow";

pub fn lookup(variant: Option<&str>) -> Result<&'static CatalogueEntry, EnvError> {
    let name = variant.unwrap_or(DEFAULT_PROBLEM);
    CATALOGUE
        .iter()
        .find(|e| e.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| EnvError::UnknownEnv(format!("bandit:{name}")))
}

pub fn arm_names(variant: Option<&str>) -> Result<Vec<String>, EnvError> {
    Ok(ARM_NAMES[..lookup(variant)?.arms].iter().map(|s| s.to_string()).collect())
}

/// A materialized problem: concrete arm distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditSpec {
    pub name: &'static str,
    pub kind: BanditKind,
    pub arms: Vec<ArmSpec>,
}

impl BanditSpec {
    pub fn draw<R: Rng + ?Sized>(entry: &'static CatalogueEntry, rng: &mut R) -> Self {
        let arms = match entry.params {
            ArmParams::Fixed(ps) => ps.iter().map(|&p| ArmSpec::Bernoulli(p)).collect(),
            ArmParams::UniformPerSession | ArmParams::UniformPerReset => {
                (0..entry.arms).map(|_| ArmSpec::Bernoulli(rng.random::<f64>())).collect()
            }
            ArmParams::NormalMeans => {
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                (0..entry.arms).map(|_| ArmSpec::Gaussian { mean: normal.sample(rng), sd: 1.0 }).collect()
            }
            ArmParams::UniformDeterministic => {
                (0..entry.arms).map(|_| ArmSpec::Gaussian { mean: rng.random::<f64>(), sd: 0.0 }).collect()
            }
        };
        Self { name: entry.name, kind: entry.kind, arms }
    }

    /// Arm with the highest mean, lowest index on ties.
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for (i, arm) in self.arms.iter().enumerate() {
            if arm.mean() > self.arms[best].mean() {
                best = i;
            }
        }
        best
    }

    pub fn best_mean(&self) -> f64 {
        self.arms[self.best_arm()].mean()
    }

    pub fn worst_mean(&self) -> f64 {
        self.arms.iter().map(ArmSpec::mean).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BanditState {
    /// `permutation[k]` is the arm listed at position `k`.
    pub permutation: Vec<usize>,
    pub pull_counts: Vec<u64>,
    pub reward_sums: Vec<f64>,
    pub best_arm: usize,
    pub round: u64,
}

#[derive(Debug, Clone)]
pub struct BanditProblem {
    entry: &'static CatalogueEntry,
    spec: Option<BanditSpec>,
    state: BanditState,
}

impl BanditProblem {
    pub fn from_variant(variant: Option<&str>) -> Result<Self, EnvError> {
        Ok(Self { entry: lookup(variant)?, spec: None, state: BanditState::default() })
    }

    pub fn spec(&self) -> Option<&BanditSpec> {
        self.spec.as_ref()
    }

    pub fn state(&self) -> &BanditState {
        &self.state
    }

    pub fn arm_name(&self, arm: usize) -> &'static str {
        ARM_NAMES[arm]
    }

    /// Resolve an answer to an arm index: an arm name, or a 1-based position
    /// in the current listing.
    pub fn parse_arm(&self, text: &str) -> Option<usize> {
        let n = self.entry.arms;
        let lowered = text.to_lowercase();
        let named: Vec<usize> = (0..n)
            .filter(|&a| lowered.split(|c: char| !c.is_alphanumeric()).any(|w| w == ARM_NAMES[a]))
            .collect();
        match named[..] {
            [one] => return Some(one),
            [] => {}
            _ => return None,
        }
        let position = *numbers(text).first()?;
        if position.fract() != 0.0 || position < 1.0 || position > n as f64 {
            return None;
        }
        self.state.permutation.get(position as usize - 1).copied()
    }

    fn listed_arms(&self) -> Vec<&'static str> {
        self.state.permutation.iter().map(|&a| ARM_NAMES[a]).collect()
    }

    /// Arm to warn against: the empirically worst sub-optimal arm pulled so
    /// far, or the truly worst sub-optimal arm before any such pull.
    fn arm_to_avoid(&self, spec: &BanditSpec) -> Option<usize> {
        let best = spec.best_mean();
        let suboptimal: Vec<usize> = (0..spec.arms.len()).filter(|&a| spec.arms[a].mean() < best).collect();
        let pulled = suboptimal
            .iter()
            .copied()
            .filter(|&a| self.state.pull_counts[a] > 0)
            .min_by(|&a, &b| {
                let ma = self.state.reward_sums[a] / self.state.pull_counts[a] as f64;
                let mb = self.state.reward_sums[b] / self.state.pull_counts[b] as f64;
                ma.total_cmp(&mb)
            });
        pulled.or_else(|| suboptimal.into_iter().min_by(|&a, &b| spec.arms[a].mean().total_cmp(&spec.arms[b].mean())))
    }
}

impl Problem for BanditProblem {
    fn reset(&mut self, ctx: &mut Ctx<'_>, fresh_session: bool) -> Result<ResetOutput, EnvError> {
        let redraw = fresh_session || self.spec.is_none() || self.entry.params == ArmParams::UniformPerReset;
        if redraw {
            let spec = BanditSpec::draw(self.entry, ctx.latent);
            let n = spec.arms.len();
            self.state.pull_counts = vec![0; n];
            self.state.reward_sums = vec![0.0; n];
            self.state.best_arm = spec.best_arm();
            self.spec = Some(spec);
        }
        if fresh_session {
            self.state.round = 0;
        }
        let mut permutation: Vec<usize> = (0..self.entry.arms).collect();
        permutation.shuffle(ctx.latent);
        self.state.permutation = permutation;
        self.state.round += 1;

        let arms = join_list(&self.listed_arms());
        let problem = self.entry.name.to_owned();
        let instruction = match ctx.instruction_type {
            InstructionType::Complete => ctx.instruction(
                "complete",
                &[("problem", problem), ("arms", arms), ("best", ARM_NAMES[self.state.best_arm].to_owned())],
            )?,
            _ => ctx.instruction("basic", &[("problem", problem), ("arms", arms)])?,
        };
        let observation = format!("Round {}: choose an arm to pull.", self.state.round);
        Ok(ResetOutput { observation, instruction })
    }

    fn step(&mut self, ctx: &mut Ctx<'_>, action: &str) -> Result<Transition, EnvError> {
        use FeedbackKind::*;
        let spec = self.spec.clone().expect("bandit used before reset");
        let mut feedback = FeedbackSet::new();
        let best = spec.best_arm();
        let best_name = ARM_NAMES[best].to_owned();

        let (reward, chosen_mean, pulled) = match self.parse_arm(action) {
            None => {
                ctx.emit(&mut feedback, Hn, "malformed", &[("arms", join_list(&self.listed_arms()))])?;
                (0.0, spec.worst_mean(), None)
            }
            Some(arm) => {
                let reward = spec.arms[arm].sample(ctx.latent);
                self.state.pull_counts[arm] += 1;
                self.state.reward_sums[arm] += reward;
                let name = ARM_NAMES[arm].to_owned();
                ctx.emit(&mut feedback, R, "reward", &[("arm", name.clone()), ("reward", fmt_reward(reward))])?;
                if spec.arms[arm].mean() >= spec.best_mean() {
                    ctx.emit(&mut feedback, Hp, "best_arm", &[("arm", name)])?;
                } else {
                    ctx.emit(&mut feedback, Hn, "suboptimal", &[("arm", name)])?;
                }
                (reward, spec.arms[arm].mean(), Some(arm))
            }
        };
        ctx.emit(&mut feedback, Fp, "best_arm", &[("arm", best_name)])?;
        if let Some(avoid) = self.arm_to_avoid(&spec) {
            ctx.emit(&mut feedback, Fn, "worst_arm", &[("arm", ARM_NAMES[avoid].to_owned())])?;
        }

        let gap = spec.best_mean() - chosen_mean;
        let info = [
            ("success", json!(pulled.is_some_and(|a| spec.arms[a].mean() >= spec.best_mean()))),
            ("arm", json!(pulled.map(|a| ARM_NAMES[a]))),
            ("chosen_mean", json!(chosen_mean)),
            ("best_mean", json!(spec.best_mean())),
            ("gap", json!(gap)),
            ("malformed_action", json!(pulled.is_none())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        Ok(Transition {
            observation: format!("Round {} is over.", self.state.round),
            reward,
            terminated: true,
            feedback,
            info,
        })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Cumulative pseudo-regret: the sum over pulls of (best mean - chosen mean).
pub fn regret(transcripts: &[EpisodeTranscript]) -> f64 {
    transcripts
        .iter()
        .flat_map(|t| t.steps.iter())
        .filter_map(|s| s.outcome.info_f64("gap"))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn catalogue_shape() {
        assert_eq!(CATALOGUE.len(), 8);
        for e in &CATALOGUE {
            assert!(e.arms == 2 || e.arms == 10);
            let spec = BanditSpec::draw(e, &mut ChaCha8Rng::seed_from_u64(1));
            assert_eq!(spec.arms.len(), e.arms);
            for arm in &spec.arms {
                match arm {
                    ArmSpec::Bernoulli(p) => assert!((0.0..=1.0).contains(p)),
                    ArmSpec::Gaussian { mean, sd } => assert!(mean.is_finite() && *sd >= 0.0),
                }
            }
        }
    }

    #[test]
    fn degenerate_arms() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(ArmSpec::Bernoulli(1.0).sample(&mut rng), 1.0);
            assert_eq!(ArmSpec::Bernoulli(0.0).sample(&mut rng), 0.0);
            assert_eq!(ArmSpec::Gaussian { mean: 0.3, sd: 0.0 }.sample(&mut rng), 0.3);
        }
    }

    #[test]
    fn best_arm_ties_lowest() {
        let spec = BanditSpec {
            name: "t",
            kind: BanditKind::Bernoulli,
            arms: vec![ArmSpec::Bernoulli(0.2), ArmSpec::Bernoulli(0.7), ArmSpec::Bernoulli(0.7)],
        };
        assert_eq!(spec.best_arm(), 1);
    }

    #[test]
    fn arm_parsing() {
        let mut p = BanditProblem::from_variant(Some("TenArmedGaussian")).unwrap();
        p.state.permutation = (0..10).rev().collect();
        assert_eq!(p.parse_arm("blue"), Some(4));
        assert_eq!(p.parse_arm("Pull the Blue arm."), Some(4));
        assert_eq!(p.parse_arm("1"), Some(9));
        assert_eq!(p.parse_arm("arm 10"), Some(0));
        assert_eq!(p.parse_arm("arm 99"), None);
        assert_eq!(p.parse_arm("red or blue"), None);
        assert_eq!(p.parse_arm("2.5"), None);
        assert_eq!(p.parse_arm("nothing"), None);
    }

    #[test]
    fn unknown_problem() {
        assert!(matches!(BanditProblem::from_variant(Some("ThreeArmed")), Err(EnvError::UnknownEnv(_))));
        assert!(BanditProblem::from_variant(Some("tenarmedgaussian")).is_ok());
    }
}

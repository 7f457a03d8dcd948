//! Evaluation runs: a scripted or external agent against many seeds.
//!
//! Each seed is one session of `rounds` episodes on a fresh handle. The agent
//! sees only agent views; rewards and info feed the report alone.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::agents::{build_agent_with_deadline, AgentError, DEFAULT_DEADLINE};
use crate::env::{EnvConfig, EpisodeTranscript};
use crate::envs::bandit;
use crate::exec::Execution;
use crate::registry::{make, EnvId, Family};

pub const DEFAULT_BANDIT_ROUNDS: u32 = 100;

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Template for every session; the seed is replaced per session.
    pub env: EnvConfig,
    pub agent: String,
    pub episodes: u32,
    pub seed_base: u64,
    /// Episodes per session; defaults to 100 for bandits and 1 otherwise.
    pub rounds: Option<u32>,
    pub execution: Execution,
    pub deadline: Duration,
}

impl EvalConfig {
    pub fn new(env: EnvConfig, agent: impl Into<String>, episodes: u32, seed_base: u64) -> Self {
        Self {
            env,
            agent: agent.into(),
            episodes,
            seed_base,
            rounds: None,
            execution: Execution::default(),
            deadline: DEFAULT_DEADLINE,
        }
    }

    pub fn rounds(mut self, rounds: u32) -> Self {
        self.rounds = Some(rounds);
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..u64::from(self.episodes)).map(|i| self.seed_base + i).collect()
    }

    pub fn session_rounds(&self) -> Result<u32, EvalError> {
        let family = EnvId::parse(&self.env.env_id)?.family;
        Ok(self.rounds.unwrap_or(if family == Family::Bandit { DEFAULT_BANDIT_ROUNDS } else { 1 }))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] crate::error::EnvError),
    #[error("session rounds must be positive")]
    NoRounds,
}

/// One session's transcripts, one per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub seed: u64,
    pub episodes: Vec<EpisodeTranscript>,
}

/// Run one session: reset with the seed, then `rounds - 1` continuation resets.
pub fn run_session(config: &EvalConfig, seed: u64) -> Result<Session, EvalError> {
    let rounds = config.session_rounds()?;
    if rounds == 0 {
        return Err(EvalError::NoRounds);
    }
    let mut env = make(config.env.clone().seed(seed))?;
    let mut agent = build_agent_with_deadline(&config.agent, &config.env.env_id, seed, config.deadline)?;
    let mut episodes = Vec::with_capacity(rounds as usize);
    for round in 0..rounds {
        let reset_seed = (round == 0).then_some(seed);
        let initial = env.reset(reset_seed)?;
        let mut transcript = EpisodeTranscript::new(env.config().clone(), reset_seed, initial);
        let mut view = transcript.initial.agent_view();
        loop {
            let action = agent.act(&view)?;
            let outcome = env.step(&action)?;
            view = outcome.bundle.agent_view();
            agent.observe(&view);
            let done = outcome.done();
            transcript.push(action, outcome);
            if done {
                break;
            }
        }
        episodes.push(transcript);
    }
    Ok(Session { seed, episodes })
}

pub fn run_sessions(config: &EvalConfig) -> Result<Vec<Session>, EvalError> {
    config.execution.map(config.seeds(), |seed| run_session(config, seed)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub seed: u64,
    pub rounds: usize,
    pub steps: usize,
    pub cumulative_reward: f64,
    /// Success of the final episode.
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<f64>,
    pub digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env_id: String,
    pub agent: String,
    pub n_episodes: usize,
    pub seeds: Vec<u64>,
    pub success_rate: f64,
    pub mean_cumulative_reward: f64,
    /// Mean total regret per session (bandits only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_regret: Option<f64>,
    /// Mean regret per round (bandits only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_regret_per_round: Option<f64>,
    pub sessions: Vec<SessionSummary>,
}

impl EvalReport {
    /// Summarise stored sessions. A pure function of its inputs.
    pub fn from_sessions(env_id: &str, agent: &str, sessions: &[Session]) -> Self {
        let is_bandit = EnvId::parse(env_id).is_ok_and(|id| id.family == Family::Bandit);
        let summaries: Vec<SessionSummary> = sessions
            .iter()
            .map(|s| SessionSummary {
                seed: s.seed,
                rounds: s.episodes.len(),
                steps: s.episodes.iter().map(|e| e.steps.len()).sum(),
                cumulative_reward: s.episodes.iter().map(|e| e.cumulative_reward).sum(),
                success: s.episodes.last().is_some_and(EpisodeTranscript::success),
                regret: is_bandit.then(|| bandit::regret(&s.episodes)),
                digests: s.episodes.iter().map(EpisodeTranscript::digest).collect(),
            })
            .collect();
        let n = summaries.len();
        let mean = |f: &dyn Fn(&SessionSummary) -> f64| {
            if n == 0 {
                0.0
            } else {
                summaries.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let success_rate = mean(&|s| f64::from(u8::from(s.success)));
        let mean_cumulative_reward = mean(&|s| s.cumulative_reward);
        let (mean_regret, mean_regret_per_round) = if is_bandit {
            (
                Some(mean(&|s| s.regret.unwrap_or(0.0))),
                Some(mean(&|s| s.regret.unwrap_or(0.0) / s.rounds.max(1) as f64)),
            )
        } else {
            (None, None)
        };
        Self {
            env_id: env_id.to_owned(),
            agent: agent.to_owned(),
            n_episodes: n,
            seeds: sessions.iter().map(|s| s.seed).collect(),
            success_rate,
            mean_cumulative_reward,
            mean_regret,
            mean_regret_per_round,
            sessions: summaries,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

pub fn evaluate(config: &EvalConfig) -> Result<(EvalReport, Vec<Session>), EvalError> {
    let sessions = run_sessions(config)?;
    Ok((EvalReport::from_sessions(&config.env.env_id, &config.agent, &sessions), sessions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn garbage_never_writes_a_haiku() {
        let config = EvalConfig::new(EnvConfig::new("poem:haiku"), "constant", 10, 0);
        let (report, _) = evaluate(&config).unwrap();
        assert_eq!(report.success_rate, 0.0);
        assert_eq!(report.n_episodes, 10);
    }

    #[test]
    fn report_is_pure() {
        let config = EvalConfig::new(EnvConfig::new("bandit:TwoArmedHighLow"), "epsilon-greedy", 4, 3).rounds(20);
        let (report, sessions) = evaluate(&config).unwrap();
        assert_eq!(EvalReport::from_sessions("bandit:TwoArmedHighLow", "epsilon-greedy", &sessions), report);
        assert_eq!(report.sessions[0].rounds, 20);
        assert!(report.mean_regret.is_some());
    }
}

//! The make/reset/step contract shared by every environment.
//!
//! An [`Env`] wraps one [`Problem`] (the environment-specific dynamics and
//! teacher) and owns everything common: seeding, horizon bookkeeping,
//! feedback gating, practical-instruction logs and the reward channel split.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::EnvError;
use crate::feedback::{effective_feedback_types, FeedbackKind, FeedbackSelector, FeedbackSet};
use crate::registry::ProblemInfo;
use crate::templates::{Slots, TemplateBank, TemplateKind};

/// Maximum number of entries kept in a practical instruction's feedback log.
pub const PRACTICAL_LOG_CAP: usize = 100;

const LATENT_STREAM: u64 = 1;
const TEXT_STREAM: u64 = 2;
const MIX_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum InstructionType {
    /// Goal, action semantics and response syntax.
    #[default]
    Basic,
    /// Basic plus a running log of the feedback received so far.
    Practical,
    /// Enough information to act optimally.
    Complete,
}

impl InstructionType {
    pub fn code(self) -> &'static str {
        match self {
            InstructionType::Basic => "b",
            InstructionType::Practical => "p",
            InstructionType::Complete => "c",
        }
    }
}

impl fmt::Display for InstructionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for InstructionType {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "b" | "basic" => Ok(InstructionType::Basic),
            "p" | "practical" => Ok(InstructionType::Practical),
            "c" | "complete" => Ok(InstructionType::Complete),
            other => Err(EnvError::InvalidConfig(format!("unknown instruction type `{other}`"))),
        }
    }
}

impl Serialize for InstructionType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for InstructionType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub env_id: String,
    #[serde(default)]
    pub instruction_type: InstructionType,
    #[serde(default)]
    pub feedback: FeedbackSelector,
    #[serde(default = "yes")]
    pub randomize_text: bool,
    #[serde(default = "yes")]
    pub randomize_latent: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub horizon_override: Option<u32>,
}

impl EnvConfig {
    pub fn new(env_id: impl Into<String>) -> Self {
        Self {
            env_id: env_id.into(),
            instruction_type: InstructionType::Basic,
            feedback: FeedbackSelector::All,
            randomize_text: true,
            randomize_latent: true,
            seed: 0,
            horizon_override: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn instruction(mut self, kind: InstructionType) -> Self {
        self.instruction_type = kind;
        self
    }

    pub fn feedback(mut self, selector: FeedbackSelector) -> Self {
        self.feedback = selector;
        self
    }

    pub fn randomize_text(mut self, on: bool) -> Self {
        self.randomize_text = on;
        self
    }

    pub fn randomize_latent(mut self, on: bool) -> Self {
        self.randomize_latent = on;
        self
    }

    pub fn horizon(mut self, horizon: u32) -> Self {
        self.horizon_override = Some(horizon);
        self
    }
}

/// What the agent sees after `reset` or `step`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationBundle {
    pub observation: String,
    pub instruction: String,
    pub feedback: FeedbackSet,
}

impl ObservationBundle {
    pub fn feedback_text(&self) -> String {
        self.feedback.render()
    }

    /// The agent-channel projection: text only.
    pub fn agent_view(&self) -> AgentView {
        AgentView {
            observation: self.observation.clone(),
            instruction: self.instruction.clone(),
            feedback: self.feedback_text(),
        }
    }
}

/// Agent-visible text of one bundle. This is the only shape that crosses the
/// agent channel; it has no room for rewards or info.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgentView {
    pub observation: String,
    pub instruction: String,
    pub feedback: String,
}

pub type Info = BTreeMap<String, serde_json::Value>;

/// Result of one `step`. `reward` and `info` belong to the evaluation channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub bundle: ObservationBundle,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: Info,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }

    pub fn success(&self) -> Option<bool> {
        self.info.get("success").and_then(serde_json::Value::as_bool)
    }

    pub fn info_f64(&self, key: &str) -> Option<f64> {
        self.info.get(key).and_then(serde_json::Value::as_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub action: String,
    pub outcome: StepOutcome,
}

/// Full record of one episode, including the evaluation channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTranscript {
    pub config: EnvConfig,
    /// Seed passed to `reset`, if any.
    pub reset_seed: Option<u64>,
    pub initial: ObservationBundle,
    pub steps: Vec<TranscriptStep>,
    pub cumulative_reward: f64,
}

impl EpisodeTranscript {
    pub fn new(config: EnvConfig, reset_seed: Option<u64>, initial: ObservationBundle) -> Self {
        Self { config, reset_seed, initial, steps: Vec::new(), cumulative_reward: 0.0 }
    }

    pub fn push(&mut self, action: impl Into<String>, outcome: StepOutcome) {
        self.cumulative_reward += outcome.reward;
        self.steps.push(TranscriptStep { action: action.into(), outcome });
    }

    pub fn last(&self) -> Option<&StepOutcome> {
        self.steps.last().map(|s| &s.outcome)
    }

    pub fn success(&self) -> bool {
        self.last().and_then(StepOutcome::success).unwrap_or(false)
    }

    /// Agent-visible text of every bundle, in order.
    pub fn agent_views(&self) -> Vec<AgentView> {
        std::iter::once(self.initial.agent_view())
            .chain(self.steps.iter().map(|s| s.outcome.bundle.agent_view()))
            .collect()
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("transcript serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Output of [`Problem::reset`].
#[derive(Debug, Clone)]
pub struct ResetOutput {
    pub observation: String,
    /// Basic or complete instruction, depending on the context.
    pub instruction: String,
}

/// Output of [`Problem::step`].
#[derive(Debug, Clone, Default)]
pub struct Transition {
    pub observation: String,
    pub reward: f64,
    pub terminated: bool,
    /// Candidate feedback for every kind the problem supports. The handle
    /// filters it down to the effective set.
    pub feedback: FeedbackSet,
    pub info: Info,
}

/// Per-call context handed to a [`Problem`].
pub struct Ctx<'a> {
    /// Latent-state randomness (instances, scenes, sampled rewards).
    pub latent: &'a mut ChaCha8Rng,
    pub instruction_type: InstructionType,
    text_rng: &'a mut ChaCha8Rng,
    bank: &'a TemplateBank,
    family: &'static str,
    randomize_text: bool,
}

impl Ctx<'_> {
    fn render(&mut self, kind: TemplateKind, event: &str, slots: &[(&str, String)]) -> Result<String, EnvError> {
        let slots: Slots = slots.iter().map(|(k, v)| ((*k).to_owned(), v.clone())).collect();
        Ok(self.bank.render(self.family, kind, event, &slots, self.text_rng, self.randomize_text)?)
    }

    pub fn instruction(&mut self, event: &str, slots: &[(&str, String)]) -> Result<String, EnvError> {
        self.render(TemplateKind::Instruction, event, slots)
    }

    pub fn feedback(&mut self, kind: FeedbackKind, event: &str, slots: &[(&str, String)]) -> Result<String, EnvError> {
        self.render(TemplateKind::Feedback(kind), event, slots)
    }

    /// Render and push into `set` in one go.
    pub fn emit(
        &mut self,
        set: &mut FeedbackSet,
        kind: FeedbackKind,
        event: &str,
        slots: &[(&str, String)],
    ) -> Result<(), EnvError> {
        let text = self.feedback(kind, event, slots)?;
        set.push(kind, text);
        Ok(())
    }
}

/// Environment-specific dynamics and teacher.
pub trait Problem: Send + Any {
    /// Start an episode. `fresh_session` is true when the handle was reseeded;
    /// otherwise this is the next episode of an ongoing session.
    fn reset(&mut self, ctx: &mut Ctx<'_>, fresh_session: bool) -> Result<ResetOutput, EnvError>;

    /// Apply one action. Unparseable actions still produce a transition,
    /// explained through `hn` feedback.
    fn step(&mut self, ctx: &mut Ctx<'_>, action: &str) -> Result<Transition, EnvError>;

    fn as_any(&self) -> &dyn Any;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Unreset,
    Active,
    Done,
}

/// A live environment. Single-threaded; move it between threads freely.
pub struct Env {
    config: EnvConfig,
    info: &'static ProblemInfo,
    horizon: u32,
    problem: Box<dyn Problem>,
    bank: &'static TemplateBank,
    latent_rng: ChaCha8Rng,
    text_rng: ChaCha8Rng,
    mix_rng: ChaCha8Rng,
    phase: Phase,
    steps: u32,
    base_instruction: String,
    practical_header: String,
    practical_log: Vec<String>,
    effective: Option<BTreeSet<FeedbackKind>>,
}

impl fmt::Debug for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Env")
            .field("config", &self.config)
            .field("horizon", &self.horizon)
            .field("steps", &self.steps)
            .field("phase", &self.phase)
            .finish_non_exhaustive()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Env {
    pub(crate) fn new(
        config: EnvConfig,
        info: &'static ProblemInfo,
        problem: Box<dyn Problem>,
        bank: &'static TemplateBank,
    ) -> Self {
        let horizon = config.horizon_override.unwrap_or(info.horizon);
        let seed = config.seed;
        Self {
            config,
            info,
            horizon,
            problem,
            bank,
            latent_rng: stream_rng(seed, LATENT_STREAM),
            text_rng: stream_rng(seed, TEXT_STREAM),
            mix_rng: stream_rng(seed, MIX_STREAM),
            phase: Phase::Unreset,
            steps: 0,
            base_instruction: String::new(),
            practical_header: String::new(),
            practical_log: Vec::new(),
            effective: None,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn info(&self) -> &'static ProblemInfo {
        self.info
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn supported_feedback(&self) -> BTreeSet<FeedbackKind> {
        self.info.feedback.iter().copied().collect()
    }

    /// Feedback kinds the last step was allowed to emit.
    pub fn effective_feedback(&self) -> Option<&BTreeSet<FeedbackKind>> {
        self.effective.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// Evaluation-side access to the concrete problem.
    pub fn problem<T: Problem>(&self) -> Option<&T> {
        self.problem.as_any().downcast_ref::<T>()
    }

    /// Start an episode.
    ///
    /// With a seed, every random stream is reseeded and a new session begins.
    /// Without one, the first call seeds from the config and later calls start
    /// the next episode of the current session.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<ObservationBundle, EnvError> {
        let fresh = seed.is_some() || self.phase == Phase::Unreset;
        if fresh {
            let seed = seed.unwrap_or(self.config.seed);
            let latent_seed = if self.config.randomize_latent { seed } else { 0 };
            self.latent_rng = stream_rng(latent_seed, LATENT_STREAM);
            self.text_rng = stream_rng(seed, TEXT_STREAM);
            self.mix_rng = stream_rng(seed, MIX_STREAM);
            self.practical_log.clear();
        }
        let mut ctx = Ctx {
            latent: &mut self.latent_rng,
            instruction_type: self.config.instruction_type,
            text_rng: &mut self.text_rng,
            bank: self.bank,
            family: self.info.family.id(),
            randomize_text: self.config.randomize_text,
        };
        let out = self.problem.reset(&mut ctx, fresh)?;
        if self.config.instruction_type == InstructionType::Practical && fresh {
            let slots = Slots::new();
            self.practical_header = self.bank.render(
                "common",
                TemplateKind::Instruction,
                "practical_header",
                &slots,
                &mut self.text_rng,
                self.config.randomize_text,
            )?;
        }
        self.base_instruction = out.instruction;
        self.steps = 0;
        self.phase = Phase::Active;
        Ok(ObservationBundle {
            observation: out.observation,
            instruction: self.instruction_text(),
            feedback: FeedbackSet::new(),
        })
    }

    pub fn step(&mut self, action: &str) -> Result<StepOutcome, EnvError> {
        match self.phase {
            Phase::Unreset => return Err(EnvError::NotReset),
            Phase::Done => return Err(EnvError::EpisodeOver),
            Phase::Active => {}
        }
        let supported = self.supported_feedback();
        let effective = effective_feedback_types(&self.config.feedback, &supported, &mut self.mix_rng);
        let mut ctx = Ctx {
            latent: &mut self.latent_rng,
            instruction_type: self.config.instruction_type,
            text_rng: &mut self.text_rng,
            bank: self.bank,
            family: self.info.family.id(),
            randomize_text: self.config.randomize_text,
        };
        let mut t = self.problem.step(&mut ctx, action)?;
        t.feedback.retain(&effective);
        self.effective = Some(effective);
        self.steps += 1;
        let truncated = !t.terminated && self.steps >= self.horizon;
        if t.terminated || truncated {
            self.phase = Phase::Done;
        }
        if self.config.instruction_type == InstructionType::Practical && !t.feedback.is_empty() {
            let action_line = action.trim().replace('\n', " / ");
            let feedback_line = t.feedback.iter().map(|(_, m)| m).collect::<Vec<_>>().join(" ");
            self.practical_log.push(format!("- {action_line}: {feedback_line}"));
            if self.practical_log.len() > PRACTICAL_LOG_CAP {
                self.practical_log.remove(0);
            }
        }
        Ok(StepOutcome {
            bundle: ObservationBundle {
                observation: t.observation,
                instruction: self.instruction_text(),
                feedback: t.feedback,
            },
            reward: t.reward,
            terminated: t.terminated,
            truncated,
            info: t.info,
        })
    }

    fn instruction_text(&self) -> String {
        if self.config.instruction_type != InstructionType::Practical || self.practical_log.is_empty() {
            return self.base_instruction.clone();
        }
        let mut text = self.base_instruction.clone();
        text.push('\n');
        text.push_str(&self.practical_header);
        for entry in &self.practical_log {
            text.push('\n');
            text.push_str(entry);
        }
        text
    }
}

/// Run one episode with a fixed action script, cycling the script if the
/// episode outlasts it.
pub fn run_script(env: &mut Env, seed: Option<u64>, actions: &[&str]) -> Result<EpisodeTranscript, EnvError> {
    assert!(!actions.is_empty(), "action script must not be empty");
    let initial = env.reset(seed)?;
    let mut transcript = EpisodeTranscript::new(env.config().clone(), seed, initial);
    for action in actions.iter().cycle() {
        let outcome = env.step(action)?;
        let done = outcome.done();
        transcript.push(*action, outcome);
        if done {
            break;
        }
    }
    Ok(transcript)
}

//! Scripted baseline agents and adapters for external ones.
//!
//! Agents only ever see [`AgentView`]s: observation, instruction and
//! feedback text. Scripted agents that react to feedback recover structured
//! values from it by slot extraction against the template bank.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::env::AgentView;
use crate::envs::gridworld::Direction;
use crate::error::EnvError;
use crate::feedback::FeedbackKind;
use crate::registry::{action_space, ActionSpace, EnvId, Family};
use crate::templates::{Slots, TemplateBank, TemplateKind};
use crate::text::{numbers, point};

pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(30);
pub const EPSILON: f64 = 0.1;
/// Sign-descent step as a fraction of the box width.
pub const SIGN_STEP_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{agent}` does not support {env}")]
    Unsupported { agent: String, env: String },
    #[error("agent did not answer within {0:?}")]
    AgentTimeout(Duration),
    #[error("agent connection failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("agent sent an unreadable reply: {0}")]
    BadReply(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub trait Agent: Send {
    /// Choose the next action.
    fn act(&mut self, view: &AgentView) -> Result<String, AgentError>;

    /// See the view produced by the last action, including terminal ones.
    fn observe(&mut self, _view: &AgentView) {}
}

/// Build an agent from its spec: `random`, `constant[:TEXT]`, `fp-follower`,
/// `epsilon-greedy`, `sign-descent`, `tcp://HOST:PORT` or `exec:COMMAND`.
pub fn build_agent(spec: &str, env_id: &str, seed: u64) -> Result<Box<dyn Agent>, AgentError> {
    build_agent_with_deadline(spec, env_id, seed, DEFAULT_DEADLINE)
}

pub fn build_agent_with_deadline(
    spec: &str,
    env_id: &str,
    seed: u64,
    deadline: Duration,
) -> Result<Box<dyn Agent>, AgentError> {
    let family = EnvId::parse(env_id)?.family;
    let space = action_space(env_id)?;
    let unsupported = || AgentError::Unsupported { agent: spec.to_owned(), env: env_id.to_owned() };
    if let Some(addr) = spec.strip_prefix("tcp://") {
        return Ok(Box::new(ExternalAgent::tcp(addr, deadline)?));
    }
    if let Some(cmd) = spec.strip_prefix("exec:") {
        return Ok(Box::new(ExternalAgent::exec(cmd, deadline)?));
    }
    if let Some(text) = spec.strip_prefix("constant:") {
        return Ok(Box::new(ConstantAgent(text.to_owned())));
    }
    Ok(match spec {
        "random" => Box::new(RandomAgent::new(space, seed)),
        "constant" => Box::new(ConstantAgent("???".into())),
        "fp-follower" => Box::new(FpFollower::new(family, space, seed)?),
        "epsilon-greedy" => match (family, space) {
            (Family::Bandit, ActionSpace::Discrete(arms)) => Box::new(EpsilonGreedy::new(arms, EPSILON, seed)?),
            _ => return Err(unsupported()),
        },
        "sign-descent" => match (family, space) {
            (Family::Optimization, ActionSpace::Continuous(bounds)) => Box::new(SignDescent::new(bounds)?),
            _ => return Err(unsupported()),
        },
        other => return Err(AgentError::UnknownAgent(other.to_owned())),
    })
}

/// Always answers the same text.
#[derive(Debug, Clone)]
pub struct ConstantAgent(pub String);

impl Agent for ConstantAgent {
    fn act(&mut self, _view: &AgentView) -> Result<String, AgentError> {
        Ok(self.0.clone())
    }
}

const FILLER_WORDS: [&str; 12] =
    ["quiet", "river", "light", "morning", "stone", "over", "the", "green", "hill", "falls", "slowly", "wind"];

/// Uniform over the action space; free text gets random filler words.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    space: ActionSpace,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(space: ActionSpace, seed: u64) -> Self {
        Self { space, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, _view: &AgentView) -> Result<String, AgentError> {
        Ok(match &self.space {
            ActionSpace::Discrete(options) => options.choose(&mut self.rng).cloned().unwrap_or_default(),
            ActionSpace::Continuous(bounds) => {
                let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| self.rng.random_range(lo..=hi)).collect();
                point(&x, 4)
            }
            ActionSpace::Text => {
                let lines = self.rng.random_range(1..=4);
                (0..lines)
                    .map(|_| {
                        let n = self.rng.random_range(1..=6);
                        (0..n).map(|_| *FILLER_WORDS.choose(&mut self.rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        })
    }
}

/// Slot values from every feedback line that matches a group of `kind`.
pub fn extract_feedback(bank: &TemplateBank, family: Family, kind: FeedbackKind, feedback: &str) -> Vec<(String, Slots)> {
    feedback
        .lines()
        .filter_map(|line| {
            bank.identify(line, family.id(), TemplateKind::Feedback(kind)).map(|(e, s)| (e.to_owned(), s))
        })
        .collect()
}

/// The last bracketed point in `text`, e.g. `x = [1.5, -2]`.
fn last_point(text: &str) -> Option<Vec<f64>> {
    let start = text.rfind('[')?;
    let end = start + text[start..].find(']')?;
    let xs = numbers(&text[start + 1..end]);
    (!xs.is_empty()).then_some(xs)
}

/// Follows future-positive advice. Before any advice arrives it falls back
/// to a fixed first move per environment.
pub struct FpFollower {
    family: Family,
    space: ActionSpace,
    bank: &'static TemplateBank,
    pending: Option<String>,
    descent: Option<SignDescent>,
    fallback: RandomAgent,
}

impl FpFollower {
    pub fn new(family: Family, space: ActionSpace, seed: u64) -> Result<Self, AgentError> {
        let descent = match (&family, &space) {
            (Family::Optimization, ActionSpace::Continuous(b)) => Some(SignDescent::new(b.clone())?),
            _ => None,
        };
        Ok(Self {
            family,
            fallback: RandomAgent::new(space.clone(), seed),
            space,
            bank: assets::templates()?,
            pending: None,
            descent,
        })
    }

    fn advice(&self, feedback: &str) -> Option<String> {
        let fp = extract_feedback(self.bank, self.family, FeedbackKind::Fp, feedback);
        let slot = |event: &str, name: &str| {
            fp.iter().find(|(e, _)| e == event).and_then(|(_, s)| s.get(name).cloned())
        };
        match self.family {
            Family::Gridworld => slot("direction", "direction"),
            Family::Bandit => slot("best_arm", "arm"),
            Family::RecoMovie => slot("try_title", "title"),
            _ => None,
        }
    }

    fn first_move(&mut self, view: &AgentView) -> Result<String, AgentError> {
        match self.family {
            Family::Gridworld => {
                let doors = view.observation.rsplit_once("doors to the").map(|(_, d)| d).unwrap_or("");
                let first = doors
                    .split(|c: char| !c.is_alphabetic())
                    .find_map(|w| Direction::ALL.into_iter().find(|d| d.name() == w));
                Ok(first.unwrap_or(Direction::North).name().to_owned())
            }
            Family::Bandit => match &self.space {
                ActionSpace::Discrete(arms) => Ok(arms.first().cloned().unwrap_or_default()),
                _ => self.fallback.act(view),
            },
            _ => self.fallback.act(view),
        }
    }
}

impl Agent for FpFollower {
    fn act(&mut self, view: &AgentView) -> Result<String, AgentError> {
        if let Some(d) = &mut self.descent {
            return d.act(view);
        }
        if let Some(a) = self.advice(&view.feedback).or_else(|| self.pending.take()) {
            return Ok(a);
        }
        self.first_move(view)
    }

    fn observe(&mut self, view: &AgentView) {
        if let Some(d) = &mut self.descent {
            d.observe(view);
        }
        if let Some(a) = self.advice(&view.feedback) {
            self.pending = Some(a);
        }
    }
}

/// Epsilon-greedy bandit player reading rewards from `r` feedback.
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    arms: Vec<String>,
    epsilon: f64,
    counts: Vec<u64>,
    sums: Vec<f64>,
    rng: ChaCha8Rng,
    bank: &'static TemplateBank,
}

impl EpsilonGreedy {
    pub fn new(arms: Vec<String>, epsilon: f64, seed: u64) -> Result<Self, AgentError> {
        let n = arms.len();
        Ok(Self {
            arms,
            epsilon,
            counts: vec![0; n],
            sums: vec![0.0; n],
            rng: ChaCha8Rng::seed_from_u64(seed),
            bank: assets::templates()?,
        })
    }

    pub fn estimates(&self) -> Vec<Option<f64>> {
        self.counts.iter().zip(&self.sums).map(|(&c, &s)| (c > 0).then(|| s / c as f64)).collect()
    }
}

impl Agent for EpsilonGreedy {
    fn act(&mut self, _view: &AgentView) -> Result<String, AgentError> {
        if let Some(untried) = self.counts.iter().position(|&c| c == 0) {
            return Ok(self.arms[untried].clone());
        }
        let arm = if self.rng.random_bool(self.epsilon) {
            self.rng.random_range(0..self.arms.len())
        } else {
            let means = self.estimates();
            (0..self.arms.len())
                .max_by(|&a, &b| means[a].partial_cmp(&means[b]).expect("finite").then(b.cmp(&a)))
                .expect("at least one arm")
        };
        Ok(self.arms[arm].clone())
    }

    fn observe(&mut self, view: &AgentView) {
        for (event, slots) in extract_feedback(self.bank, Family::Bandit, FeedbackKind::R, &view.feedback) {
            if event != "reward" {
                continue;
            }
            let arm = slots.get("arm").and_then(|a| self.arms.iter().position(|x| x == a));
            let reward = slots.get("reward").and_then(|r| r.parse::<f64>().ok());
            if let (Some(arm), Some(reward)) = (arm, reward) {
                self.counts[arm] += 1;
                self.sums[arm] += reward;
            }
        }
    }
}

/// Moves every coordinate a fixed step in the direction `fp` advises.
#[derive(Debug, Clone)]
pub struct SignDescent {
    bounds: Vec<(f64, f64)>,
    step: Vec<f64>,
    bank: &'static TemplateBank,
}

impl SignDescent {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, AgentError> {
        let step = bounds.iter().map(|(lo, hi)| SIGN_STEP_FRACTION * (hi - lo)).collect();
        Ok(Self { bounds, step, bank: assets::templates()? })
    }
}

impl Agent for SignDescent {
    fn act(&mut self, view: &AgentView) -> Result<String, AgentError> {
        let Some(mut x) = last_point(&view.observation).filter(|x| x.len() == self.bounds.len()) else {
            let centre: Vec<f64> = self.bounds.iter().map(|(lo, hi)| (lo + hi) / 2.0).collect();
            return Ok(point(&centre, 4));
        };
        if view.observation.starts_with("Starting point") {
            return Ok(point(&x, 4));
        }
        for (event, slots) in extract_feedback(self.bank, Family::Optimization, FeedbackKind::Fp, &view.feedback) {
            if event != "direction" {
                continue;
            }
            let coord = slots.get("coord").and_then(|c| c.strip_prefix('x')).and_then(|i| i.parse::<usize>().ok());
            let sign = match slots.get("direction").map(String::as_str) {
                Some("increase") => 1.0,
                Some("decrease") => -1.0,
                _ => continue,
            };
            if let Some(i) = coord.and_then(|c| c.checked_sub(1)).filter(|&i| i < x.len()) {
                let (lo, hi) = self.bounds[i];
                x[i] = (x[i] + sign * self.step[i]).clamp(lo, hi);
            }
        }
        Ok(point(&x, 4))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ActionReply {
    action: String,
}

enum Channel {
    Tcp { writer: TcpStream },
    Exec { child: Child, stdin: ChildStdin },
}

/// An agent in another process. Each step sends the view as one JSON line
/// and expects `{"action": "..."}` back within the deadline.
pub struct ExternalAgent {
    channel: Channel,
    replies: mpsc::Receiver<std::io::Result<String>>,
    deadline: Duration,
}

fn spawn_reader<R: std::io::Read + Send + 'static>(source: R) -> mpsc::Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });
    rx
}

impl ExternalAgent {
    pub fn tcp(addr: &str, deadline: Duration) -> Result<Self, AgentError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let replies = spawn_reader(stream.try_clone()?);
        Ok(Self { channel: Channel::Tcp { writer: stream }, replies, deadline })
    }

    pub fn exec(command: &str, deadline: Duration) -> Result<Self, AgentError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let replies = spawn_reader(child.stdout.take().expect("piped stdout"));
        Ok(Self { channel: Channel::Exec { child, stdin }, replies, deadline })
    }
}

impl Agent for ExternalAgent {
    fn act(&mut self, view: &AgentView) -> Result<String, AgentError> {
        let mut line = serde_json::to_string(view).expect("views serialize");
        line.push('\n');
        match &mut self.channel {
            Channel::Tcp { writer } => {
                writer.write_all(line.as_bytes())?;
                writer.flush()?;
            }
            Channel::Exec { stdin, .. } => {
                stdin.write_all(line.as_bytes())?;
                stdin.flush()?;
            }
        }
        let reply = match self.replies.recv_timeout(self.deadline) {
            Ok(reply) => reply?,
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(AgentError::AgentTimeout(self.deadline)),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "agent hung up").into())
            }
        };
        serde_json::from_str::<ActionReply>(reply.trim())
            .map(|r| r.action)
            .map_err(|e| AgentError::BadReply(e.to_string()))
    }
}

impl Drop for ExternalAgent {
    fn drop(&mut self) {
        if let Channel::Exec { child, .. } = &mut self.channel {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

//! Sequential decision problems that talk to the agent in natural language.
//!
//! Every environment returns an observation, an instruction and a set of
//! feedback messages after each action. Feedback comes in five kinds:
//! the reward verbalized (`r`), hindsight praise or criticism of the last
//! action (`hp`, `hn`), and advice about what to do or avoid next
//! (`fp`, `fn`). Messages are rendered from paraphrase template banks, so the
//! same underlying signal can be phrased many ways.
//!
//! ```
//! use langfeed::{make, EnvConfig};
//!
//! let mut env = make(EnvConfig::new("bandit:TwoArmedHighLow").seed(7)).unwrap();
//! let first = env.reset(None).unwrap();
//! assert!(first.feedback.is_empty());
//! let step = env.step("red").unwrap();
//! assert!(step.terminated);
//! ```

pub mod assets;
pub mod env;
pub mod envs;
pub mod error;
pub mod exec;
pub mod feedback;
pub mod harness;
pub mod registry;
pub mod templates;
pub mod text;

pub use env::{
    run_script, AgentView, Ctx, EnvConfig, EpisodeTranscript, InstructionType, ObservationBundle, Problem,
    StepOutcome,
};
pub use error::EnvError;
pub use exec::Execution;
pub use feedback::{FeedbackKind, FeedbackSelector, FeedbackSet};
pub use registry::{make, registered_ids, Family};

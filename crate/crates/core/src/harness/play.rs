//! Interactive terminal play.

use std::io::{BufRead, Write};

use crate::env::{Env, ObservationBundle};
use crate::error::EnvError;

#[derive(Debug, thiserror::Error)]
pub enum PlayError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlaySummary {
    pub steps: u32,
    pub finished: bool,
    pub cumulative_reward: f64,
}

fn show<W: Write>(out: &mut W, bundle: &ObservationBundle, with_instruction: bool) -> std::io::Result<()> {
    if with_instruction {
        writeln!(out, "Instruction:\n{}\n", bundle.instruction)?;
    }
    if !bundle.feedback.is_empty() {
        writeln!(out, "Feedback:\n{}\n", bundle.feedback_text())?;
    }
    writeln!(out, "Observation:\n{}", bundle.observation)
}

/// Play one episode, reading actions line by line. End of input closes the
/// episode early. Rewards are shown only when `debug` is set.
pub fn interactive_play<R: BufRead, W: Write>(
    env: &mut Env,
    seed: Option<u64>,
    input: R,
    mut out: W,
    debug: bool,
) -> Result<PlaySummary, PlayError> {
    let mut summary = PlaySummary::default();
    let first = env.reset(seed)?;
    let mut instruction = first.instruction.clone();
    show(&mut out, &first, true)?;
    let mut lines = input.lines();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        let Some(line) = lines.next().transpose()? else {
            writeln!(out)?;
            break;
        };
        let step = env.step(line.trim())?;
        summary.steps += 1;
        summary.cumulative_reward += step.reward;
        let changed = step.bundle.instruction != instruction;
        instruction.clone_from(&step.bundle.instruction);
        writeln!(out)?;
        show(&mut out, &step.bundle, changed)?;
        if debug {
            writeln!(out, "[debug] reward = {}", step.reward)?;
        }
        if step.done() {
            summary.finished = true;
            writeln!(out, "Episode finished.")?;
            break;
        }
    }
    out.flush()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;
    use crate::registry::make;

    #[test]
    fn eof_closes_cleanly() {
        let mut env = make(EnvConfig::new("gridworld").seed(1)).unwrap();
        let mut out = Vec::new();
        let s = interactive_play(&mut env, None, "north\n".as_bytes(), &mut out, false).unwrap();
        assert_eq!(s.steps, 1);
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("Instruction:"));
        assert!(!text.contains("reward ="));
    }

    #[test]
    fn debug_echoes_reward() {
        let mut env = make(EnvConfig::new("bandit").seed(1)).unwrap();
        let mut out = Vec::new();
        let s = interactive_play(&mut env, None, "red\nblue\n".as_bytes(), &mut out, true).unwrap();
        assert!(s.finished);
        assert_eq!(s.steps, 1);
        assert!(String::from_utf8(out).unwrap().contains("[debug] reward = "));
    }
}

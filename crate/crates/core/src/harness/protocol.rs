//! Line-delimited JSON frames between agents and environments.
//!
//! Each request line gets exactly one response line. Observation frames carry
//! agent-visible text only; reward and info never cross the wire.
//! See `docs/protocol.md` for the full schema.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Env, ObservationBundle};
use crate::error::EnvError;
use crate::registry::make;

pub type SessionId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Make {
        config: EnvConfig,
    },
    Reset {
        session: SessionId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Step {
        session: SessionId,
        action: String,
    },
    Close {
        session: SessionId,
    },
}

/// Keys an observation frame may carry.
pub const OBSERVATION_FIELDS: [&str; 7] =
    ["status", "session", "observation", "instruction", "feedback", "terminated", "truncated"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case", deny_unknown_fields)]
pub enum Response {
    Ok {
        session: SessionId,
    },
    Observation {
        session: SessionId,
        observation: String,
        instruction: String,
        feedback: String,
        terminated: bool,
        truncated: bool,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Response {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Response::Error { code: code.to_owned(), message: message.into() }
    }

    fn observation(session: SessionId, bundle: &ObservationBundle, terminated: bool, truncated: bool) -> Self {
        Response::Observation {
            session,
            observation: bundle.observation.clone(),
            instruction: bundle.instruction.clone(),
            feedback: bundle.feedback_text(),
            terminated,
            truncated,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("responses serialize")
    }
}

/// Wire error codes beyond those of [`EnvError::code`].
pub mod codes {
    pub const BAD_FRAME: &str = "bad_frame";
    pub const UNKNOWN_SESSION: &str = "unknown_session";
}

impl From<EnvError> for Response {
    fn from(e: EnvError) -> Self {
        Response::error(e.code(), e.to_string())
    }
}

/// Sessions owned by one connection.
#[derive(Debug, Default)]
pub struct SessionTable {
    next_id: SessionId,
    sessions: BTreeMap<SessionId, Env>,
}

impl SessionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Decode one frame and apply it. Never fails; problems become error frames.
    pub fn handle_line(&mut self, line: &str) -> Response {
        match serde_json::from_str::<Request>(line) {
            Ok(request) => self.handle(request),
            Err(e) => Response::error(codes::BAD_FRAME, e.to_string()),
        }
    }

    pub fn handle(&mut self, request: Request) -> Response {
        match request {
            Request::Make { config } => match make(config) {
                Ok(env) => {
                    self.next_id += 1;
                    self.sessions.insert(self.next_id, env);
                    Response::Ok { session: self.next_id }
                }
                Err(e) => e.into(),
            },
            Request::Reset { session, seed } => match self.sessions.get_mut(&session) {
                None => unknown(session),
                Some(env) => match env.reset(seed) {
                    Ok(bundle) => Response::observation(session, &bundle, false, false),
                    Err(e) => e.into(),
                },
            },
            Request::Step { session, action } => match self.sessions.get_mut(&session) {
                None => unknown(session),
                Some(env) => match env.step(&action) {
                    Ok(out) => Response::observation(session, &out.bundle, out.terminated, out.truncated),
                    Err(e) => e.into(),
                },
            },
            Request::Close { session } => match self.sessions.remove(&session) {
                None => unknown(session),
                Some(_) => Response::Ok { session },
            },
        }
    }
}

fn unknown(session: SessionId) -> Response {
    Response::error(codes::UNKNOWN_SESSION, format!("no open session {session}"))
}

/// Serve frames from `reader` until end of input. Blank lines are skipped.
pub fn serve_stream<R: BufRead, W: Write>(reader: R, mut writer: W) -> std::io::Result<()> {
    let mut table = SessionTable::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(writer, "{}", table.handle_line(&line).to_line())?;
        writer.flush()?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("connection lost: {0}")]
    ConnectionLost(#[from] std::io::Error),
    #[error("undecodable response `{line}`: {message}")]
    BadResponse { line: String, message: String },
    #[error("server error {code}: {message}")]
    Server { code: String, message: String },
    #[error("unexpected response {0:?}")]
    Unexpected(Box<Response>),
}

/// What an observation frame tells the agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteStep {
    pub observation: String,
    pub instruction: String,
    pub feedback: String,
    pub terminated: bool,
    pub truncated: bool,
}

impl RemoteStep {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }

    pub fn view(&self) -> crate::env::AgentView {
        crate::env::AgentView {
            observation: self.observation.clone(),
            instruction: self.instruction.clone(),
            feedback: self.feedback.clone(),
        }
    }
}

/// Blocking protocol client, one request in flight at a time.
pub struct Client<R, W> {
    reader: R,
    writer: W,
    /// Raw response lines, oldest first, when recording is on.
    pub transcript: Option<Vec<String>>,
}

impl<R: BufRead, W: Write> Client<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer, transcript: None }
    }

    pub fn recording(mut self) -> Self {
        self.transcript = Some(Vec::new());
        self
    }

    /// Send one raw line and return the raw response line.
    pub fn raw(&mut self, line: &str) -> Result<String, ClientError> {
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        let mut response = String::new();
        if self.reader.read_line(&mut response)? == 0 {
            return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "server closed the connection").into());
        }
        let response = response.trim_end_matches(['\r', '\n']).to_owned();
        if let Some(t) = &mut self.transcript {
            t.push(response.clone());
        }
        Ok(response)
    }

    pub fn request(&mut self, request: &Request) -> Result<Response, ClientError> {
        let line = self.raw(&serde_json::to_string(request).expect("requests serialize"))?;
        match serde_json::from_str::<Response>(&line) {
            Ok(Response::Error { code, message }) => Err(ClientError::Server { code, message }),
            Ok(r) => Ok(r),
            Err(e) => Err(ClientError::BadResponse { line, message: e.to_string() }),
        }
    }

    pub fn make(&mut self, config: EnvConfig) -> Result<SessionId, ClientError> {
        match self.request(&Request::Make { config })? {
            Response::Ok { session } => Ok(session),
            other => Err(ClientError::Unexpected(Box::new(other))),
        }
    }

    pub fn reset(&mut self, session: SessionId, seed: Option<u64>) -> Result<RemoteStep, ClientError> {
        self.observation(&Request::Reset { session, seed })
    }

    pub fn step(&mut self, session: SessionId, action: &str) -> Result<RemoteStep, ClientError> {
        self.observation(&Request::Step { session, action: action.to_owned() })
    }

    pub fn close(&mut self, session: SessionId) -> Result<(), ClientError> {
        match self.request(&Request::Close { session })? {
            Response::Ok { .. } => Ok(()),
            other => Err(ClientError::Unexpected(Box::new(other))),
        }
    }

    fn observation(&mut self, request: &Request) -> Result<RemoteStep, ClientError> {
        match self.request(request)? {
            Response::Observation { observation, instruction, feedback, terminated, truncated, .. } => {
                Ok(RemoteStep { observation, instruction, feedback, terminated, truncated })
            }
            other => Err(ClientError::Unexpected(Box::new(other))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_round_trip() {
        let r: Request = serde_json::from_str(r#"{"op":"reset","session":3}"#).unwrap();
        assert_eq!(r, Request::Reset { session: 3, seed: None });
        let r: Request = serde_json::from_str(r#"{"op":"make","config":{"env_id":"parking","feedback":"r,hn"}}"#).unwrap();
        let Request::Make { config } = r else { panic!() };
        assert_eq!(config.env_id, "parking");
    }

    #[test]
    fn bad_frames_do_not_kill_the_table() {
        let mut t = SessionTable::new();
        let Response::Ok { session } = t.handle_line(r#"{"op":"make","config":{"env_id":"gridworld"}}"#) else {
            panic!()
        };
        for bad in ["{", "[]", r#"{"op":"fly"}"#, r#"{"op":"step","session":1}"#] {
            assert!(matches!(t.handle_line(bad), Response::Error { code, .. } if code == codes::BAD_FRAME));
        }
        let step = format!(r#"{{"op":"step","session":{session},"action":"north"}}"#);
        assert!(matches!(t.handle_line(&step), Response::Error { code, .. } if code == "not_reset"));
        let reset = format!(r#"{{"op":"reset","session":{session},"seed":1}}"#);
        assert!(matches!(t.handle_line(&reset), Response::Observation { .. }));
        assert!(matches!(t.handle_line(&step), Response::Observation { .. }));
        assert!(matches!(t.handle_line(r#"{"op":"close","session":99}"#), Response::Error { code, .. } if code == codes::UNKNOWN_SESSION));
    }
}

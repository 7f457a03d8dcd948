//! Protocol server over standard streams or TCP.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::str::FromStr;
use std::thread;

use thiserror::Error;

use super::protocol::serve_stream;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("invalid listen spec `{0}`; use `stdio` or `host:port`")]
    BadListenSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ListenSpec {
    Stdio,
    Tcp(String),
}

impl FromStr for ListenSpec {
    type Err = ServerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "stdio" | "-" => Ok(ListenSpec::Stdio),
            _ => {
                let addr = s.strip_prefix("tcp://").unwrap_or(s);
                if addr.rsplit_once(':').is_some_and(|(_, port)| port.parse::<u16>().is_ok()) {
                    Ok(ListenSpec::Tcp(addr.to_owned()))
                } else {
                    Err(ServerError::BadListenSpec(s.to_owned()))
                }
            }
        }
    }
}

/// A bound TCP listener. Each connection gets its own thread and session table.
pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs + std::fmt::Display) -> Result<Self, ServerError> {
        let shown = addr.to_string();
        TcpListener::bind(addr)
            .map(|listener| Self { listener })
            .map_err(|source| ServerError::BindFailure { addr: shown, source })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ServerError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accept connections forever.
    pub fn run(self) -> Result<(), ServerError> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            thread::spawn(move || {
                let _ = handle_connection(stream);
            });
        }
        Ok(())
    }

    /// Run the accept loop on a background thread.
    pub fn spawn(self) -> Result<SocketAddr, ServerError> {
        let addr = self.local_addr()?;
        thread::spawn(move || self.run());
        Ok(addr)
    }
}

fn handle_connection(stream: TcpStream) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(reader, BufWriter::new(stream))
}

pub fn serve_stdio() -> Result<(), ServerError> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_stream(stdin.lock(), stdout.lock())?;
    Ok(())
}

pub fn serve(spec: &ListenSpec) -> Result<(), ServerError> {
    match spec {
        ListenSpec::Stdio => serve_stdio(),
        ListenSpec::Tcp(addr) => Server::bind(addr.as_str())?.run(),
    }
}

/// Open a blocking client connection to a TCP server.
pub fn connect(
    addr: impl ToSocketAddrs,
) -> std::io::Result<super::protocol::Client<BufReader<TcpStream>, BufWriter<TcpStream>>> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    Ok(super::protocol::Client::new(BufReader::new(stream.try_clone()?), BufWriter::new(stream)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listen_specs() {
        assert_eq!("stdio".parse::<ListenSpec>().unwrap(), ListenSpec::Stdio);
        assert_eq!("tcp://127.0.0.1:9000".parse::<ListenSpec>().unwrap(), ListenSpec::Tcp("127.0.0.1:9000".into()));
        assert_eq!("localhost:0".parse::<ListenSpec>().unwrap(), ListenSpec::Tcp("localhost:0".into()));
        assert!("nowhere".parse::<ListenSpec>().is_err());
    }

    #[test]
    fn bind_failure_reported() {
        let first = Server::bind("127.0.0.1:0").unwrap();
        let addr = first.local_addr().unwrap();
        assert!(matches!(Server::bind(addr), Err(ServerError::BindFailure { .. })));
    }
}

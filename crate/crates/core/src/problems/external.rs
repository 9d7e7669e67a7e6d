//! Line-oriented stdio bridge to an external black-box evaluator.
//!
//! ```text
//! -> HELLO <dim>        <- READY
//! -> EVAL <bitstring>   <- OK <float> | ERR <message>
//! -> BYE
//! ```

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::Solution;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalSpec {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub env: Vec<(String, String)>,
    pub timeout_ms: u64,
}

impl ExternalSpec {
    pub fn new<S: Into<String>>(command: impl IntoIterator<Item = S>) -> Self {
        ExternalSpec {
            command: command.into_iter().map(Into::into).collect(),
            env: Vec::new(),
            timeout_ms: 30_000,
        }
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Session {
    fn start(spec: &ExternalSpec, dim: usize) -> Result<Self> {
        let (program, args) = spec
            .command
            .split_first()
            .ok_or_else(|| Error::invalid("external evaluator command is empty"))?;
        let mut child = Command::new(program)
            .args(args)
            .envs(spec.env.iter().map(|(k, v)| (k, v)))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Evaluation(format!("failed to start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut session = Session { child, stdin, lines: rx };
        session.send(&format!("HELLO {dim}"))?;
        match session.recv(spec.timeout_ms)?.trim() {
            "READY" => Ok(session),
            other => Err(Error::Evaluation(format!("expected READY, got {other:?}"))),
        }
    }

    fn send(&mut self, line: &str) -> Result<()> {
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Evaluation(format!("write to evaluator failed: {e}")))
    }

    fn recv(&mut self, timeout_ms: u64) -> Result<String> {
        match self.lines.recv_timeout(Duration::from_millis(timeout_ms)) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Evaluation(format!("read from evaluator failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(timeout_ms)),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().ok();
                Err(Error::Evaluation(match status {
                    Some(s) if !s.success() => format!("evaluator exited with {s}"),
                    _ => "evaluator closed its output".to_string(),
                }))
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.send("BYE");
        thread::sleep(Duration::from_millis(10));
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

/// Parses one response line of the evaluator protocol.
pub(crate) fn parse_response(line: &str) -> Result<f64> {
    let line = line.trim_end();
    if let Some(rest) = line.strip_prefix("OK ") {
        let value: f64 = rest
            .trim()
            .parse()
            .map_err(|_| Error::Evaluation(format!("malformed value in response {line:?}")))?;
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(value)
    } else if let Some(msg) = line.strip_prefix("ERR") {
        Err(Error::Evaluation(msg.trim().to_string()))
    } else {
        Err(Error::Evaluation(format!("malformed response {line:?}")))
    }
}

/// Client owning one evaluator subprocess. Requests are serialized; the process
/// is started on first use and restarted after a failure.
pub struct ExternalClient {
    pub spec: ExternalSpec,
    dim: usize,
    session: Mutex<Option<Session>>,
}

impl fmt::Debug for ExternalClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalClient").field("spec", &self.spec).field("dim", &self.dim).finish()
    }
}

impl ExternalClient {
    pub fn new(spec: ExternalSpec, dim: usize) -> Self {
        ExternalClient { spec, dim, session: Mutex::new(None) }
    }

    pub fn evaluate(&self, x: &Solution) -> Result<f64> {
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Session::start(&self.spec, self.dim)?);
        }
        let session = guard.as_mut().expect("session started above");
        let reply = session
            .send(&format!("EVAL {}", x.to_bitstring()))
            .and_then(|_| session.recv(self.spec.timeout_ms));
        match reply {
            Ok(line) => parse_response(&line),
            Err(e) => {
                // transport failure: restart the process on the next call
                *guard = None;
                Err(e)
            }
        }
    }
}

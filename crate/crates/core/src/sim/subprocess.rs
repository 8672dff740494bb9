//! Bridge to an external simulator running as a child process.
//!
//! Each concurrent caller checks out its own child, so a child is never used
//! by two workers at once. Children are spawned lazily and returned to the
//! idle list after a successful exchange; a child that failed is killed.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{BridgeRequest, BridgeResponse};
use super::{SimError, SimulationOutput, Simulator};
use crate::scenario::{ScenarioSpec, TestInput};

pub const DEFAULT_BRIDGE_TIMEOUT: Duration = Duration::from_secs(60);
const DEFAULT_DT: f64 = 0.01;

struct BridgeChild {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    /// Responses that arrived for other request ids.
    stash: HashMap<u64, BridgeResponse>,
}

impl BridgeChild {
    fn spawn(command: &str) -> Result<Self, SimError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines, stash: HashMap::new() })
    }

    fn exchange(&mut self, request: &BridgeRequest, timeout: Duration) -> Result<BridgeResponse, SimError> {
        if let Some(r) = self.stash.remove(&request.id) {
            return Ok(r);
        }
        writeln!(self.stdin, "{}", request.to_line()).map_err(|e| self.terminated(e.to_string()))?;
        self.stdin.flush().map_err(|e| self.terminated(e.to_string()))?;

        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let response = BridgeResponse::parse(&line)?;
                    if response.id == request.id {
                        return Ok(response);
                    }
                    self.stash.insert(response.id, response);
                }
                Ok(Err(e)) => return Err(SimError::Io(e)),
                Err(RecvTimeoutError::Timeout) => return Err(SimError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(self.terminated("stdout closed before a response arrived".into()))
                }
            }
        }
    }

    fn terminated(&mut self, detail: String) -> SimError {
        // give the child a moment to exit so the status can be reported
        let deadline = Instant::now() + Duration::from_millis(200);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(s)) => break Some(s),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => break None,
            }
        };
        match status {
            Some(s) => SimError::Terminated(format!("{detail} ({s})")),
            None => SimError::Terminated(detail),
        }
    }
}

impl Drop for BridgeChild {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct SubprocessSimulator {
    command: String,
    timeout: Duration,
    idle: Mutex<Vec<BridgeChild>>,
    next_id: AtomicU64,
}

impl std::fmt::Debug for SubprocessSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessSimulator")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl SubprocessSimulator {
    /// `command` is run through `sh -c`.
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            timeout: DEFAULT_BRIDGE_TIMEOUT,
            idle: Mutex::new(Vec::new()),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn checkout(&self) -> Result<BridgeChild, SimError> {
        let idle = self.idle.lock().unwrap_or_else(|e| e.into_inner()).pop();
        match idle {
            Some(c) => Ok(c),
            None => BridgeChild::spawn(&self.command),
        }
    }
}

impl Simulator for SubprocessSimulator {
    fn name(&self) -> &str {
        "subprocess"
    }

    fn simulate(&self, spec: &ScenarioSpec, input: &TestInput, seed: u64) -> Result<SimulationOutput, SimError> {
        if let Some(e) = spec.validate_input(input).into_iter().next() {
            return Err(SimError::InvalidInput(e));
        }
        let dt = spec.fixed_settings.get("dt").copied().unwrap_or(DEFAULT_DT);
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let request = BridgeRequest::new(id, spec, input, dt, seed);

        let mut child = self.checkout()?;
        let output = child.exchange(&request, self.timeout).and_then(BridgeResponse::into_output)?;
        self.idle.lock().unwrap_or_else(|e| e.into_inner()).push(child);
        Ok(output)
    }
}

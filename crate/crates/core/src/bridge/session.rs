use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{decode_prediction, Message, WireScenario, PROTOCOL_VERSION};
use super::{BridgeError, BridgeOptions};
use crate::predict::{PredictError, Prediction, Predictor};
use crate::scenario::Scenario;

const STDERR_TAIL: usize = 20;

/// A predictor living in a child process, spoken to over stdin/stdout.
pub struct ExternalPredictor {
    command: String,
    options: BridgeOptions,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Option<String>>,
    stderr: Arc<Mutex<VecDeque<String>>>,
    next_id: u64,
    name: Option<String>,
    capabilities: Vec<String>,
    dead: bool,
    exit_code: Option<i32>,
    transcript: Option<Vec<(Direction, String)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToAdapter,
    FromAdapter,
}

impl ExternalPredictor {
    /// Starts `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, options: BridgeOptions) -> Result<Self, BridgeError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(BridgeError::Spawn)?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let stderr = child.stderr.take().expect("stderr is piped");

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Some(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(None);
        });
        let tail = Arc::new(Mutex::new(VecDeque::new()));
        let sink = Arc::clone(&tail);
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                log::debug!("adapter stderr: {line}");
                let mut t = sink.lock().unwrap_or_else(|e| e.into_inner());
                if t.len() == STDERR_TAIL {
                    t.pop_front();
                }
                t.push_back(line);
            }
        });

        let mut p = Self {
            command: command.to_string(),
            options,
            child,
            stdin,
            lines,
            stderr: tail,
            next_id: 0,
            name: None,
            capabilities: Vec::new(),
            dead: false,
            exit_code: None,
            transcript: options.record_transcript.then(Vec::new),
        };
        match p.handshake() {
            Err(BridgeError::ChildExited { detail, stderr }) if p.exit_code == Some(127) => {
                let message = if stderr.is_empty() { detail } else { stderr };
                Err(BridgeError::Spawn(std::io::Error::new(std::io::ErrorKind::NotFound, message)))
            }
            other => other.map(|_| p),
        }
    }

    fn handshake(&mut self) -> Result<(), BridgeError> {
        self.send(&Message::Hello {
            version: PROTOCOL_VERSION,
            name: None,
            capabilities: Vec::new(),
        })?;
        match self.receive(self.options.handshake_timeout, "handshake")? {
            Message::Hello {
                version,
                name,
                capabilities,
            } => {
                if version != PROTOCOL_VERSION {
                    self.kill();
                    return Err(BridgeError::Version(version));
                }
                self.name = name;
                self.capabilities = capabilities;
                Ok(())
            }
            Message::Error { message, .. } => {
                self.kill();
                Err(BridgeError::Adapter(message))
            }
            other => {
                self.kill();
                Err(BridgeError::Protocol(format!("expected hello, got {}", other.kind())))
            }
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn capabilities(&self) -> &[String] {
        &self.capabilities
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Lines exchanged so far, if recording was requested.
    pub fn transcript(&self) -> Option<&[(Direction, String)]> {
        self.transcript.as_deref()
    }

    fn stderr_tail(&self) -> String {
        let t = self.stderr.lock().unwrap_or_else(|e| e.into_inner());
        t.iter().cloned().collect::<Vec<_>>().join("\n")
    }

    fn send(&mut self, msg: &Message) -> Result<(), BridgeError> {
        if self.dead {
            return Err(BridgeError::Dead);
        }
        let line = msg.to_line();
        let stdin = self.stdin.as_mut().ok_or(BridgeError::Dead)?;
        let res = stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush());
        if let Err(e) = res {
            self.kill();
            thread::sleep(Duration::from_millis(20));
            return Err(BridgeError::ChildExited {
                detail: format!("write failed: {e}"),
                stderr: self.stderr_tail(),
            });
        }
        if let Some(t) = self.transcript.as_mut() {
            t.push((Direction::ToAdapter, line));
        }
        Ok(())
    }

    fn receive(&mut self, timeout: Duration, stage: &'static str) -> Result<Message, BridgeError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(Some(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    if let Some(t) = self.transcript.as_mut() {
                        t.push((Direction::FromAdapter, line.clone()));
                    }
                    return serde_json::from_str(&line).map_err(|source| {
                        self.kill();
                        BridgeError::Json {
                            line: truncate(&line),
                            source,
                        }
                    });
                }
                Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                    let status = self.child.wait().ok();
                    self.exit_code = status.and_then(|s| s.code());
                    self.dead = true;
                    // give the stderr reader a moment to drain
                    thread::sleep(Duration::from_millis(20));
                    return Err(BridgeError::ChildExited {
                        detail: match status {
                            Some(s) => format!("adapter exited ({s}) during {stage}"),
                            None => format!("adapter closed stdout during {stage}"),
                        },
                        stderr: self.stderr_tail(),
                    });
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.kill();
                    return Err(BridgeError::Timeout {
                        stage,
                        seconds: timeout.as_secs_f64(),
                    });
                }
            }
        }
    }

    fn kill(&mut self) {
        self.dead = true;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Sends one scenario and waits for the validated answer.
    pub fn request(&mut self, scenario: &Scenario) -> Result<Prediction, BridgeError> {
        self.next_id += 1;
        let id = self.next_id;
        self.exchange(id, scenario).map_err(|e| BridgeError::Request {
            id,
            source: Box::new(e),
        })
    }

    fn exchange(&mut self, id: u64, scenario: &Scenario) -> Result<Prediction, BridgeError> {
        self.send(&Message::Predict {
            id,
            scenario: WireScenario::from_scenario(scenario),
        })?;
        match self.receive(self.options.timeout, "predict")? {
            Message::Prediction { id: got, agents } => {
                if got != id {
                    self.kill();
                    return Err(BridgeError::Protocol(format!("response id {got} does not match request {id}")));
                }
                Ok(decode_prediction(scenario, agents)?)
            }
            Message::Error { message, .. } => Err(BridgeError::Adapter(message)),
            other => {
                self.kill();
                Err(BridgeError::Protocol(format!("expected prediction, got {}", other.kind())))
            }
        }
    }

    /// Asks the adapter to exit and waits up to the handshake timeout before killing it.
    pub fn shutdown(mut self) -> Result<(), BridgeError> {
        self.close()
    }

    fn close(&mut self) -> Result<(), BridgeError> {
        if self.dead {
            return Ok(());
        }
        let sent = self.send(&Message::Shutdown);
        self.stdin = None;
        let deadline = Instant::now() + self.options.handshake_timeout;
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                self.dead = true;
                return sent;
            }
            thread::sleep(Duration::from_millis(5));
        }
        self.kill();
        sent.and(Err(BridgeError::Timeout {
            stage: "shutdown",
            seconds: self.options.handshake_timeout.as_secs_f64(),
        }))
    }
}

fn truncate(line: &str) -> String {
    const MAX: usize = 200;
    if line.len() <= MAX {
        return line.to_string();
    }
    let mut end = MAX;
    while !line.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &line[..end])
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

impl Predictor for ExternalPredictor {
    fn id(&self) -> String {
        format!("external:{}", self.name.as_deref().unwrap_or(&self.command))
    }

    fn predict(&mut self, scenario: &Scenario) -> Result<Prediction, PredictError> {
        Ok(self.request(scenario)?)
    }
}

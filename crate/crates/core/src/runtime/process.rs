//! Client side of the line protocol: one child process, one request in flight.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::runtime::protocol::{Request, RequestBody, Response, ResponseBody};
use crate::runtime::{Embedder, EvalRequest, Evaluator, GenerateRequest, Generator};

const STDERR_LIMIT: usize = 64 * 1024;

/// A backend child process speaking the line protocol over stdin/stdout.
#[derive(Debug)]
pub struct ExternalBackend {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    next_id: u64,
    timeout: Duration,
}

impl ExternalBackend {
    /// Launches `command[0]` with the remaining elements as arguments.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("empty backend command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut stderr_pipe = child.stderr.take().expect("stderr is piped");

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = stderr_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().expect("stderr buffer poisoned");
                if s.len() < STDERR_LIMIT {
                    s.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });

        Ok(ExternalBackend {
            child,
            stdin,
            lines,
            stderr,
            next_id: 1,
            timeout,
        })
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Sends one request and waits for the response carrying the same id.
    ///
    /// Responses with a smaller id (late answers to requests that already
    /// timed out) are discarded.
    pub fn call(&mut self, body: RequestBody) -> Result<(String, ResponseBody)> {
        let id = self.next_id;
        self.next_id += 1;
        let line = Request { id, body }.to_line();
        let written = match self.stdin.as_mut() {
            Some(stdin) => writeln!(stdin, "{line}").and_then(|_| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if written.is_err() {
            return Err(self.child_failure());
        }

        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(Ok(raw)) => {
                    if raw.trim().is_empty() {
                        continue;
                    }
                    let resp = Response::parse(&raw)?;
                    if resp.id < id {
                        continue;
                    }
                    if resp.id > id {
                        return Err(Error::MalformedResponse {
                            line: raw,
                            reason: format!(
                                "response id {} does not match request id {id}",
                                resp.id
                            ),
                        });
                    }
                    if let ResponseBody::Error { error } = &resp.body {
                        return Err(Error::Backend(format!("request {id}: {error}")));
                    }
                    return Ok((raw, resp.body));
                }
                Ok(Err(e)) => return Err(Error::Io(e)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Timeout {
                        request_id: id,
                        timeout_ms: self.timeout.as_millis() as u64,
                    })
                }
                Err(RecvTimeoutError::Disconnected) => return Err(self.child_failure()),
            }
        }
    }

    /// Describes why the child stopped answering.
    fn child_failure(&mut self) -> Error {
        let deadline = Instant::now() + Duration::from_secs(2);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(status)) => break status.to_string(),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                Ok(None) => break "still running, stdout closed".to_string(),
                Err(e) => break e.to_string(),
            }
        };
        // Give the stderr reader a moment to drain.
        thread::sleep(Duration::from_millis(20));
        let stderr = self
            .stderr
            .lock()
            .expect("stderr buffer poisoned")
            .trim()
            .to_string();
        Error::ChildExited { status, stderr }
    }

    fn unexpected(raw: String, wanted: &str) -> Error {
        Error::MalformedResponse {
            line: raw,
            reason: format!("expected a {wanted} response"),
        }
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(200);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Evaluator for ExternalBackend {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<f64> {
        let examples: Vec<_> = request
            .pool
            .select(request.subset)?
            .into_iter()
            .cloned()
            .collect();
        let body = RequestBody::Evaluate {
            round: request.round,
            subset_ids: examples.iter().map(|e| e.id.clone()).collect(),
            examples,
            split: Some(request.split.to_string()),
        };
        match self.call(body)? {
            (_, ResponseBody::Metric { metric }) if metric.is_finite() => Ok(metric),
            (raw, _) => Err(Self::unexpected(raw, "finite metric")),
        }
    }
}

impl Generator for ExternalBackend {
    fn generate(&mut self, request: &GenerateRequest<'_>) -> Result<Vec<crate::pool::Example>> {
        let body = RequestBody::Generate {
            round: request.round,
            seed_ids: request.seeds.iter().map(|e| e.id.clone()).collect(),
            seed_examples: request.seeds.to_vec(),
            target: Some(request.target.to_string()),
        };
        match self.call(body)? {
            (_, ResponseBody::Pool { pool }) => Ok(pool),
            (raw, _) => Err(Self::unexpected(raw, "pool")),
        }
    }
}

impl Embedder for ExternalBackend {
    fn embed(&mut self, ids: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let body = RequestBody::Embed {
            ids: ids.to_vec(),
            texts: texts.to_vec(),
        };
        match self.call(body)? {
            (_, ResponseBody::Vectors { vectors }) if vectors.len() == ids.len() => Ok(vectors),
            (raw, ResponseBody::Vectors { .. }) => Err(Error::MalformedResponse {
                line: raw,
                reason: format!("expected {} vectors", ids.len()),
            }),
            (raw, _) => Err(Self::unexpected(raw, "vectors")),
        }
    }
}

//! Minimal backend speaking the line protocol, for tests and as a template
//! for real backends.
//!
//! ```text
//! bridge-stub-backend [--metric X] [--malformed-at N] [--sleep-ms MS]
//!                     [--sleep-at N] [--exit-at N]
//! ```
//!
//! `evaluate` answers a constant metric; `generate` echoes the seed examples
//! (or four fresh ones when zero-shot); `embed` returns small text features.
//! The `--*-at N` switches misbehave on the N-th request (1-based).

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use bridge_core::pool::Example;
use bridge_core::runtime::protocol::{Request, RequestBody, Response, ResponseBody};

#[derive(Default)]
struct Options {
    metric: f64,
    malformed_at: Option<usize>,
    sleep_ms: u64,
    sleep_at: Option<usize>,
    exit_at: Option<usize>,
}

fn parse_args() -> Result<Options, String> {
    let mut opts = Options {
        metric: 0.5,
        ..Default::default()
    };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let mut value = || args.next().ok_or(format!("{flag} needs a value"));
        match flag.as_str() {
            "--metric" => opts.metric = value()?.parse().map_err(|e| format!("{e}"))?,
            "--malformed-at" => {
                opts.malformed_at = Some(value()?.parse().map_err(|e| format!("{e}"))?)
            }
            "--sleep-ms" => opts.sleep_ms = value()?.parse().map_err(|e| format!("{e}"))?,
            "--sleep-at" => opts.sleep_at = Some(value()?.parse().map_err(|e| format!("{e}"))?),
            "--exit-at" => opts.exit_at = Some(value()?.parse().map_err(|e| format!("{e}"))?),
            other => return Err(format!("unknown flag {other}")),
        }
    }
    Ok(opts)
}

fn features(text: &str) -> Vec<f64> {
    let vowels = text.chars().filter(|c| "aeiou".contains(*c)).count();
    let digits = text.chars().filter(char::is_ascii_digit).count();
    vec![1.0, text.len() as f64, vowels as f64, digits as f64]
}

fn respond(body: RequestBody, opts: &Options) -> ResponseBody {
    match body {
        RequestBody::Evaluate { .. } => ResponseBody::Metric {
            metric: opts.metric,
        },
        RequestBody::Generate { seed_examples, .. } => {
            let pool = if seed_examples.is_empty() {
                (0..4)
                    .map(|i| Example::new(format!("s{i}"), format!("question {i}"), format!("{i}")))
                    .collect()
            } else {
                let mut pool = seed_examples.clone();
                // A repeated id, which the client is expected to drop.
                pool.push(seed_examples[0].clone());
                pool
            };
            ResponseBody::Pool { pool }
        }
        RequestBody::Embed { texts, .. } => ResponseBody::Vectors {
            vectors: texts.iter().map(|t| features(t)).collect(),
        },
    }
}

fn main() -> ExitCode {
    let opts = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("bridge-stub-backend: {e}");
            return ExitCode::from(2);
        }
    };
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    for (n, line) in stdin.lock().lines().enumerate() {
        let n = n + 1;
        let Ok(line) = line else { break };
        if opts.exit_at == Some(n) {
            eprintln!("stub backend: exiting on request {n} as instructed");
            return ExitCode::from(3);
        }
        if opts.sleep_at == Some(n) || (opts.sleep_at.is_none() && opts.sleep_ms > 0) {
            thread::sleep(Duration::from_millis(opts.sleep_ms));
        }
        let out = if opts.malformed_at == Some(n) {
            "this is not a response".to_string()
        } else {
            match Request::parse(&line) {
                Ok(req) => Response {
                    id: req.id,
                    body: respond(req.body, &opts),
                }
                .to_line(),
                Err(e) => {
                    eprintln!("stub backend: {e}");
                    continue;
                }
            }
        };
        if writeln!(stdout, "{out}")
            .and_then(|_| stdout.flush())
            .is_err()
        {
            break;
        }
    }
    ExitCode::SUCCESS
}

//! Reference NDJSON bridge backend around the built-in AEB world.
//!
//! Reads one request per line on stdin and answers with one response per
//! line on stdout. Invalid requests are reported on stderr and end the
//! process with status 1.
//!
//! Options for exercising bridge error handling:
//!   --delay-ms <N>     sleep before every response
//!   --exit-after <N>   exit with status 4 after N responses

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use sbt_core::scenario::{ScenarioSpec, TestInput};
use sbt_core::sim::protocol::{BridgeRequest, BridgeResponse};
use sbt_core::sim::{BuiltinSimulator, Simulator};

#[derive(Default)]
struct Options {
    delay: Option<Duration>,
    exit_after: Option<usize>,
}

fn parse_options() -> Result<Options, String> {
    let mut opts = Options::default();
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let mut value = || -> Result<u64, String> {
            args.next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| format!("{flag} needs a non-negative integer"))
        };
        match flag.as_str() {
            "--delay-ms" => opts.delay = Some(Duration::from_millis(value()?)),
            "--exit-after" => opts.exit_after = Some(value()? as usize),
            other => return Err(format!("unknown option {other}")),
        }
    }
    Ok(opts)
}

fn answer(sim: &BuiltinSimulator, line: &str) -> Result<String, String> {
    let request: BridgeRequest = serde_json::from_str(line).map_err(|e| format!("malformed request: {e}"))?;
    let mut spec = ScenarioSpec::new(request.scenario.clone(), Vec::new());
    spec.fixed_settings = request.parameters.clone();
    spec.fixed_settings.insert("dt".to_owned(), request.dt);
    let output = sim
        .simulate(&spec, &TestInput::new(Vec::new()), request.seed)
        .map_err(|e| format!("request {}: {e}", request.id))?;
    Ok(BridgeResponse::from_output(request.id, &output).to_line())
}

fn main() -> ExitCode {
    let opts = match parse_options() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("sbt-bridge-sim: {e}");
            return ExitCode::from(2);
        }
    };
    let sim = BuiltinSimulator::default();
    let stdout = io::stdout();
    let mut answered = 0usize;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { return ExitCode::from(1) };
        if line.trim().is_empty() {
            continue;
        }
        if opts.exit_after == Some(answered) {
            return ExitCode::from(4);
        }
        let response = match answer(&sim, &line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("sbt-bridge-sim: {e}");
                return ExitCode::from(1);
            }
        };
        if let Some(d) = opts.delay {
            std::thread::sleep(d);
        }
        let mut out = stdout.lock();
        if writeln!(out, "{response}").and_then(|_| out.flush()).is_err() {
            return ExitCode::from(1);
        }
        answered += 1;
    }
    ExitCode::SUCCESS
}

//! Command implementations behind the `stopwindow` binary. Each command
//! writes its result to the supplied writer and returns the process exit
//! code.
//!
//! Exit codes: 0 stop (or success), 3 exhausted, 1 I/O or parse failure,
//! 2 invalid configuration, 4 missing validation loss.

use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use crate::baselines::StrategySpec;
use crate::calculus::Window;
use crate::detector::{self, Decision, Detector, DetectorConfig};
use crate::error::{Error, Result};
use crate::protocol::{self, Request, Response};
use crate::report::{self, Format, Render};
use crate::trace::{self, Columns, CurveParams, TrainingTrace};

pub const EXIT_STOP: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;
pub const EXIT_MISSING_LOSS: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidN(_)
        | Error::InvalidD(_)
        | Error::InvalidParams(_)
        | Error::UnknownStrategy(_) => EXIT_CONFIG,
        Error::MissingLoss { .. } => EXIT_MISSING_LOSS,
        _ => EXIT_IO,
    }
}

/// Reads a trace from `path` (`-` for standard input). Files ending in
/// `.jsonl` or `.ndjson` are read as JSON lines, anything else as CSV.
pub fn load_trace(path: &Path, columns: &Columns) -> Result<TrainingTrace> {
    let (text, run_id) = if path.as_os_str() == "-" {
        let mut buf = String::new();
        io::stdin().read_to_string(&mut buf)?;
        (buf, "stdin".to_string())
    } else {
        let stem = path
            .file_stem()
            .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        (fs::read_to_string(path)?, stem)
    };
    let is_jsonl = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "ndjson")
    );
    let trace = if is_jsonl {
        trace::parse_jsonl_with(&text, columns)?
    } else {
        trace::parse_csv_with(&text, columns)?
    };
    Ok(trace.with_run_id(run_id))
}

pub fn render_decision(decision: &Decision, format: Format) -> String {
    let response = Response::from(decision);
    match format {
        Format::Json => format!("{}\n", response.to_line()),
        Format::Csv => {
            let mut out = String::from("action,window_start,window_end,stop_epoch,lag,best_epoch\n");
            out.push_str(&match decision {
                Decision::Continue => "continue,,,,,\n".to_string(),
                Decision::Stop { window, stop_epoch, lag } => format!(
                    "stop,{},{},{stop_epoch},{lag},\n",
                    window.start(),
                    window.end()
                ),
                Decision::Exhausted { best_epoch } => format!("exhausted,,,,,{best_epoch}\n"),
            });
            out
        }
        Format::Markdown => match decision {
            Decision::Continue => "**continue**\n".to_string(),
            Decision::Stop { window, stop_epoch, lag } => format!(
                "**stop**\n\n| Swindow | stop_epoch | lag |\n|---|---|---|\n| [{}, {}] | {stop_epoch} | {lag} |\n",
                window.start(),
                window.end()
            ),
            Decision::Exhausted { best_epoch } => {
                format!("**exhausted**\n\n| best_epoch |\n|---|\n| {best_epoch} |\n")
            }
        },
    }
}

fn decision_exit(decision: &Decision) -> i32 {
    match decision {
        Decision::Exhausted { .. } => EXIT_EXHAUSTED,
        _ => EXIT_STOP,
    }
}

pub fn cmd_detect(trace: &TrainingTrace, config: &DetectorConfig, format: Format, out: &mut impl Write) -> Result<i32> {
    let decision = detector::replay(trace, config)?;
    out.write_all(render_decision(&decision, format).as_bytes())?;
    Ok(decision_exit(&decision))
}

pub fn cmd_compare(
    trace: &TrainingTrace,
    config: &DetectorConfig,
    specs: &[StrategySpec],
    format: Format,
    out: &mut impl Write,
) -> Result<i32> {
    let table = report::compare(trace, config, specs)?;
    out.write_all(table.render(format).as_bytes())?;
    Ok(EXIT_STOP)
}

/// Statistics of the detected stop window. Exhausted runs print the
/// decision instead and exit 3.
pub fn cmd_stats(trace: &TrainingTrace, config: &DetectorConfig, format: Format, out: &mut impl Write) -> Result<i32> {
    let decision = detector::replay(trace, config)?;
    match &decision {
        Decision::Stop { window, .. } => {
            let window = Window::from_trace(trace, window.start(), window.end())?;
            let stats = report::window_stats(trace, &window)?;
            out.write_all(stats.render(format).as_bytes())?;
            Ok(EXIT_STOP)
        }
        _ => {
            out.write_all(render_decision(&decision, format).as_bytes())?;
            Ok(decision_exit(&decision))
        }
    }
}

pub fn cmd_simulate(params: &CurveParams, out: &mut impl Write) -> Result<i32> {
    let trace = trace::generate_synthetic(params)?;
    out.write_all(trace::to_csv(&trace).as_bytes())?;
    Ok(EXIT_STOP)
}

/// Serves one detector session over a line protocol. Every non-blank input
/// line gets exactly one response line, flushed immediately. The session
/// ends after a stop or exhausted response, at end of input, or after an
/// out-of-order epoch (exit 1). Malformed lines get an error response and
/// the session continues.
pub fn cmd_serve(config: &DetectorConfig, input: impl BufRead, out: &mut impl Write) -> Result<i32> {
    let mut detector = Detector::new(config.clone())?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                respond(out, &Response::error("malformed", e.to_string()))?;
                continue;
            }
        };
        match detector.feed(request.into_record()) {
            Ok(decision) => {
                respond(out, &Response::from(&decision))?;
                if !decision.is_continue() {
                    return Ok(decision_exit(&decision));
                }
            }
            Err(err @ Error::NonConsecutiveEpoch { .. }) => {
                respond(out, &Response::error(protocol::error_code(&err), err.to_string()))?;
                log::error!("{err}");
                return Ok(EXIT_IO);
            }
            Err(err) => {
                respond(out, &Response::error(protocol::error_code(&err), err.to_string()))?;
            }
        }
    }
    Ok(EXIT_STOP)
}

fn respond(out: &mut impl Write, response: &Response) -> io::Result<()> {
    writeln!(out, "{}", response.to_line())?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = "epoch,metric\n1,80.0\n2,81.0\n3,82.0\n4,81.8\n5,81.7\n6,81.6\n7,81.5\n8,81.4\n9,81.6\n10,81.8\n";

    fn run_serve(input: &str) -> (i32, Vec<String>) {
        let mut out = Vec::new();
        let code = cmd_serve(&DetectorConfig::default(), input.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        (code, text.lines().map(str::to_string).collect())
    }

    #[test]
    fn detect_golden_json() {
        let trace = trace::parse_csv(GOLDEN).unwrap();
        let mut out = Vec::new();
        let code = cmd_detect(&trace, &DetectorConfig::default(), Format::Json, &mut out).unwrap();
        assert_eq!(code, EXIT_STOP);
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"action\":\"stop\",\"swindow\":[3,8],\"stop_epoch\":3,\"lag\":1}\n"
        );
    }

    #[test]
    fn serve_empty_input() {
        assert_eq!(run_serve(""), (EXIT_STOP, vec![]));
    }

    #[test]
    fn serve_malformed_line_then_continue() {
        let input = "{\"epoch\":1,\"metric\":50}\nnot json\n{\"epoch\":2,\"metric\":51}\n";
        let (code, lines) = run_serve(input);
        assert_eq!(code, EXIT_STOP);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("{\"action\":\"error\",\"code\":\"malformed\""));
        assert_eq!(lines[2], "{\"action\":\"continue\"}");
    }

    #[test]
    fn serve_out_of_order_terminates() {
        let input = "{\"epoch\":1,\"metric\":50}\n{\"epoch\":3,\"metric\":51}\n{\"epoch\":4,\"metric\":51}\n";
        let (code, lines) = run_serve(input);
        assert_eq!(code, EXIT_IO);
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains("\"code\":\"out_of_order\""));
    }

    #[test]
    fn serve_invalid_metric_is_recoverable() {
        let input = "{\"epoch\":1,\"metric\":150}\n{\"epoch\":1,\"metric\":50}\n";
        let (_, lines) = run_serve(input);
        assert!(lines[0].contains("invalid_record"));
        assert_eq!(lines[1], "{\"action\":\"continue\"}");
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::MissingLoss { epoch: 1 }), EXIT_MISSING_LOSS);
        assert_eq!(exit_code(&Error::EmptyTrace), EXIT_IO);
        assert_eq!(exit_code(&Error::Io(io::Error::other("x"))), EXIT_IO);
    }

    #[test]
    fn decision_renderings() {
        let d = Decision::Exhausted { best_epoch: 7 };
        assert_eq!(render_decision(&d, Format::Csv), "action,window_start,window_end,stop_epoch,lag,best_epoch\nexhausted,,,,,7\n");
        assert!(render_decision(&d, Format::Markdown).contains("| 7 |"));
    }
}

use std::sync::OnceLock;

use regex::Regex;

use crate::model::{Diagnostic, DiagnosticKind, Location};

fn located_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?P<file>.*?)\((?P<line>\d+),(?P<col>\d+)\):\s*(?P<sev>Error|Related location|Warning|Info|Verification|Timed out)(?:\s+[A-Z]+\d+)?:?\s*(?P<msg>.*)$")
            .expect("static regex")
    })
}

fn bare_error() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:Error|Prover error|Fatal error)(?:\s+[A-Z]+\d+)?:\s*(?P<msg>.+)$").expect("static regex"))
}

fn summary_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"verifier finished with (?P<ok>\d+) verified, (?P<err>\d+) errors?(?:, (?P<to>\d+) time outs?)?")
            .expect("static regex")
    })
}

/// What the summary lines of a run say, independent of individual errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Summary {
    pub verified: Option<u32>,
    pub errors: Option<u32>,
    pub time_outs: u32,
    pub parse_errors: bool,
    pub resolution_errors: bool,
}

pub fn summarize(raw: &str) -> Summary {
    let mut s = Summary::default();
    for line in raw.lines() {
        if let Some(c) = summary_line().captures(line) {
            s.verified = c["ok"].parse().ok();
            s.errors = c["err"].parse().ok();
            s.time_outs = c.name("to").and_then(|m| m.as_str().parse().ok()).unwrap_or(0);
        }
        let l = line.to_ascii_lowercase();
        if l.contains("parse errors detected") {
            s.parse_errors = true;
        }
        if l.contains("resolution/type errors detected") || l.contains("resolution errors detected") {
            s.resolution_errors = true;
        }
    }
    s
}

fn kind_from_message(msg: &str, summary: &Summary) -> DiagnosticKind {
    let m = msg.to_ascii_lowercase();
    if m.contains("timed out") || m.contains("out of resource") || m.contains("time out") {
        DiagnosticKind::Timeout
    } else if m.contains("assertion might not hold")
        || m.contains("assertion could not be proved")
        || m.contains("assertion violation")
    {
        DiagnosticKind::AssertionFailure
    } else if m.contains("invariant") && m.contains("entry") {
        DiagnosticKind::InvariantOnEntry
    } else if m.contains("invariant") && m.contains("maintained") {
        DiagnosticKind::InvariantMaintenance
    } else if m.contains("postcondition") && (m.contains("might not hold") || m.contains("could not be proved")) {
        DiagnosticKind::PostconditionFailure
    } else if m.contains("precondition") && (m.contains("might not hold") || m.contains("could not be proved")) {
        DiagnosticKind::PreconditionCallFailure
    } else if summary.parse_errors || looks_like_parse_error(&m) {
        DiagnosticKind::SyntaxError
    } else if summary.resolution_errors || looks_like_resolution_error(&m) {
        DiagnosticKind::ResolutionError
    } else {
        DiagnosticKind::Unknown
    }
}

fn looks_like_parse_error(m: &str) -> bool {
    m.ends_with(" expected")
        || m.starts_with("invalid ")
        || m.contains("symbol not expected")
        || m.contains("unexpected")
        || m.contains("expected here")
}

fn looks_like_resolution_error(m: &str) -> bool {
    const CUES: &[&str] = &[
        "unresolved identifier",
        "type mismatch",
        "wrong number of",
        "does not exist",
        "undeclared",
        "incorrect type",
        "duplicate",
        "already defined",
        "not found",
        "must have type",
        "expected type",
        "cannot be assigned",
        "is not allowed",
        "ghost variables",
        "ghost fields",
    ];
    CUES.iter().any(|c| m.contains(c))
}

/// Turns the verifier's combined output into diagnostics.
///
/// Every error line becomes exactly one diagnostic. `Related location`
/// lines refine the preceding diagnostic instead of adding one. A run killed
/// without a single error line (`exit_code` of `None`) yields one timeout.
pub fn classify_diagnostics(raw_output: &str, exit_code: Option<i32>) -> Vec<Diagnostic> {
    let mut out = match classify_json(raw_output) {
        Some(ds) => ds,
        None => classify_text(raw_output),
    };
    if exit_code.is_none() && !out.iter().any(|d| d.kind != DiagnosticKind::Unknown) {
        out.push(Diagnostic::new(DiagnosticKind::Timeout, None, "verifier process killed after exceeding its time limit"));
    }
    out
}

fn classify_text(raw: &str) -> Vec<Diagnostic> {
    let summary = summarize(raw);
    let mut out: Vec<Diagnostic> = Vec::new();
    for line in raw.lines() {
        let line = line.trim_end();
        if let Some(c) = located_line().captures(line) {
            let sev = &c["sev"];
            let (ln, col) = (c["line"].parse().ok(), c["col"].parse().ok());
            let msg = c["msg"].trim().to_string();
            match sev {
                "Related location" => {
                    if let Some(prev) = out.last_mut() {
                        attach_related(prev, ln.unwrap_or(0), col.unwrap_or(0), &msg);
                    }
                }
                "Warning" | "Info" => {}
                _ => {
                    let full = if sev == "Error" { msg } else { format!("{sev} {msg}") };
                    let kind = kind_from_message(&full, &summary);
                    if sev != "Error" && kind != DiagnosticKind::Timeout {
                        continue;
                    }
                    out.push(Diagnostic {
                        kind,
                        file: c["file"].to_string(),
                        line: ln,
                        column: col,
                        message: line.to_string(),
                        secondary: None,
                    });
                }
            }
        } else if let Some(c) = bare_error().captures(line.trim_start()) {
            let kind = kind_from_message(&c["msg"], &summary);
            out.push(Diagnostic::new(kind, None, line.trim()));
        }
    }
    out
}

fn attach_related(prev: &mut Diagnostic, line: u32, column: u32, msg: &str) {
    if prev.kind == DiagnosticKind::PostconditionFailure && msg.to_ascii_lowercase().contains("postcondition") {
        // The actionable place for a postcondition failure is the clause itself.
        prev.secondary = prev.line.map(|l| Location { line: l, column: prev.column.unwrap_or(0) });
        prev.line = Some(line);
        prev.column = Some(column);
    } else if prev.secondary.is_none() {
        prev.secondary = Some(Location { line, column });
    }
}

/// Machine-readable output: one JSON object per line carrying `message`,
/// `severity` and `location.range.start`.
fn classify_json(raw: &str) -> Option<Vec<Diagnostic>> {
    let objects: Vec<serde_json::Value> = raw
        .lines()
        .filter(|l| l.trim_start().starts_with('{'))
        .filter_map(|l| serde_json::from_str::<serde_json::Value>(l.trim()).ok())
        .filter(|v| v.get("message").is_some())
        .collect();
    if objects.is_empty() {
        return None;
    }
    let summary = summarize(raw);
    let mut out = Vec::new();
    for v in objects {
        let is_error = match v.get("severity") {
            Some(serde_json::Value::Number(n)) => n.as_u64() == Some(2),
            Some(serde_json::Value::String(s)) => s.eq_ignore_ascii_case("error"),
            _ => true,
        };
        if !is_error {
            continue;
        }
        let message = v["message"].as_str().unwrap_or_default().to_string();
        let (file, line, column) = json_location(&v["location"]);
        let mut d = Diagnostic {
            kind: kind_from_message(&message, &summary),
            file,
            line,
            column,
            message: message.clone(),
            secondary: None,
        };
        if let Some(related) = v.get("relatedInformation").and_then(|r| r.as_array()).and_then(|r| r.first()) {
            let (_, rl, rc) = json_location(&related["location"]);
            let rmsg = related.get("message").and_then(|m| m.as_str()).unwrap_or("");
            if let Some(rl) = rl {
                attach_related(&mut d, rl, rc.unwrap_or(0), rmsg);
            }
        }
        out.push(d);
    }
    Some(out)
}

fn json_location(loc: &serde_json::Value) -> (String, Option<u32>, Option<u32>) {
    let file = loc.get("filename").or_else(|| loc.get("uri")).and_then(|f| f.as_str()).unwrap_or("").to_string();
    let start = &loc["range"]["start"];
    let line = start.get("line").and_then(|l| l.as_u64()).map(|l| l as u32);
    let col = start.get("character").or_else(|| start.get("column")).and_then(|c| c.as_u64()).map(|c| c as u32);
    (file, line, col)
}

//! File formats: `trace.csv`, `events.csv`, `metrics.json`, `certificates.json`.
//!
//! CSV numbers use Rust's shortest round-trip scientific notation, so every
//! value parses back to the exact `f64` that was simulated.

use std::io::{self, Write};

use cuk_pllf_core::{CertificateReport, Metrics, SwitchEvent, TraceSample};

pub const TRACE_HEADER: &str = "t,i_L1,i_L2,v_C1,v_C2,q,V";
pub const EVENTS_HEADER: &str = "t,j,facet,q_before,q_after";

/// Inclusive time interval `[t0, t1]` restricting CSV rows.
pub type Window = (f64, f64);

fn in_window(t: f64, window: Option<Window>) -> bool {
    window.is_none_or(|(t0, t1)| t >= t0 && t <= t1)
}

pub fn write_trace<W: Write>(
    mut w: W,
    trace: &[TraceSample],
    window: Option<Window>,
) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for s in trace.iter().filter(|s| in_window(s.t, window)) {
        let [a, b, c, d] = s.x.0;
        writeln!(w, "{:e},{a:e},{b:e},{c:e},{d:e},{},{:e}", s.t, s.q.q(), s.v)?;
    }
    w.flush()
}

pub fn write_events<W: Write>(
    mut w: W,
    events: &[SwitchEvent],
    window: Option<Window>,
) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in events.iter().filter(|e| in_window(e.t, window)) {
        writeln!(
            w,
            "{:e},{},{},{},{}",
            e.t,
            e.j,
            e.facet,
            e.q_before.q(),
            e.q_after.q()
        )?;
    }
    w.flush()
}

pub fn metrics_json(metrics: &Metrics) -> String {
    serde_json::to_string_pretty(metrics).expect("metrics serialize")
}

pub fn certificates_json(reports: &[CertificateReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Parses `T0:T1` (seconds).
pub fn parse_window(text: &str) -> Result<Window, String> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| format!("expected T0:T1, got `{text}`"))?;
    let t0: f64 = a.trim().parse().map_err(|e| format!("bad T0 `{a}`: {e}"))?;
    let t1: f64 = b.trim().parse().map_err(|e| format!("bad T1 `{b}`: {e}"))?;
    if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
        return Err(format!("window must satisfy T0 <= T1, got {t0}:{t1}"));
    }
    Ok((t0, t1))
}

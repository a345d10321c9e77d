//! Steady-state and transient figures of merit for a simulated run.

use crate::controller::SwitchState;
use crate::converter::EquilibriumPoint;
use crate::error::{Error, Result};
use crate::sim::{SimRun, TraceSample};
use crate::smallmat::Vec4;

/// Minimum number of full switching cycles in the steady window.
pub const MIN_STEADY_CYCLES: usize = 3;
/// Number of switching periods in the default steady window.
pub const DEFAULT_STEADY_PERIODS: usize = 10;
/// Slack on `V ≤ 1` when deciding that the run has settled.
pub const SETTLE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Metrics {
    /// Time-averaged state over the whole cycles in the steady window.
    pub mean: Vec4,
    /// Peak-to-peak excursion over the steady window.
    pub ripple_measured: Vec4,
    /// Largest departure from `x̄` away from the start state, minus half the
    /// measured ripple, floored at zero.
    pub overshoot: Vec4,
    /// First instant after which `V ≤ 1` for the rest of the run; `None` if
    /// the run ends outside the polytope.
    pub settle_time: Option<f64>,
    /// Mean spacing of the gate's rising edges in the steady window.
    pub period_measured: f64,
    /// Fraction of the whole cycles in the steady window spent with the
    /// transistor on.
    pub duty_measured: f64,
    /// Gate toggles over the whole run.
    pub switch_count: usize,
    /// Facet crossings for which the switching law prescribed no toggle.
    pub nonswitching_crossings: usize,
    #[cfg_attr(feature = "serde", serde(rename = "max_V_steady"))]
    pub max_v_steady: f64,
}

fn rising_edges(run: &SimRun) -> impl Iterator<Item = f64> + '_ {
    run.toggles()
        .filter(|e| e.q_after == SwitchState::On)
        .map(|e| e.t)
}

fn end_time(run: &SimRun) -> f64 {
    run.trace.last().map_or(0.0, |s| s.t)
}

/// Span covering the last ten switching periods of the run.
pub fn default_steady_window(run: &SimRun) -> Result<f64> {
    let edges: alloc::vec::Vec<f64> = rising_edges(run).collect();
    if edges.len() <= DEFAULT_STEADY_PERIODS {
        return Err(Error::InsufficientData {
            cycles: edges.len().saturating_sub(1),
            required: DEFAULT_STEADY_PERIODS,
        });
    }
    Ok(end_time(run) - edges[edges.len() - 1 - DEFAULT_STEADY_PERIODS])
}

/// Evaluates the run against its equilibrium. Steady-state figures use the
/// final `steady_window` seconds, transient figures the whole trace.
pub fn compute_metrics(
    run: &SimRun,
    equil: &EquilibriumPoint,
    steady_window: f64,
) -> Result<Metrics> {
    let (Some(first), Some(last)) = (run.trace.first(), run.trace.last()) else {
        return Err(Error::InsufficientData {
            cycles: 0,
            required: MIN_STEADY_CYCLES,
        });
    };
    let span = last.t - first.t;
    if !(steady_window > 0.0 && steady_window <= span) {
        return Err(Error::invalid(
            "steady_window",
            "must be positive and within the trace span",
            steady_window,
        ));
    }
    let start = last.t - steady_window;

    let edges: alloc::vec::Vec<f64> = rising_edges(run).filter(|&t| t >= start).collect();
    let cycles = edges.len().saturating_sub(1);
    if cycles < MIN_STEADY_CYCLES {
        return Err(Error::InsufficientData {
            cycles,
            required: MIN_STEADY_CYCLES,
        });
    }
    let period_measured = (edges[cycles] - edges[0]) / cycles as f64;

    let steady_from = run.trace.partition_point(|s| s.t < start);
    let steady = &run.trace[steady_from..];
    let mut lo = steady[0].x;
    let mut hi = steady[0].x;
    let mut max_v: f64 = 0.0;
    for s in steady {
        for i in 0..4 {
            lo[i] = lo[i].min(s.x[i]);
            hi[i] = hi[i].max(s.x[i]);
        }
        max_v = max_v.max(s.v);
    }
    let ripple = hi - lo;

    // Averages run over whole cycles, from the first to the last rising edge.
    let (c0, c1) = (edges[0], edges[cycles]);
    let mut integral = Vec4::zeros();
    let mut on_time = 0.0;
    let from = run.trace.partition_point(|s| s.t < c0).saturating_sub(1);
    for pair in run.trace[from..].windows(2) {
        let (a, b): (&TraceSample, &TraceSample) = (&pair[0], &pair[1]);
        if a.t >= c1 {
            break;
        }
        let (t0, t1) = (a.t.max(c0), b.t.min(c1));
        if t1 <= t0 {
            continue;
        }
        if a.q == SwitchState::On {
            on_time += t1 - t0;
        }
        let lerp = |t: f64| a.x + (b.x - a.x) * ((t - a.t) / (b.t - a.t));
        integral += (lerp(t0) + lerp(t1)) * (0.5 * (t1 - t0));
    }
    let cycle_span = c1 - c0;
    let mean = integral * (1.0 / cycle_span);

    let x0 = first.x;
    let mut overshoot = Vec4::zeros();
    for i in 0..4 {
        let dir = (equil.x_bar[i] - x0[i]).signum();
        let excursion = run
            .trace
            .iter()
            .map(|s| {
                let dev = s.x[i] - equil.x_bar[i];
                if equil.x_bar[i] == x0[i] {
                    dev.abs()
                } else {
                    dir * dev
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        overshoot[i] = (excursion - 0.5 * ripple[i]).max(0.0);
    }

    let settle_time = match run.trace.iter().rposition(|s| s.v > 1.0 + SETTLE_TOL) {
        None => Some(first.t),
        Some(i) => run.trace.get(i + 1).map(|s| s.t),
    };

    Ok(Metrics {
        mean,
        ripple_measured: ripple,
        overshoot,
        settle_time,
        period_measured,
        duty_measured: on_time / cycle_span,
        switch_count: run.toggles().count(),
        nonswitching_crossings: run.events.iter().filter(|e| !e.is_toggle()).count(),
        max_v_steady: max_v,
    })
}

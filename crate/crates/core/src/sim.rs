//! Event-driven simulation of the switched converter.
//!
//! Between switching instants each mode is an affine LTI system, so states
//! are advanced with the exact transition map `exp([A b̄; 0 0] dt)`. Only the
//! switching instants carry numerical error: they are found by sub-stepping
//! and bisecting on the switching law, to within `event_tol`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::controller::{
    decide, initial_switch_state, lyapunov_value, PolytopeSpec, SwitchState, Trigger,
};
use crate::converter::{
    build_subsystems, equilibrium, ConverterParams, OperatingSpec, SubsystemModel,
};
use crate::error::{Error, Result};
use crate::smallmat::{expm, Mat5, Vec4};

/// Sub-steps per `max_step` window used when scanning for facet crossings.
pub const SUBSTEPS_PER_WINDOW: u32 = 32;
/// More toggles than this inside one dwell window is reported as chattering.
pub const CHATTER_TOGGLES: usize = 10;
/// With `min_dwell = 0` the chatter window falls back to this many `event_tol`.
const CHATTER_FLOOR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SimConfig {
    /// Simulated time span (s).
    pub duration: f64,
    /// Initial state in absolute coordinates.
    pub x0: Vec4,
    /// Scan window; crossings are searched with sub-steps of `max_step / 32`.
    pub max_step: f64,
    /// Width of the final bisection bracket around a switching instant (s).
    pub event_tol: f64,
    /// Minimum interval between consecutive toggles (s).
    pub min_dwell: f64,
    /// Spacing of the regular trace samples (s).
    pub sample_stride: f64,
}

impl SimConfig {
    /// Defaults tied to the switching period: `max_step = T_s/50`,
    /// `sample_stride = T_s/100`, `min_dwell = T_s/1000`, `event_tol = 1 ps`,
    /// starting from the discharged circuit.
    pub fn defaults(spec: &OperatingSpec, duration: f64) -> Self {
        let ts = spec.period;
        SimConfig {
            duration,
            x0: Vec4::zeros(),
            max_step: ts / 50.0,
            event_tol: 1e-12,
            min_dwell: ts / 1000.0,
            sample_stride: ts / 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive and finite", v))
            }
        };
        positive("duration", self.duration)?;
        positive("max_step", self.max_step)?;
        positive("event_tol", self.event_tol)?;
        positive("sample_stride", self.sample_stride)?;
        if self.event_tol >= self.max_step {
            return Err(Error::invalid(
                "event_tol",
                "must be smaller than max_step",
                self.event_tol,
            ));
        }
        if self.max_step > self.duration {
            return Err(Error::invalid(
                "max_step",
                "must not exceed duration",
                self.max_step,
            ));
        }
        if !(self.min_dwell.is_finite() && self.min_dwell >= 0.0) {
            return Err(Error::invalid(
                "min_dwell",
                "must be non-negative and finite",
                self.min_dwell,
            ));
        }
        if !self.x0.is_finite() {
            return Err(Error::invalid("x0", "entries must be finite", f64::NAN));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub x: Vec4,
    pub q: SwitchState,
    /// Lyapunov value of `x - x̄`.
    pub v: f64,
}

/// A facet crossing. Toggles have `q_before != q_after`; crossings for which
/// the switching law prescribes no action are recorded with equal states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    pub j: usize,
    pub facet: i8,
    pub q_before: SwitchState,
    pub q_after: SwitchState,
}

impl SwitchEvent {
    pub fn is_toggle(&self) -> bool {
        self.q_before != self.q_after
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimRun {
    pub trace: Vec<TraceSample>,
    pub events: Vec<SwitchEvent>,
    pub x_bar: Vec4,
}

impl SimRun {
    pub fn toggles(&self) -> impl Iterator<Item = &SwitchEvent> {
        self.events.iter().filter(|e| e.is_toggle())
    }
}

/// First switching instant found by [`find_crossing`], relative to the start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub j: usize,
    pub facet: i8,
}

/// Exact shifted-coordinate flow of one mode with a cached sub-step map.
struct Flow {
    generator: Mat5,
    norm: f64,
    step: f64,
    step_map: Mat5,
}

/// Below this value of `‖G‖₁ dt` the series for `exp(G dt) v` is summed
/// directly on the vector instead of forming the matrix.
const SERIES_NORM_MAX: f64 = 0.125;

impl Flow {
    fn new(model: &SubsystemModel, step: f64) -> Result<Self> {
        let generator = model.generator();
        let step_map = expm(&generator, step)?;
        Ok(Flow {
            generator,
            norm: generator.norm_1(),
            step,
            step_map,
        })
    }

    fn advance(&self, y: &Vec4, dt: f64) -> Vec4 {
        if dt == self.step {
            return (self.step_map * y.lift()).head();
        }
        if dt == 0.0 {
            return *y;
        }
        if self.norm * dt <= SERIES_NORM_MAX {
            return self.series_action(y, dt);
        }
        let map = expm(&self.generator, dt).expect("finite generator and non-negative step");
        (map * y.lift()).head()
    }

    /// `exp(G dt) (y, 1)` summed term by term; each term shrinks by at least
    /// a factor 8, so the loop stops after roughly 18 matrix-vector products.
    fn series_action(&self, y: &Vec4, dt: f64) -> Vec4 {
        let mut term = y.lift();
        let mut sum = term;
        for k in 1..40 {
            term = (self.generator * term) * (dt / f64::from(k));
            sum += term;
            if term.max_abs() <= f64::EPSILON * 1e-2 * sum.max_abs() {
                break;
            }
        }
        sum.head()
    }

    /// Shrinks `(lo, hi]` around the first point where `hit` becomes true,
    /// given `hit(y(hi))`. Returns the offset `hi` and the state there.
    fn bisect(
        &self,
        y: &Vec4,
        mut lo: f64,
        mut hi: f64,
        mut y_hi: Vec4,
        tol: f64,
        hit: impl Fn(&Vec4) -> bool,
    ) -> (f64, Vec4) {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let y_mid = self.advance(y, mid);
            if hit(&y_mid) {
                hi = mid;
                y_hi = y_mid;
            } else {
                lo = mid;
            }
        }
        (hi, y_hi)
    }
}

/// Exact flow of `ẏ = A y + b̄` over `dt`.
pub fn propagate_exact(model: &SubsystemModel, y: &Vec4, dt: f64) -> Result<Vec4> {
    let map = expm(&model.generator(), dt)?;
    Ok((map * y.lift()).head())
}

/// Earliest instant in `(0, window]` at which the switching law toggles `q`
/// while flowing in `model`, located to within `event_tol`.
pub fn find_crossing(
    model: &SubsystemModel,
    y: &Vec4,
    spec: &PolytopeSpec,
    q: SwitchState,
    window: f64,
    event_tol: f64,
) -> Result<Option<Crossing>> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::invalid(
            "window",
            "must be positive and finite",
            window,
        ));
    }
    if event_tol.is_nan() || event_tol <= 0.0 {
        return Err(Error::invalid("event_tol", "must be positive", event_tol));
    }
    let h = window / f64::from(SUBSTEPS_PER_WINDOW);
    let flow = Flow::new(model, h)?;
    let toggles = |y: &Vec4| decide(spec, q, y).next != q;
    let mut y_prev = *y;
    for n in 0..SUBSTEPS_PER_WINDOW {
        let y_next = flow.advance(&y_prev, h);
        if toggles(&y_next) {
            let lo = f64::from(n) * h;
            let (s, y_hit) = flow.bisect(y, lo, lo + h, y_next, event_tol, toggles);
            let cause = decide(spec, q, &y_hit).cause.expect("toggle has a cause");
            return Ok(Some(Crossing {
                t: s,
                j: cause.j,
                facet: cause.facet,
            }));
        }
        y_prev = y_next;
    }
    Ok(None)
}

/// Side of the unit slab each controlled coordinate sits on: `+1` when
/// `k_j y_j ≥ 1`, `-1` when `≤ -1`, else 0.
fn facet_sides(spec: &PolytopeSpec, y: &Vec4) -> [i8; 4] {
    let mut sides = [0; 4];
    for (j, v) in spec.scaled(y) {
        sides[j - 1] = if v >= 1.0 {
            1
        } else if v <= -1.0 {
            -1
        } else {
            0
        };
    }
    sides
}

struct Engine<'a> {
    spec: &'a PolytopeSpec,
    cfg: &'a SimConfig,
    x_bar: Vec4,
    flows: [Flow; 2],
    t: f64,
    y: Vec4,
    q: SwitchState,
    sides: [i8; 4],
    last_toggle: f64,
    recent: VecDeque<f64>,
    chatter_window: f64,
    trace: Vec<TraceSample>,
    events: Vec<SwitchEvent>,
}

impl Engine<'_> {
    fn flow(&self) -> &Flow {
        match self.q {
            SwitchState::On => &self.flows[0],
            SwitchState::Off => &self.flows[1],
        }
    }

    fn sample(&mut self) {
        self.trace.push(TraceSample {
            t: self.t,
            x: self.y + self.x_bar,
            q: self.q,
            v: lyapunov_value(self.spec, &self.y),
        });
    }

    fn toggle(&mut self, cause: Trigger) -> Result<()> {
        let next = self.q.toggled();
        self.events.push(SwitchEvent {
            t: self.t,
            j: cause.j,
            facet: cause.facet,
            q_before: self.q,
            q_after: next,
        });
        self.q = next;
        self.last_toggle = self.t;
        self.sides = facet_sides(self.spec, &self.y);
        self.recent.push_back(self.t);
        while self
            .recent
            .front()
            .is_some_and(|&t0| self.t - t0 > self.chatter_window)
        {
            self.recent.pop_front();
        }
        if self.recent.len() > CHATTER_TOGGLES {
            return Err(Error::Chatter {
                t: self.t,
                j: cause.j,
                toggles: self.recent.len(),
            });
        }
        self.sample();
        Ok(())
    }

    /// Records facet entries between the current state and `y_end` (reached
    /// after `dt`) for which the law keeps the gate unchanged. `skip` is the
    /// index that is about to toggle.
    fn note_silent_crossings(&mut self, y_end: &Vec4, dt: f64, skip: Option<usize>) {
        let new_sides = facet_sides(self.spec, y_end);
        if new_sides == self.sides {
            return;
        }
        let pending = decide(self.spec, self.q, y_end).next != self.q;
        for j in self.spec.indices().iter() {
            let side = new_sides[j - 1];
            if side == 0 || side == self.sides[j - 1] || Some(j) == skip || pending {
                continue;
            }
            let k = self.spec.coefficient(j).expect("controlled");
            let hit = |y: &Vec4| f64::from(side) * k * y[j - 1] >= 1.0;
            let (s, _) = self
                .flow()
                .bisect(&self.y, 0.0, dt, *y_end, self.cfg.event_tol, hit);
            self.events.push(SwitchEvent {
                t: self.t + s,
                j,
                facet: side,
                q_before: self.q,
                q_after: self.q,
            });
        }
        self.sides = new_sides;
    }

    fn run(mut self) -> Result<SimRun> {
        let cfg = self.cfg;
        let substep = cfg.max_step / f64::from(SUBSTEPS_PER_WINDOW);
        let mut sample_index = 1u64;
        let mut next_sample = cfg.sample_stride;
        self.sample();
        while self.t < cfg.duration {
            let hold_until = self.last_toggle + cfg.min_dwell;
            let holding = self.t < hold_until;
            if !holding {
                if let Some(cause) = decide(self.spec, self.q, &self.y).cause {
                    self.toggle(cause)?;
                    continue;
                }
            }
            let mut target = (self.t + substep).min(next_sample).min(cfg.duration);
            if holding {
                target = target.min(hold_until);
            }
            let dt = target - self.t;
            let y_end = self.flow().advance(&self.y, dt);
            let toggles = |y: &Vec4| decide(self.spec, self.q, y).next != self.q;
            if !holding && toggles(&y_end) {
                let (s, y_hit) =
                    self.flow()
                        .bisect(&self.y, 0.0, dt, y_end, cfg.event_tol, toggles);
                let cause = decide(self.spec, self.q, &y_hit)
                    .cause
                    .expect("toggle has a cause");
                self.note_silent_crossings(&y_hit, s, Some(cause.j));
                self.t = if s == dt { target } else { self.t + s };
                self.y = y_hit;
                self.toggle(cause)?;
            } else {
                self.note_silent_crossings(&y_end, dt, None);
                self.t = target;
                self.y = y_end;
            }
            if self.t >= next_sample {
                if self.trace.last().map(|s| s.t) != Some(self.t) {
                    self.sample();
                }
                sample_index += 1;
                next_sample = sample_index as f64 * cfg.sample_stride;
            }
        }
        if self.trace.last().map(|s| s.t) != Some(self.t) {
            self.sample();
        }
        Ok(SimRun {
            trace: self.trace,
            events: self.events,
            x_bar: self.x_bar,
        })
    }
}

/// Simulates the closed loop from `cfg.x0`.
///
/// The gate starts at [`initial_switch_state`]. Trace samples are recorded on
/// the `sample_stride` grid and at every toggle (with the post-toggle gate).
pub fn run_simulation(
    p: &ConverterParams,
    op: &OperatingSpec,
    spec: &PolytopeSpec,
    cfg: &SimConfig,
) -> Result<SimRun> {
    cfg.validate()?;
    let (on, off) = build_subsystems(p, op)?;
    let x_bar = equilibrium(p, op)?.x_bar;
    let substep = cfg.max_step / f64::from(SUBSTEPS_PER_WINDOW);
    let y0 = cfg.x0 - x_bar;
    let engine = Engine {
        spec,
        cfg,
        x_bar,
        flows: [Flow::new(&on, substep)?, Flow::new(&off, substep)?],
        t: 0.0,
        y: y0,
        q: initial_switch_state(spec, &y0),
        sides: facet_sides(spec, &y0),
        last_toggle: f64::NEG_INFINITY,
        recent: VecDeque::new(),
        chatter_window: cfg.min_dwell.max(CHATTER_FLOOR * cfg.event_tol),
        trace: Vec::new(),
        events: Vec::new(),
    };
    engine.run()
}

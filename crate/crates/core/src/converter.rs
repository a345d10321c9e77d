//! The Ćuk converter in continuous conduction mode as a pair of affine modes.
//!
//! Subsystem 1 is the transistor-on interval, subsystem 2 the diode-on
//! interval. Both share the input vector `[v_in/L1, 0, 0, 0]`. In shifted
//! coordinates `y = x - x̄` each mode becomes `ẏ = A_i y + b̄_i` with
//! `b̄_i = A_i x̄ + b`.

use crate::error::{Error, Result};
use crate::smallmat::{augment, Mat4, Mat5, Vec4};

/// Physical circuit constants in SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConverterParams {
    /// Input inductance (H).
    pub l1: f64,
    /// Output inductance (H).
    pub l2: f64,
    /// Coupling capacitance (F).
    pub c1: f64,
    /// Output capacitance (F).
    pub c2: f64,
    /// Load resistance (Ω).
    pub r: f64,
    /// Input voltage (V).
    pub v_in: f64,
}

impl ConverterParams {
    pub fn new(l1: f64, l2: f64, c1: f64, c2: f64, r: f64, v_in: f64) -> Result<Self> {
        let p = ConverterParams {
            l1,
            l2,
            c1,
            c2,
            r,
            v_in,
        };
        p.validate()?;
        Ok(p)
    }

    /// L1 = L2 = 1 mH, C1 = 1 µF, C2 = 20 µF, R = 5 Ω, v_in = 10 V.
    pub const fn reference() -> Self {
        ConverterParams {
            l1: 1e-3,
            l2: 1e-3,
            c1: 1e-6,
            c2: 20e-6,
            r: 5.0,
            v_in: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("L1", self.l1),
            ("L2", self.l2),
            ("C1", self.c1),
            ("C2", self.c2),
            ("R", self.r),
            ("v_in", self.v_in),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    "must be strictly positive and finite",
                    v,
                ));
            }
        }
        Ok(())
    }
}

/// Duty ratio and switching period the controller is designed for.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OperatingSpec {
    pub duty: f64,
    /// Switching period (s).
    pub period: f64,
}

impl OperatingSpec {
    pub fn new(duty: f64, period: f64) -> Result<Self> {
        let s = OperatingSpec { duty, period };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::invalid(
                "d",
                "duty ratio must lie strictly inside (0, 1)",
                self.duty,
            ));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::invalid(
                "T_s",
                "switching period must be positive and finite",
                self.period,
            ));
        }
        Ok(())
    }

    /// Ratio `a = -d/(1-d)` linking the two shifted offsets.
    pub fn offset_ratio(&self) -> f64 {
        -self.duty / (1.0 - self.duty)
    }
}

/// One affine operating mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsystemModel {
    /// 1 for transistor on, 2 for diode on.
    pub index: u8,
    pub a: Mat4,
    pub b: Vec4,
    /// Offset in shifted coordinates, `A x̄ + b`.
    pub b_shift: Vec4,
}

impl SubsystemModel {
    /// Generator `[A b̄; 0 0]` of the shifted affine flow.
    pub fn generator(&self) -> Mat5 {
        augment(&self.a, &self.b_shift)
    }

    /// Vector field `A y + b̄` in shifted coordinates.
    pub fn shifted_field(&self, y: &Vec4) -> Vec4 {
        self.a * *y + self.b_shift
    }
}

/// Equilibrium of the averaged converter and the predicted steady-state
/// peak-to-peak ripple of every state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumPoint {
    pub x_bar: Vec4,
    pub ripple: Vec4,
}

fn transistor_on_matrix(p: &ConverterParams) -> Mat4 {
    let rc2 = p.r * p.c2;
    Mat4::from_rows([
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0 / p.l2, 1.0 / p.l2],
        [0.0, -1.0 / p.c1, 0.0, 0.0],
        [0.0, -1.0 / p.c2, 0.0, -1.0 / rc2],
    ])
}

fn diode_on_matrix(p: &ConverterParams) -> Mat4 {
    let rc2 = p.r * p.c2;
    Mat4::from_rows([
        [0.0, 0.0, -1.0 / p.l1, 0.0],
        [0.0, 0.0, 0.0, 1.0 / p.l2],
        [1.0 / p.c1, 0.0, 0.0, 0.0],
        [0.0, -1.0 / p.c2, 0.0, -1.0 / rc2],
    ])
}

fn input_vector(p: &ConverterParams) -> Vec4 {
    Vec4::new([p.v_in / p.l1, 0.0, 0.0, 0.0])
}

fn equilibrium_state(p: &ConverterParams, spec: &OperatingSpec) -> Vec4 {
    let d = spec.duty;
    let v = p.v_in;
    let off = 1.0 - d;
    Vec4::new([
        d * d * v / (off * off * p.r),
        d * v / (off * p.r),
        v / off,
        -d * v / off,
    ])
}

/// Builds both operating modes for the given design point.
pub fn build_subsystems(
    p: &ConverterParams,
    spec: &OperatingSpec,
) -> Result<(SubsystemModel, SubsystemModel)> {
    p.validate()?;
    spec.validate()?;
    let x_bar = equilibrium_state(p, spec);
    let b = input_vector(p);
    let make = |index, a: Mat4| SubsystemModel {
        index,
        a,
        b,
        b_shift: a * x_bar + b,
    };
    Ok((
        make(1, transistor_on_matrix(p)),
        make(2, diode_on_matrix(p)),
    ))
}

/// Volt-second / ampere-second balance equilibrium together with the
/// steady-state ripple estimates.
pub fn equilibrium(p: &ConverterParams, spec: &OperatingSpec) -> Result<EquilibriumPoint> {
    p.validate()?;
    spec.validate()?;
    let d = spec.duty;
    let ts = spec.period;
    let v = p.v_in;
    let ripple = Vec4::new([
        v * d * ts / p.l1,
        v * d * ts / p.l2,
        v * d * d * ts / ((1.0 - d) * p.r * p.c1),
        d * v * ts * ts / (8.0 * p.l2 * p.c2),
    ]);
    Ok(EquilibriumPoint {
        x_bar: equilibrium_state(p, spec),
        ripple,
    })
}

/// Duty-weighted average of both vector fields evaluated at the equilibrium,
/// `d (A1 x̄ + b) + (1 - d)(A2 x̄ + b)`. Vanishes up to rounding.
pub fn averaged_balance_residual(p: &ConverterParams, spec: &OperatingSpec) -> Result<Vec4> {
    let (on, off) = build_subsystems(p, spec)?;
    let d = spec.duty;
    Ok(on.b_shift * d + off.b_shift * (1.0 - d))
}

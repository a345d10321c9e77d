//! Piecewise linear Lyapunov function `V(y) = max_{j∈J} |k_j y_j|`, its unit
//! polytope and the facet-triggered switching law built on it.
//!
//! Indices `j` are 1-based state positions, matching `x = [i_L1, i_L2, v_C1, v_C2]`.

use core::fmt;

use crate::converter::{ConverterParams, OperatingSpec};
use crate::error::{Error, Result};
use crate::smallmat::Vec4;

/// A subset of `{1, 2, 3, 4}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IndexSet(u8);

impl IndexSet {
    pub const ALL: IndexSet = IndexSet(0b1111);

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &j in indices {
            if !(1..=4).contains(&j) {
                return Err(Error::invalid("J", "indices must lie in 1..=4", j as f64));
            }
            bits |= 1 << (j - 1);
        }
        Ok(IndexSet(bits))
    }

    pub fn contains(&self, j: usize) -> bool {
        (1..=4).contains(&j) && self.0 & (1 << (j - 1)) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=4).filter(move |&j| self.contains(j))
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

/// Controlled index set and its coefficients.
///
/// Coefficients for indices outside `J` are stored as zero and never read.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PolytopeSpec {
    indices: IndexSet,
    k: [f64; 4],
    rho: f64,
}

impl PolytopeSpec {
    /// Builds a polytope from raw coefficients.
    ///
    /// Only structural requirements are enforced here: `1 ∈ J`, `k_1 > 0`,
    /// every used coefficient finite and nonzero, `rho > 0`. The sign and
    /// magnitude rules tying `k` to a design point are guaranteed by
    /// [`coefficients_from_spec`] instead, so hand-built (even wrong-signed)
    /// polytopes remain expressible for certificate checks.
    pub fn new(indices: IndexSet, k: [f64; 4], rho: f64) -> Result<Self> {
        if !indices.contains(1) {
            return Err(Error::invalid(
                "J",
                "index 1 (i_L1) must always be controlled",
                0.0,
            ));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid("rho", "must be positive and finite", rho));
        }
        let mut stored = [0.0; 4];
        for j in indices.iter() {
            let kj = k[j - 1];
            if !kj.is_finite() || kj == 0.0 {
                return Err(Error::invalid(
                    COEFF_NAMES[j - 1],
                    "must be finite and nonzero",
                    kj,
                ));
            }
            stored[j - 1] = kj;
        }
        if stored[0] <= 0.0 {
            return Err(Error::invalid("k1", "must be positive", stored[0]));
        }
        Ok(PolytopeSpec {
            indices,
            k: stored,
            rho,
        })
    }

    pub fn indices(&self) -> IndexSet {
        self.indices
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `k_j` if `j ∈ J`.
    pub fn coefficient(&self, j: usize) -> Option<f64> {
        self.indices.contains(j).then(|| self.k[j - 1])
    }

    /// Replaces one coefficient, keeping the structural checks of [`Self::new`].
    pub fn with_coefficient(&self, j: usize, k: f64) -> Result<Self> {
        if !self.indices.contains(j) {
            return Err(Error::invalid(
                "J",
                "coefficient index is not controlled",
                j as f64,
            ));
        }
        let mut all = self.k;
        all[j - 1] = k;
        PolytopeSpec::new(self.indices, all, self.rho)
    }

    /// `(j, k_j y_j)` for every controlled index, ascending in `j`.
    pub fn scaled<'a>(&'a self, y: &'a Vec4) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices
            .iter()
            .map(move |j| (j, self.k[j - 1] * y[j - 1]))
    }
}

const COEFF_NAMES: [&str; 4] = ["k1", "k2", "k3", "k4"];

/// Transistor gate state. `On` selects subsystem 1, `Off` subsystem 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SwitchState {
    Off,
    On,
}

impl SwitchState {
    pub fn q(self) -> u8 {
        match self {
            SwitchState::Off => 0,
            SwitchState::On => 1,
        }
    }

    pub fn from_q(q: u8) -> Option<Self> {
        match q {
            0 => Some(SwitchState::Off),
            1 => Some(SwitchState::On),
            _ => None,
        }
    }

    pub fn toggled(self) -> Self {
        match self {
            SwitchState::Off => SwitchState::On,
            SwitchState::On => SwitchState::Off,
        }
    }

    /// Index of the active converter subsystem.
    pub fn subsystem(self) -> u8 {
        match self {
            SwitchState::On => 1,
            SwitchState::Off => 2,
        }
    }
}

/// Facet that caused a toggle: `k_j y_j = facet` with `facet = ±1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trigger {
    pub j: usize,
    pub facet: i8,
}

/// Result of evaluating the switching law.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub next: SwitchState,
    /// Set whenever `next` differs from the input state.
    pub cause: Option<Trigger>,
}

/// Derives `ρ` and the coefficients `k_j` from the design point.
///
/// `k2_fraction` and `k4_fraction` are signed fractions of the strict upper
/// bounds `L2/ρ` and `8 L2 C2 / (ρ T_s)`; their magnitude must stay below 1.
pub fn coefficients_from_spec(
    p: &ConverterParams,
    spec: &OperatingSpec,
    indices: IndexSet,
    k2_fraction: f64,
    k4_fraction: f64,
) -> Result<PolytopeSpec> {
    p.validate()?;
    spec.validate()?;
    if !indices.contains(1) {
        return Err(Error::invalid(
            "J",
            "index 1 (i_L1) must always be controlled",
            0.0,
        ));
    }
    let check_fraction = |name, f: f64| {
        if f.is_finite() && f.abs() < 1.0 && f != 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(name, "magnitude must lie in (0, 1)", f))
        }
    };
    if indices.contains(2) {
        check_fraction("k2_fraction", k2_fraction)?;
    }
    if indices.contains(4) {
        check_fraction("k4_fraction", k4_fraction)?;
    }
    let (d, ts) = (spec.duty, spec.period);
    let rho = d * p.v_in * ts / 2.0;
    let all = [
        p.l1 / rho,
        k2_fraction * p.l2 / rho,
        -(1.0 - d) * p.r * p.c1 / (d * rho),
        k4_fraction * 8.0 * p.l2 * p.c2 / (rho * ts),
    ];
    let mut k = [0.0; 4];
    for j in indices.iter() {
        k[j - 1] = all[j - 1];
    }
    PolytopeSpec::new(indices, k, rho)
}

/// `V(y) = max_{j∈J} |k_j y_j|`.
pub fn lyapunov_value(spec: &PolytopeSpec, y: &Vec4) -> f64 {
    spec.scaled(y).fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Closed membership `V(y) ≤ 1`.
pub fn in_polytope(spec: &PolytopeSpec, y: &Vec4) -> bool {
    lyapunov_value(spec, y) <= 1.0
}

/// Largest `|k_j y_j| ≥ 1` with ties going to the smaller index.
fn dominant_violation(spec: &PolytopeSpec, y: &Vec4) -> Option<(usize, f64)> {
    spec.scaled(y).filter(|(_, v)| v.abs() >= 1.0).fold(
        None,
        |best: Option<(usize, f64)>, (j, v)| match best {
            Some((_, bv)) if bv.abs() >= v.abs() => best,
            _ => Some((j, v)),
        },
    )
}

/// Evaluates the switching law and reports which facet caused a toggle.
///
/// With `q = 1` any `k_j y_j ≥ 1` turns the transistor off; with `q = 0` any
/// `k_j y_j ≤ -1` turns it on; otherwise the state is held. When violations
/// exist on both sides at once the largest `|k_j y_j|` decides regardless of
/// `q`.
pub fn decide(spec: &PolytopeSpec, state: SwitchState, y: &Vec4) -> Decision {
    let mut upper = None;
    let mut lower = None;
    for (j, v) in spec.scaled(y) {
        if v >= 1.0 && upper.is_none() {
            upper = Some(j);
        }
        if v <= -1.0 && lower.is_none() {
            lower = Some(j);
        }
    }
    let (next, cause) = match (upper, lower) {
        (Some(_), Some(_)) => {
            let (j, v) = dominant_violation(spec, y).expect("violations exist on both sides");
            if v >= 1.0 {
                (SwitchState::Off, Trigger { j, facet: 1 })
            } else {
                (SwitchState::On, Trigger { j, facet: -1 })
            }
        }
        (Some(j), None) => (SwitchState::Off, Trigger { j, facet: 1 }),
        (None, Some(j)) => (SwitchState::On, Trigger { j, facet: -1 }),
        (None, None) => {
            return Decision {
                next: state,
                cause: None,
            }
        }
    };
    if next == state {
        Decision { next, cause: None }
    } else {
        Decision {
            next,
            cause: Some(cause),
        }
    }
}

/// The switching law applied once.
pub fn switch_decide(spec: &PolytopeSpec, state: SwitchState, y: &Vec4) -> SwitchState {
    decide(spec, state, y).next
}

/// Gate state at the start of a run: set by the dominant facet violation, or
/// `On` when `y0` already lies inside the polytope.
pub fn initial_switch_state(spec: &PolytopeSpec, y0: &Vec4) -> SwitchState {
    match dominant_violation(spec, y0) {
        Some((_, v)) if v <= -1.0 => SwitchState::On,
        Some(_) => SwitchState::Off,
        None => SwitchState::On,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::equilibrium;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn set(j: &[usize]) -> IndexSet {
        IndexSet::from_indices(j).unwrap()
    }

    fn design() -> (ConverterParams, OperatingSpec) {
        (
            ConverterParams::reference(),
            OperatingSpec::new(0.5, 1e-5).unwrap(),
        )
    }

    fn poly(j: &[usize], k: [f64; 4]) -> PolytopeSpec {
        PolytopeSpec::new(set(j), k, 2.5e-5).unwrap()
    }

    #[test]
    fn two_variable_coefficients() {
        let (p, s) = design();
        let spec = coefficients_from_spec(&p, &s, set(&[1, 2]), -0.5, 0.0).unwrap();
        assert!(rel(spec.rho(), 2.5e-5) < 1e-12);
        assert!(rel(spec.coefficient(1).unwrap(), 40.0) < 1e-12);
        assert!(rel(spec.coefficient(2).unwrap(), -20.0) < 1e-12);
        assert_eq!(spec.coefficient(3), None);
    }

    #[test]
    fn three_and_four_variable_coefficients() {
        let (p, s) = design();
        let three = coefficients_from_spec(&p, &s, set(&[1, 2, 3]), -0.5, 0.0).unwrap();
        assert!(rel(three.coefficient(3).unwrap(), -0.2) < 1e-12);
        let four = coefficients_from_spec(&p, &s, IndexSet::ALL, -0.75, -1.0 / 800.0).unwrap();
        assert!(rel(four.coefficient(2).unwrap(), -30.0) < 1e-12);
        assert!(rel(four.coefficient(4).unwrap(), -0.8) < 1e-12);
    }

    #[test]
    fn coefficient_errors() {
        let (p, s) = design();
        assert!(coefficients_from_spec(&p, &s, set(&[2, 3]), -0.5, 0.0).is_err());
        assert!(coefficients_from_spec(&p, &s, set(&[1, 2]), 1.0, 0.0).is_err());
        assert!(coefficients_from_spec(&p, &s, set(&[1, 2]), -1.2, 0.0).is_err());
        assert!(coefficients_from_spec(&p, &s, set(&[1, 4]), 0.0, 1.0).is_err());
        // Unused fractions are not validated.
        assert!(coefficients_from_spec(&p, &s, set(&[1, 3]), 5.0, 5.0).is_ok());
        assert!(IndexSet::from_indices(&[0]).is_err());
        assert!(IndexSet::from_indices(&[5]).is_err());
    }

    #[test]
    fn lyapunov_value_examples() {
        let two = poly(&[1, 2], [40.0, -20.0, 0.0, 0.0]);
        assert_eq!(lyapunov_value(&two, &Vec4::zeros()), 0.0);
        let v = lyapunov_value(&two, &Vec4::new([0.02, 0.01, 99.0, 99.0]));
        assert!((v - 0.8).abs() < 1e-15);
        let four = poly(&[1, 2, 3, 4], [40.0, -30.0, -0.2, -0.8]);
        let v = lyapunov_value(&four, &Vec4::new([0.0, 0.0, -5.0, 0.0]));
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polytope_membership_is_closed() {
        let one = poly(&[1], [40.0, 0.0, 0.0, 0.0]);
        assert!(in_polytope(&one, &Vec4::zeros()));
        assert!(in_polytope(&one, &Vec4::new([0.025, 0.0, 0.0, 0.0])));
        assert!(!in_polytope(&one, &Vec4::new([0.026, 0.0, 0.0, 0.0])));
    }

    #[test]
    fn switching_law_branches() {
        let one = poly(&[1], [40.0, 0.0, 0.0, 0.0]);
        let up = Vec4::new([0.025, 0.0, 0.0, 0.0]);
        let down = Vec4::new([-0.025, 0.0, 0.0, 0.0]);
        let inside = Vec4::new([0.01, 0.0, 0.0, 0.0]);
        assert_eq!(switch_decide(&one, SwitchState::On, &up), SwitchState::Off);
        assert_eq!(
            switch_decide(&one, SwitchState::Off, &down),
            SwitchState::On
        );
        assert_eq!(
            switch_decide(&one, SwitchState::On, &inside),
            SwitchState::On
        );
        assert_eq!(
            switch_decide(&one, SwitchState::Off, &inside),
            SwitchState::Off
        );
        // Wrong-side facets are held.
        assert_eq!(switch_decide(&one, SwitchState::On, &down), SwitchState::On);
        assert_eq!(switch_decide(&one, SwitchState::Off, &up), SwitchState::Off);
        let d = decide(&one, SwitchState::On, &up);
        assert_eq!(d.cause, Some(Trigger { j: 1, facet: 1 }));
    }

    #[test]
    fn startup_is_decided_by_the_dominant_violation() {
        let (p, s) = design();
        let four = coefficients_from_spec(&p, &s, IndexSet::ALL, -0.75, -1.0 / 800.0).unwrap();
        let y0 = -equilibrium(&p, &s).unwrap().x_bar;
        // k1 y1 = -80, k2 y2 = +60, k3 y3 = +4, k4 y4 = -8.
        let scaled: [f64; 4] = core::array::from_fn(|i| four.coefficient(i + 1).unwrap() * y0[i]);
        assert!((scaled[0] + 80.0).abs() < 1e-9 && (scaled[2] - 4.0).abs() < 1e-9);
        assert_eq!(switch_decide(&four, SwitchState::Off, &y0), SwitchState::On);
        assert_eq!(switch_decide(&four, SwitchState::On, &y0), SwitchState::On);
        assert_eq!(initial_switch_state(&four, &y0), SwitchState::On);
        let d = decide(&four, SwitchState::Off, &y0);
        assert_eq!(d.cause, Some(Trigger { j: 1, facet: -1 }));
    }

    #[test]
    fn dominant_tie_goes_to_smaller_index() {
        let two = poly(&[1, 2], [40.0, 20.0, 0.0, 0.0]);
        // k1 y1 = +2, k2 y2 = -2.
        let y = Vec4::new([0.05, -0.1, 0.0, 0.0]);
        assert_eq!(switch_decide(&two, SwitchState::On, &y), SwitchState::Off);
        assert_eq!(switch_decide(&two, SwitchState::Off, &y), SwitchState::Off);
    }

    #[test]
    fn initial_state_conventions() {
        let three = poly(&[1, 2, 3], [40.0, -20.0, -0.2, 0.0]);
        assert_eq!(
            initial_switch_state(&three, &Vec4::zeros()),
            SwitchState::On
        );
        // Only k3 y3 = +2 is violated.
        let y = Vec4::new([0.0, 0.0, -10.0, 0.0]);
        assert_eq!(initial_switch_state(&three, &y), SwitchState::Off);
    }

    #[test]
    fn structural_checks_on_raw_polytopes() {
        assert!(PolytopeSpec::new(set(&[2]), [0.0, 1.0, 0.0, 0.0], 1.0).is_err());
        assert!(PolytopeSpec::new(set(&[1]), [-1.0, 0.0, 0.0, 0.0], 1.0).is_err());
        assert!(PolytopeSpec::new(set(&[1, 3]), [1.0, 0.0, 0.0, 0.0], 1.0).is_err());
        assert!(PolytopeSpec::new(set(&[1]), [1.0, 0.0, 0.0, 0.0], 0.0).is_err());
        let p = poly(&[1, 3], [40.0, 0.0, -0.2, 0.0]);
        assert_eq!(
            p.with_coefficient(3, 0.2).unwrap().coefficient(3),
            Some(0.2)
        );
        assert!(p.with_coefficient(2, 1.0).is_err());
    }

    fn arb_design() -> impl Strategy<Value = (ConverterParams, OperatingSpec)> {
        (
            1e-4..1e-2f64,
            1e-4..1e-2f64,
            1e-7..1e-5f64,
            1e-6..1e-4f64,
            0.5..50.0f64,
            1.0..100.0f64,
            0.05..0.95f64,
            1e-6..1e-4f64,
        )
            .prop_map(|(l1, l2, c1, c2, r, v, d, ts)| {
                (
                    ConverterParams::new(l1, l2, c1, c2, r, v).unwrap(),
                    OperatingSpec::new(d, ts).unwrap(),
                )
            })
    }

    proptest! {
        #[test]
        fn homogeneous_of_degree_one(y in prop::array::uniform4(-10.0..10.0f64), a in -5.0..5.0f64) {
            let spec = poly(&[1, 2, 3, 4], [40.0, -30.0, -0.2, -0.8]);
            let lhs = lyapunov_value(&spec, &(Vec4::new(y) * a));
            let rhs = a.abs() * lyapunov_value(&spec, &Vec4::new(y));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn interior_points_hold_the_gate(y in prop::array::uniform4(-1.0..1.0f64), on in any::<bool>()) {
            let spec = poly(&[1, 2, 3, 4], [40.0, -30.0, -0.2, -0.8]);
            let y = Vec4::new([y[0] / 40.0, y[1] / 30.0, y[2] / 0.2, y[3] / 0.8]);
            let q = if on { SwitchState::On } else { SwitchState::Off };
            if lyapunov_value(&spec, &y) < 1.0 {
                prop_assert_eq!(switch_decide(&spec, q, &y), q);
            }
        }

        #[test]
        fn constructed_coefficients_match_ripple((p, s) in arb_design(), f2 in -0.99..0.99f64, f4 in -0.99..0.99f64) {
            prop_assume!(f2 != 0.0 && f4 != 0.0);
            let spec = coefficients_from_spec(&p, &s, IndexSet::ALL, f2, f4).unwrap();
            let ripple = equilibrium(&p, &s).unwrap().ripple;
            let k: [f64; 4] = core::array::from_fn(|i| spec.coefficient(i + 1).unwrap());
            prop_assert!(k[0] > 0.0 && k[2] < 0.0);
            for j in [0, 2] {
                let half = ripple[j] / 2.0;
                prop_assert!((1.0 / k[j].abs() - half).abs() <= 1e-12 * half);
            }
            for j in [1, 3] {
                prop_assert!(1.0 / k[j].abs() > ripple[j] / 2.0);
            }
        }
    }
}

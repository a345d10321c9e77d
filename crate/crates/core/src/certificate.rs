//! Facet certificates for the controlled indices.
//!
//! For every `j ∈ J` a row vector `L_j` (selecting `k_j y_j`) and a column
//! vector `R_j` are constructed in closed form. The facet `k_j y_j = ±1` is
//! stabilizable in both modes when `L_j R_j > 0` and `L_j A_i R_j ≤ 0` for
//! `i = 1, 2`.

use alloc::vec::Vec;

use crate::controller::PolytopeSpec;
use crate::converter::SubsystemModel;
use crate::error::{Error, Result};
use crate::smallmat::Vec4;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CertificatePair {
    pub j: usize,
    pub l: Vec4,
    pub r: Vec4,
    /// Normalisation scalar `r` used inside `R_j`.
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CertificateReport {
    pub j: usize,
    #[cfg_attr(feature = "serde", serde(rename = "LR"))]
    pub lr: f64,
    #[cfg_attr(feature = "serde", serde(rename = "LA1R"))]
    pub la1r: f64,
    #[cfg_attr(feature = "serde", serde(rename = "LA2R"))]
    pub la2r: f64,
    pub pass: bool,
}

/// Relative slack granted to the marginal `≤ 0` comparisons.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Closed-form pair for index `j` with coefficient `k`.
///
/// `r = 1` for `j ∈ {1, 3}` (where `R_j` carries `1/k_j`), `r = sign(k_j)`
/// for `j ∈ {2, 4}` so that `L_j R_j = r k_j` is positive.
pub fn certificate_for(j: usize, k: f64) -> Result<CertificatePair> {
    if !k.is_finite() || k == 0.0 {
        return Err(Error::invalid(
            "k",
            "coefficient must be finite and nonzero",
            k,
        ));
    }
    let sign = if k > 0.0 { 1.0 } else { -1.0 };
    let (scale, l, r) = match j {
        1 => (1.0, [k, 0.0, 0.0, 0.0], [1.0 / k, 0.0, 1.0, 0.0]),
        2 => (sign, [0.0, k, 0.0, 0.0], [0.0, sign, -sign, -sign]),
        3 => (1.0, [0.0, 0.0, k, 0.0], [1.0, -1.0, 1.0 / k, 0.0]),
        4 => (sign, [0.0, 0.0, 0.0, k], [0.0, sign, 0.0, sign]),
        _ => {
            return Err(Error::invalid(
                "j",
                "certificate index must lie in 1..=4",
                j as f64,
            ))
        }
    };
    Ok(CertificatePair {
        j,
        l: Vec4::new(l),
        r: Vec4::new(r),
        scale,
    })
}

/// One pair per controlled index, ascending in `j`.
pub fn paper_certificates(spec: &PolytopeSpec) -> Result<Vec<CertificatePair>> {
    spec.indices()
        .iter()
        .map(|j| certificate_for(j, spec.coefficient(j).expect("j is controlled")))
        .collect()
}

/// Evaluates `L R`, `L A1 R` and `L A2 R` by direct multiplication.
pub fn verify_certificate(
    pair: &CertificatePair,
    sub1: &SubsystemModel,
    sub2: &SubsystemModel,
) -> CertificateReport {
    let lr = pair.l.dot(&pair.r);
    let la1r = pair.l.dot(&(sub1.a * pair.r));
    let la2r = pair.l.dot(&(sub2.a * pair.r));
    let entry_scale = sub1.a.max_abs().max(sub2.a.max_abs());
    let tol = MARGINAL_TOL * entry_scale;
    CertificateReport {
        j: pair.j,
        lr,
        la1r,
        la2r,
        pass: lr > 0.0 && la1r <= tol && la2r <= tol,
    }
}

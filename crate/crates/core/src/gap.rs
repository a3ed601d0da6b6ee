//! Spectral-gap inequalities with their explicit constants.
//!
//! Every check reports the exact left-hand side, the threshold it must stay
//! under, the margin and the derived Lipschitz constants.  Reports feed the
//! Lyapunov-Perron solvers as admission gates and are exported as JSON by
//! the front-end.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::TrichotomyConstants;
use crate::semigroup::CProvider;

/// Weighted-space exponents and shift parameters for the gap conditions.
///
/// `eta_cu < 0` is the center-unstable weight, `zeta < eta_cu` the stable
/// convolution exponent; `eta_cs > 0` is the center-stable weight with
/// shift exponents `chi` and `sigma`; `nu` shifts the derivative
/// certificates and `k` is the smoothness order requested.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RateParams {
    pub eta_cu: f64,
    pub zeta: f64,
    pub eta_cs: f64,
    pub chi: f64,
    pub sigma: f64,
    pub nu: f64,
    pub k: u32,
}

impl RateParams {
    /// Ordering constraints against a model's trichotomy exponents.
    pub fn validate(&self, c: &TrichotomyConstants) -> Result<()> {
        if !(-c.beta < self.zeta && self.zeta < self.eta_cu && self.eta_cu < -c.gamma) {
            return Err(Error::Domain(format!(
                "need -beta < zeta < eta_cu < -gamma, got zeta = {}, eta_cu = {}, beta = {}, gamma = {}",
                self.zeta, self.eta_cu, c.beta, c.gamma
            )));
        }
        let top = c.alpha.min(c.beta);
        if !(c.gamma < self.eta_cs && self.eta_cs < top) {
            return Err(Error::Domain(format!(
                "need gamma < eta_cs < min(alpha, beta), got eta_cs = {}",
                self.eta_cs
            )));
        }
        if !(-c.beta < self.chi && self.chi < self.eta_cs) {
            return Err(Error::Domain(format!(
                "need -beta < chi < eta_cs, got chi = {}",
                self.chi
            )));
        }
        if self.sigma < 0.0 || self.nu < 0.0 {
            return Err(Error::Domain("shift parameters sigma, nu must be >= 0".into()));
        }
        if self.k == 0 {
            return Err(Error::Domain("smoothness order k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one inequality.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GapReport {
    pub name: String,
    pub lhs: f64,
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
    /// Lipschitz bound of the manifold graph, when this check certifies one.
    pub k_u: Option<f64>,
    /// Lipschitz bound of the foliation leaf, when this check certifies one.
    pub k_s: Option<f64>,
    /// Certified contraction factor of the associated fixed-point operator.
    pub contraction_factor: Option<f64>,
    /// The convolution constant entering the left-hand side.
    pub c_value: f64,
}

impl GapReport {
    fn new(name: String, lhs: f64, threshold: f64, c_value: f64) -> Self {
        GapReport {
            name,
            lhs,
            threshold,
            margin: threshold - lhs,
            pass: threshold - lhs > 0.0,
            k_u: None,
            k_s: None,
            contraction_factor: None,
            c_value,
        }
    }
}

/// Everything the parametrized checks need.
#[derive(Debug, Clone)]
pub struct GapInput<'a> {
    pub constants: &'a TrichotomyConstants,
    pub lipschitz: f64,
    pub rates: &'a RateParams,
    pub c: &'a CProvider,
    /// Replace the written denominator `alpha − i·eta_cs + i·sigma` of the
    /// shifted foliation condition by `alpha − eta_cs + i·sigma`.
    pub corrected_shift: bool,
}

/// Center-unstable manifold gap
/// `K L (C_ζ − 1/(γ+η_cu) − 1/(η_cu−α)) < 1`, with the graph Lipschitz
/// bound `K_u = K L C_ζ / (1 − lhs)`.
pub fn check_cu(k: f64, l: f64, c_zeta: f64, gamma: f64, alpha: f64, eta_cu: f64) -> Result<GapReport> {
    if l < 0.0 {
        return Err(Error::Domain(format!("Lipschitz constant must be >= 0, got {l}")));
    }
    if !(gamma + eta_cu < 0.0) {
        return Err(Error::Domain(format!(
            "need eta_cu < -gamma, got eta_cu = {eta_cu}, gamma = {gamma}"
        )));
    }
    if !(eta_cu < alpha) {
        return Err(Error::Domain(format!(
            "need eta_cu < alpha, got eta_cu = {eta_cu}, alpha = {alpha}"
        )));
    }
    if !(c_zeta > 0.0) && l > 0.0 {
        return Err(Error::Domain(format!("convolution constant must be > 0, got {c_zeta}")));
    }
    let lhs = k * l * (c_zeta - 1.0 / (gamma + eta_cu) - 1.0 / (eta_cu - alpha));
    let mut report = GapReport::new("cu-manifold-gap".into(), lhs, 1.0, c_zeta);
    if report.pass {
        report.k_u = Some(k * l * c_zeta / (1.0 - lhs));
        report.contraction_factor = Some(lhs);
    }
    Ok(report)
}

/// The same gap driven by a parameter bundle.
pub fn check_cu_gap(input: &GapInput<'_>) -> Result<GapReport> {
    let c = input.constants;
    input.rates.validate(c)?;
    let c_zeta = input.c.c_at(input.rates.zeta)?;
    check_cu(c.k, input.lipschitz, c_zeta, c.gamma, c.alpha, input.rates.eta_cu)
}

/// Smoothness gaps of the manifold graph, one report per derivative order:
/// `K L (C_{ζ+(i−1)η_cu} − 1/(γ+iη_cu) − 1/(iη_cu−α)) < 1` for `1 <= i <= k`,
/// requiring `−β < ζ < kη_cu < −γ`.
pub fn check_cu_smooth(input: &GapInput<'_>, k_order: u32) -> Result<Vec<GapReport>> {
    let c = input.constants;
    input.rates.validate(c)?;
    if k_order == 0 {
        return Err(Error::Domain("smoothness order must be >= 1".into()));
    }
    let r = input.rates;
    if !(r.zeta < k_order as f64 * r.eta_cu) {
        return Err(Error::Domain(format!(
            "need zeta < k*eta_cu, got zeta = {}, k*eta_cu = {}",
            r.zeta,
            k_order as f64 * r.eta_cu
        )));
    }
    let mut out = Vec::with_capacity(k_order as usize);
    for i in 1..=k_order {
        let shift = r.zeta + (i as f64 - 1.0) * r.eta_cu;
        if !(shift > -c.beta) {
            return Err(Error::Domain(format!(
                "shifted exponent {shift} at order {i} leaves the admissible band (> -beta = {})",
                -c.beta
            )));
        }
        let c_i = input.c.c_at(shift)?;
        let ie = i as f64 * r.eta_cu;
        let lhs = c.k * input.lipschitz * (c_i - 1.0 / (c.gamma + ie) - 1.0 / (ie - c.alpha));
        let mut rep = GapReport::new(format!("cu-smooth-gap-order-{i}"), lhs, 1.0, c_i);
        if rep.pass {
            rep.contraction_factor = Some(lhs);
        }
        out.push(rep);
    }
    Ok(out)
}

/// Center manifold gap `K L (C_ζ + 1/(η−γ) + 1/(α−η)) < 1` with its graph
/// Lipschitz bound; `η` is the center-stable weight of the parameter bundle.
pub fn check_c(input: &GapInput<'_>) -> Result<GapReport> {
    let c = input.constants;
    let r = input.rates;
    let eta = r.eta_cs;
    let top = c.alpha.min(c.beta);
    if !(c.gamma < eta && eta < top) {
        return Err(Error::Domain(format!(
            "need gamma < eta < min(alpha, beta), got eta = {eta}"
        )));
    }
    if !(-c.beta < r.zeta && r.zeta < -eta) {
        return Err(Error::Domain(format!(
            "need -beta < zeta < -eta, got zeta = {}, eta = {eta}",
            r.zeta
        )));
    }
    let c_zeta = input.c.c_at(r.zeta)?;
    let lhs = c.k * input.lipschitz * (c_zeta + 1.0 / (eta - c.gamma) + 1.0 / (c.alpha - eta));
    let mut rep = GapReport::new("center-manifold-gap".into(), lhs, 1.0, c_zeta);
    if rep.pass {
        rep.contraction_factor = Some(lhs);
        rep.k_u = Some(
            c.k * (c.k * input.lipschitz + c_zeta * input.lipschitz * (c.alpha - eta))
                / ((c.alpha - eta) * (1.0 - lhs)),
        );
    }
    Ok(rep)
}

/// The main foliation contraction `K L (C_χ + 1/(η_cs−γ) + 1/(α−η_cs)) < 1`
/// with the leaf Lipschitz bound `K_s = K²L / ((α−η_cs)(1 − lhs))`.
///
/// This is the existence gate used by the leaf solver; the σ-shifted family
/// of [`check_cs_foliation`] is the additional continuity certificate.
pub fn check_cs_main(input: &GapInput<'_>) -> Result<GapReport> {
    let c = input.constants;
    input.rates.validate(c)?;
    let r = input.rates;
    let c_chi = input.c.c_at(r.chi)?;
    let lhs_main = c.k * input.lipschitz
        * (c_chi + 1.0 / (r.eta_cs - c.gamma) + 1.0 / (c.alpha - r.eta_cs));
    let mut main = GapReport::new("cs-foliation-gap".into(), lhs_main, 1.0, c_chi);
    if main.pass {
        let ks = c.k * c.k * input.lipschitz / ((c.alpha - r.eta_cs) * (1.0 - lhs_main));
        main.k_s = Some(ks);
        main.contraction_factor = Some(lhs_main);
    }
    Ok(main)
}

/// Foliation gaps: the main condition
/// `K L (C_χ + 1/(η_cs−γ) + 1/(α−η_cs)) < 1` (threshold 1), the two
/// σ-shifted conditions at threshold 1/6, and the product gate
/// `K_u K_s < 1` taken together with the manifold gap.
pub fn check_cs_foliation(input: &GapInput<'_>) -> Result<Vec<GapReport>> {
    let c = input.constants;
    input.rates.validate(c)?;
    let r = input.rates;
    let top = c.alpha.min(c.beta);
    if !(c.gamma < r.eta_cs - 2.0 * r.sigma) {
        return Err(Error::Domain(format!(
            "need gamma < eta_cs - 2 sigma, got eta_cs = {}, sigma = {}",
            r.eta_cs, r.sigma
        )));
    }
    if !(r.eta_cs - r.sigma < top) {
        return Err(Error::Domain(format!(
            "need eta_cs - sigma < min(alpha, beta), got eta_cs = {}, sigma = {}",
            r.eta_cs, r.sigma
        )));
    }
    if !(r.chi < r.eta_cs - 2.0 * r.sigma) {
        return Err(Error::Domain(format!(
            "need chi < eta_cs - 2 sigma, got chi = {}, eta_cs = {}, sigma = {}",
            r.chi, r.eta_cs, r.sigma
        )));
    }
    let kk = c.k;
    let l = input.lipschitz;
    let main = check_cs_main(input)?;
    let c_chi = main.c_value;
    let k_s = main.k_s;
    let mut out = alloc::vec![main];

    for i in 1..=2u32 {
        let ii = i as f64;
        let shift = r.chi + ii * r.sigma;
        let c_i = input.c.c_at(shift)?;
        let denom_mid = r.eta_cs - ii * r.sigma - c.gamma;
        let denom_last = if input.corrected_shift {
            c.alpha - r.eta_cs + ii * r.sigma
        } else {
            c.alpha - ii * r.eta_cs + ii * r.sigma
        };
        if !(denom_mid > 0.0 && denom_last > 0.0) {
            return Err(Error::Domain(format!(
                "shifted foliation denominators non-positive at order {i}: {denom_mid}, {denom_last}"
            )));
        }
        let lhs = kk * l * (c_i + 1.0 / denom_mid + 1.0 / denom_last);
        let mut rep = GapReport::new(format!("cs-foliation-shifted-gap-{i}"), lhs, 1.0 / 6.0, c_i);
        if rep.pass {
            rep.contraction_factor = Some(lhs);
        }
        out.push(rep);
    }

    // leaf/manifold intersection gate
    let cu = check_cu_gap(input)?;
    if let (Some(ku), Some(ks)) = (cu.k_u, k_s) {
        let prod = ku * ks;
        let mut rep = GapReport::new("leaf-manifold-contraction".into(), prod, 1.0, c_chi);
        rep.k_u = Some(ku);
        rep.k_s = Some(ks);
        rep.contraction_factor = Some(prod);
        out.push(rep);
    } else {
        let mut rep = GapReport::new("leaf-manifold-contraction".into(), f64::INFINITY, 1.0, c_chi);
        rep.pass = false;
        rep.margin = f64::NEG_INFINITY;
        out.push(rep);
    }
    Ok(out)
}

/// Smoothness gaps of the leaf map, one per order:
/// `K L (C_{χ+(i−1)η_cs} + 1/(iη_cs−γ) + 1/(α−iη_cs)) < 1` for `1 <= i <= k`,
/// requiring `γ < kη_cs < min(α, β)` and `−β < χ < kη_cs`.
pub fn check_cs_smooth(input: &GapInput<'_>, k_order: u32) -> Result<Vec<GapReport>> {
    let c = input.constants;
    input.rates.validate(c)?;
    if k_order == 0 {
        return Err(Error::Domain("smoothness order must be >= 1".into()));
    }
    let r = input.rates;
    let top = c.alpha.min(c.beta);
    let ke = k_order as f64 * r.eta_cs;
    if !(c.gamma < ke && ke < top) {
        return Err(Error::Domain(format!(
            "need gamma < k*eta_cs < min(alpha, beta), got k*eta_cs = {ke}"
        )));
    }
    if !(r.chi < ke) {
        return Err(Error::Domain(format!(
            "need chi < k*eta_cs, got chi = {}, k*eta_cs = {ke}",
            r.chi
        )));
    }
    let mut out = Vec::with_capacity(k_order as usize);
    for i in 1..=k_order {
        let shift = r.chi + (i as f64 - 1.0) * r.eta_cs;
        let c_i = input.c.c_at(shift)?;
        let ie = i as f64 * r.eta_cs;
        let lhs = c.k * input.lipschitz * (c_i + 1.0 / (ie - c.gamma) + 1.0 / (c.alpha - ie));
        let mut rep = GapReport::new(format!("cs-smooth-gap-order-{i}"), lhs, 1.0, c_i);
        if rep.pass {
            rep.contraction_factor = Some(lhs);
        }
        out.push(rep);
    }
    Ok(out)
}

/// Derivative admission at the ν-shifted rates: the order-1 manifold gap
/// with weight `η_cu + ν` and exponent `ζ − ν`.
pub fn check_cu_derivative(input: &GapInput<'_>) -> Result<GapReport> {
    let c = input.constants;
    let r = input.rates;
    let eta = r.eta_cu + r.nu;
    let zeta = r.zeta - r.nu;
    if !(-c.beta < zeta && zeta < eta && eta < -c.gamma) {
        return Err(Error::Domain(format!(
            "nu-shifted rates leave the admissible band: eta_cu + nu = {eta}, zeta - nu = {zeta}"
        )));
    }
    let c_shift = input.c.c_at(zeta)?;
    let mut rep = check_cu(c.k, input.lipschitz, c_shift, c.gamma, c.alpha, eta)?;
    rep.name = "cu-derivative-gap".into();
    Ok(rep)
}

/// Derivative admission for the leaf map at the ν-shifted rates.
pub fn check_cs_derivative(input: &GapInput<'_>) -> Result<GapReport> {
    let c = input.constants;
    let r = input.rates;
    let eta = r.eta_cs - r.nu;
    let chi = r.chi + r.nu;
    let top = c.alpha.min(c.beta);
    if !(c.gamma < eta && eta < top && -c.beta < chi && chi < eta) {
        return Err(Error::Domain(format!(
            "nu-shifted rates leave the admissible band: eta_cs - nu = {eta}, chi + nu = {chi}"
        )));
    }
    let c_shift = input.c.c_at(chi)?;
    let lhs = c.k * input.lipschitz * (c_shift + 1.0 / (eta - c.gamma) + 1.0 / (c.alpha - eta));
    let mut rep = GapReport::new("cs-derivative-gap".into(), lhs, 1.0, c_shift);
    if rep.pass {
        rep.contraction_factor = Some(lhs);
    }
    Ok(rep)
}

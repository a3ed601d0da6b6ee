//! Integrated semigroup, Stieltjes convolution and its constants.
//!
//! The convolution `(S ⋄ f)(t) = lim_{λ→∞} ∫_0^t φ(t,s) λ(λI−A)^{-1} f(s) ds`
//! is realized on a ladder of finite `λ` values: the returned value is the
//! one at the largest rung and the ladder differences certify convergence.
//! The time quadrature is trapezoid or midpoint on the noise grid; the
//! `e^{A_0 s}`-type integrals inside Eq.-(2.2)-style expressions are done
//! per eigenmode in closed form, which keeps the algebraic identities of the
//! integrated semigroup at round-off level.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::model::{modes_in, LinearModel, Span};
use crate::noise::OuProcess;

/// Relative tolerance of the Yosida ladder; the convolution errors out when
/// the last two rungs differ by more than ten times this.
pub const LADDER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Quadrature {
    Trapezoid,
    Midpoint,
}

/// How to evaluate the λ-limit: the ladder of resolvent parameters and the
/// time quadrature, sharing the noise grid step.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConvolutionPlan {
    lambda_ladder: Vec<f64>,
    pub quadrature: Quadrature,
    pub dt: f64,
}

impl ConvolutionPlan {
    pub fn new(lambda_ladder: Vec<f64>, quadrature: Quadrature, dt: f64) -> Result<Self> {
        if lambda_ladder.is_empty() {
            return Err(Error::Config("lambda ladder must be non-empty".into()));
        }
        if !lambda_ladder.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("lambda ladder must be strictly increasing".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("plan step must be positive, got {dt}")));
        }
        Ok(ConvolutionPlan {
            lambda_ladder,
            quadrature,
            dt,
        })
    }

    /// Default production ladder: tall enough that the Yosida bias on desk-
    /// scale spectra sits well below solver tolerances.
    pub fn default_for(dt: f64) -> Self {
        ConvolutionPlan {
            lambda_ladder: alloc::vec![1e6, 1e8, 1e10],
            quadrature: Quadrature::Trapezoid,
            dt,
        }
    }

    pub fn ladder(&self) -> &[f64] {
        &self.lambda_ladder
    }

    pub fn largest_lambda(&self) -> f64 {
        *self.lambda_ladder.last().unwrap()
    }

    /// Every rung must lie above the Hille-Yosida abscissa of the model.
    pub fn validate_for<M: LinearModel + ?Sized>(&self, model: &M) -> Result<()> {
        let theta = model.constants().theta_hy;
        if self.lambda_ladder[0] <= theta {
            return Err(Error::Config(format!(
                "ladder entry {} does not exceed the Hille-Yosida abscissa {theta}",
                self.lambda_ladder[0]
            )));
        }
        Ok(())
    }
}

/// Closed form of the convolution constant
/// `C_κ = 2ε max(1, e^{−κ τ_ε}) / (1 − e^{(ϑ−κ) τ_ε})`, valid for `κ > ϑ`.
pub fn c_kappa(epsilon: f64, tau_eps: f64, theta: f64, kappa: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(tau_eps > 0.0 && tau_eps.is_finite()) {
        return Err(Error::Domain(format!("tau_eps must be positive, got {tau_eps}")));
    }
    if !(kappa > theta) {
        return Err(Error::Domain(format!(
            "kappa = {kappa} must exceed theta = {theta} (denominator vanishes)"
        )));
    }
    let numerator = 2.0 * epsilon * math::exp(-kappa * tau_eps).max(1.0);
    let denominator = 1.0 - math::exp((theta - kappa) * tau_eps);
    Ok(numerator / denominator)
}

/// A fully determined convolution constant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConvConstants {
    pub epsilon: f64,
    pub tau_eps: f64,
    pub kappa: f64,
    pub c_kappa: f64,
}

/// Source of convolution constants for the gap checks: either the closed
/// form at a scanned `(ε, τ_ε)` pair, or a user-pinned value used verbatim
/// at every exponent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum CProvider {
    Formula { theta: f64, epsilon: f64, tau_eps: f64 },
    Direct { value: f64 },
}

impl CProvider {
    pub fn formula(theta: f64, epsilon: f64, tau_eps: f64) -> Result<Self> {
        if !(epsilon > 0.0 && tau_eps > 0.0) {
            return Err(Error::Config(format!(
                "convolution constants need positive epsilon and tau_eps, got ({epsilon}, {tau_eps})"
            )));
        }
        Ok(CProvider::Formula {
            theta,
            epsilon,
            tau_eps,
        })
    }

    pub fn direct(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("direct C must be positive, got {value}")));
        }
        Ok(CProvider::Direct { value })
    }

    /// Scans `τ_ε` over the estimated `δ` map, takes `ε(τ) = M δ(τ)` and
    /// keeps the pair minimizing `C_κ` at the reference exponent.
    pub fn scan(theta: f64, m_bound: f64, delta: &DeltaEstimate, kappa_ref: f64) -> Result<Self> {
        let mut best: Option<(f64, f64, f64)> = None;
        for (&tau, &d) in delta.times.iter().zip(&delta.values).skip(1) {
            if d <= 0.0 {
                continue;
            }
            let eps = m_bound * d;
            let Ok(c) = c_kappa(eps, tau, theta, kappa_ref) else {
                continue;
            };
            if best.map_or(true, |(_, _, cb)| c < cb) {
                best = Some((eps, tau, c));
            }
        }
        let (epsilon, tau_eps, _) = best.ok_or_else(|| {
            Error::Domain(format!(
                "no scan point admits C at kappa = {kappa_ref} over theta = {theta}"
            ))
        })?;
        Ok(CProvider::Formula {
            theta,
            epsilon,
            tau_eps,
        })
    }

    /// Constant for the stable-band convolution of a model: Lemma-2.8-style
    /// scan applied to the stable part, whose growth bound is `(K, −β)`.
    pub fn for_stable_band<M: LinearModel + ?Sized>(
        model: &M,
        kappa_ref: f64,
        tau0: f64,
    ) -> Result<Self> {
        let c = model.constants();
        let delta = delta_bound_estimate_in(model, tau0, 2 * model.x0_dim(), Span::Stable)?;
        CProvider::scan(-c.beta, c.k, &delta, kappa_ref)
    }

    /// `C` at an exponent; errors when the exponent is not admissible.
    pub fn c_at(&self, kappa: f64) -> Result<f64> {
        match *self {
            CProvider::Formula {
                theta,
                epsilon,
                tau_eps,
            } => c_kappa(epsilon, tau_eps, theta, kappa),
            CProvider::Direct { value } => Ok(value),
        }
    }

    pub fn constants_at(&self, kappa: f64) -> Result<ConvConstants> {
        let c = self.c_at(kappa)?;
        let (epsilon, tau_eps) = match *self {
            CProvider::Formula {
                epsilon, tau_eps, ..
            } => (epsilon, tau_eps),
            CProvider::Direct { .. } => (f64::NAN, f64::NAN),
        };
        Ok(ConvConstants {
            epsilon,
            tau_eps,
            kappa,
            c_kappa: c,
        })
    }
}

/// `S(t)x = λ ∫_0^t T(s)(λI−A)^{-1}x ds + (I − T(t))(λI−A)^{-1}x`.
///
/// The time integral is exact per eigenmode, so for dense-domain models the
/// result is λ-independent to round-off.
pub fn integrated_semigroup_apply<M: LinearModel + ?Sized>(
    model: &M,
    t: f64,
    x: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::Domain(format!("integrated semigroup time {t} must be >= 0")));
    }
    model.check_lambda(lambda)?;
    let w = model.to_modal(&model.yosida_limit(x))?;
    let mut out = alloc::vec![0.0; w.len()];
    for (k, ok) in out.iter_mut().enumerate() {
        let a = model.eigenvalue(k);
        let r = w[k] / (lambda - a);
        let sigma = t * math::phi1(a * t);
        *ok = lambda * sigma * r + (1.0 - math::exp(a * t)) * r;
    }
    Ok(model.from_modal(&out))
}

/// Modal forcing representation of every sample: coefficients of the
/// Yosida-limit image.
fn modal_forcing<M: LinearModel + ?Sized>(model: &M, f: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    f.iter()
        .map(|y| model.to_modal(&model.yosida_limit(y)))
        .collect()
}

/// Per-mode quadrature sums `Σ_j w_j e^{a_k(t−s_j) + ∫_{s_j}^t z} g_k(s_j)`
/// for one target offset `j_t` (node of `t` counted from `t = 0`).
fn conv_sums<M: LinearModel + ?Sized>(
    model: &M,
    ou: &OuProcess,
    fm: &[Vec<f64>],
    j_t: usize,
    quadrature: Quadrature,
) -> Vec<f64> {
    let n_modes = model.x0_dim();
    let dt = ou.grid().dt();
    let zero = ou.grid().zero_offset();
    let mut sums = alloc::vec![0.0; n_modes];
    if j_t == 0 {
        return sums;
    }
    match quadrature {
        Quadrature::Trapezoid => {
            for j in 0..=j_t {
                let weight = if j == 0 || j == j_t { 0.5 * dt } else { dt };
                let tau = (j_t - j) as f64 * dt;
                let zint = ou.integral_between_offsets(zero + j, zero + j_t);
                for k in 0..n_modes {
                    sums[k] += weight * math::exp(model.eigenvalue(k) * tau + zint) * fm[j][k];
                }
            }
        }
        Quadrature::Midpoint => {
            for j in 0..j_t {
                let tau = (j_t - j) as f64 * dt - 0.5 * dt;
                let zint = ou.integral_between_offsets(zero + j, zero + j_t)
                    - 0.5 * 0.5 * dt * (ou.z_values()[zero + j] + ou.z_values()[zero + j + 1]);
                for k in 0..n_modes {
                    let g_mid = 0.5 * (fm[j][k] + fm[j + 1][k]);
                    sums[k] += dt * math::exp(model.eigenvalue(k) * tau + zint) * g_mid;
                }
            }
        }
    }
    sums
}

fn checked_offset(ou: &OuProcess, f_len: usize, t: f64) -> Result<usize> {
    if t < 0.0 {
        return Err(Error::Domain(format!("convolution time {t} must be >= 0")));
    }
    let j_t = ou.grid().offset_of(t)? - ou.grid().zero_offset();
    if f_len <= j_t {
        return Err(Error::Coverage(format!(
            "forcing has {f_len} samples but the convolution needs {}",
            j_t + 1
        )));
    }
    Ok(j_t)
}

/// Stieltjes convolution at the top of the Yosida ladder.
///
/// `f` holds the forcing sampled at `0, dt, …` on the noise grid.  The value
/// is computed at every rung; the run aborts with a convergence error when
/// the last two rungs still differ by more than `10 × LADDER_TOL` relative.
pub fn stieltjes_convolution<M: LinearModel + ?Sized>(
    model: &M,
    ou: &OuProcess,
    f: &[Vec<f64>],
    t: f64,
    plan: &ConvolutionPlan,
) -> Result<Vec<f64>> {
    let values = ladder_values(model, ou, f, t, plan)?;
    let (_, last) = values.last().unwrap();
    if values.len() >= 2 {
        let (_, prev) = &values[values.len() - 2];
        let diff = linalg::dist(last, prev) / (1.0 + linalg::norm(last));
        if diff > 10.0 * LADDER_TOL {
            return Err(Error::Convergence(format!(
                "Yosida ladder not converged: last rungs differ by {diff:e}"
            )));
        }
    }
    Ok(last.clone())
}

/// Convolution value at every ladder rung, smallest λ first; diagnostic twin
/// of [`stieltjes_convolution`] without the convergence gate.
pub fn ladder_values<M: LinearModel + ?Sized>(
    model: &M,
    ou: &OuProcess,
    f: &[Vec<f64>],
    t: f64,
    plan: &ConvolutionPlan,
) -> Result<Vec<(f64, Vec<f64>)>> {
    plan.validate_for(model)?;
    if math::abs(plan.dt - ou.grid().dt()) > 1e-12 * plan.dt {
        return Err(Error::Config(
            "convolution plan and noise process must share one grid step".into(),
        ));
    }
    let j_t = checked_offset(ou, f.len(), t)?;
    let fm = modal_forcing(model, f)?;
    let sums = conv_sums(model, ou, &fm, j_t, plan.quadrature);
    let mut out = Vec::with_capacity(plan.ladder().len());
    for &lambda in plan.ladder() {
        let scaled: Vec<f64> = sums
            .iter()
            .enumerate()
            .map(|(k, s)| s * lambda / (lambda - model.eigenvalue(k)))
            .collect();
        out.push((lambda, model.from_modal(&scaled)));
    }
    Ok(out)
}

/// Convolution with the λ-limit taken analytically (Yosida factor 1); the
/// oracle for the ladder path and the route used where the limit is exact.
pub fn convolution_limit<M: LinearModel + ?Sized>(
    model: &M,
    ou: &OuProcess,
    f: &[Vec<f64>],
    t: f64,
    quadrature: Quadrature,
) -> Result<Vec<f64>> {
    let j_t = checked_offset(ou, f.len(), t)?;
    let fm = modal_forcing(model, f)?;
    Ok(model.from_modal(&conv_sums(model, ou, &fm, j_t, quadrature)))
}

/// The split convolution: center and unstable parts as plain integrals (no
/// λ-limit is involved on finite-rank bands), the stable part through the
/// Yosida ladder.  The three parts sum to the full convolution.
pub fn split_convolution<M: LinearModel + ?Sized>(
    model: &M,
    ou: &OuProcess,
    f: &[Vec<f64>],
    t: f64,
    plan: &ConvolutionPlan,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    plan.validate_for(model)?;
    let j_t = checked_offset(ou, f.len(), t)?;
    let fm = modal_forcing(model, f)?;
    let sums = conv_sums(model, ou, &fm, j_t, plan.quadrature);
    let pick = |span: Span, with_yosida: Option<f64>| -> Vec<f64> {
        let coeffs: Vec<f64> = (0..model.x0_dim())
            .map(|k| {
                if span.contains(model.part_of(k)) {
                    match with_yosida {
                        Some(lambda) => sums[k] * lambda / (lambda - model.eigenvalue(k)),
                        None => sums[k],
                    }
                } else {
                    0.0
                }
            })
            .collect();
        model.from_modal(&coeffs)
    };
    // ladder convergence gate on the stable part
    let ladder = plan.ladder();
    let mut prev: Option<Vec<f64>> = None;
    let mut stable = alloc::vec![0.0; model.dim()];
    for (i, &lambda) in ladder.iter().enumerate() {
        let s = pick(Span::Stable, Some(lambda));
        if i + 1 == ladder.len() {
            if let Some(p) = &prev {
                let diff = linalg::dist(&s, p) / (1.0 + linalg::norm(&s));
                if diff > 10.0 * LADDER_TOL {
                    return Err(Error::Convergence(format!(
                        "stable-part ladder not converged: rungs differ by {diff:e}"
                    )));
                }
            }
        }
        prev = Some(s.clone());
        stable = s;
    }
    Ok((pick(Span::Center, None), pick(Span::Unstable, None), stable))
}

/// Empirical non-decreasing bound `δ(t)` with
/// `‖(S ⋄ f)(t)‖ ≤ δ(t) sup_{s≤t} ‖f(s)‖` over constant probe forcings,
/// evaluated in the deterministic (z ≡ 0) limit mode.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DeltaEstimate {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DeltaEstimate {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.times.iter().position(|&s| s >= t) {
            Some(i) => self.values[i],
            None => *self.values.last().unwrap(),
        }
    }
}

pub fn delta_bound_estimate<M: LinearModel + ?Sized>(
    model: &M,
    tau0: f64,
    probe_count: usize,
) -> Result<DeltaEstimate> {
    delta_bound_estimate_in(model, tau0, probe_count, Span::Full)
}

/// Same estimate with probes and measurement restricted to one band.
pub fn delta_bound_estimate_in<M: LinearModel + ?Sized>(
    model: &M,
    tau0: f64,
    probe_count: usize,
    span: Span,
) -> Result<DeltaEstimate> {
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::Config(format!("tau0 must be positive, got {tau0}")));
    }
    let steps = 400usize;
    let dt = tau0 / steps as f64;
    let grid = crate::noise::TimeGrid::new(0.0, tau0, dt)?;
    let ou = OuProcess::frozen(grid, 0.0);
    let modes = modes_in(model, span);
    if modes.is_empty() {
        return Err(Error::Config("band has no modes to probe".into()));
    }
    // constant probes: modal basis vectors of the band, then deterministic
    // random combinations up to probe_count
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for &k in &modes {
        let mut c = alloc::vec![0.0; model.x0_dim()];
        c[k] = 1.0;
        probes.push(model.from_modal(&c));
    }
    if matches!(span, Span::Full) && model.dim() > model.x0_dim() {
        // exercise the non-dense slot as well
        let mut slot = alloc::vec![0.0; model.dim()];
        slot[0] = 1.0;
        probes.push(slot);
    }
    let mut state = 0x9E3779B97F4A7C15u64;
    while probes.len() < probe_count {
        let mut c = alloc::vec![0.0; model.x0_dim()];
        for &k in &modes {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            c[k] = ((state >> 11) as f64 / 9007199254740992.0) * 2.0 - 1.0;
        }
        probes.push(model.from_modal(&c));
    }
    let mut values: Vec<f64> = alloc::vec![0.0; steps + 1];
    for probe in &probes {
        let norm0 = linalg::norm(probe);
        if norm0 == 0.0 {
            continue;
        }
        let samples: Vec<Vec<f64>> = (0..=steps).map(|_| probe.clone()).collect();
        let fm = modal_forcing(model, &samples)?;
        for j in 1..=steps {
            let sums = conv_sums(model, &ou, &fm, j, Quadrature::Trapezoid);
            let filtered: Vec<f64> = (0..model.x0_dim())
                .map(|k| if span.contains(model.part_of(k)) { sums[k] } else { 0.0 })
                .collect();
            let ratio = linalg::norm(&model.from_modal(&filtered)) / norm0;
            values[j] = values[j].max(ratio);
        }
    }
    // cumulative max makes the map non-decreasing
    for j in 1..values.len() {
        values[j] = values[j].max(values[j - 1]);
    }
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    Ok(DeltaEstimate { times, values })
}

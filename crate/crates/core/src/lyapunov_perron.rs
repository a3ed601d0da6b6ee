//! Lyapunov-Perron fixed points: center-unstable manifold graphs,
//! center-stable foliation leaves, their first derivatives, the
//! leaf/manifold intersection and the pull-back to the original frame.
//!
//! Solves run on a truncated half-line with the weighted sup-norm
//! `sup_t e^{−ηt − ∫_0^t z} ‖f(t)‖`.  The operator integrals advance by
//! per-mode exponential recursions, which reproduce the trapezoid
//! quadrature of the full integrals exactly while keeping one application
//! linear in the node count.  Every solve is gated by its spectral-gap
//! certificate and reports the worst observed contraction ratio.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::gap::{
    check_cs_derivative, check_cs_main, check_cu_derivative, check_cu_gap, GapInput, GapReport,
    RateParams,
};
use crate::linalg;
use crate::math;
use crate::model::{
    modes_in, project, transform_nonlinearity, transform_nonlinearity_jacobian, LinearModel,
    Nonlinearity, Part, Span,
};
use crate::noise::OuProcess;
use crate::semigroup::{CProvider, ConvolutionPlan, LADDER_TOL};

/// Ratios are only trusted while the previous increment is above this many
/// machine epsilons of the path scale.
const RATIO_FLOOR_EPS: f64 = 1e3 * f64::EPSILON;

/// Slack added to the certified contraction factor before a measured ratio
/// counts as a certification mismatch.
pub const CONTRACTION_SLACK: f64 = 0.05;

/// Which half-line a weighted path lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum HalfLine {
    /// `(−T, 0]`, ascending nodes ending at 0.
    Past,
    /// `[0, T)`, ascending nodes starting at 0.
    Future,
}

/// Trajectory segment with the weighted sup-norm baked in.
#[derive(Debug, Clone)]
pub struct WeightedPath {
    pub half_line: HalfLine,
    pub eta: f64,
    dt: f64,
    values: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl WeightedPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        match self.half_line {
            HalfLine::Past => (i as i64 - (self.len() as i64 - 1)) as f64 * self.dt,
            HalfLine::Future => i as f64 * self.dt,
        }
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value_at_zero(&self) -> &[f64] {
        match self.half_line {
            HalfLine::Past => self.values.last().unwrap(),
            HalfLine::Future => &self.values[0],
        }
    }

    /// Weighted sup-norm.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * linalg::norm(v))
            .fold(0.0, f64::max)
    }

    /// Weighted sup-distance to another path on the same grid.
    pub fn dist(&self, other: &WeightedPath) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(&self.weights)
            .map(|((a, b), w)| w * linalg::dist(a, b))
            .fold(0.0, f64::max)
    }
}

/// Builds a weighted path over the nodes of a half-line covered by the
/// noise window, checking coverage and finiteness of the weights.
pub fn make_weighted_path(
    ou: &OuProcess,
    half_line: HalfLine,
    eta: f64,
    values: Vec<Vec<f64>>,
) -> Result<WeightedPath> {
    let dt = ou.grid().dt();
    let n = values.len();
    if n < 2 {
        return Err(Error::Config("weighted path needs at least two nodes".into()));
    }
    let zero = ou.grid().zero_offset();
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let (t, off) = match half_line {
            HalfLine::Past => {
                let back = n - 1 - i;
                if back > zero {
                    return Err(Error::Coverage(
                        "noise window does not reach the start of the past half-line".into(),
                    ));
                }
                (-(back as f64) * dt, zero - back)
            }
            HalfLine::Future => {
                if zero + i >= ou.grid().len() {
                    return Err(Error::Coverage(
                        "noise window does not reach the end of the future half-line".into(),
                    ));
                }
                (i as f64 * dt, zero + i)
            }
        };
        let zint = ou.integral_between_offsets(zero, off);
        let w = math::exp(-eta * t - zint);
        if !w.is_finite() {
            return Err(Error::Range(format!("weighted-norm weight overflowed at t = {t}")));
        }
        weights.push(w);
    }
    Ok(WeightedPath {
        half_line,
        eta,
        dt,
        values,
        weights,
    })
}

/// Solver configuration: horizon, step, rates, λ-plan, tolerances and the
/// convolution-constant source for the admission gates.
#[derive(Debug, Clone)]
pub struct LpConfig {
    pub t_horizon: f64,
    pub dt: f64,
    pub rates: RateParams,
    pub plan: ConvolutionPlan,
    pub tol: f64,
    pub max_iter: usize,
    pub c: CProvider,
    pub corrected_shift: bool,
}

impl LpConfig {
    pub fn new(
        t_horizon: f64,
        dt: f64,
        rates: RateParams,
        plan: ConvolutionPlan,
        tol: f64,
        max_iter: usize,
        c: CProvider,
    ) -> Result<Self> {
        if !(t_horizon > 0.0 && dt > 0.0 && tol > 0.0) {
            return Err(Error::Config(
                "horizon, step and tolerance must all be positive".into(),
            ));
        }
        let steps = t_horizon / dt;
        if math::abs(steps - math::round(steps)) > 1e-9 * (1.0 + steps) {
            return Err(Error::Config(format!(
                "horizon {t_horizon} is not a multiple of dt {dt}"
            )));
        }
        if max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(LpConfig {
            t_horizon,
            dt,
            rates,
            plan,
            tol,
            max_iter,
            c,
            corrected_shift: false,
        })
    }

    fn gap_input<'a>(&'a self, constants: &'a crate::model::TrichotomyConstants, l: f64) -> GapInput<'a> {
        GapInput {
            constants,
            lipschitz: l,
            rates: &self.rates,
            c: &self.c,
            corrected_shift: self.corrected_shift,
        }
    }

    fn steps(&self) -> usize {
        math::round(self.t_horizon / self.dt) as usize
    }

    /// The truncation is admissible when the weight decays by at least
    /// e^{−30} over the horizon.
    fn check_truncation(&self, eta: f64) -> Result<()> {
        if self.t_horizon * math::abs(eta) < 30.0 {
            return Err(Error::Config(format!(
                "horizon {} too short for weight {eta}: need T*|eta| >= 30",
                self.t_horizon
            )));
        }
        Ok(())
    }
}

/// Largest per-mode Yosida bias `|a| / (λ − a)` at the top of the ladder;
/// solves refuse plans whose bias exceeds the ladder tolerance.
fn yosida_bias<M: LinearModel + ?Sized>(model: &M, lambda: f64) -> f64 {
    (0..model.x0_dim())
        .map(|k| {
            let a = model.eigenvalue(k);
            math::abs(a) / (lambda - a)
        })
        .fold(0.0, f64::max)
}

/// Shared per-solve discretization data in modal coordinates.
struct HalfLineCtx<'a, M: LinearModel + ?Sized> {
    model: &'a M,
    nl: &'a Nonlinearity,
    cfg: &'a LpConfig,
    half_line: HalfLine,
    n: usize,
    z: Vec<f64>,
    /// forward flow factor over step i: e^{a_k dt + ∫_{t_i}^{t_{i+1}} z}
    fwd: Vec<Vec<f64>>,
    /// flow factor from 0 to node i: e^{a_k t_i + ∫_0^{t_i} z} (cu modes on
    /// the past line, cs modes on the future line; 0 elsewhere)
    flow0: Vec<Vec<f64>>,
    /// Yosida factor λ/(λ−a_k) at the top of the ladder
    yos: Vec<f64>,
    weights: Vec<f64>,
    eta: f64,
}

impl<'a, M: LinearModel + ?Sized> HalfLineCtx<'a, M> {
    fn new(
        model: &'a M,
        nl: &'a Nonlinearity,
        ou: &'a OuProcess,
        cfg: &'a LpConfig,
        half_line: HalfLine,
    ) -> Result<Self> {
        cfg.plan.validate_for(model)?;
        let dt = ou.grid().dt();
        if math::abs(cfg.dt - dt) > 1e-12 * dt {
            return Err(Error::Config(
                "solver and noise process must share one grid step".into(),
            ));
        }
        let bias = yosida_bias(model, cfg.plan.largest_lambda());
        if bias > 10.0 * LADDER_TOL {
            return Err(Error::Convergence(format!(
                "Yosida ladder tops out with bias {bias:e}; raise the ladder"
            )));
        }
        let eta = match half_line {
            HalfLine::Past => cfg.rates.eta_cu,
            HalfLine::Future => cfg.rates.eta_cs,
        };
        cfg.check_truncation(eta)?;
        let n = cfg.steps() + 1;
        let zero = ou.grid().zero_offset();
        let mut ou_off = Vec::with_capacity(n);
        for i in 0..n {
            let off = match half_line {
                HalfLine::Past => {
                    let back = n - 1 - i;
                    if back > zero {
                        return Err(Error::Coverage(
                            "noise window does not cover the past horizon".into(),
                        ));
                    }
                    zero - back
                }
                HalfLine::Future => {
                    let off = zero + i;
                    if off >= ou.grid().len() {
                        return Err(Error::Coverage(
                            "noise window does not cover the future horizon".into(),
                        ));
                    }
                    off
                }
            };
            ou_off.push(off);
        }
        let n_modes = model.x0_dim();
        let zs = ou.z_values();
        let z: Vec<f64> = ou_off.iter().map(|&o| zs[o]).collect();
        let mut fwd = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let zint = ou.integral_between_offsets(ou_off[i], ou_off[i + 1]);
            fwd.push(
                (0..n_modes)
                    .map(|k| math::exp(model.eigenvalue(k) * dt + zint))
                    .collect(),
            );
        }
        let span0 = match half_line {
            HalfLine::Past => Span::CenterUnstable,
            HalfLine::Future => Span::CenterStable,
        };
        let mut flow0 = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let t = match half_line {
                HalfLine::Past => -((n - 1 - i) as f64) * dt,
                HalfLine::Future => i as f64 * dt,
            };
            let zint = ou.integral_between_offsets(zero, ou_off[i]);
            flow0.push(
                (0..n_modes)
                    .map(|k| {
                        if span0.contains(model.part_of(k)) {
                            math::exp(model.eigenvalue(k) * t + zint)
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
            let w = math::exp(-eta * t - zint);
            if !w.is_finite() {
                return Err(Error::Range(format!("weight overflow at t = {t}")));
            }
            weights.push(w);
        }
        let lambda = cfg.plan.largest_lambda();
        let yos = (0..n_modes)
            .map(|k| lambda / (lambda - model.eigenvalue(k)))
            .collect();
        Ok(HalfLineCtx {
            model,
            nl,
            cfg,
            half_line,
            n,
            z,
            fwd,
            flow0,
            yos,
            weights,
            eta,
        })
    }

    fn wrap(&self, values: Vec<Vec<f64>>) -> WeightedPath {
        WeightedPath {
            half_line: self.half_line,
            eta: self.eta,
            dt: self.cfg.dt,
            values,
            weights: self.weights.clone(),
        }
    }

    fn wnorm(&self, values: &[Vec<f64>]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * linalg::norm(v))
            .fold(0.0, f64::max)
    }

    fn wdist(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| w * linalg::dist(x, y))
            .fold(0.0, f64::max)
    }

    /// Conjugated-nonlinearity forcing per node, in modal coordinates.
    fn forcing_modal(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        states
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let g = transform_nonlinearity(self.nl, self.z[i], v)?;
                self.model.to_modal(&self.model.yosida_limit(&g))
            })
            .collect()
    }

    /// Difference forcing `G(v + ψ) − G(v)` per node, modal.
    fn delta_forcing_modal(&self, base: &[Vec<f64>], psi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        base.iter()
            .zip(psi)
            .enumerate()
            .map(|(i, (b, p))| {
                let g1 = transform_nonlinearity(self.nl, self.z[i], &linalg::add(b, p))?;
                let g0 = transform_nonlinearity(self.nl, self.z[i], b)?;
                self.model
                    .to_modal(&self.model.yosida_limit(&linalg::sub(&g1, &g0)))
            })
            .collect()
    }

    /// Linearized forcing `DG(base)(w)` per node, modal; `base` in state
    /// space, `w` in modal coordinates.
    fn linearized_forcing_modal(
        &self,
        base: &[Vec<f64>],
        w_modal: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        base.iter()
            .zip(w_modal)
            .enumerate()
            .map(|(i, (b, wm))| {
                let w_state = self.model.from_modal(wm);
                let dg = transform_nonlinearity_jacobian(self.nl, self.z[i], b, &w_state)?;
                self.model.to_modal(&self.model.yosida_limit(&dg))
            })
            .collect()
    }

    /// One sweep of the past-line operator in modal coordinates:
    /// flow term from the center-unstable data plus the three integrals of
    /// the forcing.
    fn past_sweep(&self, dir_modal: &[f64], gm: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.n;
        let n_modes = self.model.x0_dim();
        let dt = self.cfg.dt;
        let mut out = alloc::vec![alloc::vec![0.0; n_modes]; n];
        // flow term
        for i in 0..n {
            for k in 0..n_modes {
                out[i][k] = self.flow0[i][k] * dir_modal[k];
            }
        }
        // center/unstable: backward recursion of ∫_0^t φ(t,s) g(s) ds
        for k in 0..n_modes {
            if matches!(self.model.part_of(k), Part::Stable) {
                continue;
            }
            let mut acc = 0.0;
            for i in (1..n).rev() {
                let inv = 1.0 / self.fwd[i - 1][k];
                acc = inv * (acc - 0.5 * dt * gm[i][k]) - 0.5 * dt * gm[i - 1][k];
                out[i - 1][k] += acc;
            }
        }
        // stable: forward recursion of the truncated history integral with
        // the Yosida factor
        for k in 0..n_modes {
            if !matches!(self.model.part_of(k), Part::Stable) {
                continue;
            }
            let yk = self.yos[k];
            let mut acc = 0.0;
            for i in 1..n {
                let f = self.fwd[i - 1][k];
                acc = f * acc + 0.5 * dt * (f * gm[i - 1][k] * yk + gm[i][k] * yk);
                out[i][k] += acc;
            }
        }
        out
    }

    /// One sweep of the future-line operator in modal coordinates.
    fn future_sweep(&self, dir_modal: &[f64], gm: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.n;
        let n_modes = self.model.x0_dim();
        let dt = self.cfg.dt;
        let mut out = alloc::vec![alloc::vec![0.0; n_modes]; n];
        for i in 0..n {
            for k in 0..n_modes {
                out[i][k] = self.flow0[i][k] * dir_modal[k];
            }
        }
        // center (plain) and stable (Yosida) parts: forward recursion
        for k in 0..n_modes {
            if matches!(self.model.part_of(k), Part::Unstable) {
                continue;
            }
            let yk = if matches!(self.model.part_of(k), Part::Stable) {
                self.yos[k]
            } else {
                1.0
            };
            let mut acc = 0.0;
            for i in 1..n {
                let f = self.fwd[i - 1][k];
                acc = f * acc + 0.5 * dt * (f * gm[i - 1][k] + gm[i][k]) * yk;
                out[i][k] += acc;
            }
        }
        // unstable: backward recursion of ∫_{+∞}^{t} truncated at the horizon
        for k in 0..n_modes {
            if !matches!(self.model.part_of(k), Part::Unstable) {
                continue;
            }
            let mut acc = 0.0;
            for i in (0..n - 1).rev() {
                let inv = 1.0 / self.fwd[i][k];
                acc = inv * acc - 0.5 * dt * (gm[i][k] + inv * gm[i + 1][k]);
                out[i][k] += acc;
            }
        }
        out
    }
}

/// Outcome of a Picard solve.
#[derive(Debug, Clone)]
pub struct FixedPointStats {
    pub iterations: usize,
    pub max_ratio: f64,
    pub residual: f64,
    pub certified_factor: f64,
}

/// Fixed point of the center-unstable operator at one `ξ`.
#[derive(Debug, Clone)]
pub struct CuFixedPoint {
    pub path: WeightedPath,
    /// Graph value `h(ξ, ω) = Π_s v̄(0)` in state coordinates.
    pub h_value: Vec<f64>,
    pub stats: FixedPointStats,
    pub report: GapReport,
}

fn modal_on_span<M: LinearModel + ?Sized>(model: &M, span: Span, x: &[f64]) -> Result<Vec<f64>> {
    let m = model.to_modal(x)?;
    let mut span_only = m.clone();
    for (k, c) in span_only.iter_mut().enumerate() {
        if !span.contains(model.part_of(k)) {
            *c = 0.0;
        }
    }
    let leak: f64 = m
        .iter()
        .zip(&span_only)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>();
    let scale: f64 = m.iter().map(|a| a * a).sum::<f64>();
    if math::sqrt(leak) > 1e-9 * (1.0 + math::sqrt(scale)) {
        return Err(Error::Domain(format!(
            "state has components of size {:e} outside the requested span",
            math::sqrt(leak)
        )));
    }
    Ok(span_only)
}

fn picard<F>(
    ctx_tol: f64,
    max_iter: usize,
    certified: f64,
    mut state: Vec<Vec<f64>>,
    wdist: impl Fn(&[Vec<f64>], &[Vec<f64>]) -> f64,
    wnorm: impl Fn(&[Vec<f64>]) -> f64,
    mut step: F,
) -> Result<(Vec<Vec<f64>>, FixedPointStats)>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<Vec<f64>>>,
{
    let mut prev_delta: Option<f64> = None;
    let mut max_ratio: f64 = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = step(&state)?;
        let delta = wdist(&next, &state);
        let scale = 1.0 + wnorm(&next);
        if !delta.is_finite() || !scale.is_finite() {
            return Err(Error::Numerical(
                "operator sweep produced non-finite values".into(),
            ));
        }
        if let Some(pd) = prev_delta {
            if pd > RATIO_FLOOR_EPS * scale {
                let ratio = delta / pd;
                max_ratio = max_ratio.max(ratio);
                if ratio > certified + CONTRACTION_SLACK {
                    return Err(Error::CertificationMismatch(format!(
                        "observed contraction ratio {ratio:.6} exceeds certified {certified:.6} + {CONTRACTION_SLACK}"
                    )));
                }
            }
        }
        prev_delta = Some(delta);
        state = next;
        residual = delta / scale;
        if delta < ctx_tol * scale {
            return Ok((
                state,
                FixedPointStats {
                    iterations: it,
                    max_ratio,
                    residual,
                    certified_factor: certified,
                },
            ));
        }
    }
    Err(Error::Convergence(format!(
        "Picard iteration did not reach tol after {max_iter} iterations (residual {residual:e})"
    )))
}

/// One application of the center-unstable operator to a weighted path.
pub fn lp_apply_cu<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    xi: &[f64],
    v: &WeightedPath,
    cfg: &LpConfig,
) -> Result<WeightedPath> {
    let report = check_cu_gap(&cfg.gap_input(model.constants(), nl.lipschitz()))?;
    if !report.pass {
        return Err(Error::Admission(format!(
            "manifold gap not certified: lhs = {} >= 1",
            report.lhs
        )));
    }
    let ctx = HalfLineCtx::new(model, nl, ou, cfg, HalfLine::Past)?;
    if v.len() != ctx.n {
        return Err(Error::Config(format!(
            "path has {} nodes but the configuration needs {}",
            v.len(),
            ctx.n
        )));
    }
    let xi_modal = modal_on_span(model, Span::CenterUnstable, xi)?;
    let gm = ctx.forcing_modal(&v.values)?;
    let out = ctx.past_sweep(&xi_modal, &gm);
    Ok(ctx.wrap(out.into_iter().map(|m| model.from_modal(&m)).collect()))
}

/// Solves the center-unstable fixed point at `ξ` and returns the graph
/// value `h(ξ, ω)`.
pub fn solve_cu<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    xi: &[f64],
    cfg: &LpConfig,
) -> Result<CuFixedPoint> {
    let report = check_cu_gap(&cfg.gap_input(model.constants(), nl.lipschitz()))?;
    if !report.pass {
        return Err(Error::Admission(format!(
            "manifold gap not certified: lhs = {} >= 1",
            report.lhs
        )));
    }
    let certified = report.contraction_factor.unwrap_or(f64::INFINITY);
    let ctx = HalfLineCtx::new(model, nl, ou, cfg, HalfLine::Past)?;
    let xi_modal = modal_on_span(model, Span::CenterUnstable, xi)?;

    // initial iterate: the affine flow term, which already satisfies the
    // linear (F = 0) fixed point and keeps h(0) = 0 exact
    let v0: Vec<Vec<f64>> = ctx
        .flow0
        .iter()
        .map(|row| row.iter().zip(&xi_modal).map(|(f, x)| f * x).collect())
        .collect();

    let (v_modal, stats) = picard(
        cfg.tol,
        cfg.max_iter,
        certified,
        v0,
        |a, b| ctx.wdist(a, b),
        |a| ctx.wnorm(a),
        |state| {
            let states: Vec<Vec<f64>> = state.iter().map(|m| model.from_modal(m)).collect();
            let gm = ctx.forcing_modal(&states)?;
            Ok(ctx.past_sweep(&xi_modal, &gm))
        },
    )?;

    let at_zero = v_modal.last().unwrap();
    let mut h_modal = at_zero.clone();
    for (k, c) in h_modal.iter_mut().enumerate() {
        if !matches!(model.part_of(k), Part::Stable) {
            *c = 0.0;
        }
    }
    let h_value = model.from_modal(&h_modal);
    let values: Vec<Vec<f64>> = v_modal.iter().map(|m| model.from_modal(m)).collect();
    Ok(CuFixedPoint {
        path: ctx.wrap(values),
        h_value,
        stats,
        report,
    })
}

/// Fixed point of the leaf operator at one `ι`.
#[derive(Debug, Clone)]
pub struct LeafFixedPoint {
    /// Difference path `ψ̄`.
    pub path: WeightedPath,
    /// Leaf value `l(ι, ω, x) = Π_u x + Π_u ψ̄(0)` in state coordinates.
    pub l_value: Vec<f64>,
    pub stats: FixedPointStats,
    pub report: GapReport,
}

fn leaf_admission<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    cfg: &LpConfig,
) -> Result<GapReport> {
    let report = check_cs_main(&cfg.gap_input(model.constants(), nl.lipschitz()))?;
    if !report.pass {
        return Err(Error::Admission(format!(
            "foliation gap not certified: lhs = {} >= 1",
            report.lhs
        )));
    }
    Ok(report)
}

/// Base trajectory through the anchor.  With a vanishing nonlinearity the
/// leaf operator never reads the base (the difference forcing is zero), so
/// a constant placeholder avoids integrating an exploding linear orbit.
fn base_trajectory<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    anchor: &[f64],
    cfg: &LpConfig,
) -> Result<Trajectory> {
    if nl.is_zero() {
        let n = cfg.steps() + 1;
        return Ok(Trajectory::new(
            0,
            cfg.dt,
            alloc::vec![anchor.to_vec(); n],
            crate::flow::Frame::V,
        ));
    }
    crate::flow::integrate_mild(model, nl, ou, anchor, cfg.t_horizon, &cfg.plan)
}

/// One application of the leaf operator to a difference path.
pub fn lp_apply_cs<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    iota: &[f64],
    base: &Trajectory,
    psi: &WeightedPath,
    cfg: &LpConfig,
) -> Result<WeightedPath> {
    leaf_admission(model, nl, cfg)?;
    let ctx = HalfLineCtx::new(model, nl, ou, cfg, HalfLine::Future)?;
    if psi.len() != ctx.n || base.len() < ctx.n {
        return Err(Error::Config(format!(
            "paths must cover {} nodes (psi has {}, base has {})",
            ctx.n,
            psi.len(),
            base.len()
        )));
    }
    let iota_modal = modal_on_span(model, Span::CenterStable, iota)?;
    let gm = ctx.delta_forcing_modal(&base.values[..ctx.n], &psi.values)?;
    let out = ctx.future_sweep(&iota_modal, &gm);
    Ok(ctx.wrap(out.into_iter().map(|m| model.from_modal(&m)).collect()))
}

/// Solves the leaf fixed point through the anchor `x` at graph coordinate
/// `ι ∈ X_{0cs}`; the base trajectory is integrated on demand.
pub fn solve_leaf<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    anchor: &[f64],
    iota: &[f64],
    cfg: &LpConfig,
    base: Option<&Trajectory>,
) -> Result<LeafFixedPoint> {
    let report = leaf_admission(model, nl, cfg)?;
    let certified = report.contraction_factor.unwrap_or(f64::INFINITY);
    if !model.is_in_x0(anchor) {
        return Err(Error::Domain("leaf anchor must lie in X0".into()));
    }
    let ctx = HalfLineCtx::new(model, nl, ou, cfg, HalfLine::Future)?;
    let owned;
    let base = match base {
        Some(b) => b,
        None => {
            owned = base_trajectory(model, nl, ou, anchor, cfg)?;
            &owned
        }
    };
    if base.len() < ctx.n {
        return Err(Error::Config(format!(
            "base trajectory has {} nodes but the horizon needs {}",
            base.len(),
            ctx.n
        )));
    }
    let iota_modal = modal_on_span(model, Span::CenterStable, iota)?;
    let anchor_modal = model.to_modal(anchor)?;
    // graph coordinate relative to the anchor
    let mut rel = alloc::vec![0.0; model.x0_dim()];
    for k in 0..model.x0_dim() {
        if !matches!(model.part_of(k), Part::Unstable) {
            rel[k] = iota_modal[k] - anchor_modal[k];
        }
    }

    let psi0: Vec<Vec<f64>> = ctx
        .flow0
        .iter()
        .map(|row| row.iter().zip(&rel).map(|(f, x)| f * x).collect())
        .collect();

    let (psi_modal, stats) = picard(
        cfg.tol,
        cfg.max_iter,
        certified,
        psi0,
        |a, b| ctx.wdist(a, b),
        |a| ctx.wnorm(a),
        |state| {
            let states: Vec<Vec<f64>> = state.iter().map(|m| model.from_modal(m)).collect();
            let gm = ctx.delta_forcing_modal(&base.values[..ctx.n], &states)?;
            Ok(ctx.future_sweep(&rel, &gm))
        },
    )?;

    let at_zero = &psi_modal[0];
    let mut l_modal = alloc::vec![0.0; model.x0_dim()];
    for k in 0..model.x0_dim() {
        if matches!(model.part_of(k), Part::Unstable) {
            l_modal[k] = anchor_modal[k] + at_zero[k];
        }
    }
    let l_value = model.from_modal(&l_modal);
    let values: Vec<Vec<f64>> = psi_modal.iter().map(|m| model.from_modal(m)).collect();
    Ok(LeafFixedPoint {
        path: ctx.wrap(values),
        l_value,
        stats,
        report,
    })
}

/// First derivative of the manifold graph: one weighted-path column per
/// basis direction of `X_{0cu}` and the matching columns of `D_ξ h`.
#[derive(Debug, Clone)]
pub struct CuDerivative {
    pub directions: Vec<Vec<f64>>,
    pub columns: Vec<WeightedPath>,
    pub dh_columns: Vec<Vec<f64>>,
}

pub fn derivative_cu<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    fixed_point: &CuFixedPoint,
    cfg: &LpConfig,
) -> Result<CuDerivative> {
    if !nl.has_jacobian() {
        return Err(Error::Capability(
            "derivative solve needs a nonlinearity Jacobian".into(),
        ));
    }
    let shifted = check_cu_derivative(&cfg.gap_input(model.constants(), nl.lipschitz()))?;
    if !shifted.pass {
        return Err(Error::Admission(format!(
            "derivative gap not certified: lhs = {} >= 1",
            shifted.lhs
        )));
    }
    // the linearized operator contracts in the solve norm with the base
    // factor; the shifted certificate above is the differentiability gate
    let certified = fixed_point.report.contraction_factor.unwrap_or(f64::INFINITY);
    let ctx = HalfLineCtx::new(model, nl, ou, cfg, HalfLine::Past)?;
    if fixed_point.path.len() != ctx.n {
        return Err(Error::Config("fixed point does not match the configuration".into()));
    }
    let base_states = fixed_point.path.values();
    let mut columns = Vec::new();
    let mut dh_columns = Vec::new();
    let mut directions = Vec::new();
    for k_dir in modes_in(model, Span::CenterUnstable) {
        let mut dir = alloc::vec![0.0; model.x0_dim()];
        dir[k_dir] = 1.0;
        let d0: Vec<Vec<f64>> = ctx
            .flow0
            .iter()
            .map(|row| row.iter().zip(&dir).map(|(f, x)| f * x).collect())
            .collect();
        let (dv, _stats) = picard(
            cfg.tol,
            cfg.max_iter,
            certified,
            d0,
            |a, b| ctx.wdist(a, b),
            |a| ctx.wnorm(a),
            |state| {
                let gm = ctx.linearized_forcing_modal(base_states, state)?;
                Ok(ctx.past_sweep(&dir, &gm))
            },
        )?;
        let at_zero = dv.last().unwrap();
        let mut dh = alloc::vec![0.0; model.x0_dim()];
        for k in 0..model.x0_dim() {
            if matches!(model.part_of(k), Part::Stable) {
                dh[k] = at_zero[k];
            }
        }
        dh_columns.push(model.from_modal(&dh));
        directions.push(model.from_modal(&dir));
        columns.push(ctx.wrap(dv.into_iter().map(|m| model.from_modal(&m)).collect()));
    }
    Ok(CuDerivative {
        directions,
        columns,
        dh_columns,
    })
}

/// First derivative of the leaf map in `ι`, one column per basis direction
/// of `X_{0cs}`.
#[derive(Debug, Clone)]
pub struct LeafDerivative {
    pub directions: Vec<Vec<f64>>,
    pub columns: Vec<WeightedPath>,
    pub dl_columns: Vec<Vec<f64>>,
}

pub fn derivative_leaf<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    base: &Trajectory,
    fixed_point: &LeafFixedPoint,
    cfg: &LpConfig,
) -> Result<LeafDerivative> {
    if !nl.has_jacobian() {
        return Err(Error::Capability(
            "derivative solve needs a nonlinearity Jacobian".into(),
        ));
    }
    let shifted = check_cs_derivative(&cfg.gap_input(model.constants(), nl.lipschitz()))?;
    if !shifted.pass {
        return Err(Error::Admission(format!(
            "derivative gap not certified: lhs = {} >= 1",
            shifted.lhs
        )));
    }
    let certified = fixed_point.report.contraction_factor.unwrap_or(f64::INFINITY);
    let ctx = HalfLineCtx::new(model, nl, ou, cfg, HalfLine::Future)?;
    if fixed_point.path.len() != ctx.n || base.len() < ctx.n {
        return Err(Error::Config("fixed point does not match the configuration".into()));
    }
    // linearization point: base + ψ̄ nodewise
    let shifted_states: Vec<Vec<f64>> = base.values[..ctx.n]
        .iter()
        .zip(fixed_point.path.values())
        .map(|(b, p)| linalg::add(b, p))
        .collect();
    let mut columns = Vec::new();
    let mut dl_columns = Vec::new();
    let mut directions = Vec::new();
    for k_dir in modes_in(model, Span::CenterStable) {
        let mut dir = alloc::vec![0.0; model.x0_dim()];
        dir[k_dir] = 1.0;
        let d0: Vec<Vec<f64>> = ctx
            .flow0
            .iter()
            .map(|row| row.iter().zip(&dir).map(|(f, x)| f * x).collect())
            .collect();
        let (dv, _stats) = picard(
            cfg.tol,
            cfg.max_iter,
            certified,
            d0,
            |a, b| ctx.wdist(a, b),
            |a| ctx.wnorm(a),
            |state| {
                let gm = ctx.linearized_forcing_modal(&shifted_states, state)?;
                Ok(ctx.future_sweep(&dir, &gm))
            },
        )?;
        let at_zero = &dv[0];
        let mut dl = alloc::vec![0.0; model.x0_dim()];
        for k in 0..model.x0_dim() {
            if matches!(model.part_of(k), Part::Unstable) {
                dl[k] = at_zero[k];
            }
        }
        dl_columns.push(model.from_modal(&dl));
        directions.push(model.from_modal(&dir));
        columns.push(ctx.wrap(dv.into_iter().map(|m| model.from_modal(&m)).collect()));
    }
    Ok(LeafDerivative {
        directions,
        columns,
        dl_columns,
    })
}

fn quantize(x: &[f64]) -> Vec<i64> {
    x.iter()
        .map(|&v| {
            let q = v / 1e-12;
            if q >= i64::MAX as f64 {
                i64::MAX
            } else if q <= i64::MIN as f64 {
                i64::MIN
            } else {
                math::round(q) as i64
            }
        })
        .collect()
}

/// Graph evaluator for the center-unstable manifold with a write-once cache
/// keyed by quantized `ξ` and a running Lipschitz estimate.
pub struct ManifoldGraph<'a, M: LinearModel + ?Sized> {
    model: &'a M,
    nl: &'a Nonlinearity,
    ou: &'a OuProcess,
    cfg: LpConfig,
    cache: BTreeMap<Vec<i64>, CuFixedPoint>,
    observed_lipschitz: f64,
    pub report: GapReport,
}

impl<'a, M: LinearModel + ?Sized> ManifoldGraph<'a, M> {
    pub fn new(model: &'a M, nl: &'a Nonlinearity, ou: &'a OuProcess, cfg: LpConfig) -> Result<Self> {
        let report = check_cu_gap(&cfg.gap_input(model.constants(), nl.lipschitz()))?;
        if !report.pass {
            return Err(Error::Admission(format!(
                "manifold gap not certified: lhs = {} >= 1",
                report.lhs
            )));
        }
        Ok(ManifoldGraph {
            model,
            nl,
            ou,
            cfg,
            cache: BTreeMap::new(),
            observed_lipschitz: 0.0,
            report,
        })
    }

    pub fn config(&self) -> &LpConfig {
        &self.cfg
    }

    /// Certified Lipschitz bound of the graph.
    pub fn lipschitz_bound(&self) -> f64 {
        self.report.k_u.unwrap_or(f64::INFINITY)
    }

    /// Largest quotient `‖h(ξ1) − h(ξ2)‖ / ‖ξ1 − ξ2‖` seen so far.
    pub fn observed_lipschitz(&self) -> f64 {
        self.observed_lipschitz
    }

    pub fn solve(&mut self, xi: &[f64]) -> Result<&CuFixedPoint> {
        let key = quantize(xi);
        if !self.cache.contains_key(&key) {
            let fp = solve_cu(self.model, self.nl, self.ou, xi, &self.cfg)?;
            for other in self.cache.values() {
                let dxi = linalg::dist(
                    project(self.model, Span::CenterUnstable, other.path.value_at_zero()).as_slice(),
                    project(self.model, Span::CenterUnstable, xi).as_slice(),
                );
                if dxi > 1e-9 {
                    let dh = linalg::dist(&other.h_value, &fp.h_value);
                    self.observed_lipschitz = self.observed_lipschitz.max(dh / dxi);
                }
            }
            self.cache.insert(key.clone(), fp);
        }
        Ok(self.cache.get(&key).unwrap())
    }

    /// Graph value `h(ξ, ω)`.
    pub fn h(&mut self, xi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(xi)?.h_value.clone())
    }

    /// Original-frame graph value `h*(ξ*, ω) = e^{z0} h(e^{−z0} ξ*, ω)`.
    pub fn h_star(&mut self, xi_star: &[f64], z0: f64) -> Result<Vec<f64>> {
        if math::abs(z0) > 700.0 {
            return Err(Error::Range(format!("pull-back exponent {z0} overflows e^z")));
        }
        let xi = linalg::scale(xi_star, math::exp(-z0));
        pullback_manifold(&self.h(&xi)?, z0)
    }
}

/// Leaf evaluator through one anchor with a cache over `ι`.
pub struct FoliationLeaf<'a, M: LinearModel + ?Sized> {
    model: &'a M,
    nl: &'a Nonlinearity,
    ou: &'a OuProcess,
    cfg: LpConfig,
    anchor: Vec<f64>,
    base: Trajectory,
    cache: BTreeMap<Vec<i64>, LeafFixedPoint>,
    observed_lipschitz: f64,
    pub report: GapReport,
}

impl<'a, M: LinearModel + ?Sized> FoliationLeaf<'a, M> {
    pub fn new(
        model: &'a M,
        nl: &'a Nonlinearity,
        ou: &'a OuProcess,
        anchor: Vec<f64>,
        cfg: LpConfig,
    ) -> Result<Self> {
        let report = leaf_admission(model, nl, &cfg)?;
        if !model.is_in_x0(&anchor) {
            return Err(Error::Domain("leaf anchor must lie in X0".into()));
        }
        let base = base_trajectory(model, nl, ou, &anchor, &cfg)?;
        Ok(FoliationLeaf {
            model,
            nl,
            ou,
            cfg,
            anchor,
            base,
            cache: BTreeMap::new(),
            observed_lipschitz: 0.0,
            report,
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn base(&self) -> &Trajectory {
        &self.base
    }

    pub fn config(&self) -> &LpConfig {
        &self.cfg
    }

    /// Certified Lipschitz bound of the leaf map.
    pub fn lipschitz_bound(&self) -> f64 {
        self.report.k_s.unwrap_or(f64::INFINITY)
    }

    pub fn observed_lipschitz(&self) -> f64 {
        self.observed_lipschitz
    }

    pub fn solve(&mut self, iota: &[f64]) -> Result<&LeafFixedPoint> {
        let key = quantize(iota);
        if !self.cache.contains_key(&key) {
            let fp = solve_leaf(
                self.model,
                self.nl,
                self.ou,
                &self.anchor,
                iota,
                &self.cfg,
                Some(&self.base),
            )?;
            let iota_now = project(self.model, Span::CenterStable, iota);
            for (other_key, other) in self.cache.iter() {
                let other_iota: Vec<f64> = other_key.iter().map(|&q| q as f64 * 1e-12).collect();
                let dio = linalg::dist(&other_iota, &iota_now);
                if dio > 1e-9 {
                    let dl = linalg::dist(&other.l_value, &fp.l_value);
                    self.observed_lipschitz = self.observed_lipschitz.max(dl / dio);
                }
            }
            self.cache.insert(key.clone(), fp);
        }
        Ok(self.cache.get(&key).unwrap())
    }

    /// Leaf value `l(ι, ω, x)`.
    pub fn l(&mut self, iota: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(iota)?.l_value.clone())
    }

    /// Original-frame leaf value `l*(ι*, ω, x) = e^{z0} l(e^{−z0} ι*, ω, x)`.
    pub fn l_star(&mut self, iota_star: &[f64], z0: f64) -> Result<Vec<f64>> {
        if math::abs(z0) > 700.0 {
            return Err(Error::Range(format!("pull-back exponent {z0} overflows e^z")));
        }
        let iota = linalg::scale(iota_star, math::exp(-z0));
        pullback_leaf(&self.l(&iota)?, z0)
    }
}

/// Pull-back of a manifold graph value to the original frame at the fiber:
/// multiplication by `e^{z0}` (the argument scaling is the caller's).
pub fn pullback_manifold(h_value: &[f64], z0: f64) -> Result<Vec<f64>> {
    if math::abs(z0) > 700.0 {
        return Err(Error::Range(format!("pull-back exponent {z0} overflows e^z")));
    }
    Ok(linalg::scale(h_value, math::exp(z0)))
}

/// Pull-back of a leaf value to the original frame at the fiber.
pub fn pullback_leaf(l_value: &[f64], z0: f64) -> Result<Vec<f64>> {
    pullback_manifold(l_value, z0)
}

/// Leaf/manifold intersection found by iterating
/// `ι ← h(l(ι, ω, x), ω)`; unique under `K_u K_s < 1`.
#[derive(Debug, Clone)]
pub struct Intersection {
    pub point: Vec<f64>,
    pub iterations: usize,
    /// `‖Π_cu x̃ − l(Π_cs x̃)‖`
    pub residual_leaf: f64,
    /// `‖Π_cs x̃ − (Π_c x̃ + h(Π_cu x̃))‖`
    pub residual_manifold: f64,
}

pub fn intersect<M: LinearModel + ?Sized>(
    manifold: &mut ManifoldGraph<'_, M>,
    leaf: &mut FoliationLeaf<'_, M>,
    iota0: Option<&[f64]>,
) -> Result<Intersection> {
    let ku = manifold.lipschitz_bound();
    let ks = leaf.lipschitz_bound();
    if !(ku * ks < 1.0) {
        return Err(Error::Admission(format!(
            "intersection needs K_u K_s < 1, got {} * {} = {}",
            ku,
            ks,
            ku * ks
        )));
    }
    let model = manifold.model;
    let tol = manifold.cfg.tol.max(leaf.cfg.tol);
    let mut iota = match iota0 {
        Some(i) => project(model, Span::CenterStable, i),
        None => project(model, Span::CenterStable, leaf.anchor()),
    };
    let max_iter = manifold.cfg.max_iter;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let xi = leaf.l(&iota)?;
        let next = manifold.h(&xi)?;
        let delta = linalg::dist(&next, &iota);
        let done = delta < tol * (1.0 + linalg::norm(&next));
        iota = next;
        if done {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Convergence(format!(
                "intersection iteration stalled after {max_iter} steps (delta {delta:e})"
            )));
        }
    }
    let l_final = leaf.l(&iota)?;
    let point = linalg::add(&iota, &l_final);
    let xi_pt = project(model, Span::CenterUnstable, &point);
    let iota_pt = project(model, Span::CenterStable, &point);
    let residual_leaf = linalg::dist(&xi_pt, &linalg::add(&project(model, Span::Center, &point), &leaf.l(&iota_pt)?));
    let h_pt = manifold.h(&xi_pt)?;
    let residual_manifold = linalg::dist(
        &iota_pt,
        &linalg::add(&project(model, Span::Center, &point), &h_pt),
    );
    let guard = 100.0 * tol * (1.0 + linalg::norm(&point));
    if residual_leaf > guard || residual_manifold > guard {
        return Err(Error::Convergence(format!(
            "intersection residuals too large: leaf {residual_leaf:e}, manifold {residual_manifold:e}"
        )));
    }
    Ok(Intersection {
        point,
        iterations,
        residual_leaf,
        residual_manifold,
    })
}

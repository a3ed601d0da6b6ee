//! The random linear flow, the Ornstein-Uhlenbeck conjugation and a mild
//! integrator for the conjugated equation.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::model::{semigroup_apply, LinearModel, Nonlinearity, Span};
use crate::noise::{integral_z, OuProcess};
use crate::semigroup::ConvolutionPlan;

/// Norm bound beyond which the integrator reports divergence.
const BLOWUP_GUARD: f64 = 1e12;

/// Which equation's coordinates a trajectory is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Frame {
    /// Conjugated (random PDE) coordinates.
    V,
    /// Original (stochastic equation) coordinates.
    U,
}

/// A state trajectory on a uniform grid segment.
#[derive(Debug, Clone)]
pub struct Trajectory {
    first_index: i64,
    dt: f64,
    pub values: Vec<Vec<f64>>,
    pub frame: Frame,
}

impl Trajectory {
    pub fn new(first_index: i64, dt: f64, values: Vec<Vec<f64>>, frame: Frame) -> Self {
        Trajectory {
            first_index,
            dt,
            values,
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        (self.first_index + k as i64) as f64 * self.dt
    }

    pub fn value_at(&self, t: f64) -> Result<&[f64]> {
        let raw = t / self.dt;
        let idx = math::round(raw) as i64;
        if math::abs(raw - idx as f64) > 1e-9 * (1.0 + math::abs(raw)) {
            return Err(Error::Alignment(format!("time {t} off the trajectory grid")));
        }
        let off = idx - self.first_index;
        if off < 0 || off as usize >= self.values.len() {
            return Err(Error::Coverage(format!("time {t} outside the trajectory segment")));
        }
        Ok(&self.values[off as usize])
    }
}

/// `φ(t, s) = T(t−s) e^{∫_s^t z}` restricted to a span.
///
/// Backward time is allowed exactly where the semigroup is invertible, i.e.
/// while the span avoids the stable band.
pub fn flow_apply<M: LinearModel + ?Sized>(
    model: &M,
    ou: &OuProcess,
    span: Span,
    t: f64,
    s: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let zint = integral_z(ou, s, t)?;
    let moved = semigroup_apply(model, span, t - s, x)?;
    Ok(linalg::scale(&moved, math::exp(zint)))
}

/// Conjugation to the random-PDE frame: `v = u e^{−z}`.
pub fn transform(u: &[f64], z: f64) -> Result<Vec<f64>> {
    if math::abs(z) > 700.0 {
        return Err(Error::Range(format!("conjugation exponent {z} overflows e^z")));
    }
    Ok(linalg::scale(u, math::exp(-z)))
}

/// Inverse conjugation: `u = v e^{z}`.
pub fn inverse_transform(v: &[f64], z: f64) -> Result<Vec<f64>> {
    if math::abs(z) > 700.0 {
        return Err(Error::Range(format!("conjugation exponent {z} overflows e^z")));
    }
    Ok(linalg::scale(v, math::exp(z)))
}

/// Integrates the conjugated equation by exponential Euler: the linear flow
/// is applied exactly per mode and the conjugated nonlinearity is frozen
/// over each step inside a one-step convolution.
///
/// First order in `dt`; with `F ≡ 0` the scheme reproduces the linear flow
/// to round-off.
pub fn integrate_mild<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    x0: &[f64],
    t_end: f64,
    plan: &ConvolutionPlan,
) -> Result<Trajectory> {
    if t_end < 0.0 {
        return Err(Error::Domain(format!("integration horizon {t_end} must be >= 0")));
    }
    if !model.is_in_x0(x0) {
        return Err(Error::Domain("initial state must lie in X0".into()));
    }
    plan.validate_for(model)?;
    let grid = ou.grid();
    let dt = grid.dt();
    if math::abs(plan.dt - dt) > 1e-12 * dt {
        return Err(Error::Config(
            "integrator plan and noise process must share one grid step".into(),
        ));
    }
    let start = grid.zero_offset();
    let stop = grid.offset_of(t_end)?;
    let lambda = plan.largest_lambda();
    let n_modes = model.x0_dim();
    let zs = ou.z_values();

    let mut modal = model.to_modal(x0)?;
    let mut values = Vec::with_capacity(stop - start + 1);
    values.push(model.from_modal(&modal));
    for j in start..stop {
        let z_j = zs[j];
        let zint = ou.integral_between_offsets(j, j + 1);
        let state = model.from_modal(&modal);
        let g = crate::model::transform_nonlinearity(nl, z_j, &state)?;
        let gm = model.to_modal(&model.yosida_limit(&g))?;
        for k in 0..n_modes {
            let a = model.eigenvalue(k);
            let step_flow = math::exp(a * dt + zint);
            // one-step convolution with G frozen at the left node and the
            // noise exponent frozen at z_j
            let conv = dt * math::phi1((a + z_j) * dt) * gm[k] * lambda / (lambda - a);
            modal[k] = step_flow * modal[k] + conv;
        }
        let state = model.from_modal(&modal);
        if linalg::norm(&state) > BLOWUP_GUARD {
            return Err(Error::Divergence(format!(
                "trajectory norm exceeded {BLOWUP_GUARD:e} at t = {}",
                grid.node(j + 1)
            )));
        }
        values.push(state);
    }
    Ok(Trajectory::new(0, dt, values, Frame::V))
}

/// Integrates the original equation by conjugating, integrating the random
/// PDE and pulling every node back with `e^{z(θ_t ω)}`.
pub fn integrate_original<M: LinearModel + ?Sized>(
    model: &M,
    nl: &Nonlinearity,
    ou: &OuProcess,
    u0: &[f64],
    t_end: f64,
    plan: &ConvolutionPlan,
) -> Result<Trajectory> {
    let z0 = ou.z_at(0.0)?;
    let v0 = transform(u0, z0)?;
    let mild = integrate_mild(model, nl, ou, &v0, t_end, plan)?;
    let zero = ou.grid().zero_offset();
    let values: Vec<Vec<f64>> = mild
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| inverse_transform(v, ou.z_values()[zero + k]))
        .collect::<Result<_>>()?;
    Ok(Trajectory::new(0, mild.dt(), values, Frame::U))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parabolic_preset, project, SpectralModel};
    use crate::noise::{ou_stationary, sample_brownian, wiener_shift, TimeGrid};

    fn gentle() -> SpectralModel {
        SpectralModel::new(alloc::vec![0.8, 0.0, -3.0], 1.0, 0.8, 3.0, 0.1).unwrap()
    }

    fn noise(t_min: f64, t_max: f64, dt: f64, seed: u64) -> OuProcess {
        let g = TimeGrid::new(t_min - 30.0, t_max, dt).unwrap();
        ou_stationary(&sample_brownian(&g, seed), 1.0, 28.0).unwrap()
    }

    #[test]
    fn flow_reduces_to_semigroup_without_noise() {
        let m = parabolic_preset(3, 1.0, 0.1).unwrap();
        let ou = OuProcess::frozen(TimeGrid::new(-1.0, 1.0, 0.01).unwrap(), 0.0);
        let x = alloc::vec![0.2, -0.4, 1.0];
        let a = flow_apply(&m, &ou, Span::Full, 0.5, 0.0, &x).unwrap();
        let b = semigroup_apply(&m, Span::Full, 0.5, &x).unwrap();
        assert_eq!(a, b);
        let id = flow_apply(&m, &ou, Span::Full, 0.5, 0.5, &x).unwrap();
        assert!(linalg::dist(&id, &x) < 1e-15);
    }

    #[test]
    fn flow_cocycle_on_center_unstable() {
        let m = gentle();
        let ou = noise(-2.0, 2.0, 0.01, 4);
        let x = alloc::vec![0.5, -1.0, 0.7];
        let comp = flow_apply(
            &m,
            &ou,
            Span::CenterUnstable,
            1.5,
            0.5,
            &flow_apply(&m, &ou, Span::CenterUnstable, 0.5, -1.0, &x).unwrap(),
        )
        .unwrap();
        let direct = flow_apply(&m, &ou, Span::CenterUnstable, 1.5, -1.0, &x).unwrap();
        assert!(linalg::dist(&comp, &direct) < 1e-10 * (1.0 + linalg::norm(&direct)));
    }

    #[test]
    fn transform_round_trips() {
        let u = alloc::vec![1.5, -0.3];
        let v = transform(&u, 0.9).unwrap();
        let back = inverse_transform(&v, 0.9).unwrap();
        assert!(linalg::dist(&back, &u) < 1e-15);
        assert_eq!(transform(&u, 0.0).unwrap(), u);
        // u = 2 e_k at z = ln 2 lands on e_k
        let two = alloc::vec![2.0, 0.0];
        let v2 = transform(&two, math::ln(2.0)).unwrap();
        assert!((v2[0] - 1.0).abs() < 1e-15);
        assert!(transform(&u, 701.0).is_err());
    }

    #[test]
    fn linear_case_matches_flow_exactly() {
        let m = gentle();
        let ou = noise(0.0, 2.0, 0.001, 9);
        let x0 = alloc::vec![0.3, 0.5, -0.2];
        let plan = ConvolutionPlan::default_for(0.001);
        let traj = integrate_mild(&m, &Nonlinearity::zero(), &ou, &x0, 2.0, &plan).unwrap();
        let direct = flow_apply(&m, &ou, Span::Full, 2.0, 0.0, &x0).unwrap();
        let last = traj.values.last().unwrap();
        assert!(linalg::dist(last, &direct) < 1e-12 * (1.0 + linalg::norm(&direct)));
    }

    #[test]
    fn scalar_zero_mode_solution_is_exponential_of_noise_integral() {
        // F ≡ 0, single mode a = 0: v(t) = e^{∫_0^t z} x0
        let m = SpectralModel::new(alloc::vec![0.0], 1.0, 1.0, 1.0, 0.1).unwrap();
        let ou = noise(0.0, 1.0, 0.001, 21);
        let plan = ConvolutionPlan::default_for(0.001);
        let traj = integrate_mild(&m, &Nonlinearity::zero(), &ou, &alloc::vec![1.0], 1.0, &plan).unwrap();
        let expect = math::exp(integral_z(&ou, 0.0, 1.0).unwrap());
        assert!((traj.values.last().unwrap()[0] - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn integrator_self_convergence_is_first_order() {
        // refinement must keep the same noise realization, so use a smooth
        // synthetic z profile shared by all resolutions
        let m = gentle();
        let nl = Nonlinearity::cubic_saturated(0.5);
        let x0 = alloc::vec![0.4, 0.3, -0.5];
        let t_end = 1.0;
        let run = |dt: f64| {
            let g = TimeGrid::new(0.0, t_end, dt).unwrap();
            let z: Vec<f64> = (0..g.len())
                .map(|k| 0.3 * math::sin(1.3 * g.node(k)) + 0.1)
                .collect();
            let ou = OuProcess::from_samples(g, 1.0, z).unwrap();
            let plan = ConvolutionPlan::default_for(dt);
            integrate_mild(&m, &nl, &ou, &x0, t_end, &plan)
                .unwrap()
                .values
                .last()
                .unwrap()
                .clone()
        };
        let coarse = run(4e-3);
        let mid = run(2e-3);
        let fine = run(1e-3);
        let e1 = linalg::dist(&coarse, &mid);
        let e2 = linalg::dist(&mid, &fine);
        let ratio = e1 / e2;
        assert!(
            (1.5..3.0).contains(&ratio),
            "self-convergence ratio {ratio} not first order"
        );
    }

    #[test]
    fn original_frame_is_pointwise_conjugate() {
        let m = gentle();
        let nl = Nonlinearity::cubic_saturated(0.3);
        let ou = noise(0.0, 1.0, 0.002, 33);
        let u0 = alloc::vec![0.5, -0.1, 0.2];
        let plan = ConvolutionPlan::default_for(0.002);
        let orig = integrate_original(&m, &nl, &ou, &u0, 1.0, &plan).unwrap();
        let v0 = transform(&u0, ou.z_at(0.0).unwrap()).unwrap();
        let mild = integrate_mild(&m, &nl, &ou, &v0, 1.0, &plan).unwrap();
        for k in 0..orig.len() {
            let t = orig.time(k);
            let back = transform(&orig.values[k], ou.z_at(t).unwrap()).unwrap();
            assert!(linalg::dist(&back, &mild.values[k]) < 1e-12);
        }
        assert_eq!(orig.frame, Frame::U);
    }

    #[test]
    fn cocycle_property_of_the_solution() {
        let m = gentle();
        let nl = Nonlinearity::cubic_saturated(0.4);
        let dt = 1e-3;
        let g = TimeGrid::new(-32.0, 2.0, dt).unwrap();
        let path = sample_brownian(&g, 55);
        let ou = ou_stationary(&path, 1.0, 28.0).unwrap();
        let plan = ConvolutionPlan::default_for(dt);
        let x0 = alloc::vec![0.2, 0.4, -0.3];
        let s = 0.5;
        let t = 0.75;
        let full = integrate_mild(&m, &nl, &ou, &x0, s + t, &plan).unwrap();
        let first = integrate_mild(&m, &nl, &ou, &x0, s, &plan).unwrap();
        let shifted_ou = ou_stationary(&wiener_shift(&path, s).unwrap(), 1.0, 28.0).unwrap();
        let second = integrate_mild(
            &m,
            &nl,
            &shifted_ou,
            first.values.last().unwrap(),
            t,
            &plan,
        )
        .unwrap();
        let lhs = full.value_at(s + t).unwrap();
        let rhs = second.value_at(t).unwrap();
        assert!(
            linalg::dist(lhs, rhs) < 5e-3 * (1.0 + linalg::norm(lhs)),
            "cocycle residual {}",
            linalg::dist(lhs, rhs)
        );
    }

    #[test]
    fn projection_semigroup_interplay_keeps_linear_invariance() {
        // with F ≡ 0 the center-unstable plane is invariant: Π_s v stays 0
        let m = gentle();
        let ou = noise(0.0, 1.0, 0.001, 3);
        let plan = ConvolutionPlan::default_for(0.001);
        let x0 = alloc::vec![0.7, -0.2, 0.0];
        let traj = integrate_mild(&m, &Nonlinearity::zero(), &ou, &x0, 1.0, &plan).unwrap();
        let s_part = project(&m, Span::Stable, traj.values.last().unwrap());
        assert_eq!(linalg::norm(&s_part), 0.0);
    }
}

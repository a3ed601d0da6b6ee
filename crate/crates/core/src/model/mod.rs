//! Linear operator backends with exponential trichotomy, and the nonlinearity.
//!
//! Every solver in this crate is generic over [`LinearModel`]: a finite
//! truncation of a (possibly non-densely defined) generator `A` on
//! `X = X_0 ⊕ boundary part`, diagonalizable on `X_0` with a real spectrum
//! split into center/unstable/stable bands.  The trait exposes both the
//! operator-level contract (semigroup, resolvent, Yosida approximation,
//! extended projections) and the modal coordinates the fast paths use.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;

mod boundary;
mod spectral;

pub use boundary::BoundaryModel;
pub use spectral::{parabolic_preset, SpectralModel};

/// One band of the spectral splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Part {
    Center,
    Unstable,
    Stable,
}

/// Subspace selector accepted by projections, semigroups and flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Span {
    Center,
    Unstable,
    Stable,
    CenterUnstable,
    CenterStable,
    Full,
}

impl Span {
    pub fn contains(self, part: Part) -> bool {
        matches!(
            (self, part),
            (Span::Center, Part::Center)
                | (Span::Unstable, Part::Unstable)
                | (Span::Stable, Part::Stable)
                | (Span::CenterUnstable, Part::Center)
                | (Span::CenterUnstable, Part::Unstable)
                | (Span::CenterStable, Part::Center)
                | (Span::CenterStable, Part::Stable)
                | (Span::Full, _)
        )
    }

    fn includes_stable(self) -> bool {
        self.contains(Part::Stable)
    }
}

/// Exponential trichotomy data: bound `K >= 1` and exponents
/// `alpha > gamma >= 0` (unstable), `beta > gamma` (stable), plus the
/// Hille-Yosida pair `(theta_hy, m_hy)` of the generator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrichotomyConstants {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta_hy: f64,
    pub m_hy: f64,
}

impl TrichotomyConstants {
    pub fn new(k: f64, alpha: f64, beta: f64, gamma: f64, theta_hy: f64, m_hy: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::Config(format!("trichotomy bound K must be >= 1, got {k}")));
        }
        if !(m_hy.is_finite() && m_hy >= 1.0) {
            return Err(Error::Config(format!("Hille-Yosida bound M must be >= 1, got {m_hy}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Config(format!("center exponent gamma must be >= 0, got {gamma}")));
        }
        if !(alpha.is_finite() && alpha > gamma) {
            return Err(Error::Config(format!(
                "exponent ordering alpha > gamma violated: alpha = {alpha}, gamma = {gamma}"
            )));
        }
        if !(beta.is_finite() && beta > gamma) {
            return Err(Error::Config(format!(
                "exponent ordering beta > gamma violated: beta = {beta}, gamma = {gamma}"
            )));
        }
        Ok(TrichotomyConstants {
            k,
            alpha,
            beta,
            gamma,
            theta_hy,
            m_hy,
        })
    }
}

/// A diagonalizable linear backend on the truncation.
///
/// States are dense vectors of length [`dim`](LinearModel::dim); the closure
/// of the domain `X_0` has dimension [`x0_dim`](LinearModel::x0_dim) and a
/// modal basis in which the generator acts diagonally.  For models with a
/// non-dense domain the two dimensions differ and
/// [`yosida_limit`](LinearModel::yosida_limit) folds the extra components
/// into `X_0` the way `lim_λ λ(λI−A)^{-1}` does on the truncation.
pub trait LinearModel {
    /// Dimension of the ambient space `X`.
    fn dim(&self) -> usize;

    /// Dimension of `X_0` (number of modes).
    fn x0_dim(&self) -> usize;

    fn constants(&self) -> &TrichotomyConstants;

    fn eigenvalue(&self, mode: usize) -> f64;

    fn part_of(&self, mode: usize) -> Part;

    /// Modal coefficients of a state in `X_0`.
    fn to_modal(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// State reconstructed from modal coefficients (always lands in `X_0`).
    fn from_modal(&self, coeffs: &[f64]) -> Vec<f64>;

    /// Strong limit of `λ(λI−A)^{-1} y` as `λ → ∞` on the truncation.
    ///
    /// Identity on `X_0`; for non-dense models the boundary slot is folded
    /// into the interior forcing.
    fn yosida_limit(&self, y: &[f64]) -> Vec<f64>;

    /// `(λI−A)^{-1} y` for `λ` above the Hille-Yosida abscissa.
    fn resolvent(&self, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.check_lambda(lambda)?;
        let mut c = self.to_modal(&self.yosida_limit(y))?;
        for (k, ck) in c.iter_mut().enumerate() {
            *ck /= lambda - self.eigenvalue(k);
        }
        Ok(self.from_modal(&c))
    }

    /// Whether a state lies in `X_0` (up to round-off).
    fn is_in_x0(&self, y: &[f64]) -> bool;

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        let theta = self.constants().theta_hy;
        if !(lambda.is_finite() && lambda > theta) {
            return Err(Error::SpectrumProximity(format!(
                "resolvent parameter {lambda} must exceed the Hille-Yosida abscissa {theta}"
            )));
        }
        Ok(())
    }

    /// Human-readable backend tag for manifests.
    fn describe(&self) -> String;
}

/// Mode indices belonging to a span.
pub fn modes_in<M: LinearModel + ?Sized>(model: &M, span: Span) -> Vec<usize> {
    (0..model.x0_dim())
        .filter(|&k| span.contains(model.part_of(k)))
        .collect()
}

/// `T(t) Π_span x`: project onto the span, then evolve.
///
/// Time may be negative only while the span avoids the stable band, where
/// the restriction of `T` is invertible.  Inputs with a component outside
/// `X_0` are accepted exactly when the span is finite-rank (the extended
/// projection maps them into `X_0` first).
pub fn semigroup_apply<M: LinearModel + ?Sized>(
    model: &M,
    span: Span,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    if span.includes_stable() {
        if t < 0.0 {
            return Err(Error::Domain(format!(
                "semigroup time {t} must be >= 0 on a span containing the stable band"
            )));
        }
        if !model.is_in_x0(x) {
            return Err(Error::Domain(
                "semigroup on a stable-containing span requires a state in X0".into(),
            ));
        }
    }
    let mut c = model.to_modal(&model.yosida_limit(x))?;
    for (k, ck) in c.iter_mut().enumerate() {
        if span.contains(model.part_of(k)) {
            *ck *= math::exp(model.eigenvalue(k) * t);
        } else {
            *ck = 0.0;
        }
    }
    Ok(model.from_modal(&c))
}

/// Extended projection `Π_span` on `X`.
///
/// Finite-rank spans map into `X_0`; spans containing the stable band are
/// complements (`Π_s = I − Π_c − Π_u`) and keep any non-dense component.
pub fn project<M: LinearModel + ?Sized>(model: &M, span: Span, y: &[f64]) -> Vec<f64> {
    match span {
        Span::Full => y.to_vec(),
        Span::Center | Span::Unstable | Span::CenterUnstable => {
            let mut c = model
                .to_modal(&model.yosida_limit(y))
                .expect("yosida_limit image is in X0");
            for (k, ck) in c.iter_mut().enumerate() {
                if !span.contains(model.part_of(k)) {
                    *ck = 0.0;
                }
            }
            model.from_modal(&c)
        }
        Span::Stable => {
            let cu = project(model, Span::CenterUnstable, y);
            linalg::sub(y, &cu)
        }
        Span::CenterStable => {
            let u = project(model, Span::Unstable, y);
            linalg::sub(y, &u)
        }
    }
}

/// Yosida approximation `λ(λI−A)^{-1} y`; converges to `y` on `X_0`.
pub fn yosida_apply<M: LinearModel + ?Sized>(model: &M, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
    Ok(linalg::scale(&model.resolvent(lambda, y)?, lambda))
}

/// State-space basis of `X_{0,span}` (modal unit vectors mapped to states).
pub fn span_basis<M: LinearModel + ?Sized>(model: &M, span: Span) -> Vec<Vec<f64>> {
    modes_in(model, span)
        .into_iter()
        .map(|k| {
            let mut c = alloc::vec![0.0; model.x0_dim()];
            c[k] = 1.0;
            model.from_modal(&c)
        })
        .collect()
}

/// Globally Lipschitz nonlinearity `F: X_0 → X` with `F(0) = 0`.
///
/// Presets form the registry exposed to configuration files; each carries an
/// explicit Lipschitz constant and (except when suppressed) an analytic
/// directional Jacobian.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    lipschitz: f64,
    order: u32,
    jacobian_enabled: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum NonlinearityKind {
    /// F = 0.
    Zero,
    /// F(v) = eps * shift(v):  (Fv)_i = eps * v_{(i+1) mod n}.
    LinearCoupling { eps: f64 },
    /// Componentwise eps * x^3 / (1 + x^2); saturates to slope eps.
    CubicSaturated { eps: f64 },
    /// (Fv)_i = eps * s(v_{(i+1) mod n}) * s(v_{(i+2) mod n}) with
    /// s(x) = x / sqrt(1 + x^2); bilinear to leading order near 0.
    BilinearSaturated { eps: f64 },
}

fn sat(x: f64) -> f64 {
    x / math::sqrt(1.0 + x * x)
}

fn sat_d(x: f64) -> f64 {
    let d = 1.0 + x * x;
    1.0 / (d * math::sqrt(d))
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Zero,
            lipschitz: 0.0,
            order: u32::MAX,
            jacobian_enabled: true,
        }
    }

    pub fn linear_coupling(eps: f64) -> Self {
        Nonlinearity {
            kind: NonlinearityKind::LinearCoupling { eps },
            lipschitz: math::abs(eps),
            order: u32::MAX,
            jacobian_enabled: true,
        }
    }

    /// Lipschitz constant is 1.125*eps: the slope of x^3/(1+x^2) peaks at
    /// x^2 = 3 with value 9/8.
    pub fn cubic_saturated(eps: f64) -> Self {
        Nonlinearity {
            kind: NonlinearityKind::CubicSaturated { eps },
            lipschitz: 1.125 * math::abs(eps),
            order: u32::MAX,
            jacobian_enabled: true,
        }
    }

    /// Lipschitz constant 2*eps bounds the Jacobian via its row/column sums.
    pub fn bilinear_saturated(eps: f64) -> Self {
        Nonlinearity {
            kind: NonlinearityKind::BilinearSaturated { eps },
            lipschitz: 2.0 * math::abs(eps),
            order: u32::MAX,
            jacobian_enabled: true,
        }
    }

    /// Same map with the Jacobian withheld; derivative solvers must refuse it.
    pub fn with_jacobian_disabled(mut self) -> Self {
        self.jacobian_enabled = false;
        self
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Smoothness order available for derivative machinery.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian_enabled
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    pub fn eval(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        match self.kind {
            NonlinearityKind::Zero => alloc::vec![0.0; n],
            NonlinearityKind::LinearCoupling { eps } => {
                (0..n).map(|i| eps * v[(i + 1) % n]).collect()
            }
            NonlinearityKind::CubicSaturated { eps } => v
                .iter()
                .map(|&x| eps * x * x * x / (1.0 + x * x))
                .collect(),
            NonlinearityKind::BilinearSaturated { eps } => (0..n)
                .map(|i| eps * sat(v[(i + 1) % n]) * sat(v[(i + 2) % n]))
                .collect(),
        }
    }

    /// Directional derivative `DF(v) w`, or a capability error when the
    /// Jacobian is withheld.
    pub fn jacobian_apply(&self, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        if !self.jacobian_enabled {
            return Err(Error::Capability("nonlinearity carries no Jacobian".into()));
        }
        let n = v.len();
        Ok(match self.kind {
            NonlinearityKind::Zero => alloc::vec![0.0; n],
            NonlinearityKind::LinearCoupling { eps } => {
                (0..n).map(|i| eps * w[(i + 1) % n]).collect()
            }
            NonlinearityKind::CubicSaturated { eps } => v
                .iter()
                .zip(w)
                .map(|(&x, &wx)| {
                    let d = 1.0 + x * x;
                    eps * (x * x * x * x + 3.0 * x * x) / (d * d) * wx
                })
                .collect(),
            NonlinearityKind::BilinearSaturated { eps } => (0..n)
                .map(|i| {
                    let a = v[(i + 1) % n];
                    let b = v[(i + 2) % n];
                    eps * (sat_d(a) * w[(i + 1) % n] * sat(b) + sat(a) * sat_d(b) * w[(i + 2) % n])
                })
                .collect(),
        })
    }
}

/// Conjugated nonlinearity `G(z, v) = e^{−z} F(e^{z} v)`; shares the
/// Lipschitz constant of `F`.
pub fn transform_nonlinearity(nl: &Nonlinearity, z: f64, v: &[f64]) -> Result<Vec<f64>> {
    if math::abs(z) > 700.0 {
        return Err(Error::Range(format!("conjugation exponent {z} overflows e^z")));
    }
    let ez = math::exp(z);
    let scaled = linalg::scale(v, ez);
    Ok(linalg::scale(&nl.eval(&scaled), 1.0 / ez))
}

/// Directional derivative of `v ↦ G(z, v)`: `e^{−z} DF(e^{z} v) e^{z} w = DF(e^{z}v) w`.
pub fn transform_nonlinearity_jacobian(
    nl: &Nonlinearity,
    z: f64,
    v: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    if math::abs(z) > 700.0 {
        return Err(Error::Range(format!("conjugation exponent {z} overflows e^z")));
    }
    let ez = math::exp(z);
    let scaled = linalg::scale(v, ez);
    nl.jacobian_apply(&scaled, w)
}

/// Measured trichotomy ratios against the certified bounds.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrichotomyReport {
    pub worst_ratio: f64,
    pub tol: f64,
    pub pass: bool,
    pub samples: Vec<TrichotomySample>,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrichotomySample {
    pub part: Part,
    pub t: f64,
    pub ratio: f64,
}

/// Estimates `‖T(t) Π_k‖` on each band at the sampled times and compares
/// with `K e^{rate t}`; center times are taken with both signs, unstable
/// times negated, stable times as given.
pub fn verify_trichotomy_bounds<M: LinearModel + ?Sized>(
    model: &M,
    t_samples: &[f64],
) -> Result<TrichotomyReport> {
    let c = model.constants();
    let tol = 1e-6;
    let mut samples = Vec::new();
    let mut worst: f64 = 0.0;
    for &raw in t_samples {
        let t = math::abs(raw);
        let cases = [
            (Part::Center, t, c.gamma * t),
            (Part::Center, -t, c.gamma * t),
            (Part::Unstable, -t, -c.alpha * t),
            (Part::Stable, t, -c.beta * t),
        ];
        for (part, time, log_rate) in cases {
            let span = match part {
                Part::Center => Span::Center,
                Part::Unstable => Span::Unstable,
                Part::Stable => Span::Stable,
            };
            if modes_in(model, span).is_empty() {
                continue;
            }
            let ratio = subspace_ratio(model, span, time, log_rate)? / c.k;
            worst = worst.max(ratio);
            samples.push(TrichotomySample { part, t: time, ratio });
        }
    }
    Ok(TrichotomyReport {
        worst_ratio: worst,
        tol,
        pass: worst <= 1.0 + tol,
        samples,
    })
}

/// Operator 2-norm of `x ↦ e^{−log_rate} T(t) Π_span x` restricted to the
/// span, via power iteration on the normal matrix in modal coordinates.
///
/// The `log_rate` shift keeps the per-mode factors `e^{a_k t − log_rate}`
/// representable even when both `T(t)` and the certified envelope overflow.
pub(crate) fn subspace_ratio<M: LinearModel + ?Sized>(
    model: &M,
    span: Span,
    t: f64,
    log_rate: f64,
) -> Result<f64> {
    let modes = modes_in(model, span);
    if modes.is_empty() {
        return Ok(0.0);
    }
    // columns of e^{−log_rate} T(t)|span in state space
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(modes.len());
    for &k in &modes {
        let mut cm = alloc::vec![0.0; model.x0_dim()];
        cm[k] = math::exp(model.eigenvalue(k) * t - log_rate);
        cols.push(model.from_modal(&cm));
    }
    // power iteration on G = B^T B where B has the columns above; the domain
    // basis is the modal one, which is orthonormal for spectral models and
    // well-conditioned for the boundary backend, so this measures the norm
    // of the map from modal coefficients to state space.  To measure the
    // state-to-state norm, correct by the Gram factors of the span basis.
    let basis = span_basis(model, span);
    let m = modes.len();
    let mut gram = alloc::vec![0.0; m * m];
    let mut tmat = alloc::vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            gram[i * m + j] = linalg::dot(&basis[i], &basis[j]);
            tmat[i * m + j] = linalg::dot(&cols[i], &cols[j]);
        }
    }
    // generalized symmetric problem: sup_x ‖Bc‖/‖Vc‖ with Gram matrices
    // tmat (numerator) and gram (denominator); solve by power iteration on
    // gram^{-1} tmat using Cholesky of gram.
    let chol = cholesky(&gram, m)
        .ok_or_else(|| Error::Numerical("span basis Gram matrix not SPD".into()))?;
    // the generalized problem tmat c = λ gram c transforms to the symmetric
    // iteration w = L^{-1} tmat L^{-T} v with gram = L L^T
    let mut v: Vec<f64> = (0..m)
        .map(|i| 1.0 + 1e-3 * (i as f64 + 1.0) / m as f64)
        .collect();
    let nv = linalg::norm(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut lam = 0.0;
    for _ in 0..200 {
        let a = chol_solve_upper(&chol, m, &v);
        let mut b = alloc::vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                b[i] += tmat[i * m + j] * a[j];
            }
        }
        let w = chol_solve_lower(&chol, m, &b);
        let n = linalg::norm(&w);
        if n == 0.0 {
            return Ok(0.0);
        }
        lam = n;
        v = linalg::scale(&w, 1.0 / n);
    }
    Ok(math::sqrt(lam))
}

/// Dense lower Cholesky factor stored row-major; None when not SPD.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = math::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves L x = b.
fn chol_solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let move_ = l[i * n + k] * x[k];
            x[i] -= move_;
        }
        x[i] /= l[i * n + i];
    }
    x
}

/// Solves L^T x = b.
fn chol_solve_upper(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            let move_ = l[k * n + i] * x[k];
            x[i] -= move_;
        }
        x[i] /= l[i * n + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spectral::parabolic_preset;

    #[test]
    fn constants_reject_bad_orderings() {
        assert!(TrichotomyConstants::new(1.0, 0.05, 3.0, 0.1, 0.0, 1.0).is_err());
        assert!(TrichotomyConstants::new(0.5, 2.0, 3.0, 0.1, 0.0, 1.0).is_err());
        assert!(TrichotomyConstants::new(1.0, 2.0, 0.05, 0.1, 0.0, 1.0).is_err());
        assert!(TrichotomyConstants::new(1.0, 2.0, 3.0, -0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn projections_partition_identity() {
        let m = parabolic_preset(5, 1.0, 0.1).unwrap();
        let y: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.7).collect();
        let c = project(&m, Span::Center, &y);
        let u = project(&m, Span::Unstable, &y);
        let s = project(&m, Span::Stable, &y);
        let mut sum = linalg::add(&linalg::add(&c, &u), &s);
        for (a, b) in sum.iter_mut().zip(&y) {
            *a -= b;
        }
        assert!(linalg::norm(&sum) == 0.0);
        // annihilation and idempotence
        let uc = project(&m, Span::Unstable, &c);
        assert_eq!(linalg::norm(&uc), 0.0);
        let cc = project(&m, Span::Center, &c);
        assert_eq!(linalg::dist(&cc, &c), 0.0);
    }

    #[test]
    fn semigroup_commutes_with_projections_spectrally() {
        let m = parabolic_preset(4, 1.0, 0.1).unwrap();
        let y: Vec<f64> = alloc::vec![1.0, -2.0, 0.5, 0.25];
        let t = 0.3;
        for span in [Span::Center, Span::Unstable] {
            let a = semigroup_apply(&m, span, t, &project(&m, span, &y)).unwrap();
            let b = project(&m, span, &semigroup_apply(&m, Span::Full, t, &y).unwrap());
            assert!(linalg::dist(&a, &b) < 1e-14);
        }
    }

    #[test]
    fn semigroup_rejects_backward_stable_time() {
        let m = parabolic_preset(4, 1.0, 0.1).unwrap();
        let y = alloc::vec![1.0; 4];
        assert!(matches!(
            semigroup_apply(&m, Span::Stable, -0.1, &y),
            Err(Error::Domain(_))
        ));
        assert!(semigroup_apply(&m, Span::CenterUnstable, -0.1, &y).is_ok());
    }

    #[test]
    fn yosida_converges_on_x0() {
        let m = parabolic_preset(4, 1.0, 0.1).unwrap();
        let y = alloc::vec![1.0, 1.0, 1.0, 1.0];
        let mut last = f64::INFINITY;
        for lambda in [1e2, 1e3, 1e4] {
            let out = yosida_apply(&m, lambda, &y).unwrap();
            let err = linalg::dist(&out, &y);
            // per-mode error is |a|/(λ−a); scaled by λ it stays below ~2 max|a|
            assert!(err * lambda <= 2.0 * 15.0 * core::f64::consts::PI.powi(2) * linalg::norm(&y));
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn nonlinearity_presets_respect_lipschitz_and_zero() {
        let presets = [
            Nonlinearity::zero(),
            Nonlinearity::linear_coupling(0.7),
            Nonlinearity::cubic_saturated(0.5),
            Nonlinearity::bilinear_saturated(0.4),
        ];
        let mut state = 123u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / 9007199254740992.0) * 4.0 - 2.0
        };
        for nl in presets {
            let zero = alloc::vec![0.0; 6];
            assert_eq!(linalg::norm(&nl.eval(&zero)), 0.0);
            for _ in 0..1000 {
                let a: Vec<f64> = (0..6).map(|_| rnd()).collect();
                let b: Vec<f64> = (0..6).map(|_| rnd()).collect();
                let quot = linalg::dist(&nl.eval(&a), &nl.eval(&b)) / linalg::dist(&a, &b);
                assert!(
                    quot <= nl.lipschitz() + 1e-12,
                    "quotient {quot} above L = {}",
                    nl.lipschitz()
                );
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let presets = [
            Nonlinearity::linear_coupling(0.7),
            Nonlinearity::cubic_saturated(0.5),
            Nonlinearity::bilinear_saturated(0.4),
        ];
        let v: Vec<f64> = alloc::vec![0.3, -0.8, 1.2, 0.05];
        let w: Vec<f64> = alloc::vec![-0.5, 0.4, 0.9, -1.1];
        let h = 1e-6;
        for nl in presets {
            let jw = nl.jacobian_apply(&v, &w).unwrap();
            let vp = linalg::add(&v, &linalg::scale(&w, h));
            let vm = linalg::sub(&v, &linalg::scale(&w, h));
            let fd = linalg::scale(&linalg::sub(&nl.eval(&vp), &nl.eval(&vm)), 0.5 / h);
            assert!(linalg::dist(&jw, &fd) < 1e-8);
        }
        let blind = Nonlinearity::cubic_saturated(0.5).with_jacobian_disabled();
        assert!(matches!(blind.jacobian_apply(&v, &w), Err(Error::Capability(_))));
    }

    #[test]
    fn conjugation_identities() {
        let nl = Nonlinearity::cubic_saturated(0.5);
        let v = alloc::vec![0.4, -0.2, 0.9];
        // z = 0 is the identity conjugation
        let g0 = transform_nonlinearity(&nl, 0.0, &v).unwrap();
        assert_eq!(g0, nl.eval(&v));
        // linear F is invariant under the conjugation
        let lin = Nonlinearity::linear_coupling(0.3);
        let g = transform_nonlinearity(&lin, 1.7, &v).unwrap();
        assert!(linalg::dist(&g, &lin.eval(&v)) < 1e-14);
        // scalar square check: F(v)=v^2-like via bilinear preset is covered
        // by the saturated product; here check the exact scaling law on the
        // cubic preset instead: G(z,v) = e^{2z} v^3 / (1 + e^{2z} v^2) * eps
        let z = math::ln(2.0);
        let gv = transform_nonlinearity(&nl, z, &alloc::vec![1.0]).unwrap();
        let expect = 0.5 * 0.5 * nl.eval(&alloc::vec![2.0])[0];
        assert!((gv[0] - 2.0 * expect).abs() < 1e-14);
        assert!(matches!(
            transform_nonlinearity(&nl, 701.0, &v),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn trichotomy_report_is_exact_for_spectral_models() {
        let m = parabolic_preset(6, 1.0, 0.1).unwrap();
        let ts: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
        let report = verify_trichotomy_bounds(&m, &ts).unwrap();
        assert!(report.pass, "worst ratio {}", report.worst_ratio);
        assert!(report.worst_ratio <= 1.0 + 1e-9);
    }
}

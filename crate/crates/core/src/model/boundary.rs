//! Finite-difference backend for a second-order operator on a half-line with
//! a boundary trace in the non-dense slot.
//!
//! The state is `(r, φ_0, …, φ_{N−1})` on nodes `x_j = j h`, `h = x_max/N`,
//! with a homogeneous Dirichlet node at `x_max`.  The operator sends
//! `(0, φ)` to `(φ'(0), φ'')`; the trace uses a ghost node, so the resolvent
//! solve of `λφ − φ'' = f` with `φ'(0) = −r` folds the boundary slot into a
//! rank-one interior forcing `2r/h · e_0`.  Closure of the domain is
//! `X_0 = {0} × ℝ^N`, on which the generator is the ghost-Neumann/Dirichlet
//! second difference with the cosine eigenbasis
//! `v_k(j) = cos(θ_k j)`, `θ_k = (k + 1/2)π/N`, `a_k = −(4/h²) sin²(θ_k/2)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{subspace_ratio, LinearModel, Part, Span, TrichotomyConstants};

#[derive(Debug, Clone)]
pub struct BoundaryModel {
    n_interior: usize,
    x_max: f64,
    h: f64,
    eigenvalues: Vec<f64>,
    /// eigenvectors[k][j] = cos(theta_k * j)
    eigenvectors: Vec<Vec<f64>>,
    center_modes: usize,
    constants: TrichotomyConstants,
}

impl BoundaryModel {
    /// Builds the backend with the leading `center_modes` eigenvalues in the
    /// center band and the rest stable (the unstable band is empty).  Band
    /// edges get a 5% margin on either side; `K` and `M` are estimated from
    /// the eigenbasis since the cosine modes are not Euclidean-orthogonal.
    pub fn new(n_interior: usize, x_max: f64, center_modes: usize) -> Result<Self> {
        if n_interior < 4 {
            return Err(Error::Config(format!(
                "boundary model needs at least 4 interior nodes, got {n_interior}"
            )));
        }
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::Config(format!("domain length must be positive, got {x_max}")));
        }
        if center_modes == 0 || center_modes >= n_interior {
            return Err(Error::Config(format!(
                "center mode count {center_modes} must lie in [1, {})",
                n_interior
            )));
        }
        let n = n_interior;
        let h = x_max / n as f64;
        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenvectors = Vec::with_capacity(n);
        for k in 0..n {
            let theta = (k as f64 + 0.5) * core::f64::consts::PI / n as f64;
            let s = math::sin(0.5 * theta);
            eigenvalues.push(-4.0 / (h * h) * s * s);
            eigenvectors.push((0..n).map(|j| math::cos(theta * j as f64)).collect());
        }
        let gamma = math::abs(eigenvalues[center_modes - 1]) * 1.05;
        let beta = math::abs(eigenvalues[center_modes]) * 0.95;
        if beta <= gamma {
            return Err(Error::Config(format!(
                "center band up to |a| = {gamma} does not separate from the stable band at |a| = {beta}; \
                 reduce center_modes"
            )));
        }
        let alpha = beta;
        let theta_hy = eigenvalues[0];
        let provisional = TrichotomyConstants::new(1.0, alpha, beta, gamma, theta_hy, 1.0)?;
        let mut model = BoundaryModel {
            n_interior: n,
            x_max,
            h,
            eigenvalues,
            eigenvectors,
            center_modes,
            constants: provisional,
        };
        let (k_bound, m_bound) = model.estimate_bounds()?;
        model.constants = TrichotomyConstants::new(k_bound, alpha, beta, gamma, theta_hy, m_bound)?;
        Ok(model)
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn grid_step(&self) -> f64 {
        self.h
    }

    /// Supremum over sampled times of the subspace ratios, inflated by 0.1%
    /// to cover the sampling gaps.
    fn estimate_bounds(&self) -> Result<(f64, f64)> {
        let c = &self.constants;
        let a_center_edge = math::abs(self.eigenvalues[self.center_modes - 1]);
        let a_stable_edge = math::abs(self.eigenvalues[self.center_modes]);
        let margin_c = c.gamma - a_center_edge;
        let margin_s = a_stable_edge - c.beta;
        let mut k_hat: f64 = 1.0;
        for (span, rate_sign, rate, t_cap) in [
            (Span::Center, 1.0, c.gamma, 600.0 / margin_c),
            (Span::Center, -1.0, c.gamma, 600.0 / margin_c),
            (Span::Stable, 1.0, -c.beta, 600.0 / margin_s),
        ] {
            for &t in log_samples(t_cap).iter() {
                let time = rate_sign * t;
                let ratio = subspace_ratio(self, span, time, rate * t)?;
                k_hat = k_hat.max(ratio);
            }
        }
        // Hille-Yosida prefactor: sup_t ‖T(t)‖ e^{−a_0 t}
        let mut m_hat: f64 = 1.0;
        let gap = math::abs(self.eigenvalues[1] - self.eigenvalues[0]);
        for &t in log_samples(60.0 / gap).iter() {
            let ratio = subspace_ratio(self, Span::Full, t, self.eigenvalues[0] * t)?;
            m_hat = m_hat.max(ratio);
        }
        Ok((k_hat * 1.001, m_hat * 1.001))
    }

    /// Interior forcing of the resolvent equation: `f + (2r/h) e_0`.
    fn fold_interior(&self, y: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = y[1..].to_vec();
        f[0] += 2.0 * y[0] / self.h;
        f
    }

    /// Applies `λI − A_0` (ghost-Neumann/Dirichlet stencil) to an interior
    /// vector; the discrete residual partner of [`LinearModel::resolvent`].
    pub fn apply_shifted_generator(&self, lambda: f64, phi: &[f64]) -> Vec<f64> {
        let n = self.n_interior;
        let ih2 = 1.0 / (self.h * self.h);
        let mut out = alloc::vec![0.0; n];
        for j in 0..n {
            let left = if j == 0 { phi[1] } else { phi[j - 1] };
            let right = if j + 1 < n { phi[j + 1] } else { 0.0 };
            out[j] = lambda * phi[j] - (left - 2.0 * phi[j] + right) * ih2;
        }
        out
    }
}

/// 0 plus 160 log-spaced samples on [1e-4, t_cap].
fn log_samples(t_cap: f64) -> Vec<f64> {
    let mut out = alloc::vec![0.0];
    let lo = math::ln(1e-4);
    let hi = math::ln(t_cap.max(1e-3));
    for i in 0..160 {
        out.push(math::exp(lo + (hi - lo) * i as f64 / 159.0));
    }
    out
}

impl LinearModel for BoundaryModel {
    fn dim(&self) -> usize {
        self.n_interior + 1
    }

    fn x0_dim(&self) -> usize {
        self.n_interior
    }

    fn constants(&self) -> &TrichotomyConstants {
        &self.constants
    }

    fn eigenvalue(&self, mode: usize) -> f64 {
        self.eigenvalues[mode]
    }

    fn part_of(&self, mode: usize) -> Part {
        if mode < self.center_modes {
            Part::Center
        } else {
            Part::Stable
        }
    }

    fn to_modal(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Config(format!(
                "state length {} does not match model dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.is_in_x0(x) {
            return Err(Error::Domain(
                "modal coordinates are defined on X0 = {0} x R^N only".into(),
            ));
        }
        let n = self.n_interior;
        let phi = &x[1..];
        // weighted cosine analysis: c_k = (2/N) [phi_0 v_k(0)/2 + sum_{j>=1} phi_j v_k(j)]
        let mut coeffs = alloc::vec![0.0; n];
        for (k, coeff) in coeffs.iter_mut().enumerate() {
            let v = &self.eigenvectors[k];
            let mut s = 0.5 * phi[0] * v[0];
            for j in 1..n {
                s += phi[j] * v[j];
            }
            *coeff = 2.0 * s / n as f64;
        }
        Ok(coeffs)
    }

    fn from_modal(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n_interior;
        let mut x = alloc::vec![0.0; n + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let v = &self.eigenvectors[k];
            for j in 0..n {
                x[1 + j] += c * v[j];
            }
        }
        x
    }

    fn yosida_limit(&self, y: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        out[1..].copy_from_slice(&self.fold_interior(y));
        out
    }

    /// Tridiagonal (Thomas) solve of `λφ − φ'' = f` with the trace condition
    /// folded into the first row; returns `(0, φ)`.
    fn resolvent(&self, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.check_lambda(lambda)?;
        let n = self.n_interior;
        let ih2 = 1.0 / (self.h * self.h);
        let rhs = self.fold_interior(y);
        // rows: [λ + 2/h²] with sub/super −1/h², except row 0 super = −2/h²
        let diag = lambda + 2.0 * ih2;
        let mut c_prime = alloc::vec![0.0; n];
        let mut d_prime = alloc::vec![0.0; n];
        c_prime[0] = -2.0 * ih2 / diag;
        d_prime[0] = rhs[0] / diag;
        for j in 1..n {
            let m = diag - (-ih2) * c_prime[j - 1];
            if math::abs(m) < 1e-300 {
                return Err(Error::Numerical("singular tridiagonal solve".into()));
            }
            c_prime[j] = if j + 1 < n { -ih2 / m } else { 0.0 };
            d_prime[j] = (rhs[j] - (-ih2) * d_prime[j - 1]) / m;
        }
        let mut phi = alloc::vec![0.0; n];
        phi[n - 1] = d_prime[n - 1];
        for j in (0..n - 1).rev() {
            phi[j] = d_prime[j] - c_prime[j] * phi[j + 1];
        }
        let mut out = alloc::vec![0.0; n + 1];
        out[1..].copy_from_slice(&phi);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("resolvent solve produced non-finite values".into()));
        }
        Ok(out)
    }

    fn is_in_x0(&self, y: &[f64]) -> bool {
        let scale = y.iter().fold(0.0f64, |a, &v| a.max(math::abs(v)));
        math::abs(y[0]) <= 1e-12 * (1.0 + scale)
    }

    fn describe(&self) -> String {
        format!(
            "boundary(n_interior={}, x_max={}, center_modes={})",
            self.n_interior, self.x_max, self.center_modes
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::model::{project, semigroup_apply, verify_trichotomy_bounds, yosida_apply};

    fn model() -> BoundaryModel {
        BoundaryModel::new(16, 1.0, 1).unwrap()
    }

    fn probe(dim: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        (0..dim)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / 9007199254740992.0) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn eigenpairs_satisfy_the_stencil() {
        let m = model();
        for k in 0..m.x0_dim() {
            let mut coeffs = alloc::vec![0.0; m.x0_dim()];
            coeffs[k] = 1.0;
            let v = m.from_modal(&coeffs);
            let av = m.apply_shifted_generator(0.0, &v[1..]);
            // A0 v = a_k v means 0*v − A0 v = −a_k v
            for j in 0..m.x0_dim() {
                assert!(
                    (av[j] + m.eigenvalue(k) * v[1 + j]).abs() < 1e-9,
                    "mode {k} node {j}"
                );
            }
        }
    }

    #[test]
    fn modal_roundtrip_is_exact() {
        let m = model();
        let mut x = probe(m.dim(), 3);
        x[0] = 0.0;
        let back = m.from_modal(&m.to_modal(&x).unwrap());
        assert!(linalg::dist(&back, &x) < 1e-12);
    }

    #[test]
    fn resolvent_identity_residual_is_tiny() {
        let m = model();
        let y = probe(m.dim(), 7); // nonzero boundary slot
        let lambda = 4.0;
        let r = m.resolvent(lambda, &y).unwrap();
        assert_eq!(r[0], 0.0);
        let lhs = m.apply_shifted_generator(lambda, &r[1..]);
        let rhs = m.fold_interior(&y);
        assert!(linalg::dist(&lhs, &rhs) < 1e-10 * (1.0 + linalg::norm(&rhs)));
    }

    #[test]
    fn resolvent_vanishes_as_lambda_grows() {
        let m = model();
        let mut y = alloc::vec![0.0; m.dim()];
        y[0] = 1.0; // boundary slot only
        let mut last = f64::INFINITY;
        for lambda in [1e2, 1e4, 1e6] {
            let norm = linalg::norm(&m.resolvent(lambda, &y).unwrap());
            assert!(norm < last);
            last = norm;
        }
        assert!(last < 1e-4);
        // Yosida image of a boundary-only vector stays in X0
        let yos = yosida_apply(&m, 1e6, &y).unwrap();
        assert_eq!(yos[0], 0.0);
        assert!(linalg::norm(&yos) > 0.0);
    }

    #[test]
    fn resolvent_rejects_lambda_below_theta() {
        let m = model();
        let y = probe(m.dim(), 1);
        let theta = m.constants().theta_hy;
        assert!(matches!(
            m.resolvent(theta - 1.0, &y),
            Err(Error::SpectrumProximity(_))
        ));
    }

    #[test]
    fn projections_commute_with_resolvent() {
        let m = model();
        let y = probe(m.dim(), 11);
        let lambda = 9.0;
        for span in [Span::Center, Span::Stable, Span::CenterStable] {
            let a = project(&m, span, &m.resolvent(lambda, &y).unwrap());
            let b = m.resolvent(lambda, &project(&m, span, &y)).unwrap();
            assert!(
                linalg::dist(&a, &b) < 1e-10 * (1.0 + linalg::norm(&a)),
                "span {span:?}"
            );
        }
    }

    #[test]
    fn estimated_bounds_hold_with_margin() {
        let m = model();
        let ts: Vec<f64> = (1..=12).map(|i| 0.4 * i as f64).collect();
        let report = verify_trichotomy_bounds(&m, &ts).unwrap();
        assert!(report.pass, "worst ratio {}", report.worst_ratio);
        assert!(m.constants().k >= 1.0 && m.constants().k < 3.0);
    }

    #[test]
    fn semigroup_keeps_subspaces() {
        let m = model();
        let mut x = probe(m.dim(), 5);
        x[0] = 0.0;
        let cpart = semigroup_apply(&m, Span::Center, 0.7, &x).unwrap();
        let again = project(&m, Span::Center, &cpart);
        assert!(linalg::dist(&cpart, &again) < 1e-11);
    }
}

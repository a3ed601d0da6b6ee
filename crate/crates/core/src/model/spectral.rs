//! Diagonal backend: the generator acts mode by mode on a real spectrum
//! split into trichotomy bands.  Domain is dense, so `X = X_0` and all
//! λ-limits have exact closed forms; this backend doubles as the oracle for
//! the ladder code paths.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{LinearModel, Part, TrichotomyConstants};

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    labels: Vec<Part>,
    constants: TrichotomyConstants,
}

impl SpectralModel {
    /// Builds a diagonal model and labels every eigenvalue by the band it
    /// falls in: unstable `a >= alpha`, center `|a| <= gamma`, stable
    /// `a <= -beta`.  Eigenvalues inside the gaps are rejected.
    pub fn new(eigenvalues: Vec<f64>, k: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Config("spectral model needs at least one mode".into()));
        }
        let theta = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let constants = TrichotomyConstants::new(k, alpha, beta, gamma, theta, 1.0)?;
        let mut labels = Vec::with_capacity(eigenvalues.len());
        for &a in &eigenvalues {
            if !a.is_finite() {
                return Err(Error::Config(format!("non-finite eigenvalue {a}")));
            }
            let label = if a >= alpha {
                Part::Unstable
            } else if math::abs(a) <= gamma {
                Part::Center
            } else if a <= -beta {
                Part::Stable
            } else {
                return Err(Error::Config(format!(
                    "eigenvalue {a} falls in a trichotomy gap (alpha {alpha}, beta {beta}, gamma {gamma})"
                )));
            };
            labels.push(label);
        }
        Ok(SpectralModel {
            eigenvalues,
            labels,
            constants,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn labels(&self) -> &[Part] {
        &self.labels
    }
}

impl LinearModel for SpectralModel {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn x0_dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn constants(&self) -> &TrichotomyConstants {
        &self.constants
    }

    fn eigenvalue(&self, mode: usize) -> f64 {
        self.eigenvalues[mode]
    }

    fn part_of(&self, mode: usize) -> Part {
        self.labels[mode]
    }

    fn to_modal(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Config(format!(
                "state length {} does not match model dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(x.to_vec())
    }

    fn from_modal(&self, coeffs: &[f64]) -> Vec<f64> {
        coeffs.to_vec()
    }

    fn yosida_limit(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    fn is_in_x0(&self, _y: &[f64]) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("spectral({} modes)", self.dim())
    }
}

/// The stochastic-parabolic preset: eigenvalues `(1 − k²)π²`, the `k = 0`
/// mode unstable (with a synthetic basis vector for its degenerate
/// eigenfunction), `k = 1` center, the rest stable; constants `K = 1`,
/// `alpha = π² − ε*`, `beta = π² + ε*`, `gamma = γ*`.
pub fn parabolic_preset(n_modes: usize, epsilon_star: f64, gamma_star: f64) -> Result<SpectralModel> {
    let pi2 = core::f64::consts::PI * core::f64::consts::PI;
    if !(epsilon_star > 0.0 && epsilon_star < pi2) {
        return Err(Error::Config(format!(
            "epsilon_star must lie in (0, pi^2), got {epsilon_star}"
        )));
    }
    if !(gamma_star > 0.0 && gamma_star < pi2 - epsilon_star) {
        return Err(Error::Config(format!(
            "gamma_star must lie in (0, pi^2 - epsilon_star), got {gamma_star}"
        )));
    }
    if n_modes < 3 {
        return Err(Error::Config(format!(
            "parabolic preset needs at least 3 modes, got {n_modes}"
        )));
    }
    let eigenvalues: Vec<f64> = (0..n_modes)
        .map(|k| (1.0 - (k * k) as f64) * pi2)
        .collect();
    SpectralModel::new(
        eigenvalues,
        1.0,
        pi2 - epsilon_star,
        pi2 + epsilon_star,
        gamma_star,
    )
}

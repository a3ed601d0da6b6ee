//! Two-sided Brownian paths, the Wiener shift and the stationary
//! Ornstein-Uhlenbeck process driving the conjugation transform.
//!
//! Paths live on a uniform grid containing 0.  Gaussian increments are keyed
//! on `(seed, absolute node index)` with a counter-style RNG, so enlarging
//! the window or shifting a path never reshuffles the randomness already
//! drawn.

use alloc::format;
use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math;

/// Relative slack accepted when matching a time to a grid node.
const GRID_ALIGN_TOL: f64 = 1e-9;

/// Truncating the OU integral at `tail_cut` must leave a relative tail mass
/// below this threshold.
const TAIL_MASS_BOUND: f64 = 1e-12;

/// Uniform two-sided time grid `t_min = i_min*dt <= 0 <= i_max*dt = t_max`.
///
/// Nodes are addressed by absolute integer index so node times are exact
/// products `i * dt` and independent of the window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TimeGrid {
    i_min: i64,
    i_max: i64,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("grid step must be positive, got {dt}")));
        }
        if !(t_min.is_finite() && t_max.is_finite()) {
            return Err(Error::Config(format!("grid bounds must be finite, got [{t_min}, {t_max}]")));
        }
        if t_min > 0.0 || t_max < 0.0 {
            return Err(Error::Config(format!(
                "grid must contain 0: got [{t_min}, {t_max}]"
            )));
        }
        let i_min = Self::to_index(t_min, dt)?;
        let i_max = Self::to_index(t_max, dt)?;
        if i_min >= i_max {
            return Err(Error::Config(format!(
                "grid is degenerate: [{t_min}, {t_max}] at dt {dt}"
            )));
        }
        Ok(TimeGrid { i_min, i_max, dt })
    }

    fn to_index(t: f64, dt: f64) -> Result<i64> {
        let raw = t / dt;
        let idx = math::round(raw);
        if math::abs(raw - idx) > GRID_ALIGN_TOL * (1.0 + math::abs(raw)) {
            return Err(Error::Alignment(format!(
                "time {t} is not a multiple of dt {dt}"
            )));
        }
        Ok(idx as i64)
    }

    pub(crate) fn from_indices(i_min: i64, i_max: i64, dt: f64) -> Self {
        TimeGrid { i_min, i_max, dt }
    }

    pub fn t_min(&self) -> f64 {
        self.i_min as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.i_max as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of nodes (count of steps + 1).
    pub fn len(&self) -> usize {
        (self.i_max - self.i_min) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Absolute integer index of the first node.
    pub fn first_index(&self) -> i64 {
        self.i_min
    }

    /// Time of the `k`-th node of this window.
    pub fn node(&self, k: usize) -> f64 {
        (self.i_min + k as i64) as f64 * self.dt
    }

    /// Window offset of an on-grid time, or an alignment error.
    pub fn offset_of(&self, t: f64) -> Result<usize> {
        let idx = Self::to_index(t, self.dt)?;
        if idx < self.i_min || idx > self.i_max {
            return Err(Error::Coverage(format!(
                "time {t} outside grid window [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok((idx - self.i_min) as usize)
    }

    /// Offset of t = 0.
    pub fn zero_offset(&self) -> usize {
        (-self.i_min) as usize
    }
}

/// Standard normal draw keyed on `(seed, absolute increment index)`.
///
/// Each increment gets its own ChaCha stream, so any window sampled from the
/// same seed agrees with any other on their overlap.
fn keyed_normal(seed: u64, index: i64) -> f64 {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    // zigzag so negative indices get distinct keys
    let zz = ((index << 1) ^ (index >> 63)) as u64;
    key[8..16].copy_from_slice(&zz.to_le_bytes());
    key[16..24].copy_from_slice(b"wiener00");
    let mut rng = rand_chacha::ChaCha12Rng::from_seed(key);
    let a = rng.next_u64();
    let b = rng.next_u64();
    // Box-Muller; u1 in (0,1], u2 in [0,1)
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / 9007199254740992.0);
    let u2 = (b >> 11) as f64 * (1.0 / 9007199254740992.0);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
}

/// Discretized two-sided Wiener trajectory with `ω(0) = 0`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    grid: TimeGrid,
    values: Vec<f64>,
    seed: u64,
}

impl BrownianPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Path value at an on-grid time.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.grid.offset_of(t)?])
    }

    /// Wraps externally supplied node values; the node at t = 0 must vanish.
    pub fn from_values(grid: TimeGrid, values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "value count {} does not match grid length {}",
                values.len(),
                grid.len()
            )));
        }
        if values[grid.zero_offset()] != 0.0 {
            return Err(Error::Config("path value at t = 0 must be exactly 0".into()));
        }
        Ok(BrownianPath { grid, values, seed })
    }
}

/// Samples a two-sided Brownian path: two independent one-sided random walks
/// glued at 0, with the increment over `[i dt, (i+1) dt]` keyed on `(seed, i)`.
pub fn sample_brownian(grid: &TimeGrid, seed: u64) -> BrownianPath {
    let n = grid.len();
    let zero = grid.zero_offset();
    let sqdt = math::sqrt(grid.dt());
    let mut values = alloc::vec![0.0; n];
    // forward walk on [0, t_max]
    for k in zero..n - 1 {
        let abs_index = grid.first_index() + k as i64;
        values[k + 1] = values[k] + sqdt * keyed_normal(seed, abs_index);
    }
    // backward walk on [t_min, 0]
    for k in (0..zero).rev() {
        let abs_index = grid.first_index() + k as i64;
        values[k] = values[k + 1] - sqdt * keyed_normal(seed, abs_index);
    }
    BrownianPath {
        grid: grid.clone(),
        values,
        seed,
    }
}

/// Wiener shift `(θ_t ω)(s) = ω(s + t) − ω(t)` for an on-grid `t`.
///
/// The data window relabels to `[t_min − t, t_max − t]`; `t` itself must be
/// inside the current window.
pub fn wiener_shift(path: &BrownianPath, t: f64) -> Result<BrownianPath> {
    let grid = path.grid();
    let j_off = grid.offset_of(t)?;
    let pivot = path.values[j_off];
    let values: Vec<f64> = path.values.iter().map(|v| v - pivot).collect();
    let shift = grid.first_index() + j_off as i64;
    let new_grid = TimeGrid::from_indices(
        grid.first_index() - shift,
        grid.first_index() + (grid.len() as i64 - 1) - shift,
        grid.dt(),
    );
    BrownianPath::from_values(new_grid, values, path.seed)
}

/// Stationary Ornstein-Uhlenbeck process `z(θ_t ω)` of `dz + μz dt = dW`
/// sampled on a sub-window of the driving path, plus cumulative integrals
/// of `z` used by the weighted norms.
#[derive(Debug, Clone)]
pub struct OuProcess {
    mu: f64,
    grid: TimeGrid,
    z_values: Vec<f64>,
    tail_cut: f64,
    /// prefix[k] = trapezoid integral of z from node 0 of the window to node k
    prefix: Vec<f64>,
}

impl OuProcess {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    pub fn tail_cut(&self) -> f64 {
        self.tail_cut
    }

    pub fn z_at(&self, t: f64) -> Result<f64> {
        Ok(self.z_values[self.grid.offset_of(t)?])
    }

    /// A process frozen at a constant value; used by deterministic oracles.
    pub fn frozen(grid: TimeGrid, z: f64) -> Self {
        let n = grid.len();
        let z_values = alloc::vec![z; n];
        let prefix = build_prefix(&z_values, grid.dt());
        OuProcess {
            mu: 1.0,
            grid,
            z_values,
            tail_cut: 0.0,
            prefix,
        }
    }

    /// Wraps externally supplied samples of `z(θ_t ω)`.
    pub fn from_samples(grid: TimeGrid, mu: f64, z_values: Vec<f64>) -> Result<Self> {
        if z_values.len() != grid.len() {
            return Err(Error::Config(format!(
                "sample count {} does not match grid length {}",
                z_values.len(),
                grid.len()
            )));
        }
        if !z_values.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("z samples must be finite".into()));
        }
        let prefix = build_prefix(&z_values, grid.dt());
        Ok(OuProcess {
            mu,
            grid,
            z_values,
            tail_cut: 0.0,
            prefix,
        })
    }
}

fn build_prefix(z: &[f64], dt: f64) -> Vec<f64> {
    let mut prefix = alloc::vec![0.0; z.len()];
    for k in 1..z.len() {
        prefix[k] = prefix[k - 1] + 0.5 * dt * (z[k - 1] + z[k]);
    }
    prefix
}

/// Builds the stationary OU process `z(θ_t ω) = −μ ∫_{−∞}^0 e^{μs} ω(s+t) ds + ω(t)`
/// on the largest sub-window of `path` whose nodes all have `tail_cut` of
/// history available.
///
/// The improper integral is truncated once `e^{−μ·tail_cut} < 1e−12` and
/// evaluated by trapezoid quadrature, advanced node-to-node by exponential
/// discounting (exactly the trapezoid sum of the truncated integral).
pub fn ou_stationary(path: &BrownianPath, mu: f64, tail_cut: f64) -> Result<OuProcess> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Config(format!("OU rate must be positive, got {mu}")));
    }
    if math::exp(-mu * tail_cut) >= TAIL_MASS_BOUND {
        return Err(Error::Config(format!(
            "tail cut {tail_cut} leaves tail mass {:e} >= {TAIL_MASS_BOUND:e} at mu = {mu}",
            math::exp(-mu * tail_cut)
        )));
    }
    let grid = path.grid();
    let dt = grid.dt();
    let m = {
        let raw = tail_cut / dt;
        let mut m = math::round(raw) as i64;
        if (m as f64) < raw - GRID_ALIGN_TOL {
            m += 1;
        }
        m as usize
    };
    if m + 1 >= grid.len() {
        return Err(Error::Coverage(format!(
            "path window [{}, {}] shorter than tail cut {tail_cut}",
            grid.t_min(),
            grid.t_max()
        )));
    }
    let first = m; // first node with a full tail of history
    if grid.first_index() + first as i64 > 0 {
        return Err(Error::Coverage(format!(
            "path window [{}, {}] must cover [t_min − {tail_cut}, t_max] for an OU window containing 0",
            grid.t_min(),
            grid.t_max()
        )));
    }
    let w = path.values();
    // running integral K(t) = ∫_{t−tail}^{t} e^{μ(r−t)} ω(r) dr, trapezoid
    let mut k_run = 0.0;
    for j in 0..m {
        let wl = w[j] * math::exp(mu * ((j as f64) - (first as f64)) * dt);
        let wr = w[j + 1] * math::exp(mu * ((j as f64 + 1.0) - (first as f64)) * dt);
        k_run += 0.5 * dt * (wl + wr);
    }
    let decay = math::exp(-mu * dt);
    let n_out = grid.len() - first;
    let mut z_values = alloc::vec![0.0; n_out];
    z_values[0] = -mu * k_run + w[first];
    for k in 1..n_out {
        let j = first + k;
        k_run = decay * k_run + 0.5 * dt * (decay * w[j - 1] + w[j]);
        z_values[k] = -mu * k_run + w[j];
    }
    let out_grid = TimeGrid::from_indices(
        grid.first_index() + first as i64,
        grid.first_index() + (grid.len() as i64 - 1),
        dt,
    );
    if !z_values.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("OU process produced non-finite values".into()));
    }
    let prefix = build_prefix(&z_values, dt);
    Ok(OuProcess {
        mu,
        grid: out_grid,
        z_values,
        tail_cut: m as f64 * dt,
        prefix,
    })
}

/// Signed trapezoid integral `∫_s^t z(θ_r ω) dr` for on-grid endpoints.
///
/// Antisymmetric by construction: swapping the endpoints flips the sign
/// exactly.
pub fn integral_z(ou: &OuProcess, s: f64, t: f64) -> Result<f64> {
    let is = ou.grid.offset_of(s)?;
    let it = ou.grid.offset_of(t)?;
    Ok(ou.prefix[it] - ou.prefix[is])
}

impl OuProcess {
    /// `∫_s^t z` addressed by window offsets; shared with the solvers.
    pub(crate) fn integral_between_offsets(&self, is: usize, it: usize) -> f64 {
        self.prefix[it] - self.prefix[is]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_min: f64, t_max: f64, dt: f64) -> TimeGrid {
        TimeGrid::new(t_min, t_max, dt).unwrap()
    }

    #[test]
    fn grid_rejects_degenerate_windows() {
        assert!(matches!(TimeGrid::new(0.0, 1.0, -0.1), Err(Error::Config(_))));
        assert!(matches!(TimeGrid::new(0.5, 1.0, 0.1), Err(Error::Config(_))));
        assert!(matches!(TimeGrid::new(-1.0, 1.05, 0.1), Err(Error::Alignment(_))));
    }

    #[test]
    fn path_is_zero_at_origin_and_deterministic() {
        let g = grid(-2.0, 2.0, 0.01);
        let p1 = sample_brownian(&g, 42);
        let p2 = sample_brownian(&g, 42);
        assert_eq!(p1.value_at(0.0).unwrap(), 0.0);
        assert_eq!(p1.values(), p2.values());
        let p3 = sample_brownian(&g, 43);
        assert_ne!(p1.values(), p3.values());
    }

    #[test]
    fn windows_agree_on_overlap() {
        let small = sample_brownian(&grid(-1.0, 1.0, 0.01), 7);
        let large = sample_brownian(&grid(-3.0, 2.0, 0.01), 7);
        for k in 0..small.grid().len() {
            let t = small.grid().node(k);
            assert_eq!(small.value_at(t).unwrap(), large.value_at(t).unwrap());
        }
    }

    #[test]
    fn shift_matches_definition() {
        // θ_1 of a path with ω(1) = 0.3, ω(2) = 0.8 has value 0.5 at s = 1
        let g = grid(0.0, 2.0, 1.0);
        let p = BrownianPath::from_values(g, alloc::vec![0.0, 0.3, 0.8], 0).unwrap();
        let shifted = wiener_shift(&p, 1.0).unwrap();
        assert!((shifted.value_at(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(shifted.value_at(0.0).unwrap(), 0.0);
    }

    #[test]
    fn shift_zero_is_identity_and_shifts_compose() {
        let g = grid(-4.0, 4.0, 0.25);
        let p = sample_brownian(&g, 11);
        let same = wiener_shift(&p, 0.0).unwrap();
        assert_eq!(p.values(), same.values());

        let once = wiener_shift(&p, 1.0).unwrap();
        let twice = wiener_shift(&once, 0.5).unwrap();
        let direct = wiener_shift(&p, 1.5).unwrap();
        for k in 0..twice.grid().len() {
            let t = twice.grid().node(k);
            let a = twice.value_at(t).unwrap();
            let b = direct.value_at(t).unwrap();
            assert!((a - b).abs() < 1e-12, "flow property failed at {t}");
        }
    }

    #[test]
    fn shift_requires_on_grid_time() {
        let g = grid(-1.0, 1.0, 0.1);
        let p = sample_brownian(&g, 1);
        assert!(matches!(wiener_shift(&p, 0.05), Err(Error::Alignment(_))));
        assert!(matches!(wiener_shift(&p, 5.0), Err(Error::Coverage(_))));
    }

    #[test]
    fn ou_of_zero_path_is_zero() {
        let g = grid(-40.0, 2.0, 0.05);
        let zero = BrownianPath::from_values(g.clone(), alloc::vec![0.0; g.len()], 0).unwrap();
        let ou = ou_stationary(&zero, 1.0, 30.0).unwrap();
        assert!(ou.z_values().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn ou_rejects_insufficient_window_or_tail() {
        let g = grid(-5.0, 1.0, 0.05);
        let p = sample_brownian(&g, 3);
        assert!(matches!(ou_stationary(&p, 1.0, 30.0), Err(Error::Coverage(_))));
        assert!(matches!(ou_stationary(&p, 1.0, 4.0), Err(Error::Config(_))));
        assert!(matches!(ou_stationary(&p, -1.0, 30.0), Err(Error::Config(_))));
    }

    #[test]
    fn ou_matches_recursion_oracle() {
        // z_{n+1} = e^{−μΔ} z_n + ∫ e^{−μ(t_{n+1}−s)} dW with the integral
        // approximated from the path increment; deviation is O(dt).
        let dt = 0.01;
        let mu = 1.3;
        let g = grid(-32.0, 1.0, dt);
        let p = sample_brownian(&g, 99);
        let ou = ou_stationary(&p, mu, 28.0).unwrap();
        let z = ou.z_values();
        let og = ou.grid();
        let mut worst = 0.0f64;
        for k in 0..z.len() - 1 {
            let t = og.node(k);
            let dw = p.value_at(t + dt).unwrap() - p.value_at(t).unwrap();
            let pred = math::exp(-mu * dt) * z[k] + dw;
            worst = worst.max((z[k + 1] - pred).abs());
        }
        assert!(worst < 10.0 * dt, "recursion deviation {worst} not O(dt)");
    }

    #[test]
    fn ou_shift_covariance() {
        let dt = 0.02;
        let g = grid(-40.0, 4.0, dt);
        let p = sample_brownian(&g, 5);
        let ou = ou_stationary(&p, 1.0, 30.0).unwrap();
        let tau = 2.0;
        let shifted = ou_stationary(&wiener_shift(&p, tau).unwrap(), 1.0, 30.0).unwrap();
        let mut worst = 0.0f64;
        for k in 0..shifted.grid().len() {
            let t = shifted.grid().node(k);
            if let (Ok(a), Ok(b)) = (shifted.z_at(t), ou.z_at(t + tau)) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-3, "shift covariance violated by {worst}");
    }

    #[test]
    fn integral_z_is_signed_and_exact_for_constants() {
        let g = grid(-1.0, 3.0, 0.1);
        let ou = OuProcess::frozen(g, 0.7);
        let fwd = integral_z(&ou, 0.5, 2.5).unwrap();
        assert!((fwd - 0.7 * 2.0).abs() < 1e-12);
        let bwd = integral_z(&ou, 2.5, 0.5).unwrap();
        assert_eq!(fwd, -bwd);
        assert_eq!(integral_z(&ou, 1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(integral_z(&ou, 0.51, 1.0), Err(Error::Alignment(_))));
    }

    #[test]
    fn ou_sublinear_growth_ratio_is_bounded() {
        let g = grid(-80.0, 50.0, 0.05);
        let p = sample_brownian(&g, 12345);
        let ou = ou_stationary(&p, 1.0, 30.0).unwrap();
        let mut worst = 0.0f64;
        for k in 0..ou.grid().len() {
            let t = ou.grid().node(k);
            worst = worst.max(ou.z_values()[k].abs() / (1.0 + t.abs()));
        }
        assert!(worst < 5.0, "|z|/(1+|t|) reached {worst}");
    }
}

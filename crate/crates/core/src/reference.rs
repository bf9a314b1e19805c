//! Reference solutions and initial data for the linearized Euler equations.
//!
//! State vectors are ordered `(ρ', u'_1..u'_D, θ')`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::kinetic::MacroState;
use crate::lattice::VelocitySet;
use crate::solver::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("inconsistent unit system: {0}")]
    InconsistentUnits(String),
    #[error("grid domain {got:?} differs from the canonical domain {expected:?}")]
    DomainMismatch { expected: Vec<f64>, got: Vec<f64> },
    #[error("expected a {expected}D grid, got {got}D")]
    WrongDimension { expected: usize, got: usize },
    #[error("invalid background: {0}")]
    InvalidBackground(String),
}

/// Macroscopic fluctuation values at every grid site.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroField {
    pub grid: Grid,
    pub values: Vec<MacroState>,
}

impl MacroField {
    pub fn constant(grid: &Grid, value: MacroState) -> Self {
        Self { grid: grid.clone(), values: vec![value; grid.site_count()] }
    }

    /// Samples `f` at every site coordinate.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> MacroState) -> Self {
        let values = (0..grid.site_count()).map(|s| f(grid.coordinates(s))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn variable_count(&self) -> usize {
        self.grid.dimension + 2
    }

    /// Variable `k` of the state vector at every site.
    pub fn variable(&self, k: usize) -> Vec<f64> {
        let d = self.grid.dimension;
        self.values.iter().map(|m| m.to_vec(d)[k]).collect()
    }

    pub fn from_variables(grid: &Grid, vars: &[Vec<f64>]) -> Self {
        let d = grid.dimension;
        let values = (0..grid.site_count())
            .map(|s| {
                let v: Vec<f64> = vars.iter().map(|col| col[s]).collect();
                MacroState::from_slice(&v, d)
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.add(&b.scaled(-1.0))).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }

    /// Per-variable `Σ_sites`.
    pub fn sums(&self) -> Vec<f64> {
        (0..self.variable_count()).map(|k| self.variable(k).iter().sum()).collect()
    }
}

/// Background state of the linearization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background {
    pub rho0: f64,
    pub theta0: f64,
    pub gamma: f64,
}

impl Background {
    pub fn of(set: &VelocitySet) -> Self {
        Self { rho0: set.rho0, theta0: set.theta0, gamma: set.gamma }
    }

    pub fn sound_speed(&self) -> f64 {
        (self.gamma * self.theta0).sqrt()
    }
}

/// Scales between dimensional and nondimensional quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub rho0_star: f64,
    pub theta0_star: f64,
    pub x_star: f64,
    pub t_star: f64,
    pub u_star: f64,
}

const UNIT_TOLERANCE: f64 = 1e-12;

impl UnitSystem {
    pub fn new(rho0_star: f64, theta0_star: f64, x_star: f64, t_star: f64, u_star: f64) -> Result<Self, ReferenceError> {
        let us = Self { rho0_star, theta0_star, x_star, t_star, u_star };
        us.validate()?;
        Ok(us)
    }

    /// Derives `u* = √θ₀*` and `t* = x*/u*`.
    pub fn from_scales(rho0_star: f64, theta0_star: f64, x_star: f64) -> Result<Self, ReferenceError> {
        let u_star = theta0_star.sqrt();
        Self::new(rho0_star, theta0_star, x_star, x_star / u_star, u_star)
    }

    /// Scales mapping a dimensional background onto a lattice background.
    pub fn matching(
        dimensional_rho0: f64,
        dimensional_theta0: f64,
        lattice: &Background,
        x_star: f64,
    ) -> Result<Self, ReferenceError> {
        Self::from_scales(dimensional_rho0 / lattice.rho0, dimensional_theta0 / lattice.theta0, x_star)
    }

    pub fn identity() -> Self {
        Self { rho0_star: 1.0, theta0_star: 1.0, x_star: 1.0, t_star: 1.0, u_star: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ReferenceError> {
        let all = [self.rho0_star, self.theta0_star, self.x_star, self.t_star, self.u_star];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(ReferenceError::InconsistentUnits("all scales must be positive and finite".into()));
        }
        let speed = self.x_star / self.t_star;
        if (self.u_star - speed).abs() > UNIT_TOLERANCE * self.u_star.max(1.0) {
            return Err(ReferenceError::InconsistentUnits(format!("u* = {} but x*/t* = {speed}", self.u_star)));
        }
        if (self.u_star * self.u_star - self.theta0_star).abs() > UNIT_TOLERANCE * self.theta0_star.max(1.0) {
            return Err(ReferenceError::InconsistentUnits(format!(
                "(u*)² = {} but θ₀* = {}",
                self.u_star * self.u_star,
                self.theta0_star
            )));
        }
        Ok(())
    }

    pub fn dedimensionalize_time(&self, t: f64) -> f64 {
        t / self.t_star
    }

    pub fn redimensionalize_time(&self, t: f64) -> f64 {
        t * self.t_star
    }

    pub fn dedimensionalize_length(&self, x: f64) -> f64 {
        x / self.x_star
    }

    pub fn redimensionalize_length(&self, x: f64) -> f64 {
        x * self.x_star
    }

    pub fn dedimensionalize_state(&self, m: &MacroState) -> MacroState {
        MacroState {
            rho: m.rho / self.rho0_star,
            u: m.u.map(|v| v / self.u_star),
            theta: m.theta / self.theta0_star,
        }
    }

    pub fn redimensionalize_state(&self, m: &MacroState) -> MacroState {
        MacroState {
            rho: m.rho * self.rho0_star,
            u: m.u.map(|v| v * self.u_star),
            theta: m.theta * self.theta0_star,
        }
    }

    pub fn dedimensionalize_field(&self, f: &MacroField) -> MacroField {
        MacroField { grid: f.grid.clone(), values: f.values.iter().map(|m| self.dedimensionalize_state(m)).collect() }
    }

    pub fn redimensionalize_field(&self, f: &MacroField) -> MacroField {
        MacroField { grid: f.grid.clone(), values: f.values.iter().map(|m| self.redimensionalize_state(m)).collect() }
    }
}

/// Eigenstructure of the directional flux matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    /// `-c`, then `D` zeros, then `+c`.
    pub speeds: Vec<f64>,
    /// Right eigenvectors, one per speed.
    pub right: Vec<Vec<f64>>,
    /// Left eigenvectors, one per speed, with `l_k · r_m = δ_km`.
    pub left: Vec<Vec<f64>>,
}

impl Characteristics {
    pub fn project(&self, state: &[f64]) -> Vec<f64> {
        self.left.iter().map(|l| dot(l, state)).collect()
    }

    pub fn recombine(&self, w: &[f64]) -> Vec<f64> {
        let n = self.right.len();
        (0..n).map(|i| (0..n).map(|k| w[k] * self.right[k][i]).sum()).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flux matrix `A(n)` with `∂_t q + Σ_α A(e_α) ∂_α q = 0`.
pub fn flux_matrix(bg: &Background, direction: &[f64]) -> Vec<Vec<f64>> {
    let d = direction.len();
    let size = d + 2;
    let mut a = vec![vec![0.0; size]; size];
    for (alpha, &n) in direction.iter().enumerate() {
        a[0][1 + alpha] = bg.rho0 * n;
        a[1 + alpha][0] = bg.theta0 / bg.rho0 * n;
        a[1 + alpha][size - 1] = n;
        a[size - 1][1 + alpha] = (bg.gamma - 1.0) * bg.theta0 * n;
    }
    a
}

/// Orthonormal basis of the complement of the unit vector `n`.
fn tangents(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for axis in 0..d {
        let mut t: Vec<f64> = (0..d).map(|i| if i == axis { 1.0 } else { 0.0 }).collect();
        for b in std::iter::once(n.to_vec()).chain(out.iter().cloned()) {
            let p = dot(&t, &b);
            for i in 0..d {
                t[i] -= p * b[i];
            }
        }
        let norm = dot(&t, &t).sqrt();
        if norm > 1e-6 && out.len() + 1 < d {
            out.push(t.iter().map(|x| x / norm).collect());
        }
    }
    out
}

pub fn lee_characteristics(bg: &Background, direction: &[f64]) -> Result<Characteristics, ReferenceError> {
    if !(bg.rho0 > 0.0 && bg.theta0 > 0.0 && bg.gamma > 1.0) {
        return Err(ReferenceError::InvalidBackground(format!("{bg:?}")));
    }
    let norm = dot(direction, direction).sqrt();
    if direction.is_empty() || !(norm > 0.0) {
        return Err(ReferenceError::InvalidBackground("direction must be a nonzero vector".into()));
    }
    let n: Vec<f64> = direction.iter().map(|x| x / norm).collect();
    let d = n.len();
    let (rho0, theta0, gamma) = (bg.rho0, bg.theta0, bg.gamma);
    let c = bg.sound_speed();
    let c2 = c * c;
    let acoustic = |sign: f64| {
        let mut r = vec![rho0];
        r.extend(n.iter().map(|x| sign * c * x));
        r.push((gamma - 1.0) * theta0);
        let mut l = vec![theta0 / rho0 / (2.0 * c2)];
        l.extend(n.iter().map(|x| sign * c * x / (2.0 * c2)));
        l.push(1.0 / (2.0 * c2));
        (r, l)
    };
    let (r_minus, l_minus) = acoustic(-1.0);
    let (r_plus, l_plus) = acoustic(1.0);

    let mut r_entropy = vec![rho0];
    r_entropy.extend(vec![0.0; d]);
    r_entropy.push(-theta0);
    let mut l_entropy = vec![(1.0 - 1.0 / gamma) / rho0];
    l_entropy.extend(vec![0.0; d]);
    l_entropy.push(-1.0 / c2);

    let mut speeds = vec![-c, 0.0];
    let mut right = vec![r_minus, r_entropy];
    let mut left = vec![l_minus, l_entropy];
    for t in tangents(&n) {
        let mut v = vec![0.0];
        v.extend(t);
        v.push(0.0);
        speeds.push(0.0);
        right.push(v.clone());
        left.push(v);
    }
    speeds.push(c);
    right.push(r_plus);
    left.push(l_plus);
    Ok(Characteristics { speeds, right, left })
}

const INTEGER_SHIFT_TOLERANCE: f64 = 1e-9;

/// Periodic translation `out[j] = w(x_j - d·Δx)` of grid samples by `d` cells.
pub fn periodic_shift(w: &[f64], d: f64) -> Vec<f64> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    let nearest = d.round();
    if (d - nearest).abs() <= INTEGER_SHIFT_TOLERANCE {
        let s = (nearest as i64).rem_euclid(n as i64) as usize;
        return (0..n).map(|j| w[(j + n - s) % n]).collect();
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fwd.process(&mut buf);
    for (m, z) in buf.iter_mut().enumerate() {
        let freq = if 2 * m < n { m as f64 } else { m as f64 - n as f64 };
        if 2 * m == n {
            *z *= (std::f64::consts::PI * d).cos();
        } else {
            *z *= Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * freq * d / n as f64);
        }
    }
    inv.process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// Exact periodic solution of the 1D equations at time `t`.
pub fn analytic_solution_1d(ic: &MacroField, bg: &Background, t: f64) -> Result<MacroField, ReferenceError> {
    if ic.grid.dimension != 1 {
        return Err(ReferenceError::WrongDimension { expected: 1, got: ic.grid.dimension });
    }
    let ch = lee_characteristics(bg, &[1.0])?;
    let states: Vec<Vec<f64>> = ic.values.iter().map(|m| m.to_vec(1)).collect();
    let eps = ic.grid.eps;
    let mut w_shifted: Vec<Vec<f64>> = Vec::with_capacity(3);
    for k in 0..3 {
        let w: Vec<f64> = states.iter().map(|s| dot(&ch.left[k], s)).collect();
        w_shifted.push(periodic_shift(&w, ch.speeds[k] * t / eps));
    }
    let values = (0..ic.values.len())
        .map(|j| {
            let w: Vec<f64> = w_shifted.iter().map(|col| col[j]).collect();
            MacroState::from_slice(&ch.recombine(&w), 1)
        })
        .collect();
    Ok(MacroField { grid: ic.grid.clone(), values })
}

/// Canonical domain length per axis for the Gauss pulse in `dimension`.
pub fn canonical_length(dimension: usize) -> f64 {
    if dimension == 1 {
        1.0
    } else {
        2.0
    }
}

fn gauss_parameters(dimension: usize) -> (f64, f64) {
    match dimension {
        1 => (100.0, 0.5),
        2 => (7.0, 1.0),
        _ => (15.0, 1.0),
    }
}

/// Density pulse `exp(-a ‖x - x_c‖²)` with zero velocity and temperature.
pub fn gauss_pulse(dimension: usize, grid: &Grid) -> Result<MacroField, ReferenceError> {
    if grid.dimension != dimension || !(1..=3).contains(&dimension) {
        return Err(ReferenceError::WrongDimension { expected: dimension, got: grid.dimension });
    }
    let l = canonical_length(dimension);
    let got: Vec<f64> = (0..dimension).flat_map(|a| [grid.origin[a], grid.lengths[a]]).collect();
    let expected: Vec<f64> = (0..dimension).flat_map(|_| [0.0, l]).collect();
    if got.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(ReferenceError::DomainMismatch { expected, got });
    }
    gauss_pulse_unchecked(dimension, grid)
}

/// Gauss pulse on any grid of matching dimension.
pub fn gauss_pulse_unchecked(dimension: usize, grid: &Grid) -> Result<MacroField, ReferenceError> {
    if grid.dimension != dimension || !(1..=3).contains(&dimension) {
        return Err(ReferenceError::WrongDimension { expected: dimension, got: grid.dimension });
    }
    let (a, centre) = gauss_parameters(dimension);
    Ok(MacroField::from_fn(grid, |x| {
        let r2: f64 = x[..dimension].iter().map(|xi| (xi - centre) * (xi - centre)).sum();
        MacroState::density((-a * r2).exp())
    }))
}

/// The 3D pulse posed in dimensional variables, returned nondimensionalized on `grid`.
pub fn gauss_pulse_dimensional(grid: &Grid, units: &UnitSystem) -> Result<MacroField, ReferenceError> {
    units.validate()?;
    if grid.dimension != 3 {
        return Err(ReferenceError::WrongDimension { expected: 3, got: grid.dimension });
    }
    Ok(MacroField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|xi| {
            let xd = units.redimensionalize_length(*xi);
            (xd - 1.0) * (xd - 1.0)
        }).sum();
        units.dedimensionalize_state(&MacroState::density((-15.0 * r2).exp()))
    }))
}

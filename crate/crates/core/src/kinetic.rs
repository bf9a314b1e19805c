//! Macroscopic fluctuations ↔ populations.
//!
//! One equilibrium serves monoatomic and polyatomic sets alike; monoatomic
//! sets simply carry `β = 0` and the coefficients of the exact Maxwellian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::lattice::VelocitySet;

/// Tolerance of the polyatomic constraint checks.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-12;

/// Seed used by the command line verifier unless overridden.
pub const DEFAULT_SEED: u64 = 0x5EED_1EE;

/// Fluctuation triple `(ρ', u', θ')`; velocity components beyond the set's dimension stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MacroState {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

impl MacroState {
    pub const ZERO: MacroState = MacroState { rho: 0.0, u: [0.0; 3], theta: 0.0 };

    pub fn new(rho: f64, u: [f64; 3], theta: f64) -> Self {
        Self { rho, u, theta }
    }

    pub fn density(rho: f64) -> Self {
        Self { rho, ..Self::ZERO }
    }

    /// Components `(ρ', u'_1..u'_D, θ')`.
    pub fn to_vec(&self, dimension: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(dimension + 2);
        v.push(self.rho);
        v.extend_from_slice(&self.u[..dimension]);
        v.push(self.theta);
        v
    }

    pub fn from_slice(values: &[f64], dimension: usize) -> Self {
        let mut u = [0.0; 3];
        u[..dimension].copy_from_slice(&values[1..=dimension]);
        Self { rho: values[0], u, theta: values[dimension + 1] }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { rho: a * self.rho, u: self.u.map(|x| a * x), theta: a * self.theta }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            rho: self.rho + other.rho,
            u: [self.u[0] + other.u[0], self.u[1] + other.u[1], self.u[2] + other.u[2]],
            theta: self.theta + other.theta,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = (self.rho - other.rho).abs().max((self.theta - other.theta).abs());
        for a in 0..3 {
            d = d.max((self.u[a] - other.u[a]).abs());
        }
        d
    }

    /// Draws each active component uniformly from `[-1, 1]`.
    pub fn random(rng: &mut impl Rng, dimension: usize) -> Self {
        let mut u = [0.0; 3];
        for x in u.iter_mut().take(dimension) {
            *x = rng.random_range(-1.0..=1.0);
        }
        Self { rho: rng.random_range(-1.0..=1.0), u, theta: rng.random_range(-1.0..=1.0) }
    }
}

/// Particle densities ordered like the owning set's velocities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Populations(pub Vec<f64>);

impl Populations {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn unit(n: usize, j: usize) -> Self {
        let mut g = vec![0.0; n];
        g[j] = 1.0;
        Self(g)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Writes `g^eq(m)` into `out`.
pub fn equilibrium_into(set: &VelocitySet, m: &MacroState, out: &mut [f64]) {
    let k = &set.coeffs;
    let d = set.dimension;
    let scalar = k.a1 * m.rho + k.a2 * m.theta;
    let kinetic = k.c1 * m.rho + k.c2 * m.theta;
    for (i, g) in out.iter_mut().enumerate() {
        let c = set.velocities[i];
        let cu: f64 = (0..d).map(|a| f64::from(c[a]) * m.u[a]).sum();
        *g = (scalar + k.b * cu + 0.5 * set.speed_sq(i) * kinetic) * set.weights[i];
    }
}

pub fn equilibrium(set: &VelocitySet, m: &MacroState) -> Populations {
    let mut g = vec![0.0; set.len()];
    equilibrium_into(set, m, &mut g);
    Populations(g)
}

/// `ρ' = Σ g`, `u' = Σ c g / ρ0`, `θ' = ((γ-1) Σ ½(|c|²+β) g - θ0 ρ') / ρ0`.
pub fn moments_of(set: &VelocitySet, g: &[f64]) -> MacroState {
    let d = set.dimension;
    let mut rho = 0.0;
    let mut mom = [0.0; 3];
    let mut energy = 0.0;
    for (i, &gi) in g.iter().enumerate() {
        let c = set.velocities[i];
        rho += gi;
        for a in 0..d {
            mom[a] += f64::from(c[a]) * gi;
        }
        energy += 0.5 * (set.speed_sq(i) + set.beta[i]) * gi;
    }
    let theta = ((set.gamma - 1.0) * energy - set.theta0 * rho) / set.rho0;
    MacroState { rho, u: mom.map(|x| x / set.rho0), theta }
}

pub fn moments(set: &VelocitySet, g: &Populations) -> MacroState {
    moments_of(set, &g.0)
}

/// Conserved densities `(Σ g, Σ c g, Σ ½(|c|²+β) g)` of one site.
pub fn conserved_of(set: &VelocitySet, g: &[f64]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (i, &gi) in g.iter().enumerate() {
        let c = set.velocities[i];
        out[0] += gi;
        for a in 0..3 {
            out[1 + a] += f64::from(c[a]) * gi;
        }
        out[4] += 0.5 * (set.speed_sq(i) + set.beta[i]) * gi;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub max_defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    pub set: String,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_defect(&self) -> f64 {
        self.checks.iter().map(|c| c.max_defect).fold(0.0, f64::max)
    }
}

/// Checks the moment and flux identities the equilibrium must reproduce over random states.
pub fn verify_polyatomic_constraints(set: &VelocitySet, trials: usize, seed: u64) -> ConstraintReport {
    let d = set.dimension;
    let n = set.len();
    let (rho0, theta0, gamma) = (set.rho0, set.theta0, set.gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0_f64; 5];
    let mut g = vec![0.0; n];
    for _ in 0..trials.max(1) {
        let m = MacroState::random(&mut rng, d);
        equilibrium_into(set, &m, &mut g);
        let pressure = rho0 * m.theta + theta0 * m.rho;

        let mass: f64 = g.iter().sum();
        worst[0] = worst[0].max((mass - m.rho).abs());

        let mut energy = 0.0;
        for i in 0..n {
            energy += 0.5 * (set.speed_sq(i) + set.beta[i]) * g[i];
        }
        worst[2] = worst[2].max((energy - pressure / (gamma - 1.0)).abs());

        for a in 0..d {
            let mom: f64 = (0..n).map(|i| set.component(i, a) * g[i]).sum();
            worst[1] = worst[1].max((mom - rho0 * m.u[a]).abs());

            let flux: f64 = (0..n).map(|i| 0.5 * (set.speed_sq(i) + set.beta[i]) * set.component(i, a) * g[i]).sum();
            worst[4] = worst[4].max((flux - gamma / (gamma - 1.0) * rho0 * theta0 * m.u[a]).abs());

            for b in 0..d {
                let stress: f64 = (0..n).map(|i| set.component(i, a) * set.component(i, b) * g[i]).sum();
                let target = if a == b { pressure } else { 0.0 };
                worst[3] = worst[3].max((stress - target).abs());
            }
        }
    }
    let background_mass = (set.weights.iter().sum::<f64>() - rho0).abs();
    let background_energy = (set.background_energy() - rho0 * theta0 / (gamma - 1.0)).abs();

    let names = ["mass", "momentum", "energy density", "momentum flux", "energy flux"];
    let mut checks: Vec<ConstraintCheck> = names
        .iter()
        .zip(worst)
        .map(|(&name, max_defect)| ConstraintCheck { name, max_defect, pass: max_defect <= CONSTRAINT_TOLERANCE })
        .collect();
    for (name, max_defect) in [("background density", background_mass), ("background energy", background_energy)] {
        checks.push(ConstraintCheck { name, max_defect, pass: max_defect <= CONSTRAINT_TOLERANCE });
    }
    ConstraintReport { set: set.name.clone(), trials: trials.max(1), seed, tolerance: CONSTRAINT_TOLERANCE, checks }
}

/// Second and third velocity moments of an equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct FluxReport {
    /// Row-major `D×D` tensor `Σ c⊗c g^eq`.
    pub second_moment: Vec<f64>,
    /// Expected isotropic value `θ0 ρ' + ρ0 θ'`.
    pub pressure: f64,
    pub second_moment_defect: f64,
    /// Row-major `D×D×D` tensor `Σ c⊗c⊗c g^eq`.
    pub third_moment: Vec<f64>,
}

pub fn verify_flux_moments(set: &VelocitySet, m: &MacroState) -> FluxReport {
    let d = set.dimension;
    let g = equilibrium(set, m);
    let pressure = set.theta0 * m.rho + set.rho0 * m.theta;
    let mut second = vec![0.0; d * d];
    let mut third = vec![0.0; d * d * d];
    let mut defect = 0.0_f64;
    for a in 0..d {
        for b in 0..d {
            let s: f64 = (0..set.len()).map(|i| set.component(i, a) * set.component(i, b) * g.0[i]).sum();
            second[a * d + b] = s;
            let target = if a == b { pressure } else { 0.0 };
            defect = defect.max((s - target).abs());
            for c in 0..d {
                third[(a * d + b) * d + c] = (0..set.len())
                    .map(|i| set.component(i, a) * set.component(i, b) * set.component(i, c) * g.0[i])
                    .sum();
            }
        }
    }
    FluxReport { second_moment: second, pressure, second_moment_defect: defect, third_moment: third }
}

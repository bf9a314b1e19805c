//! Discrete velocity sets, their weights and equilibrium coefficients.
//!
//! Every built-in set is assembled from exact rationals and converted to
//! `f64` once. Velocity ordering is fixed: the rest velocity first, then
//! the axis velocities as `(-1, +1)` pairs per axis, then the edge
//! velocities `(±1,±1,0), (±1,0,±1), (0,±1,±1)`, then the corners, each
//! group enumerated with `-1` before `+1`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

fn qf(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Absolute tolerance for moment similarity conditions.
pub const MOMENT_TOLERANCE: f64 = 1e-12;

/// Weights at or below this magnitude are pruned from the 27-velocity family.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("weight class {class} evaluates to {value:e} < 0; the (rho0, theta0, alpha) triple is inadmissible")]
    NegativeWeight { class: WeightClass, value: f64 },
    #[error("f1 must be positive, got {0}")]
    NonPositiveF1(f64),
    #[error("background {name} must be positive, got {value}")]
    NonPositiveBackground { name: &'static str, value: f64 },
    #[error("velocity set {0} carries internal energies; use the polyatomic constraint verifier instead")]
    NotMonoatomic(String),
    #[error("unknown lattice '{0}' (expected d1q3, d2q5, d2q5-diatomic, d3q7, d3q9, d3q13, d3q19, d3q7-diatomic)")]
    UnknownLattice(String),
    #[error("velocity set {name} violates an invariant: {reason}")]
    InvariantViolated { name: String, reason: String },
}

/// The four symmetry classes of the 27-velocity cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightClass {
    Rest,
    Axis,
    Edge,
    Corner,
}

impl fmt::Display for WeightClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WeightClass::Rest => "rest",
            WeightClass::Axis => "axis",
            WeightClass::Edge => "edge",
            WeightClass::Corner => "corner",
        };
        f.write_str(s)
    }
}

/// Coefficients of the unified equilibrium
/// `g_i = (a1 ρ' + a2 θ' + b c_i·u' + ½|c_i|² (c1 ρ' + c2 θ')) f_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocitySet {
    pub name: String,
    pub dimension: usize,
    /// Integer velocities; components beyond `dimension` are zero.
    pub velocities: Vec<[i32; 3]>,
    pub weights: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho0: f64,
    pub theta0: f64,
    pub gamma: f64,
    pub coeffs: EquilibriumCoefficients,
}

impl VelocitySet {
    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    /// `|c_i|²` as a float.
    pub fn speed_sq(&self, i: usize) -> f64 {
        let c = self.velocities[i];
        f64::from(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
    }

    /// Velocity component `α` of `c_i` as a float.
    pub fn component(&self, i: usize, axis: usize) -> f64 {
        f64::from(self.velocities[i][axis])
    }

    pub fn is_monoatomic(&self) -> bool {
        self.beta.iter().all(|&b| b == 0.0)
    }

    /// Index of `-c_i`.
    pub fn opposite(&self, i: usize) -> Option<usize> {
        let c = self.velocities[i];
        let neg = [-c[0], -c[1], -c[2]];
        self.velocities.iter().position(|&v| v == neg)
    }

    /// Per-velocity symmetry class id: velocities sharing `|c|²` and `β`.
    pub fn symmetry_classes(&self) -> Vec<usize> {
        let mut keys: Vec<(i32, u64)> = Vec::new();
        self.velocities
            .iter()
            .zip(&self.beta)
            .map(|(c, b)| {
                let key = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2], b.to_bits());
                match keys.iter().position(|k| *k == key) {
                    Some(p) => p,
                    None => {
                        keys.push(key);
                        keys.len() - 1
                    }
                }
            })
            .collect()
    }

    /// Background energy density `Σ ½(|c|²+β) f`.
    pub fn background_energy(&self) -> f64 {
        (0..self.len()).map(|i| 0.5 * (self.speed_sq(i) + self.beta[i]) * self.weights[i]).sum()
    }

    /// Checks symmetry, sign, zeroth-moment and background-energy invariants.
    pub fn validate(&self, tol: f64) -> Result<(), LatticeError> {
        let fail = |reason: String| LatticeError::InvariantViolated { name: self.name.clone(), reason };
        if self.weights.len() != self.len() || self.beta.len() != self.len() {
            return Err(fail("weight/beta lengths differ from velocity count".into()));
        }
        for i in 0..self.len() {
            if self.weights[i] < 0.0 || self.beta[i] < 0.0 {
                return Err(fail(format!("negative weight or beta at velocity {i}")));
            }
            let j = self.opposite(i).ok_or_else(|| fail(format!("velocity {i} has no opposite")))?;
            if self.weights[i] != self.weights[j] || self.beta[i] != self.beta[j] {
                return Err(fail(format!("velocities {i} and {j} carry different weights")));
            }
        }
        let mass: f64 = self.weights.iter().sum();
        if (mass - self.rho0).abs() > tol {
            return Err(fail(format!("sum of weights {mass} != rho0 {}", self.rho0)));
        }
        let target = self.rho0 * self.theta0 / (self.gamma - 1.0);
        let energy = self.background_energy();
        if (energy - target).abs() > tol {
            return Err(fail(format!("background energy {energy} != {target}")));
        }
        Ok(())
    }
}

/// Exact description of a set prior to conversion.
struct ExactSet {
    name: String,
    dimension: usize,
    velocities: Vec<[i32; 3]>,
    weights: Vec<Q>,
    beta: Vec<Q>,
    rho0: Q,
    theta0: Q,
    gamma: Q,
    coeffs: [Q; 5],
}

impl ExactSet {
    fn monoatomic(name: &str, dimension: usize, velocities: Vec<[i32; 3]>, weights: Vec<Q>, rho0: Q, theta0: Q) -> Self {
        let d = dimension as i64;
        let n = velocities.len();
        Self {
            name: name.to_string(),
            dimension,
            velocities,
            weights,
            beta: vec![q(0, 1); n],
            rho0,
            theta0,
            gamma: q(d + 2, d),
            coeffs: monoatomic_coefficients_exact(d, rho0, theta0),
        }
    }

    fn prune(mut self) -> Self {
        let keep: Vec<usize> = (0..self.weights.len()).filter(|&i| self.weights[i] != q(0, 1)).collect();
        self.velocities = keep.iter().map(|&i| self.velocities[i]).collect();
        self.weights = keep.iter().map(|&i| self.weights[i]).collect();
        self.beta = keep.iter().map(|&i| self.beta[i]).collect();
        self
    }

    fn to_set(&self) -> VelocitySet {
        let [a1, a2, b, c1, c2] = self.coeffs.map(qf);
        VelocitySet {
            name: self.name.clone(),
            dimension: self.dimension,
            velocities: self.velocities.clone(),
            weights: self.weights.iter().copied().map(qf).collect(),
            beta: self.beta.iter().copied().map(qf).collect(),
            rho0: qf(self.rho0),
            theta0: qf(self.theta0),
            gamma: qf(self.gamma),
            coeffs: EquilibriumCoefficients { a1, a2, b, c1, c2 },
        }
    }
}

/// `a1 = 1/ρ0, a2 = -D/(2θ0), b = 1/θ0, c1 = 0, c2 = 1/θ0²`.
fn monoatomic_coefficients_exact(d: i64, rho0: Q, theta0: Q) -> [Q; 5] {
    let one = q(1, 1);
    [one / rho0, -q(d, 2) / theta0, one / theta0, q(0, 1), one / (theta0 * theta0)]
}

pub fn monoatomic_coefficients(dimension: usize, rho0: f64, theta0: f64) -> EquilibriumCoefficients {
    EquilibriumCoefficients {
        a1: 1.0 / rho0,
        a2: -(dimension as f64) / (2.0 * theta0),
        b: 1.0 / theta0,
        c1: 0.0,
        c2: 1.0 / (theta0 * theta0),
    }
}

fn axis_velocities(dimension: usize) -> Vec<[i32; 3]> {
    let mut out = Vec::with_capacity(2 * dimension);
    for axis in 0..dimension {
        for s in [-1, 1] {
            let mut c = [0; 3];
            c[axis] = s;
            out.push(c);
        }
    }
    out
}

fn edge_velocities() -> Vec<[i32; 3]> {
    let mut out = Vec::with_capacity(12);
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for sa in [-1, 1] {
            for sb in [-1, 1] {
                let mut c = [0; 3];
                c[a] = sa;
                c[b] = sb;
                out.push(c);
            }
        }
    }
    out
}

fn corner_velocities() -> Vec<[i32; 3]> {
    let mut out = Vec::with_capacity(8);
    for sx in [-1, 1] {
        for sy in [-1, 1] {
            for sz in [-1, 1] {
                out.push([sx, sy, sz]);
            }
        }
    }
    out
}

/// The 27 velocities of the full cube, grouped rest/axis/edge/corner.
pub fn cube_velocities() -> Vec<[i32; 3]> {
    let mut v = vec![[0, 0, 0]];
    v.extend(axis_velocities(3));
    v.extend(edge_velocities());
    v.extend(corner_velocities());
    v
}

fn class_of(c: &[i32; 3]) -> WeightClass {
    match c.iter().filter(|&&x| x != 0).count() {
        0 => WeightClass::Rest,
        1 => WeightClass::Axis,
        2 => WeightClass::Edge,
        _ => WeightClass::Corner,
    }
}

/// Weight per class `[rest, axis, edge, corner]` of the monoatomic 3D family.
fn family_class_weights<T>(rho0: T, theta0: T, alpha: T, k: impl Fn(i64, i64) -> T) -> [T; 4]
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<Output = T>,
{
    let rt = rho0 * theta0;
    [
        k(1, 2) * rt * (k(15, 1) * theta0 - k(9, 1)) + rho0 - k(8, 1) * alpha,
        k(1, 2) * rt * (k(2, 1) - k(5, 1) * theta0) + k(4, 1) * alpha,
        k(1, 8) * rt * (k(5, 1) * theta0 - k(1, 1)) - k(2, 1) * alpha,
        alpha,
    ]
}

pub fn family_weights(rho0: f64, theta0: f64, alpha: f64) -> [f64; 4] {
    family_class_weights(rho0, theta0, alpha, |n, d| n as f64 / d as f64)
}

fn d3q_family_exact(rho0: Q, theta0: Q, alpha: Q) -> ExactSet {
    let classes = family_class_weights(rho0, theta0, alpha, q);
    let velocities = cube_velocities();
    let weights = velocities.iter().map(|c| classes[class_of(c) as usize]).collect();
    let mut set = ExactSet::monoatomic("", 3, velocities, weights, rho0, theta0).prune();
    set.name = format!("D3Q{}", set.velocities.len());
    set
}

/// D1Q3: `ρ0 = 1, θ0 = 1/3`, weights `{2/3, 1/6, 1/6}`.
pub fn build_d1q3() -> VelocitySet {
    let mut velocities = vec![[0, 0, 0]];
    velocities.extend(axis_velocities(1));
    ExactSet::monoatomic("D1Q3", 1, velocities, vec![q(2, 3), q(1, 6), q(1, 6)], q(1, 1), q(1, 3)).to_set()
}

/// Monoatomic D2Q5: `ρ0 = 1, θ0 = 1/4`, weights `{1/2, 1/8 ×4}`.
pub fn build_d2q5_mono() -> VelocitySet {
    let mut velocities = vec![[0, 0, 0]];
    velocities.extend(axis_velocities(2));
    let mut weights = vec![q(1, 2)];
    weights.extend([q(1, 8); 4]);
    ExactSet::monoatomic("D2Q5", 2, velocities, weights, q(1, 1), q(1, 4)).to_set()
}

fn d2q5_diatomic_exact() -> ExactSet {
    let rho0 = q(20, 3);
    let theta0 = q(3, 10);
    let mut velocities = vec![[0, 0, 0]];
    velocities.extend(axis_velocities(2));
    let mut weights = vec![q(8, 3)];
    weights.extend([q(1, 1); 4]);
    let mut beta = vec![q(0, 1)];
    beta.extend([q(1, 2); 4]);
    let one = q(1, 1);
    ExactSet {
        name: "D2Q5-diatomic".into(),
        dimension: 2,
        velocities,
        weights,
        beta,
        rho0,
        theta0,
        gamma: q(5, 3),
        coeffs: [one / rho0, q(-5, 1), one / theta0, q(0, 1), q(5, 1) / theta0],
    }
}

/// Diatomic D2Q5: `ρ0 = 20/3, θ0 = 3/10, γ = 5/3`, internal energies `β = 1/2` on the axes.
pub fn build_d2q5_diatomic() -> VelocitySet {
    d2q5_diatomic_exact().to_set()
}

/// Monoatomic 3D family on the 27-velocity cube, pruned to its nonzero weights.
pub fn build_d3q_family(rho0: f64, theta0: f64, alpha: f64) -> Result<VelocitySet, LatticeError> {
    for (name, value) in [("rho0", rho0), ("theta0", theta0)] {
        if !(value > 0.0) {
            return Err(LatticeError::NonPositiveBackground { name, value });
        }
    }
    let classes = family_weights(rho0, theta0, alpha);
    for (class, &value) in [WeightClass::Rest, WeightClass::Axis, WeightClass::Edge, WeightClass::Corner]
        .iter()
        .zip(&classes)
    {
        if value < -PRUNE_THRESHOLD {
            return Err(LatticeError::NegativeWeight { class: *class, value });
        }
    }
    let mut velocities = Vec::new();
    let mut weights = Vec::new();
    for c in cube_velocities() {
        let w = classes[class_of(&c) as usize];
        if w > PRUNE_THRESHOLD {
            velocities.push(c);
            weights.push(w);
        }
    }
    let n = velocities.len();
    Ok(VelocitySet {
        name: format!("D3Q{n}"),
        dimension: 3,
        velocities,
        weights,
        beta: vec![0.0; n],
        rho0,
        theta0,
        gamma: 5.0 / 3.0,
        coeffs: monoatomic_coefficients(3, rho0, theta0),
    })
}

pub fn build_d3q7() -> VelocitySet {
    d3q_family_exact(q(1, 1), q(1, 5), q(0, 1)).to_set()
}

pub fn build_d3q9() -> VelocitySet {
    d3q_family_exact(q(1, 1), q(3, 5), q(3, 40)).to_set()
}

pub fn build_d3q13() -> VelocitySet {
    d3q_family_exact(q(1, 1), q(2, 5), q(0, 1)).to_set()
}

pub fn build_d3q19() -> VelocitySet {
    d3q_family_exact(q(1, 1), q(3, 10), q(0, 1)).to_set()
}

fn d3q7_diatomic_exact(f1: Q) -> ExactSet {
    let rho0 = q(42, 5) * f1;
    let mut velocities = vec![[0, 0, 0]];
    velocities.extend(axis_velocities(3));
    let mut weights = vec![q(12, 5) * f1];
    weights.extend([f1; 6]);
    let mut beta = vec![q(0, 1)];
    beta.extend([q(2, 3); 6]);
    ExactSet {
        name: "D3Q7-diatomic".into(),
        dimension: 3,
        velocities,
        weights,
        beta,
        rho0,
        theta0: q(5, 21),
        gamma: q(7, 5),
        coeffs: [q(1, 1) / rho0, q(-21, 2), q(21, 5), q(0, 1), q(147, 5)],
    }
}

/// Diatomic D3Q7 family parameterised by the axis weight `f1`; `ρ0 = 42/5 f1`.
pub fn build_d3q7_diatomic(f1: f64) -> Result<VelocitySet, LatticeError> {
    if !(f1 > 0.0) {
        return Err(LatticeError::NonPositiveF1(f1));
    }
    let mut set = d3q7_diatomic_exact(q(5, 42)).to_set();
    if f1 != 5.0 / 42.0 {
        set.rho0 = 42.0 / 5.0 * f1;
        set.weights = std::iter::once(12.0 / 5.0 * f1).chain(std::iter::repeat_n(f1, 6)).collect();
        set.coeffs.a1 = 1.0 / set.rho0;
    }
    Ok(set)
}

/// Named built-in velocity sets addressable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeName {
    D1Q3,
    D2Q5,
    D2Q5Diatomic,
    D3Q7,
    D3Q9,
    D3Q13,
    D3Q19,
    D3Q7Diatomic,
}

impl LatticeName {
    pub const ALL: [LatticeName; 8] = [
        LatticeName::D1Q3,
        LatticeName::D2Q5,
        LatticeName::D2Q5Diatomic,
        LatticeName::D3Q7,
        LatticeName::D3Q9,
        LatticeName::D3Q13,
        LatticeName::D3Q19,
        LatticeName::D3Q7Diatomic,
    ];

    pub fn build(self) -> VelocitySet {
        match self {
            LatticeName::D1Q3 => build_d1q3(),
            LatticeName::D2Q5 => build_d2q5_mono(),
            LatticeName::D2Q5Diatomic => build_d2q5_diatomic(),
            LatticeName::D3Q7 => build_d3q7(),
            LatticeName::D3Q9 => build_d3q9(),
            LatticeName::D3Q13 => build_d3q13(),
            LatticeName::D3Q19 => build_d3q19(),
            LatticeName::D3Q7Diatomic => d3q7_diatomic_exact(q(5, 42)).to_set(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LatticeName::D1Q3 => "d1q3",
            LatticeName::D2Q5 => "d2q5",
            LatticeName::D2Q5Diatomic => "d2q5-diatomic",
            LatticeName::D3Q7 => "d3q7",
            LatticeName::D3Q9 => "d3q9",
            LatticeName::D3Q13 => "d3q13",
            LatticeName::D3Q19 => "d3q19",
            LatticeName::D3Q7Diatomic => "d3q7-diatomic",
        }
    }
}

impl FromStr for LatticeName {
    type Err = LatticeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LatticeName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| LatticeError::UnknownLattice(s.to_string()))
    }
}

impl fmt::Display for LatticeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One similarity condition `Σ ζ(c_i) f_i = ⟨ζ M⟩`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCondition {
    pub name: String,
    pub discrete: f64,
    pub continuous: f64,
    pub defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub set: String,
    pub tolerance: f64,
    pub conditions: Vec<MomentCondition>,
}

impl CompatibilityReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn max_defect(&self) -> f64 {
        self.conditions.iter().map(|c| c.defect).fold(0.0, f64::max)
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Compares the discrete moments of `f` with the Gaussian moments of the background Maxwellian.
pub fn check_moment_compatibility(set: &VelocitySet) -> Result<CompatibilityReport, LatticeError> {
    if !set.is_monoatomic() {
        return Err(LatticeError::NotMonoatomic(set.name.clone()));
    }
    let d = set.dimension;
    let df = d as f64;
    let (rho0, theta0) = (set.rho0, set.theta0);
    let mut conditions = Vec::new();
    let mut push = |name: String, zeta: &dyn Fn(usize) -> f64, continuous: f64| {
        let discrete: f64 = (0..set.len()).map(|i| zeta(i) * set.weights[i]).sum();
        let defect = (discrete - continuous).abs();
        conditions.push(MomentCondition { name, discrete, continuous, defect, pass: defect <= MOMENT_TOLERANCE });
    };
    push("1".into(), &|_| 1.0, rho0);
    push("|v|^2/2".into(), &|i| 0.5 * set.speed_sq(i), 0.5 * df * rho0 * theta0);
    for a in 0..d {
        for b in 0..d {
            let delta = if a == b { 1.0 } else { 0.0 };
            push(
                format!("v_{} v_{}", AXES[a], AXES[b]),
                &|i| set.component(i, a) * set.component(i, b),
                rho0 * theta0 * delta,
            );
        }
    }
    for a in 0..d {
        for b in 0..d {
            let delta = if a == b { 1.0 } else { 0.0 };
            push(
                format!("|v|^2/2 v_{} v_{}", AXES[a], AXES[b]),
                &|i| 0.5 * set.speed_sq(i) * set.component(i, a) * set.component(i, b),
                0.5 * (df + 2.0) * rho0 * theta0 * theta0 * delta,
            );
        }
    }
    push(
        "|v|^4/4".into(),
        &|i| 0.25 * set.speed_sq(i) * set.speed_sq(i),
        0.25 * df * (df + 2.0) * rho0 * theta0 * theta0,
    );
    Ok(CompatibilityReport { set: set.name.clone(), tolerance: MOMENT_TOLERANCE, conditions })
}

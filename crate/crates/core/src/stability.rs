//! Linear stability analysis of the collide–stream update.
//!
//! The update is linear, so per Fourier mode it reduces to the amplification
//! matrix `Γ(kε) = diag(exp(-i kε·c_m)) H(½)`. Sets whose `Γ` is unitary for
//! every `kε` are stable outright; otherwise the spectral radius, regularity
//! and eigenvector conditioning are sampled, and a weighted symmetrizer `A₀`
//! with `A₀ H(½)` symmetric is searched for.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kinetic::{self, Populations};
use crate::lattice::VelocitySet;
use crate::linalg::{self, CMatrix, C64};

pub const UNITARY_TOLERANCE: f64 = 1e-12;
pub const SPECTRAL_TOLERANCE: f64 = 1e-12;
pub const REGULARITY_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_KAPPA_CAP: f64 = 1e6;
pub const PROJECTION_TOLERANCE: f64 = 1e-12;
pub const STRUCTURE_TOLERANCE: f64 = 1e-10;
const DEFECTIVE_CLUSTER: f64 = 1e-8;
const DEFECTIVE_KAPPA: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("relaxation time must be nonzero")]
    ZeroTau,
    #[error("wave number component {0} outside [-π, π]")]
    OutOfRangeWaveNumber(f64),
    #[error("wave number has {got} components, expected {expected}")]
    WrongDimension { expected: usize, got: usize },
    #[error("scan resolution must be at least 2, got {0}")]
    ResolutionTooSmall(usize),
    #[error("eigen decomposition failed at kε = {0:?}")]
    EigenFailure(Vec<f64>),
    #[error("no positive class-constant symmetrizer for {set} (defect {defect:e})")]
    NoStructureFound { set: String, defect: f64 },
}

/// Dense real collision matrix `H(τ) = (1-1/τ) I + (1/τ) E`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMatrix {
    pub set: String,
    pub tau: f64,
    pub n: usize,
    pub dimension: usize,
    pub velocities: Vec<[i32; 3]>,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl CollisionMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        CMatrix::from_real(self.n, self.n, &self.data)
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) * g[j]).sum()).collect()
    }

    /// `max |M² - M|`.
    pub fn idempotency_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let sq: f64 = (0..n).map(|k| self.get(i, k) * self.get(k, j)).sum();
                worst = worst.max((sq - self.get(i, j)).abs());
            }
        }
        worst
    }
}

/// Equilibrium projector `E`: column `j` is `g^eq(moments(e_j))`.
pub fn equilibrium_projector(set: &VelocitySet) -> CollisionMatrix {
    let n = set.len();
    let mut data = vec![0.0; n * n];
    for j in 0..n {
        let m = kinetic::moments(set, &Populations::unit(n, j));
        let col = kinetic::equilibrium(set, &m);
        for i in 0..n {
            data[i * n + j] = col.0[i];
        }
    }
    CollisionMatrix {
        set: set.name.clone(),
        tau: 1.0,
        n,
        dimension: set.dimension,
        velocities: set.velocities.clone(),
        data,
    }
}

pub fn build_h(set: &VelocitySet, tau: f64) -> Result<CollisionMatrix, StabilityError> {
    if tau == 0.0 {
        return Err(StabilityError::ZeroTau);
    }
    let mut h = equilibrium_projector(set);
    let n = h.n;
    let omega = 1.0 / tau;
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            h.data[i * n + j] = (1.0 - omega) * delta + omega * h.data[i * n + j];
        }
    }
    h.tau = tau;
    Ok(h)
}

/// `Γ(kε)` together with its wave number.
#[derive(Debug, Clone)]
pub struct AmplificationMatrix {
    pub keps: Vec<f64>,
    pub gamma: CMatrix,
}

pub fn build_gamma(h: &CollisionMatrix, keps: &[f64]) -> Result<AmplificationMatrix, StabilityError> {
    if keps.len() != h.dimension {
        return Err(StabilityError::WrongDimension { expected: h.dimension, got: keps.len() });
    }
    if let Some(&k) = keps.iter().find(|k| !(k.abs() <= PI)) {
        return Err(StabilityError::OutOfRangeWaveNumber(k));
    }
    Ok(gamma_unchecked(h, keps))
}

fn gamma_unchecked(h: &CollisionMatrix, keps: &[f64]) -> AmplificationMatrix {
    let n = h.n;
    let phases: Vec<C64> = h
        .velocities
        .iter()
        .map(|c| {
            let dot: f64 = keps.iter().zip(c).map(|(k, &ci)| k * ci as f64).sum();
            C64::from_polar(1.0, -dot)
        })
        .collect();
    let gamma = CMatrix::from_fn(n, n, |i, j| phases[i] * h.get(i, j));
    AmplificationMatrix { keps: keps.to_vec(), gamma }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub keps: Vec<f64>,
    pub unitary_defect: f64,
    pub rho: f64,
    pub kappa: f64,
    pub min_singular_value: f64,
    pub flags: Vec<String>,
}

impl SampleRecord {
    fn has(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionSummary {
    pub regular: bool,
    pub spectral_radius_bounded: bool,
    pub kappa_bounded: bool,
    pub max_rho: f64,
    pub min_singular_value: f64,
    /// Observed `C = max κ(V)` over the scan.
    pub max_kappa: f64,
    pub kappa_cap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub set: String,
    pub tau: f64,
    pub resolution: usize,
    pub max_unitary_defect: f64,
    pub all_unitary: bool,
    pub conditions: ConditionSummary,
    pub samples: Vec<SampleRecord>,
    pub verdict: Verdict,
    pub structure: Option<StructureReport>,
}

impl StabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Stable by the scan, or certified by a stability structure.
    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable || self.structure.as_ref().is_some_and(|s| s.passed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub resolution: usize,
    pub tau: f64,
    pub kappa_cap: f64,
}

impl ScanConfig {
    pub fn new(resolution: usize) -> Self {
        Self { resolution, tau: 0.5, kappa_cap: DEFAULT_KAPPA_CAP }
    }
}

/// Wave numbers on a uniform `[-π, π]^D` grid with endpoints, plus the origin
/// when the per-axis grid misses it.
pub fn scan_points(dimension: usize, resolution: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..resolution)
        .map(|j| {
            if j + 1 == resolution {
                PI
            } else {
                -PI + 2.0 * PI * j as f64 / (resolution - 1) as f64
            }
        })
        .collect();
    let total = resolution.pow(dimension as u32);
    let mut points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            (0..dimension)
                .map(|_| {
                    let v = axis[idx % resolution];
                    idx /= resolution;
                    v
                })
                .collect()
        })
        .collect();
    if resolution % 2 == 0 {
        points.push(vec![0.0; dimension]);
    }
    points
}

pub fn scan_theorem1(set: &VelocitySet, resolution: usize) -> Result<StabilityReport, StabilityError> {
    scan_theorem1_with(set, ScanConfig::new(resolution))
}

pub fn scan_theorem1_with(set: &VelocitySet, cfg: ScanConfig) -> Result<StabilityReport, StabilityError> {
    if cfg.resolution < 2 {
        return Err(StabilityError::ResolutionTooSmall(cfg.resolution));
    }
    let h = build_h(set, cfg.tau)?;
    let points = scan_points(set.dimension, cfg.resolution);
    let samples: Vec<SampleRecord> = points.par_iter().map(|k| analyze_sample(&h, k)).collect();

    let max_unitary_defect = samples.iter().map(|s| s.unitary_defect).fold(0.0, f64::max);
    let all_unitary = samples.iter().all(|s| s.has("unitary"));
    let max_rho = samples.iter().map(|s| s.rho).fold(0.0, f64::max);
    let min_sv = samples.iter().map(|s| s.min_singular_value).fold(f64::INFINITY, f64::min);
    let max_kappa = samples.iter().map(|s| s.kappa).fold(0.0, f64::max);
    let failed_eigen = samples.iter().any(|s| s.has("eigen-failure"));
    let defective = samples.iter().any(|s| s.has("possibly-non-diagonalizable"));
    let conditions = ConditionSummary {
        regular: min_sv > REGULARITY_TOLERANCE,
        spectral_radius_bounded: max_rho <= 1.0 + SPECTRAL_TOLERANCE,
        kappa_bounded: max_kappa <= cfg.kappa_cap,
        max_rho,
        min_singular_value: min_sv,
        max_kappa,
        kappa_cap: cfg.kappa_cap,
    };
    let verdict = if !conditions.regular || !conditions.spectral_radius_bounded {
        Verdict::Unstable
    } else if failed_eigen || defective || !conditions.kappa_bounded {
        Verdict::Indeterminate
    } else {
        Verdict::Stable
    };
    let structure = check_stability_structure(set).ok();
    Ok(StabilityReport {
        set: set.name.clone(),
        tau: cfg.tau,
        resolution: cfg.resolution,
        max_unitary_defect,
        all_unitary,
        conditions,
        samples,
        verdict,
        structure,
    })
}

fn analyze_sample(h: &CollisionMatrix, keps: &[f64]) -> SampleRecord {
    let AmplificationMatrix { gamma, .. } = gamma_unchecked(h, keps);
    let unitary_defect = gamma.unitarity_defect();
    if unitary_defect <= UNITARY_TOLERANCE {
        return SampleRecord {
            keps: keps.to_vec(),
            unitary_defect,
            rho: 1.0,
            kappa: 1.0,
            min_singular_value: 1.0,
            flags: vec!["unitary".into()],
        };
    }
    let mut flags = Vec::new();
    let min_sv = match linalg::svd(&gamma) {
        Ok(s) => s.min(),
        Err(_) => {
            flags.push("svd-failure".into());
            f64::NAN
        }
    };
    let (rho, kappa) = match linalg::eigen(&gamma) {
        Ok(eig) => {
            let rho = eig.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let kappa = linalg::svd(&eig.vectors).map_or(f64::INFINITY, |s| s.condition_number());
            if kappa > DEFECTIVE_KAPPA && has_tight_cluster(&eig.values) {
                flags.push("possibly-non-diagonalizable".into());
            }
            (rho, kappa)
        }
        Err(_) => {
            flags.push("eigen-failure".into());
            (f64::NAN, f64::NAN)
        }
    };
    if rho > 1.0 + SPECTRAL_TOLERANCE {
        flags.push("spectral-radius-exceeded".into());
    }
    if !(min_sv > REGULARITY_TOLERANCE) {
        flags.push("singular".into());
    }
    SampleRecord { keps: keps.to_vec(), unitary_defect, rho, kappa, min_singular_value: min_sv, flags }
}

fn has_tight_cluster(values: &[C64]) -> bool {
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            if (a - b).norm() < DEFECTIVE_CLUSTER {
                return true;
            }
        }
    }
    false
}

/// Eigenvalue cluster with reported multiplicity.
#[derive(Debug, Clone, Serialize)]
pub struct EigenCluster {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub set: String,
    /// `max |E² - E|`.
    pub projection_defect: f64,
    /// Distance of the spectrum of the collision operator `H(½) - I` from `{0, -2}`.
    pub spectrum_defect: f64,
    pub eigen_multiplicities: Vec<EigenCluster>,
    /// Distance of the spectrum of `H(½)` from `{1, -1}`.
    pub update_spectrum_defect: f64,
    pub update_eigen_multiplicities: Vec<EigenCluster>,
    /// Diagonal of the symmetrizer, one entry per velocity.
    pub a0: Vec<f64>,
    pub a0_source: String,
    /// `max |A₀H(½) - (A₀H(½))ᵀ|`.
    pub symmetry_defect: f64,
}

impl StructureReport {
    pub fn projection_ok(&self) -> bool {
        self.projection_defect <= PROJECTION_TOLERANCE
    }

    pub fn spectrum_ok(&self) -> bool {
        self.spectrum_defect <= STRUCTURE_TOLERANCE
    }

    pub fn symmetry_ok(&self) -> bool {
        self.symmetry_defect <= STRUCTURE_TOLERANCE
    }

    pub fn passed(&self) -> bool {
        self.projection_ok() && self.spectrum_ok() && self.symmetry_ok()
    }
}

/// Symmetrizer `diag(3, 13·I₆, 52·I₁₂)` for D3Q19 in rest/axis/edge order.
pub fn d3q19_symmetrizer() -> Vec<f64> {
    let mut a = vec![3.0];
    a.extend([13.0; 6]);
    a.extend([52.0; 12]);
    a
}

pub fn check_stability_structure(set: &VelocitySet) -> Result<StructureReport, StabilityError> {
    check_structure_of(set, &equilibrium_projector(set))
}

/// Structure checks for a given projector `E`, which may differ from the set's own.
pub fn check_structure_of(set: &VelocitySet, e: &CollisionMatrix) -> Result<StructureReport, StabilityError> {
    let n = e.n;
    let projection_defect = e.idempotency_defect();
    let mut h_half = e.clone();
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            h_half.data[i * n + j] = 2.0 * e.get(i, j) - delta;
        }
    }
    h_half.tau = 0.5;

    let update_values = real_spectrum(&h_half)?;
    let collision_values: Vec<C64> = update_values.iter().map(|z| z - 1.0).collect();
    let spectrum_defect = distance_to(&collision_values, &[0.0, -2.0]);
    let update_spectrum_defect = distance_to(&update_values, &[1.0, -1.0]);

    let (a0, a0_source) = if set.name == "D3Q19" && n == 19 {
        (d3q19_symmetrizer(), "built-in".to_string())
    } else {
        (search_symmetrizer(set, &h_half)?, "class-constant search".to_string())
    };
    let symmetry_defect = symmetry_defect(&a0, &h_half);

    Ok(StructureReport {
        set: set.name.clone(),
        projection_defect,
        spectrum_defect,
        eigen_multiplicities: clusters(&collision_values),
        update_spectrum_defect,
        update_eigen_multiplicities: clusters(&update_values),
        a0,
        a0_source,
        symmetry_defect,
    })
}

fn real_spectrum(m: &CollisionMatrix) -> Result<Vec<C64>, StabilityError> {
    linalg::schur(&m.to_cmatrix())
        .map(|s| s.eigenvalues())
        .map_err(|_| StabilityError::EigenFailure(vec![0.0; m.dimension]))
}

fn distance_to(values: &[C64], targets: &[f64]) -> f64 {
    values
        .iter()
        .map(|z| targets.iter().map(|&t| (z - t).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn clusters(values: &[C64]) -> Vec<EigenCluster> {
    linalg::cluster_values(values, 1e-8)
        .into_iter()
        .map(|(z, m)| EigenCluster { re: z.re, im: z.im, multiplicity: m })
        .collect()
}

pub fn symmetry_defect(a0: &[f64], h: &CollisionMatrix) -> f64 {
    let n = h.n;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a0[i] * h.get(i, j) - a0[j] * h.get(j, i)).abs());
        }
    }
    worst
}

/// Least-squares positive diagonal, constant on symmetry classes, with `A₀H` symmetric.
fn search_symmetrizer(set: &VelocitySet, h: &CollisionMatrix) -> Result<Vec<f64>, StabilityError> {
    let classes = set.symmetry_classes();
    let k = classes.iter().copied().max().map_or(0, |m| m + 1);
    let n = h.n;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut row = vec![0.0; k];
            row[classes[i]] += h.get(i, j);
            row[classes[j]] -= h.get(j, i);
            for v in row.iter_mut() {
                if v.abs() <= 1e-14 {
                    *v = 0.0;
                }
            }
            if row.iter().any(|v| v.abs() > 0.0) {
                rows.push(row);
            }
        }
    }
    let weights = if rows.is_empty() || k == 1 {
        vec![1.0; k]
    } else {
        let a = CMatrix::from_fn(rows.len(), k, |r, c| C64::new(rows[r][c], 0.0));
        let svd = linalg::svd(&a).map_err(|_| StabilityError::NoStructureFound {
            set: set.name.clone(),
            defect: f64::INFINITY,
        })?;
        // project the all-ones vector onto the numerical null space
        let top = svd.max().max(1.0);
        let mut null: Vec<usize> = (0..k).filter(|&c| svd.singular_values[c] <= 1e-10 * top).collect();
        if null.is_empty() {
            null.push(k - 1);
        }
        let mut real = vec![0.0; k];
        for &c in &null {
            let v = svd.v.column(c);
            let w: C64 = v.iter().map(|z| z.conj()).sum();
            for (r, z) in real.iter_mut().zip(&v) {
                *r += (z * w).re;
            }
        }
        let lo = real.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lo > 0.0) {
            return Err(StabilityError::NoStructureFound { set: set.name.clone(), defect: lo });
        }
        real.iter().map(|x| x / lo).collect()
    };
    let a0: Vec<f64> = classes.iter().map(|&c| weights[c]).collect();
    let defect = symmetry_defect(&a0, h);
    if defect > STRUCTURE_TOLERANCE * a0.iter().copied().fold(1.0, f64::max) {
        return Err(StabilityError::NoStructureFound { set: set.name.clone(), defect });
    }
    Ok(a0)
}

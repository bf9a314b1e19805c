//! Collide–stream time stepping on a periodic Cartesian lattice.
//!
//! Populations are stored site-major (`n` contiguous values per site, `x`
//! fastest). One step runs two parallel passes over immutable input:
//!
//! 1. a moments pass that reduces each site to its `D+2` macroscopic values,
//! 2. a fused collide-and-pull pass where each destination entry
//!    `(x, i)` gathers the source site `x - c_i` and applies
//!    `(1-1/τ) g_i + (1/τ) g_i^eq` on the fly.
//!
//! Both passes write disjoint slices only, so the result is bit-identical
//! for every worker count.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::kinetic::{self, MacroState, Populations};
use crate::lattice::VelocitySet;
use crate::reference::MacroField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("field shape does not match the grid: {0}")]
    ShapeMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("relaxation time must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
}

/// Periodic grid with uniform spacing `eps` on every axis.
///
/// Site `(i, j, k)` sits at `origin + eps * (i, j, k)`; unused axes have extent 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dimension: usize,
    pub extent: [usize; 3],
    pub eps: f64,
    pub origin: [f64; 3],
    pub lengths: [f64; 3],
}

impl Grid {
    pub fn new(dimension: usize, extent: &[usize], lengths: &[f64], origin: &[f64]) -> Result<Self, SolverError> {
        if !(1..=3).contains(&dimension) {
            return Err(SolverError::InvalidGrid(format!("dimension {dimension} not in 1..=3")));
        }
        if extent.len() != dimension || lengths.len() != dimension || origin.len() != dimension {
            return Err(SolverError::InvalidGrid("extent/lengths/origin must have one entry per axis".into()));
        }
        if extent.iter().any(|&n| n == 0) || lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(SolverError::InvalidGrid("extents and lengths must be positive".into()));
        }
        let eps = lengths[0] / extent[0] as f64;
        for a in 1..dimension {
            let e = lengths[a] / extent[a] as f64;
            if (e - eps).abs() > 1e-12 * eps {
                return Err(SolverError::InvalidGrid(format!("axis {a} spacing {e} differs from {eps}")));
            }
        }
        let mut g = Grid { dimension, extent: [1; 3], eps, origin: [0.0; 3], lengths: [0.0; 3] };
        g.extent[..dimension].copy_from_slice(extent);
        g.origin[..dimension].copy_from_slice(origin);
        g.lengths[..dimension].copy_from_slice(lengths);
        Ok(g)
    }

    /// `n` sites per axis on `[0, length)^D`.
    pub fn cubic(dimension: usize, n: usize, length: f64) -> Result<Self, SolverError> {
        Self::new(dimension, &vec![n; dimension], &vec![length; dimension], &vec![0.0; dimension])
    }

    pub fn site_count(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.extent[0] * (iy + self.extent[1] * iz)
    }

    pub fn site_indices(&self, site: usize) -> [usize; 3] {
        let nx = self.extent[0];
        let ny = self.extent[1];
        [site % nx, (site / nx) % ny, site / (nx * ny)]
    }

    pub fn coordinates(&self, site: usize) -> [f64; 3] {
        let idx = self.site_indices(site);
        let mut x = [0.0; 3];
        for a in 0..self.dimension {
            x[a] = self.origin[a] + self.eps * idx[a] as f64;
        }
        x
    }

    /// Site reached from `site` by an integer lattice displacement, with periodic wrap.
    pub fn shifted(&self, site: usize, shift: [i32; 3]) -> usize {
        let idx = self.site_indices(site);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let n = self.extent[a] as i64;
            out[a] = (idx[a] as i64 + shift[a] as i64).rem_euclid(n) as usize;
        }
        self.index(out[0], out[1], out[2])
    }
}

/// Populations of every site, site-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationField {
    pub grid: Grid,
    pub set: Arc<VelocitySet>,
    pub data: Vec<f64>,
}

impl PopulationField {
    pub fn zeros(grid: Grid, set: Arc<VelocitySet>) -> Self {
        let data = vec![0.0; grid.site_count() * set.len()];
        Self { grid, set, data }
    }

    pub fn from_data(grid: Grid, set: Arc<VelocitySet>, data: Vec<f64>) -> Result<Self, SolverError> {
        let expected = grid.site_count() * set.len();
        if data.len() != expected {
            return Err(SolverError::ShapeMismatch(format!("{} values for {expected} slots", data.len())));
        }
        if grid.dimension != set.dimension {
            return Err(SolverError::ShapeMismatch(format!(
                "{}D grid with {}D velocity set",
                grid.dimension, set.dimension
            )));
        }
        Ok(Self { grid, set, data })
    }

    pub fn site(&self, site: usize) -> &[f64] {
        let n = self.set.len();
        &self.data[site * n..(site + 1) * n]
    }

    pub fn site_mut(&mut self, site: usize) -> &mut [f64] {
        let n = self.set.len();
        &mut self.data[site * n..(site + 1) * n]
    }

    pub fn macro_field(&self) -> MacroField {
        let n = self.set.len();
        let values = self.data.par_chunks(n).map(|g| kinetic::moments_of(&self.set, g)).collect();
        MacroField { grid: self.grid.clone(), values }
    }

    /// Domain totals of `(Σ g, Σ c g, Σ ½(|c|²+β) g)`.
    pub fn conserved_totals(&self) -> [f64; 5] {
        let n = self.set.len();
        let mut total = [0.0; 5];
        for g in self.data.chunks(n) {
            let c = kinetic::conserved_of(&self.set, g);
            for k in 0..5 {
                total[k] += c[k];
            }
        }
        total
    }
}

/// Fills every site with the equilibrium of the macroscopic field.
pub fn initialize_equilibrium(grid: &Grid, set: Arc<VelocitySet>, f: &MacroField) -> Result<PopulationField, SolverError> {
    if &f.grid != grid {
        return Err(SolverError::ShapeMismatch("macroscopic field lives on a different grid".into()));
    }
    if f.values.len() != grid.site_count() {
        return Err(SolverError::ShapeMismatch(format!(
            "{} macroscopic values for {} sites",
            f.values.len(),
            grid.site_count()
        )));
    }
    if grid.dimension != set.dimension {
        return Err(SolverError::ShapeMismatch(format!("{}D grid with {}D velocity set", grid.dimension, set.dimension)));
    }
    let n = set.len();
    let mut data = vec![0.0; grid.site_count() * n];
    data.par_chunks_mut(n)
        .zip(f.values.par_iter())
        .for_each(|(g, m)| kinetic::equilibrium_into(&set, m, g));
    Ok(PopulationField { grid: grid.clone(), set, data })
}

/// Single-site BGK relaxation `(1-1/τ) g + (1/τ) g^eq(moments(g))`.
pub fn collide(set: &VelocitySet, g: &Populations, tau: f64) -> Populations {
    let m = kinetic::moments(set, g);
    let eq = kinetic::equilibrium(set, &m);
    let omega = 1.0 / tau;
    Populations(g.0.iter().zip(&eq.0).map(|(gi, ei)| (1.0 - omega) * gi + omega * ei).collect())
}

/// Worker configuration for stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Use the global rayon pool.
    #[default]
    Global,
    /// Use a dedicated pool with this many workers.
    Threads(usize),
}

impl Parallelism {
    /// `--threads` value, falling back to `LEE_LBM_THREADS`.
    pub fn from_option_or_env(threads: Option<usize>) -> Self {
        threads
            .or_else(|| std::env::var("LEE_LBM_THREADS").ok().and_then(|v| v.trim().parse().ok()))
            .filter(|&t| t > 0)
            .map_or(Parallelism::Global, Parallelism::Threads)
    }
}

/// Reusable stepping state: linear maps of the set, neighbor tables and the back buffer.
pub struct Stepper {
    n: usize,
    dof: usize,
    /// `(D+2) × n`, row-major: site populations → `(ρ', u', θ')`.
    moment_matrix: Vec<f64>,
    /// `n × (D+2)`, row-major: `(ρ', u', θ')` → equilibrium populations.
    equilibrium_matrix: Vec<f64>,
    omega: f64,
    velocities: Vec<[i32; 3]>,
    extent: [usize; 3],
    /// For each axis, `wrap[a][s+1][x]` is `(x - s) mod N_a` for `s ∈ {-1, 0, 1}`.
    wrap: [[Vec<usize>; 3]; 3],
    macros: Vec<f64>,
    back: Vec<f64>,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl Stepper {
    pub fn new(set: &VelocitySet, grid: &Grid, tau: f64, parallelism: Parallelism) -> Result<Self, SolverError> {
        if !(tau > 0.0) {
            return Err(SolverError::NonPositiveTau(tau));
        }
        if set.velocities.iter().flatten().any(|c| c.abs() > 1) {
            return Err(SolverError::InvalidGrid("velocity components must lie in {-1, 0, 1}".into()));
        }
        let n = set.len();
        let d = set.dimension;
        let dof = d + 2;
        let mut moment_matrix = vec![0.0; dof * n];
        for j in 0..n {
            let m = kinetic::moments(set, &Populations::unit(n, j)).to_vec(d);
            for k in 0..dof {
                moment_matrix[k * n + j] = m[k];
            }
        }
        let mut equilibrium_matrix = vec![0.0; n * dof];
        for k in 0..dof {
            let mut unit = vec![0.0; dof];
            unit[k] = 1.0;
            let g = kinetic::equilibrium(set, &MacroState::from_slice(&unit, d));
            for i in 0..n {
                equilibrium_matrix[i * dof + k] = g.0[i];
            }
        }
        let wrap = std::array::from_fn(|a| {
            let len = grid.extent[a];
            std::array::from_fn(|s| {
                let shift = s as i64 - 1;
                (0..len).map(|x| (x as i64 - shift).rem_euclid(len as i64) as usize).collect()
            })
        });
        let pool = match parallelism {
            Parallelism::Global => None,
            Parallelism::Threads(t) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| SolverError::ThreadPool(e.to_string()))?,
            )),
        };
        let sites = grid.site_count();
        Ok(Self {
            n,
            dof,
            moment_matrix,
            equilibrium_matrix,
            omega: 1.0 / tau,
            velocities: set.velocities.clone(),
            extent: grid.extent,
            wrap,
            macros: vec![0.0; sites * dof],
            back: vec![0.0; sites * n],
            pool,
        })
    }

    /// Advances `field` by one time step `ε`.
    pub fn advance(&mut self, field: &mut PopulationField) {
        debug_assert_eq!(field.data.len(), self.back.len());
        match self.pool.clone() {
            Some(pool) => pool.install(|| self.advance_inner(field)),
            None => self.advance_inner(field),
        }
    }

    fn advance_inner(&mut self, field: &mut PopulationField) {
        let (n, dof) = (self.n, self.dof);
        let mm = &self.moment_matrix;
        self.macros.par_chunks_mut(dof).zip(field.data.par_chunks(n)).for_each(|(m, g)| {
            for k in 0..dof {
                let row = &mm[k * n..(k + 1) * n];
                m[k] = row.iter().zip(g).map(|(a, b)| a * b).sum();
            }
        });

        let [nx, ny, _] = self.extent;
        let src = &field.data;
        let macros = &self.macros;
        let eq = &self.equilibrium_matrix;
        let velocities = &self.velocities;
        let wrap = &self.wrap;
        let keep = 1.0 - self.omega;
        let omega = self.omega;
        self.back.par_chunks_mut(nx * n).enumerate().for_each(|(row, out)| {
            let (y, z) = (row % ny, row / ny);
            for (i, c) in velocities.iter().enumerate() {
                let sy = wrap[1][(c[1] + 1) as usize][y];
                let sz = wrap[2][(c[2] + 1) as usize][z];
                let src_row = nx * (sy + ny * sz);
                let xs = &wrap[0][(c[0] + 1) as usize];
                let eq_row = &eq[i * dof..(i + 1) * dof];
                for x in 0..nx {
                    let s = src_row + xs[x];
                    let m = &macros[s * dof..(s + 1) * dof];
                    let geq: f64 = eq_row.iter().zip(m).map(|(a, b)| a * b).sum();
                    out[x * n + i] = keep * src[s * n + i] + omega * geq;
                }
            }
        });
        std::mem::swap(&mut field.data, &mut self.back);
    }
}

/// One step `g_i(t+ε, x+εc_i) = (1-1/τ) g_i(t,x) + (1/τ) g_i^eq(t,x)`.
pub fn step(field: &PopulationField, tau: f64) -> Result<PopulationField, SolverError> {
    let mut out = field.clone();
    Stepper::new(&field.set, &field.grid, tau, Parallelism::Global)?.advance(&mut out);
    Ok(out)
}

/// Applies `n_steps` steps, calling `observer(step, time, field)` after each.
pub fn run<F>(field: PopulationField, n_steps: usize, tau: f64, observer: F) -> Result<PopulationField, SolverError>
where
    F: FnMut(usize, f64, &PopulationField),
{
    run_with(field, n_steps, tau, Parallelism::Global, observer)
}

pub fn run_with<F>(
    mut field: PopulationField,
    n_steps: usize,
    tau: f64,
    parallelism: Parallelism,
    mut observer: F,
) -> Result<PopulationField, SolverError>
where
    F: FnMut(usize, f64, &PopulationField),
{
    if n_steps == 0 {
        return Ok(field);
    }
    let mut stepper = Stepper::new(&field.set, &field.grid, tau, parallelism)?;
    let eps = field.grid.eps;
    for k in 1..=n_steps {
        stepper.advance(&mut field);
        observer(k, k as f64 * eps, &field);
    }
    Ok(field)
}

/// Step count `round(T/ε)` and the achieved end time.
pub fn step_count(end_time: f64, eps: f64) -> (usize, f64) {
    let steps = (end_time / eps).round().max(0.0) as usize;
    (steps, steps as f64 * eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_d1q3, build_d2q5_mono, LatticeName};
    use crate::stability::build_h;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(set: VelocitySet, n: usize, seed: u64) -> PopulationField {
        let grid = Grid::cubic(set.dimension, n, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = grid.site_count() * set.len();
        let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        PopulationField::from_data(grid, Arc::new(set), data).unwrap()
    }

    #[test]
    fn grid_rejects_inconsistent_spacing() {
        assert!(Grid::new(2, &[10, 20], &[1.0, 1.0], &[0.0, 0.0]).is_err());
        let g = Grid::new(2, &[10, 20], &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(g.site_count(), 200);
        assert!((g.eps - 0.1).abs() < 1e-15);
        assert!(Grid::cubic(4, 3, 1.0).is_err());
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = Grid::new(3, &[3, 4, 5], &[0.3, 0.4, 0.5], &[0.0; 3]).unwrap();
        for s in 0..g.site_count() {
            let [x, y, z] = g.site_indices(s);
            assert_eq!(g.index(x, y, z), s);
        }
        assert_eq!(g.shifted(g.index(0, 0, 0), [-1, -1, -1]), g.index(2, 3, 4));
    }

    #[test]
    fn zero_and_constant_fields() {
        let set = Arc::new(build_d1q3());
        let grid = Grid::cubic(1, 7, 1.0).unwrap();
        let zero = MacroField::constant(&grid, MacroState::ZERO);
        let f = initialize_equilibrium(&grid, set.clone(), &zero).unwrap();
        assert!(f.data.iter().all(|&x| x == 0.0));

        let one = MacroField::constant(&grid, MacroState::density(1.0));
        let f = initialize_equilibrium(&grid, set, &one).unwrap();
        for s in 0..7 {
            let g = f.site(s);
            assert!((g[0] - 2.0 / 3.0).abs() < 1e-15 && (g[1] - 1.0 / 6.0).abs() < 1e-15);
        }
        let stepped = step(&f, 0.5).unwrap();
        for (a, b) in stepped.data.iter().zip(&f.data) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_equilibrium_is_stationary_for_all_sets() {
        for name in LatticeName::ALL {
            let set = Arc::new(name.build());
            let grid = Grid::cubic(set.dimension, 4, 1.0).unwrap();
            let m = MacroField::constant(&grid, MacroState::new(0.2, [0.1, -0.3, 0.05], -0.1));
            let f = initialize_equilibrium(&grid, set, &m).unwrap();
            let g = step(&f, 0.5).unwrap();
            let diff = g.data.iter().zip(&f.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-14, "{name}: {diff}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let set = Arc::new(build_d1q3());
        let g1 = Grid::cubic(1, 8, 1.0).unwrap();
        let g2 = Grid::cubic(1, 9, 1.0).unwrap();
        let m = MacroField::constant(&g2, MacroState::ZERO);
        assert!(matches!(initialize_equilibrium(&g1, set, &m), Err(SolverError::ShapeMismatch(_))));
    }

    #[test]
    fn impulse_collision_at_tau_one() {
        // g3 = 1: ρ' = 1, u' = 1, θ' = (2·½ - 1/3) = 2/3; equilibrium reproduces the impulse
        let set = build_d1q3();
        let g = Populations(vec![0.0, 0.0, 1.0]);
        let m = kinetic::moments(&set, &g);
        assert!((m.rho - 1.0).abs() < 1e-15 && (m.u[0] - 1.0).abs() < 1e-15);
        assert!((m.theta - 2.0 / 3.0).abs() < 1e-15);
        let post = collide(&set, &g, 1.0);
        let eq = kinetic::equilibrium(&set, &m);
        for i in 0..3 {
            assert!((post.0[i] - eq.0[i]).abs() < 1e-15);
            assert!((post.0[i] - g.0[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn step_equals_collision_matrix_then_shift() {
        let f = random_field(build_d1q3(), 8, 42);
        let h = build_h(&f.set, 0.5).unwrap();
        let out = step(&f, 0.5).unwrap();
        let n = f.set.len();
        for s in 0..8 {
            let post: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h.get(i, j) * f.site(s)[j]).sum()).collect();
            for i in 0..n {
                let dst = f.grid.shifted(s, f.set.velocities[i]);
                assert!((out.site(dst)[i] - post[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn step_is_linear() {
        let a = random_field(build_d2q5_mono(), 6, 1);
        let b = random_field(build_d2q5_mono(), 6, 2);
        let (alpha, beta) = (0.7, -1.3);
        let combo = PopulationField {
            data: a.data.iter().zip(&b.data).map(|(x, y)| alpha * x + beta * y).collect(),
            ..a.clone()
        };
        let sa = step(&a, 0.5).unwrap();
        let sb = step(&b, 0.5).unwrap();
        let sc = step(&combo, 0.5).unwrap();
        for k in 0..sc.data.len() {
            assert!((sc.data[k] - (alpha * sa.data[k] + beta * sb.data[k])).abs() < 1e-13);
        }
    }

    #[test]
    fn run_zero_steps_is_identity() {
        let f = random_field(build_d1q3(), 5, 3);
        let mut calls = 0;
        let g = run(f.clone(), 0, 0.5, |_, _, _| calls += 1).unwrap();
        assert_eq!(g, f);
        assert_eq!(calls, 0);
    }

    #[test]
    fn observer_sees_every_step() {
        let f = random_field(build_d1q3(), 5, 3);
        let mut seen = Vec::new();
        run(f, 4, 0.5, |k, t, _| seen.push((k, t))).unwrap();
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[3].0, 4);
        assert!((seen[3].1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        for name in [LatticeName::D2Q5, LatticeName::D3Q19] {
            let f = random_field(name.build(), 6, 9);
            let one = run_with(f.clone(), 3, 0.5, Parallelism::Threads(1), |_, _, _| {}).unwrap();
            let many = run_with(f, 3, 0.5, Parallelism::Threads(5), |_, _, _| {}).unwrap();
            assert!(one.data.iter().zip(&many.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn tau_must_be_positive() {
        let f = random_field(build_d1q3(), 4, 0);
        assert_eq!(step(&f, 0.0).unwrap_err(), SolverError::NonPositiveTau(0.0));
    }

    #[test]
    fn step_count_rounds_to_nearest() {
        assert_eq!(step_count(1.0, 0.08), (13, 13.0 * 0.08));
        assert_eq!(step_count(1.0, 0.04).0, 25);
        assert_eq!(step_count(0.0, 0.1).0, 0);
    }
}

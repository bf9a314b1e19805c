//! Error norms and convergence studies.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::kinetic::MacroState;
use crate::lattice::VelocitySet;
use crate::reference::{self, Background, MacroField, ReferenceError};
use crate::solver::{self, Grid, Parallelism, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("no time levels to measure")]
    EmptySeries,
    #[error("resolution {coarse} does not divide the fine resolution {fine}")]
    NonNestedResolutions { coarse: usize, fine: usize },
    #[error("resolutions must be nonempty and strictly increasing: {0:?}")]
    BadResolutions(Vec<usize>),
    #[error("analytic comparison needs a 1D set, got {0}D")]
    NotOneDimensional(usize),
    #[error("field shapes differ")]
    ShapeMismatch,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
}

/// Accumulates `Σ_i Σ_j |η(t_i, p_j)|²` per variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpaceTimeAccumulator {
    sums: Vec<f64>,
    levels: usize,
}

impl SpaceTimeAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, error: &MacroField) {
        let sq = squared_sums(error);
        if self.sums.is_empty() {
            self.sums = sq;
        } else {
            for (a, b) in self.sums.iter_mut().zip(sq) {
                *a += b;
            }
        }
        self.levels += 1;
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `sqrt(Σ_i Σ_j |η|² dt^{D+1})` per variable.
    pub fn finish(&self, dt: f64, dimension: usize) -> Result<Vec<f64>, HarnessError> {
        if self.levels == 0 {
            return Err(HarnessError::EmptySeries);
        }
        let w = dt.powi(dimension as i32 + 1);
        Ok(self.sums.iter().map(|s| (s * w).sqrt()).collect())
    }
}

fn squared_sums(f: &MacroField) -> Vec<f64> {
    let d = f.grid.dimension;
    let mut sums = vec![0.0; d + 2];
    for m in &f.values {
        for (k, v) in m.to_vec(d).into_iter().enumerate() {
            sums[k] += v * v;
        }
    }
    sums
}

pub fn l2_space_time(series: &[MacroField], dt: f64) -> Result<Vec<f64>, HarnessError> {
    let mut acc = SpaceTimeAccumulator::new();
    for f in series {
        acc.add(f);
    }
    let d = series.first().map_or(1, |f| f.grid.dimension);
    acc.finish(dt, d)
}

/// `sqrt(Σ_j |η(T, p_j)|² dt^D)` per variable.
pub fn l2_space(field: &MacroField, dt: f64) -> Vec<f64> {
    let w = dt.powi(field.grid.dimension as i32);
    squared_sums(field).into_iter().map(|s| (s * w).sqrt()).collect()
}

pub fn variable_names(dimension: usize) -> Vec<String> {
    let mut names = vec!["rho".to_string()];
    names.extend(["ux", "uy", "uz"][..dimension].iter().map(|s| s.to_string()));
    names.push("theta".into());
    names
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub eps: f64,
    pub steps: usize,
    pub target_time: f64,
    pub achieved_time: f64,
    pub errors: Vec<f64>,
    /// Observed order against the previous row, per variable.
    pub orders: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub set: String,
    pub norm: String,
    pub variables: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
}

pub fn observed_order(e_prev: f64, e: f64, n_prev: usize, n: usize) -> f64 {
    (e_prev / e).ln() / (n as f64 / n_prev as f64).ln()
}

impl ConvergenceTable {
    pub fn new(set: &str, norm: &str, variables: Vec<String>) -> Self {
        Self { set: set.into(), norm: norm.into(), variables, rows: Vec::new() }
    }

    /// Appends a row and fills in its observed orders.
    pub fn push(&mut self, mut row: ConvergenceRow) {
        if let Some(prev) = self.rows.last() {
            row.orders = Some(
                prev.errors
                    .iter()
                    .zip(&row.errors)
                    .map(|(&a, &b)| observed_order(a, b, prev.n, row.n))
                    .collect(),
            );
        }
        self.rows.push(row);
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.errors.iter().copied()).fold(0.0, f64::max)
    }

    /// Order of variable `k` between the two finest rows.
    pub fn finest_order(&self, k: usize) -> Option<f64> {
        self.rows.last()?.orders.as_ref().map(|o| o[k])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,eps,steps,target_time,achieved_time");
        for v in &self.variables {
            write!(s, ",err_{v}").unwrap();
        }
        for v in &self.variables {
            write!(s, ",order_{v}").unwrap();
        }
        s.push('\n');
        for r in &self.rows {
            write!(s, "{},{:.16e},{},{:.16e},{:.16e}", r.n, r.eps, r.steps, r.target_time, r.achieved_time).unwrap();
            for e in &r.errors {
                write!(s, ",{e:.16e}").unwrap();
            }
            for k in 0..self.variables.len() {
                match &r.orders {
                    Some(o) => write!(s, ",{:.16e}", o[k]).unwrap(),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Source of initial macroscopic data on arbitrary grids.
pub trait InitialCondition: Sync {
    fn name(&self) -> String;
    fn sample(&self, grid: &Grid) -> Result<MacroField, HarnessError>;
}

/// Gauss pulse in `dimension` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussPulse {
    pub dimension: usize,
    pub allow_domain_mismatch: bool,
}

impl GaussPulse {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, allow_domain_mismatch: false }
    }
}

impl InitialCondition for GaussPulse {
    fn name(&self) -> String {
        format!("gauss{}d", self.dimension)
    }

    fn sample(&self, grid: &Grid) -> Result<MacroField, HarnessError> {
        let f = if self.allow_domain_mismatch {
            reference::gauss_pulse_unchecked(self.dimension, grid)?
        } else {
            reference::gauss_pulse(self.dimension, grid)?
        };
        Ok(f)
    }
}

/// Spatially constant state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantState(pub MacroState);

impl InitialCondition for ConstantState {
    fn name(&self) -> String {
        "constant".into()
    }

    fn sample(&self, grid: &Grid) -> Result<MacroField, HarnessError> {
        Ok(MacroField::constant(grid, self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub end_time: f64,
    /// Periodic domain length per axis.
    pub length: f64,
    pub tau: f64,
    pub parallelism: Parallelism,
}

impl StudyConfig {
    pub fn new(end_time: f64, length: f64) -> Self {
        Self { end_time, length, tau: 0.5, parallelism: Parallelism::Global }
    }
}

fn check_increasing(resolutions: &[usize]) -> Result<(), HarnessError> {
    if resolutions.is_empty() || resolutions[0] == 0 || resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::BadResolutions(resolutions.to_vec()));
    }
    Ok(())
}

/// LBM against the exact 1D solution in the space-time norm, time levels `0..=N_T`.
pub fn convergence_vs_analytic(
    set: &VelocitySet,
    ic: &dyn InitialCondition,
    resolutions: &[usize],
    cfg: &StudyConfig,
) -> Result<ConvergenceTable, HarnessError> {
    if set.dimension != 1 {
        return Err(HarnessError::NotOneDimensional(set.dimension));
    }
    check_increasing(resolutions)?;
    let shared = Arc::new(set.clone());
    let bg = Background::of(set);
    let mut table = ConvergenceTable::new(&set.name, "space-time", variable_names(1));
    for &n in resolutions {
        let grid = Grid::cubic(1, n, cfg.length)?;
        let initial = ic.sample(&grid)?;
        let field = solver::initialize_equilibrium(&grid, shared.clone(), &initial)?;
        let (steps, achieved) = solver::step_count(cfg.end_time, grid.eps);
        let mut acc = SpaceTimeAccumulator::new();
        acc.add(&field.macro_field().sub(&initial));
        let mut failure = None;
        solver::run_with(field, steps, cfg.tau, cfg.parallelism, |_, t, f| {
            if failure.is_some() {
                return;
            }
            match reference::analytic_solution_1d(&initial, &bg, t) {
                Ok(exact) => acc.add(&f.macro_field().sub(&exact)),
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        table.push(ConvergenceRow {
            n,
            eps: grid.eps,
            steps,
            target_time: cfg.end_time,
            achieved_time: achieved,
            errors: acc.finish(grid.eps, 1)?,
            orders: None,
        });
    }
    Ok(table)
}

/// Restriction of a fine field to the sites of a nested coarse grid.
pub fn restrict(fine: &MacroField, coarse: &Grid) -> Result<MacroField, HarnessError> {
    let fg = &fine.grid;
    let d = coarse.dimension;
    if fg.dimension != d {
        return Err(HarnessError::ShapeMismatch);
    }
    let mut ratio = [1usize; 3];
    for a in 0..d {
        if fg.extent[a] % coarse.extent[a] != 0 {
            return Err(HarnessError::NonNestedResolutions { coarse: coarse.extent[a], fine: fg.extent[a] });
        }
        ratio[a] = fg.extent[a] / coarse.extent[a];
    }
    let values = (0..coarse.site_count())
        .map(|s| {
            let [x, y, z] = coarse.site_indices(s);
            fine.values[fg.index(x * ratio[0], y * ratio[1], z * ratio[2])]
        })
        .collect();
    Ok(MacroField { grid: coarse.clone(), values })
}

/// LBM against a finer LBM solution in the space norm at each coarse run's achieved time.
pub fn convergence_self(
    set: &VelocitySet,
    ic: &dyn InitialCondition,
    resolutions: &[usize],
    fine_n: usize,
    cfg: &StudyConfig,
) -> Result<ConvergenceTable, HarnessError> {
    check_increasing(resolutions)?;
    for &n in resolutions {
        if fine_n % n != 0 {
            return Err(HarnessError::NonNestedResolutions { coarse: n, fine: fine_n });
        }
    }
    let d = set.dimension;
    let shared = Arc::new(set.clone());

    let fine_grid = Grid::cubic(d, fine_n, cfg.length)?;
    // the coarse end time steps·ε_c is an exact multiple of the fine step
    let plan: Vec<(usize, usize, f64, usize)> = resolutions
        .iter()
        .map(|&n| {
            let eps = cfg.length / n as f64;
            let (steps, achieved) = solver::step_count(cfg.end_time, eps);
            (n, steps, achieved, steps * (fine_n / n))
        })
        .collect();
    let fine_steps = plan.iter().map(|p| p.3).max().unwrap_or(0);
    let mut snapshots: Vec<(usize, MacroField)> = Vec::new();
    let fine_initial = ic.sample(&fine_grid)?;
    let fine = solver::initialize_equilibrium(&fine_grid, shared.clone(), &fine_initial)?;
    if plan.iter().any(|p| p.3 == 0) {
        snapshots.push((0, fine.macro_field()));
    }
    solver::run_with(fine, fine_steps, cfg.tau, cfg.parallelism, |k, _, f| {
        if plan.iter().any(|p| p.3 == k) {
            snapshots.push((k, f.macro_field()));
        }
    })?;

    let mut table = ConvergenceTable::new(&set.name, "space", variable_names(d));
    for &(n, steps, achieved, fine_step) in &plan {
        let grid = Grid::cubic(d, n, cfg.length)?;
        let initial = ic.sample(&grid)?;
        let field = solver::initialize_equilibrium(&grid, shared.clone(), &initial)?;
        let coarse = solver::run_with(field, steps, cfg.tau, cfg.parallelism, |_, _, _| {})?;
        let reference = snapshots.iter().find(|s| s.0 == fine_step).map(|s| &s.1).ok_or(HarnessError::EmptySeries)?;
        let err = coarse.macro_field().sub(&restrict(reference, &grid)?);
        table.push(ConvergenceRow {
            n,
            eps: grid.eps,
            steps,
            target_time: cfg.end_time,
            achieved_time: achieved,
            errors: l2_space(&err, grid.eps),
            orders: None,
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndTimeGap {
    pub n: usize,
    pub eps: f64,
    pub steps: usize,
    pub achieved_time: f64,
    /// `T - steps·ε`.
    pub gap: f64,
}

pub fn end_time_gaps(end_time: f64, length: f64, resolutions: &[usize]) -> Vec<EndTimeGap> {
    resolutions
        .iter()
        .map(|&n| {
            let eps = length / n as f64;
            let (steps, achieved) = solver::step_count(end_time, eps);
            EndTimeGap { n, eps, steps, achieved_time: achieved, gap: end_time - achieved }
        })
        .collect()
}

//! Simulated minimum distance calibration of `(D_alpha, nu, alpha)`.
//!
//! The objective is `g' W g` with `g` the gap between the averaged simulated
//! moment vector and the empirical one. It is minimised by a hybrid of
//! Nelder-Mead and Threshold Accepting moves, and indicative intervals come
//! from a finite-difference Hessian at the optimum.

use std::cell::{Cell, RefCell};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Error, Result};
use crate::optim::{Move, Simplex};
use crate::sim::{replication_seed, simulate, stream_rng, SimConfig};
use crate::stats;

pub const MOMENT_NAMES: [&str; 9] = [
    "mean",
    "std",
    "excess_kurtosis",
    "ks",
    "hurst",
    "gph",
    "adf",
    "garch",
    "hill",
];

pub const PARAM_NAMES: [&str; 3] = ["D_alpha", "nu", "alpha"];

/// Minimum series length for the moment battery.
pub const MIN_OBSERVATIONS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub mean: f64,
    pub std: f64,
    pub excess_kurtosis: f64,
    /// Two-sample KS distance to the reference (empirical) returns.
    pub ks: f64,
    pub hurst: f64,
    /// Memory parameter of `|returns|`.
    pub gph: f64,
    /// ADF statistic of the cumulated returns.
    pub adf: f64,
    /// GARCH(1,1) `alpha + beta`.
    pub garch: f64,
    pub hill: f64,
}

impl MomentVector {
    pub fn to_array(&self) -> [f64; 9] {
        [
            self.mean,
            self.std,
            self.excess_kurtosis,
            self.ks,
            self.hurst,
            self.gph,
            self.adf,
            self.garch,
            self.hill,
        ]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            mean: a[0],
            std: a[1],
            excess_kurtosis: a[2],
            ks: a[3],
            hurst: a[4],
            gph: a[5],
            adf: a[6],
            garch: a[7],
            hill: a[8],
        }
    }

    /// Element-wise average.
    pub fn average(items: &[MomentVector]) -> Self {
        let mut acc = [0.0; 9];
        for m in items {
            for (a, v) in acc.iter_mut().zip(m.to_array()) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= items.len() as f64);
        Self::from_array(acc)
    }
}

/// The nine-statistic battery of `returns`, with KS measured against
/// `reference`.
pub fn moments(returns: &[f64], reference: &[f64]) -> Result<MomentVector> {
    if returns.len() < MIN_OBSERVATIONS {
        return Err(domain_err(format!(
            "moment battery needs at least {MIN_OBSERVATIONS} returns, got {}",
            returns.len()
        )));
    }
    if reference.is_empty() {
        return Err(domain_err("empty reference sample for the KS statistic"));
    }
    let var = stats::variance(returns);
    if !(var > 0.0 && var.is_finite()) {
        return Err(domain_err("returns have zero or non-finite variance"));
    }
    let abs: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
    let level: Vec<f64> = returns
        .iter()
        .scan(0.0, |s, r| {
            *s += r;
            Some(*s)
        })
        .collect();
    let m = MomentVector {
        mean: stats::mean(returns),
        std: var.sqrt(),
        excess_kurtosis: stats::excess_kurtosis(returns),
        ks: stats::ks_statistic(returns, reference),
        hurst: stats::hurst_rs(returns),
        gph: stats::gph(&abs).0,
        adf: stats::adf_statistic(&level),
        garch: stats::garch11(returns).persistence(),
        hill: stats::hill(returns),
    };
    if m.to_array().iter().any(|v| !v.is_finite()) {
        return Err(domain_err(format!("non-finite moment in {m:?}")));
    }
    Ok(m)
}

/// `g' W g`.
pub fn quadratic_form(g: &[f64], w: &DMatrix<f64>) -> f64 {
    let g = DVector::from_column_slice(g);
    (g.transpose() * w * &g)[(0, 0)]
}

/// Weight matrix and whether the identity fallback was used.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    pub matrix: DMatrix<f64>,
    pub fallback: bool,
}

impl Weight {
    pub fn identity() -> Self {
        Self {
            matrix: DMatrix::identity(9, 9),
            fallback: true,
        }
    }
}

/// Inverse of the moving-block-bootstrap covariance of the moment vector.
/// Falls back to the identity when the covariance is not invertible.
pub fn bootstrap_weight(returns: &[f64], block: usize, resamples: usize, seed: u64) -> Result<Weight> {
    let n = returns.len();
    if block == 0 || block > n {
        return Err(domain_err(format!("block length {block} does not fit {n} returns")));
    }
    if resamples < 2 {
        return Err(domain_err("bootstrap needs at least two resamples"));
    }
    let draws: Vec<[f64; 9]> = (0..resamples as u64)
        .into_par_iter()
        .filter_map(|k| {
            let mut rng = stream_rng(replication_seed(seed, k), BOOTSTRAP_STREAM);
            let mut sample = Vec::with_capacity(n);
            while sample.len() < n {
                let start = rng.random_range(0..=n - block);
                let take = block.min(n - sample.len());
                sample.extend_from_slice(&returns[start..start + take]);
            }
            moments(&sample, returns).ok().map(|m| m.to_array())
        })
        .collect();
    if draws.len() < 2 {
        return Ok(Weight::identity());
    }
    let count = draws.len() as f64;
    let mut mu = [0.0; 9];
    for d in &draws {
        for i in 0..9 {
            mu[i] += d[i] / count;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(9, 9);
    for d in &draws {
        for i in 0..9 {
            for j in 0..9 {
                cov[(i, j)] += (d[i] - mu[i]) * (d[j] - mu[j]) / (count - 1.0);
            }
        }
    }
    match cov.clone().cholesky() {
        Some(ch) => {
            let inv = ch.inverse();
            if inv.iter().all(|v| v.is_finite()) {
                Ok(Weight {
                    matrix: inv,
                    fallback: false,
                })
            } else {
                Ok(Weight::identity())
            }
        }
        None => Ok(Weight::identity()),
    }
}

const BOOTSTRAP_STREAM: u64 = 3_000;
const NMTA_STREAM: u64 = 3_001;

/// TA perturbation size relative to the simplex extent.
const TA_SCALE: f64 = 0.5;

/// Box constraints on `(D_alpha, nu, alpha)`; `None` is unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lower: [Option<f64>; 3],
    pub upper: [Option<f64>; 3],
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lower: [Some(0.0), Some(0.0), Some(0.4)],
            upper: [None, None, Some(1.0)],
        }
    }
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            if let Some(lo) = self.lower[i] {
                *v = v.max(lo);
            }
            if let Some(hi) = self.upper[i] {
                *v = v.min(hi);
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, v)| {
            self.lower[i].is_none_or(|lo| *v >= lo) && self.upper[i].is_none_or(|hi| *v <= hi)
        })
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if let (Some(lo), Some(hi)) = (self.lower[i], self.upper[i]) {
                if !(lo <= hi) {
                    return Err(config_err(format!("bounds for {} are empty", PARAM_NAMES[i])));
                }
            }
        }
        Ok(())
    }
}

/// Calibration knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub iterations: usize,
    /// Monte Carlo replications per objective evaluation.
    pub replications: usize,
    /// Returns per simulated replication; `None` matches the empirical count.
    pub events: Option<usize>,
    pub p_nm: f64,
    pub tau_decay: f64,
    pub initial: [f64; 3],
    pub initial_step: [f64; 3],
    pub bounds: Bounds,
    pub block_length: usize,
    pub bootstrap_resamples: usize,
    /// Relative finite-difference step for the Hessian.
    pub hessian_step: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            replications: 5,
            events: None,
            p_nm: 0.5,
            tau_decay: 0.85,
            initial: [0.5, 8.0, 0.75],
            initial_step: [0.2, 4.0, 0.1],
            bounds: Bounds::default(),
            block_length: 100,
            bootstrap_resamples: 1000,
            hessian_step: 0.05,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.iterations == 0 || self.replications == 0 {
            return Err(config_err("iterations and replications must be at least 1"));
        }
        if self.events.is_some_and(|e| e < MIN_OBSERVATIONS) {
            return Err(config_err(format!("events must be at least {MIN_OBSERVATIONS}")));
        }
        if !(0.0..=1.0).contains(&self.p_nm) {
            return Err(config_err("p_nm must lie in [0, 1]"));
        }
        if !(self.tau_decay > 0.0 && self.tau_decay <= 1.0) {
            return Err(config_err("tau_decay must lie in (0, 1]"));
        }
        if self.initial_step.iter().any(|s| !(s.is_finite() && *s != 0.0)) {
            return Err(config_err("initial_step entries must be finite and non-zero"));
        }
        if !(self.hessian_step > 0.0) {
            return Err(config_err("hessian_step must be positive"));
        }
        if self.block_length == 0 || self.bootstrap_resamples < 2 {
            return Err(config_err("bootstrap needs block_length >= 1 and at least 2 resamples"));
        }
        Ok(())
    }
}

/// Simulates `events` returns of book 0 at `theta`.
pub fn simulate_returns(base: &SimConfig, theta: &[f64], events: usize, seed: u64) -> Result<Vec<f64>> {
    let mut cfg = base.clone();
    cfg.set_free_parameters(theta[0], theta[1], theta[2]);
    let dt = cfg.base_dt()?;
    let rate = cfg.intensities.first().copied().flatten().unwrap_or(1.0 / dt);
    cfg.horizon = 1.3 * (events + 1) as f64 / rate;
    let paths = simulate(&cfg, seed)?;
    let mut r = paths[0].returns();
    if r.len() < events {
        return Err(domain_err(format!("simulation produced {} of {events} returns", r.len())));
    }
    r.truncate(events);
    Ok(r)
}

/// Empirical target plus everything needed to evaluate the objective.
pub struct SmdProblem {
    pub base: SimConfig,
    pub empirical_returns: Vec<f64>,
    pub empirical: MomentVector,
    pub weight: Weight,
    pub replications: usize,
    pub events: usize,
    pub seed: u64,
}

impl SmdProblem {
    pub fn new(base: SimConfig, empirical_returns: Vec<f64>, config: &CalibrationConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let empirical = moments(&empirical_returns, &empirical_returns)?;
        let weight = bootstrap_weight(&empirical_returns, config.block_length, config.bootstrap_resamples, seed)?;
        let events = config.events.unwrap_or(empirical_returns.len());
        Ok(Self {
            base,
            empirical_returns,
            empirical,
            weight,
            replications: config.replications,
            events,
            seed,
        })
    }

    /// Replication `i` uses seed `replication_seed(seed, i)`; on failure it is
    /// rerun once with `replication_seed(seed, I + i)`.
    pub fn simulated_moments(&self, theta: &[f64]) -> Result<MomentVector> {
        let reps = self.replications as u64;
        let runs: Vec<Result<MomentVector>> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let once = |s| {
                    let r = simulate_returns(&self.base, theta, self.events, s)?;
                    moments(&r, &self.empirical_returns)
                };
                once(replication_seed(self.seed, i)).or_else(|_| once(replication_seed(self.seed, reps + i)))
            })
            .collect();
        let ok: Vec<MomentVector> = runs.into_iter().collect::<Result<_>>()?;
        Ok(MomentVector::average(&ok))
    }

    pub fn objective(&self, theta: &[f64]) -> Result<f64> {
        smd_objective(&self.simulated_moments(theta)?, &self.empirical, &self.weight.matrix)
    }
}

/// `g' W g` with `g = simulated - empirical`.
pub fn smd_objective(simulated: &MomentVector, empirical: &MomentVector, w: &DMatrix<f64>) -> Result<f64> {
    if w.nrows() != 9 || w.ncols() != 9 {
        return Err(domain_err("weight matrix must be 9 x 9"));
    }
    let g: Vec<f64> = simulated
        .to_array()
        .iter()
        .zip(empirical.to_array())
        .map(|(s, e)| s - e)
        .collect();
    Ok(quadratic_form(&g, w))
}

/// NMTA schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct NmtaConfig {
    pub iterations: usize,
    pub p_nm: f64,
    pub tau_decay: f64,
    pub initial: Vec<f64>,
    pub initial_step: Vec<f64>,
}

impl From<&CalibrationConfig> for NmtaConfig {
    fn from(c: &CalibrationConfig) -> Self {
        Self {
            iterations: c.iterations,
            p_nm: c.p_nm,
            tau_decay: c.tau_decay,
            initial: c.initial.to_vec(),
            initial_step: c.initial_step.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Reflect,
    Expand,
    ContractOutside,
    ContractInside,
    Shrink,
    TaAccept,
    TaReject,
}

impl From<Move> for StepKind {
    fn from(m: Move) -> Self {
        match m {
            Move::Reflect => Self::Reflect,
            Move::Expand => Self::Expand,
            Move::ContractOutside => Self::ContractOutside,
            Move::ContractInside => Self::ContractInside,
            Move::Shrink => Self::Shrink,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub step: StepKind,
    pub best_objective: f64,
    pub best_theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmtaOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Mean objective over the initial simplex (finite vertices only).
    pub initial_mean: f64,
    pub trace: Vec<TraceRow>,
    pub evaluations: usize,
}

/// Hybrid Nelder-Mead / Threshold Accepting minimisation.
///
/// Each iteration makes one NM move with probability `p_nm`, otherwise one TA
/// move. The TA walker perturbs its current point by Gaussian noise scaled to
/// the simplex extent and moves there when the increase is below `tau`;
/// `tau` starts at the objective spread of the initial simplex and decays
/// geometrically after each TA move. A TA candidate that beats the best
/// vertex carries the whole simplex with it (a rigid translation). After an
/// NM move the walker restarts from the best vertex.
pub fn nmta(mut f: impl FnMut(&[f64]) -> f64, bounds: &Bounds, config: &NmtaConfig, seed: u64) -> NmtaOutcome {
    let d = config.initial.len();
    let mut rng = stream_rng(seed, NMTA_STREAM);
    let best = RefCell::new((config.initial.clone(), f64::INFINITY));
    let evaluations = Cell::new(0);
    let mut eval = |x: &[f64]| {
        debug_assert!(bounds.contains(x));
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        evaluations.set(evaluations.get() + 1);
        let mut b = best.borrow_mut();
        if v < b.1 {
            *b = (x.to_vec(), v);
        }
        v
    };

    let mut points = vec![config.initial.clone()];
    for i in 0..d {
        let mut p = config.initial.clone();
        p[i] += config.initial_step[i];
        points.push(p);
    }
    for p in &mut points {
        bounds.project(p);
    }
    let mut simplex = Simplex::new(points, &mut eval);
    let finite: Vec<f64> = simplex.values.iter().copied().filter(|v| v.is_finite()).collect();
    let initial_mean = if finite.len() == simplex.values.len() {
        stats::mean(&finite)
    } else {
        f64::INFINITY
    };
    let mut tau = if finite.len() >= 2 {
        finite.iter().cloned().fold(f64::MIN, f64::max) - finite.iter().cloned().fold(f64::MAX, f64::min)
    } else {
        1.0
    };

    let project = |p: &mut [f64]| bounds.project(p);
    let mut current = (simplex.points[0].clone(), simplex.values[0]);
    let mut trace = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let step = if rng.random::<f64>() < config.p_nm {
            simplex.step(&mut eval, &project).into()
        } else {
            let mut x = current.0.clone();
            for i in 0..d {
                let lo = simplex.points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
                let hi = simplex.points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
                let extent = if hi > lo { hi - lo } else { 0.01 * config.initial_step[i].abs() };
                x[i] += TA_SCALE * extent * rng.sample::<f64, _>(StandardNormal);
            }
            bounds.project(&mut x);
            let fx = eval(&x);
            let accepted = fx - current.1 < tau;
            tau *= config.tau_decay;
            if fx < simplex.values[0] {
                let shift: Vec<f64> = x.iter().zip(&simplex.points[0]).map(|(a, b)| a - b).collect();
                let mut points = vec![x.clone()];
                let mut values = vec![fx];
                for p in &simplex.points[1..] {
                    let mut q: Vec<f64> = p.iter().zip(&shift).map(|(a, s)| a + s).collect();
                    bounds.project(&mut q);
                    values.push(eval(&q));
                    points.push(q);
                }
                simplex = Simplex::from_parts(points, values);
            }
            if accepted {
                current = (x, fx);
                StepKind::TaAccept
            } else {
                StepKind::TaReject
            }
        };
        if !matches!(step, StepKind::TaAccept | StepKind::TaReject) {
            current = (simplex.points[0].clone(), simplex.values[0]);
        }
        let b = best.borrow();
        trace.push(TraceRow {
            iteration,
            step,
            best_objective: b.1,
            best_theta: b.0.clone(),
        });
    }
    let (best, best_value) = best.into_inner();
    NmtaOutcome {
        best,
        best_value,
        initial_mean,
        trace,
        evaluations: evaluations.get(),
    }
}

/// Half-width used when a parameter's standard error cannot be formed.
pub const SENTINEL_HALF_WIDTH: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub se: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// `theta_hat +- 1.96 SE`, SE from the inverse finite-difference Hessian.
/// The stencil uses steps `h_i = step * max(|theta_i|, 0.1)` and is shifted
/// inwards where it would cross a bound, so every evaluation is feasible.
pub fn confidence_intervals(
    mut f: impl FnMut(&[f64]) -> f64,
    theta_hat: &[f64],
    bounds: &Bounds,
    step: f64,
) -> Intervals {
    let d = theta_hat.len();
    let h: Vec<f64> = theta_hat.iter().map(|t| step * t.abs().max(0.1)).collect();
    let mut centre = theta_hat.to_vec();
    let mut warnings = Vec::new();
    for i in 0..d {
        if let Some(lo) = bounds.lower[i] {
            centre[i] = centre[i].max(lo + h[i]);
        }
        if let Some(hi) = bounds.upper[i] {
            centre[i] = centre[i].min(hi - h[i]);
        }
        if centre[i] != theta_hat[i] {
            warnings.push(format!("{}: Hessian stencil shifted inside the bounds", PARAM_NAMES.get(i).unwrap_or(&"theta")));
        }
    }
    let mut at = |offsets: &[(usize, f64)]| {
        let mut x = centre.clone();
        for &(i, s) in offsets {
            x[i] += s * h[i];
        }
        f(&x)
    };
    let f0 = at(&[]);
    let mut hess = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        hess[(i, i)] = (at(&[(i, 1.0)]) - 2.0 * f0 + at(&[(i, -1.0)])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, 1.0), (j, 1.0)]) - at(&[(i, 1.0), (j, -1.0)]) - at(&[(i, -1.0), (j, 1.0)])
                + at(&[(i, -1.0), (j, -1.0)]))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let se: Vec<f64> = match hess.clone().cholesky() {
        Some(ch) => {
            let inv = ch.inverse();
            (0..d).map(|i| inv[(i, i)].sqrt()).collect()
        }
        None => {
            warnings.push("Hessian not positive definite; using diagonal curvature".into());
            (0..d)
                .map(|i| {
                    if hess[(i, i)] > 0.0 && hess[(i, i)].is_finite() {
                        1.0 / hess[(i, i)].sqrt()
                    } else {
                        f64::NAN
                    }
                })
                .collect()
        }
    };
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for i in 0..d {
        let half = if se[i].is_finite() {
            1.96 * se[i]
        } else {
            warnings.push(format!("{}: no curvature; wide-interval sentinel", PARAM_NAMES.get(i).unwrap_or(&"theta")));
            SENTINEL_HALF_WIDTH
        };
        lower.push(theta_hat[i] - half);
        upper.push(theta_hat[i] + half);
    }
    Intervals {
        lower,
        upper,
        se: se.iter().map(|s| if s.is_finite() { *s } else { SENTINEL_HALF_WIDTH / 1.96 }).collect(),
        hessian: (0..d).map(|i| (0..d).map(|j| hess[(i, j)]).collect()).collect(),
        warnings,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub master_seed: u64,
    pub parameters: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub se: Vec<f64>,
    pub objective: f64,
    pub initial_objective_mean: f64,
    pub objective_trace: Vec<f64>,
    pub replications: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub weight_fallback: bool,
    pub empirical_moments: MomentVector,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl CalibrationResult {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// `iteration,step,best_objective,D_alpha,nu,alpha`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "step", "best_objective", "D_alpha", "nu", "alpha"])?;
        for r in &self.trace {
            let step = serde_json::to_value(r.step)?;
            let mut row = vec![
                r.iteration.to_string(),
                step.as_str().unwrap_or_default().to_string(),
                r.best_objective.to_string(),
            ];
            row.extend(r.best_theta.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<trace csv>".into(),
            source,
        })
    }
}

/// Runs NMTA on the SMD objective and attaches Hessian intervals. Failed
/// objective evaluations count as `+inf` for the optimiser.
pub fn calibrate(problem: &SmdProblem, config: &CalibrationConfig) -> Result<CalibrationResult> {
    config.validate()?;
    if !config.bounds.contains(&config.initial) {
        return Err(config_err("initial point lies outside the bounds"));
    }
    let mut failed = 0;
    let mut objective = |x: &[f64]| match problem.objective(x) {
        Ok(v) => v,
        Err(_) => {
            failed += 1;
            f64::INFINITY
        }
    };
    let outcome = nmta(&mut objective, &config.bounds, &config.into(), problem.seed);
    if !outcome.best_value.is_finite() {
        return Err(Error::Domain("every objective evaluation failed".into()));
    }
    let ci = confidence_intervals(&mut objective, &outcome.best, &config.bounds, config.hessian_step);
    let mut warnings = ci.warnings;
    if problem.weight.fallback {
        warnings.push("bootstrap covariance singular; identity weight used".into());
    }
    Ok(CalibrationResult {
        master_seed: problem.seed,
        parameters: PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        theta_hat: outcome.best.clone(),
        ci_lower: ci.lower,
        ci_upper: ci.upper,
        se: ci.se,
        objective: outcome.best_value,
        initial_objective_mean: outcome.initial_mean,
        objective_trace: outcome.trace.iter().map(|r| r.best_objective).collect(),
        replications: problem.replications,
        iterations: config.iterations,
        evaluations: outcome.evaluations,
        failed_evaluations: failed,
        weight_fallback: problem.weight.fallback,
        empirical_moments: problem.empirical,
        warnings,
        trace: outcome.trace,
    })
}

//! Background log-price lattice and the per-book event clocks.
//!
//! Every clock step `dt_n` carries its own jump length `dx_n`, fixed by the
//! diffusion limit `D_alpha = (r/2) dx_n^2 / dt_n^alpha`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// How the diffusion rate is converted into a base time step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtExponent {
    /// `dt = (r dx^2 / (2 D))^(1/alpha)`.
    #[default]
    Exact,
    /// `dt = r dx^2 / (2 D)`, dropping the `1/alpha` exponent. Gives
    /// `dt = 0.2315` at `D = 0.27`.
    Unit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// System length in log-price units.
    #[serde(rename = "L")]
    pub length: f64,
    /// Number of divisions.
    #[serde(rename = "M")]
    pub divisions: usize,
    /// Left edge. Defaults to centring the first book's initial price.
    #[serde(default)]
    pub x0: Option<f64>,
    /// Jump probability per step.
    pub r: f64,
    #[serde(rename = "D_alpha")]
    pub d_alpha: f64,
    pub alpha: f64,
    #[serde(default)]
    pub dt_exponent: DtExponent,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            length: 200.0,
            divisions: 400,
            x0: None,
            r: 0.5,
            d_alpha: 0.5,
            alpha: 1.0,
            dt_exponent: DtExponent::Exact,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(config_err(format!("L must be positive, got {}", self.length)));
        }
        if self.divisions < 2 {
            return Err(config_err(format!("M must be at least 2, got {}", self.divisions)));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(config_err(format!("r must lie in (0, 1], got {}", self.r)));
        }
        if !(self.d_alpha.is_finite() && self.d_alpha > 0.0) {
            return Err(config_err(format!("D_alpha must be positive, got {}", self.d_alpha)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config_err(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if let Some(x0) = self.x0 {
            if !x0.is_finite() {
                return Err(config_err("x0 must be finite"));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.divisions as f64
    }

    pub fn diffusion_limit(&self) -> DiffusionLimit {
        DiffusionLimit {
            r: self.r,
            d_alpha: self.d_alpha,
            alpha: self.alpha,
        }
    }

    /// Left edge that puts `centre` in the middle of the lattice.
    pub fn centred_x0(&self, centre: f64) -> f64 {
        centre - self.length / 2.0
    }
}

/// The constraint tying a time step to its jump length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionLimit {
    pub r: f64,
    pub d_alpha: f64,
    pub alpha: f64,
}

impl DiffusionLimit {
    /// `dx = sqrt(2 D dt^alpha / r)`.
    pub fn jump_length(&self, dt: f64) -> f64 {
        (2.0 * self.d_alpha * dt.powf(self.alpha) / self.r).sqrt()
    }

    /// Inverse of [`jump_length`](Self::jump_length).
    pub fn time_step(&self, dx: f64) -> f64 {
        (self.r * dx * dx / (2.0 * self.d_alpha)).powf(1.0 / self.alpha)
    }

    /// `(r/2) dx^2 / dt^alpha`, which must reproduce `d_alpha`.
    pub fn implied_rate(&self, dt: f64, dx: f64) -> f64 {
        0.5 * self.r * dx * dx / dt.powf(self.alpha)
    }
}

/// Uniform background lattice `x_i = x0 + i dx`, `i = 0..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    x0: f64,
    dx: f64,
    points: Vec<f64>,
}

impl Lattice {
    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        *self.points.last().expect("lattice has at least 3 points")
    }

    /// Strictly inside the span.
    pub fn contains(&self, x: f64) -> bool {
        x > self.x0 && x < self.x_max()
    }
}

/// Builds the lattice. `x0` falls back to `0` when the config leaves it unset;
/// callers that know the initial price should resolve it first.
pub fn build_lattice(config: &LatticeConfig) -> Result<Lattice> {
    config.validate()?;
    let x0 = config.x0.unwrap_or(0.0);
    let dx = config.dx();
    let points = (0..=config.divisions).map(|i| x0 + i as f64 * dx).collect();
    Ok(Lattice { x0, dx, points })
}

/// The base time step implied by the diffusion limit at the lattice spacing.
pub fn base_dt(config: &LatticeConfig) -> Result<f64> {
    config.validate()?;
    let dx = config.dx();
    let ratio = config.r * dx * dx / (2.0 * config.d_alpha);
    Ok(match config.dt_exponent {
        DtExponent::Exact => ratio.powf(1.0 / config.alpha),
        DtExponent::Unit => ratio,
    })
}

/// How a book's clock is sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Uniform,
    #[default]
    Exponential,
}

/// Event times of one book together with the per-step jump lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    t: Vec<f64>,
    dt: Vec<f64>,
    dx: Vec<f64>,
}

impl TimeGrid {
    /// Constant steps of size `dt` up to (and including the first time past)
    /// `horizon`, each with jump length `dx`.
    pub fn uniform(dt: f64, dx: f64, horizon: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(config_err(format!("uniform time step must be positive, got {dt}")));
        }
        check_horizon(horizon)?;
        let steps = (horizon / dt).ceil().max(1.0) as usize;
        let mut t = Vec::with_capacity(steps + 1);
        t.push(0.0);
        for n in 1..=steps {
            t.push(n as f64 * dt);
        }
        Ok(Self {
            t,
            dt: vec![dt; steps],
            dx: vec![dx; steps],
        })
    }

    /// I.i.d. exponential increments with the given intensity, accumulated
    /// until the horizon is passed.
    pub fn exponential<R: Rng + ?Sized>(
        rate: f64,
        horizon: f64,
        limit: &DiffusionLimit,
        rng: &mut R,
    ) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(config_err(format!("clock intensity must be positive, got {rate}")));
        }
        check_horizon(horizon)?;
        let exp = Exp::new(rate).map_err(|e| config_err(e.to_string()))?;
        let mut t = vec![0.0];
        let mut dt = Vec::new();
        let mut dx = Vec::new();
        let mut now = 0.0;
        while now < horizon {
            let mut step: f64 = exp.sample(rng);
            // An exact zero would break strict monotonicity.
            while step <= 0.0 {
                step = exp.sample(rng);
            }
            now += step;
            t.push(now);
            dt.push(step);
            dx.push(limit.jump_length(step));
        }
        Ok(Self { t, dt, dx })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn dt(&self) -> &[f64] {
        &self.dt
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    /// Number of steps (one less than the number of event times).
    pub fn steps(&self) -> usize {
        self.dt.len()
    }

    /// Writes `index,t,dt,dx` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "t", "dt", "dx"])?;
        for n in 0..self.dt.len() {
            w.write_record(&[
                n.to_string(),
                self.t[n].to_string(),
                self.dt[n].to_string(),
                self.dx[n].to_string(),
            ])?;
        }
        w.flush().map_err(|source| crate::Error::Io {
            path: "<time grid csv>".into(),
            source,
        })?;
        Ok(())
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(config_err(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// Draws a clock for one book.
///
/// `rate` is the event intensity; uniform mode uses `1/rate` as its constant
/// step, and when `rate` is `None` the base step from [`base_dt`] is used
/// verbatim so that `dx_n` equals the lattice spacing exactly.
pub fn sample_time_grid<R: Rng + ?Sized>(
    config: &LatticeConfig,
    mode: SamplingMode,
    rate: Option<f64>,
    horizon: f64,
    rng: &mut R,
) -> Result<TimeGrid> {
    let dt_bar = base_dt(config)?;
    let limit = config.diffusion_limit();
    match (mode, rate) {
        (SamplingMode::Uniform, None) => TimeGrid::uniform(dt_bar, config.dx(), horizon),
        (SamplingMode::Uniform, Some(rate)) => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(config_err(format!("clock intensity must be positive, got {rate}")));
            }
            let dt = 1.0 / rate;
            TimeGrid::uniform(dt, limit.jump_length(dt), horizon)
        }
        (SamplingMode::Exponential, rate) => {
            TimeGrid::exponential(rate.unwrap_or(1.0 / dt_bar), horizon, &limit, rng)
        }
    }
}

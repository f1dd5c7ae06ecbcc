//! Type-1 non-uniform FFT by fast Gaussian gridding.
//!
//! For samples `v_j` at times `t_j` in `[0, T]` the coefficients are
//!
//! ```text
//! c_k = sum_j v_j exp(-i k 2 pi t_j / T),   |k| <= N
//! ```
//!
//! Each sample is spread onto an oversampled periodic grid with a Gaussian of
//! variance `2 tau`, the grid is transformed with an FFT, and the Gaussian is
//! divided out in frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Result};

/// Oversampling ratio and spreading half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NufftParams {
    #[serde(default = "default_oversampling")]
    pub oversampling: f64,
    /// Grid points on each side of a sample that receive its Gaussian.
    #[serde(default = "default_spread")]
    pub spread_width: usize,
}

fn default_oversampling() -> f64 {
    2.0
}

fn default_spread() -> usize {
    12
}

impl Default for NufftParams {
    fn default() -> Self {
        Self {
            oversampling: default_oversampling(),
            spread_width: default_spread(),
        }
    }
}

/// Coefficients `c_k` for `k = -N..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierCoefficients {
    n: usize,
    c: Vec<Complex64>,
    span: f64,
}

impl FourierCoefficients {
    /// Cutoff `N`.
    pub fn cutoff(&self) -> usize {
        self.n
    }

    /// Sample span `T`.
    pub fn span(&self) -> f64 {
        self.span
    }

    /// `c_k` for `|k| <= N`.
    pub fn get(&self, k: i64) -> Complex64 {
        assert!(k.unsigned_abs() as usize <= self.n, "frequency {k} beyond cutoff {}", self.n);
        self.c[(k + self.n as i64) as usize]
    }

    /// Coefficients ordered from `-N` to `N`.
    pub fn values(&self) -> &[Complex64] {
        &self.c
    }

    /// The same coefficients restricted to a smaller cutoff.
    pub fn truncated(&self, n: usize) -> FourierCoefficients {
        let n = n.min(self.n);
        let lo = self.n - n;
        FourierCoefficients {
            n,
            c: self.c[lo..lo + 2 * n + 1].to_vec(),
            span: self.span,
        }
    }
}

fn check_input(times: &[f64], values: &[f64], span: f64) -> Result<()> {
    if times.is_empty() {
        return Err(domain_err("nufft needs at least one sample"));
    }
    if times.len() != values.len() {
        return Err(domain_err(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if !(span.is_finite() && span > 0.0) {
        return Err(domain_err(format!("sample span must be positive, got {span}")));
    }
    if times.iter().any(|&t| !(t >= 0.0 && t <= span)) {
        return Err(domain_err("sample times must lie in [0, T]"));
    }
    Ok(())
}

/// Direct `O(N M)` evaluation of the coefficients.
pub fn direct_dft(times: &[f64], values: &[f64], n: usize, span: f64) -> Result<FourierCoefficients> {
    check_input(times, values, span)?;
    let n_i = n as i64;
    let c = (-n_i..=n_i)
        .map(|k| {
            times
                .iter()
                .zip(values)
                .map(|(&t, &v)| Complex64::from_polar(v, -(k as f64) * 2.0 * PI * t / span))
                .sum()
        })
        .collect();
    Ok(FourierCoefficients { n, c, span })
}

/// Fast Gaussian gridding estimate of the coefficients.
pub fn fgg_nufft(
    times: &[f64],
    values: &[f64],
    n: usize,
    span: f64,
    params: &NufftParams,
) -> Result<FourierCoefficients> {
    check_input(times, values, span)?;
    let r = params.oversampling;
    let modes = 2 * n + 1;
    if !(r.is_finite() && r > 1.0) {
        return Err(domain_err(format!(
            "oversampling {r} leaves N = {n} beyond the grid Nyquist limit"
        )));
    }
    if params.spread_width == 0 {
        return Err(domain_err("spread width must be at least 1"));
    }
    let mut grid_len = (r * modes as f64).ceil() as usize;
    grid_len += grid_len % 2;
    if 2 * n + 1 > grid_len {
        return Err(domain_err(format!("N = {n} exceeds the oversampled grid Nyquist limit")));
    }
    let msp = params.spread_width;
    let tau = PI * msp as f64 / ((modes * modes) as f64 * r * (r - 0.5));
    let h = 2.0 * PI / grid_len as f64;

    let mut grid = vec![Complex64::new(0.0, 0.0); grid_len];
    let e3: Vec<f64> = (0..=msp).map(|l| (-(h * l as f64).powi(2) / (4.0 * tau)).exp()).collect();
    for (&t, &v) in times.iter().zip(values) {
        let x = 2.0 * PI * t / span;
        let m = (x / h).floor() as i64;
        let d = x - m as f64 * h;
        // exp(-(d - l h)^2 / 4 tau) = e1 * e2^l * e3_l
        let e1 = (-d * d / (4.0 * tau)).exp();
        let e2 = (d * h / (2.0 * tau)).exp();
        let lo = -(msp as i64) + 1;
        let mut pow = e2.powi(lo as i32);
        for l in lo..=msp as i64 {
            let w = v * e1 * pow * e3[l.unsigned_abs() as usize];
            let idx = (m + l).rem_euclid(grid_len as i64) as usize;
            grid[idx].re += w;
            pow *= e2;
        }
    }

    FftPlanner::new().plan_fft_forward(grid_len).process(&mut grid);

    let n_i = n as i64;
    let scale = (PI / tau).sqrt() / grid_len as f64;
    let c = (-n_i..=n_i)
        .map(|k| {
            let g = grid[k.rem_euclid(grid_len as i64) as usize];
            g * (scale * ((k * k) as f64 * tau).exp())
        })
        .collect();
    Ok(FourierCoefficients { n, c, span })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_err(a: &FourierCoefficients, b: &FourierCoefficients) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn delta_at_origin() {
        let c = fgg_nufft(&[0.0], &[1.0], 16, 1.0, &NufftParams::default()).unwrap();
        for k in -16..=16 {
            assert!((c.get(k) - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let times: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..3.0)).collect();
            let values: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
            let direct = direct_dft(&times, &values, 64, 3.0).unwrap();
            let fast = fgg_nufft(&times, &values, 64, 3.0, &NufftParams::default()).unwrap();
            assert!(max_err(&direct, &fast) < 1e-6);
            let fine = NufftParams {
                spread_width: 24,
                ..NufftParams::default()
            };
            let fast = fgg_nufft(&times, &values, 64, 3.0, &fine).unwrap();
            assert!(max_err(&direct, &fast) < 1e-10);
        }
    }

    #[test]
    fn hermitian_for_real_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let times: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        let values: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = fgg_nufft(&times, &values, 40, 1.0, &NufftParams::default()).unwrap();
        for k in 0..=40 {
            assert!((c.get(k) - c.get(-k).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn truncation_keeps_low_modes() {
        let c = direct_dft(&[0.1, 0.4], &[1.0, -2.0], 10, 1.0).unwrap();
        let t = c.truncated(3);
        assert_eq!(t.cutoff(), 3);
        for k in -3..=3 {
            assert_eq!(t.get(k), c.get(k));
        }
    }

    #[test]
    fn input_errors() {
        let p = NufftParams::default();
        assert!(fgg_nufft(&[], &[], 4, 1.0, &p).is_err());
        assert!(fgg_nufft(&[0.1], &[1.0, 2.0], 4, 1.0, &p).is_err());
        assert!(fgg_nufft(&[1.5], &[1.0], 4, 1.0, &p).is_err());
        let bad = NufftParams {
            oversampling: 1.0,
            ..p
        };
        assert!(fgg_nufft(&[0.1], &[1.0], 4, 1.0, &bad).is_err());
    }
}

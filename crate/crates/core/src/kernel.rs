//! Sibuya waiting times and the discrete memory kernel of the fractional
//! update.
//!
//! With `psi` the waiting-time masses and `Phi` the survival function, the
//! kernel is the deconvolution `psi = K * Phi`:
//!
//! ```text
//! K(1) = psi(1)
//! K(n) = psi(n) - sum_{m=1}^{n-1} K(m) Phi(n-m)
//! ```
//!
//! At `alpha = 1` the waiting time is always one step and `K = (1, 0, 0, ...)`.

use std::io::Write;

use crate::error::{domain_err, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(domain_err(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Sibuya masses `psi[1..=n]` and survival values `phi[0..=n]`.
///
/// `psi[0]` is unused and set to zero so that both vectors share indices.
pub fn sibuya(alpha: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(domain_err("sibuya table needs at least one term"));
    }
    let mut psi = vec![0.0; n + 1];
    let mut phi = vec![0.0; n + 1];
    phi[0] = 1.0;
    psi[1] = alpha;
    phi[1] = 1.0 - alpha;
    for k in 2..=n {
        psi[k] = psi[k - 1] * ((k - 1) as f64 - alpha) / k as f64;
        // Product form of the survival function; the difference form loses
        // relative accuracy deep in the tail.
        phi[k] = phi[k - 1] * (k as f64 - alpha) / k as f64;
    }
    Ok((psi, phi))
}

/// Memory kernel `K[1..=n]` (index 0 unused).
pub fn memory_kernel(alpha: f64, n: usize) -> Result<Vec<f64>> {
    let (psi, phi) = sibuya(alpha, n)?;
    Ok(deconvolve(&psi, &phi))
}

fn deconvolve(psi: &[f64], phi: &[f64]) -> Vec<f64> {
    let n = psi.len() - 1;
    let mut k = vec![0.0; n + 1];
    for i in 1..=n {
        let mut acc = psi[i];
        for m in 1..i {
            acc -= k[m] * phi[i - m];
        }
        k[i] = acc;
    }
    k
}

/// Precomputed kernel, truncated to the memory window used by the stepper.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    alpha: f64,
    k: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
}

impl KernelTable {
    pub const DEFAULT_WINDOW: usize = 512;
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;

    /// Computes up to `window` terms, stopping at the first `|K(n)| < tol`.
    pub fn new(alpha: f64, window: usize, tol: f64) -> Result<Self> {
        if window == 0 {
            return Err(domain_err("memory window must be at least 1"));
        }
        let (psi, phi) = sibuya(alpha, window)?;
        let full = deconvolve(&psi, &phi);
        let mut len = window;
        for (n, kn) in full.iter().enumerate().skip(2) {
            if kn.abs() < tol {
                len = n - 1;
                break;
            }
        }
        Ok(Self {
            alpha,
            k: full[..=len].to_vec(),
            psi: psi[..=len].to_vec(),
            phi: phi[..=len].to_vec(),
        })
    }

    pub fn with_defaults(alpha: f64) -> Result<Self> {
        Self::new(alpha, Self::DEFAULT_WINDOW, Self::DEFAULT_TOLERANCE)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of retained history terms.
    pub fn window(&self) -> usize {
        self.k.len() - 1
    }

    /// `K(lag)` for `1 <= lag <= window`, zero beyond.
    pub fn weight(&self, lag: usize) -> f64 {
        self.k.get(lag).copied().filter(|_| lag > 0).unwrap_or(0.0)
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Diagnostic dump with columns `n,psi,phi,K`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "psi", "phi", "K"])?;
        for n in 0..self.k.len() {
            w.write_record(&[
                n.to_string(),
                self.psi[n].to_string(),
                self.phi[n].to_string(),
                self.k[n].to_string(),
            ])?;
        }
        w.flush().map_err(|source| crate::Error::Io {
            path: "<kernel csv>".into(),
            source,
        })?;
        Ok(())
    }
}

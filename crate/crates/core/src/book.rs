//! One order book: its signed density, creation terms and mid-price.
//!
//! Sign convention: bids are positive and sit below the price, asks are
//! negative and sit above it. The mid-price is the zero crossing.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Error, Result};
use crate::lattice::Lattice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BookParams {
    /// Source intensity.
    pub lambda: f64,
    /// Source rate (inverse squared log-price width).
    pub mu: f64,
    /// Cancellation rate.
    pub nu: f64,
    /// Initial price.
    pub p0: f64,
}

impl Default for BookParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 0.1,
            nu: 14.0,
            p0: 230.0,
        }
    }
}

impl BookParams {
    /// `lambda` may be zero only for diagnostic runs without sources.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(config_err(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(config_err(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(config_err(format!("nu must be non-negative, got {}", self.nu)));
        }
        if !self.p0.is_finite() {
            return Err(config_err("p0 must be finite"));
        }
        Ok(())
    }
}

/// `g(y) = -lambda mu y exp(-mu y^2)`.
#[inline]
pub fn g(y: f64, lambda: f64, mu: f64) -> f64 {
    -lambda * mu * y * (-mu * y * y).exp()
}

/// Lit-book source `s(x) = g(x - p)` on every lattice point.
pub fn source_term(lattice: &Lattice, price: f64, lambda: f64, mu: f64) -> Vec<f64> {
    let mut out = vec![0.0; lattice.len()];
    add_source_term(lattice, price, lambda, mu, &mut out);
    out
}

pub(crate) fn add_source_term(lattice: &Lattice, price: f64, lambda: f64, mu: f64, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(lattice.points()) {
        *o += g(x - price, lambda, mu);
    }
}

/// Shape of the pairs-trader creation term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingForm {
    /// `g(y + c dp) - g(y)`: the book's order flow is re-centred a fraction
    /// `c` of the gap towards the other book.
    #[default]
    Shifted,
    /// The two-armed piecewise form, arms as written.
    Printed,
}

/// Coupling between two books, evaluated for `dp = p_own - p_other`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    #[serde(default)]
    pub form: CouplingForm,
    /// Fraction `c` of the gap closed by each book at balance (shifted form).
    #[serde(default = "default_gain")]
    pub gain: f64,
    /// `|dp|` below which the term vanishes; `None` means `dx / 10`.
    #[serde(default)]
    pub eps: Option<f64>,
}

fn default_gain() -> f64 {
    0.5
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            form: CouplingForm::Shifted,
            gain: default_gain(),
            eps: None,
        }
    }
}

impl Coupling {
    pub fn printed() -> Self {
        Self {
            form: CouplingForm::Printed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(config_err(format!("coupling gain must be non-negative, got {}", self.gain)));
        }
        if let Some(eps) = self.eps {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(config_err(format!("coupling eps must be non-negative, got {eps}")));
            }
        }
        Ok(())
    }

    /// Creation rate at offset `y = x - p_own`.
    #[inline]
    pub fn at(&self, y: f64, dp: f64, lambda: f64, mu: f64) -> f64 {
        match self.form {
            CouplingForm::Shifted => g(y + self.gain * dp, lambda, mu) - g(y, lambda, mu),
            CouplingForm::Printed => printed_at(y, dp, lambda, mu),
        }
    }
}

/// Piecewise arms: for `dp > 0`, `g(y) dp` above the price and `g(y / dp)`
/// at or below it; for `dp <= 0`, `g(y) dp` at or below and `g(y / dp)` above.
#[inline]
fn printed_at(y: f64, dp: f64, lambda: f64, mu: f64) -> f64 {
    let wide_side = if dp > 0.0 { y > 0.0 } else { y <= 0.0 };
    if wide_side {
        g(y, lambda, mu) * dp
    } else {
        g(y / dp, lambda, mu)
    }
}

/// Coupling creation term of a book at `p_own` paired with one at `p_other`.
///
/// Zero when `|p_own - p_other| < eps`.
pub fn coupling_term(
    lattice: &Lattice,
    p_own: f64,
    p_other: f64,
    lambda: f64,
    mu: f64,
    coupling: &Coupling,
) -> Vec<f64> {
    let mut out = vec![0.0; lattice.len()];
    add_coupling_term(lattice, p_own, p_other, lambda, mu, coupling, &mut out);
    out
}

pub(crate) fn add_coupling_term(
    lattice: &Lattice,
    p_own: f64,
    p_other: f64,
    lambda: f64,
    mu: f64,
    coupling: &Coupling,
    out: &mut [f64],
) {
    let dp = p_own - p_other;
    let eps = coupling.eps.unwrap_or(lattice.dx() / 10.0);
    if dp.abs() < eps || dp == 0.0 {
        return;
    }
    for (o, &x) in out.iter_mut().zip(lattice.points()) {
        *o += coupling.at(x - p_own, dp, lambda, mu);
    }
}

/// A one-off injection of volume `size` at `location` relative to the price.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shock {
    /// Signed volume; positive adds bids.
    #[serde(rename = "Q")]
    pub size: f64,
    pub location: f64,
    pub time: f64,
    #[serde(default)]
    pub book: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BookState {
    pub phi: Vec<f64>,
    pub price: f64,
    pub params: BookParams,
}

/// Lower bound on the cancellation rate used for the initial profile.
pub const NU_FLOOR: f64 = 1.0;

impl BookState {
    /// Starts from the creation/annihilation balance `s(x; p0) / max(nu, NU_FLOOR)`.
    pub fn balanced(lattice: &Lattice, params: BookParams) -> Result<Self> {
        params.validate()?;
        if !lattice.contains(params.p0) {
            return Err(config_err(format!(
                "initial price {} outside lattice [{}, {}]",
                params.p0,
                lattice.x0(),
                lattice.x_max()
            )));
        }
        let scale = 1.0 / params.nu.max(NU_FLOOR);
        let mut phi = source_term(lattice, params.p0, params.lambda, params.mu);
        phi.iter_mut().for_each(|v| *v *= scale);
        pin_boundaries(&mut phi);
        Ok(Self {
            phi,
            price: params.p0,
            params,
        })
    }

    /// Arbitrary initial density; the price is extracted from it.
    pub fn from_profile(lattice: &Lattice, mut phi: Vec<f64>, params: BookParams) -> Result<Self> {
        params.validate()?;
        if phi.len() != lattice.len() {
            return Err(config_err("initial profile length does not match the lattice"));
        }
        pin_boundaries(&mut phi);
        let price = extract_price(lattice, &phi, params.p0)?.price;
        Ok(Self { phi, price, params })
    }

    pub fn volume(&self, lattice: &Lattice) -> f64 {
        self.phi.iter().sum::<f64>() * lattice.dx()
    }

    pub fn abs_volume(&self, lattice: &Lattice) -> f64 {
        self.phi.iter().map(|v| v.abs()).sum::<f64>() * lattice.dx()
    }
}

pub(crate) fn pin_boundaries(phi: &mut [f64]) {
    if let Some(first) = phi.first_mut() {
        *first = 0.0;
    }
    if let Some(last) = phi.last_mut() {
        *last = 0.0;
    }
}

/// Gaussian bump of standard deviation `dx` and lattice volume `size`.
pub fn shock_profile(lattice: &Lattice, centre: f64, size: f64) -> Result<Vec<f64>> {
    if !lattice.contains(centre) {
        return Err(domain_err(format!(
            "shock centre {centre} outside lattice [{}, {}]",
            lattice.x0(),
            lattice.x_max()
        )));
    }
    let dx = lattice.dx();
    let n = lattice.len();
    let mut bump: Vec<f64> = lattice
        .points()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 || i + 1 == n {
                0.0
            } else {
                let z = (x - centre) / dx;
                (-0.5 * z * z).exp()
            }
        })
        .collect();
    let mass: f64 = bump.iter().sum::<f64>() * dx;
    if size == 0.0 || mass == 0.0 {
        bump.iter_mut().for_each(|v| *v = 0.0);
        return Ok(bump);
    }
    let scale = size / mass;
    bump.iter_mut().for_each(|v| *v *= scale);
    Ok(bump)
}

/// Adds the shock's bump at `price + location`.
pub fn apply_shock(lattice: &Lattice, state: &mut BookState, shock: &Shock) -> Result<()> {
    if !shock.size.is_finite() {
        return Err(domain_err("shock size must be finite"));
    }
    let total = state.abs_volume(lattice);
    if shock.size.abs() >= total {
        return Err(domain_err(format!(
            "shock |Q| = {} is not below the book's absolute volume {total}",
            shock.size.abs()
        )));
    }
    let bump = shock_profile(lattice, state.price + shock.location, shock.size)?;
    for (p, b) in state.phi.iter_mut().zip(&bump) {
        *p += b;
    }
    Ok(())
}

/// Result of locating the mid-price.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceFix {
    pub price: f64,
    /// Number of significant sign changes found; more than one is unusual.
    pub crossings: usize,
}

/// Zero crossing of `phi` nearest to `previous`, linearly interpolated.
pub fn extract_price(lattice: &Lattice, phi: &[f64], previous: f64) -> Result<PriceFix> {
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Ignore sign flips in the numerically empty far field.
    let floor = scale * 1e-12;
    let xs = lattice.points();
    let mut best: Option<f64> = None;
    let mut crossings = 0;
    for i in 0..phi.len().saturating_sub(1) {
        let (a, b) = (phi[i], phi[i + 1]);
        if a.abs().max(b.abs()) <= floor {
            continue;
        }
        let root = if (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0) {
            xs[i] + (xs[i + 1] - xs[i]) * a / (a - b)
        } else if a == 0.0 && i > 0 && phi[i - 1] * b < 0.0 {
            xs[i]
        } else {
            continue;
        };
        crossings += 1;
        if best.is_none_or(|p| (root - previous).abs() < (p - previous).abs()) {
            best = Some(root);
        }
    }
    match best {
        Some(price) => Ok(PriceFix { price, crossings }),
        None => Err(Error::OneSidedBook { book: 0, time: f64::NAN }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeConfig};

    fn base_lattice() -> Lattice {
        build_lattice(&LatticeConfig {
            x0: Some(130.0),
            ..LatticeConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn source_vanishes_at_price_and_is_odd() {
        let lattice = base_lattice();
        let p = 230.0;
        let s = source_term(&lattice, p, 1.0, 0.1);
        let ip = lattice.points().iter().position(|&x| x == p).unwrap();
        assert_eq!(s[ip], 0.0);
        for k in 1..150 {
            assert!((s[ip + k] + s[ip - k]).abs() < 1e-12);
        }
        let net: f64 = s.iter().sum::<f64>() * lattice.dx();
        assert!(net.abs() < 1e-12);
    }

    #[test]
    fn source_value_below_price() {
        // -lambda mu (x - p) exp(-mu (x - p)^2) at x - p = -1.
        let expected = 0.1 * (-0.1f64).exp();
        assert!((g(-1.0, 1.0, 0.1) - expected).abs() < 1e-15);
        assert!((expected - 0.0905).abs() < 1e-4);
    }

    #[test]
    fn coupling_zero_when_prices_agree() {
        let lattice = base_lattice();
        for c in [Coupling::default(), Coupling::printed()] {
            let z = coupling_term(&lattice, 230.0, 230.0, 1.0, 0.1, &c);
            assert!(z.iter().all(|&v| v == 0.0));
            let z = coupling_term(&lattice, 230.0, 230.04, 1.0, 0.1, &c);
            assert!(z.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn printed_arms() {
        let (lambda, mu) = (1.0, 0.1);
        for &dp in &[0.3, 1.7, -0.4, -2.5] {
            assert_eq!(printed_at(0.0, dp, lambda, mu), 0.0);
            assert!(printed_at(1e-13, dp, lambda, mu).abs() < 1e-12);
            assert!(printed_at(-1e-13, dp, lambda, mu).abs() < 1e-12);
        }
        // Sell pressure just above the price of the dearer book.
        assert!(printed_at(1e-3, 0.8, lambda, mu) < 0.0);
        let dp = 2.0;
        assert_eq!(printed_at(1.0, dp, lambda, mu), g(1.0, lambda, mu) * 2.0);
        assert_eq!(printed_at(-1.0, dp, lambda, mu), g(-0.5, lambda, mu));
        let dp = -2.0;
        assert_eq!(printed_at(-1.0, dp, lambda, mu), g(-1.0, lambda, mu) * -2.0);
        assert_eq!(printed_at(1.0, dp, lambda, mu), g(-0.5, lambda, mu));
    }

    #[test]
    fn shifted_form_recentres_the_source() {
        let (lambda, mu) = (1.0, 0.1);
        let c = Coupling::default();
        for &dp in &[0.3, 1.7, -0.4, -2.5] {
            // Source plus coupling is the source moved by -gain * dp.
            for k in -20..=20 {
                let y = 0.37 * k as f64;
                let total = g(y, lambda, mu) + c.at(y, dp, lambda, mu);
                let moved = g(y + 0.5 * dp, lambda, mu);
                assert!((total - moved).abs() < 1e-15);
            }
            // Sell pressure right above the dearer book, buy pressure below
            // the cheaper one.
            assert_eq!(c.at(1e-3, dp, lambda, mu).signum(), -dp.signum());
        }
        assert_eq!(c.at(0.7, 0.0, lambda, mu), 0.0);
    }

    #[test]
    fn coupling_validation() {
        assert!(Coupling::default().validate().is_ok());
        let bad = Coupling {
            gain: -0.1,
            ..Coupling::default()
        };
        assert!(bad.validate().is_err());
        let bad = Coupling {
            eps: Some(f64::NAN),
            ..Coupling::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn extract_linear_midpoint() {
        let lattice = build_lattice(&LatticeConfig {
            length: 2.0,
            divisions: 4,
            x0: Some(229.5),
            ..LatticeConfig::default()
        })
        .unwrap();
        // Points 229.5, 230.0, 230.5, 231.0, 231.5.
        let phi = [0.0, 1.0, -1.0, -0.5, 0.0];
        let fix = extract_price(&lattice, &phi, 230.0).unwrap();
        assert_eq!(fix.price, 230.25);
        assert_eq!(fix.crossings, 1);
    }

    #[test]
    fn balanced_profile_price() {
        let lattice = base_lattice();
        let state = BookState::balanced(&lattice, BookParams::default()).unwrap();
        let fix = extract_price(&lattice, &state.phi, 229.0).unwrap();
        assert_eq!(fix.price, 230.0);
        assert_eq!(state.price, 230.0);
    }

    #[test]
    fn one_sided_book_errors() {
        let lattice = base_lattice();
        let phi = vec![1.0; lattice.len()];
        assert!(matches!(
            extract_price(&lattice, &phi, 230.0),
            Err(Error::OneSidedBook { .. })
        ));
    }

    #[test]
    fn nearest_crossing_wins() {
        let lattice = build_lattice(&LatticeConfig {
            length: 4.0,
            divisions: 4,
            x0: Some(0.0),
            ..LatticeConfig::default()
        })
        .unwrap();
        let phi = [0.0, 1.0, -1.0, 1.0, 0.0];
        let fix = extract_price(&lattice, &phi, 2.6).unwrap();
        assert_eq!(fix.price, 2.5);
        assert_eq!(fix.crossings, 2);
    }

    #[test]
    fn smooth_root_recovered_to_second_order() {
        // Smooth decreasing profile with a single known root.
        let lattice = base_lattice();
        for k in 0..20 {
            let root = 225.0 + 0.37 * k as f64;
            let phi: Vec<f64> = lattice
                .points()
                .iter()
                .map(|&x| {
                    let y = x - root;
                    -(y / 3.0).tanh() * (1.0 + 0.05 * y * y)
                })
                .collect();
            let fix = extract_price(&lattice, &phi, 230.0).unwrap();
            assert!((fix.price - root).abs() < lattice.dx().powi(2), "{root}");
        }
    }

    #[test]
    fn shock_volume_and_null() {
        let lattice = base_lattice();
        let base = BookState::balanced(&lattice, BookParams::default()).unwrap();
        let mut state = base.clone();
        apply_shock(
            &lattice,
            &mut state,
            &Shock { size: 0.0, location: -1.0, time: 0.0, book: 0 },
        )
        .unwrap();
        assert_eq!(state, base);
        let q = 0.02;
        apply_shock(
            &lattice,
            &mut state,
            &Shock { size: q, location: -1.0, time: 0.0, book: 0 },
        )
        .unwrap();
        let added = state.volume(&lattice) - base.volume(&lattice);
        assert!((added - q).abs() < 1e-10);
    }

    #[test]
    fn shock_guards() {
        let lattice = base_lattice();
        let mut state = BookState::balanced(&lattice, BookParams::default()).unwrap();
        let too_big = Shock { size: 10.0, location: 0.0, time: 0.0, book: 0 };
        assert!(apply_shock(&lattice, &mut state, &too_big).is_err());
        let outside = Shock { size: 0.01, location: 500.0, time: 0.0, book: 0 };
        assert!(apply_shock(&lattice, &mut state, &outside).is_err());
    }
}

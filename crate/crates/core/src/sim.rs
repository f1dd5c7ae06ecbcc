//! Coupled evolution of the order books.
//!
//! Each book advances on its own clock. A step of book `j` from `t_n` to
//! `t_{n+1}` computes
//!
//! ```text
//! phi_{n+1} = sum_m K_{n+1-m} e^{-nu (t_n - t_m)} [ (r+F)/2 phî^-_m + (r-F)/2 phî^+_m - r phi_m ]
//!           + e^{-nu dt_n} phi_n + c_n dt_n
//! ```
//!
//! where `phî^±_m` is slice `m` read off-lattice at `x_i ± dx_m`. Because `F`
//! enters linearly, every history slice is stored as a symmetric part
//! `(r/2)(phî^- + phî^+) - r phi` and an antisymmetric part
//! `(phî^- - phî^+)/2`, so a step costs two fused sums over the window.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::book::{self, BookParams, BookState, Coupling, Shock};
use crate::error::{config_err, Error, Result};
use crate::kernel::KernelTable;
use crate::lattice::{self, Lattice, LatticeConfig, SamplingMode, TimeGrid};

/// Weights below this decay factor contribute nothing at double precision.
const DECAY_CUTOFF: f64 = 1e-17;

/// Which jump length is used to read a history slice off-lattice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffLattice {
    /// The slice's own `dx_m`.
    #[default]
    Slice,
    /// The current step's `dx_n` for every slice.
    Latest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForceMode {
    /// One Brownian potential drives every book.
    #[default]
    Shared,
    /// Each book draws its own increments (uncoupled-noise test hook).
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceParams {
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(rename = "sigma_V", default = "one")]
    pub sigma_v: f64,
    #[serde(default)]
    pub mode: ForceMode,
}

fn one() -> f64 {
    1.0
}

impl Default for ForceParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            sigma_v: 1.0,
            mode: ForceMode::Shared,
        }
    }
}

/// `F = clamp(kappa dV dt / dx, -r, r)`.
pub fn drift_coefficient(force_increment: f64, dt: f64, dx: f64, kappa: f64, r: f64) -> f64 {
    (kappa * force_increment * dt / dx).clamp(-r, r)
}

/// Everything needed to run the coupled system.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub lattice: LatticeConfig,
    pub books: Vec<BookParams>,
    pub sampling: SamplingMode,
    /// Per-book clock intensity; `None` means `1 / dt_bar`.
    pub intensities: Vec<Option<f64>>,
    pub force: ForceParams,
    pub kernel_window: usize,
    pub kernel_tolerance: f64,
    pub off_lattice: OffLattice,
    /// Pairs-trader coupling; `None` leaves the books independent.
    pub coupling: Option<Coupling>,
    /// Discarded warm-up, in multiples of `dt_bar`.
    pub burn_in: usize,
    /// Recorded span after burn-in.
    pub horizon: f64,
    /// Shock times are measured from the end of burn-in.
    pub shocks: Vec<Shock>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeConfig::default(),
            books: vec![BookParams::default(), BookParams::default()],
            sampling: SamplingMode::Exponential,
            intensities: vec![None, None],
            force: ForceParams::default(),
            kernel_window: KernelTable::DEFAULT_WINDOW,
            kernel_tolerance: KernelTable::DEFAULT_TOLERANCE,
            off_lattice: OffLattice::Slice,
            coupling: Some(Coupling::default()),
            burn_in: 200,
            horizon: 100.0,
            shocks: Vec::new(),
        }
    }
}

impl SimConfig {
    /// Calibrated `(D_alpha, nu, alpha) = (0.27, 12.55, 0.57)` on top of the
    /// base parameters.
    pub fn calibrated() -> Self {
        let mut cfg = Self::default();
        cfg.set_free_parameters(0.27, 12.55, 0.57);
        cfg
    }

    /// Sets the shared free parameters `(D_alpha, nu, alpha)`.
    pub fn set_free_parameters(&mut self, d_alpha: f64, nu: f64, alpha: f64) {
        self.lattice.d_alpha = d_alpha;
        self.lattice.alpha = alpha;
        for b in &mut self.books {
            b.nu = nu;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if self.books.is_empty() {
            return Err(config_err("at least one book is required"));
        }
        for b in &self.books {
            b.validate()?;
        }
        if self.intensities.len() > self.books.len() {
            return Err(config_err("more clock intensities than books"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(config_err(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.force.kappa.is_finite() && self.force.sigma_v.is_finite() && self.force.sigma_v >= 0.0)
        {
            return Err(config_err("force parameters must be finite with sigma_V >= 0"));
        }
        if let Some(c) = &self.coupling {
            c.validate()?;
        }
        if self.kernel_window == 0 {
            return Err(config_err("kernel window must be at least 1"));
        }
        for s in &self.shocks {
            if s.book >= self.books.len() {
                return Err(config_err(format!("shock targets missing book {}", s.book)));
            }
            if !(s.size.is_finite() && s.location.is_finite() && s.time.is_finite()) {
                return Err(config_err("shock fields must be finite"));
            }
        }
        Ok(())
    }

    /// Lattice config with `x0` resolved (centred on the first book's price).
    pub fn resolved_lattice(&self) -> LatticeConfig {
        let mut lc = self.lattice.clone();
        if lc.x0.is_none() {
            let p0 = self.books.first().map(|b| b.p0).unwrap_or(0.0);
            lc.x0 = Some(lc.centred_x0(p0));
        }
        lc
    }

    pub fn base_dt(&self) -> Result<f64> {
        lattice::base_dt(&self.lattice)
    }
}

/// Observed mid-prices of one book.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub book_id: usize,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

impl PricePath {
    pub fn new(book_id: usize) -> Self {
        Self {
            book_id,
            t: Vec::new(),
            p: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Successive price differences.
    pub fn returns(&self) -> Vec<f64> {
        self.p.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Writes `book_id,t,p` rows for every path.
pub fn write_paths_csv<W: Write>(paths: &[PricePath], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["book_id", "t", "p"])?;
    for path in paths {
        for (t, p) in path.t.iter().zip(&path.p) {
            w.write_record(&[path.book_id.to_string(), t.to_string(), p.to_string()])?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<price paths csv>".into(),
        source,
    })?;
    Ok(())
}

/// Reads `book_id,t,p` rows, skipping `#` lines. Paths come back ordered by
/// book id.
pub fn read_paths_csv<R: Read>(input: R) -> Result<Vec<PricePath>> {
    #[derive(Deserialize)]
    struct Row {
        book_id: usize,
        t: f64,
        p: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut paths: Vec<PricePath> = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        while paths.len() <= row.book_id {
            paths.push(PricePath::new(paths.len()));
        }
        let path = &mut paths[row.book_id];
        if path.t.last().is_some_and(|&last| row.t < last) {
            return Err(config_err(format!("book {} times are not sorted at t={}", row.book_id, row.t)));
        }
        path.t.push(row.t);
        path.p.push(row.p);
    }
    Ok(paths)
}

struct Slice {
    t: f64,
    dx: f64,
    phi: Vec<f64>,
    sym: Vec<f64>,
    anti: Vec<f64>,
}

/// Fills the symmetric and antisymmetric jump parts of `phi` for jump
/// length `jump` (in log-price units) on a lattice of spacing `dx`.
fn jump_parts(phi: &[f64], jump: f64, dx: f64, r: f64, sym: &mut [f64], anti: &mut [f64]) {
    let len = phi.len() as isize;
    let cells = jump / dx;
    let k = cells.floor();
    let w = cells - k;
    let k = k as isize;
    let get = |j: isize| if j >= 0 && j < len { phi[j as usize] } else { 0.0 };
    for i in 0..len {
        let plus = (1.0 - w) * get(i + k) + w * get(i + k + 1);
        let minus = (1.0 - w) * get(i - k) + w * get(i - k - 1);
        let iu = i as usize;
        sym[iu] = 0.5 * r * (minus + plus) - r * phi[iu];
        anti[iu] = 0.5 * (minus - plus);
    }
}

/// History of one density and the memory sum over it.
struct Memory {
    kernel: KernelTable,
    r: f64,
    nu: f64,
    dx: f64,
    mode: OffLattice,
    slices: VecDeque<Slice>,
    spare: Vec<Slice>,
}

impl Memory {
    fn new(kernel: KernelTable, r: f64, nu: f64, dx: f64, mode: OffLattice) -> Self {
        Self {
            slices: VecDeque::with_capacity(kernel.window() + 1),
            spare: Vec::new(),
            kernel,
            r,
            nu,
            dx,
            mode,
        }
    }

    fn push(&mut self, phi: &[f64], t: f64, jump: f64) {
        let len = phi.len();
        let mut slice = self.spare.pop().unwrap_or_else(|| Slice {
            t: 0.0,
            dx: 0.0,
            phi: vec![0.0; len],
            sym: vec![0.0; len],
            anti: vec![0.0; len],
        });
        slice.t = t;
        slice.dx = jump;
        slice.phi.copy_from_slice(phi);
        jump_parts(phi, jump, self.dx, self.r, &mut slice.sym, &mut slice.anti);
        self.slices.push_back(slice);
        while self.slices.len() > self.kernel.window() {
            if let Some(old) = self.slices.pop_front() {
                self.spare.push(old);
            }
        }
    }

    /// Adds `sum_m w_m (sym_m + F anti_m)` into `out`.
    fn accumulate(&self, t_now: f64, jump_now: f64, drift: f64, out: &mut [f64]) {
        let mut sym = Vec::new();
        let mut anti = Vec::new();
        for (age, slice) in self.slices.iter().rev().enumerate() {
            let decay = (-self.nu * (t_now - slice.t)).exp();
            if decay < DECAY_CUTOFF {
                break;
            }
            let w = self.kernel.weight(age + 1) * decay;
            if w == 0.0 {
                continue;
            }
            match self.mode {
                OffLattice::Slice => {
                    let wf = w * drift;
                    for ((o, s), a) in out.iter_mut().zip(&slice.sym).zip(&slice.anti) {
                        *o += w * s + wf * a;
                    }
                }
                OffLattice::Latest => {
                    if sym.is_empty() {
                        sym = vec![0.0; out.len()];
                        anti = vec![0.0; out.len()];
                    }
                    jump_parts(&slice.phi, jump_now, self.dx, self.r, &mut sym, &mut anti);
                    let wf = w * drift;
                    for ((o, s), a) in out.iter_mut().zip(&sym).zip(&anti) {
                        *o += w * s + wf * a;
                    }
                }
            }
        }
    }
}

/// Density-only stepper with no price tracking.
///
/// Exposes the update equation for diagnostics (diffusion rate, mass and
/// decay checks) where the density need not have a zero crossing.
pub struct DensityStepper {
    memory: Memory,
    phi: Vec<f64>,
    t: f64,
    scratch: Vec<f64>,
}

impl DensityStepper {
    pub fn new(lattice: &Lattice, kernel: KernelTable, r: f64, nu: f64, phi0: Vec<f64>) -> Result<Self> {
        Self::with_mode(lattice, kernel, r, nu, phi0, OffLattice::Slice)
    }

    pub fn with_mode(
        lattice: &Lattice,
        kernel: KernelTable,
        r: f64,
        nu: f64,
        mut phi0: Vec<f64>,
        mode: OffLattice,
    ) -> Result<Self> {
        if phi0.len() != lattice.len() {
            return Err(config_err("profile length does not match the lattice"));
        }
        book::pin_boundaries(&mut phi0);
        let len = phi0.len();
        Ok(Self {
            memory: Memory::new(kernel, r, nu, lattice.dx(), mode),
            phi: phi0,
            t: 0.0,
            scratch: vec![0.0; len],
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Advances by `dt` with jump length `jump`, drift `F` and an optional
    /// creation rate. The current density enters the history tagged with
    /// `jump` before the update is formed.
    pub fn step(&mut self, dt: f64, jump: f64, drift: f64, creation: Option<&[f64]>) {
        self.memory.push(&self.phi, self.t, jump);
        let out = &mut self.scratch;
        out.iter_mut().for_each(|v| *v = 0.0);
        self.memory.accumulate(self.t, jump, drift, out);
        let decay = (-self.memory.nu * dt).exp();
        for (o, p) in out.iter_mut().zip(&self.phi) {
            *o += decay * p;
        }
        if let Some(c) = creation {
            for (o, c) in out.iter_mut().zip(c) {
                *o += c * dt;
            }
        }
        book::pin_boundaries(out);
        std::mem::swap(&mut self.phi, &mut self.scratch);
        self.t += dt;
    }

    /// Adds `delta` to the current density (used for shocks).
    pub fn inject(&mut self, delta: &[f64]) {
        for (p, d) in self.phi.iter_mut().zip(delta) {
            *p += d;
        }
    }
}

struct BookRun {
    state: BookState,
    grid: TimeGrid,
    n: usize,
    stepper: DensityStepper,
    v_last: f64,
    last_drift: f64,
    multi_crossings: usize,
    rng: Option<ChaCha8Rng>,
}

/// Two or more books sharing a lattice, a kernel and the force potential.
pub struct CoupledSystem {
    lattice: Lattice,
    config: SimConfig,
    books: Vec<BookRun>,
    force_rng: ChaCha8Rng,
    v: f64,
    clock: f64,
    burn_in_time: f64,
    shocks: Vec<(Shock, bool)>,
}

/// Seeded RNG for a named sub-stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const GRID_STREAM: u64 = 1;
const FORCE_STREAM: u64 = 1_000;

impl CoupledSystem {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let lattice_cfg = config.resolved_lattice();
        let lattice = lattice::build_lattice(&lattice_cfg)?;
        let kernel = KernelTable::new(lattice_cfg.alpha, config.kernel_window, config.kernel_tolerance)?;
        let dt_bar = lattice::base_dt(&lattice_cfg)?;
        let burn_in_time = config.burn_in as f64 * dt_bar;
        let span = burn_in_time + config.horizon;
        let mut books = Vec::with_capacity(config.books.len());
        for (j, params) in config.books.iter().enumerate() {
            let mut grid_rng = stream_rng(seed, GRID_STREAM + j as u64);
            let rate = config.intensities.get(j).copied().flatten();
            let grid = lattice::sample_time_grid(&lattice_cfg, config.sampling, rate, span, &mut grid_rng)?;
            let state = BookState::balanced(&lattice, params.clone())?;
            let stepper = DensityStepper::with_mode(
                &lattice,
                kernel.clone(),
                lattice_cfg.r,
                params.nu,
                state.phi.clone(),
                config.off_lattice,
            )?;
            let rng = match config.force.mode {
                ForceMode::Shared => None,
                ForceMode::Independent => Some(stream_rng(seed, FORCE_STREAM + 1 + j as u64)),
            };
            books.push(BookRun {
                state,
                grid,
                n: 0,
                stepper,
                v_last: 0.0,
                last_drift: 0.0,
                multi_crossings: 0,
                rng,
            });
        }
        Ok(Self {
            lattice,
            config: config.clone(),
            books,
            force_rng: stream_rng(seed, FORCE_STREAM),
            v: 0.0,
            clock: 0.0,
            burn_in_time,
            shocks: config.shocks.iter().cloned().map(|s| (s, false)).collect(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn burn_in_time(&self) -> f64 {
        self.burn_in_time
    }

    pub fn book(&self, j: usize) -> &BookState {
        &self.books[j].state
    }

    pub fn books(&self) -> impl Iterator<Item = &BookState> {
        self.books.iter().map(|b| &b.state)
    }

    pub fn num_books(&self) -> usize {
        self.books.len()
    }

    /// Steps taken by book `j`.
    pub fn steps_taken(&self, j: usize) -> usize {
        self.books[j].n
    }

    /// Drift `F` used by book `j` on its latest step.
    pub fn last_drift(&self, j: usize) -> f64 {
        self.books[j].last_drift
    }

    pub fn grid(&self, j: usize) -> &TimeGrid {
        &self.books[j].grid
    }

    /// Steps at which book `j` showed more than one zero crossing.
    pub fn multi_crossings(&self, j: usize) -> usize {
        self.books[j].multi_crossings
    }

    fn next_time(&self, j: usize) -> Option<f64> {
        let b = &self.books[j];
        (b.n < b.grid.steps()).then(|| b.grid.times()[b.n + 1])
    }

    /// Advances every book whose next event is the earliest pending one.
    ///
    /// Returns the indices of the books that moved, or `None` once every
    /// clock is exhausted.
    pub fn step(&mut self) -> Result<Option<Vec<usize>>> {
        let next = (0..self.books.len())
            .filter_map(|j| self.next_time(j).map(|t| (j, t)))
            .fold(None::<f64>, |m, (_, t)| Some(m.map_or(t, |m| m.min(t))));
        let Some(tau) = next else {
            return Ok(None);
        };
        let batch: Vec<usize> = (0..self.books.len())
            .filter(|&j| self.next_time(j) == Some(tau))
            .collect();

        let sigma = self.config.force.sigma_v;
        if self.config.force.mode == ForceMode::Shared && sigma > 0.0 {
            let z: f64 = self.force_rng.sample(StandardNormal);
            self.v += sigma * (tau - self.clock).sqrt() * z;
        }
        self.clock = tau;

        // Coupling reads prices from before this batch.
        let prices: Vec<f64> = self.books.iter().map(|b| b.state.price).collect();
        let r = self.lattice_r();
        let kappa = self.config.force.kappa;
        let coupling = self.config.coupling.filter(|_| self.books.len() > 1);

        for &j in &batch {
            let n = self.books[j].n;
            let t_n = self.books[j].grid.times()[n];
            let dt = self.books[j].grid.dt()[n];
            let jump = self.books[j].grid.dx()[n];

            let dv = match self.config.force.mode {
                ForceMode::Shared => self.v - self.books[j].v_last,
                ForceMode::Independent => {
                    let rng = self.books[j].rng.as_mut().expect("independent stream");
                    let z: f64 = rng.sample(StandardNormal);
                    sigma * dt.sqrt() * z
                }
            };
            let drift = if sigma > 0.0 {
                drift_coefficient(dv, dt, jump, kappa, r)
            } else {
                0.0
            };

            let params = &self.books[j].state.params;
            let mut creation = vec![0.0; self.lattice.len()];
            book::add_source_term(&self.lattice, prices[j], params.lambda, params.mu, &mut creation);
            if let Some(coupling) = &coupling {
                // Pairwise coupling to every other book.
                for (k, &pk) in prices.iter().enumerate() {
                    if k != j {
                        book::add_coupling_term(
                            &self.lattice,
                            prices[j],
                            pk,
                            params.lambda,
                            params.mu,
                            coupling,
                            &mut creation,
                        );
                    }
                }
            }

            let book = &mut self.books[j];
            book.stepper.step(dt, jump, drift, Some(&creation));

            // Shocks enter at the first step starting at or after their time.
            let local_t = t_n - self.burn_in_time;
            for (shock, done) in self.shocks.iter_mut() {
                if !*done && shock.book == j && local_t >= shock.time {
                    *done = true;
                    let abs_volume: f64 =
                        book.stepper.phi.iter().map(|v| v.abs()).sum::<f64>() * self.lattice.dx();
                    if shock.size.abs() >= abs_volume {
                        return Err(crate::error::domain_err(format!(
                            "shock |Q| = {} is not below the book's absolute volume {abs_volume}",
                            shock.size.abs()
                        )));
                    }
                    let bump = book::shock_profile(
                        &self.lattice,
                        prices[j] + shock.location,
                        shock.size,
                    )?;
                    book.stepper.inject(&bump);
                }
            }

            book.v_last = self.v;
            book.last_drift = drift;
            book.n += 1;
        }

        for &j in &batch {
            let lattice = &self.lattice;
            let book = &mut self.books[j];
            let fix = match book::extract_price(lattice, &book.stepper.phi, book.state.price) {
                Ok(fix) => fix,
                Err(_) => {
                    return Err(Error::Simulation {
                        book: j,
                        time: self.clock,
                        reason: "order density has no zero crossing (book one-sided)".into(),
                        snapshot: book.stepper.phi.clone(),
                    })
                }
            };
            if fix.crossings > 1 {
                book.multi_crossings += 1;
            }
            if !lattice.contains(fix.price) {
                return Err(Error::Simulation {
                    book: j,
                    time: self.clock,
                    reason: format!("price {} left the lattice", fix.price),
                    snapshot: book.stepper.phi.clone(),
                });
            }
            book.state.price = fix.price;
            book.state.phi.copy_from_slice(&book.stepper.phi);
        }
        Ok(Some(batch))
    }

    fn lattice_r(&self) -> f64 {
        self.config.lattice.r
    }

    /// Runs to the end of every clock, recording post-burn-in events.
    pub fn run(&mut self) -> Result<Vec<PricePath>> {
        let mut paths: Vec<PricePath> = (0..self.books.len()).map(PricePath::new).collect();
        while let Some(batch) = self.step()? {
            if self.clock < self.burn_in_time {
                continue;
            }
            let t = self.clock - self.burn_in_time;
            for j in batch {
                paths[j].t.push(t);
                paths[j].p.push(self.books[j].state.price);
            }
        }
        Ok(paths)
    }
}

/// Seed of replication `k`; replication 0 is the master seed itself.
pub fn replication_seed(master: u64, k: u64) -> u64 {
    if k == 0 {
        return master;
    }
    stream_rng(master, REPLICATION_STREAM).random::<u64>() ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const REPLICATION_STREAM: u64 = 2_000;

/// Runs burn-in plus horizon and returns one path per book.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<Vec<PricePath>> {
    CoupledSystem::new(config, seed)?.run()
}

/// Shock placement for impact experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactConfig {
    /// Offset of the shock from the current price.
    #[serde(default = "default_impact_location")]
    pub location: f64,
    /// Injection time after burn-in.
    #[serde(default)]
    pub time: f64,
    /// Events of the shocked book between injection and measurement.
    #[serde(default = "default_settle")]
    pub settle_events: usize,
    #[serde(default)]
    pub book: usize,
    /// Matched-seed pairs averaged per shock size.
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_reps() -> usize {
    1
}

fn default_impact_location() -> f64 {
    -1.0
}

fn default_settle() -> usize {
    500
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self {
            location: default_impact_location(),
            time: 0.0,
            settle_events: default_settle(),
            book: 0,
            reps: 1,
        }
    }
}

/// One row of an impact table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    #[serde(rename = "Q")]
    pub q: f64,
    pub dp: f64,
    /// Price of the shocked book at measurement in the unshocked run
    /// (averaged over replications).
    pub p_base: f64,
    pub p_shocked: f64,
}

/// Price of book `imp.book` after `settle_events` of its own events
/// following the shock time.
fn settled_price(config: &SimConfig, imp: &ImpactConfig, seed: u64) -> Result<f64> {
    let mut system = CoupledSystem::new(config, seed)?;
    let start = system.burn_in_time() + imp.time;
    let mut seen = 0usize;
    let mut started = false;
    while let Some(batch) = system.step()? {
        if !batch.contains(&imp.book) {
            continue;
        }
        let t_prev = system.grid(imp.book).times()[system.steps_taken(imp.book) - 1];
        if !started && t_prev >= start {
            started = true;
        }
        if started {
            seen += 1;
            if seen == imp.settle_events {
                return Ok(system.book(imp.book).price);
            }
        }
    }
    Err(config_err(format!(
        "clock ran out after {seen} of {} settling events; increase the horizon",
        imp.settle_events
    )))
}

/// Matched-seed price impact for each shock size.
///
/// Replication `k` uses sub-stream `k` of `seed` for both the shocked and the
/// unshocked run.
pub fn measure_impact(
    config: &SimConfig,
    imp: &ImpactConfig,
    q_values: &[f64],
    seed: u64,
) -> Result<Vec<ImpactRow>> {
    if q_values.iter().any(|q| !q.is_finite()) {
        return Err(config_err("shock sizes must be finite"));
    }
    if imp.reps == 0 {
        return Err(config_err("impact needs at least one replication"));
    }
    if imp.book >= config.books.len() {
        return Err(config_err(format!("impact targets missing book {}", imp.book)));
    }
    let mut cfg = config.clone();
    cfg.shocks.clear();
    // Enough clock for the settling window with generous slack.
    let dt_bar = cfg.base_dt()?;
    let mean_dt = cfg
        .intensities
        .get(imp.book)
        .copied()
        .flatten()
        .map_or(dt_bar, |rate| 1.0 / rate);
    cfg.horizon = cfg.horizon.max(imp.time + 1.5 * (imp.settle_events + 50) as f64 * mean_dt);
    let seeds: Vec<u64> = (0..imp.reps as u64).map(|k| replication_seed(seed, k)).collect();
    let base: Vec<f64> = seeds
        .iter()
        .map(|&s| settled_price(&cfg, imp, s))
        .collect::<Result<_>>()?;
    let p_base = base.iter().sum::<f64>() / base.len() as f64;
    q_values
        .iter()
        .map(|&q| {
            let p_shocked = if q == 0.0 {
                p_base
            } else {
                let mut shocked = cfg.clone();
                shocked.shocks.push(Shock {
                    size: q,
                    location: imp.location,
                    time: imp.time,
                    book: imp.book,
                });
                let mut total = 0.0;
                for &s in &seeds {
                    total += settled_price(&shocked, imp, s)?;
                }
                total / seeds.len() as f64
            };
            Ok(ImpactRow {
                q,
                dp: p_shocked - p_base,
                p_base,
                p_shocked,
            })
        })
        .collect()
}

/// Writes `Q,dp,p_base,p_shocked` rows.
pub fn write_impact_csv<W: Write>(rows: &[ImpactRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<impact csv>".into(),
        source,
    })?;
    Ok(())
}

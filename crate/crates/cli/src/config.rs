//! TOML run configuration. Keys follow the model's parameter names (`L`,
//! `M`, `r`, `D_alpha`, `alpha`, `nu`, `p0`, `lambda`, `mu`, `dx`, `dt`);
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coupled_lob::book::{BookParams, Coupling, CouplingForm, Shock};
use coupled_lob::calibration::CalibrationConfig;
use coupled_lob::ingest::CleanConfig;
use coupled_lob::kernel::KernelTable;
use coupled_lob::lattice::{self, DtExponent, LatticeConfig, SamplingMode};
use coupled_lob::nufft::NufftParams;
use coupled_lob::sim::{ForceParams, ImpactConfig, OffLattice, SimConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub lattice: LatticeSection,
    pub books: Books,
    pub sampling: SamplingSection,
    pub force: ForceParams,
    pub coupling: CouplingSection,
    pub simulation: SimulationSection,
    pub epps: EppsSection,
    pub impact: ImpactSection,
    pub ingest: CleanConfig,
    pub facts: FactsSection,
    pub calibration: CalibrationConfig,
    pub paths: PathsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "M")]
    pub divisions: usize,
    pub x0: Option<f64>,
    pub r: f64,
    #[serde(rename = "D_alpha")]
    pub d_alpha: f64,
    pub alpha: f64,
    pub dt_exponent: DtExponent,
    /// Optional statement of `L / M`; checked, never used.
    pub dx: Option<f64>,
    /// Optional statement of the base time step; checked, never used.
    pub dt: Option<f64>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        let l = LatticeConfig::default();
        Self {
            length: l.length,
            divisions: l.divisions,
            x0: l.x0,
            r: l.r,
            d_alpha: l.d_alpha,
            alpha: l.alpha,
            dt_exponent: l.dt_exponent,
            dx: None,
            dt: None,
        }
    }
}

impl LatticeSection {
    fn to_config(&self) -> LatticeConfig {
        LatticeConfig {
            length: self.length,
            divisions: self.divisions,
            x0: self.x0,
            r: self.r,
            d_alpha: self.d_alpha,
            alpha: self.alpha,
            dt_exponent: self.dt_exponent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Books(pub Vec<BookParams>);

impl Default for Books {
    fn default() -> Self {
        Self(vec![BookParams::default(), BookParams::default()])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub mode: SamplingMode,
    /// Clock intensities per book; missing entries use `1 / dt`.
    pub intensities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub enabled: bool,
    pub form: CouplingForm,
    pub gain: f64,
    pub eps: Option<f64>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        let c = Coupling::default();
        Self {
            enabled: true,
            form: c.form,
            gain: c.gain,
            eps: c.eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub horizon: f64,
    pub burn_in: usize,
    /// Kernel window `W`.
    #[serde(rename = "W")]
    pub kernel_window: usize,
    pub kernel_tolerance: f64,
    pub off_lattice: OffLattice,
    pub shocks: Vec<Shock>,
    /// Write every n-th post-burn-in density; `None` writes none.
    pub snapshot_every: Option<usize>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            horizon: s.horizon,
            burn_in: s.burn_in,
            kernel_window: KernelTable::DEFAULT_WINDOW,
            kernel_tolerance: KernelTable::DEFAULT_TOLERANCE,
            off_lattice: s.off_lattice,
            shocks: Vec::new(),
            snapshot_every: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EppsSection {
    pub scales: Vec<f64>,
    pub reps: usize,
    /// Highest frequency of the power spectrum.
    pub spectrum_cutoff: usize,
    pub nufft: NufftParams,
    pub null: NullSection,
}

impl Default for EppsSection {
    fn default() -> Self {
        Self {
            scales: vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            reps: 10,
            spectrum_cutoff: 100,
            nufft: NufftParams::default(),
            null: NullSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullSection {
    pub horizon: f64,
    /// Event intensity of each Brownian path.
    pub rate: f64,
}

impl Default for NullSection {
    fn default() -> Self {
        Self {
            horizon: 1000.0,
            rate: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpactSection {
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub location: f64,
    pub time: f64,
    pub settle_events: usize,
    pub book: usize,
    pub reps: usize,
}

impl Default for ImpactSection {
    fn default() -> Self {
        let i = ImpactConfig::default();
        Self {
            q: vec![0.0, 0.005, 0.01, 0.02, 0.04],
            location: i.location,
            time: i.time,
            settle_events: i.settle_events,
            book: i.book,
            reps: i.reps,
        }
    }
}

impl ImpactSection {
    pub fn to_config(&self) -> ImpactConfig {
        ImpactConfig {
            location: self.location,
            time: self.time,
            settle_events: self.settle_events,
            book: self.book,
            reps: self.reps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactsSection {
    pub max_lag: usize,
}

impl Default for FactsSection {
    fn default() -> Self {
        Self { max_lag: 20 }
    }
}

/// Input files. Relative paths resolve against the config file's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    /// Raw TAQ file for `ingest`; series for `facts`.
    pub input: Option<PathBuf>,
    /// Two series for an empirical Epps curve.
    pub epps_a: Option<PathBuf>,
    pub epps_b: Option<PathBuf>,
    /// Empirical series for `calibrate`.
    pub empirical: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.input,
            &mut cfg.paths.epps_a,
            &mut cfg.paths.epps_b,
            &mut cfg.paths.empirical,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Simulator configuration, validated. `uniform` forces constant steps.
    pub fn sim_config(&self, uniform: bool) -> Result<SimConfig> {
        let lattice = self.lattice.to_config();
        lattice.validate()?;
        if let Some(dx) = self.lattice.dx {
            let derived = lattice.length / lattice.divisions as f64;
            if (dx - derived).abs() > 1e-9 * derived {
                bail!("dx = {dx} disagrees with L / M = {derived}");
            }
        }
        if let Some(dt) = self.lattice.dt {
            let derived = lattice::base_dt(&lattice)?;
            if (dt - derived).abs() > 1e-9 * derived {
                bail!("dt = {dt} disagrees with the diffusion-limit value {derived}");
            }
        }
        let books = self.books.0.clone();
        if self.sampling.intensities.len() > books.len() {
            bail!("{} clock intensities for {} books", self.sampling.intensities.len(), books.len());
        }
        if self.sampling.intensities.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            bail!("clock intensities must be positive");
        }
        let mut intensities: Vec<Option<f64>> = self.sampling.intensities.iter().map(|&l| Some(l)).collect();
        intensities.resize(books.len(), None);
        let cfg = SimConfig {
            lattice,
            books,
            sampling: if uniform { SamplingMode::Uniform } else { self.sampling.mode },
            intensities,
            force: self.force.clone(),
            kernel_window: self.simulation.kernel_window,
            kernel_tolerance: self.simulation.kernel_tolerance,
            off_lattice: self.simulation.off_lattice,
            coupling: self.coupling.enabled.then_some(Coupling {
                form: self.coupling.form,
                gain: self.coupling.gain,
                eps: self.coupling.eps,
            }),
            burn_in: self.simulation.burn_in,
            horizon: self.simulation.horizon,
            shocks: self.simulation.shocks.clone(),
        };
        cfg.validate()?;
        if let Some(c) = &cfg.coupling {
            c.validate()?;
        }
        if self.simulation.snapshot_every == Some(0) {
            bail!("snapshot_every must be at least 1");
        }
        Ok(cfg)
    }
}

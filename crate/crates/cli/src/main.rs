mod config;

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use coupled_lob::calibration::{calibrate, SmdProblem};
use coupled_lob::correlation::{epps_curve, null_epps, power_spectrum, simulated_epps, NullCase};
use coupled_lob::facts::FactsReport;
use coupled_lob::ingest::{self, read_taq, trade_signs, write_rejects, write_taq};
use coupled_lob::sim::{
    measure_impact, read_paths_csv, replication_seed, simulate, write_impact_csv, write_paths_csv, CoupledSystem,
    PricePath,
};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "coupled-lob", version, about = "Coupled limit order book simulator and analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Constant time steps instead of exponential clocks.
    #[arg(long, global = true)]
    uniform: bool,
    /// Null-case Epps curve instead of the model.
    #[arg(long, global = true, value_enum)]
    null: Option<NullArg>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NullArg {
    Brownian,
    Identical,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the coupled books and write price paths.
    Simulate,
    /// Correlation against averaging scale, plus a power spectrum.
    Epps {
        /// Two series (TAQ or price-path CSV) for an empirical curve.
        inputs: Vec<PathBuf>,
    },
    /// Price change against shock size.
    Impact,
    /// Clean and compact a raw trade-and-quote file.
    Ingest { input: Option<PathBuf> },
    /// Stylised facts of a series, or of a fresh simulation.
    Facts { input: Option<PathBuf> },
    /// Fit (D_alpha, nu, alpha) to an empirical series.
    Calibrate { empirical: Option<PathBuf> },
}

/// Command output held in memory until every step has succeeded.
struct Output {
    name: &'static str,
    bytes: Vec<u8>,
}

struct Run {
    command: &'static str,
    seed: u64,
    config: String,
    cfg: RunConfig,
    uniform: bool,
}

impl Run {
    fn header(&self, extra: &[(&str, String)]) -> Vec<u8> {
        let mut h = format!(
            "# coupled-lob {} {}\n# master_seed: {}\n# config: {}\n",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.config
        );
        for (k, v) in extra {
            h.push_str(&format!("# {k}: {v}\n"));
        }
        h.into_bytes()
    }

    fn csv(&self, name: &'static str, extra: &[(&str, String)], body: impl FnOnce(&mut Vec<u8>) -> coupled_lob::Result<()>) -> Result<Output> {
        let mut bytes = self.header(extra);
        body(&mut bytes)?;
        Ok(Output { name, bytes })
    }

    fn json<T: Serialize>(&self, name: &'static str, body: &T) -> Result<Output> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            command: &'a str,
            version: &'a str,
            master_seed: u64,
            config: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Envelope {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            master_seed: self.seed,
            config: &self.config,
            body,
        })?;
        bytes.push(b'\n');
        Ok(Output { name, bytes })
    }

    fn sampling(&self) -> (&'static str, String) {
        let mode = if self.uniform {
            coupled_lob::lattice::SamplingMode::Uniform
        } else {
            self.cfg.sampling.mode
        };
        ("sampling", format!("{mode:?}").to_lowercase())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let run = Run {
        command: match cli.command {
            Command::Simulate => "simulate",
            Command::Epps { .. } => "epps",
            Command::Impact => "impact",
            Command::Ingest { .. } => "ingest",
            Command::Facts { .. } => "facts",
            Command::Calibrate { .. } => "calibrate",
        },
        seed: cli.seed.unwrap_or(cfg.seed),
        config: cli.config.as_ref().map_or("defaults".into(), |p| p.display().to_string()),
        cfg,
        uniform: cli.uniform,
    };
    if cli.null.is_some() && !matches!(cli.command, Command::Epps { .. }) {
        bail!("--null applies to the epps command only");
    }
    let outputs = match cli.command {
        Command::Simulate => cmd_simulate(&run)?,
        Command::Epps { inputs } => cmd_epps(&run, cli.null, inputs)?,
        Command::Impact => cmd_impact(&run)?,
        Command::Ingest { input } => cmd_ingest(&run, input)?,
        Command::Facts { input } => cmd_facts(&run, input)?,
        Command::Calibrate { empirical } => cmd_calibrate(&run, empirical)?,
    };
    write_outputs(&cli.out_dir, &outputs)
}

/// Each file goes to a temporary name first and is renamed into place.
fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for o in outputs {
        let path = dir.join(o.name);
        let tmp = dir.join(format!(".{}.tmp", o.name));
        std::fs::write(&tmp, &o.bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("cannot write {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_simulate(run: &Run) -> Result<Vec<Output>> {
    let sim = run.cfg.sim_config(run.uniform)?;
    let mut system = CoupledSystem::new(&sim, run.seed)?;
    let mut paths: Vec<PricePath> = (0..system.num_books()).map(PricePath::new).collect();
    let every = run.cfg.simulation.snapshot_every;
    let mut density = b"t,book_id,x,phi\n".to_vec();
    let mut batches = 0usize;
    while let Some(batch) = system.step()? {
        if system.clock() < system.burn_in_time() {
            continue;
        }
        let t = system.clock() - system.burn_in_time();
        for &j in &batch {
            paths[j].t.push(t);
            paths[j].p.push(system.book(j).price);
        }
        if let Some(n) = every {
            if batches % n == 0 {
                for j in 0..system.num_books() {
                    for (x, phi) in system.lattice().points().iter().zip(&system.book(j).phi) {
                        writeln!(density, "{t},{j},{x},{phi}")?;
                    }
                }
            }
        }
        batches += 1;
    }
    let mut out = vec![run.csv("paths.csv", &[run.sampling()], |w| write_paths_csv(&paths, w))?];
    if every.is_some() {
        let mut bytes = run.header(&[run.sampling()]);
        bytes.extend(density);
        out.push(Output {
            name: "density.csv",
            bytes,
        });
    }
    Ok(out)
}

/// A series from a TAQ file (log micro-prices, tick-rule trade signs) or a
/// `book_id,t,p` file (first book, tick-rule signs of the prices).
struct Series {
    path: PricePath,
    signs: Vec<f64>,
}

fn load_series(file: &Path, book_id: usize) -> Result<Series> {
    let mut text = String::new();
    File::open(file)
        .and_then(|f| BufReader::new(f).read_to_string(&mut text))
        .with_context(|| format!("cannot read {}", file.display()))?;
    let first = text.lines().find(|l| !l.starts_with('#')).unwrap_or_default();
    let cols: Vec<&str> = first.split(',').map(str::trim).collect();
    if ingest::HEADER.iter().all(|h| cols.contains(h)) {
        let (records, rejects) = read_taq(text.as_bytes())?;
        if !rejects.is_empty() {
            bail!("{}: {} malformed rows; run ingest first", file.display(), rejects.len());
        }
        let mut path = ingest::micro_price_path(&records, book_id);
        path.book_id = book_id;
        Ok(Series {
            path,
            signs: trade_signs(&records),
        })
    } else if cols == ["book_id", "t", "p"] {
        let paths = read_paths_csv(text.as_bytes()).with_context(|| format!("cannot parse {}", file.display()))?;
        let Some(mut path) = paths.into_iter().find(|p| !p.is_empty()) else {
            bail!("{} holds no prices", file.display());
        };
        path.book_id = book_id;
        let signs = ingest::tick_rule(&path.p);
        Ok(Series { path, signs })
    } else {
        bail!("{}: expected a TAQ file or a book_id,t,p price-path file", file.display())
    }
}

fn cmd_epps(run: &Run, null: Option<NullArg>, inputs: Vec<PathBuf>) -> Result<Vec<Output>> {
    let e = &run.cfg.epps;
    let inputs = match (inputs.len(), &run.cfg.paths.epps_a, &run.cfg.paths.epps_b) {
        (2, _, _) => Some((inputs[0].clone(), inputs[1].clone())),
        (0, Some(a), Some(b)) => Some((a.clone(), b.clone())),
        (0, _, _) => None,
        (n, _, _) => bail!("epps takes two input series, got {n}"),
    };
    let (curve, spectrum, mode) = if let Some(case) = null {
        if inputs.is_some() {
            bail!("--null cannot be combined with input series");
        }
        let case = match case {
            NullArg::Brownian => NullCase::Brownian,
            NullArg::Identical => NullCase::Identical,
        };
        let curve = null_epps(case, e.null.horizon, e.null.rate, &e.scales, e.reps, run.seed, &e.nufft)?;
        let (a, _) = coupled_lob::correlation::brownian_pair(0.0, e.null.horizon, e.null.rate, 1.0, replication_seed(run.seed, 0))?;
        let spectrum = power_spectrum(&a, e.spectrum_cutoff, &e.nufft)?;
        (curve, spectrum, format!("null {}", serde_json::to_value(case)?.as_str().unwrap_or_default()))
    } else if let Some((a, b)) = inputs {
        let a = load_series(&a, 0)?.path;
        let b = load_series(&b, 1)?.path;
        let curve = epps_curve(&[(a.clone(), b)], &e.scales, &e.nufft)?;
        (curve, power_spectrum(&a, e.spectrum_cutoff, &e.nufft)?, "empirical".to_string())
    } else {
        let sim = run.cfg.sim_config(run.uniform)?;
        let curve = simulated_epps(&sim, &e.scales, e.reps, run.seed, &e.nufft)?;
        let paths = simulate(&sim, replication_seed(run.seed, 0))?;
        (curve, power_spectrum(&paths[0], e.spectrum_cutoff, &e.nufft)?, "model".to_string())
    };
    let extra = [("mode", mode), ("reps", curve.reps.to_string()), run.sampling()];
    Ok(vec![
        run.csv("epps.csv", &extra, |w| curve.write_csv(w))?,
        run.csv("spectrum.csv", &extra, |w| spectrum.write_csv(w))?,
    ])
}

fn cmd_impact(run: &Run) -> Result<Vec<Output>> {
    let sim = run.cfg.sim_config(run.uniform)?;
    let imp = &run.cfg.impact;
    let rows = measure_impact(&sim, &imp.to_config(), &imp.q, run.seed)?;
    let extra = [
        ("book", imp.book.to_string()),
        ("location", imp.location.to_string()),
        ("settle_events", imp.settle_events.to_string()),
        ("reps", imp.reps.to_string()),
        run.sampling(),
    ];
    Ok(vec![run.csv("impact.csv", &extra, |w| write_impact_csv(&rows, w))?])
}

fn cmd_ingest(run: &Run, input: Option<PathBuf>) -> Result<Vec<Output>> {
    let Some(input) = input.or_else(|| run.cfg.paths.input.clone()) else {
        bail!("ingest needs an input file (argument or paths.input)");
    };
    run.cfg.ingest.validate()?;
    let file = File::open(&input).with_context(|| format!("cannot read {}", input.display()))?;
    let (records, rejects) = read_taq(BufReader::new(file))?;
    let (cleaned, mut report) = ingest::pipeline(&records, &run.cfg.ingest)?;
    report.rejected = rejects.len();
    let extra = [("input", input.display().to_string())];
    Ok(vec![
        run.csv("cleaned.csv", &extra, |w| write_taq(&cleaned, w))?,
        run.csv("rejects.csv", &extra, |w| write_rejects(&rejects, w))?,
        run.json("ingest_report.json", &report)?,
    ])
}

fn cmd_facts(run: &Run, input: Option<PathBuf>) -> Result<Vec<Output>> {
    let series = match input.or_else(|| run.cfg.paths.input.clone()) {
        Some(file) => load_series(&file, 0)?,
        None => {
            let sim = run.cfg.sim_config(run.uniform)?;
            let path = simulate(&sim, run.seed)?.swap_remove(0);
            let signs = ingest::tick_rule(&path.p);
            Series { path, signs }
        }
    };
    let returns = series.path.returns();
    let report = FactsReport::from_returns(&returns, &series.signs, run.cfg.facts.max_lag)?;
    let extra = [("observations", returns.len().to_string())];
    Ok(vec![
        run.json("facts.json", &report)?,
        run.csv("facts_acf.csv", &extra, |w| report.write_acf_csv(w))?,
        run.csv("facts_qq.csv", &extra, |w| report.write_qq_csv(w))?,
    ])
}

fn cmd_calibrate(run: &Run, empirical: Option<PathBuf>) -> Result<Vec<Output>> {
    let Some(file) = empirical.or_else(|| run.cfg.paths.empirical.clone()) else {
        bail!("calibrate needs an empirical series (argument or paths.empirical)");
    };
    let cal = &run.cfg.calibration;
    cal.validate()?;
    if !cal.bounds.contains(&cal.initial) {
        bail!("calibration.initial lies outside calibration.bounds");
    }
    let sim = run.cfg.sim_config(run.uniform)?;
    let returns = load_series(&file, 0)?.path.returns();
    let problem = SmdProblem::new(sim, returns, cal, run.seed)?;
    let result = calibrate(&problem, cal)?;
    let extra = [("empirical", file.display().to_string()), run.sampling()];
    Ok(vec![
        run.json("calibration.json", &result)?,
        run.csv("calibration_trace.csv", &extra, |w| result.write_trace_csv(w))?,
    ])
}

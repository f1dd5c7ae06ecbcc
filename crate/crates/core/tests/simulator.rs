use coupled_lob::book::{self, BookParams, Coupling, Shock};
use coupled_lob::kernel::KernelTable;
use coupled_lob::lattice::{build_lattice, Lattice, LatticeConfig, SamplingMode, TimeGrid};
use coupled_lob::sim::{
    drift_coefficient, measure_impact, simulate, stream_rng, CoupledSystem, DensityStepper, ForceMode,
    ImpactConfig, OffLattice, SimConfig,
};
use coupled_lob::Error;
use rand::Rng;

fn lattice(d_alpha: f64, alpha: f64) -> (LatticeConfig, Lattice) {
    let cfg = LatticeConfig {
        x0: Some(130.0),
        d_alpha,
        alpha,
        ..LatticeConfig::default()
    };
    let lattice = build_lattice(&cfg).unwrap();
    (cfg, lattice)
}

fn gaussian_bump(lattice: &Lattice, centre: f64, sd: f64) -> Vec<f64> {
    lattice
        .points()
        .iter()
        .map(|&x| (-(x - centre).powi(2) / (2.0 * sd * sd)).exp())
        .collect()
}

fn mass(lattice: &Lattice, phi: &[f64]) -> f64 {
    phi.iter().sum::<f64>() * lattice.dx()
}

fn spatial_variance(lattice: &Lattice, phi: &[f64]) -> f64 {
    let m: f64 = phi.iter().sum();
    let mean: f64 = phi.iter().zip(lattice.points()).map(|(p, x)| p * x).sum::<f64>() / m;
    phi.iter()
        .zip(lattice.points())
        .map(|(p, x)| p * (x - mean).powi(2))
        .sum::<f64>()
        / m
}

#[test]
fn drift_coefficient_limits() {
    assert_eq!(drift_coefficient(0.0, 0.1, 0.5, 1.0, 0.5), 0.0);
    assert_eq!(drift_coefficient(100.0, 0.1, 0.5, 1.0, 0.5), 0.5);
    assert_eq!(drift_coefficient(-100.0, 0.1, 0.5, 1.0, 0.5), -0.5);
    let f = drift_coefficient(0.3, 0.1, 0.5, 2.0, 0.5);
    assert!((f - 0.12).abs() < 1e-15);
}

#[test]
fn pure_diffusion_conserves_mass_and_spreads_at_2dt() {
    let (cfg, lattice) = lattice(0.5, 1.0);
    let dt = coupled_lob::lattice::base_dt(&cfg).unwrap();
    let phi0 = gaussian_bump(&lattice, 230.0, 2.0);
    let m0 = mass(&lattice, &phi0);
    let abs0: f64 = phi0.iter().map(|v| v.abs()).sum::<f64>() * lattice.dx();
    let v0 = spatial_variance(&lattice, &phi0);
    let kernel = KernelTable::with_defaults(1.0).unwrap();
    let mut st = DensityStepper::new(&lattice, kernel, cfg.r, 0.0, phi0).unwrap();
    for n in 1..=1000 {
        st.step(dt, cfg.dx(), 0.0, None);
        if n % 100 == 0 {
            let expected = 2.0 * cfg.d_alpha * st.time();
            let grown = spatial_variance(&lattice, st.phi()) - v0;
            assert!((grown / expected - 1.0).abs() < 0.05, "step {n}: {grown} vs {expected}");
        }
    }
    let drift = (mass(&lattice, st.phi()) - m0).abs();
    assert!(drift < 1e-8 * abs0, "mass drift {drift}");
}

#[test]
fn exponential_clock_conserves_mass() {
    let (cfg, lattice) = lattice(0.5, 1.0);
    let dt_bar = coupled_lob::lattice::base_dt(&cfg).unwrap();
    let mut rng = stream_rng(7, 0);
    let grid = TimeGrid::exponential(1.0 / dt_bar, 60.0, &cfg.diffusion_limit(), &mut rng).unwrap();
    let phi0 = gaussian_bump(&lattice, 230.0, 3.0);
    let m0 = mass(&lattice, &phi0);
    let kernel = KernelTable::with_defaults(1.0).unwrap();
    let mut st = DensityStepper::new(&lattice, kernel, cfg.r, 0.0, phi0).unwrap();
    for (dt, dx) in grid.dt().iter().zip(grid.dx()) {
        st.step(*dt, *dx, 0.0, None);
    }
    assert!((mass(&lattice, st.phi()) - m0).abs() < 1e-8 * m0);
}

#[test]
fn cancellation_only_decay_is_exponential() {
    let (cfg, lattice) = lattice(0.5, 1.0);
    let nu = 3.0;
    let phi0 = vec![0.7; lattice.len()];
    let kernel = KernelTable::with_defaults(1.0).unwrap();
    let mut st = DensityStepper::new(&lattice, kernel, cfg.r, nu, phi0).unwrap();
    let mut rng = stream_rng(3, 0);
    for _ in 0..50 {
        let dt = rng.random_range(0.01..0.2);
        st.step(dt, cfg.diffusion_limit().jump_length(dt), 0.0, None);
    }
    let expected = 0.7 * (-nu * st.time()).exp();
    // The pinned boundaries reach at most one cell further per step.
    for &v in &st.phi()[100..300] {
        assert!((v - expected).abs() < 1e-10);
    }
}

#[test]
fn flat_history_is_untouched_by_the_memory_kernel() {
    let (cfg, lattice) = lattice(0.27, 0.57);
    let kernel = KernelTable::with_defaults(0.57).unwrap();
    assert_eq!(kernel.window(), 512);
    let mut st = DensityStepper::new(&lattice, kernel, cfg.r, 0.0, vec![1.25; lattice.len()]).unwrap();
    let mut rng = stream_rng(4, 0);
    for _ in 0..80 {
        let dt = rng.random_range(0.02..0.3);
        st.step(dt, cfg.diffusion_limit().jump_length(dt), 0.0, None);
    }
    for &v in &st.phi()[150..250] {
        assert!((v - 1.25).abs() < 1e-12, "{v}");
    }
}

/// Direct transcription of the memoryless update, independent of the
/// history machinery.
fn single_step_oracle(
    points: &[f64],
    phi: &[f64],
    r: f64,
    nu: f64,
    dt: f64,
    jump: f64,
    drift: f64,
    creation: &[f64],
) -> Vec<f64> {
    let x0 = points[0];
    let dx = points[1] - points[0];
    let at = |x: f64| -> f64 {
        let s = (x - x0) / dx;
        let i = s.floor();
        let w = s - i;
        let i = i as isize;
        let get = |k: isize| {
            if k >= 0 && (k as usize) < phi.len() {
                phi[k as usize]
            } else {
                0.0
            }
        };
        (1.0 - w) * get(i) + w * get(i + 1)
    };
    let mut out: Vec<f64> = (0..phi.len())
        .map(|i| {
            let x = points[i];
            0.5 * (r + drift) * at(x - jump) + 0.5 * (r - drift) * at(x + jump) - r * phi[i]
                + (-nu * dt).exp() * phi[i]
                + creation[i] * dt
        })
        .collect();
    out[0] = 0.0;
    let last = out.len() - 1;
    out[last] = 0.0;
    out
}

#[test]
fn memoryless_update_matches_single_step_oracle() {
    let (cfg, lattice) = lattice(0.5, 1.0);
    let params = BookParams::default();
    let state = book::BookState::balanced(&lattice, params.clone()).unwrap();
    let creation = book::source_term(&lattice, 230.0, params.lambda, params.mu);
    let kernel = KernelTable::with_defaults(1.0).unwrap();
    for mode in [OffLattice::Slice, OffLattice::Latest] {
        let mut st =
            DensityStepper::with_mode(&lattice, kernel.clone(), cfg.r, params.nu, state.phi.clone(), mode).unwrap();
        let mut oracle = state.phi.clone();
        let mut rng = stream_rng(11, 0);
        for _ in 0..100 {
            let dt = rng.random_range(0.02..0.3);
            let jump = cfg.diffusion_limit().jump_length(dt);
            let drift = rng.random_range(-cfg.r..cfg.r);
            st.step(dt, jump, drift, Some(&creation));
            oracle = single_step_oracle(lattice.points(), &oracle, cfg.r, params.nu, dt, jump, drift, &creation);
            let err = st
                .phi()
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "{mode:?}: {err}");
        }
    }
}

#[test]
fn full_right_drift_moves_price_up_every_step() {
    let (cfg, lattice) = lattice(0.5, 1.0);
    let params = BookParams {
        lambda: 0.0,
        nu: 0.0,
        ..BookParams::default()
    };
    let profile = book::source_term(&lattice, 230.0, 1.0, 0.1);
    let kernel = KernelTable::with_defaults(1.0).unwrap();
    let mut st = DensityStepper::new(&lattice, kernel, cfg.r, params.nu, profile).unwrap();
    let mut price = 230.0;
    for _ in 0..40 {
        st.step(0.125, cfg.dx(), cfg.r, None);
        let next = book::extract_price(&lattice, st.phi(), price).unwrap().price;
        assert!(next > price, "{next} <= {price}");
        price = next;
    }
}

fn short(mut cfg: SimConfig, horizon: f64) -> SimConfig {
    cfg.horizon = horizon;
    cfg
}

#[test]
fn simulate_is_deterministic_in_the_seed() {
    let cfg = short(SimConfig::calibrated(), 20.0);
    let a = simulate(&cfg, 42).unwrap();
    let b = simulate(&cfg, 42).unwrap();
    assert_eq!(a, b);
    let c = simulate(&cfg, 43).unwrap();
    assert_ne!(a[0].p, c[0].p);
    for path in &a {
        assert!(path.t.windows(2).all(|w| w[1] > w[0]));
        assert!(path.p.iter().all(|p| p.is_finite()));
    }
}

#[test]
fn base_paths_stay_on_the_lattice() {
    let cfg = short(SimConfig::default(), 100.0);
    let paths = simulate(&cfg, 5).unwrap();
    assert_eq!(paths.len(), 2);
    for path in &paths {
        assert!(path.len() > 100);
        assert!(path.p.iter().all(|&p| p > 130.0 && p < 330.0));
    }
}

/// Spread sampled at book 0's events against book 1's latest price.
fn spread(paths: &[coupled_lob::sim::PricePath]) -> Vec<f64> {
    let (a, b) = (&paths[0], &paths[1]);
    let mut j = 0;
    let mut out = Vec::new();
    for (k, &t) in a.t.iter().enumerate() {
        while j + 1 < b.len() && b.t[j + 1] <= t {
            j += 1;
        }
        if b.t[j] <= t {
            out.push(a.p[k] - b.p[j]);
        }
    }
    out
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[test]
fn coupling_tames_the_spread() {
    let mut coupled = short(SimConfig::default(), 150.0);
    coupled.force.mode = ForceMode::Independent;
    let mut free = coupled.clone();
    free.coupling = None;
    for seed in [1, 2, 3] {
        let vc = variance(&spread(&simulate(&coupled, seed).unwrap()));
        let vf = variance(&spread(&simulate(&free, seed).unwrap()));
        assert!(vc < 0.25 * vf, "seed {seed}: coupled {vc} free {vf}");
    }
}

#[test]
fn deterministic_spread_never_widens_after_a_shock() {
    for coupling in [Coupling::default(), Coupling { gain: 0.25, ..Coupling::default() }] {
        let mut cfg = short(SimConfig::default(), 30.0);
        cfg.sampling = SamplingMode::Uniform;
        cfg.force.sigma_v = 0.0;
        cfg.coupling = Some(coupling);
        cfg.shocks.push(Shock {
            size: 0.02,
            location: -1.0,
            time: 1.0,
            book: 0,
        });
        let paths = simulate(&cfg, 1).unwrap();
        let gaps: Vec<f64> = paths[0].p.iter().zip(&paths[1].p).map(|(a, b)| (a - b).abs()).collect();
        let peak = gaps
            .iter()
            .enumerate()
            .fold((0, 0.0), |m, (i, &g)| if g > m.1 { (i, g) } else { m });
        assert!(peak.1 > 0.01, "shock did not open a gap");
        // The coupling switches off below a tenth of the lattice spacing.
        let eps = 0.05;
        let tail = &gaps[peak.0..];
        let settled = tail.iter().position(|&g| g < eps).expect("gap never closed");
        for w in tail[..=settled].windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "gap widened {} -> {}", w[0], w[1]);
        }
        assert!(tail[settled..].iter().all(|&g| g < eps));
    }
}

#[test]
fn shocked_gap_closes_across_seeds() {
    let mut closed = 0;
    let seeds = 20;
    for seed in 0..seeds {
        let mut cfg = short(SimConfig::default(), 120.0);
        cfg.shocks.push(Shock {
            size: 0.03,
            location: -1.0,
            time: 1.0,
            book: 0,
        });
        let mut system = CoupledSystem::new(&cfg, seed).unwrap();
        let start = system.burn_in_time() + 1.0;
        let mut peak: f64 = 0.0;
        let mut after_peak = None;
        let mut steps_since = 0usize;
        while let Some(batch) = system.step().unwrap() {
            if system.clock() < start {
                continue;
            }
            let gap = (system.book(0).price - system.book(1).price).abs();
            if batch.contains(&0) {
                steps_since += 1;
                if steps_since <= 20 {
                    peak = peak.max(gap);
                }
                if steps_since == 520 {
                    after_peak = Some(gap);
                    break;
                }
            }
        }
        if after_peak.expect("horizon too short") < peak {
            closed += 1;
        }
    }
    assert!(closed as f64 >= 0.95 * seeds as f64, "{closed}/{seeds}");
}

#[test]
fn impact_is_null_monotone_and_signed() {
    let mut cfg = short(SimConfig::default(), 10.0);
    cfg.force.sigma_v = 0.0;
    let imp = ImpactConfig {
        settle_events: 200,
        time: 1.0,
        ..ImpactConfig::default()
    };
    let qs = [-0.02, 0.0, 0.005, 0.01, 0.02, 0.04];
    let rows = measure_impact(&cfg, &imp, &qs, 9).unwrap();
    assert_eq!(rows.len(), qs.len());
    assert_eq!(rows[1].dp, 0.0);
    assert!(rows[0].dp < 0.0);
    assert!(rows[2].dp > 0.0);
    for w in rows[2..].windows(2) {
        assert!(w[1].dp >= w[0].dp, "{rows:?}");
    }
    let mut buf = Vec::new();
    coupled_lob::sim::write_impact_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("Q,dp,p_base,p_shocked\n"));
}

#[test]
fn noisy_impact_averages_to_the_shock_sign() {
    let cfg = short(SimConfig::default(), 10.0);
    let imp = ImpactConfig {
        settle_events: 200,
        reps: 6,
        ..ImpactConfig::default()
    };
    let rows = measure_impact(&cfg, &imp, &[-0.04, 0.0, 0.04], 2).unwrap();
    assert!(rows[0].dp < 0.0 && rows[2].dp > 0.0, "{rows:?}");
    assert_eq!(rows[1].dp, 0.0);
}

#[test]
fn oversized_shock_is_rejected() {
    let mut cfg = short(SimConfig::default(), 5.0);
    cfg.shocks.push(Shock {
        size: 10.0,
        location: -1.0,
        time: 0.5,
        book: 0,
    });
    assert!(matches!(simulate(&cfg, 1), Err(Error::Domain(_))));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = SimConfig::default();
    cfg.horizon = 0.0;
    assert!(matches!(simulate(&cfg, 1), Err(Error::Config(_))));
    let mut cfg = SimConfig::default();
    cfg.books.clear();
    assert!(simulate(&cfg, 1).is_err());
    let mut cfg = SimConfig::default();
    cfg.shocks.push(Shock {
        size: 0.01,
        location: 0.0,
        time: 0.0,
        book: 5,
    });
    assert!(simulate(&cfg, 1).is_err());
}

#[test]
fn paths_csv_has_header() {
    let cfg = short(SimConfig::calibrated(), 2.0);
    let paths = simulate(&cfg, 1).unwrap();
    let mut buf = Vec::new();
    coupled_lob::sim::write_paths_csv(&paths, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("book_id,t,p\n"));
    assert_eq!(text.lines().count(), 1 + paths[0].len() + paths[1].len());

    let commented = format!("# a comment\n{text}");
    let back = coupled_lob::sim::read_paths_csv(commented.as_bytes()).unwrap();
    assert_eq!(back.len(), paths.len());
    for (a, b) in back.iter().zip(&paths) {
        assert_eq!(a.book_id, b.book_id);
        assert_eq!(a.t, b.t);
        assert_eq!(a.p, b.p);
    }
    assert!(coupled_lob::sim::read_paths_csv("book_id,t,p\n0,2,1\n0,1,1\n".as_bytes()).is_err());
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use toroid_cqed::fitting::{empty_cavity_model, fit_empty_cavity, SpectrumTrace};
use toroid_cqed::geometry::{coupling_at, AtomPosition, ModeGeometry};
use toroid_cqed::master::master_equation_oracle;
use toroid_cqed::model::{
    calibrate_drive, critical_kappa_ex, eigenvalues, forward_transmission, lorentzian_halfwidth,
    lorentzian_halfwidth_approx, on_resonance_transmission, SystemParams,
};
use toroid_cqed::rng::stream;
use toroid_cqed::transit::{
    detuning_sweep, simulate_drop, AnalysisWindow, CorrelationAccumulator, HistogramAccumulator, SweepOptions,
    TransitConfig,
};
use toroid_cqed::C64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn paper_system() -> SystemParams {
    SystemParams::critical_from_total(17.9, 4.9, 2.6).unwrap()
}

fn closed_form_equivalence() -> Outcome {
    let mut rng = stream(1, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let ki = rng.random_range(1.0..30.0);
        let h = rng.random_range(0.0..15.0);
        let gamma = rng.random_range(0.5..10.0);
        let g = C64::from_polar(rng.random_range(1.0..80.0), rng.random_range(0.0..2.0 * PI));
        let dac = rng.random_range(-100.0..100.0);
        let p = SystemParams::critical(ki, h, gamma).unwrap().with_coupling(g).probe_at_cavity(dac);
        let solver = forward_transmission(&p).unwrap();
        let closed = on_resonance_transmission(g, h, ki, p.kappa_ex, gamma, dac).unwrap();
        worst = worst.max((solver - closed).abs() / closed);
    }
    outcome(worst <= 1e-10, format!("max relative difference {worst:.2e} over 1000 sets"))
}

fn critical_zero() -> Outcome {
    let mut worst: f64 = 0.0;
    for (ki, h) in [(8.28, 4.9), (12.0, 0.0), (3.0, 20.0), (25.0, 7.5)] {
        let p = SystemParams::critical(ki, h, 2.6).unwrap();
        assert_eq!(p.kappa_ex, critical_kappa_ex(ki, h).unwrap());
        worst = worst.max(forward_transmission(&p).unwrap());
    }
    outcome(worst <= 1e-24, format!("max T_F = {worst:.2e}"))
}

fn eigenvalue_check() -> Outcome {
    let (ki, _) = toroid_cqed::model::critical_split(18.0, 5.0).unwrap();
    let p = SystemParams::critical(ki, 5.0, 2.6)
        .unwrap()
        .with_coupling(C64::from_polar(50.0 / SQRT_2, FRAC_PI_4))
        .probe_at_cavity(0.0);
    let e = eigenvalues(&p).unwrap();
    let split = e.modes[2].value.re - e.modes[0].value.re;
    let middle = e.modes[1].value.re;
    let pass = (split / 100.0 - 1.0).abs() < 0.05 && middle.abs() < 5.0;
    outcome(pass, format!("splitting {split:.2} MHz (2g0 = 100), central branch at {middle:.3} MHz"))
}

/// Upper half-maximum detuning of `T_F(Δ_AC)` by bracketing and bisection.
fn scanned_halfwidth(p: &SystemParams) -> f64 {
    let t = |d: f64| forward_transmission(&p.probe_at_cavity(d)).unwrap();
    let grid: Vec<f64> = (0..=4000).map(|k| -400.0 + 0.2 * k as f64).collect();
    let peak_at = grid.iter().copied().max_by(|a, b| t(*a).total_cmp(&t(*b))).unwrap();
    let (mut lo, mut hi) = (peak_at - 0.2, peak_at + 0.2);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if t(m1) < t(m2) { lo = m1 } else { hi = m2 }
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * t(center);
    let (mut a, mut b) = (center, center + 1000.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if t(m) > half { a = m } else { b = m }
    }
    0.5 * (a + b)
}

fn width_law() -> Outcome {
    let base = paper_system();
    let kappa = base.kappa();
    let mut worst: f64 = 0.0;
    for kx in [0.0, FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8] {
        let g = C64::from_polar(50.0 / SQRT_2, kx);
        let scanned = scanned_halfwidth(&base.with_coupling(g));
        let law = lorentzian_halfwidth(g, base.h, kappa, base.gamma);
        worst = worst.max((scanned / law - 1.0).abs());
    }
    let approx = lorentzian_halfwidth_approx(50.0, 17.9);
    // at kx = π/4 the law reduces to γ + g0² κ/(h² + κ²)
    let exact = lorentzian_halfwidth(C64::from_polar(50.0 / SQRT_2, FRAC_PI_4), base.h, kappa, base.gamma);
    let correction = base.gamma + approx * base.h * base.h / (base.h * base.h + kappa * kappa);
    let pass = worst <= 1e-4 && (approx - 139.7).abs() < 0.05 && (exact - approx).abs() <= correction;
    outcome(
        pass,
        format!(
            "scan vs law max rel {worst:.1e}; g0^2/kappa = {approx:.2}; exact {exact:.2} differs by {:.2} <= {correction:.2}",
            (exact - approx).abs()
        ),
    )
}

fn coupling_distance() -> Outcome {
    let geom = ModeGeometry::default();
    let reduced = geom.decay_length_nm();
    let g = coupling_at(&geom, &AtomPosition::new(45.0, 0.0, 0.0)).unwrap().magnitude();
    let pass = (reduced - 135.6).abs() < 0.1 && geom.g0_surface == 70.0 && (g - 50.2).abs() < 0.05 && (g - 50.0).abs() <= 12.0;
    outcome(pass, format!("decay length {reduced:.2} nm, g(45 nm) = {g:.2} MHz"))
}

fn master_oracle() -> Outcome {
    let empty = paper_system();
    let mut worst: f64 = 0.0;
    for (kx, dac, delta) in [(0.0, 0.0, 0.0), (FRAC_PI_4, 0.0, 0.0), (FRAC_PI_8, 20.0, 0.0), (FRAC_PI_4, 0.0, 30.0)] {
        let drive = calibrate_drive(&empty, 0.003).unwrap();
        let p = empty
            .with_coupling(C64::from_polar(50.0 / SQRT_2, kx))
            .probe_at_cavity(dac)
            .with_probe_detuning(delta)
            .with_drive(drive);
        let me = master_equation_oracle(&p, 4).unwrap();
        let lin = forward_transmission(&p).unwrap();
        worst = worst.max((me.transmission / lin - 1.0).abs());
    }
    let strong = empty
        .with_coupling(C64::from_polar(50.0 / SQRT_2, FRAC_PI_4))
        .with_drive(calibrate_drive(&empty, 0.3).unwrap());
    let pe = master_equation_oracle(&strong, 4).unwrap().excited_population;
    outcome(worst <= 0.01 && pe < 0.05, format!("weak-drive max rel {worst:.2e}; excited population {pe:.4} at n0 = 0.3"))
}

fn fit_round_trip() -> Outcome {
    let cases = [(8.28, 9.62, 4.9), (12.0, 5.9, 4.9), (14.0, 4.0, 20.0)];
    // a scope trace: 4001 points over ±80 MHz
    let grid: Vec<f64> = (0..4001).map(|k| -80.0 + 0.04 * k as f64).collect();
    let mut clean_worst: f64 = 0.0;
    let mut noisy_worst: f64 = 0.0;
    let noise = Normal::new(0.0, 0.01).unwrap();
    for (i, &(ki, kex, h)) in cases.iter().enumerate() {
        let clean: Vec<f64> = grid.iter().map(|&d| empty_cavity_model(ki, kex, h, d)).collect();
        let err = |f: &toroid_cqed::fitting::FitResult| {
            [("kappa_i", ki), ("kappa_ex", kex), ("h", h)].iter().map(|(n, v)| (f.value(n) / v - 1.0).abs()).fold(0.0, f64::max)
        };
        let f = fit_empty_cavity(&SpectrumTrace::new(grid.clone(), clean.clone(), None).unwrap(), None).unwrap();
        clean_worst = clean_worst.max(err(&f));
        for seed in 0..5 {
            let mut rng = stream(7, (i * 10 + seed) as u64);
            let t: Vec<f64> = clean.iter().map(|v| v * (1.0 + noise.sample(&mut rng))).collect();
            let sigma = t.iter().map(|v| 0.01 * v + 1e-6).collect();
            match fit_empty_cavity(&SpectrumTrace::new(grid.clone(), t, Some(sigma)).unwrap(), None) {
                Ok(f) => noisy_worst = noisy_worst.max(err(&f)),
                Err(_) => noisy_worst = f64::INFINITY,
            }
        }
    }
    outcome(
        clean_worst <= 1e-5 && noisy_worst <= 0.02,
        format!("noiseless max rel {clean_worst:.1e}; 1% noise max rel {noisy_worst:.4} (15 traces)"),
    )
}

fn sweep_morphology() -> Outcome {
    let cfg = TransitConfig::new(paper_system());
    let options = SweepOptions {
        detunings: (0..9).map(|k| 5.0 * k as f64).collect(),
        drops_per_point: 2000,
        baseline_drops: 500,
        thresholds: (4..=9).collect(),
        seed: 2007,
        window: AnalysisWindow::all(),
    };
    let g0m = [35.0, 50.0, 65.0];
    let curves: Vec<_> = g0m.iter().map(|&g| detuning_sweep(&cfg, g, &options).unwrap()).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (j, c0) in options.thresholds.iter().enumerate() {
        let widths: Vec<Option<(f64, f64)>> = curves.iter().map(|c| c[j].half_width().ok()).collect();
        let Some(widths) = widths.into_iter().collect::<Option<Vec<_>>>() else {
            pass = false;
            detail.push(format!("C0={c0}: unresolved width"));
            continue;
        };
        let increasing = widths.windows(2).all(|w| w[1].0 > w[0].0);
        let sigma: Vec<f64> = widths.windows(2).map(|w| (w[1].0 - w[0].0) / w[0].1.hypot(w[1].1)).collect();
        pass &= increasing;
        if *c0 == 6 {
            pass &= sigma.iter().all(|&s| s >= 3.0);
            detail.push(format!(
                "C0=6 widths {:.1}/{:.1}/{:.1} MHz, steps {:.1}σ and {:.1}σ",
                widths[0].0, widths[1].0, widths[2].0, sigma[0], sigma[1]
            ));
        } else if !increasing {
            detail.push(format!("C0={c0} not monotone"));
        }
    }
    detail.push("ordering checked for C0 = 4..9".into());
    outcome(pass, detail.join("; "))
}

/// Largest `|P̂(C) − P(C)|` in multinomial standard errors over `C = 0..3`
/// and `C ≥ 4`, against a Poisson law with the same mean.
fn poisson_deviation(h: &toroid_cqed::transit::CountHistogram) -> f64 {
    let n = h.total_bins as f64;
    (0..=4)
        .map(|c| {
            let (p, q) = if c < 4 {
                (h.probabilities.get(c).copied().unwrap_or(0.0), h.poisson[c])
            } else {
                (h.tail(4), h.poisson_tail(4))
            };
            (p - q).abs() / (q * (1.0 - q) / n).sqrt()
        })
        .fold(0.0, f64::max)
}

fn counting_statistics() -> Outcome {
    let cfg = TransitConfig::new(paper_system()).with_max_coupling(50.0);
    let histogram = |cfg: &TransitConfig, half_width_ms: f64| {
        let window = AnalysisWindow::centered(cfg.cloud.mean_arrival_ms(), half_width_ms);
        let drops: Vec<_> = (0..100u64).into_par_iter().map(|d| simulate_drop(cfg, 2007, d).unwrap()).collect();
        let mut acc = HistogramAccumulator::default();
        drops.iter().for_each(|d| acc.add(&d.counts, &window));
        acc.finish().unwrap()
    };
    let mut empty = cfg;
    empty.cloud.mean_transits_per_drop = 0.0;
    // central 2 ms of the arrival distribution
    let none = histogram(&empty, 1.0);
    let mean_z = (none.mean - cfg.detection.background_mean) / (cfg.detection.background_mean / none.total_bins as f64).sqrt();
    let worst_z = poisson_deviation(&none);
    let wide_z = poisson_deviation(&histogram(&empty, 2.0));
    let with = histogram(&cfg, 1.0);
    let ratio = with.tail(4) / with.poisson_tail(4);
    let significance = (with.tail(4) - with.poisson_tail(4)) / with.tail_error(4);
    let pass = worst_z <= 3.0 && mean_z.abs() <= 3.0 && ratio >= 10.0 && significance >= 5.0;
    outcome(
        pass,
        format!(
            "no atoms: mean {:.4}, max |z| = {worst_z:.2} vs Poisson (±2 ms: {wide_z:.2}); atoms: P(C>=4) {ratio:.1}x Poisson at {significance:.1} sigma",
            none.mean
        ),
    )
}

fn correlation_profile() -> Outcome {
    let cfg = TransitConfig::new(paper_system()).with_max_coupling(50.0);
    let window = AnalysisWindow::centered(cfg.cloud.mean_arrival_ms(), 3.0);
    let drops: Vec<_> = (0..100u64).into_par_iter().map(|d| simulate_drop(&cfg, 2007, d).unwrap()).collect();
    let mut acc = CorrelationAccumulator::new(30.0, cfg.detection.bin_dt_us).unwrap();
    for d in &drops {
        acc.add(&d.counts, &window).unwrap();
    }
    let gamma = acc.finish().unwrap();
    let mid = gamma.gamma.len() / 2;
    let peak_at_zero = gamma.gamma.iter().enumerate().all(|(k, &g)| k == mid || g < gamma.gamma[mid]);
    let baseline = gamma.baseline(10.0).unwrap_or(f64::NAN);
    let fwhm = gamma.fwhm_us(baseline).unwrap_or(f64::NAN);
    let pass = peak_at_zero && (2.0..=3.0).contains(&fwhm) && (baseline - 1.0).abs() <= 0.02;
    outcome(pass, format!("Gamma(0) = {:.2}, FWHM {fwhm:.2} us, baseline {baseline:.4}", gamma.gamma[mid]))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_toroid-cqed"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(
        root.join("run.toml"),
        "seed = 99\n[drop]\ndrops = 16\n[sweep]\ndetunings = [0.0, 10.0, 20.0]\ndrops = 24\nbaseline_drops = 8\nc0 = [4, 6, 8]\n\
         [sweep.theory_grid]\nnx = 8\nnrho = 6\nnz = 4\n",
    )
    .unwrap();
    let mut compared = 0;
    for cmd in ["spectrum", "eigen", "drop", "sweep"] {
        let mut runs = Vec::new();
        for (k, jobs) in ["1", "4", "4", "2"].iter().enumerate() {
            let out = format!("{cmd}-{k}");
            if let Err(e) = run_cli(root, &["-c", "run.toml", "--jobs", jobs, "-o", &out, cmd]) {
                return outcome(false, format!("{cmd} failed: {e}"));
            }
            runs.push(snapshot(&root.join(out)));
        }
        if runs.iter().any(|r| r != &runs[0]) {
            return outcome(false, format!("{cmd} output differs between runs"));
        }
        compared += runs[0].len();
    }
    outcome(true, format!("{compared} files byte-identical across --jobs 1, 2, 4 and repeated runs"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<f64>); 11] = [
        ("closed-form equivalence", closed_form_equivalence, Some(1.0)),
        ("critical-coupling zero", critical_zero, Some(1.0)),
        ("eigenvalue splitting", eigenvalue_check, None),
        ("half-width law", width_law, Some(1.0)),
        ("coupling at 45 nm", coupling_distance, None),
        ("master-equation oracle", master_oracle, Some(30.0)),
        ("fit round trip", fit_round_trip, Some(10.0)),
        ("sweep morphology", sweep_morphology, None),
        ("counting statistics", counting_statistics, Some(60.0)),
        ("correlation profile", correlation_profile, None),
        ("determinism", determinism, None),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check, budget_s)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let mut result = check();
        let elapsed: Duration = start.elapsed();
        if let Some(limit) = budget_s.filter(|&l| elapsed.as_secs_f64() > l) {
            result.pass = false;
            result.detail += &format!("; over the {limit} s budget");
        }
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {} [{:.2} s]", i + 1, result.detail, elapsed.as_secs_f64());
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

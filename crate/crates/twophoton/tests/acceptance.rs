//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twophoton::core::bench::{
    sample_counts, scan, visibility_ladder, MeasurementSetting, ScanParameter, ScanSpec, Selection, DEFAULT_RATE_SCALE,
};
use twophoton::core::config::COMPENSATION_SLOPE;
use twophoton::core::numeric::derive_seed;
use twophoton::core::qmath::{bell_phi_plus, c3, delta_plus, fidelity, trace_distance, xi4, CMatrix, CVector, DensityMatrix, Ket};
use twophoton::core::slm::{linear_mask, ContinuousMask, LinearParams};
use twophoton::core::spdc::{Resolution, SectorConfig, Source};
use twophoton::core::tomo::{linear_invert, mle_reconstruct, psd_projection, simulate_counts, MleOptions, TomoData, TomoProtocol};
use twophoton::core::{Complex64, PhysicalConfig};
use twophoton::formats::parse_scan_csv;
use twophoton::{run, Command, RunOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn opts(out: &Path, seed: u64) -> RunOptions {
    RunOptions { seed: Some(seed), out: out.to_path_buf(), ..Default::default() }
}

/// a-pair scan of the calibrated source on the default 21-point grid.
fn a_scan_minimum() -> Outcome {
    let cfg = PhysicalConfig::default();
    let src = Source::new(cfg, Resolution::default()).unwrap();
    let (start, stop, steps) = (-0.1, 0.0, 21);
    let half = (stop - start) / (steps - 1) as f64 / 2.0;
    let spec = ScanSpec {
        parameter: ScanParameter::APair,
        start,
        stop,
        steps,
        base: cfg.optimal_mask_params(),
        setting: MeasurementSetting::anti_diagonal(),
        seed: 1,
    };
    let pts = scan(&src, &spec).unwrap();
    let best = pts.iter().min_by(|a, b| a.rate.total_cmp(&b.rate)).unwrap().value;
    let err = (best - COMPENSATION_SLOPE).abs();
    outcome(err <= half + 1e-12, format!("minimum at a = {best:.4} (target {COMPENSATION_SLOPE}, tol {half})"))
}

/// b1 scan through the CLI; the emitted CSV must follow the sinusoid.
fn b_scan_closed_form(dir: &Path) -> Outcome {
    let out = dir.join("b_scan");
    run(&Command::Scan { parameter: Some(ScanParameter::B1) }, &opts(&out, 5)).unwrap();
    let text = std::fs::read_to_string(out.join("scan_b1.csv")).unwrap();
    let pts = parse_scan_csv(&text).unwrap();

    let cfg = PhysicalConfig::default();
    let src = Source::new(cfg, Resolution::default()).unwrap();
    let base = cfg.optimal_mask_params();
    let c0 = src.coherence(&linear_mask(&cfg, LinearParams { b1: 0.0, ..base })).unwrap().value;
    let (v, b0) = (c0.norm(), c0.arg());
    let worst = pts
        .iter()
        .map(|p| (p.rate - DEFAULT_RATE_SCALE * (1.0 - v * (p.value - b0).cos()) / 4.0).abs())
        .fold(0.0, f64::max);
    let best = pts.iter().min_by(|a, b| a.rate.total_cmp(&b.rate)).unwrap().value;
    let h = pts[1].value - pts[0].value;
    let sum_err = (best + base.b2 - cfg.phi0).abs();
    outcome(
        pts.len() == 37 && worst < 1e-8 && sum_err <= h / 2.0 + 1e-12,
        format!("{} points, max deviation {worst:.2e}, b1+b2 = {:.4} vs phi0 = {:.4}", pts.len(), best + base.b2, cfg.phi0),
    )
}

fn ladder() -> Outcome {
    let cfg = PhysicalConfig::default();
    let l = visibility_ladder(&cfg, Resolution::default(), &cfg.optimal_mask_params()).unwrap();
    let got = [l.uncompensated, l.delay_compensated, l.slm];
    let want = [0.423, 0.616, 0.886];
    let close = got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.05);
    outcome(
        close && l.slm >= 0.88 && l.is_strictly_increasing(),
        format!("V = {:.4} / {:.4} / {:.4}", got[0], got[1], got[2]),
    )
}

fn scaled_pixels(d: f64) -> PhysicalConfig {
    let s = 0.1 / d;
    PhysicalConfig {
        pixel_width_mm: d,
        pixel_count: (640.0 * s) as usize,
        idler_center_pixel: (160.0 * s) as usize,
        signal_center_pixel: (480.0 * s) as usize,
        ..PhysicalConfig::ideal()
    }
}

fn ideal_limit() -> Outcome {
    let cfg = PhysicalConfig::ideal();
    let p = cfg.optimal_mask_params();
    let src = Source::new(cfg, Resolution::default()).unwrap();
    let v = src.coherence(&ContinuousMask(p)).unwrap().visibility();
    let sectors = SectorConfig::uniform(&cfg, 1, 2).unwrap().with_idler_phases(&[0.0, PI]).unwrap();
    let f_cont = fidelity(&src.synthesize(&ContinuousMask(p), &sectors).unwrap().rho, &c3()).unwrap();
    let f_pix = fidelity(&src.synthesize(&linear_mask(&cfg, p), &sectors).unwrap().rho, &c3()).unwrap();

    let mut halving = Vec::new();
    for d in [0.2, 0.1, 0.05] {
        let cfg = scaled_pixels(d);
        let src = Source::new(cfg, Resolution::square(256)).unwrap();
        halving.push(src.coherence(&linear_mask(&cfg, cfg.optimal_mask_params())).unwrap().visibility());
    }
    let monotone = halving.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    outcome(
        v >= 0.999 && f_cont >= 0.999 && f_cont - f_pix < 0.01 && monotone,
        format!(
            "V = {v:.6}, F(C3) = {f_cont:.6}, pixelated {f_pix:.6}, V over d = 0.2/0.1/0.05 mm: {:.6} / {:.6} / {:.6}",
            halving[0], halving[1], halving[2]
        ),
    )
}

/// Per-region tomography of the cluster source, averaged over seeds.
fn slit_fidelities() -> Outcome {
    let cfg = PhysicalConfig::default();
    let src = Source::new(cfg, Resolution::default()).unwrap();
    let sectors = SectorConfig::uniform(&cfg, 2, 1).unwrap().with_signal_phases(&[0.0, PI]).unwrap();
    let js = src.synthesize(&linear_mask(&cfg, cfg.optimal_mask_params()), &sectors).unwrap();
    let protocol = TomoProtocol::canonical();
    let template = MeasurementSetting::anti_diagonal().with_window(60.0).with_rate_scale(DEFAULT_RATE_SCALE);
    let seeds = 20;
    let mut mean = [0.0; 2];
    for seed in 0..seeds {
        for (n, slot) in mean.iter_mut().enumerate() {
            let sel = Selection { signal_sector: Some(n), idler_sector: None };
            let rec = simulate_counts(&protocol, &js, sel, &template, derive_seed(seed, n as u64)).unwrap();
            let res = mle_reconstruct(&protocol, &TomoData::from_records(&rec).unwrap(), &MleOptions::default()).unwrap();
            let phase = if n == 0 { 0.0 } else { PI };
            *slot += fidelity(&res.rho_mle, &delta_plus(phase)).unwrap() / seeds as f64;
        }
    }
    outcome(
        (mean[0] - 0.92).abs() <= 0.05 && (mean[1] - 0.90).abs() <= 0.05,
        format!("F0 = {:.4}, F1 = {:.4} over {seeds} seeds", mean[0], mean[1]),
    )
}

/// `C_phi (|Phi+> (x) |+>|+>)` assembled from explicit gate matrices.
fn controlled_phase_oracle(phi_s: [f64; 2], phi_i: [f64; 2]) -> CVector {
    let basis = |k: usize| CMatrix::from_fn(2, 2, |r, col| if r == k && col == k { c(1.0) } else { c(0.0) });
    let id = CMatrix::identity(2, 2);
    let diag = |p: [f64; 2]| CMatrix::from_fn(2, 2, |r, col| if r == col { Complex64::from_polar(1.0, p[r]) } else { c(0.0) });
    // Gate on (pol_s, pol_i, mom_s, mom_i): the phase applies to H only.
    let gate_s = basis(0).kronecker(&id).kronecker(&diag(phi_s)).kronecker(&id)
        + basis(1).kronecker(&id).kronecker(&id).kronecker(&id);
    let gate_i = id.kronecker(&basis(0)).kronecker(&id).kronecker(&diag(phi_i))
        + id.kronecker(&basis(1)).kronecker(&id).kronecker(&id);
    let bell = CVector::from_vec(vec![c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)]);
    let plus = CVector::from_vec(vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]);
    let input = bell.kronecker(&plus).kronecker(&plus);
    gate_i * gate_s * input
}

fn xi4_equivalence() -> Outcome {
    let cfg = PhysicalConfig::ideal();
    let src = Source::new(cfg, Resolution::default()).unwrap();
    let mask = ContinuousMask(cfg.optimal_mask_params());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut amp, mut infid) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let (p0i, p1s): (f64, f64) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let (sig, idl) = ([-p0i, p1s], [p0i, PI - p1s]);
        let oracle = controlled_phase_oracle(sig, idl);
        let diff = (xi4(p0i, p1s).amplitudes() - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
        amp = amp.max(diff);
        let s = SectorConfig::uniform(&cfg, 2, 2).unwrap().with_signal_phases(&sig).unwrap().with_idler_phases(&idl).unwrap();
        let js = src.synthesize(&mask, &s).unwrap();
        infid = infid.max(1.0 - fidelity(&js.rho, &Ket::from_vector(oracle)).unwrap());
    }
    outcome(
        amp < 1e-10 && infid < 1e-10,
        format!("max amplitude deviation {amp:.2e}, max synthesized infidelity {infid:.2e}"),
    )
}

fn random_ket(rng: &mut ChaCha8Rng) -> Ket {
    let v: Vec<Complex64> = (0..4).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    Ket::new(v).unwrap().normalized().unwrap()
}

fn random_density(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let a = CMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).unwrap()
}

fn tomography() -> Outcome {
    let protocol = TomoProtocol::canonical();
    let mut bi = 0.0f64;
    for (j, d) in protocol.dual_basis().iter().enumerate() {
        for (k, p) in protocol.projectors().iter().enumerate() {
            let t = (d * p.matrix()).trace();
            bi = bi.max((t - c(if j == k { 1.0 } else { 0.0 })).norm());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut round = 0.0f64;
    for _ in 0..100 {
        let rho = random_density(&mut rng);
        let probs = protocol.probabilities(rho.matrix());
        let norm: f64 = protocol.normalization_group().iter().map(|&k| probs[k]).sum();
        let freqs: Vec<f64> = probs.iter().map(|p| p / norm).collect();
        let back = linear_invert(&protocol, &freqs).unwrap();
        round = round.max(trace_distance(&back, rho.matrix()));
    }

    // Mean 1e4 counts per setting: the 16 probabilities sum to 4.
    let total = 4.0e4;
    let trial = |ket: &Ket, seed: u64| {
        let rho = ket.density().unwrap();
        let counts = protocol
            .probabilities(rho.matrix())
            .iter()
            .enumerate()
            .map(|(k, p)| sample_counts(total * p.max(0.0), 1.0, derive_seed(seed, k as u64)).unwrap())
            .collect();
        let res = mle_reconstruct(&protocol, &TomoData::uniform(counts, 1.0).unwrap(), &MleOptions::default()).unwrap();
        let monotone = res.history.windows(2).all(|w| w[1] >= w[0]);
        let physical = res.rho_mle.eigenvalues().iter().all(|&e| e >= -1e-12)
            && (res.rho_mle.matrix().trace() - c(1.0)).norm() <= 1e-9;
        let f = fidelity(&res.rho_mle, ket).unwrap();
        let f_lin = fidelity(&psd_projection(&res.rho_linear).unwrap(), ket).unwrap();
        (monotone && physical, f, f >= f_lin)
    };
    let (mut ok, mut bell_min, mut refined) = (true, 1.0f64, 0);
    for seed in 0..100u64 {
        let (good, f, better) = trial(&bell_phi_plus(), seed);
        ok &= good;
        bell_min = bell_min.min(f);
        refined += usize::from(better);
    }
    // Generic pure states converge as 1/sqrt(N) under this non-adaptive
    // protocol, so only their mean is held to the same bar.
    let (mut rand_min, mut rand_mean) = (1.0f64, 0.0);
    for seed in 0..100u64 {
        let ket = random_ket(&mut rng);
        let (good, f, better) = trial(&ket, 1000 + seed);
        ok &= good;
        refined += usize::from(better);
        rand_min = rand_min.min(f);
        rand_mean += f / 100.0;
    }
    outcome(
        bi < 1e-10 && round <= 1e-10 && ok && bell_min >= 0.99 && rand_mean >= 0.99 && refined >= 180,
        format!(
            "biorthogonality {bi:.1e}, round trip {round:.1e}, monotone and physical {ok}, \
             Phi+ F min {bell_min:.5}, random pure F mean {rand_mean:.4} min {rand_min:.4}, MLE >= linear on {refined}/200"
        ),
    )
}

fn files_except_manifest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

fn reproducible(dir: &Path) -> Outcome {
    let cmds = [Command::Purify, Command::Scan { parameter: None }, Command::Cluster, Command::Tomo { counts: None }];
    let mut bad = Vec::new();
    for cmd in &cmds {
        let a = dir.join(format!("{}_a", cmd.name()));
        let b = dir.join(format!("{}_b", cmd.name()));
        let other = dir.join(format!("{}_c", cmd.name()));
        run(cmd, &opts(&a, 99)).unwrap();
        run(cmd, &opts(&b, 99)).unwrap();
        run(cmd, &opts(&other, 100)).unwrap();
        let (fa, fb, fc) = (files_except_manifest(&a), files_except_manifest(&b), files_except_manifest(&other));
        if fa != fb || fa == fc {
            bad.push(cmd.name());
        }
    }
    let detail = if bad.is_empty() {
        "purify, scan, cluster, tomo identical under a fixed seed and distinct across seeds".to_string()
    } else {
        format!("not reproducible: {}", bad.join(", "))
    };
    outcome(bad.is_empty(), detail)
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t = Instant::now();
    let mut o = f();
    let dt = t.elapsed();
    if let Some(limit) = limit {
        if dt > limit {
            o.pass = false;
            o.detail.push_str(&format!(" (exceeded {limit:?})"));
        }
    }
    (o, dt)
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        ("1 a-scan minimum", timed(secs(10), a_scan_minimum)),
        ("2 b-scan closed form", timed(None, || b_scan_closed_form(d))),
        ("3 visibility ladder", timed(secs(30), ladder)),
        ("4 ideal and pixelation limits", timed(None, ideal_limit)),
        ("5 slit tomography fidelities", timed(secs(300), slit_fidelities)),
        ("6 four-qubit state equivalence", timed(None, xi4_equivalence)),
        ("7 tomography", timed(None, tomography)),
        ("8 reproducibility", timed(None, || reproducible(d))),
    ];
    let mut failed = 0;
    for (name, (o, dt)) in &results {
        println!("{} criterion {name}: {} [{:.2}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, dt.as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! The subcommands. Each is a pure function of (config, seed) apart from the
//! manifest timestamp, and writes everything it produces into `out`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;
use twophoton_core::bench::{
    self, contrast, ladder_states, optimize_mask, purified_state, sampled_fringe, scan, visibility_measurement,
    MeasurementSetting, Objective, ScanParameter, ScanSpec, Selection,
};
use twophoton_core::numeric::derive_seed;
use twophoton_core::qmath::{c3, delta_plus, fidelity, xi4, Ket};
use twophoton_core::slm::{linear_mask, with_sector_offsets, LinearParams};
use twophoton_core::spdc::{JointState, SectorConfig, Source};
use twophoton_core::tomo::{mle_reconstruct, simulate_counts, Spread, TomoData, TomoProtocol, TomoResult};
use twophoton_core::Error as CoreError;

use crate::conf::{scan_parameter_name, ObjectiveKind, RunConfig};
use crate::error::CliError;
use crate::formats::{self, CountsRow, DensityJson};
use crate::manifest::Manifest;

// Stream indices under the master seed; one per stochastic stage.
const STREAM_SEARCH: u64 = 1;
const STREAM_B_SCAN: u64 = 2;
const STREAM_A_SCAN: u64 = 3;
const STREAM_FRINGE: u64 = 4;
const STREAM_SCAN: u64 = 5;
const STREAM_TOMO_COUNTS: u64 = 10;
const STREAM_BOOTSTRAP: u64 = 11;
const STREAM_REGION: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Purify,
    Scan { parameter: Option<ScanParameter> },
    Cluster,
    Tomo { counts: Option<PathBuf> },
    Report { counts: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Purify => "purify",
            Command::Scan { .. } => "scan",
            Command::Cluster => "cluster",
            Command::Tomo { .. } => "tomo",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub steps: Option<usize>,
    pub windows: Option<String>,
    pub sectors: Option<String>,
}

impl RunOptions {
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.steps {
            cfg.apply_steps(s)?;
        }
        if let Some(w) = &self.windows {
            cfg.apply_windows(w)?;
        }
        if let Some(s) = &self.sectors {
            cfg.apply_sectors(s)?;
        }
        Ok(cfg)
    }
}

/// Files written by a run, relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Run one command. Outputs and the manifest are written even when the
/// command ends in non-convergence, so the best iterate is on disk.
pub fn run(cmd: &Command, opts: &RunOptions) -> Result<Outputs, CliError> {
    let cfg = opts.resolve_config()?;
    let seed = opts
        .seed
        .ok_or_else(|| CliError::Config(format!("'{}' is stochastic; pass --seed", cmd.name())))?;
    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))?;
    let mut out = Outputs { dir: opts.out.clone(), files: Vec::new() };
    let status = match cmd {
        Command::Purify => purify(&cfg, seed, &mut out),
        Command::Scan { parameter } => scan_cmd(&cfg, parameter.unwrap_or(cfg.scan.parameter), seed, &mut out),
        Command::Cluster => cluster(&cfg, seed, &mut out),
        Command::Tomo { counts } => {
            let counts = counts.clone().or_else(|| cfg.tomo.counts_file.clone());
            tomo_cmd(&cfg, counts.as_deref(), seed, &mut out)
        }
        Command::Report { counts } => tomo_cmd(&cfg, Some(counts), seed, &mut out),
    };
    if let Err(e) = &status {
        if !matches!(e, CliError::NotConverged(_)) {
            return Err(status.unwrap_err());
        }
    }
    let manifest = Manifest::new(cmd.name(), opts.config.as_deref(), seed, &opts.out, out.files.clone());
    out.write("manifest.json", &formats::to_json(&manifest)?)?;
    status.map(|_| out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamsJson {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl From<LinearParams> for ParamsJson {
    fn from(p: LinearParams) -> Self {
        ParamsJson { a1: p.a1, b1: p.b1, a2: p.a2, b2: p.b2 }
    }
}

#[derive(Debug, Serialize)]
struct LadderJson {
    uncompensated: f64,
    delay_compensated: f64,
    slm: f64,
    strictly_increasing: bool,
}

#[derive(Debug, Serialize)]
struct PurifyReport {
    objective: &'static str,
    converged: bool,
    iterations: usize,
    optimal: ParamsJson,
    analytic: ParamsJson,
    b_sum: f64,
    phi0: f64,
    compensation_slope: f64,
    ladder: LadderJson,
    sampled_ladder: LadderJson,
    scan_window_s: f64,
    rate_scale: f64,
}

fn probe(cfg: &RunConfig) -> MeasurementSetting {
    MeasurementSetting::anti_diagonal()
        .with_window(cfg.scan_window_s)
        .with_rate_scale(cfg.rate_scale)
        .with_background(cfg.physical.background_rate)
}

fn source(cfg: &RunConfig) -> Result<Source, CliError> {
    Ok(Source::new(cfg.physical, cfg.resolution)?)
}

fn scan_spec(cfg: &RunConfig, parameter: ScanParameter, base: LinearParams, seed: u64) -> ScanSpec {
    let (start, stop, steps) = cfg.scan.range(parameter);
    ScanSpec { parameter, start, stop, steps, base, setting: probe(cfg), seed }
}

fn ladder(v: [f64; 3]) -> LadderJson {
    LadderJson { uncompensated: v[0], delay_compensated: v[1], slm: v[2], strictly_increasing: v[0] < v[1] && v[1] < v[2] }
}

fn purify(cfg: &RunConfig, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let src = source(cfg)?;
    let spec = twophoton_core::bench::SearchSpec { probe: probe(cfg), ..cfg.search };
    let objective = match cfg.objective {
        ObjectiveKind::NoiseFree => Objective::NoiseFree,
        ObjectiveKind::Sampled => Objective::Sampled { seed: derive_seed(seed, STREAM_SEARCH) },
    };
    let (best, converged, iterations, failure) =
        match optimize_mask(&src, LinearParams::flat(), &spec, objective) {
            Ok(o) => (o.params, true, o.iterations, None),
            Err(CoreError::NotConverged { iterations, best }) => {
                (best, false, iterations, Some(CliError::NotConverged(format!("mask search after {iterations} iterations"))))
            }
            Err(e) => return Err(e.into()),
        };

    let b = scan(&src, &scan_spec(cfg, ScanParameter::B1, best, derive_seed(seed, STREAM_B_SCAN)))?;
    out.write("b_scan.csv", &formats::scan_csv(&b)?)?;
    let a = scan(&src, &scan_spec(cfg, ScanParameter::APair, best, derive_seed(seed, STREAM_A_SCAN)))?;
    out.write("a_scan.csv", &formats::scan_csv(&a)?)?;
    out.write("mask.csv", &formats::mask_csv(&linear_mask(&cfg.physical, best))?)?;

    let states = ladder_states(&cfg.physical, cfg.resolution, &best)?;
    let mut exact = [0.0; 3];
    let mut sampled = [0.0; 3];
    for (k, s) in states.iter().enumerate() {
        exact[k] = visibility_measurement(s, Selection::default())?;
        let rec = sampled_fringe(s, Selection::default(), cfg.scan_window_s, derive_seed(derive_seed(seed, STREAM_FRINGE), k as u64))?;
        sampled[k] = contrast(rec.iter().map(|r| r.counts as f64))?;
    }
    let analytic = cfg.physical.optimal_mask_params();
    let report = PurifyReport {
        objective: match cfg.objective {
            ObjectiveKind::NoiseFree => "noise_free",
            ObjectiveKind::Sampled => "sampled",
        },
        converged,
        iterations,
        optimal: best.into(),
        analytic: analytic.into(),
        b_sum: best.b1 + best.b2,
        phi0: cfg.physical.phi0,
        compensation_slope: cfg.physical.compensation_slope(),
        ladder: ladder(exact),
        sampled_ladder: ladder(sampled),
        scan_window_s: cfg.scan_window_s,
        rate_scale: cfg.rate_scale,
    };
    out.write("purify_report.json", &formats::to_json(&report)?)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct ScanReport {
    parameter: &'static str,
    start: f64,
    stop: f64,
    steps: usize,
    base: ParamsJson,
    window_s: f64,
    analytic_minimum: f64,
    sampled_minimum: f64,
}

fn scan_cmd(cfg: &RunConfig, parameter: ScanParameter, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let src = source(cfg)?;
    let spec = scan_spec(cfg, parameter, cfg.base_mask(), derive_seed(seed, STREAM_SCAN));
    let pts = scan(&src, &spec)?;
    let name = scan_parameter_name(parameter);
    out.write(&format!("scan_{name}.csv"), &formats::scan_csv(&pts)?)?;
    let argmin = |key: &dyn Fn(&bench::ScanPoint) -> f64| {
        pts.iter().min_by(|x, y| key(x).total_cmp(&key(y))).map(|p| p.value).unwrap_or(f64::NAN)
    };
    let report = ScanReport {
        parameter: name,
        start: spec.start,
        stop: spec.stop,
        steps: spec.steps,
        base: spec.base.into(),
        window_s: spec.setting.window_s,
        analytic_minimum: argmin(&|p| p.rate),
        sampled_minimum: argmin(&|p| p.counts as f64),
    };
    out.write("scan_report.json", &formats::to_json(&report)?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FidelityJson {
    pub target: String,
    pub fidelity: f64,
    pub bootstrap_mean: Option<f64>,
    pub bootstrap_std: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RegionJson {
    label: String,
    signal_sector: usize,
    idler_sector: usize,
    weight: f64,
    branch_phase: f64,
    /// Conditional state of the synthesized density matrix.
    exact_fidelity: f64,
    tomography: TomoSummary,
}

#[derive(Debug, Serialize)]
struct ClusterReport {
    signal_sectors: usize,
    idler_sectors: usize,
    dims: Vec<usize>,
    signal_phases: Vec<f64>,
    idler_phases: Vec<f64>,
    target: Option<String>,
    target_fidelity: Option<f64>,
    regions: Vec<RegionJson>,
    tomo_window_s: f64,
    rate_scale: f64,
}

#[derive(Debug, Serialize)]
pub struct TomoSummary {
    pub settings: Vec<String>,
    pub normalization: Vec<String>,
    pub rho_mle: DensityJson,
    pub rho_linear: DensityJson,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fidelities: Vec<FidelityJson>,
    pub bootstrap_resamples: usize,
}

/// The closed-form target a sector layout realises, if it is one of the
/// named families.
fn cluster_target(sig: &[f64], idl: &[f64]) -> Option<(String, Ket)> {
    let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    match (sig.len(), idl.len()) {
        (2, 1) if close(sig, &[0.0, PI]) && close(idl, &[0.0]) => Some(("c3".into(), c3())),
        (1, 2) if close(sig, &[0.0]) && close(idl, &[0.0, PI]) => Some(("c3".into(), c3())),
        (2, 2) if (sig[0] + idl[0]).abs() < 1e-12 && (sig[1] + idl[1] - PI).abs() < 1e-12 => {
            let (p0i, p1s) = (idl[0], sig[1]);
            Some((format!("xi4({p0i},{p1s})"), xi4(p0i, p1s)))
        }
        _ => None,
    }
}

fn cluster(cfg: &RunConfig, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let src = source(cfg)?;
    let sectors: SectorConfig = cfg.sectors.build(&cfg.physical)?;
    let base = cfg.base_mask();
    bench::check_mask_params(&base)?;
    let mask = linear_mask(&cfg.physical, base);
    out.write("mask.csv", &formats::mask_csv(&with_sector_offsets(&mask, &cfg.physical, &sectors)?)?)?;
    let js = src.synthesize(&mask, &sectors)?;
    out.write("state.csv", &formats::density_csv(js.rho.matrix())?)?;
    out.write("state.json", &formats::to_json(&DensityJson::from_matrix(js.rho.matrix()))?)?;

    let (sig, idl) = cfg.sectors.phases();
    let target = cluster_target(&sig, &idl);
    let target_fidelity = target.as_ref().map(|(_, k)| fidelity(&js.rho, k)).transpose()?;

    let protocol = cfg.tomo.protocol()?;
    let template = MeasurementSetting::anti_diagonal()
        .with_window(cfg.tomo_window_s)
        .with_rate_scale(cfg.rate_scale)
        .with_background(cfg.physical.background_rate);
    let (n_count, m_count) = (sectors.signal_count(), sectors.idler_count());
    let single_arm = n_count == 1 || m_count == 1;
    let mut regions = Vec::new();
    let mut pending = None;
    for n in 0..n_count {
        for m in 0..m_count {
            let r = n * m_count + m;
            let label = if single_arm { format!("F{}", n.max(m)) } else { format!("F{n}{m}") };
            let phase = sectors.phase(twophoton_core::slm::Arm::Signal, n) + sectors.phase(twophoton_core::slm::Arm::Idler, m);
            let want = delta_plus(phase);
            let (_, cond) = js.conditional(n, m)?;
            let sel = Selection {
                signal_sector: (n_count > 1).then_some(n),
                idler_sector: (m_count > 1).then_some(m),
            };
            let region_seed = derive_seed(seed, STREAM_REGION + r as u64);
            let rec = simulate_counts(&protocol, &js, sel, &template, derive_seed(region_seed, 0))?;
            let rows = count_rows(&protocol, &rec);
            out.write(&format!("counts_{}.csv", label.to_lowercase()), &formats::counts_csv(&rows)?)?;
            let data = TomoData::from_records(&rec)?;
            let targets = [(format!("delta+({phase})"), want.clone())];
            let (summary, st) = tomography(cfg, &protocol, &data, &targets, derive_seed(region_seed, 1))?;
            if pending.is_none() {
                pending = st.err();
            }
            regions.push(RegionJson {
                label,
                signal_sector: n,
                idler_sector: m,
                weight: js.region_weights[r],
                branch_phase: phase,
                exact_fidelity: fidelity(&cond, &want)?,
                tomography: summary,
            });
        }
    }
    let report = ClusterReport {
        signal_sectors: n_count,
        idler_sectors: m_count,
        dims: js.dims(),
        signal_phases: sig,
        idler_phases: idl,
        target: target.map(|t| t.0),
        target_fidelity,
        regions,
        tomo_window_s: cfg.tomo_window_s,
        rate_scale: cfg.rate_scale,
    };
    out.write("cluster_report.json", &formats::to_json(&report)?)?;
    pending.map_or(Ok(()), Err)
}

fn count_rows(protocol: &TomoProtocol, rec: &[bench::CountRecord]) -> Vec<CountsRow> {
    protocol
        .labels()
        .iter()
        .zip(rec)
        .map(|(l, r)| CountsRow { setting: l.clone(), counts: r.counts, window: r.setting.window_s })
        .collect()
}

/// MLE, fidelities and bootstrap for one data set. The second value reports
/// MLE non-convergence without discarding the summary.
fn tomography(
    cfg: &RunConfig,
    protocol: &TomoProtocol,
    data: &TomoData,
    targets: &[(String, Ket)],
    seed: u64,
) -> Result<(TomoSummary, Result<(), CliError>), CliError> {
    let res: TomoResult = mle_reconstruct(protocol, data, &cfg.tomo.mle)?;
    let kets: Vec<Ket> = targets.iter().map(|t| t.1.clone()).collect();
    let spreads: Option<Vec<Spread>> = if cfg.tomo.resamples > 0 {
        Some(crate::parallel::bootstrap(protocol, data, &kets, cfg.tomo.resamples, &cfg.tomo.mle, seed)?)
    } else {
        None
    };
    let mut fids = Vec::new();
    for (k, (name, ket)) in targets.iter().enumerate() {
        fids.push(FidelityJson {
            target: name.clone(),
            fidelity: fidelity(&res.rho_mle, ket)?,
            bootstrap_mean: spreads.as_ref().map(|s| s[k].mean),
            bootstrap_std: spreads.as_ref().map(|s| s[k].std),
        });
    }
    let status = if res.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("maximum likelihood after {} iterations", res.iterations)))
    };
    let summary = TomoSummary {
        settings: protocol.labels().to_vec(),
        normalization: protocol.normalization_group().iter().map(|&k| protocol.labels()[k].clone()).collect(),
        rho_mle: DensityJson::from_matrix(res.rho_mle.matrix()),
        rho_linear: DensityJson::from_matrix(&res.rho_linear),
        log_likelihood: res.log_likelihood,
        iterations: res.iterations,
        converged: res.converged,
        fidelities: fids,
        bootstrap_resamples: cfg.tomo.resamples,
    };
    Ok((summary, status))
}

fn tomo_cmd(cfg: &RunConfig, counts: Option<&Path>, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let protocol = cfg.tomo.protocol()?;
    if let Some(bad) = cfg.tomo.targets.iter().find(|t| t.dim() != 4) {
        return Err(CliError::Config(format!("target '{bad}' is not a two-qubit state")));
    }
    let rows = match counts {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            formats::parse_counts_csv(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let src = source(cfg)?;
            let js: JointState = purified_state(&src, &cfg.base_mask())?;
            let template = MeasurementSetting::anti_diagonal()
                .with_window(cfg.tomo_window_s)
                .with_rate_scale(cfg.rate_scale)
                .with_background(cfg.physical.background_rate);
            let rec = simulate_counts(&protocol, &js, Selection::default(), &template, derive_seed(seed, STREAM_TOMO_COUNTS))?;
            count_rows(&protocol, &rec)
        }
    };
    let data = formats::align_counts(&protocol, &rows)?;
    // Written in protocol order so a regenerated report reads identical input.
    let ordered: Vec<CountsRow> = protocol
        .labels()
        .iter()
        .enumerate()
        .map(|(k, l)| CountsRow { setting: l.clone(), counts: data.counts[k], window: data.windows[k] })
        .collect();
    out.write("counts.csv", &formats::counts_csv(&ordered)?)?;
    let targets: Vec<(String, Ket)> = cfg.tomo.targets.iter().map(|t| (t.label(), t.ket())).collect();
    let (summary, status) = tomography(cfg, &protocol, &data, &targets, derive_seed(seed, STREAM_BOOTSTRAP))?;
    out.write("rho_mle.csv", &formats::density_csv(&summary.rho_mle.to_matrix()?)?)?;
    out.write("rho_linear.csv", &formats::density_csv(&summary.rho_linear.to_matrix()?)?)?;
    out.write("tomo_report.json", &formats::to_json(&summary)?)?;
    status
}

use std::path::Path;

use repeater_core::bayes_opt::{self, BoOptions, Builtin};
use repeater_core::emitter::{self, EmitterSpec, PurcellContext};
use repeater_core::gp::GpModel;
use repeater_core::mc::{self, McConfig, MvnSpec, StudyOptions, Validity};
use repeater_core::repeater::EfficiencyChain;
use repeater_core::resonance::{self, FitOptions};
use repeater_core::search::{self, SearchOptions, SearchResult, SWEEP_COLUMNS};
use serde::Serialize;

use crate::args::{BoArgs, BoCommand, Global, OptimizeArgs, ResfitArgs, SweepArgs, UqArgs, UqCommand};
use crate::error::CliError;
use crate::io;
use crate::scenario::{self, Emission, Resolved, ScenarioFile, BETA_F, BETA_WG_IDEAL, BETA_WG_REAL};

fn load_scenario(g: &Global) -> Result<Resolved, CliError> {
    let presets = scenario::active_presets(g.presets.as_deref())?;
    let file = match &g.scenario {
        Some(p) => ScenarioFile::load(p)?,
        None => ScenarioFile::default(),
    };
    file.resolve(&presets)
}

#[derive(Serialize)]
struct BudgetReport {
    /// The scenario as loaded, defaults filled in.
    scenario: ScenarioFile,
    emitter: String,
    f_p: f64,
    alpha_rad: f64,
    f_p_effective: f64,
    beta_c: f64,
    beta_wg: f64,
    beta_f: f64,
    dw: f64,
    tau_ns: f64,
    eta_emitter: f64,
    table: Vec<TableRow>,
}

#[derive(Serialize)]
struct TableRow {
    name: String,
    tau0_ns: f64,
    dw0: f64,
    xi: f64,
    tau_ideal_ns: f64,
    tau_real_ns: f64,
    dw_ideal: f64,
    dw_real: f64,
    eta_ideal: f64,
    eta_real: f64,
}

fn table_row(spec: &EmitterSpec) -> Result<TableRow, CliError> {
    let eta = |f_p: f64, beta_wg: f64| -> Result<f64, CliError> {
        let ctx = PurcellContext::new(f_p, 0.0)?;
        Ok(EfficiencyChain::for_emitter(spec, ctx, beta_wg, BETA_F)?.emitter_efficiency())
    };
    Ok(TableRow {
        name: spec.name.clone(),
        tau0_ns: spec.tau0 * 1e9,
        dw0: spec.dw0,
        xi: spec.xi,
        tau_ideal_ns: spec.purcell_lifetime(emitter::F_P_IDEAL) * 1e9,
        tau_real_ns: spec.purcell_lifetime(emitter::F_P_REAL) * 1e9,
        dw_ideal: spec.dw_purcell(emitter::F_P_IDEAL),
        dw_real: spec.dw_purcell(emitter::F_P_REAL),
        eta_ideal: eta(emitter::F_P_IDEAL, BETA_WG_IDEAL)?,
        eta_real: eta(emitter::F_P_REAL, BETA_WG_REAL)?,
    })
}

pub fn budget(g: &Global) -> Result<(), CliError> {
    let presets = scenario::active_presets(g.presets.as_deref())?;
    let r = load_scenario(g)?;
    let c = r.file.chain;
    let chain = r.chain()?;
    let f_eff = PurcellContext::new(c.f_p, c.alpha_rad)?.effective();
    let report = BudgetReport {
        scenario: r.file.clone(),
        emitter: r.emitter.name.clone(),
        f_p: c.f_p,
        alpha_rad: c.alpha_rad,
        f_p_effective: f_eff,
        beta_c: chain.beta_c,
        beta_wg: chain.beta_wg,
        beta_f: chain.beta_f,
        dw: chain.dw,
        tau_ns: r.emitter.purcell_lifetime(f_eff) * 1e9,
        eta_emitter: chain.emitter_efficiency(),
        table: presets.iter().map(table_row).collect::<Result<_, _>>()?,
    };
    io::emit_json(g.out.as_deref(), &report)
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<(), CliError> {
    let r = load_scenario(g)?;
    let mut grid = r.sweep();
    if let Some(v) = a.from {
        grid.eta_from = v;
    }
    if let Some(v) = a.to {
        grid.eta_to = v;
    }
    if let Some(v) = a.steps {
        grid.steps = v;
    }
    if a.fixed_emission {
        grid.emission = Emission::Fixed;
    }
    let rows = search::sweep_efficiency(
        &r.file.repeater,
        &grid.grid(),
        &search_options(a.no_prune),
        &grid.emission_time(&r.emitter)?,
    );
    for row in &rows {
        if let Err(e) = &row.result {
            eprintln!("warning: eta = {}: {e}", row.eta_emitter);
        }
    }
    let text = io::csv_text(&SWEEP_COLUMNS, rows.iter().map(|r| r.record()))?;
    io::emit(g.out.as_deref(), &text)
}

fn search_options(no_prune: bool) -> SearchOptions {
    SearchOptions {
        prune: !no_prune,
        ..SearchOptions::default()
    }
}

#[derive(Serialize)]
struct OptimizeReport {
    eta_emitter: f64,
    c_min: f64,
    tree: [u32; 3],
    m: u32,
    n_ph: u64,
    l0_km: f64,
    eta: f64,
    eta_e: f64,
    p_trans: f64,
    f: f64,
    tau_ph_s: f64,
    tau_cz_s: f64,
    gamma_tcs_hz: f64,
}

impl OptimizeReport {
    fn new(r: &SearchResult, tau_ph_s: f64, tau_cz_s: f64) -> OptimizeReport {
        let t = &r.best_tree;
        OptimizeReport {
            eta_emitter: r.eta_emitter,
            c_min: r.c_min,
            tree: [t.get(0), t.get(1), t.get(2)],
            m: r.best_m,
            n_ph: r.n_ph,
            l0_km: r.breakdown.l0_km,
            eta: r.breakdown.eta,
            eta_e: r.breakdown.eta_e,
            p_trans: r.p_trans,
            f: r.f,
            tau_ph_s,
            tau_cz_s,
            gamma_tcs_hz: r.gamma_tcs,
        }
    }
}

pub fn optimize(g: &Global, a: &OptimizeArgs) -> Result<(), CliError> {
    let r = load_scenario(g)?;
    let eta = match a.eta {
        Some(v) => v,
        None => r.chain()?.emitter_efficiency(),
    };
    let scn = &r.file.repeater;
    let result = search::minimize_cost(scn, eta, &search_options(a.no_prune))?;
    io::emit_json(
        g.out.as_deref(),
        &OptimizeReport::new(&result, scn.tau_ph_s, scn.tau_cz_s),
    )
}

pub fn bo(g: &Global, cmd: &BoCommand) -> Result<(), CliError> {
    match cmd {
        BoCommand::Run(a) => bo_run(g, a),
    }
}

fn bo_run(g: &Global, a: &BoArgs) -> Result<(), CliError> {
    let objective = Builtin::parse(&a.objective).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown objective `{}`; expected builtin:quadratic or builtin:abs",
            a.objective
        ))
    })?;
    let domain = objective.domain(a.dim)?;
    let opts = BoOptions {
        budget: a.budget,
        init_count: a.init_count,
        seed: g.seed,
        ..BoOptions::default()
    };
    let state = bayes_opt::minimize(|p| Ok(objective.eval(p)), &domain, &opts)?;
    let mut header: Vec<String> = vec!["iter".into()];
    header.extend((0..a.dim).map(|k| format!("x{k}")));
    header.extend(["value".into(), "f_min".into()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let rows = state.trace().into_iter().map(|row| {
        let mut rec = vec![row.iter.to_string()];
        rec.extend(row.point.iter().map(|x| x.to_string()));
        rec.push(opt(row.value));
        rec.push(opt(row.f_min));
        rec
    });
    let text = io::csv_text(&header, rows)?;
    io::emit(g.out.as_deref(), &text)
}

#[derive(Serialize)]
struct UqOutput {
    model: String,
    seed: u64,
    config: McConfig,
    validity: Validity,
    device: MvnSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    study: Option<StudySummary>,
    report: mc::McReport,
}

#[derive(Serialize)]
struct StudySummary {
    w_train: usize,
    kappas: Vec<f64>,
    n_failed: usize,
    n_removed: usize,
    n_used: usize,
    mu0: f64,
    sigma0_sq: f64,
    lengthscales: Vec<f64>,
}

pub const BUILTIN_RESONANCE: &str = "builtin:resonance";

pub fn uq(g: &Global, cmd: &UqCommand) -> Result<(), CliError> {
    match cmd {
        UqCommand::Study(a) => uq_study(g, a),
    }
}

fn uq_study(g: &Global, a: &UqArgs) -> Result<(), CliError> {
    let config: McConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => McConfig::default(),
    };
    config.validate()?;
    let device_file: Option<MvnSpec> = a.device.as_deref().map(io::read_json).transpose()?;
    let builtin = a.model == BUILTIN_RESONANCE;
    let validity = match (a.validity_above, builtin) {
        (Some(t), _) => Validity::Above(t),
        (None, true) => Validity::Above(1.0),
        (None, false) => Validity::Always,
    };
    let accepts = |y: f64| validity.accepts(y);

    let output = if builtin {
        let device = device_file.unwrap_or_else(mc::fabrication_device);
        if device.dim() != 3 {
            return Err(repeater_core::Error::DimensionMismatch {
                expected: 3,
                got: device.dim(),
            }
            .into());
        }
        let kappas = match a.kappa {
            Some(k) => vec![k; 3],
            None => mc::fabrication_kappas(),
        };
        let opts = StudyOptions {
            kappas: Some(kappas.clone()),
            filter: if a.no_filter {
                None
            } else {
                StudyOptions::default().filter
            },
            ..StudyOptions::default()
        };
        let (study, _) = mc::end_to_end_study(
            mc::synthetic_resonance,
            &device,
            1.0,
            a.w_train,
            &config,
            accepts,
            g.seed,
            &opts,
        )?;
        UqOutput {
            model: a.model.clone(),
            seed: g.seed,
            config,
            validity,
            device,
            study: Some(StudySummary {
                w_train: study.w_train,
                kappas,
                n_failed: study.n_failed,
                n_removed: study.n_removed,
                n_used: study.n_used,
                mu0: study.mu0,
                sigma0_sq: study.sigma0_sq,
                lengthscales: study.lengthscales,
            }),
            report: study.report,
        }
    } else {
        let model = GpModel::from_json(&io::read(Path::new(&a.model))?)?;
        let device = device_file.ok_or_else(|| CliError::Usage("--device is required with a model file".into()))?;
        if device.dim() != model.dim() {
            return Err(repeater_core::Error::DimensionMismatch {
                expected: model.dim(),
                got: device.dim(),
            }
            .into());
        }
        let report = mc::mc_analyze_joint(|p| model.predict(p), &device, &config, accepts, g.seed)?;
        UqOutput {
            model: a.model.clone(),
            seed: g.seed,
            config,
            validity,
            device,
            study: None,
            report,
        }
    };
    if output.report.discard_warning {
        eprintln!(
            "warning: {:.1}% of Monte Carlo draws were discarded",
            100.0 * output.report.discard_fraction
        );
    }
    io::emit_json(g.out.as_deref(), &output)
}

#[derive(Serialize)]
struct FitReport {
    nu0_hz: f64,
    fwhm_hz: f64,
    amplitude: f64,
    offset: f64,
    offset_fixed: bool,
    q: f64,
    residual_norm: f64,
    iterations: usize,
    points: usize,
}

#[derive(Serialize)]
struct ComplexQReport {
    re_hz: f64,
    im_hz: f64,
    q: f64,
}

pub fn resfit(g: &Global, a: &ResfitArgs) -> Result<(), CliError> {
    if let (Some(re), Some(im)) = (a.re, a.im) {
        let q = resonance::q_from_complex_frequency(num_complex::Complex64::new(re, im))?;
        return io::emit_json(
            g.out.as_deref(),
            &ComplexQReport {
                re_hz: re,
                im_hz: im,
                q,
            },
        );
    }
    let input = a
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("resfit needs --input, or --re and --im".into()))?;
    let points = read_transmission(input)?;
    let fit = resonance::fit_lorentzian(
        &points,
        &FitOptions {
            fixed_offset: a.fixed_offset,
            ..FitOptions::default()
        },
    )?;
    io::emit_json(
        g.out.as_deref(),
        &FitReport {
            nu0_hz: fit.nu0,
            fwhm_hz: fit.fwhm,
            amplitude: fit.amplitude,
            offset: fit.offset,
            offset_fixed: a.fixed_offset.is_some(),
            q: fit.q,
            residual_norm: fit.residual_norm,
            iterations: fit.iterations,
            points: points.len(),
        },
    )
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct TransmissionRow {
    frequency_hz: f64,
    transmission: f64,
}

fn read_transmission(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = io::read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<TransmissionRow>()
        .enumerate()
        .map(|(i, row)| {
            row.map(|r| (r.frequency_hz, r.transmission))
                .map_err(|e| CliError::Parse {
                    origin: path.display().to_string(),
                    path: format!("row {}", i + 1),
                    message: e.to_string(),
                })
        })
        .collect()
}

//! Subcommands: each runs one experiment and writes CSV tables plus a manifest.

use std::path::{Path, PathBuf};

use rotorlab_core::analytic::{
    analytic_spectral_table, approx_background_profile, return_amplitude_analytic,
    AnalyticBackgroundParams,
};
use rotorlab_core::eigen::{
    cfs_contrast_from_eigenvectors, diagonalize, eigen_ensemble, symmetry_report,
};
use rotorlab_core::ensemble::ensemble_map;
use rotorlab_core::floquet::{build_dense, DENSE_CAP};
use rotorlab_core::observables::{
    cbs_cfs_timeseries, contrast, density_series, fit_decay, flat_background, numeric_background,
    return_amplitude, return_amplitude_all, spectral_function, ContrastProfile, DensityProfile,
    Experiment, SpectralTable,
};
use rotorlab_core::{Complex64, Lattice, Model, SimulationParams};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::output::{num, OutputSet, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundMode {
    Numeric,
    Analytic,
}

/// Background used to form contrasts. `Auto` picks the flat background for
/// models whose density equals that of U0, the closed form for `U_{1/2}`,
/// and the numeric spectral-function background otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundChoice {
    Auto,
    Flat,
    Numeric,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    Density,
    Ballistic {
        t_max: Option<usize>,
    },
    Spectral,
    Background {
        mode: BackgroundMode,
        t_terms: usize,
    },
    Contrast {
        background: BackgroundChoice,
        t_terms: usize,
        difference: bool,
    },
    Eigen,
    Moments {
        background: BackgroundChoice,
        t_terms: usize,
    },
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Ballistic { .. } => "ballistic",
            Command::Spectral => "spectral",
            Command::Background { .. } => "background",
            Command::Contrast { .. } => "contrast",
            Command::Eigen => "eigen",
            Command::Moments { .. } => "moments",
            Command::Validate => "validate",
        }
    }
}

/// What a finished command reports back to the caller.
#[derive(Debug, Clone)]
pub struct Summary {
    pub manifest: PathBuf,
    pub lines: Vec<String>,
}

pub fn run(command: &Command, params: &SimulationParams, out: &Path) -> Result<Summary, CliError> {
    params.validate()?;
    let mut files = OutputSet::new(out)?;
    let mut lines = Vec::new();
    let results = match command {
        Command::Density => density(params, &mut files)?,
        Command::Ballistic { t_max } => ballistic(
            params,
            t_max.unwrap_or(params.t_max_spectral),
            &mut files,
            &mut lines,
        )?,
        Command::Spectral => spectral(params, &mut files)?,
        Command::Background { mode, t_terms } => background(params, *mode, *t_terms, &mut files)?,
        Command::Contrast {
            background,
            t_terms,
            difference,
        } => contrasts(
            params,
            *background,
            *t_terms,
            *difference,
            &mut files,
            &mut lines,
        )?,
        Command::Eigen => eigen(params, &mut files)?,
        Command::Moments {
            background,
            t_terms,
        } => moments(params, *background, *t_terms, &mut files, &mut lines)?,
        Command::Validate => {
            let (results, failed) = validate(params, &mut files, &mut lines)?;
            let manifest = files.finish(command.name(), params, json!(command), results)?;
            if failed > 0 {
                for l in &lines {
                    println!("{l}");
                }
                return Err(CliError::Validation(failed));
            }
            return Ok(Summary { manifest, lines });
        }
    };
    let manifest = files.finish(command.name(), params, json!(command), results)?;
    Ok(Summary { manifest, lines })
}

fn model_comment(p: &SimulationParams) -> String {
    format!(
        "model {} N={} K={} hbar={} x0={} seed={} realizations={} phases={:?}",
        p.model.tag(),
        p.n,
        p.kick,
        p.hbar,
        p.x0,
        p.seed,
        p.n_realizations,
        p.phase_mode
    )
}

fn density(
    params: &SimulationParams,
    files: &mut OutputSet,
) -> Result<serde_json::Value, CliError> {
    let profiles = density_series(params, &params.times)?;
    let mut t = Table::new(&["t", "x", "n", "n_stderr"])
        .comment("disorder-averaged density n(x, t) = mean |psi(x, t)|^2 from psi(0) = |x0>")
        .comment("normalization: (1/N) sum_x n(x, t) = 1")
        .comment(model_comment(params));
    let mut norms = Vec::new();
    for d in &profiles {
        for j in 0..d.x.len() {
            t.push(vec![
                d.t.unwrap_or(0).to_string(),
                num(d.x[j]),
                num(d.mean[j]),
                num(d.stderr[j]),
            ]);
        }
        norms.push(d.normalization());
    }
    files.write("density.csv", &t)?;
    Ok(json!({ "normalization": norms }))
}

fn ballistic(
    params: &SimulationParams,
    t_max: usize,
    files: &mut OutputSet,
    lines: &mut Vec<String>,
) -> Result<serde_json::Value, CliError> {
    let series = return_amplitude(params, params.x0, t_max)?;
    let ap = AnalyticBackgroundParams::new(params.kick, params.hbar, params.n);
    let theory = |t: usize| -> Option<Complex64> {
        match params.model {
            m if m == Model::U_HALF => return_amplitude_analytic(params.x0, t, &ap).ok(),
            Model::U0 | Model::Vr { .. } => Some(Complex64::new((t == 0) as u8 as f64, 0.0)),
            _ => None,
        }
    };
    let mut table = Table::new(&["t", "r_re", "r_im", "r_stderr", "n_b", "r_theory_re", "r_theory_im", "n_b_theory"])
        .comment("return amplitude r(x0, t) = (1/N) <x0| mean U^t |x0>, ballistic density n_b = |r|^2")
        .comment("theory: Bessel resummation over kick paths for U_{1/2}, delta_{t,0} for U0-equivalent models")
        .comment(model_comment(params));
    for (t, (r, e)) in series.mean.iter().zip(&series.stderr).enumerate() {
        let th = theory(t);
        table.push(vec![
            t.to_string(),
            num(r.re),
            num(r.im),
            num(*e),
            num(r.norm_sqr()),
            th.map(|z| num(z.re)).unwrap_or_default(),
            th.map(|z| num(z.im)).unwrap_or_default(),
            th.map(|z| num(z.norm_sqr())).unwrap_or_default(),
        ]);
    }
    files.write("ballistic.csv", &table)?;
    let fit = match fit_decay(&series) {
        Ok(f) => {
            lines.push(format!("tau_C = {:.4} from {} points", f.tau, f.points));
            if f.exceeds_truncation(params.t_max_spectral) {
                lines.push(format!(
                    "warning: tau_C > t_max_spectral / 3 = {:.2}; raise t_max_spectral",
                    params.t_max_spectral as f64 / 3.0
                ));
            }
            json!({ "tau_c": f.tau, "points": f.points, "slope": f.slope })
        }
        Err(e) => {
            lines.push(format!("no decay fit: {e}"));
            json!({ "fit_error": e.to_string() })
        }
    };
    Ok(json!({ "decay": fit }))
}

fn numeric_table(params: &SimulationParams) -> Result<SpectralTable, CliError> {
    let series = return_amplitude_all(params, params.t_max_spectral)?;
    Ok(spectral_function(&series, params.n_omega)?)
}

fn spectral(
    params: &SimulationParams,
    files: &mut OutputSet,
) -> Result<serde_json::Value, CliError> {
    let table = numeric_table(params)?;
    write_spectral(&table, params, files)?;
    Ok(json!({
        "t_max": table.t_max,
        "max_imag": table.max_imag,
        "floor_violations": table.floor_violations,
        "min_nu": table.min_nu(),
    }))
}

fn write_spectral(
    table: &SpectralTable,
    params: &SimulationParams,
    files: &mut OutputSet,
) -> Result<(), CliError> {
    let mut a = Table::new(&["x", "omega", "a"])
        .comment("spectral function a(x, w) = sum_{|t| <= t_max} exp(i w t) r(x, t), r(x, -t) = conj r(x, t)")
        .comment("normalized so that the w-average of a(x, w) is 1")
        .comment(model_comment(params));
    for (j, &x) in table.x.iter().enumerate() {
        for (k, &w) in table.omega.iter().enumerate() {
            a.push(vec![num(x), num(w), num(table.a[j][k])]);
        }
    }
    files.write("spectral.csv", &a)?;
    let mut nu = Table::new(&["omega", "nu"])
        .comment("density of states nu(w) = (1/N) sum_x a(x, w)")
        .comment(model_comment(params));
    for (w, v) in table.omega.iter().zip(&table.nu) {
        nu.push(vec![num(*w), num(*v)]);
    }
    files.write("dos.csv", &nu)?;
    Ok(())
}

fn has_flat_background(model: Model) -> bool {
    match model {
        Model::U0 | Model::Vr { .. } => true,
        Model::Ut0 { t0 } => t0 == 0.0 || t0 == 1.0,
    }
}

/// Background profile and a label describing how it was obtained.
pub fn background_profile(
    params: &SimulationParams,
    choice: BackgroundChoice,
    t_terms: usize,
) -> Result<(DensityProfile, String), CliError> {
    let lattice = Lattice::new(params.n)?;
    let choice = match choice {
        BackgroundChoice::Auto if has_flat_background(params.model) => BackgroundChoice::Flat,
        BackgroundChoice::Auto if params.model == Model::U_HALF => BackgroundChoice::Analytic,
        BackgroundChoice::Auto => BackgroundChoice::Numeric,
        c => c,
    };
    match choice {
        BackgroundChoice::Flat => Ok((flat_background(&lattice, params.x0)?, "flat".into())),
        BackgroundChoice::Numeric => {
            let table = numeric_table(params)?;
            Ok((
                numeric_background(&table, params.x0)?,
                format!("numeric, t_max = {}", params.t_max_spectral),
            ))
        }
        BackgroundChoice::Analytic => {
            if has_flat_background(params.model) {
                return Ok((
                    flat_background(&lattice, params.x0)?,
                    "flat (exact for this model)".into(),
                ));
            }
            if params.model != Model::U_HALF {
                return Err(CliError::Config(format!(
                    "no closed-form background for {}; use the numeric mode",
                    params.model.tag()
                )));
            }
            let ap = AnalyticBackgroundParams::new(params.kick, params.hbar, params.n)
                .with_t_terms(t_terms);
            if t_terms == 1 {
                Ok((
                    approx_background_profile(&ap, &lattice, params.x0)?,
                    "analytic, |t| <= 1 closed form".into(),
                ))
            } else {
                let table = analytic_spectral_table(&ap, &lattice, params.n_omega)?;
                Ok((
                    numeric_background(&table, params.x0)?,
                    format!("analytic, |t| <= {t_terms}"),
                ))
            }
        }
        BackgroundChoice::Auto => unreachable!(),
    }
}

fn background(
    params: &SimulationParams,
    mode: BackgroundMode,
    t_terms: usize,
    files: &mut OutputSet,
) -> Result<serde_json::Value, CliError> {
    let choice = match mode {
        BackgroundMode::Numeric => BackgroundChoice::Numeric,
        BackgroundMode::Analytic => BackgroundChoice::Analytic,
    };
    let (bg, label) = background_profile(params, choice, t_terms)?;
    let mut t = Table::new(&["x", "n_b"])
        .comment("classical background n_B(x, x0) = w-average of a(x, w) a(x0, w) / nu(w)")
        .comment(format!("source: {label}"))
        .comment(model_comment(params));
    for (x, v) in bg.x.iter().zip(&bg.mean) {
        t.push(vec![num(*x), num(*v)]);
    }
    files.write("background.csv", &t)?;
    Ok(json!({ "source": label, "normalization": bg.normalization() }))
}

fn contrasts(
    params: &SimulationParams,
    choice: BackgroundChoice,
    t_terms: usize,
    difference: bool,
    files: &mut OutputSet,
    lines: &mut Vec<String>,
) -> Result<serde_json::Value, CliError> {
    let (bg, label) = background_profile(params, choice, t_terms)?;
    let profiles: Vec<_> = density_series(params, &params.times)?
        .iter()
        .map(|n| contrast(n, &bg).map(|c| (n.clone(), c)))
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&["t", "x", "n", "n_stderr", "n_b", "c", "c_stderr"])
        .comment("contrast C(x, t) = n(x, t) / n_B(x) - 1")
        .comment(format!("background: {label}"))
        .comment(model_comment(params));
    let mut interference = Vec::new();
    for (n, c) in &profiles {
        for j in 0..c.x.len() {
            table.push(vec![
                n.t.unwrap_or(0).to_string(),
                num(c.x[j]),
                num(n.mean[j]),
                num(n.stderr[j]),
                num(bg.mean[j]),
                num(c.c[j]),
                num(c.stderr[j]),
            ]);
        }
        interference.push(c.interference_mean);
    }
    files.write("contrast.csv", &table)?;
    let mut peaks = Table::new(&[
        "t",
        "cbs",
        "cbs_stderr",
        "cfs",
        "cfs_stderr",
        "pre_scattering",
    ])
    .comment("CBS contrast C(-x0, t) and CFS contrast C(x0, t); t = 0 is the initial delta peak")
    .comment(format!("background: {label}"))
    .comment(model_comment(params));
    for p in cbs_cfs_timeseries(params, &bg)? {
        peaks.push(vec![
            p.t.to_string(),
            num(p.cbs),
            num(p.cbs_err),
            num(p.cfs),
            num(p.cfs_err),
            p.pre_scattering.to_string(),
        ]);
        lines.push(format!(
            "t = {:>6}: C_CBS = {:.4} +- {:.4}, C_CFS = {:.4} +- {:.4}",
            p.t, p.cbs, p.cbs_err, p.cfs, p.cfs_err
        ));
    }
    files.write("peaks.csv", &peaks)?;
    if difference {
        write_difference(params, &profiles, files)?;
    }
    Ok(json!({ "background": label, "interference_mean": interference }))
}

/// Contrast of `params.model` minus that of U0 on the same disorder ensemble.
fn write_difference(
    params: &SimulationParams,
    profiles: &[(DensityProfile, ContrastProfile)],
    files: &mut OutputSet,
) -> Result<(), CliError> {
    let u0 = SimulationParams {
        model: Model::U0,
        ..params.clone()
    };
    let flat = flat_background(&Lattice::new(params.n)?, params.x0)?;
    let mut table = Table::new(&["t", "x", "c", "c_u0", "difference", "difference_stderr"])
        .comment("difference of contrasts C(x, t) - C_U0(x, t); U0 uses the flat background")
        .comment(model_comment(params));
    for ((_, c), n0) in profiles.iter().zip(density_series(&u0, &params.times)?) {
        let c0 = contrast(&n0, &flat)?;
        for j in 0..c.x.len() {
            table.push(vec![
                n0.t.unwrap_or(0).to_string(),
                num(c.x[j]),
                num(c.c[j]),
                num(c0.c[j]),
                num(c.c[j] - c0.c[j]),
                num(c.stderr[j].hypot(c0.stderr[j])),
            ]);
        }
    }
    files.write("difference.csv", &table)?;
    Ok(())
}

fn check_dense(params: &SimulationParams) -> Result<(), CliError> {
    if params.n > DENSE_CAP {
        return Err(rotorlab_core::Error::DenseCap {
            n: params.n,
            cap: DENSE_CAP,
        }
        .into());
    }
    Ok(())
}

fn eigen(params: &SimulationParams, files: &mut OutputSet) -> Result<serde_json::Value, CliError> {
    check_dense(params)?;
    let exp = Experiment::new(params)?;
    let spectra = ensemble_map(&exp.spec, |i| {
        let u = build_dense(
            &exp.lattice,
            &exp.variant,
            &exp.disorder(i)?,
            params.kick_over_hbar(),
        )?;
        diagonalize(&u)
    })?;
    let mut t = Table::new(&["realization", "state", "omega", "residual"])
        .comment("Floquet eigenphases: U phi = exp(-i omega) phi, omega in [-pi, pi), sorted per realization")
        .comment(model_comment(params));
    let mut worst = 0.0f64;
    for (i, s) in spectra.iter().enumerate() {
        for k in 0..s.len() {
            t.push(vec![
                i.to_string(),
                k.to_string(),
                num(s.omega[k]),
                num(s.residuals[k]),
            ]);
            worst = worst.max(s.residuals[k]);
        }
    }
    files.write("spectrum.csv", &t)?;
    let e = eigen_ensemble(params)?;
    let ns = &e.steady_state;
    let mut table = Table::new(&["x", "n_s", "n_s_stderr"])
        .comment("steady state n_S(x, x0) = mean (1/N) sum_n |phi_n(x)|^2 |phi_n(x0)|^2")
        .comment(model_comment(params));
    for j in 0..ns.x.len() {
        table.push(vec![num(ns.x[j]), num(ns.mean[j]), num(ns.stderr[j])]);
    }
    files.write("steady_state.csv", &table)?;
    Ok(json!({ "max_residual": worst, "normalization": ns.normalization() }))
}

fn moments(
    params: &SimulationParams,
    choice: BackgroundChoice,
    t_terms: usize,
    files: &mut OutputSet,
    lines: &mut Vec<String>,
) -> Result<serde_json::Value, CliError> {
    check_dense(params)?;
    let e = eigen_ensemble(params)?;
    let m = &e.moments;
    let mut t = Table::new(&["x", "abs2", "abs4", "abs4_stderr", "re2", "re4"])
        .comment("eigenvector moments over all (realization, state) pairs; R = Re phi in the gauge phi^T phi > 0")
        .comment(model_comment(params));
    for j in 0..m.x.len() {
        t.push(vec![
            num(m.x[j]),
            num(m.abs2[j]),
            num(m.abs4[j]),
            num(m.abs4_err[j]),
            num(m.re2[j]),
            num(m.re4[j]),
        ]);
    }
    files.write("moments.csv", &t)?;
    let (bg, label) = background_profile(params, choice, t_terms)?;
    let b0 = bg.at(params.x0)?.0;
    let c = cfs_contrast_from_eigenvectors(m, params.x0, b0)?;
    lines.push(format!(
        "C_CFS(x0) = {:.4} +- {:.4} (moment ratio, background {label}); kurtosis route Gamma = {:.4}, C = {:.4}",
        c.full, c.full_err, c.gamma, c.kurtosis
    ));
    Ok(json!({
        "cfs_full": c.full,
        "cfs_full_stderr": c.full_err,
        "gamma": c.gamma,
        "cfs_kurtosis": c.kurtosis,
        "background_x0": b0,
        "background": label,
        "jensen_violation": m.jensen_violation(),
    }))
}

struct Check {
    name: String,
    value: f64,
    threshold: f64,
    passed: bool,
}

fn validate(
    params: &SimulationParams,
    files: &mut OutputSet,
    lines: &mut Vec<String>,
) -> Result<(serde_json::Value, usize), CliError> {
    let mut checks = Vec::new();
    let mut add = |name: &str, value: f64, threshold: f64| {
        checks.push(Check {
            name: name.to_string(),
            value,
            threshold,
            passed: value <= threshold,
        })
    };

    let light = SimulationParams {
        n_realizations: params.n_realizations.min(4),
        ..params.clone()
    };
    let times: Vec<usize> = if params.times.is_empty() {
        vec![1, 10]
    } else {
        params.times.clone()
    };
    let exp = Experiment::new(&light)?;
    let mut norm = 0.0f64;
    for i in 0..light.n_realizations {
        for d in exp.densities(i, &times)? {
            norm = norm.max((d.iter().sum::<f64>() / params.n as f64 - 1.0).abs());
        }
    }
    add("density normalization per realization", norm, 1e-10);

    let u0 = Experiment::new(&SimulationParams {
        model: Model::U0,
        ..light.clone()
    })?;
    let vh = Experiment::new(&SimulationParams {
        model: Model::V_HALF,
        ..light.clone()
    })?;
    let equiv_times = [1, 10, 100];
    let (a, b) = (
        u0.densities(0, &equiv_times)?,
        vh.densities(0, &equiv_times)?,
    );
    let equiv = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    add("U0 / V1/2 density equality", equiv, 1e-10);

    let sym_n = if params.n <= 128 { params.n } else { 64 };
    let sym_params = SimulationParams {
        n: sym_n,
        x0: -std::f64::consts::PI / 2.0,
        ..light.clone()
    };
    let report = symmetry_report(&sym_params, &exp_disorder(&sym_params)?)?;
    for c in &report.checks {
        checks.push(Check {
            name: format!(
                "symmetry {} (N = {sym_n}, {})",
                c.name,
                if c.expected { "holds" } else { "broken" }
            ),
            value: c.max_deviation,
            threshold: c.threshold,
            passed: c.passed,
        });
    }

    let lattice = Lattice::new(params.n)?;
    let ap = AnalyticBackgroundParams::new(params.kick, params.hbar, params.n);
    let bg = approx_background_profile(&ap, &lattice, params.x0)?;
    let mut add = |name: &str, value: f64, threshold: f64| {
        checks.push(Check {
            name: name.to_string(),
            value,
            threshold,
            passed: value <= threshold,
        })
    };
    add(
        "closed-form background mean",
        (bg.normalization() - 1.0).abs(),
        1e-12,
    );
    let first = analytic_spectral_table(&ap, &lattice, params.n_omega.max(4))?;
    let nu_dev = first.nu.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    add("first-order density of states flat", nu_dev, 1e-10);
    let first_bg = numeric_background(&first, params.x0)?;
    let dev = first_bg
        .mean
        .iter()
        .zip(&bg.mean)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    add("quadrature background equals closed form", dev, 1e-10);

    let small = SimulationParams {
        n_realizations: 8,
        times: vec![5],
        ..params.clone()
    };
    let one = density_series(
        &SimulationParams {
            workers: Some(1),
            ..small.clone()
        },
        &small.times,
    )?;
    let two = density_series(
        &SimulationParams {
            workers: Some(2),
            ..small.clone()
        },
        &small.times,
    )?;
    let bitwise = if one == two { 0.0 } else { 1.0 };
    add("worker-count independence (bitwise)", bitwise, 0.0);

    let mut t = Table::new(&["check", "value", "threshold", "passed"])
        .comment("invariant suite")
        .comment(model_comment(params));
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut failed = 0;
    for c in &checks {
        failed += !c.passed as usize;
        lines.push(format!(
            "{:<width$}  {:>10.3e}  <= {:>8.1e}  {}",
            c.name,
            c.value,
            c.threshold,
            if c.passed { "PASS" } else { "FAIL" }
        ));
        t.push(vec![
            c.name.clone(),
            num(c.value),
            num(c.threshold),
            c.passed.to_string(),
        ]);
    }
    files.write("validate.csv", &t)?;
    Ok((json!({ "checks": checks.len(), "failed": failed }), failed))
}

fn exp_disorder(params: &SimulationParams) -> Result<rotorlab_core::DisorderRealization, CliError> {
    Ok(Experiment::new(params)?.disorder(0)?)
}

//! The experiment runners: each consumes a validated config and produces CSV
//! rows plus manifest checks.

use cavity_entropy::bayes::{simulate_inference, DecisionRule, MeasurementPosterior};
use cavity_entropy::dynamics::BRIGHT;
use cavity_entropy::dynamics::{evolve, evolve_purified, initial_state, ModelParams, StepControl};
use cavity_entropy::hilbert::{
    coherent_state, number_operator, partial_trace, trace_distance, truncation_dim,
};
use cavity_entropy::infotheory::{
    binary_entropy, classical_mi_measurement, husimi_q_row, quantum_mutual_information,
    uhlmann_fidelity, von_neumann_entropy, EntropyTimeSeries, GridSpec,
};
use cavity_entropy::steady_state::{
    conditional_fidelity_sum, conditional_fidelity_thermo, fidelity_f, final_cavity_state,
    final_intensity, kernel_k, m_half, m_min, rho_c, SteadyStateInputs,
};
use num_complex::Complex;
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{Check, RunManifest};

pub enum RunError {
    Config(ConfigError),
    Numerical(cavity_entropy::Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<cavity_entropy::Error> for RunError {
    fn from(e: cavity_entropy::Error) -> Self {
        RunError::Numerical(e)
    }
}

pub struct RunOutput {
    pub header: Option<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

fn step_control(cfg: &ExperimentConfig) -> StepControl<f64> {
    let mut ctrl = StepControl::default();
    if let Some(rtol) = cfg.rtol {
        ctrl.rtol = rtol;
    }
    if let Some(atol) = cfg.atol {
        ctrl.atol = atol;
    }
    if let Some(tol) = cfg.equilibrium_tol {
        ctrl.equilibrium_tol = tol;
    }
    if let Some(snapshots) = cfg.snapshots {
        ctrl.snapshots = snapshots;
    }
    ctrl
}

fn horizon(cfg: &ExperimentConfig, m: f64) -> f64 {
    cfg.t_end
        .unwrap_or_else(|| if m > 1.0 { 50.0 * m.sqrt() } else { 50.0 })
}

/// Husimi function of the analytic equilibrium cavity state over a grid.
pub fn run_qfunc(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunOutput, RunError> {
    let x = cfg.require_scalar("x")?;
    let n_bar0 = cfg.require_scalar("n_bar0")?;
    let m = cfg.require_scalar("m")?;
    let n_max = truncation_dim(n_bar0, cfg.tail_tol());
    manifest.record_n_max(n_max);
    let alpha = Complex::new(n_bar0.sqrt(), 0.0);
    let inputs = SteadyStateInputs::new(x, n_bar0, m, n_max).map_err(RunError::Numerical)?;
    let state = final_cavity_state(&inputs, alpha)?;

    let halfwidth = cfg.grid_halfwidth.unwrap_or(n_bar0.sqrt() + 5.0);
    let points = cfg.grid_points.unwrap_or(401);
    let spec = GridSpec::square(halfwidth, points)?;
    let re_axis = spec.re_axis();
    let im_axis = spec.im_axis();
    let rows_by_im: Vec<Vec<f64>> = im_axis
        .par_iter()
        .map(|&im| husimi_q_row(&state, im, &re_axis).expect("validated state"))
        .collect();

    let mut rows = Vec::with_capacity(points * points);
    let mut integral = 0.0;
    for (iy, &im) in im_axis.iter().enumerate() {
        for (ix, &re) in re_axis.iter().enumerate() {
            let q = rows_by_im[iy][ix];
            integral += q;
            rows.push(vec![re, im, q]);
        }
    }
    integral *= spec.cell_area();
    let covers_support = halfwidth >= n_bar0.sqrt() + 5.0 - 1e-12;
    manifest.checks.push(Check::new(
        "q_grid_normalization",
        !covers_support || (integral - 1.0).abs() < 0.02,
        format!("Riemann integral {integral:.5} (grid covers support: {covers_support})"),
    ));
    Ok(RunOutput {
        header: Some("re_beta,im_beta,q_value"),
        rows,
    })
}

/// Fidelity between initial and equilibrium cavity states over a log-spaced
/// (n_bar0, m) grid.
pub fn run_fidelity_contour(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunOutput, RunError> {
    let x = cfg.require_scalar("x")?;
    let n_bars = require_log_sweep(cfg, "n_bar0")?;
    let ms = require_log_sweep(cfg, "m")?;
    let tail = cfg.tail_tol();

    let points: Vec<(f64, f64)> = n_bars
        .iter()
        .flat_map(|&n| ms.iter().map(move |&m| (n, m)))
        .collect();
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(n_bar, m)| {
            let n_max = truncation_dim(n_bar, tail);
            let inputs = SteadyStateInputs::new(x, n_bar, m, n_max).expect("validated");
            vec![n_bar, m, fidelity_f(&inputs)]
        })
        .collect();
    for &(n_bar, _) in &points {
        manifest.record_n_max(truncation_dim(n_bar, tail));
    }
    let in_range = rows.iter().all(|r| (0.0..=1.0 + 1e-12).contains(&r[2]));
    manifest.checks.push(Check::new(
        "fidelity_in_unit_interval",
        in_range,
        format!("{} grid points", rows.len()),
    ));
    Ok(RunOutput {
        header: Some("n_bar0,m,fidelity"),
        rows,
    })
}

/// Finite-sum and thermodynamic conditional fidelities along an m sweep.
pub fn run_fidelity_curve(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunOutput, RunError> {
    let n_bar0 = cfg.require_scalar("n_bar0")?;
    let ms = cfg.require_sweep_values("m")?;
    let n_max = truncation_dim(n_bar0, cfg.tail_tol());
    manifest.record_n_max(n_max);

    let rows: Vec<Vec<f64>> = ms
        .par_iter()
        .map(|&m| {
            vec![
                m,
                conditional_fidelity_sum(n_bar0, m, n_max),
                conditional_fidelity_thermo(m),
            ]
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1][1] >= w[0][1]);
    manifest.checks.push(Check::new(
        "finite_sum_monotone_in_m",
        monotone,
        format!("{} sweep points", rows.len()),
    ));
    let m_low = m_min(n_bar0);
    let m_50 = m_half::<f64>()?;
    manifest.extra = Some(serde_json::json!({ "m_min": m_low, "m_half": m_50 }));
    Ok(RunOutput {
        header: Some("m,f_sum,f_thermo"),
        rows,
    })
}

/// Entropy time series of the purified evolution.
pub fn run_evolve_entropy(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunOutput, RunError> {
    let x = cfg.require_scalar("x")?;
    let n_bar0 = cfg.require_scalar("n_bar0")?;
    let m = cfg.require_scalar("m")?;
    let params = ModelParams::from_critical_number(m, x, n_bar0, cfg.tail_tol())?;
    manifest.record_n_max(params.n_max());
    let ctrl = step_control(cfg);
    let traj = evolve_purified(&params, horizon(cfg, m), &ctrl)?;
    let series = EntropyTimeSeries::from_trajectory(&traj)?;
    let s0 = series.s0;
    let norm = |v: f64| if s0 > 0.0 { v / s0 } else { 0.0 };

    let mut rows = Vec::with_capacity(series.times.len());
    for k in 0..series.times.len() {
        rows.push(vec![
            series.times[k],
            series.s_a[k],
            series.s_r[k],
            series.s_l[k],
            series.s_rl[k],
            series.s_arl[k],
            series.s_p[k],
            series.i_rl[k],
            norm(series.s_a[k]),
            norm(series.s_r[k]),
            norm(series.s_l[k]),
            norm(series.s_rl[k]),
            norm(series.s_arl[k]),
            norm(series.s_p[k]),
            norm(series.i_rl[k]),
        ]);
    }
    let copy_drift = series
        .s_r
        .iter()
        .map(|s| (s - s0).abs())
        .fold(0.0f64, f64::max);
    manifest.checks.push(Check::new(
        "copy_entropy_conserved",
        copy_drift < 1e-8,
        format!("max |S_R - S0| = {copy_drift:.2e}"),
    ));
    manifest.checks.push(Check::new(
        "equilibrium_detected",
        traj.converged_at().is_some(),
        format!("converged_at = {:?}", traj.converged_at()),
    ));
    manifest.extra = Some(serde_json::json!({
        "s0": s0,
        "converged_at_index": traj.converged_at(),
        "converged_at_time": traj.converged_at().map(|k| traj.times()[k]),
    }));
    Ok(RunOutput {
        header: Some(
            "t,S_A,S_R,S_L,S_RL,S_ARL,S_P,I_RL,\
             S_A_norm,S_R_norm,S_L_norm,S_RL_norm,S_ARL_norm,S_P_norm,I_RL_norm",
        ),
        rows,
    })
}

/// Equilibrium quantum and measurement-based mutual information over a
/// parameter sweep; points are independent and evaluated in parallel.
pub fn run_mi_sweep(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunOutput, RunError> {
    let x = cfg.require_scalar("x")?;
    let ms = cfg.require_sweep_values("m")?;
    let n_bars = cfg.require_sweep_values("n_bar0")?;
    let tail = cfg.tail_tol();
    let base_ctrl = StepControl {
        snapshots: cfg.snapshots.unwrap_or(51),
        ..step_control(cfg)
    };

    let points: Vec<(f64, f64)> = ms
        .iter()
        .flat_map(|&m| n_bars.iter().map(move |&n| (m, n)))
        .collect();
    let results: Vec<Result<Vec<f64>, cavity_entropy::Error>> = points
        .par_iter()
        .map(|&(m, n_bar)| {
            let params = ModelParams::from_critical_number(m, x, n_bar, tail)?;
            let traj = evolve_purified(&params, horizon(cfg, m), &base_ctrl)?;
            let state = traj
                .equilibrium_state()
                .unwrap_or_else(|| traj.last_state());
            let rho_rl = partial_trace(state, &[1, 2])?;
            let quantum = quantum_mutual_information(&rho_rl, &[0])?;
            let classical =
                classical_mi_measurement(x, conditional_fidelity_sum(n_bar, m, params.n_max()));
            Ok(vec![m, n_bar, quantum, classical])
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    for &(_, n_bar) in &points {
        manifest.record_n_max(truncation_dim(n_bar, tail));
    }
    let s0 = binary_entropy(x);
    let bounded = rows
        .iter()
        .all(|r| r[2] >= -1e-8 && r[2] <= s0 + 1e-8 && r[2] >= r[3] - 1e-6);
    manifest.checks.push(Check::new(
        "mi_within_bounds",
        bounded,
        format!("{} sweep points, S0 = {s0:.6}", rows.len()),
    ));
    Ok(RunOutput {
        header: Some("m,n_bar0,i_rl_equilibrium,i_classical"),
        rows,
    })
}

/// Monte-Carlo check of the click-inference success probability.
pub fn run_bayes(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunOutput, RunError> {
    let x = match cfg.x {
        Some(spec) => spec
            .scalar()
            .ok_or_else(|| ConfigError::new("'x' must be a scalar for this experiment"))?,
        None => 0.5,
    };
    let fs = cfg.require_sweep_values("f")?;
    let trials = cfg.trials.unwrap_or(100_000);
    let seed = manifest.seed;

    let mut rows = Vec::with_capacity(fs.len());
    let mut consistent = true;
    for (i, &f) in fs.iter().enumerate() {
        let analytic = MeasurementPosterior::new(x, f)
            .map(|t| t.p_correct)
            .map_err(RunError::Numerical)?;
        let sim = simulate_inference(
            x,
            f,
            DecisionRule::PosteriorSample,
            trials,
            seed.wrapping_add(i as u64),
        )?;
        let rate = sim.success_rate();
        let stderr = sim.std_error();
        consistent &= (rate - analytic).abs() < 3.0 * stderr;
        rows.push(vec![f, analytic, rate, stderr]);
    }
    manifest.checks.push(Check::new(
        "monte_carlo_within_three_sigma",
        consistent,
        format!("{} fidelity points, {trials} trials each", rows.len()),
    ));
    Ok(RunOutput {
        header: Some("f,p_correct,mc_rate,std_error"),
        rows,
    })
}

fn require_log_sweep(cfg: &ExperimentConfig, name: &str) -> Result<Vec<f64>, ConfigError> {
    let spec = match name {
        "n_bar0" => cfg.n_bar0,
        "m" => cfg.m,
        other => return Err(ConfigError::new(format!("unknown parameter '{other}'"))),
    }
    .ok_or_else(|| ConfigError::new(format!("missing required key '{name}'")))?;
    match spec {
        crate::config::ParamSpec::Sweep(s) if s.log_spacing => Ok(spec.expand()),
        crate::config::ParamSpec::Sweep(_) => Err(ConfigError::new(format!(
            "'{name}' must be a log-spaced sweep for the contour experiment"
        ))),
        crate::config::ParamSpec::Scalar(_) => Err(ConfigError::new(format!(
            "'{name}' must be a sweep for the contour experiment"
        ))),
    }
}

/// The standing invariant suite: closed-form identities, dynamics-vs-formula
/// oracle equivalence, entropy bounds, and inference consistency.
pub fn run_validate(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunOutput, RunError> {
    let tail = cfg.tail_tol();
    let checks = &mut manifest.checks;

    // kernel identities
    let kernel_ok = (kernel_k(0usize, 0, 0.5f64) - 1.0).abs() < 1e-15
        && (kernel_k(0usize, 1, 0.5f64) - 4.0 / 7.0).abs() < 1e-15
        && (kernel_k(3usize, 8, 0.37f64) - kernel_k(8, 3, 0.37)).abs() < 1e-15;
    checks.push(Check::new(
        "kernel_identities",
        kernel_ok,
        "K(0,0)=1, K(0,1|m=1/2)=4/7, symmetry",
    ));

    // equilibrium state trace identity
    let n_bar = 5.0f64;
    let n_max = truncation_dim(n_bar, tail);
    let alpha = Complex::new(n_bar.sqrt(), 0.0);
    let trace_dev = (rho_c(alpha, 0.5, n_max)?.trace() - 1.0).abs();
    checks.push(Check::new(
        "rho_c_unit_trace",
        trace_dev < 1e-6,
        format!("|tr - 1| = {trace_dev:.2e}"),
    ));

    // overlap route vs closed form
    let inputs = SteadyStateInputs::new(0.6, n_bar, 0.5, n_max)?;
    let state = final_cavity_state(&inputs, alpha)?;
    let ket = coherent_state(alpha, n_max)?;
    let overlap = uhlmann_fidelity(&ket.projector()?, &state)?;
    let dev = (overlap - fidelity_f(&inputs)).abs();
    checks.push(Check::new(
        "fidelity_overlap_identity",
        dev < 1e-8,
        format!("|<a|rho|a> - F| = {dev:.2e}"),
    ));

    // displaced vacuum population equals the fidelity
    let wide_max = truncation_dim(4.0 * n_bar, tail);
    let wide_inputs = SteadyStateInputs::new(0.6, n_bar, 0.5, wide_max)?;
    let wide_state = final_cavity_state(&wide_inputs, alpha)?;
    let displaced = cavity_entropy::hilbert::displace(&wide_state, alpha)?;
    let dev = (displaced.matrix()[(0, 0)].re - fidelity_f(&wide_inputs)).abs();
    checks.push(Check::new(
        "displaced_vacuum_equals_fidelity",
        dev < 1e-6,
        format!("deviation {dev:.2e}"),
    ));

    // intensity identity
    let measured = state.expectation(&number_operator(n_max))?.re;
    let dev = (measured - final_intensity(0.6, n_bar)).abs();
    checks.push(Check::new(
        "intensity_identity",
        dev < 1e-6,
        format!("deviation {dev:.2e}"),
    ));

    // fidelity half-crossing
    let root: f64 = m_half()?;
    let residual = (conditional_fidelity_thermo(root) - 0.5).abs();
    checks.push(Check::new(
        "m_half_in_range",
        (0.085..=0.095).contains(&root) && residual < 1e-6,
        format!("m_half = {root:.5}"),
    ));

    // entropy mixing bounds on the analytic states
    let s0 = binary_entropy(0.5);
    let s_rc = von_neumann_entropy(&rho_c(alpha, 1.0, n_max)?)?;
    let mixed_inputs = SteadyStateInputs::new(0.5, n_bar, 1.0, n_max)?;
    let s_l = von_neumann_entropy(&final_cavity_state(&mixed_inputs, alpha)?)?;
    let bounds_ok = 0.5 * s_rc <= s_l + 1e-8 && s_l <= s0 + 0.5 * s_rc + 1e-8;
    checks.push(Check::new(
        "entropy_mixing_bounds",
        bounds_ok,
        format!("{:.6} <= {s_l:.6} <= {:.6}", 0.5 * s_rc, s0 + 0.5 * s_rc),
    ));

    // integrated dynamics against the closed form (small, fast instance)
    let params = ModelParams::from_critical_number(0.5, 1.0, 2.0, tail)?;
    let rho0 = initial_state(&params)?;
    let traj = evolve(
        &rho0,
        &params,
        50.0,
        &StepControl {
            snapshots: 2,
            ..StepControl::default()
        },
    )?;
    let cavity = partial_trace(traj.last_state(), &[1])?;
    let oracle_inputs = SteadyStateInputs::new(1.0, 2.0, 0.5, params.n_max())?;
    let analytic = final_cavity_state(&oracle_inputs, params.alpha())?;
    let dist = trace_distance(&cavity, &analytic)?;
    checks.push(Check::new(
        "dynamics_matches_closed_form",
        dist < 1e-4,
        format!("trace distance {dist:.2e}"),
    ));
    let nc = params.n_max() + 1;
    let remnant = traj.last_state().matrix()[(BRIGHT * nc, BRIGHT * nc)].re;
    let expected = 1.0 * (-2.0f64).exp();
    checks.push(Check::new(
        "bright_remnant_population",
        (remnant - expected).abs() < 1e-6,
        format!("<b,0|rho|b,0> = {remnant:.6} vs {expected:.6}"),
    ));

    // purified entropy bookkeeping on a short run
    let pure_params = ModelParams::from_critical_number(0.5, 0.5, 1.0, tail)?;
    let pure_traj = evolve_purified(
        &pure_params,
        20.0,
        &StepControl {
            snapshots: 21,
            ..StepControl::default()
        },
    )?;
    let series = EntropyTimeSeries::from_trajectory(&pure_traj)?;
    let drift = series
        .s_r
        .iter()
        .map(|s| (s - series.s0).abs())
        .fold(0.0f64, f64::max);
    checks.push(Check::new(
        "purified_copy_entropy_conserved",
        drift < 1e-8,
        format!("max |S_R - S0| = {drift:.2e}"),
    ));

    // inference consistency at a fixed seed
    let sim = simulate_inference(
        0.5,
        0.5,
        DecisionRule::PosteriorSample,
        20_000,
        manifest.seed,
    )?;
    let expected = cavity_entropy::bayes::p_correct(0.5);
    let dev = (sim.success_rate() - expected).abs();
    checks.push(Check::new(
        "monte_carlo_consistency",
        dev < 3.0 * sim.std_error(),
        format!("rate {:.5} vs {expected:.5}", sim.success_rate()),
    ));

    manifest.record_n_max(n_max);
    manifest.record_n_max(params.n_max());
    Ok(RunOutput {
        header: None,
        rows: Vec::new(),
    })
}

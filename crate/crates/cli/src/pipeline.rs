//! Experiment pipelines: build the model from a config, evolve, analyze,
//! and write the artifacts (series.csv / summary.json / sweep.csv).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use decoh_core::analysis::{
    compare_to_collapse, decoherence_factors, decoherence_time, reduced_sm_from_overlaps,
    DecoherenceSeries,
};
use decoh_core::error::{Error, Result};
use decoh_core::evolution::{
    extract_branches, BranchSeries, Propagator, TimeGrid, BRANCH_MIXING_TOL, ENERGY_DRIFT_TOL,
    NORM_DRIFT_TOL,
};
use decoh_core::linalg::{qubit, tensor, Operator};
use decoh_core::models::{uniform_env_state, Axis, MeasurementModel, SpinBath};
use decoh_core::pointer::{
    check_preferred_context, classify_norms, default_candidates, pointer_stability,
    predictability_sieve, BlochAxis, Regime, RegimeReport,
};
use decoh_core::C64;
use nalgebra::DMatrix;
use serde::Serialize;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

use crate::config::{ExperimentConfig, Thresholds};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    fn thresholds(&self, cfg: &ExperimentConfig) -> Result<Thresholds> {
        let mut t = cfg.thresholds;
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(Error::InvalidInput("--tol must be positive".into()));
            }
            t.context = tol;
        }
        Ok(t)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable summary");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize)]
struct RegimeSummary {
    /// ‖H_M‖ / ‖λ·H_int‖; absent when the interaction vanishes (infinite).
    ratio: Option<f64>,
    regime: String,
}

impl From<RegimeReport> for RegimeSummary {
    fn from(r: RegimeReport) -> Self {
        RegimeSummary {
            ratio: r.ratio.is_finite().then_some(r.ratio),
            regime: match r.regime {
                Regime::InteractionDominated => "interaction_dominated".into(),
                Regime::Interplay => "interplay".into(),
                Regime::SelfDominated => "self_dominated".into(),
            },
        }
    }
}

fn classify_bath(bath: &SpinBath, lambda: f64, t: &Thresholds) -> Result<RegimeReport> {
    classify_norms(
        bath.self_norm(),
        lambda.abs() * bath.interaction_norm(),
        (t.regime_low, t.regime_high),
    )
}

/// Joint S⊗M⊗E propagator for a measurement run: diagonal fast path when
/// the bath Hamiltonian is diagonal, dense otherwise.
fn joint_propagator(bath: &SpinBath, model: &MeasurementModel, lambda: f64) -> Result<Propagator> {
    let dims = model.full_dims();
    if bath.pointer_axis == Axis::Z || bath.pointer_energy == 0.0 {
        let me = bath.me_diagonal(lambda)?;
        let mut full = Vec::with_capacity(model.system_dim() * me.len());
        for _ in 0..model.system_dim() {
            full.extend_from_slice(&me);
        }
        Propagator::from_diagonal(full, dims)
    } else {
        let ch = bath.hamiltonian(lambda)?;
        let sys = Operator::identity(vec![model.system_dim()]);
        let h_full = tensor(&sys, ch.assembled()).with_factor_dims(dims)?;
        Propagator::dense(&h_full)
    }
}

struct MeasurementRun {
    series: DecoherenceSeries,
    populations: Vec<Vec<f64>>,
    trace_distance: Vec<f64>,
}

/// Core of the `run` pipeline: stream the state over the grid, pulling
/// out decoherence factors and reduced-state diagnostics at each point.
fn measurement_series(
    model: &MeasurementModel,
    prop: &Propagator,
    grid: &TimeGrid,
) -> Result<MeasurementRun> {
    let psi0 = model.correlated_state();
    let e0 = prop.energy(&psi0)?;
    let e_scale = e0.abs().max(1.0);
    let rho_c = model.collapsed_mixture();
    let times = grid.times();

    let mut r = Vec::with_capacity(times.len());
    let mut purity = Vec::with_capacity(times.len());
    let mut offdiag = Vec::with_capacity(times.len());
    let mut populations = Vec::with_capacity(times.len());
    let mut trace_distance = Vec::with_capacity(times.len());
    let mut indices: Vec<usize> = Vec::new();

    for &t in &times {
        let psi_t = prop.state_at(&psi0, t)?;
        let norm_drift = (psi_t.amplitudes().norm() - 1.0).abs();
        if norm_drift > NORM_DRIFT_TOL {
            return Err(Error::InvariantBreach(format!(
                "norm drift {norm_drift:.3e} at t = {t}"
            )));
        }
        let e_t = prop.energy(&psi_t)?;
        if (e_t - e0).abs() > ENERGY_DRIFT_TOL * e_scale {
            return Err(Error::InvariantBreach(format!(
                "energy drift {:.3e} at t = {t}",
                (e_t - e0).abs()
            )));
        }

        let branches = extract_branches(&psi_t, model, BRANCH_MIXING_TOL)?;
        let mut idx = Vec::new();
        let mut vecs = Vec::new();
        for (i, b) in branches.into_iter().enumerate() {
            if let Some(v) = b {
                idx.push(i);
                vecs.push(vec![v]);
            }
        }
        if indices.is_empty() {
            indices = idx.clone();
        } else if indices != idx {
            return Err(Error::ModelViolation("branch set changed mid-run".into()));
        }
        let one = BranchSeries {
            times: vec![t],
            indices: idx.clone(),
            branches: vecs,
        };
        let dec = decoherence_factors(&one)?;
        let r_t = dec.r.into_iter().next().expect("one grid point");

        let rho = reduced_sm_from_overlaps(model, &idx, &r_t)?;
        purity.push(rho.purity());
        offdiag.push(offdiag_from_overlaps(model, &idx, &r_t));
        let dp = model.pointer_dim();
        populations.push(
            idx.iter()
                .map(|&i| rho.matrix()[(i * dp + i, i * dp + i)].re)
                .collect(),
        );
        trace_distance.push(compare_to_collapse(&rho, &rho_c)?);
        r.push(r_t);
    }

    let series = DecoherenceSeries {
        times,
        branch_indices: indices,
        r,
        purity,
        offdiag,
        expectations: BTreeMap::new(),
    };
    Ok(MeasurementRun {
        series,
        populations,
        trace_distance,
    })
}

/// Off-diagonal Frobenius weight of ρ_r in the correlated basis, straight
/// from coefficients and overlaps.
fn offdiag_from_overlaps(model: &MeasurementModel, indices: &[usize], r: &DMatrix<C64>) -> f64 {
    let c = model.coefficients();
    let mut acc = 0.0;
    for (a, &i) in indices.iter().enumerate() {
        for (b, &j) in indices.iter().enumerate() {
            if a != b {
                acc += (c[i] * c[j].conj() * r[(a, b)]).norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn series_csv(run: &MeasurementRun) -> String {
    let s = &run.series;
    let idx = &s.branch_indices;
    let mut header = String::from("t");
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            header.push_str(&format!(",abs_r_{i}_{j}"));
        }
    }
    header.push_str(",purity,offdiag");
    for &i in idx {
        header.push_str(&format!(",pop_{i}"));
    }
    header.push_str(",trace_distance\n");

    let mut out = header;
    for (k, &t) in s.times.iter().enumerate() {
        out.push_str(&format!("{t:.16e}"));
        let m = &s.r[k];
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                out.push_str(&format!(",{:.16e}", m[(a, b)].norm()));
            }
        }
        out.push_str(&format!(",{:.16e},{:.16e}", s.purity[k], s.offdiag[k]));
        for p in &run.populations[k] {
            out.push_str(&format!(",{p:.16e}"));
        }
        out.push_str(&format!(",{:.16e}\n", run.trace_distance[k]));
    }
    out
}

#[derive(Debug, Serialize)]
struct RunSummary {
    tool_version: &'static str,
    config: ExperimentConfig,
    couplings: Vec<f64>,
    env_energies: Vec<f64>,
    regime: RegimeSummary,
    decoherence_threshold: f64,
    decoherence_time: Option<f64>,
    max_offdiag_r_final: f64,
    purity_final: f64,
    trace_distance_at_decoherence: Option<f64>,
    trace_distance_final: f64,
}

pub fn cmd_run(cfg: &ExperimentConfig, ov: &Overrides) -> Result<()> {
    let thresholds = ov.thresholds(cfg)?;
    let bath = cfg.model.bath(ov.seed)?;
    let model =
        MeasurementModel::qubit_with_uniform_bath(cfg.model.branch_coefficients()?, cfg.model.n_env)?;
    let prop = joint_propagator(&bath, &model, cfg.lambda)?;
    let grid = TimeGrid::new(cfg.grid.t_start, cfg.grid.t_end, cfg.grid.n_steps)?;

    let run = measurement_series(&model, &prop, &grid)?;
    let series = &run.series;
    let t_dec = decoherence_time(series, thresholds.decoherence)?;
    let td_at = t_dec.map(|td| {
        let k = series.times.iter().position(|&t| t == td).expect("grid time");
        run.trace_distance[k]
    });
    let last = series.times.len() - 1;

    let summary = RunSummary {
        tool_version: TOOL_VERSION,
        config: cfg.clone(),
        couplings: bath.couplings.clone(),
        env_energies: bath.env_energies.clone(),
        regime: classify_bath(&bath, cfg.lambda, &thresholds)?.into(),
        decoherence_threshold: thresholds.decoherence,
        decoherence_time: t_dec,
        max_offdiag_r_final: series.max_offdiag_r(last),
        purity_final: series.purity[last],
        trace_distance_at_decoherence: td_at,
        trace_distance_final: run.trace_distance[last],
    };

    let dir = ov.out_dir(cfg);
    write_file(&dir, "series.csv", &series_csv(&run))?;
    write_file(&dir, "summary.json", &to_json(&summary))?;
    Ok(())
}

/// Decoherence time of the pure-dephasing reference (same couplings,
/// Δ = 0) measured on an adaptive grid: step at 1/64 of the Gaussian
/// estimate, scanning until max|r| crosses the threshold.
fn reference_decoherence_time(
    cfg: &ExperimentConfig,
    bath: &SpinBath,
    threshold: f64,
) -> Result<f64> {
    let g = &bath.couplings;
    let sum_g2: f64 = g.iter().map(|x| x * x).sum();
    let rate = cfg.lambda.abs() * sum_g2.sqrt();
    if rate == 0.0 {
        return Err(Error::InvalidInput(
            "no dephasing (λ·g = 0); set sieve.t_probe explicitly".into(),
        ));
    }
    let reference = SpinBath::new(
        g.to_vec(),
        bath.env_energies.clone(),
        0.0,
        Axis::Z,
    )?;
    let model =
        MeasurementModel::qubit_with_uniform_bath(cfg.model.branch_coefficients()?, cfg.model.n_env)?;
    let prop = joint_propagator(&reference, &model, cfg.lambda)?;
    let psi0 = model.correlated_state();
    let dt = 1.0 / (2.0 * rate * 64.0);
    for j in 1..=200_000u64 {
        let t = j as f64 * dt;
        let psi_t = prop.state_at(&psi0, t)?;
        let branches = extract_branches(&psi_t, &model, BRANCH_MIXING_TOL)?;
        let mut worst = 0.0f64;
        let tracked: Vec<_> = branches.into_iter().flatten().collect();
        for a in 0..tracked.len() {
            for b in a + 1..tracked.len() {
                worst = worst.max(tracked[b].dotc(&tracked[a]).norm());
            }
        }
        if worst <= threshold {
            return Ok(t);
        }
    }
    Err(Error::InvalidInput(
        "reference run never decoheres; set sieve.t_probe explicitly".into(),
    ))
}

#[derive(Debug, Serialize)]
struct WinnerSummary {
    index: usize,
    theta: f64,
    phi: f64,
    angle_from_z: f64,
    angle_to_x: f64,
    score: f64,
}

#[derive(Debug, Serialize)]
struct SieveSummary {
    tool_version: &'static str,
    config: ExperimentConfig,
    couplings: Vec<f64>,
    env_energies: Vec<f64>,
    regime: RegimeSummary,
    t_probe: f64,
    candidate_count: usize,
    winner: WinnerSummary,
}

struct SievePoint {
    t_probe: f64,
    winner: WinnerSummary,
    csv: String,
    regime: RegimeReport,
}

fn sieve_point(cfg: &ExperimentConfig, bath: &SpinBath, thresholds: &Thresholds) -> Result<SievePoint> {
    let t_probe = match cfg.sieve.t_probe {
        Some(tp) => tp,
        None => {
            cfg.sieve.t_probe_scale
                * reference_decoherence_time(cfg, bath, thresholds.decoherence)?
        }
    };
    let ch = bath.hamiltonian(cfg.lambda)?;
    let env0 = uniform_env_state(cfg.model.n_env)?;
    let candidates = default_candidates(cfg.sieve.grid_size);
    let result = predictability_sieve(&ch, &candidates, &env0, t_probe)?;

    let w = result.winner();
    let winner = WinnerSummary {
        index: result.winner_index(),
        theta: w.theta,
        phi: w.phi,
        angle_from_z: w.angle_from_z(),
        angle_to_x: w.line_angle_to(&BlochAxis::x()),
        score: result.winner_score(),
    };
    let mut csv = String::from("index,theta,phi,angle_from_z,score\n");
    for (i, axis) in result.candidates.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            axis.theta,
            axis.phi,
            axis.angle_from_z(),
            result.scores[i]
        ));
    }
    Ok(SievePoint {
        t_probe,
        winner,
        csv,
        regime: classify_bath(bath, cfg.lambda, thresholds)?,
    })
}

pub fn cmd_sieve(cfg: &ExperimentConfig, ov: &Overrides) -> Result<()> {
    let thresholds = ov.thresholds(cfg)?;
    let bath = cfg.model.bath(ov.seed)?;
    let point = sieve_point(cfg, &bath, &thresholds)?;
    let summary = SieveSummary {
        tool_version: TOOL_VERSION,
        config: cfg.clone(),
        couplings: bath.couplings.clone(),
        env_energies: bath.env_energies.clone(),
        regime: point.regime.into(),
        t_probe: point.t_probe,
        candidate_count: cfg.sieve.grid_size + 2,
        winner: point.winner,
    };
    let dir = ov.out_dir(cfg);
    write_file(&dir, "candidates.csv", &point.csv)?;
    write_file(&dir, "summary.json", &to_json(&summary))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PointerSummary {
    tool_version: &'static str,
    config: ExperimentConfig,
    couplings: Vec<f64>,
    env_energies: Vec<f64>,
    regime: RegimeSummary,
    commutes: bool,
    commutator_norm: f64,
    respects_degeneracy: bool,
    member: bool,
    witness_eigenspace: Option<usize>,
    stability_norm_full: f64,
    stability_norm_reduced: f64,
    stability_norm_env: f64,
}

pub fn cmd_check_pointer(cfg: &ExperimentConfig, ov: &Overrides) -> Result<()> {
    let thresholds = ov.thresholds(cfg)?;
    let bath = cfg.model.bath(ov.seed)?;
    let ch = bath.hamiltonian(cfg.lambda)?;

    let (theta, phi) = (cfg.pointer.theta, cfg.pointer.phi);
    let n_dot_sigma = qubit::sigma_z() * C64::new(theta.cos(), 0.0)
        + qubit::sigma_x() * C64::new(theta.sin() * phi.cos(), 0.0)
        + qubit::sigma_y() * C64::new(theta.sin() * phi.sin(), 0.0);
    let p_m_op = Operator::from_matrix(n_dot_sigma)?;
    let p_m = decoh_core::models::PointerObservable::from_hermitian(&p_m_op, 1e-9)?;
    let env_dims = vec![2usize; cfg.model.n_env];
    let lifted = decoh_core::models::lift_pointer(&p_m, &env_dims);

    let verdict =
        check_preferred_context(&lifted.to_operator(), ch.assembled(), thresholds.context)?;
    let norms = pointer_stability(&lifted, &ch)?;

    let summary = PointerSummary {
        tool_version: TOOL_VERSION,
        config: cfg.clone(),
        couplings: bath.couplings.clone(),
        env_energies: bath.env_energies.clone(),
        regime: classify_bath(&bath, cfg.lambda, &thresholds)?.into(),
        commutes: verdict.commutes,
        commutator_norm: verdict.commutator_norm,
        respects_degeneracy: verdict.respects_degeneracy,
        member: verdict.is_member(),
        witness_eigenspace: verdict.witness,
        stability_norm_full: norms.norm_full,
        stability_norm_reduced: norms.norm_reduced,
        stability_norm_env: norms.norm_env,
    };
    let dir = ov.out_dir(cfg);
    write_file(&dir, "summary.json", &to_json(&summary))?;
    Ok(())
}

fn apply_param(cfg: &ExperimentConfig, param: &str, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match param {
        "lambda" => c.lambda = value,
        "delta" => c.model.delta = value,
        "n_env" => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "n_env must be a nonnegative integer, got {value}"
                )));
            }
            c.model.n_env = value as usize;
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown sweep parameter '{other}' (expected lambda, delta, or n_env)"
            )))
        }
    }
    Ok(c)
}

pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    ov: &Overrides,
    param: &str,
    values: &[f64],
) -> Result<i32> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty sweep value list".into()));
    }
    // Validate the parameter name up front so a typo fails fast.
    apply_param(cfg, param, values[0])?;

    let dir = ov.out_dir(cfg);
    let mut csv = String::from(
        "param,value,status,regime,ratio,winner_theta,winner_phi,winner_angle_from_z,decoherence_time\n",
    );
    let mut worst: i32 = 0;
    for &v in values {
        let row = sweep_value(cfg, ov, param, v, &dir);
        match row {
            Ok(line) => csv.push_str(&line),
            Err(e) => {
                worst = worst.max(crate::exit_code(&e));
                csv.push_str(&format!("{param},{v:.16e},error: {e},,,,,\n"));
            }
        }
    }
    write_file(&dir, "sweep.csv", &csv)?;
    Ok(worst)
}

fn sweep_value(
    cfg: &ExperimentConfig,
    ov: &Overrides,
    param: &str,
    value: f64,
    dir: &Path,
) -> Result<String> {
    let c = apply_param(cfg, param, value)?;
    let thresholds = ov.thresholds(&c)?;
    let bath = c.model.bath(ov.seed)?;
    let point = sieve_point(&c, &bath, &thresholds)?;
    let t_dec = reference_decoherence_time(&c, &bath, thresholds.decoherence)?;

    #[derive(Serialize)]
    struct SweepPointSummary {
        tool_version: &'static str,
        param: String,
        value: f64,
        regime: RegimeSummary,
        t_probe: f64,
        winner: WinnerSummary,
        decoherence_time: f64,
    }
    let regime: RegimeSummary = point.regime.into();
    let line = format!(
        "{param},{value:.16e},ok,{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
        regime.regime,
        regime
            .ratio
            .map(|r| format!("{r:.16e}"))
            .unwrap_or_else(|| "inf".into()),
        point.winner.theta,
        point.winner.phi,
        point.winner.angle_from_z,
        t_dec,
    );
    let summary = SweepPointSummary {
        tool_version: TOOL_VERSION,
        param: param.to_string(),
        value,
        regime,
        t_probe: point.t_probe,
        winner: point.winner,
        decoherence_time: t_dec,
    };
    let sub = dir.join(format!("{param}_{value}"));
    write_file(&sub, "candidates.csv", &point.csv)?;
    write_file(&sub, "summary.json", &to_json(&summary))?;
    Ok(line)
}

//! Experiment orchestration and on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::{ExperimentConfig, RunMode};
use super::initial::generate_initial_data;
use crate::diagnostics::{
    fit_decay_exponent, predicted_decay_exponent, DecayFit, Diagnostics, DiagnosticsRecord, SolutionNormTracker,
};
use crate::error::{Error, Result};
use crate::integrator::{compute_dt, integrate, integrate_with_delta, Snapshot};
use crate::linear::evolve_linear_exact;
use crate::spectral::ScalarField;
use crate::state::{compute_delta, compute_phi, PerturbationState};

pub const RECORDS_FILE: &str = "records.csv";
pub const ECHO_FILE: &str = "config.echo";
pub const SUMMARY_FILE: &str = "summary.txt";

pub const CSV_COLUMNS: [&str; 19] = [
    "t",
    "l2_phi",
    "l2_u",
    "l2_a",
    "l2_b",
    "besov_low_phi_u_B0",
    "besov_high_phi_B1",
    "besov_high_u_B0",
    "besov_low_phi_u_B2",
    "besov_high_u_B2",
    "lyapunov",
    "X_t",
    "neg_idx_a",
    "neg_idx_b",
    "neg_idx_phi",
    "neg_idx_u",
    "total_a",
    "total_b",
    "min_rho",
];

/// Run-level invariant checks derived from the record history.
#[derive(Debug, Clone, PartialEq)]
pub struct RunChecks {
    pub x0: f64,
    pub x_max: f64,
    /// Largest relative increase of the Lyapunov functional between
    /// consecutive records with `t >= 1` (`None` if fewer than two).
    pub lyapunov_max_rise: Option<f64>,
    /// Per component `max_t value(t)/value(0)` of the negative-index panel.
    pub neg_index_max_ratio: [(&'static str, f64); 4],
    pub drift_total_a: f64,
    pub drift_total_b: f64,
    pub min_rho: f64,
}

impl RunChecks {
    pub fn from_records(records: &[DiagnosticsRecord]) -> Option<Self> {
        let first = records.first()?;
        let x_max = records.iter().map(|r| r.x_t).fold(0.0, f64::max);
        let lyapunov_max_rise = records
            .windows(2)
            .filter(|w| w[0].t >= 1.0)
            .map(|w| (w[1].lyapunov - w[0].lyapunov) / w[0].lyapunov)
            .reduce(f64::max);
        let init = first.neg_index.values();
        let mut neg_index_max_ratio = init.map(|(name, _)| (name, 0.0_f64));
        for r in records {
            for (k, (_, v)) in r.neg_index.values().iter().enumerate() {
                let ratio = if init[k].1 > 0.0 {
                    v / init[k].1
                } else if *v == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                };
                neg_index_max_ratio[k].1 = neg_index_max_ratio[k].1.max(ratio);
            }
        }
        let drift = |f: fn(&DiagnosticsRecord) -> f64| {
            records.iter().map(|r| (f(r) - f(first)).abs()).fold(0.0, f64::max)
        };
        Some(RunChecks {
            x0: first.x_t,
            x_max,
            lyapunov_max_rise,
            neg_index_max_ratio,
            drift_total_a: drift(|r| r.totals.total_a),
            drift_total_b: drift(|r| r.totals.total_b),
            min_rho: records.iter().map(|r| r.totals.min_rho).fold(f64::INFINITY, f64::min),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub records: Vec<DiagnosticsRecord>,
    pub initial_state: PerturbationState,
    pub final_state: PerturbationState,
    /// Transported `δ` at the final time, when tracked.
    pub final_delta: Option<ScalarField>,
    pub steps: usize,
    pub fits: Vec<DecayFit>,
    /// Fits that could not be carried out, with the reason.
    pub fit_errors: Vec<(String, String)>,
    pub checks: Option<RunChecks>,
    /// Set when the validity gate stopped the run early.
    pub failure: Option<String>,
}

impl RunReport {
    /// `(t, value)` series of a CSV column or of the record-only quantities
    /// `decay_l2`, `decay_gamma1`.
    pub fn series(&self, quantity: &str) -> Result<Vec<(f64, f64)>> {
        self.records
            .iter()
            .map(|r| Ok((r.t, record_value(r, quantity)?)))
            .collect()
    }
}

/// Named scalar of a record.
pub fn record_value(r: &DiagnosticsRecord, quantity: &str) -> Result<f64> {
    Ok(match quantity {
        "decay_l2" => r.decay_l2,
        "decay_gamma1" => r.decay_gamma1,
        _ => {
            let idx = CSV_COLUMNS
                .iter()
                .position(|c| *c == quantity)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown quantity `{quantity}`")))?;
            csv_row(r)[idx]
        }
    })
}

fn csv_row(r: &DiagnosticsRecord) -> [f64; 19] {
    [
        r.t,
        r.l2_phi,
        r.l2_u,
        r.l2_a,
        r.l2_b,
        r.besov.low_phi_u_b0,
        r.besov.high_phi_b1,
        r.besov.high_u_b0,
        r.besov.low_phi_u_b2,
        r.besov.high_u_b2,
        r.lyapunov,
        r.x_t,
        r.neg_index.a,
        r.neg_index.b,
        r.neg_index.phi,
        r.neg_index.u,
        r.totals.total_a,
        r.totals.total_b,
        r.totals.min_rho,
    ]
}

/// CSV text of the record history, 17 significant digits, LF line endings.
pub fn records_to_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in records {
        let row: Vec<String> = csv_row(r).iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Reads `(t, column)` pairs back from a records CSV. The pseudo-column
/// `l2_phi_u` is `hypot(l2_phi, l2_u)`.
pub fn read_csv_series(path: impl AsRef<Path>, column: &str) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::InvalidParameter(format!("{}: no column `{name}`", path.display())))
    };
    let t_col = find("t")?;
    let cols = if column == "l2_phi_u" {
        vec![find("l2_phi")?, find("l2_u")?]
    } else {
        vec![find(column)?]
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |c: usize| -> Result<f64> {
            fields
                .get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("{}: bad value on line {}", path.display(), i + 2)))
        };
        let v = cols.iter().map(|&c| get(c)).collect::<Result<Vec<_>>>()?;
        out.push((get(t_col)?, v.iter().fold(0.0, |acc: f64, x| acc.hypot(*x))));
    }
    Ok(out)
}

/// Executes `cfg.mode` and, when `cfg.output.path` is set, writes
/// `records.csv`, `config.echo` and `summary.txt` there. A validity-gate trip
/// still writes the artifacts gathered so far before returning the error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let state0 = generate_initial_data(cfg)?;
    run_experiment_from(cfg, state0)
}

/// As [`run_experiment`] with explicitly supplied initial data.
pub fn run_experiment_from(cfg: &ExperimentConfig, state0: PerturbationState) -> Result<RunReport> {
    if let Some(dir) = &cfg.output.path {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let echo = dir.join(ECHO_FILE);
        fs::write(&echo, cfg.to_config_string()).map_err(|e| Error::io(&echo, e))?;
    }
    let diag = Diagnostics::new(state0.grid().clone(), cfg.params, cfg.lp)?;
    let mut tracker = SolutionNormTracker::new();
    let mut records = Vec::new();
    let mut last: Option<Snapshot> = None;
    let mut observe = |snap: &Snapshot| -> Result<()> {
        let mut rec = diag.record(&snap.state)?;
        tracker.track(&mut rec);
        records.push(rec);
        last = Some(snap.clone());
        Ok(())
    };

    let outcome = match cfg.mode {
        RunMode::Nonlinear => {
            if cfg.track_delta {
                let delta0 = compute_delta(&compute_phi(&state0, &cfg.params), &state0.a)?;
                integrate_with_delta(&state0, &delta0, &cfg.params, &cfg.time, cfg.output.stride, &mut observe)
                    .map(drop)
            } else {
                integrate(&state0, &cfg.params, &cfg.time, cfg.output.stride, &mut observe).map(drop)
            }
        }
        RunMode::LinearOracle | RunMode::HeatReference => {
            let spacing = cfg.output.stride as f64 * compute_dt(&state0, &cfg.params, &cfg.time);
            let t_end = cfg.time.t_end;
            let mut k = 0usize;
            loop {
                let t = (k as f64 * spacing).min(t_end);
                let state = if cfg.mode == RunMode::LinearOracle {
                    evolve_linear_exact(&state0, t, &cfg.params)?
                } else {
                    heat_flow(&state0, t)
                };
                observe(&Snapshot {
                    state,
                    delta: None,
                    step: k * cfg.output.stride,
                })?;
                if t >= t_end {
                    break;
                }
                k += 1;
            }
            Ok(())
        }
    };

    match outcome {
        Ok(()) => finish(cfg, &state0, records, last, None),
        Err(e @ Error::ValidityGate { .. }) => {
            finish(cfg, &state0, records, last, Some(e.to_string()))?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn finish(
    cfg: &ExperimentConfig,
    state0: &PerturbationState,
    records: Vec<DiagnosticsRecord>,
    last: Option<Snapshot>,
    failure: Option<String>,
) -> Result<RunReport> {
    let last = last.unwrap_or_else(|| Snapshot {
        state: state0.clone(),
        delta: None,
        step: 0,
    });
    let mut report = RunReport {
        config: cfg.clone(),
        checks: RunChecks::from_records(&records),
        records,
        initial_state: state0.clone(),
        final_state: last.state,
        final_delta: last.delta,
        steps: last.step,
        fits: Vec::new(),
        fit_errors: Vec::new(),
        failure,
    };
    if let Some(window) = cfg.output.fit_window {
        let sigma = cfg.lp.sigma;
        for (name, gamma) in [("decay_l2", 0.0), ("decay_gamma1", cfg.lp.gamma1)] {
            let series = report.series(name)?;
            match fit_decay_exponent(name, &series, window, Some(predicted_decay_exponent(gamma, sigma))) {
                Ok(fit) => report.fits.push(fit),
                Err(e) => report.fit_errors.push((name.to_string(), e.to_string())),
            }
        }
    }
    if let Some(dir) = &cfg.output.path {
        let csv = dir.join(RECORDS_FILE);
        fs::write(&csv, records_to_csv(&report.records)).map_err(|e| Error::io(&csv, e))?;
        let summary = dir.join(SUMMARY_FILE);
        fs::write(&summary, summary_text(&report)).map_err(|e| Error::io(&summary, e))?;
    }
    Ok(report)
}

/// Unit-diffusivity heat flow `e^{tΔ}` applied to every component.
pub fn heat_flow(state: &PerturbationState, t: f64) -> PerturbationState {
    let damp = |f: &ScalarField| {
        let grid = f.grid().clone();
        let k = grid.kmag();
        f.spectrum()
            .map_modes(|idx, c| c * (-k[idx] * k[idx] * t).exp())
            .to_field()
    };
    let u = crate::spectral::VectorField::new(damp(state.u.x()), damp(state.u.y())).expect("same grid");
    PerturbationState {
        a: damp(&state.a),
        u,
        b: damp(&state.b),
        t: state.t + t,
    }
}

/// Machine-readable `key = value` summary.
pub fn summary_text(report: &RunReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("mode", report.config.mode.to_string());
    kv(
        "status",
        match &report.failure {
            Some(_) => "validity_gate".into(),
            None => "ok".into(),
        },
    );
    if let Some(f) = &report.failure {
        kv("failure", f.clone());
    }
    kv("records", report.records.len().to_string());
    kv("steps", report.steps.to_string());
    kv("t_final", format!("{:.16e}", report.final_state.t));
    if let Some(c) = &report.checks {
        kv("x0", format!("{:.16e}", c.x0));
        kv("x_max", format!("{:.16e}", c.x_max));
        kv("x_max_over_x0", format!("{:.16e}", c.x_max / c.x0));
        if let Some(rise) = c.lyapunov_max_rise {
            kv("lyapunov_max_rise_after_t1", format!("{rise:.16e}"));
        }
        for (name, ratio) in c.neg_index_max_ratio {
            kv(&format!("neg_idx_max_ratio_{name}"), format!("{ratio:.16e}"));
        }
        kv("drift_total_a", format!("{:.16e}", c.drift_total_a));
        kv("drift_total_b", format!("{:.16e}", c.drift_total_b));
        kv("min_rho", format!("{:.16e}", c.min_rho));
    }
    for fit in &report.fits {
        let p = format!("fit.{}", fit.quantity);
        kv(&format!("{p}.window"), format!("{}:{}", fit.window.0, fit.window.1));
        kv(&format!("{p}.exponent"), format!("{:.16e}", fit.exponent));
        kv(&format!("{p}.r_squared"), format!("{:.16e}", fit.r_squared));
        if let Some(pred) = fit.predicted {
            kv(&format!("{p}.predicted"), format!("{pred:.16e}"));
        }
        kv(&format!("{p}.samples"), fit.samples.to_string());
    }
    for (name, err) in &report.fit_errors {
        kv(&format!("fit.{name}.error"), err.clone());
    }
    s
}

//! Registered scenarios. Each one composes library operations, writes its
//! data files and returns one check per registered check name.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};
use std::path::Path;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use stosszahl_core::gas::{
    self, audit_ledger, ensemble_series, left_half_count, macrostate_entropy, run_ensemble, EventLedger, GasConfig,
    RateEstimator, ViolationKind,
};
use stosszahl_core::master::{
    build_master_operator, equilibrium, evolve_probabilities, format_float, relative_entropy, two_state_closed_form,
    RateMatrix,
};
use stosszahl_core::measurement::{chi_square_statistic, collapse_sample, decohere, MeasurementBasis};
use stosszahl_core::state::{density_from_pure, evolve_unitary, purity, vn_entropy, Hamiltonian, StateVector};
use stosszahl_core::{shannon_entropy, ProbabilityVector, SimRng};

use crate::config::{
    AuditParams, BornParams, ConfigError, GasParams, ScenarioConfig, TimeGrid, TwoStateParams, UnitaryCollapseParams,
};
use crate::report::{Check, OutputSink, RunReport, SCHEMA_VERSION};
use crate::RunError;

pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub checks: &'static [&'static str],
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "two-state-relaxation",
        summary: "two-state master equation against its closed-form solution",
        checks: &["closed_form_agreement", "equilibrium", "probability_conservation", "relative_entropy_monotone"],
    },
    ScenarioInfo {
        name: "unitary-vs-collapse",
        summary: "von Neumann entropy under pure unitary evolution vs. unitary evolution with random decoherence events",
        checks: &["unitary_entropy_drift", "collapse_entropy_reached", "collapse_entropy_bounded"],
    },
    ScenarioInfo {
        name: "born-statistics",
        summary: "chi-square test of Born-rule outcome sampling",
        checks: &["chi_square", "reproducible"],
    },
    ScenarioInfo {
        name: "gas-equilibrium",
        summary: "emitter/absorber gas ensemble, ledger audits and master-equation cross-prediction",
        checks: &[
            "mean_left_count",
            "macrostate_entropy",
            "conservation_violations",
            "ordering_violations",
            "precondition_violations",
            "master_cross_check",
        ],
    },
    ScenarioInfo {
        name: "ledger-audit",
        summary: "replay a ledger CSV against the transaction invariants",
        checks: &["conservation_violations", "ordering_violations", "precondition_violations", "malformed_events"],
    },
];

pub fn scenario_info(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

struct Outcome {
    parameters: serde_json::Value,
    checks: Vec<Check>,
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("parameters serialize")
}

/// Runs `config.scenario`, writing data files and `report.json` into
/// `out_dir`. `timestamp` goes into the leading comment line of every CSV
/// file; `None` drops that line so reruns are byte-identical.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path, timestamp: Option<&str>) -> Result<RunReport, RunError> {
    let info = scenario_info(&config.scenario).ok_or_else(|| ConfigError::UnknownScenario(config.scenario.clone()))?;
    let header = timestamp.map(|ts| format!("stosszahl {} seed {} generated {ts}", config.scenario, config.seed));
    let mut sink = OutputSink::new(out_dir, header)?;

    let outcome = match info.name {
        "two-state-relaxation" => two_state_relaxation(
            &config.two_state_relaxation.clone().unwrap_or_default(),
            config.grid.as_ref(),
            &mut sink,
        )?,
        "unitary-vs-collapse" => unitary_vs_collapse(
            &config.unitary_vs_collapse.clone().unwrap_or_default(),
            config.grid.as_ref(),
            config.seed,
            &mut sink,
        )?,
        "born-statistics" => born_statistics(&config.born_statistics.clone().unwrap_or_default(), config.seed, &mut sink)?,
        "gas-equilibrium" => gas_equilibrium(
            &config.gas_equilibrium.clone().unwrap_or_default(),
            config.grid.as_ref(),
            config.seed,
            &mut sink,
        )?,
        "ledger-audit" => {
            let params = config
                .ledger_audit
                .as_ref()
                .ok_or_else(|| ConfigError::invalid("ledger_audit", "section with `ledger` path is required"))?;
            ledger_audit(params, &mut sink)?
        }
        other => unreachable!("registered scenario {other} has no runner"),
    };

    debug_assert!(outcome.checks.iter().map(|c| c.name.as_str()).eq(info.checks.iter().copied()));
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: info.name.to_owned(),
        seed: config.seed,
        parameters: outcome.parameters,
        checks: outcome.checks,
        outputs: sink.files().to_vec(),
    };
    report.outputs.push("report.json".into());
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    sink.write_bytes("report.json", &json)?;
    Ok(report)
}

fn two_state_relaxation(p: &TwoStateParams, grid: Option<&TimeGrid>, sink: &mut OutputSink) -> Result<Outcome, RunError> {
    let p0 = ProbabilityVector::new(p.p0.clone())
        .map_err(|e| ConfigError::invalid("two_state_relaxation.p0", e.to_string()))?;
    if p0.len() != 2 {
        return Err(ConfigError::invalid("two_state_relaxation.p0", "needs exactly two entries").into());
    }
    let rates = RateMatrix::two_state(p.r12, p.r21)
        .map_err(|e| ConfigError::invalid("two_state_relaxation.r12/r21", e.to_string()))?;
    let times = grid.cloned().unwrap_or_else(|| TimeGrid::linspace(0.0, 5.0, 50)).resolve()?;
    let m = build_master_operator(&rates);
    let p_eq = equilibrium(&m)?;

    let mut max_err = 0.0f64;
    let mut max_sum_err = 0.0f64;
    let mut max_rise = 0.0f64;
    let mut prev_d = f64::INFINITY;
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let num = evolve_probabilities(&m, &p0, t)?;
        let exact = two_state_closed_form(p.r12, p.r21, &p0, t)?;
        max_err = max_err.max((num[0] - exact[0]).abs()).max((num[1] - exact[1]).abs());
        max_sum_err = max_sum_err.max((num[0] + num[1] - 1.0).abs());
        let d = relative_entropy(&num, &p_eq)?;
        max_rise = max_rise.max(d - prev_d);
        prev_d = d;
        rows.push([t, num[0], num[1], shannon_entropy(&num), d]);
    }
    let p1_inf = p.r12 / (p.r12 + p.r21);

    sink.write_csv("two_state_relaxation.csv", |buf| write_rows(buf, &["t", "P1", "P2", "S", "D"], &rows))?;

    Ok(Outcome {
        parameters: to_json(p),
        checks: vec![
            Check::at_most("closed_form_agreement", max_err, p.tolerance),
            Check::at_most("equilibrium", (p_eq[0] - p1_inf).abs(), 1e-10)
                .with_detail(format!("p_eq = ({}, {})", p_eq[0], p_eq[1])),
            Check::at_most("probability_conservation", max_sum_err, 1e-10),
            Check::at_most("relative_entropy_monotone", max_rise.max(0.0), 1e-10),
        ],
    })
}

fn write_rows<const N: usize>(buf: &mut Vec<u8>, header: &[&str; N], rows: &[[f64; N]]) -> stosszahl_core::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    let io = |e: csv::Error| stosszahl_core::Error::Parse(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(|&x| format_float(x))).map_err(io)?;
    }
    w.flush().map_err(|e| stosszahl_core::Error::Parse(e.to_string()))
}

fn unitary_vs_collapse(
    p: &UnitaryCollapseParams,
    grid: Option<&TimeGrid>,
    seed: u64,
    sink: &mut OutputSink,
) -> Result<Outcome, RunError> {
    if !(p.t_end > 0.0 && p.t_end.is_finite()) {
        return Err(ConfigError::invalid("unitary_vs_collapse.t_end", "must be positive").into());
    }
    if !(p.collapse_rate >= 0.0 && p.collapse_rate.is_finite()) {
        return Err(ConfigError::invalid("unitary_vs_collapse.collapse_rate", "must be nonnegative").into());
    }
    if p.members == 0 || p.unitary_steps == 0 {
        return Err(ConfigError::invalid("unitary_vs_collapse.members/unitary_steps", "must be positive").into());
    }
    let h = Hamiltonian::diagonal(&[p.gap / 2.0, -p.gap / 2.0])
        .map_err(|e| ConfigError::invalid("unitary_vs_collapse.gap", e.to_string()))?;
    let plus = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])?;
    let minus = StateVector::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2])?;
    let basis = MeasurementBasis::from_states(&[plus.clone(), minus])?;
    let rho0 = density_from_pure(&plus)?;

    // branch A: unitary steps only
    let dt = p.t_end / p.unitary_steps as f64;
    let s0 = vn_entropy(&rho0);
    let mut rho = rho0.clone();
    let mut drift = 0.0f64;
    let mut unitary_rows = Vec::with_capacity(p.unitary_steps + 1);
    unitary_rows.push([0.0, 0.0, s0, purity(&rho)]);
    for step in 1..=p.unitary_steps {
        rho = evolve_unitary(&rho, &h, dt)?;
        let s = vn_entropy(&rho);
        drift = drift.max((s - s0).abs());
        unitary_rows.push([step as f64, step as f64 * dt, s, purity(&rho)]);
    }

    // branch B: unitary segments broken by decoherence at Poisson times
    let mut times: Vec<f64> = match grid {
        Some(g) => g.resolve()?.into_iter().filter(|&t| t < p.t_end).collect(),
        None => TimeGrid::linspace(0.0, p.t_end, 41).resolve()?,
    };
    if times.last() != Some(&p.t_end) {
        times.push(p.t_end);
    }
    let mut sum_s = vec![0.0; times.len()];
    let mut sum_purity = vec![0.0; times.len()];
    for member in 0..p.members as u64 {
        let mut rng = SimRng::with_stream(seed, member);
        let mut rho = rho0.clone();
        let mut now = 0.0;
        let mut next_collapse = rng.exponential(p.collapse_rate);
        for (i, &t) in times.iter().enumerate() {
            while next_collapse <= t {
                rho = decohere(&evolve_unitary(&rho, &h, next_collapse - now)?, &basis)?;
                now = next_collapse;
                next_collapse += rng.exponential(p.collapse_rate);
            }
            rho = evolve_unitary(&rho, &h, t - now)?;
            now = t;
            sum_s[i] += vn_entropy(&rho);
            sum_purity[i] += purity(&rho);
        }
    }
    let n = p.members as f64;
    let rows: Vec<[f64; 4]> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| Ok([t, vn_entropy(&evolve_unitary(&rho0, &h, t)?), sum_s[i] / n, sum_purity[i] / n]))
        .collect::<stosszahl_core::Result<_>>()?;
    let final_mean = rows.last().map_or(0.0, |r| r[2]);
    let peak_mean = rows.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max);

    sink.write_csv("unitary_branch.csv", |buf| write_rows(buf, &["step", "t", "S_VN", "purity"], &unitary_rows))?;
    sink.write_csv("unitary_vs_collapse.csv", |buf| {
        write_rows(buf, &["t", "S_unitary", "S_collapse_mean", "purity_collapse_mean"], &rows)
    })?;

    Ok(Outcome {
        parameters: to_json(p),
        checks: vec![
            Check::at_most("unitary_entropy_drift", drift, p.drift_tolerance),
            Check::at_least("collapse_entropy_reached", final_mean, p.entropy_fraction * LN_2)
                .with_detail(format!("ensemble mean S_VN at t = {}", p.t_end)),
            Check::at_most("collapse_entropy_bounded", peak_mean, LN_2 + 1e-9),
        ],
    })
}

fn born_statistics(p: &BornParams, seed: u64, sink: &mut OutputSink) -> Result<Outcome, RunError> {
    let weights = ProbabilityVector::new(p.weights.clone())
        .map_err(|e| ConfigError::invalid("born_statistics.weights", e.to_string()))?;
    if p.draws == 0 {
        return Err(ConfigError::invalid("born_statistics.draws", "must be positive").into());
    }
    if !(p.significance > 0.0 && p.significance < 1.0) {
        return Err(ConfigError::invalid("born_statistics.significance", "must lie in (0, 1)").into());
    }
    let sample = |seed| -> stosszahl_core::Result<Vec<u64>> {
        let mut rng = SimRng::new(seed);
        let mut counts = vec![0u64; weights.len()];
        for _ in 0..p.draws {
            counts[collapse_sample(weights.as_slice(), &mut rng)?] += 1;
        }
        Ok(counts)
    };
    let counts = sample(seed)?;
    let again = sample(seed)?;
    let mismatches = counts.iter().zip(&again).filter(|(a, b)| a != b).count();

    let stat = chi_square_statistic(&counts, &weights)?;
    let live = weights.as_slice().iter().filter(|&&w| w > 0.0).count();
    let critical = if live > 1 {
        ChiSquared::new((live - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(1.0 - p.significance)
    } else {
        0.0
    };

    let rows: Vec<[f64; 4]> = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| [k as f64, weights[k], weights[k] * p.draws as f64, c as f64])
        .collect();
    sink.write_csv("born_statistics.csv", |buf| write_rows(buf, &["outcome", "weight", "expected", "observed"], &rows))?;

    Ok(Outcome {
        parameters: to_json(p),
        checks: vec![
            Check::at_most("chi_square", stat, critical)
                .with_detail(format!("{} degrees of freedom, significance {}", live.saturating_sub(1), p.significance)),
            Check::at_most("reproducible", mismatches as f64, 0.0),
        ],
    })
}

fn gas_config(p: &GasParams, seed: u64) -> Result<GasConfig, RunError> {
    let mut cfg = GasConfig::new(p.molecules, p.initially_excited, p.decay_rate, p.t_max, seed);
    cfg.delay = p.delay;
    cfg.validate().map_err(|e| ConfigError::invalid("gas_equilibrium", e.to_string()))?;
    if p.members < 100 {
        return Err(ConfigError::invalid("gas_equilibrium.members", "ensembles need at least 100 members").into());
    }
    Ok(cfg)
}

fn gas_equilibrium(p: &GasParams, grid: Option<&TimeGrid>, seed: u64, sink: &mut OutputSink) -> Result<Outcome, RunError> {
    let cfg = gas_config(p, seed)?;
    let runs = run_ensemble(&cfg, p.members)?;

    let mut times = grid.cloned().unwrap_or_else(|| TimeGrid::linspace(0.0, p.t_max, 51)).resolve()?;
    times.extend(p.cross_check_times.iter().copied().filter(|&t| t >= 0.0 && t <= p.t_max));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let series = ensemble_series(&runs, cfg.molecules, &times)?;

    let left = cfg.left_size();
    let n = cfg.initially_excited;
    let expected_k = n as f64 * left as f64 / cfg.molecules as f64;
    let s_max = (0..=n.min(left))
        .filter_map(|k| macrostate_entropy(k, n, cfg.molecules).ok())
        .fold(0.0, f64::max);
    let settled: Vec<_> = series.iter().filter(|s| s.t >= p.equilibrium_after).collect();
    let k_dev = settled.iter().map(|s| (s.mean_left_count - expected_k).abs()).fold(0.0, f64::max);
    let shortfall = if s_max > 0.0 {
        settled.iter().map(|s| (s_max - s.mean_macro_entropy) / s_max).fold(0.0, f64::max)
    } else {
        0.0
    };

    let mut audit_counts = [0usize; 3];
    let mut estimator = RateEstimator::new(left + 1);
    for r in &runs {
        let report = audit_ledger(&r.ledger, Some(&r.initial));
        audit_counts[0] += report.count(ViolationKind::Conservation);
        audit_counts[1] += report.count(ViolationKind::Ordering);
        audit_counts[2] += report.count(ViolationKind::Precondition) + report.count(ViolationKind::Malformed);
        estimator.observe(&r.initial, &r.ledger, left_half_count, cfg.t_max)?;
    }
    let empirical = estimator.estimate()?;
    let m = build_master_operator(&empirical.rates);
    let k0 = left_half_count(&runs[0].initial);
    let p0 = ProbabilityVector::point(left + 1, k0)?;
    let mut max_tv = 0.0f64;
    let mut cross_rows = Vec::new();
    for &t in &p.cross_check_times {
        let Some(sample) = series.iter().find(|s| s.t == t) else { continue };
        let predicted = evolve_probabilities(&m, &p0, t)?;
        let observed = sample.distribution()?;
        max_tv = max_tv.max(predicted.total_variation(&observed)?);
        for k in 0..=left {
            cross_rows.push([t, k as f64, predicted[k], observed[k]]);
        }
    }

    let series_rows: Vec<[f64; 4]> = series
        .iter()
        .map(|s| [s.t, s.mean_left_count, s.ensemble_entropy, s.mean_macro_entropy])
        .collect();
    sink.write_csv("ensemble_series.csv", |buf| {
        write_rows(buf, &["t", "mean_k", "ensemble_entropy", "mean_S_macro"], &series_rows)
    })?;
    sink.write_csv("cross_check.csv", |buf| write_rows(buf, &["t", "k", "predicted", "empirical"], &cross_rows))?;
    let labels = (0..=left).map(|k| format!("k{k}")).collect();
    let labelled = RateMatrix::with_labels(empirical.rates.rates().clone(), labels)?;
    sink.write_csv("empirical_rates.csv", |buf| labelled.write_csv(buf))?;
    sink.write_csv("ledger_member0.csv", |buf| runs[0].ledger.write_csv(buf))?;
    sink.write_csv("trajectory_member0.csv", |buf| runs[0].trajectory.write_csv(buf))?;

    Ok(Outcome {
        parameters: to_json(p),
        checks: vec![
            Check::at_most("mean_left_count", k_dev, p.k_tolerance)
                .with_detail(format!("max |<k> - {expected_k}| for t >= {}", p.equilibrium_after)),
            Check::at_most("macrostate_entropy", shortfall, p.entropy_tolerance)
                .with_detail(format!("max relative shortfall below S_max = {s_max}")),
            Check::at_most("conservation_violations", audit_counts[0] as f64, 0.0),
            Check::at_most("ordering_violations", audit_counts[1] as f64, 0.0),
            Check::at_most("precondition_violations", audit_counts[2] as f64, 0.0),
            Check::at_most("master_cross_check", max_tv, p.tv_tolerance)
                .with_detail(format!("{} unvisited k labels", empirical.unvisited.len())),
        ],
    })
}

/// Reads a ledger CSV; parse failures are input errors.
pub fn read_ledger(path: &Path) -> Result<EventLedger, RunError> {
    let file = std::fs::File::open(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    EventLedger::read_csv(file).map_err(|e| ConfigError::invalid(&path.display().to_string(), e.to_string()).into())
}

fn ledger_audit(p: &AuditParams, sink: &mut OutputSink) -> Result<Outcome, RunError> {
    let ledger = read_ledger(&p.ledger)?;
    let initial = match (p.molecules, p.initially_excited) {
        (Some(n), Some(n0)) => Some(
            gas::init_gas(&GasConfig::new(n, n0, 1.0, 0.0, 0))
                .map_err(|e| ConfigError::invalid("ledger_audit", e.to_string()))?,
        ),
        (None, None) => None,
        _ => {
            return Err(ConfigError::invalid("ledger_audit", "set both molecules and initially_excited, or neither").into())
        }
    };
    let report = audit_ledger(&ledger, initial.as_ref());
    sink.write_csv("audit_violations.csv", |buf| write_violations(buf, &report))?;
    let count = |k| report.count(k) as f64;
    Ok(Outcome {
        parameters: to_json(p),
        checks: vec![
            Check::at_most("conservation_violations", count(ViolationKind::Conservation), 0.0),
            Check::at_most("ordering_violations", count(ViolationKind::Ordering), 0.0),
            Check::at_most("precondition_violations", count(ViolationKind::Precondition), 0.0),
            Check::at_most("malformed_events", count(ViolationKind::Malformed), 0.0)
                .with_detail(format!("{} events audited", report.events)),
        ],
    })
}

pub fn write_violations(buf: &mut Vec<u8>, report: &gas::AuditReport) -> stosszahl_core::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    let io = |e: csv::Error| stosszahl_core::Error::Parse(e.to_string());
    w.write_record(["event_index", "kind", "detail"]).map_err(io)?;
    for v in &report.violations {
        w.write_record([v.event_index.to_string(), format!("{:?}", v.kind), v.detail.clone()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| stosszahl_core::Error::Parse(e.to_string()))
}

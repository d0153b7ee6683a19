//! Simulation study presets and the harness that turns them into power,
//! localisation and count tables.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{
    calibrate_threshold, detect_multiple, detect_single, BaselineProvenance, NullLaw, DEFAULT_QUANTILE, DEFAULT_RUNS,
};
use crate::error::{Error, Result};
use crate::estimation::{estimate_baseline, PenaltyKind};
use crate::evaluation::{count_distribution, empirical_power, hausdorff_summary, ResultTable, ScenarioOutcome};
use crate::intervals::{random_intervals, seeded_intervals, Domain, Interval, IntervalSet};
use crate::rng::derive_seed;
use crate::test_stats::{Method, StatConfig, DEFAULT_LAMBDA_CONSTANT};
use crate::var_model::{
    bump_smallest_positive, generate_dense_stationary, generate_sparse_offdiag, simulate, simulate_with_anomaly,
    AnomalyScenario, Episode, VarParams, DEFAULT_BURN_IN,
};

pub const STUDY_HORIZON: usize = 500;

// attempts at drawing a dense baseline whose anomalous laws stay stationary
const MAX_DRAWS: u64 = 1000;

/// `⌊T·num/den⌋`.
fn frac(t: usize, num: usize, den: usize) -> usize {
    t * num / den
}

fn window(t: usize, a: (usize, usize), b: (usize, usize)) -> Result<Interval> {
    Interval::new(frac(t, a.0, a.1), frac(t, b.0, b.1))
}

/// Dense single-anomaly study, `p = 10`: `Δ = 0.35` on the ten smallest
/// positive entries over `[T·5/11, T·6/11]` (case 1) or `[T·7/15, T·8/15]`
/// (case 2).
pub fn dense_single(case: u8, seed: u64) -> Result<AnomalyScenario> {
    let t = STUDY_HORIZON;
    let w = match case {
        1 => window(t, (5, 11), (6, 11))?,
        2 => window(t, (7, 15), (8, 15))?,
        _ => return Err(Error::InvalidParameter(format!("unknown case {case}"))),
    };
    dense_with(seed, |base| {
        let delta = bump_smallest_positive(&base.stacked(), 10, 0.35);
        AnomalyScenario::new(base.clone(), delta, w, t, DEFAULT_BURN_IN)
    })
}

/// Dense two-anomaly study, `p = 10`, five bumped entries per window:
/// `[133, 166]`, `[333, 366]` with `Δ = 0.6` (case 1) or `[33, 66]`,
/// `[433, 466]` with `Δ = 0.5` (case 2).
pub fn dense_two(case: u8, seed: u64) -> Result<AnomalyScenario> {
    let t = STUDY_HORIZON;
    let (w1, w2, amount) = match case {
        1 => (Interval::new(133, 166)?, Interval::new(333, 366)?, 0.6),
        2 => (Interval::new(33, 66)?, Interval::new(433, 466)?, 0.5),
        _ => return Err(Error::InvalidParameter(format!("unknown case {case}"))),
    };
    dense_with(seed, |base| {
        let delta = bump_smallest_positive(&base.stacked(), 5, amount);
        let episodes = vec![
            Episode {
                window: w1,
                delta: delta.clone(),
            },
            Episode { window: w2, delta },
        ];
        AnomalyScenario::with_episodes(base.clone(), episodes, t, DEFAULT_BURN_IN)
    })
}

fn dense_with(seed: u64, build: impl Fn(&VarParams) -> Result<AnomalyScenario>) -> Result<AnomalyScenario> {
    let mut last = None;
    for k in 0..MAX_DRAWS {
        let base = generate_dense_stationary(10, derive_seed(seed, k))?;
        match build(&base) {
            Ok(s) => return Ok(s),
            Err(e @ Error::Scenario(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Scenario("no admissible baseline".into())))
}

/// Sparse single-anomaly study, `p = 20`: super-diagonal `0.6` dropping to
/// `0.05` over `[T·4/9, T·5/9]` (case 1) or `[T·6/13, T·7/13]` (case 2).
pub fn sparse_single(case: u8) -> Result<AnomalyScenario> {
    let t = STUDY_HORIZON;
    let w = match case {
        1 => window(t, (4, 9), (5, 9))?,
        2 => window(t, (6, 13), (7, 13))?,
        _ => return Err(Error::InvalidParameter(format!("unknown case {case}"))),
    };
    let base = generate_sparse_offdiag(20, 0.6, 1)?;
    let delta = generate_sparse_offdiag(20, 0.05, 1)?.stacked() - base.stacked();
    AnomalyScenario::new(base, delta, w, t, DEFAULT_BURN_IN)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    Random { count: usize },
    Seeded { decay: f64 },
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Random { .. } => "random".into(),
            Scheme::Seeded { decay } => format!("seeded{:.1}", 1.0 / decay),
        }
    }

    pub fn build(&self, domain: Domain, min_length: usize, seed: u64) -> Result<IntervalSet> {
        match *self {
            Scheme::Random { count } => random_intervals(domain, min_length, count, seed),
            Scheme::Seeded { decay } => seeded_intervals(domain, min_length, decay),
        }
    }
}

/// One study: a scenario plus everything needed to calibrate and score it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub name: String,
    pub scenario: AnomalyScenario,
    pub min_length: usize,
    pub schemes: Vec<Scheme>,
    pub methods: Vec<Method>,
    pub baselines: Vec<BaselineProvenance>,
    pub train_len: usize,
    pub baseline_penalty: PenaltyKind,
    pub lambda_constant: f64,
    pub runs: usize,
    pub calibration_runs: usize,
    pub quantile: f64,
    /// Algorithm 2 instead of Algorithm 1.
    pub multiple: bool,
    pub seed: u64,
}

impl StudyPlan {
    /// Defaults shared by all studies: `L = p + 1`, both methods, both
    /// baseline modes, `T_train = T`, 100 runs and 100 calibration runs at
    /// the 0.99 quantile, random (1029) and seeded (1/a = 1.1, 1.2) families.
    pub fn new(name: impl Into<String>, scenario: AnomalyScenario, baseline_penalty: PenaltyKind, seed: u64) -> Self {
        let p = scenario.base().dim();
        let t = scenario.horizon();
        Self {
            name: name.into(),
            min_length: p * scenario.base().order() + 1,
            schemes: vec![
                Scheme::Random { count: 1029 },
                Scheme::Seeded { decay: 1.0 / 1.1 },
                Scheme::Seeded { decay: 1.0 / 1.2 },
            ],
            methods: vec![Method::Ols, Method::Lasso],
            baselines: vec![BaselineProvenance::Known, BaselineProvenance::Estimated],
            train_len: t,
            baseline_penalty,
            lambda_constant: DEFAULT_LAMBDA_CONSTANT,
            runs: DEFAULT_RUNS,
            calibration_runs: DEFAULT_RUNS,
            quantile: DEFAULT_QUANTILE,
            multiple: scenario.episodes().len() > 1,
            scenario,
            seed,
        }
    }

    pub fn with_runs(mut self, runs: usize, calibration_runs: usize) -> Self {
        self.runs = runs;
        self.calibration_runs = calibration_runs;
        self
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::for_panel(self.scenario.horizon(), self.scenario.base().order())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scheme: String,
    pub interval_count: usize,
    pub method: Method,
    pub baseline: BaselineProvenance,
    pub threshold: f64,
    pub outcomes: Vec<ScenarioOutcome>,
}

/// Runs one (scheme, method, baseline) cell: calibrate, then detect on
/// `plan.runs` fresh anomalous panels.
pub fn run_cell(plan: &StudyPlan, scheme: Scheme, method: Method, baseline: BaselineProvenance) -> Result<CellResult> {
    let base = plan.scenario.base();
    let order = base.order();
    let set = scheme.build(plan.domain()?, plan.min_length, derive_seed(plan.seed, 1))?;
    let config = StatConfig::new(method).with_lambda_constant(plan.lambda_constant);
    let penalty = plan
        .baseline_penalty
        .resolve(plan.train_len, base.dim(), plan.lambda_constant);
    let null = match baseline {
        BaselineProvenance::Known => NullLaw::Known(base.clone()),
        BaselineProvenance::Estimated => NullLaw::Reestimated {
            law: base.clone(),
            train_len: plan.train_len,
            penalty,
        },
    };
    let cal = calibrate_threshold(
        &null,
        &set,
        &config,
        plan.calibration_runs,
        plan.quantile,
        derive_seed(plan.seed, 2),
    )
    .map_err(|e| e.in_stage("calibrate"))?;
    let truth = plan.scenario.windows();
    let outcomes = (0..plan.runs as u64)
        .into_par_iter()
        .map(|r| {
            let run_seed = derive_seed(plan.seed, 1000 + r);
            let panel = simulate_with_anomaly(&plan.scenario, derive_seed(run_seed, 0))?;
            let theta = match baseline {
                BaselineProvenance::Known => base.stacked(),
                BaselineProvenance::Estimated => {
                    let train = simulate(base, plan.train_len, DEFAULT_BURN_IN, derive_seed(run_seed, 1))?;
                    estimate_baseline(&train, order, penalty)?
                }
            };
            let res = if plan.multiple {
                detect_multiple(&panel, &theta, &set, &config, cal.threshold)?
            } else {
                detect_single(&panel, &theta, &set, &config, cal.threshold)?
            };
            Ok(ScenarioOutcome {
                truth: truth.clone(),
                estimate: res.detected,
                horizon: plan.scenario.horizon(),
                seed: run_seed,
                method,
                intervals: scheme.label(),
                baseline,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("detect"))?;
    Ok(CellResult {
        scheme: scheme.label(),
        interval_count: set.len(),
        method,
        baseline,
        threshold: cal.threshold,
        outcomes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub name: String,
    pub cells: Vec<CellResult>,
    /// Power in percent.
    pub power: ResultTable,
    /// Mean raw Hausdorff distance, empty estimates scored as `T`.
    pub hausdorff: ResultTable,
    /// Mean Hausdorff distance as a percentage of `T`.
    pub hausdorff_percent: ResultTable,
    /// Share of runs (percent) by detected count, one column per
    /// (baseline, count).
    pub counts: ResultTable,
}

fn baseline_label(b: BaselineProvenance) -> &'static str {
    match b {
        BaselineProvenance::Known => "known",
        BaselineProvenance::Estimated => "estimated",
    }
}

pub fn run_study(plan: &StudyPlan) -> Result<StudyReport> {
    let mut cells = Vec::new();
    for &scheme in &plan.schemes {
        for &method in &plan.methods {
            for &baseline in &plan.baselines {
                cells.push(run_cell(plan, scheme, method, baseline)?);
            }
        }
    }
    summarise(plan, cells)
}

fn summarise(plan: &StudyPlan, cells: Vec<CellResult>) -> Result<StudyReport> {
    let cols: Vec<&str> = plan.baselines.iter().map(|b| baseline_label(*b)).collect();
    let max_count = cells
        .iter()
        .flat_map(|c| c.outcomes.iter().map(|o| o.estimate.len()))
        .max()
        .unwrap_or(0)
        .max(3);
    let count_cols: Vec<String> = plan
        .baselines
        .iter()
        .flat_map(|b| (0..=max_count).map(move |k| format!("{}_{k}", baseline_label(*b))))
        .collect();
    let count_refs: Vec<&str> = count_cols.iter().map(String::as_str).collect();
    let mut power = ResultTable::new(format!("{}: empirical power (%)", plan.name), &cols);
    let mut haus = ResultTable::new(format!("{}: mean Hausdorff distance", plan.name), &cols);
    let mut haus_pct = ResultTable::new(format!("{}: mean Hausdorff distance (% of T)", plan.name), &cols);
    let mut counts = ResultTable::new(format!("{}: detected-count distribution (%)", plan.name), &count_refs);
    for &scheme in &plan.schemes {
        let label = scheme.label();
        for &method in &plan.methods {
            let mut pw = Vec::new();
            let mut hs = Vec::new();
            let mut hp = Vec::new();
            let mut ct = Vec::new();
            for &baseline in &plan.baselines {
                let cell = cells
                    .iter()
                    .find(|c| c.scheme == label && c.method == method && c.baseline == baseline)
                    .ok_or_else(|| Error::Contract(format!("missing cell {label}/{method}")))?;
                pw.push(Some(100.0 * empirical_power(&cell.outcomes)?));
                let s = hausdorff_summary(&cell.outcomes)?;
                hs.push(Some(s.mean));
                hp.push(Some(s.mean_percent));
                let hist: BTreeMap<usize, usize> = count_distribution(&cell.outcomes)?;
                let n = cell.outcomes.len() as f64;
                ct.extend((0..=max_count).map(|k| Some(100.0 * *hist.get(&k).unwrap_or(&0) as f64 / n)));
            }
            power.push(label.clone(), method, pw)?;
            haus.push(label.clone(), method, hs)?;
            haus_pct.push(label.clone(), method, hp)?;
            counts.push(label.clone(), method, ct)?;
        }
    }
    Ok(StudyReport {
        name: plan.name.clone(),
        cells,
        power,
        hausdorff: haus,
        hausdorff_percent: haus_pct,
        counts,
    })
}

/// Named presets: `dense-single-1`, `dense-single-2`, `dense-two-1`,
/// `dense-two-2`, `sparse-single-1`, `sparse-single-2`.
pub fn preset(name: &str, seed: u64) -> Result<StudyPlan> {
    let plan = match name {
        "dense-single-1" => StudyPlan::new(name, dense_single(1, seed)?, PenaltyKind::Ridge, seed),
        "dense-single-2" => StudyPlan::new(name, dense_single(2, seed)?, PenaltyKind::Ridge, seed),
        "dense-two-1" => two_anomaly_plan(name, dense_two(1, seed)?, seed),
        "dense-two-2" => two_anomaly_plan(name, dense_two(2, seed)?, seed),
        "sparse-single-1" => StudyPlan::new(name, sparse_single(1)?, PenaltyKind::Lasso, seed),
        "sparse-single-2" => StudyPlan::new(name, sparse_single(2)?, PenaltyKind::Lasso, seed),
        other => return Err(Error::InvalidParameter(format!("unknown study preset '{other}'"))),
    };
    Ok(plan)
}

pub const PRESETS: [&str; 6] = [
    "dense-single-1",
    "dense-single-2",
    "dense-two-1",
    "dense-two-2",
    "sparse-single-1",
    "sparse-single-2",
];

fn two_anomaly_plan(name: &str, scenario: AnomalyScenario, seed: u64) -> StudyPlan {
    let mut plan = StudyPlan::new(name, scenario, PenaltyKind::Ridge, seed);
    plan.schemes = vec![
        Scheme::Random { count: 1944 },
        Scheme::Seeded { decay: 1.0 / 1.1 },
        Scheme::Seeded { decay: 1.0 / 1.2 },
    ];
    plan
}

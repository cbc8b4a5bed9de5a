use std::fs::File;
use std::io::BufReader;

use serde::Serialize;
use serde_json::{json, Value};
use sparsetest::cumulants::{cumulant_upper_bound, moments_to_cumulants};
use sparsetest::distributions::{
    random_far, random_k_sparse, sample_dataset, sample_labels, symmetrize_labels, MarginalModel, NoiseModel,
    SampleBatch, WeightVector,
};
use sparsetest::estimation::{empirical_cumulant, estimate_norm2, linf_extract, power_sum_from_cumulant, sample_size_power_sum};
use sparsetest::lowerbounds::{distinguisher_advantage, Construction};
use sparsetest::rng::derive_seed;
use sparsetest::stats::clopper_pearson;
use sparsetest::testers::{
    build_schedule, dist_to_k_sparse, DEFAULT_CUMULANT_FLOOR, general_tester, noiseless_recover, recommended_samples_general,
    recommended_samples_sympoly, sym_poly_tester, Decision, GeneralParams, Recovery, ScheduleMode, SymPolyParams,
    VerdictFlags,
};
use sparsetest::Error;

use crate::config::{
    Command, ConstructionKind, EstimateConfig, ExperimentConfig, LowerBoundConfig, Side, SimulateConfig,
    TestConfig, TesterKind, WeightsConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Validation,
    Numerical,
    Io,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Validation => 2,
            FailureKind::Numerical => 3,
            FailureKind::Io => 1,
        }
    }
}

#[derive(Debug)]
pub struct RunError {
    pub kind: FailureKind,
    pub message: String,
    /// Rows completed before the failure, ending with a truncation marker.
    pub partial: Option<Box<ExperimentRecord>>,
}

impl RunError {
    pub fn io(e: std::io::Error) -> Self {
        Self { kind: FailureKind::Io, message: e.to_string(), partial: None }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let kind = if e.is_numerical() { FailureKind::Numerical } else { FailureKind::Validation };
        Self { kind, message: e.to_string(), partial: None }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// Output of one run: JSONL rows in trial order, a one-line summary and, for
/// `simulate` and `cumulants`, a CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub command: Command,
    pub config_hash: String,
    pub rows: Vec<Value>,
    pub summary: Vec<(String, String)>,
    pub table: Option<String>,
    pub truncated: bool,
}

impl ExperimentRecord {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            command: cfg.command,
            config_hash: cfg.hash(),
            rows: vec![],
            summary: vec![],
            table: None,
            truncated: false,
        }
    }

    fn push_summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    /// Marks the record as cut short by `err` after `completed` trials.
    fn truncate(mut self, completed: usize, err: &RunError) -> Self {
        self.rows.push(json!({ "truncated": true, "completed_trials": completed, "error": err.message }));
        self.truncated = true;
        self.push_summary("truncated", true);
        self.push_summary("completed_trials", completed);
        self
    }
}

fn marginal(cfg: &ExperimentConfig) -> RunResult<MarginalModel> {
    let m = cfg
        .model
        .clone()
        .ok_or_else(|| Error::Config(format!("command '{}' needs a model", cfg.command.name())))?;
    Ok(MarginalModel::try_from(m)?)
}

fn noise(cfg: &ExperimentConfig) -> RunResult<NoiseModel> {
    Ok(match &cfg.noise {
        Some(n) => NoiseModel::try_from(n.clone())?,
        None => NoiseModel::zero(),
    })
}

fn explicit_weights(w: &WeightsConfig) -> RunResult<WeightVector> {
    if w.battery.is_some() {
        return Err(Error::Config("battery weights are only available to the test command".into()).into());
    }
    let entries = w.w.clone().ok_or_else(|| Error::Config("weights need an explicit w".into()))?;
    Ok(WeightVector::new(entries)?)
}

/// Runs the configured command.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunResult<ExperimentRecord> {
    cfg.validate()?;
    match cfg.command {
        Command::Test => run_test(cfg, cfg.test.as_ref().expect("validated")),
        Command::Lowerbound => run_lowerbound(cfg, cfg.lowerbound.as_ref().expect("validated")),
        Command::Simulate => run_simulate(cfg, cfg.simulate.as_ref().expect("validated")),
        Command::Estimate => run_estimate(cfg, cfg.estimate.as_ref().expect("validated")),
        Command::Cumulants => run_cumulants(cfg, cfg.cumulants.as_ref().expect("validated").order),
    }
}

/// `paper`, `practical` or `practical:ℓ₁,…,ℓ_k`. Bare `practical` takes the k
/// smallest even orders ≥ 4 with a nonzero cumulant, largest first.
pub fn parse_schedule(spec: &str, k: usize, model: &MarginalModel, floor: f64) -> RunResult<ScheduleMode> {
    let spec = spec.trim();
    if spec == "paper" {
        return Ok(ScheduleMode::PaperExact);
    }
    if spec == "practical" {
        let top = sparsetest::cumulants::MAX_ORDER;
        let kap = model.exact_cumulants(top)?;
        let mut orders: Vec<usize> = (4..=top).step_by(2).filter(|&l| kap.order(l).abs() >= floor).take(k).collect();
        if orders.len() < k {
            return Err(Error::GaussianObstruction { scanned_to: top }.into());
        }
        orders.reverse();
        return Ok(ScheduleMode::Practical(orders));
    }
    if let Some(list) = spec.strip_prefix("practical:") {
        let orders = list
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad schedule order '{t}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(ScheduleMode::Practical(orders));
    }
    Err(Error::Config(format!("unknown schedule '{spec}' (expected paper, practical or practical:l1,l2,...)")).into())
}

#[derive(Debug, Serialize)]
struct TestRow {
    trial: usize,
    seed: u64,
    decision: Decision,
    statistic: f64,
    threshold: f64,
    w_tilde: Vec<f64>,
    s2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_estimate: Option<f64>,
    true_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<Decision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    correct: Option<bool>,
    samples: usize,
    recommended_samples: u64,
    flags: VerdictFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    support: Option<Vec<usize>>,
}

enum Tester {
    General { params: GeneralParams, schedule: sparsetest::testers::Schedule },
    SymPoly(SymPolyParams),
    Noiseless,
}

fn run_test(cfg: &ExperimentConfig, tc: &TestConfig) -> RunResult<ExperimentRecord> {
    let model = marginal(cfg)?;
    let noise = noise(cfg)?;
    let k = tc.k;
    if k == 0 {
        return Err(Error::Domain("k must be ≥ 1".into()).into());
    }
    let (tester, recommended, far_at) = match tc.tester {
        TesterKind::General => {
            let (c, s) = match (tc.eps, tc.c, tc.s) {
                (Some(eps), None, None) => (0.0, eps),
                (None, Some(c), Some(s)) => (c, s),
                _ => return Err(Error::Config("the general tester needs either eps or both c and s".into()).into()),
            };
            let mut params = GeneralParams::new(k, c, s, tc.norm_bound);
            params.cumulant_floor = tc.cumulant_floor;
            if !(0.0 <= c && c < s && s <= 1.0) {
                return Err(Error::Domain(format!("need 0 ≤ c < s ≤ 1, got c = {c}, s = {s}")).into());
            }
            let mode = parse_schedule(&tc.schedule, k, &model, tc.cumulant_floor)?;
            let schedule = build_schedule(k, params.eps(), tc.norm_bound, &model, mode, tc.cumulant_floor)?;
            let rec = recommended_samples_general(&schedule, &params, &model, &noise)?;
            (Tester::General { params, schedule }, rec, s)
        }
        TesterKind::Sympoly => {
            if tc.c.is_some() || tc.s.is_some() {
                return Err(Error::Config("the sym-poly tester takes eps, not c and s".into()).into());
            }
            let eps = tc.eps.ok_or_else(|| Error::Config("the sym-poly tester needs eps".into()))?;
            let mut params = SymPolyParams::new(k, eps, tc.norm_bound);
            params.cumulant_floor = tc.cumulant_floor;
            let rec = recommended_samples_sympoly(&params, &model, &noise)?;
            (Tester::SymPoly(params), rec, eps)
        }
        TesterKind::Noiseless => (Tester::Noiseless, k as u64 + 1, tc.eps.unwrap_or(0.5)),
    };
    let m = tc.samples.unwrap_or_else(|| recommended.min(tc.max_samples));
    if m == 0 {
        return Err(Error::Domain("samples must be ≥ 1".into()).into());
    }
    let m = usize::try_from(m).map_err(|_| Error::ResourceLimit(format!("{m} samples do not fit in memory")))?;

    let mut rec = ExperimentRecord::new(cfg);
    let (mut decided, mut correct, mut stat_sum) = (0u64, 0u64, 0.0);
    for trial in 0..cfg.trials {
        let trial_seed = derive_seed(cfg.seed, trial as u64);
        let outcome = (|| -> RunResult<TestRow> {
            let wseed = derive_seed(trial_seed, 0);
            let w = match (&tc.weights.w, tc.weights.battery) {
                (Some(w), None) => WeightVector::new(w.clone())?,
                (None, Some(Side::Yes)) => random_k_sparse(tc.weights.n, k, tc.weights.norm, wseed)?,
                (None, Some(Side::No)) => random_far(tc.weights.n, k, far_at, tc.weights.norm, wseed)?,
                _ => return Err(Error::Config("give exactly one of weights.w and weights.battery".into()).into()),
            };
            let true_distance = dist_to_k_sparse(&w, k)?;
            let bseed = derive_seed(trial_seed, 1);
            let (verdict, expected, support) = match &tester {
                Tester::General { params, schedule } => {
                    let b = sample_labels(&model, &noise, &w, m, bseed)?;
                    let v = general_tester(&b, params, &model, &noise, schedule)?;
                    let exp = if true_distance <= params.c {
                        Some(Decision::Sparse)
                    } else if true_distance >= params.s {
                        Some(Decision::FarFromSparse)
                    } else {
                        None
                    };
                    (v, exp, None)
                }
                Tester::SymPoly(params) => {
                    let b = sample_labels(&model, &noise, &w, m, bseed)?;
                    let v = sym_poly_tester(&b, params, &model, &noise)?;
                    let exp = if true_distance <= 1e-12 {
                        Some(Decision::Sparse)
                    } else if true_distance >= params.eps {
                        Some(Decision::FarFromSparse)
                    } else {
                        None
                    };
                    (v, exp, None)
                }
                Tester::Noiseless => {
                    let b = sample_dataset(&model, &noise, &w, m, bseed)?;
                    let r = noiseless_recover(&b, k)?;
                    let nonzero = w.entries().iter().filter(|v| **v != 0.0).count();
                    let exp = Some(if nonzero <= k { Decision::Sparse } else { Decision::FarFromSparse });
                    let (decision, support, residual) = match r {
                        Recovery::Sparse { support, residual, .. } => (Decision::Sparse, Some(support), residual),
                        Recovery::NotKSparse => (Decision::FarFromSparse, None, f64::NAN),
                    };
                    let v = sparsetest::testers::TestVerdict {
                        decision,
                        w_tilde: vec![],
                        s2: f64::NAN,
                        statistic: residual,
                        threshold: 1e-8,
                        distance_estimate: None,
                        samples_used: m,
                        recommended_samples: k as u64 + 1,
                        flags: VerdictFlags::default(),
                    };
                    (v, exp, Some(support.unwrap_or_default()))
                }
            };
            Ok(TestRow {
                trial,
                seed: trial_seed,
                decision: verdict.decision,
                statistic: verdict.statistic,
                threshold: verdict.threshold,
                w_tilde: verdict.w_tilde,
                s2: verdict.s2,
                distance_estimate: verdict.distance_estimate,
                true_distance,
                expected,
                correct: expected.map(|e| e == verdict.decision),
                samples: verdict.samples_used,
                recommended_samples: verdict.recommended_samples,
                flags: verdict.flags,
                support,
            })
        })();
        match outcome {
            Ok(row) => {
                if let Some(c) = row.correct {
                    decided += 1;
                    correct += c as u64;
                }
                if row.statistic.is_finite() {
                    stat_sum += row.statistic;
                }
                rec.rows.push(serde_json::to_value(&row).expect("row serializes"));
            }
            Err(mut e) => {
                e.partial = Some(Box::new(rec.truncate(trial, &e)));
                return Err(e);
            }
        }
    }
    rec.push_summary("trials", cfg.trials);
    rec.push_summary("samples", m);
    rec.push_summary("recommended_samples", recommended);
    rec.push_summary("decided", decided);
    rec.push_summary("correct", correct);
    if decided > 0 {
        let (lo, hi) = clopper_pearson(correct, decided, 0.95)?;
        rec.push_summary("success_rate", correct as f64 / decided as f64);
        rec.push_summary("ci_low", lo);
        rec.push_summary("ci_high", hi);
    } else {
        rec.push_summary("success_rate", "");
        rec.push_summary("ci_low", "");
        rec.push_summary("ci_high", "");
    }
    rec.push_summary("mean_statistic", stat_sum / cfg.trials as f64);
    Ok(rec)
}

fn run_lowerbound(cfg: &ExperimentConfig, lb: &LowerBoundConfig) -> RunResult<ExperimentRecord> {
    let (construction, params) = match lb.construction {
        ConstructionKind::GaussianHidden => (
            Construction::GaussianHidden { c: lb.c, k: lb.k },
            json!({ "n": lb.n, "t": lb.t, "c": lb.c, "k": lb.k }),
        ),
        ConstructionKind::PoissonNoniid => {
            (Construction::PoissonNonIid { spread: lb.spread }, json!({ "n": lb.n, "m": lb.t, "spread": lb.spread }))
        }
        ConstructionKind::PoissonUnknownNoise => (
            Construction::PoissonUnknownNoise { spread: lb.spread },
            json!({ "n": lb.n, "m": lb.t, "spread": lb.spread }),
        ),
    };
    let adv = distinguisher_advantage(construction, lb.n, lb.t, cfg.trials, cfg.seed)?;
    let mut rec = ExperimentRecord::new(cfg);
    let mut row = json!({
        "construction": construction.name(),
        "params": params,
        "advantage": adv.advantage,
        "stderr": adv.stderr,
        "trials": adv.trials,
        "seed": cfg.seed,
    });
    if let Some(w) = &adv.warning {
        row["warning"] = json!(w);
    }
    rec.rows.push(row);
    rec.push_summary("construction", construction.name());
    rec.push_summary("trials", adv.trials);
    rec.push_summary("advantage", adv.advantage);
    rec.push_summary("stderr", adv.stderr);
    Ok(rec)
}

fn run_simulate(cfg: &ExperimentConfig, sc: &SimulateConfig) -> RunResult<ExperimentRecord> {
    let model = marginal(cfg)?;
    let noise = noise(cfg)?;
    let w = explicit_weights(&sc.weights)?;
    let batch = if sc.labels_only {
        sample_labels(&model, &noise, &w, sc.m, cfg.seed)?
    } else {
        sample_dataset(&model, &noise, &w, sc.m, cfg.seed)?
    };
    let mut buf = Vec::new();
    batch.write_csv(&mut buf).map_err(RunError::io)?;
    let y = batch.y();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
    let mut rec = ExperimentRecord::new(cfg);
    rec.rows.push(json!({ "m": batch.m(), "n": batch.n(), "seed": cfg.seed, "mean_y": mean, "var_y": var }));
    rec.table = Some(String::from_utf8(buf).expect("CSV is UTF-8"));
    rec.push_summary("m", batch.m());
    rec.push_summary("n", batch.n());
    rec.push_summary("mean_y", mean);
    rec.push_summary("var_y", var);
    Ok(rec)
}

fn run_estimate(cfg: &ExperimentConfig, ec: &EstimateConfig) -> RunResult<ExperimentRecord> {
    let model = cfg.model.clone().map(MarginalModel::try_from).transpose()?;
    let noise = noise(cfg)?;
    let labels: Vec<f64> = match &ec.input {
        Some(path) => {
            let f = File::open(path).map_err(RunError::io)?;
            SampleBatch::read_csv(BufReader::new(f))?.into_labels()
        }
        None => {
            let model = model.as_ref().expect("validated");
            let m = ec.m.ok_or_else(|| Error::Config("estimate needs m or an input file".into()))?;
            sample_labels(model, &noise, &explicit_weights(&ec.weights)?, m, cfg.seed)?.into_labels()
        }
    };
    let y = if ec.symmetrize { symmetrize_labels(&labels) } else { labels };
    if ec.orders.is_empty() {
        return Err(Error::Config("estimate needs at least one order".into()).into());
    }
    if let Some(l) = ec.orders.iter().find(|&&l| l < 2 || l % 2 == 1) {
        return Err(Error::Domain(format!("order {l} is invalid: power-sum orders must be even and ≥ 2")).into());
    }
    let top = *ec.orders.iter().max().expect("nonempty");
    let model_kappa = match &model {
        Some(m) => Some(m.exact_cumulants(top)?),
        None => None,
    };
    let scale = |l: usize, v: f64| if ec.symmetrize { 2.0 * v / 2f64.powf(l as f64 / 2.0) } else { v };
    let s2 = estimate_norm2(&y, noise.exact_moments(2)?.order(2))?;
    let mut rec = ExperimentRecord::new(cfg);
    let mut table = String::from("order,cumulant,power_sum,linf,s2\n");
    for &l in &ec.orders {
        let kappa_y = empirical_cumulant(&y, l, ec.symmetrize)?;
        let mut row = json!({ "order": l, "cumulant": kappa_y, "s2": s2.value, "samples": y.len() });
        let mut m_l = None;
        if let Some(kx) = &model_kappa {
            let kx_l = scale(l, kx.order(l));
            let kn_l = scale(l, noise.cumulant(l)?);
            let est = power_sum_from_cumulant(kappa_y, l, kx_l, kn_l, y.len(), DEFAULT_CUMULANT_FLOOR)?;
            m_l = Some(est.value);
            row["power_sum"] = json!(est.value);
            row["linf"] = json!(linf_extract(est.value, l));
            if let (Some(eps), Some(delta), Some(m)) = (ec.eps, ec.delta, &model) {
                let mx = m.exact_moments(2 * l)?;
                let mn = noise.exact_moments(2 * l)?;
                let need = sample_size_power_sum(
                    l,
                    eps,
                    delta,
                    kx.order(l).abs(),
                    ec.norm_bound,
                    mx.order(2 * l),
                    mn.order(2 * l).max(0.0),
                )?;
                row["recommended_samples"] = json!(need);
            }
        }
        table.push_str(&format!(
            "{l},{kappa_y},{},{},{}\n",
            m_l.map_or(String::new(), |v| v.to_string()),
            m_l.map_or(String::new(), |v| linf_extract(v, l).to_string()),
            s2.value
        ));
        rec.rows.push(row);
    }
    rec.table = Some(table);
    rec.push_summary("samples", y.len());
    rec.push_summary("s2", s2.value);
    rec.push_summary("orders", ec.orders.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(" "));
    Ok(rec)
}

fn run_cumulants(cfg: &ExperimentConfig, order: usize) -> RunResult<ExperimentRecord> {
    let model = marginal(cfg)?;
    if order == 0 {
        return Err(Error::Domain("order must be ≥ 1".into()).into());
    }
    let m = model.exact_moments(order)?;
    let k = moments_to_cumulants(&m)?;
    let mean_zero = m.order(1).abs() < 1e-12;
    let mut rec = ExperimentRecord::new(cfg);
    let mut table = String::from("order,moment,cumulant,upper_bound\n");
    for l in 1..=order {
        let bound = if mean_zero && l % 2 == 0 { Some(cumulant_upper_bound(l, m.order(l))?) } else { None };
        table.push_str(&format!(
            "{l},{},{},{}\n",
            m.order(l),
            k.order(l),
            bound.map_or(String::new(), |b| b.to_string())
        ));
        rec.rows.push(json!({ "order": l, "moment": m.order(l), "cumulant": k.order(l), "upper_bound": bound }));
    }
    rec.table = Some(table);
    rec.push_summary("model", model.to_string());
    rec.push_summary("order", order);
    Ok(rec)
}

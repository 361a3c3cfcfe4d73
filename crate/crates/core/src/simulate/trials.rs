use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{corrupt_priors, derive_seed, gen_synthetic, oracle_prior, PriorKind, Scenario};
use crate::error::{Error, Result};
use crate::pipeline::{run, DepthSetting, Method, MethodConfig, SelectionReport};
use crate::ranking::PriorSpec;
use crate::risk::{validate_risk_table, HyperparamId, SelectionProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub data_seed: u64,
    pub split_seed: u64,
    /// Depth levels built, for the graph method.
    pub depth: Option<usize>,
    pub discovered: Vec<HyperparamId>,
    pub false_discoveries: usize,
    pub true_discoveries: usize,
    /// False discoveries over `max(discoveries, 1)`.
    pub fdp: f64,
    /// True discoveries over the number of truly reliable hyperparameters,
    /// zero when there are none.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles.
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            if v.is_empty() {
                return 0.0;
            }
            let rank = (p * v.len() as f64).ceil() as usize;
            v[rank.clamp(1, v.len()) - 1]
        };
        Self {
            q50: q(0.5),
            q90: q(0.9),
            q99: q(0.99),
            max: v.last().copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrReport {
    pub scenario: String,
    pub method: Method,
    pub config: MethodConfig,
    pub problem: SelectionProblem,
    pub prior: super::PriorPlan,
    pub data_seed: u64,
    pub n_samples: usize,
    pub trials: usize,
    pub n_true_reliable: usize,
    /// Mean false discovery proportion.
    pub fdr: f64,
    /// Sample standard deviation of the FDP over `sqrt(trials)`.
    pub se: f64,
    pub power: f64,
    pub power_se: f64,
    pub mean_discoveries: f64,
    pub fdp_quantiles: Quantiles,
    pub records: Vec<TrialRecord>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    trial: usize,
    data_seed: u64,
    split_seed: u64,
    depth: Option<usize>,
    n_discovered: usize,
    false_discoveries: usize,
    true_discoveries: usize,
    fdp: f64,
    power: f64,
    discovered: &'a str,
}

fn trial_rows(records: &[TrialRecord]) -> impl Iterator<Item = (String, &TrialRecord)> {
    records.iter().map(|r| {
        let ids = r.discovered.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(" ");
        (ids, r)
    })
}

impl<'a> CsvRow<'a> {
    fn new(ids: &'a str, r: &TrialRecord) -> Self {
        CsvRow {
            trial: r.trial,
            data_seed: r.data_seed,
            split_seed: r.split_seed,
            depth: r.depth,
            n_discovered: r.discovered.len(),
            false_discoveries: r.false_discoveries,
            true_discoveries: r.true_discoveries,
            fdp: r.fdp,
            power: r.power,
            discovered: ids,
        }
    }
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    parameter: &'a str,
    value: &'a str,
    trial: usize,
    data_seed: u64,
    split_seed: u64,
    depth: Option<usize>,
    n_discovered: usize,
    false_discoveries: usize,
    true_discoveries: usize,
    fdp: f64,
    power: f64,
    discovered: &'a str,
}

impl FdrReport {
    /// Mean FDP is within `sigmas` standard errors of `delta` or below.
    pub fn controls(&self, delta: f64, sigmas: f64) -> bool {
        self.fdr <= delta + sigmas * self.se
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per trial.
    pub fn trials_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (ids, r) in trial_rows(&self.records) {
            w.serialize(CsvRow::new(&ids, r)).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }
}

/// One grid point of an ablation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: String,
    pub report: FdrReport,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    parameter: &'a str,
    value: &'a str,
    method: &'a str,
    trials: usize,
    fdr: f64,
    se: f64,
    power: f64,
    power_se: f64,
    mean_discoveries: f64,
}

/// Every trial of every sweep point, keyed by the swept parameter.
pub fn sweep_trials_csv(points: &[SweepPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        for (ids, r) in trial_rows(&p.report.records) {
            let row = CsvRow::new(&ids, r);
            w.serialize(SweepCsvRow {
                parameter: &p.parameter,
                value: &p.value,
                trial: row.trial,
                data_seed: row.data_seed,
                split_seed: row.split_seed,
                depth: row.depth,
                n_discovered: row.n_discovered,
                false_discoveries: row.false_discoveries,
                true_discoveries: row.true_discoveries,
                fdp: row.fdp,
                power: row.power,
                discovered: row.discovered,
            })
            .expect("in-memory csv write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

/// One row per sweep point.
pub fn summary_csv(points: &[SweepPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(SummaryRow {
            parameter: &p.parameter,
            value: &p.value,
            method: p.report.method.as_str(),
            trials: p.report.trials,
            fdr: p.report.fdr,
            se: p.report.se,
            power: p.report.power,
            power_se: p.report.power_se,
            mean_discoveries: p.report.mean_discoveries,
        })
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

/// Shared state of a batch of trials.
pub struct TrialSetup<'a> {
    pub scenario: &'a Scenario,
    pub config: &'a MethodConfig,
    truth: Vec<bool>,
    base_prior: PriorSpec,
}

impl<'a> TrialSetup<'a> {
    pub fn new(scenario: &'a Scenario, config: &'a MethodConfig) -> Result<Self> {
        scenario.check()?;
        config.check()?;
        let spec = &scenario.synthetic;
        let base_prior = match scenario.prior.kind {
            PriorKind::None => PriorSpec::uninformative(spec.n_hyperparams())
                .with_pseudocount(scenario.prior.pseudocount)?,
            PriorKind::Oracle => oracle_prior(spec, &scenario.alphas, scenario.prior.pseudocount)?,
        };
        Ok(Self {
            scenario,
            config,
            truth: spec.truly_reliable(&scenario.alphas),
            base_prior,
        })
    }

    /// Runs trial `t` and returns the full report alongside its record.
    pub fn run_trial(&self, t: usize) -> Result<(SelectionReport, TrialRecord)> {
        let sc = self.scenario;
        let data_seed = derive_seed(sc.synthetic.seed, t as u64, 0);
        let split_seed = derive_seed(sc.seed, t as u64, 1);
        let table = gen_synthetic(&sc.synthetic.reseeded(data_seed))?;
        let cal = validate_risk_table(table, sc.problem().with_seed(split_seed))?;
        let prior = corrupt_priors(&self.base_prior, sc.prior.corruption, derive_seed(sc.seed, t as u64, 2))?;
        let report = run(&cal, &prior, self.config)?;
        let false_discoveries = report.discovered.iter().filter(|h| !self.truth[h.0]).count();
        let true_discoveries = report.discovered.len() - false_discoveries;
        let n_true = self.truth.iter().filter(|t| **t).count();
        let record = TrialRecord {
            trial: t,
            data_seed,
            split_seed,
            depth: report.config.depth,
            discovered: report.discovered.clone(),
            false_discoveries,
            true_discoveries,
            fdp: false_discoveries as f64 / report.discovered.len().max(1) as f64,
            power: if n_true == 0 { 0.0 } else { true_discoveries as f64 / n_true as f64 },
        };
        Ok((report, record))
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::BadConfig("jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::BadConfig(format!("thread pool: {e}"))),
    }
}

/// Runs `trials` independent trials. Per-trial seeds are derived from the
/// scenario seeds and the trial index, so the result does not depend on
/// `jobs`.
pub fn run_trials(scenario: &Scenario, config: &MethodConfig, trials: usize, jobs: Option<usize>) -> Result<FdrReport> {
    if trials == 0 {
        return Err(Error::BadConfig("trials must be at least 1".into()));
    }
    let setup = TrialSetup::new(scenario, config)?;
    let records: Vec<TrialRecord> = with_jobs(jobs, || {
        (0..trials)
            .into_par_iter()
            .map(|t| setup.run_trial(t).map(|(_, r)| r))
            .collect::<Vec<_>>()
    })?
    .into_iter()
    .collect::<Result<_>>()?;

    let fdps: Vec<f64> = records.iter().map(|r| r.fdp).collect();
    let powers: Vec<f64> = records.iter().map(|r| r.power).collect();
    let (fdr, se) = mean_and_se(&fdps);
    let (power, power_se) = mean_and_se(&powers);
    let mean_discoveries = records.iter().map(|r| r.discovered.len() as f64).sum::<f64>() / trials as f64;
    Ok(FdrReport {
        scenario: scenario.name.clone(),
        method: config.method,
        config: config.clone(),
        problem: scenario.problem(),
        prior: scenario.prior,
        data_seed: scenario.synthetic.seed,
        n_samples: scenario.synthetic.n_samples,
        trials,
        n_true_reliable: setup.truth.iter().filter(|t| **t).count(),
        fdr,
        se,
        power,
        power_se,
        mean_discoveries,
        fdp_quantiles: Quantiles::of(&fdps),
        records,
    })
}

/// One batch of trials per depth setting, all on the same synthetic tables.
pub fn sweep_depth(
    scenario: &Scenario,
    config: &MethodConfig,
    depths: &[DepthSetting],
    trials: usize,
    jobs: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    depths
        .iter()
        .map(|&depth| {
            let cfg = MethodConfig {
                depth,
                ..config.clone()
            };
            Ok(SweepPoint {
                parameter: "depth".into(),
                value: depth.to_string(),
                report: run_trials(scenario, &cfg, trials, jobs)?,
            })
        })
        .collect()
}

/// One batch of trials per prior-corruption fraction.
pub fn sweep_corruption(
    scenario: &Scenario,
    config: &MethodConfig,
    fractions: &[f64],
    trials: usize,
    jobs: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    fractions
        .iter()
        .map(|&f| {
            let mut sc = scenario.clone();
            sc.prior.corruption = f;
            Ok(SweepPoint {
                parameter: "corruption".into(),
                value: f.to_string(),
                report: run_trials(&sc, config, trials, jobs)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{standard_battery, Correlation, PriorPlan};

    fn small() -> Scenario {
        let mut s = standard_battery(Correlation::Independent);
        s.synthetic.n_samples = 200;
        s
    }

    #[test]
    fn quantiles_nearest_rank() {
        let q = Quantiles::of(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(q.q50, 0.4);
        assert_eq!(q.q90, 0.8);
        assert_eq!(q.q99, 0.9);
        assert_eq!(q.max, 0.9);
    }

    #[test]
    fn se_formula() {
        let (m, se) = mean_and_se(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert!((se - (0.5f64 / 2.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_se(&[0.3]), (0.3, 0.0));
    }

    #[test]
    fn independent_of_worker_count() {
        let s = small();
        let cfg = MethodConfig::default();
        let a = run_trials(&s, &cfg, 12, Some(1)).unwrap();
        let b = run_trials(&s, &cfg, 12, Some(4)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.trials_csv(), b.trials_csv());
        assert_eq!(a.records.len(), 12);
        assert!(a.records.iter().enumerate().all(|(i, r)| r.trial == i));
    }

    #[test]
    fn all_reliable_means_zero_fdp() {
        let mut s = small();
        s.synthetic.true_means = vec![vec![0.05]; 6];
        s.synthetic.aux_means = vec![vec![0.5]; 6];
        for m in Method::ALL {
            let r = run_trials(&s, &MethodConfig::new(m), 6, None).unwrap();
            assert!(r.records.iter().all(|t| t.fdp == 0.0));
        }
    }

    #[test]
    fn no_discoveries_is_zero_fdp() {
        let mut s = small();
        s.synthetic.true_means = vec![vec![0.9]; 4];
        s.synthetic.aux_means = vec![vec![0.1]; 4];
        let r = run_trials(&s, &MethodConfig::default(), 4, None).unwrap();
        assert!(r.records.iter().all(|t| t.discovered.is_empty() && t.fdp == 0.0 && t.power == 0.0));
    }

    #[test]
    fn depth_sweep_shares_tables() {
        let s = small();
        let pts = sweep_depth(&s, &MethodConfig::default(), &[DepthSetting::Fixed(1), DepthSetting::Full], 3, None).unwrap();
        assert_eq!(pts.len(), 2);
        let seeds = |p: &SweepPoint| p.report.records.iter().map(|r| r.data_seed).collect::<Vec<_>>();
        assert_eq!(seeds(&pts[0]), seeds(&pts[1]));
        assert_eq!(pts[0].report.records[0].depth, Some(1));
        let one = sweep_depth(&s, &MethodConfig::default(), &[DepthSetting::Fixed(3)], 2, None).unwrap();
        assert_eq!(one.len(), 1);
        let csv = summary_csv(&pts);
        assert!(csv.starts_with("parameter,value,method,trials,fdr,se,power,power_se,mean_discoveries\n"));
        assert_eq!(csv.lines().count(), 3);
        let trials = sweep_trials_csv(&pts);
        assert!(trials.starts_with("parameter,value,trial,data_seed,"));
        assert_eq!(trials.lines().count(), 7);
    }

    #[test]
    fn corruption_sweep_runs() {
        let s = small().with_prior(PriorPlan {
            kind: PriorKind::Oracle,
            pseudocount: 1000.0,
            corruption: 0.0,
        });
        let pts = sweep_corruption(&s, &MethodConfig::default(), &[0.0, 1.0], 4, None).unwrap();
        assert_eq!(pts[1].value, "1");
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(run_trials(&small(), &MethodConfig::default(), 0, None).is_err());
        assert!(run_trials(&small(), &MethodConfig::default(), 1, Some(0)).is_err());
    }
}

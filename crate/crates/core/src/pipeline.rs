//! End-to-end selection runs for the graph-based method and the two
//! baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{effective_counts, learn_edges, EffectiveCounts, ReliabilityGraph, DEFAULT_TAU};
use crate::pareto::{final_selection, pareto_front, ParetoFront};
use crate::ranking::{
    cluster_depths, default_depth, fit_bt_mm, pairwise_counts, PriorSpec, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::risk::{split_data, Calibration, HyperparamId, SubsetView};
use crate::testing::{
    default_k, run_bh, run_dagger, run_fst, BhTrace, DaggerTrace, FstConfig, FstTrace, Reshape,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Rgpt,
    LttBh,
    PtFst,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rgpt, Method::LttBh, Method::PtFst];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rgpt => "rgpt",
            Method::LttBh => "ltt-bh",
            Method::PtFst => "pt-fst",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::BadConfig(format!("unknown method `{s}` (expected rgpt, ltt-bh or pt-fst)")))
    }
}

/// Number of depth levels requested for the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthSetting {
    /// `ceil(n / 5)` clamped to `[2, n - 1]`.
    #[default]
    Default,
    /// One level per front member.
    Full,
    Fixed(usize),
}

impl DepthSetting {
    pub fn resolve(self, n_front: usize) -> usize {
        match self {
            DepthSetting::Default => default_depth(n_front),
            DepthSetting::Full => n_front.max(1),
            DepthSetting::Fixed(d) => d,
        }
    }
}

impl fmt::Display for DepthSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthSetting::Default => f.write_str("default"),
            DepthSetting::Full => f.write_str("full"),
            DepthSetting::Fixed(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for DepthSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(DepthSetting::Default),
            "full" => Ok(DepthSetting::Full),
            _ => match s.parse::<usize>() {
                Ok(d) if d >= 1 => Ok(DepthSetting::Fixed(d)),
                _ => Err(Error::BadConfig(format!(
                    "depth `{s}` is not a positive integer, `default` or `full`"
                ))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DepthRepr {
    Fixed(usize),
    Word(String),
}

impl Serialize for DepthSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DepthSetting::Fixed(d) => DepthRepr::Fixed(*d),
            other => DepthRepr::Word(other.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DepthSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match DepthRepr::deserialize(d)? {
            DepthRepr::Fixed(n) => n.to_string().parse(),
            DepthRepr::Word(w) => w.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Everything a run needs besides the data, the targets and the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    pub depth: DepthSetting,
    pub tau: f64,
    pub reshape: Reshape,
    /// FST failure budget; `None` means `ceil(0.1 n)` over the front.
    pub k: Option<usize>,
    pub bt_tol: f64,
    pub bt_max_iter: usize,
    /// Scalarization weights over the auxiliary risks for the final pick.
    pub weights: Option<Vec<f64>>,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            method: Method::Rgpt,
            depth: DepthSetting::Default,
            tau: DEFAULT_TAU,
            reshape: Reshape::BenjaminiYekutieli,
            k: None,
            bt_tol: DEFAULT_TOL,
            bt_max_iter: DEFAULT_MAX_ITER,
            weights: None,
        }
    }
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::BadConfig(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.bt_tol > 0.0) || self.bt_max_iter == 0 {
            return Err(Error::BadConfig("bt_tol and bt_max_iter must be positive".into()));
        }
        if self.depth == DepthSetting::Fixed(0) {
            return Err(Error::BadConfig("depth must be at least 1".into()));
        }
        if self.k == Some(0) {
            return Err(Error::BadConfig("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fully resolved settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub method: Method,
    pub delta: f64,
    pub alphas: Vec<f64>,
    pub seed: u64,
    /// `None` when all samples are used for testing.
    pub split_fraction: Option<f64>,
    pub depth_setting: Option<DepthSetting>,
    /// Number of depth levels actually built.
    pub depth: Option<usize>,
    pub tau: Option<f64>,
    pub reshape: Option<Reshape>,
    pub pseudocount: Option<f64>,
    pub bt_tol: Option<f64>,
    pub bt_max_iter: Option<usize>,
    pub k: Option<usize>,
    pub weights: Option<Vec<f64>>,
    /// Where the prior came from, filled in by callers that load one.
    pub prior_source: Option<String>,
    pub flip_priors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub opt: usize,
    pub mht: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePvalue {
    pub id: HyperparamId,
    pub pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub id: HyperparamId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEcho {
    /// Combined p-values of the front on the optimisation split.
    pub opt_pvalues: Vec<NodePvalue>,
    pub scores: Vec<NodeScore>,
    pub converged: bool,
    pub iterations: usize,
    /// Depth levels, most reliable first.
    pub clusters: Vec<Vec<HyperparamId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "procedure", rename_all = "kebab-case")]
pub enum Trace {
    Dagger(DaggerTrace),
    Bh(BhTrace),
    Fst(FstTrace),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSection {
    pub graph: ReliabilityGraph,
    pub counts: EffectiveCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub config: ConfigEcho,
    pub n_samples: usize,
    pub labels: Vec<String>,
    pub split: Option<SplitSizes>,
    pub pareto_front: Option<ParetoFront>,
    pub ranking: Option<RankingEcho>,
    pub graph: Option<GraphSection>,
    /// Combined p-values on the testing samples for every tested candidate.
    pub pvalues: Vec<NodePvalue>,
    pub trace: Trace,
    pub discovered: Vec<HyperparamId>,
    #[serde(rename = "final")]
    pub final_selection: Vec<HyperparamId>,
}

impl SelectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn pvalue(&self, id: HyperparamId) -> Option<f64> {
        self.pvalues.iter().find(|p| p.id == id).map(|p| p.pvalue)
    }
}

fn echo(cal: &Calibration, method: Method) -> ConfigEcho {
    let p = cal.problem();
    ConfigEcho {
        method,
        delta: p.delta,
        alphas: p.alphas.clone(),
        seed: p.seed,
        split_fraction: None,
        depth_setting: None,
        depth: None,
        tau: None,
        reshape: None,
        pseudocount: None,
        bt_tol: None,
        bt_max_iter: None,
        k: None,
        weights: None,
        prior_source: None,
        flip_priors: false,
    }
}

fn tagged(view: &SubsetView<'_>, ids: &[HyperparamId]) -> Vec<NodePvalue> {
    ids.iter()
        .map(|&id| NodePvalue {
            id,
            pvalue: view.combined_pvalue(id),
        })
        .collect()
}

/// Runs the selected method. `prior` is only consulted by the graph method and
/// must cover every hyperparameter of the table.
pub fn run(cal: &Calibration, prior: &PriorSpec, cfg: &MethodConfig) -> Result<SelectionReport> {
    match cfg.method {
        Method::Rgpt => run_rgpt(cal, prior, cfg),
        Method::LttBh => run_ltt(cal, cfg),
        Method::PtFst => run_pt(cal, cfg),
    }
}

/// Split, Pareto front and ranking on the optimisation half, graph testing on
/// the other half, final pick on optimisation estimates.
pub fn run_rgpt(cal: &Calibration, prior: &PriorSpec, cfg: &MethodConfig) -> Result<SelectionReport> {
    cfg.check()?;
    let table = cal.table();
    if prior.len() != table.n_hyperparams() {
        return Err(Error::PriorShapeMismatch {
            expected: table.n_hyperparams(),
            found: prior.len(),
        });
    }
    let problem = cal.problem();
    let split = split_data(table.n_samples(), problem.split_fraction, problem.seed)?;
    let opt = cal.view(&split.opt)?;
    let mht = cal.view(&split.mht)?;

    let front = pareto_front(&opt);
    let opt_pvalues = tagged(&opt, &front.members);
    let p_opt: Vec<f64> = opt_pvalues.iter().map(|p| p.pvalue).collect();
    let local_prior = prior.restrict(&front.members)?;
    let counts = pairwise_counts(&p_opt, &local_prior, opt.len())?;
    let bt = fit_bt_mm(&counts, cfg.bt_tol, cfg.bt_max_iter);
    if !bt.converged {
        log::warn!("Bradley-Terry fit stopped after {} iterations", bt.iterations);
    }
    let scores: Vec<(HyperparamId, f64)> =
        front.members.iter().copied().zip(bt.scores.iter().copied()).collect();
    let depths = cluster_depths(&front.members, &bt.scores, cfg.depth.resolve(front.len()));
    let graph = learn_edges(&opt, &depths, cfg.tau, Some(&scores))?;
    let eff = effective_counts(&graph);

    let pvalues = tagged(&mht, &front.members);
    let pmap: BTreeMap<HyperparamId, f64> = pvalues.iter().map(|p| (p.id, p.pvalue)).collect();
    let outcome = run_dagger(&graph, &eff, &pmap, problem.delta, cfg.reshape)?;
    let final_pick = final_selection(&outcome.discovered, &opt, cfg.weights.as_deref())?;

    let mut config = echo(cal, Method::Rgpt);
    config.split_fraction = Some(problem.split_fraction);
    config.depth_setting = Some(cfg.depth);
    config.depth = Some(depths.depth_count());
    config.tau = Some(cfg.tau);
    config.reshape = Some(cfg.reshape);
    config.pseudocount = Some(prior.pseudocount());
    config.bt_tol = Some(cfg.bt_tol);
    config.bt_max_iter = Some(cfg.bt_max_iter);
    config.weights = cfg.weights.clone();

    Ok(SelectionReport {
        config,
        n_samples: table.n_samples(),
        labels: table.labels().to_vec(),
        split: Some(SplitSizes {
            opt: split.opt.len(),
            mht: split.mht.len(),
        }),
        ranking: Some(RankingEcho {
            opt_pvalues,
            scores: scores.iter().map(|&(id, score)| NodeScore { id, score }).collect(),
            converged: bt.converged,
            iterations: bt.iterations,
            clusters: depths.clusters,
        }),
        pareto_front: Some(front),
        graph: Some(GraphSection { graph, counts: eff }),
        pvalues,
        trace: Trace::Dagger(outcome.trace),
        discovered: outcome.discovered,
        final_selection: final_pick,
    })
}

/// Benjamini-Hochberg over every hyperparameter using all samples.
pub fn run_ltt(cal: &Calibration, cfg: &MethodConfig) -> Result<SelectionReport> {
    let table = cal.table();
    let all = cal.full_view();
    let ids: Vec<HyperparamId> = table.hyperparams().collect();
    let pvalues = tagged(&all, &ids);
    let pairs: Vec<(HyperparamId, f64)> = pvalues.iter().map(|p| (p.id, p.pvalue)).collect();
    let outcome = run_bh(&pairs, cal.problem().delta);
    let final_pick = final_selection(&outcome.discovered, &all, cfg.weights.as_deref())?;
    let mut config = echo(cal, Method::LttBh);
    config.weights = cfg.weights.clone();
    Ok(SelectionReport {
        config,
        n_samples: table.n_samples(),
        labels: table.labels().to_vec(),
        split: None,
        pareto_front: None,
        ranking: None,
        graph: None,
        pvalues,
        trace: Trace::Bh(outcome.trace),
        discovered: outcome.discovered,
        final_selection: final_pick,
    })
}

/// Linear order of the front by ascending optimisation-split p-value, ties
/// by index.
pub fn pt_order(opt_pvalues: &[NodePvalue]) -> Vec<HyperparamId> {
    let mut sorted = opt_pvalues.to_vec();
    sorted.sort_by(|a, b| a.pvalue.total_cmp(&b.pvalue).then(a.id.cmp(&b.id)));
    sorted.into_iter().map(|p| p.id).collect()
}

/// Split, Pareto front, linear order and fixed-sequence testing.
pub fn run_pt(cal: &Calibration, cfg: &MethodConfig) -> Result<SelectionReport> {
    cfg.check()?;
    let table = cal.table();
    let problem = cal.problem();
    let split = split_data(table.n_samples(), problem.split_fraction, problem.seed)?;
    let opt = cal.view(&split.opt)?;
    let mht = cal.view(&split.mht)?;

    let front = pareto_front(&opt);
    let opt_pvalues = tagged(&opt, &front.members);
    let order = pt_order(&opt_pvalues);
    let pvalues = tagged(&mht, &order);
    let k = cfg.k.unwrap_or_else(|| default_k(order.len()));
    let p: Vec<f64> = pvalues.iter().map(|p| p.pvalue).collect();
    let outcome = run_fst(
        &order,
        &p,
        &FstConfig {
            k,
            delta: problem.delta,
        },
    )
    .map_err(|e| match e {
        Error::BadK { k, n } => Error::BadConfig(format!("k = {k} exceeds the {n} front members")),
        other => other,
    })?;
    let mut discovered = outcome.discovered.clone();
    discovered.sort_unstable();
    let final_pick = final_selection(&discovered, &opt, cfg.weights.as_deref())?;

    let mut config = echo(cal, Method::PtFst);
    config.split_fraction = Some(problem.split_fraction);
    config.k = Some(k);
    config.weights = cfg.weights.clone();
    Ok(SelectionReport {
        config,
        n_samples: table.n_samples(),
        labels: table.labels().to_vec(),
        split: Some(SplitSizes {
            opt: split.opt.len(),
            mht: split.mht.len(),
        }),
        pareto_front: Some(front),
        ranking: Some(RankingEcho {
            opt_pvalues,
            scores: Vec::new(),
            converged: true,
            iterations: 0,
            clusters: order.iter().map(|&h| vec![h]).collect(),
        }),
        graph: None,
        pvalues,
        trace: Trace::Fst(outcome.trace),
        discovered,
        final_selection: final_pick,
    })
}

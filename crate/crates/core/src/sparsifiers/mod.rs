//! Per-node selection of at most `m` inputs whose joint Wiener projection
//! leaves the smallest residual variance.
//!
//! Three solvers are provided: an exhaustive search that serves as the
//! reference, Cycling OLS (greedy slot replacement) and reweighted least
//! squares followed by hard selection. [`auto_degree_identify`] wraps any of
//! them to choose `m` per node.

mod auto;
mod cols;
mod exhaustive;
mod rwls;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use auto::auto_degree_identify;
pub use cols::cols_identify;
pub use exhaustive::{count_subsets, exhaustive_identify};
pub use rwls::{rwls_identify, solve_weighted_projection};

use crate::correlation::CovarianceModel;
use crate::error::{Error, Result};
use crate::graphio::{Edge, Topology};
use crate::wiener::{project, ProjectionRequest, Ridge, WienerSolution, DEFAULT_HALF_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Cols,
    Rwls,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exhaustive => "exhaustive",
            Method::Cols => "cols",
            Method::Rwls => "rwls",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exhaustive" => Ok(Method::Exhaustive),
            "cols" => Ok(Method::Cols),
            "rwls" => Ok(Method::Rwls),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// In-degree bound per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Degree {
    Fixed(usize),
    /// Grow the degree while each new input cuts the residual by at least
    /// `auto_threshold`.
    Auto,
}

impl FromStr for Degree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Degree::Auto);
        }
        s.parse()
            .map(Degree::Fixed)
            .map_err(|_| Error::Config(format!("degree must be an integer or `auto`, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifierConfig {
    pub m: Degree,
    pub half_width: usize,
    pub ridge: Ridge,
    pub rwls_iterations: usize,
    /// Weight floor; `None` means `1e-6 · R(j, j, 0)`.
    pub rwls_epsilon: Option<f64>,
    /// Penalty multiplier; `None` means `0.1 · R(j, j, 0)`.
    pub rwls_lambda: Option<f64>,
    /// Weights for the first reweighted solve; `None` means all zero.
    pub rwls_initial_weights: Option<Vec<f64>>,
    pub auto_threshold: f64,
    pub enumeration_budget: u128,
    /// Minimum residual decrease for COLS to accept a replacement.
    pub improvement_tol: f64,
    /// Worker threads for [`identify_all`]; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SparsifierConfig {
    fn default() -> Self {
        Self {
            m: Degree::Fixed(2),
            half_width: DEFAULT_HALF_WIDTH,
            ridge: Ridge::default(),
            rwls_iterations: 10,
            rwls_epsilon: None,
            rwls_lambda: None,
            rwls_initial_weights: None,
            auto_threshold: 0.20,
            enumeration_budget: 1_000_000,
            improvement_tol: 1e-9,
            workers: None,
        }
    }
}

impl SparsifierConfig {
    pub fn with_m(mut self, m: usize) -> Self {
        self.m = Degree::Fixed(m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rwls_iterations < 1 {
            return Err(Error::Config("rwls_iterations must be at least 1".into()));
        }
        if !(self.auto_threshold > 0.0 && self.auto_threshold < 1.0) {
            return Err(Error::Config(format!(
                "auto_threshold must lie in (0, 1), got {}",
                self.auto_threshold
            )));
        }
        if let Some(eps) = self.rwls_epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("rwls_epsilon must be positive, got {eps}")));
            }
        }
        if let Some(lambda) = self.rwls_lambda {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::Config(format!("rwls_lambda must be nonnegative, got {lambda}")));
            }
        }
        if !(self.improvement_tol >= 0.0) {
            return Err(Error::Config("improvement_tol must be nonnegative".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn fixed_m(&self, model: &CovarianceModel) -> Result<usize> {
        match self.m {
            Degree::Fixed(m) if m < model.n() => Ok(m),
            Degree::Fixed(m) => Err(Error::Config(format!(
                "degree bound {m} exceeds the {} available inputs",
                model.n() - 1
            ))),
            Degree::Auto => Err(Error::Config("this solver needs a fixed degree bound, not auto".into())),
        }
    }

    pub(crate) fn request(&self, target: usize, inputs: Vec<usize>) -> ProjectionRequest {
        ProjectionRequest::new(target, inputs)
            .with_half_width(self.half_width)
            .with_ridge(self.ridge)
    }
}

/// One entry of a solver's log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Pass, iteration or degree, depending on the solver.
    pub iteration: usize,
    /// COLS slot revisited in this pass.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slot: Option<usize>,
    /// Candidate set after the step.
    pub selection: Vec<usize>,
    pub residual_before: f64,
    pub residual: f64,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub channel_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub target: usize,
    /// Selected inputs in ascending order.
    pub selected: Vec<usize>,
    /// Projection onto exactly `selected`.
    pub solution: WienerSolution,
    pub method: Method,
    pub trace: Vec<TraceStep>,
    /// Set when COLS stopped at its pass cap instead of converging.
    pub pass_cap_reached: bool,
}

impl SelectionResult {
    pub fn residual(&self) -> f64 {
        self.solution.residual_variance
    }

    pub(crate) fn finish(
        model: &CovarianceModel,
        config: &SparsifierConfig,
        target: usize,
        mut selected: Vec<usize>,
        method: Method,
        trace: Vec<TraceStep>,
    ) -> Result<Self> {
        selected.sort_unstable();
        let solution = project(model, &config.request(target, selected.clone()))?;
        Ok(Self {
            target,
            selected,
            solution,
            method,
            trace,
            pass_cap_reached: false,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            target: usize,
            selected: &'a [usize],
            method: Method,
            residual_variance: f64,
            channel_norms: Vec<f64>,
            trace: &'a [TraceStep],
            pass_cap_reached: bool,
        }
        Ok(serde_json::to_string(&Out {
            target: self.target,
            selected: &self.selected,
            method: self.method,
            residual_variance: self.residual(),
            channel_norms: self.solution.channel_norms(),
            trace: &self.trace,
            pass_cap_reached: self.pass_cap_reached,
        })?)
    }
}

/// Every node other than `target`, ascending.
pub(crate) fn candidates(n: usize, target: usize) -> Vec<usize> {
    (0..n).filter(|&i| i != target).collect()
}

/// Runs `method` for one node, honoring `config.m` (fixed or auto).
pub fn identify_node(model: &CovarianceModel, target: usize, config: &SparsifierConfig, method: Method) -> Result<SelectionResult> {
    config.validate()?;
    model.check_index(target)?;
    match config.m {
        Degree::Auto => auto_degree_identify(model, target, config, method),
        Degree::Fixed(_) => match method {
            Method::Exhaustive => exhaustive_identify(model, target, config),
            Method::Cols => cols_identify(model, target, config),
            Method::Rwls => rwls_identify(model, target, config),
        },
    }
}

/// Runs the per-node identifier for every node, results ordered by node.
pub fn identify_nodes(model: &CovarianceModel, node_ids: &[String], config: &SparsifierConfig, method: Method) -> Result<Vec<SelectionResult>> {
    config.validate()?;
    if node_ids.len() != model.n() {
        return Err(Error::Dimension(format!(
            "{} node ids for a {}-node covariance model",
            node_ids.len(),
            model.n()
        )));
    }
    let run = || {
        (0..model.n())
            .into_par_iter()
            .map(|j| identify_node(model, j, config, method).map_err(|e| e.at_node(node_ids[j].clone())))
            .collect::<Result<Vec<_>>>()
    };
    match config.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Directed topology with an edge `i → j` for every `i` selected for `j`,
/// weighted by the channel norm of its filter.
pub fn identify_all(model: &CovarianceModel, node_ids: &[String], config: &SparsifierConfig, method: Method) -> Result<Topology> {
    let results = identify_nodes(model, node_ids, config, method)?;
    topology_from_selections(node_ids, &results)
}

pub fn topology_from_selections(node_ids: &[String], results: &[SelectionResult]) -> Result<Topology> {
    let mut edges = Vec::new();
    let mut residuals = Vec::with_capacity(results.len());
    for r in results {
        for (p, &i) in r.solution.request.inputs.iter().enumerate() {
            edges.push(Edge {
                from: i,
                to: r.target,
                weight: r.solution.channel_norm(p),
            });
        }
        residuals.push(r.residual());
    }
    Topology::new(node_ids.to_vec(), edges, residuals)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = SparsifierConfig::default();
        assert!(c.validate().is_ok());
        c.rwls_iterations = 0;
        assert!(c.validate().is_err());
        let c = SparsifierConfig {
            auto_threshold: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SparsifierConfig {
            rwls_epsilon: Some(0.0),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(SparsifierConfig::default().rwls_iterations, 10);
        assert_eq!(SparsifierConfig::default().auto_threshold, 0.20);
    }

    #[test]
    fn parse_method_and_degree() {
        assert_eq!("COLS".parse::<Method>().unwrap(), Method::Cols);
        assert!("lasso".parse::<Method>().is_err());
        assert_eq!("auto".parse::<Degree>().unwrap(), Degree::Auto);
        assert_eq!("3".parse::<Degree>().unwrap(), Degree::Fixed(3));
        assert!("x".parse::<Degree>().is_err());
    }

    #[test]
    fn identify_all_respects_degree_and_is_deterministic() {
        let model = chain(21, 3000);
        let ids: Vec<String> = (0..4).map(|k| format!("x{k}")).collect();
        let config = SparsifierConfig::default().with_m(2);
        for method in [Method::Exhaustive, Method::Cols, Method::Rwls] {
            let a = identify_all(&model, &ids, &config, method).unwrap();
            let b = identify_all(&model, &ids, &SparsifierConfig { workers: Some(1), ..config.clone() }, method).unwrap();
            assert_eq!(a, b);
            for j in 0..4 {
                assert!(a.in_degree(j) <= 2);
            }
        }
    }

    #[test]
    fn independent_pair_under_auto_has_no_edges() {
        let mut rng = rand::SeedableRng::seed_from_u64(4);
        let model = model_of(vec![noise(&mut rng, 5000), noise(&mut rng, 5000)], 20);
        let ids = vec!["a".to_string(), "b".to_string()];
        let config = SparsifierConfig {
            m: Degree::Auto,
            ..Default::default()
        };
        for method in [Method::Cols, Method::Rwls] {
            let t = identify_all(&model, &ids, &config, method).unwrap();
            assert!(t.edges().is_empty());
        }
    }

    #[test]
    fn relabeling_permutes_topology() {
        let model = chain(5, 3000);
        let perm = [2usize, 0, 3, 1];
        let permuted = CovarianceModel::from_fn(4, 20, model.samples(), |i, j, tau| model.get(perm[i], perm[j], tau));
        let ids: Vec<String> = (0..4).map(|k| format!("x{k}")).collect();
        let config = SparsifierConfig::default().with_m(1);
        let a = identify_all(&model, &ids, &config, Method::Cols).unwrap();
        let b = identify_all(&permuted, &ids, &config, Method::Cols).unwrap();
        let mut mapped: Vec<(usize, usize)> = b.edges().iter().map(|e| (perm[e.from], perm[e.to])).collect();
        mapped.sort_unstable();
        let original: Vec<(usize, usize)> = a.edges().iter().map(|e| (e.from, e.to)).collect();
        assert_eq!(mapped, original);
    }

    #[test]
    fn errors_carry_node_id() {
        let model = independent_exact(3);
        let ids: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let err = identify_all(&model, &ids, &SparsifierConfig::default().with_m(5), Method::Cols).unwrap_err();
        assert!(err.to_string().starts_with("node a:"), "{err}");
    }
}

use super::{candidates, Method, SelectionResult, SparsifierConfig, TraceStep};
use crate::correlation::CovarianceModel;
use crate::error::{Error, Result};
use crate::wiener::{solve_loaded, WienerSolution};

fn lambda_for(model: &CovarianceModel, target: usize, config: &SparsifierConfig) -> f64 {
    config.rwls_lambda.unwrap_or(0.1 * model.variance(target))
}

/// Penalized projection onto every other node.
///
/// Channel `k` (the k-th node other than `target`, ascending) gets the
/// quadratic penalty `λ·μ_k·‖w_k‖²`, i.e. `λ·μ_k` on its diagonal block.
/// An infinite weight removes the channel; its taps are reported as zero.
pub fn solve_weighted_projection(
    model: &CovarianceModel,
    target: usize,
    weights: &[f64],
    config: &SparsifierConfig,
) -> Result<WienerSolution> {
    config.validate()?;
    model.check_index(target)?;
    let pool = candidates(model.n(), target);
    if weights.len() != pool.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} candidate channels",
            weights.len(),
            pool.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| w.is_nan() || **w < 0.0 || **w == f64::NEG_INFINITY) {
        return Err(Error::Config(format!("weights must be nonnegative, got {w}")));
    }
    if weights.iter().all(|w| w.is_infinite()) {
        return Err(Error::Config("every channel has infinite weight".into()));
    }
    let lambda = lambda_for(model, target, config);
    let active: Vec<usize> = (0..pool.len()).filter(|&k| weights[k].is_finite()).collect();
    let extra: Vec<f64> = active.iter().map(|&k| lambda * weights[k]).collect();
    let req = config.request(target, active.iter().map(|&k| pool[k]).collect());
    let sol = solve_loaded(model, &req, Some(&extra))?;

    let w = 2 * config.half_width + 1;
    let mut taps = vec![vec![0.0; w]; pool.len()];
    let mut loading = vec![0.0; pool.len()];
    for (p, &k) in active.iter().enumerate() {
        taps[k] = sol.taps[p].clone();
        loading[k] = sol.loading[p];
    }
    Ok(WienerSolution {
        request: config.request(target, pool),
        taps,
        residual_variance: sol.residual_variance,
        loading,
    })
}

/// Reweighted least squares followed by hard selection of the `m`
/// largest-norm channels.
///
/// Each iteration solves [`solve_weighted_projection`] and then sets
/// `μ_k = 1/(‖w_k‖² + ε)`, rescaled to mean 1, so channels with small
/// filters are pushed further towards zero. The first solve uses
/// `rwls_initial_weights` (all zero by default, i.e. unpenalized). The
/// returned solution is the plain projection onto the selected channels.
pub fn rwls_identify(model: &CovarianceModel, target: usize, config: &SparsifierConfig) -> Result<SelectionResult> {
    config.validate()?;
    model.check_index(target)?;
    let m = config.fixed_m(model)?;
    let pool = candidates(model.n(), target);
    let epsilon = config.rwls_epsilon.unwrap_or(1e-6 * model.variance(target)).max(f64::MIN_POSITIVE);
    let mut weights = match &config.rwls_initial_weights {
        Some(w) => w.clone(),
        None => vec![0.0; pool.len()],
    };

    let start = model.variance(target);
    let mut trace = Vec::with_capacity(config.rwls_iterations);
    let mut norms = Vec::new();
    for it in 0..config.rwls_iterations {
        let sol = solve_weighted_projection(model, target, &weights, config)?;
        norms = sol.channel_norms();
        trace.push(TraceStep {
            iteration: it + 1,
            slot: None,
            selection: pool.clone(),
            residual_before: trace.last().map_or(start, |s: &TraceStep| s.residual),
            residual: sol.residual_variance,
            accepted: true,
            weights: weights.clone(),
            channel_norms: norms.clone(),
        });
        let raw: Vec<f64> = norms.iter().map(|&v| 1.0 / (v + epsilon)).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        weights = raw.iter().map(|v| v / mean).collect();
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let selected: Vec<usize> = order.iter().take(m).map(|&k| pool[k]).collect();
    SelectionResult::finish(model, config, target, selected, Method::Rwls, trace)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::exhaustive_identify;
    use super::*;
    use crate::wiener::{project, Ridge};

    #[test]
    fn zero_weights_equal_full_projection() {
        let model = chain(3, 3000);
        let config = SparsifierConfig::default();
        for lambda in [0.0, 0.5, 7.0] {
            let config = SparsifierConfig {
                rwls_lambda: Some(lambda),
                ..config.clone()
            };
            let w = solve_weighted_projection(&model, 1, &[0.0; 3], &config).unwrap();
            let full = project(&model, &config.request(1, vec![0, 2, 3])).unwrap();
            assert_eq!(w.taps, full.taps);
            assert_eq!(w.residual_variance, full.residual_variance);
        }
    }

    #[test]
    fn infinite_weights_exclude_channels() {
        let model = chain(3, 3000);
        let config = SparsifierConfig::default();
        let inf = f64::INFINITY;
        let w = solve_weighted_projection(&model, 2, &[inf, 0.0, inf], &config).unwrap();
        let single = project(&model, &config.request(2, vec![1])).unwrap();
        assert_eq!(w.request.inputs, vec![0, 1, 3]);
        assert_eq!(w.taps[1], single.taps[0]);
        assert!(w.taps[0].iter().chain(&w.taps[2]).all(|&v| v == 0.0));
        assert_eq!(w.residual_variance, single.residual_variance);
        assert!(matches!(
            solve_weighted_projection(&model, 2, &[inf; 3], &config),
            Err(Error::Config(_))
        ));
        assert!(solve_weighted_projection(&model, 2, &[1.0; 2], &config).is_err());
    }

    #[test]
    fn doubling_lambda_shrinks_channels() {
        let model = single_parent(17, 4, 2, 10_000);
        let weights = [1.0, 0.5, 2.0];
        let norms_at = |lambda: f64| {
            let config = SparsifierConfig {
                rwls_lambda: Some(lambda),
                ..Default::default()
            };
            solve_weighted_projection(&model, 0, &weights, &config).unwrap().channel_norms()
        };
        let base = 0.1 * model.variance(0);
        let a = norms_at(base);
        let b = norms_at(2.0 * base);
        let weighted = |n: &[f64]| n.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>();
        assert!(weighted(&b) <= weighted(&a));
        for (x, y) in a.iter().zip(&b) {
            assert!(y <= x, "{b:?} vs {a:?}");
        }
    }

    #[test]
    fn single_parent_is_selected() {
        let model = single_parent(9, 5, 3, 10_000);
        let config = SparsifierConfig::default().with_m(1);
        let r = rwls_identify(&model, 0, &config).unwrap();
        assert_eq!(r.selected, vec![3]);
        assert_eq!(r.selected, exhaustive_identify(&model, 0, &config).unwrap().selected);
        assert_eq!(r.trace.len(), 10);
        assert!(r.trace[0].weights.iter().all(|&w| w == 0.0));
        let mean: f64 = r.trace[1].weights.iter().sum::<f64>() / 4.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_iteration_full_degree() {
        let model = chain(4, 3000);
        let config = SparsifierConfig {
            rwls_iterations: 1,
            ridge: Ridge::NONE,
            ..SparsifierConfig::default().with_m(3)
        };
        let r = rwls_identify(&model, 0, &config).unwrap();
        assert_eq!(r.selected, vec![1, 2, 3]);
        let full = project(&model, &config.request(0, vec![1, 2, 3])).unwrap();
        assert_eq!(r.residual(), full.residual_variance);
    }
}

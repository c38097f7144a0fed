use super::{candidates, Method, SelectionResult, SparsifierConfig, TraceStep};
use crate::correlation::CovarianceModel;
use crate::error::{Error, Result};
use crate::wiener::project;

/// Binomial coefficient `C(n, k)`, saturating at `u128::MAX`.
pub fn count_subsets(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Global minimum of the residual over all input sets of size
/// `min(m, n − 1)`. Subsets are visited in lexicographic order and only a
/// strictly smaller residual replaces the incumbent, so ties resolve to the
/// lexicographically smallest set. The trace records each new incumbent.
pub fn exhaustive_identify(model: &CovarianceModel, target: usize, config: &SparsifierConfig) -> Result<SelectionResult> {
    config.validate()?;
    model.check_index(target)?;
    let m = config.fixed_m(model)?;
    let pool = candidates(model.n(), target);
    let size = m.min(pool.len());
    let subsets = count_subsets(pool.len(), size);
    if subsets > config.enumeration_budget {
        return Err(Error::Budget {
            subsets,
            budget: config.enumeration_budget,
        });
    }

    let start = model.variance(target);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut trace = Vec::new();
    let mut idx: Vec<usize> = (0..size).collect();
    let mut visited = 0usize;
    loop {
        let set: Vec<usize> = idx.iter().map(|&k| pool[k]).collect();
        let res = project(model, &config.request(target, set.clone()))?.residual_variance;
        visited += 1;
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if res < incumbent {
            trace.push(TraceStep {
                iteration: visited,
                slot: None,
                selection: set.clone(),
                residual_before: if best.is_some() { incumbent } else { start },
                residual: res,
                accepted: true,
                weights: Vec::new(),
                channel_norms: Vec::new(),
            });
            best = Some((res, set));
        }
        if !next_combination(&mut idx, pool.len()) {
            break;
        }
    }
    let (_, selected) = best.expect("at least one subset is always visited");
    SelectionResult::finish(model, config, target, selected, Method::Exhaustive, trace)
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for q in i + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};

    use super::super::testutil::*;
    use super::*;
    use crate::wiener::ProjectionRequest;

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let mut idx = vec![0, 1];
        let mut all = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            all.push(idx.clone());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut empty: Vec<usize> = vec![];
        assert!(!next_combination(&mut empty, 3));
        assert_eq!(count_subsets(24, 3), 2024);
        assert_eq!(count_subsets(5, 0), 1);
        assert_eq!(count_subsets(3, 5), 0);
    }

    #[test]
    fn full_and_empty_degree() {
        let model = chain(1, 2000);
        let config = SparsifierConfig::default().with_m(3);
        let r = exhaustive_identify(&model, 1, &config).unwrap();
        assert_eq!(r.selected, vec![0, 2, 3]);
        let full = project(&model, &config.request(1, vec![0, 2, 3])).unwrap();
        assert_eq!(r.residual(), full.residual_variance);

        let r = exhaustive_identify(&model, 1, &SparsifierConfig::default().with_m(0)).unwrap();
        assert!(r.selected.is_empty());
        assert_eq!(r.residual(), model.variance(1));
    }

    /// Residual of a least-squares fit on zero-padded lagged regressors,
    /// computed by QR directly from the samples.
    fn regression_residual(rows: &[Vec<f64>], target: usize, inputs: &[usize], half: i64) -> f64 {
        let t = rows[0].len() as i64;
        let at = |r: usize, s: i64| if s >= 0 && s < t { rows[r][s as usize] } else { 0.0 };
        let times: Vec<i64> = (-half..t + half).collect();
        let cols = inputs.len() * (2 * half as usize + 1);
        let x = DMatrix::from_fn(times.len(), cols, |r, c| {
            let p = c / (2 * half as usize + 1);
            let lag = (c % (2 * half as usize + 1)) as i64 - half;
            at(inputs[p], times[r] - lag)
        });
        let y = DVector::from_iterator(times.len(), times.iter().map(|&s| at(target, s)));
        let w = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        (y - x * w).norm_squared() / t as f64
    }

    #[test]
    fn chain_child_outranks_parent_and_matches_regression() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let t = 5000;
        let mut rows: Vec<Vec<f64>> = (0..4).map(|_| noise(&mut rng, t)).collect();
        for k in 1..4 {
            for s in 1..t {
                let v = 0.9 * rows[k - 1][s - 1];
                rows[k][s] += v;
            }
        }
        for row in &mut rows {
            let mean = row.iter().sum::<f64>() / t as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        let model = model_of(rows.clone(), 20);
        let config = SparsifierConfig {
            ridge: crate::wiener::Ridge::NONE,
            half_width: 3,
            ..SparsifierConfig::default().with_m(1)
        };
        let r = exhaustive_identify(&model, 2, &config).unwrap();
        assert_eq!(r.selected, vec![3]);

        let oracle: Vec<f64> = [0usize, 1, 3].iter().map(|&i| regression_residual(&rows, 2, &[i], 3)).collect();
        let best = oracle
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| [0usize, 1, 3][k])
            .unwrap();
        assert_eq!(best, 3);
        for (k, &i) in [0usize, 1, 3].iter().enumerate() {
            let res = project(&model, &ProjectionRequest::new(2, vec![i]).with_half_width(3).with_ridge(crate::wiener::Ridge::NONE))
                .unwrap()
                .residual_variance;
            assert!((res - oracle[k]).abs() <= 1e-6 * oracle[k]);
        }
    }

    #[test]
    fn budget_enforced() {
        let model = independent_exact(8);
        let config = SparsifierConfig {
            enumeration_budget: 20,
            ..SparsifierConfig::default().with_m(3)
        };
        assert!(matches!(
            exhaustive_identify(&model, 0, &config),
            Err(Error::Budget { subsets: 35, budget: 20 })
        ));
    }

    #[test]
    fn ties_resolve_to_smallest_indices() {
        let model = independent_exact(5);
        let r = exhaustive_identify(&model, 2, &SparsifierConfig::default().with_m(2)).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
        assert_eq!(r.residual(), 1.0);
    }
}

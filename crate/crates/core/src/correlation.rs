//! Second-order statistics consumed by every solver.
//!
//! The covariance convention throughout is
//! `R(i, j, τ) = (1/T) Σ_t x_i(t) x_j(t + τ)` (biased estimator), so that
//! `R(i, j, τ) = R(j, i, −τ)` and every block-Toeplitz matrix built from it
//! is positive semidefinite.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::NetworkSpec;
use crate::timeseries::TimeSeriesSet;

/// Default maximum lag for covariance estimation.
pub const DEFAULT_MAX_LAG: usize = 20;

/// Cross-covariance sequences `R(i, j, τ)` for `|τ| ≤ max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    n: usize,
    max_lag: usize,
    samples: usize,
    /// Row-major `[i][j][τ + max_lag]`.
    values: Vec<f64>,
}

impl CovarianceModel {
    /// Builds a model from a covariance function evaluated on `i ≤ j`
    /// (and `τ ≥ 0` when `i == j`); the remaining entries are mirrored so
    /// symmetry holds exactly.
    pub fn from_fn(
        n: usize,
        max_lag: usize,
        samples: usize,
        f: impl Fn(usize, usize, i64) -> f64,
    ) -> Self {
        let mut model = Self::zeros(n, max_lag, samples);
        for i in 0..n {
            for j in i..n {
                let seq: Vec<f64> = (-(max_lag as i64)..=max_lag as i64)
                    .map(|tau| if i == j && tau < 0 { 0.0 } else { f(i, j, tau) })
                    .collect();
                model.store_pair(i, j, &seq);
            }
        }
        model
    }

    fn zeros(n: usize, max_lag: usize, samples: usize) -> Self {
        Self {
            n,
            max_lag,
            samples,
            values: vec![0.0; n * n * (2 * max_lag + 1)],
        }
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.n + j) * (2 * self.max_lag + 1)
    }

    /// Stores `seq[τ + L] = R(i, j, τ)` and the mirrored `R(j, i, −τ)`.
    /// For `i == j` only `τ ≥ 0` is read.
    fn store_pair(&mut self, i: usize, j: usize, seq: &[f64]) {
        let l = self.max_lag;
        let w = 2 * l + 1;
        let (a, b) = (self.offset(i, j), self.offset(j, i));
        for k in 0..w {
            let v = if i == j && k < l { seq[2 * l - k] } else { seq[k] };
            self.values[a + k] = v;
            self.values[b + (w - 1 - k)] = v;
        }
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Sample count the estimate was computed from.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// `R(i, j, τ)`. Panics if an index or lag is out of range.
    #[inline]
    pub fn get(&self, i: usize, j: usize, tau: i64) -> f64 {
        assert!(tau.unsigned_abs() as usize <= self.max_lag, "lag {tau} beyond {}", self.max_lag);
        self.values[self.offset(i, j) + (tau + self.max_lag as i64) as usize]
    }

    /// The lag sequence `R(i, j, −L..=L)`.
    pub fn sequence(&self, i: usize, j: usize) -> &[f64] {
        let a = self.offset(i, j);
        &self.values[a..a + 2 * self.max_lag + 1]
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.get(i, i, 0)
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::Index { index: i, len: self.n })
        }
    }

    /// Block-Toeplitz matrix over `nodes` and lags `−L..=L`. Row
    /// `p·(2L+1) + (l+L)` pairs channel `nodes[p]` with lag `l`; the entry at
    /// `(p, l), (q, l')` is `R(nodes[p], nodes[q], l − l')`.
    pub fn block_toeplitz(&self, nodes: &[usize], half_width: usize) -> Result<DMatrix<f64>> {
        if 2 * half_width > self.max_lag {
            return Err(Error::Config(format!(
                "half-width {half_width} needs covariances up to lag {}, model has {}",
                2 * half_width,
                self.max_lag
            )));
        }
        for &i in nodes {
            self.check_index(i)?;
        }
        let w = 2 * half_width + 1;
        let dim = nodes.len() * w;
        let mut gram = DMatrix::zeros(dim, dim);
        for (p, &a) in nodes.iter().enumerate() {
            for (q, &b) in nodes.iter().enumerate().skip(p) {
                let seq = self.sequence(a, b);
                for l in 0..w {
                    for lp in 0..w {
                        let tau = l as i64 - lp as i64;
                        let v = seq[(tau + self.max_lag as i64) as usize];
                        gram[(p * w + l, q * w + lp)] = v;
                        gram[(q * w + lp, p * w + l)] = v;
                    }
                }
            }
        }
        Ok(gram)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut entries = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                entries.push(CovarianceEntry {
                    i,
                    j,
                    lags: self.sequence(i, j).to_vec(),
                });
            }
        }
        Ok(serde_json::to_string(&CovarianceJson {
            n: self.n,
            max_lag: self.max_lag,
            t: self.samples,
            entries,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CovarianceJson = serde_json::from_str(text)?;
        let mut model = Self::zeros(raw.n, raw.max_lag, raw.t);
        let mut seen = vec![false; raw.n * raw.n];
        for e in &raw.entries {
            if e.i > e.j || e.j >= raw.n || e.lags.len() != 2 * raw.max_lag + 1 {
                return Err(Error::Dimension(format!("malformed covariance entry ({}, {})", e.i, e.j)));
            }
            model.store_pair(e.i, e.j, &e.lags);
            seen[e.i * raw.n + e.j] = true;
        }
        for i in 0..raw.n {
            for j in i..raw.n {
                if !seen[i * raw.n + j] {
                    return Err(Error::Dimension(format!("missing covariance entry ({i}, {j})")));
                }
            }
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct CovarianceEntry {
    i: usize,
    j: usize,
    lags: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CovarianceJson {
    n: usize,
    #[serde(rename = "L_max")]
    max_lag: usize,
    #[serde(rename = "T")]
    t: usize,
    entries: Vec<CovarianceEntry>,
}

/// Biased sample cross-covariances of a zero-mean set for `|τ| ≤ max_lag`.
pub fn estimate_covariances(ts: &TimeSeriesSet, max_lag: usize) -> Result<CovarianceModel> {
    if !ts.mean_removed() {
        return Err(Error::Config("series must be mean-removed before covariance estimation".into()));
    }
    let t = ts.len();
    if 4 * max_lag >= t {
        return Err(Error::Config(format!(
            "max lag {max_lag} must be below T/4 = {:.2}",
            t as f64 / 4.0
        )));
    }
    let n = ts.n();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let seqs: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| lag_sequence(ts.row(i), ts.row(j), max_lag, i == j))
        .collect();
    let mut model = CovarianceModel::zeros(n, max_lag, t);
    for (&(i, j), seq) in pairs.iter().zip(&seqs) {
        model.store_pair(i, j, seq);
    }
    Ok(model)
}

fn lag_sequence(a: &[f64], b: &[f64], max_lag: usize, auto: bool) -> Vec<f64> {
    let t = a.len();
    let l = max_lag as i64;
    (-l..=l)
        .map(|tau| {
            if auto && tau < 0 {
                return 0.0;
            }
            let (start, end) = if tau >= 0 { (0, t - tau as usize) } else { ((-tau) as usize, t) };
            let s: f64 = (start..end).map(|s| a[s] * b[(s as i64 + tau) as usize]).sum();
            s / t as f64
        })
        .collect()
}

/// `⟨x_i, x_j⟩ = R(i, j, 0)`.
pub fn inner_product(model: &CovarianceModel, i: usize, j: usize) -> Result<f64> {
    model.check_index(i)?;
    model.check_index(j)?;
    Ok(model.get(i, j, 0))
}

/// Lag window applied before the spectral transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Bartlett,
    Rectangular,
    Hann,
}

impl Window {
    /// Weight at lag `tau` for a window of half-length `max_lag`.
    pub fn weight(self, tau: i64, max_lag: usize) -> f64 {
        let m = (max_lag + 1) as f64;
        let a = tau.unsigned_abs() as f64;
        match self {
            Window::Bartlett => 1.0 - a / m,
            Window::Rectangular => 1.0,
            Window::Hann => 0.5 * (1.0 + (std::f64::consts::PI * a / m).cos()),
        }
    }
}

/// Cross-spectra on `K` equispaced frequencies `ω_k = −π + 2πk/K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    n: usize,
    grid: Vec<f64>,
    /// `[i][j][k]`.
    values: Vec<Complex64>,
}

impl SpectrumEstimate {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.values[(i * self.n + j) * self.grid.len() + k]
    }
}

/// Blackman–Tukey estimate `S(i, j, ω) = Σ_{|τ|≤L} w(τ) R(i, j, τ) e^{−iωτ}`.
pub fn estimate_spectra(model: &CovarianceModel, k: usize, window: Window) -> Result<SpectrumEstimate> {
    let l = model.max_lag();
    if k < 2 * l + 1 {
        return Err(Error::Config(format!("grid size {k} must be at least 2·L_max + 1 = {}", 2 * l + 1)));
    }
    let n = model.n();
    let grid: Vec<f64> = (0..k)
        .map(|q| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * q as f64 / k as f64)
        .collect();
    let weights: Vec<f64> = (-(l as i64)..=l as i64).map(|tau| window.weight(tau, l)).collect();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n * k];
    for i in 0..n {
        for j in i..n {
            let seq = model.sequence(i, j);
            for (q, &omega) in grid.iter().enumerate() {
                let s = if i == j {
                    let mut re = weights[l] * seq[l];
                    for tau in 1..=l {
                        re += 2.0 * weights[l + tau] * seq[l + tau] * (omega * tau as f64).cos();
                    }
                    Complex64::new(re, 0.0)
                } else {
                    seq.iter()
                        .zip(&weights)
                        .enumerate()
                        .map(|(p, (&r, &w))| {
                            let tau = p as f64 - l as f64;
                            Complex64::from_polar(w * r, -omega * tau)
                        })
                        .sum()
                };
                values[(i * n + j) * k + q] = s;
                values[(j * n + i) * k + q] = s.conj();
            }
        }
    }
    Ok(SpectrumEstimate { n, grid, values })
}

/// Worst disagreement between an estimated spectrum and the closed-form
/// spectrum of the network that generated the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDeviation {
    pub max_abs: f64,
    pub at_pair: (usize, usize),
    pub at_frequency: f64,
}

/// Compares `estimate` with `(I − H)⁻¹ diag(σ²) (I − H)⁻ᴴ` evaluated on the
/// same grid, where `H` is the spec's transfer matrix.
pub fn filtered_spectra_check(spec: &NetworkSpec, estimate: &SpectrumEstimate) -> Result<SpectralDeviation> {
    if spec.n() != estimate.n() {
        return Err(Error::Dimension(format!(
            "spec has {} nodes, estimate has {}",
            spec.n(),
            estimate.n()
        )));
    }
    let n = spec.n();
    let mut worst = SpectralDeviation {
        max_abs: 0.0,
        at_pair: (0, 0),
        at_frequency: estimate.grid.first().copied().unwrap_or(0.0),
    };
    for (q, &omega) in estimate.grid().iter().enumerate() {
        let theory = spec.spectral_density(omega)?;
        for i in 0..n {
            for j in 0..n {
                let d = (estimate.get(i, j, q) - theory[(i, j)]).norm();
                if d > worst.max_abs {
                    worst = SpectralDeviation {
                        max_abs: d,
                        at_pair: (i, j),
                        at_frequency: omega,
                    };
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(seed: u64, n: usize, t: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..t).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    fn set(rows: Vec<Vec<f64>>) -> TimeSeriesSet {
        let ids = (0..rows.len()).map(|k| format!("x{k}")).collect();
        TimeSeriesSet::from_rows(ids, rows).unwrap().centered()
    }

    fn brute(a: &[f64], b: &[f64], tau: i64) -> f64 {
        let t = a.len() as i64;
        let mut s = 0.0;
        for u in 0..t {
            let v = u + tau;
            if v >= 0 && v < t {
                s += a[u as usize] * b[v as usize];
            }
        }
        s / t as f64
    }

    #[test]
    fn identical_rows_share_variance() {
        let w = white(1, 1, 400).remove(0);
        let model = estimate_covariances(&set(vec![w.clone(), w]), 5).unwrap();
        assert_eq!(model.get(0, 1, 0), model.get(0, 0, 0));
        assert_eq!(inner_product(&model, 0, 0).unwrap(), model.variance(0));
    }

    #[test]
    fn zero_rows_give_zero_covariances() {
        let model = estimate_covariances(&set(vec![vec![0.0; 100]; 3]), 10).unwrap();
        assert!(model.values.iter().all(|&v| v == 0.0));
        let spec = estimate_spectra(&model, 32, Window::Bartlett).unwrap();
        assert!(spec.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn delayed_copy_matches_brute_force_sum() {
        let x1 = white(7, 1, 10_000).remove(0);
        let mut x2 = vec![0.0; x1.len()];
        x2[1..].copy_from_slice(&x1[..x1.len() - 1]);
        let ts = set(vec![x1, x2]);
        let model = estimate_covariances(&ts, 20).unwrap();
        let oracle = brute(ts.row(0), ts.row(1), 1);
        assert!((model.get(0, 1, 1) - oracle).abs() < 1e-12);
        assert!((model.get(0, 1, 1) - 1.0).abs() < 0.05);
        for tau in -20..=20 {
            assert!((model.get(1, 0, tau) - brute(ts.row(1), ts.row(0), tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_rows_nearly_orthogonal() {
        let ts = set(white(3, 2, 10_000));
        let model = estimate_covariances(&ts, 20).unwrap();
        let ip = inner_product(&model, 0, 1).unwrap();
        assert!((ip - brute(ts.row(0), ts.row(1), 0)).abs() < 1e-12);
        assert!(ip.abs() <= 0.05);
        assert_eq!(ip, inner_product(&model, 1, 0).unwrap());
        assert!(matches!(inner_product(&model, 0, 2), Err(Error::Index { index: 2, len: 2 })));
    }

    #[test]
    fn configuration_errors() {
        let ts = set(white(3, 2, 100));
        assert!(matches!(estimate_covariances(&ts, 25), Err(Error::Config(_))));
        let raw = TimeSeriesSet::from_rows(vec!["a".into(), "b".into()], vec![vec![1.0; 100], vec![2.0; 100]]).unwrap();
        assert!(matches!(estimate_covariances(&raw, 5), Err(Error::Config(_))));
        let model = estimate_covariances(&ts, 10).unwrap();
        assert!(matches!(estimate_spectra(&model, 20, Window::Bartlett), Err(Error::Config(_))));
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        // Oracle: average of raw periodograms over non-overlapping segments.
        let sigma2: f64 = 2.0;
        let rows: Vec<Vec<f64>> = white(11, 1, 10_000)
            .into_iter()
            .map(|r| r.into_iter().map(|v| v * sigma2.sqrt()).collect())
            .collect();
        let ts = set(vec![rows[0].clone(), white(12, 1, 10_000).remove(0)]);
        let model = estimate_covariances(&ts, 20).unwrap();
        let est = estimate_spectra(&model, 64, Window::Bartlett).unwrap();
        let seg = 41;
        let row = ts.row(0);
        for (q, &omega) in est.grid().iter().enumerate() {
            let mut acc = 0.0;
            let mut count = 0;
            for start in (0..row.len() - seg).step_by(seg) {
                let z: Complex64 = (0..seg)
                    .map(|t| Complex64::from_polar(row[start + t], -omega * t as f64))
                    .sum();
                acc += z.norm_sqr() / seg as f64;
                count += 1;
            }
            let oracle = acc / count as f64;
            let s = est.get(0, 0, q).re;
            assert!((oracle - sigma2).abs() < 0.15 * sigma2);
            assert!((s - sigma2).abs() < 0.15 * sigma2, "ω={omega} S={s}");
        }
    }

    #[test]
    fn block_toeplitz_layout() {
        let model = CovarianceModel::from_fn(2, 4, 100, |i, j, tau| (10 * i + j) as f64 + 0.1 * tau as f64);
        let g = model.block_toeplitz(&[1, 0], 1).unwrap();
        assert_eq!(g.nrows(), 6);
        // (channel 0 = node 1, lag −1) vs (channel 1 = node 0, lag +1): τ = −2.
        assert_eq!(g[(0, 5)], model.get(1, 0, -2));
        assert_eq!(g, g.transpose());
        assert!(matches!(model.block_toeplitz(&[0], 3), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let ts = set(white(5, 3, 300));
        let model = estimate_covariances(&ts, 6).unwrap();
        let back = CovarianceModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn symmetry_cauchy_schwarz_and_nonnegative_spectra(seed in any::<u64>(), n in 2usize..4, mix in -1.0f64..1.0) {
            let mut rows = white(seed, n, 200);
            for t in 1..200 {
                rows[1][t] += mix * rows[0][t - 1];
            }
            let model = estimate_covariances(&set(rows), 8).unwrap();
            for i in 0..n {
                prop_assert!(model.get(i, i, 0) >= 0.0);
                for j in 0..n {
                    for tau in -8..=8 {
                        prop_assert_eq!(model.get(i, j, tau), model.get(j, i, -tau));
                        let bound = (model.get(i, i, 0) * model.get(j, j, 0)).sqrt() + 1e-9;
                        prop_assert!(model.get(i, j, tau).abs() <= bound);
                    }
                }
            }
            let nodes: Vec<usize> = (0..n).collect();
            let g = model.block_toeplitz(&nodes, 4).unwrap();
            prop_assert_eq!(&g, &g.transpose());
            let est = estimate_spectra(&model, 17, Window::Bartlett).unwrap();
            for q in 0..17 {
                for i in 0..n {
                    prop_assert!(est.get(i, i, q).re >= -1e-12);
                    prop_assert_eq!(est.get(i, i, q).im, 0.0);
                    for j in 0..n {
                        prop_assert_eq!(est.get(i, j, q), est.get(j, i, q).conj());
                    }
                }
            }
        }
    }
}

//! Ground-truth networks of FIR-coupled stochastic processes.
//!
//! Each node follows `x_j(t) = e_j(t) + Σ_{i→j} Σ_{k≥1} h_{ji}[k] x_i(t − k)`
//! with independent Gaussian innovations `e_j`. Every edge filter has
//! `h[0] = 0`, so the recursion is explicit in time.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeriesSet;

/// Default number of discarded warm-up samples.
pub const DEFAULT_BURN_IN: usize = 500;

const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    /// `taps[k]` multiplies `x_from(t − k)`; `taps[0]` is always zero.
    pub taps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct NetworkSpec {
    n: usize,
    edges: Vec<EdgeSpec>,
    noise_std: Vec<f64>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    n: usize,
    seed: u64,
    noise_std: Vec<f64>,
    edges: Vec<EdgeSpec>,
}

impl TryFrom<SpecJson> for NetworkSpec {
    type Error = Error;

    fn try_from(raw: SpecJson) -> Result<Self> {
        NetworkSpec::new(raw.n, raw.edges, raw.noise_std, raw.seed)
    }
}

impl From<NetworkSpec> for SpecJson {
    fn from(s: NetworkSpec) -> Self {
        SpecJson {
            n: s.n,
            seed: s.seed,
            noise_std: s.noise_std,
            edges: s.edges,
        }
    }
}

impl NetworkSpec {
    pub fn new(n: usize, mut edges: Vec<EdgeSpec>, noise_std: Vec<f64>, seed: u64) -> Result<Self> {
        if noise_std.len() != n {
            return Err(Error::Dimension(format!("{} noise levels for {n} nodes", noise_std.len())));
        }
        if let Some(s) = noise_std.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("noise std must be positive, got {s}")));
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::Index {
                    index: e.from.max(e.to),
                    len: n,
                });
            }
            if e.from == e.to {
                return Err(Error::Config(format!("self-edge on node {}", e.from)));
            }
            if e.taps.len() < 2 || e.taps[0] != 0.0 {
                return Err(Error::Config(format!(
                    "edge {} -> {} must be strictly causal: at least 2 taps with taps[0] = 0",
                    e.from, e.to
                )));
            }
            if e.taps.iter().any(|h| !h.is_finite()) {
                return Err(Error::Config(format!("edge {} -> {} has non-finite taps", e.from, e.to)));
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        if let Some(w) = edges.windows(2).find(|w| (w[0].from, w[0].to) == (w[1].from, w[1].to)) {
            return Err(Error::Config(format!("duplicate edge {} -> {}", w[0].from, w[0].to)));
        }
        Ok(Self {
            n,
            edges,
            noise_std,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    pub fn noise_std(&self) -> &[f64] {
        &self.noise_std
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_noise_std(mut self, noise_std: Vec<f64>) -> Result<Self> {
        Self::new(self.n, std::mem::take(&mut self.edges), noise_std, self.seed)
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.to == node).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// `H(e^{iω})` with `H[j][i] = Σ_k h_{ji}[k] e^{−iωk}`.
    pub fn transfer_matrix(&self, omega: f64) -> DMatrix<Complex64> {
        let mut h = DMatrix::from_element(self.n, self.n, Complex64::new(0.0, 0.0));
        for e in &self.edges {
            h[(e.to, e.from)] = e
                .taps
                .iter()
                .enumerate()
                .map(|(k, &c)| Complex64::from_polar(c, -omega * k as f64))
                .sum();
        }
        h
    }

    /// Closed-form cross-spectral density at `ω`, in the convention
    /// `S(i, j, ω) = Σ_τ E[x_i(t) x_j(t+τ)] e^{−iωτ}`. With
    /// `G = (I − H)⁻¹`, this is `S = conj(G) · diag(σ²) · Gᵀ`.
    pub fn spectral_density(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let ident = DMatrix::<Complex64>::identity(self.n, self.n);
        let g = (ident - self.transfer_matrix(omega))
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("I − H(ω) is singular at ω = {omega}")))?;
        let noise = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.n,
            self.noise_std.iter().map(|s| Complex64::new(s * s, 0.0)),
        ));
        Ok(g.map(|z| z.conj()) * noise * g.transpose())
    }
}

/// How edges are drawn by [`random_spec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeRule {
    /// Each admissible pair independently with this probability.
    Density(f64),
    /// Each node draws this many parents (fewer near the top of the order).
    InDegree(usize),
    /// Exactly this many edges.
    Count(usize),
    /// Each node draws a parent count uniformly from `0..=k`.
    MaxInDegree(usize),
}

/// Random acyclic network. Nodes are put in a random order and edges only
/// point forward in it. Taps `h[1..=order]` are uniform on `[−1, 1]` and each
/// filter is rescaled so that `Σ|h| = 0.5 / (max in-degree)`.
pub fn random_spec(n: usize, rule: EdgeRule, order: usize, seed: u64) -> Result<NetworkSpec> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 nodes, got {n}")));
    }
    if order < 1 {
        return Err(Error::Config("filter order must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut position: Vec<usize> = (0..n).collect();
    position.shuffle(&mut rng);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    match rule {
        EdgeRule::InDegree(k) | EdgeRule::MaxInDegree(k) => {
            if k >= n {
                return Err(Error::Config(format!("in-degree {k} must be below the node count {n}")));
            }
            for p in 1..n {
                let take = match rule {
                    EdgeRule::MaxInDegree(_) => rng.random_range(0..=k),
                    _ => k,
                };
                let mut earlier: Vec<usize> = position[..p].to_vec();
                earlier.shuffle(&mut rng);
                for &parent in earlier.iter().take(take.min(p)) {
                    pairs.push((parent, position[p]));
                }
            }
        }
        EdgeRule::Density(d) => {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Config(format!("edge density must lie in [0, 1], got {d}")));
            }
            for p in 1..n {
                for q in 0..p {
                    if rng.random::<f64>() < d {
                        pairs.push((position[q], position[p]));
                    }
                }
            }
        }
        EdgeRule::Count(e) => {
            let max = n * (n - 1) / 2;
            if e > max {
                return Err(Error::Config(format!("{e} edges requested but an acyclic graph on {n} nodes holds {max}")));
            }
            let mut all: Vec<(usize, usize)> = (1..n)
                .flat_map(|p| (0..p).map(move |q| (q, p)))
                .collect();
            all.shuffle(&mut rng);
            pairs.extend(all.into_iter().take(e).map(|(q, p)| (position[q], position[p])));
        }
    }

    let max_in = (0..n).map(|j| pairs.iter().filter(|p| p.1 == j).count()).max().unwrap_or(0).max(1);
    let bound = 0.5 / max_in as f64;
    let mut edges = Vec::with_capacity(pairs.len());
    for (from, to) in pairs {
        let mut taps = vec![0.0f64; order + 1];
        for h in &mut taps[1..] {
            *h = rng.random_range(-1.0..=1.0);
        }
        let total: f64 = taps.iter().map(|h| h.abs()).sum();
        if total > 0.0 {
            taps.iter_mut().for_each(|h| *h *= bound / total);
        }
        edges.push(EdgeSpec { from, to, taps });
    }
    NetworkSpec::new(n, edges, vec![1.0; n], seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub steps: usize,
    /// Target `var(x_j − e_j) / var(e_j)` for nodes with inbound edges.
    pub snr_target: Option<f64>,
    pub burn_in: usize,
}

impl SimulationOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            snr_target: None,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_snr(mut self, snr: f64) -> Self {
        self.snr_target = Some(snr);
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// Simulated node values (not centered), node ids `x1..xn`.
    pub data: TimeSeriesSet,
    /// The innovations `e_j(t)` that entered the recursion, after burn-in.
    pub noise: Vec<Vec<f64>>,
    /// Sample SNR per node; 0 for nodes without inbound edges.
    pub achieved_snr: Vec<f64>,
    /// Spec with the noise levels actually used.
    pub spec: NetworkSpec,
}

/// Standard normal draws, time-major, seeded by the spec.
fn unit_innovations(n: usize, total: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; total]; n];
    for t in 0..total {
        for row in out.iter_mut() {
            row[t] = StandardNormal.sample(&mut rng);
        }
    }
    out
}

/// Kept samples, innovations and per-node SNR of one simulation pass.
type Pass = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>);

/// Runs the recursion from zero history with the given innovations.
pub fn run_recursion(spec: &NetworkSpec, innovations: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if innovations.len() != spec.n {
        return Err(Error::Dimension(format!(
            "{} innovation rows for {} nodes",
            innovations.len(),
            spec.n
        )));
    }
    let total = innovations.first().map_or(0, Vec::len);
    let mut incoming: Vec<Vec<&EdgeSpec>> = vec![Vec::new(); spec.n];
    for e in &spec.edges {
        incoming[e.to].push(e);
    }
    let mut x = vec![vec![0.0; total]; spec.n];
    for t in 0..total {
        for j in 0..spec.n {
            let mut v = innovations[j][t];
            for e in &incoming[j] {
                let src = &x[e.from];
                for (k, &h) in e.taps.iter().enumerate().skip(1).take(t) {
                    v += h * src[t - k];
                }
            }
            if !(v.abs() <= DIVERGENCE_LIMIT) {
                return Err(Error::Instability { node: j, step: t });
            }
            x[j][t] = v;
        }
    }
    Ok(x)
}

fn sample_variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut n, mut s) = (0usize, 0.0);
    for x in v.clone() {
        n += 1;
        s += x;
    }
    if n == 0 {
        return 0.0;
    }
    let mean = s / n as f64;
    v.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64
}

fn measure_snr(spec: &NetworkSpec, x: &[Vec<f64>], e: &[Vec<f64>]) -> Vec<f64> {
    (0..spec.n)
        .map(|j| {
            if spec.in_degree(j) == 0 {
                return 0.0;
            }
            let noise_var = sample_variance(e[j].iter().copied());
            let signal_var = sample_variance(x[j].iter().zip(&e[j]).map(|(a, b)| a - b));
            if noise_var > 0.0 {
                signal_var / noise_var
            } else {
                0.0
            }
        })
        .collect()
}

/// `E[j][k] = Σ_τ (g_jk(τ) − δ_jk δ_τ0)²`: network-signal variance at node
/// `j` per unit innovation variance at node `k`, from impulse responses.
fn impulse_energies(spec: &NetworkSpec) -> Result<Vec<Vec<f64>>> {
    let n = spec.n;
    let order = spec.edges.iter().map(|e| e.taps.len()).max().unwrap_or(1);
    let horizon = (n * order + 1).clamp(64, 4096);
    let mut energy = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut impulse = vec![vec![0.0; horizon]; n];
        impulse[k][0] = 1.0;
        let g = run_recursion(spec, &impulse)?;
        for j in 0..n {
            energy[j][k] = g[j]
                .iter()
                .enumerate()
                .map(|(t, &v)| if j == k && t == 0 { (v - 1.0).powi(2) } else { v * v })
                .sum();
        }
    }
    Ok(energy)
}

/// Noise levels solving `σ_j² · snr = Σ_k E[j][k] σ_k²` for every node with
/// inbound edges; source nodes keep their level.
fn calibrate_noise(spec: &NetworkSpec, snr: f64) -> Result<Vec<f64>> {
    let energy = impulse_energies(spec)?;
    let driven: Vec<bool> = (0..spec.n).map(|j| spec.in_degree(j) > 0).collect();
    let mut var: Vec<f64> = spec.noise_std.iter().map(|s| s * s).collect();
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..spec.n)
            .map(|j| {
                if driven[j] {
                    energy[j].iter().zip(&var).map(|(e, v)| e * v).sum::<f64>() / snr
                } else {
                    var[j]
                }
            })
            .collect();
        if next.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            break;
        }
        let change = next
            .iter()
            .zip(&var)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        var = next;
        if change < 1e-13 {
            break;
        }
    }
    Ok(var.iter().map(|v| v.sqrt()).collect())
}

/// Simulates `steps` samples after `burn_in` warm-up samples.
///
/// With an SNR target the noise levels of nodes with inbound edges are
/// first solved from impulse-response energies, then refined by up to five
/// fixed-point passes `σ_j ← σ_j · sqrt(snr_j / target)` on the realized
/// samples. The pass with the smallest worst-case deviation is returned.
pub fn simulate(spec: &NetworkSpec, options: SimulationOptions) -> Result<Simulation> {
    if options.steps < 1 {
        return Err(Error::Config("need at least one step".into()));
    }
    if let Some(snr) = options.snr_target {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::Config(format!("SNR target must be positive, got {snr}")));
        }
    }
    let total = options.burn_in + options.steps;
    let unit = unit_innovations(spec.n, total, spec.seed);
    let run = |sigma: &[f64]| -> Result<Pass> {
        let e: Vec<Vec<f64>> = unit
            .iter()
            .zip(sigma)
            .map(|(row, s)| row.iter().map(|v| v * s).collect())
            .collect();
        let x = run_recursion(spec, &e)?;
        let keep = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.into_iter().map(|r| r[options.burn_in..].to_vec()).collect()
        };
        let (x, e) = (keep(x), keep(e));
        let snr = measure_snr(spec, &x, &e);
        Ok((x, e, snr))
    };

    let driven: Vec<usize> = (0..spec.n).filter(|&j| spec.in_degree(j) > 0).collect();
    let (mut sigma, target) = match options.snr_target {
        Some(target) if !driven.is_empty() => (calibrate_noise(spec, target)?, target),
        _ => {
            let (x, e, snr) = run(&spec.noise_std)?;
            return finish(spec, spec.noise_std.clone(), x, e, snr);
        }
    };

    let deviation = |snr: &[f64]| driven.iter().map(|&j| (snr[j] / target - 1.0).abs()).fold(0.0, f64::max);
    let mut best: Option<(f64, Vec<f64>, Pass)> = None;
    for _ in 0..5 {
        let (x, e, snr) = run(&sigma)?;
        let dev = deviation(&snr);
        let next: Vec<f64> = sigma
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                if driven.contains(&j) && snr[j] > 0.0 {
                    s * (snr[j] / target).sqrt()
                } else {
                    s
                }
            })
            .collect();
        if best.as_ref().is_none_or(|b| dev < b.0) {
            best = Some((dev, sigma.clone(), (x, e, snr)));
        }
        if dev <= 0.02 {
            break;
        }
        sigma = next;
    }
    let (_, sigma, (x, e, snr)) = best.expect("at least one pass runs");
    finish(spec, sigma, x, e, snr)
}

fn finish(spec: &NetworkSpec, sigma: Vec<f64>, x: Vec<Vec<f64>>, e: Vec<Vec<f64>>, snr: Vec<f64>) -> Result<Simulation> {
    let ids = crate::graphio::default_node_ids(spec.n);
    Ok(Simulation {
        data: TimeSeriesSet::from_rows(ids, x)?,
        noise: e,
        achieved_snr: snr,
        spec: spec.clone().with_noise_std(sigma)?,
    })
}

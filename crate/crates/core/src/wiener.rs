//! Two-sided FIR Wiener projection of one node onto a set of inputs.
//!
//! The estimate of the target is `x̂_j(t) = Σ_p Σ_{l=−L}^{L} w_p[l] · x_{a_p}(t − l)`.
//! Orthogonality of the residual to every lagged input gives the
//! block-Toeplitz normal equations `Γ w = γ` with
//! `Γ[(p,l),(q,l')] = R(a_p, a_q, l − l')` and `γ[(p,l)] = R(a_p, j, l)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::correlation::CovarianceModel;
use crate::error::{Error, Result};

/// Default half-width: 21 taps per channel.
pub const DEFAULT_HALF_WIDTH: usize = 10;

/// Diagonal loading added to the normal equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Ridge {
    /// `Γ + r·I`.
    Absolute(f64),
    /// `Γ + r·diag(Γ)`: each channel is loaded by `r` times its own variance.
    Relative(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-8)
    }
}

impl Ridge {
    pub const NONE: Ridge = Ridge::Absolute(0.0);

    fn factor(self) -> f64 {
        match self {
            Ridge::Absolute(r) | Ridge::Relative(r) => r,
        }
    }

    /// Loading for a channel whose zero-lag variance is `variance`.
    pub fn loading(self, variance: f64) -> f64 {
        match self {
            Ridge::Absolute(r) => r,
            // A zero-variance channel still gets a positive pivot.
            Ridge::Relative(r) if variance > 0.0 => r * variance,
            Ridge::Relative(r) => r * f64::MIN_POSITIVE.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRequest {
    pub target: usize,
    pub inputs: Vec<usize>,
    pub half_width: usize,
    pub ridge: Ridge,
}

impl ProjectionRequest {
    pub fn new(target: usize, inputs: Vec<usize>) -> Self {
        Self {
            target,
            inputs,
            half_width: DEFAULT_HALF_WIDTH,
            ridge: Ridge::default(),
        }
    }

    pub fn with_half_width(mut self, half_width: usize) -> Self {
        self.half_width = half_width;
        self
    }

    pub fn with_ridge(mut self, ridge: Ridge) -> Self {
        self.ridge = ridge;
        self
    }

    fn validate(&self, model: &CovarianceModel) -> Result<()> {
        model.check_index(self.target)?;
        for (k, &i) in self.inputs.iter().enumerate() {
            model.check_index(i)?;
            if i == self.target {
                return Err(Error::Config(format!("input {i} equals the target")));
            }
            if self.inputs[..k].contains(&i) {
                return Err(Error::Config(format!("input {i} listed twice")));
            }
        }
        let r = self.ridge.factor();
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("ridge must be finite and nonnegative, got {r}")));
        }
        if 2 * self.half_width > model.max_lag() {
            return Err(Error::Config(format!(
                "half-width {} needs covariances up to lag {}, but the model stops at {}",
                self.half_width,
                2 * self.half_width,
                model.max_lag()
            )));
        }
        Ok(())
    }
}

/// Result of a projection: taps per input over lags `−L..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerSolution {
    pub request: ProjectionRequest,
    /// `taps[p][l + L]` is the coefficient of `x_{inputs[p]}(t − l)`.
    pub taps: Vec<Vec<f64>>,
    pub residual_variance: f64,
    /// Diagonal loading that was added for each input channel.
    pub loading: Vec<f64>,
}

impl WienerSolution {
    /// Sum of squared taps of input `p` (position in `request.inputs`).
    pub fn channel_norm(&self, p: usize) -> f64 {
        self.taps[p].iter().map(|v| v * v).sum()
    }

    pub fn channel_norms(&self) -> Vec<f64> {
        (0..self.taps.len()).map(|p| self.channel_norm(p)).collect()
    }

    /// Tap of input `p` at lag `lag`.
    pub fn tap(&self, p: usize, lag: i64) -> f64 {
        self.taps[p][(lag + self.request.half_width as i64) as usize]
    }

    fn flat_taps(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.taps.len() * (2 * self.request.half_width + 1),
            self.taps.iter().flatten().copied(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SolutionJson {
            target: self.request.target,
            inputs: self.request.inputs.clone(),
            half_width: self.request.half_width,
            taps: self.taps.clone(),
            residual_variance: self.residual_variance,
            ridge: self.request.ridge,
            loading: self.loading.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SolutionJson = serde_json::from_str(text)?;
        let w = 2 * raw.half_width + 1;
        if raw.taps.len() != raw.inputs.len() || raw.taps.iter().any(|t| t.len() != w) {
            return Err(Error::Dimension("tap blocks do not match inputs and L".into()));
        }
        let loading = if raw.loading.is_empty() {
            vec![0.0; raw.inputs.len()]
        } else {
            raw.loading
        };
        Ok(Self {
            request: ProjectionRequest {
                target: raw.target,
                inputs: raw.inputs,
                half_width: raw.half_width,
                ridge: raw.ridge,
            },
            taps: raw.taps,
            residual_variance: raw.residual_variance,
            loading,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    target: usize,
    inputs: Vec<usize>,
    #[serde(rename = "L")]
    half_width: usize,
    taps: Vec<Vec<f64>>,
    residual_variance: f64,
    #[serde(default = "Ridge::default")]
    ridge: Ridge,
    #[serde(default)]
    loading: Vec<f64>,
}

/// Cross-covariance vector `γ[(p,l)] = R(inputs[p], target, l)`.
fn target_covariances(model: &CovarianceModel, target: usize, inputs: &[usize], half_width: usize) -> DVector<f64> {
    let l = half_width as i64;
    DVector::from_iterator(
        inputs.len() * (2 * half_width + 1),
        inputs
            .iter()
            .flat_map(|&i| (-l..=l).map(move |lag| model.get(i, target, lag))),
    )
}

/// Projection onto `req.inputs` with the ridge loading of `req` plus an extra
/// per-channel loading (used by the reweighted solver).
pub(crate) fn solve_loaded(
    model: &CovarianceModel,
    req: &ProjectionRequest,
    extra_loading: Option<&[f64]>,
) -> Result<WienerSolution> {
    req.validate(model)?;
    let var = model.variance(req.target);
    if req.inputs.is_empty() {
        return Ok(WienerSolution {
            request: req.clone(),
            taps: Vec::new(),
            residual_variance: var.max(0.0),
            loading: Vec::new(),
        });
    }
    let w = 2 * req.half_width + 1;
    let mut gram = model.block_toeplitz(&req.inputs, req.half_width)?;
    let gamma = target_covariances(model, req.target, &req.inputs, req.half_width);

    let loading: Vec<f64> = req
        .inputs
        .iter()
        .enumerate()
        .map(|(p, &i)| req.ridge.loading(model.variance(i)) + extra_loading.map_or(0.0, |e| e[p]))
        .collect();
    for (p, &load) in loading.iter().enumerate() {
        for k in 0..w {
            gram[(p * w + k, p * w + k)] += load;
        }
    }

    let chol = gram.cholesky().ok_or_else(|| {
        Error::Singular(format!(
            "block-Toeplitz matrix for target {} on inputs {:?} is not positive definite",
            req.target, req.inputs
        ))
    })?;
    let sol = chol.solve(&gamma);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(format!("non-finite taps for target {}", req.target)));
    }
    let residual = (var - gamma.dot(&sol)).max(0.0);
    let taps = sol.as_slice().chunks(w).map(<[f64]>::to_vec).collect();
    Ok(WienerSolution {
        request: req.clone(),
        taps,
        residual_variance: residual,
        loading,
    })
}

/// Solves `(Γ + loading) w = γ` for the request. The reported residual is
/// `R(j, j, 0) − γᵀw`, clamped at zero; with a nonzero ridge this is the
/// minimum of the loaded objective, so it never decreases when inputs are
/// removed.
pub fn project(model: &CovarianceModel, req: &ProjectionRequest) -> Result<WienerSolution> {
    solve_loaded(model, req, None)
}

/// `max |γ − Γ w|` over all channels and lags; zero for an empty input set.
/// With loading `d_p` on channel `p` this equals `max_p d_p · max|w_p|`.
pub fn orthogonality_defect(model: &CovarianceModel, sol: &WienerSolution) -> Result<f64> {
    let req = &sol.request;
    req.validate(model)?;
    if req.inputs.is_empty() {
        return Ok(0.0);
    }
    let gram = model.block_toeplitz(&req.inputs, req.half_width)?;
    let gamma = target_covariances(model, req.target, &req.inputs, req.half_width);
    let residual = gamma - gram * sol.flat_taps();
    Ok(residual.amax())
}

/// Largest diagonal entry of the block-Toeplitz matrix over `inputs`.
pub fn gram_scale(model: &CovarianceModel, inputs: &[usize]) -> f64 {
    inputs.iter().map(|&i| model.variance(i)).fold(0.0, f64::max)
}

/// Dense form of the normal-equation matrix, exposed for diagnostics.
pub fn normal_equations(model: &CovarianceModel, req: &ProjectionRequest) -> Result<(DMatrix<f64>, DVector<f64>)> {
    req.validate(model)?;
    Ok((
        model.block_toeplitz(&req.inputs, req.half_width)?,
        target_covariances(model, req.target, &req.inputs, req.half_width),
    ))
}

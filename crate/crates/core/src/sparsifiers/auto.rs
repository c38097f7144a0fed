use super::{cols_identify, exhaustive_identify, rwls_identify, Degree, Method, SelectionResult, SparsifierConfig, TraceStep};
use crate::correlation::CovarianceModel;
use crate::error::Result;

/// Chooses the degree per node: degree `m` is accepted when
/// `residual(m) ≤ (1 − auto_threshold) · residual(m − 1)`, starting from the
/// empty selection, and the search stops at the first rejection or at
/// `m = n − 1`. The trace holds one step per degree tried.
pub fn auto_degree_identify(
    model: &CovarianceModel,
    target: usize,
    config: &SparsifierConfig,
    inner: Method,
) -> Result<SelectionResult> {
    config.validate()?;
    model.check_index(target)?;
    let keep = 1.0 - config.auto_threshold;
    let mut best = SelectionResult::finish(model, config, target, Vec::new(), inner, Vec::new())?;
    let mut trace = Vec::new();

    for m in 1..model.n() {
        let fixed = SparsifierConfig {
            m: Degree::Fixed(m),
            ..config.clone()
        };
        let candidate = match inner {
            Method::Exhaustive => exhaustive_identify(model, target, &fixed)?,
            Method::Cols => cols_identify(model, target, &fixed)?,
            Method::Rwls => rwls_identify(model, target, &fixed)?,
        };
        let before = best.residual();
        let accepted = candidate.residual() <= keep * before;
        trace.push(TraceStep {
            iteration: m,
            slot: None,
            selection: candidate.selected.clone(),
            residual_before: before,
            residual: candidate.residual(),
            accepted,
            weights: Vec::new(),
            channel_norms: candidate.solution.channel_norms(),
        });
        if !accepted {
            break;
        }
        best = candidate;
    }
    best.trace = trace;
    Ok(best)
}

use super::{candidates, Method, SelectionResult, SparsifierConfig, TraceStep};
use crate::correlation::CovarianceModel;
use crate::error::Result;
use crate::wiener::project;

/// Cycling OLS.
///
/// Keeps `m` slots, all empty at the start. Each pass revisits one slot
/// (cycling through them) and tries every node not held by another slot in
/// its place, keeping the candidate with the smallest residual. The
/// replacement is accepted only if it lowers the residual by more than
/// `improvement_tol`; lowest index wins ties. The counter `c` is reset to 1
/// on a change and incremented otherwise; the loop ends once `c > m`, i.e.
/// after a full cycle without improvement.
///
/// The greedy choice is the *minimum* residual. A literal reading of the
/// classic pseudocode (`argmax`) would pick the worst candidate.
pub fn cols_identify(model: &CovarianceModel, target: usize, config: &SparsifierConfig) -> Result<SelectionResult> {
    config.validate()?;
    model.check_index(target)?;
    let m = config.fixed_m(model)?;
    if m == 0 {
        return SelectionResult::finish(model, config, target, Vec::new(), Method::Cols, Vec::new());
    }
    let pool = candidates(model.n(), target);
    let cap = model.n() * m * 10;

    let mut slots: Vec<Option<usize>> = vec![None; m];
    let inputs_of = |slots: &[Option<usize>]| slots.iter().flatten().copied().collect::<Vec<_>>();
    let mut current = model.variance(target);
    let mut trace = Vec::new();
    let mut k = 0;
    let mut c = 0;
    let mut passes = 0;
    let mut cap_reached = false;

    while c <= m {
        if passes >= cap {
            cap_reached = true;
            break;
        }
        passes += 1;
        let mut best: Option<(f64, usize)> = None;
        for &i in &pool {
            if slots.contains(&Some(i)) {
                continue;
            }
            let mut trial = slots.clone();
            trial[k] = Some(i);
            let res = project(model, &config.request(target, inputs_of(&trial)))?.residual_variance;
            if best.is_none_or(|(b, _)| res < b) {
                best = Some((res, i));
            }
        }
        let before = current;
        let accepted = match best {
            Some((res, i)) if res < current - config.improvement_tol => {
                slots[k] = Some(i);
                current = res;
                c = 1;
                true
            }
            _ => {
                c += 1;
                false
            }
        };
        trace.push(TraceStep {
            iteration: passes,
            slot: Some(k),
            selection: inputs_of(&slots),
            residual_before: before,
            residual: current,
            accepted,
            weights: Vec::new(),
            channel_norms: Vec::new(),
        });
        k = (k + 1) % m;
    }

    let mut result = SelectionResult::finish(model, config, target, inputs_of(&slots), Method::Cols, trace)?;
    result.pass_cap_reached = cap_reached;
    Ok(result)
}

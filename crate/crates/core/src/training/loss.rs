use crate::autograd::{Graph, Var};
use crate::error::{invalid, Result};
use crate::real::Real;

/// Sum over stacks of the per-stack mean squared error against the same targets.
pub fn multi_stack_loss<T: Real>(
    graph: &mut Graph<T>,
    predictions: &[Var],
    target: Var,
) -> Result<Var> {
    let (first, rest) = predictions
        .split_first()
        .ok_or_else(|| invalid("multi_stack_loss", "no predictions"))?;
    let mut total = graph.mse_loss(*first, target)?;
    for &p in rest {
        let l = graph.mse_loss(p, target)?;
        total = graph.add(total, l)?;
    }
    Ok(total)
}

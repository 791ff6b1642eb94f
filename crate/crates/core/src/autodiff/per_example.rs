//! Per-example gradients by replaying backward once per example.

use super::{AutodiffError, Graph, NodeId, ParamStore, Real};

/// Builds the scalar loss of one example on a fresh graph.
pub trait ExampleLoss<T: Real, E: ?Sized> {
    fn loss(&self, graph: &mut Graph<'_, T>, example: &E) -> Result<NodeId, AutodiffError>;
}

impl<T, E, F> ExampleLoss<T, E> for F
where
    T: Real,
    E: ?Sized,
    F: Fn(&mut Graph<'_, T>, &E) -> Result<NodeId, AutodiffError>,
{
    fn loss(&self, graph: &mut Graph<'_, T>, example: &E) -> Result<NodeId, AutodiffError> {
        self(graph, example)
    }
}

/// Gradient of each example's loss, in input order. An empty batch yields an
/// empty list.
pub fn per_example_gradients<T, E, L>(
    params: &ParamStore<T>,
    examples: &[E],
    loss: &L,
) -> Result<Vec<Vec<T>>, AutodiffError>
where
    T: Real,
    L: ExampleLoss<T, E>,
{
    let mut out = Vec::with_capacity(examples.len());
    for_each_example_gradient(params, examples, loss, |_, _, grad| {
        out.push(grad);
    })?;
    Ok(out)
}

/// Streams `(index, loss value, gradient)` for each example in order, so
/// callers can clip and accumulate without holding the whole batch.
pub fn for_each_example_gradient<T, E, L, V>(
    params: &ParamStore<T>,
    examples: &[E],
    loss: &L,
    mut visit: V,
) -> Result<(), AutodiffError>
where
    T: Real,
    L: ExampleLoss<T, E>,
    V: FnMut(usize, T, Vec<T>),
{
    for (i, example) in examples.iter().enumerate() {
        let mut graph = Graph::new(params);
        let node = loss.loss(&mut graph, example)?;
        let grad = graph.backward(node)?;
        visit(i, graph.value(node)[0], grad);
    }
    Ok(())
}

/// Gradient of the mean loss over the batch, from a single graph holding
/// every example. Independent of the replay path above.
pub fn batch_mean_gradient<T, E, L>(
    params: &ParamStore<T>,
    examples: &[E],
    loss: &L,
) -> Result<Vec<T>, AutodiffError>
where
    T: Real,
    L: ExampleLoss<T, E>,
{
    if examples.is_empty() {
        return Ok(vec![T::zero(); params.len()]);
    }
    let mut graph = Graph::new(params);
    let mut total: Option<NodeId> = None;
    for example in examples {
        let node = loss.loss(&mut graph, example)?;
        total = Some(match total {
            None => node,
            Some(acc) => graph.add(acc, node)?,
        });
    }
    let total = total.expect("non-empty batch");
    let mean = graph.scale(total, T::from_f64(1.0 / examples.len() as f64))?;
    graph.backward(mean)
}

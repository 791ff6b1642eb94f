//! Central finite-difference gradient checking.
//!
//! Only the forward pass is used to form the numeric gradient, so the result
//! is an independent check on [`Graph::backward`].

use super::{AutodiffError, Graph, NodeId, ParamStore};

/// Outcome of a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Relative error with a floor on the denominator so near-zero gradients are
/// compared in absolute terms.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `backward` against `(f(θ+h) − f(θ−h)) / 2h` for every parameter
/// coordinate (or every `stride`-th one).
pub fn check_gradients<F>(
    params: &ParamStore<f64>,
    h: f64,
    floor: f64,
    stride: usize,
    build: F,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<NodeId, AutodiffError>,
{
    let analytic = {
        let mut graph = Graph::new(params);
        let loss = build(&mut graph)?;
        graph.backward(loss)?
    };
    let eval = |store: &ParamStore<f64>| -> Result<f64, AutodiffError> {
        let mut graph = Graph::new(store);
        let loss = build(&mut graph)?;
        Ok(graph.value(loss)[0])
    };
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for spec in params.specs() {
        for i in spec.range().step_by(stride.max(1)) {
            let orig = probe.flat()[i];
            probe.flat_mut()[i] = orig + h;
            let up = eval(&probe)?;
            probe.flat_mut()[i] = orig - h;
            let down = eval(&probe)?;
            probe.flat_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[i], numeric, floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = spec.name.clone();
                report.worst_index = i - spec.offset;
                report.analytic = analytic[i];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

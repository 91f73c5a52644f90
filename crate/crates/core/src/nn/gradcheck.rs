use serde::Serialize;

use super::model::Model;
use super::NnError;
use crate::graph::SEGraph;

/// Relative errors are measured against max(|analytic|, |numeric|, this floor),
/// so gradients that are zero up to rounding are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    /// Per parameter group, in layout order.
    pub per_param: Vec<ParamCheck>,
    pub n_checked: usize,
    pub max_abs_grad: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_grad: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares backpropagated gradients of the sequence loss against central
/// differences `(L(θ+ε) − L(θ−ε)) / 2ε` for every parameter entry.
pub fn grad_check(
    model: &Model<f64>,
    graph: &SEGraph,
    embeddings: &[Vec<f64>],
    gold_sequence: &[usize],
    eps: f64,
) -> Result<GradCheckReport, NnError> {
    let (_, grads) = model.loss_and_grad(graph, embeddings, gold_sequence)?;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        per_param: Vec::new(),
        n_checked: 0,
        max_abs_grad: 0.0,
    };
    let ids: Vec<_> = model.params.ids().collect();
    for pid in ids {
        let name = model.params.get(pid).name.clone();
        let analytic = grads.get(pid);
        let mut group = ParamCheck {
            name: name.clone(),
            max_rel_error: 0.0,
            max_abs_grad: 0.0,
        };
        for (i, &a) in analytic.iter().enumerate() {
            let orig = probe.params.get(pid).data[i];
            probe.params.get_mut(pid).data[i] = orig + eps;
            let plus = probe.loss(graph, embeddings, gold_sequence)?;
            probe.params.get_mut(pid).data[i] = orig - eps;
            let minus = probe.loss(graph, embeddings, gold_sequence)?;
            probe.params.get_mut(pid).data[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(a, numeric);
            report.max_abs_grad = report.max_abs_grad.max(a.abs());
            report.n_checked += 1;
            group.max_rel_error = group.max_rel_error.max(err);
            group.max_abs_grad = group.max_abs_grad.max(a.abs());
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), i));
            }
        }
        report.per_param.push(group);
    }
    Ok(report)
}

use super::params::{named_tensors, Parameters};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst component.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Compare `analytic` gradients with five-point central differences of
/// `loss_fn` around `params`, perturbing every scalar component.
///
/// `loss_fn` must be pure: dropout off, no hidden state.
pub fn grad_check<P, F>(params: &P, analytic: &P, loss_fn: F, epsilon: f64) -> GradCheckReport
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let grads: Vec<(String, Vec<f64>)> = named_tensors(analytic, "")
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let mut probe = params.clone();
    for (ti, (name, grad)) in grads.iter().enumerate() {
        for (k, &a) in grad.iter().enumerate() {
            let orig = component(&probe, ti, k);
            let mut at = |offset: f64| {
                set_component(&mut probe, ti, k, orig + offset);
                loss_fn(&probe)
            };
            let (p2, p1, m1, m2) = (at(2.0 * epsilon), at(epsilon), at(-epsilon), at(-2.0 * epsilon));
            set_component(&mut probe, ti, k, orig);
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * epsilon);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), k));
            }
        }
    }
    report
}

fn component<P: Parameters>(p: &P, tensor: usize, k: usize) -> f64 {
    named_tensors(p, "")[tensor].1.data()[k]
}

fn set_component<P: Parameters>(p: &mut P, tensor: usize, k: usize, value: f64) {
    let mut i = 0;
    p.visit_mut("", &mut |_, t| {
        if i == tensor {
            t.data_mut()[k] = value;
        }
        i += 1;
    });
}

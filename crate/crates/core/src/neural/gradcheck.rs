use super::network::{Gradients, Network};
use crate::error::Result;

/// Gradients smaller than this are compared in absolute rather than
/// relative terms.
const MAGNITUDE_FLOOR: f64 = 1e-6;

/// A planted fault for exercising the checker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradFault {
    /// Multiply the largest-magnitude analytic parameter gradient by the factor.
    ScaleLargest(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Flat index of the worst entry: parameters first, then inputs.
    pub worst_index: usize,
    pub checked: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(MAGNITUDE_FLOOR)
}

/// Loss used for checking: the plain sum of outputs.
fn probe(net: &Network, input: &[f64]) -> Result<f64> {
    Ok(net.predict(input)?.iter().sum())
}

/// Compares [`Network::backward`] against central differences with step
/// `h` over every parameter and every input component.
pub fn grad_check_report(net: &Network, input: &[f64], h: f64, fault: Option<GradFault>) -> Result<GradCheckReport> {
    assert!(h > 0.0, "perturbation must be positive");
    let (_, tape) = net.forward(input)?;
    let mut grads: Gradients = net.backward(&tape, &vec![1.0; net.output_dim()])?;
    if let Some(GradFault::ScaleLargest(factor)) = fault {
        let largest = grads.params_mut().max_by(|a, b| a.abs().total_cmp(&b.abs()));
        if let Some(g) = largest {
            *g *= factor;
        }
    }
    let analytic: Vec<f64> = grads.params().chain(&grads.input).copied().collect();

    let mut perturbed = net.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for k in 0..net.param_count() {
        let original = *perturbed.param_mut(k).expect("index in range");
        let set = |n: &mut Network, v: f64| *n.param_mut(k).expect("index in range") = v;
        set(&mut perturbed, original + h);
        let plus = probe(&perturbed, input)?;
        set(&mut perturbed, original - h);
        let minus = probe(&perturbed, input)?;
        set(&mut perturbed, original);
        numeric.push((plus - minus) / (2.0 * h));
    }
    let mut x = input.to_vec();
    for i in 0..x.len() {
        let original = x[i];
        x[i] = original + h;
        let plus = probe(net, &x)?;
        x[i] = original - h;
        let minus = probe(net, &x)?;
        x[i] = original;
        numeric.push((plus - minus) / (2.0 * h));
    }

    let (worst_index, max_relative_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    Ok(GradCheckReport {
        max_relative_error,
        worst_index,
        checked: analytic.len(),
    })
}

/// Worst relative error between analytic and central-difference gradients.
pub fn grad_check(net: &Network, input: &[f64], h: f64) -> Result<f64> {
    Ok(grad_check_report(net, input, h, None)?.max_relative_error)
}

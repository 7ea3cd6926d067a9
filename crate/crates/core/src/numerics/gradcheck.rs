use super::ParamTensors;
use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// `|a − b| / max(1e−8, |a| + |b|)`
#[inline]
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central finite differences of `f` around
/// `params`, coordinate by coordinate.
pub fn finite_diff_check<P, F>(f: F, params: &P, analytic: &P, h: f64) -> Result<GradCheckReport>
where
    P: ParamTensors,
    F: Fn(&P) -> f64,
{
    finite_diff_check_terms(|p: &P| vec![f(p)], params, analytic, h)
}

/// Like [`finite_diff_check`] for an objective given as a sum of terms.
///
/// The two perturbed evaluations are differenced term by term before
/// summing, so the cancellation error scales with the individual terms
/// rather than with the total.
pub fn finite_diff_check_terms<P, F>(f: F, params: &P, analytic: &P, h: f64) -> Result<GradCheckReport>
where
    P: ParamTensors,
    F: Fn(&P) -> Vec<f64>,
{
    let names = params.tensor_names();
    let grads: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.data.to_vec()).collect();
    if grads.len() != names.len() {
        return Err(Error::dim("finite_diff_check", names.len(), grads.len()));
    }

    let mut work = params.clone();
    let mut tensors = Vec::with_capacity(names.len());
    let mut overall: f64 = 0.0;
    for (ti, name) in names.iter().enumerate() {
        let len = work.tensors_mut()[ti].len();
        if grads[ti].len() != len {
            return Err(Error::dim("finite_diff_check", len, grads[ti].len()));
        }
        let mut worst = 0.0f64;
        let mut worst_index = 0;
        for k in 0..len {
            let original = work.tensors_mut()[ti][k];
            let up = original + h;
            let down = original - h;
            work.tensors_mut()[ti][k] = up;
            let plus = f(&work);
            work.tensors_mut()[ti][k] = down;
            let minus = f(&work);
            work.tensors_mut()[ti][k] = original;
            if plus.len() != minus.len() {
                return Err(Error::dim("objective terms", plus.len(), minus.len()));
            }
            if plus.iter().chain(&minus).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    tensor: name.clone(),
                    coordinate: k,
                });
            }
            // Divide by the step actually taken after rounding.
            let diff: f64 = plus.iter().zip(&minus).map(|(a, b)| a - b).sum();
            let numeric = diff / (up - down);
            let err = relative_error(grads[ti][k], numeric);
            if err > worst {
                worst = err;
                worst_index = k;
            }
        }
        overall = overall.max(worst);
        tensors.push(TensorCheck {
            name: name.clone(),
            max_rel_error: worst,
            worst_index,
        });
    }
    Ok(GradCheckReport {
        tensors,
        max_rel_error: overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sigmoid_scalar;

    #[test]
    fn exact_quadratic() {
        let theta = vec![3.0];
        let grad = vec![3.0];
        let report = finite_diff_check(|t: &Vec<f64>| 0.5 * t[0] * t[0], &theta, &grad, DEFAULT_STEP).unwrap();
        assert!(report.max_rel_error < 1e-9, "{}", report.max_rel_error);
    }

    #[test]
    fn sigmoid_derivative() {
        let theta = vec![0.7];
        let s = sigmoid_scalar(0.7);
        let grad = vec![s * (1.0 - s)];
        let report = finite_diff_check(|t: &Vec<f64>| sigmoid_scalar(t[0]), &theta, &grad, DEFAULT_STEP).unwrap();
        assert!(report.max_rel_error < 1e-7, "{}", report.max_rel_error);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let theta = vec![3.0];
        let grad = vec![6.0];
        let report = finite_diff_check(|t: &Vec<f64>| 0.5 * t[0] * t[0], &theta, &grad, DEFAULT_STEP).unwrap();
        assert!((report.max_rel_error - 1.0 / 3.0).abs() < 1e-6);
        assert!(!report.passes(1e-4));
    }

    #[test]
    fn termwise_matches_scalar_on_exact_problem() {
        let theta = vec![1.5, -0.5];
        let grad = vec![3.0, -1.0];
        let f = |t: &Vec<f64>| vec![t[0] * t[0], t[1] * t[1]];
        let r = finite_diff_check_terms(f, &theta, &grad, DEFAULT_STEP).unwrap();
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn non_finite_reports_coordinate() {
        let theta = vec![1.0, 0.0];
        let grad = vec![0.0, 0.0];
        let err = finite_diff_check(
            |t: &Vec<f64>| if t[1] != 0.0 { f64::NAN } else { t[0] },
            &theta,
            &grad,
            DEFAULT_STEP,
        )
        .unwrap_err();
        match err {
            Error::NonFinite { coordinate, .. } => assert_eq!(coordinate, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};

/// Relative forward-difference step.
const FD_STEP: f64 = 1e-6;
/// Scaled-gradient threshold relative to the objective scale.
const GRADIENT_TOL: f64 = 1e-6;

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub evaluations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

impl Outcome {
    pub fn objective(&self) -> f64 {
        0.5 * self.residuals.norm_squared()
    }
}

struct Problem<'a, F> {
    residual_fn: &'a F,
    x: DVector<f64>,
    typical: &'a [f64],
    residuals: Option<DVector<f64>>,
    central: bool,
}

fn eval<F>(f: &F, x: &[f64]) -> Option<DVector<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let r = f(x)?;
    r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
}

fn step(x: f64, typical: f64) -> f64 {
    FD_STEP * x.abs().max(typical)
}

pub(crate) fn forward_jacobian<F>(f: &F, x: &[f64], r0: &DVector<f64>, typical: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = step(x[j], typical[j]);
        probe[j] = x[j] + h;
        let r = eval(f, &probe)?;
        probe[j] = x[j];
        if r.len() != r0.len() {
            return None;
        }
        jac.set_column(j, &((r - r0) / h));
    }
    Some(jac)
}

fn central_jacobian<F>(f: &F, x: &[f64], m: usize, typical: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = step(x[j], typical[j]);
        probe[j] = x[j] + h;
        let up = eval(f, &probe)?;
        probe[j] = x[j] - h;
        let down = eval(f, &probe)?;
        probe[j] = x[j];
        if up.len() != m || down.len() != m {
            return None;
        }
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    Some(jac)
}

impl<F> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, F>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
        self.residuals = eval(self.residual_fn, x.as_slice());
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.residuals.clone()
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let r0 = self.residuals.as_ref()?;
        if self.central {
            central_jacobian(self.residual_fn, self.x.as_slice(), r0.len(), self.typical)
        } else {
            forward_jacobian(self.residual_fn, self.x.as_slice(), r0, self.typical)
        }
    }
}

/// Central-difference gradient of `0.5 |r|²`, each component multiplied by
/// its parameter scale.
fn scaled_gradient<F>(f: &F, x: &[f64], typical: &[f64]) -> Option<f64>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let objective = |p: &[f64]| eval(f, p).map(|r| 0.5 * r.norm_squared());
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        let scale = x[j].abs().max(typical[j]);
        let h = 1e-5 * scale;
        probe[j] = x[j] + h;
        let up = objective(&probe)?;
        probe[j] = x[j] - h;
        let down = objective(&probe)?;
        probe[j] = x[j];
        worst = worst.max(((up - down) / (2.0 * h) * scale).abs());
    }
    Some(worst)
}

fn run<F>(residual_fn: &F, x0: &[f64], typical: &[f64], patience: usize, central: bool) -> Option<(Vec<f64>, usize, bool)>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let problem = Problem {
        residual_fn,
        x: DVector::from_column_slice(x0),
        typical,
        residuals: eval(residual_fn, x0),
        central,
    };
    problem.residuals.as_ref()?;
    let (problem, report) = LevenbergMarquardt::new().with_patience(patience).minimize(problem);
    if !report.termination.was_successful() {
        log::debug!("optimizer stopped: {:?}", report.termination);
    }
    Some((
        problem.x.iter().copied().collect(),
        report.number_of_evaluations,
        report.termination.was_successful(),
    ))
}

/// Minimizes `0.5 |r(x)|²` from `x0`.
///
/// `typical` gives per-parameter magnitudes used for difference steps when a
/// parameter is near zero. `objective_scale` sets the gradient threshold for
/// the `converged` flag. Jacobians are forward differences; if the result
/// misses the gradient threshold, a second pass with central differences
/// refines it.
pub(crate) fn minimize<F>(
    residual_fn: &F,
    x0: &[f64],
    typical: &[f64],
    objective_scale: f64,
    max_evaluations: usize,
) -> Option<Outcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let tolerance = GRADIENT_TOL * objective_scale.max(f64::MIN_POSITIVE);
    let patience = (max_evaluations / (n + 1)).max(1);
    let (mut x, mut evaluations, mut success) = run(residual_fn, x0, typical, patience, false)?;
    let mut gradient_norm = scaled_gradient(residual_fn, &x, typical).unwrap_or(f64::INFINITY);

    if gradient_norm > tolerance {
        let objective = |p: &[f64]| eval(residual_fn, p).map(|r| 0.5 * r.norm_squared());
        let before = objective(&x)?;
        let patience = (max_evaluations / (2 * n + 1)).max(1);
        if let Some((x2, e2, s2)) = run(residual_fn, &x, typical, patience, true) {
            evaluations += e2;
            if objective(&x2).is_some_and(|f| f <= before) {
                gradient_norm = scaled_gradient(residual_fn, &x2, typical).unwrap_or(f64::INFINITY);
                x = x2;
                success = s2;
            }
        }
    }

    let residuals = eval(residual_fn, &x)?;
    let jacobian = forward_jacobian(residual_fn, &x, &residuals, typical)?;
    let converged = success && gradient_norm <= tolerance;
    if !converged {
        log::debug!("fit not converged: scaled gradient {gradient_norm:.3e}, tolerance {tolerance:.3e}");
    }
    Some(Outcome {
        x,
        residuals,
        jacobian,
        evaluations,
        converged,
        gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_rosenbrock_residuals() {
        let f = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = minimize(&f, &[-1.2, 1.0], &[1.0, 1.0], 1.0, 5000).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-8);
        assert!((out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.converged);
    }

    #[test]
    fn jacobian_matches_analytic() {
        let f = |x: &[f64]| Some(vec![x[0] * x[1], x[0].sin()]);
        let x = [0.7, 2.0];
        let r0 = eval(&f, &x).unwrap();
        let j = forward_jacobian(&f, &x, &r0, &[1.0, 1.0]).unwrap();
        assert!((j[(0, 0)] - 2.0).abs() < 1e-5);
        assert!((j[(0, 1)] - 0.7).abs() < 1e-5);
        assert!((j[(1, 0)] - 0.7f64.cos()).abs() < 1e-5);
        assert!(j[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let f = |_: &[f64]| Some(vec![f64::NAN]);
        assert!(minimize(&f, &[1.0], &[1.0], 1.0, 100).is_none());
    }
}

//! Damped least-squares (Levenberg–Marquardt) minimization and the
//! model-specific fit front ends built on it.
//!
//! The engine works on a plain residual closure over the parameter vector.
//! Positivity constraints are imposed by fitting selected parameters in log
//! space; box bounds on linear parameters are enforced by projection. The
//! Jacobian is numeric (forward differences in the internal, well-scaled
//! parameter space), the normal equations are damped with the Marquardt
//! diagonal, and the parameter covariance is estimated from the final
//! Jacobian.

pub mod models;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How a parameter is represented inside the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Fit the value directly; optional box bounds by projection.
    Linear,
    /// Fit ln(value): keeps the value strictly positive and makes steps
    /// relative.
    Log,
}

/// One fit parameter: name, starting value and scaling/bounds metadata.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    /// Name used in reports.
    pub name: String,
    /// Starting value (external units).
    pub init: f64,
    /// Internal representation.
    pub transform: Transform,
    /// Lower bound (external units; −∞ when unbounded).
    pub lower: f64,
    /// Upper bound (external units; +∞ when unbounded).
    pub upper: f64,
    /// Characteristic magnitude for finite-difference steps of linear
    /// parameters (ignored for log parameters, whose steps are relative).
    pub step_scale: f64,
}

impl ParamSpec {
    /// Unbounded linear parameter with a step scale inferred from `init`.
    pub fn linear(name: &str, init: f64) -> Self {
        Self {
            name: name.to_string(),
            init,
            transform: Transform::Linear,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            step_scale: if init.abs() > 0.0 { init.abs() } else { 1.0 },
        }
    }

    /// Strictly positive parameter fitted in log space; `init` must be > 0.
    pub fn log(name: &str, init: f64) -> Self {
        Self {
            name: name.to_string(),
            init,
            transform: Transform::Log,
            lower: 0.0,
            upper: f64::INFINITY,
            step_scale: 1.0,
        }
    }

    /// Replace the box bounds.
    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Replace the finite-difference step scale.
    pub fn with_step_scale(mut self, scale: f64) -> Self {
        self.step_scale = scale;
        self
    }

    fn to_internal(&self, x: f64) -> Result<f64> {
        match self.transform {
            Transform::Linear => Ok(x),
            Transform::Log => {
                if x > 0.0 {
                    Ok(x.ln())
                } else {
                    Err(Error::Domain(format!(
                        "parameter '{}' must be positive for a log transform, got {x}",
                        self.name
                    )))
                }
            }
        }
    }

    fn to_external(&self, y: f64) -> f64 {
        match self.transform {
            Transform::Linear => y,
            Transform::Log => y.exp(),
        }
    }

    /// d(external)/d(internal), for mapping covariance back out.
    fn external_slope(&self, y: f64) -> f64 {
        match self.transform {
            Transform::Linear => 1.0,
            Transform::Log => y.exp(),
        }
    }

    /// Project an internal coordinate so its external value respects the
    /// bounds.
    fn project(&self, y: f64) -> f64 {
        match self.transform {
            Transform::Linear => y.clamp(self.lower, self.upper),
            Transform::Log => {
                let x = y.exp().clamp(self.lower.max(f64::MIN_POSITIVE), self.upper);
                x.ln()
            }
        }
    }

    /// Finite-difference step in internal space. Linear parameters step by
    /// `rel`·`step_scale` — the scale, not the raw magnitude, because a
    /// parameter can sit at a huge absolute value (an optical frequency)
    /// while only a tiny window of it is meaningful.
    fn fd_step(&self, _y: f64, rel: f64) -> f64 {
        match self.transform {
            Transform::Linear => rel * self.step_scale,
            Transform::Log => rel,
        }
    }
}

/// Knobs of the minimizer; the defaults suit all packaged models.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Outer-iteration cap.
    pub max_iterations: usize,
    /// Relative cost-decrease threshold for convergence.
    pub ftol: f64,
    /// Gradient infinity-norm threshold for convergence.
    pub gtol: f64,
    /// Scaled step-size threshold: an undamped step below this (relative to
    /// each parameter's scale) counts as convergence.
    pub xtol: f64,
    /// Starting damping factor.
    pub initial_lambda: f64,
    /// Damping multiplier on a rejected step.
    pub lambda_up: f64,
    /// Damping divisor on an accepted step.
    pub lambda_down: f64,
    /// Relative finite-difference step.
    pub step_rel: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-10,
            gtol: 1e-8,
            xtol: 1e-11,
            initial_lambda: 1e-6,
            lambda_up: 10.0,
            lambda_down: 10.0,
            step_rel: 1e-6,
        }
    }
}

/// Why the minimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative cost decrease fell below `ftol`.
    CostConverged,
    /// Gradient norm fell below `gtol`.
    GradientConverged,
    /// The undamped step shrank below `xtol` in scaled units.
    StepConverged,
    /// Iteration cap reached; best point returned.
    IterationLimit,
    /// Damping grew without finding a downhill step; best point returned.
    Stalled,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Termination::CostConverged => "cost change below tolerance",
            Termination::GradientConverged => "gradient below tolerance",
            Termination::StepConverged => "step size below tolerance",
            Termination::IterationLimit => "iteration limit reached",
            Termination::Stalled => "no downhill step found",
        };
        f.write_str(s)
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameter names, in order.
    pub names: Vec<String>,
    /// Best-fit parameter values (external units).
    pub parameters: Vec<f64>,
    /// One standard error per parameter, from the covariance diagonal.
    pub std_errors: Vec<f64>,
    /// Parameter covariance (external units).
    pub covariance: DMatrix<f64>,
    /// Residual sum of squares at the solution.
    pub rss: f64,
    /// Outer iterations used.
    pub iterations: usize,
    /// True when a convergence criterion (not a cap) stopped the run.
    pub converged: bool,
    /// Which criterion stopped the run.
    pub termination: Termination,
    /// RSS after the start and after every accepted step.
    pub cost_history: Vec<f64>,
    /// True when the normal matrix was singular at the solution and the
    /// covariance comes from a pseudo-inverse.
    pub rank_deficient: bool,
    /// Number of residual entries.
    pub n_residuals: usize,
}

impl FitResult {
    /// Value of the named parameter.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.parameters[i])
    }

    /// Standard error of the named parameter.
    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.std_errors[i])
    }

    /// Human-readable report of parameters, errors and diagnostics.
    pub fn report(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "fit report");
        let _ = writeln!(out, "----------");
        for ((name, value), err) in self
            .names
            .iter()
            .zip(&self.parameters)
            .zip(&self.std_errors)
        {
            let _ = writeln!(out, "{name:24} {value:+.9e} ± {err:.3e}");
        }
        let _ = writeln!(out, "residual sum of squares  {:.9e}", self.rss);
        let _ = writeln!(out, "residual count           {}", self.n_residuals);
        let _ = writeln!(out, "iterations               {}", self.iterations);
        let _ = writeln!(out, "converged                {}", self.converged);
        let _ = writeln!(out, "termination              {}", self.termination);
        if self.rank_deficient {
            let _ = writeln!(out, "warning: singular normal matrix; covariance is a pseudo-inverse");
        }
        out
    }
}

fn rss_of(r: &DVector<f64>) -> f64 {
    r.dot(r)
}

/// Minimize the sum of squared residuals over the given parameters.
///
/// The residual closure receives external-space parameters in the order of
/// `specs`. A residual failure or non-finite value at a trial point rejects
/// that step; at the starting point it aborts the fit.
/// Forward-difference Jacobian of `eval` at the internal point `y`, with
/// the residual `r` already evaluated there, written into `out`.
fn forward_jacobian<E>(
    eval: &E,
    specs: &[ParamSpec],
    y: &DVector<f64>,
    r: &DVector<f64>,
    step_rel: f64,
    out: &mut DMatrix<f64>,
) -> Result<()>
where
    E: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    for j in 0..specs.len() {
        let h = specs[j].fd_step(y[j], step_rel);
        let mut y_step = y.clone();
        y_step[j] += h;
        let r_step = eval(&y_step)?;
        for i in 0..r.len() {
            out[(i, j)] = (r_step[i] - r[i]) / h;
        }
    }
    Ok(())
}

/// The minimizer's difference Jacobian evaluated at the parameters'
/// starting values, converted to external units: entry `[i][j]` is
/// ∂residual_i/∂parameter_j. Exposed so the derivative scheme can be
/// validated against models with known analytic Jacobians.
pub fn numerical_jacobian<F>(
    residual: F,
    specs: &[ParamSpec],
    options: &FitOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = specs.len();
    if n == 0 {
        return Err(Error::Domain("no parameters to differentiate".into()));
    }
    let y = DVector::from_iterator(
        n,
        specs
            .iter()
            .map(|s| s.to_internal(s.init))
            .collect::<Result<Vec<f64>>>()?,
    );
    let eval = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let externals: Vec<f64> = specs
            .iter()
            .zip(y.iter())
            .map(|(s, &yi)| s.to_external(yi))
            .collect();
        Ok(DVector::from_vec(residual(&externals)?))
    };
    let r = eval(&y)?;
    let mut jacobian = DMatrix::zeros(r.len(), n);
    forward_jacobian(&eval, specs, &y, &r, options.step_rel, &mut jacobian)?;
    Ok((0..r.len())
        .map(|i| {
            (0..n)
                .map(|j| jacobian[(i, j)] / specs[j].external_slope(y[j]))
                .collect()
        })
        .collect())
}

pub fn lm_minimize<F>(residual: F, specs: &[ParamSpec], options: &FitOptions) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = specs.len();
    if n == 0 {
        return Err(Error::Domain("no parameters to fit".into()));
    }
    for spec in specs {
        if !spec.init.is_finite() {
            return Err(Error::Domain(format!(
                "parameter '{}' starts non-finite",
                spec.name
            )));
        }
        if spec.init < spec.lower || spec.init > spec.upper {
            return Err(Error::Domain(format!(
                "parameter '{}' starts at {} outside [{}, {}]",
                spec.name, spec.init, spec.lower, spec.upper
            )));
        }
    }

    let mut y = DVector::from_iterator(
        n,
        specs
            .iter()
            .map(|s| s.to_internal(s.init))
            .collect::<Result<Vec<f64>>>()?,
    );
    let externals = |y: &DVector<f64>| -> Vec<f64> {
        specs
            .iter()
            .zip(y.iter())
            .map(|(s, &yi)| s.to_external(yi))
            .collect()
    };

    let eval = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let r = residual(&externals(y))?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResidual(
                "model produced NaN or infinity".into(),
            ));
        }
        Ok(DVector::from_vec(r))
    };

    let mut r = eval(&y).map_err(|e| match e {
        Error::NonFiniteResidual(m) => {
            Error::NonFiniteResidual(format!("at the starting point: {m}"))
        }
        other => other,
    })?;
    let m = r.len();
    if m < n {
        return Err(Error::Domain(format!(
            "{m} residuals cannot constrain {n} parameters"
        )));
    }

    let mut rss = rss_of(&r);
    let mut cost_history = vec![rss];
    let mut lambda = options.initial_lambda;
    let mut termination = Termination::IterationLimit;
    let mut converged = false;
    let mut iterations = 0;
    let mut jacobian = DMatrix::zeros(m, n);

    while iterations < options.max_iterations {
        iterations += 1;
        forward_jacobian(&eval, specs, &y, &r, options.step_rel, &mut jacobian)?;

        let gradient = jacobian.transpose() * &r;
        if gradient.amax() <= options.gtol * (1.0 + rss) {
            termination = Termination::GradientConverged;
            converged = true;
            break;
        }
        let normal = jacobian.transpose() * &jacobian;

        // Try the undamped Gauss–Newton step first (exact for linear
        // problems), then climb the damping ladder until a step lowers the
        // cost.
        let mut stepped = false;
        let mut trial_lambda = 0.0;
        loop {
            let mut damped = normal.clone();
            for j in 0..n {
                let d = normal[(j, j)].max(1e-30);
                damped[(j, j)] += trial_lambda * d;
            }
            let delta = match damped.clone().cholesky() {
                Some(ch) => Some(ch.solve(&(-&gradient))),
                None => damped.lu().solve(&(-&gradient)),
            };
            // Step size relative to each parameter's scale (log-space steps
            // are already relative).
            let scaled_step = delta.as_ref().map_or(f64::INFINITY, |delta| {
                specs
                    .iter()
                    .zip(delta.iter())
                    .map(|(s, &d)| match s.transform {
                        Transform::Linear => (d / s.step_scale).abs(),
                        Transform::Log => d.abs(),
                    })
                    .fold(0.0f64, f64::max)
            });
            let accepted = delta.and_then(|delta| {
                let mut y_trial = &y + &delta;
                for j in 0..n {
                    y_trial[j] = specs[j].project(y_trial[j]);
                }
                // A failed trial point (domain violation, overflow) is
                // treated like an uphill step.
                match eval(&y_trial) {
                    Ok(r_trial) if rss_of(&r_trial) < rss => Some((y_trial, r_trial)),
                    _ => None,
                }
            });
            match accepted {
                Some((y_new, r_new)) => {
                    let rss_new = rss_of(&r_new);
                    let improvement = (rss - rss_new) / rss.max(f64::MIN_POSITIVE);
                    y = y_new;
                    r = r_new;
                    rss = rss_new;
                    cost_history.push(rss);
                    if trial_lambda > 0.0 {
                        lambda = trial_lambda;
                    }
                    lambda = (lambda / options.lambda_down).max(1e-14);
                    stepped = true;
                    if rss == 0.0 || improvement < options.ftol {
                        termination = Termination::CostConverged;
                        converged = true;
                    } else if trial_lambda == 0.0 && scaled_step <= options.xtol {
                        termination = Termination::StepConverged;
                        converged = true;
                    }
                    break;
                }
                None => {
                    // A full Gauss–Newton step of numerically zero length
                    // cannot improve anything: the optimum is reached to
                    // machine precision.
                    if trial_lambda == 0.0 && scaled_step <= options.xtol {
                        termination = Termination::StepConverged;
                        converged = true;
                        stepped = true;
                        break;
                    }
                    trial_lambda = if trial_lambda == 0.0 {
                        lambda.max(1e-10)
                    } else {
                        trial_lambda * options.lambda_up
                    };
                    if trial_lambda > 1e12 {
                        break;
                    }
                }
            }
        }
        if !stepped {
            termination = Termination::Stalled;
            break;
        }
        if converged {
            break;
        }
    }

    // Covariance from the Jacobian at the solution, mapped to external
    // units through the transform slopes.
    let dof = (m - n).max(1) as f64;
    let sigma2 = rss / dof;
    let normal = jacobian.transpose() * &jacobian;
    let (cov_internal, rank_deficient) = match normal.clone().cholesky() {
        Some(ch) => (ch.inverse() * sigma2, false),
        None => {
            let svd = normal.svd(true, true);
            let pinv = svd
                .pseudo_inverse(1e-12)
                .unwrap_or_else(|_| DMatrix::zeros(n, n));
            (pinv * sigma2, true)
        }
    };
    let slopes: Vec<f64> = specs
        .iter()
        .zip(y.iter())
        .map(|(s, &yi)| s.external_slope(yi))
        .collect();
    let mut covariance = cov_internal;
    for i in 0..n {
        for j in 0..n {
            covariance[(i, j)] *= slopes[i] * slopes[j];
        }
    }
    let std_errors = (0..n).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();

    Ok(FitResult {
        names: specs.iter().map(|s| s.name.clone()).collect(),
        parameters: externals(&y),
        std_errors,
        covariance,
        rss,
        iterations,
        converged,
        termination,
        cost_history,
        rank_deficient,
        n_residuals: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn linear_problem_converges_in_two_iterations() {
        // y = a + b·x on a fixed design; LM must land on the
        // normal-equations solution almost immediately.
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let data: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x).collect();
        let xs2 = xs.clone();
        let residual = move |p: &[f64]| -> Result<Vec<f64>> {
            Ok(xs2
                .iter()
                .zip(&data)
                .map(|(x, d)| p[0] + p[1] * x - d)
                .collect())
        };
        let specs = [ParamSpec::linear("a", 0.0), ParamSpec::linear("b", 0.0)];
        let fit = lm_minimize(residual, &specs, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 2, "took {} iterations", fit.iterations);
        assert_abs_diff_eq!(fit.parameters[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.parameters[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn bent_valley_reaches_the_optimum() {
        // Classic two-parameter bent-valley test function with minimum at
        // (1, 1), started from the far side of the valley.
        let residual = |p: &[f64]| -> Result<Vec<f64>> {
            Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]])
        };
        let specs = [
            ParamSpec::linear("x", -1.2).with_step_scale(1.0),
            ParamSpec::linear("y", 1.0).with_step_scale(1.0),
        ];
        let mut options = FitOptions::default();
        options.max_iterations = 500;
        let fit = lm_minimize(residual, &specs, &options).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.parameters[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.parameters[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn cost_history_is_monotone_non_increasing() {
        let residual = |p: &[f64]| -> Result<Vec<f64>> {
            Ok(vec![
                10.0 * (p[1] - p[0] * p[0]),
                1.0 - p[0],
                0.3 * (p[1] - 2.0),
            ])
        };
        let specs = [
            ParamSpec::linear("x", -1.0).with_step_scale(1.0),
            ParamSpec::linear("y", 2.5).with_step_scale(1.0),
        ];
        let fit = lm_minimize(residual, &specs, &FitOptions::default()).unwrap();
        for pair in fit.cost_history.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn log_transform_keeps_rates_positive() {
        // Exponential-decay fit where a linear step could cross zero.
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let data: Vec<f64> = ts.iter().map(|t| 5.0 * (-1.7 * t).exp()).collect();
        let ts2 = ts.clone();
        let residual = move |p: &[f64]| -> Result<Vec<f64>> {
            Ok(ts2
                .iter()
                .zip(&data)
                .map(|(t, d)| p[0] * (-p[1] * t).exp() - d)
                .collect())
        };
        let specs = [ParamSpec::log("amplitude", 0.5), ParamSpec::log("rate", 20.0)];
        let fit = lm_minimize(residual, &specs, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.parameters.iter().all(|&p| p > 0.0));
        assert_relative_eq!(fit.parameters[0], 5.0, max_relative = 1e-6);
        assert_relative_eq!(fit.parameters[1], 1.7, max_relative = 1e-6);
    }

    #[test]
    fn bounds_are_respected() {
        // True optimum at p = −2 but the parameter is clamped at 0.
        let residual = |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![p[0] + 2.0, 0.1 * p[0]]) };
        let specs = [ParamSpec::linear("p", 1.0).with_bounds(0.0, 10.0)];
        let fit = lm_minimize(residual, &specs, &FitOptions::default()).unwrap();
        assert!(fit.parameters[0] >= 0.0);
        assert_abs_diff_eq!(fit.parameters[0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn nonfinite_start_is_an_error() {
        let residual = |_: &[f64]| -> Result<Vec<f64>> { Ok(vec![f64::NAN, 0.0]) };
        let specs = [ParamSpec::linear("p", 1.0)];
        assert!(matches!(
            lm_minimize(residual, &specs, &FitOptions::default()),
            Err(Error::NonFiniteResidual(_))
        ));
    }

    #[test]
    fn underdetermined_problem_is_an_error() {
        let residual = |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![p[0] + p[1]]) };
        let specs = [ParamSpec::linear("a", 0.0), ParamSpec::linear("b", 0.0)];
        assert!(matches!(
            lm_minimize(residual, &specs, &FitOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn forward_jacobian_agrees_with_central_differences() {
        // The engine's forward-difference Jacobian must agree with an
        // independent central-difference evaluation on a smooth model.
        let model = |p: &[f64], t: f64| p[0] * (-p[1] * t).exp() + p[2] * t;
        let ts: Vec<f64> = (0..25).map(|i| i as f64 * 0.2).collect();
        let p0: [f64; 3] = [2.0, 0.8, 0.3];
        let h = 1e-6;
        for j in 0..3 {
            for &t in &ts {
                let mut lo = p0;
                let mut hi = p0;
                lo[j] -= h * p0[j].abs();
                hi[j] += h * p0[j].abs();
                let central = (model(&hi, t) - model(&lo, t)) / (2.0 * h * p0[j].abs());
                let forward = (model(&hi, t) - model(&p0, t)) / (h * p0[j].abs());
                assert_relative_eq!(forward, central, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn report_contains_parameters_and_termination() {
        let residual = |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![p[0] - 1.0, p[0] - 1.1]) };
        let specs = [ParamSpec::linear("offset", 0.0)];
        let fit = lm_minimize(residual, &specs, &FitOptions::default()).unwrap();
        let report = fit.report();
        assert!(report.contains("offset"));
        assert!(report.contains("converged"));
        assert!(report.contains("residual sum of squares"));
    }

    #[test]
    fn covariance_matches_linear_theory() {
        // For y = a + b·x with unit-variance residuals the covariance of
        // (a, b) is (XᵀX)⁻¹·σ²; check against the closed form.
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        // Deterministic pseudo-noise so σ² is known approximately.
        let data: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 1.0 + 0.5 * x + 0.01 * ((i * 2654435761usize) % 97) as f64 / 97.0)
            .collect();
        let xs2 = xs.clone();
        let residual = move |p: &[f64]| -> Result<Vec<f64>> {
            Ok(xs2
                .iter()
                .zip(&data)
                .map(|(x, d)| p[0] + p[1] * x - d)
                .collect())
        };
        let specs = [ParamSpec::linear("a", 0.0), ParamSpec::linear("b", 1.0)];
        let fit = lm_minimize(residual, &specs, &FitOptions::default()).unwrap();
        let n = xs.len() as f64;
        let sx = xs.iter().sum::<f64>();
        let sxx = xs.iter().map(|x| x * x).sum::<f64>();
        let det = n * sxx - sx * sx;
        let sigma2 = fit.rss / (n - 2.0);
        assert_relative_eq!(
            fit.covariance[(0, 0)],
            sigma2 * sxx / det,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            fit.covariance[(1, 1)],
            sigma2 * n / det,
            max_relative = 1e-6
        );
    }
}

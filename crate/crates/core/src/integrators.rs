//! One-step maps and trajectory drivers: implicit SRK schemes for
//! multiplicative and additive noise, their explicit appurtenant companions,
//! and Euler–Maruyama.

use crate::noise::BrownianPath;
use crate::problem::{AdditiveProblem, DerivedCoefficients, Problem, SdeProblem};
use crate::state::State;
use crate::tableau::{
    additive_builtin, multiplicative_builtin, AdditiveStageCoefficients, AdditiveTableau,
    StageCoefficients, Tableau, TableauError,
};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IntegratorError {
    #[error(
        "stage iteration did not converge after {iterations} iterations (last residual {last_residual:.3e}){}",
        step.map(|s| format!(" at step {s}")).unwrap_or_default()
    )]
    NonConvergent {
        iterations: usize,
        last_residual: f64,
        step: Option<usize>,
    },
    #[error("method `{method}` cannot be applied to problem `{problem}`: {reason}")]
    Incompatible {
        method: String,
        problem: String,
        reason: String,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig {
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Estimate the contraction factor of the stage map from the first two
    /// iterations and warn when it is not below one.
    pub contraction_guard: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            fp_tol: 1e-12,
            fp_max_iter: 200,
            contraction_guard: false,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return Err(IntegratorError::InvalidConfig(
                "fp_tol must be positive and fp_max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one implicit step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub stages: Vec<State>,
    pub iterations: usize,
    /// Max-norm difference of successive stage iterates.
    pub residuals: Vec<f64>,
    /// Estimated contraction factor, when at least two iterations ran.
    pub contraction: Option<f64>,
}

fn max_diff(a: &[State], b: &[State]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_max())
        .fold(0.0, f64::max)
}

/// Fixed-point iteration `Zⁿ⁺¹ = Φ(Zⁿ)` from `Z⁰ = (y, …, y)`.
fn fixed_point(
    y: &State,
    s: usize,
    cfg: &StepperConfig,
    trace: bool,
    mut phi: impl FnMut(&[State]) -> Vec<State>,
) -> Result<(Vec<State>, usize, Vec<f64>, Option<f64>), IntegratorError> {
    let mut z = vec![y.clone(); s];
    let mut residuals = Vec::new();
    let mut first = None;
    let mut contraction = None;
    let mut last = f64::INFINITY;
    for it in 1..=cfg.fp_max_iter {
        let next = phi(&z);
        let diff = max_diff(&next, &z);
        if trace {
            residuals.push(diff);
        }
        if it == 1 {
            first = Some(diff);
        } else if it == 2 {
            let q = first.filter(|&d| d > 0.0).map(|d| diff / d);
            contraction = q;
            if cfg.contraction_guard {
                if let Some(q) = q.filter(|&q| q >= 1.0) {
                    log::warn!("stage map contraction estimate {q:.3} >= 1; step may be too large");
                }
            }
        }
        z = next;
        last = diff;
        if !diff.is_finite() {
            break;
        }
        if diff < cfg.fp_tol {
            return Ok((z, it, residuals, contraction));
        }
    }
    Err(IntegratorError::NonConvergent {
        iterations: cfg.fp_max_iter,
        last_residual: last,
        step: None,
    })
}

fn srk_mul_step_impl(
    problem: &SdeProblem,
    tab: &StageCoefficients,
    y: &State,
    h: f64,
    dw_hat: f64,
    cfg: &StepperConfig,
    trace: bool,
) -> Result<StepOutcome, IntegratorError> {
    let s = tab.stages;
    let phi = |z: &[State]| {
        let fz: Vec<State> = z.iter().map(|zj| (problem.f)(zj)).collect();
        let gz: Vec<State> = z.iter().map(|zj| (problem.g)(zj)).collect();
        (0..s)
            .map(|i| {
                let mut zi = y.clone();
                for j in 0..s {
                    let (a, b) = (tab.a[i * s + j], tab.b[i * s + j]);
                    if a != 0.0 {
                        zi.axpy(h * a, &fz[j]);
                    }
                    if b != 0.0 {
                        zi.axpy(dw_hat * b, &gz[j]);
                    }
                }
                zi
            })
            .collect()
    };
    let (stages, iterations, residuals, contraction) = fixed_point(y, s, cfg, trace, phi)?;
    let mut out = y.clone();
    for (i, zi) in stages.iter().enumerate() {
        if tab.alpha[i] != 0.0 {
            out.axpy(h * tab.alpha[i], &(problem.f)(zi));
        }
        if tab.beta[i] != 0.0 {
            out.axpy(dw_hat * tab.beta[i], &(problem.g)(zi));
        }
    }
    Ok(StepOutcome {
        state: out,
        stages,
        iterations,
        residuals,
        contraction,
    })
}

/// One SRK step for scalar multiplicative noise, driven by a truncated increment.
pub fn srk_mul_step(
    problem: &SdeProblem,
    tab: &StageCoefficients,
    y: &State,
    h: f64,
    dw_hat: f64,
    cfg: &StepperConfig,
) -> Result<StepOutcome, IntegratorError> {
    srk_mul_step_impl(problem, tab, y, h, dw_hat, cfg, false)
}

/// As [`srk_mul_step`], also recording the residual of every iteration.
pub fn srk_mul_step_traced(
    problem: &SdeProblem,
    tab: &StageCoefficients,
    y: &State,
    h: f64,
    dw_hat: f64,
    cfg: &StepperConfig,
) -> Result<StepOutcome, IntegratorError> {
    srk_mul_step_impl(problem, tab, y, h, dw_hat, cfg, true)
}

/// Explicit companion of the multiplicative SRK scheme, driven by the raw
/// increment and its iterated integrals.
pub fn appurtenant_mul_step(
    derived: &DerivedCoefficients,
    y: &State,
    h: f64,
    dw: f64,
    i2: f64,
    i3: f64,
) -> State {
    let j = derived.jet(y);
    let f2 = derived.f2(&j);
    let mut out = y.clone();
    out.axpy(dw, &j.g);
    out.axpy(h, &j.f);
    out.axpy(0.5 * h, &j.dg_g);
    out.axpy(i2, &j.dg_g);
    let mut fh = derived.f1(&j);
    fh.axpy(3.0, &f2);
    out.axpy(dw * h, &fh);
    out.axpy(6.0 * i3, &f2);
    let mut h2 = derived.f3(&j);
    h2.axpy(derived.contractions.alpha_ae(), &j.df_f);
    h2.axpy(3.0, &derived.f4(&j));
    out.axpy(h * h, &h2);
    out
}

fn srk_add_step_impl(
    problem: &AdditiveProblem,
    tab: &AdditiveStageCoefficients,
    x: &State,
    h: f64,
    dw: &[f64],
    cfg: &StepperConfig,
    trace: bool,
) -> Result<StepOutcome, IntegratorError> {
    let s = tab.stages;
    let noise = problem.sigma_times(dw);
    let phi = |z: &[State]| {
        let fz: Vec<State> = z.iter().map(|zj| (problem.f)(zj)).collect();
        (0..s)
            .map(|i| {
                let mut zi = x.clone();
                for j in 0..s {
                    let a = tab.a[i * s + j];
                    if a != 0.0 {
                        zi.axpy(h * a, &fz[j]);
                    }
                }
                if tab.b[i] != 0.0 {
                    zi.axpy(tab.b[i], &noise);
                }
                zi
            })
            .collect()
    };
    let (stages, iterations, residuals, contraction) = fixed_point(x, s, cfg, trace, phi)?;
    let mut out = x.clone();
    for (i, zi) in stages.iter().enumerate() {
        if tab.alpha[i] != 0.0 {
            out.axpy(h * tab.alpha[i], &(problem.f)(zi));
        }
    }
    out += &noise;
    Ok(StepOutcome {
        state: out,
        stages,
        iterations,
        residuals,
        contraction,
    })
}

/// One SRK step for additive noise, driven by raw increments.
pub fn srk_add_step(
    problem: &AdditiveProblem,
    tab: &AdditiveStageCoefficients,
    x: &State,
    h: f64,
    dw: &[f64],
    cfg: &StepperConfig,
) -> Result<StepOutcome, IntegratorError> {
    srk_add_step_impl(problem, tab, x, h, dw, cfg, false)
}

pub fn srk_add_step_traced(
    problem: &AdditiveProblem,
    tab: &AdditiveStageCoefficients,
    x: &State,
    h: f64,
    dw: &[f64],
    cfg: &StepperConfig,
) -> Result<StepOutcome, IntegratorError> {
    srk_add_step_impl(problem, tab, x, h, dw, cfg, true)
}

/// Explicit companion of the additive SRK scheme.
pub fn appurtenant_add_step(
    problem: &AdditiveProblem,
    tab: &AdditiveStageCoefficients,
    x: &State,
    h: f64,
    dw: &[f64],
) -> State {
    let (ab, ab2, aae) = tab.contractions();
    let noise = problem.sigma_times(dw);
    let f = (problem.f)(x);
    let mut out = x + &noise;
    out.axpy(h, &f);
    if ab != 0.0 {
        out.axpy(ab * h, &(problem.df)(x, &noise));
    }
    if ab2 != 0.0 {
        out.axpy(ab2 * h * h / 2.0, &problem.trace_d2f(x));
    }
    if aae != 0.0 {
        out.axpy(aae * h * h, &(problem.df)(x, &f));
    }
    out
}

/// `x + h·drift(x) + Σ_k diffusion(x)_k ΔW_k`.
pub fn euler_step(
    drift: impl Fn(&State) -> State,
    diffusion: impl Fn(&State) -> Vec<State>,
    x: &State,
    h: f64,
    dw: &[f64],
) -> State {
    let mut out = x.clone();
    out.axpy(h, &drift(x));
    for (col, &w) in diffusion(x).iter().zip(dw) {
        out.axpy(w, col);
    }
    out
}

/// Integration scheme selected by name.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    SrkMul(Tableau),
    AppurtenantMul(Tableau),
    SrkAdd(AdditiveTableau),
    AppurtenantAdd(AdditiveTableau),
    /// Euler–Maruyama on the Itô form.
    Euler,
}

impl Method {
    /// `euler`, `appurtenant:<tableau>` or a tableau name from the catalog
    /// matching the noise type (`trapezoid`, `midpoint`, `theta:<θ>`, …).
    pub fn parse(name: &str, additive: bool) -> Result<Method, IntegratorError> {
        let name = name.trim();
        if name == "euler" {
            return Ok(Method::Euler);
        }
        if let Some(inner) = name.strip_prefix("appurtenant:") {
            return Ok(if additive {
                Method::AppurtenantAdd(additive_builtin(inner)?)
            } else {
                Method::AppurtenantMul(multiplicative_builtin(inner)?)
            });
        }
        Ok(if additive {
            Method::SrkAdd(additive_builtin(name)?)
        } else {
            Method::SrkMul(multiplicative_builtin(name)?)
        })
    }

    pub fn label(&self) -> String {
        match self {
            Method::SrkMul(t) => t.name().to_string(),
            Method::SrkAdd(t) => t.name().to_string(),
            Method::AppurtenantMul(t) => format!("appurtenant:{}", t.name()),
            Method::AppurtenantAdd(t) => format!("appurtenant:{}", t.name()),
            Method::Euler => "euler".to_string(),
        }
    }

    /// The explicit companion of an SRK method.
    pub fn appurtenant(&self) -> Option<Method> {
        match self {
            Method::SrkMul(t) => Some(Method::AppurtenantMul(t.clone())),
            Method::SrkAdd(t) => Some(Method::AppurtenantAdd(t.clone())),
            _ => None,
        }
    }
}

enum Kernel {
    SrkMul(SdeProblem, StageCoefficients),
    AppMul(DerivedCoefficients),
    SrkAdd(AdditiveProblem, AdditiveStageCoefficients),
    AppAdd(AdditiveProblem, AdditiveStageCoefficients),
    EulerMul(SdeProblem),
    EulerAdd(AdditiveProblem),
}

/// A method bound to a problem, with float coefficients precomputed.
pub struct Stepper {
    kernel: Kernel,
    label: String,
    x0: State,
    noise_dim: usize,
    cfg: StepperConfig,
}

impl Stepper {
    pub fn new(problem: &Problem, method: &Method, cfg: StepperConfig) -> Result<Self, IntegratorError> {
        cfg.validate()?;
        let incompatible = |reason: &str| IntegratorError::Incompatible {
            method: method.label(),
            problem: problem.name().to_string(),
            reason: reason.to_string(),
        };
        let kernel = match (problem, method) {
            (Problem::Multiplicative(p), Method::SrkMul(t)) => Kernel::SrkMul(p.clone(), t.stage_coefficients()),
            (Problem::Multiplicative(p), Method::AppurtenantMul(t)) => {
                Kernel::AppMul(DerivedCoefficients::new(p, t))
            }
            (Problem::Additive(p), Method::SrkAdd(t)) => Kernel::SrkAdd(p.clone(), t.stage_coefficients()),
            (Problem::Additive(p), Method::AppurtenantAdd(t)) => {
                Kernel::AppAdd(p.clone(), t.stage_coefficients())
            }
            (Problem::Multiplicative(p), Method::Euler) => Kernel::EulerMul(p.clone()),
            (Problem::Additive(p), Method::Euler) => Kernel::EulerAdd(p.clone()),
            (Problem::Multiplicative(_), _) => return Err(incompatible("additive tableau on multiplicative noise")),
            (Problem::Additive(_), _) => return Err(incompatible("multiplicative tableau on additive noise")),
        };
        Ok(Stepper {
            kernel,
            label: method.label(),
            x0: problem.x0().clone(),
            noise_dim: problem.noise_dim(),
            cfg,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn x0(&self) -> &State {
        &self.x0
    }

    /// Advances `x` over step `n` of `path`; returns the new state and the
    /// number of stage iterations (0 for explicit methods).
    pub fn step(&self, path: &BrownianPath, n: usize, x: &State) -> Result<(State, usize), IntegratorError> {
        let h = path.h();
        let with_step = |e: IntegratorError| match e {
            IntegratorError::NonConvergent {
                iterations,
                last_residual,
                ..
            } => IntegratorError::NonConvergent {
                iterations,
                last_residual,
                step: Some(n),
            },
            other => other,
        };
        Ok(match &self.kernel {
            Kernel::SrkMul(p, t) => {
                let o = srk_mul_step(p, t, x, h, path.truncated_increment(n)[0], &self.cfg).map_err(with_step)?;
                (o.state, o.iterations)
            }
            Kernel::AppMul(d) => {
                let (i2, i3) = path.iterated_integrals().expect("scalar path checked in run");
                (appurtenant_mul_step(d, x, h, path.increment(n)[0], i2[n], i3[n]), 0)
            }
            Kernel::SrkAdd(p, t) => {
                let o = srk_add_step(p, t, x, h, path.increment(n), &self.cfg).map_err(with_step)?;
                (o.state, o.iterations)
            }
            Kernel::AppAdd(p, t) => (appurtenant_add_step(p, t, x, h, path.increment(n)), 0),
            Kernel::EulerMul(p) => {
                let g = |y: &State| vec![(p.g)(y)];
                (euler_step(|y| p.fbar(y), g, x, h, path.increment(n)), 0)
            }
            Kernel::EulerAdd(p) => (
                euler_step(|y| (p.f)(y), |_| p.sigma.clone(), x, h, path.increment(n)),
                0,
            ),
        })
    }

    fn check_path(&self, path: &BrownianPath) -> Result<(), IntegratorError> {
        if path.dim() != self.noise_dim {
            return Err(IntegratorError::GridMismatch(format!(
                "path has {} noise components, problem needs {}",
                path.dim(),
                self.noise_dim
            )));
        }
        Ok(())
    }

    /// Full trajectory on the grid of `path`.
    pub fn run(&self, path: &BrownianPath) -> Result<Trajectory, IntegratorError> {
        self.check_path(path)?;
        let n_steps = path.steps();
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut iterations = Vec::with_capacity(n_steps);
        let mut x = self.x0.clone();
        states.push(x.clone());
        for n in 0..n_steps {
            let (next, it) = self.step(path, n, &x)?;
            x = next;
            states.push(x.clone());
            iterations.push(it);
        }
        let t_end = path.t_end();
        let times = (0..=n_steps).map(|n| n as f64 * t_end / n_steps as f64).collect();
        Ok(Trajectory {
            times,
            states,
            method: self.label.clone(),
            iterations,
        })
    }

    /// Terminal state only.
    pub fn run_terminal(&self, path: &BrownianPath) -> Result<State, IntegratorError> {
        self.check_path(path)?;
        let mut x = self.x0.clone();
        for n in 0..path.steps() {
            x = self.step(path, n, &x)?.0;
        }
        Ok(x)
    }
}

/// States of one method on one path.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub method: String,
    /// Stage iterations per step (zeros for explicit methods).
    pub iterations: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn terminal(&self) -> &State {
        self.states.last().expect("trajectory holds x0")
    }

    /// Rows `t,x_1..x_d`.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, State::dim);
        let mut out = String::from("t");
        for k in 1..=d {
            let _ = write!(out, ",x_{k}");
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t}");
            for v in x.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Convenience wrapper: bind `method` to `problem` and integrate along `path`.
pub fn run(
    problem: &Problem,
    method: &Method,
    path: &BrownianPath,
    cfg: &StepperConfig,
) -> Result<Trajectory, IntegratorError> {
    Stepper::new(problem, method, *cfg)?.run(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::PathSpec;
    use crate::problem::{example61, linear_multiplicative, mul_log};

    fn s(x: f64) -> State {
        State::scalar(x)
    }

    #[test]
    fn zero_fields_are_identity() {
        let zero = SdeProblem::builder("z", s(1.0), |x| State::zeros(x.dim()), |x| State::zeros(x.dim())).build();
        let tab = multiplicative_builtin("midpoint").unwrap().stage_coefficients();
        let o = srk_mul_step(&zero, &tab, &s(1.3), 0.1, 0.2, &StepperConfig::default()).unwrap();
        assert_eq!(o.state, s(1.3));
        assert_eq!(o.iterations, 1);
    }

    #[test]
    fn linear_one_stage_closed_form() {
        let (a, b) = (-1.3, 0.7);
        let p = linear_multiplicative(a, b, 1.0);
        let tab = Tableau::new(
            "t",
            vec![vec!["1/3".parse().unwrap()]],
            vec![vec!["2/5".parse().unwrap()]],
            vec!["1".parse().unwrap()],
            vec!["1".parse().unwrap()],
        )
        .unwrap();
        let (y, h, w) = (0.8, 0.05, 0.11);
        let z = y / (1.0 - h * a / 3.0 - w * b * 0.4);
        let expected = y + h * a * z + w * b * z;
        let o = srk_mul_step(&p, &tab.stage_coefficients(), &s(y), h, w, &StepperConfig::default()).unwrap();
        assert!((o.state[0] - expected).abs() < 1e-13);
    }

    #[test]
    fn appurtenant_constant_diffusion() {
        let p = SdeProblem::builder("c", s(0.0), |x| State::zeros(x.dim()), |_| s(1.5))
            .df(|x, _| State::zeros(x.dim()))
            .dg(|x, _| State::zeros(x.dim()))
            .d2f(|x, _, _| State::zeros(x.dim()))
            .d2g(|x, _, _| State::zeros(x.dim()))
            .d3g(|x, _, _, _| State::zeros(x.dim()))
            .build();
        let d = DerivedCoefficients::new(&p, &multiplicative_builtin("midpoint").unwrap());
        let y = appurtenant_mul_step(&d, &s(0.4), 0.01, 0.3, 0.1, 0.2);
        assert_eq!(y, s(0.4 + 0.3 * 1.5));
    }

    #[test]
    fn appurtenant_zero_increment_has_ito_correction() {
        // With ΔW = 0: y + h f̄ − (h/2)∇g g + h² […] = y + h f + h²[…].
        let p = mul_log(1.0);
        let tab = multiplicative_builtin("midpoint").unwrap();
        let d = DerivedCoefficients::new(&p, &tab);
        let h = 0.01;
        let y = s(1.0);
        let out = appurtenant_mul_step(&d, &y, h, 0.0, -h / 2.0, 0.0);
        let j = d.jet(&y);
        let mut h2 = d.f3(&j);
        h2.axpy(d.contractions.alpha_ae(), &j.df_f);
        h2.axpy(3.0, &d.f4(&j));
        let expected = 1.0 + h * j.f[0] + h * h * h2[0];
        assert!((out[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn additive_trivial_cases() {
        let zero_f = AdditiveProblem::new("z", s(1.0), vec![s(2.0)], |x| State::zeros(x.dim()), None, None).unwrap();
        let tab = additive_builtin("trapezoid").unwrap().stage_coefficients();
        let o = srk_add_step(&zero_f, &tab, &s(1.0), 0.1, &[0.3], &StepperConfig::default()).unwrap();
        assert_eq!(o.state, s(1.6));
        assert_eq!(appurtenant_add_step(&zero_f, &tab, &s(1.0), 0.1, &[0.3]), s(1.6));
        let const_f = AdditiveProblem::new("c", s(1.0), vec![s(2.0)], |_| s(0.5), None, None).unwrap();
        let x = appurtenant_add_step(&const_f, &tab, &s(1.0), 0.1, &[0.3]);
        assert!((x[0] - (1.0 + 0.6 + 0.05)).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_matches_textbook_rule() {
        let p = example61(1.0, 1.0);
        let tab = additive_builtin("trapezoid").unwrap().stage_coefficients();
        let h = 2f64.powi(-3);
        let (x, w) = (0.7, 0.21);
        let o = srk_add_step(&p, &tab, &s(x), h, &[w], &StepperConfig::default()).unwrap();
        let f = |x: f64| -10.0 * x + x.sin();
        let xn = o.state[0];
        assert!((xn - x - 0.5 * h * (f(x) + f(xn)) - w).abs() < 1e-11);
    }

    #[test]
    fn theta_method_deterministic_linear() {
        let a = -2.0;
        let p = crate::problem::linear_additive(a, &[0.0], 1.0);
        let theta = 0.3;
        let tab = AdditiveTableau::theta(crate::tableau::Coef::Approx(theta)).stage_coefficients();
        let (x, h) = (1.2, 0.1);
        let o = srk_add_step(&p, &tab, &s(x), h, &[0.5], &StepperConfig::default()).unwrap();
        let expected = x * (1.0 + (1.0 - theta) * h * a) / (1.0 - theta * h * a);
        assert!((o.state[0] - expected).abs() < 1e-13);
    }

    #[test]
    fn euler_basics() {
        let out = euler_step(|x| -x, |x| vec![State::zeros(x.dim())], &s(1.0), 0.5, &[0.0]);
        assert_eq!(out, s(0.5));
        let id = euler_step(|x| State::zeros(x.dim()), |x| vec![State::zeros(x.dim())], &s(3.0), 0.5, &[1.0]);
        assert_eq!(id, s(3.0));
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = linear_multiplicative(50.0, 0.0, 1.0);
        let tab = multiplicative_builtin("midpoint").unwrap().stage_coefficients();
        let err = srk_mul_step(&p, &tab, &s(1.0), 1.0, 0.0, &StepperConfig::default()).unwrap_err();
        assert!(matches!(err, IntegratorError::NonConvergent { iterations: 200, .. }));
    }

    #[test]
    fn run_single_step_and_csv() {
        let problem = Problem::Additive(example61(1.0, 1.0));
        let method = Method::parse("trapezoid", true).unwrap();
        let path = BrownianPath::generate(&PathSpec::new(0.125, 1, 1, 3, 0), 3.0).unwrap();
        let traj = run(&problem, &method, &path, &StepperConfig::default()).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj.states[0], s(1.0));
        let p = example61(1.0, 1.0);
        let tab = additive_builtin("trapezoid").unwrap().stage_coefficients();
        let o = srk_add_step(&p, &tab, &s(1.0), 0.125, path.increment(0), &StepperConfig::default()).unwrap();
        assert_eq!(traj.terminal(), &o.state);
        assert!(traj.to_csv().starts_with("t,x_1\n0,1\n"));
    }

    #[test]
    fn method_names() {
        assert_eq!(Method::parse("theta:1", true).unwrap().label(), "theta:1");
        assert_eq!(Method::parse("appurtenant:midpoint", false).unwrap().label(), "appurtenant:midpoint");
        assert!(Method::parse("rk4", true).is_err());
        let err = Stepper::new(
            &Problem::Additive(example61(1.0, 1.0)),
            &Method::parse("midpoint", false).unwrap(),
            StepperConfig::default(),
        );
        assert!(matches!(err, Err(IntegratorError::Incompatible { .. })));
    }
}

//! Euler–Maruyama simulation of the limit equations for the normalized error
//! `N(numerical − exact)`: `U` for multiplicative noise and `V` for additive
//! noise.
//!
//! Coefficients are frozen at reference states taken at the left end of each
//! limit step. The reference trajectory may live on a finer grid than the limit
//! equation; its step count must be a multiple of the limit step count.

use crate::experiments::mean_stderr;
use crate::integrators::{IntegratorError, Method, Stepper, StepperConfig, Trajectory};
use crate::noise::{BrownianPath, NoiseError, PathSpec, StreamTag};
use crate::problem::{AdditiveProblem, DerivedCoefficients, Problem};
use crate::state::State;
use crate::tableau::{AdditiveResiduals, AdditiveTableau};
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LimitError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// Sums of the primary increments over each limit step.
fn block_increments(primary: &BrownianPath, factor: usize) -> Vec<Vec<f64>> {
    let m = primary.dim();
    (0..primary.steps() / factor)
        .map(|n| {
            let mut acc = vec![0.0; m];
            for i in n * factor..(n + 1) * factor {
                for (a, w) in acc.iter_mut().zip(primary.increment(i)) {
                    *a += w;
                }
            }
            acc
        })
        .collect()
}

fn grid(
    reference: &Trajectory,
    primary: &BrownianPath,
    aux: &BrownianPath,
    aux_dim: usize,
    t_end: f64,
) -> Result<usize, LimitError> {
    let n_ref = reference.len().saturating_sub(1);
    if n_ref != primary.steps() {
        return Err(LimitError::GridMismatch(format!(
            "reference has {n_ref} steps but the driving path has {}",
            primary.steps()
        )));
    }
    let n_lim = aux.steps();
    if n_lim == 0 || n_ref % n_lim != 0 {
        return Err(LimitError::GridMismatch(format!(
            "reference grid ({n_ref} steps) does not refine the limit grid ({n_lim} steps)"
        )));
    }
    if aux.dim() != aux_dim {
        return Err(LimitError::GridMismatch(format!(
            "auxiliary path has {} components, expected {aux_dim}",
            aux.dim()
        )));
    }
    let tol = 1e-12 * t_end.abs().max(1.0);
    if (primary.t_end() - t_end).abs() > tol || (aux.t_end() - t_end).abs() > tol {
        return Err(LimitError::GridMismatch("paths do not span [0, T]".into()));
    }
    Ok(n_ref / n_lim)
}

fn limit_trajectory(label: &str, t_end: f64, states: Vec<State>) -> Trajectory {
    let n = states.len() - 1;
    Trajectory {
        times: (0..=n).map(|i| i as f64 * t_end / n as f64).collect(),
        iterations: vec![0; n],
        states,
        method: label.to_string(),
    }
}

fn simulate_u_impl(
    derived: &DerivedCoefficients,
    reference: &Trajectory,
    primary: &BrownianPath,
    aux: &BrownianPath,
    t_end: f64,
    with_residuals: bool,
) -> Result<Trajectory, LimitError> {
    let factor = grid(reference, primary, aux, 2, t_end)?;
    let p = &derived.problem;
    let h = aux.h();
    let dws = block_increments(primary, factor);
    let c1 = t_end / 12f64.sqrt();
    let c2 = t_end / 6f64.sqrt();
    let mut u = State::zeros(p.dim());
    let mut states = Vec::with_capacity(aux.steps() + 1);
    states.push(u.clone());
    for (n, dw) in dws.iter().enumerate() {
        let y = &reference.states[n * factor];
        let j = derived.jet(y);
        let w = dw[0];
        let wt = aux.increment(n);
        let mut next = u.clone();
        next.axpy(h, &p.dfbar(y, &u));
        next.axpy(w, &(p.dg)(y, &u));
        next.axpy(c1 * wt[0], &derived.unified(&j));
        if with_residuals {
            next.axpy(t_end * h, &derived.h1(&j));
            next.axpy(t_end * w, &derived.h2(&j));
            next.axpy(c2 * wt[1], &derived.h3(&j));
        }
        u = next;
        states.push(u.clone());
    }
    Ok(limit_trajectory("U", t_end, states))
}

/// Limit process `U` for a multiplicative problem. `reference` holds the exact
/// solution proxy driven by `primary`; `aux` carries `(W̃1, W̃2)` on the limit grid.
pub fn simulate_u(
    derived: &DerivedCoefficients,
    reference: &Trajectory,
    primary: &BrownianPath,
    aux: &BrownianPath,
    t_end: f64,
) -> Result<Trajectory, LimitError> {
    simulate_u_impl(derived, reference, primary, aux, t_end, true)
}

/// `U` without the tableau-residual forcing (the form reached when η1 = 0).
pub fn simulate_u_unified(
    derived: &DerivedCoefficients,
    reference: &Trajectory,
    primary: &BrownianPath,
    aux: &BrownianPath,
    t_end: f64,
) -> Result<Trajectory, LimitError> {
    simulate_u_impl(derived, reference, primary, aux, t_end, false)
}

/// Limit process `V` for an additive problem with tableau residuals
/// `(ᾱ⊤(Āe) − ½, ᾱ⊤b̄² − ½, ᾱ⊤b̄ − ½)`; `aux` carries the m-dimensional `W̃`.
pub fn simulate_v(
    problem: &AdditiveProblem,
    residuals: &AdditiveResiduals,
    reference: &Trajectory,
    primary: &BrownianPath,
    aux: &BrownianPath,
    t_end: f64,
) -> Result<Trajectory, LimitError> {
    let factor = grid(reference, primary, aux, problem.noise_dim(), t_end)?;
    let h = aux.h();
    let dws = block_increments(primary, factor);
    let ct = t_end / 12f64.sqrt();
    let mut v = State::zeros(problem.dim());
    let mut states = Vec::with_capacity(aux.steps() + 1);
    states.push(v.clone());
    for (n, dw) in dws.iter().enumerate() {
        let x = &reference.states[n * factor];
        let mut next = v.clone();
        next.axpy(h, &(problem.df)(x, &v));
        if residuals.drift != 0.0 {
            next.axpy(residuals.drift * t_end * h, &(problem.df)(x, &(problem.f)(x)));
        }
        if residuals.curvature != 0.0 {
            next.axpy(0.5 * residuals.curvature * t_end * h, &problem.trace_d2f(x));
        }
        if residuals.noise != 0.0 {
            next.axpy(residuals.noise * t_end, &(problem.df)(x, &problem.sigma_times(dw)));
        }
        next.axpy(-ct, &(problem.df)(x, &problem.sigma_times(aux.increment(n))));
        v = next;
        states.push(v.clone());
    }
    Ok(limit_trajectory("V", t_end, states))
}

/// Settings of an η-growth scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanSettings {
    /// Step of the reference solution and of the limit equation.
    pub h: f64,
    pub paths: usize,
    pub seed: u64,
    pub stepper: StepperConfig,
}

/// One row of `T,method,eta,mean_sq,stderr`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitSummary {
    pub t_end: f64,
    pub method: String,
    pub eta: f64,
    pub mean_sq: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<LimitSummary>,
    /// At the largest T, sorting by `E|V(T)|²` gives the same order as sorting by η2.
    pub ordering_matches: bool,
}

pub fn summaries_to_csv(rows: &[LimitSummary]) -> String {
    let mut out = String::from("T,method,eta,mean_sq,stderr\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.t_end, r.method, r.eta, r.mean_sq, r.stderr);
    }
    out
}

/// Monte Carlo `E|V(T)|²` for every tableau and final time. The exact
/// solution proxy is the trapezoid method on the same grid.
pub fn eta_growth_scan(
    problem: &AdditiveProblem,
    tableaux: &[AdditiveTableau],
    t_list: &[f64],
    settings: &ScanSettings,
) -> Result<ScanResult, LimitError> {
    let reference_method = Method::parse("trapezoid", true)?;
    let wrapped = Problem::Additive(problem.clone());
    let stepper = Stepper::new(&wrapped, &reference_method, settings.stepper)?;
    let m = problem.noise_dim();
    let mut rows = Vec::new();
    for &t_end in t_list {
        let steps = ((t_end / settings.h).round() as usize).max(1);
        let per_path: Vec<Result<Vec<f64>, LimitError>> = (0..settings.paths as u64)
            .into_par_iter()
            .map(|i| {
                let spec = PathSpec::new(t_end, steps, m, settings.seed, i);
                let primary = BrownianPath::generate(&spec, crate::noise::DEFAULT_KAPPA)?;
                let aux = BrownianPath::generate_tagged(&spec, crate::noise::DEFAULT_KAPPA, StreamTag::Auxiliary)?;
                let reference = stepper.run(&primary)?;
                tableaux
                    .iter()
                    .map(|tab| {
                        let v = simulate_v(problem, &tab.residuals(), &reference, &primary, &aux, t_end)?;
                        Ok(v.terminal().norm_sq())
                    })
                    .collect()
            })
            .collect();
        let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_, _>>()?;
        for (k, tab) in tableaux.iter().enumerate() {
            let xs: Vec<f64> = per_path.iter().map(|r| r[k]).collect();
            let (mean_sq, stderr) = mean_stderr(&xs);
            rows.push(LimitSummary {
                t_end,
                method: tab.name().to_string(),
                eta: tab.eta2().eta.map_or(f64::NAN, |e| e.to_f64()),
                mean_sq,
                stderr,
            });
        }
    }
    let t_max = t_list.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last: Vec<&LimitSummary> = rows.iter().filter(|r| r.t_end == t_max).collect();
    let mut by_eta = last.clone();
    by_eta.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let mut by_err = last.clone();
    by_err.sort_by(|a, b| a.mean_sq.total_cmp(&b.mean_sq).then(a.eta.total_cmp(&b.eta)));
    let ordering_matches = by_eta.iter().zip(&by_err).all(|(a, b)| a.method == b.method);
    Ok(ScanResult { rows, ordering_matches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::run;
    use crate::problem::{example61, linear_additive};
    use crate::tableau::additive_builtin;

    fn setup(t_end: f64, steps: usize, sigma: f64) -> (AdditiveProblem, BrownianPath, BrownianPath, Trajectory) {
        let p = example61(1.0, sigma);
        let spec = PathSpec::new(t_end, steps, 1, 9, 0);
        let primary = BrownianPath::generate(&spec, 3.0).unwrap();
        let aux = BrownianPath::auxiliary(&spec, 3.0).unwrap();
        let reference = run(
            &Problem::Additive(p.clone()),
            &Method::parse("trapezoid", true).unwrap(),
            &primary,
            &StepperConfig::default(),
        )
        .unwrap();
        (p, primary, aux, reference)
    }

    #[test]
    fn v_starts_at_zero_and_vanishes_without_noise() {
        let (p, primary, aux, reference) = setup(0.25, 64, 0.0);
        let r = additive_builtin("midpoint").unwrap().residuals();
        let v = simulate_v(&p, &r, &reference, &primary, &aux, 0.25).unwrap();
        assert_eq!(v.states[0][0], 0.0);
        let trap = additive_builtin("trapezoid").unwrap().residuals();
        let v = simulate_v(&p, &trap, &reference, &primary, &aux, 0.25).unwrap();
        assert!(v.states.iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn grid_mismatch_detected() {
        let (p, primary, _, reference) = setup(0.25, 64, 1.0);
        let aux = BrownianPath::auxiliary(&PathSpec::new(0.25, 48, 1, 9, 0), 3.0).unwrap();
        let r = AdditiveResiduals::default();
        assert!(matches!(
            simulate_v(&p, &r, &reference, &primary, &aux, 0.25),
            Err(LimitError::GridMismatch(_))
        ));
    }

    #[test]
    fn coarser_limit_grid_uses_block_sums() {
        let (p, primary, _, reference) = setup(0.25, 64, 1.0);
        let aux = BrownianPath::auxiliary(&PathSpec::new(0.25, 16, 1, 9, 0), 3.0).unwrap();
        let v = simulate_v(&p, &AdditiveResiduals::default(), &reference, &primary, &aux, 0.25).unwrap();
        assert_eq!(v.len(), 17);
    }

    #[test]
    fn tiny_horizon_has_tiny_second_moment() {
        let p = linear_additive(-1.0, &[1.0], 1.0);
        let res = eta_growth_scan(
            &p,
            &[additive_builtin("midpoint").unwrap()],
            &[1e-3],
            &ScanSettings {
                h: 1e-4,
                paths: 200,
                seed: 1,
                stepper: StepperConfig::default(),
            },
        )
        .unwrap();
        assert!(res.rows[0].mean_sq < 1e-6);
    }
}

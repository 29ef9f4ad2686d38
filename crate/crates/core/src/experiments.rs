//! Monte Carlo campaigns: strong and weak convergence orders, the two-chain
//! comparison of an SRK method with its appurtenant companion, convergence in
//! distribution of the normalized error, and the time evolution of
//! mean-square errors.
//!
//! Paths are processed on a rayon pool and reduced in path-index order with
//! compensated summation, so every output is independent of the worker count.

use crate::integrators::{IntegratorError, Method, Stepper, StepperConfig};
use crate::limitsde::{simulate_u, simulate_v, LimitError};
use crate::noise::{BrownianPath, NoiseError, PathSpec, StreamTag, DEFAULT_KAPPA};
use crate::problem::{DerivedCoefficients, Problem};
use crate::state::State;
use rayon::prelude::*;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("invalid campaign: {0}")]
    InvalidCampaign(String),
    #[error("reference solution failed: {0}")]
    Reference(IntegratorError),
    #[error("{method} at h = {h}: {source}")]
    Method {
        method: String,
        h: f64,
        source: IntegratorError,
    },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error("{label}: fewer than two errors above the Monte Carlo noise floor; increase the number of paths")]
    NoSignal { label: String },
    #[error("cannot fit a slope through non-positive error {0}")]
    NonPositive(f64),
    #[error("unknown test function `{0}`")]
    UnknownPhi(String),
}

/// Compensated (Neumaier) sum in iteration order.
pub fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = neumaier_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = neumaier_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Root mean square with a delta-method standard error.
pub fn rms_stderr(squares: &[f64]) -> (f64, f64) {
    let (m, se) = mean_stderr(squares);
    let rms = m.sqrt();
    let se = if rms > 0.0 { se / (2.0 * rms) } else { 0.0 };
    (rms, se)
}

/// Least-squares line through `(ln h, ln err)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error from the residuals; `None` with only two points.
    pub stderr: Option<f64>,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit, ExperimentError> {
    if points.len() < 2 {
        return Err(ExperimentError::InvalidCampaign("a slope needs at least two points".into()));
    }
    for &(h, e) in points {
        if !(e > 0.0) || !e.is_finite() {
            return Err(ExperimentError::NonPositive(e));
        }
        if !(h > 0.0) {
            return Err(ExperimentError::NonPositive(h));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::InvalidCampaign("step sizes must differ".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (points.len() > 2).then(|| {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    });
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
    })
}

/// Test functions for weak and distributional errors, applied to the first
/// state component.
#[derive(Clone, Debug, PartialEq)]
pub enum Phi {
    Sin,
    SinCube,
    ExpNeg,
    Identity,
    Square,
    Constant(f64),
}

impl Phi {
    pub fn eval(&self, x: &State) -> f64 {
        let v = x[0];
        match self {
            Phi::Sin => v.sin(),
            Phi::SinCube => (v * v * v).sin(),
            Phi::ExpNeg => (-v).exp(),
            Phi::Identity => v,
            Phi::Square => v * v,
            Phi::Constant(c) => *c,
        }
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Sin => write!(f, "sin"),
            Phi::SinCube => write!(f, "sin3"),
            Phi::ExpNeg => write!(f, "exp-"),
            Phi::Identity => write!(f, "x"),
            Phi::Square => write!(f, "x2"),
            Phi::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for Phi {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Phi, ExperimentError> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        Ok(match t.as_str() {
            "sin" | "sin(x)" => Phi::Sin,
            "sin3" | "sin(x^3)" => Phi::SinCube,
            "exp-" | "exp(-x)" | "expneg" => Phi::ExpNeg,
            "x" | "id" => Phi::Identity,
            "x2" | "x^2" => Phi::Square,
            _ => match t.strip_prefix("const:").map(str::parse::<f64>) {
                Some(Ok(c)) => Phi::Constant(c),
                _ => return Err(ExperimentError::UnknownPhi(s.to_string())),
            },
        })
    }
}

/// A Monte Carlo study on one problem.
#[derive(Clone, Debug)]
pub struct Campaign {
    pub problem: Problem,
    pub methods: Vec<Method>,
    pub h_ladder: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub t_end: f64,
    /// Step of the exact-solution proxy.
    pub reference_h: f64,
    /// Defaults to the trapezoid method (additive) or the implicit midpoint
    /// method (multiplicative).
    pub reference_method: Option<Method>,
    pub kappa: f64,
    pub stepper: StepperConfig,
    /// Worker count; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Common random numbers for weak errors.
    pub crn: bool,
}

impl Campaign {
    pub fn new(problem: Problem, methods: Vec<Method>, h_ladder: Vec<f64>, t_end: f64) -> Self {
        Campaign {
            problem,
            methods,
            h_ladder,
            paths: 1000,
            seed: 0,
            t_end,
            reference_h: 2f64.powi(-14),
            reference_method: None,
            kappa: DEFAULT_KAPPA,
            stepper: StepperConfig::default(),
            threads: None,
            crn: true,
        }
    }

    pub fn reference_method(&self) -> Method {
        self.reference_method.clone().unwrap_or_else(|| {
            let name = if self.problem.is_additive() { "trapezoid" } else { "midpoint" };
            Method::parse(name, self.problem.is_additive()).expect("builtin tableau")
        })
    }

    fn steps_for(&self, h: f64) -> Result<usize, ExperimentError> {
        let n = (self.t_end / h).round();
        if !(h > 0.0) || n < 1.0 || (n * h - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(ExperimentError::InvalidCampaign(format!(
                "step {h} does not divide T = {}",
                self.t_end
            )));
        }
        Ok(n as usize)
    }

    /// Step counts of the ladder and of the reference grid.
    pub fn grids(&self) -> Result<(Vec<usize>, usize), ExperimentError> {
        if self.paths == 0 {
            return Err(ExperimentError::InvalidCampaign("M must be at least 1".into()));
        }
        if self.paths < 100 {
            log::warn!("only {} paths; Monte Carlo statistics will be rough", self.paths);
        }
        if self.h_ladder.is_empty() {
            return Err(ExperimentError::InvalidCampaign("empty step ladder".into()));
        }
        self.stepper.validate()?;
        let n_ref = self.steps_for(self.reference_h)?;
        let ladder = self
            .h_ladder
            .iter()
            .map(|&h| self.steps_for(h))
            .collect::<Result<Vec<_>, _>>()?;
        for (&n, &h) in ladder.iter().zip(&self.h_ladder) {
            if n_ref % n != 0 {
                return Err(ExperimentError::InvalidCampaign(format!(
                    "reference step {} does not divide h = {h}",
                    self.reference_h
                )));
            }
        }
        Ok((ladder, n_ref))
    }

    /// Steps of the finest ladder entry (grid for the two-chain comparison).
    fn finest_ladder(&self) -> Result<(Vec<usize>, usize), ExperimentError> {
        if self.paths == 0 || self.h_ladder.is_empty() {
            return Err(ExperimentError::InvalidCampaign("need paths and a step ladder".into()));
        }
        let ladder = self
            .h_ladder
            .iter()
            .map(|&h| self.steps_for(h))
            .collect::<Result<Vec<_>, _>>()?;
        let finest = ladder.iter().copied().fold(1, num_integer::lcm);
        Ok((ladder, finest))
    }

    fn pool(&self) -> Result<rayon::ThreadPool, ExperimentError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            b = b.num_threads(t.max(1));
        }
        b.build()
            .map_err(|e| ExperimentError::InvalidCampaign(format!("thread pool: {e}")))
    }

    fn path(&self, steps: usize, index: u64, tag: StreamTag) -> Result<BrownianPath, ExperimentError> {
        let spec = PathSpec::new(self.t_end, steps, self.problem.noise_dim(), self.seed, index);
        Ok(BrownianPath::generate_tagged(&spec, self.kappa, tag)?)
    }

    fn steppers(&self) -> Result<Vec<Stepper>, ExperimentError> {
        self.methods
            .iter()
            .map(|m| Ok(Stepper::new(&self.problem, m, self.stepper)?))
            .collect()
    }

    /// Runs `f` on every path index in parallel and returns results in index order.
    fn map_paths<T: Send>(
        &self,
        f: impl Fn(u64) -> Result<T, ExperimentError> + Sync + Send,
    ) -> Result<Vec<T>, ExperimentError> {
        let pool = self.pool()?;
        pool.install(|| (0..self.paths as u64).into_par_iter().map(&f).collect())
    }
}

/// Error estimate at one step size.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderPoint {
    pub h: f64,
    pub error: f64,
    pub stderr: f64,
    pub used_in_fit: bool,
    /// Paths on which the stage iteration failed (excluded from the statistics).
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderEstimate {
    /// Method label, followed by `/comparator` or `/phi` when relevant.
    pub label: String,
    pub points: Vec<OrderPoint>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

impl OrderEstimate {
    fn fit(label: String, points: Vec<OrderPoint>) -> Self {
        let usable: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.used_in_fit)
            .map(|p| (p.h, p.error))
            .collect();
        let fit = fit_slope(&usable).ok();
        OrderEstimate {
            label,
            points,
            slope: fit.map(|f| f.slope),
            slope_stderr: fit.and_then(|f| f.stderr),
        }
    }
}

/// Rows `method,h,error,stderr,slope,slope_stderr`.
pub fn orders_csv(estimates: &[OrderEstimate]) -> String {
    let mut out = String::from("method,h,error,stderr,slope,slope_stderr\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in estimates {
        for p in &e.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.label,
                p.h,
                p.error,
                p.stderr,
                opt(e.slope),
                opt(e.slope_stderr)
            );
        }
    }
    out
}

type Outcome = Result<State, ()>;

fn run_or_fail(stepper: &Stepper, path: &BrownianPath) -> Result<Outcome, ExperimentError> {
    match stepper.run_terminal(path) {
        Ok(x) => Ok(Ok(x)),
        Err(e @ IntegratorError::NonConvergent { .. }) => {
            log::debug!("{}: {e}", stepper.label());
            Ok(Err(()))
        }
        Err(e) => Err(e.into()),
    }
}

fn collect_point(h: f64, values: impl Iterator<Item = Option<f64>>, rms: bool) -> OrderPoint {
    let mut xs = Vec::new();
    let mut failures = 0;
    for v in values {
        match v {
            Some(x) => xs.push(x),
            None => failures += 1,
        }
    }
    let (error, stderr) = if rms { rms_stderr(&xs) } else { mean_stderr(&xs) };
    OrderPoint {
        h,
        error,
        stderr,
        used_in_fit: error > 0.0 && error.is_finite(),
        failures,
    }
}

/// Root-mean-square terminal error of each method against the exact-solution
/// proxy, on coupled paths.
pub fn strong_order(c: &Campaign) -> Result<Vec<OrderEstimate>, ExperimentError> {
    let (ladder, n_ref) = c.grids()?;
    let steppers = c.steppers()?;
    let reference = Stepper::new(&c.problem, &c.reference_method(), c.stepper)?;
    // per path: [method][h] squared error, None on failure
    let per_path = c.map_paths(|i| {
        let fine = c.path(n_ref, i, StreamTag::Primary)?;
        let x_ref = reference.run_terminal(&fine).map_err(ExperimentError::Reference)?;
        steppers
            .iter()
            .map(|s| {
                ladder
                    .iter()
                    .map(|&n| {
                        let path = fine.coarsen(n_ref / n)?;
                        Ok(run_or_fail(s, &path)?.ok().map(|x| (&x - &x_ref).norm_sq()))
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;
    Ok(steppers
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let points = c
                .h_ladder
                .iter()
                .enumerate()
                .map(|(j, &h)| collect_point(h, per_path.iter().map(|p| p[k][j]), true))
                .collect();
            OrderEstimate::fit(s.label().to_string(), points)
        })
        .collect())
}

/// RMS terminal gap between each SRK method and its appurtenant companion on
/// shared paths; no exact-solution proxy is involved.
pub fn two_chain_order(c: &Campaign) -> Result<Vec<OrderEstimate>, ExperimentError> {
    let (ladder, finest) = c.finest_ladder()?;
    let pairs = c
        .methods
        .iter()
        .map(|m| {
            let app = m.appurtenant().ok_or_else(|| {
                ExperimentError::InvalidCampaign(format!("{} has no appurtenant companion", m.label()))
            })?;
            Ok((
                Stepper::new(&c.problem, m, c.stepper)?,
                Stepper::new(&c.problem, &app, c.stepper)?,
            ))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let per_path = c.map_paths(|i| {
        let fine = c.path(finest, i, StreamTag::Primary)?;
        pairs
            .iter()
            .map(|(srk, app)| {
                ladder
                    .iter()
                    .map(|&n| {
                        let path = fine.coarsen(finest / n)?;
                        let a = run_or_fail(srk, &path)?;
                        let b = run_or_fail(app, &path)?;
                        Ok(match (a, b) {
                            (Ok(a), Ok(b)) => Some((&a - &b).norm_sq()),
                            _ => None,
                        })
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, (srk, app))| {
            let points = c
                .h_ladder
                .iter()
                .enumerate()
                .map(|(j, &h)| collect_point(h, per_path.iter().map(|p| p[k][j]), true))
                .collect();
            OrderEstimate::fit(format!("{}/{}", srk.label(), app.label()), points)
        })
        .collect())
}

/// Weak errors `|E φ(X_N) − E φ(X(T))|` per method and test function. Points
/// below three standard errors are kept in the output but left out of the fit;
/// fewer than two usable points is a [`ExperimentError::NoSignal`].
pub fn weak_order(c: &Campaign, phis: &[Phi]) -> Result<Vec<OrderEstimate>, ExperimentError> {
    let out = weak_errors(c, phis)?;
    for (e, phi) in out.iter().zip(phis.iter().cycle()) {
        if !matches!(phi, Phi::Constant(_)) && e.points.iter().filter(|p| p.used_in_fit).count() < 2 {
            return Err(ExperimentError::NoSignal { label: e.label.clone() });
        }
    }
    Ok(out)
}

/// As [`weak_order`] without the signal check.
pub fn weak_errors(c: &Campaign, phis: &[Phi]) -> Result<Vec<OrderEstimate>, ExperimentError> {
    let (ladder, n_ref) = c.grids()?;
    let steppers = c.steppers()?;
    let reference = Stepper::new(&c.problem, &c.reference_method(), c.stepper)?;
    struct PathWeak {
        reference: Vec<f64>,
        // [method][h][phi]
        values: Vec<Vec<Option<Vec<f64>>>>,
    }
    let per_path = c.map_paths(|i| {
        let fine = c.path(n_ref, i, StreamTag::Primary)?;
        let ref_path = if c.crn {
            fine.clone()
        } else {
            c.path(n_ref, i, StreamTag::Independent)?
        };
        let x_ref = reference.run_terminal(&ref_path).map_err(ExperimentError::Reference)?;
        let values = steppers
            .iter()
            .map(|s| {
                ladder
                    .iter()
                    .map(|&n| {
                        let path = fine.coarsen(n_ref / n)?;
                        Ok(run_or_fail(s, &path)?
                            .ok()
                            .map(|x| phis.iter().map(|p| p.eval(&x)).collect()))
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        Ok(PathWeak {
            reference: phis.iter().map(|p| p.eval(&x_ref)).collect(),
            values,
        })
    })?;
    let mut out = Vec::new();
    for (k, s) in steppers.iter().enumerate() {
        for (q, phi) in phis.iter().enumerate() {
            let label = format!("{}/{}", s.label(), phi);
            let mut points = Vec::new();
            for (j, &h) in c.h_ladder.iter().enumerate() {
                let ok: Vec<&PathWeak> = per_path.iter().filter(|p| p.values[k][j].is_some()).collect();
                let failures = per_path.len() - ok.len();
                let num: Vec<f64> = ok.iter().map(|p| p.values[k][j].as_ref().unwrap()[q]).collect();
                let refv: Vec<f64> = ok.iter().map(|p| p.reference[q]).collect();
                let (error, stderr) = if c.crn {
                    let diffs: Vec<f64> = num.iter().zip(&refv).map(|(a, b)| a - b).collect();
                    let (m, se) = mean_stderr(&diffs);
                    (m.abs(), se)
                } else {
                    let (ma, sa) = mean_stderr(&num);
                    let (mb, sb) = mean_stderr(&refv);
                    ((ma - mb).abs(), sa.hypot(sb))
                };
                let above = error > 0.0 && error >= 3.0 * stderr;
                if !above {
                    log::warn!("{label}: h = {h} is below the noise floor ({error:.3e} < 3 x {stderr:.3e})");
                }
                points.push(OrderPoint {
                    h,
                    error,
                    stderr,
                    used_in_fit: above,
                    failures,
                });
            }
            out.push(OrderEstimate::fit(label, points));
        }
    }
    Ok(out)
}

/// One row of `phi,h,err,stderr`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistPoint {
    pub phi: String,
    pub h: f64,
    pub err: f64,
    /// `sqrt(se_numerical² + se_limit²)`.
    pub stderr: f64,
    pub mean_numerical: f64,
    pub mean_limit: f64,
}

pub fn dist_csv(points: &[DistPoint]) -> String {
    let mut out = String::from("phi,h,err,stderr\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.phi, p.h, p.err, p.stderr);
    }
    out
}

/// `|E φ(N(X_N − X(T))) − E φ(L(T))|` where `L` is the limit process (`V` for
/// additive noise, `U` for multiplicative noise) simulated on the reference grid.
/// Uses the first method of the campaign.
pub fn dist_convergence(c: &Campaign, phis: &[Phi]) -> Result<Vec<DistPoint>, ExperimentError> {
    let (ladder, n_ref) = c.grids()?;
    let method = c
        .methods
        .first()
        .ok_or_else(|| ExperimentError::InvalidCampaign("no method given".into()))?;
    let stepper = Stepper::new(&c.problem, method, c.stepper)?;
    let reference = Stepper::new(&c.problem, &c.reference_method(), c.stepper)?;
    enum Limit {
        V(crate::problem::AdditiveProblem, crate::tableau::AdditiveResiduals),
        U(DerivedCoefficients),
    }
    let limit = match (&c.problem, method) {
        (Problem::Additive(p), Method::SrkAdd(t) | Method::AppurtenantAdd(t)) => Limit::V(p.clone(), t.residuals()),
        (Problem::Multiplicative(p), Method::SrkMul(t) | Method::AppurtenantMul(t)) => {
            Limit::U(DerivedCoefficients::new(p, t))
        }
        _ => {
            return Err(ExperimentError::InvalidCampaign(format!(
                "{} has no limit equation",
                method.label()
            )))
        }
    };
    let aux_dim = match &limit {
        Limit::V(p, _) => p.noise_dim(),
        Limit::U(_) => 2,
    };
    struct PathDist {
        limit: Vec<f64>,
        // [h][phi]
        numerical: Vec<Option<Vec<f64>>>,
    }
    let per_path = c.map_paths(|i| {
        let fine = c.path(n_ref, i, StreamTag::Primary)?;
        let traj = reference.run(&fine).map_err(ExperimentError::Reference)?;
        let x_ref = traj.terminal().clone();
        let aux_spec = PathSpec::new(c.t_end, n_ref, aux_dim, c.seed, i);
        let aux = BrownianPath::generate_tagged(&aux_spec, c.kappa, StreamTag::Auxiliary)?;
        let l = match &limit {
            Limit::V(p, r) => simulate_v(p, r, &traj, &fine, &aux, c.t_end)?,
            Limit::U(d) => simulate_u(d, &traj, &fine, &aux, c.t_end)?,
        };
        let numerical = ladder
            .iter()
            .map(|&n| {
                let path = fine.coarsen(n_ref / n)?;
                Ok(run_or_fail(&stepper, &path)?.ok().map(|x| {
                    let e = (&x - &x_ref) * n as f64;
                    phis.iter().map(|p| p.eval(&e)).collect()
                }))
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        Ok(PathDist {
            limit: phis.iter().map(|p| p.eval(l.terminal())).collect(),
            numerical,
        })
    })?;
    let mut out = Vec::new();
    for (q, phi) in phis.iter().enumerate() {
        let lim: Vec<f64> = per_path.iter().map(|p| p.limit[q]).collect();
        let (ml, sl) = mean_stderr(&lim);
        for (j, &h) in c.h_ladder.iter().enumerate() {
            let num: Vec<f64> = per_path
                .iter()
                .filter_map(|p| p.numerical[j].as_ref().map(|v| v[q]))
                .collect();
            let (mn, sn) = mean_stderr(&num);
            out.push(DistPoint {
                phi: phi.to_string(),
                h,
                err: (mn - ml).abs(),
                stderr: sn.hypot(sl),
                mean_numerical: mn,
                mean_limit: ml,
            });
        }
    }
    Ok(out)
}

/// True when `(err, stderr)` pairs, listed from the largest step down, decrease
/// except for at most one rise smaller than two combined standard errors.
pub fn decreasing_with_tolerance(points: &[(f64, f64)]) -> bool {
    let mut excused = 0;
    for w in points.windows(2) {
        let ((e0, s0), (e1, s1)) = (w[0], w[1]);
        if e1 > e0 {
            if e1 - e0 > 2.0 * s0.hypot(s1) {
                return false;
            }
            excused += 1;
        }
    }
    excused <= 1
}

/// Root-mean-square error against the reference at every grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorCurve {
    pub method: String,
    pub times: Vec<f64>,
    pub rmse: Vec<f64>,
    pub failures: usize,
}

impl ErrorCurve {
    /// RMSE at the grid time closest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let (k, _) = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .expect("non-empty curve");
        self.rmse[k]
    }

    pub fn terminal(&self) -> f64 {
        *self.rmse.last().expect("non-empty curve")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub curves: Vec<ErrorCurve>,
    /// Methods sorted by terminal RMSE.
    pub terminal_order: Vec<String>,
    /// Methods sorted by η2 (additive SRK methods only; empty otherwise).
    pub eta_order: Vec<String>,
}

impl Evolution {
    pub fn ordering_matches(&self) -> bool {
        !self.eta_order.is_empty() && self.eta_order == self.terminal_order
    }
}

pub fn evolution_csv(ev: &Evolution) -> String {
    let mut out = String::from("method,t,rmse\n");
    for c in &ev.curves {
        for (t, r) in c.times.iter().zip(&c.rmse) {
            let _ = writeln!(out, "{},{},{}", c.method, t, r);
        }
    }
    out
}

/// Mean-square error curves of every method at the grid times of the first
/// ladder step.
pub fn mse_evolution(c: &Campaign) -> Result<Evolution, ExperimentError> {
    let (ladder, n_ref) = c.grids()?;
    let n = ladder[0];
    let factor = n_ref / n;
    let steppers = c.steppers()?;
    let reference = Stepper::new(&c.problem, &c.reference_method(), c.stepper)?;
    let per_path = c.map_paths(|i| {
        let fine = c.path(n_ref, i, StreamTag::Primary)?;
        let traj_ref = reference.run(&fine).map_err(ExperimentError::Reference)?;
        let coarse = fine.coarsen(factor)?;
        steppers
            .iter()
            .map(|s| match s.run(&coarse) {
                Ok(t) => Ok(Some(
                    t.states
                        .iter()
                        .enumerate()
                        .map(|(k, x)| (x - &traj_ref.states[k * factor]).norm_sq())
                        .collect::<Vec<f64>>(),
                )),
                Err(IntegratorError::NonConvergent { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * c.t_end / n as f64).collect();
    let curves: Vec<ErrorCurve> = steppers
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let ok: Vec<&Vec<f64>> = per_path.iter().filter_map(|p| p[m].as_ref()).collect();
            let rmse = (0..=n)
                .map(|k| {
                    let sq: Vec<f64> = ok.iter().map(|v| v[k]).collect();
                    rms_stderr(&sq).0
                })
                .collect();
            ErrorCurve {
                method: s.label().to_string(),
                times: times.clone(),
                rmse,
                failures: per_path.len() - ok.len(),
            }
        })
        .collect();
    let mut terminal: Vec<&ErrorCurve> = curves.iter().collect();
    terminal.sort_by(|a, b| a.terminal().total_cmp(&b.terminal()));
    let terminal_order = terminal.iter().map(|c| c.method.clone()).collect();
    let etas: Option<Vec<(String, f64)>> = c
        .methods
        .iter()
        .map(|m| match m {
            Method::SrkAdd(t) => Some((m.label(), t.eta2().eta.map_or(f64::NAN, |e| e.to_f64()))),
            _ => None,
        })
        .collect();
    let eta_order = etas
        .map(|mut v| {
            v.sort_by(|a, b| a.1.total_cmp(&b.1));
            v.into_iter().map(|(name, _)| name).collect()
        })
        .unwrap_or_default();
    Ok(Evolution {
        curves,
        terminal_order,
        eta_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::example62;

    #[test]
    fn slope_of_exact_power_laws() {
        let hs = [0.5, 0.25, 0.125, 0.0625];
        let lin: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 3.0 * h)).collect();
        let quad: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 0.7 * h * h)).collect();
        assert!((fit_slope(&lin).unwrap().slope - 1.0).abs() < 1e-12);
        assert!((fit_slope(&quad).unwrap().slope - 2.0).abs() < 1e-12);
        assert!(fit_slope(&lin[..2]).unwrap().stderr.is_none());
        assert_eq!(fit_slope(&[(0.5, 1.0), (0.25, 0.0)]), Err(ExperimentError::NonPositive(0.0)));
    }

    #[test]
    fn neumaier_beats_naive() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(neumaier_sum(xs), 1.0);
    }

    #[test]
    fn monotone_with_one_excused_rise() {
        assert!(decreasing_with_tolerance(&[(4.0, 0.1), (2.0, 0.1), (1.0, 0.1)]));
        assert!(decreasing_with_tolerance(&[(4.0, 0.1), (2.0, 0.1), (2.1, 0.1), (1.0, 0.1)]));
        assert!(!decreasing_with_tolerance(&[(4.0, 0.1), (2.0, 0.1), (2.5, 0.1)]));
        assert!(!decreasing_with_tolerance(&[(4.0, 0.1), (4.1, 0.1), (2.0, 0.1), (2.1, 0.1)]));
    }

    #[test]
    fn phi_parsing() {
        assert_eq!("sin(x)".parse::<Phi>().unwrap(), Phi::Sin);
        assert_eq!("sin(x^3)".parse::<Phi>().unwrap(), Phi::SinCube);
        assert_eq!("exp(-x)".parse::<Phi>().unwrap(), Phi::ExpNeg);
        assert_eq!("const:2".parse::<Phi>().unwrap(), Phi::Constant(2.0));
        assert!("tan".parse::<Phi>().is_err());
    }

    #[test]
    fn campaign_grid_validation() {
        let p = Problem::Additive(example62(1.0, 1.0, 1.0));
        let m = vec![Method::parse("trapezoid", true).unwrap()];
        let mut c = Campaign::new(p, m, vec![0.25, 0.125], 1.0);
        c.reference_h = 0.0625;
        assert_eq!(c.grids().unwrap(), (vec![4, 8], 16));
        c.reference_h = 0.1;
        assert!(c.grids().is_err());
        c.reference_h = 0.0625;
        c.paths = 0;
        assert!(c.grids().is_err());
    }

    #[test]
    fn evolution_degenerate_single_path() {
        let p = Problem::Additive(example62(1.0, 1.0, 1.0));
        let m = vec![
            Method::parse("trapezoid", true).unwrap(),
            Method::parse("midpoint", true).unwrap(),
        ];
        let mut c = Campaign::new(p, m, vec![0.1], 0.5);
        c.reference_h = 0.01;
        c.paths = 1;
        let ev = mse_evolution(&c).unwrap();
        assert_eq!(ev.curves.len(), 2);
        assert_eq!(ev.curves[0].rmse.len(), 6);
        assert_eq!(ev.curves[0].rmse[0], 0.0);
        assert_eq!(ev.eta_order, vec!["trapezoid", "midpoint"]);
    }
}

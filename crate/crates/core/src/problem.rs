//! SDE definitions with directional derivatives, and the coefficient
//! functions (f̄, F1–F4, G1, G2, H1–H3) built from them.
//!
//! Derivatives are directional: `df(x, v) = ∇f(x)v`, `d2f(x, v, w) =
//! D²f(x)(v, w)` and so on. Missing derivatives are replaced by central
//! differences of the next lower one and listed in `approximated()`.

use crate::state::State;
use crate::tableau::{Contractions, Tableau};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub type Field = Arc<dyn Fn(&State) -> State + Send + Sync>;
pub type Deriv1 = Arc<dyn Fn(&State, &State) -> State + Send + Sync>;
pub type Deriv2 = Arc<dyn Fn(&State, &State, &State) -> State + Send + Sync>;
pub type Deriv3 = Arc<dyn Fn(&State, &State, &State, &State) -> State + Send + Sync>;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem `{0}`")]
    UnknownName(String),
    #[error("problem `{problem}` has no parameter `{param}`")]
    UnknownParameter { problem: String, param: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "derivative `{callback}` disagrees with finite differences at {state:?}: \
         relative error {rel_error:.3e}, ratio {ratio:.4}"
    )]
    DerivativeMismatch {
        callback: &'static str,
        state: Vec<f64>,
        rel_error: f64,
        ratio: f64,
    },
}

const FD_STEPS: [f64; 3] = [1e-6, 1e-4, 1e-3];

fn fd_scale(x: &State, order: usize) -> f64 {
    FD_STEPS[order - 1] * (1.0 + x.norm_max())
}

fn fd1(base: Field) -> Deriv1 {
    Arc::new(move |x, v| {
        let e = fd_scale(x, 1);
        let mut xp = x.clone();
        xp.axpy(e, v);
        let mut xm = x.clone();
        xm.axpy(-e, v);
        (base(&xp) - base(&xm)) * (0.5 / e)
    })
}

fn fd2(base: Deriv1) -> Deriv2 {
    Arc::new(move |x, v, w| {
        let e = fd_scale(x, 2);
        let mut xp = x.clone();
        xp.axpy(e, w);
        let mut xm = x.clone();
        xm.axpy(-e, w);
        (base(&xp, v) - base(&xm, v)) * (0.5 / e)
    })
}

fn fd3(base: Deriv2) -> Deriv3 {
    Arc::new(move |x, u, v, w| {
        let e = fd_scale(x, 3);
        let mut xp = x.clone();
        xp.axpy(e, w);
        let mut xm = x.clone();
        xm.axpy(-e, w);
        (base(&xp, u, v) - base(&xm, u, v)) * (0.5 / e)
    })
}

/// Stratonovich SDE `dY = f(Y) dt + g(Y) ∘ dW` driven by one Brownian motion.
#[derive(Clone)]
pub struct SdeProblem {
    pub name: String,
    pub x0: State,
    pub f: Field,
    pub g: Field,
    pub df: Deriv1,
    pub dg: Deriv1,
    pub d2f: Deriv2,
    pub d2g: Deriv2,
    pub d3g: Deriv3,
    approximated: Vec<&'static str>,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("name", &self.name)
            .field("x0", &self.x0)
            .field("approximated", &self.approximated)
            .finish()
    }
}

impl SdeProblem {
    pub fn builder(
        name: impl Into<String>,
        x0: State,
        f: impl Fn(&State) -> State + Send + Sync + 'static,
        g: impl Fn(&State) -> State + Send + Sync + 'static,
    ) -> SdeProblemBuilder {
        SdeProblemBuilder {
            name: name.into(),
            x0,
            f: Arc::new(f),
            g: Arc::new(g),
            df: None,
            dg: None,
            d2f: None,
            d2g: None,
            d3g: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    /// Callbacks replaced by finite differences (lower accuracy).
    pub fn approximated(&self) -> &[&'static str] {
        &self.approximated
    }

    /// Itô drift `f̄ = f + ½∇g g`.
    pub fn fbar(&self, y: &State) -> State {
        let g = (self.g)(y);
        let mut out = (self.f)(y);
        out.axpy(0.5, &(self.dg)(y, &g));
        out
    }

    /// `∇f̄(y)v = ∇f v + ½[D²g(g, v) + ∇g(∇g v)]`.
    pub fn dfbar(&self, y: &State, v: &State) -> State {
        let g = (self.g)(y);
        let mut out = (self.df)(y, v);
        out.axpy(0.5, &(self.d2g)(y, &g, v));
        out.axpy(0.5, &(self.dg)(y, &(self.dg)(y, v)));
        out
    }

    /// All elementary differentials needed by F1–F4 and H1–H3 at `y`.
    pub fn jet(&self, y: &State) -> Jet {
        let f = (self.f)(y);
        let g = (self.g)(y);
        let dg = |v: &State| (self.dg)(y, v);
        let df = |v: &State| (self.df)(y, v);
        let dg_g = dg(&g);
        let dg_f = dg(&f);
        let df_g = df(&g);
        let d2g_gg = (self.d2g)(y, &g, &g);
        Jet {
            df_f: df(&f),
            dg_dg_g: dg(&dg_g),
            dg_dg_f: dg(&dg_f),
            dg3_g: dg(&dg(&dg_g)),
            df_dg_g: df(&dg_g),
            dg_df_g: dg(&df_g),
            d2f_gg: (self.d2f)(y, &g, &g),
            d2g_fg: (self.d2g)(y, &f, &g),
            dg_d2g_gg: dg(&d2g_gg),
            d2g_g_dgg: (self.d2g)(y, &g, &dg_g),
            d3g_ggg: (self.d3g)(y, &g, &g, &g),
            d2g_gg,
            dg_g,
            dg_f,
            df_g,
            f,
            g,
        }
    }
}

pub struct SdeProblemBuilder {
    name: String,
    x0: State,
    f: Field,
    g: Field,
    df: Option<Deriv1>,
    dg: Option<Deriv1>,
    d2f: Option<Deriv2>,
    d2g: Option<Deriv2>,
    d3g: Option<Deriv3>,
}

impl SdeProblemBuilder {
    pub fn df(mut self, d: impl Fn(&State, &State) -> State + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(d));
        self
    }
    pub fn dg(mut self, d: impl Fn(&State, &State) -> State + Send + Sync + 'static) -> Self {
        self.dg = Some(Arc::new(d));
        self
    }
    pub fn d2f(mut self, d: impl Fn(&State, &State, &State) -> State + Send + Sync + 'static) -> Self {
        self.d2f = Some(Arc::new(d));
        self
    }
    pub fn d2g(mut self, d: impl Fn(&State, &State, &State) -> State + Send + Sync + 'static) -> Self {
        self.d2g = Some(Arc::new(d));
        self
    }
    pub fn d3g(
        mut self,
        d: impl Fn(&State, &State, &State, &State) -> State + Send + Sync + 'static,
    ) -> Self {
        self.d3g = Some(Arc::new(d));
        self
    }

    pub fn build(self) -> SdeProblem {
        let mut approximated = Vec::new();
        let df = self.df.unwrap_or_else(|| {
            approximated.push("df");
            fd1(self.f.clone())
        });
        let dg = self.dg.unwrap_or_else(|| {
            approximated.push("dg");
            fd1(self.g.clone())
        });
        let d2f = self.d2f.unwrap_or_else(|| {
            approximated.push("d2f");
            fd2(df.clone())
        });
        let d2g = self.d2g.unwrap_or_else(|| {
            approximated.push("d2g");
            fd2(dg.clone())
        });
        let d3g = self.d3g.unwrap_or_else(|| {
            approximated.push("d3g");
            fd3(d2g.clone())
        });
        if !approximated.is_empty() {
            log::warn!(
                "problem `{}`: {} approximated by finite differences",
                self.name,
                approximated.join(", ")
            );
        }
        SdeProblem {
            name: self.name,
            x0: self.x0,
            f: self.f,
            g: self.g,
            df,
            dg,
            d2f,
            d2g,
            d3g,
            approximated,
        }
    }
}

/// SDE `dX = f(X) dt + σ dW` with constant `σ ∈ R^{d×m}`, stored as columns `σ_k`.
#[derive(Clone)]
pub struct AdditiveProblem {
    pub name: String,
    pub x0: State,
    pub f: Field,
    pub df: Deriv1,
    pub d2f: Deriv2,
    pub sigma: Vec<State>,
    approximated: Vec<&'static str>,
}

impl fmt::Debug for AdditiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdditiveProblem")
            .field("name", &self.name)
            .field("x0", &self.x0)
            .field("sigma", &self.sigma)
            .field("approximated", &self.approximated)
            .finish()
    }
}

impl AdditiveProblem {
    /// `sigma` holds the columns σ_1..σ_m, each of the state dimension.
    pub fn new(
        name: impl Into<String>,
        x0: State,
        sigma: Vec<State>,
        f: impl Fn(&State) -> State + Send + Sync + 'static,
        df: Option<Deriv1>,
        d2f: Option<Deriv2>,
    ) -> Result<Self, ProblemError> {
        if sigma.is_empty() {
            return Err(ProblemError::InvalidArgument("noise dimension must be at least 1".into()));
        }
        if sigma.iter().any(|c| c.dim() != x0.dim()) {
            return Err(ProblemError::InvalidArgument(
                "every sigma column must match the state dimension".into(),
            ));
        }
        let f: Field = Arc::new(f);
        let mut approximated = Vec::new();
        let df = df.unwrap_or_else(|| {
            approximated.push("df");
            fd1(f.clone())
        });
        let d2f = d2f.unwrap_or_else(|| {
            approximated.push("d2f");
            fd2(df.clone())
        });
        Ok(AdditiveProblem {
            name: name.into(),
            x0,
            f,
            df,
            d2f,
            sigma,
            approximated,
        })
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn approximated(&self) -> &[&'static str] {
        &self.approximated
    }

    /// `σ ΔW = Σ_k σ_k ΔW_k`.
    pub fn sigma_times(&self, dw: &[f64]) -> State {
        let mut out = State::zeros(self.dim());
        for (col, &w) in self.sigma.iter().zip(dw) {
            out.axpy(w, col);
        }
        out
    }

    /// `Σ_k D²f(x)(σ_k, σ_k)`.
    pub fn trace_d2f(&self, x: &State) -> State {
        let mut out = State::zeros(self.dim());
        for col in &self.sigma {
            out += &(self.d2f)(x, col, col);
        }
        out
    }
}

/// Either kind of problem, as selected from the builtin catalog.
#[derive(Clone, Debug)]
pub enum Problem {
    Multiplicative(SdeProblem),
    Additive(AdditiveProblem),
}

impl Problem {
    pub fn name(&self) -> &str {
        match self {
            Problem::Multiplicative(p) => &p.name,
            Problem::Additive(p) => &p.name,
        }
    }

    pub fn x0(&self) -> &State {
        match self {
            Problem::Multiplicative(p) => &p.x0,
            Problem::Additive(p) => &p.x0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x0().dim()
    }

    /// Number of driving Brownian motions.
    pub fn noise_dim(&self) -> usize {
        match self {
            Problem::Multiplicative(_) => 1,
            Problem::Additive(p) => p.noise_dim(),
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, Problem::Additive(_))
    }
}

/// The elementary differentials of f and g at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub f: State,
    pub g: State,
    pub df_f: State,
    pub df_g: State,
    pub dg_f: State,
    pub dg_g: State,
    /// `(∇g)²g`
    pub dg_dg_g: State,
    /// `(∇g)²f`
    pub dg_dg_f: State,
    /// `(∇g)³g`
    pub dg3_g: State,
    /// `∇f∇g g`
    pub df_dg_g: State,
    /// `∇g∇f g`
    pub dg_df_g: State,
    pub d2f_gg: State,
    pub d2g_gg: State,
    pub d2g_fg: State,
    /// `∇g D²g(g,g)`
    pub dg_d2g_gg: State,
    /// `D²g(g, ∇g g)`
    pub d2g_g_dgg: State,
    pub d3g_ggg: State,
}

fn combo(terms: &[(f64, &State)]) -> State {
    let mut out = State::zeros(terms[0].1.dim());
    for &(c, v) in terms {
        if c != 0.0 {
            out.axpy(c, v);
        }
    }
    out
}

/// Coefficient functions of a multiplicative problem paired with a tableau.
#[derive(Clone, Debug)]
pub struct DerivedCoefficients {
    pub problem: SdeProblem,
    pub contractions: Contractions,
}

/// Values of every derived coefficient at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientValues {
    pub fbar: State,
    pub f1: State,
    pub f2: State,
    pub f3: State,
    pub f4: State,
    pub g1: State,
    pub g2: State,
    pub h1: State,
    pub h2: State,
    pub h3: State,
    /// `∇f g − ∇g f`
    pub unified: State,
}

impl DerivedCoefficients {
    pub fn new(problem: &SdeProblem, tab: &Tableau) -> Self {
        Self::from_contractions(problem, tab.contractions())
    }

    pub fn from_contractions(problem: &SdeProblem, contractions: Contractions) -> Self {
        DerivedCoefficients {
            problem: problem.clone(),
            contractions,
        }
    }

    pub fn jet(&self, y: &State) -> Jet {
        self.problem.jet(y)
    }

    pub fn fbar(&self, y: &State) -> State {
        self.problem.fbar(y)
    }

    pub fn f1(&self, j: &Jet) -> State {
        let c = &self.contractions;
        combo(&[(c.alpha_be(), &j.df_g), (c.beta_ae(), &j.dg_f)])
    }

    pub fn f2(&self, j: &Jet) -> State {
        let c = &self.contractions;
        combo(&[(c.beta_bbe(), &j.dg_dg_g), (0.5 * c.beta_be2(), &j.d2g_gg)])
    }

    pub fn f3(&self, j: &Jet) -> State {
        let c = &self.contractions;
        combo(&[
            (c.alpha_bbe(), &j.df_dg_g),
            (c.beta_abe(), &j.dg_df_g),
            (c.beta_bae(), &j.dg_dg_f),
            (0.5 * c.alpha_be2(), &j.d2f_gg),
            (c.beta_ae_be(), &j.d2g_fg),
        ])
    }

    pub fn f4(&self, j: &Jet) -> State {
        let c = &self.contractions;
        combo(&[
            (c.beta_bbbe(), &j.dg3_g),
            (0.5 * c.beta_b_be2(), &j.dg_d2g_gg),
            (c.beta_be_bbe(), &j.d2g_g_dgg),
            (c.beta_be3() / 6.0, &j.d3g_ggg),
        ])
    }

    /// `G1 = ∇f̄ g − ∇g f̄ − ½D²g(g,g)`, evaluated through f̄ as defined.
    pub fn g1(&self, y: &State) -> State {
        let p = &self.problem;
        let g = (p.g)(y);
        let mut out = p.dfbar(y, &g);
        out -= &(p.dg)(y, &p.fbar(y));
        out.axpy(-0.5, &(p.d2g)(y, &g, &g));
        out
    }

    /// `G2 = 6F2 − (∇g)²g − D²g(g,g)`.
    pub fn g2(&self, j: &Jet) -> State {
        let mut out = self.f2(j) * 6.0;
        out -= &j.dg_dg_g;
        out -= &j.d2g_gg;
        out
    }

    pub fn h1(&self, j: &Jet) -> State {
        let r = self.contractions.residuals();
        combo(&[
            (r[0], &j.df_f),
            (r[1], &j.df_dg_g),
            (0.5 * r[2], &j.d2f_gg),
            (r[3], &j.dg_df_g),
            (1.5 * r[4], &j.dg_d2g_gg),
            (r[5], &j.dg_dg_f),
            (3.0 * r[6], &j.dg3_g),
            (r[7], &j.d2g_fg),
            (3.0 * r[8], &j.d2g_g_dgg),
            (0.5 * r[9], &j.d3g_ggg),
        ])
    }

    pub fn h2(&self, j: &Jet) -> State {
        let r = self.contractions.residuals();
        combo(&[
            (r[10], &j.df_g),
            (r[11], &j.dg_f),
            (3.0 * r[12], &j.dg_dg_g),
            (1.5 * r[13], &j.d2g_gg),
        ])
    }

    pub fn h3(&self, j: &Jet) -> State {
        let r = self.contractions.residuals();
        combo(&[(6.0 * r[12], &j.dg_dg_g), (3.0 * r[13], &j.d2g_gg)])
    }

    /// `∇f g − ∇g f`, the forcing of the unified limit equation.
    pub fn unified(&self, j: &Jet) -> State {
        &j.df_g - &j.dg_f
    }

    pub fn evaluate(&self, y: &State) -> CoefficientValues {
        let j = self.jet(y);
        CoefficientValues {
            fbar: self.fbar(y),
            f1: self.f1(&j),
            f2: self.f2(&j),
            f3: self.f3(&j),
            f4: self.f4(&j),
            g1: self.g1(y),
            g2: self.g2(&j),
            h1: self.h1(&j),
            h2: self.h2(&j),
            h3: self.h3(&j),
            unified: self.unified(&j),
        }
    }
}

/// Outcome of a derivative check for one callback.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeCheck {
    pub callback: &'static str,
    pub approximated: bool,
    pub max_rel_error: f64,
    /// `|supplied| / |finite difference|` at the worst sample.
    pub ratio: f64,
    pub worst_state: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub problem: String,
    pub checks: Vec<DerivativeCheck>,
}

impl ValidationReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }
}

/// Sampling settings for [`validate_derivatives`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationSettings {
    pub n_samples: usize,
    pub fd_step: f64,
    pub tol: f64,
    /// Half-width of the sampling box around `x0`.
    pub radius: f64,
    pub seed: u64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings {
            n_samples: 64,
            fd_step: 1e-5,
            tol: 1e-6,
            radius: 2.0,
            seed: 0x5eed,
        }
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    x0: State,
    radius: f64,
}

impl Sampler {
    fn state(&mut self) -> State {
        let r = self.radius;
        let x0 = self.x0.clone();
        x0.iter().map(|c| c + self.rng.random_range(-r..=r)).collect()
    }

    fn direction(&mut self) -> State {
        (0..self.x0.dim()).map(|_| self.rng.random_range(-1.0..=1.0)).collect()
    }
}

struct Tracker {
    check: DerivativeCheck,
}

impl Tracker {
    fn new(callback: &'static str, approximated: bool) -> Self {
        Tracker {
            check: DerivativeCheck {
                callback,
                approximated,
                max_rel_error: 0.0,
                ratio: 1.0,
                worst_state: Vec::new(),
            },
        }
    }

    fn record(&mut self, x: &State, supplied: &State, fd: &State) {
        let err = (supplied - fd).norm_max() / fd.norm_max().max(1.0);
        if err >= self.check.max_rel_error || self.check.worst_state.is_empty() {
            self.check.max_rel_error = err;
            self.check.worst_state = x.as_slice().to_vec();
            let denom = fd.norm();
            self.check.ratio = if denom > 0.0 { supplied.norm() / denom } else { f64::NAN };
        }
    }

    fn finish(self, tol: f64) -> Result<DerivativeCheck, ProblemError> {
        let c = self.check;
        if !(c.max_rel_error <= tol) {
            return Err(ProblemError::DerivativeMismatch {
                callback: c.callback,
                state: c.worst_state,
                rel_error: c.max_rel_error,
                ratio: c.ratio,
            });
        }
        Ok(c)
    }
}

fn central(eps: f64, x: &State, dir: &State, eval: impl Fn(&State) -> State) -> State {
    let mut xp = x.clone();
    xp.axpy(eps, dir);
    let mut xm = x.clone();
    xm.axpy(-eps, dir);
    (eval(&xp) - eval(&xm)) * (0.5 / eps)
}

fn check_first(
    name: &'static str,
    approx: bool,
    s: &mut Sampler,
    cfg: &ValidationSettings,
    base: &Field,
    d: &Deriv1,
) -> Result<DerivativeCheck, ProblemError> {
    let mut t = Tracker::new(name, approx);
    for _ in 0..cfg.n_samples {
        let (x, v) = (s.state(), s.direction());
        let fd = central(cfg.fd_step, &x, &v, |z| base(z));
        t.record(&x, &d(&x, &v), &fd);
    }
    t.finish(cfg.tol)
}

fn check_second(
    name: &'static str,
    approx: bool,
    s: &mut Sampler,
    cfg: &ValidationSettings,
    base: &Deriv1,
    d: &Deriv2,
) -> Result<DerivativeCheck, ProblemError> {
    let mut t = Tracker::new(name, approx);
    for _ in 0..cfg.n_samples {
        let (x, v, w) = (s.state(), s.direction(), s.direction());
        let fd = central(cfg.fd_step, &x, &w, |z| base(z, &v));
        t.record(&x, &d(&x, &v, &w), &fd);
    }
    t.finish(cfg.tol)
}

fn check_third(
    name: &'static str,
    approx: bool,
    s: &mut Sampler,
    cfg: &ValidationSettings,
    base: &Deriv2,
    d: &Deriv3,
) -> Result<DerivativeCheck, ProblemError> {
    let mut t = Tracker::new(name, approx);
    for _ in 0..cfg.n_samples {
        let (x, u, v, w) = (s.state(), s.direction(), s.direction(), s.direction());
        let fd = central(cfg.fd_step, &x, &w, |z| base(z, &u, &v));
        t.record(&x, &d(&x, &u, &v, &w), &fd);
    }
    t.finish(cfg.tol)
}

/// Compares every directional derivative with a central difference of the next
/// lower callback at random states in a box around `x0`.
pub fn validate_derivatives(
    problem: &Problem,
    cfg: &ValidationSettings,
) -> Result<ValidationReport, ProblemError> {
    if cfg.n_samples == 0 || !(cfg.fd_step > 0.0) {
        return Err(ProblemError::InvalidArgument(
            "n_samples must be positive and fd_step > 0".into(),
        ));
    }
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        x0: problem.x0().clone(),
        radius: cfg.radius,
    };
    let checks = match problem {
        Problem::Multiplicative(p) => {
            let ap = |n: &str| p.approximated.contains(&n);
            vec![
                check_first("df", ap("df"), &mut s, cfg, &p.f, &p.df)?,
                check_first("dg", ap("dg"), &mut s, cfg, &p.g, &p.dg)?,
                check_second("d2f", ap("d2f"), &mut s, cfg, &p.df, &p.d2f)?,
                check_second("d2g", ap("d2g"), &mut s, cfg, &p.dg, &p.d2g)?,
                check_third("d3g", ap("d3g"), &mut s, cfg, &p.d2g, &p.d3g)?,
            ]
        }
        Problem::Additive(p) => {
            let ap = |n: &str| p.approximated.contains(&n);
            vec![
                check_first("df", ap("df"), &mut s, cfg, &p.f, &p.df)?,
                check_second("d2f", ap("d2f"), &mut s, cfg, &p.df, &p.d2f)?,
            ]
        }
    };
    Ok(ValidationReport {
        problem: problem.name().to_string(),
        checks,
    })
}

fn scalar1(h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> impl Fn(&State) -> State + Send + Sync {
    move |x| State::scalar(h(x[0]))
}

fn scalar2(
    h: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> impl Fn(&State, &State) -> State + Send + Sync {
    move |x, v| State::scalar(h(x[0]) * v[0])
}

fn scalar3(
    h: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> impl Fn(&State, &State, &State) -> State + Send + Sync {
    move |x, v, w| State::scalar(h(x[0]) * v[0] * w[0])
}

fn scalar4(
    h: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> impl Fn(&State, &State, &State, &State) -> State + Send + Sync {
    move |x, u, v, w| State::scalar(h(x[0]) * u[0] * v[0] * w[0])
}

/// `dX = (−10X + sin X) dt + σ1 dW1`.
pub fn example61(x0: f64, sigma1: f64) -> AdditiveProblem {
    AdditiveProblem::new(
        "example61",
        State::scalar(x0),
        vec![State::scalar(sigma1)],
        scalar1(|x| -10.0 * x + x.sin()),
        Some(Arc::new(scalar2(|x| -10.0 + x.cos()))),
        Some(Arc::new(scalar3(|x| -x.sin()))),
    )
    .expect("valid builtin")
}

/// `dX = (X + ln(1 + X²)) dt + σ1 dW1 + σ2 dW2`.
pub fn example62(x0: f64, sigma1: f64, sigma2: f64) -> AdditiveProblem {
    AdditiveProblem::new(
        "example62",
        State::scalar(x0),
        vec![State::scalar(sigma1), State::scalar(sigma2)],
        scalar1(|x| x + (1.0 + x * x).ln()),
        Some(Arc::new(scalar2(|x| 1.0 + 2.0 * x / (1.0 + x * x)))),
        Some(Arc::new(scalar3(|x| {
            let q = 1.0 + x * x;
            2.0 * (1.0 - x * x) / (q * q)
        }))),
    )
    .expect("valid builtin")
}

fn log1sq(x: f64) -> f64 {
    (1.0 + x * x).ln()
}
fn log1sq_d1(x: f64) -> f64 {
    2.0 * x / (1.0 + x * x)
}
fn log1sq_d2(x: f64) -> f64 {
    let q = 1.0 + x * x;
    2.0 * (1.0 - x * x) / (q * q)
}
fn log1sq_d3(x: f64) -> f64 {
    let q = 1.0 + x * x;
    4.0 * x * (x * x - 3.0) / (q * q * q)
}

/// Stratonovich `dY = ln(1 + Y²) dt + ln(1 + Y²) ∘ dW`.
pub fn mul_log(x0: f64) -> SdeProblem {
    SdeProblem::builder("mul_log", State::scalar(x0), scalar1(log1sq), scalar1(log1sq))
        .df(scalar2(log1sq_d1))
        .dg(scalar2(log1sq_d1))
        .d2f(scalar3(log1sq_d2))
        .d2g(scalar3(log1sq_d2))
        .d3g(scalar4(log1sq_d3))
        .build()
}

/// `dX = aX dt + σ dW` with scalar state and one noise column per entry of `sigma`.
pub fn linear_additive(a: f64, sigma: &[f64], x0: f64) -> AdditiveProblem {
    AdditiveProblem::new(
        "linear_additive",
        State::scalar(x0),
        sigma.iter().map(|&s| State::scalar(s)).collect(),
        move |x| x * a,
        Some(Arc::new(move |_, v| v * a)),
        Some(Arc::new(|x, _, _| State::zeros(x.dim()))),
    )
    .expect("valid builtin")
}

/// Stratonovich `dY = aY dt + bY ∘ dW`.
pub fn linear_multiplicative(a: f64, b: f64, x0: f64) -> SdeProblem {
    let zero2 = |x: &State, _: &State, _: &State| State::zeros(x.dim());
    SdeProblem::builder("linear_mul", State::scalar(x0), move |x| x * a, move |x| x * b)
        .df(move |_, v| v * a)
        .dg(move |_, v| v * b)
        .d2f(zero2)
        .d2g(zero2)
        .d3g(|x, _, _, _| State::zeros(x.dim()))
        .build()
}

pub const BUILTIN_PROBLEMS: [&str; 5] = [
    "example61",
    "example62",
    "mul_log",
    "linear_additive",
    "linear_mul",
];

/// Looks up a builtin problem; `params` overrides the defaults shown in
/// [`builtin_defaults`].
pub fn builtin_problem(name: &str, params: &BTreeMap<String, f64>) -> Result<Problem, ProblemError> {
    let defaults = builtin_defaults(name)?;
    for key in params.keys() {
        if !defaults.iter().any(|(k, _)| k == key) {
            return Err(ProblemError::UnknownParameter {
                problem: name.to_string(),
                param: key.clone(),
            });
        }
    }
    let p = |key: &str| {
        params
            .get(key)
            .copied()
            .or_else(|| defaults.iter().find(|(k, _)| *k == key).map(|(_, v)| *v))
            .expect("key listed in defaults")
    };
    Ok(match name {
        "example61" => Problem::Additive(example61(p("x0"), p("sigma1"))),
        "example62" => Problem::Additive(example62(p("x0"), p("sigma1"), p("sigma2"))),
        "mul_log" => Problem::Multiplicative(mul_log(p("x0"))),
        "linear_additive" => Problem::Additive(linear_additive(p("a"), &[p("sigma1")], p("x0"))),
        "linear_mul" => Problem::Multiplicative(linear_multiplicative(p("a"), p("b"), p("x0"))),
        _ => unreachable!("checked by builtin_defaults"),
    })
}

/// Parameter names and default values of a builtin problem.
pub fn builtin_defaults(name: &str) -> Result<Vec<(&'static str, f64)>, ProblemError> {
    Ok(match name {
        "example61" => vec![("x0", 1.0), ("sigma1", 1.0)],
        "example62" => vec![("x0", 1.0), ("sigma1", 1.0), ("sigma2", 1.0)],
        "mul_log" => vec![("x0", 1.0)],
        "linear_additive" => vec![("a", -1.0), ("sigma1", 1.0), ("x0", 1.0)],
        "linear_mul" => vec![("a", -1.0), ("b", 0.5), ("x0", 1.0)],
        _ => return Err(ProblemError::UnknownName(name.to_string())),
    })
}

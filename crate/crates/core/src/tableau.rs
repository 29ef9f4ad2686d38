//! Butcher tableaux for the multiplicative-noise scheme `(A, B, α, β)` and the
//! additive-noise scheme `(Ā, b̄, ᾱ)`, together with their order conditions.
//!
//! Condition checks run in exact rational arithmetic. A coefficient may also be
//! an ordinary float (for example θ = √2/2); anything it touches is then
//! computed in floating point and the resulting report is flagged inexact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Deserialize;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TableauError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid coefficient `{0}`")]
    BadCoefficient(String),
    #[error("unknown tableau `{0}`")]
    UnknownName(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A tableau coefficient: an exact rational, or a float when no exact value exists.
#[derive(Clone, Debug, PartialEq)]
pub enum Coef {
    Exact(BigRational),
    Approx(f64),
}

impl Coef {
    pub fn ratio(num: i64, den: i64) -> Coef {
        Coef::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn int(v: i64) -> Coef {
        Coef::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn zero() -> Coef {
        Coef::int(0)
    }

    pub fn one() -> Coef {
        Coef::int(1)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coef::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coef::Exact(r) => r.is_zero(),
            Coef::Approx(x) => *x == 0.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Coef::Exact(r) => r.is_negative(),
            Coef::Approx(x) => *x < 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coef::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Coef::Approx(x) => *x,
        }
    }

    pub fn pow(&self, m: u32) -> Coef {
        (0..m).fold(Coef::one(), |acc, _| &acc * self)
    }

    /// Numerator and denominator as printed in CSV reports; floats use denominator 1.
    pub fn num_den(&self) -> (String, String) {
        match self {
            Coef::Exact(r) => (r.numer().to_string(), r.denom().to_string()),
            Coef::Approx(x) => (format!("{x:e}"), "1".to_string()),
        }
    }

    fn combine(
        &self,
        rhs: &Coef,
        exact: impl Fn(&BigRational, &BigRational) -> BigRational,
        approx: impl Fn(f64, f64) -> f64,
    ) -> Coef {
        match (self, rhs) {
            (Coef::Exact(a), Coef::Exact(b)) => Coef::Exact(exact(a, b)),
            _ => Coef::Approx(approx(self.to_f64(), rhs.to_f64())),
        }
    }
}

impl fmt::Display for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coef::Exact(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Coef::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Coef::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Coef {
    type Err = TableauError;

    /// `"p/q"` and integers parse exactly; decimals and exponents parse as floats.
    fn from_str(s: &str) -> Result<Coef, TableauError> {
        let t = s.trim();
        let bad = || TableauError::BadCoefficient(s.to_string());
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Coef::Exact(BigRational::new(n, d)));
        }
        if let Ok(n) = t.parse::<BigInt>() {
            return Ok(Coef::Exact(BigRational::from_integer(n)));
        }
        match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Coef::Approx(x)),
            _ => Err(bad()),
        }
    }
}

impl From<f64> for Coef {
    fn from(x: f64) -> Coef {
        Coef::Approx(x)
    }
}

macro_rules! coef_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&Coef> for &Coef {
            type Output = Coef;
            fn $method(self, rhs: &Coef) -> Coef {
                self.combine(rhs, |a, b| a $op b, |a, b| a $op b)
            }
        }
        impl $tr<Coef> for Coef {
            type Output = Coef;
            fn $method(self, rhs: Coef) -> Coef {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Coef> for Coef {
            type Output = Coef;
            fn $method(self, rhs: &Coef) -> Coef {
                (&self).$method(rhs)
            }
        }
    };
}

coef_binop!(Add, add, +);
coef_binop!(Sub, sub, -);
coef_binop!(Mul, mul, *);

impl Neg for &Coef {
    type Output = Coef;
    fn neg(self) -> Coef {
        match self {
            Coef::Exact(r) => Coef::Exact(-r),
            Coef::Approx(x) => Coef::Approx(-x),
        }
    }
}

pub type CoefVec = Vec<Coef>;
pub type CoefMatrix = Vec<Vec<Coef>>;

/// Componentwise product `(a*b)_i = a_i b_i`.
pub fn hadamard(a: &[Coef], b: &[Coef]) -> Result<CoefVec, TableauError> {
    if a.len() != b.len() {
        return Err(TableauError::Dimension(format!(
            "hadamard of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

/// Componentwise power `(a^m)_i = a_i^m`.
pub fn cpow(a: &[Coef], m: u32) -> CoefVec {
    a.iter().map(|x| x.pow(m)).collect()
}

pub fn ones(s: usize) -> CoefVec {
    vec![Coef::one(); s]
}

pub fn dot(a: &[Coef], b: &[Coef]) -> Coef {
    a.iter()
        .zip(b)
        .fold(Coef::zero(), |acc, (x, y)| acc + x * y)
}

pub fn matvec(m: &[Vec<Coef>], v: &[Coef]) -> CoefVec {
    m.iter().map(|row| dot(row, v)).collect()
}

fn check_square(name: &str, m: &[Vec<Coef>], s: usize) -> Result<(), TableauError> {
    if m.len() != s || m.iter().any(|r| r.len() != s) {
        return Err(TableauError::Dimension(format!(
            "{name} must be {s}x{s}"
        )));
    }
    Ok(())
}

fn check_len(name: &str, v: &[Coef], s: usize) -> Result<(), TableauError> {
    if v.len() != s {
        return Err(TableauError::Dimension(format!(
            "{name} has length {} but s0 = {s}",
            v.len()
        )));
    }
    Ok(())
}

/// Coefficients `(A, B, α, β)` of an `s0`-stage SRK scheme for scalar
/// multiplicative noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Tableau {
    name: String,
    a: CoefMatrix,
    b: CoefMatrix,
    alpha: CoefVec,
    beta: CoefVec,
}

impl Tableau {
    pub fn new(
        name: impl Into<String>,
        a: CoefMatrix,
        b: CoefMatrix,
        alpha: CoefVec,
        beta: CoefVec,
    ) -> Result<Self, TableauError> {
        let s = alpha.len();
        if s == 0 {
            return Err(TableauError::Dimension("s0 must be positive".into()));
        }
        check_square("A", &a, s)?;
        check_square("B", &b, s)?;
        check_len("beta", &beta, s)?;
        Ok(Tableau {
            name: name.into(),
            a,
            b,
            alpha,
            beta,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.alpha.len()
    }

    pub fn a(&self) -> &CoefMatrix {
        &self.a
    }

    pub fn b(&self) -> &CoefMatrix {
        &self.b
    }

    pub fn alpha(&self) -> &CoefVec {
        &self.alpha
    }

    pub fn beta(&self) -> &CoefVec {
        &self.beta
    }

    pub fn is_exact(&self) -> bool {
        self.a
            .iter()
            .chain(self.b.iter())
            .flatten()
            .chain(self.alpha.iter())
            .chain(self.beta.iter())
            .all(Coef::is_exact)
    }

    /// Relabels stages: stage `i` of the result is stage `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Tableau {
        let pm = |m: &CoefMatrix| -> CoefMatrix {
            perm.iter()
                .map(|&i| perm.iter().map(|&j| m[i][j].clone()).collect())
                .collect()
        };
        let pv = |v: &CoefVec| -> CoefVec { perm.iter().map(|&i| v[i].clone()).collect() };
        Tableau {
            name: self.name.clone(),
            a: pm(&self.a),
            b: pm(&self.b),
            alpha: pv(&self.alpha),
            beta: pv(&self.beta),
        }
    }

    fn consistency(&self) -> Vec<Residual> {
        let e = ones(self.stages());
        let be = matvec(&self.b, &e);
        vec![
            Residual::new("alpha'e-1", dot(&self.alpha, &e) - Coef::one()),
            Residual::new("beta'e-1", dot(&self.beta, &e) - Coef::one()),
            Residual::new("beta'(Be)-1/2", dot(&self.beta, &be) - Coef::ratio(1, 2)),
        ]
    }

    /// The three strong-order-one conditions `α⊤e = β⊤e = 1`, `β⊤(Be) = 1/2`.
    pub fn check_strong1(&self) -> ConditionReport {
        ConditionReport {
            tableau: self.name.clone(),
            kind: TableauKind::Multiplicative,
            consistency: self.consistency(),
            weak2: Vec::new(),
            eta: None,
        }
    }

    /// The fourteen tableau contractions entering F1–F4 and H1–H3, in the order
    /// of [`WEAK2_TERMS`].
    pub fn contraction_values(&self) -> [Coef; 14] {
        let s = self.stages();
        let e = ones(s);
        let ae = matvec(&self.a, &e);
        let be = matvec(&self.b, &e);
        let bbe = matvec(&self.b, &be);
        let be2 = cpow(&be, 2);
        let (al, bt) = (&self.alpha, &self.beta);
        [
            dot(al, &ae),
            dot(al, &bbe),
            dot(al, &be2),
            dot(bt, &matvec(&self.a, &be)),
            dot(bt, &matvec(&self.b, &be2)),
            dot(bt, &matvec(&self.b, &ae)),
            dot(bt, &matvec(&self.b, &bbe)),
            dot(bt, &hadamard(&ae, &be).expect("equal lengths")),
            dot(bt, &hadamard(&be, &bbe).expect("equal lengths")),
            dot(bt, &cpow(&be, 3)),
            dot(al, &be),
            dot(bt, &ae),
            dot(bt, &bbe),
            dot(bt, &be2),
        ]
    }

    /// Growth parameter η1: the sum of squares of the fourteen weak-order-two
    /// residuals, each reported individually.
    pub fn eta1(&self) -> ConditionReport {
        let values = self.contraction_values();
        let weak2: Vec<Residual> = WEAK2_TERMS
            .iter()
            .zip(values)
            .map(|(&(name, num, den), v)| Residual::new(name, v - Coef::ratio(num, den)))
            .collect();
        let eta = sum_of_squares(&weak2);
        ConditionReport {
            tableau: self.name.clone(),
            kind: TableauKind::Multiplicative,
            consistency: self.consistency(),
            weak2,
            eta: Some(eta),
        }
    }

    pub fn contractions(&self) -> Contractions {
        Contractions(self.contraction_values().map(|c| c.to_f64()))
    }

    pub fn stage_coefficients(&self) -> StageCoefficients {
        let flat = |m: &CoefMatrix| m.iter().flatten().map(Coef::to_f64).collect();
        let vec = |v: &CoefVec| v.iter().map(Coef::to_f64).collect();
        StageCoefficients {
            stages: self.stages(),
            a: flat(&self.a),
            b: flat(&self.b),
            alpha: vec(&self.alpha),
            beta: vec(&self.beta),
        }
    }
}

/// Weak-order-two terms: stable key and the value the exact solution's
/// expansion requires (`num/den`). The residual is `contraction - num/den`.
pub const WEAK2_TERMS: [(&str, i64, i64); 14] = [
    ("alpha'(Ae)-1/2", 1, 2),
    ("alpha'(B(Be))-1/4", 1, 4),
    ("alpha'(Be)^2-1/2", 1, 2),
    ("beta'(A(Be))", 0, 1),
    ("beta'(B(Be)^2)-1/12", 1, 12),
    ("beta'(B(Ae))-1/4", 1, 4),
    ("beta'(B(B(Be)))-1/24", 1, 24),
    ("beta'((Ae)*(Be))-1/4", 1, 4),
    ("beta'((Be)*(B(Be)))-1/8", 1, 8),
    ("beta'(Be)^3-1/4", 1, 4),
    ("alpha'(Be)-1/2", 1, 2),
    ("beta'(Ae)-1/2", 1, 2),
    ("beta'(B(Be))-1/6", 1, 6),
    ("beta'(Be)^2-1/3", 1, 3),
];

/// Float values of the fourteen contractions of a multiplicative tableau,
/// indexed like [`WEAK2_TERMS`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contractions(pub [f64; 14]);

impl Contractions {
    /// Contractions whose residual vector is exactly `residuals`.
    pub fn from_residuals(residuals: [f64; 14]) -> Self {
        let mut c = residuals;
        for (v, &(_, num, den)) in c.iter_mut().zip(WEAK2_TERMS.iter()) {
            *v += num as f64 / den as f64;
        }
        Contractions(c)
    }

    pub fn residuals(&self) -> [f64; 14] {
        let mut r = self.0;
        for (v, &(_, num, den)) in r.iter_mut().zip(WEAK2_TERMS.iter()) {
            *v -= num as f64 / den as f64;
        }
        r
    }

    pub fn alpha_ae(&self) -> f64 {
        self.0[0]
    }
    pub fn alpha_bbe(&self) -> f64 {
        self.0[1]
    }
    pub fn alpha_be2(&self) -> f64 {
        self.0[2]
    }
    pub fn beta_abe(&self) -> f64 {
        self.0[3]
    }
    pub fn beta_b_be2(&self) -> f64 {
        self.0[4]
    }
    pub fn beta_bae(&self) -> f64 {
        self.0[5]
    }
    pub fn beta_bbbe(&self) -> f64 {
        self.0[6]
    }
    pub fn beta_ae_be(&self) -> f64 {
        self.0[7]
    }
    pub fn beta_be_bbe(&self) -> f64 {
        self.0[8]
    }
    pub fn beta_be3(&self) -> f64 {
        self.0[9]
    }
    pub fn alpha_be(&self) -> f64 {
        self.0[10]
    }
    pub fn beta_ae(&self) -> f64 {
        self.0[11]
    }
    pub fn beta_bbe(&self) -> f64 {
        self.0[12]
    }
    pub fn beta_be2(&self) -> f64 {
        self.0[13]
    }
}

/// Row-major float copy of a multiplicative tableau, used by the steppers.
#[derive(Clone, Debug, PartialEq)]
pub struct StageCoefficients {
    pub stages: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Coefficients `(Ā, b̄, ᾱ)` of an SRK scheme for additive noise.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveTableau {
    name: String,
    abar: CoefMatrix,
    bbar: CoefVec,
    alphabar: CoefVec,
}

impl AdditiveTableau {
    pub fn new(
        name: impl Into<String>,
        abar: CoefMatrix,
        bbar: CoefVec,
        alphabar: CoefVec,
    ) -> Result<Self, TableauError> {
        let s = alphabar.len();
        if s == 0 {
            return Err(TableauError::Dimension("s0 must be positive".into()));
        }
        check_square("Abar", &abar, s)?;
        check_len("bbar", &bbar, s)?;
        Ok(AdditiveTableau {
            name: name.into(),
            abar,
            bbar,
            alphabar,
        })
    }

    /// One-stage θ-method: `Ā = [θ]`, `b̄ = (θ)`, `ᾱ = (1)`.
    pub fn theta(theta: Coef) -> Self {
        AdditiveTableau {
            name: format!("theta:{theta}"),
            abar: vec![vec![theta.clone()]],
            bbar: vec![theta],
            alphabar: vec![Coef::one()],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.alphabar.len()
    }

    pub fn abar(&self) -> &CoefMatrix {
        &self.abar
    }

    pub fn bbar(&self) -> &CoefVec {
        &self.bbar
    }

    pub fn alphabar(&self) -> &CoefVec {
        &self.alphabar
    }

    pub fn is_exact(&self) -> bool {
        self.abar
            .iter()
            .flatten()
            .chain(self.bbar.iter())
            .chain(self.alphabar.iter())
            .all(Coef::is_exact)
    }

    /// `(ᾱ⊤(Āe), ᾱ⊤b̄², ᾱ⊤b̄)`.
    pub fn contraction_values(&self) -> [Coef; 3] {
        let e = ones(self.stages());
        [
            dot(&self.alphabar, &matvec(&self.abar, &e)),
            dot(&self.alphabar, &cpow(&self.bbar, 2)),
            dot(&self.alphabar, &self.bbar),
        ]
    }

    /// Growth parameter η2 with its three residuals and `ᾱ⊤e − 1`.
    pub fn eta2(&self) -> ConditionReport {
        let e = ones(self.stages());
        let weak2: Vec<Residual> = ADDITIVE_WEAK2_TERMS
            .iter()
            .zip(self.contraction_values())
            .map(|(&name, v)| Residual::new(name, v - Coef::ratio(1, 2)))
            .collect();
        let eta = sum_of_squares(&weak2);
        ConditionReport {
            tableau: self.name.clone(),
            kind: TableauKind::Additive,
            consistency: vec![Residual::new(
                "alphabar'e-1",
                dot(&self.alphabar, &e) - Coef::one(),
            )],
            weak2,
            eta: Some(eta),
        }
    }

    pub fn residuals(&self) -> AdditiveResiduals {
        let [c1, c2, c3] = self.contraction_values().map(|c| c.to_f64() - 0.5);
        AdditiveResiduals {
            drift: c1,
            curvature: c2,
            noise: c3,
        }
    }

    pub fn stage_coefficients(&self) -> AdditiveStageCoefficients {
        AdditiveStageCoefficients {
            stages: self.stages(),
            a: self.abar.iter().flatten().map(Coef::to_f64).collect(),
            b: self.bbar.iter().map(Coef::to_f64).collect(),
            alpha: self.alphabar.iter().map(Coef::to_f64).collect(),
        }
    }
}

pub const ADDITIVE_WEAK2_TERMS: [&str; 3] = [
    "alphabar'(Abar e)-1/2",
    "alphabar'bbar^2-1/2",
    "alphabar'bbar-1/2",
];

/// Float residuals `(ᾱ⊤(Āe) − ½, ᾱ⊤b̄² − ½, ᾱ⊤b̄ − ½)` of an additive tableau.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AdditiveResiduals {
    pub drift: f64,
    pub curvature: f64,
    pub noise: f64,
}

impl AdditiveResiduals {
    pub fn scaled(&self, k: f64) -> Self {
        AdditiveResiduals {
            drift: k * self.drift,
            curvature: k * self.curvature,
            noise: k * self.noise,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.drift == 0.0 && self.curvature == 0.0 && self.noise == 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveStageCoefficients {
    pub stages: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl AdditiveStageCoefficients {
    /// `ᾱ⊤b̄`, `ᾱ⊤b̄²`, `ᾱ⊤(Āe)` as used by the explicit companion step.
    pub fn contractions(&self) -> (f64, f64, f64) {
        let s = self.stages;
        let ab: f64 = (0..s).map(|i| self.alpha[i] * self.b[i]).sum();
        let ab2: f64 = (0..s).map(|i| self.alpha[i] * self.b[i] * self.b[i]).sum();
        let aae: f64 = (0..s)
            .map(|i| self.alpha[i] * (0..s).map(|j| self.a[i * s + j]).sum::<f64>())
            .sum();
        (ab, ab2, aae)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableauKind {
    Multiplicative,
    Additive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub name: &'static str,
    pub value: Coef,
}

impl Residual {
    fn new(name: &'static str, value: Coef) -> Self {
        Residual { name, value }
    }
}

fn sum_of_squares(rs: &[Residual]) -> Coef {
    rs.iter()
        .fold(Coef::zero(), |acc, r| acc + &r.value * &r.value)
}

/// Residuals of the consistency and weak-order-two conditions of a tableau.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub tableau: String,
    pub kind: TableauKind,
    pub consistency: Vec<Residual>,
    pub weak2: Vec<Residual>,
    /// η1 (multiplicative) or η2 (additive); absent for a strong-order-only check.
    pub eta: Option<Coef>,
}

impl ConditionReport {
    pub fn eta_name(&self) -> &'static str {
        match self.kind {
            TableauKind::Multiplicative => "eta1",
            TableauKind::Additive => "eta2",
        }
    }

    pub fn is_exact(&self) -> bool {
        self.consistency
            .iter()
            .chain(self.weak2.iter())
            .all(|r| r.value.is_exact())
            && self.eta.as_ref().is_none_or(Coef::is_exact)
    }

    /// Consistency conditions hold (strong order one). Exact zero required.
    pub fn strong_order_one(&self) -> bool {
        self.consistency.iter().all(|r| r.value.is_zero())
    }

    /// η = 0 (weak order two under the consistency conditions).
    pub fn weak_order_two(&self) -> bool {
        self.eta.as_ref().is_some_and(Coef::is_zero)
    }

    pub fn get(&self, name: &str) -> Option<&Coef> {
        self.consistency
            .iter()
            .chain(self.weak2.iter())
            .find(|r| r.name == name)
            .map(|r| &r.value)
    }

    /// Rows `condition,residual_num,residual_den`, header included.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,residual_num,residual_den\n");
        let eta_row = self.eta.as_ref().map(|e| (self.eta_name(), e));
        for (name, value) in self
            .consistency
            .iter()
            .chain(self.weak2.iter())
            .map(|r| (r.name, &r.value))
            .chain(eta_row)
        {
            let (n, d) = value.num_den();
            out.push_str(&format!("{name},{n},{d}\n"));
        }
        out
    }

    /// JSON-compatible map from condition name to its value.
    pub fn to_json(&self) -> serde_json::Value {
        let mut residuals = serde_json::Map::new();
        for r in self.consistency.iter().chain(self.weak2.iter()) {
            residuals.insert(r.name.to_string(), r.value.to_string().into());
        }
        let mut root = serde_json::Map::new();
        root.insert("tableau".into(), self.tableau.clone().into());
        root.insert("exact".into(), self.is_exact().into());
        root.insert("residuals".into(), residuals.into());
        if let Some(eta) = &self.eta {
            root.insert(self.eta_name().into(), eta.to_string().into());
            root.insert(format!("{}_f64", self.eta_name()), eta.to_f64().into());
        }
        serde_json::Value::Object(root)
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tableau {}{}", self.tableau, if self.is_exact() { "" } else { " (inexact)" })?;
        for r in self.consistency.iter().chain(self.weak2.iter()) {
            writeln!(f, "  {:<28} {}", r.name, r.value)?;
        }
        if let Some(eta) = &self.eta {
            writeln!(f, "  {:<28} {} (~{:.6})", self.eta_name(), eta, eta.to_f64())?;
        }
        Ok(())
    }
}

/// A named tableau from the built-in catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinTableau {
    Multiplicative(Tableau),
    Additive(AdditiveTableau),
}

fn c(s: &str) -> Coef {
    s.parse().expect("valid literal")
}

fn row(xs: &[&str]) -> CoefVec {
    xs.iter().map(|x| c(x)).collect()
}

/// Parses `theta:<v>` or `theta(<v>)`.
fn parse_theta(name: &str) -> Option<Result<Coef, TableauError>> {
    let arg = name
        .strip_prefix("theta:")
        .or_else(|| name.strip_prefix("theta(").and_then(|s| s.strip_suffix(')')))?;
    Some(arg.parse())
}

/// Additive catalog: `trapezoid`, `midpoint` (θ = 1/2), `implicit-euler`
/// (θ = 1), `sqrt2-method` (θ = √2/2, inexact) and `theta:<θ>`.
pub fn additive_builtin(name: &str) -> Result<AdditiveTableau, TableauError> {
    if let Some(theta) = parse_theta(name) {
        return Ok(AdditiveTableau::theta(theta?));
    }
    let tab = match name {
        "trapezoid" => AdditiveTableau::new(
            "trapezoid",
            vec![row(&["0", "0"]), row(&["1/2", "1/2"])],
            row(&["0", "1"]),
            row(&["1/2", "1/2"]),
        )?,
        "midpoint" => AdditiveTableau {
            name: "midpoint".into(),
            ..AdditiveTableau::theta(Coef::ratio(1, 2))
        },
        "implicit-euler" => AdditiveTableau {
            name: "implicit-euler".into(),
            ..AdditiveTableau::theta(Coef::one())
        },
        "sqrt2-method" => AdditiveTableau {
            name: "sqrt2-method".into(),
            ..AdditiveTableau::theta(Coef::Approx(std::f64::consts::FRAC_1_SQRT_2))
        },
        _ => return Err(TableauError::UnknownName(name.to_string())),
    };
    Ok(tab)
}

/// Multiplicative catalog: `midpoint` (implicit midpoint, `A = B = [1/2]`,
/// `α = β = [1]`) and `trapezoid`.
pub fn multiplicative_builtin(name: &str) -> Result<Tableau, TableauError> {
    match name {
        "midpoint" | "implicit-midpoint" => Tableau::new(
            "midpoint",
            vec![row(&["1/2"])],
            vec![row(&["1/2"])],
            row(&["1"]),
            row(&["1"]),
        ),
        "trapezoid" => Tableau::new(
            "trapezoid",
            vec![row(&["0", "0"]), row(&["1/2", "1/2"])],
            vec![row(&["0", "0"]), row(&["1/2", "1/2"])],
            row(&["1/2", "1/2"]),
            row(&["1/2", "1/2"]),
        ),
        _ => Err(TableauError::UnknownName(name.to_string())),
    }
}

/// Looks a name up in the additive catalog when `additive`, else in the
/// multiplicative one.
pub fn builtin(name: &str, additive: bool) -> Result<BuiltinTableau, TableauError> {
    if additive {
        additive_builtin(name).map(BuiltinTableau::Additive)
    } else {
        multiplicative_builtin(name).map(BuiltinTableau::Multiplicative)
    }
}

pub const ADDITIVE_BUILTIN_NAMES: [&str; 4] = ["trapezoid", "midpoint", "sqrt2-method", "implicit-euler"];
pub const MULTIPLICATIVE_BUILTIN_NAMES: [&str; 2] = ["midpoint", "trapezoid"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableauFile {
    name: Option<String>,
    s0: toml::Spanned<i64>,
    #[serde(rename = "A")]
    a: Option<toml::Spanned<toml::Value>>,
    #[serde(rename = "B")]
    b: Option<toml::Spanned<toml::Value>>,
    alpha: Option<toml::Spanned<toml::Value>>,
    beta: Option<toml::Spanned<toml::Value>>,
    #[serde(rename = "Abar")]
    abar: Option<toml::Spanned<toml::Value>>,
    bbar: Option<toml::Spanned<toml::Value>>,
    alphabar: Option<toml::Spanned<toml::Value>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct FieldReader<'a> {
    text: &'a str,
}

impl FieldReader<'_> {
    fn err(&self, span: std::ops::Range<usize>, message: String) -> TableauError {
        TableauError::Parse {
            line: line_of(self.text, span.start),
            message,
        }
    }

    fn coef(&self, v: &toml::Value, span: &std::ops::Range<usize>, key: &str) -> Result<Coef, TableauError> {
        let parsed = match v {
            toml::Value::String(s) => s.parse(),
            toml::Value::Integer(i) => Ok(Coef::int(*i)),
            toml::Value::Float(x) => Ok(Coef::Approx(*x)),
            other => Err(TableauError::BadCoefficient(other.to_string())),
        };
        parsed.map_err(|e| self.err(span.clone(), format!("{key}: {e}")))
    }

    fn vector(
        &self,
        field: &Option<toml::Spanned<toml::Value>>,
        key: &str,
        s: usize,
        line_hint: usize,
    ) -> Result<CoefVec, TableauError> {
        let field = field.as_ref().ok_or(TableauError::Parse {
            line: line_hint,
            message: format!("missing key `{key}`"),
        })?;
        let span = field.span();
        let items = field
            .get_ref()
            .as_array()
            .ok_or_else(|| self.err(span.clone(), format!("{key} must be an array")))?;
        if items.len() != s {
            return Err(self.err(span, format!("{key} has {} entries, expected {s}", items.len())));
        }
        items.iter().map(|v| self.coef(v, &span, key)).collect()
    }

    /// Accepts nested rows or a flat row-major list.
    fn matrix(
        &self,
        field: &Option<toml::Spanned<toml::Value>>,
        key: &str,
        s: usize,
        line_hint: usize,
    ) -> Result<CoefMatrix, TableauError> {
        let field = field.as_ref().ok_or(TableauError::Parse {
            line: line_hint,
            message: format!("missing key `{key}`"),
        })?;
        let span = field.span();
        let items = field
            .get_ref()
            .as_array()
            .ok_or_else(|| self.err(span.clone(), format!("{key} must be an array")))?;
        let nested = items.iter().all(|v| v.is_array()) && !items.is_empty();
        let flat: Vec<&toml::Value> = if nested {
            if items.len() != s {
                return Err(self.err(span, format!("{key} has {} rows, expected {s}", items.len())));
            }
            let mut flat = Vec::with_capacity(s * s);
            for r in items {
                let r = r.as_array().expect("checked");
                if r.len() != s {
                    return Err(self.err(span, format!("{key} row has {} entries, expected {s}", r.len())));
                }
                flat.extend(r.iter());
            }
            flat
        } else {
            if items.len() != s * s {
                return Err(self.err(span, format!("{key} has {} entries, expected {}", items.len(), s * s)));
            }
            items.iter().collect()
        };
        let coefs: Vec<Coef> = flat
            .into_iter()
            .map(|v| self.coef(v, &span, key))
            .collect::<Result<_, _>>()?;
        Ok(coefs.chunks(s).map(|r| r.to_vec()).collect())
    }
}

/// Parses a tableau from TOML text with keys `s0`, `A`, `B`, `alpha`, `beta`
/// (multiplicative) or `s0`, `Abar`, `bbar`, `alphabar` (additive). Entries are
/// rational strings such as `"1/2"`; matrices are nested rows or row-major lists.
pub fn parse_tableau_file(text: &str) -> Result<BuiltinTableau, TableauError> {
    let file: TableauFile = toml::from_str(text).map_err(|e| TableauError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let reader = FieldReader { text };
    let s0_line = line_of(text, file.s0.span().start);
    let s = *file.s0.get_ref();
    if s <= 0 {
        return Err(TableauError::Parse {
            line: s0_line,
            message: "s0 must be positive".into(),
        });
    }
    let s = s as usize;
    let additive = file.abar.is_some() || file.bbar.is_some() || file.alphabar.is_some();
    let mixed = file.a.is_some() || file.b.is_some() || file.alpha.is_some() || file.beta.is_some();
    if additive && mixed {
        return Err(TableauError::Parse {
            line: s0_line,
            message: "cannot mix (A, B, alpha, beta) with (Abar, bbar, alphabar)".into(),
        });
    }
    let name = file.name.clone().unwrap_or_else(|| "file".to_string());
    if additive {
        let abar = reader.matrix(&file.abar, "Abar", s, s0_line)?;
        let bbar = reader.vector(&file.bbar, "bbar", s, s0_line)?;
        let alphabar = reader.vector(&file.alphabar, "alphabar", s, s0_line)?;
        Ok(BuiltinTableau::Additive(AdditiveTableau::new(name, abar, bbar, alphabar)?))
    } else {
        let a = reader.matrix(&file.a, "A", s, s0_line)?;
        let b = reader.matrix(&file.b, "B", s, s0_line)?;
        let alpha = reader.vector(&file.alpha, "alpha", s, s0_line)?;
        let beta = reader.vector(&file.beta, "beta", s, s0_line)?;
        Ok(BuiltinTableau::Multiplicative(Tableau::new(name, a, b, alpha, beta)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Coef {
        Coef::ratio(n, d)
    }

    #[test]
    fn hadamard_and_cpow() {
        let a = vec![Coef::int(1), Coef::int(2)];
        let b = vec![Coef::int(3), Coef::int(4)];
        assert_eq!(hadamard(&a, &b).unwrap(), vec![Coef::int(3), Coef::int(8)]);
        assert_eq!(cpow(&a, 2), vec![Coef::int(1), Coef::int(4)]);
        let e = ones(3);
        assert_eq!(hadamard(&e, &e).unwrap(), e);
        assert!(matches!(hadamard(&a, &e), Err(TableauError::Dimension(_))));
    }

    #[test]
    fn coefficient_parsing() {
        assert_eq!("1/2".parse::<Coef>().unwrap(), q(1, 2));
        assert_eq!(" -3 / 6 ".parse::<Coef>().unwrap(), q(-1, 2));
        assert_eq!("7".parse::<Coef>().unwrap(), Coef::int(7));
        assert_eq!("0.25".parse::<Coef>().unwrap(), Coef::Approx(0.25));
        assert!("1/0".parse::<Coef>().is_err());
        assert!("x".parse::<Coef>().is_err());
        assert_eq!(q(6, 4).to_string(), "3/2");
    }

    #[test]
    fn mixed_arithmetic_degrades_to_float() {
        let x = q(1, 2) + Coef::Approx(0.25);
        assert_eq!(x, Coef::Approx(0.75));
        assert!((q(1, 3) * q(3, 1)).is_exact());
    }

    #[test]
    fn implicit_midpoint_is_strong_order_one() {
        let tab = multiplicative_builtin("midpoint").unwrap();
        let rep = tab.check_strong1();
        assert!(rep.strong_order_one());
        assert!(rep.consistency.iter().all(|r| r.value.is_zero()));
    }

    #[test]
    fn alpha_change_only_moves_alpha_residual() {
        let tab = Tableau::new(
            "t",
            vec![row(&["0", "0"]), row(&["1/2", "1/2"])],
            vec![row(&["0", "0"]), row(&["1/2", "1/2"])],
            row(&["1", "0"]),
            row(&["1/2", "1/2"]),
        )
        .unwrap();
        let rep = tab.check_strong1();
        assert_eq!(rep.get("alpha'e-1").unwrap(), &Coef::zero());
        assert_eq!(rep.get("beta'e-1").unwrap(), &Coef::zero());
        assert_eq!(rep.get("beta'(Be)-1/2").unwrap(), &Coef::zero());
    }

    #[test]
    fn zero_tableau_residuals() {
        let z = || vec![vec![Coef::zero(); 2]; 2];
        let tab = Tableau::new("zero", z(), z(), vec![Coef::zero(); 2], vec![Coef::zero(); 2]).unwrap();
        let rep = tab.check_strong1();
        let vals: Vec<Coef> = rep.consistency.iter().map(|r| r.value.clone()).collect();
        assert_eq!(vals, vec![Coef::int(-1), Coef::int(-1), q(-1, 2)]);
        assert!(!rep.strong_order_one());
    }

    #[test]
    fn implicit_midpoint_eta1() {
        let rep = multiplicative_builtin("midpoint").unwrap().eta1();
        let expected = [
            q(0, 1),
            q(0, 1),
            q(-1, 4),
            q(1, 4),
            q(1, 24),
            q(0, 1),
            q(1, 12),
            q(0, 1),
            q(0, 1),
            q(-1, 8),
            q(0, 1),
            q(0, 1),
            q(1, 12),
            q(-1, 12),
        ];
        let got: Vec<Coef> = rep.weak2.iter().map(|r| r.value.clone()).collect();
        assert_eq!(got, expected.to_vec());
        assert_eq!(rep.weak2.iter().filter(|r| r.value.is_zero()).count(), 7);
        for key in [
            "alpha'(Ae)-1/2",
            "alpha'(Be)-1/2",
            "beta'(Ae)-1/2",
            "beta'(B(Ae))-1/4",
            "beta'((Ae)*(Be))-1/4",
            "beta'((Be)*(B(Be)))-1/8",
        ] {
            assert!(rep.get(key).unwrap().is_zero(), "{key}");
        }
        assert_eq!(rep.eta, Some(q(47, 288)));
        assert!(!rep.weak_order_two());
    }

    #[test]
    fn scaled_beta_still_reports() {
        let base = multiplicative_builtin("midpoint").unwrap();
        let tab = Tableau::new(
            "2beta",
            base.a().clone(),
            base.b().clone(),
            base.alpha().clone(),
            vec![Coef::int(2)],
        )
        .unwrap();
        let rep = tab.eta1();
        assert_eq!(rep.get("beta'e-1").unwrap(), &Coef::int(1));
        // β⊤(Ae) = 2·1/2 = 1
        assert_eq!(rep.get("beta'(Ae)-1/2").unwrap(), &q(1, 2));
        assert!(rep.eta.unwrap().to_f64() > 0.0);
    }

    #[test]
    fn table2_values_exact() {
        let eta = |n: &str| additive_builtin(n).unwrap().eta2().eta.unwrap();
        assert_eq!(eta("trapezoid"), Coef::zero());
        assert_eq!(eta("midpoint"), q(1, 16));
        assert_eq!(eta("implicit-euler"), q(3, 4));
        assert_eq!(eta("theta:1"), q(3, 4));
        assert_eq!(eta("theta(1/2)"), q(1, 16));
        let irr = eta("theta:0.7071067811865476");
        assert!(!irr.is_exact());
        let expected = (3.0 - 2.0 * 2f64.sqrt()) / 2.0;
        assert!((irr.to_f64() - expected).abs() < 1e-9);
        let rep = additive_builtin("sqrt2-method").unwrap().eta2();
        assert!(!rep.is_exact());
        assert!((rep.eta.unwrap().to_f64() - 0.08579).abs() < 1e-5);
    }

    #[test]
    fn trapezoid_butcher_array() {
        let t = additive_builtin("trapezoid").unwrap();
        assert_eq!(t.abar(), &vec![row(&["0", "0"]), row(&["1/2", "1/2"])]);
        assert_eq!(t.bbar(), &row(&["0", "1"]));
        assert_eq!(t.alphabar(), &row(&["1/2", "1/2"]));
        let rep = t.eta2();
        assert!(rep.strong_order_one());
        assert!(rep.weak_order_two());
    }

    #[test]
    fn unknown_builtin() {
        assert_eq!(
            additive_builtin("rk4"),
            Err(TableauError::UnknownName("rk4".into()))
        );
        assert!(multiplicative_builtin("rk4").is_err());
    }

    #[test]
    fn contractions_roundtrip_residuals() {
        let c = multiplicative_builtin("midpoint").unwrap().contractions();
        let back = Contractions::from_residuals(c.residuals());
        for (a, b) in c.0.iter().zip(back.0.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_and_json_reports() {
        let rep = additive_builtin("midpoint").unwrap().eta2();
        let csv = rep.to_csv();
        assert!(csv.starts_with("condition,residual_num,residual_den\n"));
        assert!(csv.contains("alphabar'bbar^2-1/2,-1,4\n"));
        assert!(csv.ends_with("eta2,1,16\n"));
        let json = rep.to_json();
        assert_eq!(json["eta2"], "1/16");
        assert_eq!(json["exact"], true);
    }

    #[test]
    fn parse_multiplicative_file() {
        let text = "name = \"mid\"\ns0 = 1\nA = [[\"1/2\"]]\nB = [\"1/2\"]\nalpha = [\"1\"]\nbeta = [1]\n";
        let BuiltinTableau::Multiplicative(t) = parse_tableau_file(text).unwrap() else {
            panic!("expected multiplicative");
        };
        assert_eq!(t, Tableau { name: "mid".into(), ..multiplicative_builtin("midpoint").unwrap() });
    }

    #[test]
    fn parse_additive_file() {
        let text = "s0 = 2\nAbar = [\"0\", \"0\", \"1/2\", \"1/2\"]\nbbar = [\"0\", \"1\"]\nalphabar = [\"1/2\", \"1/2\"]\n";
        let BuiltinTableau::Additive(t) = parse_tableau_file(text).unwrap() else {
            panic!("expected additive");
        };
        assert!(t.eta2().weak_order_two());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(parse_tableau_file(""), Err(TableauError::Parse { line: 1, .. })));
        let bad = "s0 = 1\nA = [[\"1/2\"]]\nB = [[\"1/x\"]]\nalpha = [\"1\"]\nbeta = [\"1\"]\n";
        assert!(matches!(parse_tableau_file(bad), Err(TableauError::Parse { line: 3, .. })));
        let short = "s0 = 2\nAbar = [\"0\"]\nbbar = [\"0\", \"1\"]\nalphabar = [\"1/2\", \"1/2\"]\n";
        assert!(matches!(parse_tableau_file(short), Err(TableauError::Parse { line: 2, .. })));
        let syntax = "s0 = 1\nA = [[\n";
        assert!(matches!(parse_tableau_file(syntax), Err(TableauError::Parse { .. })));
    }
}

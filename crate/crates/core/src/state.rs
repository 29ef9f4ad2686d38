//! Small dense state vectors.
//!
//! Every experiment in this crate is low-dimensional, so states live inline
//! (no heap allocation up to four components).

use smallvec::SmallVec;
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

#[derive(Clone, PartialEq, Default)]
pub struct State(SmallVec<[f64; 4]>);

impl State {
    pub fn zeros(dim: usize) -> Self {
        State(SmallVec::from_elem(0.0, dim))
    }

    pub fn scalar(x: f64) -> Self {
        State(SmallVec::from_slice(&[x]))
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        State(SmallVec::from_slice(xs))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &State) {
        debug_assert_eq!(self.dim(), x.dim());
        for (s, v) in self.0.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> State {
        self.iter().map(|v| a * v).collect()
    }

    pub fn dot(&self, other: &State) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_max(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Componentwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> State {
        self.iter().map(|&v| f(v)).collect()
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<f64> for State {
    fn from(x: f64) -> Self {
        State::scalar(x)
    }
}

impl From<Vec<f64>> for State {
    fn from(v: Vec<f64>) -> Self {
        State(SmallVec::from_vec(v))
    }
}

impl From<&[f64]> for State {
    fn from(v: &[f64]) -> Self {
        State::from_slice(v)
    }
}

impl FromIterator<f64> for State {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        State(iter.into_iter().collect())
    }
}

impl Index<usize> for State {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for State {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &State {
    type Output = State;
    fn add(self, rhs: &State) -> State {
        debug_assert_eq!(self.dim(), rhs.dim());
        self.iter().zip(rhs.iter()).map(|(a, b)| a + b).collect()
    }
}

impl Add for State {
    type Output = State;
    fn add(mut self, rhs: State) -> State {
        self += &rhs;
        self
    }
}

impl Sub for &State {
    type Output = State;
    fn sub(self, rhs: &State) -> State {
        debug_assert_eq!(self.dim(), rhs.dim());
        self.iter().zip(rhs.iter()).map(|(a, b)| a - b).collect()
    }
}

impl Sub for State {
    type Output = State;
    fn sub(mut self, rhs: State) -> State {
        self -= &rhs;
        self
    }
}

impl AddAssign<&State> for State {
    fn add_assign(&mut self, rhs: &State) {
        debug_assert_eq!(self.dim(), rhs.dim());
        for (s, v) in self.0.iter_mut().zip(rhs.iter()) {
            *s += v;
        }
    }
}

impl SubAssign<&State> for State {
    fn sub_assign(&mut self, rhs: &State) {
        debug_assert_eq!(self.dim(), rhs.dim());
        for (s, v) in self.0.iter_mut().zip(rhs.iter()) {
            *s -= v;
        }
    }
}

impl Mul<f64> for &State {
    type Output = State;
    fn mul(self, a: f64) -> State {
        self.scaled(a)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(mut self, a: f64) -> State {
        for s in self.0.iter_mut() {
            *s *= a;
        }
        self
    }
}

impl Mul<&State> for f64 {
    type Output = State;
    fn mul(self, x: &State) -> State {
        x.scaled(self)
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, x: State) -> State {
        x * self
    }
}

impl Neg for &State {
    type Output = State;
    fn neg(self) -> State {
        self.scaled(-1.0)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        self * -1.0
    }
}

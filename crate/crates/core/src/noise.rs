//! Seeded Brownian increments on uniform grids.
//!
//! Every path is a pure function of `(seed, stream tag, refinement level,
//! path_index)`: the key of a ChaCha8 generator is derived from the first three
//! and the stream number is the path index, so paths can be produced in any
//! order on any thread. Increments are rounded to multiples of 2⁻⁴⁰, which
//! makes Brownian-bridge splits and coarse sums exact in floating point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("invalid path spec: {0}")]
    InvalidSpec(String),
    #[error("iterated integrals need scalar noise, path has dimension {0}")]
    NotScalar(usize),
    #[error("cannot coarsen {steps} steps by a factor {factor}")]
    BadCoarsening { steps: usize, factor: usize },
}

/// Substreams of one seed; paths with different tags never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamTag {
    Primary = 1,
    Bridge = 2,
    Auxiliary = 3,
    Independent = 4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSpec {
    pub t_end: f64,
    pub steps: usize,
    /// Number of Brownian components.
    pub dim: usize,
    pub seed: u64,
    pub path_index: u64,
}

impl PathSpec {
    pub fn new(t_end: f64, steps: usize, dim: usize, seed: u64, path_index: u64) -> Self {
        PathSpec {
            t_end,
            steps,
            dim,
            seed,
            path_index,
        }
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    fn validate(&self) -> Result<(), NoiseError> {
        if self.steps == 0 {
            return Err(NoiseError::InvalidSpec("N must be at least 1".into()));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(NoiseError::InvalidSpec("T must be positive".into()));
        }
        if self.dim == 0 {
            return Err(NoiseError::InvalidSpec("m must be at least 1".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_KAPPA: f64 = 3.0;

const QUANTUM: f64 = 1099511627776.0; // 2^40

/// Rounds to the nearest multiple of 2⁻⁴⁰.
pub fn quantize(x: f64) -> f64 {
    (x * QUANTUM).round() / QUANTUM
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one `(seed, tag, level, path_index)` stream.
pub fn stream_rng(seed: u64, tag: StreamTag, level: u32, path_index: u64) -> ChaCha8Rng {
    let mut st = seed ^ ((tag as u64) << 56) ^ ((level as u64) << 40);
    splitmix64(&mut st);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut st).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path_index);
    rng
}

/// `A_h = √(2κ|ln h|)`, or `None` when `h ≥ 1` and truncation is off.
pub fn truncation_bound(h: f64, kappa: f64) -> Option<f64> {
    if h >= 1.0 {
        None
    } else {
        Some((2.0 * kappa * h.ln().abs()).sqrt())
    }
}

/// `ζ = ξ` clamped to `[−A_h, A_h]`.
pub fn truncate(xi: f64, a_h: f64) -> f64 {
    xi.clamp(-a_h, a_h)
}

/// `ΔŴ` for a raw increment `ΔW`; values inside the bound are returned unchanged.
pub fn truncate_increment(dw: f64, h: f64, a_h: Option<f64>) -> f64 {
    match a_h {
        Some(a) => {
            let bound = h.sqrt() * a;
            if dw.abs() <= bound {
                dw
            } else {
                bound.copysign(dw)
            }
        }
        None => dw,
    }
}

/// `I₍₁,₁₎ = ½(ΔW² − h)`.
pub fn double_integral(dw: f64, h: f64) -> f64 {
    0.5 * (dw * dw - h)
}

/// `I₍₁,₁,₁₎ = (ΔW³ − 3hΔW)/6`.
pub fn triple_integral(dw: f64, h: f64) -> f64 {
    (dw * dw * dw - 3.0 * h * dw) / 6.0
}

/// Brownian increments of one sample path on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    t_end: f64,
    steps: usize,
    dim: usize,
    seed: u64,
    path_index: u64,
    tag: StreamTag,
    level: u32,
    kappa: f64,
    /// Row-major `steps × dim`.
    increments: Vec<f64>,
    truncated: Vec<f64>,
    truncation_active: bool,
    i2: Vec<f64>,
    i3: Vec<f64>,
}

impl BrownianPath {
    /// Primary path for `spec`.
    pub fn generate(spec: &PathSpec, kappa: f64) -> Result<Self, NoiseError> {
        Self::generate_tagged(spec, kappa, StreamTag::Primary)
    }

    /// Path independent of the primary one (for W̃ in the limit equations).
    pub fn auxiliary(spec: &PathSpec, kappa: f64) -> Result<Self, NoiseError> {
        Self::generate_tagged(spec, kappa, StreamTag::Auxiliary)
    }

    pub fn generate_tagged(spec: &PathSpec, kappa: f64, tag: StreamTag) -> Result<Self, NoiseError> {
        spec.validate()?;
        if !(kappa >= 1.0) {
            return Err(NoiseError::InvalidSpec(format!("kappa must be >= 1, got {kappa}")));
        }
        let h = spec.h();
        let sqrt_h = h.sqrt();
        let mut rng = stream_rng(spec.seed, tag, 0, spec.path_index);
        let increments = (0..spec.steps * spec.dim)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                quantize(sqrt_h * z)
            })
            .collect();
        Ok(Self::assemble(
            spec.t_end,
            spec.steps,
            spec.dim,
            spec.seed,
            spec.path_index,
            tag,
            0,
            kappa,
            increments,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        t_end: f64,
        steps: usize,
        dim: usize,
        seed: u64,
        path_index: u64,
        tag: StreamTag,
        level: u32,
        kappa: f64,
        increments: Vec<f64>,
    ) -> Self {
        let h = t_end / steps as f64;
        let a_h = truncation_bound(h, kappa);
        if a_h.is_none() {
            log::warn!("step size {h} >= 1: increment truncation disabled");
        }
        let truncated = increments.iter().map(|&w| truncate_increment(w, h, a_h)).collect();
        let (i2, i3) = if dim == 1 {
            (
                increments.iter().map(|&w| double_integral(w, h)).collect(),
                increments.iter().map(|&w| triple_integral(w, h)).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        BrownianPath {
            t_end,
            steps,
            dim,
            seed,
            path_index,
            tag,
            level,
            kappa,
            increments,
            truncated,
            truncation_active: a_h.is_some(),
            i2,
            i3,
        }
    }

    /// Halves the step: each parent increment is split by a Brownian-bridge
    /// midpoint draw, and the two halves sum back to the parent exactly.
    pub fn refine(&self) -> Self {
        let level = self.level + 1;
        let h_parent = self.h();
        let half_sd = 0.5 * h_parent.sqrt();
        let mut rng = stream_rng(self.seed ^ (self.tag as u64), StreamTag::Bridge, level, self.path_index);
        let mut fine = vec![0.0; 2 * self.increments.len()];
        for n in 0..self.steps {
            for k in 0..self.dim {
                let d = self.increments[n * self.dim + k];
                let z: f64 = rng.sample(StandardNormal);
                let a = quantize(0.5 * d + half_sd * z);
                fine[2 * n * self.dim + k] = a;
                fine[(2 * n + 1) * self.dim + k] = d - a;
            }
        }
        Self::assemble(
            self.t_end,
            2 * self.steps,
            self.dim,
            self.seed,
            self.path_index,
            self.tag,
            level,
            self.kappa,
            fine,
        )
    }

    /// Sums blocks of `factor` consecutive increments.
    pub fn coarsen(&self, factor: usize) -> Result<Self, NoiseError> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(NoiseError::BadCoarsening {
                steps: self.steps,
                factor,
            });
        }
        let steps = self.steps / factor;
        let mut coarse = vec![0.0; steps * self.dim];
        for n in 0..self.steps {
            for k in 0..self.dim {
                coarse[(n / factor) * self.dim + k] += self.increments[n * self.dim + k];
            }
        }
        Ok(Self::assemble(
            self.t_end,
            steps,
            self.dim,
            self.seed,
            self.path_index,
            self.tag,
            self.level,
            self.kappa,
            coarse,
        ))
    }

    /// Same increments with a different truncation parameter.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self::assemble(
            self.t_end,
            self.steps,
            self.dim,
            self.seed,
            self.path_index,
            self.tag,
            self.level,
            kappa,
            self.increments.clone(),
        )
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn truncation_active(&self) -> bool {
        self.truncation_active
    }

    /// `A_h` for this grid.
    pub fn bound(&self) -> Option<f64> {
        truncation_bound(self.h(), self.kappa)
    }

    /// ΔW_n as a slice of length `dim`.
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.dim..(n + 1) * self.dim]
    }

    /// ΔŴ_n as a slice of length `dim`.
    pub fn truncated_increment(&self, n: usize) -> &[f64] {
        &self.truncated[n * self.dim..(n + 1) * self.dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn truncated(&self) -> &[f64] {
        &self.truncated
    }

    /// Per-step `(I₍₁,₁₎, I₍₁,₁,₁₎)`; scalar noise only.
    pub fn iterated_integrals(&self) -> Result<(&[f64], &[f64]), NoiseError> {
        if self.dim != 1 {
            return Err(NoiseError::NotScalar(self.dim));
        }
        Ok((&self.i2, &self.i3))
    }

    /// `W(t_n)` for component `k`.
    pub fn value_at(&self, n: usize, k: usize) -> f64 {
        (0..n).map(|i| self.increments[i * self.dim + k]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(steps: usize, dim: usize, index: u64) -> PathSpec {
        PathSpec::new(1.0, steps, dim, 42, index)
    }

    #[test]
    fn truncation_branches() {
        let a = truncation_bound(2f64.powi(-6), 3.0).unwrap();
        assert_eq!(truncate(0.0, a), 0.0);
        assert_eq!(truncate(a + 1.0, a), a);
        assert_eq!(truncate(-a - 1.0, a), -a);
        assert!(truncation_bound(1.0, 3.0).is_none());
        assert_eq!(truncate_increment(5.0, 2.0, None), 5.0);
    }

    #[test]
    fn truncated_within_bound() {
        let p = BrownianPath::generate(&PathSpec::new(1.0, 4096, 1, 1, 0), 1.0).unwrap();
        let bound = p.h().sqrt() * p.bound().unwrap();
        assert!(p.truncated().iter().all(|w| w.abs() <= bound));
        for (w, t) in p.increments().iter().zip(p.truncated()) {
            if w.abs() <= bound {
                assert_eq!(w, t);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(BrownianPath::generate(&spec(0, 1, 0), 3.0).is_err());
        assert!(BrownianPath::generate(&PathSpec::new(-1.0, 4, 1, 0, 0), 3.0).is_err());
        assert!(BrownianPath::generate(&spec(4, 1, 0), 0.5).is_err());
    }

    #[test]
    fn large_step_disables_truncation() {
        let p = BrownianPath::generate(&PathSpec::new(4.0, 2, 1, 0, 0), 3.0).unwrap();
        assert!(!p.truncation_active());
        assert_eq!(p.increments(), p.truncated());
    }

    #[test]
    fn determinism_and_independence() {
        let a = BrownianPath::generate(&spec(64, 2, 5), 3.0).unwrap();
        let b = BrownianPath::generate(&spec(64, 2, 5), 3.0).unwrap();
        assert_eq!(a, b);
        let c = BrownianPath::generate(&spec(64, 2, 6), 3.0).unwrap();
        assert_ne!(a.increments(), c.increments());
        let aux = BrownianPath::auxiliary(&spec(64, 2, 5), 3.0).unwrap();
        assert_ne!(a.increments(), aux.increments());
    }

    #[test]
    fn refinement_is_exact() {
        let p = BrownianPath::generate(&spec(16, 2, 3), 3.0).unwrap();
        let r = p.refine();
        assert_eq!(r.steps(), 32);
        for n in 0..16 {
            for k in 0..2 {
                assert_eq!(r.increment(2 * n)[k] + r.increment(2 * n + 1)[k], p.increment(n)[k]);
            }
        }
        let rr = r.refine();
        assert_eq!(rr.coarsen(4).unwrap().increments(), p.increments());
        assert_eq!(rr.coarsen(2).unwrap().increments(), r.increments());
    }

    #[test]
    fn coarsening_validation() {
        let p = BrownianPath::generate(&spec(10, 1, 0), 3.0).unwrap();
        assert!(p.coarsen(3).is_err());
        assert!(p.coarsen(0).is_err());
        assert_eq!(p.coarsen(10).unwrap().increments().len(), 1);
    }

    #[test]
    fn iterated_integral_closed_forms() {
        let h = 0.25;
        assert_eq!(double_integral(0.0, h), -h / 2.0);
        assert_eq!(double_integral(h.sqrt(), h), 0.0);
        assert_eq!(triple_integral(0.0, h), 0.0);
        let p = BrownianPath::generate(&spec(32, 1, 1), 3.0).unwrap();
        let (i2, i3) = p.iterated_integrals().unwrap();
        for n in 0..32 {
            let w = p.increment(n)[0];
            assert_eq!(i2[n], 0.5 * (w * w - p.h()));
            assert_eq!(i3[n], (w * w * w - 3.0 * p.h() * w) / 6.0);
        }
        let q = BrownianPath::generate(&spec(4, 2, 1), 3.0).unwrap();
        assert_eq!(q.iterated_integrals(), Err(NoiseError::NotScalar(2)));
    }
}

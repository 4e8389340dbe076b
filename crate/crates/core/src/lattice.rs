//! Multi-indices on `Z^ν`, truncated ℓ1 balls, sparse coefficient fields and
//! the quadratic convolution that realizes the `(u²)_xx` nonlinearity.
//!
//! All summations run in lexicographic order of the multi-indices so results
//! are bitwise reproducible whatever the thread schedule.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative threshold below which `n·ω` counts as an exact resonance.
const RESONANCE_EPS: f64 = 1e-12;

/// Output-mode count above which convolutions fan out over rayon.
const PAR_THRESHOLD: usize = 192;

/// A lattice point `n = (n₁,…,n_ν) ∈ Z^ν`.
///
/// The derived ordering is lexicographic, which is the canonical iteration
/// order everywhere in the crate.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<i32>);

impl MultiIndex {
    pub fn new(components: Vec<i32>) -> Self {
        MultiIndex(components)
    }

    pub fn zero(nu: usize) -> Self {
        MultiIndex(vec![0; nu])
    }

    pub fn components(&self) -> &[i32] {
        &self.0
    }

    pub fn nu(&self) -> usize {
        self.0.len()
    }

    /// `Σ|n_j|`, saturating at `u32::MAX`.
    pub fn l1_norm(&self) -> u32 {
        self.0
            .iter()
            .fold(0u32, |acc, c| acc.saturating_add(c.unsigned_abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// `n·ω`, accumulated in component order.
    pub fn dot(&self, omega: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(omega)
            .fold(0.0, |acc, (&n, &w)| acc + n as f64 * w)
    }

    /// True when the first nonzero component is positive.
    pub fn is_lex_positive(&self) -> bool {
        self.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
    }

    pub fn neg(&self) -> Self {
        MultiIndex(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<i32>> for MultiIndex {
    fn from(v: Vec<i32>) -> Self {
        MultiIndex(v)
    }
}

impl<const K: usize> From<[i32; K]> for MultiIndex {
    fn from(v: [i32; K]) -> Self {
        MultiIndex(v.to_vec())
    }
}

pub fn l1_norm(n: &MultiIndex) -> u32 {
    n.l1_norm()
}

/// All `n ∈ Z^ν` with `|n| ≤ radius`, in lexicographic order.
pub fn ball(nu: usize, radius: u32) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<i32>, left: usize, budget: i32, out: &mut Vec<MultiIndex>) {
        if left == 0 {
            out.push(MultiIndex(prefix.clone()));
            return;
        }
        for c in -budget..=budget {
            prefix.push(c);
            fill(prefix, left - 1, budget - c.abs(), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nu == 0 {
        return out;
    }
    fill(&mut Vec::with_capacity(nu), nu, radius as i32, &mut out);
    out
}

/// Number of points in the ball `|n| ≤ radius` of `Z^ν`, saturating.
///
/// Uses `Σ_k 2^k·C(ν,k)·C(radius,k)`.
pub fn ball_len(nu: usize, radius: u32) -> u128 {
    let mut total: u128 = 0;
    let mut c_nu: u128 = 1;
    let mut c_r: u128 = 1;
    let mut pow2: u128 = 1;
    for k in 0..=nu.min(radius as usize) {
        if k > 0 {
            c_nu = c_nu.saturating_mul((nu - k + 1) as u128) / k as u128;
            c_r = c_r.saturating_mul((radius as usize - k + 1) as u128) / k as u128;
            pow2 = pow2.saturating_mul(2);
        }
        total = total.saturating_add(pow2.saturating_mul(c_nu).saturating_mul(c_r));
    }
    total
}

/// Minimum of `|n·ω|` over `0 < |n| ≤ 2·radius`.
///
/// Fails on the first lattice point where `n·ω` vanishes (to relative
/// precision), since such an `n` violates the nonresonance hypothesis.
pub fn resonance_floor(omega: &[f64], radius: u32) -> Result<f64> {
    let scale = omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let mut floor = f64::INFINITY;
    for n in ball(omega.len(), 2 * radius) {
        if n.is_zero() {
            continue;
        }
        let v = n.dot(omega);
        if v.abs() <= RESONANCE_EPS * scale * n.l1_norm() as f64 {
            return Err(Error::Resonance {
                index: n.components().to_vec(),
                value: v,
            });
        }
        floor = floor.min(v.abs());
    }
    Ok(floor)
}

/// Frequency vector `ω ∈ R^ν` together with the Galerkin truncation radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySystem {
    omega: Vec<f64>,
    radius: u32,
    resonance_floor: f64,
}

impl FrequencySystem {
    pub fn new(omega: Vec<f64>, radius: u32) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Frequency("ν must be at least 1".into()));
        }
        if radius == 0 {
            return Err(Error::Frequency(
                "truncation radius must be at least 1".into(),
            ));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::Frequency("ω has non-finite components".into()));
        }
        if omega.iter().map(|w| w.abs()).sum::<f64>() <= 0.0 {
            return Err(Error::Frequency("|ω| must be positive".into()));
        }
        let floor = resonance_floor(&omega, radius)?;
        Ok(FrequencySystem {
            omega,
            radius,
            resonance_floor: floor,
        })
    }

    pub fn nu(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// `|ω| = Σ|ω_j|`.
    pub fn omega_l1(&self) -> f64 {
        self.omega.iter().map(|w| w.abs()).sum()
    }

    /// `min |n·ω|` over `0 < |n| ≤ 2N`.
    pub fn resonance_floor(&self) -> f64 {
        self.resonance_floor
    }

    pub fn dot(&self, n: &MultiIndex) -> f64 {
        n.dot(&self.omega)
    }
}

/// Exponential decay envelope `(B, κ)` with `B > 0` and `0 < κ ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    b: f64,
    kappa: f64,
}

impl DecayEnvelope {
    pub fn new(b: f64, kappa: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::OutOfRange {
                what: "B",
                detail: format!("{b} is not a positive finite number"),
            });
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::OutOfRange {
                what: "κ",
                detail: format!("{kappa} is not in (0, 1]"),
            });
        }
        Ok(DecayEnvelope { b, kappa })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// Sparse map from lattice points to complex amplitudes, confined to an ℓ1
/// ball. Absent keys are exact zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    nu: usize,
    radius: u32,
    entries: BTreeMap<MultiIndex, C64>,
}

impl CoefficientField {
    pub fn zeros(nu: usize, radius: u32) -> Self {
        CoefficientField {
            nu,
            radius,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries<I>(nu: usize, radius: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, C64)>,
    {
        let mut field = Self::zeros(nu, radius);
        for (n, v) in entries {
            field.set(n, v)?;
        }
        Ok(field)
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn get(&self, n: &MultiIndex) -> C64 {
        self.entries.get(n).copied().unwrap_or_default()
    }

    /// Stores `v` at `n`; an exact zero removes the key.
    pub fn set(&mut self, n: MultiIndex, v: C64) -> Result<()> {
        if n.nu() != self.nu {
            return Err(Error::Dimension {
                expected: self.nu,
                found: n.nu(),
            });
        }
        if n.l1_norm() > self.radius {
            return Err(Error::Radius {
                field: n.l1_norm(),
                limit: self.radius,
            });
        }
        if v == C64::default() {
            self.entries.remove(&n);
        } else {
            self.entries.insert(n, v);
        }
        Ok(())
    }

    /// Nonzero entries in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &C64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `sup_n |self(n) − other(n)|` over the union of supports.
    pub fn sup_distance(&self, other: &CoefficientField) -> f64 {
        let mut d = 0.0f64;
        for (n, v) in &self.entries {
            d = d.max((v - other.get(n)).norm());
        }
        for (n, v) in &other.entries {
            if !self.entries.contains_key(n) {
                d = d.max(v.norm());
            }
        }
        d
    }

    /// Multiplies every amplitude by `s`.
    pub fn scaled(&self, s: C64) -> CoefficientField {
        let mut out = Self::zeros(self.nu, self.radius);
        for (n, v) in &self.entries {
            let w = v * s;
            if w != C64::default() {
                out.entries.insert(n.clone(), w);
            }
        }
        out
    }
}

/// The ball `|n| ≤ radius` with a dense index and the pair table used by the
/// convolution: for each output point, every `(m₁, m₂)` inside the ball with
/// `m₁ + m₂ = n`, ordered lexicographically in `m₁`.
#[derive(Debug)]
pub struct Ball {
    nu: usize,
    radius: u32,
    points: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
    pairs: Vec<Vec<(u32, u32)>>,
}

impl Ball {
    pub fn new(nu: usize, radius: u32) -> Self {
        let points = ball(nu, radius);
        let index: HashMap<_, _> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let mut pairs = vec![Vec::new(); points.len()];
        for (j, a) in points.iter().enumerate() {
            for (k, b) in points.iter().enumerate() {
                let s = a.add(b);
                if s.l1_norm() <= radius {
                    pairs[index[&s]].push((j as u32, k as u32));
                }
            }
        }
        Ball {
            nu,
            radius,
            points,
            index,
            pairs,
        }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[MultiIndex] {
        &self.points
    }

    pub fn position(&self, n: &MultiIndex) -> Option<usize> {
        self.index.get(n).copied()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    /// Dense vector of `field` over this ball. Keys outside the ball are
    /// rejected.
    pub fn dense(&self, field: &CoefficientField) -> Result<Vec<C64>> {
        if field.nu() != self.nu {
            return Err(Error::Dimension {
                expected: self.nu,
                found: field.nu(),
            });
        }
        if field.radius() > self.radius {
            return Err(Error::Radius {
                field: field.radius(),
                limit: self.radius,
            });
        }
        let mut out = vec![C64::default(); self.points.len()];
        for (n, v) in field.iter() {
            out[self.index[n]] = *v;
        }
        Ok(out)
    }

    pub fn field(&self, values: &[C64]) -> CoefficientField {
        let mut out = CoefficientField::zeros(self.nu, self.radius);
        for (p, v) in self.points.iter().zip(values) {
            if *v != C64::default() {
                out.entries.insert(p.clone(), *v);
            }
        }
        out
    }

    /// `Q(n) = Σ_{m₁+m₂=n} c(m₁)c(m₂)`.
    pub fn self_convolve(&self, c: &[C64], out: &mut [C64]) {
        self.for_each_output(out, |i| {
            self.pairs[i].iter().fold(C64::default(), |acc, &(j, k)| {
                acc + c[j as usize] * c[k as usize]
            })
        });
    }

    /// `A(n) = −2(n·ω) Σ_{m₁+m₂=n} (m₁·ω) c(m₁)c(m₂)` with `dots[i] = pᵢ·ω`.
    pub fn weighted_self_convolve(&self, dots: &[f64], c: &[C64], out: &mut [C64]) {
        self.for_each_output(out, |i| {
            let s = self.pairs[i].iter().fold(C64::default(), |acc, &(j, k)| {
                acc + c[j as usize] * c[k as usize] * dots[j as usize]
            });
            s * (-2.0 * dots[i])
        });
    }

    fn for_each_output<F>(&self, out: &mut [C64], f: F)
    where
        F: Fn(usize) -> C64 + Sync,
    {
        if out.len() >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        } else {
            out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        }
    }
}

/// Per-mode data of a frequency system over its truncation ball.
#[derive(Debug, Clone)]
pub struct ModeTable {
    pub ball: Arc<Ball>,
    /// `n·ω` per ball point.
    pub dots: Vec<f64>,
    /// `λ(n)` per ball point.
    pub lambdas: Vec<f64>,
}

impl ModeTable {
    pub fn new(fs: &FrequencySystem) -> Self {
        let ball = Arc::new(Ball::new(fs.nu(), fs.radius()));
        let dots: Vec<f64> = ball.points().iter().map(|p| fs.dot(p)).collect();
        let lambdas = dots.iter().map(|&d| lambda_of_dot(d)).collect();
        ModeTable {
            ball,
            dots,
            lambdas,
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas.iter().fold(0.0, |m, &l| m.max(l))
    }
}

/// `λ = √((n·ω)² + (n·ω)⁴)`, evaluated as `|n·ω|·√(1 + (n·ω)²)`.
pub(crate) fn lambda_of_dot(d: f64) -> f64 {
    d.abs() * (1.0 + d * d).sqrt()
}

fn check_radius(c: &CoefficientField, fs: &FrequencySystem) -> Result<()> {
    if c.nu() != fs.nu() {
        return Err(Error::Dimension {
            expected: fs.nu(),
            found: c.nu(),
        });
    }
    if c.radius() > fs.radius() {
        return Err(Error::Radius {
            field: c.radius(),
            limit: fs.radius(),
        });
    }
    Ok(())
}

/// Fourier coefficients of `(u²)_xx` restricted to `|n| ≤ N`.
pub fn weighted_self_convolution(
    c: &CoefficientField,
    fs: &FrequencySystem,
) -> Result<CoefficientField> {
    check_radius(c, fs)?;
    let modes = ModeTable::new(fs);
    let dense = modes.ball.dense(c)?;
    let mut out = vec![C64::default(); dense.len()];
    modes
        .ball
        .weighted_self_convolve(&modes.dots, &dense, &mut out);
    Ok(modes.ball.field(&out))
}

/// Unweighted `Σ_{m₁+m₂=n} c(m₁)c(m₂)` restricted to `|n| ≤ N`.
pub fn self_convolution(c: &CoefficientField, fs: &FrequencySystem) -> Result<CoefficientField> {
    check_radius(c, fs)?;
    let ball = Ball::new(fs.nu(), fs.radius());
    let dense = ball.dense(c)?;
    let mut out = vec![C64::default(); dense.len()];
    ball.self_convolve(&dense, &mut out);
    Ok(ball.field(&out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn l1_norm_examples() {
        assert_eq!(l1_norm(&[0, 0].into()), 0);
        assert_eq!(l1_norm(&[2, -3].into()), 5);
        assert_eq!(l1_norm(&[1, 1, 1].into()), 3);
    }

    #[test]
    fn ball_small_cases() {
        let b1: Vec<_> = ball(1, 1)
            .into_iter()
            .map(|n| n.components().to_vec())
            .collect();
        assert_eq!(b1, vec![vec![-1], vec![0], vec![1]]);
        let b2: Vec<_> = ball(2, 1)
            .into_iter()
            .map(|n| n.components().to_vec())
            .collect();
        assert_eq!(
            b2,
            vec![vec![-1, 0], vec![0, -1], vec![0, 0], vec![0, 1], vec![1, 0]]
        );
    }

    #[test]
    fn ball_count_matches_brute_force() {
        for nu in 1..=3usize {
            for r in 0..=5u32 {
                let r_i = r as i32;
                let mut brute = 0;
                let mut idx = vec![-r_i; nu];
                loop {
                    if idx.iter().map(|c| c.abs()).sum::<i32>() <= r_i {
                        brute += 1;
                    }
                    let mut k = 0;
                    while k < nu {
                        idx[k] += 1;
                        if idx[k] <= r_i {
                            break;
                        }
                        idx[k] = -r_i;
                        k += 1;
                    }
                    if k == nu {
                        break;
                    }
                }
                let b = ball(nu, r);
                assert_eq!(b.len(), brute, "ν={nu}, N={r}");
                assert_eq!(ball_len(nu, r), brute as u128);
                assert!(b.windows(2).all(|w| w[0] < w[1]));
            }
        }
        let n = 2u32;
        assert_eq!(ball(2, n).len() as u32, 2 * n * n + 2 * n + 1);
    }

    #[test]
    fn resonance_floor_examples() {
        assert_eq!(resonance_floor(&[1.0], 4).unwrap(), 1.0);
        // brute force over the 2N ball: n = (−1, 1) gives √2 − 1
        let f = resonance_floor(&[1.0, 2f64.sqrt()], 2).unwrap();
        assert!((f - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        match resonance_floor(&[1.0, 1.0], 3) {
            Err(Error::Resonance { index, .. }) => {
                assert_eq!(index.iter().sum::<i32>(), 0);
            }
            other => panic!("expected resonance error, got {other:?}"),
        }
    }

    #[test]
    fn frequency_system_rejects_bad_input() {
        assert!(FrequencySystem::new(vec![], 2).is_err());
        assert!(FrequencySystem::new(vec![0.0], 2).is_err());
        assert!(FrequencySystem::new(vec![1.0], 0).is_err());
        assert!(FrequencySystem::new(vec![1.0, 1.0], 1).is_err());
        let fs = FrequencySystem::new(vec![1.0, -2f64.sqrt()], 3).unwrap();
        assert!((fs.omega_l1() - (1.0 + 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn envelope_validation() {
        assert!(DecayEnvelope::new(1.0, 1.0).is_ok());
        assert!(DecayEnvelope::new(0.0, 0.5).is_err());
        assert!(DecayEnvelope::new(1.0, 0.0).is_err());
        assert!(DecayEnvelope::new(1.0, 1.5).is_err());
    }

    #[test]
    fn field_rejects_out_of_ball_keys() {
        let mut f = CoefficientField::zeros(1, 2);
        assert!(f.set([3].into(), c(1.0)).is_err());
        assert!(f.set([1, 1].into(), c(1.0)).is_err());
        f.set([2].into(), c(1.0)).unwrap();
        f.set([2].into(), c(0.0)).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn convolution_of_zero_is_zero() {
        let fs = FrequencySystem::new(vec![1.0], 3).unwrap();
        let z = CoefficientField::zeros(1, 3);
        assert!(weighted_self_convolution(&z, &fs).unwrap().is_empty());
    }

    #[test]
    fn convolution_single_mode() {
        let fs = FrequencySystem::new(vec![1.0], 4).unwrap();
        let f = CoefficientField::from_entries(1, 4, [([1].into(), c(1.0))]).unwrap();
        let a = weighted_self_convolution(&f, &fs).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.get(&[2].into()), c(-4.0));
    }

    #[test]
    fn convolution_symmetric_pair() {
        let fs = FrequencySystem::new(vec![1.0], 4).unwrap();
        let f = CoefficientField::from_entries(1, 4, [([1].into(), c(1.0)), ([-1].into(), c(1.0))])
            .unwrap();
        let a = weighted_self_convolution(&f, &fs).unwrap();
        assert_eq!(a.get(&[0].into()), c(0.0));
        assert_eq!(a.get(&[2].into()), c(-4.0));
        assert_eq!(a.get(&[-2].into()), c(-4.0));
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn convolution_drops_modes_outside_ball() {
        let fs = FrequencySystem::new(vec![1.0], 2).unwrap();
        let f = CoefficientField::from_entries(1, 2, [([2].into(), c(1.0))]).unwrap();
        assert!(weighted_self_convolution(&f, &fs).unwrap().is_empty());
    }

    #[test]
    fn radius_precondition() {
        let fs = FrequencySystem::new(vec![1.0], 2).unwrap();
        let f = CoefficientField::zeros(1, 3);
        assert!(matches!(
            weighted_self_convolution(&f, &fs),
            Err(Error::Radius { .. })
        ));
    }
}

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::labels::{alpha_multiset, alpha_set, enumerate_labels, weights, TreeLabel};
use crate::error::{Error, Result};
use crate::lattice::MultiIndex;

/// `(1 + 2e^{−κ/4}/(1 − e^{−κ/4}))^ν`, the geometric majorant of
/// `Σ_{n∈Z^ν} e^{−κ|n|/4}`, next to its closed-form bound `(24/κ)^ν`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSum {
    pub value: f64,
    pub bound: f64,
}

impl LatticeSum {
    /// Strict comparison with a 1e−12 relative guard on the bound.
    pub fn holds(&self) -> bool {
        self.value <= self.bound * (1.0 + 1e-12)
    }
}

pub fn lattice_exp_sum(kappa: f64, nu: u32) -> Result<LatticeSum> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::OutOfRange {
            what: "κ",
            detail: format!("{kappa} is not in (0, 1]"),
        });
    }
    let q = (-kappa / 4.0).exp();
    let one_dim = 1.0 + 2.0 * q / (1.0 - q);
    Ok(LatticeSum {
        value: one_dim.powi(nu as i32),
        bound: (24.0 / kappa).powi(nu as i32),
    })
}

fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

fn factorial_product(alpha: &[u32]) -> BigUint {
    alpha
        .iter()
        .fold(BigUint::one(), |acc, &a| acc * factorial(a))
}

pub const MAX_WEIGHT_SUM_LEVEL: usize = 3;

/// `Σ_{γ∈𝒟^(k)} (2t)^{ℓ(γ)}/𝔉(γ) · Σ_{α∈𝒜(γ)} Π α_i!`, exactly.
pub fn label_weight_sum(k: usize, t: &BigRational) -> Result<BigRational> {
    if !(1..=MAX_WEIGHT_SUM_LEVEL).contains(&k) {
        return Err(Error::OutOfRange {
            what: "label level",
            detail: format!("k = {k} not in 1..={MAX_WEIGHT_SUM_LEVEL}"),
        });
    }
    let two_t = t * BigRational::from_integer(2.into());
    let mut total = BigRational::zero();
    for label in enumerate_labels(k)? {
        total += label_weight_term(&label, &two_t)?;
    }
    Ok(total)
}

/// One summand of [`label_weight_sum`] with `two_t = 2t`.
pub fn label_weight_term(label: &TreeLabel, two_t: &BigRational) -> Result<BigRational> {
    let w = weights(label);
    let alpha_sum = alpha_set(label)?
        .iter()
        .fold(BigUint::zero(), |acc, a| acc + factorial_product(a));
    let power = num_traits::pow(two_t.clone(), w.ell);
    Ok(power * BigRational::from_integer(alpha_sum.into())
        / BigRational::from_integer(w.frak_f.into()))
}

pub const MAX_COMPOSITION_PARTS: u32 = 8;

/// `Σ Π α_i!` over all `α ∈ Z_{≥0}^N` with `Σα_i = l`.
pub fn factorial_comp_sum(parts: u32, l: u32) -> Result<BigUint> {
    if !(1 <= l && l <= parts && parts <= MAX_COMPOSITION_PARTS) {
        return Err(Error::OutOfRange {
            what: "composition size",
            detail: format!("need 1 ≤ l ≤ N ≤ {MAX_COMPOSITION_PARTS}, got N = {parts}, l = {l}"),
        });
    }
    let facts: Vec<BigUint> = (0..=l).map(factorial).collect();
    fn rec(parts: u32, left: u32, facts: &[BigUint]) -> BigUint {
        if parts == 1 {
            return facts[left as usize].clone();
        }
        (0..=left).fold(BigUint::zero(), |acc, a| {
            acc + &facts[a as usize] * rec(parts - 1, left - a, facts)
        })
    }
    Ok(rec(parts, l, &facts))
}

/// `(2N)^l`.
pub fn composition_bound(parts: u32, l: u32) -> BigUint {
    num_traits::pow(BigUint::from(2 * parts), l as usize)
}

pub const MAX_MAJORANT_SIGMA: usize = 6;

fn check_assignment(label: &TreeLabel, assignment: &[MultiIndex]) -> Result<()> {
    let sigma = label.sigma();
    if assignment.len() != sigma {
        return Err(Error::OutOfRange {
            what: "leaf assignment",
            detail: format!("{} indices for σ = {sigma}", assignment.len()),
        });
    }
    if let Some(first) = assignment.first() {
        if let Some(bad) = assignment.iter().find(|m| m.nu() != first.nu()) {
            return Err(Error::Dimension {
                expected: first.nu(),
                found: bad.nu(),
            });
        }
    }
    Ok(())
}

/// `𝔓`: product over internal nodes of `|μ|`, the ℓ1 norm of the subtree's
/// leaf sum. Leaves are taken in left-to-right order.
pub fn majorant_p(label: &TreeLabel, assignment: &[MultiIndex]) -> Result<BigUint> {
    check_assignment(label, assignment)?;
    fn rec(label: &TreeLabel, leaves: &[MultiIndex]) -> (MultiIndex, BigUint) {
        match label {
            TreeLabel::Leaf(_) => (leaves[0].clone(), BigUint::one()),
            TreeLabel::Node(l, r) => {
                let s = l.sigma();
                let (a, pa) = rec(l, &leaves[..s]);
                let (b, pb) = rec(r, &leaves[s..]);
                let mu = a.add(&b);
                let p = BigUint::from(mu.l1_norm()) * pa * pb;
                (mu, p)
            }
        }
    }
    Ok(rec(label, assignment).1)
}

/// `Σ_{α∈𝒜(γ)} Π |m_i|^{α_i}`.
pub fn majorant_rhs(label: &TreeLabel, assignment: &[MultiIndex]) -> Result<BigUint> {
    check_assignment(label, assignment)?;
    let norms: Vec<BigUint> = assignment
        .iter()
        .map(|m| BigUint::from(m.l1_norm()))
        .collect();
    Ok(alpha_set(label)?
        .iter()
        .fold(BigUint::zero(), |acc, alpha| {
            acc + alpha.iter().zip(&norms).fold(BigUint::one(), |p, (&a, n)| {
                p * num_traits::pow(n.clone(), a as usize)
            })
        }))
}

/// Both sides of `𝔓(m) ≤ Σ_α Π|m_i|^{α_i}`.
pub fn majorant_sides(label: &TreeLabel, assignment: &[MultiIndex]) -> Result<(BigUint, BigUint)> {
    let sigma = label.sigma();
    if sigma > MAX_MAJORANT_SIGMA {
        return Err(Error::OutOfRange {
            what: "label size",
            detail: format!("σ = {sigma} exceeds {MAX_MAJORANT_SIGMA}"),
        });
    }
    Ok((
        majorant_p(label, assignment)?,
        majorant_rhs(label, assignment)?,
    ))
}

pub fn majorant_bound_holds(label: &TreeLabel, assignment: &[MultiIndex]) -> Result<bool> {
    let (lhs, rhs) = majorant_sides(label, assignment)?;
    Ok(lhs <= rhs)
}

/// `Σ_α mult(α)·Π |m_i|^{α_i}` over [`alpha_multiset`], the form in which
/// the product of the children's sums expands term by term.
pub fn majorant_rhs_counted(label: &TreeLabel, assignment: &[MultiIndex]) -> Result<BigUint> {
    check_assignment(label, assignment)?;
    let norms: Vec<BigUint> = assignment
        .iter()
        .map(|m| BigUint::from(m.l1_norm()))
        .collect();
    Ok(alpha_multiset(label)?
        .iter()
        .fold(BigUint::zero(), |acc, (alpha, &mult)| {
            acc + alpha
                .iter()
                .zip(&norms)
                .fold(BigUint::from(mult), |p, (&a, n)| {
                    p * num_traits::pow(n.clone(), a as usize)
                })
        }))
}

pub fn majorant_counted_bound_holds(label: &TreeLabel, assignment: &[MultiIndex]) -> Result<bool> {
    if label.sigma() > MAX_MAJORANT_SIGMA {
        return Err(Error::OutOfRange {
            what: "label size",
            detail: format!("σ = {} exceeds {MAX_MAJORANT_SIGMA}", label.sigma()),
        });
    }
    Ok(majorant_p(label, assignment)? <= majorant_rhs_counted(label, assignment)?)
}

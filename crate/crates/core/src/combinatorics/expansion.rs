//! Explicit tree-indexed expansion of the Picard iterates.
//!
//! `d_k(t,n) = Σ_{γ∈𝒟^(k)} Σ_{m: μ(m)=n} ℭ(m)·f(m)·I(t,m)`, where `ℭ` is the
//! product of the leaf data, `f` the product of the node scalings and `I` the
//! nested oscillatory time integral. Each term is enumerated and integrated
//! separately, so the result is independent of the Picard implementation.
//! Every subtree sum is kept inside the truncation ball, mirroring the
//! Galerkin projection applied at every Picard step.

use super::labels::{enumerate_labels, TreeLabel};
use crate::error::{Error, Result};
use crate::lattice::{ball, lambda_of_dot, CoefficientField, FrequencySystem, MultiIndex, C64};

pub const MAX_EXPANSION_LEVEL: usize = 3;
pub const MAX_EXPANSION_RADIUS: u32 = 3;
pub const MAX_QUAD_DEPTH: u32 = 16;

const QUAD_TOL: f64 = 1e-9;

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// A label with a concrete lattice point on every leaf, reduced to what the
/// time integral needs: the dispersion value at every vertex.
#[derive(Clone)]
enum Shape {
    Leaf {
        tag: u8,
        lambda: f64,
    },
    Node {
        lambda: f64,
        left: Box<Shape>,
        right: Box<Shape>,
    },
}

struct Term {
    mu: MultiIndex,
    weight: C64,
    shape: Shape,
}

struct Context<'a> {
    fs: &'a FrequencySystem,
    points: Vec<MultiIndex>,
    c0: &'a CoefficientField,
    c0p: &'a CoefficientField,
}

impl Context<'_> {
    /// All assignments of `label` with every subtree sum in the ball.
    fn terms(&self, label: &TreeLabel) -> Vec<Term> {
        match label {
            TreeLabel::Leaf(tag) => self
                .points
                .iter()
                .filter_map(|m| {
                    let data = if *tag == 0 { self.c0 } else { self.c0p };
                    let v = data.get(m);
                    (v != C64::default()).then(|| Term {
                        mu: m.clone(),
                        weight: v,
                        shape: Shape::Leaf {
                            tag: *tag,
                            lambda: lambda_of_dot(self.fs.dot(m)),
                        },
                    })
                })
                .collect(),
            TreeLabel::Node(l, r) => {
                let left = self.terms(l);
                let right = self.terms(r);
                let mut out = Vec::new();
                for a in &left {
                    for b in &right {
                        let mu = a.mu.add(&b.mu);
                        if mu.l1_norm() > self.fs.radius() {
                            continue;
                        }
                        let d = self.fs.dot(&mu);
                        let f = C64::new(0.0, -d.abs() / (2.0 * (1.0 + d * d).sqrt()));
                        out.push(Term {
                            weight: a.weight * b.weight * f,
                            shape: Shape::Node {
                                lambda: lambda_of_dot(d),
                                left: Box::new(a.shape.clone()),
                                right: Box::new(b.shape.clone()),
                            },
                            mu,
                        });
                    }
                }
                out
            }
        }
    }
}

impl Shape {
    /// `I(t)`: `cos(λt)` on 0-leaves, `sin(λt)/λ` on 1-leaves and
    /// `∫₀ᵗ (e^{iλ(τ−t)} − e^{iλ(t−τ)}) I_L(τ) I_R(τ) dτ` on nodes.
    fn integral(&self, t: f64, depth: u32) -> C64 {
        match self {
            Shape::Leaf { tag: 0, lambda } => C64::new((lambda * t).cos(), 0.0),
            Shape::Leaf { lambda, .. } => {
                if *lambda == 0.0 {
                    C64::new(t, 0.0)
                } else {
                    C64::new((lambda * t).sin() / lambda, 0.0)
                }
            }
            Shape::Node {
                lambda,
                left,
                right,
            } => {
                if *lambda == 0.0 || t == 0.0 {
                    return C64::default();
                }
                let g = |tau: f64| {
                    let k = C64::new(0.0, -2.0 * (lambda * (t - tau)).sin());
                    k * left.integral(tau, depth) * right.integral(tau, depth)
                };
                adaptive(&g, 0.0, t, gl8(&g, 0.0, t), depth)
            }
        }
    }
}

fn gl8<F: Fn(f64) -> C64>(g: &F, a: f64, b: f64) -> C64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = C64::default();
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
        s += (g(c - h * x) + g(c + h * x)) * w;
    }
    s * h
}

fn adaptive<F: Fn(f64) -> C64>(g: &F, a: f64, b: f64, whole: C64, depth: u32) -> C64 {
    let m = 0.5 * (a + b);
    let left = gl8(g, a, m);
    let right = gl8(g, m, b);
    let halves = left + right;
    if depth == 0 || (halves - whole).norm() <= QUAD_TOL * halves.norm().max(f64::MIN_POSITIVE) {
        return halves;
    }
    adaptive(g, a, m, left, depth - 1) + adaptive(g, m, b, right, depth - 1)
}

/// Evaluates `d_k(t, n)` from the explicit expansion over `𝒟^(k)`.
///
/// `quad_depth` bounds the panel bisection of every nested integral.
pub fn tree_expand_evaluate(
    k: usize,
    n: &MultiIndex,
    t: f64,
    c0: &CoefficientField,
    c0p: &CoefficientField,
    fs: &FrequencySystem,
    quad_depth: u32,
) -> Result<C64> {
    if !(1..=MAX_EXPANSION_LEVEL).contains(&k) {
        return Err(Error::OutOfRange {
            what: "expansion level",
            detail: format!("k = {k} not in 1..={MAX_EXPANSION_LEVEL}"),
        });
    }
    if fs.nu() != 1 || fs.radius() > MAX_EXPANSION_RADIUS {
        return Err(Error::OutOfRange {
            what: "expansion lattice",
            detail: format!(
                "needs ν = 1 and N ≤ {MAX_EXPANSION_RADIUS}, got ν = {}, N = {}",
                fs.nu(),
                fs.radius()
            ),
        });
    }
    if quad_depth > MAX_QUAD_DEPTH {
        return Err(Error::OutOfRange {
            what: "quad_depth",
            detail: format!("{quad_depth} exceeds {MAX_QUAD_DEPTH}"),
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            what: "t",
            detail: format!("{t} is not a finite nonnegative time"),
        });
    }
    for c in [c0, c0p] {
        if c.nu() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                found: c.nu(),
            });
        }
        if c.radius() > fs.radius() {
            return Err(Error::Radius {
                field: c.radius(),
                limit: fs.radius(),
            });
        }
    }
    let ctx = Context {
        fs,
        points: ball(1, fs.radius()),
        c0,
        c0p,
    };
    let mut total = C64::default();
    for label in enumerate_labels(k)? {
        for term in ctx.terms(&label) {
            if &term.mu == n {
                total += term.weight * term.shape.integral(t, quad_depth);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_on_degree_15() {
        let g = |x: f64| C64::new(x.powi(15) + 3.0 * x.powi(4), 0.0);
        let got = gl8(&g, 0.0, 1.0).re;
        assert!((got - (1.0 / 16.0 + 0.6)).abs() < 1e-14);
    }

    #[test]
    fn node_integral_matches_closed_form() {
        // ∫₀ᵗ −2i sin(λ(t−τ)) dτ = −2i(1 − cos λt)/λ for two zero-frequency leaves
        let shape = Shape::Node {
            lambda: 3.0,
            left: Box::new(Shape::Leaf {
                tag: 0,
                lambda: 0.0,
            }),
            right: Box::new(Shape::Leaf {
                tag: 0,
                lambda: 0.0,
            }),
        };
        let t = 0.7;
        let got = shape.integral(t, 8);
        let want = C64::new(0.0, -2.0 * (1.0 - (3.0 * t).cos()) / 3.0);
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn guards() {
        let fs2 = FrequencySystem::new(vec![1.0, 2f64.sqrt()], 2).unwrap();
        let z2 = CoefficientField::zeros(2, 2);
        assert!(tree_expand_evaluate(1, &[0, 0].into(), 0.1, &z2, &z2, &fs2, 4).is_err());
        let fs = FrequencySystem::new(vec![1.0], 2).unwrap();
        let z = CoefficientField::zeros(1, 2);
        assert!(tree_expand_evaluate(4, &[0].into(), 0.1, &z, &z, &fs, 4).is_err());
        assert_eq!(
            tree_expand_evaluate(3, &[1].into(), 0.1, &z, &z, &fs, 4).unwrap(),
            C64::default()
        );
    }
}

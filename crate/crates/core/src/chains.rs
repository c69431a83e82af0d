//! Cyclic chains over matrix algebras and the operations on them: the
//! Hochschild boundary `b`, the Connes boundary `B`, the shuffle product and
//! the cyclic-shuffle operations `B_r`.
//!
//! A chain is a formal complex combination of elementary tensors
//! `(a⁰, a¹, …, aⁿ)`. Slots `1..=n` live in `A/ℂ`: terms with a scalar in one
//! of those slots are zero and are dropped by [`Chain::normalized`]. Because
//! tensors are stored as unreduced term lists, equality of chains is decided
//! by [`Chain::probe_residual`], which pairs the chain with random product
//! functionals that vanish on scalars in slots `≥ 1`.
//!
//! Products realize `A₁ ⊗ A₂` by Kronecker products, so a chain built from
//! factors over `A₁` and `A₂` lives in the Kronecker ordering of `H₁ ⊗ H₂`.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::combinatorics::{binomial, cyclic_shuffle_count, enumerate_cyclic_shuffles, enumerate_shuffles};
use crate::error::{Error, Result};
use crate::matrix::{c64, kron, ComplexMatrix};
use crate::random::Rng;

/// Tolerance for detecting scalar factors in slots `≥ 1`.
pub const SCALAR_SLOT_TOL: f64 = 1e-12;

/// Hard limit on the number of elementary terms a product may create.
pub const MAX_OUTPUT_TERMS: u128 = 1_000_000;

/// `coeff · (a⁰, …, aⁿ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementaryChain {
    pub coeff: Complex64,
    factors: Vec<ComplexMatrix>,
}

impl ElementaryChain {
    pub fn new(coeff: Complex64, factors: Vec<ComplexMatrix>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidInput("an elementary chain needs at least one factor".into()))?;
        let d = first.rows();
        if factors.iter().any(|f| f.rows() != d || f.cols() != d) {
            return Err(Error::DimensionMismatch(
                "chain factors must be square of equal size".into(),
            ));
        }
        Ok(ElementaryChain { coeff, factors })
    }

    pub fn degree(&self) -> usize {
        self.factors.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.factors[0].rows()
    }

    pub fn factors(&self) -> &[ComplexMatrix] {
        &self.factors
    }

    /// True if some slot `≥ 1` holds a multiple of the identity.
    pub fn has_scalar_slot(&self) -> bool {
        self.factors[1..]
            .iter()
            .any(|f| f.is_scalar_multiple_of_identity(SCALAR_SLOT_TOL))
    }
}

/// A finite formal sum of elementary chains over `M_d(ℂ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    algebra_dim: usize,
    terms: Vec<ElementaryChain>,
}

impl Chain {
    pub fn zero(algebra_dim: usize) -> Self {
        Chain {
            algebra_dim,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(algebra_dim: usize, terms: Vec<ElementaryChain>) -> Result<Self> {
        let mut c = Chain::zero(algebra_dim);
        for t in terms {
            c.push(t)?;
        }
        Ok(c)
    }

    /// The degree-0 chain `(1)`.
    pub fn unit(algebra_dim: usize) -> Self {
        Chain::elementary(c64(1.0, 0.0), vec![ComplexMatrix::identity(algebra_dim)]).expect("square")
    }

    pub fn elementary(coeff: Complex64, factors: Vec<ComplexMatrix>) -> Result<Self> {
        let t = ElementaryChain::new(coeff, factors)?;
        Ok(Chain {
            algebra_dim: t.dim(),
            terms: vec![t],
        })
    }

    pub fn push(&mut self, term: ElementaryChain) -> Result<()> {
        if term.dim() != self.algebra_dim {
            return Err(Error::DimensionMismatch(format!(
                "term over M_{} pushed into a chain over M_{}",
                term.dim(),
                self.algebra_dim
            )));
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    pub fn terms(&self) -> &[ElementaryChain] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.degree()).max()
    }

    /// Terms of degree exactly `n`.
    pub fn homogeneous(&self, n: usize) -> Chain {
        Chain {
            algebra_dim: self.algebra_dim,
            terms: self.terms.iter().filter(|t| t.degree() == n).cloned().collect(),
        }
    }

    /// Distinct degrees present, ascending.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.terms.iter().map(|t| t.degree()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn scaled(&self, s: Complex64) -> Chain {
        let terms = self
            .terms
            .iter()
            .map(|t| ElementaryChain {
                coeff: t.coeff * s,
                ..t.clone()
            })
            .collect();
        Chain {
            algebra_dim: self.algebra_dim,
            terms,
        }
    }

    pub fn plus(&self, other: &Chain) -> Result<Chain> {
        self.check_same_algebra(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Chain {
            algebra_dim: self.algebra_dim,
            terms,
        })
    }

    pub fn minus(&self, other: &Chain) -> Result<Chain> {
        self.plus(&other.scaled(c64(-1.0, 0.0)))
    }

    fn check_same_algebra(&self, other: &Chain) -> Result<()> {
        if self.algebra_dim != other.algebra_dim {
            return Err(Error::DimensionMismatch(format!(
                "chains over M_{} and M_{}",
                self.algebra_dim, other.algebra_dim
            )));
        }
        Ok(())
    }

    /// Drops zero terms and terms with a scalar in some slot `≥ 1`.
    pub fn normalized(mut self) -> Chain {
        self.terms.retain(|t| t.coeff != c64(0.0, 0.0) && !t.has_scalar_slot());
        self
    }

    /// Applies `f` to every factor (e.g. a change of basis).
    pub fn map_factors(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Chain> {
        let terms: Vec<ElementaryChain> = self
            .terms
            .iter()
            .map(|t| ElementaryChain::new(t.coeff, t.factors.iter().map(&f).collect()))
            .collect::<Result<_>>()?;
        let dim = terms.first().map_or(self.algebra_dim, |t| t.dim());
        Chain::from_terms(dim, terms)
    }

    /// Replaces slot `i` of every term by `slot + λ·1`.
    pub fn shift_slot_by_scalar(&self, slot: usize, lambda: Complex64) -> Chain {
        let id = ComplexMatrix::identity(self.algebra_dim).scale(lambda);
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                if slot < t.factors.len() {
                    t.factors[slot] = &t.factors[slot] + &id;
                }
                t
            })
            .collect();
        Chain {
            algebra_dim: self.algebra_dim,
            terms,
        }
    }

    /// Sum over terms of `|coeff| ∏ ‖aⁱ‖` for the terms of degree `n`; stands in
    /// for the projective tensor norm.
    pub fn surrogate_norm(&self, n: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.degree() == n)
            .map(|t| t.coeff.norm() * t.factors.iter().map(ComplexMatrix::norm_op).product::<f64>())
            .sum()
    }

    /// Zero test modulo the tensor relations and scalars in slots `≥ 1`.
    ///
    /// For every degree present the chain is paired with `probes` random
    /// functionals `(a⁰,…,aⁿ) ↦ ∏ tr(Rᵢaⁱ)`, where `Rᵢ` is trace-free for
    /// `i ≥ 1`. Returns the largest `|Σ xₜ| / (1 + Σ |xₜ|)` over probes, where
    /// `xₜ` is the contribution of term `t`. A nonzero chain is detected with
    /// probability one.
    pub fn probe_residual(&self, probes: usize, seed: u64) -> f64 {
        let d = self.algebra_dim;
        let mut worst: f64 = 0.0;
        for n in self.degrees() {
            for k in 0..probes {
                let mut rng = Rng::stream(seed, (n * 1000 + k) as u64);
                let functionals: Vec<ComplexMatrix> = (0..=n)
                    .map(|slot| {
                        let r = rng.general(d);
                        if slot == 0 {
                            r
                        } else {
                            let shift = ComplexMatrix::identity(d).scale(r.trace() / d as f64);
                            &r - &shift
                        }
                    })
                    .collect();
                let (mut sum, mut abs) = (c64(0.0, 0.0), 0.0);
                for t in self.terms.iter().filter(|t| t.degree() == n) {
                    let mut x = t.coeff;
                    for (r, a) in functionals.iter().zip(&t.factors) {
                        x *= trace_of_product(r, a);
                    }
                    sum += x;
                    abs += x.norm();
                }
                worst = worst.max(sum.norm() / (1.0 + abs));
            }
        }
        worst
    }

    /// [`probe_residual`](Self::probe_residual) of `self - other`.
    pub fn residual_against(&self, other: &Chain) -> Result<f64> {
        Ok(self.minus(other)?.probe_residual(PROBES, PROBE_SEED))
    }
}

/// Probe count and seed used by [`Chain::residual_against`].
pub const PROBES: usize = 3;
pub const PROBE_SEED: u64 = 0x5eed;

fn trace_of_product(r: &ComplexMatrix, a: &ComplexMatrix) -> Complex64 {
    let n = r.rows();
    let mut s = c64(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += r.get(i, j) * a.get(j, i);
        }
    }
    s
}

/// `b(a⁰,…,aⁿ) = Σ_{i<n} (−1)ⁱ (…, aⁱaⁱ⁺¹, …) + (−1)ⁿ (aⁿa⁰, a¹, …, aⁿ⁻¹)`.
pub fn hochschild_b(alpha: &Chain) -> Chain {
    let mut out = Chain::zero(alpha.algebra_dim);
    for t in &alpha.terms {
        let n = t.degree();
        if n == 0 {
            continue;
        }
        let f = &t.factors;
        for i in 0..n {
            let mut factors = Vec::with_capacity(n);
            factors.extend(f[..i].iter().cloned());
            factors.push(&f[i] * &f[i + 1]);
            factors.extend(f[i + 2..].iter().cloned());
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            out.terms.push(ElementaryChain {
                coeff: t.coeff * sign,
                factors,
            });
        }
        let mut factors = Vec::with_capacity(n);
        factors.push(&f[n] * &f[0]);
        factors.extend(f[1..n].iter().cloned());
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        out.terms.push(ElementaryChain {
            coeff: t.coeff * sign,
            factors,
        });
    }
    out.normalized()
}

/// `B(a⁰,…,aⁿ) = Σᵢ (−1)^{ni} (1, aⁱ, …, aⁿ, a⁰, …, aⁱ⁻¹)`.
pub fn connes_b(alpha: &Chain) -> Chain {
    let unit = ComplexMatrix::identity(alpha.algebra_dim);
    let mut out = Chain::zero(alpha.algebra_dim);
    for t in &alpha.terms {
        let n = t.degree();
        for i in 0..=n {
            let mut factors = Vec::with_capacity(n + 2);
            factors.push(unit.clone());
            factors.extend(t.factors[i..].iter().cloned());
            factors.extend(t.factors[..i].iter().cloned());
            let sign = if (n * i) % 2 == 0 { 1.0 } else { -1.0 };
            out.terms.push(ElementaryChain {
                coeff: t.coeff * sign,
                factors,
            });
        }
    }
    out.normalized()
}

fn check_output_size(terms: u128) -> Result<()> {
    if terms > MAX_OUTPUT_TERMS {
        return Err(Error::TooManyTerms {
            terms,
            limit: MAX_OUTPUT_TERMS,
        });
    }
    Ok(())
}

/// The shuffle product `α × β`, a chain over `A₁ ⊗ A₂`.
pub fn shuffle_product(alpha: &Chain, beta: &Chain) -> Result<Chain> {
    let (d1, d2) = (alpha.algebra_dim, beta.algebra_dim);
    let expected: u128 = alpha
        .terms
        .iter()
        .flat_map(|a| {
            beta.terms
                .iter()
                .map(move |b| binomial((a.degree() + b.degree()) as u64, a.degree() as u64))
        })
        .sum();
    check_output_size(expected)?;

    let (id1, id2) = (ComplexMatrix::identity(d1), ComplexMatrix::identity(d2));
    let mut cache: HashMap<(usize, usize), Vec<_>> = HashMap::new();
    let mut out = Chain::zero(d1 * d2);
    for a in &alpha.terms {
        let left: Vec<ComplexMatrix> = a.factors[1..].iter().map(|x| kron(x, &id2)).collect();
        for b in &beta.terms {
            let (p, q) = (a.degree(), b.degree());
            let mut elements = left.clone();
            elements.extend(b.factors[1..].iter().map(|y| kron(&id1, y)));
            let first = kron(&a.factors[0], &b.factors[0]);
            for chi in cache.entry((p, q)).or_insert_with(|| enumerate_shuffles(p, q)).iter() {
                let mut factors = Vec::with_capacity(p + q + 1);
                factors.push(first.clone());
                factors.extend(chi.apply(&elements));
                out.terms.push(ElementaryChain {
                    coeff: a.coeff * b.coeff * f64::from(chi.sign()),
                    factors,
                });
            }
        }
    }
    Ok(out.normalized())
}

/// `1 ⊗ ⋯ ⊗ x ⊗ ⋯ ⊗ 1` with `x` in tensor position `slot`.
fn embed(x: &ComplexMatrix, slot: usize, dims: &[usize]) -> ComplexMatrix {
    dims.iter()
        .enumerate()
        .fold(ComplexMatrix::identity(1), |acc, (i, &d)| {
            if i == slot {
                kron(&acc, x)
            } else {
                kron(&acc, &ComplexMatrix::identity(d))
            }
        })
}

/// `B_r(α₁, …, α_r) = Σ_σ σ(1, a₁⁰, …, a₁^{p₁}, …, a_r⁰, …, a_r^{p_r})`, summed
/// over `(p₁,…,p_r)`-cyclic shuffles, a chain over `A₁ ⊗ ⋯ ⊗ A_r` of degree
/// `r + Σpᵢ`.
pub fn br_operation(chains: &[Chain]) -> Result<Chain> {
    if chains.is_empty() {
        return Err(Error::InvalidInput("B_r needs at least one chain".into()));
    }
    let dims: Vec<usize> = chains.iter().map(|c| c.algebra_dim).collect();
    let total_dim: usize = dims.iter().product();

    // term tuples, last chain varying fastest
    let mut tuples: Vec<Vec<&ElementaryChain>> = vec![vec![]];
    for c in chains {
        tuples = tuples
            .into_iter()
            .flat_map(|prefix| {
                c.terms.iter().map(move |t| {
                    let mut v = prefix.clone();
                    v.push(t);
                    v
                })
            })
            .collect();
    }
    let expected: u128 = tuples
        .iter()
        .map(|tuple| cyclic_shuffle_count(&tuple.iter().map(|t| t.degree()).collect::<Vec<_>>()))
        .sum();
    check_output_size(expected)?;

    let unit = ComplexMatrix::identity(total_dim);
    let mut cache: HashMap<Vec<usize>, Vec<_>> = HashMap::new();
    let mut out = Chain::zero(total_dim);
    for tuple in tuples {
        let degrees: Vec<usize> = tuple.iter().map(|t| t.degree()).collect();
        let coeff = tuple.iter().fold(c64(1.0, 0.0), |acc, t| acc * t.coeff);
        let elements: Vec<ComplexMatrix> = tuple
            .iter()
            .enumerate()
            .flat_map(|(slot, t)| t.factors.iter().map(|x| embed(x, slot, &dims)).collect::<Vec<_>>())
            .collect();
        if !cache.contains_key(&degrees) {
            cache.insert(degrees.clone(), enumerate_cyclic_shuffles(&degrees)?);
        }
        for sigma in &cache[&degrees] {
            let mut factors = Vec::with_capacity(elements.len() + 1);
            factors.push(unit.clone());
            factors.extend(sigma.apply(&elements));
            out.terms.push(ElementaryChain {
                coeff: coeff * f64::from(sigma.sign()),
                factors,
            });
        }
    }
    Ok(out.normalized())
}

/// The cyclic shuffle product `α ×′ β = B₂(α, β)`.
pub fn cyclic_shuffle_product(alpha: &Chain, beta: &Chain) -> Result<Chain> {
    br_operation(&[alpha.clone(), beta.clone()])
}

/// `‖α‖_λ = Σₙ λⁿ ‖αₙ‖ / √(n!)` with the surrogate norm of
/// [`Chain::surrogate_norm`].
pub fn entire_norm(alpha: &Chain, lambda: u32) -> Result<f64> {
    if lambda == 0 {
        return Err(Error::InvalidInput("λ must be a positive integer".into()));
    }
    let lambda = f64::from(lambda);
    Ok(alpha
        .degrees()
        .into_iter()
        .map(|n| {
            let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
            lambda.powi(n as i32) * alpha.surrogate_norm(n) / (0.5 * log_fact).exp()
        })
        .sum())
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    coeff: [f64; 2],
    factors: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ChainRepr {
    algebra_dim: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for Chain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChainRepr {
            algebra_dim: self.algebra_dim,
            terms: self
                .terms
                .iter()
                .map(|t| TermRepr {
                    coeff: [t.coeff.re, t.coeff.im],
                    factors: t.factors.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Chain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ChainRepr::deserialize(d)?;
        let terms = repr
            .terms
            .into_iter()
            .map(|t| ElementaryChain::new(c64(t.coeff[0], t.coeff[1]), t.factors))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Chain::from_terms(repr.algebra_dim, terms).map_err(serde::de::Error::custom)
    }
}

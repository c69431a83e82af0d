//! The JLO cochain of a finite-dimensional spectral triple,
//!
//! ```text
//! Ch^n(a⁰,…,aⁿ) = ∫_{Σⁿ} Str(a⁰ e^{−t¹Δ} da¹ e^{−(t²−t¹)Δ} ⋯ daⁿ e^{−(1−tⁿ)Δ}) dt,
//! ```
//!
//! its `B`-transgressed companion `BCh(α) = ∫⟨dα⟩`, the perturbed cocycle,
//! the Chern character of projections and the index pairing.
//!
//! Exact evaluation works in an eigenbasis `U` of `Δ` chosen to be even, so
//! `Δ = UΛU*` with `Λ` diagonal and `γ` unchanged. With `Xₖ = U*[D,aᵏ]U` the
//! simplex integral is the `(0, n)` block of the exponential of the block
//! bidiagonal matrix with `−Λ` on the diagonal and `X₁,…,Xₙ` above it. Only
//! the first block row of that exponential is needed, and it is built by a
//! shifted Taylor recursion. Wide spectra fall back to scaling and squaring
//! on the block upper triangle. The same routine with `1×1` blocks
//! gives divided differences of `e^{−x}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::chains::{br_operation, connes_b, shuffle_product, Chain, ElementaryChain};
use crate::combinatorics::{factorial, SimplexPoint};
use crate::error::{Error, Result};
use crate::matrix::{c64, ComplexMatrix};
use crate::random::Rng;
use crate::spectral::{Idempotent, SpectralTripleFD};

/// Highest chain degree the evaluators accept.
pub const MAX_DEGREE: usize = 12;
/// Pairing series stop once a term falls below this magnitude.
pub const PAIRING_TERM_TOL: f64 = 1e-12;
/// Default distance allowed between a pairing and an integer.
pub const PAIRING_INTEGER_TOL: f64 = 0.01;

/// Above this half spread of the eigenvalues of `Δ` the Taylor recursion is
/// replaced by scaling and squaring. The recursion loses about `e^{spread}` in
/// relative accuracy; the `Xₖ` enter at most `n` times per term and do not
/// slow convergence.
const TAYLOR_SPREAD_LIMIT: f64 = 3.0;
/// Half spread of the scaled diagonal, before squaring.
const SQUARING_TARGET: f64 = 0.5;
const MC_CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Method {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// A value with its standard error (zero for exact evaluation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Complex64,
    pub std_error: f64,
}

impl Estimate {
    fn exact(value: Complex64) -> Self {
        Estimate { value, std_error: 0.0 }
    }
}

/// `∫_{Σⁿ} e^{−t¹μ₀ − (t²−t¹)μ₁ − ⋯ − (1−tⁿ)μₙ} dt`, the divided difference of
/// `e^{−x}` at `μ₀,…,μₙ` up to the sign `(−1)ⁿ`. Stable under coincident nodes.
pub fn divided_diff_exp(mu: &[f64]) -> Result<f64> {
    if mu.is_empty() {
        return Err(Error::InvalidInput("divided difference needs at least one node".into()));
    }
    if let Some(&bad) = mu.iter().find(|&&m| !(m >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "divided difference nodes must be non-negative, got {bad}"
        )));
    }
    let one = DMatrix::from_element(1, 1, c64(1.0, 0.0));
    let diags: Vec<Vec<f64>> = mu.iter().map(|&m| vec![m]).collect();
    let xs = vec![one.clone(); mu.len() - 1];
    Ok(simplex_trace(&diags, &one, &xs, None).re)
}

/// `tr(head · E)` where `E = ∫_{Σⁿ} e^{−t¹Λ₀} X₁ e^{−(t²−t¹)Λ₁} ⋯ Xₙ e^{−(1−tⁿ)Λₙ} dt`
/// and `Λⱼ = diag(diags[j])`.
///
/// With `split = Some(dim_even)` every `Xₖ` is taken to be odd for that
/// grading; only the part of `head` with the parity of `n` can contribute, and
/// products skip the vanishing blocks.
fn simplex_trace(
    diags: &[Vec<f64>],
    head: &DMatrix<Complex64>,
    xs: &[DMatrix<Complex64>],
    split: Option<usize>,
) -> Complex64 {
    let n = xs.len();
    debug_assert_eq!(diags.len(), n + 1);
    if n == 0 {
        return diags[0]
            .iter()
            .enumerate()
            .map(|(i, l)| head[(i, i)] * (-l).exp())
            .sum();
    }
    let all = diags.iter().flatten().copied();
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l), hi.max(l)));
    let shift = 0.5 * (lo + hi);
    let half_spread = 0.5 * (hi - lo);
    let shifted: Vec<Vec<f64>> = diags.iter().map(|d| d.iter().map(|l| shift - l).collect()).collect();
    if half_spread > TAYLOR_SPREAD_LIMIT {
        return (head * squared_simplex_trace(&shifted, head, xs, half_spread)).trace() * (-shift).exp();
    }

    // row[j] is block (0, j) of Mᵏ/k!, of parity n + j under the split
    let d = head.nrows();
    let mut row: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(d, d); n + 1];
    row[0] = match split {
        Some(de) => parity_part(head, de, n % 2 == 1),
        None => head.clone(),
    };
    let head = &row[0].clone();
    let mut acc = DMatrix::zeros(d, d);
    for k in 1.. {
        let inv_k = c64(1.0 / k as f64, 0.0);
        for j in (0..=n.min(k)).rev() {
            let mut next = row[j].clone();
            for (c, &w) in shifted[j].iter().enumerate() {
                next.column_mut(c).scale_mut(w);
            }
            if j > 0 {
                match split {
                    Some(de) => add_odd_product(&mut next, &row[j - 1], &xs[j - 1], de, (n + j - 1) % 2 == 1),
                    None => next += &row[j - 1] * &xs[j - 1],
                }
            }
            row[j] = next * inv_k;
        }
        if k >= n {
            acc += &row[n];
            let tail = row.iter().map(|m| m.norm()).fold(0.0, f64::max);
            if tail <= f64::EPSILON * 1e-3 * (acc.norm() + head.norm()) || k > 400 {
                break;
            }
        }
    }
    acc.trace() * (-shift).exp()
}

/// The even (`odd = false`) or odd block part of `m` for the grading
/// `C^de ⊕ C^{d−de}`.
fn parity_part(m: &DMatrix<Complex64>, de: usize, odd: bool) -> DMatrix<Complex64> {
    let d = m.nrows();
    let mut out = m.clone();
    let (e, o) = ((0, de), (de, d - de));
    let zero_blocks = if odd { [(e, e), (o, o)] } else { [(e, o), (o, e)] };
    for ((r0, rn), (c0, cn)) in zero_blocks {
        out.view_mut((r0, c0), (rn, cn)).fill(Complex64::default());
    }
    out
}

/// `acc += r·x` for `r` of the given parity and odd `x`.
fn add_odd_product(
    acc: &mut DMatrix<Complex64>,
    r: &DMatrix<Complex64>,
    x: &DMatrix<Complex64>,
    de: usize,
    r_odd: bool,
) {
    let d = r.nrows();
    let (e, o) = ((0, de), (de, d - de));
    // (row block of r, inner block, column block of x)
    let products = if r_odd {
        [(e, o, e), (o, e, o)]
    } else {
        [(e, e, o), (o, o, e)]
    };
    let one = c64(1.0, 0.0);
    for ((r0, rn), (i0, i_n), (c0, cn)) in products {
        if rn == 0 || i_n == 0 || cn == 0 {
            continue;
        }
        acc.view_mut((r0, c0), (rn, cn))
            .gemm(one, &r.view((r0, i0), (rn, i_n)), &x.view((i0, c0), (i_n, cn)), one);
    }
}

/// Scaling and squaring on the block upper triangle, for operators too large
/// for the direct recursion. `shifted[j] = shift − Λⱼ`.
fn squared_simplex_trace(
    shifted: &[Vec<f64>],
    head: &DMatrix<Complex64>,
    xs: &[DMatrix<Complex64>],
    half_spread: f64,
) -> DMatrix<Complex64> {
    let (d, n) = (head.nrows(), xs.len());
    let squarings = (half_spread / SQUARING_TARGET).log2().ceil().max(0.0) as i32;
    let scale = 0.5f64.powi(squarings);
    let xs: Vec<DMatrix<Complex64>> = xs.iter().map(|x| x * c64(scale, 0.0)).collect();

    // e[i][j - i] is block (i, j); the diagonal blocks are exact
    let mut e: Vec<Vec<DMatrix<Complex64>>> = (0..=n)
        .map(|i| {
            let mut row = vec![DMatrix::zeros(d, d); n + 1 - i];
            row[0] = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                d,
                shifted[i].iter().map(|w| c64((w * scale).exp(), 0.0)),
            ));
            row
        })
        .collect();
    // off-diagonal blocks of exp(M/2^s) by Taylor series in M, row by row
    for i in 0..n {
        let mut term: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(d, d); n + 1 - i];
        term[0] = DMatrix::identity(d, d);
        for k in 1.. {
            let inv_k = c64(1.0 / k as f64, 0.0);
            for j in (0..=(n - i).min(k)).rev() {
                let mut next = term[j].clone();
                for (c, &w) in shifted[i + j].iter().enumerate() {
                    next.column_mut(c).scale_mut(w * scale);
                }
                if j > 0 {
                    next += &term[j - 1] * &xs[i + j - 1];
                }
                term[j] = next * inv_k;
            }
            for j in 1..=(n - i).min(k) {
                e[i][j] += &term[j];
            }
            let tail = term.iter().map(|m| m.norm()).fold(0.0, f64::max);
            if (k >= n - i && tail <= f64::EPSILON * 1e-3) || k > 200 {
                break;
            }
        }
    }
    for _ in 0..squarings {
        let next: Vec<Vec<DMatrix<Complex64>>> = (0..=n)
            .map(|i| {
                (i..=n)
                    .map(|j| {
                        let mut sum = DMatrix::zeros(d, d);
                        for k in i..=j {
                            sum += &e[i][k - i] * &e[k][j - k];
                        }
                        sum
                    })
                    .collect()
            })
            .collect();
        e = next;
    }
    e.swap_remove(0).swap_remove(n)
}

/// A chain term expressed in the eigenbasis of `Δ`: `γ·U*a⁰U` and `U*daᵏU`.
struct PreparedTerm {
    coeff: Complex64,
    head: DMatrix<Complex64>,
    xs: Vec<DMatrix<Complex64>>,
}

impl PreparedTerm {
    fn integrand(&self, lambda: &[f64], t: &[f64]) -> Complex64 {
        let mut p = self.head.clone();
        let mut prev = 0.0;
        for (k, x) in self.xs.iter().enumerate() {
            for (j, l) in lambda.iter().enumerate() {
                p.column_mut(j).scale_mut((-(t[k] - prev) * l).exp());
            }
            p = &p * x;
            prev = t[k];
        }
        for (j, l) in lambda.iter().enumerate() {
            p.column_mut(j).scale_mut((-(1.0 - prev) * l).exp());
        }
        p.trace()
    }
}

/// Which cochain to evaluate: `Ch` or `BCh` (slot 0 replaced by `da⁰`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot0 {
    Plain,
    Differentiated,
}

/// Evaluates JLO-type cochains of one triple.
pub struct JloEvaluator<'a> {
    triple: &'a SpectralTripleFD,
    method: Method,
}

impl<'a> JloEvaluator<'a> {
    pub fn new(triple: &'a SpectralTripleFD, method: Method) -> Self {
        JloEvaluator { triple, method }
    }

    pub fn exact(triple: &'a SpectralTripleFD) -> Self {
        Self::new(triple, Method::Exact)
    }

    pub fn triple(&self) -> &SpectralTripleFD {
        self.triple
    }

    fn prepare(&self, term: &ElementaryChain, slot0: Slot0) -> Result<PreparedTerm> {
        let eig = self.triple.laplacian_eigen();
        let signs = self.triple.space().signs();
        let first = &term.factors()[0];
        let first = match slot0 {
            Slot0::Plain => first.clone(),
            Slot0::Differentiated => self.triple.commutator_d(first)?,
        };
        let mut head = eig.to_eigenbasis(&first).into_dmatrix();
        for (i, s) in signs.iter().enumerate() {
            if *s < 0.0 {
                head.row_mut(i).neg_mut();
            }
        }
        let xs = term.factors()[1..]
            .iter()
            .map(|a| Ok(eig.to_eigenbasis(&self.triple.commutator_d(a)?).into_dmatrix()))
            .collect::<Result<_>>()?;
        Ok(PreparedTerm {
            coeff: term.coeff,
            head,
            xs,
        })
    }

    fn check(&self, alpha: &Chain) -> Result<()> {
        if alpha.algebra_dim() != self.triple.dim() {
            return Err(Error::DimensionMismatch(format!(
                "chain over M_{} evaluated on a triple of dimension {}",
                alpha.algebra_dim(),
                self.triple.dim()
            )));
        }
        if let Some(degree) = alpha.max_degree().filter(|&d| d > MAX_DEGREE) {
            return Err(Error::DegreeTooLarge {
                degree,
                limit: MAX_DEGREE,
            });
        }
        Ok(())
    }

    fn evaluate(&self, alpha: &Chain, slot0: Slot0) -> Result<Estimate> {
        self.check(alpha)?;
        let terms: Vec<PreparedTerm> = alpha
            .terms()
            .par_iter()
            .map(|t| self.prepare(t, slot0))
            .collect::<Result<_>>()?;
        let lambda = &self.triple.laplacian_eigen().eigenvalues;
        // the eigenbasis is even, so each Xₖ = U*[D,aᵏ]U is odd
        let split = self.triple.space().dim_even;
        match self.method {
            Method::Exact => {
                let parts: Vec<Complex64> = terms
                    .par_iter()
                    .map(|t| {
                        let diags = vec![lambda.clone(); t.xs.len() + 1];
                        t.coeff * simplex_trace(&diags, &t.head, &t.xs, Some(split))
                    })
                    .collect();
                Ok(Estimate::exact(parts.into_iter().sum()))
            }
            Method::MonteCarlo { samples, seed } => Ok(monte_carlo(&terms, lambda, samples, seed)),
        }
    }

    /// `Ch_D(α)`.
    pub fn cochain(&self, alpha: &Chain) -> Result<Estimate> {
        self.evaluate(alpha, Slot0::Plain)
    }

    /// `BCh_D(α) = ∫⟨da⁰, a¹, …, aⁿ⟩`.
    pub fn bch(&self, alpha: &Chain) -> Result<Estimate> {
        self.evaluate(alpha, Slot0::Differentiated)
    }

    /// `Ch^pert(α) = Ch(α) + BCh(α)/√2`.
    pub fn perturbed(&self, alpha: &Chain) -> Result<Estimate> {
        let ch = self.cochain(alpha)?;
        let bch = self.bch(alpha)?;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Ok(Estimate {
            value: ch.value + bch.value * r,
            std_error: ch.std_error + bch.std_error * r,
        })
    }

    /// The integrand at a simplex point.
    pub fn integrand(&self, factors: &[ComplexMatrix], t: &SimplexPoint) -> Result<Complex64> {
        let term = ElementaryChain::new(c64(1.0, 0.0), factors.to_vec())?;
        if t.degree() != term.degree() {
            return Err(Error::DimensionMismatch(format!(
                "simplex point of dimension {} for a chain of degree {}",
                t.degree(),
                term.degree()
            )));
        }
        self.check(&Chain::from_terms(term.dim(), vec![term.clone()])?)?;
        let prepared = self.prepare(&term, Slot0::Plain)?;
        Ok(prepared.integrand(&self.triple.laplacian_eigen().eigenvalues, t.coords()))
    }
}

/// Per degree, samples `t ∈ Σⁿ` as sorted uniforms and averages the summed
/// integrand of all terms of that degree; the simplex volume is `1/n!`.
fn monte_carlo(terms: &[PreparedTerm], lambda: &[f64], samples: u64, seed: u64) -> Estimate {
    let mut degrees: Vec<usize> = terms.iter().map(|t| t.xs.len()).collect();
    degrees.sort_unstable();
    degrees.dedup();
    let mut value = c64(0.0, 0.0);
    let mut variance = 0.0;
    for n in degrees {
        let group: Vec<&PreparedTerm> = terms.iter().filter(|t| t.xs.len() == n).collect();
        let f = |t: &[f64]| {
            group
                .iter()
                .map(|term| term.coeff * term.integrand(lambda, t))
                .sum::<Complex64>()
        };
        if n == 0 {
            value += f(&[]);
            continue;
        }
        let chunks = samples.div_ceil(MC_CHUNK);
        let partial: Vec<(Complex64, f64, u64)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = Rng::stream(seed, ((n as u64) << 40) | c);
                let count = MC_CHUNK.min(samples - c * MC_CHUNK);
                let (mut sum, mut sq) = (c64(0.0, 0.0), 0.0);
                for _ in 0..count {
                    let x = f(&rng.simplex_point(n));
                    sum += x;
                    sq += x.norm_sqr();
                }
                (sum, sq, count)
            })
            .collect();
        let (sum, sq, count) = partial
            .into_iter()
            .fold((c64(0.0, 0.0), 0.0, 0u64), |(a, b, c), (x, y, z)| (a + x, b + y, c + z));
        let m = count as f64;
        let mean = sum / m;
        let var = ((sq / m - mean.norm_sqr()) * m / (m - 1.0).max(1.0)).max(0.0);
        let volume = 1.0 / factorial(n as u64) as f64;
        value += mean * volume;
        variance += var / m * volume * volume;
    }
    Estimate {
        value,
        std_error: variance.sqrt(),
    }
}

/// Exact `Ch_D(α)`.
pub fn jlo_cochain(triple: &SpectralTripleFD, alpha: &Chain) -> Result<Complex64> {
    Ok(JloEvaluator::exact(triple).cochain(alpha)?.value)
}

/// Exact `BCh_D(α)`.
pub fn bch_cochain(triple: &SpectralTripleFD, alpha: &Chain) -> Result<Complex64> {
    Ok(JloEvaluator::exact(triple).bch(alpha)?.value)
}

/// Exact `Ch^pert_D(α) = Ch_D(α) + BCh_D(α)/√2`.
pub fn perturbed_cochain(triple: &SpectralTripleFD, alpha: &Chain) -> Result<Complex64> {
    Ok(JloEvaluator::exact(triple).perturbed(alpha)?.value)
}

/// `δα = (1/√2)·Σ coeff·([D,a⁰], a¹, …, aⁿ)`.
pub fn delta_chain(triple: &SpectralTripleFD, alpha: &Chain) -> Result<Chain> {
    let r = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut out = Chain::zero(alpha.algebra_dim());
    for t in alpha.terms() {
        let mut factors = t.factors().to_vec();
        factors[0] = triple.commutator_d(&factors[0])?;
        out.push(ElementaryChain::new(t.coeff * r, factors)?)?;
    }
    Ok(out)
}

/// `Ch^pert_D(α)` computed as `Ch_D((1 + δ)α)`.
pub fn perturbed_cochain_via_delta(triple: &SpectralTripleFD, alpha: &Chain) -> Result<Complex64> {
    jlo_cochain(triple, &alpha.plus(&delta_chain(triple, alpha)?)?)
}

/// Reference evaluation by summing over eigenbasis index strings, each weighted
/// by [`divided_diff_exp`] of its eigenvalue string. Costs `dⁿ⁺¹` per term.
pub fn jlo_cochain_reference(triple: &SpectralTripleFD, alpha: &Chain) -> Result<Complex64> {
    let ev = JloEvaluator::exact(triple);
    ev.check(alpha)?;
    let lambda = &triple.laplacian_eigen().eigenvalues;
    let d = lambda.len();
    let mut total = c64(0.0, 0.0);
    for term in alpha.terms() {
        let t = ev.prepare(term, Slot0::Plain)?;
        let n = t.xs.len();
        let mut idx = vec![0usize; n + 1];
        loop {
            // head[iₙ, i₀] X₁[i₀, i₁] ⋯ Xₙ[iₙ₋₁, iₙ]
            let mut w = t.head[(idx[n], idx[0])];
            for k in 0..n {
                w *= t.xs[k][(idx[k], idx[k + 1])];
            }
            if w != c64(0.0, 0.0) {
                let mu: Vec<f64> = idx.iter().map(|&i| lambda[i]).collect();
                total += t.coeff * w * divided_diff_exp(&mu)?;
            }
            let mut k = 0;
            while k <= n {
                idx[k] += 1;
                if idx[k] < d {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k > n {
                break;
            }
        }
    }
    Ok(total)
}

/// The Chern character of a projection truncated at degree `max_degree`:
/// `Ch₀(e) = (e)` and `Ch₂ₙ(e) = (−1)ⁿ (2n)!/n! · (e − ½, e, …, e)`.
pub fn chern_idempotent(e: &Idempotent, max_degree: usize) -> Result<Chain> {
    if max_degree % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "Chern character truncation must be even, got {max_degree}"
        )));
    }
    e.require_projection()?;
    let d = e.dim();
    let shifted = &e.e - &ComplexMatrix::identity(d).scale_real(0.5);
    let mut chain = Chain::elementary(c64(1.0, 0.0), vec![e.e.clone()])?;
    for n in 1..=max_degree / 2 {
        let coeff = if n % 2 == 0 { 1.0 } else { -1.0 } * (factorial(2 * n as u64) / factorial(n as u64)) as f64;
        let mut factors = vec![shifted.clone()];
        factors.extend(std::iter::repeat_n(e.e.clone(), 2 * n));
        chain.push(ElementaryChain::new(c64(coeff, 0.0), factors)?)?;
    }
    Ok(chain.normalized())
}

/// `⟨Ch_D, Ch(e)⟩` with truncation metadata.
#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub value: Complex64,
    /// Last Chern degree included.
    pub truncation_degree: usize,
    pub last_term: f64,
    pub terms: Vec<Complex64>,
    pub nearest_integer: i64,
    /// Fredholm index of `pDp`, when it could be computed.
    pub target_index: Option<i64>,
}

impl PairingReport {
    pub fn integrality_defect(&self) -> f64 {
        (self.value - c64(self.nearest_integer as f64, 0.0)).norm()
    }

    pub fn agrees(&self) -> bool {
        self.target_index == Some(self.nearest_integer)
    }
}

/// Sums `Ch²ⁿ_D(Ch₂ₙ(e))` over the ampliated triple until a term drops below
/// `1e-12`, then compares with the Fredholm index of the compression.
pub fn index_pairing(triple: &SpectralTripleFD, e: &Idempotent, tol: f64) -> Result<PairingReport> {
    e.require_projection()?;
    if e.dim() != triple.dim() * e.k {
        return Err(Error::DimensionMismatch(format!(
            "idempotent of size {} over a triple of dimension {} with k = {}",
            e.dim(),
            triple.dim(),
            e.k
        )));
    }
    let amp = triple.ampliate(e.k);
    let chern = chern_idempotent(e, MAX_DEGREE)?;
    let ev = JloEvaluator::exact(&amp);
    let mut terms = Vec::new();
    let mut value = c64(0.0, 0.0);
    let mut converged = None;
    for n in (0..=MAX_DEGREE).step_by(2) {
        let term = ev.cochain(&chern.homogeneous(n))?.value;
        terms.push(term);
        value += term;
        if term.norm() < PAIRING_TERM_TOL {
            converged = Some(n);
            break;
        }
    }
    let last_term = terms.last().map_or(0.0, |t| t.norm());
    let truncation_degree = converged.ok_or(Error::NonConvergent {
        degree: MAX_DEGREE,
        last_term,
    })?;
    let nearest = value.re.round();
    if (value - c64(nearest, 0.0)).norm() >= tol {
        return Err(Error::NonIntegerIndex {
            value: value.re,
            tolerance: tol,
        });
    }
    let target_index = triple.compress_by_idempotent(e).and_then(|(c, _)| c.index()).ok();
    Ok(PairingReport {
        value,
        truncation_degree,
        last_term,
        terms,
        nearest_integer: nearest as i64,
        target_index,
    })
}

/// Re-expresses a chain over `kron(A_{T₁}, …)` in the canonical basis of
/// `product = T₁ × ⋯`.
pub fn chain_to_product_basis(
    product: &SpectralTripleFD,
    factors: &[&SpectralTripleFD],
    chain: &Chain,
) -> Result<Chain> {
    let perm = product.factor_basis_permutation(factors)?;
    if chain.algebra_dim() != perm.len() {
        return Err(Error::DimensionMismatch(
            "chain does not live over the product algebra".into(),
        ));
    }
    chain.map_factors(|m| m.permute_symmetric(&perm))
}

/// Both sides of one multiplicativity identity.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

impl IdentityCheck {
    fn new(lhs: Complex64, rhs: Complex64) -> Self {
        IdentityCheck {
            lhs,
            rhs,
            residual: (lhs - rhs).norm(),
        }
    }

    /// `|lhs − rhs| / (1 + |rhs|)`.
    pub fn relative(&self) -> f64 {
        self.residual / (1.0 + self.rhs.norm())
    }
}

/// Part 1: `Ch_{D₁×D₂}(α₁ × α₂)` against `Ch_{D₁}(α₁)·Ch_{D₂}(α₂)`.
pub fn verify_shuffle_multiplicativity(
    t1: &SpectralTripleFD,
    t2: &SpectralTripleFD,
    a1: &Chain,
    a2: &Chain,
) -> Result<IdentityCheck> {
    let product = t1.product(t2);
    let chain = chain_to_product_basis(&product, &[t1, t2], &shuffle_product(a1, a2)?)?;
    let lhs = jlo_cochain(&product, &chain)?;
    Ok(IdentityCheck::new(lhs, jlo_cochain(t1, a1)? * jlo_cochain(t2, a2)?))
}

/// Part 2: `Ch_{D₁×⋯×D_r}(B_r(α₁,…,α_r))` against `(1/r!)·∏ BCh_{Dᵢ}(αᵢ)`.
pub fn verify_cyclic_multiplicativity(triples: &[&SpectralTripleFD], chains: &[Chain]) -> Result<IdentityCheck> {
    if triples.is_empty() || triples.len() != chains.len() {
        return Err(Error::InvalidInput("need one chain per triple".into()));
    }
    let product = triples[1..].iter().fold(triples[0].clone(), |acc, t| acc.product(t));
    let chain = chain_to_product_basis(&product, triples, &br_operation(chains)?)?;
    let lhs = jlo_cochain(&product, &chain)?;
    let mut rhs = c64(1.0 / factorial(triples.len() as u64) as f64, 0.0);
    for (t, a) in triples.iter().zip(chains) {
        rhs *= bch_cochain(t, a)?;
    }
    Ok(IdentityCheck::new(lhs, rhs))
}

/// Either multiplicativity identity. Part 1 takes exactly two
/// triples.
pub fn verify_multiplicativity(triples: &[&SpectralTripleFD], chains: &[Chain], part: u8) -> Result<IdentityCheck> {
    match part {
        1 if triples.len() == 2 && chains.len() == 2 => {
            verify_shuffle_multiplicativity(triples[0], triples[1], &chains[0], &chains[1])
        }
        1 => Err(Error::InvalidInput("part 1 compares exactly two triples".into())),
        2 => verify_cyclic_multiplicativity(triples, chains),
        _ => Err(Error::InvalidInput(format!("unknown part {part}"))),
    }
}

/// `BCh_D(α)` against `Ch_D(Bα)`.
pub fn verify_bch(triple: &SpectralTripleFD, alpha: &Chain) -> Result<IdentityCheck> {
    Ok(IdentityCheck::new(
        bch_cochain(triple, alpha)?,
        jlo_cochain(triple, &connes_b(alpha))?,
    ))
}

/// `Ch^pert_{D₁×D₂}(α × β + α ×′ β)` against `Ch^pert_{D₁}(α)·Ch^pert_{D₂}(β)`.
pub fn verify_perturbed_multiplicativity(
    t1: &SpectralTripleFD,
    t2: &SpectralTripleFD,
    a1: &Chain,
    a2: &Chain,
) -> Result<IdentityCheck> {
    let product = t1.product(t2);
    let sum = shuffle_product(a1, a2)?.plus(&br_operation(&[a1.clone(), a2.clone()])?)?;
    let chain = chain_to_product_basis(&product, &[t1, t2], &sum)?;
    let lhs = perturbed_cochain(&product, &chain)?;
    Ok(IdentityCheck::new(
        lhs,
        perturbed_cochain(t1, a1)? * perturbed_cochain(t2, a2)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::hochschild_b;
    use crate::matrix::GradedSpace;
    use crate::spectral::{flip_triple, trivial_triple};

    fn one() -> Complex64 {
        c64(1.0, 0.0)
    }

    #[test]
    fn divided_difference_examples() {
        assert!((divided_diff_exp(&[0.7]).unwrap() - (-0.7f64).exp()).abs() < 1e-15);
        assert!((divided_diff_exp(&[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        for n in 0..6 {
            let mu = vec![1.3; n + 1];
            let expected = (-1.3f64).exp() / factorial(n as u64) as f64;
            assert!((divided_diff_exp(&mu).unwrap() - expected).abs() < 1e-15 * (1.0 + expected));
        }
        // distinct nodes: (e^{-a} - e^{-b}) / (b - a)
        let (a, b) = (0.3f64, 2.0f64);
        let expected = ((-a).exp() - (-b).exp()) / (b - a);
        assert!((divided_diff_exp(&[a, b]).unwrap() - expected).abs() < 1e-15);
        // large spread goes through the dense path
        let (a, b) = (0.0f64, 40.0f64);
        let expected = ((-a).exp() - (-b).exp()) / (b - a);
        assert!((divided_diff_exp(&[a, b]).unwrap() - expected).abs() < 1e-14);
        assert!(divided_diff_exp(&[-1.0]).is_err());
    }

    #[test]
    fn divided_difference_against_monte_carlo() {
        let mu = [0.0, 1.0, 2.0];
        let mut rng = Rng::seeded(99);
        let samples = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..samples {
            let t = rng.simplex_point(2);
            let x = (-t[0] * mu[0] - (t[1] - t[0]) * mu[1] - (1.0 - t[1]) * mu[2]).exp();
            sum += x;
            sq += x * x;
        }
        let n = samples as f64;
        let mean = sum / n;
        let se = ((sq / n - mean * mean) / (n - 1.0)).sqrt() / 2.0;
        let estimate = mean / 2.0;
        let exact = divided_diff_exp(&mu).unwrap();
        assert!((estimate - exact).abs() < 4.0 * se, "{estimate} vs {exact} ± {se}");
    }

    #[test]
    fn integrand_examples() {
        let t = trivial_triple(GradedSpace::new(1, 1));
        let ev = JloEvaluator::exact(&t);
        let a0 = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        assert!(
            (ev.integrand(&[a0.clone()], &SimplexPoint::new(vec![]).unwrap())
                .unwrap()
                - one())
            .norm()
                < 1e-15
        );

        let f = flip_triple();
        let ev = JloEvaluator::exact(&f);
        let id = ComplexMatrix::identity(2);
        let pt = SimplexPoint::new(vec![0.3]).unwrap();
        assert_eq!(ev.integrand(&[a0.clone(), id], &pt).unwrap(), c64(0.0, 0.0));

        // Δ = I: the value is e^{-1} Str(a⁰ da¹) for every t
        let mut rng = Rng::seeded(1);
        let (x, y) = (rng.even(f.space()), rng.even(f.space()));
        let expected = f.space().supertrace(&(&x * &f.commutator_d(&y).unwrap())).unwrap() * (-1.0f64).exp();
        for s in [0.1, 0.5, 0.9] {
            let v = ev
                .integrand(&[x.clone(), y.clone()], &SimplexPoint::new(vec![s]).unwrap())
                .unwrap();
            assert!((v - expected).norm() < 1e-14);
        }
        assert!(matches!(
            ev.integrand(&[x, y], &SimplexPoint::new(vec![0.1, 0.2]).unwrap()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cochain_examples() {
        let mut rng = Rng::seeded(2);
        let z = trivial_triple(GradedSpace::new(2, 1));
        let a = rng.even(z.space());
        let v = jlo_cochain(&z, &Chain::elementary(one(), vec![a.clone()]).unwrap()).unwrap();
        assert!((v - z.space().supertrace(&a).unwrap()).norm() < 1e-15);

        // Δ = I: Ch^n = e^{-1}/n! Str(a⁰ da¹ ⋯ daⁿ)
        let d = ComplexMatrix::from_real_rows(&[
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
        ]);
        let t = SpectralTripleFD::new(GradedSpace::new(2, 2), d, vec![]).unwrap();
        for n in 0..=4 {
            let factors: Vec<ComplexMatrix> = (0..=n).map(|_| rng.even(t.space())).collect();
            let mut prod = factors[0].clone();
            for f in &factors[1..] {
                prod = &prod * &t.commutator_d(f).unwrap();
            }
            let expected = t.space().supertrace(&prod).unwrap() * (-1.0f64).exp() / factorial(n as u64) as f64;
            let got = jlo_cochain(&t, &Chain::elementary(one(), factors).unwrap()).unwrap();
            assert!((got - expected).norm() < 1e-13, "degree {n}: {got} vs {expected}");
        }
    }

    #[test]
    fn exact_matches_string_sum() {
        let mut rng = Rng::seeded(3);
        for _ in 0..5 {
            let s = rng_space(&mut rng);
            let t = rng.triple(s, 1.2, 0);
            let alpha = rng.chain(t.space(), &[0, 1, 2, 3], 1);
            let a = jlo_cochain(&t, &alpha).unwrap();
            let b = jlo_cochain_reference(&t, &alpha).unwrap();
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()), "{a} vs {b}");
        }
    }

    // 1|1 spaces have scalar Laplacians, on which BCh of degree one vanishes
    fn rng_space(rng: &mut Rng) -> GradedSpace {
        rng.space(3, 4)
    }

    #[test]
    fn wide_divided_difference_uses_squaring() {
        let mu: [f64; 4] = [0.0, 7.0, 19.0, 40.0];
        let closed: f64 = (0..4)
            .map(|j| (-mu[j]).exp() / (0..4).filter(|&k| k != j).map(|k| mu[k] - mu[j]).product::<f64>())
            .sum();
        let got = divided_diff_exp(&mu).unwrap();
        assert!(
            (got - closed).abs() < 1e-13 * closed.abs().max(1e-300) + 1e-17,
            "{got} {closed}"
        );
    }

    #[test]
    fn squaring_path_matches_string_sum() {
        let mut rng = Rng::seeded(4);
        let t = rng.triple(GradedSpace::new(2, 2), 3.5, 0);
        let alpha = rng.chain(t.space(), &[1, 2], 1);
        let a = jlo_cochain(&t, &alpha).unwrap();
        let b = jlo_cochain_reference(&t, &alpha).unwrap();
        assert!((a - b).norm() < 1e-11 * (1.0 + a.norm()));
    }

    #[test]
    fn exact_matches_monte_carlo() {
        let mut rng = Rng::seeded(5);
        for trial in 0..4 {
            let s = rng_space(&mut rng);
            let t = rng.triple(s, 1.0, 0);
            let alpha = rng.chain(t.space(), &[0, 1, 2, 3], 1);
            let exact = jlo_cochain(&t, &alpha).unwrap();
            let mc = JloEvaluator::new(
                &t,
                Method::MonteCarlo {
                    samples: 100_000,
                    seed: trial,
                },
            )
            .cochain(&alpha)
            .unwrap();
            assert!(
                (mc.value - exact).norm() <= 4.0 * mc.std_error + 1e-14,
                "{exact} vs {mc:?}"
            );
        }
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let mut rng = Rng::seeded(6);
        let t = rng.triple(GradedSpace::new(2, 1), 1.0, 0);
        let alpha = rng.chain(t.space(), &[2], 2);
        let m = Method::MonteCarlo {
            samples: 10_000,
            seed: 7,
        };
        let a = JloEvaluator::new(&t, m).cochain(&alpha).unwrap();
        let b = JloEvaluator::new(&t, m).cochain(&alpha).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scalar_slot_invariance() {
        let mut rng = Rng::seeded(8);
        let t = rng.triple(GradedSpace::new(2, 2), 1.0, 0);
        let alpha = rng.chain(t.space(), &[1, 2, 3], 1);
        let base = jlo_cochain(&t, &alpha).unwrap();
        for slot in 1..=3 {
            let shifted = alpha.shift_slot_by_scalar(slot, c64(0.7, -1.1));
            assert!((jlo_cochain(&t, &shifted).unwrap() - base).norm() < 1e-10);
        }
    }

    #[test]
    fn odd_degree_vanishes() {
        let mut rng = Rng::seeded(9);
        let t = rng.triple(GradedSpace::new(3, 2), 1.0, 0);
        for n in [1, 3, 5] {
            let alpha = rng.chain(t.space(), &[n], 2);
            assert!(jlo_cochain(&t, &alpha).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn degree_limit() {
        let t = flip_triple();
        let mut rng = Rng::seeded(10);
        let alpha = rng.chain(t.space(), &[13], 1);
        assert!(matches!(jlo_cochain(&t, &alpha), Err(Error::DegreeTooLarge { .. })));
    }

    #[test]
    fn bch_examples() {
        let mut rng = Rng::seeded(11);
        let t = rng.triple(GradedSpace::new(2, 2), 1.0, 0);
        assert_eq!(bch_cochain(&t, &Chain::unit(4)).unwrap(), c64(0.0, 0.0));
        let z = trivial_triple(GradedSpace::new(2, 1));
        let alpha = rng.chain(z.space(), &[0, 1, 2], 1);
        assert_eq!(bch_cochain(&z, &alpha).unwrap(), c64(0.0, 0.0));
        for _ in 0..5 {
            let alpha = rng.chain(t.space(), &[0, 1, 2, 3], 1);
            assert!(verify_bch(&t, &alpha).unwrap().residual < 1e-9);
        }
    }

    #[test]
    fn jlo_is_a_b_plus_big_b_cocycle() {
        let mut rng = Rng::seeded(12);
        let t = rng.triple(GradedSpace::new(2, 2), 1.0, 0);
        for _ in 0..5 {
            let alpha = rng.chain(t.space(), &[0, 1, 2, 3], 1);
            let boundary = hochschild_b(&alpha).plus(&connes_b(&alpha)).unwrap();
            assert!(jlo_cochain(&t, &boundary).unwrap().norm() < 1e-10);
            assert!(perturbed_cochain(&t, &boundary).unwrap().norm() < 1e-9);
        }
    }

    #[test]
    fn perturbed_forms_agree() {
        let mut rng = Rng::seeded(13);
        let t = rng.triple(GradedSpace::new(2, 1), 1.0, 0);
        for _ in 0..5 {
            let alpha = rng.chain(t.space(), &[0, 1, 2, 3], 1);
            let a = perturbed_cochain(&t, &alpha).unwrap();
            let b = perturbed_cochain_via_delta(&t, &alpha).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
        let z = trivial_triple(GradedSpace::new(1, 2));
        let alpha = rng.chain(z.space(), &[0, 2], 1);
        assert_eq!(perturbed_cochain(&z, &alpha).unwrap(), jlo_cochain(&z, &alpha).unwrap());
    }

    #[test]
    fn chern_character_shape() {
        let e = Idempotent::new(ComplexMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]), 1).unwrap();
        let ch = chern_idempotent(&e, 4).unwrap();
        assert_eq!(ch.degrees(), vec![0, 2, 4]);
        assert_eq!(ch.homogeneous(2).terms()[0].coeff, c64(-2.0, 0.0));
        assert_eq!(ch.homogeneous(4).terms()[0].coeff, c64(12.0, 0.0));
        assert!(chern_idempotent(&e, 3).is_err());
    }

    #[test]
    fn pairing_examples() {
        let z = trivial_triple(GradedSpace::new(2, 1));
        let r = index_pairing(&z, &Idempotent::unit(3), 0.01).unwrap();
        assert_eq!((r.nearest_integer, r.target_index), (1, Some(1)));

        let mut rng = Rng::seeded(14);
        let z = trivial_triple(GradedSpace::new(3, 2));
        let p = Idempotent::new(rng.even_projection(z.space(), 2, 0), 1).unwrap();
        let r = index_pairing(&z, &p, 0.01).unwrap();
        assert_eq!((r.nearest_integer, r.target_index), (2, Some(2)));

        let r = index_pairing(&flip_triple(), &Idempotent::unit(2), 0.01).unwrap();
        assert_eq!((r.nearest_integer, r.target_index), (0, Some(0)));
    }

    #[test]
    fn pairing_with_small_commutators() {
        let mut rng = Rng::seeded(15);
        let space = GradedSpace::new(2, 1);
        let t = rng.triple(space, 0.1, 0);
        let p = Idempotent::new(rng.even_projection(&space, 1, 1), 1).unwrap();
        let r = index_pairing(&t, &p, 0.01).unwrap();
        assert!(r.agrees(), "{r:?}");
        assert!(r.integrality_defect() < 1e-8);
    }

    #[test]
    fn shuffle_multiplicativity() {
        let mut rng = Rng::seeded(16);
        for _ in 0..5 {
            let (s1, s2) = (rng_space(&mut rng), rng_space(&mut rng));
            let (t1, t2) = (rng.triple(s1, 1.0, 0), rng.triple(s2, 1.0, 0));
            let a1 = rng.chain(t1.space(), &[0, 1, 2], 1);
            let a2 = rng.chain(t2.space(), &[0, 1, 2], 1);
            let check = verify_multiplicativity(&[&t1, &t2], &[a1, a2], 1).unwrap();
            assert!(check.relative() < 1e-8, "{check:?}");
        }
    }

    #[test]
    fn cyclic_multiplicativity() {
        let mut rng = Rng::seeded(17);
        for _ in 0..3 {
            let (s1, s2) = (rng_space(&mut rng), rng_space(&mut rng));
            let (t1, t2) = (rng.triple(s1, 1.0, 0), rng.triple(s2, 1.0, 0));
            let a1 = rng.chain(t1.space(), &[1], 1);
            let a2 = rng.chain(t2.space(), &[1], 1);
            let check = verify_multiplicativity(&[&t1, &t2], &[a1, a2], 2).unwrap();
            assert!(check.rhs.norm() > 1e-6, "degenerate check {check:?}");
            assert!(check.residual < 1e-8, "{check:?}");
        }
        let spaces = [GradedSpace::new(1, 1), GradedSpace::new(2, 1), GradedSpace::new(1, 1)];
        let ts: Vec<SpectralTripleFD> = spaces.iter().map(|s| rng.triple(*s, 1.0, 0)).collect();
        let chains: Vec<Chain> = ts.iter().map(|t| rng.chain(t.space(), &[1], 1)).collect();
        let refs: Vec<&SpectralTripleFD> = ts.iter().collect();
        let check = verify_multiplicativity(&refs, &chains, 2).unwrap();
        assert!(check.residual < 1e-8, "{check:?}");
    }

    #[test]
    fn perturbed_multiplicativity() {
        let mut rng = Rng::seeded(18);
        for _ in 0..3 {
            let (s1, s2) = (rng_space(&mut rng), rng_space(&mut rng));
            let (t1, t2) = (rng.triple(s1, 1.0, 0), rng.triple(s2, 1.0, 0));
            let a1 = rng.chain(t1.space(), &[0, 1, 2], 1);
            let a2 = rng.chain(t2.space(), &[0, 1, 2], 1);
            let check = verify_perturbed_multiplicativity(&t1, &t2, &a1, &a2).unwrap();
            assert!(check.relative() < 1e-8, "{check:?}");
        }
    }
}

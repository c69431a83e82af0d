//! Finite-dimensional spectral triples `(A, H, D)`.
//!
//! `H` is a [`GradedSpace`] in canonical order (even basis vectors first),
//! `D` is odd and Hermitian, and `A` is represented by a list of even
//! generator matrices. Products re-sort the Kronecker basis into canonical
//! order; every triple remembers how its canonical basis sits inside the
//! Kronecker product of the primitive factors it was built from, so that
//! iterated products are associative on the nose.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{canonical_order, hermitian_eigen, kron, ComplexMatrix, GradedSpace, Parity, STRUCTURE_TOL};

/// Relative kernel threshold used by [`SpectralTripleFD::index`].
pub const DEFAULT_KERNEL_EPS: f64 = 1e-9;
/// Absolute floor of the kernel threshold.
pub const KERNEL_FLOOR: f64 = 1e-12;
/// Allowed distance of a supertrace from an integer.
pub const INDEX_TOL: f64 = 0.01;

/// Eigendecomposition of `Δ = D²`, computed blockwise so that the eigenvector
/// matrix is even. Eigenvalues are listed for the even block, then the odd one.
#[derive(Clone, Debug)]
pub struct LaplacianEigen {
    pub eigenvalues: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl LaplacianEigen {
    fn compute(space: &GradedSpace, dirac: &ComplexMatrix) -> Result<Self> {
        let delta = dirac.as_dmatrix() * dirac.as_dmatrix();
        let n = space.dim();
        let mut vectors = DMatrix::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (offset, m) in [(0, space.dim_even), (space.dim_even, space.dim_odd)] {
            if m == 0 {
                continue;
            }
            let block = ComplexMatrix::from(delta.view((offset, offset), (m, m)).into_owned());
            let e = hermitian_eigen(&block)?;
            // Δ ≥ 0; clamp rounding noise below zero
            eigenvalues.extend(e.eigenvalues.iter().map(|&l| l.max(0.0)));
            vectors
                .view_mut((offset, offset), (m, m))
                .copy_from(e.vectors.as_dmatrix());
        }
        Ok(LaplacianEigen {
            eigenvalues,
            vectors: ComplexMatrix::from(vectors),
        })
    }

    /// `U f(Λ) U*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = self.vectors.as_dmatrix();
        let mut scaled = u.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(f(lam));
        }
        ComplexMatrix::from(scaled * u.adjoint())
    }

    /// `U* X U`.
    pub fn to_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let u = self.vectors.as_dmatrix();
        ComplexMatrix::from(u.adjoint() * x.as_dmatrix() * u)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }
}

/// Structural residuals of a candidate triple. Never fails.
#[derive(Clone, Debug, Serialize)]
pub struct TripleDiagnostics {
    /// `‖γDγ + D‖`.
    pub oddness: f64,
    /// `‖D − D*‖`.
    pub hermiticity: f64,
    /// `‖γaγ − a‖` per generator.
    pub generator_parity: Vec<f64>,
    /// `‖a‖ + ‖[D,a]‖` per generator.
    pub generator_norms: Vec<f64>,
    pub failures: Vec<String>,
}

impl TripleDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks oddness and self-adjointness of `D` and evenness of generators.
/// Residuals are operator norms; a residual fails when it exceeds
/// `1e-12 · max(1, ‖D‖)` (resp. `‖a‖`).
pub fn validate_triple(space: &GradedSpace, dirac: &ComplexMatrix, generators: &[ComplexMatrix]) -> TripleDiagnostics {
    let n = space.dim();
    let mut failures = Vec::new();
    let shape_ok = |m: &ComplexMatrix| m.rows() == n && m.cols() == n;
    if !shape_ok(dirac) {
        failures.push(format!(
            "D is {}x{}, space has dimension {n}",
            dirac.rows(),
            dirac.cols()
        ));
        return TripleDiagnostics {
            oddness: f64::NAN,
            hermiticity: f64::NAN,
            generator_parity: vec![],
            generator_norms: vec![],
            failures,
        };
    }
    let gamma = space.grading();
    let conj = |m: &ComplexMatrix| &(&gamma * m) * &gamma;
    let d_scale = dirac.norm_op().max(1.0);
    let oddness = (&conj(dirac) + dirac).norm_op();
    let hermiticity = (dirac - &dirac.adjoint()).norm_op();
    if oddness > STRUCTURE_TOL * d_scale {
        failures.push(format!("D is not odd: |γDγ + D| = {oddness:.3e}"));
    }
    if hermiticity > STRUCTURE_TOL * d_scale {
        failures.push(format!("D is not Hermitian: |D - D*| = {hermiticity:.3e}"));
    }
    let mut generator_parity = Vec::new();
    let mut generator_norms = Vec::new();
    for (i, a) in generators.iter().enumerate() {
        if !shape_ok(a) {
            failures.push(format!("generator {i} is {}x{}", a.rows(), a.cols()));
            generator_parity.push(f64::NAN);
            generator_norms.push(f64::NAN);
            continue;
        }
        let parity = (&conj(a) - a).norm_op();
        if parity > STRUCTURE_TOL * a.norm_op().max(1.0) {
            failures.push(format!("generator {i} is not even: |γaγ - a| = {parity:.3e}"));
        }
        generator_parity.push(parity);
        let da = &(dirac * a) - &(a * dirac);
        generator_norms.push(a.norm_op() + da.norm_op());
    }
    TripleDiagnostics {
        oddness,
        hermiticity,
        generator_parity,
        generator_norms,
        failures,
    }
}

/// A finite-dimensional even spectral triple.
#[derive(Clone, Debug)]
pub struct SpectralTripleFD {
    space: GradedSpace,
    dirac: ComplexMatrix,
    generators: Vec<ComplexMatrix>,
    /// Canonical index → index in the Kronecker product of the primitive
    /// factors' canonical bases.
    raw_perm: Vec<usize>,
    /// Canonical dimensions of the primitive factors, in Kronecker order.
    primitive_dims: Vec<usize>,
    eigen: OnceLock<LaplacianEigen>,
}

impl SpectralTripleFD {
    pub fn new(space: GradedSpace, dirac: ComplexMatrix, generators: Vec<ComplexMatrix>) -> Result<Self> {
        let diag = validate_triple(&space, &dirac, &generators);
        if !diag.is_valid() {
            if dirac.rows() != space.dim() || generators.iter().any(|a| a.rows() != space.dim() || !a.is_square()) {
                return Err(Error::DimensionMismatch(diag.failures.join("; ")));
            }
            if diag.hermiticity > STRUCTURE_TOL * dirac.norm_op().max(1.0) {
                return Err(Error::NonHermitian {
                    residual: diag.hermiticity,
                });
            }
            if diag.oddness > STRUCTURE_TOL * dirac.norm_op().max(1.0) {
                return Err(Error::Parity {
                    expected: "odd",
                    residual: diag.oddness,
                });
            }
            let worst = diag.generator_parity.iter().copied().fold(0.0, f64::max);
            return Err(Error::Parity {
                expected: "even",
                residual: worst,
            });
        }
        Ok(Self::from_parts_unchecked(space, dirac, generators))
    }

    /// Builds a primitive triple without validation.
    pub fn from_parts_unchecked(space: GradedSpace, dirac: ComplexMatrix, generators: Vec<ComplexMatrix>) -> Self {
        let n = space.dim();
        SpectralTripleFD {
            space,
            dirac,
            generators,
            raw_perm: (0..n).collect(),
            primitive_dims: vec![n],
            eigen: OnceLock::new(),
        }
    }

    pub fn space(&self) -> &GradedSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn dirac(&self) -> &ComplexMatrix {
        &self.dirac
    }

    pub fn generators(&self) -> &[ComplexMatrix] {
        &self.generators
    }

    pub fn grading(&self) -> ComplexMatrix {
        self.space.grading()
    }

    pub fn diagnostics(&self) -> TripleDiagnostics {
        validate_triple(&self.space, &self.dirac, &self.generators)
    }

    /// Canonical index → Kronecker index over the primitive factors.
    pub fn raw_permutation(&self) -> &[usize] {
        &self.raw_perm
    }

    /// Memoized eigendecomposition of `Δ`.
    pub fn laplacian_eigen(&self) -> &LaplacianEigen {
        self.eigen.get_or_init(|| {
            LaplacianEigen::compute(&self.space, &self.dirac).expect("D² of a validated triple is Hermitian")
        })
    }

    pub fn laplacian(&self) -> ComplexMatrix {
        &self.dirac * &self.dirac
    }

    /// `da = [D, a]` for even `a`; the result is odd.
    pub fn commutator_d(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.space.require_parity(a, Parity::Even)?;
        self.dirac.commutator(a)
    }

    /// `e^{−tΔ}`.
    pub fn heat(&self, t: f64) -> Result<ComplexMatrix> {
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("heat time must be non-negative, got {t}")));
        }
        Ok(self.laplacian_eigen().apply(|l| (-t * l).exp()))
    }

    /// Orthogonal projection onto `ker Δ`, where an eigenvalue counts as zero
    /// below `max(eps · λ_max, 1e-12)`. Eigenvalues within a decade above the
    /// threshold raise [`Error::SpectralGap`].
    pub fn kernel_projection(&self, eps: f64) -> Result<ComplexMatrix> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kernel threshold must be positive, got {eps}"
            )));
        }
        let eig = self.laplacian_eigen();
        let threshold = (eps * eig.max_eigenvalue()).max(KERNEL_FLOOR);
        if let Some(&eigenvalue) = eig
            .eigenvalues
            .iter()
            .find(|&&l| l >= threshold && l < 10.0 * threshold)
        {
            return Err(Error::SpectralGap { eigenvalue, threshold });
        }
        Ok(eig.apply(|l| if l < threshold { 1.0 } else { 0.0 }))
    }

    /// `Str(P_ker Δ) = dim ker D⁺ − dim ker D⁻`.
    pub fn index(&self) -> Result<i64> {
        let p = self.kernel_projection(DEFAULT_KERNEL_EPS)?;
        let value = self.space.supertrace(&p)?.re;
        let rounded = value.round();
        if (value - rounded).abs() >= INDEX_TOL {
            return Err(Error::NonIntegerIndex {
                value,
                tolerance: INDEX_TOL,
            });
        }
        Ok(rounded as i64)
    }

    /// The product triple `(A₁ ⊗ A₂, H₁ ⊗̂ H₂, D₁ ⊗ 1 + γ₁ ⊗ D₂)`, with the basis
    /// re-sorted into canonical order. Generators are `a ⊗ 1` followed by
    /// `1 ⊗ b`.
    pub fn product(&self, other: &SpectralTripleFD) -> SpectralTripleFD {
        let raw_d1 = self.dirac.unpermute_symmetric(&self.raw_perm);
        let raw_d2 = other.dirac.unpermute_symmetric(&other.raw_perm);
        let raw_g1 = self.grading().unpermute_symmetric(&self.raw_perm);
        let raw_g2 = other.grading().unpermute_symmetric(&other.raw_perm);
        let (i1, i2) = (
            ComplexMatrix::identity(self.dim()),
            ComplexMatrix::identity(other.dim()),
        );

        let raw_dirac = &kron(&raw_d1, &i2) + &kron(&raw_g1, &raw_d2);
        let raw_signs: Vec<f64> = {
            let g = kron(&raw_g1, &raw_g2);
            (0..g.rows()).map(|i| g.get(i, i).re).collect()
        };
        let (space, raw_perm) = canonical_order(&raw_signs);

        let mut generators: Vec<ComplexMatrix> = self
            .generators
            .iter()
            .map(|a| kron(&a.unpermute_symmetric(&self.raw_perm), &i2))
            .collect();
        generators.extend(
            other
                .generators
                .iter()
                .map(|b| kron(&i1, &b.unpermute_symmetric(&other.raw_perm))),
        );
        let generators = generators.iter().map(|g| g.permute_symmetric(&raw_perm)).collect();

        let mut primitive_dims = self.primitive_dims.clone();
        primitive_dims.extend(&other.primitive_dims);
        SpectralTripleFD {
            space,
            dirac: raw_dirac.permute_symmetric(&raw_perm),
            generators,
            raw_perm,
            primitive_dims,
            eigen: OnceLock::new(),
        }
    }

    /// Canonical index → index in `kron(H_{T₁}, …, H_{T_r})`, each factor in its
    /// own canonical basis. `self` must be the product of `factors` in order.
    pub fn factor_basis_permutation(&self, factors: &[&SpectralTripleFD]) -> Result<Vec<usize>> {
        let concat: Vec<usize> = factors.iter().flat_map(|t| t.primitive_dims.iter().copied()).collect();
        if concat != self.primitive_dims {
            return Err(Error::DimensionMismatch(format!(
                "triple with primitive factors {:?} is not a product of factors {:?}",
                self.primitive_dims, concat
            )));
        }
        let dims: Vec<usize> = factors.iter().map(|t| t.dim()).collect();
        let inverses: Vec<Vec<usize>> = factors.iter().map(|t| invert(&t.raw_perm)).collect();
        Ok(self
            .raw_perm
            .iter()
            .map(|&raw| {
                // split the raw index into per-factor raw indices, last fastest
                let mut rest = raw;
                let mut parts = vec![0; dims.len()];
                for k in (0..dims.len()).rev() {
                    parts[k] = rest % dims[k];
                    rest /= dims[k];
                }
                parts
                    .iter()
                    .zip(&dims)
                    .enumerate()
                    .fold(0, |acc, (k, (&r, &d))| acc * d + inverses[k][r])
            })
            .collect())
    }

    /// Expresses a matrix given in `kron(H_{T₁}, …)` order in the canonical basis.
    pub fn from_factor_basis(&self, factors: &[&SpectralTripleFD], m: &ComplexMatrix) -> Result<ComplexMatrix> {
        let perm = self.factor_basis_permutation(factors)?;
        if m.rows() != perm.len() || m.cols() != perm.len() {
            return Err(Error::DimensionMismatch(
                "matrix does not act on the product space".into(),
            ));
        }
        Ok(m.permute_symmetric(&perm))
    }

    /// Inverse of [`from_factor_basis`](Self::from_factor_basis).
    pub fn to_factor_basis(&self, factors: &[&SpectralTripleFD], m: &ComplexMatrix) -> Result<ComplexMatrix> {
        let perm = self.factor_basis_permutation(factors)?;
        if m.rows() != perm.len() || m.cols() != perm.len() {
            return Err(Error::DimensionMismatch(
                "matrix does not act on the product space".into(),
            ));
        }
        Ok(m.unpermute_symmetric(&perm))
    }

    /// `(A ⊗ M_k, H ⊗ C^k, D ⊗ 1)`, treated as a new primitive triple.
    pub fn ampliate(&self, k: usize) -> SpectralTripleFD {
        let ik = ComplexMatrix::identity(k);
        SpectralTripleFD::from_parts_unchecked(
            self.space.ampliate(k),
            kron(&self.dirac, &ik),
            self.generators.iter().map(|a| kron(a, &ik)).collect(),
        )
    }

    /// `(A, H, U D U*)` for an even unitary `U`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<SpectralTripleFD> {
        self.space.require_parity(u, Parity::Even)?;
        let conj = |m: &ComplexMatrix| &(u * m) * &u.adjoint();
        SpectralTripleFD::new(
            self.space,
            conj(&self.dirac),
            self.generators.iter().map(conj).collect(),
        )
    }

    /// Compression to the range of a self-adjoint even idempotent `p` over
    /// `A ⊗ M_k`: the triple `(pAp, pH, pDp)` in an orthonormal basis of the
    /// range, together with the isometry `V: pH → H ⊗ C^k` (even columns first).
    pub fn compress_by_idempotent(&self, p: &Idempotent) -> Result<(SpectralTripleFD, ComplexMatrix)> {
        p.require_projection()?;
        let amp = self.ampliate(p.k);
        let space = amp.space;
        space.require_parity(&p.e, Parity::Even)?;
        let n = space.dim();
        let mut columns: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        let mut ranks = [0usize; 2];
        for (b, (offset, m)) in [(0, space.dim_even), (space.dim_even, space.dim_odd)]
            .into_iter()
            .enumerate()
        {
            if m == 0 {
                continue;
            }
            let block = ComplexMatrix::from(p.e.as_dmatrix().view((offset, offset), (m, m)).into_owned());
            let eig = hermitian_eigen(&block)?;
            for (k, &l) in eig.eigenvalues.iter().enumerate() {
                if l > 0.5 {
                    let mut v = nalgebra::DVector::zeros(n);
                    v.rows_mut(offset, m).copy_from(&eig.vectors.as_dmatrix().column(k));
                    columns.push(v);
                    ranks[b] += 1;
                }
            }
        }
        let v = if columns.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&columns)
        };
        let v = ComplexMatrix::from(v);
        let vh = v.adjoint();
        let compress = |m: &ComplexMatrix| &(&vh * m) * &v;
        let triple = SpectralTripleFD::new(
            GradedSpace::new(ranks[0], ranks[1]),
            compress(&amp.dirac),
            amp.generators.iter().map(compress).collect(),
        )?;
        Ok((triple, v))
    }
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// `T₁ × T₂`.
pub fn product_triple(t1: &SpectralTripleFD, t2: &SpectralTripleFD) -> SpectralTripleFD {
    t1.product(t2)
}

/// An idempotent `e ∈ A ⊗ M_k`, acting on `H ⊗ C^k` in `H`-major Kronecker order.
#[derive(Clone, Debug, PartialEq)]
pub struct Idempotent {
    pub e: ComplexMatrix,
    pub k: usize,
}

/// Tolerance for `e² = e` and `e = e*`.
pub const IDEMPOTENT_TOL: f64 = 1e-10;

impl Idempotent {
    pub fn new(e: ComplexMatrix, k: usize) -> Result<Self> {
        if k == 0 || !e.is_square() || e.rows() % k != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} idempotent with ampliation {k}",
                e.rows(),
                e.cols()
            )));
        }
        let residual = (&(&e * &e) - &e).norm_op();
        if residual > IDEMPOTENT_TOL * e.norm_op().max(1.0) {
            return Err(Error::NotIdempotent { residual });
        }
        Ok(Idempotent { e, k })
    }

    /// `e = 1` over `M_d`.
    pub fn unit(dim: usize) -> Self {
        Idempotent {
            e: ComplexMatrix::identity(dim),
            k: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.e.rows()
    }

    pub fn require_projection(&self) -> Result<()> {
        let residual = self.e.hermitian_defect();
        if residual > IDEMPOTENT_TOL * self.e.norm_fro().max(1.0) {
            return Err(Error::NotSelfAdjoint { residual });
        }
        Ok(())
    }

    /// `e₁ ⊗ e₂` over `(A₁ ⊗ A₂) ⊗ M_{k₁k₂}`, expressed in the canonical basis of
    /// `product ⊗ C^{k₁k₂}`, where `product = t1 × t2`.
    pub fn tensor(
        &self,
        other: &Idempotent,
        product: &SpectralTripleFD,
        t1: &SpectralTripleFD,
        t2: &SpectralTripleFD,
    ) -> Result<Idempotent> {
        let (d1, d2, k1, k2) = (t1.dim(), t2.dim(), self.k, other.k);
        if self.dim() != d1 * k1 || other.dim() != d2 * k2 {
            return Err(Error::DimensionMismatch(
                "idempotents do not live over the given triples".into(),
            ));
        }
        let factor_perm = product.factor_basis_permutation(&[t1, t2])?;
        // new index (c, m1, m2) ↦ old index (h1, m1, h2, m2) of kron(e1, e2)
        let perm: Vec<usize> = factor_perm
            .iter()
            .flat_map(|&pair| {
                let (h1, h2) = (pair / d2, pair % d2);
                (0..k1).flat_map(move |m1| (0..k2).map(move |m2| ((h1 * k1 + m1) * d2 + h2) * k2 + m2))
            })
            .collect();
        Idempotent::new(kron(&self.e, &other.e).permute_symmetric(&perm), k1 * k2)
    }
}

#[derive(Serialize, Deserialize)]
struct TripleRepr {
    dim_even: usize,
    dim_odd: usize,
    #[serde(rename = "D")]
    dirac: ComplexMatrix,
    generators: Vec<ComplexMatrix>,
}

impl Serialize for SpectralTripleFD {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TripleRepr {
            dim_even: self.space.dim_even,
            dim_odd: self.space.dim_odd,
            dirac: self.dirac.clone(),
            generators: self.generators.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralTripleFD {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TripleRepr::deserialize(d)?;
        SpectralTripleFD::new(GradedSpace::new(r.dim_even, r.dim_odd), r.dirac, r.generators)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct IdempotentRepr {
    k: usize,
    e: ComplexMatrix,
}

impl Serialize for Idempotent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        IdempotentRepr {
            k: self.k,
            e: self.e.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Idempotent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = IdempotentRepr::deserialize(d)?;
        Idempotent::new(r.e, r.k).map_err(serde::de::Error::custom)
    }
}

/// The 1|1 triple with `D = [[0, 1], [1, 0]]`.
pub fn flip_triple() -> SpectralTripleFD {
    let d = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    SpectralTripleFD::new(GradedSpace::new(1, 1), d, vec![]).expect("valid")
}

/// `D = 0` on `space` with generator `1`.
pub fn trivial_triple(space: GradedSpace) -> SpectralTripleFD {
    let n = space.dim();
    SpectralTripleFD::new(space, ComplexMatrix::zeros(n, n), vec![ComplexMatrix::identity(n)]).expect("valid")
}

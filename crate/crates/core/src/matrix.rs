//! Dense complex matrices and Z/2-graded finite-dimensional Hilbert spaces.
//!
//! Everything in the toolkit is built on [`ComplexMatrix`], a thin wrapper
//! around a `nalgebra` dynamic matrix of `Complex64` entries. Arithmetic that
//! can fail on shape goes through the `checked_*` methods; the operator
//! overloads panic on a shape mismatch the way `nalgebra` does.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default relative tolerance for structural checks (parity, Hermitian-ness).
pub const STRUCTURE_TOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A dense complex matrix with fixed shape.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{})", self.rows(), self.cols())?;
        if self.rows() * self.cols() <= 36 {
            write!(f, "{}", self.0)?;
        }
        Ok(())
    }
}

impl From<DMatrix<Complex64>> for ComplexMatrix {
    fn from(m: DMatrix<Complex64>) -> Self {
        ComplexMatrix(m)
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        ComplexMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { c64(diag[i], 0.0) } else { c64(0.0, 0.0) })
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(ComplexMatrix(DMatrix::from_row_slice(rows, cols, entries)))
    }

    /// Builds a matrix from real row-major rows; handy in tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| c64(rows[i][j], 0.0))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn row_major_entries(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ComplexMatrix(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c64(s, 0.0))
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(ComplexMatrix(&self.0 + &other.0))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(ComplexMatrix(&self.0 - &other.0))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "mul: {}x{} times {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(ComplexMatrix(&self.0 * &other.0))
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.checked_mul(other)?;
        let ba = other.checked_mul(self)?;
        ab.checked_sub(&ba)
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.norm()
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Operator (spectral) norm, i.e. the largest singular value.
    pub fn norm_op(&self) -> f64 {
        if self.rows() == 0 || self.cols() == 0 {
            return 0.0;
        }
        if self.rows() == 1 || self.cols() == 1 {
            return self.norm_fro();
        }
        self.0.clone().singular_values().max()
    }

    /// Frobenius norm of `M - M*`.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint()).norm()
    }

    /// True if `self` is `c * I` for some scalar `c`, up to `tol * max(1, |self|)`.
    pub fn is_scalar_multiple_of_identity(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows();
        if n == 0 {
            return true;
        }
        let c = self.trace() / n as f64;
        let mut defect = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { c } else { c64(0.0, 0.0) };
                defect += (self.0[(i, j)] - target).norm_sqr();
            }
        }
        defect.sqrt() <= tol * self.norm_fro().max(1.0)
    }

    /// `P M P^T` for the permutation sending new index `i` to old index `perm[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rows());
        assert!(self.is_square());
        Self::from_fn(self.rows(), self.cols(), |i, j| self.0[(perm[i], perm[j])])
    }

    /// Inverse of [`permute_symmetric`](Self::permute_symmetric).
    pub fn unpermute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rows());
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        for (i, &pi) in perm.iter().enumerate() {
            for (j, &pj) in perm.iter().enumerate() {
                out[(pi, pj)] = self.0[(i, j)];
            }
        }
        ComplexMatrix(out)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul<Complex64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Complex64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            entries: self.row_major_entries().iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        if repr.rows == 0 || repr.cols == 0 {
            return Err(serde::de::Error::custom("matrix dimensions must be positive"));
        }
        let entries: Vec<Complex64> = repr.entries.iter().map(|[re, im]| c64(*re, *im)).collect();
        ComplexMatrix::from_row_major(repr.rows, repr.cols, &entries).map_err(serde::de::Error::custom)
    }
}

/// Standard Kronecker product; `(A⊗B)(C⊗D) = AC⊗BD`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` is the eigenvector for `eigenvalues[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `U diag(λ) U*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let u = self.vectors.as_dmatrix();
        let mut scaled = u.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(lam);
        }
        ComplexMatrix(scaled * u.adjoint())
    }

    /// `U f(diag λ) U*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = self.vectors.as_dmatrix();
        let mut scaled = u.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(f(lam));
        }
        ComplexMatrix(scaled * u.adjoint())
    }
}

/// Eigenvalues (ascending) and a unitary eigenbasis of a Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let defect = m.hermitian_defect();
    if defect > 1e-10 * m.norm_fro() {
        return Err(Error::NonHermitian { residual: defect });
    }
    if n == 0 {
        return Ok(HermitianEigen {
            eigenvalues: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let sym = (&m.0 + m.0.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen {
        eigenvalues,
        vectors: ComplexMatrix(vectors),
    })
}

/// Parity of an operator with respect to a grading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn degree(self) -> Option<u8> {
        match self {
            Parity::Even => Some(0),
            Parity::Odd => Some(1),
            Parity::Mixed => None,
        }
    }
}

/// A finite-dimensional Z/2-graded Hilbert space `C^{dim_even} ⊕ C^{dim_odd}`
/// with grading `γ = diag(+1,…,+1,−1,…,−1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedSpace {
    pub dim_even: usize,
    pub dim_odd: usize,
}

impl GradedSpace {
    pub fn new(dim_even: usize, dim_odd: usize) -> Self {
        GradedSpace { dim_even, dim_odd }
    }

    pub fn dim(&self) -> usize {
        self.dim_even + self.dim_odd
    }

    /// `+1` on the even basis vectors, `-1` on the odd ones.
    pub fn signs(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.dim_even];
        s.extend(std::iter::repeat_n(-1.0, self.dim_odd));
        s
    }

    pub fn grading(&self) -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&self.signs())
    }

    pub fn is_even_index(&self, i: usize) -> bool {
        i < self.dim_even
    }

    fn check_square(&self, m: &ComplexMatrix) -> Result<()> {
        if m.rows() != self.dim() || m.cols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator on a space of dimension {}",
                m.rows(),
                m.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Frobenius norms of the even (block-diagonal) and odd (off-diagonal) parts.
    pub fn parity_parts(&self, m: &ComplexMatrix) -> Result<(f64, f64)> {
        self.check_square(m)?;
        let (mut even, mut odd) = (0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let v = m.get(i, j).norm_sqr();
                if self.is_even_index(i) == self.is_even_index(j) {
                    even += v;
                } else {
                    odd += v;
                }
            }
        }
        Ok((even.sqrt(), odd.sqrt()))
    }

    /// Tags `m` as even (`γMγ = M`) or odd (`γMγ = −M`) to tolerance `tol`
    /// relative to `max(1, |M|)`.
    pub fn parity_of(&self, m: &ComplexMatrix, tol: f64) -> Result<Parity> {
        let (even, odd) = self.parity_parts(m)?;
        let scale = m.norm_fro().max(1.0);
        Ok(if odd <= tol * scale {
            Parity::Even
        } else if even <= tol * scale {
            Parity::Odd
        } else {
            Parity::Mixed
        })
    }

    pub fn require_parity(&self, m: &ComplexMatrix, expected: Parity) -> Result<()> {
        let (even, odd) = self.parity_parts(m)?;
        let (residual, name) = match expected {
            Parity::Even => (odd, "even"),
            Parity::Odd => (even, "odd"),
            Parity::Mixed => return Ok(()),
        };
        if residual > STRUCTURE_TOL * m.norm_fro().max(1.0) {
            return Err(Error::Parity {
                expected: name,
                residual,
            });
        }
        Ok(())
    }

    /// `Str(X) = tr(γX)`.
    pub fn supertrace(&self, x: &ComplexMatrix) -> Result<Complex64> {
        self.check_square(x)?;
        let mut s = c64(0.0, 0.0);
        for i in 0..self.dim() {
            if self.is_even_index(i) {
                s += x.get(i, i);
            } else {
                s -= x.get(i, i);
            }
        }
        Ok(s)
    }

    /// The graded tensor product with `other`, with its basis sorted so the
    /// grading is again canonical. Returns the space and the permutation
    /// mapping each canonical index to its index in the Kronecker ordering.
    pub fn tensor(&self, other: &GradedSpace) -> (GradedSpace, Vec<usize>) {
        let kron_signs: Vec<f64> = self
            .signs()
            .iter()
            .flat_map(|a| other.signs().into_iter().map(move |b| a * b))
            .collect();
        canonical_order(&kron_signs)
    }

    /// `H ⊗ C^k`, whose Kronecker ordering is already canonical.
    pub fn ampliate(&self, k: usize) -> GradedSpace {
        GradedSpace::new(self.dim_even * k, self.dim_odd * k)
    }
}

/// Stable sort of a sign vector: even (+1) indices first, then odd ones.
pub(crate) fn canonical_order(signs: &[f64]) -> (GradedSpace, Vec<usize>) {
    let mut perm: Vec<usize> = (0..signs.len()).filter(|&i| signs[i] > 0.0).collect();
    let dim_even = perm.len();
    perm.extend((0..signs.len()).filter(|&i| signs[i] < 0.0));
    (GradedSpace::new(dim_even, signs.len() - dim_even), perm)
}

/// `Str(X) = tr(γX)` for an explicit grading matrix.
pub fn supertrace(x: &ComplexMatrix, gamma: &ComplexMatrix) -> Result<Complex64> {
    if !x.is_square() || x.rows() != gamma.rows() || !gamma.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "supertrace of {}x{} with grading {}x{}",
            x.rows(),
            x.cols(),
            gamma.rows(),
            gamma.cols()
        )));
    }
    Ok(gamma.checked_mul(x)?.trace())
}

/// Matrix realization of the graded tensor product `A ⊗̂ B` on `H₁ ⊗̂ H₂`
/// (Kronecker ordering): `A ⊗ B` when `B` is even, `Aγ₁ ⊗ B` when `B` is odd.
pub fn graded_kron(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    left: &GradedSpace,
    right: &GradedSpace,
) -> Result<ComplexMatrix> {
    if a.rows() != left.dim() || a.cols() != left.dim() {
        return Err(Error::DimensionMismatch(
            "left factor does not act on the left space".into(),
        ));
    }
    match right.parity_of(b, STRUCTURE_TOL)? {
        Parity::Even => Ok(kron(a, b)),
        Parity::Odd => Ok(kron(&a.checked_mul(&left.grading())?, b)),
        Parity::Mixed => Err(Error::Parity {
            expected: "homogeneous",
            residual: f64::NAN,
        }),
    }
}

/// `1 ⊗̂ X = γ₁ ⊗ X` for an odd operator `X` on the second factor.
pub fn graded_right_factor(left: &GradedSpace, right: &GradedSpace, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    right.require_parity(x, Parity::Odd)?;
    Ok(kron(&left.grading(), x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::Rng;

    #[test]
    fn identity_eigen() {
        let e = hermitian_eigen(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        let u = &e.vectors;
        assert!((&(&u.adjoint() * u) - &ComplexMatrix::identity(3)).norm_fro() < 1e-14);
    }

    #[test]
    fn diagonal_eigen_sorted() {
        let m = ComplexMatrix::from_real_diagonal(&[2.0, -1.0]);
        let e = hermitian_eigen(&m).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_eigen_reconstructs() {
        let mut rng = Rng::seeded(7);
        for _ in 0..10 {
            let m = rng.hermitian(6);
            let e = hermitian_eigen(&m).unwrap();
            let resid = (&e.reconstruct() - &m).norm_op();
            assert!(resid < 1e-11 * (1.0 + m.norm_op()), "residual {resid}");
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hermitian_eigen(&m), Err(Error::NonHermitian { .. })));
        let r = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_eigen(&r), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn kron_identities() {
        assert_eq!(
            kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3)),
            ComplexMatrix::identity(6)
        );
        let mut rng = Rng::seeded(3);
        let (a, b, c, d) = (rng.general(2), rng.general(2), rng.general(2), rng.general(2));
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        assert!((&lhs - &rhs).norm_fro() < 1e-13);
        let e = rng.general(3);
        assert!((&kron(&kron(&a, &b), &e) - &kron(&a, &kron(&b, &e))).norm_max() < 1e-15);
    }

    #[test]
    fn kron_with_diagonal_sign_factor() {
        let mut rng = Rng::seeded(4);
        let m = rng.general(3);
        let k = kron(&ComplexMatrix::from_real_diagonal(&[1.0, -1.0]), &m);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.get(i, j), m.get(i, j));
                assert_eq!(k.get(i + 3, j + 3), -m.get(i, j));
                assert_eq!(k.get(i, j + 3), c64(0.0, 0.0));
            }
        }
    }

    #[test]
    fn graded_right_factor_cases() {
        let s = GradedSpace::new(1, 1);
        let zero = ComplexMatrix::zeros(2, 2);
        assert_eq!(graded_right_factor(&s, &s, &zero).unwrap(), ComplexMatrix::zeros(4, 4));
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let g = graded_right_factor(&s, &s, &x).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, -1.0],
            &[0.0, 0.0, -1.0, 0.0],
        ]);
        assert_eq!(g, expected);
        assert!(graded_right_factor(&s, &s, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn graded_factors_anticommute() {
        let mut rng = Rng::seeded(11);
        for (s1, s2) in [
            (GradedSpace::new(2, 1), GradedSpace::new(1, 2)),
            (GradedSpace::new(2, 2), GradedSpace::new(3, 1)),
        ] {
            let d1 = rng.odd_hermitian(&s1, 1.0);
            let d2 = rng.odd_hermitian(&s2, 1.0);
            let left = kron(&d1, &ComplexMatrix::identity(s2.dim()));
            let right = graded_right_factor(&s1, &s2, &d2).unwrap();
            let anti = &(&right * &left) + &(&left * &right);
            assert!(anti.norm_fro() < 1e-12);
        }
    }

    #[test]
    fn supertrace_cases() {
        let s = GradedSpace::new(1, 1);
        assert_eq!(s.supertrace(&ComplexMatrix::identity(2)).unwrap(), c64(0.0, 0.0));
        let s = GradedSpace::new(3, 2);
        assert_eq!(s.supertrace(&s.grading()).unwrap(), c64(5.0, 0.0));
        assert_eq!(supertrace(&s.grading(), &s.grading()).unwrap(), c64(5.0, 0.0));
        assert!(s.supertrace(&ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn supertrace_is_graded_trace() {
        let mut rng = Rng::seeded(5);
        let s = GradedSpace::new(3, 2);
        for _ in 0..20 {
            let x = rng.even(&s);
            let y = rng.even(&s);
            let xy = s.supertrace(&(&x * &y)).unwrap();
            let yx = s.supertrace(&(&y * &x)).unwrap();
            assert!((xy - yx).norm() < 1e-10 * (1.0 + xy.norm()));
            // odd matrices have zero supertrace
            let o = rng.odd_hermitian(&s, 1.0);
            assert!(s.supertrace(&o).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn parity_tagging() {
        let s = GradedSpace::new(1, 1);
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(s.parity_of(&x, 1e-12).unwrap(), Parity::Odd);
        assert_eq!(s.parity_of(&ComplexMatrix::identity(2), 1e-12).unwrap(), Parity::Even);
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(s.parity_of(&m, 1e-12).unwrap(), Parity::Mixed);
        let g = s.grading();
        assert_eq!(&g * &g, ComplexMatrix::identity(2));
    }

    #[test]
    fn tensor_space_is_canonical() {
        let (s, perm) = GradedSpace::new(2, 1).tensor(&GradedSpace::new(1, 2));
        assert_eq!(s, GradedSpace::new(4, 5));
        let raw = kron(&GradedSpace::new(2, 1).grading(), &GradedSpace::new(1, 2).grading());
        assert_eq!(raw.permute_symmetric(&perm), s.grading());
        assert_eq!(raw.permute_symmetric(&perm).unpermute_symmetric(&perm), raw);
    }

    #[test]
    fn json_layout() {
        let m = ComplexMatrix::from_row_major(1, 2, &[c64(1.0, 2.0), c64(3.0, -4.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"rows":1,"cols":2,"entries":[[1.0,2.0],[3.0,-4.0]]}"#);
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ComplexMatrix>(r#"{"rows":2,"cols":2,"entries":[[1,0]]}"#).is_err());
    }

    #[test]
    fn scalar_identity_detection() {
        let m = ComplexMatrix::identity(3).scale(c64(2.0, -1.0));
        assert!(m.is_scalar_multiple_of_identity(1e-12));
        let mut rng = Rng::seeded(1);
        assert!(!rng.general(3).is_scalar_multiple_of_identity(1e-12));
    }
}

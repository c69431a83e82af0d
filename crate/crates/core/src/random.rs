//! Seeded generators for random matrices, triples, chains and projections.
//!
//! Random triples follow a fixed recipe so that suites are reproducible:
//! `D = (X + X*)/2` restricted to the odd blocks and rescaled to a target
//! operator norm; generators are even Hermitian contractions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::chains::{Chain, ElementaryChain};
use crate::matrix::{c64, ComplexMatrix, GradedSpace};
use crate::spectral::SpectralTripleFD;

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream derived from `seed` and a stream index.
    pub fn stream(seed: u64, index: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(index);
        Rng(r)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.0.random_range(lo..=hi)
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn complex_normal(&mut self) -> Complex64 {
        c64(self.normal(), self.normal()) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Sorted uniforms, i.e. a uniform point of the standard simplex.
    pub fn simplex_point(&mut self, n: usize) -> Vec<f64> {
        let mut t: Vec<f64> = (0..n).map(|_| self.uniform()).collect();
        t.sort_by(f64::total_cmp);
        t
    }

    /// Matrix with i.i.d. standard complex Gaussian entries scaled by `1/√n`.
    pub fn general(&mut self, n: usize) -> ComplexMatrix {
        let s = 1.0 / (n as f64).sqrt();
        ComplexMatrix::from_fn(n, n, |_, _| self.complex_normal() * s)
    }

    pub fn hermitian(&mut self, n: usize) -> ComplexMatrix {
        let x = self.general(n);
        (&x + &x.adjoint()).scale_real(0.5)
    }

    fn masked(&mut self, space: &GradedSpace, odd: bool, hermitian: bool) -> ComplexMatrix {
        let n = space.dim();
        let x = if hermitian { self.hermitian(n) } else { self.general(n) };
        ComplexMatrix::from_fn(n, n, |i, j| {
            if (space.is_even_index(i) != space.is_even_index(j)) == odd {
                x.get(i, j)
            } else {
                c64(0.0, 0.0)
            }
        })
    }

    /// Random even (block-diagonal) matrix.
    pub fn even(&mut self, space: &GradedSpace) -> ComplexMatrix {
        self.masked(space, false, false)
    }

    /// Random even Hermitian matrix with operator norm at most one.
    pub fn even_hermitian_contraction(&mut self, space: &GradedSpace) -> ComplexMatrix {
        let m = self.masked(space, false, true);
        let norm = m.norm_op();
        if norm > 1.0 {
            m.scale_real(1.0 / norm)
        } else {
            m
        }
    }

    /// Random odd Hermitian matrix with operator norm `scale` (zero when the
    /// space has no odd blocks).
    pub fn odd_hermitian(&mut self, space: &GradedSpace, scale: f64) -> ComplexMatrix {
        let m = self.masked(space, true, true);
        let norm = m.norm_op();
        if norm > 0.0 {
            m.scale_real(scale / norm)
        } else {
            m
        }
    }

    /// Random triple with `|D| = dirac_norm` and `n_generators` generators.
    pub fn triple(&mut self, space: GradedSpace, dirac_norm: f64, n_generators: usize) -> SpectralTripleFD {
        let d = self.odd_hermitian(&space, dirac_norm);
        let generators = (0..n_generators)
            .map(|_| self.even_hermitian_contraction(&space))
            .collect();
        SpectralTripleFD::new(space, d, generators).expect("generated triple is valid")
    }

    /// Random even unitary (product of blockwise QR factors).
    pub fn even_unitary(&mut self, space: &GradedSpace) -> ComplexMatrix {
        let mut u = DMatrix::zeros(space.dim(), space.dim());
        for (offset, n) in [(0, space.dim_even), (space.dim_even, space.dim_odd)] {
            if n == 0 {
                continue;
            }
            let q = self.general(n).into_dmatrix().qr().q();
            u.view_mut((offset, offset), (n, n)).copy_from(&q);
        }
        ComplexMatrix::from(u)
    }

    /// Random even orthogonal projection of rank `rank_even + rank_odd`.
    pub fn even_projection(&mut self, space: &GradedSpace, rank_even: usize, rank_odd: usize) -> ComplexMatrix {
        assert!(rank_even <= space.dim_even && rank_odd <= space.dim_odd);
        let u = self.even_unitary(space).into_dmatrix();
        let mut p = DMatrix::zeros(space.dim(), space.dim());
        let cols = (0..rank_even).chain(space.dim_even..space.dim_even + rank_odd);
        for c in cols {
            let v = u.column(c);
            p += &v * v.adjoint();
        }
        ComplexMatrix::from(p)
    }

    /// Random elementary chain of degree `degree` with even factors.
    pub fn elementary(&mut self, space: &GradedSpace, degree: usize) -> ElementaryChain {
        let factors = (0..=degree).map(|_| self.even(space)).collect();
        ElementaryChain::new(self.complex_normal(), factors).expect("factors share a dimension")
    }

    /// Random chain with `terms_per_degree` elementary terms in each degree
    /// listed.
    pub fn chain(&mut self, space: &GradedSpace, degrees: &[usize], terms_per_degree: usize) -> Chain {
        let mut c = Chain::zero(space.dim());
        for &deg in degrees {
            for _ in 0..terms_per_degree {
                c.push(self.elementary(space, deg)).expect("same algebra");
            }
        }
        c
    }

    /// Random graded space with `lo ≤ total dimension ≤ hi`, both parts nonzero.
    pub fn space(&mut self, lo: usize, hi: usize) -> GradedSpace {
        let total = self.range_inclusive(lo.max(2), hi.max(2));
        let even = self.range_inclusive(1, total - 1);
        GradedSpace::new(even, total - even)
    }
}

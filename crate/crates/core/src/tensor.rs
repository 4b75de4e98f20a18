//! Dense complex linear algebra on multipartite Hilbert spaces.
//!
//! Kronecker products put party 0 in the leftmost (most significant) factor
//! everywhere in this crate, so a basis index `k` of a `P`-party system with
//! local dimensions `d_0, …, d_{P-1}` decodes as the mixed-radix number whose
//! most significant digit belongs to party 0.

use std::env;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance on the unit norm of kets flagged as normalized.
pub const NORM_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted as numerical PSD drift.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance on `Tr ρ = 1` for density operators.
pub const TRACE_TOL: f64 = 1e-10;
/// Hermiticity tolerance for operators entering a matrix square root.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Upper bound on the dimension of dense kets and operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseCap(pub usize);

impl DenseCap {
    pub const DEFAULT: DenseCap = DenseCap(4096);
    pub const ENV_VAR: &'static str = "QDISTILL_DENSE_CAP";

    /// Reads `QDISTILL_DENSE_CAP`, falling back to the default of 4096.
    pub fn from_env() -> DenseCap {
        env::var(Self::ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .map(DenseCap)
            .unwrap_or(Self::DEFAULT)
    }

    pub fn check(self, dim: usize) -> Result<()> {
        if dim > self.0 {
            Err(Error::DenseCapExceeded { dim, cap: self.0 })
        } else {
            Ok(())
        }
    }
}

impl Default for DenseCap {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Local dimensions of each party; the total dimension is their product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimsProfile {
    local_dims: Vec<usize>,
}

impl DimsProfile {
    pub fn new(local_dims: Vec<usize>) -> Result<Self> {
        if local_dims.is_empty() || local_dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "local dimensions must be positive and non-empty".into(),
            ));
        }
        Ok(DimsProfile { local_dims })
    }

    /// `parties` copies of the same local dimension.
    pub fn uniform(d: usize, parties: usize) -> Result<Self> {
        Self::new(vec![d; parties])
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn parties(&self) -> usize {
        self.local_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.local_dims.iter().product()
    }

    /// Digits of a global basis index, party 0 first.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.local_dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.local_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Inverse of [`DimsProfile::digits`].
    pub fn index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.local_dims)
            .fold(0, |acc, (&digit, &d)| acc * d + digit)
    }

    /// Profile of the parties not listed in `removed`, in their original order.
    pub fn without(&self, removed: &[usize]) -> Result<Self> {
        for &r in removed {
            if r >= self.parties() {
                return Err(Error::PartyOutOfRange {
                    index: r,
                    parties: self.parties(),
                });
            }
        }
        let kept: Vec<usize> = (0..self.parties())
            .filter(|p| !removed.contains(p))
            .map(|p| self.local_dims[p])
            .collect();
        if kept.is_empty() {
            // Tracing out everything leaves a one-dimensional space.
            return Ok(DimsProfile {
                local_dims: vec![1],
            });
        }
        Ok(DimsProfile { local_dims: kept })
    }
}

/// A state vector, carrying whether it is meant to be normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: DVector<C64>,
    normalized: bool,
}

impl Ket {
    /// A normalized ket; fails if the norm is off by more than [`NORM_TOL`].
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidSpec(format!(
                "ket norm {norm} differs from 1"
            )));
        }
        Ok(Ket {
            amps,
            normalized: true,
        })
    }

    pub fn unnormalized(amps: DVector<C64>) -> Self {
        Ket {
            amps,
            normalized: false,
        }
    }

    pub fn from_real(amps: &[f64]) -> Self {
        Ket::unnormalized(DVector::from_iterator(
            amps.len(),
            amps.iter().map(|&a| C64::new(a, 0.0)),
        ))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ket {
            amps,
            normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    /// Rescales to unit norm. Returns `None` for the zero vector.
    pub fn normalize(&self) -> Option<Ket> {
        let n = self.amps.norm();
        if n == 0.0 {
            return None;
        }
        Some(Ket {
            amps: self.amps.unscale(n),
            normalized: true,
        })
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// `|self⟩⟨self|`
    pub fn projector(&self) -> Operator {
        Operator::new(&self.amps * self.amps.adjoint())
    }
}

/// A square complex matrix acting on a (possibly multipartite) Hilbert space.
#[derive(Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator(dim={}){}", self.dim(), self.mat)
    }
}

impl Operator {
    /// Panics if `mat` is not square.
    pub fn new(mat: DMatrix<C64>) -> Self {
        assert!(mat.is_square(), "operators must be square");
        Operator { mat }
    }

    pub fn identity(dim: usize) -> Self {
        Operator::new(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator::new(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Operator::new(DMatrix::from_diagonal(&v))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn adjoint(&self) -> Operator {
        Operator::new(self.mat.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Operator {
        Operator::new(self.mat.scale(factor))
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        same_dim(self.dim(), other.dim())?;
        Ok(Operator::new(&self.mat + &other.mat))
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        same_dim(self.dim(), other.dim())?;
        Ok(Operator::new(&self.mat * &other.mat))
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        same_dim(self.dim(), ket.dim())?;
        Ok(Ket::unnormalized(&self.mat * ket.amplitudes()))
    }

    /// `A ρ A†`
    pub fn conjugate(&self, rho: &Operator) -> Result<Operator> {
        same_dim(self.dim(), rho.dim())?;
        Ok(Operator::new(&self.mat * &rho.mat * self.mat.adjoint()))
    }

    pub fn frobenius_distance(&self, other: &Operator) -> f64 {
        (&self.mat - &other.mat).norm()
    }

    /// Largest entrywise modulus of `A − A†`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let diff = &self.mat - self.mat.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .hermitian_part()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Checks Hermiticity, positivity within [`PSD_TOL`] and unit trace.
    pub fn check_density(&self) -> Result<()> {
        let dev = self.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotDensity {
                reason: format!("not Hermitian (deviation {dev:.3e})"),
            });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotDensity {
                reason: format!("trace {tr} differs from 1"),
            });
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::NotDensity {
                reason: format!("negative eigenvalue {min:.3e}"),
            });
        }
        Ok(())
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.mat + self.mat.adjoint()).scale(0.5)
    }
}

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Kronecker product `a ⊗ b` with `a` as the most significant factor.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator::new(a.mat.kronecker(&b.mat))
}

/// Kronecker product of a list of operators, leftmost first.
pub fn kron_all<'a, I>(ops: I) -> Operator
where
    I: IntoIterator<Item = &'a Operator>,
{
    ops.into_iter()
        .fold(Operator::identity(1), |acc, op| kron(&acc, op))
}

/// Kronecker product of kets.
pub fn kron_ket(a: &Ket, b: &Ket) -> Ket {
    Ket::unnormalized(a.amplitudes().kronecker(b.amplitudes()))
}

/// Traces out `traced_parties` from `rho`, which must act on `dims`.
///
/// The result acts on the remaining parties in their original order. Tracing
/// out every party yields the 1×1 operator holding `Tr ρ`.
pub fn partial_trace(
    rho: &Operator,
    dims: &DimsProfile,
    traced_parties: &[usize],
) -> Result<Operator> {
    same_dim(dims.total_dim(), rho.dim())?;
    let kept_dims = dims.without(traced_parties)?;
    let traced: Vec<bool> = (0..dims.parties())
        .map(|p| traced_parties.contains(&p))
        .collect();
    let traced_total: usize = (0..dims.parties())
        .filter(|&p| traced[p])
        .map(|p| dims.local_dims()[p])
        .product();

    // For each traced-part index t, the global indices of the kept-part basis
    // in kept-index order.
    let kept_total = kept_dims.total_dim();
    let mut blocks = vec![vec![0usize; kept_total]; traced_total];
    for global in 0..dims.total_dim() {
        let digits = dims.digits(global);
        let (mut k, mut t) = (0usize, 0usize);
        for (p, &digit) in digits.iter().enumerate() {
            let d = dims.local_dims()[p];
            if traced[p] {
                t = t * d + digit;
            } else {
                k = k * d + digit;
            }
        }
        blocks[t][k] = global;
    }

    let mut out = DMatrix::<C64>::zeros(kept_total, kept_total);
    for block in &blocks {
        for (r, &gr) in block.iter().enumerate() {
            for (c, &gc) in block.iter().enumerate() {
                out[(r, c)] += rho.mat[(gr, gc)];
            }
        }
    }
    Ok(Operator::new(out))
}

/// Principal square root of a Hermitian positive semidefinite operator.
///
/// Eigenvalues down to `-PSD_TOL` are clamped to zero; anything more negative
/// is an error. Eigenvalues at round-off level relative to the spectral radius
/// are also zeroed.
pub fn herm_sqrt(a: &Operator) -> Result<Operator> {
    let dev = a.hermiticity_deviation();
    let scale = a.mat.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let n = a.dim();
    if n == 0 {
        return Ok(a.clone());
    }
    let h = a.hermitian_part();
    let mut eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        // Exactly degenerate blocks can break the QR sweep; a shift moves them.
        let shift = C64::new(scale, 0.0);
        let shifted = h + DMatrix::from_diagonal_element(n, n, shift);
        eig = shifted.symmetric_eigen();
        eig.eigenvalues.iter_mut().for_each(|v| *v -= scale);
        if let Some(&bad) = eig.eigenvalues.iter().find(|v| !v.is_finite()) {
            return Err(Error::NotPositive { eigenvalue: bad });
        }
    }
    let max_abs = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let noise = 8.0 * n as f64 * f64::EPSILON * max_abs;
    let mut roots = Vec::with_capacity(n);
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -PSD_TOL {
            return Err(Error::NotPositive { eigenvalue: lambda });
        }
        roots.push(if lambda <= noise { 0.0 } else { lambda.sqrt() });
    }
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, &r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(r);
    }
    Ok(Operator::new(scaled * u.adjoint()))
}

/// `[Tr √(√a b √a)]²` for PSD operators of equal dimension, trace not fixed.
pub fn assemblage_member_fidelity(a: &Operator, b: &Operator) -> Result<f64> {
    Ok(root_fidelity(a, b)?.powi(2))
}

/// `Tr √(√a b √a)`, the square root of the Uhlmann fidelity.
pub fn root_fidelity(a: &Operator, b: &Operator) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let sa = herm_sqrt(a)?;
    let inner = Operator::new(&sa.mat * &b.mat * &sa.mat);
    let root = herm_sqrt(&inner)?;
    Ok(root.trace().re.max(0.0))
}

/// Uhlmann fidelity `[Tr √(√ρ σ √ρ)]²` between density operators.
pub fn state_fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    rho.check_density()?;
    sigma.check_density()?;
    let f = assemblage_member_fidelity(rho, sigma)?;
    Ok(clamp_unit(f))
}

/// `⟨ψ|ρ|ψ⟩`, the fidelity against a pure target.
pub fn pure_target_fidelity(rho: &Operator, psi: &Ket) -> Result<f64> {
    same_dim(rho.dim(), psi.dim())?;
    let v = psi.amplitudes();
    let value = v.dotc(&(&rho.mat * v));
    Ok(clamp_unit(value.re))
}

fn clamp_unit(x: f64) -> f64 {
    // Values are clamped only when the excursion is round-off sized.
    if (-1e-12..0.0).contains(&x) {
        0.0
    } else if x > 1.0 && x <= 1.0 + 1e-12 {
        1.0
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bell() -> Ket {
        let s = 0.5_f64.sqrt();
        Ket::from_real(&[s, 0.0, 0.0, s])
    }

    fn random_psd(dim: usize, seed: u64) -> Operator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        Operator::new(&g * g.adjoint())
    }

    fn random_density(dim: usize, seed: u64) -> Operator {
        let a = random_psd(dim, seed);
        let tr = a.trace().re;
        a.scale(1.0 / tr)
    }

    #[test]
    fn kron_identities() {
        let i2 = Operator::identity(2);
        assert_eq!(kron(&i2, &i2), Operator::identity(4));
    }

    #[test]
    fn kron_basis_bookkeeping() {
        let p0 = Ket::basis(2, 0).projector();
        let p1 = Ket::basis(2, 1).projector();
        assert_eq!(kron(&p0, &p1), Ket::basis(4, 1).projector());
        assert_eq!(kron(&p1, &p0), Ket::basis(4, 2).projector());
    }

    #[test]
    fn zz_leaves_bell_invariant() {
        let z = Operator::from_diagonal(&[1.0, -1.0]);
        let out = kron(&z, &z).apply(&bell()).unwrap();
        assert!((out.amplitudes() - bell().amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn kron_dims_multiply() {
        let a = Operator::identity(2);
        let b = Operator::identity(3);
        let c = Operator::identity(5);
        assert_eq!(kron(&kron(&a, &b), &c).dim(), 30);
        assert_eq!(kron_all([&a, &b, &c]).dim(), 30);
    }

    #[test]
    fn digits_round_trip() {
        let dims = DimsProfile::new(vec![2, 3, 4]).unwrap();
        assert_eq!(dims.total_dim(), 24);
        for k in 0..24 {
            assert_eq!(dims.index(&dims.digits(k)), k);
        }
        assert_eq!(dims.digits(23), vec![1, 2, 3]);
    }

    #[test]
    fn partial_trace_product_state() {
        let dims = DimsProfile::uniform(2, 2).unwrap();
        let rho = Ket::basis(4, 0).projector();
        let red = partial_trace(&rho, &dims, &[1]).unwrap();
        assert_eq!(red, Ket::basis(2, 0).projector());
    }

    #[test]
    fn partial_trace_bell_is_maximally_mixed() {
        let dims = DimsProfile::uniform(2, 2).unwrap();
        let red = partial_trace(&bell().projector(), &dims, &[1]).unwrap();
        assert!(red.frobenius_distance(&Operator::identity(2).scale(0.5)) < 1e-15);
        let red0 = partial_trace(&bell().projector(), &dims, &[0]).unwrap();
        assert!(red0.frobenius_distance(&Operator::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_keeps_order_and_trace() {
        // ρ = |0⟩⟨0| ⊗ |1⟩⟨1| ⊗ |2⟩⟨2| on 2×3×3; tracing the middle party.
        let dims = DimsProfile::new(vec![2, 3, 3]).unwrap();
        let idx = dims.index(&[0, 1, 2]);
        let rho = Ket::basis(18, idx).projector();
        let red = partial_trace(&rho, &dims, &[1]).unwrap();
        assert_eq!(red.dim(), 6);
        assert_eq!(red, Ket::basis(6, 2).projector());
        let full = partial_trace(&rho, &dims, &[0, 1, 2]).unwrap();
        assert_eq!(full.dim(), 1);
        assert!((full.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_party() {
        let dims = DimsProfile::uniform(2, 2).unwrap();
        let err = partial_trace(&Operator::identity(4), &dims, &[2]).unwrap_err();
        assert!(matches!(err, Error::PartyOutOfRange { index: 2, .. }));
        let err = partial_trace(&Operator::identity(3), &dims, &[0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn partial_trace_preserves_trace_on_random_inputs() {
        for seed in 0..20 {
            let dims = DimsProfile::new(vec![2, 3, 2]).unwrap();
            let rho = random_psd(12, seed);
            for traced in [&[0usize][..], &[1], &[2], &[0, 2], &[1, 2]] {
                let red = partial_trace(&rho, &dims, traced).unwrap();
                assert!((red.trace() - rho.trace()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn herm_sqrt_simple_cases() {
        let id = Operator::identity(3);
        assert!(herm_sqrt(&id).unwrap().frobenius_distance(&id) < 1e-14);
        let d = Operator::from_diagonal(&[4.0, 9.0]);
        let r = herm_sqrt(&d).unwrap();
        assert!(r.frobenius_distance(&Operator::from_diagonal(&[2.0, 3.0])) < 1e-14);
    }

    #[test]
    fn herm_sqrt_squares_back() {
        for (dim, seed) in [(2, 1), (5, 2), (16, 3), (33, 4), (64, 5)] {
            let a = random_psd(dim, seed);
            let r = herm_sqrt(&a).unwrap();
            let back = r.mul(&r).unwrap();
            assert!(back.frobenius_distance(&a) <= 1e-9, "dim {dim}");
            assert!(r.min_eigenvalue() >= -1e-12);
        }
    }

    #[test]
    fn herm_sqrt_clamps_small_negative_and_rejects_large() {
        let ok = Operator::from_diagonal(&[1.0, -5e-11]);
        let r = herm_sqrt(&ok).unwrap();
        assert_eq!(r.matrix()[(1, 1)], c(0.0));
        let bad = Operator::from_diagonal(&[1.0, -1e-6]);
        assert!(matches!(herm_sqrt(&bad), Err(Error::NotPositive { .. })));
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = c(0.5);
        assert!(matches!(
            herm_sqrt(&Operator::new(m)),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn herm_sqrt_survives_tiny_off_support_entries() {
        let n = 64;
        let support = [0usize, 21, 42, 63];
        let mut m = DMatrix::zeros(n, n);
        for &i in &support {
            for &j in &support {
                m[(i, j)] = c(0.25);
            }
        }
        for (k, &i) in support.iter().enumerate() {
            let j = 1 + 7 * k;
            let tiny = c(10f64.powi(-40 - 40 * k as i32));
            m[(i, j)] = tiny;
            m[(j, i)] = tiny;
        }
        let a = Operator::new(m);
        let r = herm_sqrt(&a).unwrap();
        assert!(r
            .matrix()
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!(r.mul(&r).unwrap().frobenius_distance(&a) < 1e-12);
    }

    #[test]
    fn fidelity_basic_values() {
        let rho = random_density(4, 9);
        assert!((state_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
        let p0 = Ket::basis(2, 0).projector();
        let p1 = Ket::basis(2, 1).projector();
        assert!(state_fidelity(&p0, &p1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric() {
        let a = random_density(6, 11);
        let b = random_density(6, 12);
        let f1 = state_fidelity(&a, &b).unwrap();
        let f2 = state_fidelity(&b, &a).unwrap();
        assert!((f1 - f2).abs() < 1e-10);
        assert!((0.0..=1.0).contains(&f1));
    }

    #[test]
    fn pure_target_shortcut_agrees_with_sqrt_path() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for dim in [2usize, 3, 4, 8, 16, 32] {
            let rho = random_density(dim, dim as u64);
            let psi = Ket::unnormalized(DVector::from_fn(dim, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }))
            .normalize()
            .unwrap();
            let fast = pure_target_fidelity(&rho, &psi).unwrap();
            let slow = state_fidelity(&rho, &psi.projector()).unwrap();
            assert!((fast - slow).abs() <= 1e-10, "dim {dim}: {fast} vs {slow}");
        }
    }

    #[test]
    fn pure_target_trivial_cases() {
        let psi = bell();
        assert!((pure_target_fidelity(&psi.projector(), &psi).unwrap() - 1.0).abs() < 1e-15);
        let mixed = Operator::identity(4).scale(0.25);
        assert!((pure_target_fidelity(&mixed, &psi).unwrap() - 0.25).abs() < 1e-15);
        assert!(pure_target_fidelity(&mixed, &Ket::basis(2, 0)).is_err());
    }

    #[test]
    fn member_fidelity_unnormalized() {
        let half0 = Ket::basis(2, 0).projector().scale(0.5);
        let f = assemblage_member_fidelity(&half0, &half0).unwrap();
        assert!((f - 0.25).abs() < 1e-14);
        let p1 = Ket::basis(2, 1).projector();
        assert!(assemblage_member_fidelity(&Ket::basis(2, 0).projector(), &p1).unwrap() < 1e-14);
    }

    #[test]
    fn state_fidelity_rejects_non_density() {
        let rho = Operator::identity(2);
        assert!(matches!(
            state_fidelity(&rho, &rho),
            Err(Error::NotDensity { .. })
        ));
        let a = Ket::basis(2, 0).projector();
        let b = Ket::basis(3, 0).projector();
        assert!(matches!(
            state_fidelity(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dense_cap() {
        assert!(DenseCap::DEFAULT.check(4096).is_ok());
        assert!(matches!(
            DenseCap::DEFAULT.check(4097),
            Err(Error::DenseCapExceeded {
                dim: 4097,
                cap: 4096
            })
        ));
    }
}

//! GHZ and W states, in dense and compact form.
//!
//! Every filter in this crate is diagonal in the computational basis, so a
//! GHZ state never leaves `span{|i i … i⟩}` and a W state never leaves the
//! single-excitation span. [`CompactState`] stores only the amplitudes on
//! those spans; [`CompactState::to_dense`] expands to a full [`Ket`].

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{DenseCap, DimsProfile, Ket, C64};

/// Accepted deviation of `Σ c_i²` from 1 before a coefficient vector is
/// rejected rather than renormalized.
pub const NORMALIZATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Ghz,
    W,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ghz => "ghz",
            Family::W => "w",
        }
    }
}

fn normalize_coeffs(mut coeffs: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if let Some(bad) = coeffs.iter().find(|c| !c.is_finite() || **c <= 0.0) {
        return Err(Error::InvalidSpec(format!(
            "{what} must be strictly positive reals, found {bad}"
        )));
    }
    let sum_sq: f64 = coeffs.iter().map(|c| c * c).sum();
    if (sum_sq - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidSpec(format!(
            "squared {what} sum to {sum_sq}, not 1"
        )));
    }
    let norm = sum_sq.sqrt();
    coeffs.iter_mut().for_each(|c| *c /= norm);
    Ok(coeffs)
}

/// `Σ_i α_i |i⟩^{⊗P}` with `d = alphas.len()` local levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GhzSpec {
    p: usize,
    alphas: Vec<f64>,
}

impl GhzSpec {
    /// Validates and renormalizes the coefficients.
    pub fn new(alphas: Vec<f64>, p: usize) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::InvalidSpec("GHZ local dimension must be ≥ 2".into()));
        }
        if p < 2 {
            return Err(Error::InvalidSpec("GHZ party count must be ≥ 2".into()));
        }
        let alphas = normalize_coeffs(alphas, "GHZ coefficients")?;
        Ok(GhzSpec { p, alphas })
    }

    pub fn d(&self) -> usize {
        self.alphas.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn coeff_sum(&self) -> f64 {
        self.alphas.iter().sum()
    }

    pub fn dense_dim(&self) -> usize {
        self.d().pow(self.p as u32)
    }
}

/// `Σ_i β_i |0…1…0⟩` on `P = betas.len()` qubits, where `β_i` excites party
/// `P − 1 − i` (so `β_0` sits on `|0…01⟩`).
#[derive(Debug, Clone, PartialEq)]
pub struct WSpec {
    betas: Vec<f64>,
}

impl WSpec {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::InvalidSpec("W party count must be ≥ 2".into()));
        }
        let betas = normalize_coeffs(betas, "W coefficients")?;
        Ok(WSpec { betas })
    }

    pub fn p(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn coeff_sum(&self) -> f64 {
        self.betas.iter().sum()
    }

    /// Party excited by coefficient `i`.
    pub fn excited_party(&self, i: usize) -> usize {
        self.p() - 1 - i
    }
}

pub fn perfect_ghz(d: usize, p: usize) -> Result<GhzSpec> {
    if d < 2 {
        return Err(Error::InvalidSpec("GHZ local dimension must be ≥ 2".into()));
    }
    GhzSpec::new(vec![1.0 / (d as f64).sqrt(); d], p)
}

pub fn perfect_w(p: usize) -> Result<WSpec> {
    if p < 2 {
        return Err(Error::InvalidSpec("W party count must be ≥ 2".into()));
    }
    WSpec::new(vec![1.0 / (p as f64).sqrt(); p])
}

/// Either family of initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Ghz(GhzSpec),
    W(WSpec),
}

impl StateSpec {
    pub fn family(&self) -> Family {
        match self {
            StateSpec::Ghz(_) => Family::Ghz,
            StateSpec::W(_) => Family::W,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            StateSpec::Ghz(s) => s.p(),
            StateSpec::W(s) => s.p(),
        }
    }

    /// Local dimension of each party.
    pub fn d(&self) -> usize {
        match self {
            StateSpec::Ghz(s) => s.d(),
            StateSpec::W(_) => 2,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        match self {
            StateSpec::Ghz(s) => s.alphas(),
            StateSpec::W(s) => s.betas(),
        }
    }

    pub fn coeff_sum(&self) -> f64 {
        self.coeffs().iter().sum()
    }

    pub fn dense_dim(&self) -> usize {
        self.d().pow(self.p() as u32)
    }

    /// The uniform-coefficient target of the same shape.
    pub fn perfect(&self) -> StateSpec {
        match self {
            StateSpec::Ghz(s) => StateSpec::Ghz(perfect_ghz(s.d(), s.p()).expect("valid shape")),
            StateSpec::W(s) => StateSpec::W(perfect_w(s.p()).expect("valid shape")),
        }
    }

    pub fn is_perfect(&self, tol: f64) -> bool {
        let n = self.coeffs().len() as f64;
        self.coeffs()
            .iter()
            .all(|c| (c - 1.0 / n.sqrt()).abs() <= tol)
    }

    pub fn compact(&self) -> CompactState {
        make_compact(self)
    }

    pub fn dense(&self, cap: DenseCap) -> Result<Ket> {
        match self {
            StateSpec::Ghz(s) => make_ghz_dense(s, cap),
            StateSpec::W(s) => make_w_dense(s, cap),
        }
    }
}

impl From<GhzSpec> for StateSpec {
    fn from(s: GhzSpec) -> Self {
        StateSpec::Ghz(s)
    }
}

impl From<WSpec> for StateSpec {
    fn from(s: WSpec) -> Self {
        StateSpec::W(s)
    }
}

/// Global index of `|i i … i⟩` for `p` parties of dimension `d`.
pub fn ghz_index(d: usize, p: usize, i: usize) -> usize {
    (0..p).fold(0, |acc, _| acc * d + i)
}

/// Global index of the W basis state carrying coefficient `i` of `p`.
pub fn w_index(i: usize) -> usize {
    1 << i
}

fn checked_dense_dim(d: usize, p: usize, cap: DenseCap) -> Result<DimsProfile> {
    let dim = d.checked_pow(p as u32).unwrap_or(usize::MAX);
    cap.check(dim)?;
    DimsProfile::uniform(d, p)
}

pub fn make_ghz_dense(spec: &GhzSpec, cap: DenseCap) -> Result<Ket> {
    let dims = checked_dense_dim(spec.d(), spec.p(), cap)?;
    let mut amps = DVector::zeros(dims.total_dim());
    for (i, &a) in spec.alphas().iter().enumerate() {
        amps[dims.index(&vec![i; spec.p()])] = C64::new(a, 0.0);
    }
    Ket::normalized(amps)
}

pub fn make_w_dense(spec: &WSpec, cap: DenseCap) -> Result<Ket> {
    let p = spec.p();
    let dims = checked_dense_dim(2, p, cap)?;
    let mut amps = DVector::zeros(dims.total_dim());
    for (i, &b) in spec.betas().iter().enumerate() {
        let mut digits = vec![0; p];
        digits[spec.excited_party(i)] = 1;
        amps[dims.index(&digits)] = C64::new(b, 0.0);
    }
    Ket::normalized(amps)
}

/// Amplitudes of a GHZ- or W-type vector on its invariant span.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactState {
    family: Family,
    d: usize,
    p: usize,
    coeffs: Vec<f64>,
    normalized: bool,
}

pub fn make_compact(spec: &StateSpec) -> CompactState {
    CompactState {
        family: spec.family(),
        d: spec.d(),
        p: spec.p(),
        coeffs: spec.coeffs().to_vec(),
        normalized: true,
    }
}

impl CompactState {
    /// An unnormalized compact vector. `coeffs` has length `d` for GHZ and
    /// `p` for W.
    pub fn from_parts(family: Family, d: usize, p: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = match family {
            Family::Ghz => d,
            Family::W => p,
        };
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        if family == Family::W && d != 2 {
            return Err(Error::InvalidSpec("W states live on qubits".into()));
        }
        Ok(CompactState {
            family,
            d,
            p,
            coeffs,
            normalized: false,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn normalize(&self) -> Option<CompactState> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return None;
        }
        Some(CompactState {
            coeffs: self.coeffs.iter().map(|c| c / n).collect(),
            normalized: true,
            ..self.clone()
        })
    }

    pub fn dense_dim(&self) -> usize {
        self.d.pow(self.p as u32)
    }

    /// Global index in the dense basis of compact slot `i`.
    pub fn dense_index(&self, i: usize) -> usize {
        match self.family {
            Family::Ghz => ghz_index(self.d, self.p, i),
            Family::W => w_index(i),
        }
    }

    /// `⟨self|other⟩`; both vectors must have the same family and shape.
    pub fn inner(&self, other: &CompactState) -> Result<f64> {
        if self.family != other.family || self.d != other.d || self.p != other.p {
            return Err(Error::DimensionMismatch {
                expected: self.dense_dim(),
                found: other.dense_dim(),
            });
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn to_dense(&self, cap: DenseCap) -> Result<Ket> {
        let dim = self
            .d
            .checked_pow(self.p as u32)
            .ok_or(Error::DenseCapExceeded {
                dim: usize::MAX,
                cap: cap.0,
            })?;
        cap.check(dim)?;
        let mut amps = vec![0.0; dim];
        for (i, &c) in self.coeffs.iter().enumerate() {
            amps[self.dense_index(i)] = c;
        }
        let ket = Ket::from_real(&amps);
        if self.normalized {
            Ok(ket
                .normalize()
                .expect("normalized compact state is nonzero"))
        } else {
            Ok(ket)
        }
    }
}

/// A random GHZ spec with `α_0` strictly the smallest coefficient.
pub fn random_ghz_spec<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> GhzSpec {
    let mut raw: Vec<f64> = (0..d).map(|_| 0.05 + rng.random::<f64>()).collect();
    let (min_pos, _) = raw
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("d ≥ 2");
    raw.swap(0, min_pos);
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    GhzSpec::new(raw.iter().map(|x| x / norm).collect(), p).expect("positive, normalized")
}

/// A random W spec with `β_{P-1}` the largest coefficient.
pub fn random_w_spec<R: Rng + ?Sized>(p: usize, rng: &mut R) -> WSpec {
    let mut raw: Vec<f64> = (0..p).map(|_| 0.05 + rng.random::<f64>()).collect();
    let (max_pos, _) = raw
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("p ≥ 2");
    raw.swap(p - 1, max_pos);
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    WSpec::new(raw.iter().map(|x| x / norm).collect()).expect("positive, normalized")
}

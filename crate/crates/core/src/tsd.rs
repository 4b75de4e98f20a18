//! Threshold steering distillation.
//!
//! The first `s` parties are uncharacterized: each measures one of two
//! mutually unbiased bases and reports a setting/outcome pair. What remains on
//! the characterized parties is the assemblage `{σ_{a|x}}`. Participating
//! characterized parties then filter exactly as in [`crate::ted`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filters::FilterAssignment;
use crate::states::{Family, StateSpec};
use crate::ted::{closed_form_fidelity, overall_success, ProtocolConfig};
use crate::tensor::{root_fidelity, DimsProfile, Ket, Operator, C64, PSD_TOL};

/// Measurement settings available to each uncharacterized party.
pub const SETTINGS: usize = 2;

/// Two mutually unbiased bases in prime dimension `d`: the computational
/// basis (`x = 0`) and the Fourier basis (`x = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct MubFamily {
    d: usize,
    bases: [Vec<Ket>; SETTINGS],
}

impl MubFamily {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn basis(&self, x: usize) -> &[Ket] {
        &self.bases[x]
    }

    pub fn vector(&self, x: usize, a: usize) -> &Ket {
        &self.bases[x][a]
    }
}

pub fn mub_family(d: usize) -> Result<MubFamily> {
    if ![2, 3, 5, 7].contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let computational = (0..d).map(|a| Ket::basis(d, a)).collect();
    let norm = 1.0 / (d as f64).sqrt();
    let fourier = (0..d)
        .map(|a| {
            let amps = DVector::from_fn(d, |l, _| {
                let phase = 2.0 * std::f64::consts::PI * ((a * l) % d) as f64 / d as f64;
                C64::from_polar(norm, phase)
            });
            Ket::unnormalized(amps)
        })
        .collect();
    Ok(MubFamily {
        d,
        bases: [computational, fourier],
    })
}

/// A distillation run seen from a steering scenario with `s` uncharacterized
/// parties (parties `0..s`).
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringConfig {
    base: ProtocolConfig,
    s: usize,
}

impl SteeringConfig {
    pub fn new(base: ProtocolConfig, s: usize) -> Result<Self> {
        let (p, q) = (base.spec().p(), base.q());
        match base.family() {
            Family::Ghz => {
                if s == 0 || s >= p {
                    return Err(Error::InvalidSteeringScenario(format!(
                        "GHZ steering needs 1 ≤ S ≤ P − 1, got S = {s}, P = {p}"
                    )));
                }
                if q > p - s {
                    return Err(Error::InvalidSteeringScenario(format!(
                        "Q = {q} exceeds the {} characterized parties",
                        p - s
                    )));
                }
            }
            Family::W => {
                if s != 1 {
                    return Err(Error::InvalidSteeringScenario(format!(
                        "W steering is defined for S = 1 only, got S = {s}"
                    )));
                }
            }
        }
        if let Some(&party) = base.participants().iter().find(|&&j| j < s) {
            return Err(Error::UncharacterizedFilter(party));
        }
        mub_family(base.spec().d())?;
        Ok(SteeringConfig { base, s })
    }

    pub fn base(&self) -> &ProtocolConfig {
        &self.base
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Whether at least one characterized party stays out of the filtering.
    pub fn is_threshold(&self) -> bool {
        self.base.q() < self.base.spec().p() - self.s
    }

    pub fn char_dims(&self) -> Result<DimsProfile> {
        let spec = self.base.spec();
        DimsProfile::uniform(spec.d(), spec.p() - self.s)
    }
}

/// Unnormalized conditional states on the characterized parties.
///
/// Setting strings use digit base 2 and outcome strings digit base `d`, both
/// little-endian (party 0 is the least significant digit). The member for
/// `(x, a)` lives at `x_index · d^s + a_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assemblage {
    s: usize,
    d_out: usize,
    char_dims: DimsProfile,
    members: Vec<Operator>,
}

impl Assemblage {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn char_dim(&self) -> usize {
        self.char_dims.total_dim()
    }

    pub fn char_dims(&self) -> &DimsProfile {
        &self.char_dims
    }

    pub fn setting_count(&self) -> usize {
        SETTINGS.pow(self.s as u32)
    }

    pub fn outcome_count(&self) -> usize {
        self.d_out.pow(self.s as u32)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Operator] {
        &self.members
    }

    /// Member by little-endian string indices.
    pub fn member_at(&self, x_index: usize, a_index: usize) -> &Operator {
        &self.members[x_index * self.outcome_count() + a_index]
    }

    /// Member by setting and outcome digit strings.
    pub fn member(&self, x: &[usize], a: &[usize]) -> Result<&Operator> {
        if x.len() != self.s || a.len() != self.s {
            return Err(Error::DimensionMismatch {
                expected: self.s,
                found: x.len().max(a.len()),
            });
        }
        if x.iter().any(|&v| v >= SETTINGS) || a.iter().any(|&v| v >= self.d_out) {
            return Err(Error::InvalidSteeringScenario(
                "setting or outcome out of range".into(),
            ));
        }
        Ok(self.member_at(little_endian(x, SETTINGS), little_endian(a, self.d_out)))
    }

    pub fn setting_digits(&self, x_index: usize) -> Vec<usize> {
        digits_le(x_index, SETTINGS, self.s)
    }

    pub fn outcome_digits(&self, a_index: usize) -> Vec<usize> {
        digits_le(a_index, self.d_out, self.s)
    }

    /// `Σ_a σ_{a|x}`
    pub fn marginal(&self, x_index: usize) -> Operator {
        let n = self.outcome_count();
        let mut acc = DMatrix::<C64>::zeros(self.char_dim(), self.char_dim());
        for m in &self.members[x_index * n..(x_index + 1) * n] {
            acc += m.matrix();
        }
        Operator::new(acc)
    }

    /// The characterized reduced state, `Σ_a σ_{a|0}`.
    pub fn reduced_state(&self) -> Operator {
        self.marginal(0)
    }

    /// Largest entrywise difference between any setting's marginal and the
    /// marginal of setting 0.
    pub fn non_signaling_deviation(&self) -> f64 {
        let reference = self.reduced_state();
        (1..self.setting_count())
            .map(|x| {
                (self.marginal(x).matrix() - reference.matrix())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all members.
    pub fn min_member_eigenvalue(&self) -> f64 {
        self.members
            .iter()
            .map(Operator::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks positivity of members and unit trace of the reduced state.
    pub fn validate(&self) -> Result<()> {
        let min = self.min_member_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::NotPositive { eigenvalue: min });
        }
        self.reduced_state().check_density()
    }

    /// Member-wise `w·self + (1 − w)·other`.
    pub fn mix(&self, w: f64, other: &Assemblage) -> Result<Assemblage> {
        self.same_shape(other)?;
        let members = self
            .members
            .iter()
            .zip(&other.members)
            .map(|(a, b)| a.scale(w).add(&b.scale(1.0 - w)))
            .collect::<Result<_>>()?;
        Ok(Assemblage {
            members,
            ..self.clone()
        })
    }

    fn same_shape(&self, other: &Assemblage) -> Result<()> {
        if self.s != other.s || self.d_out != other.d_out || self.char_dims != other.char_dims {
            return Err(Error::ShapeMismatch);
        }
        Ok(())
    }
}

fn little_endian(digits: &[usize], base: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &v| acc * base + v)
}

fn digits_le(mut index: usize, base: usize, len: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let v = index % base;
            index /= base;
            v
        })
        .collect()
}

/// Assemblage produced when the first `s` parties of `state` measure in
/// [`mub_family`] bases.
pub fn assemblage_from_ket(state: &Ket, d: usize, p: usize, s: usize) -> Result<Assemblage> {
    let dims = DimsProfile::uniform(d, p)?;
    if state.dim() != dims.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: dims.total_dim(),
            found: state.dim(),
        });
    }
    if s == 0 || s >= p {
        return Err(Error::InvalidSteeringScenario(format!(
            "need 1 ≤ S ≤ P − 1, got S = {s}, P = {p}"
        )));
    }
    let mubs = mub_family(d)?;
    let char_dims = DimsProfile::uniform(d, p - s)?;
    let unch_dims = DimsProfile::uniform(d, s)?;
    let (char_dim, unch_dim) = (char_dims.total_dim(), unch_dims.total_dim());
    let psi = state.amplitudes();

    let settings = SETTINGS.pow(s as u32);
    let outcomes = d.pow(s as u32);
    let mut members = Vec::with_capacity(settings * outcomes);
    for x_index in 0..settings {
        let x = digits_le(x_index, SETTINGS, s);
        for a_index in 0..outcomes {
            let a = digits_le(a_index, d, s);
            // φ = (⟨m_a| ⊗ I) ψ
            let mut phi = DVector::<C64>::zeros(char_dim);
            for u in 0..unch_dim {
                let coeff = unch_dims
                    .digits(u)
                    .iter()
                    .enumerate()
                    .map(|(k, &digit)| mubs.vector(x[k], a[k]).amplitudes()[digit].conj())
                    .product::<C64>();
                if coeff == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..char_dim {
                    phi[c] += coeff * psi[u * char_dim + c];
                }
            }
            members.push(Operator::new(&phi * phi.adjoint()));
        }
    }
    Ok(Assemblage {
        s,
        d_out: d,
        char_dims,
        members,
    })
}

/// Assemblage of an arbitrary spec under the steering scenario of `config`.
pub fn build_assemblage_for(spec: &StateSpec, config: &SteeringConfig) -> Result<Assemblage> {
    let ket = spec.dense(config.base().dense_cap())?;
    assemblage_from_ket(&ket, spec.d(), spec.p(), config.s())
}

/// Assemblage of the initial state.
pub fn build_assemblage(config: &SteeringConfig) -> Result<Assemblage> {
    build_assemblage_for(config.base().spec(), config)
}

/// Assemblage of the perfect state the run targets.
pub fn perfect_assemblage(config: &SteeringConfig) -> Result<Assemblage> {
    build_assemblage_for(&config.base().spec().perfect(), config)
}

/// Conjugates every member by `⊗_PP K_o ⊗_NP I` on the characterized parties
/// and renormalizes. Returns the filtered assemblage and the branch
/// probability.
pub fn filter_assemblage(
    assemblage: &Assemblage,
    assignment: &FilterAssignment,
    outcomes: &[u8],
) -> Result<(Assemblage, f64)> {
    let s = assemblage.s;
    if let Some(&party) = assignment.participants().iter().find(|&&j| j < s) {
        return Err(Error::UncharacterizedFilter(party));
    }
    let expected_parties = s + assemblage.char_dims.parties();
    if assignment.p() != expected_parties || assignment.d() != assemblage.d_out {
        return Err(Error::DimensionMismatch {
            expected: expected_parties,
            found: assignment.p(),
        });
    }
    let locals = assignment.local_diagonals(outcomes)?;
    let dims = &assemblage.char_dims;
    let diag: Vec<f64> = (0..dims.total_dim())
        .map(|c| {
            dims.digits(c)
                .iter()
                .enumerate()
                .map(|(k, &digit)| locals[s + k].map_or(1.0, |kd| kd[digit]))
                .product()
        })
        .collect();

    let conjugate = |m: &Operator| {
        let src = m.matrix();
        Operator::new(DMatrix::from_fn(src.nrows(), src.ncols(), |i, j| {
            src[(i, j)] * (diag[i] * diag[j])
        }))
    };
    let prob = conjugate(&assemblage.reduced_state()).trace().re;
    if prob <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    let members = assemblage
        .members
        .iter()
        .map(|m| conjugate(m).scale(1.0 / prob))
        .collect();
    Ok((
        Assemblage {
            members,
            ..assemblage.clone()
        },
        prob,
    ))
}

/// The all-zero post-selected assemblage with its per-copy probability.
pub fn post_selected_assemblage(config: &SteeringConfig) -> Result<(Assemblage, f64)> {
    let assignment = config.base().assignment()?;
    let zeros = vec![0u8; assignment.q()];
    filter_assemblage(&build_assemblage(config)?, &assignment, &zeros)
}

/// `P_s σ^filtered + (1 − P_s) σ^initial`, member-wise.
pub fn distilled_assemblage(config: &SteeringConfig) -> Result<Assemblage> {
    let (filtered, p_u) = post_selected_assemblage(config)?;
    let ps = overall_success(p_u, config.base().n_copies());
    filtered.mix(ps, &build_assemblage(config)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblageFidelity {
    pub value: f64,
    /// Setting string (little-endian) attaining the minimum.
    pub minimizing_setting: Vec<usize>,
    pub per_setting: Vec<f64>,
}

/// `min_x (Σ_a Tr √(√σ_{a|x} σ'_{a|x} √σ_{a|x}))²`
///
/// For each setting this is the fidelity between the classical-quantum states
/// `Σ_a |a⟩⟨a| ⊗ σ_{a|x}`, so identical assemblages score exactly 1.
pub fn assemblage_fidelity(a: &Assemblage, b: &Assemblage) -> Result<AssemblageFidelity> {
    a.same_shape(b)?;
    let n = a.outcome_count();
    let per_setting = (0..a.setting_count())
        .map(|x| {
            let root: f64 = (0..n)
                .map(|k| root_fidelity(a.member_at(x, k), b.member_at(x, k)))
                .sum::<Result<f64>>()?;
            Ok(root * root)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (best, value) =
        per_setting
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (x, v)| if v < acc.1 { (x, v) } else { acc },
            );
    Ok(AssemblageFidelity {
        value,
        minimizing_setting: a.setting_digits(best),
        per_setting,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringReport {
    pub p_success_per_copy: f64,
    pub p_success_overall: f64,
    pub fidelity_closed_form: f64,
    pub assemblage_fidelity: f64,
    pub minimizing_setting: Vec<usize>,
    pub is_threshold: bool,
    pub member_count: usize,
    pub distilled: Assemblage,
}

pub fn run_tsd(config: &SteeringConfig) -> Result<SteeringReport> {
    let initial = build_assemblage(config)?;
    let assignment = config.base().assignment()?;
    let zeros = vec![0u8; assignment.q()];
    let (filtered, p_u) = filter_assemblage(&initial, &assignment, &zeros)?;
    let ps = overall_success(p_u, config.base().n_copies());
    let distilled = filtered.mix(ps, &initial)?;
    let fid = assemblage_fidelity(&distilled, &perfect_assemblage(config)?)?;
    Ok(SteeringReport {
        p_success_per_copy: p_u,
        p_success_overall: ps,
        fidelity_closed_form: closed_form_fidelity(config.base().spec(), config.base().n_copies()),
        assemblage_fidelity: fid.value,
        minimizing_setting: fid.minimizing_setting,
        is_threshold: config.is_threshold(),
        member_count: distilled.len(),
        distilled,
    })
}

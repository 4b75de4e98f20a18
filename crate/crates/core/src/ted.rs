//! Threshold entanglement distillation.
//!
//! The participating parties filter each of the first `N − 1` copies and keep
//! the copies on which every participant saw outcome 0. The distilled output
//! is modelled as the two-branch mixture
//! `P_s |filtered⟩⟨filtered| + (1 − P_s) |initial⟩⟨initial|` with
//! `P_s = 1 − (1 − P_s^u)^{N−1}`.

use crate::error::{Error, Result};
use crate::filters::{
    default_participants, ghz_partition_assignment, w_assignment, FilterAssignment, IndexPartition,
};
use crate::states::{CompactState, Family, StateSpec};
use crate::tensor::{DenseCap, DimsProfile, Ket, Operator, C64};

/// Largest participant count for which outcome strings are enumerated.
pub const MAX_ENUMERATED_PARTICIPANTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Representation {
    #[default]
    Compact,
    Dense,
}

/// A pure state in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum PureState {
    Compact(CompactState),
    Dense(Ket),
}

impl PureState {
    pub fn norm_sqr(&self) -> f64 {
        match self {
            PureState::Compact(c) => c.norm_sqr(),
            PureState::Dense(k) => k.norm_sqr(),
        }
    }

    pub fn normalize(&self) -> Option<PureState> {
        match self {
            PureState::Compact(c) => c.normalize().map(PureState::Compact),
            PureState::Dense(k) => k.normalize().map(PureState::Dense),
        }
    }

    pub fn to_dense(&self, cap: DenseCap) -> Result<Ket> {
        match self {
            PureState::Compact(c) => {
                let ket = c.to_dense(cap)?;
                Ok(ket)
            }
            PureState::Dense(k) => {
                cap.check(k.dim())?;
                Ok(k.clone())
            }
        }
    }

    /// `⟨self|other⟩`. Mixed representations are compared densely.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        match (self, other) {
            (PureState::Compact(a), PureState::Compact(b)) => Ok(C64::new(a.inner(b)?, 0.0)),
            (PureState::Dense(a), PureState::Dense(b)) => a.inner(b),
            (a, b) => {
                let cap = DenseCap(usize::MAX);
                a.to_dense(cap)?.inner(&b.to_dense(cap)?)
            }
        }
    }
}

/// Parameters of one distillation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    n_copies: usize,
    spec: StateSpec,
    participants: Vec<usize>,
    partition: Option<IndexPartition>,
    representation: Representation,
    dense_cap: DenseCap,
}

impl ProtocolConfig {
    /// GHZ run with `q` participants, by default the last `q` parties holding
    /// contiguous blocks of the index set.
    pub fn ghz(spec: crate::states::GhzSpec, n_copies: usize, q: usize) -> Result<Self> {
        let p = spec.p();
        if q == 0 || q >= p {
            return Err(Error::InvalidConfig(format!(
                "GHZ needs 1 ≤ Q ≤ P − 1, got Q = {q}, P = {p}"
            )));
        }
        let partition = IndexPartition::contiguous(spec.d(), q)?;
        let cfg = ProtocolConfig {
            n_copies,
            participants: default_participants(p, q),
            partition: Some(partition),
            spec: StateSpec::Ghz(spec),
            representation: Representation::Compact,
            dense_cap: DenseCap::DEFAULT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// W run; parties `1..P−1` participate.
    pub fn w(spec: crate::states::WSpec, n_copies: usize) -> Result<Self> {
        let p = spec.p();
        let cfg = ProtocolConfig {
            n_copies,
            participants: (1..p).collect(),
            partition: None,
            spec: StateSpec::W(spec),
            representation: Representation::Compact,
            dense_cap: DenseCap::DEFAULT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_partition(mut self, partition: IndexPartition) -> Result<Self> {
        if self.spec.family() != Family::Ghz {
            return Err(Error::BadPartition(
                "partitions apply to GHZ runs only".into(),
            ));
        }
        self.partition = Some(partition);
        self.validate()?;
        Ok(self)
    }

    /// Which parties participate; `parties[k]` owns block `k` of the partition.
    pub fn with_participants(mut self, parties: Vec<usize>) -> Result<Self> {
        self.participants = parties;
        self.validate()?;
        Ok(self)
    }

    pub fn with_representation(mut self, representation: Representation) -> Self {
        self.representation = representation;
        self
    }

    pub fn with_dense_cap(mut self, cap: DenseCap) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn with_copies(mut self, n_copies: usize) -> Result<Self> {
        self.n_copies = n_copies;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.n_copies < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least 2 copies are required, got {}",
                self.n_copies
            )));
        }
        let (p, q) = (self.spec.p(), self.participants.len());
        match self.spec.family() {
            Family::Ghz => {
                if q == 0 || q >= p {
                    return Err(Error::InvalidConfig(format!(
                        "GHZ needs 1 ≤ Q ≤ P − 1, got Q = {q}, P = {p}"
                    )));
                }
                let blocks = self.partition.as_ref().map_or(0, IndexPartition::len);
                if blocks != q {
                    return Err(Error::BadPartition(format!(
                        "{blocks} blocks for {q} participants"
                    )));
                }
            }
            Family::W => {
                if q != p - 1 {
                    return Err(Error::InvalidConfig(format!(
                        "W distillation needs Q = P − 1 = {}, got {q}",
                        p - 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_copies(&self) -> usize {
        self.n_copies
    }

    pub fn spec(&self) -> &StateSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn q(&self) -> usize {
        self.participants.len()
    }

    pub fn participants(&self) -> &[usize] {
        &self.participants
    }

    pub fn partition(&self) -> Option<&IndexPartition> {
        self.partition.as_ref()
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn dense_cap(&self) -> DenseCap {
        self.dense_cap
    }

    pub fn assignment(&self) -> Result<FilterAssignment> {
        match &self.spec {
            StateSpec::Ghz(s) => ghz_partition_assignment(
                s,
                self.partition.as_ref().expect("validated"),
                &self.participants,
            ),
            StateSpec::W(s) => w_assignment(s),
        }
    }

    pub fn initial_state(&self) -> Result<PureState> {
        self.state_of(&self.spec)
    }

    pub fn perfect_state(&self) -> Result<PureState> {
        self.state_of(&self.spec.perfect())
    }

    fn state_of(&self, spec: &StateSpec) -> Result<PureState> {
        Ok(match self.representation {
            Representation::Compact => PureState::Compact(spec.compact()),
            Representation::Dense => PureState::Dense(spec.dense(self.dense_cap)?),
        })
    }
}

/// Applies `⊗_PP K_o ⊗_NP I` and returns the unnormalized branch with its
/// probability. `outcomes[k]` belongs to the `k`-th participant in ascending
/// party order.
pub fn apply_filter_layer(
    state: &PureState,
    assignment: &FilterAssignment,
    outcomes: &[u8],
) -> Result<(PureState, f64)> {
    let locals = assignment.local_diagonals(outcomes)?;
    let out = match state {
        PureState::Compact(c) => PureState::Compact(filter_compact(c, assignment, &locals)?),
        PureState::Dense(k) => PureState::Dense(filter_dense(k, assignment, &locals)?),
    };
    let prob = out.norm_sqr();
    Ok((out, prob))
}

fn filter_compact(
    state: &CompactState,
    assignment: &FilterAssignment,
    locals: &[Option<&[f64]>],
) -> Result<CompactState> {
    if assignment.p() != state.p() || assignment.d() != state.d() {
        return Err(Error::DimensionMismatch {
            expected: state.dense_dim(),
            found: assignment.d().pow(assignment.p() as u32),
        });
    }
    let p = state.p();
    let coeffs = state
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let factor: f64 = locals
                .iter()
                .enumerate()
                .filter_map(|(party, diag)| diag.map(|k| (party, k)))
                .map(|(party, k)| match state.family() {
                    Family::Ghz => k[i],
                    // coefficient i excites party P − 1 − i
                    Family::W => k[usize::from(party == p - 1 - i)],
                })
                .product();
            c * factor
        })
        .collect();
    CompactState::from_parts(state.family(), state.d(), p, coeffs)
}

fn filter_dense(
    ket: &Ket,
    assignment: &FilterAssignment,
    locals: &[Option<&[f64]>],
) -> Result<Ket> {
    let dims = DimsProfile::uniform(assignment.d(), assignment.p())?;
    if dims.total_dim() != ket.dim() {
        return Err(Error::DimensionMismatch {
            expected: dims.total_dim(),
            found: ket.dim(),
        });
    }
    let mut amps = ket.amplitudes().clone();
    for (index, amp) in amps.iter_mut().enumerate() {
        if *amp == C64::new(0.0, 0.0) {
            continue;
        }
        let digits = dims.digits(index);
        let factor: f64 = locals
            .iter()
            .zip(&digits)
            .filter_map(|(diag, &digit)| diag.map(|k| k[digit]))
            .product();
        *amp *= factor;
    }
    Ok(Ket::unnormalized(amps))
}

/// Probabilities of every joint outcome string; index bit `k` is the outcome
/// of the `k`-th participant (ascending party order).
pub fn outcome_distribution(state: &PureState, assignment: &FilterAssignment) -> Result<Vec<f64>> {
    let q = assignment.q();
    if q > MAX_ENUMERATED_PARTICIPANTS {
        return Err(Error::InvalidConfig(format!(
            "{q} participants is too many to enumerate outcome strings"
        )));
    }
    (0..1usize << q)
        .map(|mask| {
            let outcomes: Vec<u8> = (0..q).map(|k| ((mask >> k) & 1) as u8).collect();
            apply_filter_layer(state, assignment, &outcomes).map(|(_, p)| p)
        })
        .collect()
}

/// Probability that every participant obtains outcome 0 on one copy.
pub fn success_prob_per_copy(config: &ProtocolConfig) -> Result<f64> {
    let assignment = config.assignment()?;
    let zeros = vec![0u8; assignment.q()];
    let (_, p) = apply_filter_layer(&config.initial_state()?, &assignment, &zeros)?;
    Ok(p)
}

/// `d α₀²` for GHZ, `P Π β_i² / β_{P−1}^{2(P−1)}` for W.
pub fn closed_form_success(spec: &StateSpec) -> f64 {
    match spec {
        StateSpec::Ghz(s) => s.d() as f64 * s.alphas()[0].powi(2),
        StateSpec::W(s) => {
            let p = s.p();
            let pivot = s.betas()[p - 1];
            let prod: f64 = s.betas().iter().map(|b| b * b).product();
            p as f64 * prod / pivot.powi(2 * (p as i32 - 1))
        }
    }
}

/// `1 − (1 − p)^{N−1}`
pub fn overall_success(p_per_copy: f64, n: usize) -> f64 {
    1.0 - (1.0 - p_per_copy).powi(n as i32 - 1)
}

/// `1 − (1/D)(1 − P_s^u)^{N−1} · gap`, where `gap = D − (Σ c_i)²` and `D` is
/// the number of coefficients.
pub fn fidelity_from_aggregates(dim: usize, p_per_copy: f64, n: usize, gap: f64) -> f64 {
    1.0 - (1.0 - p_per_copy).powi(n as i32 - 1) * gap / dim as f64
}

pub fn closed_form_fidelity_ghz(spec: &crate::states::GhzSpec, n: usize) -> f64 {
    let d = spec.d();
    let gap = d as f64 - spec.coeff_sum().powi(2);
    fidelity_from_aggregates(d, closed_form_success(&spec.clone().into()), n, gap)
}

pub fn closed_form_fidelity_w(spec: &crate::states::WSpec, n: usize) -> f64 {
    let p = spec.p();
    let gap = p as f64 - spec.coeff_sum().powi(2);
    fidelity_from_aggregates(p, closed_form_success(&spec.clone().into()), n, gap)
}

pub fn closed_form_fidelity(spec: &StateSpec, n: usize) -> f64 {
    match spec {
        StateSpec::Ghz(s) => closed_form_fidelity_ghz(s, n),
        StateSpec::W(s) => closed_form_fidelity_w(s, n),
    }
}

/// Convex combination of pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub components: Vec<(f64, PureState)>,
}

impl Mixture {
    /// `Σ_k w_k |⟨ψ|φ_k⟩|²`
    pub fn pure_target_fidelity(&self, target: &PureState) -> Result<f64> {
        self.components
            .iter()
            .map(|(w, phi)| Ok(w * target.inner(phi)?.norm_sqr()))
            .sum()
    }

    pub fn to_density(&self, cap: DenseCap) -> Result<Operator> {
        let mut acc: Option<Operator> = None;
        for (w, phi) in &self.components {
            let term = phi.to_dense(cap)?.projector().scale(*w);
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term)?,
            });
        }
        acc.ok_or_else(|| Error::InvalidConfig("empty mixture".into()))
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }
}

/// The post-selected (normalized) state after all participants read 0.
pub fn post_selected_state(config: &ProtocolConfig) -> Result<(PureState, f64)> {
    let assignment = config.assignment()?;
    let zeros = vec![0u8; assignment.q()];
    let (branch, p) = apply_filter_layer(&config.initial_state()?, &assignment, &zeros)?;
    let normalized = branch.normalize().ok_or(Error::ZeroProbability)?;
    Ok((normalized, p))
}

pub fn distilled_state(config: &ProtocolConfig) -> Result<Mixture> {
    let (filtered, p_u) = post_selected_state(config)?;
    let ps = overall_success(p_u, config.n_copies());
    Ok(Mixture {
        components: vec![(ps, filtered), (1.0 - ps, config.initial_state()?)],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillationReport {
    pub p_success_per_copy: f64,
    pub p_success_overall: f64,
    pub fidelity_closed_form: f64,
    pub fidelity_numeric: f64,
    pub distilled_state: Mixture,
}

pub fn run_ted(config: &ProtocolConfig) -> Result<DistillationReport> {
    let mixture = distilled_state(config)?;
    let (p_u, p_all) = {
        let (_, p_u) = post_selected_state(config)?;
        (p_u, overall_success(p_u, config.n_copies()))
    };
    let fidelity_numeric = mixture.pure_target_fidelity(&config.perfect_state()?)?;
    Ok(DistillationReport {
        p_success_per_copy: p_u,
        p_success_overall: p_all,
        fidelity_closed_form: closed_form_fidelity(config.spec(), config.n_copies()),
        fidelity_numeric,
        distilled_state: mixture,
    })
}

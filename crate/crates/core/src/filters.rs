//! Dichotomic local filters `{K₀, K₁}` for GHZ and W states.
//!
//! All filters here are diagonal in the computational basis with real
//! non-negative entries, so they are stored as diagonals.

use crate::error::{Error, Result};
use crate::states::{GhzSpec, WSpec};
use crate::tensor::Operator;

/// Slack allowed on a coefficient ratio that should be at most 1.
pub const PIVOT_TOL: f64 = 1e-12;
/// Completeness tolerance for `K₀†K₀ + K₁†K₁ = I`.
pub const COMPLETENESS_TOL: f64 = 1e-12;

/// A two-outcome filter on one party, `K₀†K₀ + K₁†K₁ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausPair {
    k0: Vec<f64>,
    k1: Vec<f64>,
}

impl KrausPair {
    /// Builds the pair from the diagonal of `K₀`, with `K₁ = √(I − K₀²)`.
    pub fn from_k0(k0: Vec<f64>) -> Result<Self> {
        if let Some(bad) = k0
            .iter()
            .find(|&&x| !x.is_finite() || !(0.0..=1.0 + PIVOT_TOL).contains(&x))
        {
            return Err(Error::InvalidConfig(format!(
                "filter entry {bad} outside [0, 1]"
            )));
        }
        let k0: Vec<f64> = k0.into_iter().map(|x| x.min(1.0)).collect();
        let k1 = k0.iter().map(|x| (1.0 - x * x).max(0.0).sqrt()).collect();
        Ok(KrausPair { k0, k1 })
    }

    /// Takes both diagonals as given, without enforcing completeness.
    pub fn from_raw(k0: Vec<f64>, k1: Vec<f64>) -> Result<Self> {
        if k0.len() != k1.len() {
            return Err(Error::DimensionMismatch {
                expected: k0.len(),
                found: k1.len(),
            });
        }
        Ok(KrausPair { k0, k1 })
    }

    pub fn identity(dim: usize) -> Self {
        KrausPair {
            k0: vec![1.0; dim],
            k1: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.k0.len()
    }

    pub fn k0(&self) -> &[f64] {
        &self.k0
    }

    pub fn k1(&self) -> &[f64] {
        &self.k1
    }

    /// Diagonal of `K_outcome`.
    pub fn kraus(&self, outcome: u8) -> &[f64] {
        match outcome {
            0 => &self.k0,
            _ => &self.k1,
        }
    }

    pub fn k0_operator(&self) -> Operator {
        Operator::from_diagonal(&self.k0)
    }

    pub fn k1_operator(&self) -> Operator {
        Operator::from_diagonal(&self.k1)
    }

    pub fn is_identity(&self) -> bool {
        self.k0.iter().all(|&x| x == 1.0)
    }
}

/// Outcome of [`validate_povm`].
#[derive(Debug, Clone, PartialEq)]
pub struct PovmReport {
    /// `max_i |K₀ᵢ² + K₁ᵢ² − 1|`
    pub max_deviation: f64,
    pub entries_in_range: bool,
}

impl PovmReport {
    pub fn is_ok(&self) -> bool {
        self.entries_in_range && self.max_deviation <= COMPLETENESS_TOL
    }
}

pub fn validate_povm(pair: &KrausPair) -> PovmReport {
    let max_deviation = pair
        .k0
        .iter()
        .zip(&pair.k1)
        .map(|(a, b)| (a * a + b * b - 1.0).abs())
        .fold(0.0, f64::max);
    let entries_in_range = pair
        .k0
        .iter()
        .chain(&pair.k1)
        .all(|&x| (0.0..=1.0 + COMPLETENESS_TOL).contains(&x));
    PovmReport {
        max_deviation,
        entries_in_range,
    }
}

/// Disjoint blocks covering `{1, …, d−1}`, one per participating party.
/// Blocks may be empty; a party with an empty block filters with `K₀ = I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    d: usize,
    blocks: Vec<Vec<usize>>,
}

impl IndexPartition {
    pub fn new(d: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::BadPartition("at least one block is required".into()));
        }
        let mut seen = vec![false; d];
        for &i in blocks.iter().flatten() {
            if i == 0 || i >= d {
                return Err(Error::BadPartition(format!(
                    "index {i} outside 1..{}",
                    d - 1
                )));
            }
            if seen[i] {
                return Err(Error::BadPartition(format!("index {i} appears twice")));
            }
            seen[i] = true;
        }
        if let Some(missing) = (1..d).find(|&i| !seen[i]) {
            return Err(Error::BadPartition(format!("index {missing} not covered")));
        }
        Ok(IndexPartition { d, blocks })
    }

    /// One block holding every index.
    pub fn single(d: usize) -> Self {
        IndexPartition {
            d,
            blocks: vec![(1..d).collect()],
        }
    }

    /// `q` contiguous blocks of near-equal size, larger blocks first.
    pub fn contiguous(d: usize, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::BadPartition("at least one block is required".into()));
        }
        let n = d - 1;
        let mut blocks = Vec::with_capacity(q);
        let mut next = 1;
        for b in 0..q {
            let len = n / q + usize::from(b < n % q);
            blocks.push((next..next + len).collect());
            next += len;
        }
        Self::new(d, blocks)
    }

    /// Two blocks split at `⌊(d−1)/2⌋`: `{1..=⌊(d−1)/2⌋}` and the rest.
    pub fn half_split(d: usize) -> Self {
        let mid = (d - 1) / 2;
        IndexPartition {
            d,
            blocks: vec![(1..=mid).collect(), (mid + 1..d).collect()],
        }
    }

    /// Every assignment of `{1..d−1}` to `q` labelled blocks (`q^(d−1)` of them).
    pub fn enumerate(d: usize, q: usize) -> Vec<IndexPartition> {
        let n = d - 1;
        let total = q.pow(n as u32);
        (0..total)
            .map(|mut code| {
                let mut blocks = vec![Vec::new(); q];
                for i in 1..d {
                    blocks[code % q].push(i);
                    code /= q;
                }
                IndexPartition { d, blocks }
            })
            .collect()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Per-party filters; `None` marks a non-participating party.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterAssignment {
    d: usize,
    pairs: Vec<Option<KrausPair>>,
}

impl FilterAssignment {
    pub fn new(d: usize, pairs: Vec<Option<KrausPair>>) -> Result<Self> {
        for pair in pairs.iter().flatten() {
            if pair.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: pair.dim(),
                });
            }
        }
        Ok(FilterAssignment { d, pairs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair(&self, party: usize) -> Option<&KrausPair> {
        self.pairs.get(party).and_then(Option::as_ref)
    }

    pub fn pairs(&self) -> &[Option<KrausPair>] {
        &self.pairs
    }

    /// Participating parties, ascending. Outcome strings are indexed in this order.
    pub fn participants(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.pairs[j].is_some()).collect()
    }

    pub fn q(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_some()).count()
    }

    /// `1 ≤ Q ≤ P − 1`
    pub fn is_threshold(&self) -> bool {
        (1..self.p()).contains(&self.q())
    }

    /// Local diagonal, per party, for one outcome string over the participants.
    /// Non-participants contribute `None` (identity).
    pub fn local_diagonals(&self, outcomes: &[u8]) -> Result<Vec<Option<&[f64]>>> {
        let q = self.q();
        if outcomes.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: outcomes.len(),
            });
        }
        let mut it = outcomes.iter();
        Ok(self
            .pairs
            .iter()
            .map(|pair| {
                pair.as_ref()
                    .map(|k| k.kraus(*it.next().expect("length checked")))
            })
            .collect())
    }
}

fn ghz_ratios(spec: &GhzSpec) -> Result<Vec<f64>> {
    let a0 = spec.alphas()[0];
    let ratios: Vec<f64> = spec.alphas().iter().map(|a| a0 / a).collect();
    if let Some(&worst) = ratios.iter().find(|&&r| r > 1.0 + PIVOT_TOL) {
        return Err(Error::PivotNotMinimal {
            pivot: a0,
            ratio: worst,
        });
    }
    Ok(ratios.into_iter().map(|r| r.min(1.0)).collect())
}

/// `K₀ = Σ_i (α₀/α_i)|i⟩⟨i|` on a single party.
pub fn ghz_single_party_pair(spec: &GhzSpec) -> Result<KrausPair> {
    KrausPair::from_k0(ghz_ratios(spec)?)
}

/// Default participants for `q` parties: participation starts at the last party.
pub fn default_participants(p: usize, q: usize) -> Vec<usize> {
    (p.saturating_sub(q)..p).rev().collect()
}

/// Splits the GHZ filter across the parties in `parties`; `parties[k]` owns
/// `partition.blocks()[k]` and carries `α₀/α_i` on its block, 1 elsewhere.
pub fn ghz_partition_assignment(
    spec: &GhzSpec,
    partition: &IndexPartition,
    parties: &[usize],
) -> Result<FilterAssignment> {
    let (d, p) = (spec.d(), spec.p());
    if partition.d() != d {
        return Err(Error::BadPartition(format!(
            "partition built for d = {}, state has d = {d}",
            partition.d()
        )));
    }
    if partition.len() != parties.len() {
        return Err(Error::BadPartition(format!(
            "{} blocks for {} participating parties",
            partition.len(),
            parties.len()
        )));
    }
    if parties.is_empty() || parties.len() > p - 1 {
        return Err(Error::InvalidConfig(format!(
            "GHZ needs 1 ≤ Q ≤ P − 1 participants, got {}",
            parties.len()
        )));
    }
    let ratios = ghz_ratios(spec)?;
    let mut pairs: Vec<Option<KrausPair>> = vec![None; p];
    for (block, &party) in partition.blocks().iter().zip(parties) {
        if party >= p {
            return Err(Error::PartyOutOfRange {
                index: party,
                parties: p,
            });
        }
        if pairs[party].is_some() {
            return Err(Error::BadPartition(format!("party {party} listed twice")));
        }
        let mut k0 = vec![1.0; d];
        for &i in block {
            k0[i] = ratios[i];
        }
        pairs[party] = Some(KrausPair::from_k0(k0)?);
    }
    FilterAssignment::new(d, pairs)
}

/// Parties `1..P−1` filter; party `j` carries `β_{P−1−j}/β_{P−1}` on `|0⟩`.
pub fn w_assignment(spec: &WSpec) -> Result<FilterAssignment> {
    let p = spec.p();
    let pivot = spec.betas()[p - 1];
    let mut pairs = vec![None; p];
    for (j, slot) in pairs.iter_mut().enumerate().skip(1) {
        let ratio = spec.betas()[p - 1 - j] / pivot;
        if ratio > 1.0 + PIVOT_TOL {
            return Err(Error::PivotNotMaximal { pivot, ratio });
        }
        *slot = Some(KrausPair::from_k0(vec![ratio.min(1.0), 1.0])?);
    }
    FilterAssignment::new(2, pairs)
}

/// Swaps the smallest coefficient into slot 0. `perm[new] = old`.
pub fn canonicalize_ghz(spec: &GhzSpec) -> (GhzSpec, Vec<usize>) {
    let a = spec.alphas();
    let pos = (0..a.len())
        .min_by(|&i, &j| a[i].total_cmp(&a[j]))
        .expect("d ≥ 2");
    let mut perm: Vec<usize> = (0..a.len()).collect();
    perm.swap(0, pos);
    let alphas = perm.iter().map(|&i| a[i]).collect();
    let out = GhzSpec::new(alphas, spec.p()).expect("permutation keeps validity");
    (out, perm)
}

/// Swaps the largest coefficient into slot `P−1`. `perm[new] = old`.
pub fn canonicalize_w(spec: &WSpec) -> (WSpec, Vec<usize>) {
    let b = spec.betas();
    let last = b.len() - 1;
    let pos = (0..b.len())
        .max_by(|&i, &j| b[i].total_cmp(&b[j]))
        .expect("p ≥ 2");
    let mut perm: Vec<usize> = (0..b.len()).collect();
    perm.swap(last, pos);
    let betas = perm.iter().map(|&i| b[i]).collect();
    (WSpec::new(betas).expect("permutation keeps validity"), perm)
}

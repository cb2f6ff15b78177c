//! Asymptotic invariance diagnostics and the convex-combination construction.
//!
//! Given a sequence `P_n` whose mean discrepancy `Δ(m̂, P_n)` tends to zero,
//! [`construct_liouville`] picks indices `n_1 < n_2 < ⋯` and returns
//! `P = Σ t_i P_{n_i}` (a finite, renormalized prefix) such that
//! `Δ(m̂, P^k) ≤ 3ε_i` for `k ≥ k_i`, together with a certificate that
//! [`verify_certificate`] re-checks from scratch.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groupoid::FiniteGroupoid;
use crate::measure::Measure;
use crate::operator::{same_groupoid, target_pushforward, EquivariantOperator};
use crate::scalar::{self, Rational, Scalar, Tolerance};

/// A lazily evaluated sequence `n ↦ P_n`, `1 ≤ n ≤ horizon`.
pub trait OperatorProvider<S: Scalar>: Sync {
    fn groupoid(&self) -> &Arc<FiniteGroupoid>;

    fn horizon(&self) -> usize;

    /// `P_n`. Deterministic per `n`; fails outside `1..=horizon`.
    fn at(&self, n: usize) -> Result<Arc<EquivariantOperator<S>>>;
}

type Generator<S> = Box<dyn Fn(usize) -> EquivariantOperator<S> + Send + Sync>;

/// Provider backed by a generator closure, with a memo cache.
pub struct SequenceProvider<S> {
    groupoid: Arc<FiniteGroupoid>,
    horizon: usize,
    generator: Generator<S>,
    cache: Mutex<HashMap<usize, Arc<EquivariantOperator<S>>>>,
}

impl<S: Scalar> fmt::Debug for SequenceProvider<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SequenceProvider").field("horizon", &self.horizon).finish_non_exhaustive()
    }
}

impl<S: Scalar> SequenceProvider<S> {
    /// The generator must return operators on `groupoid`.
    pub fn from_fn<F>(groupoid: Arc<FiniteGroupoid>, horizon: usize, generator: F) -> Self
    where
        F: Fn(usize) -> EquivariantOperator<S> + Send + Sync + 'static,
    {
        SequenceProvider { groupoid, horizon, generator: Box::new(generator), cache: Mutex::new(HashMap::new()) }
    }

    pub fn constant(op: EquivariantOperator<S>, horizon: usize) -> Self {
        let groupoid = op.groupoid().clone();
        Self::from_fn(groupoid, horizon, move |_| op.clone())
    }

    /// `P_n = Pⁿ`.
    pub fn powers(op: EquivariantOperator<S>, horizon: usize) -> Self {
        let groupoid = op.groupoid().clone();
        Self::from_fn(groupoid, horizon, move |n| op.power(n))
    }

    /// `P_n = (P + ⋯ + Pⁿ)/n`.
    pub fn cesaro(op: EquivariantOperator<S>, horizon: usize) -> Self {
        let groupoid = op.groupoid().clone();
        Self::from_fn(groupoid, horizon, move |n| op.cesaro(n).expect("n >= 1"))
    }

    /// `θ_n^x` uniform on the first `min(n + 1, |Γ^x|)` morphisms of each
    /// fibre (unit first). On the group groupoid of `Z_m` this is uniform on
    /// `{0, …, min(n, m − 1)}`.
    pub fn fibre_prefix(groupoid: Arc<FiniteGroupoid>, horizon: usize) -> Self {
        let g = groupoid.clone();
        Self::from_fn(groupoid, horizon, move |n| {
            let fibres = g
                .objects()
                .map(|x| {
                    let fibre = g.fibre(x);
                    Measure::uniform(fibre[..fibre.len().min(n + 1)].iter().copied())
                })
                .collect();
            let system = crate::measure::FibredSystem::new(&g, fibres).expect("prefix of a fibre");
            EquivariantOperator::from_parts(g.clone(), system)
        })
    }
}

impl<S: Scalar> OperatorProvider<S> for SequenceProvider<S> {
    fn groupoid(&self) -> &Arc<FiniteGroupoid> {
        &self.groupoid
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn at(&self, n: usize) -> Result<Arc<EquivariantOperator<S>>> {
        if n == 0 || n > self.horizon {
            return Err(Error::HorizonExceeded { requested: n, horizon: self.horizon });
        }
        if let Some(op) = self.cache.lock().unwrap().get(&n) {
            return Ok(op.clone());
        }
        let op = Arc::new((self.generator)(n));
        if !same_groupoid(op.groupoid(), &self.groupoid) {
            return Err(Error::GroupoidMismatch);
        }
        self.cache.lock().unwrap().insert(n, op.clone());
        Ok(op)
    }
}

/// `Δ(m̂, P_n)` for `n = 1..=N`.
pub fn isai_trajectory<S: Scalar, P: OperatorProvider<S> + ?Sized>(
    provider: &P,
    m_hat: &Measure<S>,
    n: usize,
    tol: Tolerance,
) -> Result<Vec<S>> {
    if n > provider.horizon() {
        return Err(Error::HorizonExceeded { requested: n, horizon: provider.horizon() });
    }
    (1..=n).map(|i| provider.at(i)?.mean_discrepancy(m_hat, tol)).collect()
}

/// Parameters of the coefficient schedule: `t_i = (1 − r)·r^{i−1}`, `ε_i = e^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub stages: usize,
    /// `e` in `ε_i = e^i`.
    pub epsilon_base: Rational,
    /// `r` in `t_i = (1 − r)·r^{i−1}`.
    pub t_base: Rational,
}

impl ScheduleParams {
    pub fn new(stages: usize) -> Self {
        ScheduleParams { stages, epsilon_base: Rational::ratio(1, 2), t_base: Rational::ratio(1, 2) }
    }
}

/// Materialized `(t_i, ε_i, k_i)` for stages `1..=stages` (stored 0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub params: ScheduleParams,
    pub t: Vec<Rational>,
    pub epsilon: Vec<Rational>,
    pub k: Vec<usize>,
}

// Guards against parameter choices that need astronomically long products.
const MAX_K: usize = 1 << 24;

pub fn build_schedule(params: &ScheduleParams) -> Result<Schedule> {
    let zero = Rational::zero();
    let one = Rational::one();
    if params.stages == 0 {
        return Err(Error::InvalidSchedule("at least one stage is required".into()));
    }
    for (name, v) in [("epsilon base", &params.epsilon_base), ("t base", &params.t_base)] {
        if *v <= zero || *v >= one {
            return Err(Error::InvalidSchedule(format!("{name} {v} must lie strictly between 0 and 1")));
        }
    }
    let r = &params.t_base;
    let mut t = Vec::with_capacity(params.stages);
    let mut epsilon = Vec::with_capacity(params.stages);
    let mut k = Vec::with_capacity(params.stages);
    for i in 1..=params.stages {
        t.push((&one - r) * scalar::pow(r, i - 1));
        let eps = scalar::pow(&params.epsilon_base, i);
        let ki = if i == 1 {
            1
        } else {
            let head = &one - scalar::pow(r, i - 1);
            let mut ki = 1;
            let mut p = head.clone();
            while p > eps {
                ki += 1;
                if ki > MAX_K {
                    return Err(Error::InvalidSchedule(format!("stage {i} needs more than {MAX_K} factors")));
                }
                p *= &head;
            }
            ki.max(k.last().copied().unwrap_or(0) + 1)
        };
        epsilon.push(eps);
        k.push(ki);
    }
    Ok(Schedule { params: params.clone(), t, epsilon, k })
}

impl Schedule {
    pub fn stages(&self) -> usize {
        self.t.len()
    }

    /// Weight not materialized: `Σ_{i > stages} t_i = r^stages`.
    pub fn truncation_residual(&self) -> Rational {
        scalar::pow(&self.params.t_base, self.stages())
    }

    /// `t_i / Σ_{j ≤ stages} t_j`.
    pub fn renormalized_weights(&self) -> Vec<Rational> {
        let total: Rational = self.t.iter().sum();
        self.t.iter().map(|t| t / &total).collect()
    }

    /// `(t_1 + ⋯ + t_{i−1})^{k_i}` for the 1-based stage `i`.
    pub fn splitting_mass(&self, stage: usize) -> Rational {
        let head: Rational = self.t[..stage - 1].iter().sum();
        scalar::pow(&head, self.k[stage - 1])
    }

    /// `3ε_i + 2·residual` for the 1-based stage `i`.
    pub fn stage_bound(&self, stage: usize) -> Rational {
        Rational::ratio(3, 1) * &self.epsilon[stage - 1] + Rational::ratio(2, 1) * self.truncation_residual()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstructionCaps {
    /// Maximum number of products `Q` enumerated at one stage.
    pub product_cap: usize,
}

impl Default for ConstructionCaps {
    fn default() -> Self {
        ConstructionCaps { product_cap: 100_000 }
    }
}

/// One checked product at the selected index of a stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCheck<S> {
    pub stage: usize,
    pub n: usize,
    /// 1-based factor labels: `[2, 1]` is `R_2 R_1`; empty is the identity.
    pub product: Vec<usize>,
    /// Either the two-term upper bound or the exact `Δ(m̂, Q P_n)`.
    pub value: S,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageBound<S> {
    pub stage: usize,
    pub n: usize,
    pub k: usize,
    pub epsilon: S,
    /// `Δ(m̂, P^{k_i})`.
    pub measured: S,
    /// `3ε_i + 2·residual`.
    pub bound: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleCertificate<S> {
    pub indices: Vec<usize>,
    pub weights: Vec<S>,
    pub renormalized_weights: Vec<S>,
    pub checked_bounds: Vec<StageBound<S>>,
    pub truncation_residual: S,
    pub selection: Vec<ProductCheck<S>>,
    /// Candidates rejected before each selected index.
    pub rejected_candidates: Vec<usize>,
}

impl<S: Scalar> LiouvilleCertificate<S> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,n_i,k_i,epsilon_i,measured,bound\n");
        for b in &self.checked_bounds {
            out.push_str(&format!("{},{},{},{},{},{}\n", b.stage, b.n, b.k, b.epsilon, b.measured, b.bound));
        }
        out
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("stages: {}\n", self.indices.len()));
        out.push_str(&format!("truncation residual: {}\n", self.truncation_residual));
        for (i, b) in self.checked_bounds.iter().enumerate() {
            out.push_str(&format!(
                "stage {}: n_i = {}, t_i = {}, k_i = {}, epsilon_i = {}, Delta(m, P^k_i) = {} <= {} [{}], rejected {} candidates, {} products checked\n",
                b.stage,
                b.n,
                self.weights[i],
                b.k,
                b.epsilon,
                b.measured,
                b.bound,
                if b.measured <= b.bound { "ok" } else { "VIOLATED" },
                self.rejected_candidates[i],
                self.selection.iter().filter(|c| c.stage == b.stage).count()
            ));
        }
        out
    }
}

fn product_count(factors: usize, max_len: usize, cap: usize) -> Option<u128> {
    let mut total: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..=max_len {
        total = total.checked_add(layer)?;
        if total > cap as u128 {
            return Some(total);
        }
        if factors == 0 {
            break;
        }
        layer = layer.checked_mul(factors as u128)?;
    }
    Some(total)
}

/// All words of length `≤ max_len` over `factors` letters (1-based), in
/// length-then-lexicographic order, with `m Q` and `m̄ Q` for each word.
struct ProductTable<S> {
    words: Vec<Vec<usize>>,
    m_q: Vec<Measure<S>>,
    m_bar_q: Vec<Measure<S>>,
}

fn enumerate_products<S: Scalar>(
    groupoid: &FiniteGroupoid,
    m_hat: &Measure<S>,
    factors: &[Arc<EquivariantOperator<S>>],
    max_len: usize,
) -> ProductTable<S> {
    let mut words = vec![Vec::new()];
    let mut m_q = vec![m_hat.clone()];
    let mut m_bar_q = vec![target_pushforward(groupoid, m_hat)];
    let mut layer_start = 0;
    for _ in 0..max_len {
        if factors.is_empty() {
            break;
        }
        let layer_end = words.len();
        let mut next: Vec<(Vec<usize>, Measure<S>, Measure<S>)> = (layer_start..layer_end)
            .into_par_iter()
            .flat_map_iter(|w| {
                let (words, m_q, m_bar_q) = (&words, &m_q, &m_bar_q);
                factors.iter().enumerate().map(move |(j, r)| {
                    let mut word = words[w].clone();
                    word.push(j + 1);
                    (word, r.apply_measure(&m_q[w]), r.apply_measure(&m_bar_q[w]))
                })
            })
            .collect();
        layer_start = layer_end;
        for (w, a, b) in next.drain(..) {
            words.push(w);
            m_q.push(a);
            m_bar_q.push(b);
        }
    }
    ProductTable { words, m_q, m_bar_q }
}

fn product_operator<S: Scalar>(
    groupoid: &Arc<FiniteGroupoid>,
    factors: &[Arc<EquivariantOperator<S>>],
    word: &[usize],
) -> EquivariantOperator<S> {
    word.iter().fold(EquivariantOperator::identity(groupoid.clone()), |acc, &j| {
        acc.compose(&factors[j - 1]).expect("same groupoid")
    })
}

/// Selects `n_1 < ⋯ < n_L` by the minimal-index rule and returns the
/// renormalized combination `Σ t̃_i P_{n_i}` with its certificate.
///
/// `n_1 = 1` unconditionally (its empty-product value is still recorded).
/// A candidate `n` is admissible at stage `i` when `Δ(m̂, Q P_n) ≤ ε_i` for
/// every product `Q` of at most `k_i` of the already selected operators
/// (including the empty product). Each product is first screened with the
/// bound `Δ(m̂Q, P_n) + Δ(m̄̂Q, P_n)`; only products failing the screen are
/// evaluated exactly, so the admissibility test is exact.
pub fn construct_liouville<S: Scalar, P: OperatorProvider<S> + ?Sized>(
    provider: &P,
    m_hat: &Measure<S>,
    schedule: &Schedule,
    caps: ConstructionCaps,
    tol: Tolerance,
) -> Result<(EquivariantOperator<S>, LiouvilleCertificate<S>)> {
    m_hat.check_probability(tol)?;
    let groupoid = provider.groupoid().clone();
    let mut selected: Vec<Arc<EquivariantOperator<S>>> = Vec::new();
    let mut indices = Vec::new();
    let mut selection = Vec::new();
    let mut rejected_candidates = Vec::new();

    for stage in 1..=schedule.stages() {
        let k = schedule.k[stage - 1];
        let eps = S::from_rational(&schedule.epsilon[stage - 1]);
        let products = match product_count(selected.len(), k, caps.product_cap) {
            Some(c) if c <= caps.product_cap as u128 => c,
            other => {
                return Err(Error::ProductCapExceeded {
                    stage,
                    products: other.unwrap_or(u128::MAX),
                    max_factors: k,
                    cap: caps.product_cap,
                })
            }
        };
        debug_assert!(products >= 1);
        let table = enumerate_products(&groupoid, m_hat, &selected, k);

        let start = indices.last().map_or(1, |n| n + 1);
        let mut worst: Option<(Vec<usize>, S)> = None;
        let mut accepted = None;
        for n in start..=provider.horizon() {
            let p_n = provider.at(n)?;
            let profile = p_n.discrepancy_profile();
            let weighted = |m: &Measure<S>| scalar::sum(m.iter().map(|(g, w)| w.clone() * profile[g.0].clone()));
            let checks: Vec<(usize, S, bool)> = (0..table.words.len())
                .into_par_iter()
                .map(|w| {
                    let bound = weighted(&table.m_q[w]) + weighted(&table.m_bar_q[w]);
                    if bound.approx_le(&eps, tol) {
                        (w, bound, false)
                    } else {
                        let q = product_operator(&groupoid, &selected, &table.words[w]);
                        let qp = q.compose(&p_n).expect("same groupoid");
                        (w, qp.weighted_discrepancy(m_hat), true)
                    }
                })
                .collect();
            let failing = checks
                .iter()
                .filter(|(_, v, _)| !v.approx_le(&eps, tol))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            match failing {
                Some((w, v, _)) if stage > 1 => worst = Some((table.words[*w].clone(), v.clone())),
                _ => {
                    accepted = Some((n, checks));
                    break;
                }
            }
        }
        let Some((n, checks)) = accepted else {
            let (worst_product, worst_value) = worst.unwrap_or((Vec::new(), S::zero()));
            return Err(Error::SelectionFailed {
                stage,
                horizon: provider.horizon(),
                worst_product,
                worst_value: worst_value.to_string(),
                epsilon: eps.to_string(),
            });
        };
        rejected_candidates.push(n - start);
        selection.extend(checks.into_iter().map(|(w, value, exact)| ProductCheck {
            stage,
            n,
            product: table.words[w].clone(),
            value,
            exact,
        }));
        indices.push(n);
        selected.push(provider.at(n)?);
    }

    let renormalized: Vec<S> = schedule.renormalized_weights().iter().map(S::from_rational).collect();
    let parts: Vec<(S, &EquivariantOperator<S>)> =
        renormalized.iter().cloned().zip(selected.iter().map(|p| p.as_ref())).collect();
    let p = EquivariantOperator::convex_combination(&parts, tol)?;

    let residual = S::from_rational(&schedule.truncation_residual());
    let powers = discrepancy_of_powers(&p, m_hat, *schedule.k.iter().max().unwrap());
    let checked_bounds = (1..=schedule.stages())
        .map(|stage| StageBound {
            stage,
            n: indices[stage - 1],
            k: schedule.k[stage - 1],
            epsilon: S::from_rational(&schedule.epsilon[stage - 1]),
            measured: powers[schedule.k[stage - 1] - 1].clone(),
            bound: S::from_rational(&schedule.stage_bound(stage)),
        })
        .collect();
    let certificate = LiouvilleCertificate {
        indices,
        weights: schedule.t.iter().map(S::from_rational).collect(),
        renormalized_weights: renormalized,
        checked_bounds,
        truncation_residual: residual,
        selection,
        rejected_candidates,
    };
    Ok((p, certificate))
}

/// `Δ(m̂, P^k)` for `k = 1..=max_k`.
pub fn discrepancy_of_powers<S: Scalar>(p: &EquivariantOperator<S>, m_hat: &Measure<S>, max_k: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(max_k);
    let mut acc = p.clone();
    for k in 1..=max_k {
        if k > 1 {
            acc = acc.compose(p).expect("same groupoid");
        }
        out.push(acc.weighted_discrepancy(m_hat));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateCheck {
    pub ok: bool,
    pub diffs: Vec<String>,
}

/// Recomputes every stage bound from `P` and the schedule alone.
pub fn verify_certificate<S: Scalar>(
    p: &EquivariantOperator<S>,
    m_hat: &Measure<S>,
    schedule: &Schedule,
    certificate: &LiouvilleCertificate<S>,
    tol: Tolerance,
) -> CertificateCheck {
    let mut diffs = Vec::new();
    if certificate.checked_bounds.len() != schedule.stages() || certificate.indices.len() != schedule.stages() {
        diffs.push(format!(
            "certificate has {} stages, schedule has {}",
            certificate.checked_bounds.len(),
            schedule.stages()
        ));
        return CertificateCheck { ok: false, diffs };
    }
    if let Some(w) = certificate.indices.windows(2).find(|w| w[0] >= w[1]) {
        diffs.push(format!("indices not strictly increasing: {} then {}", w[0], w[1]));
    }
    let total = scalar::sum(certificate.renormalized_weights.iter().cloned());
    if !total.approx_eq(&S::one(), tol) {
        diffs.push(format!("renormalized weights sum to {total}"));
    }
    let residual = S::from_rational(&schedule.truncation_residual());
    if !certificate.truncation_residual.approx_eq(&residual, tol) {
        diffs.push(format!("truncation residual {} != {}", certificate.truncation_residual, residual));
    }

    let max_k = *schedule.k.iter().max().unwrap();
    let powers = discrepancy_of_powers(p, m_hat, max_k);
    if let Some(k) = (1..powers.len()).find(|&k| !powers[k].approx_le(&powers[k - 1], tol)) {
        diffs.push(format!("Delta(m, P^k) increases at k = {}: {} > {}", k + 1, powers[k], powers[k - 1]));
    }
    for (i, recorded) in certificate.checked_bounds.iter().enumerate() {
        let stage = i + 1;
        let k = schedule.k[i];
        let measured = &powers[k - 1];
        let bound = S::from_rational(&schedule.stage_bound(stage));
        if recorded.stage != stage || recorded.k != k || recorded.n != certificate.indices[i] {
            diffs.push(format!("stage {stage}: recorded labels do not match the schedule"));
        }
        if !recorded.measured.approx_eq(measured, tol) {
            diffs.push(format!("stage {stage}: recorded Delta {} != recomputed {}", recorded.measured, measured));
        }
        if !recorded.bound.approx_eq(&bound, tol) {
            diffs.push(format!("stage {stage}: recorded bound {} != 3*epsilon_i + 2*residual = {}", recorded.bound, bound));
        }
        if !measured.approx_le(&bound, tol) {
            diffs.push(format!("stage {stage}: Delta(m, P^{k}) = {measured} exceeds {bound}"));
        }
    }
    CertificateCheck { ok: diffs.is_empty(), diffs }
}

/// Re-evaluates `Δ(m̂, Q R_i)` exactly for every product recorded at stages
/// `i ≥ 2` and returns those above `ε_i`.
pub fn recheck_selection<S: Scalar, P: OperatorProvider<S> + ?Sized>(
    provider: &P,
    m_hat: &Measure<S>,
    schedule: &Schedule,
    certificate: &LiouvilleCertificate<S>,
    tol: Tolerance,
) -> Result<Vec<(usize, Vec<usize>, S)>> {
    let groupoid = provider.groupoid().clone();
    let selected: Vec<_> = certificate.indices.iter().map(|&n| provider.at(n)).collect::<Result<_>>()?;
    Ok(certificate
        .selection
        .par_iter()
        .filter(|c| c.stage > 1)
        .filter_map(|c| {
            let eps = S::from_rational(&schedule.epsilon[c.stage - 1]);
            let qp = product_operator(&groupoid, &selected, &c.product)
                .compose(&selected[c.stage - 1])
                .expect("same groupoid");
            let v = qp.weighted_discrepancy(m_hat);
            (!v.approx_le(&eps, tol)).then(|| (c.stage, c.product.clone(), v))
        })
        .collect())
}

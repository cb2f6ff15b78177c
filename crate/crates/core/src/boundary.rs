//! 0-2 law diagnostics for the fibrewise chains.
//!
//! For a chain on a fibre `Γ^x` the tail σ-algebra is trivial iff
//! `‖(α − β)Pⁿ‖ → 0` for all initial distributions, and the exit σ-algebra
//! is trivial iff the same holds for Cesàro averages (or for powers of
//! `R = (P + P²)/2`). By convexity the supremum over `α, β` is attained at
//! point masses, so each statistic is a maximum over pairs of rows.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groupoid::ObjectId;
use crate::measure::{reference_measure, Measure, ObjectMeasure};
use crate::operator::{EquivariantOperator, FibreMatrix};
use crate::scalar::{self, Scalar};

pub const DEFAULT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileMode {
    /// `d_n` from `Pⁿ`.
    Tail,
    /// `d_n` from `Q_n = (P + ⋯ + Pⁿ)/n`.
    Cesaro,
    /// `d_n` from `Rⁿ`, `R = (P + P²)/2`.
    Lazy,
}

impl fmt::Display for ProfileMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileMode::Tail => "tail",
            ProfileMode::Cesaro => "cesaro",
            ProfileMode::Lazy => "lazy",
        })
    }
}

impl FromStr for ProfileMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tail" => Ok(ProfileMode::Tail),
            "cesaro" => Ok(ProfileMode::Cesaro),
            "lazy" => Ok(ProfileMode::Lazy),
            other => Err(Error::InvalidInput(format!("unknown profile mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Trivial,
    NonTrivial,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Trivial => "trivial",
            Verdict::NonTrivial => "non-trivial",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile<S> {
    pub object: ObjectId,
    pub mode: ProfileMode,
    /// `values[n - 1] = d_n`.
    pub values: Vec<S>,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl<S: Scalar> DecayProfile<S> {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// `d_n`, 1-based.
    pub fn at(&self, n: usize) -> &S {
        &self.values[n - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,d_n\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }
}

/// Trivial if `d_N ≤ threshold`; non-trivial if every value in the last
/// quarter of the horizon is `≥ 2 − threshold`; inconclusive otherwise.
pub fn classify<S: Scalar>(values: &[S], threshold: f64) -> Verdict {
    let Some(last) = values.last() else {
        return Verdict::Inconclusive;
    };
    if last.as_f64() <= threshold {
        return Verdict::Trivial;
    }
    let window = (values.len() / 4).max(1);
    if values[values.len() - window..].iter().all(|v| v.as_f64() >= 2.0 - threshold) {
        Verdict::NonTrivial
    } else {
        Verdict::Inconclusive
    }
}

/// `d_n` for `n = 1..=horizon` on one fibre matrix.
pub fn matrix_profile<S: Scalar>(m: &FibreMatrix<S>, horizon: usize, mode: ProfileMode) -> Vec<S> {
    let mut values = Vec::with_capacity(horizon);
    match mode {
        ProfileMode::Tail | ProfileMode::Lazy => {
            let step = if mode == ProfileMode::Tail {
                m.clone()
            } else {
                let half = S::ratio(1, 2);
                FibreMatrix::combine(&[(half.clone(), m), (half, &m.mul(m))])
            };
            let mut acc = step.clone();
            for n in 1..=horizon {
                if n > 1 {
                    acc = acc.mul(&step);
                }
                values.push(acc.max_pairwise_distance());
            }
        }
        ProfileMode::Cesaro => {
            let mut power = m.clone();
            let mut sum = m.clone();
            for n in 1..=horizon {
                if n > 1 {
                    power = power.mul(m);
                    sum = FibreMatrix::combine(&[(S::one(), &sum), (S::one(), &power)]);
                }
                values.push(sum.max_pairwise_distance() / S::from_count(n));
            }
        }
    }
    values
}

pub fn decay_profile<S: Scalar>(
    p: &EquivariantOperator<S>,
    x: ObjectId,
    horizon: usize,
    mode: ProfileMode,
    threshold: f64,
) -> DecayProfile<S> {
    let values = matrix_profile(&p.fibre_matrix(x), horizon, mode);
    let verdict = classify(&values, threshold);
    DecayProfile { object: x, mode, values, threshold, verdict }
}

pub fn tail_triviality_profile<S: Scalar>(
    p: &EquivariantOperator<S>,
    x: ObjectId,
    horizon: usize,
    threshold: f64,
) -> DecayProfile<S> {
    decay_profile(p, x, horizon, ProfileMode::Tail, threshold)
}

/// `mode` must be [`ProfileMode::Cesaro`] or [`ProfileMode::Lazy`].
pub fn exit_triviality_profile<S: Scalar>(
    p: &EquivariantOperator<S>,
    x: ObjectId,
    horizon: usize,
    mode: ProfileMode,
    threshold: f64,
) -> Result<DecayProfile<S>> {
    if mode == ProfileMode::Tail {
        return Err(Error::InvalidInput("exit profiles use cesaro or lazy mode".into()));
    }
    Ok(decay_profile(p, x, horizon, mode, threshold))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FibrewiseReport<S> {
    pub mode: ProfileMode,
    pub per_object: Vec<DecayProfile<S>>,
    /// κ-mass fraction of objects with a trivial verdict.
    pub aggregate: S,
    /// `mP ≺ m` for the reference `m = λ⋆κ`, restricted to the fibres κ charges.
    pub quasi_substationary: bool,
}

impl<S: Scalar> FibrewiseReport<S> {
    pub fn report(&self) -> String {
        let mut out = format!(
            "mode: {}\naggregate (kappa-mass with trivial verdict): {}\nquasi-substationary reference: {}\n",
            self.mode, self.aggregate, self.quasi_substationary
        );
        for p in &self.per_object {
            out.push_str(&format!(
                "object {}: d_1 = {}, d_N = {} (N = {}), verdict {}\n",
                p.object.0,
                p.values.first().map(|v| v.to_string()).unwrap_or_default(),
                p.values.last().map(|v| v.to_string()).unwrap_or_default(),
                p.horizon(),
                p.verdict
            ));
        }
        out
    }
}

pub fn fibrewise_report<S: Scalar>(
    p: &EquivariantOperator<S>,
    kappa: &ObjectMeasure<S>,
    horizon: usize,
    mode: ProfileMode,
    threshold: f64,
) -> Result<FibrewiseReport<S>> {
    let g = p.groupoid();
    if kappa.len() != g.num_objects() {
        return Err(Error::Mismatch(format!("kappa has {} weights for {} objects", kappa.len(), g.num_objects())));
    }
    let total = kappa.total();
    if total.is_zero() {
        return Err(Error::InvalidInput("kappa has zero total mass".into()));
    }
    let objects: Vec<ObjectId> = g.objects().collect();
    let per_object: Vec<DecayProfile<S>> =
        objects.par_iter().map(|&x| decay_profile(p, x, horizon, mode, threshold)).collect();
    let trivial_mass = scalar::sum(
        per_object
            .iter()
            .filter(|d| d.verdict == Verdict::Trivial)
            .map(|d| kappa.weight(d.object).clone()),
    );
    let m = reference_measure(g, kappa)?;
    let image = p.apply_measure(&m);
    let quasi_substationary = image.support().all(|h| !m.mass(h).is_zero());
    Ok(FibrewiseReport { mode, per_object, aggregate: trivial_mass / total, quasi_substationary })
}

/// `Δ(m̂, P Q_n)` at `n = 1, 2, 4, …, 2^max_exponent`.
pub fn cesaro_echo_sweep<S: Scalar>(
    p: &EquivariantOperator<S>,
    m_hat: &Measure<S>,
    max_exponent: u32,
) -> Vec<(usize, S)> {
    (0..=max_exponent)
        .map(|e| {
            let n = 1usize << e;
            let q = p.cesaro(n).expect("n >= 1");
            (n, p.compose(&q).expect("same groupoid").weighted_discrepancy(m_hat))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::groupoid::{FiniteGroupoid, GroupTable, MorphismId};
    use crate::measure::FibredSystem;
    use crate::scalar::{Rational, Tolerance};

    type Q = Rational;

    fn z2_flip() -> EquivariantOperator<Q> {
        let g = Arc::new(FiniteGroupoid::from_group(&GroupTable::cyclic(2)));
        let sys = FibredSystem::new(&g, vec![Measure::dirac(MorphismId(1))]).unwrap();
        EquivariantOperator::from_system(g, sys, Tolerance::exact()).unwrap()
    }

    #[test]
    fn z2_flip_profiles() {
        let p = z2_flip();
        let tail = tail_triviality_profile(&p, ObjectId(0), 50, DEFAULT_THRESHOLD);
        assert!(tail.values.iter().all(|v| *v == Q::ratio(2, 1)));
        assert_eq!(tail.verdict, Verdict::NonTrivial);

        let lazy = exit_triviality_profile(&p, ObjectId(0), 10, ProfileMode::Lazy, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(*lazy.at(1), Q::ratio(0, 1));
        assert_eq!(lazy.verdict, Verdict::Trivial);

        let ces = exit_triviality_profile(&p, ObjectId(0), 12, ProfileMode::Cesaro, DEFAULT_THRESHOLD).unwrap();
        for n in 1..=12 {
            let expected = if n % 2 == 0 { Q::ratio(0, 1) } else { Q::ratio(2, n as i64) };
            assert_eq!(*ces.at(n), expected, "n = {n}");
        }
        assert_eq!(ces.verdict, Verdict::Trivial);
        assert!(exit_triviality_profile(&p, ObjectId(0), 3, ProfileMode::Tail, DEFAULT_THRESHOLD).is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&[2.0, 1.0, 1e-7], 1e-6), Verdict::Trivial);
        assert_eq!(classify(&[2.0; 8], 1e-6), Verdict::NonTrivial);
        assert_eq!(classify(&[2.0, 2.0, 2.0, 1.0], 1e-6), Verdict::Inconclusive);
        assert_eq!(classify::<f64>(&[], 1e-6), Verdict::Inconclusive);
    }

    #[test]
    fn mixed_report() {
        // Z2 acting trivially on two points: object 0 mixes, object 1 flips.
        let spec = crate::groupoid::ActionSpec::new(GroupTable::cyclic(2), vec![vec![0, 1], vec![0, 1]]).unwrap();
        let g = Arc::new(FiniteGroupoid::from_action(&spec));
        let x0 = g.fibre(ObjectId(0)).to_vec();
        let x1 = g.fibre(ObjectId(1));
        let sys = FibredSystem::new(&g, vec![Measure::uniform(x0), Measure::dirac(x1[1])]).unwrap();
        let p = EquivariantOperator::from_system(g, sys, Tolerance::exact()).unwrap();
        let kappa = ObjectMeasure::<Q>::ones(2);
        let tail = fibrewise_report(&p, &kappa, 20, ProfileMode::Tail, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(tail.aggregate, Q::ratio(1, 2));
        assert!(tail.quasi_substationary);
        let lazy = fibrewise_report(&p, &kappa, 20, ProfileMode::Lazy, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(lazy.aggregate, Q::ratio(1, 1));
    }

    #[test]
    fn echo_sweep_on_flip() {
        let p = z2_flip();
        let m_hat = Measure::uniform(p.groupoid().morphisms());
        let sweep = cesaro_echo_sweep(&p, &m_hat, 4);
        assert_eq!(sweep.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 2, 4, 8, 16]);
        assert_eq!(sweep[0].1, Q::ratio(1, 1));
        assert!(sweep[1..].iter().all(|r| r.1 == Q::ratio(0, 1)));
    }
}

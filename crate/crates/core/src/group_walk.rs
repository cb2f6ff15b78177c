//! Finitely supported measures on countable groups.
//!
//! This is the one-object case: an operator is a single measure `θ` acting
//! by right convolution, and its mean discrepancy is
//! `Δ(m, θ) = Σ_g m(g)·‖gθ − θ‖`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::groupoid::{GroupTable, MorphismId};
use crate::measure::Measure;
use crate::scalar::{self, Scalar, Tolerance};

/// A group with computable normal forms.
pub trait GroupOracle: Sync {
    type Element: Clone + Ord + Hash + fmt::Debug + fmt::Display + Send + Sync;

    fn identity(&self) -> Self::Element;

    /// Product `ab` of canonical elements, in canonical form.
    fn multiply(&self, a: &Self::Element, b: &Self::Element) -> Self::Element;

    fn invert(&self, a: &Self::Element) -> Self::Element;

    fn canonicalize(&self, a: &Self::Element) -> Self::Element;

    fn parse_element(&self, text: &str) -> Result<Self::Element>;

    fn name(&self) -> String;
}

/// The integers under addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Integers;

impl GroupOracle for Integers {
    type Element = i64;

    fn identity(&self) -> i64 {
        0
    }

    fn multiply(&self, a: &i64, b: &i64) -> i64 {
        a + b
    }

    fn invert(&self, a: &i64) -> i64 {
        -a
    }

    fn canonicalize(&self, a: &i64) -> i64 {
        *a
    }

    fn parse_element(&self, text: &str) -> Result<i64> {
        text.trim().parse().map_err(|_| Error::InvalidInput(format!("not an integer: {text:?}")))
    }

    fn name(&self) -> String {
        "z".into()
    }
}

/// `Z_n` as residues `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cyclic {
    pub n: usize,
}

impl Cyclic {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Z_0 is not a finite cyclic group".into()));
        }
        Ok(Cyclic { n })
    }
}

impl GroupOracle for Cyclic {
    type Element = usize;

    fn identity(&self) -> usize {
        0
    }

    fn multiply(&self, a: &usize, b: &usize) -> usize {
        (a + b) % self.n
    }

    fn invert(&self, a: &usize) -> usize {
        (self.n - a % self.n) % self.n
    }

    fn canonicalize(&self, a: &usize) -> usize {
        a % self.n
    }

    fn parse_element(&self, text: &str) -> Result<usize> {
        let v: i64 = text.trim().parse().map_err(|_| Error::InvalidInput(format!("not an integer: {text:?}")))?;
        Ok(v.rem_euclid(self.n as i64) as usize)
    }

    fn name(&self) -> String {
        format!("zn:{}", self.n)
    }
}

/// A finite group given by its multiplication table; elements are row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroup(pub GroupTable);

impl GroupOracle for FiniteGroup {
    type Element = usize;

    fn identity(&self) -> usize {
        self.0.identity()
    }

    fn multiply(&self, a: &usize, b: &usize) -> usize {
        self.0.multiply(*a, *b)
    }

    fn invert(&self, a: &usize) -> usize {
        self.0.inverse(*a)
    }

    fn canonicalize(&self, a: &usize) -> usize {
        *a
    }

    fn parse_element(&self, text: &str) -> Result<usize> {
        let v: usize = text.trim().parse().map_err(|_| Error::InvalidInput(format!("not an index: {text:?}")))?;
        if v >= self.0.order() {
            return Err(Error::InvalidInput(format!("element {v} outside a group of order {}", self.0.order())));
        }
        Ok(v)
    }

    fn name(&self) -> String {
        format!("table:{}", self.0.order())
    }
}

/// Generators of the free group on `a`, `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    A,
    AInv,
    B,
    BInv,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::A, Letter::AInv, Letter::B, Letter::BInv];

    pub fn inverse(self) -> Letter {
        match self {
            Letter::A => Letter::AInv,
            Letter::AInv => Letter::A,
            Letter::B => Letter::BInv,
            Letter::BInv => Letter::B,
        }
    }

    fn symbol(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::AInv => 'A',
            Letter::B => 'b',
            Letter::BInv => 'B',
        }
    }
}

/// A word in `a, a⁻¹, b, b⁻¹`; canonical when freely reduced. Printed with
/// capitals for inverses and `e` for the empty word.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != w[0].inverse())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        self.0.iter().try_for_each(|l| write!(f, "{}", l.symbol()))
    }
}

/// The free group of rank two.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FreeGroup2;

impl FreeGroup2 {
    /// All reduced words of length `≤ radius`.
    pub fn ball(&self, radius: usize) -> Vec<Word> {
        let mut out = vec![Word::default()];
        let mut frontier = vec![Word::default()];
        for _ in 0..radius {
            let mut next = Vec::new();
            for w in &frontier {
                for l in Letter::ALL {
                    if w.0.last().is_some_and(|&last| last == l.inverse()) {
                        continue;
                    }
                    let mut v = w.clone();
                    v.0.push(l);
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

impl GroupOracle for FreeGroup2 {
    type Element = Word;

    fn identity(&self) -> Word {
        Word::default()
    }

    fn multiply(&self, a: &Word, b: &Word) -> Word {
        let mut out = a.0.clone();
        for &l in &b.0 {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    fn invert(&self, a: &Word) -> Word {
        Word(a.0.iter().rev().map(|l| l.inverse()).collect())
    }

    fn canonicalize(&self, a: &Word) -> Word {
        self.multiply(&Word::default(), a)
    }

    fn parse_element(&self, text: &str) -> Result<Word> {
        let text = text.trim();
        if text == "e" || text.is_empty() {
            return Ok(Word::default());
        }
        let letters = text
            .chars()
            .map(|c| match c {
                'a' => Ok(Letter::A),
                'A' => Ok(Letter::AInv),
                'b' => Ok(Letter::B),
                'B' => Ok(Letter::BInv),
                other => Err(Error::InvalidInput(format!("unknown free-group letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.canonicalize(&Word(letters)))
    }

    fn name(&self) -> String {
        "f2".into()
    }
}

/// A finitely supported measure on a group; zero masses are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeasure<E, S> {
    masses: BTreeMap<E, S>,
}

impl<E: Clone + Ord, S: Scalar> GroupMeasure<E, S> {
    pub fn zero() -> Self {
        GroupMeasure { masses: BTreeMap::new() }
    }

    pub fn dirac(g: E) -> Self {
        GroupMeasure { masses: BTreeMap::from([(g, S::one())]) }
    }

    pub fn uniform<I: IntoIterator<Item = E>>(support: I) -> Result<Self> {
        let set: BTreeSet<E> = support.into_iter().collect();
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let w = S::one() / S::from_count(set.len());
        Ok(GroupMeasure { masses: set.into_iter().map(|g| (g, w.clone())).collect() })
    }

    pub fn from_masses<I: IntoIterator<Item = (E, S)>>(masses: I) -> Self {
        let mut m = Self::zero();
        for (g, w) in masses {
            m.add_mass(g, w);
        }
        m
    }

    pub fn add_mass(&mut self, g: E, w: S) {
        if w.is_zero() {
            return;
        }
        let entry = self.masses.entry(g.clone()).or_insert_with(S::zero);
        *entry = entry.clone() + w;
        if entry.is_zero() {
            self.masses.remove(&g);
        }
    }

    pub fn mass(&self, g: &E) -> S {
        self.masses.get(g).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&E, &S)> + '_ {
        self.masses.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &E> + '_ {
        self.masses.keys()
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> S {
        scalar::sum(self.masses.values().cloned())
    }

    pub fn is_probability(&self, tol: Tolerance) -> bool {
        self.masses.values().all(scalar::zero_or_positive) && scalar::is_one(&self.total_mass(), tol)
    }

    pub fn check_probability(&self, tol: Tolerance) -> Result<()> {
        if !self.is_probability(tol) {
            return Err(Error::NotProbability { object: None, total: self.total_mass().to_string() });
        }
        Ok(())
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> GroupMeasure<E, T> {
        GroupMeasure::from_masses(self.masses.iter().map(|(g, w)| (g.clone(), f(w))))
    }
}

/// `g·µ`, the image of `µ` under left multiplication by `g`.
pub fn left_translate<G: GroupOracle, S: Scalar>(
    oracle: &G,
    g: &G::Element,
    mu: &GroupMeasure<G::Element, S>,
) -> GroupMeasure<G::Element, S> {
    GroupMeasure::from_masses(mu.iter().map(|(h, w)| (oracle.multiply(g, h), w.clone())))
}

/// `‖µ − ν‖ = Σ_g |µ(g) − ν(g)|`.
pub fn group_total_variation<E: Clone + Ord, S: Scalar>(mu: &GroupMeasure<E, S>, nu: &GroupMeasure<E, S>) -> S {
    let keys: BTreeSet<&E> = mu.support().chain(nu.support()).collect();
    scalar::sum(keys.into_iter().map(|g| (mu.mass(g) - nu.mass(g)).abs()))
}

/// `(µ∗ν)(g) = Σ_h µ(h)·ν(h⁻¹g)`.
pub fn group_convolve<G: GroupOracle, S: Scalar>(
    oracle: &G,
    mu: &GroupMeasure<G::Element, S>,
    nu: &GroupMeasure<G::Element, S>,
) -> GroupMeasure<G::Element, S> {
    let mut out = GroupMeasure::zero();
    for (h, a) in mu.iter() {
        for (k, b) in nu.iter() {
            out.add_mass(oracle.multiply(h, k), a.clone() * b.clone());
        }
    }
    out
}

/// `Δ(m, θ) = Σ_g m(g)·‖gθ − θ‖`.
pub fn group_discrepancy<G: GroupOracle, S: Scalar>(
    oracle: &G,
    m: &GroupMeasure<G::Element, S>,
    theta: &GroupMeasure<G::Element, S>,
) -> S {
    scalar::sum(
        m.iter().map(|(g, w)| w.clone() * group_total_variation(&left_translate(oracle, g, theta), theta)),
    )
}

/// `Δ(m, χ_A)` through the symmetric-difference identity
/// `‖gχ_A − χ_A‖ = |gA Δ A| / |A|`.
pub fn folner_measure_test<G: GroupOracle, S: Scalar>(
    oracle: &G,
    m: &GroupMeasure<G::Element, S>,
    set: &[G::Element],
) -> Result<S> {
    let a: BTreeSet<G::Element> = set.iter().map(|g| oracle.canonicalize(g)).collect();
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let size = S::from_count(a.len());
    Ok(scalar::sum(m.iter().map(|(g, w)| {
        let ga: BTreeSet<G::Element> = a.iter().map(|h| oracle.multiply(g, h)).collect();
        w.clone() * S::from_count(ga.symmetric_difference(&a).count()) / size.clone()
    })))
}

/// `Δ(m, χ_A)` by pointwise subtraction of the translated uniform measure.
pub fn folner_measure_direct<G: GroupOracle, S: Scalar>(
    oracle: &G,
    m: &GroupMeasure<G::Element, S>,
    set: &[G::Element],
) -> Result<S> {
    let chi = GroupMeasure::uniform(set.iter().map(|g| oracle.canonicalize(g)))?;
    Ok(group_discrepancy(oracle, m, &chi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapHit {
    /// First power whose support exceeded the cap.
    pub n: usize,
    pub size: usize,
    pub cap: usize,
}

impl From<CapHit> for Error {
    fn from(c: CapHit) -> Self {
        Error::SupportCapExceeded { n: c.n, size: c.size, cap: c.cap }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep<S> {
    /// `values[n - 1] = ‖probe·µ^{∗n} − µ^{∗n}‖`.
    pub values: Vec<S>,
    /// Set when the sweep stopped early.
    pub truncated: Option<CapHit>,
}

impl<S: Scalar> Sweep<S> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }
}

pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// `‖probe·µ^{∗n} − µ^{∗n}‖` for `n = 1..=N`, stopping before the first
/// power whose support exceeds `support_cap`.
pub fn convolution_power_sweep<G: GroupOracle, S: Scalar>(
    oracle: &G,
    mu: &GroupMeasure<G::Element, S>,
    horizon: usize,
    probe: &G::Element,
    support_cap: usize,
) -> Sweep<S> {
    let mut values = Vec::with_capacity(horizon);
    let mut power = GroupMeasure::dirac(oracle.identity());
    for n in 1..=horizon {
        power = group_convolve(oracle, &power, mu);
        if power.support_len() > support_cap {
            return Sweep { values, truncated: Some(CapHit { n, size: power.support_len(), cap: support_cap }) };
        }
        values.push(group_total_variation(&left_translate(oracle, probe, &power), &power));
    }
    Sweep { values, truncated: None }
}

/// `½δ_0 + ¼δ_{−1} + ¼δ_{+1}` on `Z`.
pub fn lazy_walk_z<S: Scalar>() -> GroupMeasure<i64, S> {
    GroupMeasure::from_masses([(0, S::ratio(1, 2)), (-1, S::ratio(1, 4)), (1, S::ratio(1, 4))])
}

/// Uniform on `{a, a⁻¹, b, b⁻¹}`.
pub fn simple_walk_f2<S: Scalar>() -> GroupMeasure<Word, S> {
    GroupMeasure::uniform(Letter::ALL.map(Word::letter)).expect("four generators")
}

/// Reads a measure on a finite group table as a measure on its group groupoid.
pub fn embed_measure<S: Scalar>(mu: &GroupMeasure<usize, S>) -> Measure<S> {
    Measure::from_masses(mu.iter().map(|(g, w)| (MorphismId(*g), w.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    type Q = Rational;

    fn q(n: i64, d: i64) -> Q {
        Q::ratio(n, d)
    }

    #[test]
    fn lazy_walk_square() {
        let mu = lazy_walk_z::<Q>();
        let sq = group_convolve(&Integers, &mu, &mu);
        let expected = GroupMeasure::from_masses([(-2, q(1, 16)), (-1, q(1, 4)), (0, q(3, 8)), (1, q(1, 4)), (2, q(1, 16))]);
        assert_eq!(sq, expected);
        assert_eq!(group_convolve(&Integers, &GroupMeasure::dirac(0), &mu), mu);
    }

    #[test]
    fn free_group_return_mass() {
        let mu = simple_walk_f2::<Q>();
        let sq = group_convolve(&FreeGroup2, &mu, &mu);
        assert_eq!(sq.mass(&Word::default()), q(1, 4));
        assert_eq!(sq.support_len(), 13);
    }

    #[test]
    fn discrepancy_examples() {
        let mu = lazy_walk_z::<Q>();
        assert_eq!(group_discrepancy(&Integers, &GroupMeasure::dirac(0), &mu), q(0, 1));
        assert_eq!(group_discrepancy(&Integers, &GroupMeasure::dirac(1), &mu), q(1, 1));
        let sq = group_convolve(&Integers, &mu, &mu);
        assert_eq!(group_discrepancy(&Integers, &GroupMeasure::dirac(1), &sq), q(3, 4));
    }

    #[test]
    fn folner_examples() {
        let a: Vec<i64> = (0..10).collect();
        let m = GroupMeasure::<i64, Q>::dirac(1);
        assert_eq!(folner_measure_test(&Integers, &m, &a).unwrap(), q(1, 5));
        assert_eq!(folner_measure_direct(&Integers, &m, &a).unwrap(), q(1, 5));

        let ball = FreeGroup2.ball(2);
        assert_eq!(ball.len(), 17);
        let m = GroupMeasure::<Word, Q>::dirac(Word::letter(Letter::A));
        assert_eq!(folner_measure_test(&FreeGroup2, &m, &ball).unwrap(), q(18, 17));
        assert_eq!(folner_measure_direct(&FreeGroup2, &m, &ball).unwrap(), q(18, 17));

        let e = GroupMeasure::<Word, Q>::dirac(Word::default());
        assert_eq!(folner_measure_test(&FreeGroup2, &e, &ball).unwrap(), q(0, 1));
        assert_eq!(folner_measure_test(&FreeGroup2, &e, &[]).unwrap_err(), Error::EmptySet);
    }

    #[test]
    fn sweeps() {
        let s = convolution_power_sweep(&Integers, &lazy_walk_z::<Q>(), 6, &1, DEFAULT_SUPPORT_CAP);
        assert_eq!(&s.values[..2], &[q(1, 1), q(3, 4)]);
        assert!(s.values.windows(2).all(|w| w[1] <= w[0]));

        let flip = GroupMeasure::<usize, Q>::dirac(1);
        let s = convolution_power_sweep(&Cyclic::new(2).unwrap(), &flip, 5, &1, DEFAULT_SUPPORT_CAP);
        assert!(s.values.iter().all(|v| *v == q(2, 1)));

        let s = convolution_power_sweep(&FreeGroup2, &simple_walk_f2::<Q>(), 4, &Word::letter(Letter::A), 20);
        assert_eq!(s.values[0], q(2, 1));
        assert_eq!(s.truncated, Some(CapHit { n: 3, size: 40, cap: 20 }));
        assert_eq!(s.values.len(), 2);
    }

    #[test]
    fn free_group_words() {
        let a = FreeGroup2.parse_element("aBba").unwrap();
        assert_eq!(a.to_string(), "aa");
        assert!(a.is_reduced());
        let w = FreeGroup2.parse_element("abAB").unwrap();
        assert_eq!(FreeGroup2.multiply(&w, &FreeGroup2.invert(&w)), Word::default());
        assert_eq!(FreeGroup2.parse_element("e").unwrap(), Word::default());
        assert!(FreeGroup2.parse_element("ax").is_err());
        assert_eq!(Cyclic::new(5).unwrap().parse_element("-1").unwrap(), 4);
    }
}

//! Measures on morphisms, target-fibred systems and their algebra.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::groupoid::{FiniteGroupoid, MorphismId, ObjectId};
use crate::scalar::{self, Scalar, Tolerance};

/// A finitely supported measure on the morphisms, stored sparsely.
/// Zero masses are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure<S> {
    masses: BTreeMap<MorphismId, S>,
}

impl<S: Scalar> Default for Measure<S> {
    fn default() -> Self {
        Measure { masses: BTreeMap::new() }
    }
}

impl<S: Scalar> Measure<S> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(g: MorphismId) -> Self {
        let mut m = Self::zero();
        m.add_mass(g, S::one());
        m
    }

    /// Uniform probability on `support`; empty input gives the zero measure.
    pub fn uniform<I: IntoIterator<Item = MorphismId>>(support: I) -> Self {
        let support: Vec<MorphismId> = support.into_iter().collect();
        let mut m = Self::zero();
        if support.is_empty() {
            return m;
        }
        let w = S::one() / S::from_count(support.len());
        for g in support {
            m.add_mass(g, w.clone());
        }
        m
    }

    pub fn from_masses<I: IntoIterator<Item = (MorphismId, S)>>(masses: I) -> Self {
        let mut m = Self::zero();
        for (g, w) in masses {
            m.add_mass(g, w);
        }
        m
    }

    pub fn add_mass(&mut self, g: MorphismId, w: S) {
        if w.is_zero() {
            return;
        }
        let entry = self.masses.entry(g).or_insert_with(S::zero);
        *entry = entry.clone() + w;
        if entry.is_zero() {
            self.masses.remove(&g);
        }
    }

    pub fn mass(&self, g: MorphismId) -> S {
        self.masses.get(&g).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MorphismId, &S)> + '_ {
        self.masses.iter().map(|(g, w)| (*g, w))
    }

    pub fn support(&self) -> impl Iterator<Item = MorphismId> + '_ {
        self.masses.keys().copied()
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_zero(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> S {
        scalar::sum(self.masses.values().cloned())
    }

    pub fn scaled(&self, c: &S) -> Self {
        Self::from_masses(self.iter().map(|(g, w)| (g, w.clone() * c.clone())))
    }

    /// `self + c·other`.
    pub fn add_scaled(&mut self, other: &Measure<S>, c: &S) {
        for (g, w) in other.iter() {
            self.add_mass(g, w.clone() * c.clone());
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.masses.values().all(scalar::zero_or_positive)
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.masses.iter().find(|(_, w)| w.is_negative()) {
            Some((g, w)) => Err(Error::NegativeMass { morphism: *g, mass: w.to_string() }),
            None => Ok(()),
        }
    }

    pub fn is_probability(&self, tol: Tolerance) -> bool {
        self.is_nonnegative() && scalar::is_one(&self.total_mass(), tol)
    }

    pub fn check_probability(&self, tol: Tolerance) -> Result<()> {
        self.check_nonnegative()?;
        let total = self.total_mass();
        if !scalar::is_one(&total, tol) {
            return Err(Error::NotProbability { object: None, total: total.to_string() });
        }
        Ok(())
    }

    /// Same measure divided by its total mass.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_mass();
        if total.is_zero() {
            return Err(Error::NotProbability { object: None, total: total.to_string() });
        }
        Ok(self.scaled(&(S::one() / total)))
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Measure<T> {
        Measure::from_masses(self.iter().map(|(g, w)| (g, f(w))))
    }

    /// Rows `morphism_id,mass` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("morphism_id,mass\n");
        for (g, w) in self.iter() {
            out.push_str(&format!("{},{}\n", g.0, w));
        }
        out
    }
}

/// A measure on the objects.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMeasure<S> {
    weights: Vec<S>,
}

impl<S: Scalar> ObjectMeasure<S> {
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| w.is_negative()) {
            return Err(Error::InvalidInput(format!("negative object weight {w}")));
        }
        Ok(ObjectMeasure { weights })
    }

    pub fn ones(n: usize) -> Self {
        ObjectMeasure { weights: vec![S::one(); n] }
    }

    pub fn weight(&self, x: ObjectId) -> &S {
        &self.weights[x.0]
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> S {
        scalar::sum(self.weights.iter().cloned())
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|w| w.is_positive())
    }
}

/// One measure per target fibre: `fibre(x)` is supported inside `Γ^x`.
///
/// Houses both Haar systems and the probability systems that determine
/// equivariant operators.
#[derive(Debug, Clone, PartialEq)]
pub struct FibredSystem<S> {
    fibres: Vec<Measure<S>>,
}

impl<S: Scalar> FibredSystem<S> {
    /// Checks that every measure sits inside its own fibre.
    pub fn new(groupoid: &FiniteGroupoid, fibres: Vec<Measure<S>>) -> Result<Self> {
        if fibres.len() != groupoid.num_objects() {
            return Err(Error::Mismatch(format!(
                "{} fibre measures for {} objects",
                fibres.len(),
                groupoid.num_objects()
            )));
        }
        for (x, m) in fibres.iter().enumerate() {
            for g in m.support() {
                if g.0 >= groupoid.num_morphisms() || groupoid.target(g) != ObjectId(x) {
                    return Err(Error::OutsideFibre { morphism: g, expected: ObjectId(x) });
                }
            }
        }
        Ok(FibredSystem { fibres })
    }

    pub(crate) fn from_fibres_unchecked(fibres: Vec<Measure<S>>) -> Self {
        FibredSystem { fibres }
    }

    /// `ε^x = δ_{e_x}`: the unit of convolution.
    pub fn identity(groupoid: &FiniteGroupoid) -> Self {
        FibredSystem { fibres: groupoid.objects().map(|x| Measure::dirac(groupoid.unit(x))).collect() }
    }

    /// Uniform probability on every fibre.
    pub fn uniform(groupoid: &FiniteGroupoid) -> Self {
        FibredSystem {
            fibres: groupoid.objects().map(|x| Measure::uniform(groupoid.fibre(x).iter().copied())).collect(),
        }
    }

    pub fn fibre(&self, x: ObjectId) -> &Measure<S> {
        &self.fibres[x.0]
    }

    pub fn fibres(&self) -> &[Measure<S>] {
        &self.fibres
    }

    pub fn num_objects(&self) -> usize {
        self.fibres.len()
    }

    pub fn check_probability(&self, tol: Tolerance) -> Result<()> {
        for (x, m) in self.fibres.iter().enumerate() {
            m.check_nonnegative()?;
            let total = m.total_mass();
            if !scalar::is_one(&total, tol) {
                return Err(Error::NotProbability { object: Some(ObjectId(x)), total: total.to_string() });
            }
        }
        Ok(())
    }

    pub fn is_probability(&self, tol: Tolerance) -> bool {
        self.check_probability(tol).is_ok()
    }

    /// Left invariance `γ·λ^{s(γ)} = λ^{t(γ)}` for every morphism.
    pub fn is_left_invariant(&self, groupoid: &FiniteGroupoid, tol: Tolerance) -> bool {
        groupoid.morphisms().all(|g| {
            translate(groupoid, g, self.fibre(groupoid.source(g)))
                .map(|moved| measures_approx_eq(&moved, self.fibre(groupoid.target(g)), tol))
                .unwrap_or(false)
        })
    }

    /// `Σ c_i θ_i` fibre by fibre.
    pub fn linear_combination(parts: &[(S, &FibredSystem<S>)]) -> Result<Self> {
        let n = parts.first().map(|(_, s)| s.num_objects()).unwrap_or(0);
        if parts.iter().any(|(_, s)| s.num_objects() != n) {
            return Err(Error::Mismatch("systems over different object sets".into()));
        }
        let mut fibres = vec![Measure::zero(); n];
        for (c, sys) in parts {
            for (acc, m) in fibres.iter_mut().zip(&sys.fibres) {
                acc.add_scaled(m, c);
            }
        }
        Ok(FibredSystem { fibres })
    }

    pub fn scaled(&self, c: &S) -> Self {
        FibredSystem { fibres: self.fibres.iter().map(|m| m.scaled(c)).collect() }
    }

    pub fn approx_eq(&self, other: &Self, tol: Tolerance) -> bool {
        self.fibres.len() == other.fibres.len()
            && self.fibres.iter().zip(&other.fibres).all(|(a, b)| measures_approx_eq(a, b, tol))
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> FibredSystem<T> {
        FibredSystem { fibres: self.fibres.iter().map(|m| m.map_scalar(f)).collect() }
    }
}

pub fn measures_approx_eq<S: Scalar>(a: &Measure<S>, b: &Measure<S>, tol: Tolerance) -> bool {
    if S::EXACT {
        return a == b;
    }
    total_variation(a, b).as_f64() <= tol.epsilon
}

/// Counting measure on every target fibre; left invariant because left
/// multiplication is a bijection between fibres.
pub fn counting_haar<S: Scalar>(groupoid: &FiniteGroupoid) -> FibredSystem<S> {
    let fibres = groupoid
        .objects()
        .map(|x| Measure::from_masses(groupoid.fibre(x).iter().map(|&g| (g, S::one()))))
        .collect();
    FibredSystem { fibres }
}

/// `(λ⋆κ)(γ) = λ^{t(γ)}(γ)·κ(t(γ))`.
pub fn lambda_star_kappa<S: Scalar>(haar: &FibredSystem<S>, kappa: &ObjectMeasure<S>) -> Result<Measure<S>> {
    if haar.num_objects() != kappa.len() {
        return Err(Error::Mismatch(format!(
            "Haar system has {} fibres but kappa has {} weights",
            haar.num_objects(),
            kappa.len()
        )));
    }
    let mut out = Measure::zero();
    for (lambda_x, k) in haar.fibres().iter().zip(kappa.weights()) {
        out.add_scaled(lambda_x, k);
    }
    Ok(out)
}

/// Default reference probability `m̂`: normalized `λ⋆κ` for the counting Haar system.
pub fn reference_measure<S: Scalar>(groupoid: &FiniteGroupoid, kappa: &ObjectMeasure<S>) -> Result<Measure<S>> {
    lambda_star_kappa(&counting_haar(groupoid), kappa)?.normalized()
}

/// Push-forward of `µ` (on `Γ^{s(γ)}`) under left multiplication by `γ`.
pub fn translate<S: Scalar>(groupoid: &FiniteGroupoid, g: MorphismId, mu: &Measure<S>) -> Result<Measure<S>> {
    let domain = groupoid.source(g);
    let mut out = Measure::zero();
    for (h, w) in mu.iter() {
        if groupoid.target(h) != domain {
            return Err(Error::OutsideFibre { morphism: h, expected: domain });
        }
        out.add_mass(groupoid.compose(g, h)?, w.clone());
    }
    Ok(out)
}

/// `Σ_γ |µ(γ) − ν(γ)|`.
pub fn total_variation<S: Scalar>(mu: &Measure<S>, nu: &Measure<S>) -> S {
    let mut acc = S::zero();
    let mut a = mu.masses.iter().peekable();
    let mut b = nu.masses.iter().peekable();
    loop {
        match (a.peek(), b.peek()) {
            (Some((ga, wa)), Some((gb, wb))) => {
                if ga == gb {
                    acc = acc + ((*wa).clone() - (*wb).clone()).abs();
                    a.next();
                    b.next();
                } else if ga < gb {
                    acc = acc + wa.abs();
                    a.next();
                } else {
                    acc = acc + wb.abs();
                    b.next();
                }
            }
            (Some((_, wa)), None) => {
                acc = acc + wa.abs();
                a.next();
            }
            (None, Some((_, wb))) => {
                acc = acc + wb.abs();
                b.next();
            }
            (None, None) => return acc,
        }
    }
}

/// `(θ⋆η)^x = Σ_{γ'∈Γ^x} θ^x(γ')·(γ'·η^{s(γ')})`: the system of the
/// operator product `P_θ P_η`. Works for arbitrary finite-mass systems.
pub fn convolve<S: Scalar>(groupoid: &FiniteGroupoid, theta: &FibredSystem<S>, eta: &FibredSystem<S>) -> FibredSystem<S> {
    let fibres = theta
        .fibres()
        .iter()
        .map(|theta_x| {
            let mut out = Measure::zero();
            for (g, w) in theta_x.iter() {
                for (h, v) in eta.fibre(groupoid.source(g)).iter() {
                    let gh = groupoid.compose(g, h).expect("fibred systems compose");
                    out.add_mass(gh, w.clone() * v.clone());
                }
            }
            out
        })
        .collect();
    FibredSystem { fibres }
}

/// `true` iff the `λ⋆κ`-null set is invariant under inversion.
pub fn check_quasi_invariance<S: Scalar>(
    groupoid: &FiniteGroupoid,
    haar: &FibredSystem<S>,
    kappa: &ObjectMeasure<S>,
) -> Result<bool> {
    let lk = lambda_star_kappa(haar, kappa)?;
    Ok(groupoid.morphisms().all(|g| lk.mass(g).is_zero() == lk.mass(groupoid.inverse(g)).is_zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{ActionSpec, GroupTable, PartitionSpec};
    use crate::scalar::Rational;

    type Q = Rational;

    fn q(n: i64, d: i64) -> Q {
        Q::ratio(n, d)
    }

    #[test]
    fn counting_haar_on_groups_and_actions() {
        let z2 = FiniteGroupoid::from_group(&GroupTable::cyclic(2));
        let haar = counting_haar::<Q>(&z2);
        assert_eq!(haar.fibre(ObjectId(0)).total_mass(), q(2, 1));
        let swap =
            FiniteGroupoid::from_action(&ActionSpec::new(GroupTable::cyclic(2), vec![vec![0, 1], vec![1, 0]]).unwrap());
        let haar = counting_haar::<Q>(&swap);
        assert!(swap.objects().all(|x| haar.fibre(x).total_mass() == q(2, 1)));
        assert!(haar.is_left_invariant(&swap, Tolerance::exact()));
    }

    #[test]
    fn lambda_star_kappa_examples() {
        let z2 = FiniteGroupoid::from_group(&GroupTable::cyclic(2));
        let lk = lambda_star_kappa(&counting_haar::<Q>(&z2), &ObjectMeasure::ones(1)).unwrap();
        assert!(z2.morphisms().all(|g| lk.mass(g) == q(1, 1)));

        let pair = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0, 1]]).unwrap());
        let kappa = ObjectMeasure::new(vec![q(2, 1), q(1, 1)]).unwrap();
        let lk = lambda_star_kappa(&counting_haar::<Q>(&pair), &kappa).unwrap();
        // formula: mass of γ is κ(t(γ))
        for g in pair.morphisms() {
            let expected = if pair.target(g) == ObjectId(0) { q(2, 1) } else { q(1, 1) };
            assert_eq!(lk.mass(g), expected);
        }
        assert_eq!(lk.total_mass(), q(6, 1));

        let zero = ObjectMeasure::new(vec![q(0, 1), q(0, 1)]).unwrap();
        assert!(lambda_star_kappa(&counting_haar::<Q>(&pair), &zero).unwrap().is_zero());
    }

    #[test]
    fn translate_examples() {
        let g = FiniteGroupoid::from_action(&ActionSpec::regular(GroupTable::symmetric(3)));
        let x = ObjectId(2);
        let mu: Measure<Q> = Measure::uniform(g.fibre(x).iter().copied().take(3));
        assert_eq!(translate(&g, g.unit(x), &mu).unwrap(), mu);
        for a in g.morphisms() {
            let moved = translate(&g, a, &Measure::<Q>::dirac(g.unit(g.source(a)))).unwrap();
            assert_eq!(moved, Measure::dirac(a));
        }
        let a = g.fibre(ObjectId(4))[1];
        let err = translate(&g, a, &Measure::<Q>::dirac(g.unit(ObjectId(4)))).unwrap_err();
        assert!(matches!(err, Error::OutsideFibre { morphism, expected } if morphism == g.unit(ObjectId(4)) && expected == g.source(a)));
    }

    #[test]
    fn total_variation_examples() {
        let a: Measure<Q> = Measure::dirac(MorphismId(0));
        let b: Measure<Q> = Measure::dirac(MorphismId(1));
        assert_eq!(total_variation(&a, &a), q(0, 1));
        assert_eq!(total_variation(&a, &b), q(2, 1));
    }

    #[test]
    fn convolution_units() {
        let g = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0, 1, 2], vec![3]]).unwrap());
        let theta = FibredSystem::<Q>::uniform(&g);
        let eps = FibredSystem::identity(&g);
        assert_eq!(convolve(&g, &theta, &eps), theta);
        assert_eq!(convolve(&g, &eps, &theta), theta);
    }

    #[test]
    fn quasi_invariance() {
        let pair = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0, 1]]).unwrap());
        let haar = counting_haar::<Q>(&pair);
        let positive = ObjectMeasure::new(vec![q(1, 3), q(2, 3)]).unwrap();
        assert!(check_quasi_invariance(&pair, &haar, &positive).unwrap());
        let half = ObjectMeasure::new(vec![q(0, 1), q(1, 1)]).unwrap();
        assert!(!check_quasi_invariance(&pair, &haar, &half).unwrap());
        let zero = ObjectMeasure::new(vec![q(0, 1), q(0, 1)]).unwrap();
        assert!(check_quasi_invariance(&pair, &haar, &zero).unwrap());
    }

    #[test]
    fn system_validation() {
        let pair = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0, 1]]).unwrap());
        let wrong = vec![Measure::<Q>::dirac(pair.unit(ObjectId(1))), Measure::dirac(pair.unit(ObjectId(1)))];
        assert!(matches!(FibredSystem::new(&pair, wrong), Err(Error::OutsideFibre { .. })));
        let half = vec![
            Measure::<Q>::from_masses([(pair.unit(ObjectId(0)), q(1, 2))]),
            Measure::dirac(pair.unit(ObjectId(1))),
        ];
        let sys = FibredSystem::new(&pair, half).unwrap();
        assert!(matches!(
            sys.check_probability(Tolerance::exact()),
            Err(Error::NotProbability { object: Some(ObjectId(0)), .. })
        ));
    }

    #[test]
    fn float_probability_within_tolerance() {
        let m: Measure<f64> = Measure::from_masses([(MorphismId(0), 0.1), (MorphismId(1), 0.2), (MorphismId(2), 0.7)]);
        assert!(m.is_probability(Tolerance::default()));
        let short: Measure<f64> = Measure::from_masses([(MorphismId(0), 0.5), (MorphismId(1), 0.4999)]);
        assert!(!short.is_probability(Tolerance::default()));
    }
}

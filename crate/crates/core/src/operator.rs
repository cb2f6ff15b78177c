//! Equivariant transition operators.
//!
//! An operator is stored as its fibred probability system `θ`; transitions
//! are derived on demand as `π^γ = γ·θ^{s(γ)}`, so equivariance
//! `π^{γγ'} = γ·π^{γ'}` holds by construction. Products of operators are
//! convolutions of systems, and convex combinations of operators are convex
//! combinations of systems.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::groupoid::{FiniteGroupoid, MorphismId, ObjectId};
use crate::measure::{convolve, total_variation, translate, FibredSystem, Measure};
use crate::scalar::{self, Scalar, Tolerance};

#[derive(Debug, Clone)]
pub struct EquivariantOperator<S> {
    groupoid: Arc<FiniteGroupoid>,
    system: FibredSystem<S>,
}

impl<S: Scalar> PartialEq for EquivariantOperator<S> {
    fn eq(&self, other: &Self) -> bool {
        same_groupoid(&self.groupoid, &other.groupoid) && self.system == other.system
    }
}

pub fn same_groupoid(a: &Arc<FiniteGroupoid>, b: &Arc<FiniteGroupoid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl<S: Scalar> EquivariantOperator<S> {
    /// The operator with `π^{e_x} = θ^x`. Rejects systems that leave their
    /// fibres or are not probability measures (including empty fibres).
    pub fn from_system(groupoid: Arc<FiniteGroupoid>, system: FibredSystem<S>, tol: Tolerance) -> Result<Self> {
        let system = FibredSystem::new(&groupoid, system.fibres().to_vec())?;
        system.check_probability(tol)?;
        Ok(EquivariantOperator { groupoid, system })
    }

    pub(crate) fn from_parts(groupoid: Arc<FiniteGroupoid>, system: FibredSystem<S>) -> Self {
        EquivariantOperator { groupoid, system }
    }

    /// Every state absorbing: `π^γ = δ_γ`.
    pub fn identity(groupoid: Arc<FiniteGroupoid>) -> Self {
        let system = FibredSystem::identity(&groupoid);
        EquivariantOperator { groupoid, system }
    }

    /// `θ^x` uniform on `Γ^x`; exactly invariant.
    pub fn uniform(groupoid: Arc<FiniteGroupoid>) -> Self {
        let system = FibredSystem::uniform(&groupoid);
        EquivariantOperator { groupoid, system }
    }

    pub fn groupoid(&self) -> &Arc<FiniteGroupoid> {
        &self.groupoid
    }

    pub fn system(&self) -> &FibredSystem<S> {
        &self.system
    }

    pub fn into_system(self) -> FibredSystem<S> {
        self.system
    }

    /// `π^γ = γ·θ^{s(γ)}`.
    pub fn transition(&self, g: MorphismId) -> Measure<S> {
        translate(&self.groupoid, g, self.system.fibre(self.groupoid.source(g)))
            .expect("system is target fibred")
    }

    /// Restriction of the transitions to units, `x ↦ π^{e_x}`.
    pub fn unit_restriction(&self) -> FibredSystem<S> {
        let fibres = self.groupoid.objects().map(|x| self.transition(self.groupoid.unit(x))).collect();
        FibredSystem::from_fibres_unchecked(fibres)
    }

    /// `αP = Σ_γ α(γ)·π^γ`.
    pub fn apply_measure(&self, alpha: &Measure<S>) -> Measure<S> {
        let mut out = Measure::zero();
        for (g, w) in alpha.iter() {
            for (h, v) in self.system.fibre(self.groupoid.source(g)).iter() {
                let gh = self.groupoid.compose(g, h).expect("system is target fibred");
                out.add_mass(gh, w.clone() * v.clone());
            }
        }
        out
    }

    /// `Pf(γ) = ⟨f, π^γ⟩` for `f` given densely by morphism id.
    pub fn apply_function(&self, f: &[S]) -> Result<Vec<S>> {
        if f.len() != self.groupoid.num_morphisms() {
            return Err(Error::Mismatch(format!(
                "function has {} values for {} morphisms",
                f.len(),
                self.groupoid.num_morphisms()
            )));
        }
        Ok(self
            .groupoid
            .morphisms()
            .map(|g| scalar::sum(self.transition(g).iter().map(|(h, w)| w.clone() * f[h.0].clone())))
            .collect())
    }

    /// The product `PQ` (first `P`, then `Q` on measures).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if !same_groupoid(&self.groupoid, &other.groupoid) {
            return Err(Error::GroupoidMismatch);
        }
        Ok(EquivariantOperator {
            groupoid: self.groupoid.clone(),
            system: convolve(&self.groupoid, &self.system, &other.system),
        })
    }

    /// `Pⁿ` by binary exponentiation; `n = 0` gives the identity operator.
    pub fn power(&self, n: usize) -> Self {
        let mut result = Self::identity(self.groupoid.clone());
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.compose(&base).expect("same groupoid");
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base).expect("same groupoid");
            }
        }
        result
    }

    /// `Σ c_i P_i`. Weights must be non-negative and sum to one.
    pub fn convex_combination(parts: &[(S, &EquivariantOperator<S>)], tol: Tolerance) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("empty convex combination".into()))?.1;
        if parts.iter().any(|(_, p)| !same_groupoid(&p.groupoid, &first.groupoid)) {
            return Err(Error::GroupoidMismatch);
        }
        if parts.iter().any(|(c, _)| c.is_negative()) {
            return Err(Error::InvalidInput("negative convex weight".into()));
        }
        let total = scalar::sum(parts.iter().map(|(c, _)| c.clone()));
        if !scalar::is_one(&total, tol) {
            return Err(Error::InvalidInput(format!("convex weights sum to {total}")));
        }
        let systems: Vec<(S, &FibredSystem<S>)> = parts.iter().map(|(c, p)| (c.clone(), &p.system)).collect();
        Ok(EquivariantOperator {
            groupoid: first.groupoid.clone(),
            system: FibredSystem::linear_combination(&systems)?,
        })
    }

    /// `(P + P² + ⋯ + Pⁿ, Pⁿ)` as systems, in `O(log n)` products.
    fn power_sum(&self, n: usize) -> (FibredSystem<S>, FibredSystem<S>) {
        debug_assert!(n >= 1);
        let g = &self.groupoid;
        if n == 1 {
            return (self.system.clone(), self.system.clone());
        }
        if n % 2 == 0 {
            let (sum, pow) = self.power_sum(n / 2);
            let shifted = convolve(g, &pow, &sum);
            let sum = FibredSystem::linear_combination(&[(S::one(), &sum), (S::one(), &shifted)]).unwrap();
            (sum, convolve(g, &pow, &pow))
        } else {
            let (sum, pow) = self.power_sum(n - 1);
            let next = convolve(g, &pow, &self.system);
            let sum = FibredSystem::linear_combination(&[(S::one(), &sum), (S::one(), &next)]).unwrap();
            (sum, next)
        }
    }

    /// Cesàro average `Q_n = (P + ⋯ + Pⁿ)/n`.
    pub fn cesaro(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Cesàro average needs n >= 1".into()));
        }
        let (sum, _) = self.power_sum(n);
        Ok(EquivariantOperator {
            groupoid: self.groupoid.clone(),
            system: sum.scaled(&(S::one() / S::from_count(n))),
        })
    }

    /// `R = (P + P²)/2`.
    pub fn lazy_average(&self) -> Self {
        let square = convolve(&self.groupoid, &self.system, &self.system);
        let half = S::ratio(1, 2);
        let system = FibredSystem::linear_combination(&[(half.clone(), &self.system), (half, &square)]).unwrap();
        EquivariantOperator { groupoid: self.groupoid.clone(), system }
    }

    /// `Δ(γ, P) = ‖π^γ − π^{t(γ)}‖`, computed inside the fibre `Γ^{t(γ)}`.
    pub fn discrepancy_at(&self, g: MorphismId) -> S {
        total_variation(&self.transition(g), self.system.fibre(self.groupoid.target(g)))
    }

    /// `Δ(γ, P)` for every morphism, indexed by id.
    pub fn discrepancy_profile(&self) -> Vec<S> {
        self.groupoid.morphisms().map(|g| self.discrepancy_at(g)).collect()
    }

    /// `Σ_γ m(γ)·Δ(γ, P)` without checking that `m` is a probability.
    pub fn weighted_discrepancy(&self, m: &Measure<S>) -> S {
        scalar::sum(m.iter().map(|(g, w)| w.clone() * self.discrepancy_at(g)))
    }

    /// Mean discrepancy `Δ(m, P)` for a probability measure `m`.
    pub fn mean_discrepancy(&self, m: &Measure<S>, tol: Tolerance) -> Result<S> {
        m.check_probability(tol)?;
        if let Some(g) = m.support().find(|g| g.0 >= self.groupoid.num_morphisms()) {
            return Err(Error::Mismatch(format!("measure charges unknown morphism {g}")));
        }
        Ok(self.weighted_discrepancy(m))
    }

    /// `true` iff `γθ^{s(γ)} = θ^{t(γ)}` for every `γ`.
    pub fn is_exactly_invariant(&self, tol: Tolerance) -> bool {
        self.groupoid.morphisms().all(|g| {
            crate::measure::measures_approx_eq(&self.transition(g), self.system.fibre(self.groupoid.target(g)), tol)
        })
    }

    /// Transition matrix of the chain restricted to `Γ^x`, rows and columns in fibre order.
    pub fn fibre_matrix(&self, x: ObjectId) -> FibreMatrix<S> {
        let fibre = self.groupoid.fibre(x).to_vec();
        let entries = fibre
            .iter()
            .map(|&g| {
                let pi = self.transition(g);
                fibre.iter().map(|&h| pi.mass(h)).collect()
            })
            .collect();
        FibreMatrix { object: x, morphisms: fibre, entries }
    }

    /// CSV rows `morphism_id,source_object,target_object,delta`.
    pub fn discrepancy_csv(&self) -> String {
        let mut out = String::from("morphism_id,source_object,target_object,delta\n");
        for (g, d) in self.groupoid.morphisms().zip(self.discrepancy_profile()) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                g.0,
                self.groupoid.source(g).0,
                self.groupoid.target(g).0,
                d
            ));
        }
        out
    }
}

/// `m̄ = Σ_γ m(γ)·δ_{e_{t(γ)}}`.
pub fn target_pushforward<S: Scalar>(groupoid: &FiniteGroupoid, m: &Measure<S>) -> Measure<S> {
    let mut out = Measure::zero();
    for (g, w) in m.iter() {
        out.add_mass(groupoid.unit(groupoid.target(g)), w.clone());
    }
    out
}

/// Dense matrix of the fibrewise chain on `Γ^x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreMatrix<S> {
    pub object: ObjectId,
    /// Row/column labels.
    pub morphisms: Vec<MorphismId>,
    pub entries: Vec<Vec<S>>,
}

impl<S: Scalar> FibreMatrix<S> {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn identity_like(&self) -> Self {
        let n = self.dim();
        let entries = (0..n)
            .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        FibreMatrix { object: self.object, morphisms: self.morphisms.clone(), entries }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.dim();
        let mut entries = vec![vec![S::zero(); n]; n];
        for (i, row) in self.entries.iter().enumerate() {
            for (k, a) in row.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (j, b) in other.entries[k].iter().enumerate() {
                    if !b.is_zero() {
                        entries[i][j] = entries[i][j].clone() + a.clone() * b.clone();
                    }
                }
            }
        }
        FibreMatrix { object: self.object, morphisms: self.morphisms.clone(), entries }
    }

    pub fn power(&self, n: usize) -> Self {
        (0..n).fold(self.identity_like(), |acc, _| acc.mul(self))
    }

    /// `Σ c_i M_i` for matrices on the same fibre.
    pub fn combine(parts: &[(S, &FibreMatrix<S>)]) -> Self {
        let first = parts[0].1;
        let n = first.dim();
        let mut entries = vec![vec![S::zero(); n]; n];
        for (c, m) in parts {
            for (i, row) in m.entries.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    entries[i][j] = entries[i][j].clone() + c.clone() * v.clone();
                }
            }
        }
        FibreMatrix { object: first.object, morphisms: first.morphisms.clone(), entries }
    }

    pub fn scaled(&self, c: &S) -> Self {
        let entries = self.entries.iter().map(|r| r.iter().map(|v| v.clone() * c.clone()).collect()).collect();
        FibreMatrix { object: self.object, morphisms: self.morphisms.clone(), entries }
    }

    pub fn row_sums(&self) -> Vec<S> {
        self.entries.iter().map(|r| scalar::sum(r.iter().cloned())).collect()
    }

    pub fn is_stochastic(&self, tol: Tolerance) -> bool {
        self.entries.iter().all(|r| r.iter().all(scalar::zero_or_positive))
            && self.row_sums().iter().all(|s| scalar::is_one(s, tol))
    }

    /// `max_{i,j} Σ_k |M_ik − M_jk|`.
    pub fn max_pairwise_distance(&self) -> S {
        let n = self.dim();
        let mut best = S::zero();
        for i in 0..n {
            for j in i + 1..n {
                let d = scalar::sum(
                    self.entries[i].iter().zip(&self.entries[j]).map(|(a, b)| (a.clone() - b.clone()).abs()),
                );
                best = scalar::max_of(best, d);
            }
        }
        best
    }

    pub fn approx_eq(&self, other: &Self, tol: Tolerance) -> bool {
        self.morphisms == other.morphisms
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.iter().zip(b).all(|(u, v)| u.approx_eq(v, tol)))
    }
}

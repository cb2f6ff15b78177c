//! Random walks in random environment generated by a group action.
//!
//! A map `θ: X → P(G)` and a point `x ∈ X` give the environment
//! `µ^g = θ(g⁻¹x)`; the walk moves `g ⇝ gh` with `h ~ µ^g`. On the action
//! groupoid the same walk is the fibre chain of the operator with system
//! `θ^x = θ(x)` read on `Γ^x ≅ G`.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boundary::{fibrewise_report, FibrewiseReport, ProfileMode};
use crate::error::{Error, Result};
use crate::group_walk::{group_total_variation, left_translate, FiniteGroup, GroupMeasure, GroupOracle};
use crate::groupoid::{ActionSpec, FiniteGroupoid, ObjectId};
use crate::measure::{FibredSystem, Measure, ObjectMeasure};
use crate::operator::EquivariantOperator;
use crate::scalar::{Scalar, Tolerance};

/// Increment distributions `g ↦ µ^g`, defined on a finite set of states.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<E, S> {
    increments: BTreeMap<E, GroupMeasure<E, S>>,
}

impl<E: Clone + Ord + std::fmt::Display, S: Scalar> Environment<E, S> {
    pub fn new(increments: BTreeMap<E, GroupMeasure<E, S>>, tol: Tolerance) -> Result<Self> {
        for (g, mu) in &increments {
            if !mu.is_probability(tol) {
                return Err(Error::NotProbability {
                    object: None,
                    total: format!("{} (increment distribution at {g})", mu.total_mass()),
                });
            }
        }
        Ok(Environment { increments })
    }

    pub fn increment_at(&self, g: &E) -> Option<&GroupMeasure<E, S>> {
        self.increments.get(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&E, &GroupMeasure<E, S>)> + '_ {
        self.increments.iter()
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }
}

impl<E: Clone + Ord + std::fmt::Display + std::hash::Hash, S: Scalar> Environment<E, S> {
    /// The environment `increment` restricted to the states reachable from
    /// `start` in at most `radius` steps.
    pub fn reachable_ball<G, F>(oracle: &G, start: &E, radius: usize, increment: F, tol: Tolerance) -> Result<Self>
    where
        G: GroupOracle<Element = E>,
        F: Fn(&E) -> GroupMeasure<E, S>,
    {
        let mut increments = BTreeMap::new();
        let mut queue = VecDeque::from([(oracle.canonicalize(start), 0usize)]);
        while let Some((g, depth)) = queue.pop_front() {
            if increments.contains_key(&g) {
                continue;
            }
            let mu = increment(&g);
            if depth < radius {
                for h in mu.support() {
                    queue.push_back((oracle.multiply(&g, h), depth + 1));
                }
            }
            increments.insert(g, mu);
        }
        Self::new(increments, tol)
    }
}

fn check_theta<S: Scalar>(action: &ActionSpec, theta: &[GroupMeasure<usize, S>], tol: Tolerance) -> Result<()> {
    if theta.len() != action.num_objects() {
        return Err(Error::Mismatch(format!(
            "theta has {} measures for {} points",
            theta.len(),
            action.num_objects()
        )));
    }
    let order = action.group().order();
    for (x, mu) in theta.iter().enumerate() {
        if let Some(h) = mu.support().find(|h| **h >= order) {
            return Err(Error::InvalidInput(format!("theta(x{x}) charges {h}, outside a group of order {order}")));
        }
        if !mu.is_probability(tol) {
            return Err(Error::NotProbability { object: Some(ObjectId(x)), total: mu.total_mass().to_string() });
        }
    }
    Ok(())
}

/// `µ^g = θ(g⁻¹x)` for every `g` in the (finite) acting group.
pub fn environment_of<S: Scalar>(
    action: &ActionSpec,
    theta: &[GroupMeasure<usize, S>],
    x: ObjectId,
    tol: Tolerance,
) -> Result<Environment<usize, S>> {
    check_theta(action, theta, tol)?;
    let group = action.group();
    let increments = (0..group.order())
        .map(|g| (g, theta[action.act(group.inverse(g), x.0)].clone()))
        .collect();
    Environment::new(increments, tol)
}

/// `x ↦ env_θ(x)` for every point.
pub fn environment_field<S: Scalar>(
    action: &ActionSpec,
    theta: &[GroupMeasure<usize, S>],
    tol: Tolerance,
) -> Result<Vec<Environment<usize, S>>> {
    (0..action.num_objects()).map(|x| environment_of(action, theta, ObjectId(x), tol)).collect()
}

/// Checks `env(gx)` at `g′` against `env(x)` at `g⁻¹g′`; returns the first
/// failing `(g, x, g′)`.
pub fn equivariance_violation<S: Scalar>(
    action: &ActionSpec,
    field: &[Environment<usize, S>],
) -> Option<(usize, usize, usize)> {
    let group = action.group();
    for x in 0..action.num_objects() {
        for g in 0..group.order() {
            for gp in 0..group.order() {
                let lhs = field[action.act(g, x)].increment_at(&gp);
                let rhs = field[x].increment_at(&group.multiply(group.inverse(g), gp));
                if lhs != rhs {
                    return Some((g, x, gp));
                }
            }
        }
    }
    None
}

/// The system `θ^x = θ(x)` on the action groupoid, `(h, x) ↔ h`.
pub fn action_system<S: Scalar>(
    groupoid: &FiniteGroupoid,
    theta: &[GroupMeasure<usize, S>],
    tol: Tolerance,
) -> Result<FibredSystem<S>> {
    let action = groupoid
        .action_spec()
        .ok_or_else(|| Error::InvalidInput("groupoid is not an action groupoid".into()))?;
    check_theta(&action, theta, tol)?;
    let fibres = groupoid
        .objects()
        .map(|x| {
            Measure::from_masses(
                theta[x.0].iter().map(|(h, w)| (groupoid.action_morphism(*h, x).expect("h in group"), w.clone())),
            )
        })
        .collect();
    FibredSystem::new(groupoid, fibres)
}

pub fn action_operator<S: Scalar>(
    groupoid: Arc<FiniteGroupoid>,
    theta: &[GroupMeasure<usize, S>],
    tol: Tolerance,
) -> Result<EquivariantOperator<S>> {
    let system = action_system(&groupoid, theta, tol)?;
    EquivariantOperator::from_system(groupoid, system, tol)
}

/// The fibre chain over `x` built two ways, both indexed by group element.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreEquivalence<S> {
    pub object: ObjectId,
    /// From the equivariant operator on the action groupoid.
    pub from_groupoid: Vec<Vec<S>>,
    /// From `π^g = g·µ^g` with `µ = env_θ(x)`.
    pub from_environment: Vec<Vec<S>>,
}

impl<S: Scalar> FibreEquivalence<S> {
    pub fn agrees(&self, tol: Tolerance) -> bool {
        self.from_groupoid
            .iter()
            .zip(&self.from_environment)
            .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(u, v)| u.approx_eq(v, tol)))
    }
}

pub fn fibre_operator_equivalence<S: Scalar>(
    groupoid: &Arc<FiniteGroupoid>,
    theta: &[GroupMeasure<usize, S>],
    x: ObjectId,
    tol: Tolerance,
) -> Result<FibreEquivalence<S>> {
    let action = groupoid
        .action_spec()
        .ok_or_else(|| Error::InvalidInput("groupoid is not an action groupoid".into()))?;
    let order = action.group().order();

    let op = action_operator(groupoid.clone(), theta, tol)?;
    let fm = op.fibre_matrix(x);
    let label = |m| groupoid.action_label(m).expect("action groupoid").0;
    let mut from_groupoid = vec![vec![S::zero(); order]; order];
    for (i, row) in fm.entries.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            from_groupoid[label(fm.morphisms[i])][label(fm.morphisms[j])] = v.clone();
        }
    }

    let env = environment_of(&action, theta, x, tol)?;
    let oracle = FiniteGroup(action.group().clone());
    let mut from_environment = vec![vec![S::zero(); order]; order];
    for (g, mu) in env.iter() {
        for (gh, w) in left_translate(&oracle, g, mu).iter() {
            from_environment[*g][*gh] = w.clone();
        }
    }
    Ok(FibreEquivalence { object: x, from_groupoid, from_environment })
}

/// `‖g·θ(g⁻¹x) − θ(x)‖`, the discrepancy at `(g, x)` computed on the group.
pub fn environment_discrepancy<S: Scalar>(
    action: &ActionSpec,
    theta: &[GroupMeasure<usize, S>],
    g: usize,
    x: ObjectId,
) -> S {
    let oracle = FiniteGroup(action.group().clone());
    let src = action.act(action.group().inverse(g), x.0);
    group_total_variation(&left_translate(&oracle, &g, &theta[src]), &theta[x.0])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSample<E> {
    pub states: Vec<E>,
    pub seed: u64,
    pub stream: u64,
}

fn draw<E: Clone, S: Scalar>(rng: &mut ChaCha8Rng, mu: &GroupMeasure<E, S>) -> E
where
    E: Ord,
{
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (h, w) in mu.iter() {
        acc += w.as_f64();
        if u < acc {
            return h.clone();
        }
        last = Some(h);
    }
    // Rounding can leave the cumulative sum just under one.
    last.expect("probability measure has support").clone()
}

/// One path from the generator `ChaCha8(seed)` on stream `stream`.
pub fn sample_path_stream<G: GroupOracle, S: Scalar>(
    oracle: &G,
    env: &Environment<G::Element, S>,
    start: &G::Element,
    steps: usize,
    seed: u64,
    stream: u64,
) -> Result<PathSample<G::Element>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut states = Vec::with_capacity(steps + 1);
    let mut g = oracle.canonicalize(start);
    states.push(g.clone());
    for _ in 0..steps {
        let mu = env.increment_at(&g).ok_or_else(|| Error::UndefinedIncrement(g.to_string()))?;
        g = oracle.multiply(&g, &draw(&mut rng, mu));
        states.push(g.clone());
    }
    Ok(PathSample { states, seed, stream })
}

pub fn sample_rwre_path<G: GroupOracle, S: Scalar>(
    oracle: &G,
    env: &Environment<G::Element, S>,
    start: &G::Element,
    steps: usize,
    seed: u64,
) -> Result<PathSample<G::Element>> {
    sample_path_stream(oracle, env, start, steps, seed, 0)
}

/// Empirical law of the `steps`-th state over `samples` paths; path `i`
/// uses stream `i`, so the result does not depend on the thread count.
pub fn empirical_distribution<G: GroupOracle, S: Scalar>(
    oracle: &G,
    env: &Environment<G::Element, S>,
    start: &G::Element,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<BTreeMap<G::Element, f64>> {
    let counts = (0..samples as u64)
        .into_par_iter()
        .try_fold(BTreeMap::new, |mut acc: BTreeMap<G::Element, usize>, i| {
            let path = sample_path_stream(oracle, env, start, steps, seed, i)?;
            *acc.entry(path.states[steps].clone()).or_default() += 1;
            Ok::<_, Error>(acc)
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            Ok(a)
        })?;
    Ok(counts.into_iter().map(|(k, v)| (k, v as f64 / samples as f64)).collect())
}

/// Exact law of the `steps`-th state.
pub fn exact_distribution<G: GroupOracle, S: Scalar>(
    oracle: &G,
    env: &Environment<G::Element, S>,
    start: &G::Element,
    steps: usize,
) -> Result<GroupMeasure<G::Element, S>> {
    let mut law: GroupMeasure<G::Element, S> = GroupMeasure::dirac(oracle.canonicalize(start));
    for _ in 0..steps {
        let mut next = GroupMeasure::zero();
        for (g, w) in law.iter() {
            let mu = env.increment_at(g).ok_or_else(|| Error::UndefinedIncrement(g.to_string()))?;
            for (h, v) in mu.iter() {
                next.add_mass(oracle.multiply(g, h), w.clone() * v.clone());
            }
        }
        law = next;
    }
    Ok(law)
}

/// `Σ_g |empirical(g) − exact(g)|`.
pub fn empirical_total_variation<E: Ord + Clone, S: Scalar>(
    empirical: &BTreeMap<E, f64>,
    exact: &GroupMeasure<E, S>,
) -> f64 {
    let mut total: f64 = exact.iter().map(|(g, w)| (empirical.get(g).copied().unwrap_or(0.0) - w.as_f64()).abs()).sum();
    total += empirical.iter().filter(|(g, _)| exact.mass(g).is_zero()).map(|(_, v)| v).sum::<f64>();
    total
}

/// CSV `element,empirical_mass,exact_mass,abs_diff` over the union of supports.
pub fn histogram_csv<E: Ord + Clone + std::fmt::Display, S: Scalar>(
    empirical: &BTreeMap<E, f64>,
    exact: &GroupMeasure<E, S>,
) -> String {
    let mut keys: Vec<&E> = exact.support().chain(empirical.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut out = String::from("element,empirical_mass,exact_mass,abs_diff\n");
    for g in keys {
        let e = empirical.get(g).copied().unwrap_or(0.0);
        let x = exact.mass(g);
        out.push_str(&format!("{},{},{},{}\n", g, e, x, (e - x.as_f64()).abs()));
    }
    out
}

/// Fibrewise 0-2 report of the action-groupoid operator, one row per
/// environment `env_θ(x)`.
pub fn rwre_tail_report<S: Scalar>(
    action: &ActionSpec,
    theta: &[GroupMeasure<usize, S>],
    kappa: &ObjectMeasure<S>,
    horizon: usize,
    mode: ProfileMode,
    threshold: f64,
    tol: Tolerance,
) -> Result<FibrewiseReport<S>> {
    let groupoid = Arc::new(FiniteGroupoid::from_action(action));
    let op = action_operator(groupoid, theta, tol)?;
    fibrewise_report(&op, kappa, horizon, mode, threshold)
}

//! Seeded random instances and the standard small examples used by the
//! test suites and the CLI.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::amenability::SequenceProvider;
use crate::group_walk::GroupMeasure;
use crate::groupoid::{ActionSpec, FiniteGroupoid, GroupTable, MorphismId, PartitionSpec};
use crate::measure::{reference_measure, FibredSystem, Measure, ObjectMeasure};
use crate::operator::EquivariantOperator;
use crate::scalar::{Scalar, Tolerance};

/// Small groups used to build random instances, largest order 8.
pub fn group_catalog() -> Vec<GroupTable> {
    let c2 = GroupTable::cyclic(2);
    vec![
        GroupTable::cyclic(1),
        c2.clone(),
        GroupTable::cyclic(3),
        GroupTable::cyclic(4),
        GroupTable::product(&c2, &c2),
        GroupTable::cyclic(5),
        GroupTable::symmetric(3),
        GroupTable::cyclic(6),
        GroupTable::cyclic(8),
        GroupTable::product(&c2, &GroupTable::cyclic(4)),
        GroupTable::product(&GroupTable::product(&c2, &c2), &c2),
    ]
}

/// The transitive groupoid `H × (b × b)`: morphism `(h, z, x)` goes from `x`
/// to `z`, and `(h, z, y)(k, y, x) = (hk, z, x)`.
pub fn transitive_groupoid(vertex: &GroupTable, objects: usize) -> FiniteGroupoid {
    let b = objects;
    let id = |h: usize, z: usize, x: usize| h * b * b + z * b + x;
    let m = vertex.order() * b * b;
    let (mut source, mut target, mut inverse) = (vec![0; m], vec![0; m], vec![0; m]);
    let mut compose = vec![vec![None; m]; m];
    for h in 0..vertex.order() {
        for z in 0..b {
            for x in 0..b {
                let g = id(h, z, x);
                source[g] = x;
                target[g] = z;
                inverse[g] = id(vertex.inverse(h), x, z);
                for k in 0..vertex.order() {
                    for w in 0..b {
                        compose[g][id(k, x, w)] = Some(id(vertex.multiply(h, k), z, w));
                    }
                }
            }
        }
    }
    let unit = (0..b).map(|x| id(vertex.identity(), x, x)).collect();
    FiniteGroupoid::from_tables(source, target, unit, inverse, compose).expect("well-formed tables")
}

/// A random groupoid with at most `max_objects` objects and fibres of at
/// most `max_fibre` morphisms. Mixes action groupoids, pair groupoids,
/// products of groups with pair groupoids, and randomly relabelled tables.
pub fn random_groupoid<R: Rng + ?Sized>(rng: &mut R, max_objects: usize, max_fibre: usize) -> FiniteGroupoid {
    assert!(max_objects >= 1 && max_fibre >= 1);
    let catalog: Vec<GroupTable> = group_catalog().into_iter().filter(|g| g.order() <= max_fibre).collect();
    let g = match rng.gen_range(0..4) {
        0 => {
            let mut parts = Vec::new();
            let mut budget = rng.gen_range(1..=max_objects);
            while budget > 0 {
                let b = rng.gen_range(1..=budget.min(max_fibre));
                let fits: Vec<&GroupTable> = catalog.iter().filter(|h| h.order() * b <= max_fibre).collect();
                let h = fits.choose(rng).expect("trivial group fits");
                parts.push(transitive_groupoid(h, b));
                budget -= b;
            }
            FiniteGroupoid::disjoint_union(&parts)
        }
        1 => {
            let group = catalog.choose(rng).unwrap().clone();
            let subgroups = group.subgroups();
            let mut parts = Vec::new();
            let mut objects = 0;
            loop {
                let h = subgroups.choose(rng).unwrap();
                let cosets = group.order() / h.len();
                if objects + cosets > max_objects {
                    if parts.is_empty() {
                        continue;
                    }
                    break;
                }
                parts.push(ActionSpec::on_cosets(group.clone(), h));
                objects += cosets;
                if rng.gen_bool(0.4) {
                    break;
                }
            }
            FiniteGroupoid::from_action(&ActionSpec::disjoint_union(&parts).expect("same group"))
        }
        2 => {
            let n = rng.gen_range(1..=max_objects);
            let mut objects: Vec<usize> = (0..n).collect();
            objects.shuffle(rng);
            let mut blocks = Vec::new();
            let mut rest = &objects[..];
            while !rest.is_empty() {
                let size = rng.gen_range(1..=rest.len().min(max_fibre));
                blocks.push(rest[..size].to_vec());
                rest = &rest[size..];
            }
            FiniteGroupoid::from_partition(&PartitionSpec::new(blocks).expect("partition"))
        }
        _ => FiniteGroupoid::from_group(catalog.choose(rng).unwrap()),
    };
    if rng.gen_bool(0.5) {
        let mut perm: Vec<usize> = (0..g.num_morphisms()).collect();
        perm.shuffle(rng);
        g.relabel(&perm).expect("permutation")
    } else {
        g
    }
}

fn random_weights<R: Rng + ?Sized, S: Scalar>(rng: &mut R, n: usize, full_support: bool) -> Vec<S> {
    loop {
        let w: Vec<i64> = (0..n)
            .map(|_| if full_support { rng.gen_range(1..=9) } else { rng.gen_range(0..=4) * rng.gen_range(0..=2) })
            .collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return w.into_iter().map(|v| S::ratio(v, total)).collect();
        }
    }
}

/// A random probability measure on each fibre, with small-integer weights.
pub fn random_system<R: Rng + ?Sized, S: Scalar>(
    rng: &mut R,
    groupoid: &FiniteGroupoid,
    full_support: bool,
) -> FibredSystem<S> {
    let fibres = groupoid
        .objects()
        .map(|x| {
            let fibre = groupoid.fibre(x);
            let w = random_weights::<R, S>(rng, fibre.len(), full_support);
            Measure::from_masses(fibre.iter().copied().zip(w))
        })
        .collect();
    FibredSystem::new(groupoid, fibres).expect("supported on fibres")
}

pub fn random_operator<R: Rng + ?Sized, S: Scalar>(
    rng: &mut R,
    groupoid: &Arc<FiniteGroupoid>,
    full_support: bool,
) -> EquivariantOperator<S> {
    let system = random_system(rng, groupoid, full_support);
    EquivariantOperator::from_system(groupoid.clone(), system, Tolerance::default()).expect("probability system")
}

/// A random probability measure on all morphisms (possibly sparse).
pub fn random_measure<R: Rng + ?Sized, S: Scalar>(rng: &mut R, groupoid: &FiniteGroupoid) -> Measure<S> {
    let w = random_weights::<R, S>(rng, groupoid.num_morphisms(), false);
    Measure::from_masses(groupoid.morphisms().zip(w))
}

/// A random probability measure supported in one fibre.
pub fn random_fibre_measure<R: Rng + ?Sized, S: Scalar>(rng: &mut R, groupoid: &FiniteGroupoid) -> Measure<S> {
    let x = crate::groupoid::ObjectId(rng.gen_range(0..groupoid.num_objects()));
    let fibre = groupoid.fibre(x);
    let w = random_weights::<R, S>(rng, fibre.len(), false);
    Measure::from_masses(fibre.iter().copied().zip(w))
}

/// Strictly positive integer object weights.
pub fn random_kappa<R: Rng + ?Sized, S: Scalar>(rng: &mut R, objects: usize) -> ObjectMeasure<S> {
    ObjectMeasure::new((0..objects).map(|_| S::from_count(rng.gen_range(1..=4))).collect()).expect("positive")
}

/// `m̂ = λ⋆κ / ‖λ⋆κ‖` for a random positive `κ`.
pub fn random_reference<R: Rng + ?Sized, S: Scalar>(rng: &mut R, groupoid: &FiniteGroupoid) -> Measure<S> {
    let kappa = random_kappa(rng, groupoid.num_objects());
    reference_measure(groupoid, &kappa).expect("positive kappa")
}

/// A function on morphisms with small integer values.
pub fn random_function<R: Rng + ?Sized, S: Scalar>(rng: &mut R, groupoid: &FiniteGroupoid) -> Vec<S> {
    groupoid.morphisms().map(|_| S::ratio(rng.gen_range(-5..=5), 1)).collect()
}

/// A random action of a catalog group on at most `max_points` points.
pub fn random_action<R: Rng + ?Sized>(rng: &mut R, groups: &[GroupTable], max_points: usize) -> ActionSpec {
    let group = groups.choose(rng).expect("non-empty catalog").clone();
    let subgroups = group.subgroups();
    let mut parts = Vec::new();
    let mut points = 0;
    loop {
        let h = subgroups.choose(rng).unwrap();
        let cosets = group.order() / h.len();
        if points + cosets > max_points {
            if parts.is_empty() {
                continue;
            }
            break;
        }
        parts.push(ActionSpec::on_cosets(group.clone(), h));
        points += cosets;
        if rng.gen_bool(0.5) {
            break;
        }
    }
    ActionSpec::disjoint_union(&parts).expect("same group")
}

/// `θ(x)` random on the acting group for each point.
pub fn random_theta<R: Rng + ?Sized, S: Scalar>(
    rng: &mut R,
    action: &ActionSpec,
    full_support: bool,
) -> Vec<GroupMeasure<usize, S>> {
    let order = action.group().order();
    (0..action.num_objects())
        .map(|_| GroupMeasure::from_masses((0..order).zip(random_weights::<R, S>(rng, order, full_support))))
        .collect()
}

/// The group groupoid of `Z_2` with `θ = δ_1`: the walk alternates.
pub fn z2_flip<S: Scalar>() -> EquivariantOperator<S> {
    let g = Arc::new(FiniteGroupoid::from_group(&GroupTable::cyclic(2)));
    let sys = FibredSystem::new(&g, vec![Measure::dirac(MorphismId(1))]).expect("fibre of the unit");
    EquivariantOperator::from_system(g, sys, Tolerance::exact()).expect("probability")
}

/// `Z_2` acting on two points by swapping them.
pub fn swap_action() -> ActionSpec {
    ActionSpec::new(GroupTable::cyclic(2), vec![vec![0, 1], vec![1, 0]]).expect("left action")
}

/// Group groupoid of `Z_4` with `P_n` uniform on `{0, …, min(n, 3)}`.
pub fn z4_prefix_provider<S: Scalar>(horizon: usize) -> SequenceProvider<S> {
    SequenceProvider::fibre_prefix(Arc::new(FiniteGroupoid::from_group(&GroupTable::cyclic(4))), horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::verify_axioms;
    use crate::scalar::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transitive_groupoids_are_groupoids() {
        for h in group_catalog().iter().take(5) {
            for b in 1..=3 {
                let g = transitive_groupoid(h, b);
                assert!(verify_axioms(&g).is_empty(), "{:?}", verify_axioms(&g).violations);
                assert_eq!(g.max_fibre_len(), h.order() * b);
            }
        }
    }

    #[test]
    fn random_groupoids_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let g = random_groupoid(&mut rng, 6, 8);
            assert!(g.num_objects() <= 6 && g.max_fibre_len() <= 8);
            assert!(verify_axioms(&g).is_empty());
            let sys = random_system::<_, Rational>(&mut rng, &g, false);
            assert!(sys.is_probability(Tolerance::exact()));
        }
    }
}

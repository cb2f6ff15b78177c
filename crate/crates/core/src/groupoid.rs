//! Finite groupoids.
//!
//! Morphisms and objects carry dense integer ids. Composition is evaluated by
//! one of three laws: an explicit table, group-action arithmetic on pairs
//! `(g, x)`, or pair arithmetic `(z, y)(y, x) = (z, x)` for equivalence
//! relations. Only the table law can be inconsistent; the other constructors
//! satisfy the groupoid axioms by construction.
//!
//! Conventions follow left actions: `compose(a, b)` is `ab`, defined when
//! `source(a) == target(b)`, and `source(ab) = source(b)`, `target(ab) =
//! target(a)`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MorphismId(pub usize);

impl ObjectId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl MorphismId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl fmt::Display for MorphismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Multiplication table of a finite group, validated on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTable {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl GroupTable {
    /// `table[a][b]` is the product `ab`.
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidGroupTable("empty table".into()));
        }
        for (a, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGroupTable(format!(
                    "row {a} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(&c) = row.iter().find(|&&c| c >= n) {
                return Err(Error::InvalidGroupTable(format!("entry {c} in row {a} out of range")));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| table[e][a] == a && table[a][e] == a))
            .ok_or_else(|| Error::InvalidGroupTable("no two-sided identity".into()))?;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::InvalidGroupTable(format!(
                            "not associative at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        let mut inverse = Vec::with_capacity(n);
        for a in 0..n {
            let inv = (0..n)
                .find(|&b| table[a][b] == identity && table[b][a] == identity)
                .ok_or_else(|| Error::InvalidGroupTable(format!("element {a} has no inverse")))?;
            inverse.push(inv);
        }
        Ok(GroupTable { table, identity, inverse })
    }

    /// Cyclic group `Z_n` written additively on residues `0..n`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n > 0);
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        GroupTable::new(table).expect("cyclic table is a group")
    }

    /// Symmetric group on `k` letters. Elements are permutations in
    /// lexicographic order, with `ab` meaning "apply `b` first".
    pub fn symmetric(k: usize) -> Self {
        let perms = permutations(k);
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).unwrap();
        let table = perms
            .iter()
            .map(|a| {
                perms
                    .iter()
                    .map(|b| index(&b.iter().map(|&i| a[i]).collect()))
                    .collect()
            })
            .collect();
        GroupTable::new(table).expect("symmetric table is a group")
    }

    /// Direct product; the pair `(a, b)` has index `a * |right| + b`.
    pub fn product(left: &GroupTable, right: &GroupTable) -> Self {
        let (m, n) = (left.order(), right.order());
        let table = (0..m * n)
            .map(|p| {
                (0..m * n)
                    .map(|q| left.multiply(p / n, q / n) * n + right.multiply(p % n, q % n))
                    .collect()
            })
            .collect();
        GroupTable::new(table).expect("product of groups is a group")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn multiply(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// All subgroups, each as a sorted element list.
    pub fn subgroups(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
        // Every subgroup is reached by adjoining its generators one at a time.
        let close = |gens: &[usize]| -> Vec<usize> {
            let mut set: BTreeSet<usize> = BTreeSet::from([self.identity]);
            set.extend(gens.iter().copied());
            loop {
                let snapshot: Vec<usize> = set.iter().copied().collect();
                let before = set.len();
                for &a in &snapshot {
                    for &b in &snapshot {
                        set.insert(self.multiply(a, b));
                    }
                }
                if set.len() == before {
                    return snapshot;
                }
            }
        };
        let mut frontier: Vec<Vec<usize>> = vec![close(&[])];
        found.insert(frontier[0].clone());
        while let Some(h) = frontier.pop() {
            for g in 0..n {
                if h.binary_search(&g).is_ok() {
                    continue;
                }
                let mut gens = h.clone();
                gens.push(g);
                let joined = close(&gens);
                if found.insert(joined.clone()) {
                    frontier.push(joined);
                }
            }
        }
        found.into_iter().collect()
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q: Vec<usize> = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// A left action of a finite group on the objects `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpec {
    group: GroupTable,
    action: Vec<Vec<usize>>,
}

impl ActionSpec {
    /// `action[g][x]` is `g·x`.
    pub fn new(group: GroupTable, action: Vec<Vec<usize>>) -> Result<Self> {
        if action.len() != group.order() {
            return Err(Error::NotLeftAction(format!(
                "{} action rows for a group of order {}",
                action.len(),
                group.order()
            )));
        }
        let n = action[0].len();
        for (g, row) in action.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotLeftAction(format!("row {g} has {} entries, expected {n}", row.len())));
            }
            if let Some(&y) = row.iter().find(|&&y| y >= n) {
                return Err(Error::NotLeftAction(format!("g = {g} sends a point to {y}, out of range")));
            }
        }
        let e = group.identity();
        for x in 0..n {
            if action[e][x] != x {
                return Err(Error::NotLeftAction(format!("identity moves x = {x}")));
            }
        }
        for g in 0..group.order() {
            for h in 0..group.order() {
                for x in 0..n {
                    if action[group.multiply(g, h)][x] != action[g][action[h][x]] {
                        return Err(Error::NotLeftAction(format!(
                            "(gh)·x != g·(h·x) for g = {g}, h = {h}, x = {x}"
                        )));
                    }
                }
            }
        }
        Ok(ActionSpec { group, action })
    }

    /// Left multiplication of the group on itself.
    pub fn regular(group: GroupTable) -> Self {
        let action = (0..group.order())
            .map(|g| (0..group.order()).map(|h| group.multiply(g, h)).collect())
            .collect();
        ActionSpec { group, action }
    }

    /// Left multiplication on the cosets of `subgroup`, cosets numbered in
    /// order of their least element.
    pub fn on_cosets(group: GroupTable, subgroup: &[usize]) -> Self {
        let n = group.order();
        let mut coset_of = vec![usize::MAX; n];
        let mut count = 0;
        for g in 0..n {
            if coset_of[g] == usize::MAX {
                for &h in subgroup {
                    coset_of[group.multiply(g, h)] = count;
                }
                count += 1;
            }
        }
        let mut rep = vec![0; count];
        for g in (0..n).rev() {
            rep[coset_of[g]] = g;
        }
        let action = (0..n)
            .map(|g| (0..count).map(|c| coset_of[group.multiply(g, rep[c])]).collect())
            .collect();
        ActionSpec { group, action }
    }

    /// Disjoint union of actions of the same group; objects of later parts are shifted.
    pub fn disjoint_union(parts: &[ActionSpec]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::NotLeftAction("no parts".into()))?;
        if parts.iter().any(|p| p.group != first.group) {
            return Err(Error::NotLeftAction("parts act by different groups".into()));
        }
        let mut action = vec![Vec::new(); first.group.order()];
        let mut offset = 0;
        for p in parts {
            for (g, row) in p.action.iter().enumerate() {
                action[g].extend(row.iter().map(|&y| y + offset));
            }
            offset += p.num_objects();
        }
        Ok(ActionSpec { group: first.group.clone(), action })
    }

    pub fn group(&self) -> &GroupTable {
        &self.group
    }

    pub fn num_objects(&self) -> usize {
        self.action[0].len()
    }

    pub fn act(&self, g: usize, x: usize) -> usize {
        self.action[g][x]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.action
    }

    pub fn is_free(&self) -> bool {
        let e = self.group.identity();
        (0..self.group.order())
            .filter(|&g| g != e)
            .all(|g| (0..self.num_objects()).all(|x| self.act(g, x) != x))
    }

    pub fn orbits(&self) -> PartitionSpec {
        let n = self.num_objects();
        let mut seen = vec![false; n];
        let mut blocks = Vec::new();
        for x in 0..n {
            if seen[x] {
                continue;
            }
            let orbit: BTreeSet<usize> = (0..self.group.order()).map(|g| self.act(g, x)).collect();
            for &y in &orbit {
                seen[y] = true;
            }
            blocks.push(orbit.into_iter().collect());
        }
        PartitionSpec { blocks, num_objects: n }
    }
}

/// A partition of the objects `0..n` into equivalence classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    blocks: Vec<Vec<usize>>,
    num_objects: usize,
}

impl PartitionSpec {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let num_objects: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; num_objects];
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {i} is empty")));
            }
            for &x in block {
                if x >= num_objects {
                    return Err(Error::InvalidPartition(format!(
                        "object {x} out of range 0..{num_objects}"
                    )));
                }
                if std::mem::replace(&mut seen[x], true) {
                    return Err(Error::InvalidPartition(format!("object {x} appears twice")));
                }
            }
        }
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        Ok(PartitionSpec { blocks, num_objects })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_objects(&self) -> usize {
        self.num_objects
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Table(Vec<Option<MorphismId>>),
    Action { group: GroupTable, action: Vec<Vec<usize>> },
    Pair { index: Vec<Option<MorphismId>> },
}

/// Which constructor produced a groupoid, with the data needed to read labels back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupoidKind {
    Table,
    Action,
    Pair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroupoid {
    source: Vec<ObjectId>,
    target: Vec<ObjectId>,
    unit: Vec<MorphismId>,
    inverse: Vec<MorphismId>,
    fibres: Vec<Vec<MorphismId>>,
    position: Vec<usize>,
    law: Law,
}

impl FiniteGroupoid {
    /// Action groupoid: morphism `(g, x)` has id `g * |X| + x`, target `x`
    /// and source `g⁻¹x`; `(g, x)(h, g⁻¹x) = (gh, x)`.
    pub fn from_action(spec: &ActionSpec) -> Self {
        let group = spec.group().clone();
        let n = spec.num_objects();
        let m = group.order() * n;
        let mut source = Vec::with_capacity(m);
        let mut target = Vec::with_capacity(m);
        let mut inverse = Vec::with_capacity(m);
        for g in 0..group.order() {
            let g_inv = group.inverse(g);
            for x in 0..n {
                let s = spec.act(g_inv, x);
                source.push(ObjectId(s));
                target.push(ObjectId(x));
                inverse.push(MorphismId(g_inv * n + s));
            }
        }
        let unit = (0..n).map(|x| MorphismId(group.identity() * n + x)).collect();
        let law = Law::Action { group, action: spec.rows().to_vec() };
        Self::assemble(source, target, unit, inverse, law)
    }

    /// One object, morphisms are the group elements (id = element).
    pub fn from_group(group: &GroupTable) -> Self {
        let action = vec![vec![0]; group.order()];
        let spec = ActionSpec { group: group.clone(), action };
        Self::from_action(&spec)
    }

    /// Principal groupoid of an equivalence relation: morphisms are pairs
    /// `(y, x)` of equivalent objects with target `y` and source `x`, ordered
    /// by target, then source.
    pub fn from_partition(spec: &PartitionSpec) -> Self {
        let n = spec.num_objects();
        let mut block_of = vec![0; n];
        for (b, block) in spec.blocks().iter().enumerate() {
            for &x in block {
                block_of[x] = b;
            }
        }
        let mut source = Vec::new();
        let mut target = Vec::new();
        let mut index = vec![None; n * n];
        for y in 0..n {
            for &x in &spec.blocks()[block_of[y]] {
                index[y * n + x] = Some(MorphismId(source.len()));
                source.push(ObjectId(x));
                target.push(ObjectId(y));
            }
        }
        let inverse = (0..source.len())
            .map(|i| index[source[i].0 * n + target[i].0].expect("symmetric relation"))
            .collect();
        let unit = (0..n).map(|x| index[x * n + x].expect("reflexive relation")).collect();
        Self::assemble(source, target, unit, inverse, Law::Pair { index })
    }

    /// Explicit tables. Only shapes and index ranges are checked here; the
    /// groupoid axioms are left to [`verify_axioms`].
    pub fn from_tables(
        source: Vec<usize>,
        target: Vec<usize>,
        unit: Vec<usize>,
        inverse: Vec<usize>,
        compose: Vec<Vec<Option<usize>>>,
    ) -> Result<Self> {
        let m = source.len();
        let n = unit.len();
        let bad = |what: String| Err(Error::MalformedTables(what));
        if target.len() != m || inverse.len() != m || compose.len() != m {
            return bad(format!(
                "table lengths differ: source {m}, target {}, inverse {}, compose {}",
                target.len(),
                inverse.len(),
                compose.len()
            ));
        }
        if let Some(x) = source.iter().chain(&target).find(|&&x| x >= n) {
            return bad(format!("object {x} out of range 0..{n}"));
        }
        if let Some(g) = unit.iter().chain(&inverse).find(|&&g| g >= m) {
            return bad(format!("morphism {g} out of range 0..{m}"));
        }
        let mut flat = Vec::with_capacity(m * m);
        for (a, row) in compose.iter().enumerate() {
            if row.len() != m {
                return bad(format!("compose row {a} has {} entries, expected {m}", row.len()));
            }
            for entry in row {
                match entry {
                    Some(c) if *c >= m => return bad(format!("compose entry {c} out of range")),
                    e => flat.push(e.map(MorphismId)),
                }
            }
        }
        Ok(Self::assemble(
            source.into_iter().map(ObjectId).collect(),
            target.into_iter().map(ObjectId).collect(),
            unit.into_iter().map(MorphismId).collect(),
            inverse.into_iter().map(MorphismId).collect(),
            Law::Table(flat),
        ))
    }

    fn assemble(
        source: Vec<ObjectId>,
        target: Vec<ObjectId>,
        unit: Vec<MorphismId>,
        inverse: Vec<MorphismId>,
        law: Law,
    ) -> Self {
        let mut fibres: Vec<Vec<MorphismId>> = vec![Vec::new(); unit.len()];
        for (i, t) in target.iter().enumerate() {
            fibres[t.0].push(MorphismId(i));
        }
        for (x, fibre) in fibres.iter_mut().enumerate() {
            if let Some(p) = fibre.iter().position(|&g| g == unit[x]) {
                let u = fibre.remove(p);
                fibre.insert(0, u);
            }
        }
        let mut position = vec![0; source.len()];
        for fibre in &fibres {
            for (p, g) in fibre.iter().enumerate() {
                position[g.0] = p;
            }
        }
        FiniteGroupoid { source, target, unit, inverse, fibres, position, law }
    }

    pub fn kind(&self) -> GroupoidKind {
        match self.law {
            Law::Table(_) => GroupoidKind::Table,
            Law::Action { .. } => GroupoidKind::Action,
            Law::Pair { .. } => GroupoidKind::Pair,
        }
    }

    pub fn num_objects(&self) -> usize {
        self.unit.len()
    }

    pub fn num_morphisms(&self) -> usize {
        self.source.len()
    }

    pub fn objects(&self) -> impl ExactSizeIterator<Item = ObjectId> + '_ {
        (0..self.num_objects()).map(ObjectId)
    }

    pub fn morphisms(&self) -> impl ExactSizeIterator<Item = MorphismId> + '_ {
        (0..self.num_morphisms()).map(MorphismId)
    }

    pub fn source(&self, g: MorphismId) -> ObjectId {
        self.source[g.0]
    }

    pub fn target(&self, g: MorphismId) -> ObjectId {
        self.target[g.0]
    }

    pub fn unit(&self, x: ObjectId) -> MorphismId {
        self.unit[x.0]
    }

    pub fn inverse(&self, g: MorphismId) -> MorphismId {
        self.inverse[g.0]
    }

    pub fn is_unit(&self, g: MorphismId) -> bool {
        self.unit[self.target[g.0].0] == g
    }

    /// The target fibre over `x`, unit first, then ascending ids.
    pub fn fibre(&self, x: ObjectId) -> &[MorphismId] {
        &self.fibres[x.0]
    }

    /// Index of `g` inside the target fibre that contains it.
    pub fn fibre_position(&self, g: MorphismId) -> usize {
        self.position[g.0]
    }

    pub fn max_fibre_len(&self) -> usize {
        self.fibres.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// The product `ab`.
    pub fn compose(&self, a: MorphismId, b: MorphismId) -> Result<MorphismId> {
        if self.source(a) != self.target(b) {
            return Err(Error::NotComposable {
                left: a,
                right: b,
                left_source: self.source(a),
                right_target: self.target(b),
            });
        }
        match &self.law {
            Law::Table(flat) => flat[a.0 * self.num_morphisms() + b.0]
                .ok_or(Error::MissingComposition { left: a, right: b }),
            Law::Action { group, .. } => {
                let n = self.num_objects();
                let (g, x) = (a.0 / n, a.0 % n);
                let h = b.0 / n;
                Ok(MorphismId(group.multiply(g, h) * n + x))
            }
            Law::Pair { index } => {
                let n = self.num_objects();
                let z = self.target(a).0;
                let x = self.source(b).0;
                Ok(index[z * n + x].expect("pair groupoid is transitive on blocks"))
            }
        }
    }

    /// Raw table entry, including entries for non-composable pairs.
    fn table_entry(&self, a: MorphismId, b: MorphismId) -> Option<MorphismId> {
        match &self.law {
            Law::Table(flat) => flat[a.0 * self.num_morphisms() + b.0],
            _ => self.compose(a, b).ok(),
        }
    }

    /// `(g, x)` for action groupoids.
    pub fn action_label(&self, g: MorphismId) -> Option<(usize, ObjectId)> {
        match self.law {
            Law::Action { .. } => {
                let n = self.num_objects();
                Some((g.0 / n, ObjectId(g.0 % n)))
            }
            _ => None,
        }
    }

    /// The morphism `(g, x)` of an action groupoid.
    pub fn action_morphism(&self, g: usize, x: ObjectId) -> Option<MorphismId> {
        match &self.law {
            Law::Action { group, .. } if g < group.order() && x.0 < self.num_objects() => {
                Some(MorphismId(g * self.num_objects() + x.0))
            }
            _ => None,
        }
    }

    pub fn action_spec(&self) -> Option<ActionSpec> {
        match &self.law {
            Law::Action { group, action } => Some(ActionSpec { group: group.clone(), action: action.clone() }),
            _ => None,
        }
    }

    /// The pair `(target, source)` in a principal groupoid.
    pub fn pair_morphism(&self, y: ObjectId, x: ObjectId) -> Option<MorphismId> {
        match &self.law {
            Law::Pair { index } => index.get(y.0 * self.num_objects() + x.0).copied().flatten(),
            _ => None,
        }
    }

    /// Explicit composition table (`None` on non-composable pairs).
    pub fn composition_table(&self) -> Vec<Vec<Option<usize>>> {
        self.morphisms()
            .map(|a| self.morphisms().map(|b| self.table_entry(a, b).map(|c| c.0)).collect())
            .collect()
    }

    /// The same groupoid with the table law.
    pub fn to_table(&self) -> FiniteGroupoid {
        FiniteGroupoid::from_tables(
            self.source.iter().map(|x| x.0).collect(),
            self.target.iter().map(|x| x.0).collect(),
            self.unit.iter().map(|g| g.0).collect(),
            self.inverse.iter().map(|g| g.0).collect(),
            self.composition_table(),
        )
        .expect("tables of a constructed groupoid are well formed")
    }

    /// Renumber morphisms: old id `g` becomes `perm[g]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<FiniteGroupoid> {
        let m = self.num_morphisms();
        let mut check = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut check[p], true)) {
            return Err(Error::MalformedTables("relabeling is not a permutation".into()));
        }
        let mut source = vec![0; m];
        let mut target = vec![0; m];
        let mut inverse = vec![0; m];
        let mut compose = vec![vec![None; m]; m];
        for a in self.morphisms() {
            let pa = perm[a.0];
            source[pa] = self.source(a).0;
            target[pa] = self.target(a).0;
            inverse[pa] = perm[self.inverse(a).0];
            for b in self.morphisms() {
                compose[pa][perm[b.0]] = self.table_entry(a, b).map(|c| perm[c.0]);
            }
        }
        let unit = self.unit.iter().map(|g| perm[g.0]).collect();
        FiniteGroupoid::from_tables(source, target, unit, inverse, compose)
    }

    /// Disjoint union; objects and morphisms of later parts are shifted.
    pub fn disjoint_union(parts: &[FiniteGroupoid]) -> FiniteGroupoid {
        let mut source = Vec::new();
        let mut target = Vec::new();
        let mut unit = Vec::new();
        let mut inverse = Vec::new();
        let total: usize = parts.iter().map(|p| p.num_morphisms()).sum();
        let mut compose = Vec::with_capacity(total);
        let (mut obj_off, mut mor_off) = (0, 0);
        for p in parts {
            source.extend(p.source.iter().map(|x| x.0 + obj_off));
            target.extend(p.target.iter().map(|x| x.0 + obj_off));
            unit.extend(p.unit.iter().map(|g| g.0 + mor_off));
            inverse.extend(p.inverse.iter().map(|g| g.0 + mor_off));
            for row in p.composition_table() {
                let mut full = vec![None; total];
                for (b, c) in row.into_iter().enumerate() {
                    full[b + mor_off] = c.map(|c| c + mor_off);
                }
                compose.push(full);
            }
            obj_off += p.num_objects();
            mor_off += p.num_morphisms();
        }
        FiniteGroupoid::from_tables(source, target, unit, inverse, compose)
            .expect("union of well-formed tables is well formed")
    }
}

/// One failed instance of a groupoid axiom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AxiomViolation {
    DefinedOnNonComposable { left: MorphismId, right: MorphismId },
    MissingComposition { left: MorphismId, right: MorphismId },
    WrongSource { left: MorphismId, right: MorphismId, product: MorphismId },
    WrongTarget { left: MorphismId, right: MorphismId, product: MorphismId },
    UnitEndpoints { object: ObjectId },
    UnitNotFirstInFibre { object: ObjectId },
    RightUnit { morphism: MorphismId },
    LeftUnit { morphism: MorphismId },
    InverseEndpoints { morphism: MorphismId },
    RightInverse { morphism: MorphismId },
    LeftInverse { morphism: MorphismId },
    NotAssociative { a: MorphismId, b: MorphismId, c: MorphismId },
    LeftMultiplicationNotBijective { morphism: MorphismId },
}

impl fmt::Display for AxiomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use AxiomViolation::*;
        match self {
            DefinedOnNonComposable { left, right } => {
                write!(f, "composition defined on non-composable pair ({left}, {right})")
            }
            MissingComposition { left, right } => {
                write!(f, "composable pair ({left}, {right}) has no product")
            }
            WrongSource { left, right, product } => {
                write!(f, "source of product {product} of ({left}, {right}) differs from source of {right}")
            }
            WrongTarget { left, right, product } => {
                write!(f, "target of product {product} of ({left}, {right}) differs from target of {left}")
            }
            UnitEndpoints { object } => write!(f, "unit at {object} does not start and end at {object}"),
            UnitNotFirstInFibre { object } => write!(f, "unit at {object} is not in its target fibre"),
            RightUnit { morphism } => write!(f, "{morphism} times the unit at its source is not {morphism}"),
            LeftUnit { morphism } => write!(f, "the unit at the target of {morphism} times {morphism} is not {morphism}"),
            InverseEndpoints { morphism } => write!(f, "inverse of {morphism} has wrong endpoints"),
            RightInverse { morphism } => write!(f, "{morphism} times its inverse is not the unit at its target"),
            LeftInverse { morphism } => write!(f, "inverse of {morphism} times {morphism} is not the unit at its source"),
            NotAssociative { a, b, c } => write!(f, "associativity fails for ({a}, {b}, {c})"),
            LeftMultiplicationNotBijective { morphism } => {
                write!(f, "left multiplication by {morphism} is not a bijection between fibres")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AxiomReport {
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "all groupoid axioms hold");
        }
        writeln!(f, "{} axiom violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Exhaustive check of the groupoid axioms. Violations are data, not errors.
pub fn verify_axioms(g: &FiniteGroupoid) -> AxiomReport {
    use AxiomViolation::*;
    let mut out = Vec::new();

    if g.kind() == GroupoidKind::Table {
        for a in g.morphisms() {
            for b in g.morphisms() {
                if g.source(a) != g.target(b) && g.table_entry(a, b).is_some() {
                    out.push(DefinedOnNonComposable { left: a, right: b });
                }
            }
        }
    }

    // Products of composable pairs, indexed by (a, position of b in its fibre).
    let mut products: Vec<Vec<Option<MorphismId>>> = Vec::with_capacity(g.num_morphisms());
    for a in g.morphisms() {
        let row = g
            .fibre(g.source(a))
            .iter()
            .map(|&b| match g.compose(a, b) {
                Ok(c) => {
                    let mut ok = true;
                    if g.source(c) != g.source(b) {
                        out.push(WrongSource { left: a, right: b, product: c });
                        ok = false;
                    }
                    if g.target(c) != g.target(a) {
                        out.push(WrongTarget { left: a, right: b, product: c });
                        ok = false;
                    }
                    ok.then_some(c)
                }
                Err(_) => {
                    out.push(MissingComposition { left: a, right: b });
                    None
                }
            })
            .collect();
        products.push(row);
    }
    let product = |a: MorphismId, b: MorphismId| -> Option<MorphismId> {
        if g.source(a) != g.target(b) {
            return None;
        }
        products[a.0][g.fibre_position(b)]
    };

    for x in g.objects() {
        let e = g.unit(x);
        if g.source(e) != x || g.target(e) != x {
            out.push(UnitEndpoints { object: x });
        }
        if g.fibre(x).first() != Some(&e) {
            out.push(UnitNotFirstInFibre { object: x });
        }
    }

    for a in g.morphisms() {
        let (s, t) = (g.source(a), g.target(a));
        if product(a, g.unit(s)) != Some(a) {
            out.push(RightUnit { morphism: a });
        }
        if product(g.unit(t), a) != Some(a) {
            out.push(LeftUnit { morphism: a });
        }
        let inv = g.inverse(a);
        if g.source(inv) != t || g.target(inv) != s {
            out.push(InverseEndpoints { morphism: a });
        } else {
            if product(a, inv) != Some(g.unit(t)) {
                out.push(RightInverse { morphism: a });
            }
            if product(inv, a) != Some(g.unit(s)) {
                out.push(LeftInverse { morphism: a });
            }
        }
    }

    for a in g.morphisms() {
        for &b in g.fibre(g.source(a)) {
            let Some(ab) = product(a, b) else { continue };
            for &c in g.fibre(g.source(b)) {
                let (Some(bc), Some(ab_c)) = (product(b, c), product(ab, c)) else { continue };
                if product(a, bc) != Some(ab_c) {
                    out.push(NotAssociative { a, b, c });
                }
            }
        }
    }

    for a in g.morphisms() {
        let domain = g.fibre(g.source(a));
        let codomain = g.fibre(g.target(a));
        let image: BTreeSet<MorphismId> = domain.iter().filter_map(|&b| product(a, b)).collect();
        let onto = image.len() == domain.len()
            && domain.len() == codomain.len()
            && image.iter().all(|c| g.target(*c) == g.target(a));
        if !onto {
            out.push(LeftMultiplicationNotBijective { morphism: a });
        }
    }

    AxiomReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2_swap() -> FiniteGroupoid {
        let spec = ActionSpec::new(GroupTable::cyclic(2), vec![vec![0, 1], vec![1, 0]]).unwrap();
        FiniteGroupoid::from_action(&spec)
    }

    #[test]
    fn swap_action_groupoid() {
        let g = z2_swap();
        assert_eq!(g.num_morphisms(), 4);
        // (1, x) has id 2, (1, y) has id 3, (0, x) has id 0.
        let (one_x, one_y) = (MorphismId(2), MorphismId(3));
        assert_eq!(g.source(one_x), ObjectId(1));
        assert_eq!(g.compose(one_x, one_y).unwrap(), MorphismId(0));
        assert_eq!(g.compose(one_x, MorphismId(1)).unwrap(), one_x);
        assert!(verify_axioms(&g).is_empty());
    }

    #[test]
    fn trivial_group_action_is_all_units() {
        let spec = ActionSpec::new(GroupTable::cyclic(1), vec![vec![0, 1, 2]]).unwrap();
        let g = FiniteGroupoid::from_action(&spec);
        assert_eq!(g.num_morphisms(), 3);
        assert!(g.morphisms().all(|m| g.is_unit(m)));
    }

    #[test]
    fn z4_translation_fibres() {
        let g = FiniteGroupoid::from_action(&ActionSpec::regular(GroupTable::cyclic(4)));
        assert_eq!(g.num_morphisms(), 16);
        // brute force: count pairs (h, x) with target x
        for x in 0..4 {
            let count = (0..16).filter(|i| i % 4 == x).count();
            assert_eq!(g.fibre(ObjectId(x)).len(), count);
            assert_eq!(count, 4);
        }
    }

    #[test]
    fn rejects_right_action() {
        // S3 acting by a map that is an anti-homomorphism on points.
        let s3 = GroupTable::symmetric(3);
        let right: Vec<Vec<usize>> =
            (0..6).map(|g| (0..6).map(|h| s3.multiply(h, s3.inverse(g))).collect()).collect();
        let ok = ActionSpec::new(s3.clone(), right.clone());
        assert!(ok.is_ok(), "h ↦ h g⁻¹ is a left action");
        let wrong: Vec<Vec<usize>> = (0..6).map(|g| (0..6).map(|h| s3.multiply(h, g)).collect()).collect();
        assert!(matches!(ActionSpec::new(s3, wrong), Err(Error::NotLeftAction(_))));
    }

    #[test]
    fn pair_groupoids() {
        let g = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0, 1]]).unwrap());
        assert_eq!(g.num_morphisms(), 4);
        let ab = g.pair_morphism(ObjectId(0), ObjectId(1)).unwrap();
        let ba = g.pair_morphism(ObjectId(1), ObjectId(0)).unwrap();
        assert_eq!(g.compose(ab, ba).unwrap(), g.unit(ObjectId(0)));

        let discrete = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0], vec![1]]).unwrap());
        assert_eq!(discrete.num_morphisms(), 2);

        let g3 = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0, 1, 2]]).unwrap());
        assert_eq!(g3.num_morphisms(), 9);
        assert!(g3.objects().all(|x| g3.fibre(x).len() == 3));
        assert!(verify_axioms(&g3).is_empty());
    }

    #[test]
    fn partition_validation() {
        assert!(PartitionSpec::new(vec![vec![0], vec![]]).is_err());
        assert!(PartitionSpec::new(vec![vec![0, 0]]).is_err());
        assert!(PartitionSpec::new(vec![vec![0, 2]]).is_err());
    }

    #[test]
    fn group_groupoids() {
        let z2 = FiniteGroupoid::from_group(&GroupTable::cyclic(2));
        assert_eq!(z2.num_objects(), 1);
        assert_eq!(z2.compose(MorphismId(1), MorphismId(1)).unwrap(), MorphismId(0));
        assert_eq!(FiniteGroupoid::from_group(&GroupTable::cyclic(1)).num_morphisms(), 1);
        let s3 = FiniteGroupoid::from_group(&GroupTable::symmetric(3));
        assert_eq!(s3.num_morphisms(), 6);
        assert!(verify_axioms(&s3).is_empty());
    }

    #[test]
    fn group_table_validation() {
        assert!(matches!(GroupTable::new(vec![vec![0, 1], vec![1, 1]]), Err(Error::InvalidGroupTable(_))));
        assert!(GroupTable::new(vec![]).is_err());
        // Latin square with a left identity only
        assert!(GroupTable::new(vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]]).is_err());
    }

    #[test]
    fn compose_errors_name_the_pair() {
        let g = z2_swap();
        let err = g.compose(MorphismId(0), MorphismId(1)).unwrap_err();
        assert!(matches!(err, Error::NotComposable { left: MorphismId(0), right: MorphismId(1), .. }));
        assert!(err.to_string().contains("non-composable pair"));
    }

    #[test]
    fn compose_units_and_inverses() {
        let g = FiniteGroupoid::from_action(&ActionSpec::regular(GroupTable::symmetric(3)));
        for x in g.objects() {
            let e = g.unit(x);
            assert_eq!(g.compose(e, e).unwrap(), e);
        }
        for a in g.morphisms() {
            assert_eq!(g.compose(a, g.inverse(a)).unwrap(), g.unit(g.target(a)));
        }
    }

    #[test]
    fn seeded_defect_is_reported() {
        let g = z2_swap();
        let mut table = g.composition_table();
        // (1, x)(0, y) should be (1, x) = #2; point it at #3, whose target is y.
        table[2][1] = Some(3);
        let bad = FiniteGroupoid::from_tables(
            g.morphisms().map(|m| g.source(m).0).collect(),
            g.morphisms().map(|m| g.target(m).0).collect(),
            g.objects().map(|x| g.unit(x).0).collect(),
            g.morphisms().map(|m| g.inverse(m).0).collect(),
            table,
        )
        .unwrap();
        let report = verify_axioms(&bad);
        assert!(report.violations.contains(&AxiomViolation::WrongTarget {
            left: MorphismId(2),
            right: MorphismId(1),
            product: MorphismId(3)
        }));
    }

    #[test]
    fn table_round_trip_preserves_structure() {
        let g = FiniteGroupoid::from_action(&ActionSpec::regular(GroupTable::cyclic(3)));
        let t = g.to_table();
        assert_eq!(t.kind(), GroupoidKind::Table);
        assert!(verify_axioms(&t).is_empty());
        for a in g.morphisms() {
            for &b in g.fibre(g.source(a)) {
                assert_eq!(g.compose(a, b).unwrap(), t.compose(a, b).unwrap());
            }
        }
    }

    #[test]
    fn fibres_put_unit_first() {
        let g = FiniteGroupoid::from_partition(&PartitionSpec::new(vec![vec![0, 1, 2]]).unwrap());
        for x in g.objects() {
            assert_eq!(g.fibre(x)[0], g.unit(x));
            assert!(g.fibre(x)[1..].windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn free_action_matches_orbit_pairs() {
        let spec = ActionSpec::regular(GroupTable::symmetric(3));
        assert!(spec.is_free());
        let action = FiniteGroupoid::from_action(&spec);
        let pairs = FiniteGroupoid::from_partition(&spec.orbits());
        assert_eq!(action.num_morphisms(), pairs.num_morphisms());
        for x in action.objects() {
            assert_eq!(action.fibre(x).len(), pairs.fibre(x).len());
        }
    }

    #[test]
    fn subgroups_of_s3() {
        let subs = GroupTable::symmetric(3).subgroups();
        // trivial, three of order 2, one of order 3, whole group
        assert_eq!(subs.len(), 6);
        let coset_action = ActionSpec::on_cosets(GroupTable::symmetric(3), &subs[1]);
        assert!(ActionSpec::new(coset_action.group().clone(), coset_action.rows().to_vec()).is_ok());
    }
}

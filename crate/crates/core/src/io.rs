//! JSON file formats for groupoids, fibred systems, action maps and measures.
//!
//! Masses are written `[key, num, den]` (exact; `num`/`den` may be strings
//! for values beyond 64 bits) or `[key, x]` with a float `x` (float mode
//! only).

use std::collections::BTreeSet;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::group_walk::GroupMeasure;
use crate::groupoid::{ActionSpec, FiniteGroupoid, GroupTable, GroupoidKind, MorphismId, ObjectId, PartitionSpec};
use crate::measure::{FibredSystem, Measure};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GroupoidFile {
    Action {
        group: Vec<Vec<usize>>,
        action: Vec<Vec<usize>>,
    },
    Pair {
        blocks: Vec<Vec<usize>>,
    },
    Table {
        source: Vec<usize>,
        target: Vec<usize>,
        compose: Vec<Vec<Option<usize>>>,
        unit: Vec<usize>,
        inverse: Vec<usize>,
    },
}

impl GroupoidFile {
    pub fn build(&self) -> Result<FiniteGroupoid> {
        match self {
            GroupoidFile::Action { group, action } => {
                let spec = ActionSpec::new(GroupTable::new(group.clone())?, action.clone())?;
                Ok(FiniteGroupoid::from_action(&spec))
            }
            GroupoidFile::Pair { blocks } => Ok(FiniteGroupoid::from_partition(&PartitionSpec::new(blocks.clone())?)),
            GroupoidFile::Table { source, target, compose, unit, inverse } => FiniteGroupoid::from_tables(
                source.clone(),
                target.clone(),
                unit.clone(),
                inverse.clone(),
                compose.clone(),
            ),
        }
    }

    pub fn describe(groupoid: &FiniteGroupoid) -> Self {
        match groupoid.kind() {
            GroupoidKind::Action => {
                let spec = groupoid.action_spec().expect("action groupoid");
                GroupoidFile::Action { group: spec.group().rows().to_vec(), action: spec.rows().to_vec() }
            }
            GroupoidKind::Pair => {
                let blocks: BTreeSet<Vec<usize>> = groupoid
                    .objects()
                    .map(|x| {
                        let mut b: Vec<usize> = groupoid.fibre(x).iter().map(|&g| groupoid.source(g).0).collect();
                        b.sort_unstable();
                        b
                    })
                    .collect();
                GroupoidFile::Pair { blocks: blocks.into_iter().collect() }
            }
            GroupoidKind::Table => GroupoidFile::Table {
                source: groupoid.morphisms().map(|g| groupoid.source(g).0).collect(),
                target: groupoid.morphisms().map(|g| groupoid.target(g).0).collect(),
                compose: groupoid.composition_table(),
                unit: groupoid.objects().map(|x| groupoid.unit(x).0).collect(),
                inverse: groupoid.morphisms().map(|g| groupoid.inverse(g).0).collect(),
            },
        }
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub fn parse_groupoid(text: &str) -> Result<FiniteGroupoid> {
    let file: GroupoidFile = serde_json::from_str(text).map_err(|e| schema(format!("groupoid file: {e}")))?;
    file.build()
}

pub fn groupoid_to_json(groupoid: &FiniteGroupoid) -> String {
    serde_json::to_string_pretty(&GroupoidFile::describe(groupoid)).expect("serializable")
}

fn big_int(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) if n.is_i64() => Ok(BigInt::from(n.as_i64().unwrap())),
        Value::Number(n) if n.is_u64() => Ok(BigInt::from(n.as_u64().unwrap())),
        Value::String(s) => BigInt::from_str(s.trim()).map_err(|_| schema(format!("not an integer: {s:?}"))),
        other => Err(schema(format!("expected an integer, found {other}"))),
    }
}

/// Parses `"3/8"`, `"-2"` exactly, and decimal literals such as `"0.25"`
/// in float mode only.
pub fn parse_scalar<S: Scalar>(text: &str) -> Result<S> {
    let t = text.trim();
    let exact = match t.split_once('/') {
        Some((n, d)) => BigInt::from_str(n.trim()).ok().zip(BigInt::from_str(d.trim()).ok()),
        None => BigInt::from_str(t).ok().map(|n| (n, BigInt::from(1))),
    };
    if let Some((n, d)) = exact {
        if d == BigInt::from(0) {
            return Err(schema(format!("zero denominator in {t:?}")));
        }
        return Ok(S::from_rational(&Rational::new(n, d)));
    }
    let x: f64 = t.parse().map_err(|_| schema(format!("not a number: {t:?}")))?;
    float_scalar(x)
}

fn float_scalar<S: Scalar>(x: f64) -> Result<S> {
    if S::EXACT {
        return Err(schema(format!("float value {x} is not accepted in exact mode; write it as [num, den]")));
    }
    if !x.is_finite() {
        return Err(schema(format!("non-finite value {x}")));
    }
    S::from_f64(x).ok_or_else(|| schema(format!("value {x} not representable")))
}

fn mass_entry<S: Scalar>(entry: &Value) -> Result<(usize, S)> {
    let items = entry.as_array().ok_or_else(|| schema(format!("mass entry must be an array, found {entry}")))?;
    let key = items
        .first()
        .and_then(Value::as_u64)
        .ok_or_else(|| schema(format!("mass entry {entry} must start with a non-negative index")))?
        as usize;
    let mass = match items.len() {
        3 => {
            let (n, d) = (big_int(&items[1])?, big_int(&items[2])?);
            if d == BigInt::from(0) {
                return Err(schema(format!("zero denominator in {entry}")));
            }
            S::from_rational(&Rational::new(n, d))
        }
        2 => match &items[1] {
            Value::Number(n) if n.is_i64() || n.is_u64() => S::from_rational(&Rational::from(big_int(&items[1])?)),
            Value::Number(n) => float_scalar(n.as_f64().unwrap())?,
            Value::String(s) => parse_scalar(s)?,
            other => return Err(schema(format!("bad mass {other}"))),
        },
        _ => return Err(schema(format!("mass entry {entry} must be [key, num, den] or [key, x]"))),
    };
    Ok((key, mass))
}

fn mass_list<S: Scalar>(v: &Value) -> Result<Vec<(usize, S)>> {
    v.as_array().ok_or_else(|| schema("\"masses\" must be an array"))?.iter().map(mass_entry).collect()
}

/// `(object, masses)` rows under `key`, one per object `0..n`.
fn per_object_rows<S: Scalar>(text: &str, key: &str, n: usize) -> Result<Vec<Vec<(usize, S)>>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| schema(format!("{key} file: {e}")))?;
    let rows = doc
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| schema(format!("{key} file needs a top-level \"{key}\" array")))?;
    let mut out: Vec<Option<Vec<(usize, S)>>> = vec![None; n];
    for row in rows {
        let x = row
            .get("object")
            .and_then(Value::as_u64)
            .ok_or_else(|| schema(format!("{key} entry without an \"object\" index")))? as usize;
        if x >= n {
            return Err(schema(format!("{key} entry for object {x}, but there are {n} objects")));
        }
        if out[x].is_some() {
            return Err(schema(format!("{key} lists object {x} twice")));
        }
        out[x] = Some(mass_list(row.get("masses").ok_or_else(|| schema("entry without \"masses\""))?)?);
    }
    out.into_iter()
        .enumerate()
        .map(|(x, r)| r.ok_or_else(|| schema(format!("{key} file has no entry for object {x}"))))
        .collect()
}

/// Reads `{"system": [{"object": i, "masses": [...]}, ...]}`. Fibre support
/// is checked; probability is left to the caller.
pub fn parse_system<S: Scalar>(groupoid: &FiniteGroupoid, text: &str) -> Result<FibredSystem<S>> {
    let rows = per_object_rows::<S>(text, "system", groupoid.num_objects())?;
    let mut fibres = Vec::with_capacity(rows.len());
    for row in rows {
        let mut m = Measure::zero();
        for (id, w) in row {
            if id >= groupoid.num_morphisms() {
                return Err(schema(format!("morphism {id} out of range ({} morphisms)", groupoid.num_morphisms())));
            }
            m.add_mass(MorphismId(id), w);
        }
        fibres.push(m);
    }
    FibredSystem::new(groupoid, fibres)
}

/// Reads `{"theta": [{"object": x, "masses": [[element, num, den], ...]}, ...]}`.
pub fn parse_theta<S: Scalar>(action: &ActionSpec, text: &str) -> Result<Vec<GroupMeasure<usize, S>>> {
    let order = action.group().order();
    per_object_rows::<S>(text, "theta", action.num_objects())?
        .into_iter()
        .map(|row| {
            if let Some((h, _)) = row.iter().find(|(h, _)| *h >= order) {
                return Err(schema(format!("element {h} outside a group of order {order}")));
            }
            Ok(GroupMeasure::from_masses(row))
        })
        .collect()
}

/// Reads `{"measure": [[morphism, num, den], ...]}`.
pub fn parse_measure<S: Scalar>(groupoid: &FiniteGroupoid, text: &str) -> Result<Measure<S>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| schema(format!("measure file: {e}")))?;
    let list = doc.get("measure").ok_or_else(|| schema("measure file needs a top-level \"measure\" array"))?;
    let mut m = Measure::zero();
    for (id, w) in mass_list::<S>(list)? {
        if id >= groupoid.num_morphisms() {
            return Err(schema(format!("morphism {id} out of range ({} morphisms)", groupoid.num_morphisms())));
        }
        m.add_mass(MorphismId(id), w);
    }
    Ok(m)
}

fn mass_json<S: Scalar>(key: usize, w: &S) -> Value {
    if S::EXACT {
        let q = Rational::from_str(&w.to_string()).expect("exact scalars print as n/d");
        let num = q.numer().to_i64().map(Value::from).unwrap_or_else(|| Value::from(q.numer().to_string()));
        let den = q.denom().to_i64().map(Value::from).unwrap_or_else(|| Value::from(q.denom().to_string()));
        json!([key, num, den])
    } else {
        json!([key, w.as_f64()])
    }
}

pub fn system_to_json<S: Scalar>(system: &FibredSystem<S>) -> String {
    let rows: Vec<Value> = system
        .fibres()
        .iter()
        .enumerate()
        .map(|(x, m)| {
            json!({
                "object": x,
                "masses": m.iter().map(|(g, w)| mass_json(g.0, w)).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "system": rows })).expect("serializable")
}

pub fn measure_to_json<S: Scalar>(m: &Measure<S>) -> String {
    let list: Vec<Value> = m.iter().map(|(g, w)| mass_json(g.0, w)).collect();
    serde_json::to_string_pretty(&json!({ "measure": list })).expect("serializable")
}

/// Comma-separated object weights, e.g. `1,2,1/3`.
pub fn parse_weights<S: Scalar>(text: &str) -> Result<Vec<S>> {
    text.split(',').map(parse_scalar).collect()
}

/// Object ids are printed `x{n}`; this accepts both `x3` and `3`.
pub fn parse_object(text: &str) -> Result<ObjectId> {
    let t = text.trim();
    t.strip_prefix('x')
        .unwrap_or(t)
        .parse()
        .map(ObjectId)
        .map_err(|_| schema(format!("not an object id: {text:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Tolerance;

    #[test]
    fn groupoid_round_trips() {
        let swap = r#"{"kind":"action","group":[[0,1],[1,0]],"action":[[0,1],[1,0]]}"#;
        let g = parse_groupoid(swap).unwrap();
        assert_eq!(g.num_morphisms(), 4);
        assert_eq!(parse_groupoid(&groupoid_to_json(&g)).unwrap(), g);

        let pair = parse_groupoid(r#"{"kind":"pair","blocks":[[0,2],[1]]}"#).unwrap();
        assert_eq!(pair.num_morphisms(), 5);
        assert_eq!(parse_groupoid(&groupoid_to_json(&pair)).unwrap(), pair);

        let table = g.to_table();
        assert_eq!(parse_groupoid(&groupoid_to_json(&table)).unwrap(), table);
    }

    #[test]
    fn rejects_unknown_kind() {
        let err = parse_groupoid(r#"{"kind":"monoid","blocks":[[0]]}"#).unwrap_err();
        assert!(err.to_string().contains("unknown variant"), "{err}");
        assert!(parse_groupoid(r#"{"kind":"pair","blocks":[[0]],"extra":1}"#).is_err());
    }

    #[test]
    fn system_formats() {
        let g = parse_groupoid(r#"{"kind":"action","group":[[0,1],[1,0]],"action":[[0,1],[1,0]]}"#).unwrap();
        let text = r#"{"system":[{"object":0,"masses":[[0,1,3],[2,"2","3"]]},{"object":1,"masses":[[1,1]]}]}"#;
        let sys = parse_system::<Rational>(&g, text).unwrap();
        assert!(sys.is_probability(Tolerance::exact()));
        assert_eq!(parse_system::<Rational>(&g, &system_to_json(&sys)).unwrap(), sys);

        let float = r#"{"system":[{"object":0,"masses":[[0,0.5],[2,0.5]]},{"object":1,"masses":[[1,1.0]]}]}"#;
        assert!(parse_system::<f64>(&g, float).is_ok());
        let err = parse_system::<Rational>(&g, float).unwrap_err();
        assert!(err.to_string().contains("exact mode"), "{err}");

        let outside = r#"{"system":[{"object":0,"masses":[[1,1,1]]},{"object":1,"masses":[[1,1,1]]}]}"#;
        assert!(matches!(parse_system::<Rational>(&g, outside), Err(Error::OutsideFibre { .. })));
        let missing = r#"{"system":[{"object":0,"masses":[[0,1,1]]}]}"#;
        assert!(parse_system::<Rational>(&g, missing).is_err());
    }

    #[test]
    fn big_values_survive() {
        let g = parse_groupoid(r#"{"kind":"pair","blocks":[[0]]}"#).unwrap();
        let big = "123456789012345678901234567890";
        let text = format!(r#"{{"measure":[[0,"{big}","{big}1"]]}}"#);
        let m = parse_measure::<Rational>(&g, &text).unwrap();
        assert_eq!(parse_measure::<Rational>(&g, &measure_to_json(&m)).unwrap(), m);
    }

    #[test]
    fn scalar_tokens() {
        assert_eq!(parse_scalar::<Rational>("3/8").unwrap(), Rational::ratio(3, 8));
        assert_eq!(parse_scalar::<f64>("0.25").unwrap(), 0.25);
        assert!(parse_scalar::<Rational>("0.25").is_err());
        assert!(parse_scalar::<Rational>("1/0").is_err());
        assert_eq!(parse_weights::<Rational>("1,2").unwrap().len(), 2);
        assert_eq!(parse_object("x3").unwrap(), ObjectId(3));
    }
}

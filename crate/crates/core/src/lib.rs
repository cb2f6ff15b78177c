//! Equivariant Markov operators on finite groupoids: fibred measure systems,
//! discrepancy functionals, the convex-combination construction of operators
//! with asymptotically invariant powers, 0-2 law diagnostics, group walks and
//! random walks in random environment.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix the
//! exact ([`Rational`]) and `f64` backends.

pub mod amenability;
pub mod boundary;
pub mod error;
pub mod fixtures;
pub mod group_walk;
pub mod groupoid;
pub mod io;
pub mod measure;
pub mod operator;
pub mod rwre;
pub mod scalar;

pub use amenability::{
    build_schedule, construct_liouville, isai_trajectory, verify_certificate, ConstructionCaps, LiouvilleCertificate,
    OperatorProvider, Schedule, ScheduleParams, SequenceProvider,
};
pub use boundary::{fibrewise_report, DecayProfile, FibrewiseReport, ProfileMode, Verdict};
pub use error::{Error, Result};
pub use group_walk::{Cyclic, FiniteGroup, FreeGroup2, GroupMeasure, GroupOracle, Integers, Word};
pub use groupoid::{
    verify_axioms, ActionSpec, AxiomReport, AxiomViolation, FiniteGroupoid, GroupTable, GroupoidKind, MorphismId,
    ObjectId, PartitionSpec,
};
pub use measure::{FibredSystem, Measure, ObjectMeasure};
pub use operator::{target_pushforward, EquivariantOperator, FibreMatrix};
pub use rwre::{Environment, PathSample};
pub use scalar::{Rational, Scalar, Tolerance};

pub type MeasureQ = Measure<Rational>;
pub type MeasureF64 = Measure<f64>;
pub type SystemQ = FibredSystem<Rational>;
pub type SystemF64 = FibredSystem<f64>;
pub type OperatorQ = EquivariantOperator<Rational>;
pub type OperatorF64 = EquivariantOperator<f64>;
pub type GroupMeasureQ<E> = GroupMeasure<E, Rational>;
pub type GroupMeasureF64<E> = GroupMeasure<E, f64>;

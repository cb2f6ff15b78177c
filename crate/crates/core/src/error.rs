use thiserror::Error;

use crate::groupoid::{MorphismId, ObjectId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group table: {0}")]
    InvalidGroupTable(String),

    #[error("action map is not a left action: {0}")]
    NotLeftAction(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("malformed groupoid tables: {0}")]
    MalformedTables(String),

    #[error(
        "non-composable pair: source of {left} is {left_source} but target of {right} is {right_target}"
    )]
    NotComposable {
        left: MorphismId,
        right: MorphismId,
        left_source: ObjectId,
        right_target: ObjectId,
    },

    #[error("composition table has no entry for composable pair ({left}, {right})")]
    MissingComposition { left: MorphismId, right: MorphismId },

    #[error("measure charges {morphism}, which lies outside the fibre over {expected}")]
    OutsideFibre { morphism: MorphismId, expected: ObjectId },

    #[error("negative mass {mass} at {morphism}")]
    NegativeMass { morphism: MorphismId, mass: String },

    #[error("not a probability measure: total mass {total}{}", .object.map(|x| format!(" on the fibre over {x}")).unwrap_or_default())]
    NotProbability { object: Option<ObjectId>, total: String },

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("operators live on different groupoids")]
    GroupoidMismatch,

    #[error("requested n = {requested} exceeds the provider horizon {horizon}")]
    HorizonExceeded { requested: usize, horizon: usize },

    #[error(
        "stage {stage}: no admissible index found up to the horizon {horizon}; worst product {worst_product:?} has Delta = {worst_value} > epsilon = {epsilon}"
    )]
    SelectionFailed {
        stage: usize,
        horizon: usize,
        worst_product: Vec<usize>,
        worst_value: String,
        epsilon: String,
    },

    #[error("stage {stage}: {products} products of at most {max_factors} factors exceed the cap {cap}")]
    ProductCapExceeded {
        stage: usize,
        products: u128,
        max_factors: usize,
        cap: usize,
    },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("the empty set has no uniform measure")]
    EmptySet,

    #[error("no increment distribution defined at {0}")]
    UndefinedIncrement(String),

    #[error("convolution support reached {size} elements at n = {n}, over the cap {cap}")]
    SupportCapExceeded { n: usize, size: usize, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the prioritization engine can report.
///
/// Variants are grouped loosely by the module that raises them; the
/// frontdoor maps each one onto a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // domain
    #[error("invalid rating scale [{min}, {max}]: min must be below max and both finite")]
    InvalidScale { min: f64, max: f64 },
    #[error("rating scales differ: [{left_min}, {left_max}] vs [{right_min}, {right_max}]")]
    ScaleMismatch {
        left_min: f64,
        left_max: f64,
        right_min: f64,
        right_max: f64,
    },
    #[error("requirement `{0}` appears in both matrices")]
    DuplicateRequirement(String),
    #[error("cell ({stakeholder}, {requirement}) is already stored")]
    DuplicateCell { stakeholder: String, requirement: String },
    #[error("rating {value} for ({stakeholder}, {requirement}) is outside the scale [{min}, {max}]")]
    RatingOutOfScale {
        stakeholder: String,
        requirement: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("ranks not a permutation: {0}")]
    InvalidRanks(String),
    #[error("stakeholder `{stakeholder}` references unknown role `{role}`")]
    UnknownRole { stakeholder: String, role: String },
    #[error("no influence recorded for role `{role}` of stakeholder `{stakeholder}`")]
    MissingRole { stakeholder: String, role: String },
    #[error("unknown stakeholder `{0}`")]
    UnknownStakeholder(String),
    #[error("unknown requirement `{0}`")]
    UnknownRequirement(String),

    // similarity / selector
    #[error("vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("similarity needs at least 2 requirements, got {0}")]
    TooFewRequirements(usize),
    #[error("requirement `{0}` is not a new requirement")]
    NotNewRequirement(String),
    #[error("stakeholder `{stakeholder}` already rated `{requirement}`")]
    AlreadyRated { stakeholder: String, requirement: String },
    #[error("prediction fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),

    // latent
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("observed cell (user {user}, item {item}) is outside the {n_users}x{n_items} model")]
    UnknownCell {
        user: usize,
        item: usize,
        n_users: usize,
        n_items: usize,
    },
    #[error("cost became non-finite at iteration {iteration}; lower the learning rate")]
    Divergence { iteration: usize },
    #[error("model has not been trained")]
    UntrainedModel,

    // pipeline
    #[error("merged rating matrix holds no elicited ratings")]
    NoElicitedData,

    // evaluation
    #[error("compared collections cover different items: {0}")]
    SetMismatch(String),
    #[error("cannot compute a metric over an empty set")]
    EmptySet,
    #[error("baseline of {baseline} users cannot be compared against {saffron}")]
    InvalidBaseline { baseline: usize, saffron: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("invalid experiment setting: {0}")]
    InvalidSetting(String),
}

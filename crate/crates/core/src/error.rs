use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown catalogue tag `{0}`")]
    Catalogue(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("core function has no declared growth class")]
    Class,
    #[error("empty effective domain: {0}")]
    Domain(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("point {value} outside tabulated range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("path ensemble of {requested} draws exceeds the cap of {cap}")]
    Capacity { requested: u64, cap: u64 },
    #[error("non-finite value at step {step}: {context}")]
    Blowup { step: usize, context: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("no closed-form oracle: {0}")]
    Oracle(String),
    #[error("subgradient control leaves the effective domain of f at path {path}, step {step}")]
    Attainability { path: usize, step: usize },
    #[error("control rejected: {0}")]
    RejectedControl(String),
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate regression at step {step}: design matrix is rank deficient ({detail})")]
    DegenerateRegression { step: usize, detail: String },

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("Riccati factor blew up (|gamma| > {bound:e}) at t = {time}")]
    RiccatiBlowUp { time: f64, bound: f64 },

    #[error("unsupported scenario: {0}")]
    Unsupported(String),

    #[error("scenario error at {location}: {kind}")]
    Scenario { location: String, kind: ScenarioErrorKind },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioErrorKind {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("sign violation for `{field}`: {reason}")]
    SignViolation { field: String, reason: String },
    #[error("malformed value for `{field}`: {reason}")]
    Malformed { field: String, reason: String },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown scenario `{name}`; valid names: {valid}")]
    UnknownBuiltin { name: String, valid: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors that come from scenario validation (mapped to the
    /// CLI's validation exit code).
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Scenario { .. } | Error::InvalidArgument(_) | Error::Unsupported(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

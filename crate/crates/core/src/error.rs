use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain an operation is defined on.
    #[error("{what} = {value} is outside [0, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("signal has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("protocol violation: {0}")]
    Protocol(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input contains no price rows")]
    EmptyInput,

    #[error("line {line}: timestamp {timestamp:?} is earlier than the previous row")]
    Ordering { line: usize, timestamp: String },

    #[error("price {value} at row {row} is outside the scale bounds [{lo}, {hi}]")]
    Range { row: usize, value: f64, lo: f64, hi: f64 },

    #[error("increment {value} at step {step} is outside its declared range [{lower}, {lower} + 1]")]
    Contract { step: usize, value: f64, lower: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

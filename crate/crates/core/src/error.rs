use thiserror::Error;

/// Coarse classification used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data: parameters, files, config values.
    Data,
    /// A numeric routine could not produce an answer.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("price {price} is at or below the full-offshore cost floor {floor}")]
    BelowCostFloor { price: f64, floor: f64 },

    #[error("invalid density grid: {0}")]
    InvalidGrid(String),

    #[error("no equilibrium in bracket [{lo}, {hi}]: residuals {f_lo} and {f_hi} share a sign")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error(
        "market cannot clear on [{lo}, {hi}]: demand/supply are {demand_lo}/{supply_lo} at the low end \
         and {demand_hi}/{supply_hi} at the high end"
    )]
    MarketCannotClear {
        lo: f64,
        hi: f64,
        demand_lo: f64,
        supply_lo: f64,
        demand_hi: f64,
        supply_hi: f64,
    },

    #[error("non-finite slope {value} at t = {t}, price = {price}")]
    NonFinite { t: f64, price: f64, value: f64 },

    #[error("no provider outruns the price decline {slope}: providers do not grow (mu = 0)")]
    NoProviderOutruns { slope: f64 },

    #[error("operation requires a {expected} market")]
    WrongRegime { expected: &'static str },

    #[error("price slope {slope} is positive in a mature market")]
    PositiveSlope { slope: f64 },

    #[error("singular price-slope coefficient at price {price}")]
    SingularSlope { price: f64 },

    #[error("numeric curve mode requires a density grid on the {side} side")]
    MissingGrid { side: &'static str },

    #[error("{0}")]
    Data(String),

    #[error("{path}: line {line}: {msg}")]
    DataAt { path: String, line: u64, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParams(_)
            | Error::Data(_)
            | Error::DataAt { .. }
            | Error::Io { .. } => ErrorKind::Data,
            _ => ErrorKind::Numeric,
        }
    }

    pub(crate) fn domain(what: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            domain: domain.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

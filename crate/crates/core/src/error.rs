use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate component: particle weights sum to zero")]
    DegenerateComponent,

    #[error("component with existence {0} has no particles")]
    EmptyComponent(f64),

    #[error("cardinality too large for exact assignment sum ({size} > cap {cap})")]
    CardinalityTooLarge { size: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

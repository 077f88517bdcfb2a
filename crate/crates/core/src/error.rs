use thiserror::Error;

pub type Result<T> = core::result::Result<T, DvsError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DvsError {
    #[error("matrix has {rows} rows and {cols} columns; need 1 <= rows <= columns")]
    Shape { rows: usize, cols: usize },

    #[error("matrix is numerically rank deficient (rank {rank} < {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },

    #[error("cardinality k = {k} outside the admissible range [{min}, {max}]")]
    Cardinality { k: usize, min: usize, max: usize },

    #[error("column index {index} out of range for {m} columns")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("column index {0} appears more than once")]
    DuplicateIndex(usize),

    #[error("degree {j} out of range for {len} values")]
    Degree { j: usize, len: usize },

    #[error("selected submatrix is numerically singular")]
    Singular,

    #[error("rank-one downdate would make the Gram matrix singular")]
    DegenerateDowndate,

    #[error("conditioning on an event of probability zero")]
    NullEvent,

    #[error("no feasible full-rank selection found")]
    Infeasible,

    #[error("{count} subsets exceed the enumeration cap of {cap}")]
    TooLarge { count: f64, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

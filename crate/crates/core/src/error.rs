use thiserror::Error;

use crate::eigen::Spectrum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),
    #[error("coupling moduli must be nonnegative")]
    NegativeModulus,
    #[error("operation requires a flavour-diagonal model (pure or K), got {0}")]
    NotFlavourDiagonal(&'static str),
}

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("matrix must be square and nonempty, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("eigensolver did not reach residual {target:e} (best {achieved:e})")]
    NoConvergence {
        target: f64,
        achieved: f64,
        best: Box<Spectrum>,
    },
}

#[derive(Debug, Error)]
pub enum EpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("degenerate couplings: {0}")]
    DegenerateCouplings(&'static str),
    #[error("no cross-flavour degeneracy at k = ({0}, {1})")]
    NoDegeneracy(f64, f64),
}

#[derive(Debug, Error)]
pub enum RibbonError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("ribbon needs at least 2 dimer rows, got {0}")]
    TooFewRows(usize),
    #[error("eigensolver failed at k_x = {kx}: {source}")]
    Solver {
        kx: f64,
        #[source]
        source: EigenError,
    },
    #[error("spectrum dimension {got} does not match 6w = {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("empty state selection")]
    EmptySelection,
    #[error("k_x grid is empty")]
    EmptyGrid,
}

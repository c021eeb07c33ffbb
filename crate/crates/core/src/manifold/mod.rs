//! Optional transductive embedding of the feature space before clustering.
//!
//! Training and query points are embedded together; there is no
//! out-of-sample extension, so a model fitted in an embedded space can only
//! predict at the query points it was embedded with.

mod graph;
mod isomap;
mod lle;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub use graph::{connected_components, knn_graph, Neighbor};
pub use isomap::isomap_embed;
pub use lle::{lle_embed, lle_weights};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMethod {
    None,
    Lle,
    Isomap,
}

impl fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Lle => "lle",
            Self::Isomap => "isomap",
        })
    }
}

impl FromStr for EmbeddingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "lle" => Ok(Self::Lle),
            "isomap" => Ok(Self::Isomap),
            _ => Err(Error::InvalidParameter(format!("unknown embedding method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub method: EmbeddingMethod,
    pub k_neighbors: usize,
    pub target_dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { method: EmbeddingMethod::None, k_neighbors: 50, target_dim: 2 }
    }
}

impl EmbeddingConfig {
    pub fn new(method: EmbeddingMethod, k_neighbors: usize, target_dim: usize) -> Self {
        Self { method, k_neighbors, target_dim }
    }

    pub fn is_active(&self) -> bool {
        self.method != EmbeddingMethod::None
    }

    pub(crate) fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.target_dim == 0 || self.target_dim > d {
            return Err(Error::InvalidParameter(format!(
                "target dimension must lie in 1..={d}, got {}",
                self.target_dim
            )));
        }
        if self.k_neighbors == 0 || self.k_neighbors >= n {
            return Err(Error::InvalidParameter(format!(
                "k_neighbors must lie in 1..{n}, got {}",
                self.k_neighbors
            )));
        }
        if self.method == EmbeddingMethod::Lle && self.k_neighbors < self.target_dim + 1 {
            return Err(Error::InvalidParameter(format!(
                "LLE needs k_neighbors >= target_dim + 1 ({} < {})",
                self.k_neighbors,
                self.target_dim + 1
            )));
        }
        if self.target_dim + 1 >= n {
            return Err(Error::InvalidParameter("too few points for the target dimension".into()));
        }
        Ok(())
    }
}

/// Joint embedding of all supplied points, rows in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSpace<T> {
    pub points: Array2<T>,
    pub source_count: usize,
}

/// Embeds `x_all` with the configured method; `None` returns the input.
pub fn embed<T: Scalar>(x_all: ArrayView2<'_, T>, config: &EmbeddingConfig) -> Result<EmbeddedSpace<T>> {
    match config.method {
        EmbeddingMethod::None => Ok(EmbeddedSpace { points: x_all.to_owned(), source_count: x_all.nrows() }),
        EmbeddingMethod::Lle => lle_embed(x_all, config),
        EmbeddingMethod::Isomap => isomap_embed(x_all, config),
    }
}

fn check_finite<T: Scalar>(points: &Array2<T>) -> Result<()> {
    if points.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::EmbeddingFailure("embedding produced non-finite coordinates".into()))
    }
}

/// What a fitted model remembers about its embedding: the settings and the
/// query points (original and embedded coordinates) it may predict at.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState<T> {
    pub config: EmbeddingConfig,
    pub queries: Array2<T>,
    pub embedded_queries: Array2<T>,
}

impl<T: Scalar> EmbeddingState<T> {
    /// Embedded coordinates of a query point, matched exactly.
    pub fn lookup(&self, x: &[T]) -> Option<ArrayView1<'_, T>> {
        self.queries
            .rows()
            .into_iter()
            .position(|q| q.len() == x.len() && q.iter().zip(x).all(|(a, b)| a == b))
            .map(|i| self.embedded_queries.row(i))
    }
}

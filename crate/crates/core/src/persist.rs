//! Versioned JSON documents for fitted models. Every real is written in
//! shortest round-trip decimal form, so loading reproduces the stored
//! values bit for bit.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::estimators::StatisticKind;
use crate::gp::{LfgpModel, RbfHyperparams};
use crate::manifold::{EmbeddingConfig, EmbeddingState};
use crate::{Error, Result, Scalar};

pub const FORMAT: &str = "lfgp-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HyperparamsDoc {
    amplitude: f64,
    length_scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmbeddingDoc {
    config: EmbeddingConfig,
    queries: Vec<Vec<f64>>,
    embedded_queries: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    statistic: StatisticKind,
    hyperparams: HyperparamsDoc,
    jitter: f64,
    centroids: Vec<Vec<f64>>,
    pseudo_observations: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<EmbeddingDoc>,
}

fn rows_of<T: Scalar>(a: &Array2<T>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

fn matrix_of<T: Scalar>(rows: &[Vec<f64>], what: &str) -> Result<Array2<T>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Format(format!("{what}: rows of unequal length")));
    }
    Ok(Array2::from_shape_fn((rows.len(), d), |(i, j)| T::of(rows[i][j])))
}

/// Serializes a model to its JSON document.
pub fn model_to_json<T: Scalar>(model: &LfgpModel<T>) -> Result<String> {
    let hp = model.hyperparams();
    let doc = ModelDoc {
        format: FORMAT.into(),
        version: VERSION,
        statistic: model.statistic(),
        hyperparams: HyperparamsDoc {
            amplitude: hp.amplitude().as_f64(),
            length_scales: hp.length_scales().iter().map(|v| v.as_f64()).collect(),
        },
        jitter: model.jitter().as_f64(),
        centroids: rows_of(model.centroids()),
        pseudo_observations: model.pseudo_observations().iter().map(|v| v.as_f64()).collect(),
        noise: model.noise().map(|v| v.iter().map(|x| x.as_f64()).collect()),
        embedding: model.embedding().map(|e| EmbeddingDoc {
            config: e.config,
            queries: rows_of(&e.queries),
            embedded_queries: rows_of(&e.embedded_queries),
        }),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Rebuilds a model (including its cached factor) from a JSON document.
pub fn model_from_json<T: Scalar>(text: &str) -> Result<LfgpModel<T>> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.format != FORMAT {
        return Err(Error::Format(format!("expected format `{FORMAT}`, found `{}`", doc.format)));
    }
    if doc.version != VERSION {
        return Err(Error::Format(format!("unsupported model version {} (this build reads {VERSION})", doc.version)));
    }
    let hyperparams = RbfHyperparams::new(
        T::of(doc.hyperparams.amplitude),
        doc.hyperparams.length_scales.iter().map(|&v| T::of(v)).collect(),
    )?;
    let embedding = match doc.embedding {
        None => None,
        Some(e) => {
            let queries = matrix_of(&e.queries, "embedding queries")?;
            let embedded_queries = matrix_of(&e.embedded_queries, "embedded queries")?;
            if queries.nrows() != embedded_queries.nrows() {
                return Err(Error::Format("embedding query and coordinate counts differ".into()));
            }
            Some(EmbeddingState { config: e.config, queries, embedded_queries })
        }
    };
    LfgpModel::new(
        hyperparams,
        matrix_of(&doc.centroids, "centroids")?,
        Array1::from_iter(doc.pseudo_observations.iter().map(|&v| T::of(v))),
        doc.statistic,
        T::of(doc.jitter),
        doc.noise.map(|v| v.iter().map(|&x| T::of(x)).collect()),
        embedding,
    )
}

pub fn save_model<T: Scalar>(model: &LfgpModel<T>, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<LfgpModel<T>> {
    model_from_json(&fs::read_to_string(path)?)
}

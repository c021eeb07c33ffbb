use std::fmt::Write;

use lfgp::datasets::{test_grid, true_curve, Generator};
use lfgp::persist::load_model;
use lfgp::{predict_batch, Model, PosteriorPrediction};
use ndarray::Array2;

use super::read_matrix;
use crate::args::PredictArgs;
use crate::error::{CliError, CliResult};
use crate::output::{require_input, write_text};
use crate::svg::{LineChart, Series};

#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub x1: Vec<f64>,
    pub predictions: Vec<PosteriorPrediction<f64>>,
    /// Exact statistic, when the query points are a synthetic grid.
    pub truth: Option<Vec<f64>>,
}

/// The synthetic family whose evaluation grid `x` is, if any.
fn known_grid(x: &Array2<f64>) -> Option<Generator> {
    [Generator::Cube, Generator::Roll]
        .into_iter()
        .find(|&g| x.nrows() > 0 && test_grid(g, x.nrows()).is_ok_and(|grid| grid == *x))
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<PredictOutcome> {
    require_input(&args.model)?;
    if let Some(q) = &args.queries {
        require_input(q)?;
    }
    let model: Model = load_model(&args.model)?;
    let x_star = match (&args.queries, args.grid) {
        (Some(path), _) => read_matrix(path)?,
        (None, Some(kind)) => test_grid(kind, args.n_star)?,
        (None, None) => match model.embedding() {
            Some(state) => state.queries.clone(),
            None => return Err(CliError::Usage("pass --grid or --queries".into())),
        },
    };
    let predictions = predict_batch(&model, x_star.view())?;
    let x1: Vec<f64> = x_star.column(0).to_vec();
    let truth = known_grid(&x_star).map(|_| true_curve(x_star.nrows(), model.statistic()));

    let mut csv = String::from(if truth.is_some() { "x1,mean,variance,true\n" } else { "x1,mean,variance\n" });
    for (i, p) in predictions.iter().enumerate() {
        let _ = write!(csv, "{},{},{}", x1[i], p.mean, p.variance);
        if let Some(t) = &truth {
            let _ = write!(csv, ",{}", t[i]);
        }
        csv.push('\n');
    }
    write_text(&args.out, &csv)?;

    if let Some(path) = &args.plot {
        let statistic = model.statistic();
        let mut chart = LineChart::new(format!("Posterior {statistic}"), "x1", statistic.to_string());
        chart.push(Series::new("posterior mean", x1.iter().zip(&predictions).map(|(&x, p)| (x, p.mean)).collect()));
        if let Some(t) = &truth {
            chart.push(Series::new("true", x1.iter().copied().zip(t.iter().copied()).collect()));
        }
        write_text(path, &chart.render())?;
    }
    eprintln!("wrote {} predictions to {}", predictions.len(), args.out.display());
    Ok(PredictOutcome { x1, predictions, truth })
}

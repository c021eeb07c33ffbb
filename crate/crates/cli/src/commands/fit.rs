use lfgp::datasets::{read_csv, test_grid, Generator};
use lfgp::persist::model_to_json;
use lfgp::{fit, fit_embedded, EmbeddingConfig, FitConfig, FitReport, Model, NoiseModel};
use ndarray::Array2;

use super::read_matrix;
use crate::args::FitArgs;
use crate::error::{CliError, CliResult};
use crate::output::{require_input, write_text};

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: Model,
    pub report: FitReport,
}

fn embedding_queries(args: &FitArgs, generator: &str) -> CliResult<Array2<f64>> {
    if let Some(path) = &args.queries {
        return read_matrix(path);
    }
    let kind = match args.grid {
        Some(kind) => kind,
        None => generator.parse::<Generator>().map_err(|_| {
            CliError::Usage(format!(
                "an embedding needs query points: pass --grid or --queries (dataset generator `{generator}` has no grid)"
            ))
        })?,
    };
    Ok(test_grid(kind, args.n_star)?)
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<FitOutcome> {
    require_input(&args.data)?;
    if let Some(q) = &args.queries {
        require_input(q)?;
    }
    let data = read_csv(&args.data)?;
    let mut config = FitConfig::new(args.n0, args.epsilon, args.statistic)
        .with_seed(args.seed)
        .with_cluster_mode(args.cluster_mode.into())
        .with_noise(if args.noise_free { NoiseModel::NoiseFree } else { NoiseModel::SamplingVariance });
    config.max_outer_iters = args.max_outer_iters;
    config.bootstrap_reps = args.bootstrap_reps;

    let embedding = EmbeddingConfig::new(args.embedding, args.k, args.target_dim);
    let (model, report) = if embedding.is_active() {
        let queries = embedding_queries(args, &data.meta.generator)?;
        fit_embedded(data.x.view(), data.y.view(), queries.view(), &embedding, &config)?
    } else {
        fit(data.x.view(), data.y.view(), &config)?
    };

    write_text(&args.model_out, &model_to_json(&model)?)?;
    let table = format!("{}\n{}\n", FitReport::CSV_HEADER, report.csv_row());
    if let Some(path) = &args.report {
        write_text(path, &table)?;
    }
    print!("{table}");
    Ok(FitOutcome { model, report })
}

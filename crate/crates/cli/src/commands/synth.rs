use lfgp::backtest::{parse_timestamp, synth_rates, RateSeries, SynthConfig};

use crate::args::SynthRatesArgs;
use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

pub fn cmd_synth_rates(args: &SynthRatesArgs) -> CliResult<RateSeries> {
    if !(args.days >= 0.0 && args.days.is_finite()) {
        return Err(CliError::Usage(format!("--days must be non-negative, got {}", args.days)));
    }
    let mut config = SynthConfig { duration_s: (args.days * 86_400.0).round() as i64, step_s: args.step, ..Default::default() };
    if let Some(s) = &args.start {
        config.start = parse_timestamp(s)?;
    }
    if let Some(v) = args.initial_rate {
        config.initial_rate = v;
    }
    if let Some(v) = args.volatility {
        config.volatility = v;
    }
    if let Some(v) = args.drift {
        config.drift = v;
    }
    if let Some(v) = args.pip_size {
        config.pip_size = v;
    }
    if let Some(v) = args.gap_probability {
        config.gap_probability = v;
    }
    if let Some(v) = args.gap_seconds {
        config.gap_s = v;
    }
    let series = synth_rates(&config, args.seed)?;
    write_atomic(&args.out, |tmp| Ok(series.write_csv(tmp)?))?;
    eprintln!("wrote {} quotes to {}", series.len(), args.out.display());
    Ok(series)
}

use timescales_core::rng::RngStream;
use timescales_core::tipping::{basin_of, critical_alpha as fold_alpha, hysteresis_experiment, langevin_run, Basin};

use crate::config::{self, EmptyConfig, TippingHysteresisConfig, TippingRunConfig};
use crate::{to_value, Cli, CliError};

fn basin_label(b: Basin) -> &'static str {
    match b {
        Basin::Low => "low",
        Basin::High => "high",
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg: TippingRunConfig = config::load(cli.config_path())?;
    if let Some(s) = cli.seed_override() {
        cfg.seed = s;
    }
    let mut rng = RngStream::new(cfg.seed);
    let series = langevin_run(&cfg.params, &mut rng)?;

    let mut em = cli.emitter()?;
    match em.format() {
        crate::emit::Format::Csv => {
            em.table(
                "tipping_run",
                "t,T,alpha,basin",
                series.iter().map(|(t, row)| {
                    format!("{t},{},{},{}", row[0], row[1], basin_label(basin_of(row[0])))
                }),
            )?;
        }
        crate::emit::Format::Json => {
            em.series("tipping_run", &["t", "T", "alpha"], &series)?;
        }
    }
    let last = series.last_row().expect("nonempty trajectory");
    println!("final_T={} basin={}", last[0], basin_label(basin_of(last[0])));
    em.finish("tipping run", to_value(&cfg), Some(cfg.seed))?;
    Ok(())
}

pub fn hysteresis(cli: &Cli) -> Result<(), CliError> {
    let mut cfg: TippingHysteresisConfig = config::load(cli.config_path())?;
    if let Some(s) = cli.seed_override() {
        cfg.seed = s;
    }
    let summary = hysteresis_experiment(&cfg.params, cfg.n_seeds, cfg.seed)?;

    let mut em = cli.emitter()?;
    em.json("tipping_hysteresis", &serde_json::to_value(&summary).expect("summary serializes"))?;
    println!(
        "forward_fraction={} return_fraction={} seeds={}",
        summary.forward_fraction, summary.return_fraction, summary.seeds
    );
    em.finish("tipping hysteresis", to_value(&cfg), Some(cfg.seed))?;
    Ok(())
}

pub fn critical_alpha(cli: &Cli) -> Result<(), CliError> {
    let cfg: EmptyConfig = config::load(cli.config_path())?;
    let alpha = fold_alpha();

    let mut em = cli.emitter()?;
    em.json("tipping_critical_alpha", &serde_json::json!({ "critical_alpha": alpha }))?;
    println!("critical_alpha={alpha}");
    em.finish("tipping critical-alpha", to_value(&cfg), None)?;
    Ok(())
}

use serde_json::json;
use timescales_core::exocytosis::{derivatives, phase_metrics, resting_state, simulate};

use crate::config::{self, ExoConfig};
use crate::{to_value, Cli, CliError};

const POOLS: [&str; 8] = ["N1", "N2", "N3", "N4", "N5", "N6", "NF", "NR"];
const SERIES_COLUMNS: [&str; 12] =
    ["t", "N1", "N2", "N3", "N4", "N5", "N6", "NF", "NR", "SR", "C_md", "C_i"];

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg: ExoConfig = config::load(cli.config_path())?;
    let run = simulate(&cfg.protocol, &cfg.params, cfg.variant, cfg.t_end, cfg.sample_dt)?;

    let mut em = cli.emitter()?;
    em.series("exo_run", &SERIES_COLUMNS, &run.series)?;
    let last = run.series.last_row().expect("simulate returns rows");
    println!(
        "variant={} rows={} SR_final={}",
        run.variant,
        run.series.len(),
        last[timescales_core::exocytosis::SR_COLUMN]
    );
    em.finish("exo run", to_value(&cfg), None)?;
    Ok(())
}

pub fn resting(cli: &Cli) -> Result<(), CliError> {
    let cfg: ExoConfig = config::load(cli.config_path())?;
    let (c_md, c_i) = cfg.protocol.basal_levels();
    let state = resting_state(c_md, c_i, &cfg.params, cfg.variant)?;
    let rhs = derivatives(&state, c_md, c_i, &cfg.params, cfg.variant)?;
    let residual = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let pools: serde_json::Map<String, serde_json::Value> = POOLS
        .iter()
        .zip(state.iter())
        .map(|(name, v)| (name.to_string(), json!(v)))
        .collect();

    let mut em = cli.emitter()?;
    em.json(
        "exo_resting",
        &json!({
            "variant": cfg.variant,
            "c_md": c_md,
            "c_i": c_i,
            "pools": pools,
            "residual": residual,
        }),
    )?;
    println!("residual={residual}");
    em.finish("exo resting", to_value(&cfg), None)?;
    Ok(())
}

pub fn metrics(cli: &Cli) -> Result<(), CliError> {
    let cfg: ExoConfig = config::load(cli.config_path())?;
    let run = simulate(&cfg.protocol, &cfg.params, cfg.variant, cfg.t_end, cfg.sample_dt)?;
    let m = phase_metrics(&run.series, cfg.protocol.t_on)?;

    let mut em = cli.emitter()?;
    em.json(
        "exo_metrics",
        &json!({
            "t_peak": m.t_peak,
            "SR_peak": m.sr_peak,
            "t_nadir": m.t_nadir,
            "SR_nadir": m.sr_nadir,
            "SR_plateau": m.sr_plateau,
            "variant": run.variant,
        }),
    )?;
    println!("biphasic={} t_peak={} SR_plateau={}", m.biphasic, m.t_peak, m.sr_plateau);
    em.finish("exo metrics", to_value(&cfg), None)?;
    Ok(())
}

use std::fs::File;

use serde_json::json;
use timescales_core::cycles::{
    characteristic_roots, closed_form as analytic_path, decompose as split, great_ratios, iterate,
    IncomePath,
};
use timescales_core::{Error, TimeSeries};

use crate::config::{self, CyclesClassifyConfig, CyclesDecomposeConfig, CyclesRunConfig, RatioKind};
use crate::{to_value, Cli, CliError};

fn emit_path(cli: &Cli, cfg: &CyclesRunConfig, name: &str, sub: &str, path: &IncomePath) -> Result<(), CliError> {
    let mut em = cli.emitter()?;
    em.series(name, &["t", "Y"], &path.series)?;
    let last = path.series.last_row().expect("path has rows");
    println!("rows={} explosive={} Y_final={}", path.series.len(), path.explosive, last[0]);
    em.finish(sub, to_value(cfg), None)?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg: CyclesRunConfig = config::load(cli.config_path())?;
    let path = iterate(&cfg.params.resolve()?, cfg.steps)?;
    emit_path(cli, &cfg, "cycles_run", "cycles run", &path)
}

pub fn closed_form(cli: &Cli) -> Result<(), CliError> {
    let cfg: CyclesRunConfig = config::load(cli.config_path())?;
    let path = analytic_path(&cfg.params.resolve()?, cfg.steps)?;
    emit_path(cli, &cfg, "cycles_closed_form", "cycles closed-form", &path)
}

pub fn classify(cli: &Cli, c: Option<f64>, nu: Option<f64>) -> Result<(), CliError> {
    let mut cfg: CyclesClassifyConfig = config::load(cli.config_path())?;
    if let Some(c) = c {
        cfg.c = c;
    }
    if let Some(nu) = nu {
        cfg.nu = nu;
    }
    let roots = characteristic_roots(cfg.c, cfg.nu)?;

    let mut em = cli.emitter()?;
    em.json(
        "cycles_classify",
        &json!({
            "lambda_re": roots.lambda1.re,
            "lambda_im": roots.lambda1.im,
            "modulus": roots.modulus,
            "theta": roots.theta,
            "period": roots.period,
            "regime": roots.regime.to_string(),
        }),
    )?;
    match roots.period {
        Some(period) => println!("regime={} period={period}", roots.regime),
        None => println!("regime={}", roots.regime),
    }
    em.finish("cycles classify", to_value(&cfg), None)?;
    Ok(())
}

/// Either `t,value` with any value-column name, or exactly `t,W,L,p,Y,Ls`.
struct DecomposeInput {
    times: Vec<f64>,
    values: Vec<f64>,
}

fn read_input(cfg: &CyclesDecomposeConfig) -> Result<DecomposeInput, CliError> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::ConfigInvalid("decompose needs an input CSV path".into()))?;
    let file = File::open(path).map_err(Error::from)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);

    let header: Vec<String> =
        reader.headers().map_err(bad_csv)?.iter().map(str::to_string).collect();
    let six = ["t", "W", "L", "p", "Y", "Ls"];
    let wide = match header.len() {
        2 if header[0] == "t" => false,
        6 if header == six => true,
        _ => {
            return Err(CliError::Engine(Error::validation(format!(
                "input header must be `t,<value>` or `t,W,L,p,Y,Ls`, got {:?}",
                header.join(",")
            ))))
        }
    };

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(bad_csv)?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Engine(Error::validation(format!(
                    "non-numeric field {field:?} in row {}",
                    columns[0].len() + 1
                )))
            })?;
            columns[j].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(CliError::Engine(Error::validation("input CSV has no data rows")));
    }

    let values = if wide {
        let (e, v) = great_ratios(&columns[1], &columns[2], &columns[3], &columns[4], &columns[5])?;
        match cfg.ratio {
            RatioKind::WageShare => v,
            RatioKind::Employment => e,
        }
    } else {
        columns[1].clone()
    };
    Ok(DecomposeInput { times: columns.swap_remove(0), values })
}

fn bad_csv(e: csv::Error) -> CliError {
    CliError::Engine(Error::validation(format!("malformed CSV: {e}")))
}

pub fn decompose(cli: &Cli) -> Result<(), CliError> {
    let cfg: CyclesDecomposeConfig = config::load(cli.config_path())?;
    let input = read_input(&cfg)?;
    let parts = split(&input.values, cfg.long_window, cfg.short_window)?;

    let mut series = TimeSeries::with_capacity(4, input.times.len());
    for i in 0..input.times.len() {
        series
            .push(
                input.times[i],
                &[input.values[i], parts.trend[i], parts.cycle[i], parts.residual[i]],
            )
            .map_err(CliError::Engine)?;
    }

    let mut em = cli.emitter()?;
    em.series("cycles_decompose", &["t", "Y", "trend", "cycle", "residual"], &series)?;
    println!("rows={} long_window={} short_window={}", series.len(), cfg.long_window, cfg.short_window);
    em.finish("cycles decompose", to_value(&cfg), None)?;
    Ok(())
}

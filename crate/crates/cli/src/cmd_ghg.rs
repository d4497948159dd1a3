use serde_json::json;
use timescales_core::ghg::{
    albedo_model, clathrate_model, critical_gain as bisect_gain, gwp as gwp_quadrature,
    gwp_closed_form, simulate_compartments, stability as stability_of, CompartmentModel, GwpSpec,
    Outcome, StabilityReport,
};

use crate::config::{self, DecayCfg, GhgGwpConfig, GhgModelConfig, GhgSimulateConfig, ModelKind};
use crate::{to_value, Cli, CliError};

pub fn gwp(
    cli: &Cli,
    half_life: Option<f64>,
    horizon: Option<f64>,
    a_ratio: Option<f64>,
) -> Result<(), CliError> {
    let mut cfg: GhgGwpConfig = config::load(cli.config_path())?;
    if let Some(h) = half_life {
        cfg.gas = DecayCfg::exponential(h);
    }
    if let Some(th) = horizon {
        cfg.horizon = th;
    }
    if let Some(a) = a_ratio {
        cfg.a_ratio = a;
    }
    let spec = GwpSpec {
        gas: cfg.gas.to_engine()?,
        reference: cfg.reference.to_engine()?,
        horizon: cfg.horizon,
        a_ratio: cfg.a_ratio,
    };
    let value = gwp_quadrature(&spec)?;
    let closed = gwp_closed_form(&spec)?;

    let mut em = cli.emitter()?;
    em.json(
        "ghg_gwp",
        &json!({
            "gwp": value,
            "closed_form": closed,
            "horizon": cfg.horizon,
            "a_ratio": cfg.a_ratio,
        }),
    )?;
    println!("gwp={value}");
    em.finish("ghg gwp", to_value(&cfg), None)?;
    Ok(())
}

/// Model family with `beta_f` as the free gain, everything else pinned to the
/// config, plus a positive bracket top for the bisection.
fn gain_family(
    cfg: &GhgModelConfig,
) -> (Box<dyn Fn(f64) -> timescales_core::Result<CompartmentModel>>, f64, Option<f64>) {
    match cfg.model {
        ModelKind::Clathrate => {
            let spec = cfg.clathrate.clone();
            let analytic = spec.analytic_critical_gain();
            let hi = cfg.gain_hi_factor * analytic;
            (
                Box::new(move |g| {
                    let mut s = spec.clone();
                    s.beta_f = g;
                    clathrate_model(&s)
                }),
                hi,
                Some(analytic),
            )
        }
        ModelKind::Albedo => {
            let spec = cfg.albedo.clone();
            // The ice-loss index has no restoring term, so the family is
            // marginal at zero gain; any positive top bracket works.
            let hi = cfg.gain_hi_factor.max(1.0);
            (
                Box::new(move |g| {
                    let mut s = spec.clone();
                    s.beta_f = g;
                    albedo_model(&s)
                }),
                hi,
                None,
            )
        }
    }
}

fn configured_model(cfg: &GhgModelConfig) -> Result<CompartmentModel, CliError> {
    Ok(match cfg.model {
        ModelKind::Clathrate => clathrate_model(&cfg.clathrate)?,
        ModelKind::Albedo => albedo_model(&cfg.albedo)?,
    })
}

fn eig_pairs(report: &StabilityReport) -> Vec<serde_json::Value> {
    report.eigenvalues.iter().map(|e| json!([e.re, e.im])).collect()
}

pub fn stability(cli: &Cli) -> Result<(), CliError> {
    let cfg: GhgModelConfig = config::load(cli.config_path())?;
    let report = stability_of(&configured_model(&cfg)?)?;
    let (family, hi, _) = gain_family(&cfg);
    let g_crit = bisect_gain(family.as_ref(), 0.0, hi, cfg.gain_tol)?;

    let mut em = cli.emitter()?;
    em.json(
        "ghg_stability",
        &json!({
            "eigs": eig_pairs(&report),
            "stable": report.stable,
            "g_crit": g_crit,
        }),
    )?;
    println!(
        "model={} stable={} max_real_part={} g_crit={g_crit}",
        cfg.model, report.stable, report.max_real_part
    );
    em.finish("ghg stability", to_value(&cfg), None)?;
    Ok(())
}

pub fn critical_gain(cli: &Cli) -> Result<(), CliError> {
    let cfg: GhgModelConfig = config::load(cli.config_path())?;
    let (family, hi, analytic) = gain_family(&cfg);
    let g_crit = bisect_gain(family.as_ref(), 0.0, hi, cfg.gain_tol)?;

    let mut em = cli.emitter()?;
    em.json(
        "ghg_critical_gain",
        &json!({
            "model": cfg.model.to_string(),
            "g_crit": g_crit,
            "analytic": analytic,
        }),
    )?;
    match analytic {
        Some(a) => println!("g_crit={g_crit} analytic={a}"),
        None => println!("g_crit={g_crit}"),
    }
    em.finish("ghg critical-gain", to_value(&cfg), None)?;
    Ok(())
}

pub fn simulate(cli: &Cli) -> Result<(), CliError> {
    let cfg: GhgSimulateConfig = config::load(cli.config_path())?;
    let model = match cfg.model {
        ModelKind::Clathrate => clathrate_model(&cfg.clathrate)?,
        ModelKind::Albedo => albedo_model(&cfg.albedo)?,
    };
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; model.dim()]);
    let run =
        simulate_compartments(&model, &cfg.emissions.to_engine()?, &x0, cfg.horizon, cfg.sample_dt)?;

    let mut columns = vec!["t"];
    columns.extend(model.names().iter().map(String::as_str));
    let mut em = cli.emitter()?;
    em.series("ghg_simulate", &columns, &run.series)?;
    match run.outcome {
        Outcome::Bounded => println!("outcome=bounded"),
        Outcome::Runaway { t_diverged } => println!("outcome=runaway t_diverged={t_diverged}"),
    }
    em.finish("ghg simulate", to_value(&cfg), None)?;
    Ok(())
}

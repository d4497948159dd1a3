use std::fs::File;
use std::io::BufReader;

use serde_json::json;
use timescales_core::glassmd::{
    self, displacement_field, init_configuration, reduced_scaling, run_md_with_progress,
    write_snapshot, Configuration, Ensemble, MdRun, PotentialSpec, RunSpec, SampleSchedule,
    Species, StatePoint, DIAG_KIN_T, DIAG_TOTAL_E, MSD_TOTAL,
};
use timescales_core::rng::RngStream;
use timescales_core::{Error, TimeSeries};

use crate::config::{self, GlassConfig, GlassScalingConfig, ScheduleCfg, StatePointCfg};
use crate::{to_value, Cli, CliError};

const DIAG_COLUMNS: [&str; 6] = ["t", "kinetic_T", "potential", "total_E", "px", "py"];

/// Thermostat stream for throwaway equilibration segments, salted so it never
/// collides with the measured run's noise stream under the same seed.
const EQUIL_SALT: u64 = 0xABCD;

fn species_label(s: Species) -> &'static str {
    match s {
        Species::A => "A",
        Species::B => "B",
    }
}

fn start_configuration(cfg: &GlassConfig) -> Result<Configuration, CliError> {
    match &cfg.snapshot_in {
        Some(path) => {
            let file = File::open(path).map_err(Error::from)?;
            Ok(glassmd::read_snapshot(&mut BufReader::new(file))?)
        }
        None => {
            let mut rng = RngStream::substream(cfg.seed, 1);
            Ok(init_configuration(
                cfg.init.n,
                cfg.init.fraction_a,
                cfg.init.density,
                cfg.init.temperature,
                cfg.init.mass,
                &cfg.potential,
                &mut rng,
            )?)
        }
    }
}

fn phase(
    label: &str,
    state: &mut Configuration,
    pot: &PotentialSpec,
    spec: &RunSpec,
    quiet: bool,
) -> Result<MdRun, CliError> {
    let total = spec.steps;
    let mut hook = |k: usize| eprintln!("{label}: step {k}/{total}");
    let progress: Option<&mut dyn FnMut(usize)> = if quiet { None } else { Some(&mut hook) };
    Ok(run_md_with_progress(state, pot, spec, progress)?)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg: GlassConfig = config::load(cli.config_path())?;
    if let Some(s) = cli.seed_override() {
        cfg.seed = s;
    }

    let mut state = start_configuration(&cfg)?;
    if let Some(equil) = &cfg.equil {
        phase(
            "glass equil",
            &mut state,
            &cfg.potential,
            &equil.to_spec(cfg.seed ^ EQUIL_SALT)?,
            cli.quiet(),
        )?;
    }
    let start = cfg.displacement.then(|| state.clone());
    let run = phase(
        "glass run",
        &mut state,
        &cfg.potential,
        &cfg.run.to_spec(cfg.seed)?,
        cli.quiet(),
    )?;

    let mut em = cli.emitter()?;
    em.series("glass_run_diagnostics", &DIAG_COLUMNS, &run.diagnostics)?;

    let mut snap = Vec::new();
    write_snapshot(&state, &mut snap)?;
    em.text("glass_run_final.snapshot", std::str::from_utf8(&snap).expect("snapshot is ascii"))?;

    if let Some(start) = start {
        let field = displacement_field(&start, &state)?;
        em.table(
            "glass_run_displacements",
            "id,species,dx,dy,magnitude",
            field.rows.iter().map(|r| {
                format!("{},{},{},{},{}", r.id, species_label(r.species), r.dx, r.dy, r.magnitude)
            }),
        )?;
        println!("mobility_fraction={}", field.mobility_fraction);
    }

    let last = run.diagnostics.last_row().expect("diagnostics are nonempty");
    println!(
        "steps={} kinetic_T={} total_E={}",
        cfg.run.steps, last[DIAG_KIN_T], last[DIAG_TOTAL_E]
    );
    em.finish("glass run", to_value(&cfg), Some(cfg.seed))?;
    Ok(())
}

pub fn msd(cli: &Cli) -> Result<(), CliError> {
    let mut cfg: GlassConfig = config::load(cli.config_path())?;
    if let Some(s) = cli.seed_override() {
        cfg.seed = s;
    }
    // A run without samples has no displacements to average.
    if cfg.run.schedule.is_none() {
        cfg.run.schedule = ScheduleCfg::log(12);
    }

    let mut state = start_configuration(&cfg)?;
    if let Some(equil) = &cfg.equil {
        phase(
            "glass equil",
            &mut state,
            &cfg.potential,
            &equil.to_spec(cfg.seed ^ EQUIL_SALT)?,
            cli.quiet(),
        )?;
    }
    let run = phase(
        "glass msd",
        &mut state,
        &cfg.potential,
        &cfg.run.to_spec(cfg.seed)?,
        cli.quiet(),
    )?;
    let curve = glassmd::msd(&run.samples, &state.species, cfg.multi_origin)?;

    let mut em = cli.emitter()?;
    em.series("glass_msd", &["lag_time", "msd_total", "msd_A", "msd_B"], &curve)?;
    let last = curve.last_row().expect("msd has rows");
    println!(
        "samples={} lags={} msd_final={}",
        run.samples.len(),
        curve.len(),
        last[MSD_TOTAL]
    );
    em.finish("glass msd", to_value(&cfg), Some(cfg.seed))?;
    Ok(())
}

fn member_curve(
    cfg: &GlassScalingConfig,
    sp: &StatePointCfg,
    dt: f64,
    gamma: f64,
    seed: u64,
    label: &str,
    quiet: bool,
) -> Result<TimeSeries, CliError> {
    let mut rng = RngStream::substream(seed, 1);
    let mut state = init_configuration(
        cfg.n,
        cfg.fraction_a,
        sp.density,
        sp.temperature,
        1.0,
        &cfg.potential,
        &mut rng,
    )?;
    let thermostat = Ensemble::Langevin { t_target: sp.temperature, gamma };
    let equil = RunSpec {
        ensemble: thermostat,
        dt,
        steps: cfg.equil_steps,
        schedule: SampleSchedule::None,
        diag_every: 1000,
        seed: seed ^ EQUIL_SALT,
    };
    phase(&format!("{label} equil"), &mut state, &cfg.potential, &equil, quiet)?;
    let measure = RunSpec {
        ensemble: thermostat,
        dt,
        steps: cfg.steps,
        schedule: SampleSchedule::Linear { every: cfg.every },
        diag_every: 1000,
        seed,
    };
    let run = phase(label, &mut state, &cfg.potential, &measure, quiet)?;
    Ok(glassmd::msd(&run.samples, &state.species, true)?)
}

/// Pointwise mean of MSD curves that share one lag grid by construction.
fn average(curves: &[TimeSeries]) -> Result<TimeSeries, Error> {
    let mut out = TimeSeries::with_capacity(curves[0].dim(), curves[0].len());
    let mut row = vec![0.0; curves[0].dim()];
    for k in 0..curves[0].len() {
        row.fill(0.0);
        for c in curves {
            for (j, v) in c.row(k).iter().enumerate() {
                row[j] += v;
            }
        }
        for v in &mut row {
            *v /= curves.len() as f64;
        }
        out.push(curves[0].time(k), &row)?;
    }
    Ok(out)
}

pub fn scaling_check(cli: &Cli) -> Result<(), CliError> {
    let mut cfg: GlassScalingConfig = config::load(cli.config_path())?;
    if let Some(s) = cli.seed_override() {
        cfg.seed = s;
    }
    if cfg.n_seeds == 0 {
        return Err(CliError::ConfigInvalid("n_seeds must be >= 1".into()));
    }

    let sp_a = StatePoint {
        density: cfg.state_a.density,
        temperature: cfg.state_a.temperature,
        ..StatePoint::default()
    };
    let sp_b = StatePoint {
        density: cfg.state_b.density,
        temperature: cfg.state_b.temperature,
        ..StatePoint::default()
    };
    let red_a = reduced_scaling(&sp_a, 1.0);
    let red_b = reduced_scaling(&sp_b, 1.0);
    // State B runs on the same reduced-time grid: dt and friction both carry
    // the ratio of time units.
    let dt_b = cfg.dt * red_b.time_scale / red_a.time_scale;
    let gamma_b = cfg.gamma * red_a.time_scale / red_b.time_scale;

    let mut curves_a = Vec::new();
    let mut curves_b = Vec::new();
    for i in 0..cfg.n_seeds {
        let seed = cfg.seed + i;
        curves_a.push(member_curve(
            &cfg,
            &cfg.state_a,
            cfg.dt,
            cfg.gamma,
            seed,
            &format!("glass scaling A[{i}]"),
            cli.quiet(),
        )?);
        curves_b.push(member_curve(
            &cfg,
            &cfg.state_b,
            dt_b,
            gamma_b,
            seed,
            &format!("glass scaling B[{i}]"),
            cli.quiet(),
        )?);
    }
    let msd_a = average(&curves_a)?;
    let msd_b = average(&curves_b)?;

    let mut out = TimeSeries::new(3);
    let mut worst = 0.0f64;
    for k in 0..msd_a.len().min(msd_b.len()) {
        let lag_a = msd_a.time(k) / red_a.time_scale;
        let lag_b = msd_b.time(k) / red_b.time_scale;
        if lag_a <= 0.0 {
            continue;
        }
        if (lag_a - lag_b).abs() > 1e-9 * lag_a.max(1e-300) {
            return Err(CliError::Engine(Error::validation(format!(
                "reduced lag grids diverge at index {k}: {lag_a} vs {lag_b}"
            ))));
        }
        if lag_a > cfg.lag_cap_reduced {
            break;
        }
        let a = msd_a.value(k, MSD_TOTAL) / (red_a.length_scale * red_a.length_scale);
        let b = msd_b.value(k, MSD_TOTAL) / (red_b.length_scale * red_b.length_scale);
        let dev = (a - b).abs() / (0.5 * (a + b));
        worst = worst.max(dev);
        out.push(lag_a, &[a, b, dev]).map_err(CliError::Engine)?;
    }
    if out.is_empty() {
        return Err(CliError::ConfigInvalid(
            "no lags below lag_cap_reduced; raise the cap or sample more often".into(),
        ));
    }

    let mut em = cli.emitter()?;
    em.series(
        "glass_scaling_check",
        &["reduced_lag", "msd_state_a", "msd_state_b", "rel_dev"],
        &out,
    )?;
    em.json(
        "glass_scaling_summary",
        &json!({
            "gamma_a": red_a.gamma,
            "gamma_b": red_b.gamma,
            "time_scale_a": red_a.time_scale,
            "time_scale_b": red_b.time_scale,
            "length_scale_a": red_a.length_scale,
            "length_scale_b": red_b.length_scale,
            "lag_cap_reduced": cfg.lag_cap_reduced,
            "points": out.len(),
            "worst_rel_dev": worst,
        }),
    )?;
    println!("gamma_a={} gamma_b={} worst_rel_dev={worst}", red_a.gamma, red_b.gamma);
    em.finish("glass scaling-check", to_value(&cfg), Some(cfg.seed))?;
    Ok(())
}

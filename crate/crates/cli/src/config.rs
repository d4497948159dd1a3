//! Per-subcommand configuration documents.
//!
//! Every document is strict: unknown keys anywhere fail deserialization, and
//! `schema_version` must be 1. Enums that the engine accepts in internally
//! tagged form (ensemble, schedule, decay, emissions) are mirrored here as
//! flat structs, because tagged enums cannot reject stray keys.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use timescales_core::exocytosis::{CalciumProtocol, KineticParams, Variant};
use timescales_core::ghg::{AlbedoSpec, ClathrateSpec, DecayProfile, EmissionsPath};
use timescales_core::glassmd::{Ensemble, PotentialSpec, RunSpec, SampleSchedule};
use timescales_core::tipping::TippingParams;
use timescales_core::Error;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn v1() -> u32 {
    SCHEMA_VERSION
}

/// Read and validate a config document, or fall back to defaults when no
/// `--config` was given.
pub fn load<T>(path: Option<&Path>) -> Result<T, CliError>
where
    T: DeserializeOwned + Default + Versioned,
{
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::ConfigNotFound(path.to_path_buf()));
        }
        Err(e) => {
            return Err(CliError::ConfigInvalid(format!("cannot read {}: {e}", path.display())));
        }
    };
    let doc: T = serde_json::from_str(&text)
        .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    if doc.schema_version() != SCHEMA_VERSION {
        return Err(CliError::ConfigInvalid(format!(
            "{}: schema_version {} not supported, expected {SCHEMA_VERSION}",
            path.display(),
            doc.schema_version()
        )));
    }
    Ok(doc)
}

pub trait Versioned {
    fn schema_version(&self) -> u32;
}

macro_rules! versioned {
    ($t:ty) => {
        impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        }
    };
}

// ---- tipping ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TippingRunConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub seed: u64,
    pub params: TippingParams,
}

impl Default for TippingRunConfig {
    fn default() -> Self {
        TippingRunConfig { schema_version: 1, seed: 0, params: TippingParams::default() }
    }
}
versioned!(TippingRunConfig);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TippingHysteresisConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    /// Base seed; member `i` runs on substream `i`.
    pub seed: u64,
    pub n_seeds: usize,
    pub params: TippingParams,
}

impl Default for TippingHysteresisConfig {
    fn default() -> Self {
        TippingHysteresisConfig {
            schema_version: 1,
            seed: 0,
            n_seeds: 100,
            params: TippingParams::default(),
        }
    }
}
versioned!(TippingHysteresisConfig);

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmptyConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
}
versioned!(EmptyConfig);

// ---- glass ----

/// Strict mirror of [`Ensemble`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleCfg {
    /// "nve" or "langevin".
    pub kind: String,
    pub t_target: Option<f64>,
    pub gamma: Option<f64>,
}

impl Default for EnsembleCfg {
    fn default() -> Self {
        EnsembleCfg { kind: "nve".into(), t_target: None, gamma: None }
    }
}

impl EnsembleCfg {
    #[cfg(test)]
    pub fn langevin(t_target: f64, gamma: f64) -> Self {
        EnsembleCfg { kind: "langevin".into(), t_target: Some(t_target), gamma: Some(gamma) }
    }

    pub fn to_engine(&self) -> Result<Ensemble, Error> {
        match self.kind.as_str() {
            "nve" => {
                if self.t_target.is_some() || self.gamma.is_some() {
                    return Err(Error::validation("nve ensemble takes no t_target or gamma"));
                }
                Ok(Ensemble::Nve)
            }
            "langevin" => {
                let (Some(t), Some(g)) = (self.t_target, self.gamma) else {
                    return Err(Error::validation("langevin ensemble needs t_target and gamma"));
                };
                Ok(Ensemble::Langevin { t_target: t, gamma: g })
            }
            other => Err(Error::validation(format!(
                "unknown ensemble kind {other:?}, expected nve or langevin"
            ))),
        }
    }
}

/// Strict mirror of [`SampleSchedule`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleCfg {
    /// "none", "linear" or "log".
    pub kind: String,
    pub every: Option<usize>,
    pub per_decade: Option<usize>,
}

impl Default for ScheduleCfg {
    fn default() -> Self {
        ScheduleCfg { kind: "none".into(), every: None, per_decade: None }
    }
}

impl ScheduleCfg {
    pub fn log(per_decade: usize) -> Self {
        ScheduleCfg { kind: "log".into(), every: None, per_decade: Some(per_decade) }
    }

    pub fn is_none(&self) -> bool {
        self.kind == "none"
    }

    pub fn to_engine(&self) -> Result<SampleSchedule, Error> {
        match (self.kind.as_str(), self.every, self.per_decade) {
            ("none", None, None) => Ok(SampleSchedule::None),
            ("linear", Some(every), None) => Ok(SampleSchedule::Linear { every }),
            ("log", None, Some(per_decade)) => Ok(SampleSchedule::Log { per_decade }),
            _ => Err(Error::validation(format!(
                "schedule kind {:?} with every={:?}, per_decade={:?} is not a valid combination",
                self.kind, self.every, self.per_decade
            ))),
        }
    }
}

/// Lattice initialization parameters for a fresh configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlassInit {
    pub n: usize,
    pub density: f64,
    pub temperature: f64,
    pub fraction_a: f64,
    pub mass: f64,
}

impl Default for GlassInit {
    fn default() -> Self {
        GlassInit { n: 400, density: 1.0, temperature: 1.0, fraction_a: 0.7, mass: 1.0 }
    }
}

/// One trajectory segment without a seed; the top-level seed feeds both the
/// initial condition (stream 1) and the thermostat (stream 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunPhase {
    pub ensemble: EnsembleCfg,
    pub dt: f64,
    pub steps: usize,
    pub schedule: ScheduleCfg,
    pub diag_every: usize,
}

impl Default for RunPhase {
    fn default() -> Self {
        RunPhase {
            ensemble: EnsembleCfg::default(),
            dt: 0.002,
            steps: 1000,
            schedule: ScheduleCfg::default(),
            diag_every: 1,
        }
    }
}

impl RunPhase {
    pub fn to_spec(&self, seed: u64) -> Result<RunSpec, Error> {
        Ok(RunSpec {
            ensemble: self.ensemble.to_engine()?,
            dt: self.dt,
            steps: self.steps,
            schedule: self.schedule.to_engine()?,
            diag_every: self.diag_every,
            seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlassConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub seed: u64,
    pub init: GlassInit,
    /// Start from this snapshot instead of a fresh lattice.
    pub snapshot_in: Option<PathBuf>,
    pub potential: PotentialSpec,
    /// Optional unrecorded segment before the measured run.
    pub equil: Option<RunPhase>,
    pub run: RunPhase,
    /// `glass msd` only: average over all start times (uniform sampling).
    pub multi_origin: bool,
    /// `glass run` only: also write per-particle displacements start -> end.
    pub displacement: bool,
}

impl Default for GlassConfig {
    fn default() -> Self {
        GlassConfig {
            schema_version: 1,
            seed: 0,
            init: GlassInit::default(),
            snapshot_in: None,
            potential: PotentialSpec::default(),
            equil: None,
            run: RunPhase::default(),
            multi_origin: false,
            displacement: false,
        }
    }
}
versioned!(GlassConfig);

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePointCfg {
    pub density: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlassScalingConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub seed: u64,
    pub n: usize,
    pub fraction_a: f64,
    pub potential: PotentialSpec,
    pub state_a: StatePointCfg,
    pub state_b: StatePointCfg,
    /// Time step at state A; state B runs at dt scaled by the ratio of
    /// reduced time units so both runs share one reduced-time grid.
    pub dt: f64,
    pub gamma: f64,
    pub equil_steps: usize,
    pub steps: usize,
    /// Sampling stride of the measured runs.
    pub every: usize,
    /// Independent replicas averaged per state point.
    pub n_seeds: u64,
    /// Compare reduced MSD curves up to this reduced lag time.
    pub lag_cap_reduced: f64,
}

impl Default for GlassScalingConfig {
    fn default() -> Self {
        GlassScalingConfig {
            schema_version: 1,
            seed: 77,
            n: 400,
            fraction_a: 0.7,
            potential: PotentialSpec::default(),
            state_a: StatePointCfg { density: 1.0, temperature: 0.4 },
            state_b: StatePointCfg { density: 1.05, temperature: 0.4 * 1.05f64.powi(9) },
            dt: 0.002,
            gamma: 1.0,
            equil_steps: 20_000,
            steps: 100_000,
            every: 20,
            n_seeds: 1,
            lag_cap_reduced: 1.0,
        }
    }
}
versioned!(GlassScalingConfig);

// ---- exocytosis ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExoConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub variant: Variant,
    pub params: KineticParams,
    pub protocol: CalciumProtocol,
    pub t_end: f64,
    pub sample_dt: f64,
}

impl Default for ExoConfig {
    fn default() -> Self {
        ExoConfig {
            schema_version: 1,
            variant: Variant::MassActionCorrected,
            params: KineticParams::default(),
            protocol: CalciumProtocol::default(),
            t_end: 1900.0,
            sample_dt: 0.5,
        }
    }
}
versioned!(ExoConfig);

// ---- cycles ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleParamsCfg {
    pub c: f64,
    pub nu: f64,
    pub a: f64,
    pub g: f64,
    /// Default to the trend value at t plus one unit when absent.
    pub y0: Option<f64>,
    pub y1: Option<f64>,
}

impl Default for CycleParamsCfg {
    fn default() -> Self {
        CycleParamsCfg { c: 0.6, nu: 1.2, a: 10.0, g: 0.0, y0: None, y1: None }
    }
}

impl CycleParamsCfg {
    pub fn resolve(&self) -> Result<timescales_core::cycles::CycleParams, Error> {
        let (y0, y1) = match (self.y0, self.y1) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => {
                let s = 1.0 - self.c;
                let denom = (1.0 + self.g) * (s + self.g) - self.nu * self.g;
                if denom.abs() < 1e-300 {
                    return Err(Error::validation(
                        "no trend solution at these parameters; give y0 and y1 explicitly",
                    ));
                }
                let k = (1.0 + self.g).powi(2) * self.a / denom;
                (k + 1.0, k * (1.0 + self.g) + 1.0)
            }
            _ => {
                return Err(Error::validation("give both y0 and y1 or neither"));
            }
        };
        Ok(timescales_core::cycles::CycleParams {
            c: self.c,
            nu: self.nu,
            a: self.a,
            g: self.g,
            y0,
            y1,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CyclesRunConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub params: CycleParamsCfg,
    pub steps: usize,
}

impl Default for CyclesRunConfig {
    fn default() -> Self {
        CyclesRunConfig { schema_version: 1, params: CycleParamsCfg::default(), steps: 200 }
    }
}
versioned!(CyclesRunConfig);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CyclesClassifyConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub c: f64,
    pub nu: f64,
}

impl Default for CyclesClassifyConfig {
    fn default() -> Self {
        CyclesClassifyConfig { schema_version: 1, c: 0.6, nu: 1.2 }
    }
}
versioned!(CyclesClassifyConfig);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKind {
    WageShare,
    Employment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CyclesDecomposeConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    /// CSV path, either `t,value` or `t,W,L,p,Y,Ls`.
    pub input: Option<PathBuf>,
    /// Which ratio to decompose when the input is the six-column form.
    pub ratio: RatioKind,
    pub long_window: usize,
    pub short_window: usize,
}

impl Default for CyclesDecomposeConfig {
    fn default() -> Self {
        CyclesDecomposeConfig {
            schema_version: 1,
            input: None,
            ratio: RatioKind::WageShare,
            long_window: 41,
            short_window: 5,
        }
    }
}
versioned!(CyclesDecomposeConfig);

// ---- ghg ----

/// Strict mirror of [`DecayProfile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayCfg {
    /// "constant" or "exponential".
    pub kind: String,
    pub half_life: Option<f64>,
}

impl Default for DecayCfg {
    fn default() -> Self {
        DecayCfg { kind: "constant".into(), half_life: None }
    }
}

impl DecayCfg {
    pub fn exponential(half_life: f64) -> Self {
        DecayCfg { kind: "exponential".into(), half_life: Some(half_life) }
    }

    pub fn to_engine(&self) -> Result<DecayProfile, Error> {
        match (self.kind.as_str(), self.half_life) {
            ("constant", None) => Ok(DecayProfile::Constant),
            ("exponential", Some(half_life)) => Ok(DecayProfile::Exponential { half_life }),
            _ => Err(Error::validation(format!(
                "decay kind {:?} with half_life={:?} is not a valid combination",
                self.kind, self.half_life
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GhgGwpConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub gas: DecayCfg,
    pub reference: DecayCfg,
    pub horizon: f64,
    pub a_ratio: f64,
}

impl Default for GhgGwpConfig {
    fn default() -> Self {
        GhgGwpConfig {
            schema_version: 1,
            gas: DecayCfg::exponential(timescales_core::ghg::METHANE_HALF_LIFE_YEARS),
            reference: DecayCfg::default(),
            horizon: 100.0,
            a_ratio: 1.0,
        }
    }
}
versioned!(GhgGwpConfig);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Clathrate,
    Albedo,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Clathrate => "clathrate",
            ModelKind::Albedo => "albedo",
        })
    }
}

/// Strict mirror of [`EmissionsPath`]. Field defaults are all-absent rather
/// than the struct default, so a partial document like `{"kind": "zero"}`
/// does not inherit the default pulse's rate and get rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionsCfg {
    /// "zero", "constant" or "pulse".
    #[serde(default = "pulse_kind")]
    pub kind: String,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub duration: Option<f64>,
}

fn pulse_kind() -> String {
    "pulse".into()
}

impl Default for EmissionsCfg {
    fn default() -> Self {
        EmissionsCfg { kind: "pulse".into(), rate: Some(1.0), duration: Some(10.0) }
    }
}

impl EmissionsCfg {
    pub fn to_engine(&self) -> Result<EmissionsPath, Error> {
        match (self.kind.as_str(), self.rate, self.duration) {
            ("zero", None, None) => Ok(EmissionsPath::Zero),
            ("constant", Some(rate), None) => Ok(EmissionsPath::Constant { rate }),
            ("pulse", Some(rate), Some(duration)) => Ok(EmissionsPath::Pulse { rate, duration }),
            _ => Err(Error::validation(format!(
                "emissions kind {:?} with rate={:?}, duration={:?} is not a valid combination",
                self.kind, self.rate, self.duration
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GhgModelConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub model: ModelKind,
    pub clathrate: ClathrateSpec,
    pub albedo: AlbedoSpec,
    /// Bisection bracket top for the critical gain, as a multiple of the
    /// clathrate preset's analytic value.
    pub gain_hi_factor: f64,
    pub gain_tol: f64,
}

impl Default for GhgModelConfig {
    fn default() -> Self {
        GhgModelConfig {
            schema_version: 1,
            model: ModelKind::Clathrate,
            clathrate: ClathrateSpec::default(),
            albedo: AlbedoSpec::default(),
            gain_hi_factor: 4.0,
            gain_tol: 1e-9,
        }
    }
}
versioned!(GhgModelConfig);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GhgSimulateConfig {
    #[serde(default = "v1")]
    pub schema_version: u32,
    pub model: ModelKind,
    pub clathrate: ClathrateSpec,
    pub albedo: AlbedoSpec,
    pub emissions: EmissionsCfg,
    /// Initial state; zeros when absent.
    pub x0: Option<Vec<f64>>,
    pub horizon: f64,
    pub sample_dt: f64,
}

impl Default for GhgSimulateConfig {
    fn default() -> Self {
        GhgSimulateConfig {
            schema_version: 1,
            model: ModelKind::Clathrate,
            clathrate: ClathrateSpec::default(),
            albedo: AlbedoSpec::default(),
            emissions: EmissionsCfg::default(),
            x0: None,
            horizon: 500.0,
            sample_dt: 0.5,
        }
    }
}
versioned!(GhgSimulateConfig);

#[cfg(test)]
mod tests {
    use super::*;

    fn parse<T: DeserializeOwned>(s: &str) -> Result<T, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }

    #[test]
    fn ensemble_mirror_round_trips() {
        let nve = EnsembleCfg::default().to_engine().unwrap();
        assert!(matches!(nve, Ensemble::Nve));
        let lan = EnsembleCfg::langevin(0.5, 2.0).to_engine().unwrap();
        assert!(matches!(lan, Ensemble::Langevin { t_target, gamma } if t_target == 0.5 && gamma == 2.0));
        // nve with thermostat fields, langevin with missing ones
        let bad: EnsembleCfg = parse(r#"{"kind":"nve","gamma":1.0}"#).unwrap();
        assert!(bad.to_engine().is_err());
        let bad: EnsembleCfg = parse(r#"{"kind":"langevin","t_target":1.0}"#).unwrap();
        assert!(bad.to_engine().is_err());
        assert!(parse::<EnsembleCfg>(r#"{"kind":"nve","extra":1}"#).is_err());
    }

    #[test]
    fn schedule_mirror_rejects_mixed_fields() {
        assert!(matches!(ScheduleCfg::log(9).to_engine().unwrap(), SampleSchedule::Log { per_decade: 9 }));
        let bad: ScheduleCfg = parse(r#"{"kind":"linear","per_decade":4}"#).unwrap();
        assert!(bad.to_engine().is_err());
    }

    #[test]
    fn decay_and_emissions_mirrors() {
        assert_eq!(DecayCfg::default().to_engine().unwrap(), DecayProfile::Constant);
        assert_eq!(
            DecayCfg::exponential(7.0).to_engine().unwrap(),
            DecayProfile::Exponential { half_life: 7.0 }
        );
        let bad: DecayCfg = parse(r#"{"kind":"constant","half_life":3.0}"#).unwrap();
        assert!(bad.to_engine().is_err());
        assert_eq!(
            EmissionsCfg::default().to_engine().unwrap(),
            EmissionsPath::Pulse { rate: 1.0, duration: 10.0 }
        );
        let zero: EmissionsCfg = parse(r#"{"kind":"zero"}"#).unwrap();
        assert_eq!(zero.to_engine().unwrap(), EmissionsPath::Zero);
    }

    #[test]
    fn cycle_params_default_to_unit_offset_from_trend() {
        // g = 0: trend is the constant a/s, so y0 = a/(1-c) + 1.
        let p = CycleParamsCfg::default().resolve().unwrap();
        assert!((p.y0 - 26.0).abs() < 1e-12);
        assert!((p.y1 - 26.0).abs() < 1e-12);
        let half: CycleParamsCfg = parse(r#"{"y0":3.0}"#).unwrap();
        assert!(half.resolve().is_err());
    }

    #[test]
    fn run_phase_builds_spec_with_seed() {
        let spec = RunPhase::default().to_spec(9).unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.dt, 0.002);
        assert!(matches!(spec.schedule, SampleSchedule::None));
    }
}

//! Greenhouse-gas bookkeeping on two levels: scalar potency accounting
//! (decay curves and time-horizon warming ratios), and small linear
//! compartment models whose feedback gain decides between bounded response
//! and runaway growth. The clathrate preset couples CO2, methane, and a
//! two-box temperature pair; the albedo preset replaces the gas pools with
//! an ice-loss integrator.
//!
//! Everything here is deliberately cross-checkable: the warming ratio has a
//! quadrature route and a closed-form route, and the clathrate preset's
//! critical gain has a determinant formula next to the eigenvalue bisection.

use num_complex::Complex64;

use crate::integrate::{integrate_adaptive, Output};
use crate::linalg::{eigenvalues_small, SmallMatrix};
use crate::series::TimeSeries;
use crate::{Error, Result};

/// Atmospheric methane half-life in years.
pub const METHANE_HALF_LIFE_YEARS: f64 = 7.0;

/// Heating potency of methane relative to CO2 in the superposition term.
/// Some tabulations use 78; 84 is the value adopted here.
pub const METHANE_POTENCY_DEFAULT: f64 = 84.0;

/// Trajectories are declared runaway once the sup norm exceeds this factor
/// times the initial scale.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Remaining methane after `t` years of exponential decay:
/// m0 * 2^(-t / half_life).
pub fn methane_decay(m0: f64, t: f64, half_life: f64) -> Result<f64> {
    if !(half_life > 0.0) {
        return Err(Error::validation(format!("half-life must be positive, got {half_life}")));
    }
    if !m0.is_finite() || !t.is_finite() {
        return Err(Error::validation(format!("non-finite arguments m0={m0}, t={t}")));
    }
    Ok(m0 * (-std::f64::consts::LN_2 * t / half_life).exp())
}

/// Combined radiative heating rate kappa * (c + potency * m).
pub fn superposition_heating(kappa: f64, c: f64, m: f64, methane_potency: f64) -> f64 {
    kappa * (c + methane_potency * m)
}

/// Normalized abundance-over-time profile of a gas after a unit pulse.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DecayProfile {
    /// Stays at 1 forever (the reference-gas idealization).
    Constant,
    Exponential { half_life: f64 },
}

impl DecayProfile {
    pub fn validate(&self) -> Result<()> {
        if let DecayProfile::Exponential { half_life } = self {
            if !(*half_life > 0.0) {
                return Err(Error::validation(format!(
                    "half-life must be positive, got {half_life}"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            DecayProfile::Constant => 1.0,
            DecayProfile::Exponential { half_life } => {
                (-std::f64::consts::LN_2 * t / half_life).exp()
            }
        }
    }

    /// Exact integral of `value` over [0, horizon].
    pub fn integral_to(&self, horizon: f64) -> f64 {
        match self {
            DecayProfile::Constant => horizon,
            DecayProfile::Exponential { half_life } => {
                let k = std::f64::consts::LN_2 / half_life;
                (1.0 - (-k * horizon).exp()) / k
            }
        }
    }
}

/// Warming-potential comparison of one gas against a reference over a fixed
/// horizon. `a_ratio` is the instantaneous radiative-efficiency ratio.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwpSpec {
    pub gas: DecayProfile,
    pub reference: DecayProfile,
    pub horizon: f64,
    pub a_ratio: f64,
}

impl GwpSpec {
    pub fn validate(&self) -> Result<()> {
        self.gas.validate()?;
        self.reference.validate()?;
        if !(self.horizon > 0.0) {
            return Err(Error::validation(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.a_ratio > 0.0) {
            return Err(Error::validation(format!("a_ratio must be positive, got {}", self.a_ratio)));
        }
        Ok(())
    }
}

/// Closed-form warming ratio: a_ratio times the quotient of the exact
/// profile integrals.
pub fn gwp_closed_form(spec: &GwpSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.a_ratio * spec.gas.integral_to(spec.horizon) / spec.reference.integral_to(spec.horizon))
}

/// Warming ratio by adaptive quadrature of both profile integrals,
/// cross-checked against [`gwp_closed_form`] to 1e-6 relative. The
/// quadrature value is returned.
pub fn gwp(spec: &GwpSpec) -> Result<f64> {
    spec.validate()?;
    let num = integrate_profile(&spec.gas, spec.horizon)?;
    let den = integrate_profile(&spec.reference, spec.horizon)?;
    let q = spec.a_ratio * num / den;
    let cf = gwp_closed_form(spec)?;
    if (q - cf).abs() > 1e-6 * cf.abs().max(1e-30) {
        return Err(Error::NotConverged(format!(
            "quadrature GWP {q} disagrees with closed form {cf}"
        )));
    }
    Ok(q)
}

/// Adaptive Simpson integral of a decay profile over [0, horizon], run
/// twice so the tolerance is set from a converged magnitude estimate.
fn integrate_profile(profile: &DecayProfile, horizon: f64) -> Result<f64> {
    let f = |t: f64| profile.value(t);
    let first = adaptive_simpson(&f, 0.0, horizon, 1e-8)?;
    adaptive_simpson(&f, 0.0, horizon, 1e-11 * first.abs().max(1e-30))
}

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let err = (left + right - whole) / 15.0;
    if err.abs() <= tol {
        return Ok(left + right + err);
    }
    if depth == 0 {
        return Err(Error::NonConvergence { what: "adaptive Simpson quadrature", iterations: 60 });
    }
    let half = 0.5 * tol;
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

/// Feedback coupling: the `target` compartment gains `gain` times the
/// `driver` compartment (linear mode) or `gain` times the excess of the
/// driver over `t_thr`, clipped at zero (threshold mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Release {
    pub driver: usize,
    pub target: usize,
    pub gain: f64,
    pub t_thr: f64,
    pub threshold: bool,
}

/// Linear compartment model dx/dt = base x + input e(t), plus an optional
/// release coupling kept separate so it can switch between its linear and
/// thresholded forms.
#[derive(Debug, Clone, PartialEq)]
pub struct CompartmentModel {
    names: Vec<String>,
    base: SmallMatrix,
    input: Vec<f64>,
    release: Option<Release>,
}

impl CompartmentModel {
    pub fn new(
        names: Vec<String>,
        base: SmallMatrix,
        input: Vec<f64>,
        release: Option<Release>,
    ) -> Result<Self> {
        let n = base.n();
        if names.len() != n || input.len() != n {
            return Err(Error::validation(format!(
                "dimension mismatch: matrix {n}, names {}, input {}",
                names.len(),
                input.len()
            )));
        }
        if let Some(r) = &release {
            if r.driver >= n || r.target >= n {
                return Err(Error::validation(format!(
                    "release indices ({}, {}) outside dimension {n}",
                    r.driver, r.target
                )));
            }
            if !r.gain.is_finite() || !r.t_thr.is_finite() {
                return Err(Error::validation("release gain and threshold must be finite"));
            }
        }
        Ok(CompartmentModel { names, base, input, release })
    }

    pub fn dim(&self) -> usize {
        self.base.n()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn release(&self) -> Option<&Release> {
        self.release.as_ref()
    }

    /// System matrix with the release folded in as a linear coupling. This
    /// is the matrix whose eigenvalues decide stability; in threshold mode
    /// it describes the dynamics above the threshold.
    pub fn matrix_linear(&self) -> SmallMatrix {
        let mut a = self.base.clone();
        if let Some(r) = &self.release {
            a.set(r.target, r.driver, a.get(r.target, r.driver) + r.gain);
        }
        a
    }

    /// Derivative at state x under emission rate e.
    pub fn rhs(&self, x: &[f64], e: f64, dxdt: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.input[i] * e;
            for j in 0..n {
                acc += self.base.get(i, j) * x[j];
            }
            dxdt[i] = acc;
        }
        if let Some(r) = &self.release {
            let drive =
                if r.threshold { (x[r.driver] - r.t_thr).max(0.0) } else { x[r.driver] };
            dxdt[r.target] += r.gain * drive;
        }
    }
}

/// Eigenvalue summary of a model's linear matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
    pub stable: bool,
}

pub fn stability(model: &CompartmentModel) -> Result<StabilityReport> {
    let eigs = eigenvalues_small(&model.matrix_linear())?;
    let max_real_part = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport { eigenvalues: eigs, max_real_part, stable: max_real_part < 0.0 })
}

/// Smallest gain at which the model family loses stability, by bisection on
/// the largest eigenvalue real part. The family must be stable at `lo` and
/// unstable at `hi`.
pub fn critical_gain(
    family: &dyn Fn(f64) -> Result<CompartmentModel>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(hi > lo) || !(tol > 0.0) {
        return Err(Error::validation(format!("need lo < hi and tol > 0, got [{lo}, {hi}], {tol}")));
    }
    let max_re = |g: f64| -> Result<f64> { Ok(stability(&family(g)?)?.max_real_part) };
    let fa = max_re(lo)?;
    let fb = max_re(hi)?;
    if fa == 0.0 {
        return Ok(lo);
    }
    if fb == 0.0 {
        return Ok(hi);
    }
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::NoBracket { a: lo, b: hi, fa, fb });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break; // f64 resolution exhausted
        }
        let fm = max_re(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Clathrate-feedback preset: CO2 `c`, methane `m`, atmospheric and ocean
/// temperatures `T_at`, `T_oc`. Methane decays into CO2 (oxidized fraction)
/// and out of the system; CO2 decays slowly; heating follows the
/// superposition rule; warm ocean water releases methane with gain
/// `beta_f`. Rates are per year.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClathrateSpec {
    /// Methane-to-CO2 oxidation rate.
    pub lambda_ox: f64,
    /// Methane loss that does not become CO2.
    pub lambda_other: f64,
    /// CO2 decay rate.
    pub lambda_c: f64,
    /// Radiative heating per unit CO2.
    pub kappa: f64,
    /// Methane potency multiplier in the heating term.
    pub methane_factor: f64,
    /// Outgoing-radiation damping on the atmospheric box.
    pub rho_out: f64,
    /// Atmosphere-ocean exchange rate.
    pub s_x: f64,
    /// Ocean box heat-capacity ratio (atmosphere / ocean).
    pub capacity_ratio: f64,
    /// Ocean-warming methane release gain.
    pub beta_f: f64,
    /// Release threshold on ocean temperature (threshold mode only).
    pub t_thr: f64,
    pub threshold: bool,
}

impl Default for ClathrateSpec {
    fn default() -> Self {
        let lambda_m = std::f64::consts::LN_2 / METHANE_HALF_LIFE_YEARS;
        ClathrateSpec {
            lambda_ox: 0.99 * lambda_m,
            lambda_other: 0.01 * lambda_m,
            lambda_c: 0.01,
            kappa: 0.01,
            methane_factor: METHANE_POTENCY_DEFAULT,
            rho_out: 0.5,
            s_x: 2.0,
            capacity_ratio: 1.0 / 400.0,
            beta_f: 0.02,
            t_thr: 0.5,
            threshold: false,
        }
    }
}

impl ClathrateSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_ox", self.lambda_ox),
            ("lambda_c", self.lambda_c),
            ("kappa", self.kappa),
            ("methane_factor", self.methane_factor),
            ("rho_out", self.rho_out),
            ("s_x", self.s_x),
            ("capacity_ratio", self.capacity_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_other >= 0.0) || !(self.beta_f >= 0.0) {
            return Err(Error::validation("lambda_other and beta_f must be non-negative"));
        }
        if !self.t_thr.is_finite() {
            return Err(Error::validation(format!("t_thr must be finite, got {}", self.t_thr)));
        }
        Ok(())
    }

    /// Gain at which the determinant of the linear matrix crosses zero,
    /// which for this family is where stability is lost:
    /// lambda_c * lambda_m * rho_out / (kappa (F lambda_c + lambda_ox)).
    pub fn analytic_critical_gain(&self) -> f64 {
        let lambda_m = self.lambda_ox + self.lambda_other;
        self.lambda_c * lambda_m * self.rho_out
            / (self.kappa * (self.methane_factor * self.lambda_c + self.lambda_ox))
    }
}

/// State index order for [`clathrate_model`].
pub const CLATHRATE_NAMES: [&str; 4] = ["c", "m", "T_at", "T_oc"];

pub fn clathrate_model(spec: &ClathrateSpec) -> Result<CompartmentModel> {
    spec.validate()?;
    let lambda_m = spec.lambda_ox + spec.lambda_other;
    let hs = spec.capacity_ratio * spec.s_x;
    let mut base = SmallMatrix::zeros(4);
    base.set(0, 0, -spec.lambda_c);
    base.set(0, 1, spec.lambda_ox);
    base.set(1, 1, -lambda_m);
    base.set(2, 0, spec.kappa);
    base.set(2, 1, spec.methane_factor * spec.kappa);
    base.set(2, 2, -(spec.rho_out + spec.s_x));
    base.set(2, 3, spec.s_x);
    base.set(3, 2, hs);
    base.set(3, 3, -hs);
    CompartmentModel::new(
        CLATHRATE_NAMES.iter().map(|s| s.to_string()).collect(),
        base,
        vec![1.0, 0.0, 0.0, 0.0],
        Some(Release {
            driver: 3,
            target: 1,
            gain: spec.beta_f,
            t_thr: spec.t_thr,
            threshold: spec.threshold,
        }),
    )
}

/// Albedo-feedback preset: ice-loss index `a`, then the same two-box
/// temperature pair. The index integrates ocean warming with gain `beta_f`
/// and has no restoring term, so every positive gain is supercritical.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlbedoSpec {
    /// Heating per unit ice-loss index.
    pub alpha_heat: f64,
    pub rho_out: f64,
    pub s_x: f64,
    pub capacity_ratio: f64,
    /// Ice-loss gain on ocean temperature.
    pub beta_f: f64,
    pub t_thr: f64,
    pub threshold: bool,
}

impl Default for AlbedoSpec {
    fn default() -> Self {
        AlbedoSpec {
            alpha_heat: 0.02,
            rho_out: 0.5,
            s_x: 2.0,
            capacity_ratio: 1.0 / 400.0,
            beta_f: 0.02,
            t_thr: 0.0,
            threshold: false,
        }
    }
}

impl AlbedoSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_heat", self.alpha_heat),
            ("rho_out", self.rho_out),
            ("s_x", self.s_x),
            ("capacity_ratio", self.capacity_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta_f >= 0.0) {
            return Err(Error::validation(format!("beta_f must be non-negative, got {}", self.beta_f)));
        }
        if !self.t_thr.is_finite() {
            return Err(Error::validation(format!("t_thr must be finite, got {}", self.t_thr)));
        }
        Ok(())
    }
}

/// State index order for [`albedo_model`].
pub const ALBEDO_NAMES: [&str; 3] = ["a", "T_at", "T_oc"];

pub fn albedo_model(spec: &AlbedoSpec) -> Result<CompartmentModel> {
    spec.validate()?;
    let hs = spec.capacity_ratio * spec.s_x;
    let mut base = SmallMatrix::zeros(3);
    base.set(1, 0, spec.alpha_heat);
    base.set(1, 1, -(spec.rho_out + spec.s_x));
    base.set(1, 2, spec.s_x);
    base.set(2, 1, hs);
    base.set(2, 2, -hs);
    CompartmentModel::new(
        ALBEDO_NAMES.iter().map(|s| s.to_string()).collect(),
        base,
        vec![0.0, 1.0, 0.0],
        Some(Release {
            driver: 2,
            target: 0,
            gain: spec.beta_f,
            t_thr: spec.t_thr,
            threshold: spec.threshold,
        }),
    )
}

/// Emission forcing over time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmissionsPath {
    Zero,
    Constant { rate: f64 },
    /// Constant rate on [0, duration), zero afterwards.
    Pulse { rate: f64, duration: f64 },
}

impl EmissionsPath {
    pub fn validate(&self) -> Result<()> {
        match self {
            EmissionsPath::Zero => Ok(()),
            EmissionsPath::Constant { rate } => {
                if rate.is_finite() {
                    Ok(())
                } else {
                    Err(Error::validation(format!("emission rate must be finite, got {rate}")))
                }
            }
            EmissionsPath::Pulse { rate, duration } => {
                if !rate.is_finite() {
                    return Err(Error::validation(format!("emission rate must be finite, got {rate}")));
                }
                if !(*duration > 0.0) {
                    return Err(Error::validation(format!(
                        "pulse duration must be positive, got {duration}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        match self {
            EmissionsPath::Zero => 0.0,
            EmissionsPath::Constant { rate } => *rate,
            EmissionsPath::Pulse { rate, duration } => {
                if t < *duration {
                    *rate
                } else {
                    0.0
                }
            }
        }
    }

    fn breakpoints(&self, t_end: f64) -> Vec<f64> {
        match self {
            EmissionsPath::Pulse { duration, .. } if *duration < t_end => vec![*duration],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Outcome {
    Bounded,
    Runaway { t_diverged: f64 },
}

#[derive(Debug, Clone)]
pub struct CompartmentRun {
    pub series: TimeSeries,
    pub outcome: Outcome,
}

/// Integrate a compartment model from `x0` over `horizon`, sampling every
/// `sample_dt`. The run stops early and is classified [`Outcome::Runaway`]
/// once the state sup norm exceeds [`DIVERGENCE_FACTOR`] times
/// max(|x0|_inf, 1); integration failure from unbounded growth is folded
/// into the same classification.
pub fn simulate_compartments(
    model: &CompartmentModel,
    emissions: &EmissionsPath,
    x0: &[f64],
    horizon: f64,
    sample_dt: f64,
) -> Result<CompartmentRun> {
    emissions.validate()?;
    if x0.len() != model.dim() {
        return Err(Error::validation(format!(
            "initial state has dimension {}, model has {}",
            x0.len(),
            model.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("initial state must be finite"));
    }
    if !(horizon > 0.0) || !(sample_dt > 0.0) || sample_dt > horizon {
        return Err(Error::validation(format!(
            "need 0 < sample_dt <= horizon, got sample_dt {sample_dt}, horizon {horizon}"
        )));
    }

    let scale = x0.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let limit = DIVERGENCE_FACTOR * scale;

    let n_samples = (horizon / sample_dt).floor() as usize;
    let mut boundaries: Vec<f64> = (1..=n_samples).map(|k| k as f64 * sample_dt).collect();
    if boundaries.last() != Some(&horizon) {
        boundaries.push(horizon);
    }
    for b in emissions.breakpoints(horizon) {
        if let Err(i) = boundaries.binary_search_by(|x| x.partial_cmp(&b).unwrap()) {
            // skip near-duplicates so no micro-interval reaches the integrator
            let eps = 1e-12 * b.abs().max(1.0);
            let near_prev = i > 0 && b - boundaries[i - 1] < eps;
            let near_next = i < boundaries.len() && boundaries[i] - b < eps;
            if !near_prev && !near_next {
                boundaries.insert(i, b);
            }
        }
    }
    let sample_set: Vec<f64> = (1..=n_samples).map(|k| k as f64 * sample_dt).collect();

    let mut series = TimeSeries::with_capacity(model.dim(), n_samples + 1);
    series.push(0.0, x0)?;

    let mut state = x0.to_vec();
    let mut t0 = 0.0;
    for &t1 in &boundaries {
        let rate = emissions.rate_at(0.5 * (t0 + t1));
        let mut rhs = |_t: f64, y: &[f64], dydt: &mut [f64]| model.rhs(y, rate, dydt);
        let seg =
            match integrate_adaptive(&mut rhs, &state, t0, t1, 1e-9, 1e-12, Output::Times(&[t1])) {
                Ok(s) => s,
                Err(Error::Blowup { .. }) | Err(Error::StepUnderflow { .. }) => {
                    return Ok(CompartmentRun { series, outcome: Outcome::Runaway { t_diverged: t1 } });
                }
                Err(e) => return Err(e),
            };
        let row = seg.last_row().expect("segment endpoint row");
        state.copy_from_slice(row);
        let is_sample = sample_set
            .binary_search_by(|x| x.partial_cmp(&t1).unwrap())
            .is_ok()
            || t1 == horizon;
        if is_sample {
            series.push(t1, &state)?;
        }
        let sup = state.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if sup > limit {
            return Ok(CompartmentRun { series, outcome: Outcome::Runaway { t_diverged: t1 } });
        }
        t0 = t1;
    }
    Ok(CompartmentRun { series, outcome: Outcome::Bounded })
}

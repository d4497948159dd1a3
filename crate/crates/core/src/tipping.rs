//! Bistable climate variable T in a double-well landscape, driven by a
//! control parameter alpha that either relaxes as a second coordinate
//! (coupled mode) or follows a prescribed schedule as an external tilt
//! (tilted mode). The low well sits near T = 0, the high well near T = 1.
//!
//! Landscape:
//! - coupled: V(T, a) = T^2 (T-1)^2 + a^2
//! - tilted:  V(T, a) = T^2 (T-1)^2 - a T
//!
//! In tilted mode the low well vanishes at the fold alpha_c = sqrt(3)/9, so
//! a slow ramp of alpha past alpha_c forces the transition; ramping back
//! does not undo it, which is the hysteresis probed by
//! [`hysteresis_experiment`].

use crate::integrate::euler_maruyama_step;
use crate::parallel::map_indexed;
use crate::rng::RngStream;
use crate::series::TimeSeries;
use crate::{Error, Result};

/// How alpha enters the landscape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// alpha is a second relaxing coordinate, minimum at alpha = 0.
    Coupled,
    /// alpha is an external tilt following a schedule.
    Tilted,
}

/// Which well a state sits in. T = 0.5 counts as Low by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basin {
    Low,
    High,
}

pub fn basin_of(tt: f64) -> Basin {
    if tt <= 0.5 {
        Basin::Low
    } else {
        Basin::High
    }
}

pub fn potential(tt: f64, alpha: f64, mode: CouplingMode) -> f64 {
    let well = tt * tt * (tt - 1.0) * (tt - 1.0);
    match mode {
        CouplingMode::Coupled => well + alpha * alpha,
        CouplingMode::Tilted => well - alpha * tt,
    }
}

/// Gradient of the landscape as (dV/dT, dV/dalpha). In tilted mode alpha is
/// a control, not a coordinate, so its slot is 0.
pub fn gradient(tt: f64, alpha: f64, mode: CouplingMode) -> (f64, f64) {
    let dwell = 2.0 * tt * (tt - 1.0) * (2.0 * tt - 1.0);
    match mode {
        CouplingMode::Coupled => (dwell, 2.0 * alpha),
        CouplingMode::Tilted => (dwell - alpha, 0.0),
    }
}

/// Piecewise-linear alpha schedule: zero until `t_change`, then a ramp at
/// `ramp_rate` up to `alpha_max`; if `return_rate` is set, a ramp back down
/// to zero immediately after the peak. Continuous in t.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaSchedule {
    pub t_change: f64,
    pub ramp_rate: f64,
    pub alpha_max: f64,
    pub return_rate: Option<f64>,
}

impl Default for AlphaSchedule {
    /// The ramp used by the default hysteresis experiment.
    fn default() -> Self {
        AlphaSchedule { t_change: 5.0, ramp_rate: 0.01, alpha_max: 0.4, return_rate: Some(0.01) }
    }
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.t_change < 0.0 || !self.t_change.is_finite() {
            return Err(Error::validation(format!("t_change must be >= 0, got {}", self.t_change)));
        }
        if !(self.ramp_rate > 0.0) {
            return Err(Error::validation(format!(
                "ramp_rate must be positive, got {}",
                self.ramp_rate
            )));
        }
        if !(self.alpha_max > 0.0) {
            return Err(Error::validation(format!(
                "alpha_max must be positive, got {}",
                self.alpha_max
            )));
        }
        if let Some(r) = self.return_rate {
            if !(r > 0.0) {
                return Err(Error::validation(format!("return_rate must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Time at which the upward ramp reaches alpha_max.
    pub fn t_peak(&self) -> f64 {
        self.t_change + self.alpha_max / self.ramp_rate
    }

    /// Time at which alpha is back to zero, if a return ramp exists.
    pub fn t_returned(&self) -> Option<f64> {
        self.return_rate.map(|r| self.t_peak() + self.alpha_max / r)
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        if t <= self.t_change {
            return 0.0;
        }
        let up = self.ramp_rate * (t - self.t_change);
        if up <= self.alpha_max {
            return up;
        }
        match self.return_rate {
            None => self.alpha_max,
            Some(r) => (self.alpha_max - r * (t - self.t_peak())).clamp(0.0, self.alpha_max),
        }
    }
}

/// Langevin run setup. Noise enters only the T equation; in coupled mode
/// alpha relaxes deterministically down its own gradient.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TippingParams {
    pub mode_tilted: bool,
    pub diffusion: f64,
    pub dt: f64,
    pub steps: usize,
    pub initial_t: f64,
    /// Starting alpha; in tilted mode only used when no schedule is given.
    pub initial_alpha: f64,
    pub schedule: Option<AlphaSchedule>,
    /// Record every `sample_stride`-th step (the initial state is always
    /// recorded).
    pub sample_stride: usize,
}

impl TippingParams {
    pub fn mode(&self) -> CouplingMode {
        if self.mode_tilted {
            CouplingMode::Tilted
        } else {
            CouplingMode::Coupled
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion >= 0.0) {
            return Err(Error::validation(format!("diffusion must be >= 0, got {}", self.diffusion)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::validation(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::validation("steps must be positive"));
        }
        if self.sample_stride == 0 {
            return Err(Error::validation("sample_stride must be positive"));
        }
        if !self.mode_tilted && self.schedule.is_some() {
            return Err(Error::validation(
                "alpha schedule only applies in tilted mode; coupled mode evolves alpha",
            ));
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }
}

impl Default for TippingParams {
    /// Calibrated so that the default hysteresis experiment (see
    /// [`hysteresis_experiment`]) transitions forward on essentially every
    /// seed and never returns: slow ramp to about twice the fold value,
    /// weak noise against the 1/16 barrier of the restored double well.
    fn default() -> Self {
        TippingParams {
            mode_tilted: true,
            diffusion: 0.002,
            dt: 0.01,
            steps: 11_000,
            initial_t: 0.0,
            initial_alpha: 0.0,
            schedule: Some(AlphaSchedule::default()),
            sample_stride: 10,
        }
    }
}

/// Overdamped Langevin trajectory: T <- T - dV/dT dt + sqrt(2 D dt) xi.
/// Rows are [T, alpha].
pub fn langevin_run(params: &TippingParams, rng: &mut RngStream) -> Result<TimeSeries> {
    params.validate()?;
    let mode = params.mode();
    let noise_amp = (2.0 * params.diffusion).sqrt();
    let mut tt = params.initial_t;
    let mut alpha = match (&params.schedule, mode) {
        (Some(s), CouplingMode::Tilted) => s.alpha_at(0.0),
        _ => params.initial_alpha,
    };

    let rows = params.steps / params.sample_stride + 2;
    let mut series = TimeSeries::with_capacity(2, rows);
    series.push(0.0, &[tt, alpha])?;

    for k in 0..params.steps {
        let t = k as f64 * params.dt;
        match mode {
            CouplingMode::Tilted => {
                let a = alpha;
                tt = euler_maruyama_step(
                    &mut |_, y, d| d[0] = -gradient(y[0], a, CouplingMode::Tilted).0,
                    noise_amp,
                    t,
                    &[tt],
                    params.dt,
                    rng,
                )?[0];
                alpha = match &params.schedule {
                    Some(s) => s.alpha_at(t + params.dt),
                    None => alpha,
                };
            }
            CouplingMode::Coupled => {
                let (g_t, g_a) = gradient(tt, alpha, mode);
                tt += -g_t * params.dt + noise_amp * params.dt.sqrt() * rng.gaussian();
                alpha -= g_a * params.dt;
            }
        }
        if !tt.is_finite() {
            return Err(Error::Blowup {
                where_: format!("t={}", t + params.dt),
                detail: "tipping trajectory left the finite range".into(),
            });
        }
        if (k + 1) % params.sample_stride == 0 || k + 1 == params.steps {
            series.push((k as f64 + 1.0) * params.dt, &[tt, alpha])?;
        }
    }
    Ok(series)
}

/// Result of a deterministic gradient descent.
#[derive(Debug, Clone)]
pub struct GradientFlow {
    pub path: TimeSeries,
    pub terminal: (f64, f64),
    pub basin: Basin,
}

/// Euler descent on the landscape with D = 0. Stops when the gradient norm
/// falls below 1e-8; |T| > 10 is treated as divergence.
pub fn gradient_flow(
    start: (f64, f64),
    mode: CouplingMode,
    dt: f64,
    max_steps: usize,
) -> Result<GradientFlow> {
    if !(dt > 0.0) {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    let (mut tt, mut alpha) = start;
    let mut path = TimeSeries::new(2);
    path.push(0.0, &[tt, alpha])?;
    for k in 0..max_steps {
        let (g_t, g_a) = gradient(tt, alpha, mode);
        if g_t.abs().max(g_a.abs()) <= 1e-8 {
            return Ok(GradientFlow { path, terminal: (tt, alpha), basin: basin_of(tt) });
        }
        tt -= g_t * dt;
        if let CouplingMode::Coupled = mode {
            alpha -= g_a * dt;
        }
        if tt.abs() > 10.0 {
            return Err(Error::Blowup {
                where_: format!("step {k}"),
                detail: format!("gradient flow diverged: |T| = {} > 10", tt.abs()),
            });
        }
        path.push((k as f64 + 1.0) * dt, &[tt, alpha])?;
    }
    Err(Error::NonConvergence { what: "gradient flow", iterations: max_steps })
}

/// Fold point of the tilted landscape: the smallest alpha > 0 at which
/// dV/dT = 4T^3 - 6T^2 + 2T - alpha acquires a double root in (0, 0.5).
/// Located by bisecting the tangency condition d2V/dT2 = 0 on (0, 0.5);
/// the exact value is sqrt(3)/9, returned to much better than 1e-6.
pub fn critical_alpha() -> f64 {
    let curvature = |t: f64| 12.0 * t * t - 12.0 * t + 2.0;
    let t_star = crate::rootfind::find_root_bisect(curvature, 0.0, 0.5, 1e-9)
        .expect("curvature changes sign on (0, 0.5)");
    4.0 * t_star.powi(3) - 6.0 * t_star * t_star + 2.0 * t_star
}

/// First passage time from the given start to the high basin (T > 0.5) in
/// tilted mode at fixed alpha. None if the cap is reached first.
pub fn first_passage_to_high(
    diffusion: f64,
    alpha: f64,
    start_t: f64,
    dt: f64,
    max_steps: usize,
    rng: &mut RngStream,
) -> Option<f64> {
    let noise_amp = (2.0 * diffusion).sqrt();
    let mut tt = start_t;
    for k in 0..max_steps {
        let g = gradient(tt, alpha, CouplingMode::Tilted).0;
        tt += -g * dt + noise_amp * dt.sqrt() * rng.gaussian();
        if tt > 0.5 {
            return Some((k as f64 + 1.0) * dt);
        }
    }
    None
}

/// Outcome of a multi-seed hysteresis sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HysteresisSummary {
    /// Fraction of seeds in the high basin when the upward ramp completes.
    pub forward_fraction: f64,
    /// Fraction of seeds back in the low basin at the end of the run,
    /// after alpha has returned to zero.
    pub return_fraction: f64,
    pub seeds: usize,
}

/// Run the schedule once per seed and report basin fractions at the top of
/// the ramp and after the return. Seeds are independent substreams of
/// `base_seed`, evaluated in parallel with a fixed per-seed order, so the
/// summary does not depend on thread count.
pub fn hysteresis_experiment(
    params: &TippingParams,
    n_seeds: usize,
    base_seed: u64,
) -> Result<HysteresisSummary> {
    params.validate()?;
    if n_seeds == 0 {
        return Err(Error::validation("n_seeds must be positive"));
    }
    if !params.mode_tilted {
        return Err(Error::validation("hysteresis experiment requires tilted mode"));
    }
    let schedule = params
        .schedule
        .as_ref()
        .ok_or_else(|| Error::validation("hysteresis experiment requires an alpha schedule"))?;
    if schedule.alpha_max <= critical_alpha() {
        return Err(Error::validation(format!(
            "schedule peaks at {} which never crosses the fold at {:.6}",
            schedule.alpha_max,
            critical_alpha()
        )));
    }
    let t_returned = schedule.t_returned().ok_or_else(|| {
        Error::validation("hysteresis experiment requires a return ramp")
    })?;
    let t_end = params.steps as f64 * params.dt;
    if t_end < t_returned {
        return Err(Error::validation(format!(
            "run ends at t={t_end} before alpha returns to zero at t={t_returned}"
        )));
    }

    let noise_amp = (2.0 * params.diffusion).sqrt();
    let t_peak = schedule.t_peak();
    let outcomes: Vec<(bool, bool)> = map_indexed(n_seeds, |i| {
        let mut rng = RngStream::substream(base_seed, i as u64);
        let mut tt = params.initial_t;
        let mut high_at_peak = false;
        let mut peak_seen = false;
        for k in 0..params.steps {
            let t = k as f64 * params.dt;
            let alpha = schedule.alpha_at(t);
            let g = gradient(tt, alpha, CouplingMode::Tilted).0;
            tt += -g * params.dt + noise_amp * params.dt.sqrt() * rng.gaussian();
            if !peak_seen && (t + params.dt) >= t_peak {
                high_at_peak = basin_of(tt) == Basin::High;
                peak_seen = true;
            }
        }
        (high_at_peak, basin_of(tt) == Basin::Low)
    });

    let forward = outcomes.iter().filter(|o| o.0).count();
    let returned = outcomes.iter().filter(|o| o.1).count();
    Ok(HysteresisSummary {
        forward_fraction: forward as f64 / n_seeds as f64,
        return_fraction: returned as f64 / n_seeds as f64,
        seeds: n_seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_values() {
        assert_eq!(potential(0.0, 0.0, CouplingMode::Coupled), 0.0);
        assert_eq!(potential(1.0, 0.0, CouplingMode::Coupled), 0.0);
        // barrier top of the symmetric well
        assert!((potential(0.5, 0.0, CouplingMode::Coupled) - 1.0 / 16.0).abs() < 1e-15);
        assert!((potential(0.5, 0.3, CouplingMode::Coupled) - (1.0 / 16.0 + 0.09)).abs() < 1e-15);
        assert!((potential(0.5, 0.3, CouplingMode::Tilted) - (1.0 / 16.0 - 0.15)).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-6;
        let mut rng = RngStream::new(404);
        for _ in 0..1000 {
            let tt = rng.uniform_in(-1.0, 2.0);
            let alpha = rng.uniform_in(-0.5, 0.5);
            for mode in [CouplingMode::Coupled, CouplingMode::Tilted] {
                let (g_t, g_a) = gradient(tt, alpha, mode);
                let fd_t =
                    (potential(tt + h, alpha, mode) - potential(tt - h, alpha, mode)) / (2.0 * h);
                assert!((g_t - fd_t).abs() <= 1e-6 * (1.0 + g_t.abs()), "dT {g_t} vs {fd_t}");
                if let CouplingMode::Coupled = mode {
                    let fd_a = (potential(tt, alpha + h, mode) - potential(tt, alpha - h, mode))
                        / (2.0 * h);
                    assert!((g_a - fd_a).abs() <= 1e-6 * (1.0 + g_a.abs()), "dA {g_a} vs {fd_a}");
                }
            }
        }
    }

    #[test]
    fn basin_convention() {
        assert_eq!(basin_of(0.49), Basin::Low);
        assert_eq!(basin_of(0.5), Basin::Low);
        assert_eq!(basin_of(0.51), Basin::High);
    }

    #[test]
    fn schedule_shape() {
        let s = AlphaSchedule {
            t_change: 10.0,
            ramp_rate: 0.02,
            alpha_max: 0.3,
            return_rate: Some(0.01),
        };
        s.validate().unwrap();
        assert_eq!(s.alpha_at(0.0), 0.0);
        assert_eq!(s.alpha_at(10.0), 0.0);
        assert!((s.alpha_at(15.0) - 0.1).abs() < 1e-12);
        assert!((s.t_peak() - 25.0).abs() < 1e-12);
        assert_eq!(s.alpha_at(25.0), 0.3);
        // down ramp: 30 time units back to zero
        assert!((s.alpha_at(40.0) - 0.15).abs() < 1e-12);
        assert_eq!(s.alpha_at(55.0), 0.0);
        assert_eq!(s.alpha_at(100.0), 0.0);
        // continuity at the kinks
        for t in [10.0, 25.0, 55.0] {
            let eps = 1e-9;
            assert!((s.alpha_at(t + eps) - s.alpha_at(t - eps)).abs() < 1e-6);
        }
    }

    #[test]
    fn critical_alpha_is_sqrt3_over_9() {
        let exact = 3.0f64.sqrt() / 9.0;
        assert!((critical_alpha() - exact).abs() <= 1e-6, "{}", critical_alpha());
    }
}

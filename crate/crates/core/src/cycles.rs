//! Second-order income dynamics: consumption lags income by one period,
//! investment responds to the change in income, autonomous spending grows
//! geometrically. The recursion
//!
//! ```text
//! Y(t) = (c + v) Y(t-1) - v Y(t-2) + A (1+g)^t
//! ```
//!
//! has characteristic roots of lambda^2 - (c+v) lambda + v = 0; complex
//! roots mean oscillation with period 2 pi / theta and per-period amplitude
//! factor |lambda| = sqrt(v).

use num_complex::Complex64;

use crate::linalg;
use crate::series::TimeSeries;
use crate::{Error, Result};

/// Reporting cap: iteration stops once |Y| exceeds this and the path is
/// flagged explosive.
pub const OVERFLOW_CAP: f64 = 1e15;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CycleParams {
    /// Marginal propensity to consume, 0 < c < 1.
    pub c: f64,
    /// Accelerator coefficient, >= 0.
    pub nu: f64,
    /// Autonomous expenditure at t = 0.
    pub a: f64,
    /// Growth rate of autonomous expenditure per period.
    pub g: f64,
    /// Initial incomes Y(0) and Y(1).
    pub y0: f64,
    pub y1: f64,
}

impl CycleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::validation(format!("need 0 < c < 1, got c = {}", self.c)));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::validation(format!("need nu >= 0, got {}", self.nu)));
        }
        if !(self.g > -1.0) || !self.g.is_finite() {
            return Err(Error::validation(format!("need g > -1, got {}", self.g)));
        }
        for (name, v) in [("a", self.a), ("y0", self.y0), ("y1", self.y1)] {
            if !v.is_finite() {
                return Err(Error::validation(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Stationary income of the first-order system (nu = 0, g = 0): A / (1 - c).
pub fn steady_state(c: f64, a: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::validation(format!("need 0 < c < 1, got c = {c}")));
    }
    Ok(a / (1.0 - c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    DampedMonotonic,
    DampedOscillatory,
    NeutralMonotonic,
    NeutralOscillatory,
    ExplosiveMonotonic,
    ExplosiveOscillatory,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::DampedMonotonic => "damped_monotonic",
            Regime::DampedOscillatory => "damped_oscillatory",
            Regime::NeutralMonotonic => "neutral_monotonic",
            Regime::NeutralOscillatory => "neutral_oscillatory",
            Regime::ExplosiveMonotonic => "explosive_monotonic",
            Regime::ExplosiveOscillatory => "explosive_oscillatory",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootAnalysis {
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    /// Dominant modulus; sqrt(nu) in the complex case.
    pub modulus: f64,
    /// Rotation per period, set only for complex roots.
    pub theta: Option<f64>,
    /// 2 pi / theta, set only for complex roots.
    pub period: Option<f64>,
    pub regime: Regime,
}

impl RootAnalysis {
    pub fn oscillatory(&self) -> bool {
        self.theta.is_some()
    }
}

/// Roots of lambda^2 - (c + nu) lambda + nu = 0 with regime classification.
/// Oscillation appears exactly when the discriminant (c+nu)^2 - 4 nu goes
/// negative, i.e. c < 2 sqrt(nu) - nu.
pub fn characteristic_roots(c: f64, nu: f64) -> Result<RootAnalysis> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::validation(format!("need 0 < c < 1, got c = {c}")));
    }
    if !(nu > 0.0) {
        return Err(Error::validation(format!("need nu > 0, got {nu}")));
    }
    let b = c + nu;
    let disc = b * b - 4.0 * nu;
    let (lambda1, lambda2, modulus, theta) = if disc < 0.0 {
        let re = 0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        let modulus = nu.sqrt();
        let theta = im.atan2(re); // equals acos(b / (2 sqrt(nu)))
        (Complex64::new(re, im), Complex64::new(re, -im), modulus, Some(theta))
    } else {
        let sq = disc.sqrt();
        let l1 = 0.5 * (b + sq);
        let l2 = 0.5 * (b - sq);
        (Complex64::new(l1, 0.0), Complex64::new(l2, 0.0), l1.abs().max(l2.abs()), None)
    };
    let regime = match (modulus.partial_cmp(&1.0).unwrap(), theta.is_some()) {
        (std::cmp::Ordering::Less, false) => Regime::DampedMonotonic,
        (std::cmp::Ordering::Less, true) => Regime::DampedOscillatory,
        (std::cmp::Ordering::Equal, false) => Regime::NeutralMonotonic,
        (std::cmp::Ordering::Equal, true) => Regime::NeutralOscillatory,
        (std::cmp::Ordering::Greater, false) => Regime::ExplosiveMonotonic,
        (std::cmp::Ordering::Greater, true) => Regime::ExplosiveOscillatory,
    };
    Ok(RootAnalysis {
        lambda1,
        lambda2,
        modulus,
        theta,
        period: theta.map(|th| 2.0 * std::f64::consts::PI / th),
        regime,
    })
}

/// Same roots from the companion matrix, for cross-checking the quadratic
/// formula against the general eigensolver.
pub fn characteristic_roots_via_companion(c: f64, nu: f64) -> Result<Vec<Complex64>> {
    let m = linalg::companion_matrix(&[nu, -(c + nu), 1.0]);
    linalg::eigenvalues_small(&m)
}

#[derive(Debug, Clone)]
pub struct IncomePath {
    /// Rows are [Y].
    pub series: TimeSeries,
    /// True when the run hit `OVERFLOW_CAP` and stopped early.
    pub explosive: bool,
}

/// Iterate the recursion for `steps` periods past t = 1, recording from
/// t = 0. Stops early (flagged) if |Y| exceeds the cap.
pub fn iterate(params: &CycleParams, steps: usize) -> Result<IncomePath> {
    params.validate()?;
    let mut series = TimeSeries::with_capacity(1, steps + 2);
    let mut explosive = false;
    let mut prev = params.y0;
    let mut cur = params.y1;
    series.push(0.0, &[prev])?;
    if steps >= 1 {
        series.push(1.0, &[cur])?;
    }
    let mut scale = 1.0 + params.g; // (1+g)^t at the t being generated
    for t in 2..=steps {
        scale *= 1.0 + params.g;
        let next = (params.c + params.nu) * cur - params.nu * prev + params.a * scale;
        if next.abs() > OVERFLOW_CAP {
            explosive = true;
            break;
        }
        series.push(t as f64, &[next])?;
        prev = cur;
        cur = next;
    }
    Ok(IncomePath { series, explosive })
}

/// Iterate with a floor and ceiling given as multiples of the (1+g)^t trend.
/// Clamping is applied before the value propagates into later periods, so a
/// binding ceiling genuinely caps the dynamics rather than just the output.
/// Pass infinite multiples to disable a side.
pub fn restricted_iterate(
    params: &CycleParams,
    steps: usize,
    floor_mult: f64,
    ceil_mult: f64,
) -> Result<IncomePath> {
    params.validate()?;
    if floor_mult > ceil_mult {
        return Err(Error::validation(format!(
            "floor multiple {floor_mult} above ceiling multiple {ceil_mult}"
        )));
    }
    let clamp = |y: f64, trend: f64| y.clamp(floor_mult * trend, ceil_mult * trend);
    let mut series = TimeSeries::with_capacity(1, steps + 2);
    let mut explosive = false;
    let mut prev = clamp(params.y0, 1.0);
    let mut cur = clamp(params.y1, 1.0 + params.g);
    series.push(0.0, &[prev])?;
    if steps >= 1 {
        series.push(1.0, &[cur])?;
    }
    let mut scale = 1.0 + params.g;
    for t in 2..=steps {
        scale *= 1.0 + params.g;
        let raw = (params.c + params.nu) * cur - params.nu * prev + params.a * scale;
        let next = clamp(raw, scale);
        if next.abs() > OVERFLOW_CAP {
            explosive = true;
            break;
        }
        series.push(t as f64, &[next])?;
        prev = cur;
        cur = next;
    }
    Ok(IncomePath { series, explosive })
}

/// Particular (moving-equilibrium) solution: B (1+g)^t with
/// B = (1+g)^2 A / ((1+g)(s+g) - nu g), s = 1 - c. Reduces to A/s at g = 0.
fn particular_coefficient(params: &CycleParams) -> Result<f64> {
    let s = 1.0 - params.c;
    let gp = 1.0 + params.g;
    let denom = gp * (s + params.g) - params.nu * params.g;
    if denom.abs() < 1e-12 * (1.0 + params.nu.abs() + s.abs()) {
        return Err(Error::validation(format!(
            "trend resonance: (1+g)(s+g) - nu g = {denom:e} is too close to zero"
        )));
    }
    Ok(gp * gp * params.a / denom)
}

/// Amplitude and phase of the oscillatory homogeneous component, fitted to
/// the first two incomes: Y(t) - P(t) = |lambda|^t delta cos(theta t - eps),
/// delta >= 0, eps in (-pi, pi].
pub fn fit_initial(params: &CycleParams) -> Result<(f64, f64)> {
    params.validate()?;
    let roots = characteristic_roots(params.c, params.nu)?;
    let theta = roots.theta.ok_or_else(|| {
        Error::validation("fit_initial needs complex roots; real case uses two exponentials")
    })?;
    let b = particular_coefficient(params)?;
    let z0 = params.y0 - b;
    let z1 = params.y1 - b * (1.0 + params.g);
    let d_cos = z0;
    let d_sin = (z1 / roots.modulus - z0 * theta.cos()) / theta.sin();
    let delta = d_cos.hypot(d_sin);
    let eps = if delta == 0.0 {
        0.0
    } else {
        let e = d_sin.atan2(d_cos);
        if e == -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            e
        }
    };
    Ok((delta, eps))
}

/// Evaluate the closed-form path on t = 0..=steps.
///
/// Complex roots give trend + |lambda|^t delta cos(theta t - eps); real
/// distinct roots are routed to the two-exponential form a l1^t + b l2^t,
/// a repeated root to (a + b t) l^t.
pub fn closed_form(params: &CycleParams, steps: usize) -> Result<IncomePath> {
    params.validate()?;
    let roots = characteristic_roots(params.c, params.nu)?;
    let bcoef = particular_coefficient(params)?;
    let gp = 1.0 + params.g;
    let z0 = params.y0 - bcoef;
    let z1 = params.y1 - bcoef * gp;

    enum Homog {
        Oscillatory { modulus: f64, theta: f64, delta: f64, eps: f64 },
        TwoExponential { l1: f64, l2: f64, a: f64, b: f64 },
        Repeated { l: f64, a: f64, b: f64 },
    }
    let hom = match roots.theta {
        Some(theta) => {
            let (delta, eps) = fit_initial(params)?;
            Homog::Oscillatory { modulus: roots.modulus, theta, delta, eps }
        }
        None => {
            let l1 = roots.lambda1.re;
            let l2 = roots.lambda2.re;
            if (l1 - l2).abs() > 1e-9 * l1.abs().max(l2.abs()).max(1.0) {
                let b = (z1 - l1 * z0) / (l2 - l1);
                Homog::TwoExponential { l1, l2, a: z0 - b, b }
            } else {
                // repeated root; l = (c+nu)/2 > 0 since c > 0
                let l = 0.5 * (l1 + l2);
                let a = z0;
                Homog::Repeated { l, a, b: z1 / l - a }
            }
        }
    };

    let mut series = TimeSeries::with_capacity(1, steps + 2);
    let mut explosive = false;
    for t in 0..=steps {
        let trend = bcoef * gp.powi(t as i32);
        let h = match &hom {
            Homog::Oscillatory { modulus, theta, delta, eps } => {
                modulus.powi(t as i32) * delta * (theta * t as f64 - eps).cos()
            }
            Homog::TwoExponential { l1, l2, a, b } => {
                a * l1.powi(t as i32) + b * l2.powi(t as i32)
            }
            Homog::Repeated { l, a, b } => (a + b * t as f64) * l.powi(t as i32),
        };
        let y = trend + h;
        if y.abs() > OVERFLOW_CAP {
            explosive = true;
            break;
        }
        series.push(t as f64, &[y])?;
    }
    Ok(IncomePath { series, explosive })
}

/// Additive trend/cycle/residual split by centered moving averages.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub cycle: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Centered moving average with truncated windows at the edges.
fn centered_ma(x: &[f64], window: usize) -> Vec<f64> {
    let h = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(x.len() - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Split a series into trend (long centered MA), cycle (short centered MA of
/// the detrended values) and residual. The three parts sum back to the input
/// exactly, because the residual is defined as the remainder.
pub fn decompose(values: &[f64], long_window: usize, short_window: usize) -> Result<Decomposition> {
    if values.is_empty() {
        return Err(Error::validation("decompose needs a non-empty series"));
    }
    for (name, w) in [("long_window", long_window), ("short_window", short_window)] {
        if w == 0 || w % 2 == 0 {
            return Err(Error::validation(format!("{name} must be odd and positive, got {w}")));
        }
    }
    if short_window >= long_window {
        return Err(Error::validation(format!(
            "short_window {short_window} must be below long_window {long_window}"
        )));
    }
    let trend = centered_ma(values, long_window);
    let detrended: Vec<f64> = values.iter().zip(&trend).map(|(v, t)| v - t).collect();
    let cycle = centered_ma(&detrended, short_window);
    let residual: Vec<f64> =
        (0..values.len()).map(|i| values[i] - trend[i] - cycle[i]).collect();
    Ok(Decomposition { trend, cycle, residual })
}

/// The two long-run ratios: employment e = L / L_supply and wage share
/// v = W L / (p Y), computed elementwise.
pub fn great_ratios(
    w: &[f64],
    l: &[f64],
    p: &[f64],
    y: &[f64],
    l_supply: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = w.len();
    if [l.len(), p.len(), y.len(), l_supply.len()].iter().any(|&m| m != n) {
        return Err(Error::validation("ratio inputs must share one length"));
    }
    let mut e = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        if l_supply[i] == 0.0 {
            return Err(Error::validation(format!("labor supply is zero at index {i}")));
        }
        let py = p[i] * y[i];
        if py == 0.0 {
            return Err(Error::validation(format!("nominal output p*Y is zero at index {i}")));
        }
        e.push(l[i] / l_supply[i]);
        v.push(w[i] * l[i] / py);
    }
    Ok((e, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_state_example() {
        assert!((steady_state(0.8, 100.0).unwrap() - 500.0).abs() < 1e-9);
        assert!(steady_state(1.0, 100.0).is_err());
    }

    #[test]
    fn roots_complex_example() {
        // c = 0.6, nu = 1.2: explosive oscillation with period near 10.4
        let r = characteristic_roots(0.6, 1.2).unwrap();
        assert!((r.lambda1.re - 0.9).abs() < 1e-12);
        assert!((r.lambda1.im - 0.6245).abs() < 1e-4);
        assert!((r.modulus - 1.2f64.sqrt()).abs() < 1e-12);
        // theta = atan2(sqrt(1.56)/2, 0.9) = 0.606613, period 10.3578
        let theta = r.theta.unwrap();
        assert!((theta - 0.606613).abs() < 1e-5, "theta {theta}");
        assert!((r.period.unwrap() - 10.3578).abs() < 1e-3);
        assert_eq!(r.regime, Regime::ExplosiveOscillatory);
    }

    #[test]
    fn root_identities_hold() {
        // product nu, sum c + nu
        let mut rng = crate::rng::RngStream::new(7);
        for _ in 0..1000 {
            let c = rng.uniform_in(0.01, 0.99);
            let nu = rng.uniform_in(0.01, 3.0);
            let r = characteristic_roots(c, nu).unwrap();
            let prod = r.lambda1 * r.lambda2;
            let sum = r.lambda1 + r.lambda2;
            assert!((prod.re - nu).abs() <= 1e-12 * nu.max(1.0), "prod {prod} nu {nu}");
            assert!(prod.im.abs() <= 1e-12);
            assert!((sum.re - (c + nu)).abs() <= 1e-12 * (c + nu));
            assert!(sum.im.abs() <= 1e-12);
        }
    }

    #[test]
    fn oscillation_boundary_matches_discriminant() {
        for nu in [0.3, 0.5, 0.9, 1.0, 1.5, 2.5] {
            let boundary: f64 = 2.0 * f64::sqrt(nu) - nu;
            for dc in [-0.05, -0.01, 0.01, 0.05] {
                let c = boundary + dc;
                if !(0.0 < c && c < 1.0) {
                    continue;
                }
                let r = characteristic_roots(c, nu).unwrap();
                assert_eq!(
                    r.oscillatory(),
                    c < boundary,
                    "c {c} nu {nu} boundary {boundary}"
                );
            }
        }
    }

    #[test]
    fn iterate_stays_at_steady_state() {
        // nu = 0, g = 0, started at A/(1-c): constant forever
        let p = CycleParams { c: 0.8, nu: 0.0, a: 100.0, g: 0.0, y0: 500.0, y1: 500.0 };
        let path = iterate(&p, 50).unwrap();
        assert!(!path.explosive);
        for (_, row) in path.series.iter() {
            assert!((row[0] - 500.0).abs() < 1e-9);
        }
    }

    #[test]
    fn iterate_caps_explosive_runs() {
        let p = CycleParams { c: 0.9, nu: 3.0, a: 1.0, g: 0.0, y0: 1.0, y1: 2.0 };
        let path = iterate(&p, 100_000).unwrap();
        assert!(path.explosive);
        assert!(path.series.len() < 100_000);
        for (_, row) in path.series.iter() {
            assert!(row[0].abs() <= OVERFLOW_CAP);
        }
    }

    #[test]
    fn restricted_iterate_pins_to_trend() {
        let p = CycleParams { c: 0.6, nu: 1.2, a: 10.0, g: 0.03, y0: 25.0, y1: 80.0 };
        let path = restricted_iterate(&p, 60, 2.0, 2.0).unwrap();
        for (t, row) in path.series.iter() {
            let trend = 2.0 * 1.03f64.powi(t as i32);
            assert!((row[0] - trend).abs() <= 1e-12 * trend.max(1.0), "t {t}");
        }
    }

    #[test]
    fn restricted_iterate_band_bounds_oscillation() {
        let p = CycleParams { c: 0.6, nu: 1.2, a: 10.0, g: 0.0, y0: 25.0, y1: 26.0 };
        let unrestricted = iterate(&p, 200).unwrap();
        assert!(
            unrestricted.explosive
                || unrestricted.series.iter().any(|(_, r)| r[0].abs() > 100.0)
        );
        let banded = restricted_iterate(&p, 200, 20.0, 30.0).unwrap();
        assert!(!banded.explosive);
        assert_eq!(banded.series.len(), 201);
        for (_, row) in banded.series.iter() {
            assert!(row[0] >= 20.0 - 1e-12 && row[0] <= 30.0 + 1e-12);
        }
    }

    #[test]
    fn fit_initial_is_canonical() {
        let p = CycleParams { c: 0.6, nu: 1.2, a: 10.0, g: 0.0, y0: 25.0, y1: 26.0 };
        let (delta, eps) = fit_initial(&p).unwrap();
        assert!(delta >= 0.0);
        assert!(eps > -std::f64::consts::PI && eps <= std::f64::consts::PI);
        // reconstruct the first two values
        let b = 10.0 / 0.4;
        let r = characteristic_roots(0.6, 1.2).unwrap();
        let th = r.theta.unwrap();
        let y0 = b + delta * (-eps).cos();
        let y1 = b + r.modulus * delta * (th - eps).cos();
        assert!((y0 - 25.0).abs() < 1e-10);
        assert!((y1 - 26.0).abs() < 1e-10);
    }

    #[test]
    fn decompose_is_exactly_additive() {
        let mut rng = crate::rng::RngStream::new(11);
        let xs: Vec<f64> = (0..300).map(|i| (i as f64).sin() * 5.0 + rng.gaussian()).collect();
        let d = decompose(&xs, 41, 5).unwrap();
        for i in 0..xs.len() {
            let sum = d.trend[i] + d.cycle[i] + d.residual[i];
            assert!((sum - xs[i]).abs() <= 1e-12 * xs[i].abs().max(1.0));
        }
    }

    #[test]
    fn decompose_recovers_linear_trend_interior() {
        let xs: Vec<f64> = (0..200).map(|i| 3.0 + 0.5 * i as f64).collect();
        let d = decompose(&xs, 41, 5).unwrap();
        for i in 20..180 {
            assert!((d.trend[i] - xs[i]).abs() < 1e-10, "i {i}");
        }
        // the cycle window must not touch edge-biased detrended points, so
        // its exact-zero region shrinks by the short half-window
        for i in 22..178 {
            assert!(d.cycle[i].abs() < 1e-10, "i {i}");
            assert!(d.residual[i].abs() < 1e-10, "i {i}");
        }
    }

    #[test]
    fn decompose_rejects_bad_windows() {
        let xs = vec![1.0; 50];
        assert!(decompose(&xs, 40, 5).is_err());
        assert!(decompose(&xs, 41, 4).is_err());
        assert!(decompose(&xs, 5, 41).is_err());
        assert!(decompose(&[], 41, 5).is_err());
    }

    #[test]
    fn great_ratios_basics() {
        let (e, v) = great_ratios(&[2.0], &[90.0], &[1.5], &[300.0], &[100.0]).unwrap();
        assert!((e[0] - 0.9).abs() < 1e-15);
        assert!((v[0] - 0.4).abs() < 1e-15);
        assert!(great_ratios(&[2.0], &[90.0], &[0.0], &[300.0], &[100.0]).is_err());
        assert!(great_ratios(&[2.0], &[90.0], &[1.5], &[300.0], &[0.0]).is_err());
    }
}

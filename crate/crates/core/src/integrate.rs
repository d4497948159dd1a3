//! Time integration: fixed-step RK4, an adaptive Dormand-Prince 5(4) pair
//! with dense output, and a single Euler-Maruyama step for additive-noise
//! SDEs. The derivative callback convention everywhere is
//! `f(t, y, dydt)` writing into a caller-provided slice.

use crate::rng::RngStream;
use crate::series::TimeSeries;
use crate::{Error, Result};

/// Smallest step the adaptive controller may take before reporting
/// stiffness failure.
pub const DT_MIN: f64 = 1e-12;

fn check_finite(y: &[f64], t: f64, what: &str) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Blowup { where_: format!("t={t}"), detail: format!("non-finite {what}") })
    }
}

/// One classic fourth-order Runge-Kutta step of size dt from (t, y).
pub fn rk4_step(
    f: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t: f64,
    y: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4);

    let out: Vec<f64> = (0..n)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    check_finite(&out, t + dt, "rk4 state")?;
    Ok(out)
}

/// Where the adaptive integrator should place its output samples.
pub enum Output<'a> {
    /// One row per accepted step (plus the initial state).
    AcceptedSteps,
    /// Interpolated rows at the given strictly increasing times, all within
    /// [t0, t1]. Interpolation is cubic Hermite on the accepted steps.
    Times(&'a [f64]),
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights equal the last A row (FSAL); fourth-order weights below
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Hermite cubic between two accepted steps.
fn hermite(t: f64, t0: f64, h: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64]) -> Vec<f64> {
    let th = (t - t0) / h;
    let mut out = vec![0.0; y0.len()];
    for i in 0..y0.len() {
        out[i] = (1.0 - th) * y0[i]
            + th * y1[i]
            + th * (th - 1.0)
                * ((1.0 - 2.0 * th) * (y1[i] - y0[i])
                    + (th - 1.0) * h * f0[i]
                    + th * h * f1[i]);
    }
    out
}

/// Integrate y' = f(t, y) from t0 to t1 with the Dormand-Prince 5(4) pair.
///
/// Steps are accepted when the scaled RMS error estimate is at most 1, with
/// scale `abs_tol + rel_tol * max(|y|, |y_new|)` per component. The step
/// controller uses the standard 0.9 * err^(-1/5) factor clamped to [0.2, 5].
/// Control that drives the step below `DT_MIN` reports stiffness failure
/// with the failing time.
pub fn integrate_adaptive(
    f: &mut impl FnMut(f64, &[f64], &mut [f64]),
    y0: &[f64],
    t0: f64,
    t1: f64,
    rel_tol: f64,
    abs_tol: f64,
    output: Output,
) -> Result<TimeSeries> {
    if !(t1 > t0) {
        return Err(Error::validation(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    if !(rel_tol > 0.0) || !(abs_tol > 0.0) {
        return Err(Error::validation(format!(
            "tolerances must be positive: rel {rel_tol}, abs {abs_tol}"
        )));
    }
    check_finite(y0, t0, "initial state")?;
    let grid: &[f64] = match output {
        Output::Times(ts) => {
            for w in ts.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(Error::validation("output times must be strictly increasing"));
                }
            }
            if let (Some(&first), Some(&last)) = (ts.first(), ts.last()) {
                if first < t0 || last > t1 {
                    return Err(Error::validation(format!(
                        "output times [{first}, {last}] outside [{t0}, {t1}]"
                    )));
                }
            }
            ts
        }
        Output::AcceptedSteps => &[],
    };
    let on_grid = matches!(output, Output::Times(_));

    let n = y0.len();
    let mut series = TimeSeries::new(n);
    let mut grid_pos = 0;
    if on_grid {
        while grid_pos < grid.len() && grid[grid_pos] <= t0 {
            series.push(grid[grid_pos], y0)?;
            grid_pos += 1;
        }
    } else {
        series.push(t0, y0)?;
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    f(t, &y, &mut k[0]);
    check_finite(&k[0], t, "derivative")?;
    let mut h = ((t1 - t0) / 100.0).min(t1 - t0);

    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    loop {
        if t >= t1 {
            break;
        }
        let last = h >= t1 - t;
        if last {
            h = t1 - t;
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s - 1][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &ytmp, &mut tail[0]);
        }
        // stage 7 was evaluated at ytmp built from the last A row, which is
        // exactly the fifth-order solution
        ynew.copy_from_slice(&ytmp);
        check_finite(&ynew, t + h, "state")?;
        check_finite(&k[6], t + h, "derivative")?;

        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                let b5 = if j < 6 { A[5][j] } else { 0.0 };
                e += (b5 - B4[j]) * kj[i];
            }
            e *= h;
            let scale = abs_tol + rel_tol * y[i].abs().max(ynew[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            if t_new <= t {
                // step accepted but too small to advance time
                return Err(Error::StepUnderflow { t, dt_min: DT_MIN });
            }
            if on_grid {
                while grid_pos < grid.len() && grid[grid_pos] <= t_new {
                    let tg = grid[grid_pos];
                    let row = if tg >= t_new {
                        ynew.clone()
                    } else {
                        hermite(tg, t, t_new - t, &y, &ynew, &k[0], &k[6])
                    };
                    series.push(tg, &row)?;
                    grid_pos += 1;
                }
            } else {
                series.push(t_new, &ynew)?;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6); // FSAL: derivative at the new point is stage 7
        }

        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        // underflow counts only when rejections drive the step down; tiny
        // accepted steps (e.g. on micro-intervals) are allowed to regrow
        if err > 1.0 && h < DT_MIN && t < t1 {
            return Err(Error::StepUnderflow { t, dt_min: DT_MIN });
        }
    }
    Ok(series)
}

/// One Euler-Maruyama step: `y + f(t, y) dt + noise_amp sqrt(dt) xi`, with
/// xi i.i.d. standard normal per component.
pub fn euler_maruyama_step(
    drift: &mut impl FnMut(f64, &[f64], &mut [f64]),
    noise_amp: f64,
    t: f64,
    y: &[f64],
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    let n = y.len();
    let mut dydt = vec![0.0; n];
    drift(t, y, &mut dydt);
    let amp = noise_amp * dt.sqrt();
    let out: Vec<f64> = (0..n).map(|i| y[i] + dydt[i] * dt + amp * rng.gaussian()).collect();
    check_finite(&out, t + dt, "euler-maruyama state")?;
    Ok(out)
}

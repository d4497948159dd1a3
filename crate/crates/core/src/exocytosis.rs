//! Vesicle pool kinetics for glucose-driven insulin release: a fast
//! calcium-binding chain (N1..N4) feeding fusion and release (NF, NR), and a
//! slow docking/priming loop (N5, N6) that refills it. Rates span 2e3 /s
//! down to 1e-4 /s, so the model is stiff: the first secretion phase peaks
//! within minutes, the second settles over hours.
//!
//! Two right-hand sides are provided. `Verbatim` follows the printed
//! equations exactly. `MassActionCorrected` repairs three transfer terms so
//! that every off-diagonal flow leaving one pool arrives in another with the
//! same coefficient; only the corrected variant obeys the closed-form mass
//! balance d/dt sum(N) = r3 - r_m3 N6 - u3 NR.

use crate::integrate::{integrate_adaptive, Output};
use crate::linalg::{solve_linear, SmallMatrix};
use crate::series::TimeSeries;
use crate::{Error, Result};

/// Pool count and state layout: [N1, N2, N3, N4, N5, N6, NF, NR].
pub const N_POOLS: usize = 8;

/// Numerical floor: integrated pools may undershoot zero by at most this.
pub const NEGATIVE_FLOOR: f64 = -1e-9;

/// Index of each pool in the state vector.
pub mod idx {
    pub const N1: usize = 0;
    pub const N2: usize = 1;
    pub const N3: usize = 2;
    pub const N4: usize = 3;
    pub const N5: usize = 4;
    pub const N6: usize = 5;
    pub const NF: usize = 6;
    pub const NR: usize = 7;
}

/// Rate constants. Times are seconds, concentrations micromolar.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticParams {
    /// Calcium binding, per uM per s.
    pub k1: f64,
    /// Calcium unbinding, per s.
    pub k_m1: f64,
    /// Docking (N5 -> N1 direction), per s.
    pub r1: f64,
    /// Undocking (N1 -> N5), per s.
    pub r_m1: f64,
    /// Priming ceiling r2 = r2_0 Ci / (Ci + Kp), per s.
    pub r2_0: f64,
    /// Unpriming (N5 -> N6), per s.
    pub r_m2: f64,
    /// Granule supply ceiling r3 = r3_0 Ci / (Ci + Kp), count per s.
    pub r3_0: f64,
    /// Granule loss, per s.
    pub r_m3: f64,
    /// Fusion of the fully bound pool, per s.
    pub u1: f64,
    /// Release from fused vesicles, per s.
    pub u2: f64,
    /// Clearance of released content, per s.
    pub u3: f64,
    /// Half-saturation of the calcium-dependent supply terms, uM.
    pub k_p: f64,
}

impl Default for KineticParams {
    fn default() -> Self {
        KineticParams {
            k1: 20.0,
            k_m1: 100.0,
            r1: 0.6,
            r_m1: 1.0,
            r2_0: 0.006,
            r_m2: 0.001,
            r3_0: 1.205,
            r_m3: 0.0001,
            u1: 2000.0,
            u2: 3.0,
            u3: 0.02,
            k_p: 2.3,
        }
    }
}

impl KineticParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k1", self.k1),
            ("k_m1", self.k_m1),
            ("r1", self.r1),
            ("r_m1", self.r_m1),
            ("r2_0", self.r2_0),
            ("r_m2", self.r_m2),
            ("r3_0", self.r3_0),
            ("r_m3", self.r_m3),
            ("u1", self.u1),
            ("u2", self.u2),
            ("u3", self.u3),
            ("k_p", self.k_p),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Largest over smallest rate constant (Kp is a concentration, not a
    /// rate, and is excluded). Defaults give u1 / r_m3 = 2e7.
    pub fn stiffness_ratio(&self) -> f64 {
        let rates = [
            self.k1, self.k_m1, self.r1, self.r_m1, self.r2_0, self.r_m2, self.r3_0, self.r_m3,
            self.u1, self.u2, self.u3,
        ];
        let max = rates.iter().fold(f64::MIN, |a, &b| a.max(b));
        let min = rates.iter().fold(f64::MAX, |a, &b| a.min(b));
        max / min
    }
}

/// Calcium-dependent supply rates (r2, r3) at cytosolic calcium `c_i`.
pub fn supply_rates(c_i: f64, params: &KineticParams) -> Result<(f64, f64)> {
    if !(c_i >= 0.0) {
        return Err(Error::validation(format!("Ci must be >= 0, got {c_i}")));
    }
    let f = c_i / (c_i + params.k_p);
    Ok((params.r2_0 * f, params.r3_0 * f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The equations as printed.
    Verbatim,
    /// Transfer terms repaired for pairwise mass action.
    MassActionCorrected,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Verbatim => "verbatim",
            Variant::MassActionCorrected => "mass_action_corrected",
        })
    }
}

/// Pool derivatives at state `n` under microdomain calcium `c_md` and
/// cytosolic calcium `c_i`.
pub fn derivatives(
    n: &[f64; N_POOLS],
    c_md: f64,
    c_i: f64,
    params: &KineticParams,
    variant: Variant,
) -> Result<[f64; N_POOLS]> {
    if !(c_md >= 0.0) {
        return Err(Error::validation(format!("Cmd must be >= 0, got {c_md}")));
    }
    for (i, v) in n.iter().enumerate() {
        if !v.is_finite() || *v < NEGATIVE_FLOOR {
            return Err(Error::validation(format!("pool {} out of range: {v}", i + 1)));
        }
    }
    supply_rates(c_i, params)?;
    Ok(derivatives_unchecked(n, c_md, c_i, params, variant))
}

/// Net flux that the corrected variant's total mass must follow:
/// d/dt sum(N) = r3 - r_m3 N6 - u3 NR.
pub fn total_mass_flux(n: &[f64; N_POOLS], c_i: f64, params: &KineticParams) -> Result<f64> {
    let (_, r3) = supply_rates(c_i, params)?;
    Ok(r3 - params.r_m3 * n[idx::N6] - params.u3 * n[idx::NR])
}

/// Steady state at fixed calcium, from the linear system M n = -s where
/// M is the Jacobian of `derivatives` and s its constant part. Stays in
/// lockstep with `derivatives` by construction because both M and s are
/// extracted from it.
pub fn resting_state(
    c_md_basal: f64,
    c_i_basal: f64,
    params: &KineticParams,
    variant: Variant,
) -> Result<[f64; N_POOLS]> {
    params.validate()?;
    let zero = [0.0; N_POOLS];
    let s = derivatives(&zero, c_md_basal, c_i_basal, params, variant)?;
    let mut m = SmallMatrix::zeros(N_POOLS);
    for j in 0..N_POOLS {
        let mut e = [0.0; N_POOLS];
        e[j] = 1.0;
        let col = derivatives(&e, c_md_basal, c_i_basal, params, variant)?;
        for i in 0..N_POOLS {
            m.set(i, j, col[i] - s[i]);
        }
    }
    let rhs: Vec<f64> = s.iter().map(|v| -v).collect();
    let x = solve_linear(&m, &rhs)?;
    let mut out = [0.0; N_POOLS];
    out.copy_from_slice(&x);
    Ok(out)
}

/// Calcium drive over time. Microdomain calcium switches between basal and
/// high; cytosolic calcium tracks it as Ci = ci_base + ci_per_md * Cmd.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalciumProtocol {
    /// "step" or "pulse_train".
    pub kind: ProtocolKind,
    pub c_md_high: f64,
    pub c_md_basal: f64,
    pub ci_base: f64,
    pub ci_per_md: f64,
    /// Stimulus onset, s.
    pub t_on: f64,
    /// Pulse-train shape; ignored for steps.
    pub n_pulses: usize,
    pub period: f64,
    /// Fraction of each period spent high, in (0, 1].
    pub duty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Step,
    PulseTrain,
}

impl Default for CalciumProtocol {
    fn default() -> Self {
        CalciumProtocol {
            kind: ProtocolKind::Step,
            c_md_high: 10.0,
            c_md_basal: 0.1,
            ci_base: 0.05,
            ci_per_md: 0.01,
            t_on: 60.0,
            n_pulses: 5,
            period: 120.0,
            duty: 0.5,
        }
    }
}

impl CalciumProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_md_basal >= 0.0) || !(self.c_md_high >= self.c_md_basal) {
            return Err(Error::validation(format!(
                "need Cmd high >= basal >= 0, got high {} basal {}",
                self.c_md_high, self.c_md_basal
            )));
        }
        if !(self.ci_base >= 0.0) || !(self.ci_per_md >= 0.0) {
            return Err(Error::validation("Ci coupling must be non-negative"));
        }
        if !(self.t_on >= 0.0) {
            return Err(Error::validation(format!("t_on must be >= 0, got {}", self.t_on)));
        }
        if let ProtocolKind::PulseTrain = self.kind {
            if self.n_pulses == 0 {
                return Err(Error::validation("pulse train needs at least one pulse"));
            }
            if !(self.period > 0.0) {
                return Err(Error::validation(format!("period must be positive, got {}", self.period)));
            }
            if !(self.duty > 0.0 && self.duty <= 1.0) {
                return Err(Error::validation(format!("duty must be in (0, 1], got {}", self.duty)));
            }
        }
        Ok(())
    }

    /// Microdomain calcium at time t. Pulses are high on
    /// [t_on + k period, t_on + (k + duty) period), right-continuous.
    pub fn c_md_at(&self, t: f64) -> f64 {
        if t < self.t_on {
            return self.c_md_basal;
        }
        match self.kind {
            ProtocolKind::Step => self.c_md_high,
            ProtocolKind::PulseTrain => {
                let rel = t - self.t_on;
                let k = (rel / self.period).floor();
                if (k as usize) < self.n_pulses && rel - k * self.period < self.duty * self.period
                {
                    self.c_md_high
                } else {
                    self.c_md_basal
                }
            }
        }
    }

    pub fn levels_at(&self, t: f64) -> (f64, f64) {
        let c_md = self.c_md_at(t);
        (c_md, self.ci_base + self.ci_per_md * c_md)
    }

    pub fn basal_levels(&self) -> (f64, f64) {
        (self.c_md_basal, self.ci_base + self.ci_per_md * self.c_md_basal)
    }

    /// Times in (0, t_end) where the drive switches level.
    pub fn breakpoints(&self, t_end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.kind {
            ProtocolKind::Step => {
                if self.t_on > 0.0 && self.t_on < t_end {
                    out.push(self.t_on);
                }
            }
            ProtocolKind::PulseTrain => {
                for k in 0..self.n_pulses {
                    let up = self.t_on + k as f64 * self.period;
                    let down = up + self.duty * self.period;
                    for b in [up, down] {
                        if b > 0.0 && b < t_end {
                            out.push(b);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Integration tolerances used by [`simulate`].
pub const REL_TOL: f64 = 1e-8;
pub const ABS_TOL: f64 = 1e-12;

/// Simulated secretion run. Series rows are
/// [N1, N2, N3, N4, N5, N6, NF, NR, SR, Cmd, Ci] with SR = u2 NF.
#[derive(Debug, Clone)]
pub struct SecretionRun {
    pub series: TimeSeries,
    pub variant: Variant,
    pub initial: [f64; N_POOLS],
}

/// Column index of the secretion rate in [`SecretionRun`] rows.
pub const SR_COLUMN: usize = 8;

/// Integrate the pool model from its resting state under the given calcium
/// protocol, sampling every `sample_dt`. Integration restarts at each drive
/// discontinuity so the adaptive controller never steps across a switch.
pub fn simulate(
    protocol: &CalciumProtocol,
    params: &KineticParams,
    variant: Variant,
    t_end: f64,
    sample_dt: f64,
) -> Result<SecretionRun> {
    protocol.validate()?;
    params.validate()?;
    if !(t_end > 0.0) || !(sample_dt > 0.0) || sample_dt > t_end {
        return Err(Error::validation(format!(
            "need 0 < sample_dt <= t_end, got sample_dt {sample_dt}, t_end {t_end}"
        )));
    }

    let (c_md0, c_i0) = protocol.basal_levels();
    let initial = resting_state(c_md0, c_i0, params, variant)?;

    let n_samples = (t_end / sample_dt).floor() as usize;
    let grid: Vec<f64> = (0..=n_samples).map(|k| k as f64 * sample_dt).collect();

    let mut segments = protocol.breakpoints(t_end);
    segments.push(t_end);

    let mut series = TimeSeries::with_capacity(11, grid.len());
    let push_row = |series: &mut TimeSeries,
                    t: f64,
                    n: &[f64],
                    params: &KineticParams,
                    protocol: &CalciumProtocol|
     -> Result<()> {
        let (c_md, c_i) = protocol.levels_at(t);
        let mut row = [0.0; 11];
        row[..N_POOLS].copy_from_slice(n);
        row[SR_COLUMN] = params.u2 * n[idx::NF];
        row[9] = c_md;
        row[10] = c_i;
        series.push(t, &row)
    };

    let mut state = initial;
    let mut t0 = 0.0;
    let mut gi = 0;
    if grid[0] == 0.0 {
        push_row(&mut series, 0.0, &state, params, protocol)?;
        gi = 1;
    }
    for &t1 in &segments {
        if t1 <= t0 {
            continue;
        }
        // drive levels are constant on (t0, t1); evaluate mid-segment
        let (c_md, c_i) = protocol.levels_at(0.5 * (t0 + t1));
        let mut want: Vec<f64> = Vec::new();
        while gi < grid.len() && grid[gi] <= t1 {
            want.push(grid[gi]);
            gi += 1;
        }
        let carry_needed = want.last() != Some(&t1);
        let mut request = want.clone();
        if carry_needed {
            request.push(t1);
        }
        // inner loop skips per-call validation; the negative floor is
        // enforced at segment boundaries below
        let mut rhs = |_t: f64, y: &[f64], dydt: &mut [f64]| {
            let mut n = [0.0; N_POOLS];
            n.copy_from_slice(y);
            let d = derivatives_unchecked(&n, c_md, c_i, params, variant);
            dydt.copy_from_slice(&d);
        };
        let seg = integrate_adaptive(&mut rhs, &state, t0, t1, REL_TOL, ABS_TOL, Output::Times(&request))?;
        for (t, row) in seg.iter() {
            if t == t0 {
                continue;
            }
            let is_carry = carry_needed && t == t1;
            if !is_carry {
                push_row(&mut series, t, row, params, protocol)?;
            }
            if t == t1 {
                state.copy_from_slice(row);
            }
        }
        // guard the floor at segment boundaries
        for (i, v) in state.iter().enumerate() {
            if *v < NEGATIVE_FLOOR {
                return Err(Error::Blowup {
                    where_: format!("t={t1}"),
                    detail: format!("pool {} fell to {v}, below the negative floor", i + 1),
                });
            }
        }
        t0 = t1;
    }
    Ok(SecretionRun { series, variant, initial })
}

/// Same arithmetic as [`derivatives`] without the validation, for the inner
/// integration loop where states have already been screened.
fn derivatives_unchecked(
    n: &[f64; N_POOLS],
    c_md: f64,
    c_i: f64,
    params: &KineticParams,
    variant: Variant,
) -> [f64; N_POOLS] {
    let p = params;
    let f = c_i / (c_i + p.k_p);
    let (r2, r3) = (p.r2_0 * f, p.r3_0 * f);
    let kc = p.k1 * c_md;
    let [n1, n2, n3, n4, n5, n6, nf, nr] = *n;
    let mut d = [0.0; N_POOLS];
    match variant {
        Variant::Verbatim => {
            d[idx::N1] = -(3.0 * kc + p.r_m1) * n1 + p.k1 * n2 + p.r1 * n5;
            d[idx::N3] = 2.0 * kc * n2 - (kc + 2.0 * p.k_m1) * n3 + 3.0 * p.k1 * n4;
            d[idx::N5] = p.r1 * n1 - (p.r1 + p.r_m2) * n5 + r2 * n6;
        }
        Variant::MassActionCorrected => {
            d[idx::N1] = -(3.0 * kc + p.r_m1) * n1 + p.k_m1 * n2 + p.r1 * n5;
            d[idx::N3] = 2.0 * kc * n2 - (kc + 2.0 * p.k_m1) * n3 + 3.0 * p.k_m1 * n4;
            d[idx::N5] = p.r_m1 * n1 - (p.r1 + p.r_m2) * n5 + r2 * n6;
        }
    }
    d[idx::N2] = 3.0 * kc * n1 - (2.0 * kc + p.k_m1) * n2 + 2.0 * p.k_m1 * n3;
    d[idx::N4] = kc * n3 - (3.0 * p.k_m1 + p.u1) * n4;
    d[idx::N6] = r3 + p.r_m2 * n5 - (p.r_m3 + r2) * n6;
    d[idx::NF] = p.u1 * n4 - p.u2 * nf;
    d[idx::NR] = p.u2 * nf - p.u3 * nr;
    d
}

/// Shape summary of a secretion series.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PhaseMetrics {
    pub biphasic: bool,
    pub t_peak: f64,
    pub sr_peak: f64,
    pub t_nadir: f64,
    pub sr_nadir: f64,
    pub sr_plateau: f64,
}

/// Locate the first-phase peak, the inter-phase nadir, and the late plateau
/// of a secretion series (SR in column [`SR_COLUMN`]). The plateau is the
/// mean over the final tenth of the run; the nadir is the minimum between
/// the peak and that window. Returns `biphasic = false` when no interior
/// local maximum exists after the onset.
pub fn phase_metrics(run: &TimeSeries, t_onset: f64) -> Result<PhaseMetrics> {
    if run.dim() <= SR_COLUMN {
        return Err(Error::validation(format!(
            "series has dimension {}, need the SR column at index {SR_COLUMN}",
            run.dim()
        )));
    }
    let span = run.time(run.len() - 1) - run.time(0);
    if span < 1800.0 {
        return Err(Error::validation(format!(
            "series spans {span} s; phase metrics need at least 1800 s for the plateau"
        )));
    }
    let n = run.len();
    let sr = |i: usize| run.value(i, SR_COLUMN);

    let plateau_start = run.time(n - 1) - 0.1 * span;
    let plateau_from = (0..n).find(|&i| run.time(i) >= plateau_start).unwrap_or(n - 1);
    let sr_plateau =
        (plateau_from..n).map(sr).sum::<f64>() / (n - plateau_from) as f64;

    // first interior local maximum after onset
    let mut peak = None;
    for i in 1..n - 1 {
        if run.time(i) <= t_onset {
            continue;
        }
        if sr(i) > sr(i - 1) && sr(i) >= sr(i + 1) {
            peak = Some(i);
            break;
        }
    }
    let Some(ip) = peak else {
        return Ok(PhaseMetrics {
            biphasic: false,
            t_peak: f64::NAN,
            sr_peak: f64::NAN,
            t_nadir: f64::NAN,
            sr_nadir: f64::NAN,
            sr_plateau,
        });
    };

    let mut inadir = ip;
    for i in ip..plateau_from.max(ip + 1) {
        if sr(i) < sr(inadir) {
            inadir = i;
        }
    }
    Ok(PhaseMetrics {
        biphasic: true,
        t_peak: run.time(ip),
        sr_peak: sr(ip),
        t_nadir: run.time(inadir),
        sr_nadir: sr(inadir),
        sr_plateau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_with(i: usize, v: f64) -> [f64; N_POOLS] {
        let mut s = [0.0; N_POOLS];
        s[i] = v;
        s
    }

    #[test]
    fn single_n4_example() {
        // N4 = 1, everything else 0, no calcium: the fully bound pool drains
        // at 3 k_m1 + u1 = 2300 and fusion gains u1 = 2000
        let p = KineticParams::default();
        let d = derivatives(&state_with(idx::N4, 1.0), 0.0, 0.0, &p, Variant::MassActionCorrected)
            .unwrap();
        assert_eq!(d[idx::N4], -2300.0);
        assert_eq!(d[idx::NF], 2000.0);
        // corrected variant: the 3 k_m1 unbinding flux lands in N3
        assert_eq!(d[idx::N3], 300.0);
        // verbatim variant routes 3 k1 N4 instead
        let dv = derivatives(&state_with(idx::N4, 1.0), 0.0, 0.0, &p, Variant::Verbatim).unwrap();
        assert_eq!(dv[idx::N3], 60.0);
        assert_eq!(dv[idx::N4], -2300.0);
    }

    #[test]
    fn derivatives_are_linear_in_state() {
        let p = KineticParams::default();
        let mut rng = crate::rng::RngStream::new(55);
        for variant in [Variant::Verbatim, Variant::MassActionCorrected] {
            for _ in 0..100 {
                let mut a = [0.0; N_POOLS];
                let mut b = [0.0; N_POOLS];
                for i in 0..N_POOLS {
                    a[i] = rng.uniform_in(0.0, 50.0);
                    b[i] = rng.uniform_in(0.0, 50.0);
                }
                let alpha = rng.uniform_in(0.0, 2.0);
                let beta = rng.uniform_in(0.0, 2.0);
                let mut combo = [0.0; N_POOLS];
                for i in 0..N_POOLS {
                    combo[i] = alpha * a[i] + beta * b[i];
                }
                let da = derivatives(&a, 10.0, 0.15, &p, variant).unwrap();
                let db = derivatives(&b, 10.0, 0.15, &p, variant).unwrap();
                let dc = derivatives(&combo, 10.0, 0.15, &p, variant).unwrap();
                // affine: f(ax + by) - f(0)(a + b - 1) = a f(x) + b f(y) pulls in
                // the constant r3 source; compare against that identity
                let zero = [0.0; N_POOLS];
                let d0 = derivatives(&zero, 10.0, 0.15, &p, variant).unwrap();
                for i in 0..N_POOLS {
                    let lhs = dc[i];
                    let rhs = alpha * da[i] + beta * db[i] + (1.0 - alpha - beta) * d0[i];
                    let scale = lhs.abs().max(rhs.abs()).max(1.0);
                    assert!((lhs - rhs).abs() <= 1e-12 * scale, "i {i} {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn corrected_variant_balances_mass() {
        let p = KineticParams::default();
        let mut rng = crate::rng::RngStream::new(77);
        for _ in 0..200 {
            let mut n = [0.0; N_POOLS];
            for v in n.iter_mut() {
                *v = rng.uniform_in(0.0, 100.0);
            }
            let c_md = rng.uniform_in(0.0, 10.0);
            let c_i = 0.05 + 0.01 * c_md;
            let d = derivatives(&n, c_md, c_i, &p, Variant::MassActionCorrected).unwrap();
            let total: f64 = d.iter().sum();
            let flux = total_mass_flux(&n, c_i, &p).unwrap();
            assert!((total - flux).abs() <= 1e-8 * total.abs().max(1.0), "{total} vs {flux}");
        }
    }

    #[test]
    fn verbatim_variant_leaks_mass() {
        // the printed equations do not satisfy the corrected flux identity
        let p = KineticParams::default();
        let n = [10.0, 10.0, 10.0, 10.0, 10.0, 10.0, 10.0, 10.0];
        let d = derivatives(&n, 10.0, 0.15, &p, Variant::Verbatim).unwrap();
        let total: f64 = d.iter().sum();
        let flux = total_mass_flux(&n, 0.15, &p).unwrap();
        assert!((total - flux).abs() > 1.0, "verbatim should miss the identity: {total} vs {flux}");
    }

    #[test]
    fn supply_rates_saturate() {
        let p = KineticParams::default();
        let (r2_low, r3_low) = supply_rates(0.0, &p).unwrap();
        assert_eq!((r2_low, r3_low), (0.0, 0.0));
        let (r2, r3) = supply_rates(p.k_p, &p).unwrap();
        assert!((r2 - 0.003).abs() < 1e-15);
        assert!((r3 - 0.6025).abs() < 1e-15);
        let (_, r3_inf) = supply_rates(1e9, &p).unwrap();
        assert!((r3_inf - p.r3_0).abs() < 1e-6);
    }

    #[test]
    fn resting_state_zero_calcium_is_empty() {
        let p = KineticParams::default();
        for variant in [Variant::Verbatim, Variant::MassActionCorrected] {
            let n = resting_state(0.0, 0.0, &p, variant).unwrap();
            for v in n {
                assert!(v.abs() < 1e-12, "{n:?}");
            }
        }
    }

    #[test]
    fn resting_state_has_small_residual() {
        let p = KineticParams::default();
        for variant in [Variant::Verbatim, Variant::MassActionCorrected] {
            let n = resting_state(0.1, 0.051, &p, variant).unwrap();
            let d = derivatives(&n, 0.1, 0.051, &p, variant).unwrap();
            let scale = n.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            for v in d {
                assert!(v.abs() <= 1e-10 * scale, "residual {v} at scale {scale}");
            }
            for v in n {
                assert!(v >= NEGATIVE_FLOOR, "negative pool {v}");
            }
        }
    }

    #[test]
    fn stiffness_ratio_examples() {
        let p = KineticParams::default();
        assert!((p.stiffness_ratio() - 2e7).abs() < 1.0);
        let uniform = KineticParams {
            k1: 1.0,
            k_m1: 1.0,
            r1: 1.0,
            r_m1: 1.0,
            r2_0: 1.0,
            r_m2: 1.0,
            r3_0: 1.0,
            r_m3: 1.0,
            u1: 1.0,
            u2: 1.0,
            u3: 1.0,
            k_p: 2.3,
        };
        assert_eq!(uniform.stiffness_ratio(), 1.0);
        // scaling every rate leaves the ratio unchanged
        let mut scaled = p.clone();
        for f in [
            &mut scaled.k1, &mut scaled.k_m1, &mut scaled.r1, &mut scaled.r_m1, &mut scaled.r2_0,
            &mut scaled.r_m2, &mut scaled.r3_0, &mut scaled.r_m3, &mut scaled.u1, &mut scaled.u2,
            &mut scaled.u3,
        ] {
            *f *= 10.0;
        }
        assert!((scaled.stiffness_ratio() - p.stiffness_ratio()).abs() < 1e-3);
    }

    #[test]
    fn protocol_step_and_pulses() {
        let step = CalciumProtocol::default();
        assert_eq!(step.c_md_at(0.0), 0.1);
        assert_eq!(step.c_md_at(59.999), 0.1);
        assert_eq!(step.c_md_at(60.0), 10.0);
        assert_eq!(step.c_md_at(1e6), 10.0);
        let (c_md, c_i) = step.levels_at(100.0);
        assert_eq!(c_md, 10.0);
        assert!((c_i - 0.15).abs() < 1e-15);

        // duty 0.5 of a 120 s period: high on [60, 120), low on [120, 180)
        let train = CalciumProtocol { kind: ProtocolKind::PulseTrain, ..Default::default() };
        assert_eq!(train.c_md_at(60.0), 10.0);
        assert_eq!(train.c_md_at(60.0 + 59.9), 10.0);
        assert_eq!(train.c_md_at(60.0 + 60.0), 0.1);
        assert_eq!(train.c_md_at(60.0 + 119.9), 0.1);
        assert_eq!(train.c_md_at(60.0 + 120.0), 10.0);
        // after the 5th pulse the drive stays basal
        assert_eq!(train.c_md_at(60.0 + 5.0 * 120.0), 0.1);
        assert_eq!(train.breakpoints(1e4).len(), 10);
    }

    #[test]
    fn phase_metrics_on_synthetic_shape() {
        // hand-built SR: rise to a peak at t=100, dip to a nadir, climb to a
        // plateau at 2.0 over the final stretch
        let mut s = TimeSeries::new(9);
        for k in 0..=2000 {
            let t = k as f64 * 1.0;
            let sr = if t < 100.0 {
                0.5 + 0.05 * t
            } else if t < 300.0 {
                5.5 - 0.025 * (t - 100.0)
            } else {
                2.0 - 1.5 * (-(t - 300.0) / 200.0).exp()
            };
            let mut row = [0.0; 9];
            row[SR_COLUMN] = sr;
            s.push(t, &row).unwrap();
        }
        let m = phase_metrics(&s, 10.0).unwrap();
        assert!(m.biphasic);
        assert_eq!(m.t_peak, 100.0);
        assert!((m.sr_peak - 5.5).abs() < 1e-12);
        assert_eq!(m.t_nadir, 300.0);
        assert!((m.sr_nadir - 0.5).abs() < 1e-12);
        assert!((m.sr_plateau - 2.0).abs() < 0.01);
        assert!(m.sr_peak > m.sr_plateau && m.sr_plateau > m.sr_nadir);

        // monotone series has no interior peak
        let mut flat = TimeSeries::new(9);
        for k in 0..=200 {
            let mut row = [0.0; 9];
            row[SR_COLUMN] = k as f64;
            flat.push(k as f64 * 10.0, &row).unwrap();
        }
        let m = phase_metrics(&flat, 0.0).unwrap();
        assert!(!m.biphasic);
    }

    #[test]
    fn step_simulation_is_biphasic() {
        // 1900 s spans the burst, the dip, and enough of the second phase
        let protocol = CalciumProtocol::default();
        let params = KineticParams::default();
        let run = simulate(&protocol, &params, Variant::MassActionCorrected, 1900.0, 0.5).unwrap();
        assert_eq!(run.series.dim(), 11);

        // first row is the basal resting state
        let first = run.series.row(0);
        for i in 0..N_POOLS {
            assert!((first[i] - run.initial[i]).abs() <= 1e-12 * run.initial[i].abs().max(1.0));
        }
        // SR column consistent with NF, pools never meaningfully negative
        for (_, row) in run.series.iter() {
            assert!((row[SR_COLUMN] - params.u2 * row[idx::NF]).abs() < 1e-12);
            for i in 0..N_POOLS {
                assert!(row[i] >= NEGATIVE_FLOOR, "pool {i} at {}", row[i]);
            }
        }
        let m = phase_metrics(&run.series, protocol.t_on).unwrap();
        assert!(m.biphasic);
        assert!(m.t_peak > protocol.t_on && m.t_peak < protocol.t_on + 600.0, "t_peak {}", m.t_peak);
        assert!(m.sr_peak > m.sr_plateau, "peak {} plateau {}", m.sr_peak, m.sr_plateau);
        assert!(m.sr_plateau > m.sr_nadir, "plateau {} nadir {}", m.sr_plateau, m.sr_nadir);
    }
}

//! Adaptive Dormand–Prince 4(5) time stepping over spectra.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{sup_norms_of, tail_fraction};
use crate::error::{Error, Result};
use crate::model::{Fields, ModelParams, SimState};

/// Anything that yields `∂_t` of a state.
pub trait Tendency {
    fn tendency(&self, state: &SimState) -> Result<Fields>;
}

impl Tendency for ModelParams {
    fn tendency(&self, state: &SimState) -> Result<Fields> {
        ModelParams::tendency(self, &state.fields)
    }
}

impl<F> Tendency for F
where
    F: Fn(&SimState) -> Result<Fields>,
{
    fn tendency(&self, state: &SimState) -> Result<Fields> {
        self(state)
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-order weights minus the embedded 4th-order ones
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_final: f64,
    pub safety: f64,
    pub max_steps: usize,
    /// Largest factor by which `dt` may grow in one step.
    pub max_growth: f64,
    /// Output instants are the multiples of this interval (plus `t_final`).
    pub output_every: Option<f64>,
    /// Under-resolution / blow-up monitor; `None` disables it.
    pub blowup: Option<BlowupCriteria>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            dt_init: 1e-4,
            dt_min: 1e-10,
            dt_max: 0.1,
            t_final: 1.0,
            safety: 0.9,
            max_steps: 5_000_000,
            max_growth: 5.0,
            output_every: None,
            blowup: Some(BlowupCriteria::default()),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::InvalidParameter {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return bad("rtol/atol", "tolerances must be positive");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("dt_init", "need 0 < dt_min <= dt_init <= dt_max");
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return bad("t_final", "must be finite and non-negative");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad("safety", "must lie in (0, 1]");
        }
        if !(self.max_growth > 1.0) {
            return bad("max_growth", "must exceed 1");
        }
        if let Some(every) = self.output_every {
            if !(every > 0.0) {
                return bad("output_every", "must be positive");
            }
        }
        Ok(())
    }
}

/// Thresholds separating a steepening (possibly singular) solution from a
/// merely stiff one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupCriteria {
    /// Fraction of `Σ k²|p̂|²` in the upper half of the dealiased band that
    /// counts as lost resolution.
    pub tail_threshold: f64,
    /// `‖∂_x p‖_∞` growth over its initial value that marks steepening.
    pub steepening_growth: f64,
    /// Growth beyond which a stalled run is reported as a suspected blow-up.
    pub blowup_growth: f64,
}

impl Default for BlowupCriteria {
    fn default() -> Self {
        Self {
            tail_threshold: 1e-3,
            steepening_growth: 10.0,
            blowup_growth: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTFinal,
    BlowupSuspected,
    UnderResolved,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub accepted: bool,
    pub new_state: SimState,
    /// Scaled max-norm error; infinite when a stage went non-finite.
    pub error_estimate: f64,
    pub dt_used: f64,
    pub dt_next: f64,
}

#[derive(Clone, Debug)]
pub struct TerminationReport {
    pub status: Termination,
    /// Time of the last accepted state.
    pub time: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub last_dt: f64,
    pub final_state: SimState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Initial,
    Step,
    /// Abnormal stop; carries the last accepted state.
    Terminated,
}

#[derive(Clone, Copy, Debug)]
pub struct SampleInfo {
    pub kind: SampleKind,
    /// Whether the state sits on a requested output instant.
    pub is_output: bool,
    pub dt: f64,
    pub step: usize,
}

fn combo(base: &Fields, terms: &[(f64, &Fields)]) -> Fields {
    let mut out = base.clone();
    for (c, f) in terms {
        if *c != 0.0 {
            out.add_scaled(*c, f);
        }
    }
    out
}

fn stage(t: f64, fields: Fields, rhs: &impl Tendency) -> Result<Fields> {
    rhs.tendency(&SimState { time: t, fields })
}

struct RawStep {
    y5: Fields,
    err: Fields,
    k7: Option<Fields>,
}

fn dopri(state: &SimState, dt: f64, k1: &Fields, rhs: &impl Tendency, want_err: bool) -> Result<RawStep> {
    let t = state.time;
    let y = &state.fields;
    let k2 = stage(t + C2 * dt, combo(y, &[(dt * A21, k1)]), rhs)?;
    let k3 = stage(t + C3 * dt, combo(y, &[(dt * A31, k1), (dt * A32, &k2)]), rhs)?;
    let k4 = stage(t + C4 * dt,
        combo(y, &[(dt * A41, k1), (dt * A42, &k2), (dt * A43, &k3)]),
        rhs,
    )?;
    let k5 = stage(t + C5 * dt,
        combo(y, &[(dt * A51, k1), (dt * A52, &k2), (dt * A53, &k3), (dt * A54, &k4)]),
        rhs,
    )?;
    let k6 = stage(t + dt,
        combo(
            y,
            &[(dt * A61, k1), (dt * A62, &k2), (dt * A63, &k3), (dt * A64, &k4), (dt * A65, &k5)],
        ),
        rhs,
    )?;
    let y5 = combo(
        y,
        &[(dt * B1, k1), (dt * B3, &k3), (dt * B4, &k4), (dt * B5, &k5), (dt * B6, &k6)],
    );
    if !want_err {
        return Ok(RawStep {
            err: y.zeros_like(),
            y5,
            k7: None,
        });
    }
    let k7 = if y5.is_finite() {
        Some(stage(t + dt, y5.clone(), rhs)?)
    } else {
        None
    };
    let zero = y.zeros_like();
    let mut err = combo(
        &zero,
        &[(dt * E1, k1), (dt * E3, &k3), (dt * E4, &k4), (dt * E5, &k5), (dt * E6, &k6)],
    );
    if let Some(k7) = &k7 {
        err.add_scaled(dt * E7, k7);
    }
    Ok(RawStep { y5, err, k7 })
}

/// Largest per-coefficient error relative to `atol + rtol·max(|old|, |new|)`.
/// A max norm rather than an RMS: spectra are sparse, and averaging over
/// `N/2` mostly idle coefficients would loosen control of the active ones by
/// about `√(N/2)`.
fn scaled_max_norm(old: &Fields, new: &Fields, err: &Fields, rtol: f64, atol: f64) -> f64 {
    let mut worst = 0.0_f64;
    for ((o, n), e) in old.parts().iter().zip(new.parts()).zip(err.parts()) {
        for ((a, b), d) in o.coeffs().iter().zip(n.coeffs()).zip(e.coeffs()) {
            let scale = atol + rtol * a.norm().max(b.norm());
            // NaN must not be swallowed by `max`.
            let r = d.norm() / scale;
            if !r.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(r);
        }
    }
    worst
}

fn next_dt(dt: f64, err: f64, accepted: bool, config: &IntegratorConfig) -> f64 {
    let mut factor = if err == 0.0 {
        config.max_growth
    } else if err.is_finite() {
        (config.safety * err.powf(-0.2)).clamp(0.2, config.max_growth)
    } else {
        0.5
    };
    if !accepted {
        factor = factor.min(0.9);
    }
    (dt * factor).clamp(config.dt_min, config.dt_max)
}

/// One embedded step of size `dt`.
pub fn rk45_step(
    state: &SimState,
    dt: f64,
    rhs: &impl Tendency,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    let k1 = rhs.tendency(state)?;
    step_with(state, dt, &k1, rhs, config).map(|(o, _)| o)
}

fn step_with(
    state: &SimState,
    dt: f64,
    k1: &Fields,
    rhs: &impl Tendency,
    config: &IntegratorConfig,
) -> Result<(StepOutcome, Option<Fields>)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            key: "dt".into(),
            reason: format!("step size must be positive, got {dt}"),
        });
    }
    let raw = dopri(state, dt, k1, rhs, true)?;
    let finite = raw.y5.is_finite() && raw.err.is_finite() && raw.k7.is_some();
    let new_state = SimState {
        time: state.time + dt,
        fields: raw.y5,
    };
    if !finite {
        return Ok((
            StepOutcome {
                accepted: false,
                new_state,
                error_estimate: f64::INFINITY,
                dt_used: dt,
                dt_next: (dt * 0.5).clamp(config.dt_min, config.dt_max),
            },
            None,
        ));
    }
    let err = scaled_max_norm(&state.fields, &new_state.fields, &raw.err, config.rtol, config.atol);
    let accepted = err <= 1.0;
    Ok((
        StepOutcome {
            accepted,
            new_state,
            error_estimate: err,
            dt_used: dt,
            dt_next: next_dt(dt, err, accepted, config),
        },
        raw.k7,
    ))
}

/// Fixed-step propagation with the 5th-order solution, for order studies.
pub fn integrate_fixed(initial: &SimState, rhs: &impl Tendency, dt: f64, steps: usize) -> Result<SimState> {
    let mut state = initial.clone();
    for _ in 0..steps {
        let k1 = rhs.tendency(&state)?;
        let raw = dopri(&state, dt, &k1, rhs, false)?;
        state = SimState {
            time: state.time + dt,
            fields: raw.y5,
        };
    }
    Ok(state)
}

struct Monitor {
    criteria: Option<BlowupCriteria>,
    initial_gradient: f64,
    growth: f64,
}

impl Monitor {
    fn new(criteria: Option<BlowupCriteria>, state: &SimState) -> Self {
        let initial_gradient = if criteria.is_some() {
            sup_norms_of(state.fields.primary()).1
        } else {
            0.0
        };
        Self {
            criteria,
            initial_gradient,
            growth: 1.0,
        }
    }

    /// Checks an accepted state for loss of resolution under steepening.
    fn check(&mut self, state: &SimState) -> Option<Termination> {
        let c = self.criteria.as_ref()?;
        let p = state.fields.primary();
        let grad = sup_norms_of(p).1;
        if self.initial_gradient > 0.0 {
            self.growth = grad / self.initial_gradient;
        }
        if self.growth >= c.steepening_growth && tail_fraction(p) > c.tail_threshold {
            return Some(self.classify_stall());
        }
        None
    }

    fn classify_stall(&self) -> Termination {
        match &self.criteria {
            Some(c) if self.growth >= c.blowup_growth => Termination::BlowupSuspected,
            _ => Termination::UnderResolved,
        }
    }
}

fn check_means(initial: &SimState, state: &SimState) -> Result<()> {
    const TOL: f64 = 1e-10;
    let violation = |detail: String| {
        Err(Error::InvariantViolation {
            time: state.time,
            detail,
        })
    };
    match (&initial.fields, &state.fields) {
        (Fields::Reduced(p0), Fields::Reduced(p)) => {
            let drift = (p.mean_coeff() - p0.mean_coeff()).norm();
            if drift > TOL {
                return violation(format!("mean of p drifted by {drift:e}"));
            }
        }
        (Fields::Full { u: u0, q: q0 }, Fields::Full { u, q }) => {
            let du = (u.mean_coeff() - u0.mean_coeff()).norm();
            let dq = (q.mean_coeff() - q0.mean_coeff()).norm();
            if du > TOL || dq > TOL {
                return violation(format!("cell mass drift {du:e}, mean of q drift {dq:e}"));
            }
        }
        _ => return violation("state layout changed".into()),
    }
    Ok(())
}

fn output_instants(config: &IntegratorConfig) -> Vec<f64> {
    let mut out = Vec::new();
    if let Some(every) = config.output_every {
        let mut n = 1usize;
        loop {
            let t = n as f64 * every;
            if t >= config.t_final * (1.0 - 1e-12) {
                break;
            }
            out.push(t);
            n += 1;
        }
    }
    out.push(config.t_final);
    out
}

/// Integrates from `initial` to `config.t_final` or until a stop condition.
/// `observer` sees the initial state, every accepted step, and on abnormal
/// termination the last accepted state once more.
pub fn integrate(
    initial: &SimState,
    rhs: &impl Tendency,
    config: &IntegratorConfig,
    mut observer: impl FnMut(&SimState, &SampleInfo),
) -> Result<TerminationReport> {
    config.validate()?;
    if !initial.fields.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let t0 = initial.time;
    let mut state = initial.clone();
    observer(
        &state,
        &SampleInfo {
            kind: SampleKind::Initial,
            is_output: true,
            dt: 0.0,
            step: 0,
        },
    );
    let report = |status, state: SimState, accepted, rejected, dt| TerminationReport {
        status,
        time: state.time,
        accepted_steps: accepted,
        rejected_steps: rejected,
        last_dt: dt,
        final_state: state,
    };
    if config.t_final == 0.0 {
        return Ok(report(Termination::ReachedTFinal, state, 0, 0, 0.0));
    }

    let targets: Vec<f64> = output_instants(config).into_iter().map(|t| t0 + t).collect();
    let mut next_target = 0usize;
    let mut monitor = Monitor::new(config.blowup.clone(), &state);
    let mut dt = config.dt_init;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_dt = 0.0;
    let mut k1 = rhs.tendency(&state)?;

    let stop = |state: &SimState, status, accepted, rejected, dt, observer: &mut dyn FnMut(&SimState, &SampleInfo)| {
        observer(
            state,
            &SampleInfo {
                kind: SampleKind::Terminated,
                is_output: false,
                dt,
                step: accepted,
            },
        );
        (status, accepted, rejected, dt)
    };

    loop {
        if accepted + rejected >= config.max_steps {
            let (s, a, r, d) = stop(&state, Termination::MaxSteps, accepted, rejected, last_dt, &mut observer);
            return Ok(report(s, state, a, r, d));
        }
        let target = targets[next_target];
        let remaining = target - state.time;
        let landing = dt >= remaining * (1.0 - 1e-12);
        let dt_try = if landing { remaining } else { dt };

        let (outcome, k7) = step_with(&state, dt_try, &k1, rhs, config)?;
        if !outcome.accepted {
            rejected += 1;
            if dt_try <= config.dt_min * (1.0 + 1e-12) {
                let status = monitor.classify_stall();
                let (s, a, r, d) = stop(&state, status, accepted, rejected, last_dt, &mut observer);
                return Ok(report(s, state, a, r, d));
            }
            dt = outcome.dt_next.min(dt_try);
            if dt_try > config.dt_min && outcome.dt_next >= dt_try {
                dt = (dt_try * 0.5).max(config.dt_min);
            }
            continue;
        }

        accepted += 1;
        last_dt = dt_try;
        let mut new_state = outcome.new_state;
        if landing {
            new_state.time = target;
        }
        check_means(initial, &new_state)?;
        state = new_state;
        k1 = match k7 {
            Some(k) => k,
            None => rhs.tendency(&state)?,
        };
        dt = if landing {
            outcome.dt_next.max(dt.min(config.dt_max))
        } else {
            outcome.dt_next
        };

        observer(
            &state,
            &SampleInfo {
                kind: SampleKind::Step,
                is_output: landing,
                dt: last_dt,
                step: accepted,
            },
        );

        if landing {
            next_target += 1;
            if next_target == targets.len() {
                return Ok(report(Termination::ReachedTFinal, state, accepted, rejected, last_dt));
            }
        }
        if let Some(status) = monitor.check(&state) {
            let (s, a, r, d) = stop(&state, status, accepted, rejected, last_dt, &mut observer);
            return Ok(report(s, state, a, r, d));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linear_dispersion, ModelKind};
    use crate::spectral::{SpectralGrid, Spectrum};
    use num_complex::Complex64;

    fn linear_alpha1() -> (SpectralGrid, ModelParams) {
        let g = SpectralGrid::new(16).unwrap();
        (g, ModelParams::new(ModelKind::Alpha1, 1.0, 2.0, 1.0).linearized())
    }

    #[test]
    fn zero_rhs_leaves_state() {
        let g = SpectralGrid::new(16).unwrap();
        let s = SimState::reduced(0.0, Spectrum::sine_mode(&g, 2, 1.0));
        let rhs = |st: &SimState| Ok(st.fields.zeros_like());
        let out = rk45_step(&s, 0.1, &rhs, &IntegratorConfig::default()).unwrap();
        assert!(out.accepted);
        assert_eq!(out.error_estimate, 0.0);
        assert_eq!(out.new_state.fields, s.fields);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let (g, params) = linear_alpha1();
        let s = SimState::reduced(0.0, Spectrum::sine_mode(&g, 4, 1.0));
        let out = rk45_step(&s, 2.0, &params, &IntegratorConfig::default()).unwrap();
        assert!(!out.accepted);
        assert!(out.error_estimate > 1.0);
        assert!(out.dt_next < 2.0);
    }

    #[test]
    fn local_error_is_fifth_order() {
        // one-step error against e^{λ dt}: local error O(dt^6) for the 5th-order
        // solution; the ratio over a halving must approach 64
        let (g, params) = linear_alpha1();
        let k = 4;
        let lambda = linear_dispersion(k as i64, &params).unwrap();
        let p0 = Spectrum::sine_mode(&g, k, 1.0);
        let s = SimState::reduced(0.0, p0.clone());
        let err = |dt: f64| {
            let out = rk45_step(&s, dt, &params, &IntegratorConfig::default()).unwrap();
            let exact = p0.coeff(k) * (lambda * dt).exp();
            (out.new_state.fields.primary().coeff(k) - exact).norm()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 / e2 > 32.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn nan_stage_rejects_and_halves() {
        let g = SpectralGrid::new(16).unwrap();
        let s = SimState::reduced(0.0, Spectrum::sine_mode(&g, 1, 1.0));
        let rhs = |st: &SimState| {
            let mut f = st.fields.zeros_like();
            if let Fields::Reduced(p) = &mut f {
                p.coeffs_mut()[1] = Complex64::new(f64::NAN, 0.0);
            }
            Ok(f)
        };
        let out = rk45_step(&s, 0.2, &rhs, &IntegratorConfig::default()).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.dt_next, 0.1);
    }

    #[test]
    fn zero_final_time_returns_initial() {
        let (g, params) = linear_alpha1();
        let s = SimState::reduced(0.0, Spectrum::sine_mode(&g, 4, 1.0));
        let cfg = IntegratorConfig {
            t_final: 0.0,
            ..Default::default()
        };
        let mut seen = 0;
        let rep = integrate(&s, &params, &cfg, |_, _| seen += 1).unwrap();
        assert_eq!(rep.status, Termination::ReachedTFinal);
        assert_eq!(rep.final_state, s);
        assert_eq!(seen, 1);
    }

    #[test]
    fn lands_on_output_instants_and_respects_dt_bounds() {
        let (g, params) = linear_alpha1();
        let s = SimState::reduced(0.0, Spectrum::sine_mode(&g, 4, 1.0));
        let cfg = IntegratorConfig {
            t_final: 1.0,
            output_every: Some(0.25),
            dt_max: 0.05,
            ..Default::default()
        };
        let mut outputs = Vec::new();
        let mut dts = Vec::new();
        integrate(&s, &params, &cfg, |st, info| {
            if info.is_output {
                outputs.push(st.time);
            }
            if info.kind == SampleKind::Step {
                dts.push(info.dt);
            }
        })
        .unwrap();
        assert_eq!(outputs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(dts.iter().all(|&d| d <= 0.05 + 1e-15));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = IntegratorConfig {
            dt_min: 1.0,
            dt_init: 0.1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}

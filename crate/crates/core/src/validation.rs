//! Independent checks on the solvers: exact linear evolution, agreement of
//! the general tendency with the dedicated forms, the reduced model against
//! the parent chemotaxis system, and grid/tolerance self-convergence.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Termination};
use crate::model::{
    general_form, linear_dispersion, rhs_alpha0, rhs_alpha1, rhs_alpha2, ModelKind, ModelParams,
    SimState,
};
use crate::spectral::{backward_values, SpectralGrid, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Outcome of a sweep. Serializes to the JSON report format.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Name of the swept parameter.
    pub parameter: String,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log(error)` against `log(value)`.
    pub estimated_order: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub metadata: BTreeMap<String, String>,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Slope of the least-squares line through `(log x, log y)`; needs at least
/// two points with positive finite values.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 || pts.len() != xs.len() {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

fn rel_l2(a: &Spectrum, b: &Spectrum) -> f64 {
    let num: f64 = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.coeffs().iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Discrepancy of a linearized run against `e^{λ(k)t} p̂₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleError {
    /// Relative L2 error of the coefficients.
    pub relative: f64,
    /// Largest coefficient error in units of `atol + rtol·|exact|`, the
    /// integrator's own tolerance.
    pub scaled: f64,
}

/// Integrates the linearized model from `sin(kx)` and compares with the
/// exact single-mode solution.
pub fn linear_oracle_error(
    k: usize,
    params: &ModelParams,
    n_nodes: usize,
    config: &IntegratorConfig,
) -> Result<OracleError> {
    if k == 0 {
        return Err(Error::ZeroWavenumber);
    }
    let grid = SpectralGrid::new(n_nodes)?;
    if k >= grid.nyquist() {
        return Err(Error::InvalidParameter {
            key: "k".into(),
            reason: format!("wavenumber {k} is not resolved on {n_nodes} nodes"),
        });
    }
    let params = params.clone().linearized();
    params.validate()?;
    let lambda = linear_dispersion(k as i64, &params)?;
    let p0 = Spectrum::sine_mode(&grid, k, 1.0);
    let cfg = IntegratorConfig {
        blowup: None,
        ..config.clone()
    };
    let report = integrate(&SimState::reduced(0.0, p0.clone()), &params, &cfg, |_, _| {})?;
    let mut exact = Spectrum::zeros(&grid);
    exact.coeffs_mut()[k] = p0.coeff(k) * (lambda * report.time).exp();
    let got = report.final_state.fields.primary();
    let scaled = got
        .coeffs()
        .iter()
        .zip(exact.coeffs())
        .map(|(g, e)| (g - e).norm() / (cfg.atol + cfg.rtol * e.norm()))
        .fold(0.0, f64::max);
    Ok(OracleError {
        relative: rel_l2(got, &exact),
        scaled,
    })
}

/// Zero-mean random spectrum supported on `1..=N/3` with decaying amplitudes.
pub fn random_band_limited(grid: &SpectralGrid, rng: &mut impl Rng, amplitude: f64) -> Spectrum {
    let mut s = Spectrum::zeros(grid);
    for k in 1..=grid.dealias_cutoff() {
        let decay = amplitude / (1.0 + k as f64 / 4.0).powi(2);
        s.coeffs_mut()[k] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay;
    }
    s
}

fn max_rel(a: &Spectrum, b: &Spectrum) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
        / scale
}

/// Compares the general tendency with the dedicated `α ∈ {0, 1, 2}` form on
/// `trials` random states. At `α = 0` the general Fourier formula is
/// evaluated per mode, bypassing the `α > 0` restriction of the public API.
pub fn cross_check_rhs(alpha: u8, trials: usize, seed: u64, n_nodes: usize) -> Result<ConvergenceReport> {
    const THRESHOLD: f64 = 1e-12;
    let kind = match alpha {
        0 => ModelKind::Alpha0,
        1 => ModelKind::Alpha1,
        2 => ModelKind::Alpha2,
        other => {
            return Err(Error::InvalidParameter {
                key: "alpha".into(),
                reason: format!("dedicated forms exist for 0, 1 and 2, not {other}"),
            })
        }
    };
    if trials == 0 {
        return Err(Error::InvalidParameter {
            key: "trials".into(),
            reason: "need at least one trial".into(),
        });
    }
    let grid = SpectralGrid::new(n_nodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = Vec::with_capacity(trials);
    for trial in 0..trials {
        let beta = rng.gen_range(-0.9..4.0);
        let epsilon = rng.gen_range(0.05..2.0);
        let amplitude = rng.gen_range(0.1..5.0);
        let p = if trial == 0 {
            Spectrum::zeros(&grid)
        } else {
            random_band_limited(&grid, &mut rng, amplitude)
        };
        let dedicated_params = ModelParams::new(kind, alpha as f64, beta, epsilon);
        let dedicated = match kind {
            ModelKind::Alpha0 => rhs_alpha0(&p, &dedicated_params)?,
            ModelKind::Alpha1 => rhs_alpha1(&p, &dedicated_params)?,
            _ => rhs_alpha2(&p, &dedicated_params)?,
        };
        let general_params = ModelParams::new(ModelKind::General, alpha as f64, beta, epsilon);
        let general = general_form(&p, &general_params);
        errors.push(max_rel(&general, &dedicated));
    }
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    let mut metadata = BTreeMap::new();
    metadata.insert("alpha".into(), alpha.to_string());
    metadata.insert("n_nodes".into(), n_nodes.to_string());
    metadata.insert("seed".into(), seed.to_string());
    metadata.insert("max_discrepancy".into(), format!("{worst:e}"));
    Ok(ConvergenceReport {
        parameter: "trial".into(),
        values: (0..trials).map(|t| t as f64).collect(),
        errors,
        estimated_order: None,
        threshold: THRESHOLD,
        verdict: Verdict::from_bool(worst <= THRESHOLD),
        metadata,
    })
}

/// Settings of the reduced-vs-parent comparison.
#[derive(Clone, Debug)]
pub struct AsymptoticSetup {
    pub alpha: f64,
    pub beta: f64,
    /// Reduced-model time; the parent system runs to `tau_final / ε`.
    pub tau_final: f64,
    pub integrator: IntegratorConfig,
    /// Minimum acceptable order in `ε`.
    pub min_order: f64,
}

fn reduced_kind(alpha: f64) -> ModelKind {
    match alpha {
        0.0 => ModelKind::Alpha0,
        1.0 => ModelKind::Alpha1,
        2.0 => ModelKind::Alpha2,
        _ => ModelKind::General,
    }
}

/// Parent-system initial data for the reduced profile `p0`:
/// `u = 1 + εh₀` with `h₀ = -p₀/χ`, and `q = εp₀/χ`.
pub fn parent_initial_data(p0: &Spectrum, epsilon: f64, chi: f64) -> (Spectrum, Spectrum) {
    (p0.scaled(-epsilon / chi), p0.scaled(epsilon / chi))
}

/// The reduced unknown read off the parent solution at time `t`: `χq/ε`
/// in the frame `ξ = x - t`.
pub fn reduced_view(q: &Spectrum, t: f64, epsilon: f64, chi: f64) -> Spectrum {
    q.shifted(t).scaled(chi / epsilon)
}

fn sup_distance(a: &Spectrum, b: &Spectrum) -> f64 {
    let mut d = a.clone();
    d.add_scaled(-1.0, b);
    backward_values(&d).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct SweepPoint {
    error: f64,
    note: Option<String>,
}

fn asymptotic_point(p0: &Spectrum, epsilon: f64, setup: &AsymptoticSetup) -> Result<SweepPoint> {
    let cfg = IntegratorConfig {
        blowup: None,
        output_every: None,
        ..setup.integrator.clone()
    };

    let reduced_params = ModelParams::new(reduced_kind(setup.alpha), setup.alpha, setup.beta, epsilon);
    let reduced = integrate(
        &SimState::reduced(0.0, p0.clone()),
        &reduced_params,
        &IntegratorConfig {
            t_final: setup.tau_final,
            ..cfg.clone()
        },
        |_, _| {},
    )?;

    let full_params = ModelParams::new(ModelKind::FullSystem, setup.alpha, setup.beta, epsilon);
    let chi = full_params.chi;
    let (u0, q0) = parent_initial_data(p0, epsilon, chi);
    let t_phys = setup.tau_final / epsilon;
    let full = integrate(
        &SimState::full(0.0, u0, q0),
        &full_params,
        &IntegratorConfig {
            t_final: t_phys,
            ..cfg
        },
        |_, _| {},
    )?;

    let mut note = None;
    if full.status != Termination::ReachedTFinal || reduced.status != Termination::ReachedTFinal {
        note = Some(format!(
            "stopped early: reduced {:?} at {}, parent {:?} at {}",
            reduced.status, reduced.time, full.status, full.time
        ));
    }
    let q = full.final_state.fields.primary();
    let view = reduced_view(q, full.time, epsilon, chi);
    let mut r = reduced.final_state.fields.primary().clone();
    r.zero_nyquist();
    Ok(SweepPoint {
        error: if note.is_some() { f64::NAN } else { sup_distance(&r, &view) },
        note,
    })
}

/// Runs the parent system and the reduced model for every `ε` and reports
/// the sup-norm discrepancy of `p(τ_final)` against `χq(ξ + t, t)/ε` at
/// `t = τ_final/ε`. Sweep points run concurrently.
pub fn asymptotic_consistency(
    eps_list: &[f64],
    p0: &Spectrum,
    setup: &AsymptoticSetup,
) -> Result<ConvergenceReport> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidParameter {
            key: "eps_list".into(),
            reason: "need at least three values".into(),
        });
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter {
            key: "eps_list".into(),
            reason: "values must be positive and strictly decreasing".into(),
        });
    }
    let points: Vec<Result<SweepPoint>> = std::thread::scope(|scope| {
        let handles: Vec<_> = eps_list
            .iter()
            .map(|&eps| scope.spawn(move || asymptotic_point(p0, eps, setup)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut errors = Vec::new();
    let mut metadata = BTreeMap::new();
    for (eps, point) in eps_list.iter().zip(points) {
        let point = point?;
        if let Some(note) = point.note {
            metadata.insert(format!("eps={eps}"), note);
        }
        errors.push(point.error);
    }
    let all_zero = errors.iter().all(|e| *e == 0.0);
    let order = fit_order(eps_list, &errors);
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    let ok = errors.iter().all(|e| e.is_finite())
        && monotone
        && (all_zero || order.is_some_and(|o| o >= setup.min_order));
    metadata.insert("alpha".into(), setup.alpha.to_string());
    metadata.insert("beta".into(), setup.beta.to_string());
    metadata.insert("tau_final".into(), setup.tau_final.to_string());
    metadata.insert("n_nodes".into(), p0.grid().n_nodes().to_string());
    metadata.insert("monotone".into(), monotone.to_string());
    Ok(ConvergenceReport {
        parameter: "epsilon".into(),
        values: eps_list.to_vec(),
        errors,
        estimated_order: order,
        threshold: setup.min_order,
        verdict: Verdict::from_bool(ok),
        metadata,
    })
}

/// One refinement level of a self-convergence study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub n_nodes: usize,
    pub rtol: f64,
}

/// Runs the same scenario at each level up to `t_out` and compares
/// successive levels on the coarser grid. Passes when every run reaches
/// `t_out` and each discrepancy is at least `min_ratio` times smaller than
/// the previous one (or already at round-off).
pub fn self_convergence(
    params: &ModelParams,
    initial: &dyn Fn(&SpectralGrid) -> Result<Spectrum>,
    base: &IntegratorConfig,
    levels: &[Level],
    t_out: f64,
    min_ratio: f64,
) -> Result<ConvergenceReport> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter {
            key: "levels".into(),
            reason: "need at least two levels".into(),
        });
    }
    let mut finals = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut all_reached = true;
    for level in levels {
        let grid = SpectralGrid::new(level.n_nodes)?;
        let p0 = initial(&grid)?;
        let cfg = IntegratorConfig {
            rtol: level.rtol,
            atol: level.rtol * 1e-2,
            t_final: t_out,
            output_every: None,
            ..base.clone()
        };
        let rep = integrate(&SimState::reduced(0.0, p0), params, &cfg, |_, _| {})?;
        if rep.status != Termination::ReachedTFinal {
            all_reached = false;
            metadata.insert(
                format!("N={}", level.n_nodes),
                format!("{:?} at t = {}", rep.status, rep.time),
            );
        }
        finals.push(rep);
    }
    let mut errors = Vec::new();
    for pair in finals.windows(2) {
        let (a, b) = (pair[0].final_state.fields.primary(), pair[1].final_state.fields.primary());
        let (coarse, fine) = if a.grid().n_nodes() <= b.grid().n_nodes() { (a, b) } else { (b, a) };
        let mut fine_on_coarse = fine.resampled(coarse.grid());
        let mut c = coarse.clone();
        c.zero_nyquist();
        fine_on_coarse.zero_nyquist();
        let d = if pair[0].status == Termination::ReachedTFinal && pair[1].status == Termination::ReachedTFinal {
            sup_distance(&c, &fine_on_coarse)
        } else {
            f64::INFINITY
        };
        errors.push(d);
    }
    let scale = finals
        .iter()
        .map(|r| r.final_state.fields.primary().max_abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let roundoff = 1e-12 * scale;
    let shrinking = errors
        .windows(2)
        .all(|w| w[1] <= roundoff || w[1] * min_ratio <= w[0]);
    let ok = all_reached && errors.iter().all(|e| e.is_finite()) && shrinking;
    let spacing: Vec<f64> = levels[1..]
        .iter()
        .map(|l| 2.0 * std::f64::consts::PI / l.n_nodes as f64)
        .collect();
    metadata.insert("t_out".into(), t_out.to_string());
    metadata.insert("model".into(), params.model.name().into());
    Ok(ConvergenceReport {
        parameter: "grid_spacing".into(),
        values: spacing.clone(),
        errors: errors.clone(),
        estimated_order: if errors.len() >= 2 { fit_order(&spacing, &errors) } else { None },
        threshold: min_ratio,
        verdict: Verdict::from_bool(ok),
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_order_recovers_power_law() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((fit_order(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_order(&xs, &[1.0, 0.0, 1.0]).is_none());
        assert!(fit_order(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn linear_oracle_zero_time() {
        let params = ModelParams::new(ModelKind::Alpha1, 1.0, 2.0, 1.0);
        let cfg = IntegratorConfig {
            t_final: 0.0,
            ..Default::default()
        };
        let e = linear_oracle_error(4, &params, 32, &cfg).unwrap();
        assert_eq!((e.relative, e.scaled), (0.0, 0.0));
        assert!(linear_oracle_error(0, &params, 32, &cfg).is_err());
        assert!(linear_oracle_error(16, &params, 32, &cfg).is_err());
    }

    #[test]
    fn cross_check_rejects_other_alpha() {
        assert!(cross_check_rhs(3, 1, 0, 32).is_err());
        assert!(cross_check_rhs(1, 0, 0, 32).is_err());
    }

    #[test]
    fn zero_state_cross_check_is_exact() {
        let rep = cross_check_rhs(2, 1, 7, 32).unwrap();
        assert_eq!(rep.errors, vec![0.0]);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn parent_data_maps_back_to_profile() {
        let g = SpectralGrid::new(32).unwrap();
        let p0 = Spectrum::sine_mode(&g, 2, 0.3);
        let (_, q0) = parent_initial_data(&p0, 0.05, 5.0);
        let back = reduced_view(&q0, 0.0, 0.05, 5.0);
        assert!(max_rel(&back, &p0) < 1e-15);
    }

    #[test]
    fn asymptotic_input_checks() {
        let g = SpectralGrid::new(32).unwrap();
        let setup = AsymptoticSetup {
            alpha: 2.0,
            beta: 2.0,
            tau_final: 0.1,
            integrator: IntegratorConfig::default(),
            min_order: 0.8,
        };
        let p0 = Spectrum::zeros(&g);
        assert!(asymptotic_consistency(&[0.1, 0.05], &p0, &setup).is_err());
        assert!(asymptotic_consistency(&[0.1, 0.2, 0.05], &p0, &setup).is_err());
    }

    #[test]
    fn identical_levels_agree() {
        let params = ModelParams::new(ModelKind::Alpha1, 1.0, 2.0, 1.0);
        let init = |g: &SpectralGrid| Ok(Spectrum::sine_mode(g, 2, 0.5));
        let level = Level { n_nodes: 32, rtol: 1e-8 };
        let rep = self_convergence(&params, &init, &IntegratorConfig::default(), &[level, level], 0.1, 10.0)
            .unwrap();
        assert_eq!(rep.errors, vec![0.0]);
        assert_eq!(rep.verdict, Verdict::Pass);
    }
}

//! WebAssembly entry points for the static page in `www/`.
//!
//! Each operation returns a JSON document that the page parses and draws.
//! The `*_json` functions hold the logic and are what the native tests call;
//! the exported wrappers only convert errors into JS exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use nlburgers::diagnostics::{sup_norms_of, DiagnosticsRecord};
use nlburgers::integrator::{integrate, IntegratorConfig, SampleKind, Termination};
use nlburgers::model::linear_dispersion;
use nlburgers::runner::InitialData;
use nlburgers::spectral::backward;
use nlburgers::{Error, ModelKind, ModelParams, Result, SimState, SpectralGrid};

/// Largest grid the page may request; keeps a run interactive.
pub const MAX_NODES: usize = 2048;

#[derive(Serialize)]
struct Frame {
    t: f64,
    p: Vec<f64>,
}

#[derive(Default, Serialize)]
struct Series {
    t: Vec<f64>,
    linf_p: Vec<f64>,
    linf_dxp: Vec<f64>,
    energy_f: Vec<f64>,
    tail_fraction: Vec<f64>,
}

#[derive(Serialize)]
struct Simulation {
    x: Vec<f64>,
    frames: Vec<Frame>,
    series: Series,
    status: Termination,
    t_end: f64,
    steps: usize,
}

fn parse_model(model: &str) -> Result<ModelKind> {
    let kind: ModelKind = model.parse()?;
    if kind == ModelKind::FullSystem {
        return Err(Error::InvalidParameter {
            key: "model".into(),
            reason: "the demo runs the reduced models only".into(),
        });
    }
    Ok(kind)
}

fn grid(n_nodes: usize) -> Result<SpectralGrid> {
    if n_nodes > MAX_NODES {
        return Err(Error::InvalidParameter {
            key: "n_nodes".into(),
            reason: format!("at most {MAX_NODES} in the browser"),
        });
    }
    SpectralGrid::new(n_nodes)
}

/// Integrates a reduced model and returns `frames + 1` profiles plus the
/// sup norms, `F` and the tail fraction at every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn simulate_json(
    model: &str,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    n_nodes: usize,
    t_final: f64,
    frames: usize,
    initial: &str,
) -> Result<String> {
    let kind = parse_model(model)?;
    let params = ModelParams::new(kind, alpha, beta, epsilon);
    params.validate()?;
    let grid = grid(n_nodes)?;
    let p0 = initial.parse::<InitialData>()?.spectrum(&grid, 0)?;
    let cfg = IntegratorConfig {
        t_final,
        output_every: Some(t_final / frames.max(1) as f64),
        ..IntegratorConfig::default()
    };
    cfg.validate()?;

    let mut out = Vec::new();
    let mut series = Series::default();
    let report = integrate(&SimState::reduced(0.0, p0), &params, &cfg, |state, info| {
        let p = state.fields.primary();
        let rec = DiagnosticsRecord::compute(state.time, p, &params, info.dt);
        series.t.push(rec.time);
        series.linf_p.push(rec.linf_p);
        series.linf_dxp.push(rec.linf_dxp);
        series.energy_f.push(rec.energy_f);
        series.tail_fraction.push(rec.tail_fraction);
        if info.is_output || info.kind == SampleKind::Terminated {
            out.push(Frame {
                t: state.time,
                p: backward(p).into_values(),
            });
        }
    })?;
    let sim = Simulation {
        x: grid.nodes().to_vec(),
        frames: out,
        series,
        status: report.status,
        t_end: report.time,
        steps: report.accepted_steps,
    };
    Ok(serde_json::to_string(&sim)?)
}

#[derive(Serialize)]
struct Dispersion {
    k: Vec<i64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Linear growth rate `λ(k)` for `k = 1..=k_max`.
pub fn dispersion_json(alpha: f64, beta: f64, epsilon: f64, k_max: usize) -> Result<String> {
    let params = ModelParams::new(ModelKind::General, alpha, beta, epsilon);
    let mut d = Dispersion { k: Vec::new(), re: Vec::new(), im: Vec::new() };
    for k in 1..=k_max.max(1) as i64 {
        let l = linear_dispersion(k, &params)?;
        d.k.push(k);
        d.re.push(l.re);
        d.im.push(l.im);
    }
    Ok(serde_json::to_string(&d)?)
}

#[derive(Serialize)]
struct Profile {
    x: Vec<f64>,
    p: Vec<f64>,
    k: Vec<usize>,
    amplitude: Vec<f64>,
    linf_p: f64,
    linf_dxp: f64,
}

/// The projected initial profile and its coefficient moduli `|p̂(k)|`.
pub fn profile_json(initial: &str, n_nodes: usize) -> Result<String> {
    let grid = grid(n_nodes)?;
    let spec = initial.parse::<InitialData>()?.spectrum(&grid, 0)?;
    let (linf_p, linf_dxp) = sup_norms_of(&spec);
    let prof = Profile {
        x: grid.nodes().to_vec(),
        p: backward(&spec).into_values(),
        k: (0..grid.n_modes()).collect(),
        amplitude: spec.coeffs().iter().map(|c| c.norm()).collect(),
        linf_p,
        linf_dxp,
    };
    Ok(serde_json::to_string(&prof)?)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    model: &str,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    n_nodes: usize,
    t_final: f64,
    frames: usize,
    initial: &str,
) -> std::result::Result<String, JsError> {
    js(simulate_json(model, alpha, beta, epsilon, n_nodes, t_final, frames, initial))
}

#[wasm_bindgen]
pub fn dispersion(alpha: f64, beta: f64, epsilon: f64, k_max: usize) -> std::result::Result<String, JsError> {
    js(dispersion_json(alpha, beta, epsilon, k_max))
}

#[wasm_bindgen]
pub fn profile(initial: &str, n_nodes: usize) -> std::result::Result<String, JsError> {
    js(profile_json(initial, n_nodes))
}

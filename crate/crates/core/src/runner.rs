//! Run configuration, the reference presets, and orchestration of a run into
//! `timeseries.csv`, `snapshot_<t>.csv` and `run.json`.
//!
//! The chirp profile `a·sin(b·x²)` is not periodic. It is sampled at the grid
//! nodes as is, so the periodic extension jumps at `x = 2π`; the jump feeds
//! the high modes, which the 2/3 rule keeps out of the products.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{format_g17, DiagnosticsRecord, CSV_HEADER};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, SampleKind, Termination};
use crate::model::{Fields, ModelKind, ModelParams, SimState};
use crate::spectral::{backward, forward, RealField, SpectralGrid, Spectrum};
use crate::validation::{parent_initial_data, random_band_limited};

/// One term `amplitude · sin(wavenumber · x + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub wavenumber: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    Sines(Vec<SineTerm>),
    /// `amplitude · sin(rate · x²)` sampled at the nodes.
    Chirp { amplitude: f64, rate: f64 },
    /// Seeded random band-limited profile with the given coefficient scale.
    Random { amplitude: f64 },
}

impl FromStr for InitialData {
    type Err = Error;

    /// `sines:A,K,PHASE;A,K,PHASE...`, `chirp:A,B` or `random:A`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidParameter {
            key: "initial".into(),
            reason: format!("{why} in `{s}` (expected sines:A,K,PHASE;..., chirp:A,B or random:A)"),
        };
        let (kind, body) = s.split_once(':').ok_or_else(|| bad("missing `kind:`"))?;
        let numbers = |part: &str| -> Result<Vec<f64>> {
            part.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad("unparsable number")))
                .collect()
        };
        match kind.trim() {
            "sines" => {
                let terms = body
                    .split(';')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| match numbers(t)?.as_slice() {
                        [a, k] => Ok(SineTerm { amplitude: *a, wavenumber: *k, phase: 0.0 }),
                        [a, k, ph] => Ok(SineTerm { amplitude: *a, wavenumber: *k, phase: *ph }),
                        _ => Err(bad("a sine term needs 2 or 3 numbers")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if terms.is_empty() {
                    return Err(bad("no sine terms"));
                }
                Ok(InitialData::Sines(terms))
            }
            "chirp" => match numbers(body)?.as_slice() {
                [a, b] => Ok(InitialData::Chirp { amplitude: *a, rate: *b }),
                _ => Err(bad("chirp needs A,B")),
            },
            "random" => match numbers(body)?.as_slice() {
                [a] => Ok(InitialData::Random { amplitude: *a }),
                _ => Err(bad("random needs A")),
            },
            _ => Err(bad("unknown kind")),
        }
    }
}

impl InitialData {
    /// Reduced-model profile on `grid`, projected to zero mean with the
    /// Nyquist mode removed.
    pub fn spectrum(&self, grid: &SpectralGrid, seed: u64) -> Result<Spectrum> {
        let mut spec = match self {
            InitialData::Sines(terms) => {
                let terms = terms.clone();
                forward(&RealField::from_fn(grid, move |x| {
                    terms
                        .iter()
                        .map(|t| t.amplitude * (t.wavenumber * x + t.phase).sin())
                        .sum()
                })?)?
            }
            InitialData::Chirp { amplitude, rate } => {
                let (a, b) = (*amplitude, *rate);
                forward(&RealField::from_fn(grid, move |x| a * (b * x * x).sin())?)?
            }
            InitialData::Random { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                random_band_limited(grid, &mut rng, *amplitude)
            }
        };
        spec.project_zero_mean();
        spec.zero_nyquist();
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Number of grid nodes `N`.
    pub n_modes: usize,
    pub t_final: f64,
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub initial: InitialData,
    pub output_every: f64,
    pub output_dir: PathBuf,
    pub dealias: bool,
    pub seed: u64,
    pub allow_any_alpha: bool,
    pub preset: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let integ = IntegratorConfig::default();
        Self {
            model: ModelKind::Alpha2,
            alpha: 2.0,
            beta: 2.0,
            epsilon: 1.0,
            n_modes: 512,
            t_final: 1.0,
            rtol: integ.rtol,
            atol: integ.atol,
            dt_init: integ.dt_init,
            dt_max: integ.dt_max,
            initial: InitialData::Sines(vec![SineTerm { amplitude: 0.1, wavenumber: 1.0, phase: 0.0 }]),
            output_every: 0.01,
            output_dir: PathBuf::from("out"),
            dealias: true,
            seed: 0,
            allow_any_alpha: false,
            preset: None,
        }
    }
}

pub const PRESETS: [&str; 3] = ["fig_alpha0", "fig_alpha1", "fig_alpha2"];

/// Configurations of the three reference experiments (`ε = 1`, `β = 2`).
pub fn preset(name: &str) -> Result<RunConfig> {
    let sine = |a: f64, k: f64| InitialData::Sines(vec![SineTerm { amplitude: a, wavenumber: k, phase: 0.0 }]);
    let base = RunConfig {
        beta: 2.0,
        epsilon: 1.0,
        preset: Some(name.to_string()),
        output_dir: PathBuf::from(name),
        ..RunConfig::default()
    };
    match name {
        "fig_alpha0" => Ok(RunConfig {
            model: ModelKind::Alpha0,
            alpha: 0.0,
            n_modes: 4096,
            t_final: 0.5,
            output_every: 0.005,
            initial: sine(-2.0, 4.0),
            ..base
        }),
        "fig_alpha1" => Ok(RunConfig {
            model: ModelKind::Alpha1,
            alpha: 1.0,
            n_modes: 1024,
            t_final: 1.0,
            output_every: 0.01,
            initial: sine(-4.0, 10.0),
            ..base
        }),
        "fig_alpha2" => Ok(RunConfig {
            model: ModelKind::Alpha2,
            alpha: 2.0,
            n_modes: 4096,
            t_final: 2.0,
            output_every: 0.02,
            initial: InitialData::Chirp { amplitude: -6.0, rate: 4.0 },
            ..base
        }),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Every key a config file or the command line may set. Unknown keys are
/// rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub model: Option<ModelKind>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_modes: Option<usize>,
    pub t_final: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub dt_init: Option<f64>,
    pub dt_max: Option<f64>,
    pub initial: Option<String>,
    pub preset: Option<String>,
    pub output_every: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub no_dealias: Option<bool>,
    pub seed: Option<u64>,
    pub allow_any_alpha: Option<bool>,
}

impl ConfigOverrides {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(m) = self.model {
            cfg.model = m;
            if let Some(a) = m.fixed_alpha() {
                cfg.alpha = a;
            }
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { cfg.$field = v.clone(); } )* };
        }
        set!(alpha, beta, epsilon, n_modes, t_final, rtol, atol, dt_init, dt_max, output_every, output_dir, seed, allow_any_alpha);
        if let Some(init) = &self.initial {
            cfg.initial = init.parse()?;
        }
        if let Some(nd) = self.no_dealias {
            cfg.dealias = !nd;
        }
        Ok(())
    }
}

/// Resolves a configuration: preset (flag preset wins over file preset), then
/// file values, then flag values.
pub fn parse_config(file: Option<&ConfigOverrides>, flags: &ConfigOverrides) -> Result<RunConfig> {
    let preset_name = flags
        .preset
        .as_ref()
        .or_else(|| file.and_then(|f| f.preset.as_ref()));
    let mut cfg = match preset_name {
        Some(name) => preset(name)?,
        None => RunConfig::default(),
    };
    if let Some(f) = file {
        f.apply(&mut cfg)?;
    }
    flags.apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn model_params(&self) -> ModelParams {
        let mut p = ModelParams::new(self.model, self.alpha, self.beta, self.epsilon);
        p.dealias = self.dealias;
        p.allow_any_alpha = self.allow_any_alpha;
        p
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let defaults = IntegratorConfig::default();
        IntegratorConfig {
            rtol: self.rtol,
            atol: self.atol,
            dt_init: self.dt_init,
            dt_min: defaults.dt_min.min(self.dt_init),
            dt_max: self.dt_max,
            t_final: self.t_final,
            output_every: Some(self.output_every),
            ..defaults
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.model.fixed_alpha() {
            if self.alpha != a {
                return Err(Error::InvalidParameter {
                    key: "alpha".into(),
                    reason: format!("model {} fixes alpha = {a}", self.model.name()),
                });
            }
        }
        self.model_params().validate()?;
        SpectralGrid::new(self.n_modes).map_err(|e| Error::InvalidParameter {
            key: "n_modes".into(),
            reason: e.to_string(),
        })?;
        self.integrator_config().validate()?;
        Ok(())
    }

    /// Initial state. The full system starts from `u = 1 + εh₀`, `q = εp₀/χ`.
    pub fn initial_state(&self) -> Result<SimState> {
        let grid = SpectralGrid::new(self.n_modes)?;
        let p0 = self.initial.spectrum(&grid, self.seed)?;
        Ok(match self.model {
            ModelKind::FullSystem => {
                let params = self.model_params();
                let (u, q) = parent_initial_data(&p0, params.epsilon, params.chi);
                SimState::full(0.0, u, q)
            }
            _ => SimState::reduced(0.0, p0),
        })
    }
}

/// The field recorded in outputs: `p`, or `χq/ε` for the full system.
fn observed(fields: &Fields, params: &ModelParams) -> Spectrum {
    match fields {
        Fields::Reduced(p) => p.clone(),
        Fields::Full { q, .. } => q.scaled(params.chi / params.epsilon),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TerminationSummary {
    pub status: Termination,
    pub time: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub last_dt: f64,
    /// Largest departure of the conserved means from their initial values
    /// over every accepted step: `p̂(0)` for the reduced models, `q̂(0)` and
    /// the cell mass `û(0)` for the full system.
    pub mean_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub config: RunConfig,
    pub termination: TerminationSummary,
    pub exit_code: i32,
    pub wall_time_s: f64,
    pub version: String,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub metadata: RunMetadata,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<PathBuf>,
}

pub fn exit_code(status: Termination) -> i32 {
    match status {
        Termination::ReachedTFinal => 0,
        Termination::BlowupSuspected => 2,
        Termination::UnderResolved => 3,
        Termination::MaxSteps => 1,
    }
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t:.6}.csv")
}

fn snapshot_csv(spec: &Spectrum) -> String {
    let field = backward(spec);
    let mut out = String::from("x,p\n");
    for (x, v) in spec.grid().nodes().iter().zip(field.values()) {
        let _ = writeln!(out, "{},{}", format_g17(*x), format_g17(*v));
    }
    out
}

/// Executes a run and writes its outputs into `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let started = Instant::now();
    let params = config.model_params();
    let integ = config.integrator_config();
    let initial = config.initial_state()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut io_error: Option<std::io::Error> = None;
    let means0: Vec<_> = initial.fields.parts().iter().map(|s| s.mean_coeff()).collect();
    let mut mean_drift = 0.0_f64;
    let report = integrate(&initial, &params, &integ, |state, info| {
        for (part, m0) in state.fields.parts().iter().zip(&means0) {
            mean_drift = mean_drift.max((part.mean_coeff() - m0).norm());
        }
        let want_row = info.is_output || info.kind == SampleKind::Terminated;
        if !want_row || io_error.is_some() {
            return;
        }
        let spec = observed(&state.fields, &params);
        if info.kind == SampleKind::Terminated
            && records.last().is_some_and(|r: &DiagnosticsRecord| r.time == state.time)
        {
            return;
        }
        records.push(DiagnosticsRecord::compute(state.time, &spec, &params, info.dt));
        if info.is_output {
            let path = dir.join(snapshot_name(state.time));
            match fs::write(&path, snapshot_csv(&spec)) {
                Ok(()) => snapshots.push(path),
                Err(e) => io_error = Some(e),
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &records {
        if !r.is_finite() {
            return Err(Error::InvariantViolation {
                time: r.time,
                detail: "non-finite diagnostics".into(),
            });
        }
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    fs::write(dir.join("timeseries.csv"), csv)?;

    let metadata = RunMetadata {
        config: config.clone(),
        termination: TerminationSummary {
            status: report.status,
            time: report.time,
            accepted_steps: report.accepted_steps,
            rejected_steps: report.rejected_steps,
            last_dt: report.last_dt,
            mean_drift,
        },
        exit_code: exit_code(report.status),
        wall_time_s: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&metadata)?)?;
    Ok(RunSummary {
        metadata,
        records,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_reference_setups() {
        let p = preset("fig_alpha0").unwrap();
        assert_eq!((p.model, p.n_modes, p.epsilon, p.beta), (ModelKind::Alpha0, 4096, 1.0, 2.0));
        assert_eq!(
            p.initial,
            InitialData::Sines(vec![SineTerm { amplitude: -2.0, wavenumber: 4.0, phase: 0.0 }])
        );
        let p = preset("fig_alpha1").unwrap();
        assert_eq!((p.model, p.n_modes, p.epsilon, p.beta), (ModelKind::Alpha1, 1024, 1.0, 2.0));
        let p = preset("fig_alpha2").unwrap();
        assert_eq!((p.model, p.n_modes), (ModelKind::Alpha2, 4096));
        assert_eq!(p.initial, InitialData::Chirp { amplitude: -6.0, rate: 4.0 });
        assert!(matches!(preset("fig_alpha9"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn initial_grammar() {
        let i: InitialData = "sines:-2,4;0.5,3,1.5".parse().unwrap();
        assert_eq!(
            i,
            InitialData::Sines(vec![
                SineTerm { amplitude: -2.0, wavenumber: 4.0, phase: 0.0 },
                SineTerm { amplitude: 0.5, wavenumber: 3.0, phase: 1.5 },
            ])
        );
        assert_eq!("chirp:-6,4".parse::<InitialData>().unwrap(), InitialData::Chirp { amplitude: -6.0, rate: 4.0 });
        assert!("wave:1".parse::<InitialData>().is_err());
        assert!("sines:1".parse::<InitialData>().is_err());
        assert!("chirp:x,2".parse::<InitialData>().is_err());
    }

    #[test]
    fn chirp_is_mean_projected() {
        let g = SpectralGrid::new(256).unwrap();
        let s = InitialData::Chirp { amplitude: -6.0, rate: 4.0 }.spectrum(&g, 0).unwrap();
        assert_eq!(s.mean_coeff().norm(), 0.0);
        assert_eq!(s.coeff(g.nyquist()).norm(), 0.0);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::from_json(r#"{"beta": 2.0, "model": "alpha1"}"#).unwrap();
        let flags = ConfigOverrides { beta: Some(3.0), ..Default::default() };
        let cfg = parse_config(Some(&file), &flags).unwrap();
        assert_eq!(cfg.beta, 3.0);
        assert_eq!(cfg.model, ModelKind::Alpha1);
        assert_eq!(cfg.alpha, 1.0);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ConfigOverrides::from_json(r#"{"betta": 2.0}"#).is_err());
        let flags = ConfigOverrides { beta: Some(-1.0), ..Default::default() };
        let err = parse_config(None, &flags).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        let flags = ConfigOverrides { n_modes: Some(7), ..Default::default() };
        assert!(parse_config(None, &flags).unwrap_err().to_string().contains("n_modes"));
    }

    #[test]
    fn preset_flag_fully_populates() {
        let flags = ConfigOverrides { preset: Some("fig_alpha2".into()), ..Default::default() };
        let cfg = parse_config(None, &flags).unwrap();
        assert_eq!(cfg, preset("fig_alpha2").unwrap());
    }

    #[test]
    fn alpha_override_flag() {
        let flags = ConfigOverrides {
            model: Some(ModelKind::General),
            alpha: Some(2.5),
            ..Default::default()
        };
        assert!(parse_config(None, &flags).is_err());
        let flags = ConfigOverrides { allow_any_alpha: Some(true), ..flags };
        assert!(parse_config(None, &flags).is_ok());
    }
}

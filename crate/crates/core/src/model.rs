//! Tendencies `∂_t p̂` of the reduced nonlocal Burgers models and of the
//! parent chemotaxis system, plus the exact linear dispersion relation.
//!
//! All reduced models share the form
//!
//! ```text
//! (1 + ¼(-Δ)^{α-1}) ∂_t p = -(β+1)/(2ε) (-Δ)^{α/2} p - 1/(4ε) (-Δ)^{α-1/2} H p
//!                          + ∂_x(p²/2) + (-Δ)^{α/2}(p²/4) - (β/ε) ∂_x p
//! ```
//!
//! The `alpha0`, `alpha1` and `alpha2` kinds are the dedicated forms the
//! closed-form cases are integrated with (kernel `𝒦`, mass factor 5/4, and
//! kernel `𝒥` respectively); `general` evaluates the expression above for
//! `α ∈ (0, 2]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{check_alpha, product, quadratic, symbol_unchecked, OperatorKind, Spectrum};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    General,
    Alpha0,
    Alpha1,
    Alpha2,
    FullSystem,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::General => "general",
            ModelKind::Alpha0 => "alpha0",
            ModelKind::Alpha1 => "alpha1",
            ModelKind::Alpha2 => "alpha2",
            ModelKind::FullSystem => "full_system",
        }
    }

    /// The order a dedicated form is pinned to.
    pub fn fixed_alpha(self) -> Option<f64> {
        match self {
            ModelKind::Alpha0 => Some(0.0),
            ModelKind::Alpha1 => Some(1.0),
            ModelKind::Alpha2 => Some(2.0),
            _ => None,
        }
    }

    pub fn is_reduced(self) -> bool {
        self != ModelKind::FullSystem
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(ModelKind::General),
            "alpha0" => Ok(ModelKind::Alpha0),
            "alpha1" => Ok(ModelKind::Alpha1),
            "alpha2" => Ok(ModelKind::Alpha2),
            "full_system" | "full-system" => Ok(ModelKind::FullSystem),
            other => Err(Error::InvalidParameter {
                key: "model".into(),
                reason: format!("unknown model `{other}`"),
            }),
        }
    }
}

/// Every coefficient of the evolution equations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Chemotactic sensitivity; only the full system reads it.
    pub chi: f64,
    pub model: ModelKind,
    pub dealias: bool,
    /// Test hook: when false every quadratic term is dropped.
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    /// Allows `α > 2` (the well-posedness theory covers any `α ≥ 0`).
    #[serde(default)]
    pub allow_any_alpha: bool,
}

fn default_true() -> bool {
    true
}

impl ModelParams {
    /// Parameters for `model`. Dedicated forms get their pinned `α`; the
    /// sensitivity follows `χ = 2β + 1`.
    pub fn new(model: ModelKind, alpha: f64, beta: f64, epsilon: f64) -> Self {
        Self {
            alpha: model.fixed_alpha().unwrap_or(alpha),
            beta,
            epsilon,
            chi: 2.0 * beta + 1.0,
            model,
            dealias: true,
            nonlinear: true,
            allow_any_alpha: false,
        }
    }

    pub fn linearized(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha, self.allow_any_alpha)?;
        if !(self.beta > -1.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter {
                key: "beta".into(),
                reason: format!("must satisfy beta > -1, got {}", self.beta),
            });
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                key: "epsilon".into(),
                reason: format!("must be positive, got {}", self.epsilon),
            });
        }
        if !self.chi.is_finite() {
            return Err(Error::InvalidParameter {
                key: "chi".into(),
                reason: "must be finite".into(),
            });
        }
        if let Some(a) = self.model.fixed_alpha() {
            if self.alpha != a {
                return Err(Error::InvalidParameter {
                    key: "alpha".into(),
                    reason: format!("model {} requires alpha = {a}", self.model.name()),
                });
            }
        }
        if self.model == ModelKind::General && self.alpha == 0.0 {
            return Err(Error::GeneralAtAlphaZero);
        }
        Ok(())
    }

    /// Dispatches to the tendency of the configured model.
    pub fn tendency(&self, fields: &Fields) -> Result<Fields> {
        match (self.model, fields) {
            (ModelKind::General, Fields::Reduced(p)) => rhs_general(p, self).map(Fields::Reduced),
            (ModelKind::Alpha0, Fields::Reduced(p)) => rhs_alpha0(p, self).map(Fields::Reduced),
            (ModelKind::Alpha1, Fields::Reduced(p)) => rhs_alpha1(p, self).map(Fields::Reduced),
            (ModelKind::Alpha2, Fields::Reduced(p)) => rhs_alpha2(p, self).map(Fields::Reduced),
            (ModelKind::FullSystem, Fields::Full { u, q }) => {
                let (du, dq) = rhs_full_system(u, q, self)?;
                Ok(Fields::Full { u: du, q: dq })
            }
            (m, _) => Err(Error::WrongModel {
                model: m.name(),
                what: "this state layout",
            }),
        }
    }
}

/// Unknowns of a run. `Full::u` stores `u - 1`; its mean is the cell mass
/// excess and is conserved.
#[derive(Clone, Debug, PartialEq)]
pub enum Fields {
    Reduced(Spectrum),
    Full { u: Spectrum, q: Spectrum },
}

impl Fields {
    pub fn zeros_like(&self) -> Self {
        match self {
            Fields::Reduced(p) => Fields::Reduced(Spectrum::zeros(p.grid())),
            Fields::Full { u, q } => Fields::Full {
                u: Spectrum::zeros(u.grid()),
                q: Spectrum::zeros(q.grid()),
            },
        }
    }

    pub fn parts(&self) -> Vec<&Spectrum> {
        match self {
            Fields::Reduced(p) => vec![p],
            Fields::Full { u, q } => vec![u, q],
        }
    }

    fn parts_mut(&mut self) -> Vec<&mut Spectrum> {
        match self {
            Fields::Reduced(p) => vec![p],
            Fields::Full { u, q } => vec![u, q],
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, factor: f64, other: &Fields) {
        for (a, b) in self.parts_mut().into_iter().zip(other.parts()) {
            a.add_scaled(factor, b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|s| s.is_finite())
    }

    /// The field carrying the reduced unknown: `p`, or `q` for the full system.
    pub fn primary(&self) -> &Spectrum {
        match self {
            Fields::Reduced(p) => p,
            Fields::Full { q, .. } => q,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub fields: Fields,
}

impl SimState {
    pub fn reduced(time: f64, p: Spectrum) -> Self {
        Self {
            time,
            fields: Fields::Reduced(p),
        }
    }

    pub fn full(time: f64, u_minus_one: Spectrum, q: Spectrum) -> Self {
        Self {
            time,
            fields: Fields::Full { u: u_minus_one, q },
        }
    }
}

fn square_or_zero(p: &Spectrum, params: &ModelParams) -> Spectrum {
    if params.nonlinear {
        quadratic(p, params.dealias)
    } else {
        Spectrum::zeros(p.grid())
    }
}

/// Builds a tendency mode by mode from `p̂(k)` and `(p²)̂(k)`; the mean and the
/// Nyquist mode are left at zero.
fn per_mode(
    p: &Spectrum,
    sq: &Spectrum,
    f: impl Fn(f64, Complex64, Complex64) -> Complex64,
) -> Spectrum {
    let ny = p.grid().nyquist();
    let coeffs = (0..=ny)
        .map(|k| {
            if k == 0 || k == ny {
                ZERO
            } else {
                f(k as f64, p.coeff(k), sq.coeff(k))
            }
        })
        .collect();
    Spectrum::from_coeffs_unchecked(p.grid(), coeffs)
}

pub(crate) fn general_form(p: &Spectrum, params: &ModelParams) -> Spectrum {
    let sq = square_or_zero(p, params);
    let (a, b, e) = (params.alpha, params.beta, params.epsilon);
    per_mode(p, &sq, |k, ph, qh| {
        let ka = k.powf(a);
        let mass = 1.0 + 0.25 * k.powf(2.0 * (a - 1.0));
        let linear = -(b + 1.0) / (2.0 * e) * ka * ph + I * k.powf(2.0 * a - 1.0) / (4.0 * e) * ph
            - (b / e) * I * k * ph;
        let nonlinear = (I * k / 2.0 + ka / 4.0) * qh;
        (linear + nonlinear) / mass
    })
}

/// General-`α` tendency, `α ∈ (0, 2]`.
pub fn rhs_general(p: &Spectrum, params: &ModelParams) -> Result<Spectrum> {
    if params.model != ModelKind::General {
        return Err(Error::WrongModel {
            model: params.model.name(),
            what: "the general tendency",
        });
    }
    params.validate()?;
    Ok(general_form(p, params))
}

fn require(params: &ModelParams, kind: ModelKind, what: &'static str) -> Result<()> {
    if params.model != kind {
        return Err(Error::WrongModel {
            model: params.model.name(),
            what,
        });
    }
    params.validate()
}

/// `α = 0` in kernel form:
/// `∂_t p = 𝒦[((β+1)/2ε)∂_x²p + (1/4ε)∂_x p - ∂_x³(p²/2) - Δ(p²/4) + (β/ε)∂_x³p]`.
pub fn rhs_alpha0(p: &Spectrum, params: &ModelParams) -> Result<Spectrum> {
    require(params, ModelKind::Alpha0, "the alpha0 tendency")?;
    let sq = square_or_zero(p, params);
    let (b, e) = (params.beta, params.epsilon);
    Ok(per_mode(p, &sq, |k, ph, qh| {
        let kern = symbol_unchecked(OperatorKind::KernK, 0.0, k as i64);
        let k2 = k * k;
        let k3 = k2 * k;
        let inner = -(b + 1.0) / (2.0 * e) * k2 * ph + I * k / (4.0 * e) * ph
            + I * k3 / 2.0 * qh
            + k2 / 4.0 * qh
            - (b / e) * I * k3 * ph;
        kern * inner
    }))
}

/// `α = 1`:
/// `(5/4)∂_t p = -((β+1)/2ε)(-Δ)^{1/2}p + ((¼-β)/ε)∂_x p + p∂_x p + (-Δ)^{1/2}(p²/4)`.
pub fn rhs_alpha1(p: &Spectrum, params: &ModelParams) -> Result<Spectrum> {
    require(params, ModelKind::Alpha1, "the alpha1 tendency")?;
    let sq = square_or_zero(p, params);
    let (b, e) = (params.beta, params.epsilon);
    Ok(per_mode(p, &sq, |k, ph, qh| {
        let inner = -(b + 1.0) / (2.0 * e) * k * ph + (0.25 - b) / e * I * k * ph
            + I * k / 2.0 * qh
            + k / 4.0 * qh;
        inner * 0.8
    }))
}

/// `α = 2` in kernel form:
/// `∂_t p = 𝒥[((1+β)/2ε)Δp - (1/4ε)∂_x³p + p∂_x p - Δ(p²/4) - (β/ε)∂_x p]`.
pub fn rhs_alpha2(p: &Spectrum, params: &ModelParams) -> Result<Spectrum> {
    require(params, ModelKind::Alpha2, "the alpha2 tendency")?;
    let sq = square_or_zero(p, params);
    let (b, e) = (params.beta, params.epsilon);
    Ok(per_mode(p, &sq, |k, ph, qh| {
        let kern = symbol_unchecked(OperatorKind::KernJ, 0.0, k as i64);
        let k2 = k * k;
        let inner = -(1.0 + b) / (2.0 * e) * k2 * ph + I * k2 * k / (4.0 * e) * ph
            + I * k / 2.0 * qh
            + k2 / 4.0 * qh
            - (b / e) * I * k * ph;
        kern * inner
    }))
}

/// Chemotaxis system `∂_t u = -(-Δ)^{α/2}u + χ∂_x(uq)`, `∂_t q = ∂_x u`, with
/// `u_minus_one = u - 1`. The background contributes `χ∂_x q` exactly.
pub fn rhs_full_system(
    u_minus_one: &Spectrum,
    q: &Spectrum,
    params: &ModelParams,
) -> Result<(Spectrum, Spectrum)> {
    require(params, ModelKind::FullSystem, "the full-system tendency")?;
    let flux = if params.nonlinear {
        let mut f = product(u_minus_one, q, params.dealias);
        f.add_scaled(1.0, q);
        f
    } else {
        q.clone()
    };
    let grid = q.grid();
    let ny = grid.nyquist();
    let mut du = Vec::with_capacity(grid.n_modes());
    let mut dq = Vec::with_capacity(grid.n_modes());
    for k in 0..=ny {
        if k == 0 || k == ny {
            du.push(ZERO);
            dq.push(ZERO);
            continue;
        }
        let kf = k as f64;
        let diffusion = symbol_unchecked(OperatorKind::FracLap, params.alpha, k as i64);
        du.push(-diffusion * u_minus_one.coeff(k) + params.chi * I * kf * flux.coeff(k));
        dq.push(I * kf * u_minus_one.coeff(k));
    }
    Ok((
        Spectrum::from_coeffs_unchecked(grid, du),
        Spectrum::from_coeffs_unchecked(grid, dq),
    ))
}

/// Growth rate `λ(k)` of `e^{ikx}` under the linearized reduced model:
/// `λ = [-(β+1)|k|^α/(2ε) + i(sgn k |k|^{2α-1}/(4ε) - βk/ε)] / (1 + ¼|k|^{2(α-1)})`.
pub fn linear_dispersion(k: i64, params: &ModelParams) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::ZeroWavenumber);
    }
    if params.model == ModelKind::FullSystem {
        return Err(Error::WrongModel {
            model: params.model.name(),
            what: "a reduced dispersion relation",
        });
    }
    let alpha = params.model.fixed_alpha().unwrap_or(params.alpha);
    check_alpha(alpha, params.allow_any_alpha)?;
    let (b, e) = (params.beta, params.epsilon);
    let kf = k as f64;
    let ak = kf.abs();
    let num = Complex64::new(
        -(b + 1.0) / (2.0 * e) * ak.powf(alpha),
        kf.signum() * ak.powf(2.0 * alpha - 1.0) / (4.0 * e) - b * kf / e,
    );
    Ok(num / (1.0 + 0.25 * ak.powf(2.0 * (alpha - 1.0))))
}

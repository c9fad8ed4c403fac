//! Periodic grid on `[0, 2π)`, transforms, Fourier multipliers and dealiased
//! products.
//!
//! Coefficients use the unitary-in-`L²(0, 2π)` convention
//! `p̂(k) = (2π)^{-1/2} ∫ p(x) e^{-ikx} dx`, so that
//! `p(x) = (2π)^{-1/2} Σ_k p̂(k) e^{ikx}` and `Σ_k |p̂(k)|² = ‖p‖²_{L²}`.
//! Only `k = 0..=N/2` is stored; negative wavenumbers follow from Hermitian
//! symmetry of real fields.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

struct GridInner {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid with `n` nodes `x_j = 2πj/n`.
#[derive(Clone)]
pub struct SpectralGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid").field("n_nodes", &self.inner.n).finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n
    }
}

impl SpectralGrid {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 8 || !n_nodes.is_multiple_of(2) {
            return Err(Error::InvalidGrid(n_nodes));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_nodes);
        let inverse = planner.plan_fft_inverse(n_nodes);
        Ok(Self {
            inner: Arc::new(GridInner {
                n: n_nodes,
                forward,
                inverse,
            }),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.inner.n
    }

    /// Number of stored coefficients, `N/2 + 1`.
    pub fn n_modes(&self) -> usize {
        self.inner.n / 2 + 1
    }

    pub fn nyquist(&self) -> usize {
        self.inner.n / 2
    }

    /// Largest wavenumber kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.inner.n / 3
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.inner.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.inner.n).map(|j| j as f64 * h).collect()
    }

    pub fn wavenumbers(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.nyquist()
    }

    /// How many integer wavenumbers a stored index stands for (`k` and `-k`).
    pub fn multiplicity(&self, k: usize) -> f64 {
        if k == 0 || k == self.nyquist() {
            1.0
        } else {
            2.0
        }
    }
}

/// Real samples on the grid nodes.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("real field"));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &SpectralGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fourier coefficients `p̂(k)` for `k = 0..=N/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: SpectralGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_modes()],
        }
    }

    /// Wraps raw coefficients. The Nyquist coefficient is projected onto the
    /// real axis so the spectrum describes a real field.
    pub fn from_coeffs(grid: &SpectralGrid, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_modes(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        let ny = grid.nyquist();
        coeffs[ny].im = 0.0;
        coeffs[0].im = 0.0;
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub(crate) fn from_coeffs_unchecked(grid: &SpectralGrid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.n_modes());
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Single real mode `amplitude · sin(kx)`.
    pub fn sine_mode(grid: &SpectralGrid, k: usize, amplitude: f64) -> Self {
        let mut s = Self::zeros(grid);
        // sin(kx) = (e^{ikx} - e^{-ikx}) / 2i, so p̂(k) = -i √(2π)/2 · a
        s.coeffs[k] = -I * amplitude * (2.0 * PI).sqrt() / 2.0;
        if k == grid.nyquist() {
            s.coeffs[k] = Complex64::new(0.0, 0.0);
        }
        s
    }

    /// Single real mode `amplitude · cos(kx)`.
    pub fn cosine_mode(grid: &SpectralGrid, k: usize, amplitude: f64) -> Self {
        let mut s = Self::zeros(grid);
        let scale = if k == 0 || k == grid.nyquist() { 1.0 } else { 0.5 };
        s.coeffs[k] = Complex64::new(amplitude * (2.0 * PI).sqrt() * scale, 0.0);
        s
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs[k]
    }

    pub fn mean_coeff(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, factor: f64, other: &Spectrum) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * factor;
        }
    }

    /// Multiplies every coefficient by `e^{ikx0}`, i.e. `p(x) ↦ p(x + x0)`.
    pub fn shifted(&self, x0: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x0))
            .collect();
        let mut out = Self::from_coeffs_unchecked(&self.grid, coeffs);
        let ny = self.grid.nyquist();
        out.coeffs[ny] = Complex64::new(out.coeffs[ny].re, 0.0);
        out
    }

    pub fn project_zero_mean(&mut self) {
        self.coeffs[0] = Complex64::new(0.0, 0.0);
    }

    pub fn zero_nyquist(&mut self) {
        let ny = self.grid.nyquist();
        self.coeffs[ny] = Complex64::new(0.0, 0.0);
    }

    /// Zeroes every coefficient with `k > cutoff`.
    pub fn truncate(&mut self, cutoff: usize) {
        for c in self.coeffs.iter_mut().skip(cutoff + 1) {
            *c = Complex64::new(0.0, 0.0);
        }
    }

    /// Re-expresses the spectrum on another grid, keeping the common modes.
    /// When coarsening, the target Nyquist mode is dropped.
    pub fn resampled(&self, target: &SpectralGrid) -> Self {
        let mut out = Spectrum::zeros(target);
        let common = self.grid.nyquist().min(target.nyquist());
        for k in 0..=common {
            out.coeffs[k] = self.coeffs[k];
        }
        if self.grid.nyquist() != target.nyquist() {
            out.coeffs[common] = Complex64::new(0.0, 0.0);
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// Forward transform with the `(2π)^{-1/2}` normalization.
pub fn forward(field: &RealField) -> Result<Spectrum> {
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward transform input"));
    }
    Ok(forward_unchecked(&field.grid, &field.values))
}

pub(crate) fn forward_unchecked(grid: &SpectralGrid, values: &[f64]) -> Spectrum {
    let n = grid.n_nodes();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.inner.forward.process(&mut buf);
    let scale = (2.0 * PI).sqrt() / n as f64;
    let mut coeffs: Vec<Complex64> = buf[..grid.n_modes()].iter().map(|c| c * scale).collect();
    coeffs[0].im = 0.0;
    let ny = grid.nyquist();
    coeffs[ny].im = 0.0;
    Spectrum::from_coeffs_unchecked(grid, coeffs)
}

/// Inverse transform back to nodal values.
pub fn backward(spec: &Spectrum) -> RealField {
    RealField {
        grid: spec.grid.clone(),
        values: backward_values(spec),
    }
}

pub(crate) fn backward_values(spec: &Spectrum) -> Vec<f64> {
    let grid = &spec.grid;
    let n = grid.n_nodes();
    let ny = grid.nyquist();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(spec.coeffs[0].re, 0.0);
    for k in 1..ny {
        buf[k] = spec.coeffs[k];
        buf[n - k] = spec.coeffs[k].conj();
    }
    buf[ny] = Complex64::new(spec.coeffs[ny].re, 0.0);
    grid.inner.inverse.process(&mut buf);
    let scale = 1.0 / (2.0 * PI).sqrt();
    buf.into_iter().map(|c| c.re * scale).collect()
}

/// Nonlocal and differential operators used by the models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `(-Δ)^{s/2}`, symbol `|k|^s` (the order `s` is passed as `alpha`).
    FracLap,
    /// Hilbert transform, symbol `-i sgn(k)`.
    Hilbert,
    /// `∂_x`, symbol `ik`.
    Deriv,
    /// `1 + ¼(-Δ)^{α-1}`, symbol `1 + ¼|k|^{2(α-1)}`.
    MassLhs,
    /// Inverse of `¼ - ∂_x²`, symbol `1/(¼ + k²)`.
    KernK,
    /// Inverse of `1 - ¼∂_x²`, symbol `1/(1 + k²/4)`.
    KernJ,
}

impl OperatorKind {
    fn is_odd(self) -> bool {
        matches!(self, OperatorKind::Hilbert | OperatorKind::Deriv)
    }
}

/// Fourier symbol of `kind` at wavenumber `k` (any sign). At `k = 0` every
/// symbol is 0 except the two kernels, which evaluate to their finite limits.
pub fn symbol(kind: OperatorKind, alpha: f64, k: i64) -> Result<Complex64> {
    check_alpha(alpha, false)?;
    Ok(symbol_unchecked(kind, alpha, k))
}

/// As [`symbol`], with the `[0, 2]` range check optionally lifted.
pub fn symbol_with_override(
    kind: OperatorKind,
    alpha: f64,
    k: i64,
    allow_any_alpha: bool,
) -> Result<Complex64> {
    check_alpha(alpha, allow_any_alpha)?;
    Ok(symbol_unchecked(kind, alpha, k))
}

pub(crate) fn check_alpha(alpha: f64, allow_any_alpha: bool) -> Result<()> {
    if !alpha.is_finite() || (!allow_any_alpha && !(0.0..=2.0).contains(&alpha)) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if alpha < 0.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

pub(crate) fn symbol_unchecked(kind: OperatorKind, alpha: f64, k: i64) -> Complex64 {
    let kf = k as f64;
    let ak = kf.abs();
    let sgn = kf.signum();
    match kind {
        OperatorKind::KernK => Complex64::new(1.0 / (0.25 + kf * kf), 0.0),
        OperatorKind::KernJ => Complex64::new(1.0 / (1.0 + kf * kf / 4.0), 0.0),
        _ if k == 0 => Complex64::new(0.0, 0.0),
        OperatorKind::FracLap => Complex64::new(ak.powf(alpha), 0.0),
        OperatorKind::Hilbert => Complex64::new(0.0, -sgn),
        OperatorKind::Deriv => Complex64::new(0.0, kf),
        OperatorKind::MassLhs => Complex64::new(1.0 + 0.25 * ak.powf(2.0 * (alpha - 1.0)), 0.0),
    }
}

/// Pointwise multiplication in frequency. Odd operators drop the Nyquist mode.
pub fn apply_symbol(spec: &Spectrum, kind: OperatorKind, alpha: f64) -> Result<Spectrum> {
    check_alpha(alpha, false)?;
    let mut coeffs: Vec<Complex64> = spec
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * symbol_unchecked(kind, alpha, k as i64))
        .collect();
    if kind.is_odd() {
        let ny = spec.grid.nyquist();
        coeffs[ny] = Complex64::new(0.0, 0.0);
    }
    // evolved states are zero-mean; the kernels must not resurrect the mean
    coeffs[0] = Complex64::new(0.0, 0.0);
    Ok(Spectrum::from_coeffs_unchecked(&spec.grid, coeffs))
}

/// Spectrum of the pointwise product `a·b`. With `dealias`, both factors and
/// the result are truncated to `|k| ≤ N/3`. The mean of the product is kept.
pub fn product(a: &Spectrum, b: &Spectrum, dealias: bool) -> Spectrum {
    debug_assert_eq!(a.grid, b.grid);
    let grid = &a.grid;
    let cutoff = grid.dealias_cutoff();
    let (fa, fb) = if dealias {
        let mut ta = a.clone();
        ta.truncate(cutoff);
        let mut tb = b.clone();
        tb.truncate(cutoff);
        (backward_values(&ta), backward_values(&tb))
    } else {
        (backward_values(a), backward_values(b))
    };
    let prod: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = forward_unchecked(grid, &prod);
    if dealias {
        out.truncate(cutoff);
    }
    out
}

/// Spectrum of `p²`, see [`product`].
pub fn quadratic(spec: &Spectrum, dealias: bool) -> Spectrum {
    let grid = &spec.grid;
    let mut f = spec.clone();
    if dealias {
        f.truncate(grid.dealias_cutoff());
    }
    let vals = backward_values(&f);
    let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
    let mut out = forward_unchecked(grid, &sq);
    if dealias {
        out.truncate(grid.dealias_cutoff());
    }
    out
}

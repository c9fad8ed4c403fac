//! Norms and energy functionals controlled by the well-posedness estimates,
//! plus the spectral-tail resolution indicator.
//!
//! All norms are homogeneous: the `k = 0` mode is excluded, and every stored
//! wavenumber `0 < k < N/2` counts twice (for `±k`).

use serde::Serialize;

use crate::model::{ModelKind, ModelParams};
use crate::spectral::{apply_symbol, backward, backward_values, OperatorKind, RealField, Spectrum};

/// `(Σ_{k≠0} |k|^{2s} |p̂(k)|²)^{1/2}`.
pub fn sobolev_norm(spec: &Spectrum, s: f64) -> f64 {
    weighted_square_sum(spec, |k| k.powf(2.0 * s)).sqrt()
}

/// `Σ_{k≠0} |k|^s |p̂(k)|`.
pub fn wiener_norm(spec: &Spectrum, s: f64) -> f64 {
    let grid = spec.grid();
    (1..=grid.nyquist())
        .map(|k| grid.multiplicity(k) * (k as f64).powf(s) * spec.coeff(k).norm())
        .sum()
}

fn weighted_square_sum(spec: &Spectrum, weight: impl Fn(f64) -> f64) -> f64 {
    let grid = spec.grid();
    (1..=grid.nyquist())
        .map(|k| grid.multiplicity(k) * weight(k as f64) * spec.coeff(k).norm_sqr())
        .sum()
}

/// `(‖p‖_∞, ‖∂_x p‖_∞)` over the grid nodes, derivative taken spectrally.
pub fn sup_norms(field: &RealField) -> (f64, f64) {
    let spec = crate::spectral::forward_unchecked(field.grid(), field.values());
    (field.max_abs(), sup_norms_of(&spec).1)
}

/// [`sup_norms`] starting from coefficients.
pub fn sup_norms_of(spec: &Spectrum) -> (f64, f64) {
    let linf = backward_values(spec).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dx = apply_symbol(spec, OperatorKind::Deriv, 0.0).expect("alpha 0 is in range");
    let linf_dx = backward_values(&dx).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (linf, linf_dx)
}

/// The three energies tracked by the stability estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    /// `‖Δp‖² + ¼‖∂_x p‖²` at `α = 0`, `‖∂_x p‖² + ¼‖Δp‖²` at `α = 2`,
    /// otherwise equal to `g`.
    pub e: f64,
    /// `‖p‖² + ¼‖∂_x p‖²`.
    pub f: f64,
    /// `Σ (1 + |k|⁴)(1 + ¼|k|^{2(α-1)}) |p̂(k)|²`.
    pub g: f64,
}

pub fn energy_functionals(spec: &Spectrum, params: &ModelParams) -> Energies {
    let alpha = params.model.fixed_alpha().unwrap_or(params.alpha);
    let h0 = weighted_square_sum(spec, |_| 1.0);
    let h1 = weighted_square_sum(spec, |k| k * k);
    let h2 = weighted_square_sum(spec, |k| k.powi(4));
    let g = weighted_square_sum(spec, |k| {
        (1.0 + k.powi(4)) * (1.0 + 0.25 * k.powf(2.0 * (alpha - 1.0)))
    });
    let e = match params.model {
        ModelKind::Alpha0 => h2 + 0.25 * h1,
        ModelKind::Alpha2 => h1 + 0.25 * h2,
        ModelKind::General if alpha == 2.0 => h1 + 0.25 * h2,
        _ => g,
    };
    Energies {
        e,
        f: h0 + 0.25 * h1,
        g,
    }
}

/// Share of `Σ k²|p̂|²` carried by `k > N/6`, the upper half of the
/// dealiased band. Zero for the zero field.
pub fn tail_fraction(spec: &Spectrum) -> f64 {
    let grid = spec.grid();
    let split = grid.n_nodes() / 6;
    let mut total = 0.0;
    let mut tail = 0.0;
    for k in 1..=grid.nyquist() {
        let w = grid.multiplicity(k) * (k * k) as f64 * spec.coeff(k).norm_sqr();
        total += w;
        if k > split {
            tail += w;
        }
    }
    if total > 0.0 {
        (tail / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub const H_ORDERS: [f64; 4] = [0.0, 1.0, 2.0, 2.5];
pub const A_ORDERS: [f64; 3] = [0.0, 1.0, 2.0];

/// One sample of every monitored quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub linf_p: f64,
    pub linf_dxp: f64,
    /// `‖p‖_{H^s}` for `s` in [`H_ORDERS`].
    pub h_norms: [f64; 4],
    /// `‖p‖_{A^s}` for `s` in [`A_ORDERS`].
    pub a_norms: [f64; 3],
    pub energy_e: f64,
    pub energy_f: f64,
    pub energy_g: f64,
    pub tail_fraction: f64,
    pub dt: f64,
}

pub const CSV_HEADER: &str =
    "t,linf_p,linf_dxp,h0,h1,h2,a0,a1,energy_E,energy_F,energy_G,tail_fraction,dt";

impl DiagnosticsRecord {
    pub fn compute(time: f64, spec: &Spectrum, params: &ModelParams, dt: f64) -> Self {
        let (linf_p, linf_dxp) = sup_norms_of(spec);
        let energies = energy_functionals(spec, params);
        Self {
            time,
            linf_p,
            linf_dxp,
            h_norms: H_ORDERS.map(|s| sobolev_norm(spec, s)),
            a_norms: A_ORDERS.map(|s| wiener_norm(spec, s)),
            energy_e: energies.e,
            energy_f: energies.f,
            energy_g: energies.g,
            tail_fraction: tail_fraction(spec),
            dt,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.csv_values().iter().all(|v| v.is_finite())
    }

    fn csv_values(&self) -> [f64; 13] {
        [
            self.time,
            self.linf_p,
            self.linf_dxp,
            self.h_norms[0],
            self.h_norms[1],
            self.h_norms[2],
            self.a_norms[0],
            self.a_norms[1],
            self.energy_e,
            self.energy_f,
            self.energy_g,
            self.tail_fraction,
            self.dt,
        ]
    }

    /// One row matching [`CSV_HEADER`], 17 significant digits per value.
    pub fn csv_row(&self) -> String {
        self.csv_values()
            .iter()
            .map(|v| format_g17(*v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Round-trip exact scientific formatting.
pub fn format_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Nodal values of a spectrum, for snapshot output.
pub fn nodal(spec: &Spectrum) -> RealField {
    backward(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{forward, SpectralGrid};
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sin4() -> Spectrum {
        Spectrum::sine_mode(&SpectralGrid::new(64).unwrap(), 4, 1.0)
    }

    #[test]
    fn sobolev_of_single_mode() {
        assert_relative_eq!(sobolev_norm(&sin4(), 0.0), PI.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(sobolev_norm(&sin4(), 1.0), 4.0 * PI.sqrt(), epsilon = 1e-13);
        let z = Spectrum::zeros(&SpectralGrid::new(16).unwrap());
        assert_eq!(sobolev_norm(&z, 2.0), 0.0);
    }

    #[test]
    fn wiener_of_single_mode() {
        let h = (PI / 2.0).sqrt();
        assert_relative_eq!(wiener_norm(&sin4(), 0.0), 2.0 * h, epsilon = 1e-14);
        assert_relative_eq!(wiener_norm(&sin4(), 1.0), 8.0 * h, epsilon = 1e-14);
        let z = Spectrum::zeros(&SpectralGrid::new(16).unwrap());
        assert_eq!(wiener_norm(&z, 1.0), 0.0);
    }

    #[test]
    fn sup_norms_of_initial_profiles() {
        let g = SpectralGrid::new(256).unwrap();
        let f = RealField::from_fn(&g, |x| -2.0 * (4.0 * x).sin()).unwrap();
        let (a, b) = sup_norms(&f);
        assert_relative_eq!(a, 2.0, epsilon = 1e-12);
        assert_relative_eq!(b, 8.0, epsilon = 1e-12);
        let f = RealField::from_fn(&g, |x| -4.0 * (10.0 * x).sin()).unwrap();
        let (a, b) = sup_norms(&f);
        // nodes hit the extrema of sin(10x) only approximately
        assert!((a - 4.0).abs() < 1e-2 && a <= 4.0 + 1e-12);
        assert_relative_eq!(b, 40.0, epsilon = 1e-12);
        let z = RealField::new(&g, vec![0.0; 256]).unwrap();
        assert_eq!(sup_norms(&z), (0.0, 0.0));
    }

    #[test]
    fn energies_of_single_mode() {
        let a0 = ModelParams::new(ModelKind::Alpha0, 0.0, 2.0, 1.0);
        assert_relative_eq!(energy_functionals(&sin4(), &a0).e, 260.0 * PI, epsilon = 1e-10);
        let a2 = ModelParams::new(ModelKind::Alpha2, 2.0, 2.0, 1.0);
        let en = energy_functionals(&sin4(), &a2);
        assert_relative_eq!(en.f, 5.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(en.e, 16.0 * PI + 0.25 * 256.0 * PI, epsilon = 1e-10);
        // α = 2: (1 + 256)(1 + 4) π
        assert_relative_eq!(en.g, 257.0 * 5.0 * PI, epsilon = 1e-10);
        let z = Spectrum::zeros(&SpectralGrid::new(16).unwrap());
        let en = energy_functionals(&z, &a2);
        assert_eq!((en.e, en.f, en.g), (0.0, 0.0, 0.0));
    }

    #[test]
    fn tail_fraction_extremes() {
        let g = SpectralGrid::new(96).unwrap();
        assert_eq!(tail_fraction(&Spectrum::sine_mode(&g, 3, 1.0)), 0.0);
        assert_eq!(tail_fraction(&Spectrum::sine_mode(&g, g.dealias_cutoff(), 1.0)), 1.0);
        assert_eq!(tail_fraction(&Spectrum::zeros(&g)), 0.0);
    }

    #[test]
    fn csv_row_has_thirteen_columns() {
        let a1 = ModelParams::new(ModelKind::Alpha1, 1.0, 2.0, 1.0);
        let rec = DiagnosticsRecord::compute(0.5, &sin4(), &a1, 1e-3);
        assert_eq!(rec.csv_row().split(',').count(), CSV_HEADER.split(',').count());
        assert!(rec.is_finite());
        let back: f64 = rec.csv_row().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.5);
    }

    fn random_spectrum(n: usize, coeffs: &[(f64, f64)]) -> Spectrum {
        let g = SpectralGrid::new(n).unwrap();
        let mut s = Spectrum::zeros(&g);
        for (k, (re, im)) in coeffs.iter().enumerate().take(g.dealias_cutoff()) {
            s.coeffs_mut()[k + 1] = Complex64::new(*re, *im);
        }
        s
    }

    proptest! {
        #[test]
        fn sobolev_scales_for_single_modes(k in 1usize..20, a in -5.0f64..5.0, s in 0.0f64..3.0) {
            let g = SpectralGrid::new(64).unwrap();
            let spec = Spectrum::sine_mode(&g, k, a);
            let lhs = sobolev_norm(&spec, s);
            let rhs = (k as f64).powf(s) * sobolev_norm(&spec, 0.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn wiener_interpolation(coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20)) {
            let s = random_spectrum(64, &coeffs);
            let a1 = wiener_norm(&s, 1.0);
            prop_assert!(a1 * a1 <= wiener_norm(&s, 0.0) * wiener_norm(&s, 2.0) * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn parseval(coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20)) {
            let mut s = random_spectrum(64, &coeffs);
            s.coeffs_mut()[0] = Complex64::new(0.3, 0.0);
            let f = backward(&s);
            let spectral: f64 = (0..=32).map(|k| s.grid().multiplicity(k) * s.coeff(k).norm_sqr()).sum();
            let h = 2.0 * PI / 64.0;
            let physical: f64 = f.values().iter().map(|v| v * v).sum::<f64>() * h;
            prop_assert!((spectral - physical).abs() <= 1e-12 * physical);
            let back = forward(&f).unwrap();
            for k in 0..=32 {
                prop_assert!((back.coeff(k) - s.coeff(k)).norm() <= 1e-12 * s.max_abs());
            }
        }
    }
}

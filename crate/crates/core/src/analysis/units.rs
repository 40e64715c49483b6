use log::warn;
use serde::{Deserialize, Serialize};

use crate::constraints::symmetric_eigenvalues;
use crate::scalar::{det3, Mat3};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Ion and drive parameters in SI-adjacent units (see field names).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub mass_u: f64,
    #[serde(default = "one")]
    pub charge_e: f64,
    pub rf_amplitude_v: f64,
    /// Drive frequency Ω/2π.
    pub rf_frequency_hz: f64,
    /// Physical length of one dimensionless unit L0.
    pub length_unit_m: f64,
    #[serde(default = "default_mathieu_limit")]
    pub mathieu_limit: f64,
}

fn one() -> f64 {
    1.0
}

fn default_mathieu_limit() -> f64 {
    0.9
}

impl PhysicalParams {
    /// ⁹Be⁺ with the given drive and length unit.
    pub fn beryllium(rf_amplitude_v: f64, rf_frequency_hz: f64, length_unit_m: f64) -> Self {
        PhysicalParams {
            mass_u: 9.012_182,
            charge_e: 1.0,
            rf_amplitude_v,
            rf_frequency_hz,
            length_unit_m,
            mathieu_limit: default_mathieu_limit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalReport {
    pub height_m: f64,
    /// Geometric mean secular frequency ω̄/2π.
    pub mean_frequency_hz: f64,
    /// Secular frequencies ω_α/2π along the principal axes of Γ (ascending eigenvalue).
    pub axis_frequencies_hz: [f64; 3],
    pub energy_scale_ev: f64,
    pub mathieu_q: [f64; 3],
    pub warnings: Vec<String>,
}

/// Secular frequencies, pseudopotential energy scale and Mathieu parameters
/// for a trap of curvature `kappa` and shape `gamma` at height `height_m`.
pub fn physical_units(kappa: f64, gamma: &Mat3<f64>, height_m: f64, p: &PhysicalParams) -> PhysicalReport {
    let q = p.charge_e * ELEMENTARY_CHARGE;
    let m = p.mass_u * ATOMIC_MASS;
    let omega_rf = std::f64::consts::TAU * p.rf_frequency_hz;
    let u = p.rf_amplitude_v;
    let z2 = height_m * height_m;
    let omega_bar = q * u * kappa / (std::f64::consts::SQRT_2 * m * omega_rf * z2);
    let energy = q * q * u * u / (4.0 * m * omega_rf * omega_rf * z2);
    let det = det3(gamma).abs().cbrt();
    let mu = symmetric_eigenvalues(gamma);
    let mut warnings = Vec::new();
    let omega_axes = if det > 0.0 {
        mu.map(|v| omega_bar * v.abs() / det)
    } else {
        warnings.push("curvature tensor is singular; per-axis frequencies undefined".to_string());
        [0.0; 3]
    };
    let mathieu_q = omega_axes.map(|w| 2.0 * std::f64::consts::SQRT_2 * w / omega_rf);
    for (axis, &qa) in mathieu_q.iter().enumerate() {
        if qa > p.mathieu_limit {
            warnings.push(format!("Mathieu q = {qa:.3} along axis {axis} exceeds {}", p.mathieu_limit));
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    PhysicalReport {
        height_m,
        mean_frequency_hz: omega_bar / std::f64::consts::TAU,
        axis_frequencies_hz: omega_axes.map(|w| w / std::f64::consts::TAU),
        energy_scale_ev: energy / ELEMENTARY_CHARGE,
        mathieu_q,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::cylindrical_quadrupole;

    #[test]
    fn beryllium_reference_scales() {
        let p = PhysicalParams::beryllium(50.0, 200e6, 30e-6);
        let r = physical_units(1.0, &cylindrical_quadrupole(), 30e-6, &p);
        assert!((r.mean_frequency_hz / 53.26e6 - 1.0).abs() < 1e-3, "{}", r.mean_frequency_hz);
        assert!((r.energy_scale_ev / 4.708 - 1.0).abs() < 1e-3, "{}", r.energy_scale_ev);
        let g = (r.axis_frequencies_hz.iter().product::<f64>()).cbrt();
        assert!((g / r.mean_frequency_hz - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_curvature_keeps_energy_scale() {
        let p = PhysicalParams::beryllium(50.0, 200e6, 30e-6);
        let r = physical_units(0.0, &cylindrical_quadrupole(), 30e-6, &p);
        assert_eq!(r.mean_frequency_hz, 0.0);
        assert!((r.energy_scale_ev / 4.708 - 1.0).abs() < 1e-3);
    }
}

//! Phase-change regularization and per-cell physical coefficients.
//!
//! The sharp liquid indicator is replaced by a linear ramp over the mushy band
//! `[T* - delta, T* + delta]`; latent heat is released at the constant rate
//! `rho_l / (2 delta)` inside the band. Pressure mobility uses a fictitious
//! domain continuation: frozen cells keep `epsilon` times their liquid value.

use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// Properties of one soil layer. `k_*` in W/(m K), `c_rho_*` in J/(m^3 K),
/// `rho_l` in J/m^3, `mobility` (water density times permeability over
/// viscosity) in kg s/m^3. Suffix `plus` is the thawed phase, `minus` frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerProperties {
    pub k_plus: f64,
    pub k_minus: f64,
    pub c_rho_plus: f64,
    pub c_rho_minus: f64,
    pub rho_l: f64,
    pub mobility: f64,
}

impl LayerProperties {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k_plus", self.k_plus),
            ("k_minus", self.k_minus),
            ("c_rho_plus", self.c_rho_plus),
            ("c_rho_minus", self.c_rho_minus),
            ("mobility", self.mobility),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("layer property {name} must be positive, got {v}")));
            }
        }
        if !(self.rho_l >= 0.0 && self.rho_l.is_finite()) {
            return Err(Error::Config(format!("latent heat must be non-negative, got {}", self.rho_l)));
        }
        Ok(())
    }
}

/// The three soils of the reference ground-freezing setup.
pub fn default_layers() -> Vec<LayerProperties> {
    vec![
        LayerProperties {
            k_plus: 1.37,
            k_minus: 1.72,
            c_rho_plus: 2.397e6,
            c_rho_minus: 1.886e6,
            rho_l: 75.33e6,
            mobility: 1.0e-13,
        },
        LayerProperties {
            k_plus: 2.67,
            k_minus: 3.37,
            c_rho_plus: 2.13e6,
            c_rho_minus: 2.09e6,
            rho_l: 64.769e6,
            mobility: 10.0e-13,
        },
        LayerProperties {
            k_plus: 1.4,
            k_minus: 1.56,
            c_rho_plus: 2.96e6,
            c_rho_minus: 2.70e6,
            rho_l: 130.544e6,
            mobility: 5.0e-13,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    /// Phase-change temperature, degrees C.
    pub t_star: f64,
    /// Half-width of the mushy band, K.
    pub delta: f64,
    /// Fictitious-domain continuation factor for frozen mobility.
    pub epsilon: f64,
}

impl Default for PhaseParams {
    fn default() -> Self {
        PhaseParams {
            t_star: 0.0,
            delta: 0.5,
            epsilon: 1e-3,
        }
    }
}

impl PhaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if !self.t_star.is_finite() {
            return Err(Error::Config("t_star must be finite".into()));
        }
        Ok(())
    }

    pub fn is_frozen(&self, t: f64) -> bool {
        t <= self.t_star
    }
}

/// Regularized liquid fraction.
pub fn phi_delta(t: f64, p: &PhaseParams) -> f64 {
    let lo = p.t_star - p.delta;
    let hi = p.t_star + p.delta;
    if t <= lo {
        0.0
    } else if t >= hi {
        1.0
    } else {
        (t - lo) / (2.0 * p.delta)
    }
}

/// Derivative of [`phi_delta`]; zero at the two kinks.
pub fn dphi_dt(t: f64, p: &PhaseParams) -> f64 {
    if t > p.t_star - p.delta && t < p.t_star + p.delta {
        1.0 / (2.0 * p.delta)
    } else {
        0.0
    }
}

/// Effective volumetric heat capacity including the latent-heat term.
pub fn capacity(t: f64, layer: &LayerProperties, p: &PhaseParams) -> f64 {
    let phi = phi_delta(t, p);
    layer.c_rho_minus + phi * (layer.c_rho_plus - layer.c_rho_minus) + layer.rho_l * dphi_dt(t, p)
}

pub fn conductivity(t: f64, layer: &LayerProperties, p: &PhaseParams) -> f64 {
    let phi = phi_delta(t, p);
    layer.k_minus + phi * (layer.k_plus - layer.k_minus)
}

pub fn mobility_eps(t: f64, layer: &LayerProperties, p: &PhaseParams) -> f64 {
    if p.is_frozen(t) {
        layer.mobility * p.epsilon
    } else {
        layer.mobility
    }
}

/// Layer ids per fine cell together with the layer property table.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub cell_layer: Vec<usize>,
    pub layers: Vec<LayerProperties>,
    pub phase: PhaseParams,
}

/// Coefficients of one time layer evaluated at each cell centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCoefficients {
    pub capacity: Vec<f64>,
    pub conductivity: Vec<f64>,
    pub mobility: Vec<f64>,
}

impl MaterialField {
    pub fn layer(&self, cell: usize) -> &LayerProperties {
        &self.layers[self.cell_layer[cell]]
    }

    /// Evaluate every coefficient at the centroid temperature of each cell.
    pub fn evaluate(&self, mesh: &Mesh, temperature: &[f64]) -> CellCoefficients {
        let tc = mesh.cell_average(temperature);
        let n = tc.len();
        let mut out = CellCoefficients {
            capacity: Vec::with_capacity(n),
            conductivity: Vec::with_capacity(n),
            mobility: Vec::with_capacity(n),
        };
        for (cell, &t) in tc.iter().enumerate() {
            let layer = self.layer(cell);
            out.capacity.push(capacity(t, layer, &self.phase));
            out.conductivity.push(conductivity(t, layer, &self.phase));
            out.mobility.push(mobility_eps(t, layer, &self.phase));
        }
        out
    }

    /// Thawed conductivity per cell (offline temperature coefficient).
    pub fn liquid_conductivity(&self) -> Vec<f64> {
        self.cell_layer.iter().map(|&l| self.layers[l].k_plus).collect()
    }

    /// Unfrozen mobility per cell (offline pressure coefficient).
    pub fn liquid_mobility(&self) -> Vec<f64> {
        self.cell_layer.iter().map(|&l| self.layers[l].mobility).collect()
    }

    /// Per-cell frozen flag from the centroid temperature.
    pub fn frozen_mask(&self, mesh: &Mesh, temperature: &[f64]) -> Vec<bool> {
        mesh.cell_average(temperature)
            .into_iter()
            .map(|t| self.phase.is_frozen(t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layer1() -> LayerProperties {
        default_layers()[0]
    }

    #[test]
    fn phi_examples() {
        let p = PhaseParams::default();
        assert_eq!(phi_delta(-0.5, &p), 0.0);
        assert_eq!(phi_delta(0.0, &p), 0.5);
        assert_eq!(phi_delta(0.25, &p), 0.75);
        assert_eq!(phi_delta(0.5, &p), 1.0);
    }

    #[test]
    fn dphi_examples() {
        let p = PhaseParams::default();
        assert_eq!(dphi_dt(0.0, &p), 1.0);
        assert_eq!(dphi_dt(-1.0, &p), 0.0);
        assert_eq!(dphi_dt(-0.5, &p), 0.0);
        assert_eq!(dphi_dt(0.5, &p), 0.0);
        let p = PhaseParams { delta: 0.25, ..p };
        assert_eq!(dphi_dt(0.1, &p), 2.0);
    }

    #[test]
    fn capacity_examples() {
        let p = PhaseParams::default();
        assert_eq!(capacity(-10.0, &layer1(), &p), 1.886e6);
        assert_eq!(capacity(10.0, &layer1(), &p), 2.397e6);
        let mid = capacity(0.0, &layer1(), &p);
        let expect = (1.886e6 + 2.397e6) / 2.0 + 75.33e6;
        assert!((mid - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn conductivity_examples() {
        let p = PhaseParams::default();
        assert_eq!(conductivity(-10.0, &layer1(), &p), 1.72);
        assert_eq!(conductivity(10.0, &layer1(), &p), 1.37);
        let k = conductivity(0.0, &default_layers()[1], &p);
        assert!((k - 3.02).abs() < 1e-12);
    }

    #[test]
    fn mobility_examples() {
        let p = PhaseParams::default();
        assert_eq!(mobility_eps(10.0, &layer1(), &p), 1.0e-13);
        assert!((mobility_eps(-10.0, &layer1(), &p) - 1.0e-16).abs() < 1e-30);
        // ties go frozen
        assert!((mobility_eps(0.0, &layer1(), &p) - 1.0e-16).abs() < 1e-30);
        let p = PhaseParams { epsilon: 1.0, ..p };
        assert_eq!(mobility_eps(-10.0, &layer1(), &p), mobility_eps(10.0, &layer1(), &p));
    }

    #[test]
    fn validation() {
        assert!(PhaseParams { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(PhaseParams { epsilon: 1.5, ..Default::default() }.validate().is_err());
        assert!(PhaseParams { delta: 0.0, ..Default::default() }.validate().is_err());
        assert!(LayerProperties { k_plus: -1.0, ..layer1() }.validate().is_err());
        assert!(default_layers().iter().all(|l| l.validate().is_ok()));
    }

    proptest! {
        #[test]
        fn phi_monotone_and_bounded(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let p = PhaseParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(phi_delta(lo, &p) <= phi_delta(hi, &p));
            prop_assert!((0.0..=1.0).contains(&phi_delta(a, &p)));
        }

        #[test]
        fn dphi_matches_finite_difference(t in -3.0f64..3.0) {
            let p = PhaseParams::default();
            let h = 1e-6;
            prop_assume!(((t - p.t_star).abs() - p.delta).abs() > 10.0 * h);
            let fd = (phi_delta(t + h, &p) - phi_delta(t - h, &p)) / (2.0 * h);
            prop_assert!((fd - dphi_dt(t, &p)).abs() < 1e-8);
        }

        #[test]
        fn coefficient_bounds(t in -40.0f64..40.0, l in 0usize..3) {
            let p = PhaseParams::default();
            let layer = default_layers()[l];
            let c = capacity(t, &layer, &p);
            prop_assert!(c >= layer.c_rho_minus.min(layer.c_rho_plus));
            if (t - p.t_star).abs() >= p.delta {
                let pure = if t > p.t_star { layer.c_rho_plus } else { layer.c_rho_minus };
                let k = if t > p.t_star { layer.k_plus } else { layer.k_minus };
                prop_assert_eq!(c, pure);
                prop_assert_eq!(conductivity(t, &layer, &p), k);
            }
        }
    }
}

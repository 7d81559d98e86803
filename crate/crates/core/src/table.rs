//! Published particle parameters used as reference configurations.

use crate::{MagnetSpec, ParamError, Uncertain};

/// Density of the sintered NdFeB spheres, kg/m³.
pub const REFERENCE_DENSITY: f64 = 7430.0;

/// One measured particle configuration with its quoted one-sigma errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub index: usize,
    /// m
    pub radius: Uncertain,
    /// A/m
    pub magnetization: Uncertain,
    /// Hz
    pub f_i: Uncertain,
    pub g: Uncertain,
}

fn u(value: f64, sigma: f64) -> Uncertain {
    Uncertain::new(value, sigma).expect("table constants are valid")
}

/// The four reference rows, in order.
pub fn published_table() -> [TableRow; 4] {
    [
        TableRow { index: 1, radius: u(31.2e-6, 0.4e-6), magnetization: u(591e3, 18e3), f_i: u(0.33, 0.04), g: u(1.11, 0.14) },
        TableRow { index: 2, radius: u(23.6e-6, 0.2e-6), magnetization: u(675e3, 20e3), f_i: u(0.62, 0.02), g: u(1.19, 0.04) },
        TableRow { index: 3, radius: u(19.0e-6, 0.2e-6), magnetization: u(574e3, 17e3), f_i: u(0.88, 0.05), g: u(1.10, 0.07) },
        TableRow { index: 4, radius: u(18.8e-6, 0.2e-6), magnetization: u(581e3, 16e3), f_i: u(0.86, 0.03), g: u(1.16, 0.04) },
    ]
}

impl TableRow {
    /// Nominal magnet with the reference density.
    pub fn magnet(&self) -> Result<MagnetSpec, ParamError> {
        MagnetSpec::new(self.radius.value(), self.magnetization.value(), REFERENCE_DENSITY)
    }

    /// Einstein–de Haas frequency of `self` predicted from `reference` by
    /// `f_I ∝ M/(g R²)`, using central values.
    pub fn scaled_f_i_from(&self, reference: &TableRow) -> f64 {
        reference.f_i.value()
            * (self.magnetization.value() / reference.magnetization.value())
            * (reference.g.value() / self.g.value())
            * (reference.radius.value() / self.radius.value()).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::g_factor_from_magnet;
    use crate::dynamics::thermal_gamma_dot_rms;
    use crate::hz_to_angular;

    #[test]
    fn g_column_is_reproduced() {
        for row in published_table() {
            let g = g_factor_from_magnet(
                Uncertain::exact(row.radius.value()),
                Uncertain::exact(row.magnetization.value()),
                Uncertain::exact(REFERENCE_DENSITY),
                Uncertain::exact(hz_to_angular(row.f_i.value())),
            )
            .unwrap();
            assert!((g.value() - row.g.value()).abs() < 0.02, "row {}: {}", row.index, g.value());
        }
    }

    #[test]
    fn scaling_predicts_other_rows() {
        let t = published_table();
        for row in [t[0], t[2], t[3]] {
            let f = row.scaled_f_i_from(&t[1]);
            assert!((f - row.f_i.value()).abs() <= row.f_i.sigma(), "row {}: {f}", row.index);
        }
        assert!((t[2].scaled_f_i_from(&t[1]) - 0.88).abs() < 0.005);
    }

    #[test]
    fn thermal_spin_is_small_for_all_rows() {
        for row in published_table() {
            let i = row.magnet().unwrap().inertia();
            assert!(thermal_gamma_dot_rms(4.18, i) / hz_to_angular(row.f_i.value()) < 0.01);
        }
    }
}

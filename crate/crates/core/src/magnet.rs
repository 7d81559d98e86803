use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} must be finite and strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

/// One ion species of a magnetic compound.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub label: String,
    /// Landé factor of the ion.
    pub g: f64,
    /// Total intrinsic angular momentum, in units of ħ.
    pub spin: f64,
    /// Number of ions per formula unit.
    pub count: f64,
}

/// Ion content of a formula unit; non-empty, all entries positive.
#[derive(Debug, Clone, PartialEq)]
pub struct IonComposition {
    species: Vec<IonSpecies>,
}

impl IonComposition {
    pub fn new(species: Vec<IonSpecies>) -> Result<Self, ParamError> {
        if species.is_empty() {
            return Err(ParamError::Invalid("ion composition is empty".into()));
        }
        for s in &species {
            require_positive("ion g", s.g)?;
            require_positive("ion spin", s.spin)?;
            require_positive("ion count", s.count)?;
        }
        Ok(Self { species })
    }

    fn ion(label: &str, g: f64, spin: f64, count: f64) -> IonSpecies {
        IonSpecies {
            label: label.to_string(),
            g,
            spin,
            count,
        }
    }

    /// Nd₂Fe₁₄B with Nd³⁺ (g = 8/11, J = 9/2) and Fe (g = 2, S = 1/2).
    pub fn nd2fe14b() -> Self {
        Self {
            species: vec![
                Self::ion("Nd3+", 8.0 / 11.0, 4.5, 2.0),
                Self::ion("Fe", 2.0, 0.5, 14.0),
            ],
        }
    }

    /// Pr₂Fe₁₄B with Pr³⁺ (g = 4/5, J = 4) on the rare-earth site.
    pub fn pr2fe14b() -> Self {
        Self {
            species: vec![
                Self::ion("Pr3+", 0.8, 4.0, 2.0),
                Self::ion("Fe", 2.0, 0.5, 14.0),
            ],
        }
    }

    pub fn species(&self) -> &[IonSpecies] {
        &self.species
    }

    /// Angular-momentum-weighted mean g: Σ nᵢgᵢSᵢ / Σ nᵢSᵢ.
    pub fn effective_g(&self) -> f64 {
        let (num, den) = self.species.iter().fold((0.0, 0.0), |(n, d), s| {
            (n + s.count * s.g * s.spin, d + s.count * s.spin)
        });
        num / den
    }
}

impl Default for IonComposition {
    fn default() -> Self {
        Self::nd2fe14b()
    }
}

/// A uniformly magnetized sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetSpec {
    radius: f64,
    magnetization: f64,
    density: f64,
    composition: IonComposition,
}

/// Quantities that follow from radius, magnetization and density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedProperties {
    /// m³
    pub volume: f64,
    /// kg
    pub mass: f64,
    /// A·m²
    pub moment: f64,
    /// kg·m²
    pub inertia: f64,
}

impl MagnetSpec {
    /// `radius` in m, `magnetization` in A/m, `density` in kg/m³.
    pub fn new(radius: f64, magnetization: f64, density: f64) -> Result<Self, ParamError> {
        Self::with_composition(radius, magnetization, density, IonComposition::default())
    }

    pub fn with_composition(
        radius: f64,
        magnetization: f64,
        density: f64,
        composition: IonComposition,
    ) -> Result<Self, ParamError> {
        Ok(Self {
            radius: require_positive("radius", radius)?,
            magnetization: require_positive("magnetization", magnetization)?,
            density: require_positive("density", density)?,
            composition,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn magnetization(&self) -> f64 {
        self.magnetization
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn composition(&self) -> &IonComposition {
        &self.composition
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    pub fn mass(&self) -> f64 {
        self.density * self.volume()
    }

    pub fn moment(&self) -> f64 {
        self.magnetization * self.volume()
    }

    /// Moment of inertia of a homogeneous sphere, 2/5·m·R².
    pub fn inertia(&self) -> f64 {
        0.4 * self.mass() * self.radius * self.radius
    }

    pub fn derived_properties(&self) -> DerivedProperties {
        DerivedProperties {
            volume: self.volume(),
            mass: self.mass(),
            moment: self.moment(),
            inertia: self.inertia(),
        }
    }
}

/// Spherical-bottom superconducting cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpec {
    cavity_radius: f64,
    gravity: f64,
}

impl TrapSpec {
    pub fn new(cavity_radius: f64, gravity: f64) -> Result<Self, ParamError> {
        Ok(Self {
            cavity_radius: require_positive("cavity radius", cavity_radius)?,
            gravity: require_positive("gravity", gravity)?,
        })
    }

    /// 2.5 mm cavity under standard gravity.
    pub fn standard() -> Self {
        Self {
            cavity_radius: 2.5e-3,
            gravity: crate::PhysicalConstants::G0_DEFAULT,
        }
    }

    pub fn cavity_radius(&self) -> f64 {
        self.cavity_radius
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }
}

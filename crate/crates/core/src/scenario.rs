//! Scenario files: flat `key = value` pairs with `[areas]`, `[luminosity]`
//! and optional `[params]` sections (a TOML subset).
//!
//! ```text
//! name = "fig7"
//! mode = "spatial"            # or "non-spatial"
//! steps = 100
//! dt = 1.0                    # optional, default 1
//! cell_size_m = 100.0
//! seed = 1
//! neighborhood = 8            # optional, 8 or 4
//! snapshot_every = 10         # optional
//! grid_shape = [25, 40]       # optional, [nrows, ncols]
//!
//! [areas]
//! black_ha = 100.0
//! white_ha = 100.0
//! fertile_ha = 500.0
//! barren_ha = 300.0
//!
//! [luminosity]
//! kind = "step"               # constant | step | ramp
//! l0 = 1.0
//! l1 = 0.9
//! t_change = 50.0             # ramp: t_start, t_end
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::daisyworld::{Areas, DaisyParams, LuminositySchedule};
use crate::landscape::Neighborhood;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot render scenario: {0}")]
    Render(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "spatial")]
    Spatial,
    #[serde(rename = "non-spatial", alias = "nonspatial")]
    NonSpatial,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spatial" => Ok(Self::Spatial),
            "non-spatial" | "nonspatial" => Ok(Self::NonSpatial),
            other => Err(format!(
                "unknown mode `{other}`, expected spatial or nonspatial"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub steps: u32,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub cell_size_m: f64,
    #[serde(with = "seed_repr")]
    pub seed: u64,
    #[serde(default)]
    pub neighborhood: Neighborhood,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u32>,
    /// `[nrows, ncols]`; defaults to the most square factorization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_shape: Option<[usize; 2]>,
    pub areas: Areas,
    pub luminosity: LuminositySchedule,
    #[serde(default)]
    pub params: DaisyParams,
}

fn default_dt() -> f64 {
    1.0
}

/// TOML integers are signed, so seeds above `i64::MAX` travel as strings.
mod seed_repr {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        use serde::de::Error;
        match Repr::deserialize(d)? {
            Repr::Int(v) => {
                u64::try_from(v).map_err(|_| D::Error::custom("seed must be non-negative"))
            }
            Repr::Text(s) => s.parse().map_err(D::Error::custom),
        }
    }
}

impl Scenario {
    /// Black and white daisies 100 ha each, 500 ha fertile, 300 ha barren,
    /// luminosity stepping from 1 to 0.9 at t = 50, 100 steps at 100 m.
    pub fn example() -> Self {
        Self {
            name: "fig7".into(),
            mode: Mode::Spatial,
            steps: 100,
            dt: 1.0,
            cell_size_m: 100.0,
            seed: 1,
            neighborhood: Neighborhood::Moore,
            snapshot_every: None,
            grid_shape: None,
            areas: Areas {
                black_ha: 100.0,
                white_ha: 100.0,
                fertile_ha: 500.0,
                barren_ha: 300.0,
            },
            luminosity: LuminositySchedule::Step {
                l0: 1.0,
                l1: 0.9,
                t_change: 50.0,
            },
            params: DaisyParams::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Self = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Canonical text form; [`Scenario::parse`] reads it back unchanged.
    pub fn render(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |key, reason: String| Err(ScenarioError::Invalid { key, reason });
        if self.steps == 0 {
            return invalid("steps", "must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.cell_size_m > 0.0 && self.cell_size_m.is_finite()) {
            return invalid(
                "cell_size_m",
                format!("must be positive, got {}", self.cell_size_m),
            );
        }
        if self.snapshot_every == Some(0) {
            return invalid("snapshot_every", "must be at least 1".into());
        }
        if let Some([r, c]) = self.grid_shape {
            if r == 0 || c == 0 {
                return invalid(
                    "grid_shape",
                    format!("dimensions must be positive, got [{r}, {c}]"),
                );
            }
        }
        let a = &self.areas;
        for (key, v) in [
            ("areas.black_ha", a.black_ha),
            ("areas.white_ha", a.white_ha),
            ("areas.fertile_ha", a.fertile_ha),
            ("areas.barren_ha", a.barren_ha),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(key, format!("must be a non-negative area, got {v}"));
            }
        }
        if a.total() <= 0.0 {
            return invalid("areas", "total area must be positive".into());
        }
        if let Err(reason) = self.luminosity.validate() {
            return invalid("luminosity", reason);
        }
        if let Err(reason) = self.params.validate() {
            return invalid("params", reason);
        }
        Ok(())
    }
}

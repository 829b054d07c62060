//! Daisyworld: radiative balance, local temperatures, daisy growth, and the
//! stock-and-flow wiring of the spatial and non-spatial model variants.

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, Expr, StockFlowModel, VariableDef};
use crate::scenario::{Mode, Scenario};

/// Offset between Kelvin and the Celsius scale used throughout the model.
pub const KELVIN_OFFSET: f64 = 273.0;

/// Variable names of the Daisyworld stock-and-flow model.
pub mod var {
    pub const PLANETARY_TEMPERATURE: &str = "planetary_temperature";
    pub const LUMINOSITY: &str = "luminosity";
    pub const BARREN_ALBEDO: &str = "barren_albedo";
    pub const ABSORBED_LUMINOSITY: &str = "absorbed_luminosity";
    pub const AREA_BARREN: &str = "area_barren";
    pub const WHITE_ALBEDO: &str = "white_albedo";
    pub const AVERAGE_ALBEDO: &str = "average_albedo";
    pub const BLACK_ALBEDO: &str = "black_albedo";
    pub const FERTILE_ALBEDO: &str = "fertile_albedo";
    pub const WHITE_ADJUSTMENT: &str = "white_temperature_adjustment";
    pub const AREA_WHITE: &str = "area_white";
    pub const WHITE_DECAY: &str = "white_decay";
    pub const AREA_FERTILE: &str = "area_fertile";
    pub const BLACK_DECAY: &str = "black_decay";
    pub const AREA_BLACK: &str = "area_black";
    pub const BLACK_ADJUSTMENT: &str = "black_temperature_adjustment";
    pub const WHITE_TEMPERATURE: &str = "white_local_temperature";
    pub const WHITE_GROWTH: &str = "white_growth";
    pub const DECAY_RATE: &str = "decay_rate";
    pub const BLACK_GROWTH: &str = "black_growth";
    pub const BLACK_TEMPERATURE: &str = "black_local_temperature";
    pub const WHITE_GROWTH_RATE: &str = "white_growth_rate";
    pub const D_WHITE: &str = "D_white";
    pub const D_BLACK: &str = "D_black";
    pub const BLACK_GROWTH_RATE: &str = "black_growth_rate";
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaisyParams {
    pub albedo_fertile: f64,
    pub albedo_black: f64,
    pub albedo_white: f64,
    pub albedo_barren: f64,
    /// Solar flux, W m^-2.
    pub solar_flux: f64,
    pub stefan_boltzmann: f64,
    /// Local temperature gain per unit albedo difference, °C.
    pub q_prime: f64,
    /// Fraction of daisy area dying per time unit.
    pub decay_rate: f64,
    /// Temperature of maximal growth, °C.
    pub growth_optimum: f64,
    pub growth_coeff: f64,
    /// Non-spatial daisy stocks below this share of the planet are set to 0.
    pub extinction_fraction: f64,
}

impl Default for DaisyParams {
    fn default() -> Self {
        Self {
            albedo_fertile: 0.5,
            albedo_black: 0.25,
            albedo_white: 0.75,
            albedo_barren: 0.5,
            solar_flux: 917.0,
            stefan_boltzmann: 5.67032e-8,
            q_prime: 20.0,
            decay_rate: 0.3,
            growth_optimum: 22.5,
            growth_coeff: 0.003265,
            extinction_fraction: 1e-4,
        }
    }
}

impl DaisyParams {
    pub fn validate(&self) -> Result<(), String> {
        let albedos = [
            ("albedo_fertile", self.albedo_fertile),
            ("albedo_black", self.albedo_black),
            ("albedo_white", self.albedo_white),
            ("albedo_barren", self.albedo_barren),
        ];
        for (key, a) in albedos {
            if !(0.0..=1.0).contains(&a) {
                return Err(format!("{key} must lie in [0, 1], got {a}"));
            }
        }
        for (key, v) in [
            ("solar_flux", self.solar_flux),
            ("stefan_boltzmann", self.stefan_boltzmann),
            ("q_prime", self.q_prime),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{key} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.decay_rate) {
            return Err(format!(
                "decay_rate must lie in [0, 1], got {}",
                self.decay_rate
            ));
        }
        if !self.growth_optimum.is_finite()
            || !(self.growth_coeff >= 0.0 && self.growth_coeff.is_finite())
        {
            return Err("growth_optimum and growth_coeff must be finite, growth_coeff >= 0".into());
        }
        if !(0.0..1.0).contains(&self.extinction_fraction) {
            return Err(format!(
                "extinction_fraction must lie in [0, 1), got {}",
                self.extinction_fraction
            ));
        }
        Ok(())
    }
}

/// Solar luminosity as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LuminositySchedule {
    Constant {
        l0: f64,
    },
    /// `l0` before `t_change`, `l1` from `t_change` on.
    Step {
        l0: f64,
        l1: f64,
        t_change: f64,
    },
    /// `l0` until `t_start`, linear to `l1` at `t_end`, `l1` afterwards.
    Ramp {
        l0: f64,
        l1: f64,
        t_start: f64,
        t_end: f64,
    },
}

impl LuminositySchedule {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { l0 } => l0,
            Self::Step { l0, l1, t_change } => {
                if t < t_change {
                    l0
                } else {
                    l1
                }
            }
            Self::Ramp {
                l0,
                l1,
                t_start,
                t_end,
            } => {
                if t <= t_start {
                    l0
                } else if t >= t_end {
                    l1
                } else {
                    l0 + (l1 - l0) * (t - t_start) / (t_end - t_start)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let levels: &[f64] = match self {
            Self::Constant { l0 } => &[*l0],
            Self::Step { l0, l1, t_change } => {
                if !t_change.is_finite() {
                    return Err("t_change must be finite".into());
                }
                &[*l0, *l1]
            }
            Self::Ramp {
                l0,
                l1,
                t_start,
                t_end,
            } => {
                if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
                    return Err(format!("t_end ({t_end}) must be after t_start ({t_start})"));
                }
                &[*l0, *l1]
            }
        };
        match levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            Some(l) => Err(format!("luminosity must be non-negative, got {l}")),
            None => Ok(()),
        }
    }
}

/// Land-cover shares of the whole planet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaState {
    pub black: f64,
    pub white: f64,
    pub barren: f64,
}

impl AreaState {
    pub fn new(black: f64, white: f64, barren: f64) -> Self {
        Self {
            black,
            white,
            barren,
        }
    }

    /// Fertile soil is whatever the other three leave.
    pub fn fertile(&self) -> f64 {
        1.0 - self.black - self.white - self.barren
    }
}

/// Area-weighted mean albedo over the four cover types.
pub fn planetary_albedo(areas: &AreaState, p: &DaisyParams) -> f64 {
    areas.fertile() * p.albedo_fertile
        + areas.black * p.albedo_black
        + areas.white * p.albedo_white
        + areas.barren * p.albedo_barren
}

/// Mean albedo from absolute areas in any unit.
pub fn mean_albedo(black: f64, white: f64, fertile: f64, barren: f64, p: &DaisyParams) -> f64 {
    let weighted = fertile * p.albedo_fertile
        + black * p.albedo_black
        + white * p.albedo_white
        + barren * p.albedo_barren;
    weighted / (black + white + fertile + barren)
}

/// Radiative equilibrium temperature (°C) for a given `L * (1 - A)`.
pub fn emission_temperature(absorbed_luminosity: f64, p: &DaisyParams) -> f64 {
    (p.solar_flux * absorbed_luminosity / p.stefan_boltzmann).powf(0.25) - KELVIN_OFFSET
}

pub fn planetary_temperature(luminosity: f64, albedo: f64, p: &DaisyParams) -> f64 {
    emission_temperature(luminosity * (1.0 - albedo), p)
}

/// Temperature next to a patch of albedo `patch_albedo`, °C.
pub fn local_temperature(
    albedo: f64,
    patch_albedo: f64,
    planetary_temp: f64,
    p: &DaisyParams,
) -> f64 {
    p.q_prime * (albedo - patch_albedo) + planetary_temp
}

/// Parabolic growth response; 1 at the optimum, negative far from it.
pub fn growth_rate(local_temp: f64, p: &DaisyParams) -> f64 {
    let d = p.growth_optimum - local_temp;
    1.0 - p.growth_coeff * d * d
}

/// Area growth per time unit; a negative `availability * beta` never grows
/// or kills area, death is the decay flow alone.
pub fn growth_flow(area: f64, availability: f64, beta: f64) -> f64 {
    area * (availability * beta).max(0.0)
}

/// Share of the planet that is fertile soil; the non-spatial growth factor.
pub fn fertile_fraction(area_fertile: f64, total_area: f64) -> f64 {
    area_fertile / total_area
}

/// Initial areas in hectares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Areas {
    pub black_ha: f64,
    pub white_ha: f64,
    pub fertile_ha: f64,
    pub barren_ha: f64,
}

impl Areas {
    pub fn total(&self) -> f64 {
        self.black_ha + self.white_ha + self.fertile_ha + self.barren_ha
    }
}

/// Builds the non-spatial model: both daisies share the growth factor
/// `x = fertile / total`.
pub fn build_nonspatial_model(scenario: &Scenario) -> Result<StockFlowModel, EngineError> {
    debug_assert_eq!(scenario.mode, Mode::NonSpatial);
    let total = scenario.areas.total();
    let availability = |id| {
        VariableDef::auxiliary(
            id,
            Expr::new(&[var::AREA_FERTILE], move |v, _| {
                fertile_fraction(v[0], total)
            }),
        )
    };
    build_model(
        scenario,
        availability(var::D_WHITE),
        availability(var::D_BLACK),
    )
}

/// Builds the spatial model: the growth factors `D_black` and `D_white` are
/// exogenous and must be injected before every step.
pub fn build_spatial_model(scenario: &Scenario) -> Result<StockFlowModel, EngineError> {
    build_model(
        scenario,
        VariableDef::exogenous(var::D_WHITE),
        VariableDef::exogenous(var::D_BLACK),
    )
}

fn build_model(
    scenario: &Scenario,
    d_white: VariableDef,
    d_black: VariableDef,
) -> Result<StockFlowModel, EngineError> {
    use var::*;
    let p = scenario.params;
    let a = scenario.areas;
    let schedule = scenario.luminosity;

    let adjustment = move |patch_albedo| {
        Expr::new(&[AVERAGE_ALBEDO, patch_albedo], move |v, _| {
            p.q_prime * (v[0] - v[1])
        })
    };
    let sum = |v: &[f64], _| v[0] + v[1];
    let beta = move |v: &[f64], _| growth_rate(v[0], &p);
    let growth = |v: &[f64], _| growth_flow(v[0], v[1], v[2]);
    let decay = |v: &[f64], _| v[0] * v[1];

    let defs = vec![
        VariableDef::auxiliary(
            PLANETARY_TEMPERATURE,
            Expr::new(&[ABSORBED_LUMINOSITY], move |v, _| {
                emission_temperature(v[0], &p)
            }),
        ),
        VariableDef::auxiliary(LUMINOSITY, Expr::new(&[], move |_, t| schedule.at(t))),
        VariableDef::constant(BARREN_ALBEDO, p.albedo_barren),
        VariableDef::auxiliary(
            ABSORBED_LUMINOSITY,
            Expr::new(&[LUMINOSITY, AVERAGE_ALBEDO], |v, _| v[0] * (1.0 - v[1])),
        ),
        VariableDef::constant(AREA_BARREN, a.barren_ha),
        VariableDef::constant(WHITE_ALBEDO, p.albedo_white),
        VariableDef::auxiliary(
            AVERAGE_ALBEDO,
            Expr::new(
                &[AREA_BLACK, AREA_WHITE, AREA_FERTILE, AREA_BARREN],
                move |v, _| mean_albedo(v[0], v[1], v[2], v[3], &p),
            ),
        ),
        VariableDef::constant(BLACK_ALBEDO, p.albedo_black),
        VariableDef::constant(FERTILE_ALBEDO, p.albedo_fertile),
        VariableDef::auxiliary(WHITE_ADJUSTMENT, adjustment(WHITE_ALBEDO)),
        VariableDef::stock(AREA_WHITE, a.white_ha, &[WHITE_GROWTH], &[WHITE_DECAY]),
        VariableDef::flow(WHITE_DECAY, Expr::new(&[AREA_WHITE, DECAY_RATE], decay)),
        VariableDef::stock(
            AREA_FERTILE,
            a.fertile_ha,
            &[BLACK_DECAY, WHITE_DECAY],
            &[BLACK_GROWTH, WHITE_GROWTH],
        ),
        VariableDef::flow(BLACK_DECAY, Expr::new(&[AREA_BLACK, DECAY_RATE], decay)),
        VariableDef::stock(AREA_BLACK, a.black_ha, &[BLACK_GROWTH], &[BLACK_DECAY]),
        VariableDef::auxiliary(BLACK_ADJUSTMENT, adjustment(BLACK_ALBEDO)),
        VariableDef::auxiliary(
            WHITE_TEMPERATURE,
            Expr::new(&[PLANETARY_TEMPERATURE, WHITE_ADJUSTMENT], sum),
        ),
        VariableDef::flow(
            WHITE_GROWTH,
            Expr::new(&[AREA_WHITE, D_WHITE, WHITE_GROWTH_RATE], growth),
        ),
        VariableDef::constant(DECAY_RATE, p.decay_rate),
        VariableDef::flow(
            BLACK_GROWTH,
            Expr::new(&[AREA_BLACK, D_BLACK, BLACK_GROWTH_RATE], growth),
        ),
        VariableDef::auxiliary(
            BLACK_TEMPERATURE,
            Expr::new(&[PLANETARY_TEMPERATURE, BLACK_ADJUSTMENT], sum),
        ),
        VariableDef::auxiliary(WHITE_GROWTH_RATE, Expr::new(&[WHITE_TEMPERATURE], beta)),
        d_white,
        d_black,
        VariableDef::auxiliary(BLACK_GROWTH_RATE, Expr::new(&[BLACK_TEMPERATURE], beta)),
    ];
    StockFlowModel::build(defs, scenario.dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimState;

    fn p() -> DaisyParams {
        DaisyParams::default()
    }

    /// Independent route to the radiative temperature: Newton iteration on
    /// `sigma * T^4 = S * L * (1 - A)`, no fractional powers involved.
    fn newton_temperature(l: f64, a: f64) -> f64 {
        let p = p();
        let flux = p.solar_flux * l * (1.0 - a);
        let mut t = 300.0_f64;
        for _ in 0..100 {
            let f = p.stefan_boltzmann * t.powi(4) - flux;
            t -= f / (4.0 * p.stefan_boltzmann * t.powi(3));
        }
        t - 273.0
    }

    #[test]
    fn albedo_examples() {
        assert_eq!(planetary_albedo(&AreaState::new(0.0, 0.0, 0.0), &p()), 0.5);
        assert_eq!(planetary_albedo(&AreaState::new(1.0, 0.0, 0.0), &p()), 0.25);
        let fig7 = planetary_albedo(&AreaState::new(0.1, 0.1, 0.3), &p());
        assert!((fig7 - 0.5).abs() < 1e-15);
        assert_eq!(mean_albedo(100.0, 100.0, 500.0, 300.0, &p()), 0.5);
    }

    #[test]
    fn temperature_examples() {
        let t1 = planetary_temperature(1.0, 0.5, &p());
        let t09 = planetary_temperature(0.9, 0.5, &p());
        assert!((t1 - newton_temperature(1.0, 0.5)).abs() < 1e-9);
        assert!((t09 - newton_temperature(0.9, 0.5)).abs() < 1e-9);
        assert!((t1 - 26.9).abs() < 0.05, "{t1}");
        assert!((t09 - 19.1).abs() < 0.05, "{t09}");
        assert_eq!(planetary_temperature(0.0, 0.3, &p()), -273.0);
    }

    #[test]
    fn local_temperature_examples() {
        assert!((local_temperature(0.5, 0.75, 26.9, &p()) - 21.9).abs() < 1e-12);
        assert!((local_temperature(0.5, 0.25, 26.9, &p()) - 31.9).abs() < 1e-12);
        assert_eq!(local_temperature(0.4, 0.4, 26.9, &p()), 26.9);
        let black = local_temperature(0.5, 0.25, 0.0, &p());
        let white = local_temperature(0.5, 0.75, 0.0, &p());
        assert_eq!(black, -white);
        assert_eq!(black, 5.0);
    }

    #[test]
    fn growth_rate_examples() {
        assert_eq!(growth_rate(22.5, &p()), 1.0);
        assert!((growth_rate(12.5, &p()) - 0.6735).abs() < 1e-12);
        let half_width = (1.0 / 0.003265_f64).sqrt();
        assert!(growth_rate(22.5 + half_width, &p()).abs() < 1e-9);
        assert!(growth_rate(22.5 - half_width, &p()).abs() < 1e-9);
        assert!((22.5 - half_width - 5.0).abs() < 1e-2);
        assert!((22.5 + half_width - 40.0).abs() < 1e-2);
        assert!(growth_rate(45.0, &p()) < 0.0);
        assert_eq!(growth_flow(10.0, 0.5, -0.3), 0.0);
    }

    #[test]
    fn luminosity_schedules() {
        let step = LuminositySchedule::Step {
            l0: 1.0,
            l1: 0.9,
            t_change: 50.0,
        };
        assert_eq!(step.at(49.0), 1.0);
        assert_eq!(step.at(50.0), 0.9);
        let ramp = LuminositySchedule::Ramp {
            l0: 1.0,
            l1: 1.1,
            t_start: 50.0,
            t_end: 100.0,
        };
        assert_eq!(ramp.at(10.0), 1.0);
        assert!((ramp.at(75.0) - 1.05).abs() < 1e-15);
        assert_eq!(ramp.at(100.0), 1.1);
        assert_eq!(ramp.at(120.0), 1.1);
        assert!(LuminositySchedule::Ramp {
            l0: 1.0,
            l1: 1.1,
            t_start: 5.0,
            t_end: 5.0
        }
        .validate()
        .is_err());
        assert!(LuminositySchedule::Constant { l0: -0.1 }
            .validate()
            .is_err());
        assert!(step.validate().is_ok());
    }

    fn scenario(mode: Mode, black: f64, white: f64, fertile: f64, barren: f64) -> Scenario {
        let mut s = Scenario::example();
        s.mode = mode;
        s.areas = Areas {
            black_ha: black,
            white_ha: white,
            fertile_ha: fertile,
            barren_ha: barren,
        };
        s
    }

    #[test]
    fn full_wiring_has_twenty_five_elements() {
        let s = scenario(Mode::Spatial, 100.0, 100.0, 500.0, 300.0);
        assert_eq!(build_spatial_model(&s).unwrap().len(), 25);
        let s = scenario(Mode::NonSpatial, 100.0, 100.0, 500.0, 300.0);
        assert_eq!(build_nonspatial_model(&s).unwrap().len(), 25);
    }

    fn net_white(state: &SimState) -> f64 {
        state.get(var::WHITE_GROWTH).unwrap() - state.get(var::WHITE_DECAY).unwrap()
    }

    #[test]
    fn spatial_growth_uses_injected_availability() {
        // white at 10% of the planet; growth_coeff = 0 pins beta to 1
        let mut s = scenario(Mode::Spatial, 0.0, 100.0, 600.0, 300.0);
        s.params.growth_coeff = 0.0;
        let model = build_spatial_model(&s).unwrap();
        let state = model
            .init_state_with(&[(var::D_WHITE, 0.625), (var::D_BLACK, 0.0)])
            .unwrap();
        assert_eq!(state.get(var::WHITE_GROWTH_RATE).unwrap(), 1.0);
        // in planet fractions: 0.1 * (0.625 - 0.3) = 0.0325
        assert!((net_white(&state) / 1000.0 - 0.0325).abs() < 1e-15);

        let landlocked = model
            .init_state_with(&[(var::D_WHITE, 0.0), (var::D_BLACK, 0.0)])
            .unwrap();
        assert_eq!(landlocked.get(var::WHITE_GROWTH).unwrap(), 0.0);
        assert!((net_white(&landlocked) + 30.0).abs() < 1e-12);
    }

    #[test]
    fn nonspatial_growth_uses_fertile_share() {
        let mut s = scenario(Mode::NonSpatial, 0.0, 100.0, 500.0, 400.0);
        s.params.growth_coeff = 0.0;
        let model = build_nonspatial_model(&s).unwrap();
        let state = model.init_state().unwrap();
        assert_eq!(state.get(var::D_WHITE).unwrap(), 0.5);
        // 0.1 * (0.5 * 1 - 0.3) = 0.02 of the planet
        assert!((net_white(&state) / 1000.0 - 0.02).abs() < 1e-15);
        let next = model.step(&state).unwrap();
        assert!((next.get(var::AREA_WHITE).unwrap() - 120.0).abs() < 1e-12);

        // no fertile soil: pure decay
        let s = scenario(Mode::NonSpatial, 50.0, 50.0, 0.0, 900.0);
        let model = build_nonspatial_model(&s).unwrap();
        let state = model.init_state().unwrap();
        assert_eq!(state.get(var::WHITE_GROWTH).unwrap(), 0.0);
        assert_eq!(state.get(var::BLACK_GROWTH).unwrap(), 0.0);
        let next = model.step(&state).unwrap();
        assert_eq!(next.get(var::AREA_BLACK).unwrap(), 35.0);
    }

    #[test]
    fn fig7_initial_state() {
        let s = scenario(Mode::NonSpatial, 100.0, 100.0, 500.0, 300.0);
        let state = build_nonspatial_model(&s).unwrap().init_state().unwrap();
        assert_eq!(state.get(var::AVERAGE_ALBEDO).unwrap(), 0.5);
        assert_eq!(state.get(var::D_BLACK).unwrap(), 0.5);
        let te = state.get(var::PLANETARY_TEMPERATURE).unwrap();
        assert_eq!(te, planetary_temperature(1.0, 0.5, &p()));
        let tb = state.get(var::BLACK_TEMPERATURE).unwrap();
        let tw = state.get(var::WHITE_TEMPERATURE).unwrap();
        assert!((tb - te - 5.0).abs() < 1e-12 && (tw - te + 5.0).abs() < 1e-12);
        assert_eq!(
            state.get(var::BLACK_GROWTH_RATE).unwrap(),
            growth_rate(tb, &p())
        );
    }

    #[test]
    fn default_params_are_valid() {
        assert!(p().validate().is_ok());
        let mut bad = p();
        bad.albedo_black = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = p();
        bad.decay_rate = -0.1;
        assert!(bad.validate().is_err());
    }
}

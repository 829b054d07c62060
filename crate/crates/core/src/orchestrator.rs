//! Lock-step coupling of the Daisyworld stock-and-flow model with the
//! land-cover raster.
//!
//! Every step: measure the raster, inject the growth multipliers, advance the
//! model once, turn the step's growth and decay flows into whole cells, and
//! snap the daisy and fertile stocks back onto the raster census. The raster
//! is the source of truth for area.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::daisyworld::{build_nonspatial_model, build_spatial_model, var, Areas};
use crate::engine::{EngineError, SimState, StockFlowModel};
use crate::landscape::{
    seeded_rng, Census, LandCode, LandGrid, LandscapeError, Neighborhood, SimRng, Species,
    ALLOCATION_STREAM,
};
use crate::scenario::{Mode, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(
        "{code} area {area_ha} ha is not a whole number of {cell_area_ha} ha cells; \
         nearest legal areas are {lower_ha} ha and {upper_ha} ha"
    )]
    Indivisible {
        code: LandCode,
        area_ha: f64,
        cell_area_ha: f64,
        lower_ha: f64,
        upper_ha: f64,
    },
    #[error("grid_shape {nrows}x{ncols} holds {} cells but the areas need {cells}", .nrows * .ncols)]
    Shape {
        nrows: usize,
        ncols: usize,
        cells: usize,
    },
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error("initialization: {0}")]
    Init(EngineError),
    #[error("step {step}: {source}")]
    Step { step: u32, source: EngineError },
    #[error("scenario mode is {found:?}, expected {expected:?}")]
    WrongMode { expected: Mode, found: Mode },
}

/// One row of simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub time: f64,
    pub luminosity: f64,
    #[serde(rename = "temperature_C")]
    pub temperature_c: f64,
    pub area_black_ha: f64,
    pub area_white_ha: f64,
    pub area_fertile_ha: f64,
    pub area_barren_ha: f64,
    pub albedo: f64,
    #[serde(rename = "D_black")]
    pub d_black: f64,
    #[serde(rename = "D_white")]
    pub d_white: f64,
    pub grown_black: u64,
    pub grown_white: u64,
    pub decayed_black: u64,
    pub decayed_white: u64,
}

impl SimulationRecord {
    fn from_state(state: &SimState, realized: [usize; 4]) -> Result<Self, EngineError> {
        Ok(Self {
            time: state.time(),
            luminosity: state.get(var::LUMINOSITY)?,
            temperature_c: state.get(var::PLANETARY_TEMPERATURE)?,
            area_black_ha: state.get(var::AREA_BLACK)?,
            area_white_ha: state.get(var::AREA_WHITE)?,
            area_fertile_ha: state.get(var::AREA_FERTILE)?,
            area_barren_ha: state.get(var::AREA_BARREN)?,
            albedo: state.get(var::AVERAGE_ALBEDO)?,
            d_black: state.get(var::D_BLACK)?,
            d_white: state.get(var::D_WHITE)?,
            grown_black: realized[0] as u64,
            grown_white: realized[1] as u64,
            decayed_black: realized[2] as u64,
            decayed_white: realized[3] as u64,
        })
    }

    pub fn total_area_ha(&self) -> f64 {
        self.area_black_ha + self.area_white_ha + self.area_fertile_ha + self.area_barren_ha
    }
}

pub fn cell_area_ha(cell_size_m: f64) -> f64 {
    cell_size_m * cell_size_m / 10_000.0
}

/// Whole cell counts for the scenario areas; an area that is not a multiple
/// of the cell area is an error.
pub fn cell_counts(areas: &Areas, cell_size_m: f64) -> Result<Census, SimError> {
    let cell = cell_area_ha(cell_size_m);
    let mut census = Census::default();
    for (code, area) in [
        (LandCode::Fertile, areas.fertile_ha),
        (LandCode::Black, areas.black_ha),
        (LandCode::White, areas.white_ha),
        (LandCode::Barren, areas.barren_ha),
    ] {
        let n = (area / cell).round();
        if (n * cell - area).abs() > 1e-9 * area.max(cell) {
            let lower = (area / cell).floor() * cell;
            return Err(SimError::Indivisible {
                code,
                area_ha: area,
                cell_area_ha: cell,
                lower_ha: lower,
                upper_ha: lower + cell,
            });
        }
        census.set(code, n as usize);
    }
    Ok(census)
}

/// Most square `(nrows, ncols)` with `nrows * ncols = cells` and
/// `ncols >= nrows`.
pub fn default_shape(cells: usize) -> (usize, usize) {
    let mut nrows = (cells as f64).sqrt() as usize;
    while nrows > 1 && !cells.is_multiple_of(nrows) {
        nrows -= 1;
    }
    let nrows = nrows.max(1);
    (nrows, cells / nrows)
}

/// Land-cover areas of a grid, in hectares.
/// Area of each land code on `grid`.
pub fn grid_areas(grid: &LandGrid) -> Areas {
    let census = grid.census();
    let cell = grid.cell_area_ha();
    Areas {
        black_ha: census.get(LandCode::Black) as f64 * cell,
        white_ha: census.get(LandCode::White) as f64 * cell,
        fertile_ha: census.get(LandCode::Fertile) as f64 * cell,
        barren_ha: census.get(LandCode::Barren) as f64 * cell,
    }
}

/// Running state of a spatial simulation.
#[derive(Debug, Clone)]
pub struct Coupling {
    model: StockFlowModel,
    state: SimState,
    grid: LandGrid,
    neighborhood: Neighborhood,
    /// Sub-cell remainders (ha) of growth and decay, `[black, white]`.
    residual_growth: [f64; 2],
    residual_decay: [f64; 2],
    step_index: u32,
    rng: SimRng,
}

impl Coupling {
    /// Generates the scenario's random landscape and initializes the model
    /// from its census.
    pub fn initialize(scenario: &Scenario) -> Result<Self, SimError> {
        let counts = cell_counts(&scenario.areas, scenario.cell_size_m)?;
        let cells = counts.total();
        let (nrows, ncols) = match scenario.grid_shape {
            Some([nrows, ncols]) if nrows * ncols == cells => (nrows, ncols),
            Some([nrows, ncols]) => {
                return Err(SimError::Shape {
                    nrows,
                    ncols,
                    cells,
                })
            }
            None => default_shape(cells),
        };
        let grid = LandGrid::generate(counts, nrows, ncols, scenario.cell_size_m, scenario.seed)?;
        Self::from_grid(scenario, grid)
    }

    /// Initializes from an existing landscape; stocks come from its census
    /// and the scenario's areas and cell size are not consulted.
    pub fn from_grid(scenario: &Scenario, grid: LandGrid) -> Result<Self, SimError> {
        scenario.validate()?;
        if scenario.mode != Mode::Spatial {
            return Err(SimError::WrongMode {
                expected: Mode::Spatial,
                found: scenario.mode,
            });
        }
        let mut scenario = scenario.clone();
        scenario.areas = grid_areas(&grid);
        scenario.cell_size_m = grid.cell_size_m();
        let model = build_spatial_model(&scenario).map_err(SimError::Init)?;
        let stats = grid.adjacency_stats();
        let state = model
            .init_state_with(&[
                (var::D_BLACK, stats.growth_reduction(Species::Black)),
                (var::D_WHITE, stats.growth_reduction(Species::White)),
            ])
            .map_err(SimError::Init)?;
        Ok(Self {
            model,
            state,
            grid,
            neighborhood: scenario.neighborhood,
            residual_growth: [0.0; 2],
            residual_decay: [0.0; 2],
            step_index: 0,
            rng: seeded_rng(scenario.seed, ALLOCATION_STREAM),
        })
    }

    pub fn grid(&self) -> &LandGrid {
        &self.grid
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn model(&self) -> &StockFlowModel {
        &self.model
    }

    pub fn step_index(&self) -> u32 {
        self.step_index
    }

    pub fn residual_growth(&self) -> [f64; 2] {
        self.residual_growth
    }

    pub fn residual_decay(&self) -> [f64; 2] {
        self.residual_decay
    }

    /// Record of the current state with zero realized allocations.
    pub fn record(&self) -> SimulationRecord {
        SimulationRecord::from_state(&self.state, [0; 4]).expect("model variables exist")
    }

    /// Advances one coupled step. On error nothing is modified.
    pub fn step_once(&mut self) -> Result<SimulationRecord, SimError> {
        let step = self.step_index + 1;
        let fail = |source| SimError::Step { step, source };

        let stats = self.grid.adjacency_stats();
        let mut state = self.state.clone();
        state
            .inject(var::D_BLACK, stats.growth_reduction(Species::Black))
            .map_err(fail)?;
        state
            .inject(var::D_WHITE, stats.growth_reduction(Species::White))
            .map_err(fail)?;
        let trace = self.model.step_traced(&state).map_err(fail)?;
        let mut next = trace.next;

        let dt = self.model.dt();
        let flow = |id| trace.evaluated.get(id).map(|v| v * dt).map_err(fail);
        let growth = [flow(var::BLACK_GROWTH)?, flow(var::WHITE_GROWTH)?];
        let decay = [flow(var::BLACK_DECAY)?, flow(var::WHITE_DECAY)?];

        let mut grid = self.grid.clone();
        let mut rng = self.rng.clone();
        let mut residual_growth = self.residual_growth;
        let mut residual_decay = self.residual_decay;
        let cell = grid.cell_area_ha();
        let mut realized = [0usize; 4];

        let mut requests = [(Species::Black, 0), (Species::White, 0)];
        for (k, request) in requests.iter_mut().enumerate() {
            residual_growth[k] += growth[k];
            request.1 = whole_cells(residual_growth[k], cell);
            residual_growth[k] -= request.1 as f64 * cell;
        }
        let grown = grid.allocate_growth_shared(&requests, step, self.neighborhood, &mut rng);
        realized[..2].copy_from_slice(&grown);
        for (k, species) in Species::BOTH.into_iter().enumerate() {
            residual_decay[k] += decay[k];
            let n = whole_cells(residual_decay[k], cell);
            residual_decay[k] -= n as f64 * cell;
            realized[2 + k] = grid.allocate_decay(species, n, &mut rng);
        }

        let census = grid.census();
        for (id, code) in [
            (var::AREA_BLACK, LandCode::Black),
            (var::AREA_WHITE, LandCode::White),
            (var::AREA_FERTILE, LandCode::Fertile),
        ] {
            next.set_stock(&self.model, id, census.get(code) as f64 * cell)
                .map_err(fail)?;
        }
        let stats = grid.adjacency_stats();
        next.inject(var::D_BLACK, stats.growth_reduction(Species::Black))
            .map_err(fail)?;
        next.inject(var::D_WHITE, stats.growth_reduction(Species::White))
            .map_err(fail)?;
        self.model.evaluate(&mut next).map_err(fail)?;
        let record = SimulationRecord::from_state(&next, realized).map_err(fail)?;

        self.state = next;
        self.grid = grid;
        self.rng = rng;
        self.residual_growth = residual_growth;
        self.residual_decay = residual_decay;
        self.step_index = step;
        Ok(record)
    }
}

fn whole_cells(amount_ha: f64, cell_area_ha: f64) -> usize {
    if amount_ha <= 0.0 {
        0
    } else {
        (amount_ha / cell_area_ha).floor() as usize
    }
}

/// Output of a full run.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    /// Initial record followed by one record per step.
    pub records: Vec<SimulationRecord>,
    /// `(step, grid)` pairs when the scenario asks for snapshots.
    pub snapshots: Vec<(u32, LandGrid)>,
}

/// Runs the scenario in its configured mode.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    match scenario.mode {
        Mode::Spatial => run_coupled(scenario, Coupling::initialize(scenario)?),
        Mode::NonSpatial => Ok(RunOutput {
            records: run_nonspatial(scenario)?,
            snapshots: Vec::new(),
        }),
    }
}

/// Spatial run on a supplied landscape.
pub fn run_from_grid(scenario: &Scenario, grid: LandGrid) -> Result<RunOutput, SimError> {
    run_coupled(scenario, Coupling::from_grid(scenario, grid)?)
}

fn run_coupled(scenario: &Scenario, mut coupling: Coupling) -> Result<RunOutput, SimError> {
    let wants = |step: u32| scenario.snapshot_every.is_some_and(|k| step.is_multiple_of(k));
    let mut out = RunOutput {
        records: Vec::with_capacity(scenario.steps as usize + 1),
        snapshots: Vec::new(),
    };
    out.records.push(coupling.record());
    if wants(0) {
        out.snapshots.push((0, coupling.grid().clone()));
    }
    for _ in 0..scenario.steps {
        out.records.push(coupling.step_once()?);
        let step = coupling.step_index();
        if wants(step) {
            out.snapshots.push((step, coupling.grid().clone()));
        }
    }
    Ok(out)
}

/// Pure stock-and-flow run with the shared fertile-share growth factor.
/// Daisy stocks falling below the extinction threshold are set to 0 and
/// fertile soil is kept as the closure of the other three areas.
pub fn run_nonspatial(scenario: &Scenario) -> Result<Vec<SimulationRecord>, SimError> {
    scenario.validate()?;
    if scenario.mode != Mode::NonSpatial {
        return Err(SimError::WrongMode {
            expected: Mode::NonSpatial,
            found: scenario.mode,
        });
    }
    let model = build_nonspatial_model(scenario).map_err(SimError::Init)?;
    let total = scenario.areas.total();
    let threshold = scenario.params.extinction_fraction * total;

    let mut state = model.init_state().map_err(SimError::Init)?;
    apply_extinction_and_closure(&model, &mut state, total, threshold).map_err(SimError::Init)?;
    let mut records = Vec::with_capacity(scenario.steps as usize + 1);
    records.push(SimulationRecord::from_state(&state, [0; 4]).map_err(SimError::Init)?);
    for step in 1..=scenario.steps {
        let fail = |source| SimError::Step { step, source };
        let mut next = model.step(&state).map_err(fail)?;
        apply_extinction_and_closure(&model, &mut next, total, threshold).map_err(fail)?;
        records.push(SimulationRecord::from_state(&next, [0; 4]).map_err(fail)?);
        state = next;
    }
    Ok(records)
}

fn apply_extinction_and_closure(
    model: &StockFlowModel,
    state: &mut SimState,
    total: f64,
    threshold: f64,
) -> Result<(), EngineError> {
    let mut daisies = 0.0;
    for id in [var::AREA_BLACK, var::AREA_WHITE] {
        let area = state.get(id)?;
        if area < threshold {
            state.set_stock(model, id, 0.0)?;
        } else {
            daisies += area;
        }
    }
    let barren = state.get(var::AREA_BARREN)?;
    state.set_stock(model, var::AREA_FERTILE, total - barren - daisies)?;
    model.evaluate(state)
}

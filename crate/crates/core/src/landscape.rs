//! Land-cover raster: cell codes, per-cell growth timestamps, neighborhood
//! analysis and the growth/decay allocation rules that move daisy area
//! between cells.

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Generator used for every randomized landscape operation.
pub type SimRng = ChaCha8Rng;

/// Seeded generator on an independent stream, so landscape generation and
/// allocation draws never shift each other.
pub fn seeded_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const LANDSCAPE_STREAM: u64 = 0;
pub const ALLOCATION_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandscapeError {
    #[error("grid must have at least one row and one column, got {nrows}x{ncols}")]
    EmptyGrid { nrows: usize, ncols: usize },
    #[error("cell size must be positive and finite, got {0}")]
    BadCellSize(f64),
    #[error("cell counts sum to {got} but the grid has {expected} cells ({})", deficit(*.expected, *.got))]
    CountMismatch { expected: usize, got: usize },
    #[error("expected {expected} cell codes, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("refinement factor must be at least 1")]
    BadRefinement,
}

fn deficit(expected: usize, got: usize) -> String {
    if got < expected {
        format!("deficit of {}", expected - got)
    } else {
        format!("surplus of {}", got - expected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum LandCode {
    Fertile = 0,
    Black = 1,
    White = 2,
    Barren = 3,
}

impl LandCode {
    pub const ALL: [LandCode; 4] = [
        LandCode::Fertile,
        LandCode::Black,
        LandCode::White,
        LandCode::Barren,
    ];

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(Self::Fertile),
            1 => Some(Self::Black),
            2 => Some(Self::White),
            3 => Some(Self::Barren),
            _ => None,
        }
    }

    pub fn is_daisy(self) -> bool {
        matches!(self, Self::Black | Self::White)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fertile => "fertile",
            Self::Black => "black",
            Self::White => "white",
            Self::Barren => "barren",
        }
    }
}

impl fmt::Display for LandCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Black,
    White,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::Black, Species::White];

    pub fn code(self) -> LandCode {
        match self {
            Self::Black => LandCode::Black,
            Self::White => LandCode::White,
        }
    }
}

/// Cells considered adjacent when searching for growth sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Neighborhood {
    /// 8-connected (queen's case).
    #[default]
    Moore,
    /// 4-connected (rook's case).
    VonNeumann,
}

impl Neighborhood {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Self::Moore => &MOORE,
            Self::VonNeumann => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
        }
    }
}

impl TryFrom<u8> for Neighborhood {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            8 => Ok(Self::Moore),
            4 => Ok(Self::VonNeumann),
            other => Err(format!("neighborhood must be 8 or 4, got {other}")),
        }
    }
}

impl From<Neighborhood> for u8 {
    fn from(n: Neighborhood) -> u8 {
        match n {
            Neighborhood::Moore => 8,
            Neighborhood::VonNeumann => 4,
        }
    }
}

const MOORE: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Cell count per land code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Census([usize; 4]);

impl Census {
    pub fn new(fertile: usize, black: usize, white: usize, barren: usize) -> Self {
        Self([fertile, black, white, barren])
    }

    pub fn get(&self, code: LandCode) -> usize {
        self.0[code as usize]
    }

    pub fn set(&mut self, code: LandCode, n: usize) {
        self.0[code as usize] = n;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Summed fertile-neighbor incidences `g` and cell counts `c` per species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdjacencyStats {
    pub g_black: usize,
    pub g_white: usize,
    pub c_black: usize,
    pub c_white: usize,
}

impl AdjacencyStats {
    /// Share of the possible `8 * c` daisy/fertile adjacencies actually
    /// present; 0 for an extinct species.
    pub fn growth_reduction(&self, species: Species) -> f64 {
        let (g, c) = match species {
            Species::Black => (self.g_black, self.c_black),
            Species::White => (self.g_white, self.c_white),
        };
        if c == 0 {
            0.0
        } else {
            g as f64 / (8 * c) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandGrid {
    nrows: usize,
    ncols: usize,
    cell_size_m: f64,
    codes: Vec<LandCode>,
    /// Step at which each daisy cell was colonized; `None` elsewhere.
    age: Vec<Option<u32>>,
}

impl LandGrid {
    /// Builds a grid from row-major codes; daisy cells get timestamp 0.
    pub fn new(
        nrows: usize,
        ncols: usize,
        cell_size_m: f64,
        codes: Vec<LandCode>,
    ) -> Result<Self, LandscapeError> {
        if nrows == 0 || ncols == 0 {
            return Err(LandscapeError::EmptyGrid { nrows, ncols });
        }
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(LandscapeError::BadCellSize(cell_size_m));
        }
        if codes.len() != nrows * ncols {
            return Err(LandscapeError::ShapeMismatch {
                expected: nrows * ncols,
                got: codes.len(),
            });
        }
        let age = codes.iter().map(|c| c.is_daisy().then_some(0)).collect();
        Ok(Self {
            nrows,
            ncols,
            cell_size_m,
            codes,
            age,
        })
    }

    pub fn filled(
        nrows: usize,
        ncols: usize,
        cell_size_m: f64,
        code: LandCode,
    ) -> Result<Self, LandscapeError> {
        Self::new(nrows, ncols, cell_size_m, vec![code; nrows * ncols])
    }

    /// Random landscape holding exactly `counts` cells of each code, placed by
    /// a uniform random permutation.
    pub fn generate(
        counts: Census,
        nrows: usize,
        ncols: usize,
        cell_size_m: f64,
        seed: u64,
    ) -> Result<Self, LandscapeError> {
        if counts.total() != nrows * ncols {
            return Err(LandscapeError::CountMismatch {
                expected: nrows * ncols,
                got: counts.total(),
            });
        }
        let mut codes = Vec::with_capacity(nrows * ncols);
        for code in LandCode::ALL {
            codes.extend(std::iter::repeat_n(code, counts.get(code)));
        }
        codes.shuffle(&mut seeded_rng(seed, LANDSCAPE_STREAM));
        Self::new(nrows, ncols, cell_size_m, codes)
    }

    /// Splits every cell into `k x k` cells of the same code and timestamp.
    pub fn refine(&self, k: usize) -> Result<Self, LandscapeError> {
        if k == 0 {
            return Err(LandscapeError::BadRefinement);
        }
        let (nrows, ncols) = (self.nrows * k, self.ncols * k);
        let mut codes = Vec::with_capacity(nrows * ncols);
        let mut age = Vec::with_capacity(nrows * ncols);
        for r in 0..nrows {
            let src = (r / k) * self.ncols;
            for c in 0..ncols {
                codes.push(self.codes[src + c / k]);
                age.push(self.age[src + c / k]);
            }
        }
        Ok(Self {
            nrows,
            ncols,
            cell_size_m: self.cell_size_m / k as f64,
            codes,
            age,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn cell_area_ha(&self) -> f64 {
        self.cell_size_m * self.cell_size_m / 10_000.0
    }

    pub fn codes(&self) -> &[LandCode] {
        &self.codes
    }

    pub fn get(&self, row: usize, col: usize) -> LandCode {
        self.codes[row * self.ncols + col]
    }

    pub fn age(&self, row: usize, col: usize) -> Option<u32> {
        self.age[row * self.ncols + col]
    }

    pub fn ages(&self) -> &[Option<u32>] {
        &self.age
    }

    /// Overwrites one cell; `age` is kept only for daisy codes.
    pub fn set(&mut self, row: usize, col: usize, code: LandCode, age: u32) {
        let i = row * self.ncols + col;
        self.codes[i] = code;
        self.age[i] = code.is_daisy().then_some(age);
    }

    pub fn count(&self, code: LandCode) -> usize {
        self.codes.iter().filter(|&&c| c == code).count()
    }

    pub fn census(&self) -> Census {
        let mut census = Census::default();
        for &c in &self.codes {
            census.0[c as usize] += 1;
        }
        census
    }

    fn neighbors(&self, i: usize, hood: Neighborhood) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = ((i / self.ncols) as isize, (i % self.ncols) as isize);
        let (nrows, ncols) = (self.nrows as isize, self.ncols as isize);
        hood.offsets().iter().filter_map(move |&(dr, dc)| {
            let (rr, cc) = (r + dr, c + dc);
            (rr >= 0 && rr < nrows && cc >= 0 && cc < ncols).then(|| (rr * ncols + cc) as usize)
        })
    }

    /// Counts fertile cells in the 3x3 window around every daisy cell.
    pub fn adjacency_stats(&self) -> AdjacencyStats {
        let mut stats = AdjacencyStats::default();
        let ncols = self.ncols;
        let fertile = |i: usize| (self.codes[i] == LandCode::Fertile) as usize;
        for r in 0..self.nrows {
            let r0 = r.saturating_sub(1);
            let r1 = (r + 1).min(self.nrows - 1);
            for c in 0..ncols {
                let code = self.codes[r * ncols + c];
                if !code.is_daisy() {
                    continue;
                }
                let c0 = c.saturating_sub(1);
                let c1 = (c + 1).min(ncols - 1);
                let mut g = 0;
                for rr in r0..=r1 {
                    let row = rr * ncols;
                    for cc in c0..=c1 {
                        g += fertile(row + cc);
                    }
                }
                // the centre is a daisy, so it never counted itself
                match code {
                    LandCode::Black => {
                        stats.g_black += g;
                        stats.c_black += 1;
                    }
                    _ => {
                        stats.g_white += g;
                        stats.c_white += 1;
                    }
                }
            }
        }
        stats
    }

    /// Row-major indices of fertile cells touching `species` under `hood`.
    pub fn frontier(&self, species: Species, hood: Neighborhood) -> Vec<usize> {
        let target = species.code();
        (0..self.codes.len())
            .filter(|&i| {
                self.codes[i] == LandCode::Fertile
                    && self.neighbors(i, hood).any(|j| self.codes[j] == target)
            })
            .collect()
    }

    /// Colonizes up to `n_cells` frontier cells chosen uniformly without
    /// replacement. The frontier is fixed on entry, so new cells do not seed
    /// further growth in the same call. Returns the number of cells grown.
    pub fn allocate_growth<R: Rng + ?Sized>(
        &mut self,
        species: Species,
        n_cells: usize,
        step_index: u32,
        hood: Neighborhood,
        rng: &mut R,
    ) -> usize {
        if n_cells == 0 {
            return 0;
        }
        let frontier = self.frontier(species, hood);
        let realized = n_cells.min(frontier.len());
        for k in index::sample(rng, frontier.len(), realized) {
            let i = frontier[k];
            self.codes[i] = species.code();
            self.age[i] = Some(step_index);
        }
        realized
    }

    /// Grows several species in the same step without giving any of them
    /// priority over shared frontier cells.
    ///
    /// Every frontier is taken from the grid as it is on entry and visited in
    /// a random order. Species then claim one cell each in turn, starting
    /// from a randomly chosen species, skipping cells another species already
    /// took. Returns the realized count per request.
    pub fn allocate_growth_shared<R: Rng + ?Sized>(
        &mut self,
        requests: &[(Species, usize)],
        step_index: u32,
        hood: Neighborhood,
        rng: &mut R,
    ) -> Vec<usize> {
        let mut queues: Vec<Vec<usize>> = requests
            .iter()
            .map(|&(species, n)| {
                if n == 0 {
                    return Vec::new();
                }
                let mut frontier = self.frontier(species, hood);
                frontier.shuffle(rng);
                frontier
            })
            .collect();
        let mut realized = vec![0usize; requests.len()];
        let mut cursor = vec![0usize; requests.len()];
        if requests.is_empty() {
            return realized;
        }
        let first = rng.random_range(0..requests.len());
        loop {
            let mut progressed = false;
            for turn in 0..requests.len() {
                let k = (first + turn) % requests.len();
                let (species, wanted) = requests[k];
                if realized[k] == wanted {
                    continue;
                }
                let queue = &mut queues[k];
                while cursor[k] < queue.len() {
                    let i = queue[cursor[k]];
                    cursor[k] += 1;
                    if self.codes[i] == LandCode::Fertile {
                        self.codes[i] = species.code();
                        self.age[i] = Some(step_index);
                        realized[k] += 1;
                        progressed = true;
                        break;
                    }
                }
            }
            if !progressed {
                break;
            }
        }
        realized
    }

    /// Returns up to `n_cells` of the oldest `species` cells to fertile soil.
    /// Equal timestamps are ordered uniformly at random. Returns the number
    /// of cells removed.
    pub fn allocate_decay<R: Rng + ?Sized>(
        &mut self,
        species: Species,
        n_cells: usize,
        rng: &mut R,
    ) -> usize {
        if n_cells == 0 {
            return 0;
        }
        let target = species.code();
        let mut cells: Vec<usize> = (0..self.codes.len())
            .filter(|&i| self.codes[i] == target)
            .collect();
        let realized = n_cells.min(cells.len());
        cells.shuffle(rng);
        // stable: shuffled order survives among equal timestamps
        cells.sort_by_key(|&i| self.age[i]);
        for &i in &cells[..realized] {
            self.codes[i] = LandCode::Fertile;
            self.age[i] = None;
        }
        realized
    }
}

//! Persistence: ASCII raster grids, CSV time series and PPM map snapshots.

pub mod raster;
pub mod records;
pub mod snapshot;

pub use raster::{read_grid, write_grid, RasterError};
pub use records::{read_records, write_records, RECORD_HEADER};
pub use snapshot::{snapshot_path, write_snapshot, write_snapshot_file};

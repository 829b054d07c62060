//! CSV time series of [`SimulationRecord`]s.

use std::io;

use thiserror::Error;

use crate::orchestrator::SimulationRecord;

pub const RECORD_HEADER: [&str; 14] = [
    "time",
    "luminosity",
    "temperature_C",
    "area_black_ha",
    "area_white_ha",
    "area_fertile_ha",
    "area_barren_ha",
    "albedo",
    "D_black",
    "D_white",
    "grown_black",
    "grown_white",
    "decayed_black",
    "decayed_white",
];

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header `{0}`")]
    Header(String),
}

/// Writes the header and one row per record. Floats use the shortest
/// representation that reads back to the same value.
pub fn write_records<W: io::Write>(
    records: &[SimulationRecord],
    out: W,
) -> Result<(), RecordsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(RECORD_HEADER)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_records<R: io::Read>(input: R) -> Result<Vec<SimulationRecord>, RecordsError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(RecordsError::Header(
            header.iter().collect::<Vec<_>>().join(","),
        ));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use ssd_core::io::{write_records, write_snapshot_file};
use ssd_core::{RunOutput, Scenario, SimulationRecord};

use crate::{runtime, Failure};

/// Provenance written next to every run. The scenario part is plain
/// scenario text and the header lines are comments, so the file can be fed
/// back to `ssd run --scenario`.
pub struct Meta {
    pub command: &'static str,
    pub overrides: Vec<String>,
    /// Landscape file the run started from, if not generated.
    pub landscape: Option<String>,
    pub scenario: Scenario,
}

impl Meta {
    pub fn new(command: &'static str, scenario: &Scenario, overrides: Vec<String>) -> Self {
        Self {
            command,
            overrides,
            landscape: None,
            scenario: scenario.clone(),
        }
    }

    pub fn render(&self) -> Result<String, Failure> {
        let s = &self.scenario;
        let mut text = format!(
            "# ssd {}\n# command: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command
        );
        let overrides = if self.overrides.is_empty() {
            "none".to_string()
        } else {
            self.overrides.join(" ")
        };
        text += &format!("# overrides: {overrides}\n");
        let replay = match &self.landscape {
            Some(path) => {
                text += &format!("# landscape: {path}\n");
                format!("ssd run --scenario meta.txt --landscape {path}")
            }
            None => {
                text += &format!("# landscape: generated from seed {}\n", s.seed);
                "ssd run --scenario meta.txt".to_string()
            }
        };
        text += &format!(
            "# extinction threshold: {} of total area ({} ha, non-spatial runs)\n",
            s.params.extinction_fraction,
            s.params.extinction_fraction * s.areas.total()
        );
        text += &format!("# replay: {replay}\n\n");
        text += &s.render().map_err(runtime("meta.txt"))?;
        Ok(text)
    }
}

pub fn write_run_dir(dir: &Path, output: &RunOutput, meta: &Meta) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(runtime(dir.display()))?;
    let path = dir.join("records.csv");
    let file = File::create(&path).map_err(runtime(path.display()))?;
    write_records(&output.records, BufWriter::new(file)).map_err(runtime(path.display()))?;
    for (step, grid) in &output.snapshots {
        write_snapshot_file(grid, dir, *step).map_err(runtime(dir.display()))?;
    }
    let path = dir.join("meta.txt");
    fs::write(&path, meta.render()?).map_err(runtime(path.display()))
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "seed",
    "final_temperature_C",
    "final_area_black_ha",
    "final_area_white_ha",
    "final_area_fertile_ha",
    "final_area_barren_ha",
    "min_area_white_ha",
];

pub fn write_summary(path: &Path, rows: &[(u64, Vec<SimulationRecord>)]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(runtime(path.display()))?;
    w.write_record(SUMMARY_HEADER)
        .map_err(runtime(path.display()))?;
    for (seed, records) in rows {
        let last = records.last().expect("a run has an initial record");
        let min_white = records
            .iter()
            .map(|r| r.area_white_ha)
            .fold(f64::INFINITY, f64::min);
        w.write_record([
            seed.to_string(),
            last.temperature_c.to_string(),
            last.area_black_ha.to_string(),
            last.area_white_ha.to_string(),
            last.area_fertile_ha.to_string(),
            last.area_barren_ha.to_string(),
            min_white.to_string(),
        ])
        .map_err(runtime(path.display()))?;
    }
    w.flush().map_err(runtime(path.display()))
}

/// `time` followed by one `temperature_C_<resolution>` column per run.
pub fn write_sweep(
    path: &Path,
    columns: &[(String, Vec<SimulationRecord>)],
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(runtime(path.display()))?;
    let mut header = vec!["time".to_string()];
    header.extend(
        columns
            .iter()
            .map(|(label, _)| format!("temperature_C_{label}")),
    );
    w.write_record(&header).map_err(runtime(path.display()))?;
    let rows = columns.iter().map(|(_, r)| r.len()).min().unwrap_or(0);
    for i in 0..rows {
        let mut row = vec![columns[0].1[i].time.to_string()];
        row.extend(columns.iter().map(|(_, r)| r[i].temperature_c.to_string()));
        w.write_record(&row).map_err(runtime(path.display()))?;
    }
    w.flush().map_err(runtime(path.display()))
}

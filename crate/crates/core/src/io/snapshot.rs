//! Plain-text PPM (P3) map snapshots with a fixed land-cover palette.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::landscape::{LandCode, LandGrid};

pub fn palette(code: LandCode) -> (u8, u8, u8) {
    match code {
        LandCode::Fertile => (139, 115, 85),
        LandCode::Black => (20, 20, 20),
        LandCode::White => (240, 240, 240),
        LandCode::Barren => (128, 128, 128),
    }
}

pub fn write_snapshot(grid: &LandGrid) -> String {
    let mut out = String::with_capacity(grid.len() * 12 + 32);
    writeln!(out, "P3\n{} {}\n255", grid.ncols(), grid.nrows()).unwrap();
    for row in grid.codes().chunks(grid.ncols()) {
        let line: Vec<String> = row
            .iter()
            .map(|&c| {
                let (r, g, b) = palette(c);
                format!("{r} {g} {b}")
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// `<run_dir>/map_<step:05>.ppm`
pub fn snapshot_path(run_dir: &Path, step: u32) -> PathBuf {
    run_dir.join(format!("map_{step:05}.ppm"))
}

pub fn write_snapshot_file(grid: &LandGrid, run_dir: &Path, step: u32) -> io::Result<PathBuf> {
    let path = snapshot_path(run_dir, step);
    fs::write(&path, write_snapshot(grid))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barren_grid_is_uniform_grey() {
        let grid = LandGrid::filled(2, 3, 1.0, LandCode::Barren).unwrap();
        let text = write_snapshot(&grid);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("P3"));
        assert_eq!(lines.next(), Some("3 2"));
        assert_eq!(lines.next(), Some("255"));
        let values: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
        assert_eq!(values.len(), 18);
        assert!(values.iter().all(|v| *v == "128"));
    }

    #[test]
    fn palette_order() {
        let grid = LandGrid::new(1, 4, 1.0, LandCode::ALL.to_vec()).unwrap();
        assert_eq!(
            write_snapshot(&grid),
            "P3\n4 1\n255\n139 115 85 20 20 20 240 240 240 128 128 128\n"
        );
    }

    #[test]
    fn file_naming() {
        let dir = tempfile::tempdir().unwrap();
        let grid = LandGrid::filled(1, 1, 1.0, LandCode::Black).unwrap();
        let path = write_snapshot_file(&grid, dir.path(), 7).unwrap();
        assert_eq!(path.file_name().unwrap(), "map_00007.ppm");
        assert!(path.exists());
    }
}

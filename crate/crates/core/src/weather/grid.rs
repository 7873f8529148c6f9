use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{csv_error, csv_reader, expect_header, malformed, parse_field, Result, WeatherError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub cell_id: usize,
    pub lat: f64,
    pub lon: f64,
}

/// Spatial domain of a field: cells indexed contiguously from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDefinition {
    cells: Vec<GridCell>,
}

impl GridDefinition {
    /// Validates and orders `cells` by id.
    pub fn new(mut cells: Vec<GridCell>) -> Result<Self> {
        cells.sort_by_key(|c| c.cell_id);
        if let Some(pair) = cells.windows(2).find(|p| p[0].cell_id == p[1].cell_id) {
            return Err(WeatherError::DuplicateCell(pair[0].cell_id));
        }
        for (idx, cell) in cells.iter().enumerate() {
            if cell.cell_id != idx {
                return Err(WeatherError::NonContiguousCells(idx));
            }
            let lat_ok = cell.lat.is_finite() && (-90.0..=90.0).contains(&cell.lat);
            let lon_ok = cell.lon.is_finite() && (-180.0..=180.0).contains(&cell.lon);
            if !lat_ok || !lon_ok {
                return Err(WeatherError::OutOfRangeCoordinate { cell: cell.cell_id, lat: cell.lat, lon: cell.lon });
            }
        }
        if cells.is_empty() {
            return Err(malformed(1, "grid has no cells"));
        }
        Ok(Self { cells })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> Option<&GridCell> {
        self.cells.get(id)
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.cells.len()
    }
}

pub fn load_grid_definition(path: impl AsRef<Path>) -> Result<GridDefinition> {
    let mut rdr = csv_reader(BufReader::new(File::open(path)?));
    let mut record = csv::ByteRecord::new();
    let mut cells = Vec::new();
    let mut line = 0;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        line += 1;
        if line == 1 {
            expect_header(&record, &["cell_id", "lat", "lon"], line)?;
            continue;
        }
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
        }
        cells.push(GridCell {
            cell_id: parse_field(&record[0], line, "cell_id")?,
            lat: parse_field(&record[1], line, "lat")?,
            lon: parse_field(&record[2], line, "lon")?,
        });
    }
    if line == 0 {
        return Err(malformed(1, "empty file"));
    }
    GridDefinition::new(cells)
}

pub fn write_grid_definition(path: impl AsRef<Path>, grid: &GridDefinition) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "cell_id,lat,lon")?;
    for c in grid.cells() {
        writeln!(w, "{},{},{}", c.cell_id, c.lat, c.lon)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("grid.csv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn four_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "cell_id,lat,lon\n0,50,10\n1,51,10\n2,50,11\n3,51,11\n");
        let grid = load_grid_definition(p).unwrap();
        assert_eq!(grid.cell_count(), 4);
        assert_eq!(grid.cell(2).unwrap().lon, 11.0);
    }

    #[test]
    fn duplicate_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "cell_id,lat,lon\n0,50,10\n1,51,10\n2,50,11\n2,51,11\n");
        assert!(matches!(load_grid_definition(p), Err(WeatherError::DuplicateCell(2))));
    }

    #[test]
    fn bad_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "cell_id,lat,lon\n0,95,10\n");
        assert!(matches!(load_grid_definition(p), Err(WeatherError::OutOfRangeCoordinate { cell: 0, .. })));
        let p = write(&dir, "cell_id,lat,lon\n0,45,-181\n");
        assert!(matches!(load_grid_definition(p), Err(WeatherError::OutOfRangeCoordinate { .. })));
    }

    #[test]
    fn malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "cell,lat,lon\n0,50,10\n");
        assert!(matches!(load_grid_definition(p), Err(WeatherError::MalformedFile { line: 1, .. })));
        let p = write(&dir, "cell_id,lat,lon\n0,50\n");
        assert!(matches!(load_grid_definition(p), Err(WeatherError::MalformedFile { line: 2, .. })));
        let p = write(&dir, "cell_id,lat,lon\n0,50,10\n2,50,10\n");
        assert!(matches!(load_grid_definition(p), Err(WeatherError::NonContiguousCells(1))));
    }
}

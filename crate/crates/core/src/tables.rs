//! CSV readers and writers for trees, weather, SWP measurements, cell medians
//! and the assembled dataset.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    label_stress, CellTable, DateCells, Feature, GridSpec, Sample, StressClass, SwpMeasurement,
    TreeRecord, WeatherRecord,
};
use crate::raster::{Geometry, Layer};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn context(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format(format!("{}: {e}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeRow {
    tree_id: String,
    block_id: String,
    treatment_bar: u8,
    x_m: f64,
    y_m: f64,
}

pub fn read_trees(path: &Path) -> Result<Vec<TreeRecord>> {
    let mut out = Vec::new();
    for row in reader(path)?.deserialize::<TreeRow>() {
        let row = row.map_err(context(path))?;
        if row.treatment_bar > 4 {
            return Err(Error::Format(format!(
                "tree {}: treatment_bar {} outside 0..=4",
                row.tree_id, row.treatment_bar
            )));
        }
        out.push(TreeRecord {
            tree_id: row.tree_id,
            block_id: row.block_id,
            treatment_bar: row.treatment_bar,
            x_m: row.x_m,
            y_m: row.y_m,
        });
    }
    Ok(out)
}

pub fn write_trees(path: &Path, trees: &[TreeRecord]) -> Result<()> {
    let mut w = writer(path)?;
    for t in trees {
        w.serialize(TreeRow {
            tree_id: t.tree_id.clone(),
            block_id: t.block_id.clone(),
            treatment_bar: t.treatment_bar,
            x_m: t.x_m,
            y_m: t.y_m,
        })?;
    }
    flush(w, path)
}

#[derive(Debug, Serialize, Deserialize)]
struct WeatherRow {
    date: NaiveDate,
    air_temp_f: f64,
    humidity_pct: f64,
    wind_mph: f64,
    vpd_kpa: Option<f64>,
}

/// A blank `vpd_kpa` is derived from temperature and humidity.
pub fn read_weather(path: &Path) -> Result<Vec<WeatherRecord>> {
    let mut out: Vec<WeatherRecord> = Vec::new();
    for row in reader(path)?.deserialize::<WeatherRow>() {
        let row = row.map_err(context(path))?;
        if out.iter().any(|w| w.date == row.date) {
            return Err(Error::Format(format!("duplicate weather date {}", row.date)));
        }
        out.push(WeatherRecord::new(
            row.date,
            row.air_temp_f,
            row.humidity_pct,
            row.wind_mph,
            row.vpd_kpa,
        )?);
    }
    Ok(out)
}

pub fn write_weather(path: &Path, weather: &[WeatherRecord]) -> Result<()> {
    let mut w = writer(path)?;
    for r in weather {
        w.serialize(WeatherRow {
            date: r.date,
            air_temp_f: r.air_temp_f,
            humidity_pct: r.humidity_pct,
            wind_mph: r.wind_mph,
            vpd_kpa: Some(r.vpd_kpa),
        })?;
    }
    flush(w, path)
}

#[derive(Debug, Serialize, Deserialize)]
struct SwpRow {
    tree_id: String,
    date: NaiveDate,
    swp_bars: f64,
}

pub fn read_swp(path: &Path) -> Result<Vec<SwpMeasurement>> {
    reader(path)?
        .deserialize::<SwpRow>()
        .map(|row| {
            let row = row.map_err(context(path))?;
            if !row.swp_bars.is_finite() {
                return Err(Error::Format(format!(
                    "non-finite swp for {} on {}",
                    row.tree_id, row.date
                )));
            }
            Ok(SwpMeasurement {
                tree_id: row.tree_id,
                date: row.date,
                swp_bars: row.swp_bars,
            })
        })
        .collect()
}

pub fn write_swp(path: &Path, rows: &[SwpMeasurement]) -> Result<()> {
    let mut w = writer(path)?;
    for m in rows {
        w.serialize(SwpRow {
            tree_id: m.tree_id.clone(),
            date: m.date,
            swp_bars: m.swp_bars,
        })?;
    }
    flush(w, path)
}

const DATASET_PREFIX: [&str; 2] = ["tree_id", "date"];
const DATASET_SUFFIX: [&str; 2] = ["swp_bars", "stress"];

pub fn write_dataset(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header: Vec<&str> = DATASET_PREFIX.to_vec();
    header.extend(Feature::ALL.iter().map(|f| f.as_str()));
    header.extend(DATASET_SUFFIX);
    w.write_record(&header)?;
    for s in samples {
        let mut record = vec![s.tree_id.clone(), s.date.to_string()];
        record.extend(s.features.iter().map(|v| v.to_string()));
        record.push(s.swp_bars.to_string());
        record.push(s.stress.to_string());
        w.write_record(&record)?;
    }
    flush(w, path)
}

pub fn read_dataset(path: &Path) -> Result<Vec<Sample>> {
    let mut r = reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut expected: Vec<&str> = DATASET_PREFIX.to_vec();
    expected.extend(Feature::ALL.iter().map(|f| f.as_str()));
    expected.extend(DATASET_SUFFIX);
    if header != expected {
        return Err(Error::Format(format!(
            "{}: dataset header {:?} does not match {:?}",
            path.display(),
            header,
            expected
        )));
    }
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(context(path))?;
        let num = |i: usize| -> Result<f64> {
            record[i].parse().map_err(|_| {
                Error::Format(format!("{}: row {}: bad number {:?}", path.display(), line + 1, &record[i]))
            })
        };
        let date: NaiveDate = record[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad date {:?}", &record[1])))?;
        let mut features = [0.0; Feature::COUNT];
        for (k, slot) in features.iter_mut().enumerate() {
            *slot = num(2 + k)?;
        }
        let swp_bars = num(2 + Feature::COUNT)?;
        let stress: StressClass = record[3 + Feature::COUNT].parse()?;
        if label_stress(swp_bars)? != stress {
            return Err(Error::Format(format!(
                "row {}: stress {stress} inconsistent with swp {swp_bars}",
                line + 1
            )));
        }
        out.push(Sample {
            tree_id: record[0].to_string(),
            date,
            features,
            swp_bars,
            stress,
        });
    }
    Ok(out)
}

/// Cell medians as `row,col,<layer>...`, NaN for cells without canopy.
pub fn write_cells(path: &Path, table: &CellTable) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["row".to_string(), "col".to_string()];
    header.extend(table.layers.iter().map(|l| l.to_string()));
    w.write_record(&header)?;
    for row in 0..table.grid.n_rows {
        for col in 0..table.grid.n_cols {
            let mut record = vec![row.to_string(), col.to_string()];
            record.extend(table.row(row, col).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
    }
    flush(w, path)
}

pub fn read_cells(path: &Path, grid: GridSpec) -> Result<CellTable> {
    let mut r = reader(path)?;
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "row" || &header[1] != "col" {
        return Err(Error::Format(format!("{}: bad cell table header", path.display())));
    }
    let layers = header
        .iter()
        .skip(2)
        .map(|s| s.parse::<Layer>())
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(grid.cell_count() * layers.len());
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(context(path))?;
        let (row, col) = (i / grid.n_cols.max(1), i % grid.n_cols.max(1));
        if record[0] != *row.to_string() || record[1] != *col.to_string() {
            return Err(Error::Format(format!(
                "{}: cell rows out of order at record {}",
                path.display(),
                i + 1
            )));
        }
        for field in record.iter().skip(2) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad cell value {field:?}")))?,
            );
        }
    }
    CellTable::from_values(grid, layers, values)
}

/// Grid placement sidecar: `key value` lines.
pub fn write_grid(path: &Path, geometry: &Geometry, grid: &GridSpec) -> Result<()> {
    let text = format!(
        "width {}\nheight {}\npixel_size_m {}\norigin_x {}\norigin_y {}\ncell_size_px {}\nn_rows {}\nn_cols {}\n",
        geometry.width,
        geometry.height,
        geometry.pixel_size_m,
        geometry.origin.0,
        geometry.origin.1,
        grid.cell_size_px,
        grid.n_rows,
        grid.n_cols
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<(Geometry, GridSpec)> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let get = |key: &str| -> Result<&str> {
        text.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|v| v.strip_prefix(' ')))
            .map(str::trim)
            .ok_or_else(|| Error::Format(format!("{}: missing {key}", path.display())))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad {key}", path.display())))
    };
    let int = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad {key}", path.display())))
    };
    let geometry = Geometry {
        width: int("width")?,
        height: int("height")?,
        pixel_size_m: num("pixel_size_m")?,
        origin: (num("origin_x")?, num("origin_y")?),
    };
    let grid = GridSpec::covering(&geometry, int("cell_size_px")?)?;
    if grid.n_rows != int("n_rows")? || grid.n_cols != int("n_cols")? {
        return Err(Error::Format(format!(
            "{}: cell counts disagree with geometry",
            path.display()
        )));
    }
    Ok((geometry, grid))
}

pub fn read_date_cells(cells_path: &Path, grid_path: &Path) -> Result<DateCells> {
    let (geometry, grid) = read_grid(grid_path)?;
    Ok(DateCells {
        geometry,
        table: read_cells(cells_path, grid)?,
    })
}

fn flush<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

//! Grid medians, tree-to-cell matching, weather fusion and dataset assembly.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use log::info;

use crate::error::{Error, Result};
use crate::raster::{Geometry, Layer, Raster};

/// Canonical model inputs, in slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Thermal,
    Ndvi,
    Ndre,
    Psri,
    AirTempF,
    VpdKpa,
    WindMph,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Thermal,
        Feature::Ndvi,
        Feature::Ndre,
        Feature::Psri,
        Feature::AirTempF,
        Feature::VpdKpa,
        Feature::WindMph,
    ];

    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Thermal => "thermal",
            Feature::Ndvi => "ndvi",
            Feature::Ndre => "ndre",
            Feature::Psri => "psri",
            Feature::AirTempF => "air_temp_f",
            Feature::VpdKpa => "vpd_kpa",
            Feature::WindMph => "wind_mph",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StressClass {
    Low,
    Moderate,
    Severe,
}

impl StressClass {
    pub const ALL: [StressClass; 3] = [StressClass::Low, StressClass::Moderate, StressClass::Severe];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        StressClass::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StressClass::Low => "low",
            StressClass::Moderate => "moderate",
            StressClass::Severe => "severe",
        }
    }
}

impl fmt::Display for StressClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StressClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StressClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown stress class {s:?}")))
    }
}

pub const LOW_STRESS_MIN_BARS: f64 = -0.4;
pub const SEVERE_STRESS_MAX_BARS: f64 = -3.0;

/// Low for `swp >= -0.4`, Severe for `swp <= -3`, Moderate in between.
pub fn label_stress(swp_bars: f64) -> Result<StressClass> {
    if !swp_bars.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite swp {swp_bars}")));
    }
    Ok(if swp_bars >= LOW_STRESS_MIN_BARS {
        StressClass::Low
    } else if swp_bars <= SEVERE_STRESS_MAX_BARS {
        StressClass::Severe
    } else {
        StressClass::Moderate
    })
}

pub fn fahrenheit_to_celsius(t: f64) -> f64 {
    (t - 32.0) * 5.0 / 9.0
}

/// Vapor pressure deficit in kPa from the Tetens saturation pressure.
pub fn compute_vpd(air_temp_f: f64, humidity_pct: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&humidity_pct) {
        return Err(Error::InvalidArgument(format!(
            "humidity {humidity_pct}% outside [0, 100]"
        )));
    }
    let t = fahrenheit_to_celsius(air_temp_f);
    let saturation = 0.6108 * (17.27 * t / (t + 237.3)).exp();
    Ok(saturation * (1.0 - humidity_pct / 100.0))
}

pub const VPD_TOLERANCE_KPA: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherRecord {
    pub date: NaiveDate,
    pub air_temp_f: f64,
    pub humidity_pct: f64,
    pub wind_mph: f64,
    pub vpd_kpa: f64,
}

impl WeatherRecord {
    /// Validates the record; a missing VPD is derived from temperature and humidity.
    pub fn new(
        date: NaiveDate,
        air_temp_f: f64,
        humidity_pct: f64,
        wind_mph: f64,
        vpd_kpa: Option<f64>,
    ) -> Result<Self> {
        if !air_temp_f.is_finite() {
            return Err(Error::Format(format!("{date}: non-finite air temperature")));
        }
        if !(wind_mph.is_finite() && wind_mph >= 0.0) {
            return Err(Error::Format(format!("{date}: wind {wind_mph} must be >= 0")));
        }
        let derived = compute_vpd(air_temp_f, humidity_pct)
            .map_err(|e| Error::Format(format!("{date}: {e}")))?;
        let vpd_kpa = match vpd_kpa {
            None => derived,
            Some(v) if (v - derived).abs() <= VPD_TOLERANCE_KPA => v,
            Some(v) => {
                return Err(Error::Format(format!(
                    "{date}: vpd {v} kPa disagrees with {derived:.4} kPa derived from temperature and humidity"
                )))
            }
        };
        Ok(WeatherRecord {
            date,
            air_temp_f,
            humidity_pct,
            wind_mph,
            vpd_kpa,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    pub tree_id: String,
    pub block_id: String,
    pub treatment_bar: u8,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwpMeasurement {
    pub tree_id: String,
    pub date: NaiveDate,
    pub swp_bars: f64,
}

/// One (tree, date) observation with features in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tree_id: String,
    pub date: NaiveDate,
    pub features: [f64; Feature::COUNT],
    pub swp_bars: f64,
    pub stress: StressClass,
}

impl Sample {
    pub fn feature(&self, f: Feature) -> f64 {
        self.features[f.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub cell_size_px: usize,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridSpec {
    /// 56 px at 8 cm is 4.48 m, about one canopy per cell.
    pub const DEFAULT_CELL_PX: usize = 56;

    pub fn covering(geometry: &Geometry, cell_size_px: usize) -> Result<Self> {
        if cell_size_px == 0 {
            return Err(Error::InvalidArgument("cell size must be positive".into()));
        }
        Ok(GridSpec {
            cell_size_px,
            n_rows: geometry.height.div_ceil(cell_size_px),
            n_cols: geometry.width.div_ceil(cell_size_px),
        })
    }

    pub fn cell_count(&self) -> usize {
        self.n_rows * self.n_cols
    }
}

/// Per-cell medians, one value per (cell, layer), cells row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    pub grid: GridSpec,
    pub layers: Vec<Layer>,
    values: Vec<f64>,
}

impl CellTable {
    pub fn from_values(grid: GridSpec, layers: Vec<Layer>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() * layers.len() {
            return Err(Error::Format(format!(
                "cell table has {} values, expected {}",
                values.len(),
                grid.cell_count() * layers.len()
            )));
        }
        Ok(CellTable {
            grid,
            layers,
            values,
        })
    }

    pub fn get(&self, row: usize, col: usize, layer: impl Into<Layer>) -> Result<f64> {
        let layer = layer.into();
        let slot = self
            .layers
            .iter()
            .position(|l| *l == layer)
            .ok_or_else(|| Error::BandMissing(layer.to_string()))?;
        Ok(self.row(row, col)[slot])
    }

    pub fn row(&self, row: usize, col: usize) -> &[f64] {
        let k = self.layers.len();
        let cell = row * self.grid.n_cols + col;
        &self.values[cell * k..(cell + 1) * k]
    }
}

/// Median of the finite values; the mean of the middle pair for even counts.
pub fn median(values: &mut [f32]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_unstable_by(f32::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    }
}

pub fn cell_median_features(raster: &Raster, grid: &GridSpec) -> Result<CellTable> {
    let g = raster.geometry();
    let expected = GridSpec::covering(g, grid.cell_size_px)?;
    if expected != *grid {
        return Err(Error::InvalidArgument(format!(
            "grid {grid:?} does not cover a {}x{} raster",
            g.width, g.height
        )));
    }
    let c = grid.cell_size_px;
    let layers: Vec<Layer> = raster.layers().collect();
    let mut values = Vec::with_capacity(grid.cell_count() * layers.len());
    let mut scratch = Vec::with_capacity(c * c);
    for cell_row in 0..grid.n_rows {
        for cell_col in 0..grid.n_cols {
            let rows = cell_row * c..((cell_row + 1) * c).min(g.height);
            let cols = cell_col * c..((cell_col + 1) * c).min(g.width);
            for (_, band) in raster.bands() {
                scratch.clear();
                for r in rows.clone() {
                    let line = &band[r * g.width..(r + 1) * g.width];
                    scratch.extend(line[cols.clone()].iter().filter(|v| v.is_finite()));
                }
                values.push(median(&mut scratch));
            }
        }
    }
    CellTable::from_values(*grid, layers, values)
}

/// Cell `(row, col)` holding a point; points on a cell edge go to the higher cell.
pub fn match_tree_to_cell(
    tree: &TreeRecord,
    geometry: &Geometry,
    grid: &GridSpec,
) -> Result<(usize, usize)> {
    let to_px = |coord: f64, origin: f64| {
        let px = (coord - origin) / geometry.pixel_size_m;
        // decimal pixel sizes (0.08 m) make exact edges land a hair below
        // the integer; snap those back so the floor rule holds
        let nearest = px.round();
        if (px - nearest).abs() < 1e-9 {
            nearest
        } else {
            px
        }
    };
    let px = to_px(tree.x_m, geometry.origin.0);
    let py = to_px(tree.y_m, geometry.origin.1);
    let inside = |p: f64, n: usize| p.is_finite() && p >= 0.0 && p < n as f64;
    if !(inside(px, geometry.width) && inside(py, geometry.height)) {
        return Err(Error::Unmatched(format!(
            "tree {} at ({}, {}) lies outside the raster extent",
            tree.tree_id, tree.x_m, tree.y_m
        )));
    }
    let c = grid.cell_size_px as f64;
    Ok(((py / c).floor() as usize, (px / c).floor() as usize))
}

/// Cell medians for one flight date, with the geometry needed to place trees.
#[derive(Debug, Clone, PartialEq)]
pub struct DateCells {
    pub geometry: Geometry,
    pub table: CellTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub samples: Vec<Sample>,
    /// Measurements dropped for a NaN feature (e.g. a cell with no canopy).
    pub dropped: usize,
    /// Measurements on excluded dates.
    pub excluded: usize,
}

/// Image-derived feature layers in canonical slot order.
pub const IMAGE_LAYERS: [(Feature, Layer); 4] = [
    (Feature::Thermal, Layer::Band(crate::raster::BandName::Thermal)),
    (Feature::Ndvi, Layer::Derived(crate::raster::DerivedLayer::Ndvi)),
    (Feature::Ndre, Layer::Derived(crate::raster::DerivedLayer::Ndre)),
    (Feature::Psri, Layer::Derived(crate::raster::DerivedLayer::Psri)),
];

/// Features for one cell on one date, image slots from the cell medians and
/// weather slots from the date's record.
pub fn cell_feature_vector(
    cells: &DateCells,
    row: usize,
    col: usize,
    weather: &WeatherRecord,
) -> Result<[f64; Feature::COUNT]> {
    let mut features = [0.0; Feature::COUNT];
    for (feature, layer) in IMAGE_LAYERS {
        features[feature.index()] = cells.table.get(row, col, layer)?;
    }
    features[Feature::AirTempF.index()] = weather.air_temp_f;
    features[Feature::VpdKpa.index()] = weather.vpd_kpa;
    features[Feature::WindMph.index()] = weather.wind_mph;
    Ok(features)
}

pub fn assemble_dataset(
    cells: &BTreeMap<NaiveDate, DateCells>,
    trees: &[TreeRecord],
    weather: &[WeatherRecord],
    measurements: &[SwpMeasurement],
    excluded_dates: &[NaiveDate],
) -> Result<Assembly> {
    let tree_index: HashMap<&str, &TreeRecord> =
        trees.iter().map(|t| (t.tree_id.as_str(), t)).collect();
    let weather_index: HashMap<NaiveDate, &WeatherRecord> =
        weather.iter().map(|w| (w.date, w)).collect();

    let mut unmatched = Vec::new();
    let mut samples = Vec::new();
    let (mut dropped, mut excluded) = (0, 0);
    for m in measurements {
        if excluded_dates.contains(&m.date) {
            excluded += 1;
            continue;
        }
        let tree = tree_index.get(m.tree_id.as_str());
        let w = weather_index.get(&m.date);
        let date_cells = cells.get(&m.date);
        let (Some(tree), Some(w), Some(date_cells)) = (tree, w, date_cells) else {
            let mut what = Vec::new();
            if tree.is_none() {
                what.push("tree");
            }
            if w.is_none() {
                what.push("weather");
            }
            if date_cells.is_none() {
                what.push("imagery");
            }
            unmatched.push(format!("{}@{} (no {})", m.tree_id, m.date, what.join("/")));
            continue;
        };
        let (row, col) = match_tree_to_cell(tree, &date_cells.geometry, &date_cells.table.grid)?;
        let features = cell_feature_vector(date_cells, row, col, w)?;
        if features.iter().any(|v| v.is_nan()) {
            dropped += 1;
            continue;
        }
        samples.push(Sample {
            tree_id: m.tree_id.clone(),
            date: m.date,
            features,
            swp_bars: m.swp_bars,
            stress: label_stress(m.swp_bars)?,
        });
    }
    if !unmatched.is_empty() {
        let shown: Vec<_> = unmatched.iter().take(10).cloned().collect();
        return Err(Error::Unmatched(format!(
            "{} measurement(s) without matching records: {}{}",
            unmatched.len(),
            shown.join(", "),
            if unmatched.len() > shown.len() { ", ..." } else { "" }
        )));
    }
    info!(
        "assembled {} samples ({} dropped for missing features, {} on excluded dates)",
        samples.len(),
        dropped,
        excluded
    );
    Ok(Assembly {
        samples,
        dropped,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{BandName, DerivedLayer};
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn sort_median(values: &[f32]) -> f64 {
        let mut v: Vec<f64> = values.iter().filter(|x| x.is_finite()).map(|&x| x as f64).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        match v.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => v[n / 2],
            n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&mut [3.0]), 3.0);
        assert_eq!(median(&mut [100.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn vpd_matches_weather_table() {
        let rows = [
            (90.55, 31.5, 3.355),
            (90.80, 32.5, 3.332),
            (83.30, 58.5, 1.615),
            (90.20, 28.7, 3.455),
            (89.54, 49.3, 2.404),
        ];
        for (t, h, vpd) in rows {
            let v = compute_vpd(t, h).unwrap();
            assert!((v - vpd).abs() <= VPD_TOLERANCE_KPA, "{t}F {h}%: {v} vs {vpd}");
        }
        assert_eq!(compute_vpd(77.0, 100.0).unwrap(), 0.0);
        assert!(compute_vpd(77.0, 101.0).is_err());
        assert!(compute_vpd(77.0, -1.0).is_err());
    }

    #[test]
    fn temperature_conversion() {
        assert_eq!(fahrenheit_to_celsius(32.0), 0.0);
        assert_eq!(fahrenheit_to_celsius(212.0), 100.0);
        assert!((fahrenheit_to_celsius(90.80) - 32.666_666_666_666_67).abs() < 1e-12);
    }

    #[test]
    fn stress_boundaries() {
        assert_eq!(label_stress(-0.4).unwrap(), StressClass::Low);
        assert_eq!(label_stress(-3.0).unwrap(), StressClass::Severe);
        assert_eq!(label_stress(-1.7).unwrap(), StressClass::Moderate);
        assert_eq!(label_stress(-0.400_000_1).unwrap(), StressClass::Moderate);
        assert_eq!(label_stress(-2.999_999_9).unwrap(), StressClass::Moderate);
        assert!(label_stress(f64::NAN).is_err());
        assert!(label_stress(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn weather_vpd_is_derived_or_checked() {
        let d = date("2017-08-22");
        let w = WeatherRecord::new(d, 83.30, 58.5, 5.0, None).unwrap();
        assert!((w.vpd_kpa - 1.615).abs() < VPD_TOLERANCE_KPA);
        assert!(WeatherRecord::new(d, 83.30, 58.5, 5.0, Some(1.615)).is_ok());
        assert!(WeatherRecord::new(d, 83.30, 58.5, 5.0, Some(2.0)).is_err());
        assert!(WeatherRecord::new(d, 83.30, 58.5, -1.0, None).is_err());
    }

    fn tree(id: &str, x: f64, y: f64) -> TreeRecord {
        TreeRecord {
            tree_id: id.into(),
            block_id: "B1".into(),
            treatment_bar: 0,
            x_m: x,
            y_m: y,
        }
    }

    #[test]
    fn tree_cell_matching() {
        let geom = Geometry::new(200, 200);
        let grid = GridSpec::covering(&geom, 56).unwrap();
        assert_eq!((grid.n_rows, grid.n_cols), (4, 4));
        assert_eq!(match_tree_to_cell(&tree("a", 0.0, 0.0), &geom, &grid).unwrap(), (0, 0));
        assert_eq!(match_tree_to_cell(&tree("b", 5.0, 0.5), &geom, &grid).unwrap(), (0, 1));
        // 4.48 m is exactly the first cell edge at 56 px * 0.08 m
        assert_eq!(match_tree_to_cell(&tree("c", 4.48, 8.96), &geom, &grid).unwrap(), (2, 1));
        assert!(match_tree_to_cell(&tree("d", 16.0, 1.0), &geom, &grid).is_err());
        assert!(match_tree_to_cell(&tree("e", -0.01, 1.0), &geom, &grid).is_err());
    }

    #[test]
    fn cell_medians_match_sort_oracle() {
        let (w, h) = (7, 5);
        let values: Vec<f32> = (0..w * h)
            .map(|i| if i % 6 == 0 { f32::NAN } else { ((i * 13) % 17) as f32 })
            .collect();
        let r = Raster::single(Geometry::new(w, h), BandName::Thermal, values.clone()).unwrap();
        let grid = GridSpec::covering(r.geometry(), 3).unwrap();
        let table = cell_median_features(&r, &grid).unwrap();
        for cr in 0..grid.n_rows {
            for cc in 0..grid.n_cols {
                let mut cell = Vec::new();
                for row in cr * 3..(cr * 3 + 3).min(h) {
                    for col in cc * 3..(cc * 3 + 3).min(w) {
                        cell.push(values[row * w + col]);
                    }
                }
                let got = table.get(cr, cc, BandName::Thermal).unwrap();
                let want = sort_median(&cell);
                assert!(got == want || (got.is_nan() && want.is_nan()));
            }
        }
    }

    #[test]
    fn empty_cell_yields_nan() {
        let r = Raster::single(Geometry::new(4, 2), BandName::Thermal, vec![f32::NAN, f32::NAN, 1.0, 2.0, f32::NAN, f32::NAN, 3.0, 4.0]).unwrap();
        let grid = GridSpec::covering(r.geometry(), 2).unwrap();
        let t = cell_median_features(&r, &grid).unwrap();
        assert!(t.get(0, 0, BandName::Thermal).unwrap().is_nan());
        assert_eq!(t.get(0, 1, BandName::Thermal).unwrap(), 2.5);
    }

    fn uniform_cells(geom: Geometry, grid: GridSpec, v: f64) -> DateCells {
        let layers: Vec<Layer> = IMAGE_LAYERS.iter().map(|(_, l)| *l).collect();
        let values = vec![v; grid.cell_count() * layers.len()];
        DateCells {
            geometry: geom,
            table: CellTable::from_values(grid, layers, values).unwrap(),
        }
    }

    #[test]
    fn assemble_one_date_of_fifty() {
        let geom = Geometry::new(560, 280);
        let grid = GridSpec::covering(&geom, 56).unwrap();
        let d = date("2017-07-24");
        let trees: Vec<_> = (0..50)
            .map(|i| tree(&format!("t{i}"), (i % 10) as f64 * 4.48 + 2.0, (i / 10) as f64 * 4.48 + 2.0))
            .collect();
        let weather = vec![WeatherRecord::new(d, 90.80, 32.5, 16.0, Some(3.332)).unwrap()];
        let swp: Vec<_> = trees
            .iter()
            .enumerate()
            .map(|(i, t)| SwpMeasurement {
                tree_id: t.tree_id.clone(),
                date: d,
                swp_bars: -0.1 * i as f64,
            })
            .collect();
        let mut cells = BTreeMap::new();
        cells.insert(d, uniform_cells(geom, grid, 0.5));
        let out = assemble_dataset(&cells, &trees, &weather, &swp, &[]).unwrap();
        assert_eq!(out.samples.len(), 50);
        assert_eq!(out.dropped, 0);
        let s = &out.samples[31];
        assert_eq!(s.feature(Feature::WindMph), 16.0);
        assert_eq!(s.feature(Feature::VpdKpa), 3.332);
        assert_eq!(s.feature(Feature::Ndre), 0.5);
        assert_eq!(s.stress, StressClass::Severe);

        // empty canopy cell for t0 drops exactly one sample
        let mut table_values: Vec<f64> = vec![0.5; grid.cell_count() * 4];
        table_values[0] = f64::NAN;
        let layers: Vec<Layer> = IMAGE_LAYERS.iter().map(|(_, l)| *l).collect();
        cells.insert(
            d,
            DateCells {
                geometry: geom,
                table: CellTable::from_values(grid, layers, table_values).unwrap(),
            },
        );
        let out = assemble_dataset(&cells, &trees, &weather, &swp, &[]).unwrap();
        assert_eq!((out.samples.len(), out.dropped), (49, 1));

        // an excluded date is skipped even without imagery or weather
        let early = date("2017-07-11");
        let mut with_early = swp.clone();
        with_early.push(SwpMeasurement { tree_id: "t1".into(), date: early, swp_bars: -1.0 });
        let out = assemble_dataset(&cells, &trees, &weather, &with_early, &[early]).unwrap();
        assert_eq!(out.samples.len() + out.dropped + out.excluded, with_early.len());
        assert_eq!(out.excluded, 1);

        // ...but reported when not excluded
        let err = assemble_dataset(&cells, &trees, &weather, &with_early, &[]).unwrap_err();
        assert!(matches!(&err, Error::Unmatched(msg) if msg.contains("t1@2017-07-11")), "{err}");

        let mut bad_tree = swp.clone();
        bad_tree[3].tree_id = "ghost".into();
        let err = assemble_dataset(&cells, &trees, &weather, &bad_tree, &[]).unwrap_err();
        assert!(matches!(&err, Error::Unmatched(msg) if msg.contains("ghost")));
    }

    #[test]
    fn feature_names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(f.as_str().parse::<Feature>().unwrap(), f);
        }
        assert!("humidity".parse::<Feature>().is_err());
        assert_eq!(IMAGE_LAYERS[1].1, Layer::Derived(DerivedLayer::Ndvi));
    }

    proptest! {
        #[test]
        fn stress_labels_are_monotone(a in -10.0f64..2.0, b in -10.0f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // higher swp never lands in a more severe class
            prop_assert!(label_stress(hi).unwrap() <= label_stress(lo).unwrap());
        }
    }
}

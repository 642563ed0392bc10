//! File-driven pipeline: run configuration and one function per stage.
//!
//! Every stage reads its inputs from the run configuration or from the
//! output directory written by earlier stages, so running the stages one by
//! one produces the same files as [`run_pipeline`].
//!
//! Output layout:
//!
//! ```text
//! masks/<date>_mask.orr        canopy mask (1 canopy, 0 other)
//! masks/<date>_thresholds.txt  DSM and NExG thresholds
//! indices/<date>.orr           masked thermal, NDVI, NDRE, PSRI
//! indices/<date>_cells.csv     per-cell medians
//! indices/<date>_grid.txt      cell grid placement
//! dataset.csv                  assembled samples
//! models/final.forest          forest fitted on all samples
//! reports/importance.csv       impurity importance ranking
//! reports/eval.csv             per-repetition and aggregate metrics
//! reports/summary.txt          readable summary of eval.csv
//! pdp/<feature>.csv            partial dependence curves
//! maps/<date>_swp.orr|csv      per-cell predictions (stress class for classification)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::features::{
    assemble_dataset, cell_feature_vector, cell_median_features, DateCells, GridSpec, Sample,
    StressClass, WeatherRecord,
};
use crate::forest::experiment::{fit_final, project, run_experiment, ModelConfig, Variant};
use crate::forest::importance::{impurity_importance, ranking};
use crate::forest::model_io::{load_forest, save_forest};
use crate::forest::pdp::{partial_dependence, DEFAULT_GRID_POINTS};
use crate::forest::{Forest, Hyperparams, Matrix, Prediction, Task};
use crate::indices::{compute_index, IndexName};
use crate::raster::{apply_mask, load_raster, save_raster, BandName, CanopyMask, DerivedLayer, Geometry, Layer, Raster};
use crate::segmentation::build_canopy_mask;
use crate::tables::{
    read_dataset, read_date_cells, read_swp, read_trees, read_weather, write_cells, write_dataset,
    write_grid,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rasters: BTreeMap<NaiveDate, PathBuf>,
    pub trees_csv: PathBuf,
    pub weather_csv: PathBuf,
    pub swp_csv: PathBuf,
    pub cell_px: usize,
    pub variant: Variant,
    pub task: Task,
    pub hyperparams: Hyperparams,
    pub repetitions: usize,
    pub cv_folds: Option<usize>,
    pub pdp_points: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub excluded_dates: Vec<NaiveDate>,
}

/// A `key = value` setting and the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub base: PathBuf,
}

/// Flag spelling (`cell-px`) and file spelling (`cell_px`) name the same key;
/// dates in `raster.<date>` keep their dashes.
fn normalize_key(key: &str) -> String {
    let key = key.trim();
    if key.starts_with("raster.") {
        key.to_string()
    } else {
        key.replace('-', "_")
    }
}

/// Parses a flat `key = value` file; `#` starts a comment.
pub fn parse_settings(text: &str, base: &Path) -> Result<Vec<Setting>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("config line {}: expected key = value", n + 1)))?;
        out.push(Setting {
            key: normalize_key(k),
            value: v.trim().to_string(),
            base: base.to_path_buf(),
        });
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

fn parse_dates(key: &str, value: &str) -> Result<Vec<NaiveDate>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" || value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

impl RunConfig {
    /// Builds a config from settings applied in order, so later ones win.
    pub fn from_settings(settings: &[Setting]) -> Result<Self> {
        let mut rasters = BTreeMap::new();
        let mut paths: BTreeMap<&str, PathBuf> = BTreeMap::new();
        let mut variant = Variant::Full;
        let mut task = Task::Regression;
        let mut cell_px = GridSpec::DEFAULT_CELL_PX;
        let mut repetitions = 10;
        let mut cv_folds = Some(10);
        let mut pdp_points = DEFAULT_GRID_POINTS;
        let mut seed = 0;
        let mut excluded_dates = crate::synthetic::default_excluded_dates();
        let (mut n_trees, mut max_depth, mut min_leaf, mut mtry) = (None, None, None, None);
        let mut out = PathBuf::from("out");

        for s in settings {
            let (k, v) = (s.key.as_str(), s.value.as_str());
            if let Some(date) = k.strip_prefix("raster.") {
                rasters.insert(parse_value::<NaiveDate>(k, date)?, s.base.join(v));
                continue;
            }
            match k {
                "trees_csv" | "weather_csv" | "swp_csv" => {
                    paths.insert(k, s.base.join(v));
                }
                "out" => out = s.base.join(v),
                "cell_px" => cell_px = parse_value(k, v)?,
                "variant" => variant = v.parse()?,
                "task" => task = v.parse()?,
                "trees" | "n_trees" => n_trees = Some(parse_value(k, v)?),
                "reps" | "repetitions" => repetitions = parse_value(k, v)?,
                "cv_folds" => cv_folds = optional(k, v)?,
                "pdp_points" => pdp_points = parse_value(k, v)?,
                "seed" => seed = parse_value(k, v)?,
                "max_depth" => max_depth = Some(optional(k, v)?),
                "min_leaf" => min_leaf = Some(parse_value(k, v)?),
                "mtry" => mtry = Some(optional(k, v)?),
                "exclude_dates" => excluded_dates = parse_dates(k, v)?,
                other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
            }
        }

        let mut hyperparams = Hyperparams::defaults(task);
        if let Some(n) = n_trees {
            hyperparams.n_trees = n;
        }
        if let Some(d) = max_depth {
            hyperparams.max_depth = d;
        }
        if let Some(m) = min_leaf {
            hyperparams.min_leaf = m;
        }
        if let Some(m) = mtry {
            hyperparams.mtry = m;
        }
        let mut take = |key: &str| {
            paths
                .remove(key)
                .ok_or_else(|| Error::InvalidArgument(format!("config is missing {key}")))
        };
        let config = RunConfig {
            trees_csv: take("trees_csv")?,
            weather_csv: take("weather_csv")?,
            swp_csv: take("swp_csv")?,
            rasters,
            cell_px,
            variant,
            task,
            hyperparams,
            repetitions,
            cv_folds,
            pdp_points,
            seed,
            out,
            excluded_dates,
        };
        if config.rasters.is_empty() {
            return Err(Error::InvalidArgument("config names no rasters".into()));
        }
        if config.cell_px == 0 || config.repetitions == 0 || config.hyperparams.n_trees == 0 {
            return Err(Error::InvalidArgument(
                "cell_px, reps and trees must be positive".into(),
            ));
        }
        Ok(config)
    }

    /// Reads a config file, then applies `overrides` (relative to the working directory).
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut settings = Vec::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let base = path.parent().unwrap_or(Path::new(""));
            settings = parse_settings(&text, base)?;
        }
        settings.extend(overrides.iter().map(|(k, v)| Setting {
            key: normalize_key(k),
            value: v.clone(),
            base: PathBuf::new(),
        }));
        Self::from_settings(&settings)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant.clone(),
            task: self.task,
            hyperparams: self.hyperparams,
            repetitions: self.repetitions,
            cv_folds: self.cv_folds,
        }
    }

    /// Fails with a missing-file error if any input named by the config is absent.
    pub fn check_inputs(&self) -> Result<()> {
        let inputs = self
            .rasters
            .values()
            .chain([&self.trees_csv, &self.weather_csv, &self.swp_csv]);
        for p in inputs {
            if !p.is_file() {
                return Err(Error::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.out.join(rel)
    }

    pub fn mask_path(&self, date: NaiveDate) -> PathBuf {
        self.path(format!("masks/{date}_mask.orr"))
    }

    pub fn index_path(&self, date: NaiveDate) -> PathBuf {
        self.path(format!("indices/{date}.orr"))
    }

    pub fn cells_path(&self, date: NaiveDate) -> PathBuf {
        self.path(format!("indices/{date}_cells.csv"))
    }

    pub fn grid_path(&self, date: NaiveDate) -> PathBuf {
        self.path(format!("indices/{date}_grid.txt"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.path("dataset.csv")
    }

    pub fn model_path(&self) -> PathBuf {
        self.path("models/final.forest")
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn save(raster: &Raster, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    save_raster(raster, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Segment,
    Indices,
    Extract,
    Dataset,
    Train,
    Eval,
    Pdp,
    PredictMap,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Segment,
        Stage::Indices,
        Stage::Extract,
        Stage::Dataset,
        Stage::Train,
        Stage::Eval,
        Stage::Pdp,
        Stage::PredictMap,
    ];
}

pub fn run_stage(stage: Stage, config: &RunConfig) -> Result<()> {
    match stage {
        Stage::Segment => segment(config),
        Stage::Indices => indices(config),
        Stage::Extract => extract(config),
        Stage::Dataset => dataset(config).map(|_| ()),
        Stage::Train => train(config).map(|_| ()),
        Stage::Eval => eval(config),
        Stage::Pdp => pdp(config),
        Stage::PredictMap => predict_map(config),
    }
}

/// Every stage in order; inputs are checked before anything is written.
pub fn run_pipeline(config: &RunConfig) -> Result<()> {
    config.check_inputs()?;
    for stage in Stage::ALL {
        log::info!("stage {stage:?}");
        run_stage(stage, config)?;
    }
    Ok(())
}

pub fn segment(config: &RunConfig) -> Result<()> {
    for (&date, path) in &config.rasters {
        let raster = load_raster(path)?;
        let seg = build_canopy_mask(&raster)?;
        log::info!("{date}: {} canopy pixels", seg.mask.count());
        save(&seg.mask.to_raster(*raster.geometry())?, &config.mask_path(date))?;
        let report = format!("{}\n{}", seg.dsm, seg.nexg);
        write_text(&config.path(format!("masks/{date}_thresholds.txt")), &report)?;
    }
    Ok(())
}

/// Thermal and the three indices, all NaN outside the canopy.
pub fn index_stack(raster: &Raster, mask: &CanopyMask) -> Result<Raster> {
    let thermal = raster.select(&[Layer::Band(BandName::Thermal)])?;
    let mut layers = vec![thermal];
    for index in [IndexName::Ndvi, IndexName::Ndre, IndexName::Psri] {
        layers.push(compute_index(raster, index)?);
    }
    let stacked = Raster::stack(&layers.iter().collect::<Vec<_>>())?;
    apply_mask(&stacked, mask)
}

pub fn indices(config: &RunConfig) -> Result<()> {
    for (&date, path) in &config.rasters {
        let raster = load_raster(path)?;
        let mask = CanopyMask::from_raster(&load_raster(&config.mask_path(date))?)?;
        save(&index_stack(&raster, &mask)?, &config.index_path(date))?;
    }
    Ok(())
}

pub fn extract(config: &RunConfig) -> Result<()> {
    for &date in config.rasters.keys() {
        let stack = load_raster(&config.index_path(date))?;
        let grid = GridSpec::covering(stack.geometry(), config.cell_px)?;
        let cells = cell_median_features(&stack, &grid)?;
        write_cells(&config.cells_path(date), &cells)?;
        write_grid(&config.grid_path(date), stack.geometry(), &grid)?;
    }
    Ok(())
}

fn load_cells(config: &RunConfig) -> Result<BTreeMap<NaiveDate, DateCells>> {
    config
        .rasters
        .keys()
        .map(|&d| Ok((d, read_date_cells(&config.cells_path(d), &config.grid_path(d))?)))
        .collect()
}

pub fn dataset(config: &RunConfig) -> Result<Vec<Sample>> {
    let cells = load_cells(config)?;
    let trees = read_trees(&config.trees_csv)?;
    let weather = read_weather(&config.weather_csv)?;
    let swp = read_swp(&config.swp_csv)?;
    let assembly = assemble_dataset(&cells, &trees, &weather, &swp, &config.excluded_dates)?;
    write_dataset(&config.dataset_path(), &assembly.samples)?;
    Ok(assembly.samples)
}

pub fn importance_csv(forest: &Forest) -> Result<String> {
    let scores = impurity_importance(forest)?;
    let mut out = String::from("rank,feature,importance\n");
    for (rank, &j) in ranking(&scores).iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", rank + 1, forest.feature_names[j], scores[j]);
    }
    Ok(out)
}

pub fn train(config: &RunConfig) -> Result<Forest> {
    let samples = read_dataset(&config.dataset_path())?;
    let forest = fit_final(&samples, &config.model_config(), config.seed)?;
    let importance = importance_csv(&forest)?;
    create_dir(&config.path("models"))?;
    save_forest(&forest, &config.model_path())?;
    write_text(&config.path("reports/importance.csv"), &importance)?;
    Ok(forest)
}

pub fn eval(config: &RunConfig) -> Result<()> {
    let samples = read_dataset(&config.dataset_path())?;
    let report = run_experiment(&samples, &config.model_config(), config.seed)?;
    write_text(&config.path("reports/eval.csv"), &report.to_csv())?;
    write_text(&config.path("reports/summary.txt"), &report.to_text())?;
    Ok(())
}

fn class_columns() -> String {
    StressClass::ALL
        .iter()
        .map(|c| format!("p_{c}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn pdp(config: &RunConfig) -> Result<()> {
    let forest = load_forest(&config.model_path())?;
    let samples = read_dataset(&config.dataset_path())?;
    let selected = config.variant.select(&samples);
    let rows = selected
        .iter()
        .map(|s| project(&s.features, &forest.feature_names))
        .collect::<Result<Vec<_>>>()?;
    let x = Matrix::from_rows(&rows)?;
    for name in &forest.feature_names {
        let curve = partial_dependence(&forest, &x, name, config.pdp_points)?;
        let mut out = match forest.task {
            Task::Regression => "value,mean_prediction\n".to_string(),
            Task::Classification => format!("value,{}\n", class_columns()),
        };
        for (g, m) in curve.grid.iter().zip(&curve.mean_prediction) {
            let cells: Vec<String> = m.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{g},{}", cells.join(","));
        }
        write_text(&config.path(format!("pdp/{name}.csv")), &out)?;
    }
    Ok(())
}

/// Per-cell predictions over the whole orchard for one date.
pub fn predict_cells(
    forest: &Forest,
    cells: &DateCells,
    weather: &WeatherRecord,
) -> Result<Vec<Option<Prediction>>> {
    let grid = cells.table.grid;
    let mut out = Vec::with_capacity(grid.cell_count());
    for row in 0..grid.n_rows {
        for col in 0..grid.n_cols {
            let features = cell_feature_vector(cells, row, col, weather)?;
            let x = project(&features, &forest.feature_names)?;
            out.push(if x.iter().all(|v| v.is_finite()) {
                Some(forest.predict(&x)?)
            } else {
                None
            });
        }
    }
    Ok(out)
}

pub fn predict_map(config: &RunConfig) -> Result<()> {
    let forest = load_forest(&config.model_path())?;
    let cells = load_cells(config)?;
    let weather: BTreeMap<NaiveDate, WeatherRecord> = read_weather(&config.weather_csv)?
        .into_iter()
        .map(|w| (w.date, w))
        .collect();
    for (date, cells) in &cells {
        if let Variant::SingleDate(d) = config.variant {
            if d != *date {
                continue;
            }
        }
        let Some(w) = weather.get(date) else {
            log::warn!("{date}: no weather record, skipping map");
            continue;
        };
        let predictions = predict_cells(&forest, cells, w)?;
        let grid = cells.table.grid;
        let g = &cells.geometry;
        let cell_m = grid.cell_size_px as f64 * g.pixel_size_m;
        let map_geometry = Geometry {
            width: grid.n_cols,
            height: grid.n_rows,
            pixel_size_m: cell_m,
            origin: g.origin,
        };
        let (layer, header) = match forest.task {
            Task::Regression => (DerivedLayer::Swp, "row,col,x_m,y_m,swp_bars\n".to_string()),
            Task::Classification => (
                DerivedLayer::StressClass,
                format!("row,col,x_m,y_m,stress,{}\n", class_columns()),
            ),
        };
        let mut csv = header;
        let mut values = Vec::with_capacity(predictions.len());
        for (i, p) in predictions.iter().enumerate() {
            let (row, col) = (i / grid.n_cols, i % grid.n_cols);
            let x = g.origin.0 + (col as f64 + 0.5) * cell_m;
            let y = g.origin.1 + (row as f64 + 0.5) * cell_m;
            let _ = write!(csv, "{row},{col},{x},{y},");
            match p {
                None => {
                    values.push(f32::NAN);
                    let blanks = match forest.task {
                        Task::Regression => "NaN".to_string(),
                        Task::Classification => ["NaN"; 4].join(","),
                    };
                    let _ = writeln!(csv, "{blanks}");
                }
                Some(Prediction::Value(v)) => {
                    values.push(*v as f32);
                    let _ = writeln!(csv, "{v}");
                }
                Some(Prediction::Probabilities(probs)) => {
                    let class = crate::forest::argmax(probs);
                    values.push(class as f32);
                    let ps: Vec<String> = probs.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(csv, "{},{}", StressClass::ALL[class], ps.join(","));
                }
            }
        }
        let raster = Raster::single(map_geometry, layer, values)?;
        save(&raster, &config.path(format!("maps/{date}_swp.orr")))?;
        write_text(&config.path(format!("maps/{date}_swp.csv")), &csv)?;
    }
    Ok(())
}

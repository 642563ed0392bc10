//! Synthetic orchard: rasters, tree tables, weather and SWP with planted structure.
//!
//! Trees sit on a regular grid, one per extraction cell, grouped into
//! blocks. Each tree gets per-date latent traits (thermal, NDVI, NDRE,
//! PSRI) that are written into the canopy reflectance by inverting the
//! index formulas, and SWP is a planted function of those traits and the
//! date's weather.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{
    label_stress, Feature, Sample, SwpMeasurement, TreeRecord, WeatherRecord,
};
use crate::raster::{save_raster, BandName, CanopyMask, Geometry, Raster};
use crate::rng::{label, stream};
use crate::tables::{write_swp, write_trees, write_weather};

/// Flight dates of the field campaign; the first one is excluded from modelling.
pub const CAMPAIGN_DATES: [(i32, u32, u32); 5] = [
    (2017, 7, 11),
    (2017, 7, 24),
    (2017, 8, 22),
    (2018, 7, 9),
    (2018, 7, 27),
];

pub fn campaign_dates() -> Vec<NaiveDate> {
    CAMPAIGN_DATES
        .iter()
        .map(|&(y, m, d)| NaiveDate::from_ymd_opt(y, m, d).expect("valid date"))
        .collect()
}

pub fn default_excluded_dates() -> Vec<NaiveDate> {
    campaign_dates()[..1].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflectance {
    pub blue: f64,
    pub green: f64,
    pub red: f64,
    pub red_edge: f64,
    pub nir: f64,
}

impl Reflectance {
    fn panchromatic(&self) -> f64 {
        (self.blue + self.green + self.red) / 3.0
    }
}

/// Uniform ranges of the per-tree, per-date latent traits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraitRanges {
    pub thermal: (f64, f64),
    pub ndvi: (f64, f64),
    pub ndre: (f64, f64),
    pub psri: (f64, f64),
}

impl Default for TraitRanges {
    fn default() -> Self {
        TraitRanges {
            thermal: (28.0, 40.0),
            ndvi: (0.6, 0.9),
            ndre: (0.2, 0.45),
            psri: (-0.05, 0.05),
        }
    }
}

/// Noon weather ranges; defaults span the campaign's observed conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherRanges {
    pub air_temp_f: (f64, f64),
    pub humidity_pct: (f64, f64),
    pub wind_mph: (f64, f64),
}

impl Default for WeatherRanges {
    fn default() -> Self {
        WeatherRanges {
            air_temp_f: (83.3, 90.8),
            humidity_pct: (28.7, 58.5),
            wind_mph: (2.2, 16.0),
        }
    }
}

/// `swp = intercept + sum(linear[f] * z_f) + thermal_vpd * z_thermal * z_vpd`,
/// with `z_f = (x_f - CENTER[f]) / SCALE[f]`, in canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedFunction {
    pub intercept: f64,
    pub linear: [f64; Feature::COUNT],
    pub thermal_vpd: f64,
}

impl PlantedFunction {
    /// Midpoints of the default trait and weather ranges.
    pub const CENTER: [f64; Feature::COUNT] = [34.0, 0.75, 0.325, 0.0, 87.05, 2.55, 9.1];
    /// Standard deviations of uniform draws over the default ranges.
    pub const SCALE: [f64; Feature::COUNT] = [3.464, 0.0866, 0.0722, 0.0289, 2.165, 0.55, 3.984];

    /// Wind-dominated, with thermal, VPD and the red-edge indices next.
    pub fn wind_dominant() -> Self {
        PlantedFunction {
            intercept: -1.9,
            linear: [-1.0, 0.5, 0.7, -0.4, -0.3, -0.7, -2.0],
            thermal_vpd: -0.3,
        }
    }

    /// Linear in the named features only, without the interaction.
    pub fn additive(terms: &[(Feature, f64)]) -> Self {
        let mut linear = [0.0; Feature::COUNT];
        for &(f, w) in terms {
            linear[f.index()] = w;
        }
        PlantedFunction {
            intercept: -1.7,
            linear,
            thermal_vpd: 0.0,
        }
    }

    pub fn standardize(feature: Feature, value: f64) -> f64 {
        let i = feature.index();
        (value - Self::CENTER[i]) / Self::SCALE[i]
    }

    /// Contribution of one feature's linear term.
    pub fn component(&self, feature: Feature, value: f64) -> f64 {
        self.linear[feature.index()] * Self::standardize(feature, value)
    }

    pub fn evaluate(&self, x: &[f64; Feature::COUNT]) -> f64 {
        let linear: f64 = Feature::ALL.iter().map(|&f| self.component(f, x[f.index()])).sum();
        let zt = Self::standardize(Feature::Thermal, x[Feature::Thermal.index()]);
        let zv = Self::standardize(Feature::VpdKpa, x[Feature::VpdKpa.index()]);
        self.intercept + linear + self.thermal_vpd * zt * zv
    }

    /// The feature with the largest absolute linear weight.
    pub fn dominant(&self) -> Feature {
        let mut best = Feature::ALL[0];
        for f in Feature::ALL {
            if self.linear[f.index()].abs() > self.linear[best.index()].abs() {
                best = f;
            }
        }
        best
    }

    fn is_finite(&self) -> bool {
        self.intercept.is_finite()
            && self.thermal_vpd.is_finite()
            && self.linear.iter().all(|c| c.is_finite())
    }
}

pub const SWP_RANGE_BARS: (f64, f64) = (-8.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub block_rows: usize,
    pub block_cols: usize,
    pub tree_rows_per_block: usize,
    pub tree_cols_per_block: usize,
    /// Tree spacing in pixels; one tree per extraction cell.
    pub cell_px: usize,
    pub pixel_size_m: f64,
    pub canopy_radius_m: f64,
    pub canopy_height_m: (f64, f64),
    pub ground_elevation_m: f64,
    pub soil: Reflectance,
    pub soil_thermal_c: f64,
    pub canopy_green: f64,
    pub canopy_red: f64,
    pub shadow: Reflectance,
    /// Fraction of each crown in shadow (high DSM, low NExG).
    pub shadow_fraction: f64,
    pub noise_std: f64,
    pub dsm_noise_std: f64,
    pub thermal_noise_std: f64,
    pub traits: TraitRanges,
    pub dates: Vec<NaiveDate>,
    pub excluded_dates: Vec<NaiveDate>,
    pub weather: WeatherRanges,
    pub planted: PlantedFunction,
    pub swp_noise_std: f64,
    pub measured_per_block: usize,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            block_rows: 5,
            block_cols: 5,
            tree_rows_per_block: 2,
            tree_cols_per_block: 2,
            cell_px: 56,
            pixel_size_m: 0.08,
            canopy_radius_m: 2.0,
            canopy_height_m: (4.5, 6.5),
            ground_elevation_m: 100.0,
            soil: Reflectance {
                blue: 0.15,
                green: 0.18,
                red: 0.22,
                red_edge: 0.28,
                nir: 0.32,
            },
            soil_thermal_c: 48.0,
            canopy_green: 0.12,
            canopy_red: 0.05,
            shadow: Reflectance {
                blue: 0.06,
                green: 0.05,
                red: 0.05,
                red_edge: 0.08,
                nir: 0.10,
            },
            shadow_fraction: 0.1,
            noise_std: 0.005,
            dsm_noise_std: 0.05,
            thermal_noise_std: 0.2,
            traits: TraitRanges::default(),
            dates: campaign_dates(),
            excluded_dates: default_excluded_dates(),
            weather: WeatherRanges::default(),
            planted: PlantedFunction::wind_dominant(),
            swp_noise_std: 0.3,
            measured_per_block: 2,
            seed: 42,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} range ({lo}, {hi}) is invalid")))
    }
}

impl SceneConfig {
    pub fn tree_rows(&self) -> usize {
        self.block_rows * self.tree_rows_per_block
    }

    pub fn tree_cols(&self) -> usize {
        self.block_cols * self.tree_cols_per_block
    }

    pub fn trees_per_block(&self) -> usize {
        self.tree_rows_per_block * self.tree_cols_per_block
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            width: self.tree_cols() * self.cell_px,
            height: self.tree_rows() * self.cell_px,
            pixel_size_m: self.pixel_size_m,
            origin: (0.0, 0.0),
        }
    }

    fn radius_px(&self) -> f64 {
        self.canopy_radius_m / self.pixel_size_m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.tree_rows() == 0 || self.tree_cols() == 0 || self.cell_px == 0 {
            return bad("scene needs at least one block, one tree and a positive cell size".into());
        }
        if !(self.pixel_size_m > 0.0 && self.pixel_size_m.is_finite()) {
            return bad(format!("pixel size {} must be positive", self.pixel_size_m));
        }
        // a disc narrower than its cell stays inside the raster and off its neighbours
        if !(self.canopy_radius_m > 0.0 && self.radius_px() < self.cell_px as f64 / 2.0) {
            return bad(format!(
                "canopy radius {} m does not fit a {} px cell",
                self.canopy_radius_m, self.cell_px
            ));
        }
        check_range("canopy height", self.canopy_height_m)?;
        if self.canopy_height_m.0 <= 0.0 {
            return bad("canopy must stand above the ground".into());
        }
        if !(0.0..1.0).contains(&self.shadow_fraction) {
            return bad(format!("shadow fraction {} must be in [0, 1)", self.shadow_fraction));
        }
        for (name, s) in [
            ("noise", self.noise_std),
            ("dsm noise", self.dsm_noise_std),
            ("thermal noise", self.thermal_noise_std),
            ("swp noise", self.swp_noise_std),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} std {s} must be finite and non-negative"));
            }
        }
        let t = &self.traits;
        check_range("thermal", t.thermal)?;
        check_range("ndvi", t.ndvi)?;
        check_range("ndre", t.ndre)?;
        check_range("psri", t.psri)?;
        if t.ndvi.0 <= -1.0 || t.ndvi.1 >= 1.0 || t.ndre.0 <= -1.0 || t.ndre.1 >= 1.0 {
            return bad("normalized-difference traits must lie strictly inside (-1, 1)".into());
        }
        check_range("air temperature", self.weather.air_temp_f)?;
        check_range("humidity", self.weather.humidity_pct)?;
        check_range("wind", self.weather.wind_mph)?;
        if self.weather.humidity_pct.0 < 0.0 || self.weather.humidity_pct.1 > 100.0 {
            return bad("humidity must lie in [0, 100]".into());
        }
        if !self.planted.is_finite() {
            return bad("planted coefficients must be finite".into());
        }
        if self.dates.is_empty() || self.dates.iter().collect::<BTreeSet<_>>().len() != self.dates.len() {
            return bad("scene needs distinct flight dates".into());
        }
        if self.measured_per_block > self.trees_per_block() {
            return bad(format!(
                "{} measured trees per block but only {} trees",
                self.measured_per_block,
                self.trees_per_block()
            ));
        }
        Ok(())
    }

    /// Every parameter of the scene as `key = value` lines.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let pair = |p: (f64, f64)| format!("{},{}", p.0, p.1);
        let refl = |r: &Reflectance| format!("{},{},{},{},{}", r.blue, r.green, r.red, r.red_edge, r.nir);
        let dates = |d: &[NaiveDate]| d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        kv("seed", self.seed.to_string());
        kv("block_rows", self.block_rows.to_string());
        kv("block_cols", self.block_cols.to_string());
        kv("tree_rows_per_block", self.tree_rows_per_block.to_string());
        kv("tree_cols_per_block", self.tree_cols_per_block.to_string());
        kv("cell_px", self.cell_px.to_string());
        kv("pixel_size_m", self.pixel_size_m.to_string());
        kv("canopy_radius_m", self.canopy_radius_m.to_string());
        kv("canopy_height_m", pair(self.canopy_height_m));
        kv("ground_elevation_m", self.ground_elevation_m.to_string());
        kv("soil_reflectance_b_g_r_re_nir", refl(&self.soil));
        kv("soil_thermal_c", self.soil_thermal_c.to_string());
        kv("canopy_green", self.canopy_green.to_string());
        kv("canopy_red", self.canopy_red.to_string());
        kv("shadow_reflectance_b_g_r_re_nir", refl(&self.shadow));
        kv("shadow_fraction", self.shadow_fraction.to_string());
        kv("noise_std", self.noise_std.to_string());
        kv("dsm_noise_std", self.dsm_noise_std.to_string());
        kv("thermal_noise_std", self.thermal_noise_std.to_string());
        kv("trait_thermal", pair(self.traits.thermal));
        kv("trait_ndvi", pair(self.traits.ndvi));
        kv("trait_ndre", pair(self.traits.ndre));
        kv("trait_psri", pair(self.traits.psri));
        kv("dates", dates(&self.dates));
        kv("excluded_dates", dates(&self.excluded_dates));
        kv("weather_air_temp_f", pair(self.weather.air_temp_f));
        kv("weather_humidity_pct", pair(self.weather.humidity_pct));
        kv("weather_wind_mph", pair(self.weather.wind_mph));
        kv("planted_intercept", self.planted.intercept.to_string());
        for f in Feature::ALL {
            kv(&format!("planted_{f}"), self.planted.linear[f.index()].to_string());
            kv(&format!("standardize_{f}"), pair((PlantedFunction::CENTER[f.index()], PlantedFunction::SCALE[f.index()])));
        }
        kv("planted_thermal_x_vpd", self.planted.thermal_vpd.to_string());
        kv("swp_noise_std", self.swp_noise_std.to_string());
        kv("swp_clamp_bars", pair(SWP_RANGE_BARS));
        kv("measured_per_block", self.measured_per_block.to_string());
        out
    }
}

fn day_key(date: NaiveDate) -> u64 {
    date.num_days_from_ce() as u64
}

/// Tree records in row-major grid order, each at the centre of its cell.
pub fn tree_layout(config: &SceneConfig) -> Vec<TreeRecord> {
    let step = config.cell_px as f64 * config.pixel_size_m;
    let (tr, tc) = (config.tree_rows_per_block, config.tree_cols_per_block);
    let mut trees = Vec::with_capacity(config.tree_rows() * config.tree_cols());
    for i in 0..config.tree_rows() {
        for j in 0..config.tree_cols() {
            let (br, bc) = (i / tr, j / tc);
            let block = br * config.block_cols + bc + 1;
            let k = (i % tr) * tc + j % tc + 1;
            trees.push(TreeRecord {
                tree_id: format!("B{block:02}-T{k:02}"),
                block_id: format!("B{block:02}"),
                // Latin-square assignment of the five deficit levels
                treatment_bar: ((br + bc) % 5) as u8,
                x_m: (j as f64 + 0.5) * step,
                y_m: (i as f64 + 0.5) * step,
            });
        }
    }
    trees
}

/// Indices (into [`tree_layout`]) of the trees measured in each block.
pub fn measured_trees(config: &SceneConfig) -> Vec<usize> {
    let mut rng = stream(config.seed, &[label::SWP]);
    let cols = config.tree_cols();
    let mut measured = Vec::new();
    for br in 0..config.block_rows {
        for bc in 0..config.block_cols {
            let mut members: Vec<usize> = (0..config.tree_rows_per_block)
                .flat_map(|r| {
                    let row = br * config.tree_rows_per_block + r;
                    (0..config.tree_cols_per_block)
                        .map(move |c| row * cols + bc * config.tree_cols_per_block + c)
                })
                .collect();
            members.shuffle(&mut rng);
            measured.extend_from_slice(&members[..config.measured_per_block]);
        }
    }
    measured.sort_unstable();
    measured
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeTraits {
    pub thermal: f64,
    pub ndvi: f64,
    pub ndre: f64,
    pub psri: f64,
}

/// Latent traits of every tree on one date.
pub fn tree_traits(config: &SceneConfig, date: NaiveDate) -> Vec<TreeTraits> {
    let mut rng = stream(config.seed, &[label::CANOPY, day_key(date)]);
    let t = &config.traits;
    let mut draw = |(lo, hi): (f64, f64)| if lo < hi { rng.random_range(lo..hi) } else { lo };
    (0..config.tree_rows() * config.tree_cols())
        .map(|_| TreeTraits {
            thermal: draw(t.thermal),
            ndvi: draw(t.ndvi),
            ndre: draw(t.ndre),
            psri: draw(t.psri),
        })
        .collect()
}

/// Noon weather per date, Latin-hypercube sampled so the dates spread over each range.
pub fn generate_weather(config: &SceneConfig) -> Result<Vec<WeatherRecord>> {
    let mut rng = stream(config.seed, &[label::WEATHER]);
    let n = config.dates.len();
    let mut column = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        strata
            .into_iter()
            .map(|s| {
                let u: f64 = rng.random();
                // rounded like station reports
                let v = lo + (hi - lo) * (s as f64 + u) / n as f64;
                (v * 100.0).round() / 100.0
            })
            .collect()
    };
    let temp = column(config.weather.air_temp_f);
    let humidity = column(config.weather.humidity_pct);
    let wind = column(config.weather.wind_mph);
    config
        .dates
        .iter()
        .enumerate()
        .map(|(i, &d)| WeatherRecord::new(d, temp[i], humidity[i], wind[i], None))
        .collect()
}

/// Canonical feature vector of a tree's latent traits on a day.
pub fn latent_features(traits: &TreeTraits, weather: &WeatherRecord) -> [f64; Feature::COUNT] {
    [
        traits.thermal,
        traits.ndvi,
        traits.ndre,
        traits.psri,
        weather.air_temp_f,
        weather.vpd_kpa,
        weather.wind_mph,
    ]
}

/// Planted SWP plus Gaussian noise for the measured trees on every date,
/// clamped to [`SWP_RANGE_BARS`].
pub fn generate_ground_truth(
    config: &SceneConfig,
    trees: &[TreeRecord],
    weather: &[WeatherRecord],
) -> Result<Vec<SwpMeasurement>> {
    config.validate()?;
    let noise = Normal::new(0.0, config.swp_noise_std)
        .map_err(|e| Error::InvalidArgument(format!("swp noise: {e}")))?;
    let measured = measured_trees(config);
    let mut out = Vec::with_capacity(weather.len() * measured.len());
    for w in weather {
        let traits = tree_traits(config, w.date);
        let mut rng = stream(config.seed, &[label::SWP, day_key(w.date)]);
        for &i in &measured {
            let x = latent_features(&traits[i], w);
            let swp = config.planted.evaluate(&x) + noise.sample(&mut rng);
            out.push(SwpMeasurement {
                tree_id: trees[i].tree_id.clone(),
                date: w.date,
                swp_bars: swp.clamp(SWP_RANGE_BARS.0, SWP_RANGE_BARS.1),
            });
        }
    }
    Ok(out)
}

/// Samples built from the latent traits, skipping image processing; the
/// oracle view of what the pipeline should recover.
pub fn planted_samples(config: &SceneConfig) -> Result<Vec<Sample>> {
    let trees = tree_layout(config);
    let weather = generate_weather(config)?;
    let truth = generate_ground_truth(config, &trees, &weather)?;
    let measured = measured_trees(config);
    let mut samples = Vec::new();
    let mut k = 0;
    for w in &weather {
        let traits = tree_traits(config, w.date);
        for &i in &measured {
            let m = &truth[k];
            k += 1;
            if config.excluded_dates.contains(&w.date) {
                continue;
            }
            samples.push(Sample {
                tree_id: m.tree_id.clone(),
                date: w.date,
                features: latent_features(&traits[i], w),
                swp_bars: m.swp_bars,
                stress: label_stress(m.swp_bars)?,
            });
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cover {
    Soil,
    Canopy(usize),
    Shadow(usize),
}

struct Layout {
    cover: Vec<Cover>,
    /// Canopy surface height above ground, zero on soil.
    height: Vec<f64>,
}

fn layout(config: &SceneConfig) -> Layout {
    let g = config.geometry();
    let mut cover = vec![Cover::Soil; g.pixel_count()];
    let mut height = vec![0.0; g.pixel_count()];
    let mut rng = stream(config.seed, &[label::SCENE]);
    let r = config.radius_px();
    let half = config.cell_px as f64 / 2.0;
    for i in 0..config.tree_rows() {
        for j in 0..config.tree_cols() {
            let tree = i * config.tree_cols() + j;
            let (h0, h1) = config.canopy_height_m;
            let h = if h0 < h1 { rng.random_range(h0..h1) } else { h0 };
            let (cy, cx) = (i * config.cell_px, j * config.cell_px);
            let mut disc = Vec::new();
            for py in cy..cy + config.cell_px {
                for px in cx..cx + config.cell_px {
                    let dy = (py - cy) as f64 + 0.5 - half;
                    let dx = (px - cx) as f64 + 0.5 - half;
                    let d = (dx * dx + dy * dy).sqrt();
                    if d <= r {
                        let idx = py * g.width + px;
                        cover[idx] = Cover::Canopy(tree);
                        // flat-topped crown sloping to 70% at the rim
                        height[idx] = h * (0.7 + 0.3 * (1.0 - (d / r).powi(2)).sqrt());
                        disc.push((dx + dy, dy, idx));
                    }
                }
            }
            // shade falls on the lower-right side of the crown
            disc.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
            let n_shadow = (config.shadow_fraction * disc.len() as f64).round() as usize;
            for &(_, _, idx) in &disc[..n_shadow] {
                cover[idx] = Cover::Shadow(tree);
            }
        }
    }
    Layout { cover, height }
}

/// One date's imagery with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub raster: Raster,
    /// Sunlit canopy pixels.
    pub truth: CanopyMask,
    /// Shaded crown pixels (high DSM, low NExG).
    pub shadow: CanopyMask,
    pub trees: Vec<TreeRecord>,
}

fn canopy_reflectance(config: &SceneConfig, t: &TreeTraits) -> Reflectance {
    let red = config.canopy_red;
    let nir = red * (1.0 + t.ndvi) / (1.0 - t.ndvi);
    let red_edge = nir * (1.0 - t.ndre) / (1.0 + t.ndre);
    Reflectance {
        blue: red - t.psri * red_edge,
        green: config.canopy_green,
        red,
        red_edge,
        nir,
    }
}

const SCENE_BANDS: [BandName; 8] = [
    BandName::Blue,
    BandName::Green,
    BandName::Panchromatic,
    BandName::Red,
    BandName::RedEdge,
    BandName::Nir,
    BandName::Thermal,
    BandName::Dsm,
];

pub fn generate_scene(config: &SceneConfig, date: NaiveDate) -> Result<Scene> {
    config.validate()?;
    let geometry = config.geometry();
    let layout = layout(config);
    let traits = tree_traits(config, date);
    let canopy: Vec<Reflectance> = traits.iter().map(|t| canopy_reflectance(config, t)).collect();

    let band_value = |band: BandName, cover: Cover, height: f64| -> f64 {
        let pick = |r: &Reflectance| match band {
            BandName::Blue => r.blue,
            BandName::Green => r.green,
            BandName::Red => r.red,
            BandName::RedEdge => r.red_edge,
            BandName::Nir => r.nir,
            BandName::Panchromatic => r.panchromatic(),
            BandName::Thermal | BandName::Dsm => unreachable!(),
        };
        match (band, cover) {
            (BandName::Dsm, _) => config.ground_elevation_m + height,
            (BandName::Thermal, Cover::Soil) => config.soil_thermal_c,
            (BandName::Thermal, Cover::Canopy(t)) => traits[t].thermal,
            (BandName::Thermal, Cover::Shadow(t)) => traits[t].thermal - 3.0,
            (_, Cover::Soil) => pick(&config.soil),
            (_, Cover::Canopy(t)) => pick(&canopy[t]),
            (_, Cover::Shadow(_)) => pick(&config.shadow),
        }
    };

    let bands: Vec<(crate::raster::Layer, Vec<f32>)> = SCENE_BANDS
        .par_iter()
        .enumerate()
        .map(|(b, &band)| {
            let std = match band {
                BandName::Dsm => config.dsm_noise_std,
                BandName::Thermal => config.thermal_noise_std,
                _ => config.noise_std,
            };
            let mut rng = stream(config.seed, &[label::NOISE, day_key(date), b as u64]);
            let noise = Normal::new(0.0, std).expect("validated noise std");
            let values = layout
                .cover
                .iter()
                .zip(&layout.height)
                .map(|(&c, &h)| {
                    let v = band_value(band, c, h);
                    (if std > 0.0 { v + noise.sample(&mut rng) } else { v }) as f32
                })
                .collect();
            (band.into(), values)
        })
        .collect();

    let flags = |keep: fn(Cover) -> bool| layout.cover.iter().map(|&c| keep(c)).collect::<Vec<bool>>();
    let truth = CanopyMask::new(geometry.width, geometry.height, flags(|c| matches!(c, Cover::Canopy(_))))?;
    let shadow = CanopyMask::new(geometry.width, geometry.height, flags(|c| matches!(c, Cover::Shadow(_))))?;
    Ok(Scene {
        raster: Raster::new(geometry, bands)?,
        truth,
        shadow,
        trees: tree_layout(config),
    })
}

/// Paths written by [`write_orchard`], relative to its directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OrchardFiles {
    pub rasters: Vec<(NaiveDate, PathBuf)>,
    pub truth_masks: Vec<(NaiveDate, PathBuf)>,
    pub trees_csv: PathBuf,
    pub weather_csv: PathBuf,
    pub swp_csv: PathBuf,
    pub manifest: PathBuf,
    pub run_config: PathBuf,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes a complete synthetic campaign plus a run config that points at it.
pub fn write_orchard(config: &SceneConfig, dir: &Path) -> Result<OrchardFiles> {
    config.validate()?;
    create_dir(&dir.join("rasters"))?;
    create_dir(&dir.join("truth"))?;
    let trees = tree_layout(config);
    let weather = generate_weather(config)?;
    let swp = generate_ground_truth(config, &trees, &weather)?;

    let mut rasters = Vec::new();
    let mut truth_masks = Vec::new();
    for &date in &config.dates {
        let scene = generate_scene(config, date)?;
        let raster = PathBuf::from(format!("rasters/{date}.orr"));
        let mask = PathBuf::from(format!("truth/{date}_mask.orr"));
        save_raster(&scene.raster, &dir.join(&raster))?;
        save_raster(&scene.truth.to_raster(*scene.raster.geometry())?, &dir.join(&mask))?;
        rasters.push((date, raster));
        truth_masks.push((date, mask));
    }

    let files = OrchardFiles {
        rasters,
        truth_masks,
        trees_csv: "trees.csv".into(),
        weather_csv: "weather.csv".into(),
        swp_csv: "swp.csv".into(),
        manifest: "manifest.txt".into(),
        run_config: "run.cfg".into(),
    };
    write_trees(&dir.join(&files.trees_csv), &trees)?;
    write_weather(&dir.join(&files.weather_csv), &weather)?;
    write_swp(&dir.join(&files.swp_csv), &swp)?;
    let manifest = dir.join(&files.manifest);
    std::fs::write(&manifest, config.manifest()).map_err(|e| Error::io(&manifest, e))?;

    let mut cfg = String::new();
    for (date, path) in &files.rasters {
        let _ = writeln!(cfg, "raster.{date} = {}", path.display());
    }
    let _ = writeln!(cfg, "trees_csv = {}", files.trees_csv.display());
    let _ = writeln!(cfg, "weather_csv = {}", files.weather_csv.display());
    let _ = writeln!(cfg, "swp_csv = {}", files.swp_csv.display());
    let _ = writeln!(cfg, "cell_px = {}", config.cell_px);
    let excluded: Vec<String> = config.excluded_dates.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(cfg, "exclude_dates = {}", excluded.join(","));
    let _ = writeln!(cfg, "seed = {}", config.seed);
    let run = dir.join(&files.run_config);
    std::fs::write(&run, cfg).map_err(|e| Error::io(&run, e))?;
    Ok(files)
}

//! Multi-band raster container, the ORR on-disk format, masking and histograms.
//!
//! Pixels are `f32`, stored band-sequential and row-major (top row first).
//! Nodata is always NaN. The ORR format is a `key value` text header plus a
//! raw little-endian payload file next to it:
//!
//! ```text
//! magic ORR1
//! width 4
//! height 3
//! pixel_size_m 0.08
//! origin_x 0
//! origin_y 0
//! bands Red,NIR
//! data scene.bin
//! ```
//!
//! Local coordinates grow with the column index (x) and the row index (y).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Camera bands plus the photogrammetric surface model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BandName {
    Blue,
    Green,
    Panchromatic,
    Red,
    RedEdge,
    Nir,
    Thermal,
    Dsm,
}

impl BandName {
    pub const ALL: [BandName; 8] = [
        BandName::Blue,
        BandName::Green,
        BandName::Panchromatic,
        BandName::Red,
        BandName::RedEdge,
        BandName::Nir,
        BandName::Thermal,
        BandName::Dsm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Blue => "Blue",
            BandName::Green => "Green",
            BandName::Panchromatic => "Panchromatic",
            BandName::Red => "Red",
            BandName::RedEdge => "RedEdge",
            BandName::Nir => "NIR",
            BandName::Thermal => "Thermal",
            BandName::Dsm => "DSM",
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BandName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::UnknownBand(s.to_string()))
    }
}

/// Single-band products computed from the sensor bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DerivedLayer {
    NExG,
    Ndvi,
    Ndre,
    Psri,
    Mask,
    Swp,
    StressClass,
}

impl DerivedLayer {
    pub const ALL: [DerivedLayer; 7] = [
        DerivedLayer::NExG,
        DerivedLayer::Ndvi,
        DerivedLayer::Ndre,
        DerivedLayer::Psri,
        DerivedLayer::Mask,
        DerivedLayer::Swp,
        DerivedLayer::StressClass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DerivedLayer::NExG => "NExG",
            DerivedLayer::Ndvi => "NDVI",
            DerivedLayer::Ndre => "NDRE",
            DerivedLayer::Psri => "PSRI",
            DerivedLayer::Mask => "Mask",
            DerivedLayer::Swp => "SWP",
            DerivedLayer::StressClass => "StressClass",
        }
    }
}

/// Name of one layer in a raster: a sensor band or a derived product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Band(BandName),
    Derived(DerivedLayer),
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Band(b) => b.as_str(),
            Layer::Derived(d) => d.as_str(),
        }
    }
}

impl From<BandName> for Layer {
    fn from(b: BandName) -> Self {
        Layer::Band(b)
    }
}

impl From<DerivedLayer> for Layer {
    fn from(d: DerivedLayer) -> Self {
        Layer::Derived(d)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(b) = s.parse::<BandName>() {
            return Ok(Layer::Band(b));
        }
        DerivedLayer::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .map(Layer::Derived)
            .ok_or_else(|| Error::UnknownBand(s.to_string()))
    }
}

/// Placement of a pixel grid in local metric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
    pub pixel_size_m: f64,
    pub origin: (f64, f64),
}

impl Geometry {
    pub const DEFAULT_PIXEL_SIZE_M: f64 = 0.08;

    pub fn new(width: usize, height: usize) -> Self {
        Geometry {
            width,
            height,
            pixel_size_m: Self::DEFAULT_PIXEL_SIZE_M,
            origin: (0.0, 0.0),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Extent in meters as `(x_min, y_min, x_max, y_max)`; max is exclusive.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.width as f64 * self.pixel_size_m,
            self.origin.1 + self.height as f64 * self.pixel_size_m,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Raster {
    geometry: Geometry,
    bands: Vec<(Layer, Vec<f32>)>,
}

impl Raster {
    pub fn new(geometry: Geometry, bands: Vec<(Layer, Vec<f32>)>) -> Result<Self> {
        if geometry.width == 0 || geometry.height == 0 {
            return Err(Error::InvalidRaster("zero width or height".into()));
        }
        if !(geometry.pixel_size_m.is_finite() && geometry.pixel_size_m > 0.0) {
            return Err(Error::InvalidRaster(format!(
                "pixel size must be positive, got {}",
                geometry.pixel_size_m
            )));
        }
        if !(geometry.origin.0.is_finite() && geometry.origin.1.is_finite()) {
            return Err(Error::InvalidRaster("non-finite origin".into()));
        }
        if bands.is_empty() {
            return Err(Error::InvalidRaster("raster has no bands".into()));
        }
        let n = geometry.pixel_count();
        for (i, (name, values)) in bands.iter().enumerate() {
            if values.len() != n {
                return Err(Error::InvalidRaster(format!(
                    "band {name} has {} values, expected {n}",
                    values.len()
                )));
            }
            if bands[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::DuplicateBand(name.to_string()));
            }
        }
        Ok(Raster { geometry, bands })
    }

    /// Convenience constructor for a single-layer raster.
    pub fn single(geometry: Geometry, layer: impl Into<Layer>, values: Vec<f32>) -> Result<Self> {
        Raster::new(geometry, vec![(layer.into(), values)])
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        self.bands.iter().map(|(l, _)| *l)
    }

    pub fn bands(&self) -> &[(Layer, Vec<f32>)] {
        &self.bands
    }

    pub fn band(&self, layer: impl Into<Layer>) -> Result<&[f32]> {
        let layer = layer.into();
        self.bands
            .iter()
            .find(|(l, _)| *l == layer)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::BandMissing(layer.to_string()))
    }

    pub fn get(&self, layer: impl Into<Layer>, row: usize, col: usize) -> Result<f32> {
        let w = self.geometry.width;
        Ok(self.band(layer)?[row * w + col])
    }

    /// Stacks the layers of several rasters sharing one geometry.
    pub fn stack(rasters: &[&Raster]) -> Result<Raster> {
        let first = rasters
            .first()
            .ok_or_else(|| Error::InvalidRaster("nothing to stack".into()))?;
        let mut bands = Vec::new();
        for r in rasters {
            if r.geometry != first.geometry {
                return Err(Error::DimensionMismatch {
                    expected: (first.width(), first.height()),
                    actual: (r.width(), r.height()),
                });
            }
            bands.extend(r.bands.iter().cloned());
        }
        Raster::new(first.geometry, bands)
    }

    /// Keeps only the named layers, in the order given.
    pub fn select(&self, layers: &[Layer]) -> Result<Raster> {
        let bands = layers
            .iter()
            .map(|l| Ok((*l, self.band(*l)?.to_vec())))
            .collect::<Result<Vec<_>>>()?;
        Raster::new(self.geometry, bands)
    }
}

/// NaN-aware equality: NaN matches NaN at the same position.
impl PartialEq for Raster {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry
            && self.bands.len() == other.bands.len()
            && self.bands.iter().zip(&other.bands).all(|((la, a), (lb, b))| {
                la == lb
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| x == y || (x.is_nan() && y.is_nan()))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanopyMask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl CanopyMask {
    pub fn new(width: usize, height: usize, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "mask has {} flags for a {width}x{height} grid",
                flags.len()
            )));
        }
        Ok(CanopyMask {
            width,
            height,
            flags,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        CanopyMask {
            width,
            height,
            flags: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Intersection over union against another mask of the same shape.
    pub fn iou(&self, other: &CanopyMask) -> Result<f64> {
        check_dims((self.width, self.height), (other.width, other.height))?;
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.flags.iter().zip(&other.flags) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }

    /// Encodes the mask as a single `Mask` layer of 1.0 / 0.0.
    pub fn to_raster(&self, geometry: Geometry) -> Result<Raster> {
        check_dims((self.width, self.height), (geometry.width, geometry.height))?;
        let values = self
            .flags
            .iter()
            .map(|&f| if f { 1.0 } else { 0.0 })
            .collect();
        Raster::single(geometry, DerivedLayer::Mask, values)
    }

    /// Decodes a mask layer; any finite non-zero value is canopy.
    pub fn from_raster(raster: &Raster) -> Result<Self> {
        let values = raster.band(DerivedLayer::Mask)?;
        let flags = values.iter().map(|v| v.is_finite() && *v != 0.0).collect();
        CanopyMask::new(raster.width(), raster.height(), flags)
    }
}

fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Sets every unflagged pixel to NaN in every band.
pub fn apply_mask(raster: &Raster, mask: &CanopyMask) -> Result<Raster> {
    check_dims(
        (raster.width(), raster.height()),
        (mask.width(), mask.height()),
    )?;
    let bands = raster
        .bands
        .iter()
        .map(|(layer, values)| {
            let masked = values
                .iter()
                .zip(mask.flags())
                .map(|(&v, &keep)| if keep { v } else { f32::NAN })
                .collect();
            (*layer, masked)
        })
        .collect();
    Raster::new(raster.geometry, bands)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bin_count + 1` ascending edges from min to max.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Equal-width histogram of the finite values; the maximum lands in the last bin.
    pub fn from_values(values: &[f32], bin_count: usize) -> Result<Self> {
        if bin_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "bin_count must be at least 2, got {bin_count}"
            )));
        }
        let (min, max) = finite_range(values)
            .ok_or_else(|| Error::Degenerate("no finite values to histogram".into()))?;
        let width = (max - min) / bin_count as f64;
        let edges = (0..=bin_count)
            .map(|k| {
                if k == bin_count {
                    max
                } else {
                    min + k as f64 * width
                }
            })
            .collect();
        let mut counts = vec![0u64; bin_count];
        for v in values.iter().filter(|v| v.is_finite()) {
            counts[bin_index(*v as f64, min, max, bin_count)] += 1;
        }
        Ok(Histogram { edges, counts })
    }
}

pub(crate) fn finite_range(values: &[f32]) -> Option<(f64, f64)> {
    values
        .iter()
        .filter(|v| v.is_finite())
        .fold(None, |acc, &v| {
            let v = v as f64;
            Some(match acc {
                None => (v, v),
                Some((lo, hi)) => (f64::min(lo, v), f64::max(hi, v)),
            })
        })
}

pub(crate) fn bin_index(v: f64, min: f64, max: f64, bin_count: usize) -> usize {
    if max <= min {
        return bin_count - 1;
    }
    let pos = ((v - min) / (max - min) * bin_count as f64).floor();
    (pos.max(0.0) as usize).min(bin_count - 1)
}

pub fn band_histogram(raster: &Raster, band: impl Into<Layer>, bin_count: usize) -> Result<Histogram> {
    Histogram::from_values(raster.band(band)?, bin_count)
}

const MAGIC: &str = "ORR1";
const CANONICAL_NAN_BITS: u32 = 0x7fc0_0000;

fn payload_path_for(header: &Path) -> (PathBuf, String) {
    let stem = header
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "raster".into());
    let name = format!("{stem}.bin");
    (header.with_file_name(&name), name)
}

/// Header text for a raster whose payload is stored as `data_name`.
pub fn encode_header(raster: &Raster, data_name: &str) -> String {
    let g = raster.geometry;
    let bands: Vec<&str> = raster.bands.iter().map(|(l, _)| l.as_str()).collect();
    format!(
        "magic {MAGIC}\nwidth {}\nheight {}\npixel_size_m {}\norigin_x {}\norigin_y {}\nbands {}\ndata {}\n",
        g.width,
        g.height,
        g.pixel_size_m,
        g.origin.0,
        g.origin.1,
        bands.join(","),
        data_name
    )
}

/// Little-endian payload; every NaN is written as the canonical quiet NaN.
pub fn encode_payload(raster: &Raster) -> Vec<u8> {
    let mut out = Vec::with_capacity(raster.bands.len() * raster.geometry.pixel_count() * 4);
    for (_, values) in &raster.bands {
        for v in values {
            let bits = if v.is_nan() {
                CANONICAL_NAN_BITS
            } else {
                v.to_bits()
            };
            out.extend_from_slice(&bits.to_le_bytes());
        }
    }
    out
}

/// Writes `path` (the header) and a `<stem>.bin` payload beside it.
pub fn save_raster(raster: &Raster, path: &Path) -> Result<()> {
    if raster.bands.is_empty() {
        return Err(Error::InvalidRaster("raster has no bands".into()));
    }
    let (payload_path, payload_name) = payload_path_for(path);
    fs::write(path, encode_header(raster, &payload_name)).map_err(|e| Error::io(path, e))?;
    fs::write(&payload_path, encode_payload(raster)).map_err(|e| Error::io(&payload_path, e))?;
    Ok(())
}

struct Header {
    geometry: Geometry,
    layers: Vec<Layer>,
    data: String,
}

fn parse_header(text: &str, path: &Path) -> Result<Header> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if first != format!("magic {MAGIC}") {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: first.strip_prefix("magic").unwrap_or(first).trim().to_string(),
        });
    }
    let (mut width, mut height, mut pixel_size, mut ox, mut oy) = (None, None, None, None, None);
    let (mut bands, mut data) = (None, None);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (key, value) = line
            .split_once(char::is_whitespace)
            .map(|(k, v)| (k, v.trim()))
            .unwrap_or((line, ""));
        match key {
            "magic" => {}
            "width" => width = Some(parse_field::<usize>(key, value)?),
            "height" => height = Some(parse_field::<usize>(key, value)?),
            "pixel_size_m" => pixel_size = Some(parse_field::<f64>(key, value)?),
            "origin_x" => ox = Some(parse_field::<f64>(key, value)?),
            "origin_y" => oy = Some(parse_field::<f64>(key, value)?),
            "bands" => bands = Some(value.to_string()),
            "data" => data = Some(value.to_string()),
            other => return Err(Error::Format(format!("unknown header key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header missing key {k:?}"));
    let mut layers = Vec::new();
    for name in bands.ok_or_else(|| missing("bands"))?.split(',') {
        let layer: Layer = name.trim().parse()?;
        if layers.contains(&layer) {
            return Err(Error::DuplicateBand(layer.to_string()));
        }
        layers.push(layer);
    }
    Ok(Header {
        geometry: Geometry {
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            pixel_size_m: pixel_size.ok_or_else(|| missing("pixel_size_m"))?,
            origin: (
                ox.ok_or_else(|| missing("origin_x"))?,
                oy.ok_or_else(|| missing("origin_y"))?,
            ),
        },
        layers,
        data: data.ok_or_else(|| missing("data"))?,
    })
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("bad value {value:?} for header key {key}")))
}

/// Reads the header only; useful when just the geometry is needed.
pub fn load_geometry(path: &Path) -> Result<Geometry> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_header(&text, path)?.geometry)
}

pub fn load_raster(path: &Path) -> Result<Raster> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&text, path)?;
    let payload_path = path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&header.data);
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let n = header.geometry.pixel_count();
    let expected = (n * header.layers.len() * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadMismatch {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let mut floats = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let bands = header
        .layers
        .into_iter()
        .map(|layer| (layer, floats.by_ref().take(n).collect()))
        .collect();
    Raster::new(header.geometry, bands)
}

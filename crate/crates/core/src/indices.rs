//! Per-pixel vegetation indices used as model features.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::{BandName, DerivedLayer, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexName {
    Ndvi,
    Ndre,
    Psri,
}

impl IndexName {
    pub const ALL: [IndexName; 3] = [IndexName::Ndvi, IndexName::Ndre, IndexName::Psri];

    pub fn layer(self) -> DerivedLayer {
        match self {
            IndexName::Ndvi => DerivedLayer::Ndvi,
            IndexName::Ndre => DerivedLayer::Ndre,
            IndexName::Psri => DerivedLayer::Psri,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.layer().as_str()
    }
}

impl fmt::Display for IndexName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndexName::ALL
            .into_iter()
            .find(|i| i.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown index {s:?}")))
    }
}

fn ratio(num: f64, den: f64) -> f32 {
    if den == 0.0 || num.is_nan() || den.is_nan() {
        f32::NAN
    } else {
        (num / den) as f32
    }
}

/// NDVI `(NIR-Red)/(NIR+Red)`, NDRE `(NIR-RedEdge)/(NIR+RedEdge)`, PSRI `(Red-Blue)/RedEdge`.
pub fn compute_index(raster: &Raster, index: IndexName) -> Result<Raster> {
    let (a, b, c) = match index {
        IndexName::Ndvi => (BandName::Nir, BandName::Red, None),
        IndexName::Ndre => (BandName::Nir, BandName::RedEdge, None),
        IndexName::Psri => (BandName::Red, BandName::Blue, Some(BandName::RedEdge)),
    };
    let a = raster.band(a)?;
    let b = raster.band(b)?;
    let values: Vec<f32> = match c {
        None => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let (x, y) = (x as f64, y as f64);
                ratio(x - y, x + y)
            })
            .collect(),
        Some(c) => {
            let c = raster.band(c)?;
            a.iter()
                .zip(b)
                .zip(c)
                .map(|((&x, &y), &z)| ratio(x as f64 - y as f64, z as f64))
                .collect()
        }
    };
    Raster::single(*raster.geometry(), index.layer(), values)
}

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::BasinLabeling;
use crate::error::{Error, Result};

/// Half-open height interval `[low, high)` with a score and colour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightBand {
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub score: f64,
    #[serde(default)]
    pub label: String,
    /// SVG fill colour.
    #[serde(default = "default_colour")]
    pub colour: String,
}

fn default_colour() -> String {
    "#999999".to_string()
}

impl HeightBand {
    pub fn new(low: f64, high: f64, score: f64, label: &str, colour: &str) -> Self {
        Self {
            low,
            high,
            score,
            label: label.to_string(),
            colour: colour.to_string(),
        }
    }

    pub fn contains(&self, h: f64) -> bool {
        h >= self.low && h < self.high
    }
}

/// Ordered, disjoint height bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreSchedule {
    bands: Vec<HeightBand>,
}

impl Default for ScoreSchedule {
    /// The Great Britain bands, scoring only the five highest.
    fn default() -> Self {
        let b = HeightBand::new;
        Self {
            bands: vec![
                b(-100.0, 0.0, 0.0, "Below sea level", "#c7e9c0"),
                b(0.0, 600.0, 0.0, "Lowland", "#c7e9c0"),
                b(600.0, 1000.0, 0.0, "Mountainous", "#a1d99b"),
                b(1000.0, 1100.0, 0.0, "Top 135 Munros", "#fdd0a2"),
                b(1100.0, 1150.0, 0.0, "Top 50 Munros", "#fdae6b"),
                b(1150.0, 1215.0, 0.0, "Top 25 Munros", "#fd8d3c"),
                b(1215.0, 1235.0, 1.0, "Wider Ben Nevis massif", "#bcbddc"),
                b(1235.0, 1297.0, 2.0, "Cairngorm plateau", "#9e9ac8"),
                b(1297.0, 1310.0, 3.0, "Ben Macdui", "#756bb1"),
                b(1310.0, 1340.0, 7.0, "On Ben Nevis", "#e6550d"),
                b(1340.0, 1346.0, 10.0, "Ben Nevis", "#a63603"),
            ],
        }
    }
}

impl ScoreSchedule {
    pub fn new(bands: Vec<HeightBand>) -> Result<Self> {
        let s = Self { bands };
        s.validate()?;
        Ok(s)
    }

    /// Score 1 from `target` upwards, 0 below.
    pub fn indicator(target: f64) -> Self {
        Self {
            bands: vec![HeightBand::new(target, f64::INFINITY, 1.0, "Target", "#a63603")],
        }
    }

    /// `count` equal bands over `[low, high)` scored 0, 1, 2, ...
    pub fn uniform(low: f64, high: f64, count: usize) -> Result<Self> {
        if count == 0 || !(high > low) {
            return Err(Error::config("bands", "need at least one band over a non-empty range"));
        }
        const PALETTE: [&str; 6] = ["#c7e9c0", "#a1d99b", "#fdae6b", "#9e9ac8", "#e6550d", "#a63603"];
        let width = (high - low) / count as f64;
        let bands = (0..count)
            .map(|i| {
                let lo = low + width * i as f64;
                let hi = if i + 1 == count { high } else { low + width * (i + 1) as f64 };
                HeightBand::new(lo, hi, i as f64, &format!("Band {i}"), PALETTE[i * PALETTE.len() / count])
            })
            .collect();
        Self::new(bands)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::config("bands", "at least one band is required"));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if b.low.is_nan() || b.high.is_nan() || b.low >= b.high {
                return Err(Error::config("bands", format!("band {i} has empty interval [{}, {})", b.low, b.high)));
            }
            if !(b.score >= 0.0 && b.score.is_finite()) {
                return Err(Error::config("bands", format!("band {i} has invalid score {}", b.score)));
            }
            if i > 0 && self.bands[i - 1].high > b.low {
                return Err(Error::config("bands", format!("band {i} overlaps or precedes band {}", i - 1)));
            }
        }
        Ok(())
    }

    pub fn bands(&self) -> &[HeightBand] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn band_of(&self, h: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.contains(h))
    }

    /// Score of the band containing `h`; heights outside every band score 0.
    pub fn score(&self, h: f64) -> f64 {
        self.band_of(h).map_or(0.0, |i| self.bands[i].score)
    }

    /// Band index for plotting: out-of-range heights go to the nearest end band.
    pub fn band_clamped(&self, h: f64) -> usize {
        if let Some(i) = self.band_of(h) {
            return i;
        }
        if h < self.bands[0].low {
            return 0;
        }
        // In a gap or above the top: the last band starting at or below h.
        self.bands.iter().rposition(|b| b.low <= h).unwrap_or(0)
    }

    /// Lower end of the highest scoring band.
    pub fn top_low(&self) -> f64 {
        self.bands.last().map_or(f64::INFINITY, |b| b.low)
    }
}

/// Basin size and proportion of each band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStatistics {
    pub basin_size: Vec<usize>,
    pub basin_proportion: Vec<f64>,
}

impl BandStatistics {
    pub fn to_csv(&self, schedule: &ScoreSchedule) -> String {
        let mut out = String::from("low,high,score,basin_size,basin_proportion\n");
        for ((b, size), p) in schedule.bands().iter().zip(&self.basin_size).zip(&self.basin_proportion) {
            writeln!(out, "{},{},{},{size},{p}", b.low, b.high, b.score).expect("writing to a String");
        }
        out
    }
}

/// Sums basin areas by the band of each basin's optimum.
pub fn band_statistics(labeling: &BasinLabeling, schedule: &ScoreSchedule) -> Result<BandStatistics> {
    let mut basin_size = vec![0usize; schedule.len()];
    for (o, &area) in labeling.optima.iter().zip(&labeling.areas) {
        let band = schedule.band_of(o.height as f64).ok_or(Error::Coverage {
            index: o.index,
            height: o.height as f64,
        })?;
        basin_size[band] += area;
    }
    let total = labeling.basin_id.len() as f64;
    let basin_proportion = basin_size.iter().map(|&s| s as f64 / total).collect();
    Ok(BandStatistics {
        basin_size,
        basin_proportion,
    })
}

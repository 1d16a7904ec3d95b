use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Band, Matrix};
use crate::{Error, Result};

pub const GRID_SIZE: usize = 9;

/// Versioned electrode table: one `name row col` entry per line, `#` comments.
pub const CANONICAL_LAYOUT: &str = include_str!("../../assets/electrode_layout_v1.txt");

/// Electrode name → (row, col) in the 9×9 scalp grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectrodeLayout {
    entries: Vec<(String, usize, usize)>,
}

impl ElectrodeLayout {
    /// The shipped 9×9 grid (row 0 = front of head) covering the 32 DEAP
    /// electrodes; AMIGOS uses a subset.
    pub fn canonical() -> Self {
        Self::parse(CANONICAL_LAYOUT).expect("shipped layout asset is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [name, row, col] => row
                    .parse::<usize>()
                    .ok()
                    .zip(col.parse::<usize>().ok())
                    .map(|(r, c)| (name.to_string(), r, c)),
                _ => None,
            };
            let entry = parsed.ok_or_else(|| {
                Error::validation(format!("layout line {}: expected `name row col`", lineno + 1))
            })?;
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<(String, usize, usize)>) -> Result<Self> {
        for (i, (name, r, c)) in entries.iter().enumerate() {
            if *r >= GRID_SIZE || *c >= GRID_SIZE {
                return Err(Error::validation(format!(
                    "electrode {name} at ({r}, {c}) is outside the {GRID_SIZE}×{GRID_SIZE} grid"
                )));
            }
            for (other, r2, c2) in &entries[..i] {
                if other == name {
                    return Err(Error::validation(format!("electrode {name} listed twice")));
                }
                if (r2, c2) == (r, c) {
                    return Err(Error::validation(format!(
                        "electrodes {other} and {name} share cell ({r}, {c})"
                    )));
                }
            }
        }
        Ok(ElectrodeLayout { entries })
    }

    pub fn position(&self, name: &str) -> Option<(usize, usize)> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|&(_, r, c)| (r, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize, usize)> {
        self.entries.iter().map(|(n, r, c)| (n.as_str(), *r, *c))
    }

    pub fn covers(&self, channels: &[String]) -> Result<()> {
        match channels.iter().find(|c| self.position(c).is_none()) {
            Some(missing) => Err(Error::UnknownChannel(missing.clone())),
            None => Ok(()),
        }
    }
}

/// Where a window came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowRef {
    pub subject: u32,
    pub trial: u32,
    pub window: u32,
}

/// One 1 s EEG window on the 9×9 grid, stored `[row][col][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoClip {
    data: Vec<f32>,
    len: usize,
    pub provenance: WindowRef,
    /// `None` for the broadband signal.
    pub band: Option<Band>,
}

impl TopoClip {
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, row: usize, col: usize, t: usize) -> f32 {
        self.data[(row * GRID_SIZE + col) * self.len + t]
    }

    pub fn band_name(&self) -> &'static str {
        self.band.map_or("original", Band::name)
    }
}

/// `clip[r][c][t] = window[ch][t]` where `layout(ch) = (r, c)`; every other
/// cell is zero.
pub fn topo_map(
    window: &Matrix,
    channels: &[String],
    layout: &ElectrodeLayout,
    provenance: WindowRef,
    band: Option<Band>,
) -> Result<TopoClip> {
    if window.rows() != channels.len() {
        return Err(Error::structural(format!(
            "window has {} rows but {} channel names",
            window.rows(),
            channels.len()
        )));
    }
    let len = window.cols();
    let mut data = vec![0.0f32; GRID_SIZE * GRID_SIZE * len];
    for (row, name) in channels.iter().enumerate() {
        let (r, c) = layout
            .position(name)
            .ok_or_else(|| Error::UnknownChannel(name.clone()))?;
        let cell = &mut data[(r * GRID_SIZE + c) * len..(r * GRID_SIZE + c + 1) * len];
        for (dst, &x) in cell.iter_mut().zip(window.row(row)) {
            if !x.is_finite() {
                return Err(Error::validation(format!("non-finite sample in channel {name}")));
            }
            *dst = x as f32;
        }
    }
    Ok(TopoClip { data, len, provenance, band })
}

/// One 1 s window of a single peripheral channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelClip {
    data: Vec<f32>,
    pub channel: String,
    pub provenance: WindowRef,
}

impl ChannelClip {
    pub fn new(data: &[f64], channel: impl Into<String>, provenance: WindowRef) -> Result<Self> {
        if data.len() != crate::WINDOW_LEN {
            return Err(Error::structural(format!(
                "channel clip needs {} samples, got {}",
                crate::WINDOW_LEN,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("non-finite sample in channel clip"));
        }
        Ok(ChannelClip {
            data: data.iter().map(|&x| x as f32).collect(),
            channel: channel.into(),
            provenance,
        })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

use core::fmt;

use crate::error::{Error, Result};

pub const N_TERRAINS: usize = 7;

/// Walking terrain. The integer encoding (0..7) is stable and used in files
/// and confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum TerrainLabel {
    EvenGround = 0,
    UnevenGround = 1,
    UpStairs = 2,
    DownStairs = 3,
    UpRamp = 4,
    DownRamp = 5,
    Turns = 6,
}

impl TerrainLabel {
    pub const ALL: [TerrainLabel; N_TERRAINS] = [
        TerrainLabel::EvenGround,
        TerrainLabel::UnevenGround,
        TerrainLabel::UpStairs,
        TerrainLabel::DownStairs,
        TerrainLabel::UpRamp,
        TerrainLabel::DownRamp,
        TerrainLabel::Turns,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or(Error::LabelOutOfRange(i))
    }

    /// Human-readable name, as used in table and CSV headers.
    pub fn name(self) -> &'static str {
        match self {
            TerrainLabel::EvenGround => "Even Ground",
            TerrainLabel::UnevenGround => "Uneven Ground",
            TerrainLabel::UpStairs => "Up Stairs",
            TerrainLabel::DownStairs => "Down Stairs",
            TerrainLabel::UpRamp => "Up Ramp",
            TerrainLabel::DownRamp => "Down Ramp",
            TerrainLabel::Turns => "Turns",
        }
    }

    /// snake_case identifier for machine-readable columns.
    pub fn key(self) -> &'static str {
        match self {
            TerrainLabel::EvenGround => "even_ground",
            TerrainLabel::UnevenGround => "uneven_ground",
            TerrainLabel::UpStairs => "up_stairs",
            TerrainLabel::DownStairs => "down_stairs",
            TerrainLabel::UpRamp => "up_ramp",
            TerrainLabel::DownRamp => "down_ramp",
            TerrainLabel::Turns => "turns",
        }
    }
}

impl fmt::Display for TerrainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sensor family of a channel; decides the preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Emg,
    Goniometer,
    Pressure,
}

impl ChannelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ChannelKind::Emg => "emg",
            ChannelKind::Goniometer => "goniometer",
            ChannelKind::Pressure => "pressure",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "emg" => Some(ChannelKind::Emg),
            "goniometer" => Some(ChannelKind::Goniometer),
            "pressure" => Some(ChannelKind::Pressure),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_is_stable() {
        for (i, t) in TerrainLabel::ALL.iter().enumerate() {
            assert_eq!(t.index(), i);
            assert_eq!(TerrainLabel::from_index(i).unwrap(), *t);
        }
        assert_eq!(TerrainLabel::from_index(7), Err(Error::LabelOutOfRange(7)));
    }

    #[test]
    fn kind_tags_round_trip() {
        for k in [ChannelKind::Emg, ChannelKind::Goniometer, ChannelKind::Pressure] {
            assert_eq!(ChannelKind::from_tag(k.tag()), Some(k));
        }
        assert_eq!(ChannelKind::from_tag("imu"), None);
    }
}

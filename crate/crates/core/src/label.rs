use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Class label. PD is the positive class and encodes as 1, HC as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "PD")]
    Pd,
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "Unknown")]
    Unknown,
}

impl Label {
    pub const CLASSES: [Label; 2] = [Label::Hc, Label::Pd];

    /// Class index used by the network and the metrics (HC = 0, PD = 1).
    pub fn index(self) -> Option<usize> {
        match self {
            Label::Hc => Some(0),
            Label::Pd => Some(1),
            Label::Unknown => None,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Hc),
            1 => Some(Label::Pd),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Pd => "PD",
            Label::Hc => "HC",
            Label::Unknown => "Unknown",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Pd => Label::Hc,
            Label::Hc => Label::Pd,
            Label::Unknown => Label::Unknown,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    /// Accepts `PD`, `PwPD` (demographics-table spelling) and `HC`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "PD" | "PwPD" => Ok(Label::Pd),
            "HC" => Ok(Label::Hc),
            other => Err(Error::Manifest(format!("unknown label `{other}`"))),
        }
    }
}

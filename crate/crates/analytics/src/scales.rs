//! Questionnaire instruments and their scoring rules.
//!
//! The Children's Hope Scale splits into two three-item subscales. Item
//! assignment follows the published instrument: odd-numbered items (1, 3, 5)
//! measure Agency and even-numbered items (2, 4, 6) measure Pathways.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ScoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Instrument {
    /// Children's Hope Scale, 6 items on a 1..=6 range.
    #[serde(rename = "CHS")]
    Chs,
    /// Transportation Scale short form, 6 items on a 1..=7 range.
    #[serde(rename = "TSSF")]
    Tssf,
    /// UMUX-Lite usability, 2 items on a 1..=7 range.
    #[serde(rename = "UMUX")]
    Umux,
}

impl Instrument {
    pub const fn item_count(self) -> usize {
        match self {
            Instrument::Chs | Instrument::Tssf => 6,
            Instrument::Umux => 2,
        }
    }

    /// Inclusive response range.
    pub const fn range(self) -> (i32, i32) {
        match self {
            Instrument::Chs => (1, 6),
            Instrument::Tssf | Instrument::Umux => (1, 7),
        }
    }

    pub fn validate(self, items: &[i32]) -> Result<(), ScoreError> {
        if items.len() != self.item_count() {
            return Err(ScoreError::WrongItemCount {
                instrument: self,
                expected: self.item_count(),
                got: items.len(),
            });
        }
        let (min, max) = self.range();
        for (i, &value) in items.iter().enumerate() {
            if !(min..=max).contains(&value) {
                return Err(ScoreError::OutOfRange {
                    instrument: self,
                    item: i + 1,
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Instrument::Chs => "CHS",
            Instrument::Tssf => "TSSF",
            Instrument::Umux => "UMUX",
        })
    }
}

impl FromStr for Instrument {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CHS" => Ok(Instrument::Chs),
            "TSSF" | "TS-SF" => Ok(Instrument::Tssf),
            "UMUX" | "UMUX-LITE" | "UMUX_LITE" => Ok(Instrument::Umux),
            other => Err(format!("unknown instrument `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Pre,
    Post,
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Timing::Pre => "pre",
            Timing::Post => "post",
        })
    }
}

impl FromStr for Timing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pre" => Ok(Timing::Pre),
            "post" => Ok(Timing::Post),
            other => Err(format!("unknown timing `{other}`")),
        }
    }
}

/// One participant's raw answers to one instrument at one time point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleResponse {
    pub participant: String,
    pub instrument: Instrument,
    pub timing: Timing,
    pub items: Vec<i32>,
}

impl ScaleResponse {
    pub fn validate(&self) -> Result<(), ScoreError> {
        self.instrument.validate(&self.items)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChsScore {
    pub total: i32,
    pub agency: i32,
    pub pathways: i32,
}

pub fn score_chs(items: &[i32]) -> Result<ChsScore, ScoreError> {
    Instrument::Chs.validate(items)?;
    let agency = items[0] + items[2] + items[4];
    let pathways = items[1] + items[3] + items[5];
    Ok(ChsScore {
        total: items.iter().sum(),
        agency,
        pathways,
    })
}

pub fn score_tssf(items: &[i32]) -> Result<f64, ScoreError> {
    Instrument::Tssf.validate(items)?;
    Ok(item_mean(items))
}

/// UMUX-Lite reported as the item mean on the native 1..=7 range.
pub fn score_umux_lite(items: &[i32]) -> Result<f64, ScoreError> {
    Instrument::Umux.validate(items)?;
    Ok(item_mean(items))
}

fn item_mean(items: &[i32]) -> f64 {
    items.iter().map(|&v| f64::from(v)).sum::<f64>() / items.len() as f64
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geoimagery::GeoPoint;

/// A survey attribute value. Missing values are absent from the record's map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Numeric(f64),
    Categorical(String),
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Numeric(v) => write!(f, "{v}"),
            AttributeValue::Categorical(s) => f.write_str(s),
        }
    }
}

/// One domestic customer: survey row joined with billing on the revenue
/// register number.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRecord {
    pub id: String,
    pub location: GeoPoint,
    pub attributes: BTreeMap<String, AttributeValue>,
    /// Rs per month.
    pub income_monthly: Option<f64>,
    /// Kilolitres per month.
    pub water_consumption: Option<f64>,
}

impl HouseholdRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Data("household id must not be empty".into()));
        }
        for (what, v) in [
            ("income_monthly", self.income_monthly),
            ("water_kl", self.water_consumption),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Data(format!(
                        "household {}: {what} must be a non-negative number, got {v}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn target(&self, target: Target) -> Option<f64> {
        match target {
            Target::Water => self.water_consumption,
            Target::Income => self.income_monthly,
        }
    }
}

/// Which ordinal outcome is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Water,
    Income,
}

impl Target {
    pub fn default_binning(self) -> super::OrdinalBinning {
        match self {
            Target::Water => super::OrdinalBinning::water(),
            Target::Income => super::OrdinalBinning::income(),
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "water" => Ok(Target::Water),
            "income" => Ok(Target::Income),
            _ => Err(Error::Config(format!("unknown target {s:?} (water|income)"))),
        }
    }
}

/// Checks that ids are unique across `records`.
pub fn check_unique_ids(records: &[HouseholdRecord]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Data(format!("duplicate household id {:?}", r.id)));
        }
    }
    Ok(())
}

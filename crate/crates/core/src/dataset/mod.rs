//! Household records, ordinal target binning and feature matrices.

mod binning;
mod encode;
mod features;
pub mod io;
mod records;
pub mod synthetic;

use crate::error::Result;

pub use binning::{bin_target, OrdinalBinning};
pub use encode::{one_hot_encode, EncodedAttribute, OneHotEncoder, UNSEEN};
pub use features::{join_features, FeatureMatrix, FeatureSource, JoinPolicy, LabeledDataset};
pub use records::{check_unique_ids, AttributeValue, HouseholdRecord, Target};
pub use synthetic::{generate_synthetic_city, SynthSpec, SyntheticCity};

/// Ids and class labels of the households that report `target`.
pub fn label_households(
    records: &[HouseholdRecord],
    target: Target,
    binning: &OrdinalBinning,
) -> Result<Vec<(String, usize)>> {
    records
        .iter()
        .filter_map(|r| r.target(target).map(|v| (r, v)))
        .map(|(r, v)| Ok((r.id.clone(), binning.bin(v)?)))
        .collect()
}

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeValue, FeatureMatrix, FeatureSource, HouseholdRecord};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const UNSEEN: &str = "__unseen__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodedAttribute {
    Numeric { name: String },
    Categorical { name: String, categories: Vec<String> },
}

/// One-hot encoding of survey attributes. Categories are learned from the
/// records passed to [`OneHotEncoder::fit`]; anything else (including a
/// missing categorical value) lands in the attribute's `__unseen__` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    attributes: Vec<EncodedAttribute>,
}

impl OneHotEncoder {
    pub fn fit(records: &[HouseholdRecord], attribute_names: &[String]) -> Result<Self> {
        let names: BTreeSet<&String> = attribute_names.iter().collect();
        let mut attributes = Vec::with_capacity(names.len());
        for name in names {
            let values: Vec<&AttributeValue> = records.iter().filter_map(|r| r.attributes.get(name)).collect();
            if values.is_empty() {
                return Err(Error::Config(format!("attribute {name:?} is absent from all records")));
            }
            if values.iter().all(|v| matches!(v, AttributeValue::Numeric(_))) {
                attributes.push(EncodedAttribute::Numeric { name: name.clone() });
            } else {
                let categories: BTreeSet<String> = values.iter().map(|v| v.to_string()).collect();
                attributes.push(EncodedAttribute::Categorical {
                    name: name.clone(),
                    categories: categories.into_iter().collect(),
                });
            }
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> &[EncodedAttribute] {
        &self.attributes
    }

    pub fn column_names(&self) -> Vec<String> {
        let p = FeatureSource::Survey.prefix();
        let mut cols = Vec::new();
        for a in &self.attributes {
            match a {
                EncodedAttribute::Numeric { name } => cols.push(format!("{p}{name}")),
                EncodedAttribute::Categorical { name, categories } => {
                    cols.extend(categories.iter().map(|c| format!("{p}{name}={c}")));
                    cols.push(format!("{p}{name}={UNSEEN}"));
                }
            }
        }
        cols
    }

    pub fn transform(&self, records: &[HouseholdRecord]) -> Result<FeatureMatrix> {
        let columns = self.column_names();
        let width = columns.len();
        let mut data = Vec::with_capacity(records.len() * width);
        for r in records {
            for a in &self.attributes {
                match a {
                    EncodedAttribute::Numeric { name } => match r.attributes.get(name) {
                        Some(AttributeValue::Numeric(v)) => data.push(*v),
                        None => data.push(f64::NAN),
                        Some(AttributeValue::Categorical(s)) => {
                            return Err(Error::Data(format!(
                                "household {}: numeric attribute {name:?} has value {s:?}",
                                r.id
                            )))
                        }
                    },
                    EncodedAttribute::Categorical { name, categories } => {
                        let hit = r
                            .attributes
                            .get(name)
                            .map(|v| v.to_string())
                            .and_then(|v| categories.binary_search(&v).ok());
                        let start = data.len();
                        data.extend(std::iter::repeat_n(0.0, categories.len() + 1));
                        data[start + hit.unwrap_or(categories.len())] = 1.0;
                    }
                }
            }
        }
        FeatureMatrix::new(
            records.iter().map(|r| r.id.clone()).collect(),
            columns,
            DenseMatrix::new(records.len(), width, data)?,
        )
    }
}

/// Fits categories on `records` and encodes them.
pub fn one_hot_encode(records: &[HouseholdRecord], attribute_names: &[String]) -> Result<FeatureMatrix> {
    OneHotEncoder::fit(records, attribute_names)?.transform(records)
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashMap};

    use super::*;
    use crate::geoimagery::GeoPoint;
    use proptest::prelude::*;

    fn rec(id: &str, attrs: &[(&str, AttributeValue)]) -> HouseholdRecord {
        HouseholdRecord {
            id: id.into(),
            location: GeoPoint::new(15.0, 75.0).unwrap(),
            attributes: attrs
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect::<BTreeMap<_, _>>(),
            income_monthly: None,
            water_consumption: None,
        }
    }

    fn cat(s: &str) -> AttributeValue {
        AttributeValue::Categorical(s.into())
    }

    #[test]
    fn two_categories_plus_unseen() {
        let recs = [rec("a", &[("roof", cat("A"))]), rec("b", &[("roof", cat("B"))])];
        let m = one_hot_encode(&recs, &["roof".into()]).unwrap();
        assert_eq!(
            m.column_names(),
            ["survey:roof=A", "survey:roof=B", "survey:roof=__unseen__"]
        );
        assert_eq!(m.values().row(0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn numeric_passes_through() {
        let recs = [rec("a", &[("size", AttributeValue::Numeric(3.5))])];
        let m = one_hot_encode(&recs, &["size".into()]).unwrap();
        assert_eq!(m.column_names(), ["survey:size"]);
        assert_eq!(m.values().row(0), [3.5]);
    }

    #[test]
    fn unseen_category_and_missing() {
        let train = [rec("a", &[("roof", cat("A"))]), rec("b", &[("roof", cat("B"))])];
        let enc = OneHotEncoder::fit(&train, &["roof".into()]).unwrap();
        let test = [rec("c", &[("roof", cat("C"))]), rec("d", &[])];
        let m = enc.transform(&test).unwrap();
        // oracle: dictionary lookup with default
        let dict: HashMap<&str, usize> = [("A", 0), ("B", 1)].into_iter().collect();
        for (i, v) in ["C", ""].iter().enumerate() {
            let hot = dict.get(v).copied().unwrap_or(2);
            for j in 0..3 {
                assert_eq!(m.values().get(i, j), if j == hot { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn absent_attribute_is_config_error() {
        let recs = [rec("a", &[("roof", cat("A"))])];
        assert!(matches!(
            one_hot_encode(&recs, &["floors".into()]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn column_order_is_attribute_then_category() {
        let recs = [
            rec("a", &[("z", cat("q")), ("b", cat("y"))]),
            rec("b", &[("z", cat("p")), ("b", cat("x"))]),
        ];
        let m = one_hot_encode(&recs, &["z".into(), "b".into()]).unwrap();
        assert_eq!(
            m.column_names(),
            [
                "survey:b=x",
                "survey:b=y",
                "survey:b=__unseen__",
                "survey:z=p",
                "survey:z=q",
                "survey:z=__unseen__"
            ]
        );
    }

    proptest! {
        #[test]
        fn categorical_blocks_sum_to_one(
            train in prop::collection::vec(prop::option::of("[a-d]"), 1..20),
            test in prop::collection::vec(prop::option::of("[a-f]"), 1..20),
        ) {
            prop_assume!(train.iter().any(Option::is_some));
            let mk = |vals: &[Option<String>]| -> Vec<HouseholdRecord> {
                vals.iter().enumerate().map(|(i, v)| match v {
                    Some(v) => rec(&format!("h{i}"), &[("c", cat(v))]),
                    None => rec(&format!("h{i}"), &[]),
                }).collect()
            };
            let enc = OneHotEncoder::fit(&mk(&train), &["c".into()]).unwrap();
            let m = enc.transform(&mk(&test)).unwrap();
            for row in m.values().iter_rows() {
                prop_assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
                prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
            }
        }
    }
}

//! The JSON interchange format for structure-constant tables.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use leibniz_core::{Algebra, Scalar};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FileError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("unsupported schema_version {0:?}, expected {SCHEMA_VERSION:?}")]
    Schema(String),
    #[error("basis has {got} labels but dim is {dim}")]
    BasisLength { dim: usize, got: usize },
    #[error("index {index} out of range for dim {dim}")]
    Index { index: usize, dim: usize },
    #[error("duplicate product ({left}, {right})")]
    Duplicate { left: usize, right: usize },
    #[error("duplicate output index {idx} in product ({left}, {right})")]
    DuplicateEntry {
        left: usize,
        right: usize,
        idx: usize,
    },
    #[error("bad integer {0:?}")]
    Integer(String),
    #[error("denominator must be positive, got {0}")]
    Denominator(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub idx: usize,
    pub num: String,
    pub den: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Product {
    pub left: usize,
    pub right: usize,
    pub value: Vec<Entry>,
}

/// Indices are 0-based; absent pairs are zero products.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub schema_version: String,
    pub dim: usize,
    pub basis: Vec<String>,
    pub products: Vec<Product>,
}

fn parse_int(s: &str) -> Result<BigInt, FileError> {
    s.parse::<BigInt>()
        .map_err(|_| FileError::Integer(s.to_string()))
}

impl AlgebraFile {
    pub fn from_algebra(a: &Algebra) -> AlgebraFile {
        let products = a
            .nonzero_products()
            .into_iter()
            .map(|(left, right)| Product {
                left,
                right,
                value: a
                    .product(left, right)
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(idx, c)| Entry {
                        idx,
                        num: c.numer().to_string(),
                        den: c.denom().to_string(),
                    })
                    .collect(),
            })
            .collect();
        AlgebraFile {
            schema_version: SCHEMA_VERSION.to_string(),
            dim: a.dim(),
            basis: a.labels().to_vec(),
            products,
        }
    }

    pub fn parse(text: &str) -> Result<AlgebraFile, FileError> {
        serde_json::from_str(text).map_err(|e| FileError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn to_algebra(&self) -> Result<Algebra, FileError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(FileError::Schema(self.schema_version.clone()));
        }
        let n = self.dim;
        if self.basis.len() != n {
            return Err(FileError::BasisLength {
                dim: n,
                got: self.basis.len(),
            });
        }
        let check = |index: usize| {
            if index < n {
                Ok(())
            } else {
                Err(FileError::Index { index, dim: n })
            }
        };
        let mut seen = BTreeSet::new();
        let mut a = Algebra::zero(n).with_labels(self.basis.clone());
        for p in &self.products {
            check(p.left)?;
            check(p.right)?;
            if !seen.insert((p.left, p.right)) {
                return Err(FileError::Duplicate {
                    left: p.left,
                    right: p.right,
                });
            }
            let mut outputs = BTreeSet::new();
            for e in &p.value {
                check(e.idx)?;
                if !outputs.insert(e.idx) {
                    return Err(FileError::DuplicateEntry {
                        left: p.left,
                        right: p.right,
                        idx: e.idx,
                    });
                }
                let den = parse_int(&e.den)?;
                if !den.is_positive() {
                    return Err(FileError::Denominator(e.den.clone()));
                }
                a.add_coeff(p.left, p.right, e.idx, Scalar::new(parse_int(&e.num)?, den));
            }
        }
        Ok(a)
    }
}

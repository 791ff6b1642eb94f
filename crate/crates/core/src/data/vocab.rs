//! Token layout: each column owns a contiguous id range.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{discretize, undiscretize, ColumnKind, DataError, Schema, Value};

/// Per-column token ranges plus one begin-of-row token.
///
/// In the default layout ranges are disjoint, so a token id identifies its
/// column. In shared layout every column maps onto the same range; this is
/// used for character and Dyck tables whose columns share one alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocab {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
    bins: usize,
    shared: bool,
}

impl TokenVocab {
    /// Disjoint layout; numeric columns get `bins` tokens each.
    pub fn new(schema: &Schema, bins: usize) -> Result<Self, DataError> {
        if bins == 0 {
            return Err(DataError::InvalidSchema("bin count must be positive".into()));
        }
        let sizes: Vec<usize> = schema
            .columns()
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Categorical { categories } => categories.len(),
                ColumnKind::Numeric { .. } => bins,
            })
            .collect();
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &s in &sizes {
            offsets.push(total);
            total += s;
        }
        Ok(Self {
            sizes,
            offsets,
            total,
            bins,
            shared: false,
        })
    }

    /// Shared layout. Every column must be categorical with the same
    /// category list.
    pub fn shared(schema: &Schema) -> Result<Self, DataError> {
        let first = schema.columns()[0].categories().ok_or_else(|| {
            DataError::InvalidSchema("shared vocabulary needs categorical columns".into())
        })?;
        if schema
            .columns()
            .iter()
            .any(|c| c.categories() != Some(first))
        {
            return Err(DataError::InvalidSchema(
                "shared vocabulary needs identical category lists".into(),
            ));
        }
        let n = first.len();
        Ok(Self {
            sizes: vec![n; schema.len()],
            offsets: vec![0; schema.len()],
            total: n,
            bins: super::DEFAULT_BINS,
            shared: true,
        })
    }

    pub fn num_columns(&self) -> usize {
        self.sizes.len()
    }

    /// |V|: column tokens only, begin-of-row excluded.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Id of the begin-of-row token, `|V|`.
    pub fn bos(&self) -> u32 {
        self.total as u32
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    pub fn size(&self, col: usize) -> usize {
        self.sizes[col]
    }

    pub fn range(&self, col: usize) -> Range<usize> {
        self.offsets[col]..self.offsets[col] + self.sizes[col]
    }

    pub fn ranges(&self) -> Vec<(usize, usize)> {
        (0..self.sizes.len())
            .map(|c| (self.offsets[c], self.offsets[c] + self.sizes[c]))
            .collect()
    }

    pub fn encode_value(&self, schema: &Schema, col: usize, value: Value) -> Result<u32, DataError> {
        let spec = &schema.columns()[col];
        let local = match (&spec.kind, value) {
            (ColumnKind::Categorical { categories }, Value::Category(c))
                if (c as usize) < categories.len() =>
            {
                c as usize
            }
            (ColumnKind::Numeric { min, max, .. }, Value::Number(x)) => {
                discretize(x, *min, *max, self.bins)?
            }
            _ => {
                return Err(DataError::TypeMismatch {
                    column: spec.name.clone(),
                })
            }
        };
        Ok((self.offsets[col] + local) as u32)
    }

    pub fn decode_value(&self, schema: &Schema, col: usize, token: u32) -> Result<Value, DataError> {
        let range = self.range(col);
        let t = token as usize;
        if !range.contains(&t) {
            return Err(DataError::TokenOutOfRange {
                column: schema.columns()[col].name.clone(),
                token,
            });
        }
        let local = t - range.start;
        Ok(match &schema.columns()[col].kind {
            ColumnKind::Categorical { .. } => Value::Category(local as u32),
            ColumnKind::Numeric {
                min,
                max,
                integer_valued,
            } => Value::Number(undiscretize(local, *min, *max, self.bins, *integer_valued)?),
        })
    }

    pub fn encode_row(&self, schema: &Schema, row: &[Value]) -> Result<Vec<u32>, DataError> {
        self.check_width(row.len())?;
        row.iter()
            .enumerate()
            .map(|(col, &v)| self.encode_value(schema, col, v))
            .collect()
    }

    pub fn decode_row(&self, schema: &Schema, tokens: &[u32]) -> Result<Vec<Value>, DataError> {
        self.check_width(tokens.len())?;
        tokens
            .iter()
            .enumerate()
            .map(|(col, &t)| self.decode_value(schema, col, t))
            .collect()
    }

    fn check_width(&self, got: usize) -> Result<(), DataError> {
        if got != self.sizes.len() {
            return Err(DataError::RowWidth {
                expected: self.sizes.len(),
                got,
            });
        }
        Ok(())
    }
}

/// Order in which columns are presented to the autoregressive model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnOrder {
    #[default]
    Given,
    ByCardinalityDesc,
    ByCardinalityAsc,
}

impl ColumnOrder {
    /// `perm[j]` is the schema column placed at model position `j`. Ties keep
    /// schema order.
    pub fn permutation(self, vocab: &TokenVocab) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..vocab.num_columns()).collect();
        match self {
            ColumnOrder::Given => {}
            ColumnOrder::ByCardinalityDesc => perm.sort_by_key(|&c| std::cmp::Reverse(vocab.size(c))),
            ColumnOrder::ByCardinalityAsc => perm.sort_by_key(|&c| vocab.size(c)),
        }
        perm
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::ColumnSpec;

    fn mixed() -> Schema {
        Schema::new(vec![
            ColumnSpec::categorical("fruit", &["a", "b"]).unwrap(),
            ColumnSpec::numeric("score", 0.0, 100.0, false).unwrap(),
            ColumnSpec::categorical("colour", &["r", "g", "b"]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn layout_is_disjoint_and_contiguous() {
        let v = TokenVocab::new(&mixed(), 100).unwrap();
        assert_eq!(v.ranges(), vec![(0, 2), (2, 102), (102, 105)]);
        assert_eq!(v.total(), 105);
        assert_eq!(v.bos(), 105);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let (a, b) = (v.range(i), v.range(j));
                    assert!(a.end <= b.start || b.end <= a.start);
                }
            }
        }
    }

    #[test]
    fn single_categorical_roundtrip() {
        let schema = Schema::new(vec![ColumnSpec::categorical("x", &["a", "b"]).unwrap()]).unwrap();
        let v = TokenVocab::new(&schema, 100).unwrap();
        let t = v.encode_row(&schema, &[Value::Category(1)]).unwrap();
        assert_eq!(t, vec![1]);
        assert_eq!(v.decode_row(&schema, &t).unwrap(), vec![Value::Category(1)]);
    }

    #[test]
    fn numeric_encodes_to_bin_midpoint() {
        let s = mixed();
        let v = TokenVocab::new(&s, 100).unwrap();
        let row = [Value::Category(0), Value::Number(37.2), Value::Category(2)];
        let t = v.encode_row(&s, &row).unwrap();
        assert_eq!(t, vec![0, 2 + 37, 104]);
        let back = v.decode_row(&s, &t).unwrap();
        assert_eq!(back[1], Value::Number(37.5));
        assert_eq!(back[0], row[0]);
        assert_eq!(back[2], row[2]);
    }

    #[test]
    fn decode_rejects_foreign_tokens() {
        let s = mixed();
        let v = TokenVocab::new(&s, 100).unwrap();
        assert!(matches!(
            v.decode_row(&s, &[5, 2, 102]),
            Err(DataError::TokenOutOfRange { .. })
        ));
        assert!(v.decode_row(&s, &[0, 2]).is_err());
    }

    #[test]
    fn shared_layout() {
        let s = Schema::new(vec![
            ColumnSpec::categorical("c1", &["(", ")"]).unwrap(),
            ColumnSpec::categorical("c2", &["(", ")"]).unwrap(),
        ])
        .unwrap();
        let v = TokenVocab::shared(&s).unwrap();
        assert_eq!(v.ranges(), vec![(0, 2), (0, 2)]);
        assert_eq!(v.bos(), 2);
        assert!(TokenVocab::shared(&mixed()).is_err());
    }

    #[test]
    fn column_orders() {
        let v = TokenVocab::new(&mixed(), 100).unwrap();
        assert_eq!(ColumnOrder::Given.permutation(&v), vec![0, 1, 2]);
        assert_eq!(ColumnOrder::ByCardinalityDesc.permutation(&v), vec![1, 2, 0]);
        assert_eq!(ColumnOrder::ByCardinalityAsc.permutation(&v), vec![0, 2, 1]);
    }

    proptest! {
        #[test]
        fn roundtrip_categorical_exact_numeric_half_bin(
            f in 0u32..2, c in 0u32..3, x in 0.0f64..=100.0
        ) {
            let s = mixed();
            let v = TokenVocab::new(&s, 100).unwrap();
            let row = [Value::Category(f), Value::Number(x), Value::Category(c)];
            let back = v.decode_row(&s, &v.encode_row(&s, &row).unwrap()).unwrap();
            prop_assert_eq!(back[0], row[0]);
            prop_assert_eq!(back[2], row[2]);
            prop_assert!((back[1].as_number().unwrap() - x).abs() <= 0.5 + 1e-9);
        }
    }
}

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DataError;

/// Public metadata for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawColumn", into = "RawColumn")]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Categorical { categories: Vec<String> },
    Numeric { min: f64, max: f64, integer_valued: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindTag {
    Categorical,
    Numeric,
}

/// Wire form of a column: `{name, kind, min?, max?, integer_valued?, categories?}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    integer_valued: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

impl TryFrom<RawColumn> for ColumnSpec {
    type Error = DataError;

    fn try_from(raw: RawColumn) -> Result<Self, DataError> {
        let kind = match raw.kind {
            KindTag::Categorical => {
                let categories = raw.categories.unwrap_or_default();
                ColumnKind::Categorical { categories }
            }
            KindTag::Numeric => {
                let (Some(min), Some(max)) = (raw.min, raw.max) else {
                    return Err(DataError::InvalidSchema(format!(
                        "numeric column '{}' needs min and max",
                        raw.name
                    )));
                };
                ColumnKind::Numeric {
                    min,
                    max,
                    integer_valued: raw.integer_valued.unwrap_or(false),
                }
            }
        };
        let spec = ColumnSpec {
            name: raw.name,
            kind,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ColumnSpec> for RawColumn {
    fn from(spec: ColumnSpec) -> Self {
        match spec.kind {
            ColumnKind::Categorical { categories } => RawColumn {
                name: spec.name,
                kind: KindTag::Categorical,
                min: None,
                max: None,
                integer_valued: None,
                categories: Some(categories),
            },
            ColumnKind::Numeric {
                min,
                max,
                integer_valued,
            } => RawColumn {
                name: spec.name,
                kind: KindTag::Numeric,
                min: Some(min),
                max: Some(max),
                integer_valued: Some(integer_valued),
                categories: None,
            },
        }
    }
}

impl ColumnSpec {
    pub fn categorical(name: impl Into<String>, categories: &[&str]) -> Result<Self, DataError> {
        let spec = ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical {
                categories: categories.iter().map(|c| c.to_string()).collect(),
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn numeric(
        name: impl Into<String>,
        min: f64,
        max: f64,
        integer_valued: bool,
    ) -> Result<Self, DataError> {
        let spec = ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric {
                min,
                max,
                integer_valued,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), DataError> {
        match &self.kind {
            ColumnKind::Categorical { categories } => {
                if categories.is_empty() {
                    return Err(DataError::InvalidSchema(format!(
                        "categorical column '{}' has no categories",
                        self.name
                    )));
                }
                let mut seen = HashSet::new();
                if let Some(dup) = categories.iter().find(|c| !seen.insert(c.as_str())) {
                    return Err(DataError::InvalidSchema(format!(
                        "column '{}' lists category '{dup}' twice",
                        self.name
                    )));
                }
            }
            ColumnKind::Numeric { min, max, .. } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(DataError::InvalidSchema(format!(
                        "numeric column '{}' needs finite min < max",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric { .. })
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { categories } => Some(categories),
            ColumnKind::Numeric { .. } => None,
        }
    }
}

/// Ordered column metadata. Serialized as a JSON array of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<Vec<ColumnSpec>> for Schema {
    type Error = DataError;

    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self, DataError> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<ColumnSpec> {
    fn from(schema: Schema) -> Self {
        schema.columns
    }
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self, DataError> {
        if columns.is_empty() {
            return Err(DataError::InvalidSchema("schema has no columns".into()));
        }
        let mut names = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !names.insert(c.name.as_str())) {
            return Err(DataError::InvalidSchema(format!(
                "duplicate column name '{}'",
                dup.name
            )));
        }
        Ok(Self { columns })
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::InvalidSchema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schema serializes")
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

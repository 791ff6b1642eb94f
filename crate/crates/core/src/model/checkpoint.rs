//! Checkpoint file: one line of JSON header, then every parameter as
//! little-endian f32 in declared order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError};
use crate::autodiff::{ParamSpec, ParamStore, Real};
use crate::data::{Schema, Table, TokenVocab};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub schema: Schema,
    pub schema_hash: String,
    pub vocab: TokenVocab,
    /// `column_order[j]` is the schema column at model position `j`.
    pub column_order: Vec<usize>,
    pub params: Vec<ParamSpec>,
}

/// A model together with everything needed to decode its samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ParamStore<f32>,
}

/// Token ranges in model order.
pub fn layout_for(vocab: &TokenVocab, column_order: &[usize]) -> Vec<(usize, usize)> {
    let ranges = vocab.ranges();
    column_order.iter().map(|&c| ranges[c]).collect()
}

impl Checkpoint {
    pub fn new<T: Real>(
        model: &Model<T>,
        schema: &Schema,
        vocab: &TokenVocab,
        column_order: &[usize],
    ) -> Result<Self, ModelError> {
        if layout_for(vocab, column_order) != model.layout() {
            return Err(ModelError::Checkpoint(
                "model layout does not match vocabulary and column order".into(),
            ));
        }
        let params: ParamStore<f32> = model.params().cast();
        Ok(Self {
            header: CheckpointHeader {
                format_version: CHECKPOINT_VERSION,
                config: *model.config(),
                schema: schema.clone(),
                schema_hash: schema.hash(),
                vocab: vocab.clone(),
                column_order: column_order.to_vec(),
                params: params.specs().to_vec(),
            },
            params,
        })
    }

    pub fn model<T: Real>(&self) -> Result<Model<T>, ModelError> {
        let layout = layout_for(&self.header.vocab, &self.header.column_order);
        Model::from_params(self.header.config, layout, self.params.cast())
    }

    /// Decodes sampled rows given in model order back to schema order.
    pub fn decode(&self, rows: &[Vec<u32>]) -> Result<Table, ModelError> {
        let order = &self.header.column_order;
        let mut table = Table::default();
        for row in rows {
            let mut schema_row = vec![0u32; row.len()];
            for (pos, &col) in order.iter().enumerate() {
                schema_row[col] = row[pos];
            }
            table
                .rows
                .push(self.header.vocab.decode_row(&self.header.schema, &schema_row)?);
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        let header = serde_json::to_string(&self.header)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        let mut bytes = Vec::with_capacity(self.params.len() * 4);
        for &x in self.params.flat() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, ModelError> {
        let mut r = BufReader::new(r);
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line)?;
        let header: CheckpointHeader = serde_json::from_slice(&line)
            .map_err(|e| ModelError::Checkpoint(format!("bad header: {e}")))?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        if header.schema.hash() != header.schema_hash {
            return Err(ModelError::SchemaHashMismatch);
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let total: usize = header.params.iter().map(ParamSpec::numel).sum();
        if bytes.len() != total * 4 {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameter bytes, found {}",
                total * 4,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = ParamStore::from_parts(header.params.clone(), data)?;
        let ckpt = Self { header, params };
        // Reject headers whose layout cannot drive the model.
        ckpt.model::<f32>()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::read(std::fs::File::open(path)?)
    }
}

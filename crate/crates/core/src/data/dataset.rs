use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Schema, Table, TokenVocab};

const CACHE_MAGIC: &[u8; 4] = b"DPTB";
const CACHE_VERSION: u32 = 1;

/// Integer-encoded rows, `n × k` token ids stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncodedDataset {
    k: usize,
    tokens: Vec<u32>,
}

impl EncodedDataset {
    pub fn new(k: usize, tokens: Vec<u32>) -> Result<Self, DataError> {
        if k == 0 || tokens.len() % k != 0 {
            return Err(DataError::RowWidth {
                expected: k,
                got: tokens.len(),
            });
        }
        Ok(Self { k, tokens })
    }

    pub fn from_rows<R: AsRef<[u32]>>(k: usize, rows: &[R]) -> Result<Self, DataError> {
        let mut tokens = Vec::with_capacity(rows.len() * k);
        for r in rows {
            let r = r.as_ref();
            if r.len() != k {
                return Err(DataError::RowWidth {
                    expected: k,
                    got: r.len(),
                });
            }
            tokens.extend_from_slice(r);
        }
        Ok(Self { k, tokens })
    }

    /// Encodes every row of `table`.
    pub fn encode(table: &Table, schema: &Schema, vocab: &TokenVocab) -> Result<Self, DataError> {
        let mut tokens = Vec::with_capacity(table.len() * schema.len());
        for row in &table.rows {
            tokens.extend(vocab.encode_row(schema, row)?);
        }
        Ok(Self {
            k: schema.len(),
            tokens,
        })
    }

    pub fn decode(&self, schema: &Schema, vocab: &TokenVocab) -> Result<Table, DataError> {
        let rows = self
            .rows()
            .map(|r| vocab.decode_row(schema, r))
            .collect::<Result<_, _>>()?;
        Ok(Table { rows })
    }

    /// Row count N.
    pub fn len(&self) -> usize {
        self.tokens.len() / self.k.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Column count K.
    pub fn width(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.tokens[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.tokens.chunks_exact(self.k)
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut tokens = Vec::with_capacity(indices.len() * self.k);
        for &i in indices {
            tokens.extend_from_slice(self.row(i));
        }
        Self { k: self.k, tokens }
    }

    /// Reorders columns: output column `j` is input column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut tokens = Vec::with_capacity(self.tokens.len());
        for row in self.rows() {
            tokens.extend(perm.iter().map(|&c| row[c]));
        }
        Self { k: self.k, tokens }
    }

    /// Checks every token lies in its column's range.
    pub fn validate(&self, schema: &Schema, vocab: &TokenVocab) -> Result<(), DataError> {
        if self.k != vocab.num_columns() {
            return Err(DataError::RowWidth {
                expected: vocab.num_columns(),
                got: self.k,
            });
        }
        for row in self.rows() {
            for (col, &t) in row.iter().enumerate() {
                if !vocab.range(col).contains(&(t as usize)) {
                    return Err(DataError::TokenOutOfRange {
                        column: schema.columns()[col].name.clone(),
                        token: t,
                    });
                }
            }
        }
        Ok(())
    }

    /// Binary cache: `"DPTB"`, then little-endian u32 version, N, K, and the
    /// N·K token ids.
    pub fn write_cache<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        for v in [CACHE_VERSION, self.len() as u32, self.k as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &t in &self.tokens {
            w.write_all(&t.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self, DataError> {
        let bad = |m: &str| DataError::BadCache(m.to_string());
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| bad(&e.to_string()))?;
        if bytes.len() < 16 || &bytes[..4] != CACHE_MAGIC {
            return Err(bad("missing DPTB header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        if word(4) != CACHE_VERSION {
            return Err(bad("unsupported version"));
        }
        let (n, k) = (word(8) as usize, word(12) as usize);
        if k == 0 || bytes.len() != 16 + 4 * n * k {
            return Err(bad("length does not match N·K"));
        }
        let tokens = bytes[16..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { k, tokens })
    }
}

/// Seeded random split. The validation part has `max(1, round(frac·N))` rows.
pub fn split_train_val(
    data: &EncodedDataset,
    seed: u64,
    frac: f64,
) -> Result<(EncodedDataset, EncodedDataset), DataError> {
    let n = data.len();
    if n < 2 {
        return Err(DataError::TooFewRows { needed: 2, got: n });
    }
    let n_val = ((frac * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((data.select(&train), data.select(&val)))
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decode::Decoder;
use super::{softmax, Model, ModelError};
use crate::autodiff::Real;

/// Rows decoded together per forward pass.
const SAMPLE_CHUNK: usize = 256;

/// Independent random stream for one sampled row.
pub(crate) fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// Draws an index from `probs` (which sums to one) with a single uniform.
fn draw(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

impl<T: Real> Model<T> {
    /// Samples `n` rows left to right, each column drawn from the softmax
    /// restricted to its own token range. Tokens come back in model column
    /// order.
    ///
    /// Row `i` uses its own random stream derived from `(seed, i)`, so the
    /// output does not depend on how rows are batched.
    pub fn sample_tokens(
        &self,
        n: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<Vec<Vec<u32>>, ModelError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(ModelError::InvalidConfig("temperature must be positive".into()));
        }
        let k = self.config().num_columns;
        let mut out = Vec::with_capacity(n);
        for start in (0..n).step_by(SAMPLE_CHUNK) {
            let count = SAMPLE_CHUNK.min(n - start);
            let mut rngs: Vec<ChaCha8Rng> = (start..start + count).map(|i| row_rng(seed, i)).collect();
            let mut rows: Vec<Vec<u32>> = vec![Vec::with_capacity(k); count];
            let mut decoder = Decoder::new(self, count);
            let mut inputs = vec![self.bos(); count];
            for col in 0..k {
                let (lo, hi) = self.layout()[col];
                let logits = decoder.step(&inputs, (lo, hi));
                for (s, (row, rng)) in rows.iter_mut().zip(rngs.iter_mut()).enumerate() {
                    let scaled: Vec<f64> = logits[s * (hi - lo)..(s + 1) * (hi - lo)]
                        .iter()
                        .map(|&x| x.as_f64() / temperature)
                        .collect();
                    let probs = softmax(&scaled);
                    let token = (lo + draw(&probs, rng)) as u32;
                    row.push(token);
                    inputs[s] = token;
                }
            }
            out.extend(rows);
        }
        Ok(out)
    }
}

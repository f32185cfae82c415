use rand::Rng;

/// Produces one vector per mask position.
///
/// Parameters are exposed as a flat slice so the trainer can update them
/// without knowing the encoder's layout.
pub trait Encoder {
    fn dim(&self) -> usize;

    /// One `dim`-length vector per entry of `mask_positions`.
    fn encode(&self, tokens: &[&str], mask_positions: &[usize]) -> Vec<Vec<f64>>;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Adds d(loss)/d(params) into `grad`, given d(loss)/d(output vector)
    /// for each mask position.
    fn backward(&self, tokens: &[&str], mask_positions: &[usize], upstream: &[Vec<f64>], grad: &mut [f64]);
}

/// Hashed bag-of-context encoder.
///
/// Tokens are lowercased and hashed (FNV-1a) into a fixed number of
/// embedding rows. The vector for a mask position is the mean embedding
/// of the tokens within `window` positions on either side, itself included.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEncoder {
    dim: usize,
    buckets: usize,
    window: usize,
    table: Vec<f64>,
}

pub(crate) const INIT_SCALE: f64 = 0.05;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl BaselineEncoder {
    pub fn new<R: Rng>(dim: usize, buckets: usize, window: usize, rng: &mut R) -> Self {
        let table = (0..dim * buckets).map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE)).collect();
        BaselineEncoder { dim, buckets, window, table }
    }

    pub fn from_parts(dim: usize, buckets: usize, window: usize, table: Vec<f64>) -> Option<Self> {
        (dim > 0 && buckets > 0 && table.len() == dim * buckets).then_some(BaselineEncoder {
            dim,
            buckets,
            window,
            table,
        })
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.to_lowercase().as_bytes()) % self.buckets as u64) as usize
    }

    fn context(&self, len: usize, pos: usize) -> std::ops::RangeInclusive<usize> {
        let lo = pos.saturating_sub(self.window);
        let hi = (pos + self.window).min(len.saturating_sub(1));
        lo..=hi
    }

    fn row(&self, bucket: usize) -> &[f64] {
        &self.table[bucket * self.dim..(bucket + 1) * self.dim]
    }
}

impl Encoder for BaselineEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, tokens: &[&str], mask_positions: &[usize]) -> Vec<Vec<f64>> {
        mask_positions
            .iter()
            .map(|&p| {
                let ctx = self.context(tokens.len(), p);
                let n = ctx.clone().count() as f64;
                let mut v = vec![0.0; self.dim];
                for j in ctx {
                    for (acc, e) in v.iter_mut().zip(self.row(self.bucket(tokens[j]))) {
                        *acc += e;
                    }
                }
                v.iter_mut().for_each(|x| *x /= n);
                v
            })
            .collect()
    }

    fn params(&self) -> &[f64] {
        &self.table
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    fn backward(&self, tokens: &[&str], mask_positions: &[usize], upstream: &[Vec<f64>], grad: &mut [f64]) {
        for (&p, up) in mask_positions.iter().zip(upstream) {
            let ctx = self.context(tokens.len(), p);
            let n = ctx.clone().count() as f64;
            for j in ctx {
                let b = self.bucket(tokens[j]);
                for (g, u) in grad[b * self.dim..(b + 1) * self.dim].iter_mut().zip(up) {
                    *g += u / n;
                }
            }
        }
    }
}

use super::PathError;
use crate::numerics::normal_quantile;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// 256-bit generator key, written as 64 hex digits in configs.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey([u8; 32]);

impl RngKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Key for an independent purpose derived from this one, e.g. the
    /// out-of-sample evaluation ensemble.
    pub fn derive(&self, label: &str) -> Self {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        let mut tag = 0u64;
        for b in label.bytes() {
            tag = tag.rotate_left(8) ^ u64::from(b).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
        rng.set_stream(tag | (1 << 63));
        let mut out = [0u8; 32];
        rng.fill_bytes(&mut out);
        Self(out)
    }
}

impl Default for RngKey {
    fn default() -> Self {
        let mut b = [0u8; 32];
        b[..8].copy_from_slice(&0x5EED_0F_5EED_u64.to_le_bytes());
        Self(b)
    }
}

impl fmt::Debug for RngKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RngKey({})", self.to_hex())
    }
}

impl fmt::Display for RngKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for RngKey {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches("0x");
        let bytes = hex::decode(s).map_err(|e| PathError::InvalidKey(e.to_string()))?;
        let arr: [u8; 32] = bytes.try_into().map_err(|b: Vec<u8>| {
            PathError::InvalidKey(format!("expected 32 bytes, got {}", b.len()))
        })?;
        Ok(Self(arr))
    }
}

impl Serialize for RngKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for RngKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Map 53 random bits to the open interval (0, 1).
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Source of the standard normal vectors driving the Euler scheme.
///
/// `draw(step, path, ..)` must return the same bits every time it is called
/// once `begin_step(step, ..)` has been issued during the forward sweep.
pub trait NoiseSource: Send + Sync {
    fn dim(&self) -> usize;

    /// Called by the forward sweep before any draw at `step`.
    fn begin_step(&mut self, _step: usize, _paths: usize) {}

    fn draw(&self, step: usize, path: usize, out: &mut [f64]);

    /// Generator position `(stream, word)` at the first draw of `step`.
    fn step_cursor(&self, step: usize) -> (u64, u128);

    /// Bytes kept per recorded step (zero for stateless sources).
    fn cursor_bytes(&self) -> usize {
        0
    }
}

/// Stateless generator addressed by `(key, step, path)`.
///
/// Each path is its own ChaCha8 stream; within it, the draws of step `n`
/// start at a block-aligned word offset so no two steps share a block.
/// Each coordinate consumes one 64-bit output, mapped through the normal
/// quantile function.
#[derive(Debug, Clone)]
pub struct CounterNoise {
    key: RngKey,
    dim: usize,
    stride: u128,
}

impl CounterNoise {
    pub fn new(key: RngKey, dim: usize) -> Self {
        let words = 2 * dim.max(1) as u128;
        let stride = words.div_ceil(16) * 16;
        Self { key, dim, stride }
    }

    pub fn key(&self) -> &RngKey {
        &self.key
    }

    /// Convenience allocating form of [`NoiseSource::draw`].
    pub fn noise_for(&self, step: usize, path: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.draw(step, path, &mut out);
        out
    }

    pub fn cursor(&self, step: usize, path: usize) -> (u64, u128) {
        (path as u64, step as u128 * self.stride)
    }
}

impl NoiseSource for CounterNoise {
    fn dim(&self) -> usize {
        self.dim
    }

    fn step_cursor(&self, step: usize) -> (u64, u128) {
        self.cursor(step, 0)
    }

    fn draw(&self, step: usize, path: usize, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::from_seed(self.key.0);
        let (stream, pos) = self.cursor(step, path);
        rng.set_stream(stream);
        rng.set_word_pos(pos);
        for v in out.iter_mut() {
            *v = normal_quantile(open_unit(rng.next_u64()));
        }
    }
}

/// Sequential generator whose position is saved at the start of every step,
/// mirroring a `getseed`/`setseed` stack.
///
/// Draws are laid out step-major then path-major on a single stream, so the
/// recorded cursor of step `n` plus `2·d·path` words addresses any draw.
#[derive(Debug, Clone)]
pub struct SeedStack {
    key: RngKey,
    dim: usize,
    rng: ChaCha8Rng,
    cursors: Vec<u128>,
}

impl SeedStack {
    pub fn new(key: RngKey, dim: usize) -> Self {
        Self {
            key,
            dim,
            rng: ChaCha8Rng::from_seed(key.0),
            cursors: Vec::new(),
        }
    }

    pub fn cursors(&self) -> &[u128] {
        &self.cursors
    }
}

impl NoiseSource for SeedStack {
    fn dim(&self) -> usize {
        self.dim
    }

    fn begin_step(&mut self, step: usize, paths: usize) {
        if step < self.cursors.len() {
            return;
        }
        debug_assert_eq!(step, self.cursors.len(), "steps must be recorded in order");
        let pos = self.rng.get_word_pos();
        self.cursors.push(pos);
        self.rng.set_word_pos(pos + 2 * (self.dim * paths) as u128);
    }

    fn draw(&self, step: usize, path: usize, out: &mut [f64]) {
        let base = *self
            .cursors
            .get(step)
            .expect("seed stack queried for a step that was never recorded");
        let mut rng = ChaCha8Rng::from_seed(self.key.0);
        rng.set_word_pos(base + 2 * (self.dim * path) as u128);
        for v in out.iter_mut() {
            *v = normal_quantile(open_unit(rng.next_u64()));
        }
    }

    fn step_cursor(&self, step: usize) -> (u64, u128) {
        (
            0,
            self.cursors
                .get(step)
                .copied()
                .unwrap_or_else(|| self.rng.get_word_pos()),
        )
    }

    fn cursor_bytes(&self) -> usize {
        std::mem::size_of::<u128>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mean_and_se;

    #[test]
    fn deterministic_and_separated() {
        let n = CounterNoise::new(RngKey::default(), 3);
        assert_eq!(n.noise_for(0, 0), n.noise_for(0, 0));
        assert_ne!(n.noise_for(0, 0), n.noise_for(0, 1));
        assert_ne!(n.noise_for(0, 0), n.noise_for(1, 0));
    }

    #[test]
    fn key_round_trips_through_hex() {
        let k = RngKey::default().derive("eval");
        let parsed: RngKey = k.to_hex().parse().unwrap();
        assert_eq!(k, parsed);
        assert_ne!(k, RngKey::default());
        assert!("abcd".parse::<RngKey>().is_err());
        assert!("zz".parse::<RngKey>().is_err());
    }

    #[test]
    fn seed_stack_replays() {
        let mut s = SeedStack::new(RngKey::default(), 2);
        s.begin_step(0, 5);
        s.begin_step(1, 5);
        let a = {
            let mut v = [0.0; 2];
            s.draw(1, 3, &mut v);
            v
        };
        let mut b = [0.0; 2];
        s.draw(1, 3, &mut b);
        assert_eq!(a, b);
        let mut c = [0.0; 2];
        s.draw(0, 3, &mut c);
        assert_ne!(a, c);
        assert_eq!(s.cursors(), &[0, 20]);
    }

    #[test]
    fn standard_normal_moments() {
        let n = CounterNoise::new(RngKey::default(), 4);
        let mut xs = Vec::with_capacity(1_000_000);
        let mut v = [0.0; 4];
        for path in 0..250_000 {
            n.draw(7, path, &mut v);
            xs.extend_from_slice(&v);
        }
        let (mean, se) = mean_and_se(&xs);
        assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_and_se(&sq);
        assert!((m2 - 1.0).abs() < 4.0 * se2, "second moment {m2} se {se2}");
    }
}

//! Encoder/decoder recursions.
//!
//! Both ends of a channel advance their copy of the hat-state by
//! `theta * symbol`; over a noiseless channel the copies stay identical.
//! The engine keeps a single shared copy; [`DecoderBank`] maintains
//! independent receiver copies for diagnostics.

use crate::error::{Error, Result};
use crate::quantization::UniformQuantizer;

/// One quantized transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub symbol: i64,
    /// Quantizer argument `(target - hat) / theta` before quantization.
    pub arg: f64,
    pub saturated: bool,
}

/// Transmitter side: quantizes the innovation and advances its hat.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Encoder {
    pub hat: f64,
}

impl Encoder {
    #[inline]
    pub fn encode(&mut self, target: f64, theta: f64, q: &UniformQuantizer) -> Transmission {
        let arg = (target - self.hat) / theta;
        let (symbol, saturated) = q.quantize_finite(arg);
        self.hat = advance(self.hat, symbol, theta);
        Transmission { symbol, arg, saturated }
    }
}

/// Receiver side: reconstructs the hat from received symbols.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Decoder {
    pub hat: f64,
}

impl Decoder {
    #[inline]
    pub fn decode(&mut self, symbol: i64, theta: f64) {
        self.hat = advance(self.hat, symbol, theta);
    }
}

#[inline]
fn advance(hat: f64, symbol: i64, theta: f64) -> f64 {
    hat + theta * symbol as f64
}

/// Receiver-side copies held by every player for its neighbors' channels.
///
/// `x[i*N + j]` is player `i`'s copy of `x_hat_j`; `y[i*N*N + l*N + j]`
/// is player `i`'s copy of `y_hat_lj`. Only neighbor entries are updated.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBank {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    x: Vec<Decoder>,
    y: Vec<Decoder>,
}

impl DecoderBank {
    pub fn new(neighbors: Vec<Vec<usize>>) -> Self {
        let n = neighbors.len();
        Self { n, neighbors, x: vec![Decoder::default(); n * n], y: vec![Decoder::default(); n * n * n] }
    }

    #[inline]
    pub fn x_copy(&self, receiver: usize, j: usize) -> f64 {
        self.x[receiver * self.n + j].hat
    }

    #[inline]
    pub fn y_copy(&self, receiver: usize, l: usize, j: usize) -> f64 {
        self.y[(receiver * self.n + l) * self.n + j].hat
    }

    /// Delivers one round of symbols to every neighbor.
    pub fn deliver(&mut self, symbols_x: &[i64], symbols_y: &[i64], theta: f64) {
        let n = self.n;
        for i in 0..n {
            for &l in &self.neighbors[i] {
                self.x[i * n + l].decode(symbols_x[l], theta);
                for j in 0..n {
                    self.y[(i * n + l) * n + j].decode(symbols_y[l * n + j], theta);
                }
            }
        }
    }

    /// Checks every neighbor copy against the transmitter's hat, bit for bit.
    pub fn check(&self, x_hat: &[f64], y_hat: &[f64], step: u64) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for &l in &self.neighbors[i] {
                if self.x_copy(i, l).to_bits() != x_hat[l].to_bits() {
                    return Err(Error::CodecDesync { channel: format!("x_{l} at player {i}"), step });
                }
                for j in 0..n {
                    if self.y_copy(i, l, j).to_bits() != y_hat[l * n + j].to_bits() {
                        return Err(Error::CodecDesync { channel: format!("y_{l}{j} at player {i}"), step });
                    }
                }
            }
        }
        Ok(())
    }
}

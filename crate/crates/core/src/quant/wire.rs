//! Bit-exact wire layout for quantized belief messages.
//!
//! ```text
//! [sender: u16 BE][theta: u16 BE][B: u8][J-1: B bits, MSB first, zero-padded to a byte]
//! ```

use thiserror::Error;

use super::{BinIndex, MAX_BITS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bit width {0} outside 1..={MAX_BITS}")]
    Bits(u32),
    #[error("bin index {index} outside 1..=2^{bits}")]
    BinRange { index: u64, bits: u32 },
    #[error("message truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after message")]
    Trailing(usize),
    #[error("non-zero padding bits")]
    Padding,
}

/// Bytes needed for a `bits`-wide payload.
pub fn payload_len(bits: u32) -> usize {
    bits.div_ceil(8) as usize
}

/// Appends `J - 1` as exactly `bits` bits, most significant first, padded
/// with zeros to a byte boundary.
pub fn write_bin(bin: BinIndex, out: &mut Vec<u8>) {
    let bits = bin.bits();
    let len = payload_len(bits);
    let pad = len as u32 * 8 - bits;
    let shifted = (bin.get() - 1) << pad;
    let bytes = shifted.to_be_bytes();
    out.extend_from_slice(&bytes[8 - len..]);
}

/// Parses a payload written by [`write_bin`]. The slice must be exactly the
/// payload length.
pub fn read_bin(bytes: &[u8], bits: u32) -> Result<BinIndex, WireError> {
    if bits == 0 || bits > MAX_BITS {
        return Err(WireError::Bits(bits));
    }
    let len = payload_len(bits);
    if bytes.len() < len {
        return Err(WireError::Truncated {
            needed: len,
            available: bytes.len(),
        });
    }
    if bytes.len() > len {
        return Err(WireError::Trailing(bytes.len() - len));
    }
    let mut buf = [0u8; 8];
    buf[8 - len..].copy_from_slice(bytes);
    let raw = u64::from_be_bytes(buf);
    let pad = len as u32 * 8 - bits;
    if raw & ((1u64 << pad) - 1) != 0 {
        return Err(WireError::Padding);
    }
    BinIndex::new((raw >> pad) + 1, bits)
}

/// A quantized belief message as it travels between agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireMessage {
    /// One-based agent id.
    pub sender: u16,
    /// One-based hypothesis index.
    pub theta: u16,
    pub bin: BinIndex,
}

impl WireMessage {
    const HEADER: usize = 5;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::HEADER + payload_len(self.bin.bits()));
        out.extend_from_slice(&self.sender.to_be_bytes());
        out.extend_from_slice(&self.theta.to_be_bytes());
        out.push(self.bin.bits() as u8);
        write_bin(self.bin, &mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < Self::HEADER {
            return Err(WireError::Truncated {
                needed: Self::HEADER,
                available: bytes.len(),
            });
        }
        let sender = u16::from_be_bytes([bytes[0], bytes[1]]);
        let theta = u16::from_be_bytes([bytes[2], bytes[3]]);
        let bits = u32::from(bytes[4]);
        let bin = read_bin(&bytes[Self::HEADER..], bits)?;
        Ok(Self { sender, theta, bin })
    }
}

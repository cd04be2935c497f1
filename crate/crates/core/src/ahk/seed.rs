use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const XI_TAG: &[u8] = b"ergodic/xi/v1";
const DERIVE_TAG: &[u8] = b"ergodic/derive/v1";

/// Master key of the per-subset randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SeedKey(pub u128);

impl SeedKey {
    pub fn new(master: u128) -> Self {
        SeedKey(master)
    }

    pub fn master(&self) -> u128 {
        self.0
    }

    /// Independent child key for trial or stream `index`.
    pub fn derive(&self, index: u64) -> SeedKey {
        self.derive_path(&[index])
    }

    /// Independent child key for a labelled stream, e.g. `"coherence"`.
    pub fn derive_label(&self, label: &str) -> SeedKey {
        let mut h = Sha256::new();
        h.update(DERIVE_TAG);
        h.update(self.0.to_be_bytes());
        h.update(b"label");
        h.update((label.len() as u64).to_be_bytes());
        h.update(label.as_bytes());
        SeedKey(u128_prefix(&h.finalize()))
    }

    pub fn derive_path(&self, path: &[u64]) -> SeedKey {
        let mut h = Sha256::new();
        h.update(DERIVE_TAG);
        h.update(self.0.to_be_bytes());
        h.update(b"path");
        h.update((path.len() as u64).to_be_bytes());
        for &p in path {
            h.update(p.to_be_bytes());
        }
        SeedKey(u128_prefix(&h.finalize()))
    }

    /// The uniform variable `ξ_A`. The set is canonicalized, so presentation
    /// order and repeats do not matter.
    pub fn uniform(&self, set: &[usize]) -> Uniform {
        let mut sorted: Vec<u64> = set.iter().map(|&a| a as u64).collect();
        sorted.sort_unstable();
        sorted.dedup();
        let mut h = Sha256::new();
        h.update(XI_TAG);
        h.update(self.0.to_be_bytes());
        h.update((sorted.len() as u64).to_be_bytes());
        for a in sorted {
            h.update(a.to_be_bytes());
        }
        Uniform(h.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        format!("{:032x}", self.0)
    }
}

impl fmt::Display for SeedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<SeedKey> for String {
    fn from(s: SeedKey) -> String {
        s.to_hex()
    }
}

impl TryFrom<String> for SeedKey {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for SeedKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        if digits.is_empty() || digits.len() > 32 {
            return Err(format!("seed must be 1 to 32 hex digits, got {s:?}"));
        }
        u128::from_str_radix(digits, 16)
            .map(SeedKey)
            .map_err(|e| format!("bad seed {s:?}: {e}"))
    }
}

/// `ξ_A` value in `[0,1)`: the first 53 bits of the PRF output.
pub fn xi(seed: SeedKey, set: &[usize]) -> f64 {
    seed.uniform(set).value()
}

fn u128_prefix(bytes: &[u8]) -> u128 {
    u128::from_be_bytes(bytes[..16].try_into().expect("digest has 32 bytes"))
}

/// A uniform random variable in `[0,1)`, viewed as its infinite binary
/// expansion. Bits 0..256 come straight from the digest, later blocks are
/// hashed from it on demand.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Uniform([u8; 32]);

impl fmt::Debug for Uniform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Uniform({})", self.value())
    }
}

impl Uniform {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Uniform(bytes)
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 || !s.is_ascii() {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
        }
        Some(Uniform(out))
    }

    /// The value as a 53-bit dyadic rational.
    pub fn value(&self) -> f64 {
        let top = u64::from_be_bytes(self.0[..8].try_into().expect("8 bytes"));
        (top >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Bit `n` of the binary expansion (bit 0 is the most significant).
    pub fn bit(&self, n: usize) -> bool {
        if n < 256 {
            return read_bit(&self.0, n);
        }
        let block = (n / 256) as u64;
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(b"bits");
        h.update(block.to_be_bytes());
        read_bit(&h.finalize(), n % 256)
    }

    /// The first `d` bits.
    pub fn prefix(&self, d: usize) -> Vec<bool> {
        (0..d).map(|n| self.bit(n)).collect()
    }

    /// Number of leading 1 bits, stopping at `cap`.
    pub fn leading_ones(&self, cap: usize) -> usize {
        (0..cap).take_while(|&n| self.bit(n)).count()
    }

    /// An independent uniform derived from this one; distinct `j` give
    /// independent values.
    pub fn split(&self, j: u64) -> Uniform {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(b"split");
        h.update(j.to_be_bytes());
        Uniform(h.finalize().into())
    }
}

fn read_bit(bytes: &[u8], n: usize) -> bool {
    bytes[n / 8] >> (7 - n % 8) & 1 == 1
}

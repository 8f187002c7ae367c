//! Weak classical PUF model and its challenge-response database.
//!
//! The device is a seeded keyed PRF whose uniform outputs are thresholded
//! into independent bits with `Pr[bit = 0] = 1/2 + delta`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PufError {
    #[error("challenge has {found} bits, device expects {expected}")]
    ChallengeLength { expected: usize, found: usize },
    #[error("bias {0} outside [0, 1/2]")]
    BiasOutOfRange(f64),
    #[error("invalid device shape: {0}")]
    InvalidShape(String),
    #[error("requested {requested} distinct challenges but only 2^{n} exist")]
    TooManyChallenges { requested: usize, n: usize },
    #[error("database is empty")]
    EmptyDatabase,
    #[error("invalid bit string: {0}")]
    InvalidBits(String),
    #[error("malformed database file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fixed-length string of bits, index 0 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitString(vec![false; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        BitString((0..len).map(|_| rng.random::<bool>()).collect())
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        BitString((0..len).rev().map(|i| i < 64 && (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, idx: usize) -> bool {
        self.0[idx]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count_zeros(&self) -> usize {
        self.0.iter().filter(|b| !**b).count()
    }

    /// Splits into `(self[..at], self[at..])`.
    pub fn split_at(&self, at: usize) -> (BitString, BitString) {
        let (a, b) = self.0.split_at(at);
        (BitString(a.to_vec()), BitString(b.to_vec()))
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        BitString(v)
    }

    /// Bits packed MSB-first into bytes, the last byte zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.0.len().div_ceil(8)];
        for (i, bit) in self.0.iter().enumerate() {
            if *bit {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str, len: usize) -> Result<Self, PufError> {
        let bytes = hex::decode(s).map_err(|e| PufError::InvalidBits(e.to_string()))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(PufError::InvalidBits(format!(
                "{} hex bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let bits: Vec<bool> = (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect();
        let padding_clear = (len..bytes.len() * 8).all(|i| bytes[i / 8] & (0x80 >> (i % 8)) == 0);
        if !padding_clear {
            return Err(PufError::InvalidBits("non-zero padding bits".into()));
        }
        Ok(BitString(bits))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = PufError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(PufError::InvalidBits(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl From<Vec<bool>> for BitString {
    fn from(v: Vec<bool>) -> Self {
        BitString(v)
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Weak classical PUF `f: {0,1}^n -> {0,1}^m` with per-bit bias.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasedCpuf {
    n: usize,
    m: usize,
    delta: f64,
    seed: u64,
    fingerprint: String,
}

impl BiasedCpuf {
    pub fn new(n: usize, m: usize, delta: f64, seed: u64) -> Result<Self, PufError> {
        if n == 0 {
            return Err(PufError::InvalidShape("challenge length must be positive".into()));
        }
        if !(0.0..=0.5).contains(&delta) {
            return Err(PufError::BiasOutOfRange(delta));
        }
        Ok(BiasedCpuf {
            n,
            m,
            delta,
            seed,
            fingerprint: Self::fingerprint_of(seed),
        })
    }

    pub fn challenge_bits(&self) -> usize {
        self.n
    }

    pub fn response_bits(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Public identifier derived from the seed; the seed itself never leaves
    /// the device.
    pub fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn fingerprint_of(seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(b"qauth/cpuf-fingerprint");
        h.update(seed.to_le_bytes());
        hex::encode(&h.finalize()[..8])
    }

    pub fn eval(&self, x: &BitString) -> Result<BitString, PufError> {
        if x.len() != self.n {
            return Err(PufError::ChallengeLength {
                expected: self.n,
                found: x.len(),
            });
        }
        let threshold = 0.5 + self.delta;
        let packed = x.to_bytes();
        let mut bits = Vec::with_capacity(self.m);
        let mut block = 0u32;
        while bits.len() < self.m {
            let words = self.prf_block(&packed, block);
            for w in words {
                if bits.len() == self.m {
                    break;
                }
                // Top 53 bits as a uniform double in [0, 1).
                let u = (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                bits.push(u >= threshold);
            }
            block += 1;
        }
        Ok(BitString(bits))
    }

    /// Four 64-bit PRF outputs for bit indices `4 * block .. 4 * block + 4`.
    fn prf_block(&self, packed: &[u8], block: u32) -> [u64; 4] {
        let mut h = Sha256::new();
        h.update(b"qauth/cpuf");
        h.update(self.seed.to_le_bytes());
        h.update((self.n as u64).to_le_bytes());
        h.update(packed);
        h.update(block.to_le_bytes());
        let digest = h.finalize();
        let mut out = [0u64; 4];
        for (i, chunk) in digest.chunks_exact(8).enumerate() {
            out[i] = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        out
    }
}

/// Empirical p-randomness: for every response position, the frequency of the
/// majority value over `sample_count` random challenges; the maximum over
/// positions is returned.
pub fn estimate_p_randomness<R: Rng + ?Sized>(
    puf: &BiasedCpuf,
    sample_count: usize,
    rng: &mut R,
) -> Result<f64, PufError> {
    if sample_count == 0 {
        return Err(PufError::InvalidShape("sample_count must be at least 1".into()));
    }
    if puf.m == 0 {
        return Err(PufError::InvalidShape("device has no response bits".into()));
    }
    let mut zeros = vec![0usize; puf.m];
    for _ in 0..sample_count {
        let y = puf.eval(&BitString::random(puf.n, rng))?;
        for (count, bit) in zeros.iter_mut().zip(y.iter()) {
            *count += usize::from(!bit);
        }
    }
    let best = zeros
        .iter()
        .map(|&z| z.max(sample_count - z))
        .max()
        .unwrap_or(0);
    Ok(best as f64 / sample_count as f64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Crp {
    pub challenge: BitString,
    pub response: BitString,
}

/// Verifier-side table of challenge-response pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CrpDatabase {
    n: usize,
    m: usize,
    delta: f64,
    device_fingerprint: String,
    entries: Vec<Crp>,
}

#[derive(Serialize, Deserialize)]
struct DbHeader {
    n: usize,
    m: usize,
    delta: f64,
    device_fingerprint: String,
    entries: usize,
}

#[derive(Serialize, Deserialize)]
struct DbLine {
    challenge: String,
    response: String,
}

/// Number of distinct challenges below which sampling enumerates the space.
const ENUMERATION_LIMIT: u64 = 1 << 24;

/// Draws `d` distinct uniformly random challenges of `n` bits.
pub(crate) fn distinct_challenges<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<Vec<BitString>, PufError> {
    let space = if n >= 64 { None } else { Some(1u64 << n) };
    if let Some(space) = space {
        if d as u64 > space {
            return Err(PufError::TooManyChallenges { requested: d, n });
        }
        if space <= ENUMERATION_LIMIT {
            return Ok(index::sample(rng, space as usize, d)
                .into_iter()
                .map(|v| BitString::from_u64(v as u64, n))
                .collect());
        }
    }
    let mut seen = HashSet::with_capacity(d);
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        let x = BitString::random(n, rng);
        if seen.insert(x.clone()) {
            out.push(x);
        }
    }
    Ok(out)
}

impl CrpDatabase {
    /// Assembles a database from already-evaluated pairs.
    pub fn from_entries(
        n: usize,
        m: usize,
        delta: f64,
        device_fingerprint: String,
        entries: Vec<Crp>,
    ) -> Result<Self, PufError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.challenge.len() != n || e.response.len() != m {
                return Err(PufError::Malformed {
                    line: i + 1,
                    reason: "entry length does not match the header".into(),
                });
            }
            if !seen.insert(&e.challenge) {
                return Err(PufError::Malformed {
                    line: i + 1,
                    reason: "duplicate challenge".into(),
                });
            }
        }
        Ok(CrpDatabase {
            n,
            m,
            delta,
            device_fingerprint,
            entries,
        })
    }

    pub fn challenge_bits(&self) -> usize {
        self.n
    }

    pub fn response_bits(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn device_fingerprint(&self) -> &str {
        &self.device_fingerprint
    }

    pub fn entries(&self) -> &[Crp] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Uniformly random entry; the database is left untouched.
    pub fn draw_challenge<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&Crp, PufError> {
        if self.entries.is_empty() {
            return Err(PufError::EmptyDatabase);
        }
        Ok(&self.entries[rng.random_range(0..self.entries.len())])
    }

    /// Uniformly random entry, removed from the database (consume-on-use).
    pub fn take_challenge<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Crp, PufError> {
        if self.entries.is_empty() {
            return Err(PufError::EmptyDatabase);
        }
        let idx = rng.random_range(0..self.entries.len());
        Ok(self.entries.swap_remove(idx))
    }

    /// JSON-lines: a header object followed by one object per entry, with
    /// challenge and response hex-encoded MSB-first.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), PufError> {
        let header = DbHeader {
            n: self.n,
            m: self.m,
            delta: self.delta,
            device_fingerprint: self.device_fingerprint.clone(),
            entries: self.entries.len(),
        };
        writeln!(w, "{}", serde_json::to_string(&header).map_err(std::io::Error::from)?)?;
        for e in &self.entries {
            let line = DbLine {
                challenge: e.challenge.to_hex(),
                response: e.response.to_hex(),
            };
            writeln!(w, "{}", serde_json::to_string(&line).map_err(std::io::Error::from)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, PufError> {
        let mut lines = r.lines();
        let header_line = lines.next().ok_or(PufError::Malformed {
            line: 1,
            reason: "missing header".into(),
        })??;
        let header: DbHeader = serde_json::from_str(&header_line).map_err(|e| PufError::Malformed {
            line: 1,
            reason: e.to_string(),
        })?;
        let mut entries = Vec::with_capacity(header.entries);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| PufError::Malformed { line: i + 2, reason };
            let parsed: DbLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            entries.push(Crp {
                challenge: BitString::from_hex(&parsed.challenge, header.n)
                    .map_err(|e| malformed(e.to_string()))?,
                response: BitString::from_hex(&parsed.response, header.m)
                    .map_err(|e| malformed(e.to_string()))?,
            });
        }
        if entries.len() != header.entries {
            return Err(PufError::Malformed {
                line: entries.len() + 1,
                reason: format!("header announces {} entries", header.entries),
            });
        }
        CrpDatabase::from_entries(header.n, header.m, header.delta, header.device_fingerprint, entries)
    }
}

/// Queries `d` distinct uniformly random challenges and records the responses.
pub fn build_crp_database<R: Rng + ?Sized>(
    puf: &BiasedCpuf,
    d: usize,
    rng: &mut R,
) -> Result<CrpDatabase, PufError> {
    let entries = distinct_challenges(puf.n, d, rng)?
        .into_iter()
        .map(|challenge| {
            let response = puf.eval(&challenge)?;
            Ok(Crp { challenge, response })
        })
        .collect::<Result<Vec<_>, PufError>>()?;
    Ok(CrpDatabase {
        n: puf.n,
        m: puf.m,
        delta: puf.delta,
        device_fingerprint: puf.fingerprint(),
        entries,
    })
}

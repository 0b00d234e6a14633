//! Watermark Reference Object: the owner's private record of a watermark.
//!
//! Canonical binary layout (all integers unsigned big-endian):
//!
//! ```text
//! version           u8          (currently 1)
//! tool_id_len       u16
//! tool_id           [u8; tool_id_len]  UTF-8
//! hash_alg_id       u8          (0x01 = Keccak-256)
//! contract_address  [u8; 20]
//! watermark_count   u16         N >= 1
//! N times:
//!   length          u16         L >= 1
//!   value           [u8; L]
//!   L times:
//!     block_hash    [u8; 4]
//!     nibble_offset u32
//!     group_count   u16         >= 1
//!     group_count times:
//!       group_len   u8          >= 1
//!       opcodes     [u8; group_len]
//! ```
//!
//! The MAC is Keccak-256 over exactly these bytes. Only the MAC is published,
//! appended to the creation bytecode as `mac (32 bytes) || 0x57 0x4D`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hash::keccak256;
use crate::{Error, Result};

pub const WRO_VERSION: u8 = 1;
pub const MAC_LEN: usize = 32;
pub const TRAILER_MAGIC: [u8; 2] = [0x57, 0x4d];
pub const TRAILER_LEN: usize = MAC_LEN + TRAILER_MAGIC.len();

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HashAlgorithm {
    Keccak256,
}

impl HashAlgorithm {
    pub fn id(self) -> u8 {
        match self {
            HashAlgorithm::Keccak256 => 0x01,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0x01 => Ok(HashAlgorithm::Keccak256),
            other => Err(Error::UnknownHashAlgorithm(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashAlgorithm::Keccak256 => "keccak-256",
        }
    }
}

impl Serialize for HashAlgorithm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for HashAlgorithm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        match name.as_str() {
            "keccak-256" => Ok(HashAlgorithm::Keccak256),
            other => Err(serde::de::Error::custom(format!("unknown hash algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WroRow {
    #[serde(with = "hex::serde")]
    pub block_hash: [u8; 4],
    pub nibble_offset: u32,
    #[serde(with = "hex_list")]
    pub groups: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WroWatermark {
    pub length: u16,
    #[serde(with = "hex::serde")]
    pub value: Vec<u8>,
    pub rows: Vec<WroRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wro {
    pub version: u8,
    pub tool_id: String,
    pub hash_alg: HashAlgorithm,
    #[serde(with = "hex::serde")]
    pub contract_address: [u8; 20],
    pub watermarks: Vec<WroWatermark>,
}

/// Keccak-256 digest of a serialized WRO.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct WroMac(pub [u8; MAC_LEN]);

impl WroMac {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = crate::evm::parse_hex(s.as_bytes())?;
        let arr: [u8; MAC_LEN] = bytes
            .try_into()
            .map_err(|v: Vec<u8>| Error::InvalidParams(format!("MAC must be 32 bytes, got {}", v.len())))?;
        Ok(WroMac(arr))
    }
}

impl fmt::Debug for WroMac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WroMac({})", self.to_hex())
    }
}

impl fmt::Display for WroMac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Wro {
    pub fn num_watermarks(&self) -> usize {
        self.watermarks.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolation(m));
        if self.version != WRO_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if self.tool_id.is_empty() || self.tool_id.len() > u16::MAX as usize {
            return bad("tool id must be 1..=65535 bytes".into());
        }
        if self.watermarks.is_empty() || self.watermarks.len() > u16::MAX as usize {
            return bad(format!("watermark count {} outside 1..=65535", self.watermarks.len()));
        }
        for (i, w) in self.watermarks.iter().enumerate() {
            let l = w.length as usize;
            if l == 0 {
                return bad(format!("watermark {i} has length 0"));
            }
            if w.value.len() != l || w.rows.len() != l {
                return bad(format!(
                    "watermark {i}: length {l}, value {} bytes, {} rows",
                    w.value.len(),
                    w.rows.len()
                ));
            }
            for (j, r) in w.rows.iter().enumerate() {
                if r.groups.is_empty() || r.groups.len() > u16::MAX as usize {
                    return bad(format!("watermark {i} row {j}: group count {}", r.groups.len()));
                }
                if r.groups.iter().any(|g| g.is_empty() || g.len() > u8::MAX as usize) {
                    return bad(format!("watermark {i} row {j}: group length outside 1..=255"));
                }
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::new();
        out.push(self.version);
        out.extend_from_slice(&(self.tool_id.len() as u16).to_be_bytes());
        out.extend_from_slice(self.tool_id.as_bytes());
        out.push(self.hash_alg.id());
        out.extend_from_slice(&self.contract_address);
        out.extend_from_slice(&(self.watermarks.len() as u16).to_be_bytes());
        for w in &self.watermarks {
            out.extend_from_slice(&w.length.to_be_bytes());
            out.extend_from_slice(&w.value);
            for r in &w.rows {
                out.extend_from_slice(&r.block_hash);
                out.extend_from_slice(&r.nibble_offset.to_be_bytes());
                out.extend_from_slice(&(r.groups.len() as u16).to_be_bytes());
                for g in &r.groups {
                    out.push(g.len() as u8);
                    out.extend_from_slice(g);
                }
            }
        }
        Ok(out)
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        let version = r.u8()?;
        if version != WRO_VERSION {
            return Err(Error::MalformedWro(format!("unsupported version {version}")));
        }
        let tool_len = r.u16()? as usize;
        let tool_id = String::from_utf8(r.take(tool_len)?.to_vec())
            .map_err(|_| Error::MalformedWro("tool id is not UTF-8".into()))?;
        let hash_alg = HashAlgorithm::from_id(r.u8()?)?;
        let contract_address: [u8; 20] = r.take(20)?.try_into().unwrap();
        let n = r.u16()?;
        let mut watermarks = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let length = r.u16()?;
            let value = r.take(length as usize)?.to_vec();
            let mut rows = Vec::with_capacity(length as usize);
            for _ in 0..length {
                let block_hash: [u8; 4] = r.take(4)?.try_into().unwrap();
                let nibble_offset = r.u32()?;
                let group_count = r.u16()?;
                let mut groups = Vec::with_capacity(group_count as usize);
                for _ in 0..group_count {
                    let len = r.u8()? as usize;
                    groups.push(r.take(len)?.to_vec());
                }
                rows.push(WroRow {
                    block_hash,
                    nibble_offset,
                    groups,
                });
            }
            watermarks.push(WroWatermark { length, value, rows });
        }
        if r.at != bytes.len() {
            return Err(Error::MalformedWro(format!("{} trailing bytes", bytes.len() - r.at)));
        }
        let wro = Wro {
            version,
            tool_id,
            hash_alg,
            contract_address,
            watermarks,
        };
        wro.validate()?;
        Ok(wro)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wro: Wro = serde_json::from_str(text)?;
        wro.validate()?;
        Ok(wro)
    }

    /// Loads a WRO file, JSON if it starts with `{`, canonical binary otherwise.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'{') => Wro::from_json(
                std::str::from_utf8(&bytes).map_err(|_| Error::MalformedWro("JSON is not UTF-8".into()))?,
            ),
            _ => Wro::deserialize(&bytes),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::MalformedWro(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn mac(wro: &Wro) -> Result<WroMac> {
    Ok(WroMac(keccak256(&wro.serialize()?)))
}

/// Parses a binary WRO only once its bytes hash to `expected`, so any
/// alteration is reported as `MacMismatch` rather than a parse error.
pub fn deserialize_authenticated(bytes: &[u8], expected: &WroMac) -> Result<Wro> {
    let computed = WroMac(keccak256(bytes));
    if computed != *expected {
        return Err(Error::MacMismatch {
            computed: computed.to_hex(),
            embedded: expected.to_hex(),
        });
    }
    Wro::deserialize(bytes)
}

fn has_trailer(creation: &[u8]) -> bool {
    creation.ends_with(&TRAILER_MAGIC)
}

/// Appends `mac || "WM"`; refuses creation bytes that already end in the magic.
pub fn embed_mac(creation: &[u8], mac: &WroMac) -> Result<Vec<u8>> {
    if creation.is_empty() {
        return Err(Error::EmptyInput);
    }
    if has_trailer(creation) {
        return Err(Error::AlreadyEmbedded);
    }
    let mut out = Vec::with_capacity(creation.len() + TRAILER_LEN);
    out.extend_from_slice(creation);
    out.extend_from_slice(&mac.0);
    out.extend_from_slice(&TRAILER_MAGIC);
    Ok(out)
}

/// Swaps an existing trailer for a new one, or appends if there is none.
pub fn replace_mac(creation: &[u8], mac: &WroMac) -> Result<Vec<u8>> {
    let base = if has_trailer(creation) && creation.len() >= TRAILER_LEN {
        &creation[..creation.len() - TRAILER_LEN]
    } else {
        creation
    };
    let mut out = base.to_vec();
    out.extend_from_slice(&mac.0);
    out.extend_from_slice(&TRAILER_MAGIC);
    Ok(out)
}

pub fn extract_mac(creation: &[u8]) -> Result<WroMac> {
    if !has_trailer(creation) {
        return Err(Error::NoMacFound);
    }
    if creation.len() < TRAILER_LEN {
        return Err(Error::TooShort { len: creation.len() });
    }
    let start = creation.len() - TRAILER_LEN;
    Ok(WroMac(creation[start..start + MAC_LEN].try_into().unwrap()))
}

mod hex_list {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(hex::encode))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| hex::decode(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

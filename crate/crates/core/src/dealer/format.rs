//! Binary share file format.
//!
//! ```text
//! header   p: u32 | n: u16 | m: u16 | k: u16 | owner: u16 | cell_count: u32   (big-endian)
//! cells    cell_count × [ masked | n-1 stage-1 tags | mask | indicator | n-1 stage-2 tags ]
//! half     masked | n-1 stage-1 tags
//! keys     (cell_count + 1) games × 2 stages × (n-1) senders × [ a | b ]
//! ```
//!
//! Every field element is written big-endian in `⌈⌈log₂ p⌉ / 8⌉` bytes. Tags
//! and keys are ordered by player index, skipping the owner. The owner's
//! abscissa is implicit (`owner + 1`).

use thiserror::Error;

use super::{GameCell, HalfCell, KeyTable, PlayerShare, Stage1Material, Stage2Material, TagSet};
use crate::field::{FieldElement, FieldError, PrimeModulus};
use crate::itmac::{MacKey, Tag};
use crate::shamir::SharePoint;
use crate::types::{PlayerId, ProtocolParams};

pub const SHARE_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum ShareFormatError {
    #[error("share file truncated")]
    Truncated,
    #[error("{0} trailing bytes after share")]
    TrailingBytes(usize),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl PlayerShare {
    pub fn to_bytes(&self) -> Vec<u8> {
        let ProtocolParams { p, n, m, k } = self.params;
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&p.get().to_be_bytes());
        for v in [n, m, k, self.owner.0] {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
        out.extend_from_slice(&(self.cells.len() as u32).to_be_bytes());
        let put_tags = |out: &mut Vec<u8>, tags: &TagSet| tags.0.iter().for_each(|t| t.0.write_be(out));
        for cell in &self.cells {
            cell.stage1.masked.y.write_be(&mut out);
            put_tags(&mut out, &cell.stage1.tags);
            cell.stage2.mask.y.write_be(&mut out);
            cell.stage2.indicator.y.write_be(&mut out);
            put_tags(&mut out, &cell.stage2.tags);
        }
        self.half.stage1.masked.y.write_be(&mut out);
        put_tags(&mut out, &self.half.stage1.tags);
        for key in self.verify_keys.keys() {
            key.a.write_be(&mut out);
            key.b.write_be(&mut out);
        }
        out
    }

    /// Exact length of [`PlayerShare::to_bytes`].
    pub fn serialized_len(&self) -> usize {
        let n = self.params.n;
        let w = self.params.p.byte_width();
        let cells = self.cells.len();
        SHARE_HEADER_LEN + w * (cells * (3 + 2 * (n - 1)) + n + (cells + 1) * 4 * (n - 1))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ShareFormatError> {
        if bytes.len() < SHARE_HEADER_LEN {
            return Err(ShareFormatError::Truncated);
        }
        let u16_at = |i: usize| usize::from(u16::from_be_bytes([bytes[i], bytes[i + 1]]));
        let p = PrimeModulus::new(u32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes")))
            .map_err(|e| ShareFormatError::InvalidHeader(e.to_string()))?;
        let (n, m, k, owner) = (u16_at(4), u16_at(6), u16_at(8), u16_at(10));
        let cell_count = u32::from_be_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        if n < 2 || owner >= n || k == 0 || k > m || m > n || n as u64 >= u64::from(p.get()) {
            return Err(ShareFormatError::InvalidHeader(format!("n={n} m={m} k={k} owner={owner} p={p}")));
        }
        let params = ProtocolParams { p, n, m, k };
        let owner = PlayerId(owner);
        let x = owner.abscissa();
        let w = p.byte_width();
        let expected = SHARE_HEADER_LEN + w * (cell_count * (3 + 2 * (n - 1)) + n + (cell_count + 1) * 4 * (n - 1));
        if bytes.len() < expected {
            return Err(ShareFormatError::Truncated);
        }
        if bytes.len() > expected {
            return Err(ShareFormatError::TrailingBytes(bytes.len() - expected));
        }

        let mut cursor = Reader { bytes: &bytes[SHARE_HEADER_LEN..], p, w };
        let mut cells = Vec::with_capacity(cell_count);
        for _ in 0..cell_count {
            let masked = SharePoint::new(x, cursor.element()?);
            let tags1 = cursor.tags(n - 1)?;
            let mask = SharePoint::new(x, cursor.element()?);
            let indicator = SharePoint::new(x, cursor.element()?);
            let tags2 = cursor.tags(n - 1)?;
            cells.push(GameCell {
                stage1: Stage1Material { masked, tags: tags1 },
                stage2: Stage2Material { mask, indicator, tags: tags2 },
            });
        }
        let masked = SharePoint::new(x, cursor.element()?);
        let half = HalfCell { stage1: Stage1Material { masked, tags: cursor.tags(n - 1)? } };
        let key_count = (cell_count + 1) * 2 * (n - 1);
        let mut keys = Vec::with_capacity(key_count);
        for _ in 0..key_count {
            keys.push(MacKey { a: cursor.element()?, b: cursor.element()? });
        }
        Ok(PlayerShare { params, owner, cells, half, verify_keys: KeyTable::from_keys(owner, n, keys) })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    p: PrimeModulus,
    w: usize,
}

impl Reader<'_> {
    fn element(&mut self) -> Result<FieldElement, ShareFormatError> {
        if self.bytes.len() < self.w {
            return Err(ShareFormatError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(self.w);
        self.bytes = tail;
        Ok(FieldElement::read_be(self.p, head)?)
    }

    fn tags(&mut self, count: usize) -> Result<TagSet, ShareFormatError> {
        (0..count).map(|_| self.element().map(Tag)).collect::<Result<_, _>>().map(TagSet)
    }
}

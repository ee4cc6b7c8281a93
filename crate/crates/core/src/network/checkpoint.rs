//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "MTPF"                      magic
//! u32                         format version
//! u64 len, UTF-8 bytes        architecture descriptor
//! u64 len, UTF-8 bytes        free-form metadata (encoder descriptors, ...)
//! u64 count, count x f64      parameters in declaration order
//! 32 bytes                    SHA-256 of everything above
//! ```

use sha2::{Digest, Sha256};

use super::{Model, NetworkError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MTPF";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(model: &Model, metadata: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for text in [model.descriptor(), metadata.to_string()] {
        out.extend_from_slice(&(text.len() as u64).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
    }
    out.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(NetworkError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn text(&mut self) -> Result<String> {
        let len = usize::try_from(self.u64()?).map_err(|_| NetworkError::Truncated)?;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| NetworkError::BadDescriptor("descriptor is not UTF-8".into()))
    }
}

/// Parses a checkpoint, returning the model and its metadata text.
pub fn read_checkpoint(bytes: &[u8]) -> Result<(Model, String)> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(NetworkError::BadMagic);
    }
    if bytes.len() < 8 + 32 {
        return Err(NetworkError::Truncated);
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(NetworkError::ChecksumMismatch);
    }
    let mut r = Reader { bytes: &body[4..] };
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(NetworkError::UnsupportedVersion(version));
    }
    let descriptor = r.text()?;
    let metadata = r.text()?;
    let count = usize::try_from(r.u64()?).map_err(|_| NetworkError::Truncated)?;
    let raw = r.take(count.checked_mul(8).ok_or(NetworkError::Truncated)?)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (spec, seed) = Model::parse_descriptor(&descriptor)?;
    Ok((Model::from_params(spec, params, seed)?, metadata))
}

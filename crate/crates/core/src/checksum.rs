use sha2::{Digest, Sha256};

/// 64-bit content digest: the first eight bytes of SHA-256, read little-endian.
pub fn digest64(bytes: &[u8]) -> u64 {
    let full = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&full[..8]);
    u64::from_le_bytes(head)
}

pub fn digest64_hex(bytes: &[u8]) -> String {
    format!("{:016x}", digest64(bytes))
}

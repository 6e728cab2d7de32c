use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A 64-bit stream seed for a named component, so adding a component
/// never shifts the randomness of the others.
pub fn derive_seed(seed: u64, component: &str) -> u64 {
    let d = Sha256::digest(component.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&d[..8]);
    seed ^ u64::from_le_bytes(head)
}

use super::MemoryError;

pub const DEFAULT_DIM: usize = 64;
pub const MIN_DIM: usize = 8;

/// Maps text to a unit-norm feature vector.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<f64>, MemoryError>;
}

/// Hashed bag of lowercase alphanumeric tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashedEncoder {
    pub dim: usize,
}

impl TextEncoder for HashedEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, MemoryError> {
        encode_text(text, self.dim)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

// 64-bit FNV-1a; stable across platforms and releases, unlike std's hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn encode_text(text: &str, dim: usize) -> Result<Vec<f64>, MemoryError> {
    if dim < MIN_DIM {
        return Err(MemoryError::DimTooSmall(dim));
    }
    if text.trim().is_empty() {
        return Err(MemoryError::EmptyText);
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(MemoryError::NoTokens(text.to_string()));
    }
    let mut v = vec![0.0; dim];
    for tok in &tokens {
        v[(fnv1a(tok.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_tokenless() {
        assert!(matches!(encode_text("", 64), Err(MemoryError::EmptyText)));
        assert!(matches!(encode_text("  \n", 64), Err(MemoryError::EmptyText)));
        assert!(matches!(encode_text("?!", 64), Err(MemoryError::NoTokens(_))));
        assert!(matches!(encode_text("ok", 4), Err(MemoryError::DimTooSmall(4))));
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        assert_eq!(encode_text("Buy, LAPTOP!", 64).unwrap(), encode_text("buy laptop", 64).unwrap());
    }
}

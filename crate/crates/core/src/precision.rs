use serde::{Deserialize, Serialize};

/// Working precision and the escalation ceiling for certified comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub bits: u32,
    pub max_bits: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            bits: 128,
            max_bits: 4096,
        }
    }
}

impl Precision {
    pub fn new(bits: u32, max_bits: u32) -> Self {
        assert!(bits >= 8, "precision floor too small");
        Precision {
            bits,
            max_bits: max_bits.max(bits),
        }
    }

    /// Precisions to try, doubling from `bits` up to `max_bits`.
    pub fn ladder(&self) -> impl Iterator<Item = u32> {
        let max = self.max_bits;
        std::iter::successors(Some(self.bits), move |&b| {
            if b >= max {
                None
            } else {
                Some((b * 2).min(max))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_doubles_to_cap() {
        let v: Vec<u32> = Precision::new(64, 500).ladder().collect();
        assert_eq!(v, vec![64, 128, 256, 500]);
        let one: Vec<u32> = Precision::new(64, 64).ladder().collect();
        assert_eq!(one, vec![64]);
    }
}

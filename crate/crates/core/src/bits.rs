//! Packed bit sequences.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    /// Spatial (which-detector) bits.
    S,
    /// Pair-XOR of consecutive non-overlapping S bits.
    Y,
    /// Temporal (interval comparison) bits.
    T,
    /// Final combined output, T xor Y.
    C,
    /// Anything else: imported files, synthetic sources.
    Raw,
}

impl StreamLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamLabel::S => "S",
            StreamLabel::Y => "Y",
            StreamLabel::T => "T",
            StreamLabel::C => "C",
            StreamLabel::Raw => "raw",
        }
    }
}

impl fmt::Display for StreamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bits packed LSB-first into `u64` words: bit `i` lives in word `i / 64` at
/// position `i % 64`. Bits past `len` in the last word are always zero.
#[derive(Clone)]
pub struct BitStream {
    label: StreamLabel,
    words: Vec<u64>,
    len: usize,
    /// Simulated seconds it took to produce the stream (0 when unknown).
    pub production_time: f64,
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitStream({}, {} bits", self.label, self.len)?;
        if self.len <= 64 {
            write!(f, ", ")?;
            for b in self.iter() {
                write!(f, "{}", b as u8)?;
            }
        }
        write!(f, ")")
    }
}

/// Equality compares label and content; `production_time` is metadata.
impl PartialEq for BitStream {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.len == other.len && self.words == other.words
    }
}

impl Eq for BitStream {}

impl BitStream {
    pub fn new(label: StreamLabel) -> Self {
        BitStream {
            label,
            words: Vec::new(),
            len: 0,
            production_time: 0.0,
        }
    }

    pub fn with_capacity(label: StreamLabel, bits: usize) -> Self {
        BitStream {
            label,
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
            production_time: 0.0,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(label: StreamLabel, bits: I) -> Self {
        let mut s = BitStream::new(label);
        s.extend(bits);
        s
    }

    /// Accepts `0`/`1` bytes; any nonzero byte is a one.
    pub fn from_bytes(label: StreamLabel, bytes: &[u8]) -> Self {
        Self::from_bits(label, bytes.iter().map(|&b| b != 0))
    }

    /// Builds a stream from whole words; bits past `len` are cleared.
    pub fn from_words(label: StreamLabel, mut words: Vec<u64>, len: usize) -> Self {
        assert!(len <= words.len() * 64, "len exceeds word storage");
        words.truncate(len.div_ceil(64));
        if len % 64 != 0 {
            let last = words.len() - 1;
            words[last] &= (1u64 << (len % 64)) - 1;
        }
        BitStream {
            label,
            words,
            len,
            production_time: 0.0,
        }
    }

    pub fn label(&self) -> StreamLabel {
        self.label
    }

    pub fn relabel(mut self, label: StreamLabel) -> Self {
        self.label = label;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        let off = self.len % 64;
        if off == 0 {
            self.words.push(bit as u64);
        } else if bit {
            *self.words.last_mut().unwrap() |= 1u64 << off;
        }
        self.len += 1;
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| (self.words[i / 64] >> (i % 64)) & 1 == 1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.iter().map(|b| b as u8).collect()
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Number of ones among bits `[start, start + len)`.
    pub fn count_ones_range(&self, start: usize, len: usize) -> u64 {
        assert!(start + len <= self.len);
        if len == 0 {
            return 0;
        }
        let end = start + len;
        let (first, last) = (start / 64, (end - 1) / 64);
        let lo_mask = !0u64 << (start % 64);
        let hi_mask = if end % 64 == 0 {
            !0u64
        } else {
            (1u64 << (end % 64)) - 1
        };
        if first == last {
            return (self.words[first] & lo_mask & hi_mask).count_ones() as u64;
        }
        let mut n = (self.words[first] & lo_mask).count_ones() as u64;
        n += self.words[first + 1..last]
            .iter()
            .map(|w| w.count_ones() as u64)
            .sum::<u64>();
        n + (self.words[last] & hi_mask).count_ones() as u64
    }

    /// The 64 bits starting at bit `start` (zero-filled past the end).
    #[inline]
    pub(crate) fn word_at(&self, start: usize) -> u64 {
        let (w, off) = (start / 64, start % 64);
        let lo = self.words.get(w).copied().unwrap_or(0);
        if off == 0 {
            lo
        } else {
            let hi = self.words.get(w + 1).copied().unwrap_or(0);
            (lo >> off) | (hi << (64 - off))
        }
    }

    /// First `n` bits (or all, if shorter).
    pub fn prefix(&self, n: usize) -> BitStream {
        let n = n.min(self.len);
        let mut out = BitStream::from_words(self.label, self.words[..n.div_ceil(64)].to_vec(), n);
        out.production_time = self.production_time;
        out
    }

    /// Bits `[start, start + len)` as a new stream.
    pub fn slice(&self, start: usize, len: usize) -> BitStream {
        assert!(start + len <= self.len);
        let words = (0..len.div_ceil(64)).map(|k| self.word_at(start + 64 * k)).collect();
        BitStream::from_words(self.label, words, len)
    }

    /// Bitwise XOR over the common prefix.
    pub fn xor_prefix(&self, other: &BitStream, label: StreamLabel) -> BitStream {
        let n = self.len.min(other.len);
        let nw = n.div_ceil(64);
        let words = self.words[..nw]
            .iter()
            .zip(&other.words[..nw])
            .map(|(a, b)| a ^ b)
            .collect();
        BitStream::from_words(label, words, n)
    }

    pub fn truncate(&mut self, n: usize) {
        if n >= self.len {
            return;
        }
        let words = std::mem::take(&mut self.words);
        let t = BitStream::from_words(self.label, words, n);
        self.words = t.words;
        self.len = n;
    }
}

impl Extend<bool> for BitStream {
    fn extend<I: IntoIterator<Item = bool>>(&mut self, iter: I) {
        for b in iter {
            self.push(b);
        }
    }
}

/// Gathers the even-position bits of `x` into the low 32 bits.
#[inline]
pub(crate) fn compress_even(mut x: u64) -> u64 {
    x &= 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF
}

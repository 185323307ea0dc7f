//! DNA alphabet handling: 2-bit packing, lexicographic comparison, reverse
//! complements and canonical k-mers.
//!
//! Bases are encoded A=0, C=1, G=2, T=3 so that comparing packed codes is the
//! same as comparing the original strings. Within each storage byte the first
//! base occupies the two most significant bits, which lets equal-length
//! sequences be compared bytewise.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A single nucleotide with its 2-bit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Base {
    A = 0,
    C = 1,
    G = 2,
    T = 3,
}

impl Base {
    /// Decodes an ASCII byte, case-insensitively.
    pub fn from_ascii(byte: u8) -> Option<Base> {
        match byte {
            b'A' | b'a' => Some(Base::A),
            b'C' | b'c' => Some(Base::C),
            b'G' | b'g' => Some(Base::G),
            b'T' | b't' => Some(Base::T),
            _ => None,
        }
    }

    pub fn from_code(code: u8) -> Base {
        match code & 3 {
            0 => Base::A,
            1 => Base::C,
            2 => Base::G,
            _ => Base::T,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn to_ascii(self) -> u8 {
        match self {
            Base::A => b'A',
            Base::C => b'C',
            Base::G => b'G',
            Base::T => b'T',
        }
    }

    /// Watson-Crick complement: A<->T, C<->G. With this encoding the
    /// complement of a code is its bitwise negation in two bits.
    pub fn complement(self) -> Base {
        Base::from_code(3 - self.code())
    }
}

/// Which strand a substring was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strand {
    Forward,
    Reverse,
}

/// A DNA string stored at 2 bits per base, 4 bases per byte, first base in
/// the high bits of each byte. Trailing bits of the last byte are zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PackedSequence {
    len: usize,
    payload: Vec<u8>,
}

impl PackedSequence {
    /// Packs an ASCII string over ACGT (case-insensitive). Any other byte is
    /// an ingestion error naming the offending position.
    pub fn from_ascii(seq: &[u8]) -> Result<PackedSequence> {
        let mut payload = vec![0u8; seq.len().div_ceil(4)];
        for (i, &byte) in seq.iter().enumerate() {
            let base = Base::from_ascii(byte).ok_or(Error::InvalidBase { position: i, byte })?;
            payload[i / 4] |= base.code() << shift(i);
        }
        Ok(PackedSequence {
            len: seq.len(),
            payload,
        })
    }

    /// Builds a sequence directly from 2-bit codes.
    pub fn from_codes(codes: impl IntoIterator<Item = u8>) -> PackedSequence {
        let mut seq = PackedSequence::default();
        for code in codes {
            seq.push_code(code);
        }
        seq
    }

    /// Reconstructs a sequence from a packed payload, as stored on disk.
    pub fn from_payload(len: usize, payload: Vec<u8>) -> Result<PackedSequence> {
        if payload.len() != len.div_ceil(4) {
            return Err(Error::InvalidArgument(format!(
                "payload of {} bytes cannot hold {} bases",
                payload.len(),
                len
            )));
        }
        let mut seq = PackedSequence { len, payload };
        seq.clear_tail();
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// 2-bit code of the base at `index`.
    #[inline]
    pub fn code(&self, index: usize) -> u8 {
        debug_assert!(index < self.len);
        (self.payload[index / 4] >> shift(index)) & 3
    }

    pub fn base(&self, index: usize) -> Base {
        Base::from_code(self.code(index))
    }

    pub fn push_code(&mut self, code: u8) {
        if self.len % 4 == 0 {
            self.payload.push(0);
        }
        let i = self.len;
        self.payload[i / 4] |= (code & 3) << shift(i);
        self.len += 1;
    }

    fn clear_tail(&mut self) {
        if self.len % 4 != 0 {
            let keep = self.len % 4;
            let mask = !0u8 << (8 - 2 * keep);
            if let Some(last) = self.payload.last_mut() {
                *last &= mask;
            }
        }
    }

    pub fn to_ascii(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.base(i).to_ascii()).collect()
    }

    /// Copies out `range` as a new sequence.
    pub fn subsequence(&self, start: usize, len: usize) -> PackedSequence {
        assert!(start + len <= self.len, "subsequence out of range");
        PackedSequence::from_codes((start..start + len).map(|i| self.code(i)))
    }

    /// The sequence read backwards with every base complemented.
    pub fn reverse_complement(&self) -> PackedSequence {
        PackedSequence::from_codes((0..self.len).rev().map(|i| 3 - self.code(i)))
    }

    /// Code at `index` of the substring of length `len` starting at `start`,
    /// viewed on `strand`. On the reverse strand the substring reads the
    /// covered bases backwards, complemented.
    #[inline]
    pub fn oriented_code(&self, start: usize, len: usize, strand: Strand, index: usize) -> u8 {
        match strand {
            Strand::Forward => self.code(start + index),
            Strand::Reverse => 3 - self.code(start + len - 1 - index),
        }
    }

    /// Lexicographically compares the length-`len` substrings described by
    /// `(a_start, a_strand)` and `(b_start, b_strand)` without allocating.
    pub fn cmp_oriented(
        &self,
        a_start: usize,
        a_strand: Strand,
        b_start: usize,
        b_strand: Strand,
        len: usize,
    ) -> Ordering {
        for i in 0..len {
            let a = self.oriented_code(a_start, len, a_strand, i);
            let b = self.oriented_code(b_start, len, b_strand, i);
            match a.cmp(&b) {
                Ordering::Equal => {}
                other => return other,
            }
        }
        Ordering::Equal
    }

    /// Extracts the oriented substring as an owned sequence.
    pub fn oriented_subsequence(&self, start: usize, len: usize, strand: Strand) -> PackedSequence {
        PackedSequence::from_codes((0..len).map(|i| self.oriented_code(start, len, strand, i)))
    }

    /// Packs up to 32 leading bases into a big-endian-style integer: the
    /// first base lands in the most significant occupied bits, so comparing
    /// values of equal-length sequences is lexicographic comparison.
    pub fn prefix_value_u64(&self, len: usize) -> u64 {
        debug_assert!(len <= 32 && len <= self.len);
        let mut value = 0u64;
        for i in 0..len {
            value = (value << 2) | u64::from(self.code(i));
        }
        value
    }

    /// Packs up to 64 bases starting at `start` into a u128, first base most
    /// significant.
    pub fn range_value_u128(&self, start: usize, len: usize) -> u128 {
        debug_assert!(len <= 64 && start + len <= self.len);
        let mut value = 0u128;
        for i in start..start + len {
            value = (value << 2) | u128::from(self.code(i));
        }
        value
    }
}

impl PartialOrd for PackedSequence {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PackedSequence {
    /// Lexicographic order of the unpacked strings. Bytewise comparison is
    /// correct because codes are order-preserving and packed high-bits-first;
    /// equal payloads fall back to length so a proper prefix sorts first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.payload
            .cmp(&other.payload)
            .then(self.len.cmp(&other.len))
    }
}

impl fmt::Display for PackedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.base(i).to_ascii() as char)?;
        }
        Ok(())
    }
}

#[inline]
fn shift(index: usize) -> u32 {
    6 - 2 * (index % 4) as u32
}

/// A read with the pre-assigned ordinal of its first k-mer occurrence.
#[derive(Debug, Clone)]
pub struct ShortRead {
    pub ordinal_base: u64,
    pub sequence: PackedSequence,
}

/// Packs an ASCII base string; alias for [`PackedSequence::from_ascii`].
pub fn pack(seq: &str) -> Result<PackedSequence> {
    PackedSequence::from_ascii(seq.as_bytes())
}

/// Reverse complement of a packed sequence.
pub fn reverse_complement(seq: &PackedSequence) -> PackedSequence {
    seq.reverse_complement()
}

/// Canonical form of a k-mer: the lexicographic minimum of the k-mer and its
/// reverse complement. Idempotent, and identical for a k-mer and its RC.
pub fn canonical_kmer(kmer: &PackedSequence) -> PackedSequence {
    let rc = kmer.reverse_complement();
    if rc < *kmer {
        rc
    } else {
        kmer.clone()
    }
}

//! Phase-free n-qubit Pauli algebra in the binary symplectic representation.
//!
//! A Pauli operator modulo phase is a pair of bit vectors `(x, z)`: qubit `q`
//! carries I, X, Y or Z according to `(x_q, z_q)` = (0,0), (1,0), (1,1), (0,1).
//! Phases are not tracked anywhere in this crate: Pauli-channel probabilities
//! and commutation relations are phase-independent, and maximum-likelihood
//! decoding over a Pauli channel depends only on phase-free cosets.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    /// Decode from the per-qubit symplectic bit pair.
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    /// The `(x, z)` bit pair of this letter.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    /// Product modulo phase: XOR of the bit pairs.
    pub fn mul(self, other: Letter) -> Letter {
        let (ax, az) = self.bits();
        let (bx, bz) = other.bits();
        Letter::from_bits(ax ^ bx, az ^ bz)
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self, PauliError> {
        match c {
            'I' | 'i' => Ok(Letter::I),
            'X' | 'x' => Ok(Letter::X),
            'Y' | 'y' => Ok(Letter::Y),
            'Z' | 'z' => Ok(Letter::Z),
            other => Err(PauliError::InvalidLetter(other)),
        }
    }

    /// Index into `[I, X, Y, Z]`-ordered tables.
    pub fn index(self) -> usize {
        match self {
            Letter::I => 0,
            Letter::X => 1,
            Letter::Y => 2,
            Letter::Z => 3,
        }
    }

    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PauliError {
    #[error("operator lengths differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid Pauli letter {0:?}")]
    InvalidLetter(char),
}

/// An n-qubit Pauli operator modulo phase, stored as packed X/Z bit vectors.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliOp {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

const WORD_BITS: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

impl PauliOp {
    /// The identity on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliOp {
            n,
            x: vec![0; w],
            z: vec![0; w],
        }
    }

    /// A single-qubit letter embedded in an n-qubit identity.
    pub fn single(n: usize, q: usize, letter: Letter) -> Result<Self, PauliError> {
        let mut op = PauliOp::identity(n);
        op.set_letter(q, letter)?;
        Ok(op)
    }

    /// Build from per-qubit letters in index order.
    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut op = PauliOp::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            op.set_letter(q, l).expect("index in range by construction");
        }
        op
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set_letter(&mut self, q: usize, letter: Letter) -> Result<(), PauliError> {
        if q >= self.n {
            return Err(PauliError::IndexOutOfRange { index: q, n: self.n });
        }
        let (w, b) = (q / WORD_BITS, q % WORD_BITS);
        let (xb, zb) = letter.bits();
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
        Ok(())
    }

    /// Per-qubit letter at index `q`.
    pub fn letter_at(&self, q: usize) -> Result<Letter, PauliError> {
        if q >= self.n {
            return Err(PauliError::IndexOutOfRange { index: q, n: self.n });
        }
        let (w, b) = (q / WORD_BITS, q % WORD_BITS);
        Ok(Letter::from_bits(
            (self.x[w] >> b) & 1 == 1,
            (self.z[w] >> b) & 1 == 1,
        ))
    }

    /// Product modulo phase: componentwise XOR of both bit vectors.
    pub fn multiply(&self, other: &PauliOp) -> Result<PauliOp, PauliError> {
        if self.n != other.n {
            return Err(PauliError::DimensionMismatch(self.n, other.n));
        }
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        Ok(PauliOp { n: self.n, x, z })
    }

    /// In-place product, used in inner loops to avoid allocation.
    pub fn multiply_assign(&mut self, other: &PauliOp) -> Result<(), PauliError> {
        if self.n != other.n {
            return Err(PauliError::DimensionMismatch(self.n, other.n));
        }
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a ^= b;
        }
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a ^= b;
        }
        Ok(())
    }

    /// Symplectic form: `Σ_q (a.x_q·b.z_q + a.z_q·b.x_q) mod 2`.
    pub fn symplectic_form(&self, other: &PauliOp) -> Result<u8, PauliError> {
        if self.n != other.n {
            return Err(PauliError::DimensionMismatch(self.n, other.n));
        }
        let mut acc = 0u32;
        for i in 0..self.x.len() {
            acc ^= (self.x[i] & other.z[i]).count_ones();
            acc ^= (self.z[i] & other.x[i]).count_ones();
        }
        Ok((acc & 1) as u8)
    }

    /// True iff the two operators commute (symplectic form vanishes).
    pub fn commutes(&self, other: &PauliOp) -> Result<bool, PauliError> {
        Ok(self.symplectic_form(other)? == 0)
    }

    /// Number of qubits with a non-identity letter.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// The operator's 2n-bit symplectic vector as (x bits, z bits), little-endian
    /// per qubit. Used by the GF(2) elimination in code construction.
    pub fn symplectic_bits(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(2 * self.n);
        for q in 0..self.n {
            let (w, b) = (q / WORD_BITS, q % WORD_BITS);
            bits.push((self.x[w] >> b) & 1 == 1);
        }
        for q in 0..self.n {
            let (w, b) = (q / WORD_BITS, q % WORD_BITS);
            bits.push((self.z[w] >> b) & 1 == 1);
        }
        bits
    }

    /// Inverse of [`symplectic_bits`](Self::symplectic_bits).
    pub fn from_symplectic_bits(bits: &[bool]) -> PauliOp {
        assert!(bits.len() % 2 == 0, "symplectic vector length must be even");
        let n = bits.len() / 2;
        let mut op = PauliOp::identity(n);
        for q in 0..n {
            let letter = Letter::from_bits(bits[q], bits[n + q]);
            op.set_letter(q, letter).expect("in range");
        }
        op
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.letter_at(q).expect("in range").as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOp {
    // render the letter string; a raw bit-vector dump is useless in test output
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for PauliOp {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, PauliError> {
        let letters: Result<Vec<Letter>, PauliError> =
            s.chars().map(Letter::from_char).collect();
        Ok(PauliOp::from_letters(&letters?))
    }
}

//! Rotated surface codes: construction, validation, XY deformation, and the
//! qubit/stabilizer geometry queries used by placement and decoding.
//!
//! Layout convention for distance d (odd, >= 3): data qubits live on a d x d
//! grid at integer coordinates (row, col), indexed row-major. Faces sit between
//! grid points; the face with coordinate (fr, fc) touches the up-to-four qubits
//! (fr, fc), (fr, fc+1), (fr+1, fc), (fr+1, fc+1) that fall on the grid.
//! Interior faces (0 <= fr, fc <= d-2) are X-type when (fr + fc) is even and
//! Z-type when odd. Weight-2 X-type faces sit on the top (fr = -1, fc odd) and
//! bottom (fr = d-1, fc even) boundaries; weight-2 Z-type faces on the left
//! (fc = -1, fr even) and right (fc = d-1, fr odd) boundaries, continuing the
//! interior parity. Stabilizers are ordered by (fr, fc) lexicographically.
//!
//! Any consistent convention satisfying the degree histogram and distance
//! checks is equivalent up to lattice relabeling; this one is fixed so golden
//! files and seeded runs are stable.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{Letter, PauliError, PauliOp};

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("code distance must be an odd integer >= 3, got {0}")]
    InvalidDistance(usize),
    #[error("the XY deformation can only be applied to a CSS-form code")]
    AlreadyDeformed,
    #[error("constructed code failed self-validation: {0}")]
    Validation(String),
    #[error("syndrome length {got} does not match stabilizer count {want}")]
    SyndromeLength { got: usize, want: usize },
    #[error("operator does not lie in the normalizer (nonzero syndrome)")]
    NonzeroSyndrome,
    #[error("pauli distance enumeration supports d <= {max}, got d = {d}")]
    DistanceTooLarge { d: usize, max: usize },
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// Exact rational, reduced, with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let sign = if den < 0 { -1 } else { 1 };
        Rational {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Stabilizer ratio r(d) = 4(d-1)/(3d-2): the published closed form for the
/// bulk-to-boundary syndrome information asymmetry of the rotated code.
pub fn stabilizer_ratio(d: usize) -> Result<Rational, CodeError> {
    check_distance(d)?;
    let d = d as i64;
    Ok(Rational::new(4 * (d - 1), 3 * d - 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Deformation {
    Css,
    Xy,
}

impl fmt::Display for Deformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deformation::Css => write!(f, "css"),
            Deformation::Xy => write!(f, "xy"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Corner,
    Edge,
    Bulk,
}

/// Per-qubit geometry: grid position, stabilizer degree, and region class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitGeometry {
    pub row: usize,
    pub col: usize,
    pub degree: usize,
    pub region: Region,
}

/// Face coordinate of a stabilizer; boundary faces use -1 or d-1 rows/cols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceCoord {
    pub row: i32,
    pub col: i32,
}

#[derive(Debug, Clone)]
pub struct Stabilizer {
    pub op: PauliOp,
    pub face: FaceCoord,
    /// Basis letter of the generator: X or Z in CSS form, X or Y after the
    /// XY deformation.
    pub kind: Letter,
}

/// A validated rotated surface code instance.
#[derive(Debug, Clone)]
pub struct CodeInstance {
    d: usize,
    n: usize,
    deformation: Deformation,
    stabilizers: Vec<Stabilizer>,
    logical_x: PauliOp,
    logical_z: PauliOp,
    destabilizers: Vec<PauliOp>,
    geometry: Vec<QubitGeometry>,
}

fn check_distance(d: usize) -> Result<(), CodeError> {
    if d < 3 || d % 2 == 0 {
        return Err(CodeError::InvalidDistance(d));
    }
    Ok(())
}

/// All face coordinates of the distance-d layout in stabilizer order, with the
/// CSS basis letter of each.
fn face_list(d: usize) -> Vec<(FaceCoord, Letter)> {
    let di = d as i32;
    let mut faces = Vec::with_capacity(d * d - 1);
    for fr in -1..di {
        for fc in -1..di {
            let interior = (0..di - 1).contains(&fr) && (0..di - 1).contains(&fc);
            let exists = if interior {
                true
            } else if fr == -1 {
                (0..di - 1).contains(&fc) && fc % 2 == 1 // top, X-type
            } else if fr == di - 1 {
                (0..di - 1).contains(&fc) && fc % 2 == 0 // bottom, X-type
            } else if fc == -1 {
                fr % 2 == 0 // left, Z-type
            } else if fc == di - 1 {
                fr % 2 == 1 // right, Z-type
            } else {
                false
            };
            if exists {
                let kind = if (fr + fc) % 2 == 0 { Letter::X } else { Letter::Z };
                faces.push((FaceCoord { row: fr, col: fc }, kind));
            }
        }
    }
    faces
}

/// Qubit indices touched by a face, row-major order.
pub(crate) fn face_qubits(d: usize, face: FaceCoord) -> Vec<usize> {
    let di = d as i32;
    let mut qs = Vec::with_capacity(4);
    for r in [face.row, face.row + 1] {
        for c in [face.col, face.col + 1] {
            if (0..di).contains(&r) && (0..di).contains(&c) {
                qs.push((r as usize) * d + c as usize);
            }
        }
    }
    qs
}

/// Build the distance-d rotated surface code in CSS form and self-validate.
pub fn build_css(d: usize) -> Result<CodeInstance, CodeError> {
    check_distance(d)?;
    let n = d * d;

    let mut stabilizers = Vec::with_capacity(n - 1);
    for (face, kind) in face_list(d) {
        let mut op = PauliOp::identity(n);
        for q in face_qubits(d, face) {
            op.set_letter(q, kind)?;
        }
        stabilizers.push(Stabilizer { op, face, kind });
    }

    // X string down column 0, Z string across row 0.
    let mut logical_x = PauliOp::identity(n);
    let mut logical_z = PauliOp::identity(n);
    for i in 0..d {
        logical_x.set_letter(i * d, Letter::X)?;
        logical_z.set_letter(i, Letter::Z)?;
    }

    let geometry = build_geometry(d, &stabilizers)?;
    let destabilizers = solve_destabilizers(n, &stabilizers)?;

    let code = CodeInstance {
        d,
        n,
        deformation: Deformation::Css,
        stabilizers,
        logical_x,
        logical_z,
        destabilizers,
        geometry,
    };
    code.validate()?;
    Ok(code)
}

fn build_geometry(d: usize, stabilizers: &[Stabilizer]) -> Result<Vec<QubitGeometry>, CodeError> {
    let n = d * d;
    let mut degree = vec![0usize; n];
    for s in stabilizers {
        for q in 0..n {
            if s.op.letter_at(q)? != Letter::I {
                degree[q] += 1;
            }
        }
    }
    let mut geometry = Vec::with_capacity(n);
    for q in 0..n {
        let region = match degree[q] {
            2 => Region::Corner,
            3 => Region::Edge,
            4 => Region::Bulk,
            other => {
                return Err(CodeError::Validation(format!(
                    "qubit {q} has degree {other}, expected 2, 3 or 4"
                )))
            }
        };
        geometry.push(QubitGeometry {
            row: q / d,
            col: q % d,
            degree: degree[q],
            region,
        });
    }
    Ok(geometry)
}

/// Solve for destabilizers t_i with form(t_i, g_j) = delta_ij by Gauss-Jordan
/// elimination over GF(2), scanning pivot columns left to right (x bits of
/// qubit 0..n-1, then z bits). Rows are packed into u64 words.
fn solve_destabilizers(n: usize, stabilizers: &[Stabilizer]) -> Result<Vec<PauliOp>, CodeError> {
    let m = stabilizers.len();
    let cols = 2 * n;
    let words = (cols + m).div_ceil(64);

    // Row j encodes form(v, g_j) as a linear functional of v = (x | z):
    // coefficients are (g_j.z | g_j.x). Columns cols..cols+m hold the
    // identity that accumulates the row operations.
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(m);
    for (j, s) in stabilizers.iter().enumerate() {
        let bits = s.op.symplectic_bits();
        let mut row = vec![0u64; words];
        for q in 0..n {
            if bits[n + q] {
                row[q / 64] |= 1 << (q % 64); // z bit of g hits x bit of v
            }
            if bits[q] {
                let c = n + q;
                row[c / 64] |= 1 << (c % 64);
            }
        }
        let c = cols + j;
        row[c / 64] |= 1 << (c % 64);
        rows.push(row);
    }

    let bit = |row: &[u64], c: usize| (row[c / 64] >> (c % 64)) & 1 == 1;

    let mut pivot_cols = Vec::with_capacity(m);
    let mut rank = 0usize;
    for c in 0..cols {
        let Some(p) = (rank..m).find(|&r| bit(&rows[r], c)) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && bit(row, c) {
                for (w, pw) in row.iter_mut().zip(&pivot_row) {
                    *w ^= pw;
                }
            }
        }
        pivot_cols.push(c);
        rank += 1;
        if rank == m {
            break;
        }
    }
    if rank != m {
        return Err(CodeError::Validation(format!(
            "stabilizer generators are dependent: rank {rank} < {m}"
        )));
    }

    // t_i is supported on the pivot columns; coefficient of pivot k is the
    // recorded row-op entry E[k][i].
    let mut destabilizers = Vec::with_capacity(m);
    for i in 0..m {
        let mut v = vec![false; cols];
        for (k, &pc) in pivot_cols.iter().enumerate() {
            if bit(&rows[k], cols + i) {
                v[pc] = true;
            }
        }
        destabilizers.push(PauliOp::from_symplectic_bits(&v));
    }
    Ok(destabilizers)
}

impl CodeInstance {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn deformation(&self) -> Deformation {
        self.deformation
    }

    pub fn stabilizers(&self) -> &[Stabilizer] {
        &self.stabilizers
    }

    pub fn logical_x(&self) -> &PauliOp {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &PauliOp {
        &self.logical_z
    }

    pub fn destabilizers(&self) -> &[PauliOp] {
        &self.destabilizers
    }

    pub fn geometry(&self) -> &[QubitGeometry] {
        &self.geometry
    }

    /// Representative of a logical class: I, X_L, Z_L or Y_L = X_L Z_L.
    pub fn logical_representative(&self, class: Letter) -> PauliOp {
        match class {
            Letter::I => PauliOp::identity(self.n),
            Letter::X => self.logical_x.clone(),
            Letter::Z => self.logical_z.clone(),
            Letter::Y => self
                .logical_x
                .multiply(&self.logical_z)
                .expect("same length"),
        }
    }

    /// Syndrome of an error: bit i set iff the error anticommutes with
    /// stabilizer generator i.
    pub fn syndrome(&self, error: &PauliOp) -> Result<Vec<bool>, CodeError> {
        if error.n() != self.n {
            return Err(PauliError::DimensionMismatch(error.n(), self.n).into());
        }
        self.stabilizers
            .iter()
            .map(|s| Ok(error.symplectic_form(&s.op)? == 1))
            .collect()
    }

    /// Canonical coset representative: the product of destabilizers selected
    /// by the syndrome bits. Its syndrome equals `s` exactly.
    pub fn pure_error(&self, s: &[bool]) -> Result<PauliOp, CodeError> {
        if s.len() != self.stabilizers.len() {
            return Err(CodeError::SyndromeLength {
                got: s.len(),
                want: self.stabilizers.len(),
            });
        }
        let mut op = PauliOp::identity(self.n);
        for (i, &b) in s.iter().enumerate() {
            if b {
                op.multiply_assign(&self.destabilizers[i])?;
            }
        }
        Ok(op)
    }

    /// Logical class of a zero-syndrome operator, from its commutation with
    /// the logical representatives: anticommuting with Z_L marks X_L-like
    /// action, anticommuting with X_L marks Z_L-like action.
    pub fn logical_class(&self, residual: &PauliOp) -> Result<Letter, CodeError> {
        if self.syndrome(residual)?.iter().any(|&b| b) {
            return Err(CodeError::NonzeroSyndrome);
        }
        Ok(self.logical_class_unchecked(residual))
    }

    /// [`logical_class`](Self::logical_class) without the syndrome precondition
    /// check, for trusted inner loops.
    pub fn logical_class_unchecked(&self, residual: &PauliOp) -> Letter {
        let anti_z = residual.symplectic_form(&self.logical_z).expect("same n") == 1;
        let anti_x = residual.symplectic_form(&self.logical_x).expect("same n") == 1;
        match (anti_z, anti_x) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (false, true) => Letter::Z,
            (true, true) => Letter::Y,
        }
    }

    /// Partition qubit indices by region: (bulk, edge, corner).
    pub fn classify_qubits(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let mut bulk = Vec::new();
        let mut edge = Vec::new();
        let mut corner = Vec::new();
        for (q, g) in self.geometry.iter().enumerate() {
            match g.region {
                Region::Bulk => bulk.push(q),
                Region::Edge => edge.push(q),
                Region::Corner => corner.push(q),
            }
        }
        (bulk, edge, corner)
    }

    /// Apply the single-qubit Clifford that fixes X and swaps Z and Y on every
    /// qubit, turning Z-type stabilizers into Y-type. Applying it twice is
    /// rejected: the map is its own inverse, so a second application would
    /// silently restore CSS form rather than produce a new code.
    pub fn apply_xy_deformation(&self) -> Result<CodeInstance, CodeError> {
        if self.deformation != Deformation::Css {
            return Err(CodeError::AlreadyDeformed);
        }
        let map_op = |op: &PauliOp| -> PauliOp {
            let letters: Vec<Letter> = (0..self.n)
                .map(|q| match op.letter_at(q).expect("in range") {
                    Letter::Z => Letter::Y,
                    Letter::Y => Letter::Z,
                    other => other,
                })
                .collect();
            PauliOp::from_letters(&letters)
        };
        let stabilizers = self
            .stabilizers
            .iter()
            .map(|s| Stabilizer {
                op: map_op(&s.op),
                face: s.face,
                kind: match s.kind {
                    Letter::Z => Letter::Y,
                    k => k,
                },
            })
            .collect();
        let code = CodeInstance {
            d: self.d,
            n: self.n,
            deformation: Deformation::Xy,
            stabilizers,
            logical_x: map_op(&self.logical_x),
            logical_z: map_op(&self.logical_z),
            destabilizers: self.destabilizers.iter().map(map_op).collect(),
            geometry: self.geometry.clone(),
        };
        code.validate()?;
        Ok(code)
    }

    /// Minimum weight of a nonidentity logical operator whose every
    /// non-identity site carries letter P, for P in {X, Y, Z}; `None` when no
    /// pure-letter logical exists in any class. Brute-force enumeration over
    /// all supports, limited to d <= 5.
    pub fn pauli_distances(&self) -> Result<[Option<usize>; 3], CodeError> {
        const MAX_D: usize = 5;
        if self.d > MAX_D {
            return Err(CodeError::DistanceTooLarge { d: self.d, max: MAX_D });
        }
        let n = self.n;
        let m = self.stabilizers.len();
        assert!(m <= 64, "syndrome fits one word for d <= 5");

        let mut out = [None; 3];
        for (li, letter) in [Letter::X, Letter::Y, Letter::Z].into_iter().enumerate() {
            // Per-qubit syndrome word and logical commutation bits for a single
            // `letter` at that qubit.
            let mut syn = vec![0u64; n];
            let mut class = vec![0u8; n];
            for q in 0..n {
                let single = PauliOp::single(n, q, letter)?;
                for (j, s) in self.stabilizers.iter().enumerate() {
                    if single.symplectic_form(&s.op)? == 1 {
                        syn[q] |= 1 << j;
                    }
                }
                let az = single.symplectic_form(&self.logical_z)?;
                let ax = single.symplectic_form(&self.logical_x)?;
                class[q] = az | (ax << 1);
            }
            // Gray-code walk over supports: one qubit toggles per step.
            let mut cur_syn = 0u64;
            let mut cur_class = 0u8;
            let mut cur_weight = 0usize;
            let mut in_support = vec![false; n];
            let mut best: Option<usize> = None;
            for g in 1u64..(1u64 << n) {
                let q = g.trailing_zeros() as usize;
                cur_syn ^= syn[q];
                cur_class ^= class[q];
                if in_support[q] {
                    cur_weight -= 1;
                } else {
                    cur_weight += 1;
                }
                in_support[q] = !in_support[q];
                if cur_syn == 0 && cur_class != 0 && best.is_none_or(|b| cur_weight < b) {
                    best = Some(cur_weight);
                }
            }
            out[li] = best;
        }
        Ok(out)
    }

    /// Self-validation run at construction: commutation, independence,
    /// logical algebra, destabilizer pairing, degree census, and (for the XY
    /// form) the stabilizer alphabet.
    fn validate(&self) -> Result<(), CodeError> {
        let m = self.stabilizers.len();
        if m != self.n - 1 {
            return Err(CodeError::Validation(format!(
                "expected {} stabilizers, built {m}",
                self.n - 1
            )));
        }
        for i in 0..m {
            for j in i + 1..m {
                if !self.stabilizers[i].op.commutes(&self.stabilizers[j].op)? {
                    return Err(CodeError::Validation(format!(
                        "stabilizers {i} and {j} anticommute"
                    )));
                }
            }
        }
        for (name, logical) in [("logical_x", &self.logical_x), ("logical_z", &self.logical_z)] {
            for (j, s) in self.stabilizers.iter().enumerate() {
                if !logical.commutes(&s.op)? {
                    return Err(CodeError::Validation(format!(
                        "{name} anticommutes with stabilizer {j}"
                    )));
                }
            }
        }
        if self.logical_x.commutes(&self.logical_z)? {
            return Err(CodeError::Validation(
                "logical_x and logical_z do not anticommute".into(),
            ));
        }
        for (i, t) in self.destabilizers.iter().enumerate() {
            for (j, s) in self.stabilizers.iter().enumerate() {
                let anti = t.symplectic_form(&s.op)? == 1;
                if anti != (i == j) {
                    return Err(CodeError::Validation(format!(
                        "destabilizer {i} pairing violated at generator {j}"
                    )));
                }
            }
        }
        let (bulk, edge, corner) = self.classify_qubits();
        let d = self.d;
        if bulk.len() != (d - 2) * (d - 2) || edge.len() != 4 * (d - 2) || corner.len() != 4 {
            return Err(CodeError::Validation(format!(
                "region census ({}, {}, {}) does not match distance {d}",
                bulk.len(),
                edge.len(),
                corner.len()
            )));
        }
        let degree_sum: usize = self.geometry.iter().map(|g| g.degree).sum();
        let weight_sum: usize = self.stabilizers.iter().map(|s| s.op.weight()).sum();
        if degree_sum != weight_sum {
            return Err(CodeError::Validation(format!(
                "degree sum {degree_sum} != stabilizer weight sum {weight_sum}"
            )));
        }
        if self.deformation == Deformation::Xy {
            for (j, s) in self.stabilizers.iter().enumerate() {
                for q in 0..self.n {
                    if s.op.letter_at(q)? == Letter::Z {
                        return Err(CodeError::Validation(format!(
                            "XY-form stabilizer {j} carries a Z letter at qubit {q}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Serializable description used by `build-code` and golden files.
    pub fn describe(&self) -> CodeDescription {
        let mut degrees: BTreeMap<usize, usize> = BTreeMap::new();
        for g in &self.geometry {
            *degrees.entry(g.degree).or_default() += 1;
        }
        let (bulk, edge, corner) = self.classify_qubits();
        let r = stabilizer_ratio(self.d).expect("validated distance");
        CodeDescription {
            d: self.d,
            n: self.n,
            deformation: self.deformation,
            stabilizers: self
                .stabilizers
                .iter()
                .map(|s| StabilizerDescription {
                    face: [s.face.row, s.face.col],
                    kind: s.kind.as_char(),
                    letters: s.op.to_string(),
                })
                .collect(),
            logical_x: self.logical_x.to_string(),
            logical_z: self.logical_z.to_string(),
            destabilizers: self.destabilizers.iter().map(|t| t.to_string()).collect(),
            degrees,
            region_counts: RegionCounts {
                bulk: bulk.len(),
                edge: edge.len(),
                corner: corner.len(),
            },
            stabilizer_ratio: r,
            stabilizer_ratio_value: r.to_f64(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizerDescription {
    pub face: [i32; 2],
    pub kind: char,
    pub letters: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegionCounts {
    pub bulk: usize,
    pub edge: usize,
    pub corner: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodeDescription {
    pub d: usize,
    pub n: usize,
    pub deformation: Deformation,
    pub stabilizers: Vec<StabilizerDescription>,
    pub logical_x: String,
    pub logical_z: String,
    pub destabilizers: Vec<String>,
    pub degrees: BTreeMap<usize, usize>,
    pub region_counts: RegionCounts,
    pub stabilizer_ratio: Rational,
    pub stabilizer_ratio_value: f64,
}

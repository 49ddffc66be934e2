//! Maximum-likelihood decoding of biased Pauli noise on rotated surface codes.
//!
//! For a syndrome s, the decoder scores the four logical classes by their
//! coset probabilities pi_L(s) = sum over stabilizer elements S of
//! prod_q P_q((E_s · L · S)_q), where E_s is the canonical pure error. Two
//! routes compute the scores:
//!
//! * [`exact_coset_likelihoods`] sums the full stabilizer group (2^8 elements
//!   at d=3; 2^24 at d=5 behind an explicit opt-in). It is the oracle.
//! * [`TnDecoder`] contracts the planar tensor network of the code: one binary
//!   summation variable per stabilizer (a delta tensor on its face), one
//!   tensor per qubit whose entries are channel probabilities of the local
//!   letter. Columns are swept right to left with a [`BoundaryMps`] at bond
//!   cap chi. The sweep runs once per class pair: classes that differ by the
//!   X_L representative share every column except qubit column 0, so the
//!   boundary is checkpointed there and completed per class.
//!
//! Scores are natural-log values, comparable across classes; -inf marks an
//! empty coset (possible under infinite bias), never NaN.

use serde::Serialize;
use thiserror::Error;

use crate::code::{CodeError, CodeInstance, FaceCoord};
use crate::noise::NoiseModel;
use crate::pauli::{Letter, PauliOp};
use crate::tensor::{BoundaryMps, ColumnTensor, DenseTensor, TensorError};

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error("exact enumeration supports d=3, or d=5 with opt_in_d5 (got d={0})")]
    ExactTooLarge(usize),
    #[error("syndrome length {got} does not match stabilizer count {want}")]
    SyndromeLength { got: usize, want: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Pauli(#[from] crate::pauli::PauliError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Which likelihood route produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodMethod {
    Exact,
    Tn,
}

/// Log coset probabilities for the four logical classes, indexed by
/// [`Letter::index`] (I, X, Y, Z).
#[derive(Debug, Clone, Serialize)]
pub struct CosetLikelihoods {
    pub log_pi: [f64; 4],
    pub method: LikelihoodMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<usize>,
    /// Total SVD discarded weight across the class contractions (0 for exact).
    pub discarded_weight: f64,
}

impl CosetLikelihoods {
    /// Argmax class with the fixed tie-break order I < X < Z < Y.
    pub fn chosen_class(&self) -> Letter {
        let mut best = Letter::I;
        for letter in [Letter::X, Letter::Z, Letter::Y] {
            if self.log_pi[letter.index()] > self.log_pi[best.index()] {
                best = letter;
            }
        }
        best
    }
}

/// A decoded correction: apply `op` to restore the codespace.
#[derive(Debug, Clone)]
pub struct Correction {
    pub op: PauliOp,
    pub chosen_class: Letter,
    pub likelihoods: CosetLikelihoods,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMethod {
    Exact { opt_in_d5: bool },
    Tn { chi: usize },
}

/// Symplectic 2-bit code of a letter: I=0, X=1, Z=2, Y=3 (x | z<<1).
fn sym_code(l: Letter) -> u8 {
    let (x, z) = l.bits();
    x as u8 | ((z as u8) << 1)
}

/// Per-qubit letter probabilities indexed by symplectic code.
fn prob_table(model: &NoiseModel, q: usize) -> [f64; 4] {
    let ch = model.channel(q);
    [ch.prob(Letter::I), ch.prob(Letter::X), ch.prob(Letter::Z), ch.prob(Letter::Y)]
}

fn letter_codes(op: &PauliOp) -> Vec<u8> {
    (0..op.n())
        .map(|q| sym_code(op.letter_at(q).expect("in range")))
        .collect()
}

/// Exact coset likelihoods by full stabilizer-group enumeration.
///
/// Walks the 2^(n-1) group elements in Gray-code order, maintaining the
/// letter codes of the current element, and accumulates each coset in log
/// domain with a streaming max-shifted sum.
pub fn exact_coset_likelihoods(
    code: &CodeInstance,
    model: &NoiseModel,
    syndrome: &[bool],
    opt_in_d5: bool,
) -> Result<CosetLikelihoods, DecoderError> {
    let d = code.d();
    if !(d == 3 || (d == 5 && opt_in_d5)) {
        return Err(DecoderError::ExactTooLarge(d));
    }
    let m = code.stabilizers().len();
    if syndrome.len() != m {
        return Err(DecoderError::SyndromeLength {
            got: syndrome.len(),
            want: m,
        });
    }
    let n = code.n();
    let pure = code.pure_error(syndrome)?;

    let probs: Vec<[f64; 4]> = (0..n).map(|q| prob_table(model, q)).collect();
    let gen_codes: Vec<Vec<(usize, u8)>> = code
        .stabilizers()
        .iter()
        .map(|s| {
            (0..n)
                .filter_map(|q| {
                    let l = s.op.letter_at(q).expect("in range");
                    (l != Letter::I).then_some((q, sym_code(l)))
                })
                .collect()
        })
        .collect();

    let mut log_pi = [f64::NEG_INFINITY; 4];
    for class in Letter::ALL {
        let base = pure.multiply(&code.logical_representative(class))?;
        let base_codes = letter_codes(&base);

        // streaming logsumexp over the group
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0f64;
        let mut cur = base_codes.clone();
        let mut push = |codes: &[u8], max: &mut f64, sum: &mut f64| {
            let mut prod = 1.0f64;
            for (q, &c) in codes.iter().enumerate() {
                prod *= probs[q][c as usize];
            }
            if prod <= 0.0 {
                return;
            }
            let v = prod.ln();
            if v > *max {
                *sum = *sum * (*max - v).exp() + 1.0;
                *max = v;
            } else {
                *sum += (v - *max).exp();
            }
        };
        push(&cur, &mut max, &mut sum);
        for i in 1u64..(1u64 << m) {
            let g = i.trailing_zeros() as usize;
            for &(q, c) in &gen_codes[g] {
                cur[q] ^= c;
            }
            push(&cur, &mut max, &mut sum);
        }
        log_pi[class.index()] = if sum > 0.0 {
            max + sum.ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    Ok(CosetLikelihoods {
        log_pi,
        method: LikelihoodMethod::Exact,
        chi: None,
        discarded_weight: 0.0,
    })
}

/// One planned tensor of a sweep column.
enum PlanEntry {
    /// Delta tensor of a stabilizer face; constant across decodes.
    Check(ColumnTensor),
    /// Qubit tensor: four precomputed variants indexed by the symplectic code
    /// of the local letter of E_s · L.
    Qubit { q: usize, variants: [ColumnTensor; 4] },
}

/// Reusable tensor-network decoder for one (code, model) pair.
///
/// Columns are applied right to left, so the class-dependent qubit column 0
/// comes second to last (followed by the left boundary checks), letting the
/// two class pairs {I, X_L} and {Z_L, Y_L} share all earlier columns.
pub struct TnDecoder<'a> {
    code: &'a CodeInstance,
    columns: Vec<Vec<PlanEntry>>,
    chi: usize,
    x_codes: Vec<u8>,
    z_codes: Vec<u8>,
}

impl<'a> TnDecoder<'a> {
    pub fn new(code: &'a CodeInstance, model: &NoiseModel, chi: usize) -> Result<Self, DecoderError> {
        if chi == 0 {
            return Err(TensorError::InvalidChi.into());
        }
        assert_eq!(model.n(), code.n(), "model size must match code size");
        let d = code.d() as i32;
        let face_at = |fr: i32, fc: i32| -> Option<FaceCoord> {
            code.stabilizers()
                .iter()
                .map(|s| s.face)
                .find(|f| f.row == fr && f.col == fc)
        };
        let stab_restriction = |f: FaceCoord, q: usize| -> u8 {
            let s = code
                .stabilizers()
                .iter()
                .find(|s| s.face == f)
                .expect("face exists");
            sym_code(s.op.letter_at(q).expect("in range"))
        };

        let mut columns: Vec<Vec<PlanEntry>> = Vec::with_capacity(2 * code.d() + 1);
        // face column fc has tensors for faces (fr, fc); in the right-to-left
        // sweep its inputs come from qubit column fc+1 and its outputs feed
        // qubit column fc
        let mut push_face_column = |columns: &mut Vec<Vec<PlanEntry>>, fc: i32| {
            let mut col = Vec::new();
            for fr in -1..d {
                let Some(face) = face_at(fr, fc) else { continue };
                let qubits = crate::code::face_qubits(code.d(), face);
                let n_in = qubits
                    .iter()
                    .filter(|&&q| (q % code.d()) as i32 == fc + 1)
                    .count();
                let n_out = qubits.len() - n_in;
                let rank = qubits.len();
                // delta tensor: 1 iff all legs equal
                let mut data = vec![0.0; 1 << rank];
                data[0] = 1.0;
                data[(1 << rank) - 1] = 1.0;
                let t = DenseTensor::new(vec![2; rank], data).expect("consistent");
                col.push(PlanEntry::Check(
                    ColumnTensor::new(t, n_in, n_out).expect("consistent"),
                ));
            }
            columns.push(col);
        };
        let probs: Vec<[f64; 4]> = (0..code.n()).map(|q| prob_table(model, q)).collect();
        let mut push_qubit_column = |columns: &mut Vec<Vec<PlanEntry>>, c: i32| {
            let mut col = Vec::new();
            for r in 0..d {
                let q = (r * d + c) as usize;
                // inputs: faces on the right, top to bottom; outputs: left
                let legs: Vec<FaceCoord> = [(r - 1, c), (r, c), (r - 1, c - 1), (r, c - 1)]
                    .into_iter()
                    .filter_map(|(fr, fc)| face_at(fr, fc))
                    .collect();
                let n_in = legs.iter().filter(|f| f.col == c).count();
                let n_out = legs.len() - n_in;
                let rank = legs.len();
                // acc[idx] = symplectic code of the product of the stabilizer
                // restrictions selected by the leg bits (leg 0 most significant)
                let mut acc = vec![0u8; 1 << rank];
                for (j, f) in legs.iter().enumerate() {
                    let c_j = stab_restriction(*f, q);
                    let bit = 1usize << (rank - 1 - j);
                    for idx in 0..(1 << rank) {
                        if idx & bit != 0 {
                            acc[idx] ^= c_j;
                        }
                    }
                }
                let variants = std::array::from_fn(|e_code| {
                    let data: Vec<f64> = acc
                        .iter()
                        .map(|&a| probs[q][(a ^ e_code as u8) as usize])
                        .collect();
                    let t = DenseTensor::new(vec![2; rank], data).expect("consistent");
                    ColumnTensor::new(t, n_in, n_out).expect("consistent")
                });
                col.push(PlanEntry::Qubit { q, variants });
            }
            columns.push(col);
        };

        push_face_column(&mut columns, d - 1);
        for c in (1..d).rev() {
            push_qubit_column(&mut columns, c);
            push_face_column(&mut columns, c - 1);
        }
        push_qubit_column(&mut columns, 0);
        push_face_column(&mut columns, -1);

        Ok(TnDecoder {
            code,
            columns,
            chi,
            x_codes: letter_codes(code.logical_x()),
            z_codes: letter_codes(code.logical_z()),
        })
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    fn apply_planned(
        &self,
        mps: &mut BoundaryMps,
        col: &[PlanEntry],
        e_codes: &[u8],
    ) -> Result<f64, DecoderError> {
        // select the per-qubit tensor variant for this error pattern
        let tensors: Vec<&ColumnTensor> = col
            .iter()
            .map(|entry| match entry {
                PlanEntry::Check(t) => t,
                PlanEntry::Qubit { q, variants } => &variants[e_codes[*q] as usize],
            })
            .collect();
        let owned: Vec<ColumnTensor> = tensors.into_iter().cloned().collect();
        Ok(mps.apply_column(&owned, self.chi)?)
    }

    /// Coset likelihoods for a syndrome at this decoder's bond cap.
    pub fn coset_likelihoods(&self, syndrome: &[bool]) -> Result<CosetLikelihoods, DecoderError> {
        let m = self.code.stabilizers().len();
        if syndrome.len() != m {
            return Err(DecoderError::SyndromeLength {
                got: syndrome.len(),
                want: m,
            });
        }
        let pure = self.code.pure_error(syndrome)?;
        let base_i = letter_codes(&pure);
        let base_z: Vec<u8> = base_i.iter().zip(&self.z_codes).map(|(a, b)| a ^ b).collect();

        let mut log_pi = [f64::NEG_INFINITY; 4];
        let mut discarded = 0.0;
        let shared_cols = self.columns.len() - 2;
        for (base_codes, classes) in [(base_i, [Letter::I, Letter::X]), (base_z, [Letter::Z, Letter::Y])] {
            let mut shared = BoundaryMps::new();
            for col in &self.columns[..shared_cols] {
                discarded += self.apply_planned(&mut shared, col, &base_codes)?;
            }
            for (variant, class) in classes.into_iter().enumerate() {
                let codes: Vec<u8> = if variant == 0 {
                    base_codes.clone()
                } else {
                    base_codes.iter().zip(&self.x_codes).map(|(a, b)| a ^ b).collect()
                };
                let mut mps = shared.clone();
                for col in &self.columns[shared_cols..] {
                    discarded += self.apply_planned(&mut mps, col, &codes)?;
                }
                log_pi[class.index()] = mps
                    .ln_value()
                    .expect("all columns applied, boundary fully consumed");
            }
        }
        Ok(CosetLikelihoods {
            log_pi,
            method: LikelihoodMethod::Tn,
            chi: Some(self.chi),
            discarded_weight: discarded,
        })
    }

    /// Full decode: likelihoods, argmax class, and the correction operator.
    pub fn decode(&self, syndrome: &[bool]) -> Result<Correction, DecoderError> {
        let likelihoods = self.coset_likelihoods(syndrome)?;
        correction_from(self.code, syndrome, likelihoods)
    }
}

/// One-shot TN likelihoods; builds a throwaway plan. Use [`TnDecoder`] when
/// decoding many syndromes of the same (code, model).
pub fn tn_coset_likelihoods(
    code: &CodeInstance,
    model: &NoiseModel,
    syndrome: &[bool],
    chi: usize,
) -> Result<CosetLikelihoods, DecoderError> {
    TnDecoder::new(code, model, chi)?.coset_likelihoods(syndrome)
}

fn correction_from(
    code: &CodeInstance,
    syndrome: &[bool],
    likelihoods: CosetLikelihoods,
) -> Result<Correction, DecoderError> {
    let chosen_class = likelihoods.chosen_class();
    let op = code
        .pure_error(syndrome)?
        .multiply(&code.logical_representative(chosen_class))?;
    debug_assert_eq!(code.syndrome(&op)?, syndrome);
    Ok(Correction {
        op,
        chosen_class,
        likelihoods,
    })
}

/// Decode a syndrome with the requested method.
pub fn decode(
    code: &CodeInstance,
    model: &NoiseModel,
    syndrome: &[bool],
    method: DecodeMethod,
) -> Result<Correction, DecoderError> {
    let likelihoods = match method {
        DecodeMethod::Exact { opt_in_d5 } => {
            exact_coset_likelihoods(code, model, syndrome, opt_in_d5)?
        }
        DecodeMethod::Tn { chi } => tn_coset_likelihoods(code, model, syndrome, chi)?,
    };
    correction_from(code, syndrome, likelihoods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_css;
    use crate::noise::{build_noise_model, Eta, QubitType, RegimeParams};

    fn depolarizing_model(code: &CodeInstance, p: f64) -> NoiseModel {
        let types = vec![QubitType::NoisyLowBias; code.n()];
        build_noise_model(code, RegimeParams::Homogeneous { eta: Eta::Finite(0.5) }, p, &types)
            .unwrap()
    }

    #[test]
    fn all_letters_equiprobable_gives_equal_likelihoods() {
        // depolarizing p = 3/4: every letter has probability 1/4, so every
        // n-qubit Pauli is equiprobable and the four cosets weigh the same
        let code = build_css(3).unwrap();
        let model = depolarizing_model(&code, 0.75);
        for bits in [0u8, 3, 17, 255] {
            let s: Vec<bool> = (0..8).map(|i| (bits >> i) & 1 == 1).collect();
            let l = exact_coset_likelihoods(&code, &model, &s, false).unwrap();
            for k in 1..4 {
                assert!(
                    (l.log_pi[k] - l.log_pi[0]).abs() < 1e-10,
                    "log_pi {:?}",
                    l.log_pi
                );
            }
            // the degenerate argmax falls back to the tie-break order
            assert_eq!(l.chosen_class(), Letter::I);
        }
    }

    #[test]
    fn tiny_p_zero_syndrome_prefers_identity() {
        let code = build_css(3).unwrap();
        let model = depolarizing_model(&code, 1e-9);
        let s = vec![false; 8];
        let l = exact_coset_likelihoods(&code, &model, &s, false).unwrap();
        assert_eq!(l.chosen_class(), Letter::I);
        // the gap to other classes scales like (weight difference) * ln(1/p)
        let gap = l.log_pi[0] - l.log_pi[1];
        let per_unit = (1e9f64 / 3.0).ln();
        let expected = 3.0 * per_unit; // X class minimum weight 3
        assert!(
            (gap - expected).abs() < 0.05 * expected,
            "gap {gap} vs expected {expected}"
        );
    }

    #[test]
    fn weight_one_errors_are_corrected_at_d3() {
        let code = build_css(3).unwrap();
        let model = depolarizing_model(&code, 0.05);
        for q in 0..9 {
            for letter in [Letter::X, Letter::Y, Letter::Z] {
                let e = PauliOp::single(9, q, letter).unwrap();
                let s = code.syndrome(&e).unwrap();
                let c = decode(&code, &model, &s, DecodeMethod::Exact { opt_in_d5: false }).unwrap();
                let residual = e.multiply(&c.op).unwrap();
                assert_eq!(code.logical_class(&residual).unwrap(), Letter::I);
            }
        }
    }

    #[test]
    fn exact_rejects_large_distance() {
        let code = build_css(5).unwrap();
        let model = depolarizing_model(&code, 0.1);
        let s = vec![false; 24];
        assert!(matches!(
            exact_coset_likelihoods(&code, &model, &s, false),
            Err(DecoderError::ExactTooLarge(5))
        ));
    }

    #[test]
    fn tn_uncapped_matches_exact_on_sampled_syndromes() {
        let code = build_css(3).unwrap().apply_xy_deformation().unwrap();
        let model = depolarizing_model(&code, 0.1);
        let tn = TnDecoder::new(&code, &model, usize::MAX).unwrap();
        for bits in [0u8, 1, 2, 5, 8, 33, 64, 129, 255] {
            let s: Vec<bool> = (0..8).map(|i| (bits >> i) & 1 == 1).collect();
            let exact = exact_coset_likelihoods(&code, &model, &s, false).unwrap();
            let approx = tn.coset_likelihoods(&s).unwrap();
            for k in 0..4 {
                assert!(
                    (exact.log_pi[k] - approx.log_pi[k]).abs() < 1e-10,
                    "syndrome {bits}: exact {:?} tn {:?}",
                    exact.log_pi,
                    approx.log_pi
                );
            }
        }
    }

    #[test]
    fn zero_syndrome_tiny_p_decodes_to_identity_with_tn() {
        let code = build_css(3).unwrap();
        let model = depolarizing_model(&code, 1e-6);
        let s = vec![false; 8];
        let c = decode(&code, &model, &s, DecodeMethod::Tn { chi: 16 }).unwrap();
        assert!(c.op.is_identity());
        assert_eq!(c.chosen_class, Letter::I);
    }

    #[test]
    fn corrections_reproduce_their_syndrome_exhaustively() {
        let code = build_css(3).unwrap();
        let model = depolarizing_model(&code, 0.1);
        let tn = TnDecoder::new(&code, &model, 16).unwrap();
        for bits in 0u32..256 {
            let s: Vec<bool> = (0..8).map(|i| (bits >> i) & 1 == 1).collect();
            let c = tn.decode(&s).unwrap();
            assert_eq!(code.syndrome(&c.op).unwrap(), s);
        }
    }

    #[test]
    fn infinite_bias_zero_probability_cosets_get_minus_infinity() {
        // eta = inf makes X and Y letters impossible; cosets that require
        // them must come back as -inf, not NaN
        let code = build_css(3).unwrap();
        let types = vec![QubitType::NoisyLowBias; 9];
        let model = build_noise_model(
            &code,
            RegimeParams::Homogeneous { eta: Eta::Infinite },
            0.2,
            &types,
        )
        .unwrap();
        let s = vec![false; 8];
        let exact = exact_coset_likelihoods(&code, &model, &s, false).unwrap();
        // Z_L is a pure-Z string: reachable. X_L and Y_L need X letters.
        assert!(exact.log_pi[Letter::I.index()].is_finite());
        assert!(exact.log_pi[Letter::Z.index()].is_finite());
        assert_eq!(exact.log_pi[Letter::X.index()], f64::NEG_INFINITY);
        assert_eq!(exact.log_pi[Letter::Y.index()], f64::NEG_INFINITY);
        let tn = tn_coset_likelihoods(&code, &model, &s, 16).unwrap();
        assert!(tn.log_pi.iter().all(|v| !v.is_nan()));
        assert_eq!(tn.log_pi[Letter::X.index()], f64::NEG_INFINITY);
        assert!((tn.log_pi[Letter::I.index()] - exact.log_pi[Letter::I.index()]).abs() < 1e-9);
    }

    #[test]
    fn tie_break_order_is_i_x_z_y() {
        let mk = |log_pi: [f64; 4]| CosetLikelihoods {
            log_pi,
            method: LikelihoodMethod::Exact,
            chi: None,
            discarded_weight: 0.0,
        };
        assert_eq!(mk([0.0, 0.0, 0.0, 0.0]).chosen_class(), Letter::I);
        assert_eq!(mk([-1.0, 0.0, 0.0, 0.0]).chosen_class(), Letter::X);
        // Y index (2) vs Z index (3) tie goes to Z
        assert_eq!(mk([-1.0, -1.0, 0.0, 0.0]).chosen_class(), Letter::Z);
        assert_eq!(mk([-1.0, -1.0, 0.0, -1.0]).chosen_class(), Letter::Y);
    }
}

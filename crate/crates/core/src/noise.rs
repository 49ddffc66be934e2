//! Biased Pauli channels, two-type placement strategies, and error sampling.
//!
//! A biased channel with total error probability p and bias ratio
//! eta = p_Z / (p_X + p_Y) has p_Z = p*eta/(1+eta) and
//! p_X = p_Y = p/(2(1+eta)). eta = 1/2 is the depolarizing channel;
//! eta = inf is pure dephasing.
//!
//! Heterogeneous models assign one of two channels per qubit. Regime A keeps
//! the bias shared and splits the rates by a fixed factor of 10
//! (p_noisy = 10 p_quiet); Regime B keeps the rate shared and splits the
//! biases (eta_low vs eta_high). Placement labels follow Regime A semantics:
//! Bulk-Noisy places the noisy (Regime A) or low-bias (Regime B) type on the
//! highest-degree qubits first.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::CodeInstance;
use crate::pauli::{Letter, PauliOp};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("error probability must lie in [0,1], got {0}")]
    InvalidProbability(f64),
    #[error("bias ratio must be positive or infinite, got {0}")]
    InvalidBias(f64),
    #[error("noisy_count {count} out of range for {n} qubits")]
    NoisyCountOutOfRange { count: usize, n: usize },
}

/// Bias ratio: a positive finite value or symbolic infinity (pure dephasing).
/// Serialized as a JSON number or the string "inf"; no floating-point
/// infinity appears in configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Finite(f64),
    Infinite,
}

impl Eta {
    pub fn validate(self) -> Result<Self, NoiseError> {
        match self {
            Eta::Finite(v) if v > 0.0 && v.is_finite() => Ok(self),
            Eta::Finite(v) => Err(NoiseError::InvalidBias(v)),
            Eta::Infinite => Ok(self),
        }
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eta::Finite(v) => write!(f, "{v}"),
            Eta::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Eta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Eta::Finite(v) => s.serialize_f64(*v),
            Eta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Eta::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(Eta::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "bias must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// A single-qubit biased Pauli channel with derived per-letter rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasedChannel {
    pub p: f64,
    pub eta: Eta,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

/// Build a biased channel from total probability and bias ratio.
pub fn make_channel(p: f64, eta: Eta) -> Result<BiasedChannel, NoiseError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(NoiseError::InvalidProbability(p));
    }
    let eta = eta.validate()?;
    let (p_x, p_y, p_z) = match eta {
        Eta::Finite(e) => {
            let pxy = p / (2.0 * (1.0 + e));
            (pxy, pxy, p * e / (1.0 + e))
        }
        Eta::Infinite => (0.0, 0.0, p),
    };
    Ok(BiasedChannel { p, eta, p_x, p_y, p_z })
}

impl BiasedChannel {
    /// Probability of a given letter under this channel.
    pub fn prob(&self, letter: Letter) -> f64 {
        match letter {
            Letter::I => 1.0 - self.p,
            Letter::X => self.p_x,
            Letter::Y => self.p_y,
            Letter::Z => self.p_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementStrategy {
    BulkNoisy,
    BoundaryNoisy,
    Random,
}

impl PlacementStrategy {
    /// Stable small integer used in stream-key derivation and file names.
    pub fn id(self) -> u64 {
        match self {
            PlacementStrategy::BulkNoisy => 0,
            PlacementStrategy::BoundaryNoisy => 1,
            PlacementStrategy::Random => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlacementStrategy::BulkNoisy => "bulk_noisy",
            PlacementStrategy::BoundaryNoisy => "boundary_noisy",
            PlacementStrategy::Random => "random",
        }
    }
}

impl fmt::Display for PlacementStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How many qubits get the noisy/low-bias type and where.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementSpec {
    pub strategy: PlacementStrategy,
    /// Defaults to ceil(d^2 / 2) so the two types are as close to equal as a
    /// deterministic rule allows.
    pub noisy_count: usize,
    /// Consumed only by the Random strategy; the assignment is fixed for the
    /// whole experiment, not resampled per trial.
    pub seed: u64,
}

impl PlacementSpec {
    pub fn new(strategy: PlacementStrategy, d: usize, seed: u64) -> Self {
        PlacementSpec {
            strategy,
            noisy_count: d * d / 2 + (d * d) % 2,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitType {
    /// Noisy in Regime A, low-bias in Regime B.
    NoisyLowBias,
    /// Quiet in Regime A, high-bias in Regime B.
    QuietHighBias,
}

/// Assign a qubit type to every data qubit (a partition, counts exact).
///
/// BulkNoisy sorts by stabilizer degree descending, BoundaryNoisy ascending,
/// ties broken row-major; the first `noisy_count` qubits get the noisy/low-bias
/// type. Random shuffles uniformly from the spec seed. Only Random involves an
/// RNG; the other two are deterministic functions of (d, noisy_count).
pub fn assign_placement(
    code: &CodeInstance,
    spec: &PlacementSpec,
) -> Result<Vec<QubitType>, NoiseError> {
    let n = code.n();
    if spec.noisy_count > n {
        return Err(NoiseError::NoisyCountOutOfRange {
            count: spec.noisy_count,
            n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    match spec.strategy {
        PlacementStrategy::BulkNoisy => {
            order.sort_by_key(|&q| (std::cmp::Reverse(code.geometry()[q].degree), q));
        }
        PlacementStrategy::BoundaryNoisy => {
            order.sort_by_key(|&q| (code.geometry()[q].degree, q));
        }
        PlacementStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            order.shuffle(&mut rng);
        }
    }
    let mut types = vec![QubitType::QuietHighBias; n];
    for &q in order.iter().take(spec.noisy_count) {
        types[q] = QubitType::NoisyLowBias;
    }
    Ok(types)
}

/// Channel parameters for the two heterogeneity regimes.
///
/// In Regime A the sweep parameter p is the noisy rate p_noisy and the quiet
/// rate is pinned to p/10. In Regime B both types share p and differ in bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RegimeParams {
    Homogeneous { eta: Eta },
    A { eta: Eta },
    B { eta_low: Eta, eta_high: Eta },
}

impl RegimeParams {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeParams::Homogeneous { .. } => "homogeneous",
            RegimeParams::A { .. } => "A",
            RegimeParams::B { .. } => "B",
        }
    }
}

/// Regime A rate ratio p_noisy / p_quiet, fixed by the model definition.
pub const REGIME_A_RATE_RATIO: f64 = 10.0;

/// A fully assembled per-qubit noise model.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    channels: Vec<BiasedChannel>,
    types: Vec<QubitType>,
    regime: RegimeParams,
    p: f64,
}

/// Assemble per-qubit channels for a code, regime, sweep value p, and
/// placement assignment.
pub fn build_noise_model(
    code: &CodeInstance,
    regime: RegimeParams,
    p: f64,
    types: &[QubitType],
) -> Result<NoiseModel, NoiseError> {
    assert_eq!(types.len(), code.n(), "type assignment length mismatch");
    let (chan_a, chan_b) = match regime {
        RegimeParams::Homogeneous { eta } => {
            let c = make_channel(p, eta)?;
            (c, c)
        }
        RegimeParams::A { eta } => (
            make_channel(p, eta)?,
            make_channel(p / REGIME_A_RATE_RATIO, eta)?,
        ),
        RegimeParams::B { eta_low, eta_high } => {
            (make_channel(p, eta_low)?, make_channel(p, eta_high)?)
        }
    };
    let channels = types
        .iter()
        .map(|t| match t {
            QubitType::NoisyLowBias => chan_a,
            QubitType::QuietHighBias => chan_b,
        })
        .collect();
    Ok(NoiseModel {
        channels,
        types: types.to_vec(),
        regime,
        p,
    })
}

impl NoiseModel {
    pub fn n(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, q: usize) -> &BiasedChannel {
        &self.channels[q]
    }

    pub fn channels(&self) -> &[BiasedChannel] {
        &self.channels
    }

    pub fn qubit_type(&self, q: usize) -> QubitType {
        self.types[q]
    }

    pub fn regime(&self) -> RegimeParams {
        self.regime
    }

    /// The sweep value this model was built at (p_noisy in Regime A, the
    /// shared p otherwise).
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Draw one error: each qubit independently stays I with 1-p or picks
    /// X/Y/Z with its channel's per-letter rates.
    pub fn sample_error<R: Rng>(&self, rng: &mut R) -> PauliOp {
        let mut op = PauliOp::identity(self.n());
        for (q, ch) in self.channels.iter().enumerate() {
            let u: f64 = rng.gen();
            let letter = if u < ch.p_x {
                Letter::X
            } else if u < ch.p_x + ch.p_y {
                Letter::Y
            } else if u < ch.p {
                Letter::Z
            } else {
                Letter::I
            };
            if letter != Letter::I {
                op.set_letter(q, letter).expect("in range");
            }
        }
        op
    }

    /// Per-qubit channel table as CSV (one row per qubit).
    pub fn channel_table_csv(&self, code: &CodeInstance) -> String {
        let mut out = String::from("qubit,row,col,degree,type,p,eta,p_x,p_y,p_z\n");
        for (q, ch) in self.channels.iter().enumerate() {
            let g = &code.geometry()[q];
            let ty = match self.types[q] {
                QubitType::NoisyLowBias => "noisy_low_bias",
                QubitType::QuietHighBias => "quiet_high_bias",
            };
            out.push_str(&format!(
                "{q},{},{},{},{ty},{},{},{},{},{}\n",
                g.row, g.col, g.degree, ch.p, ch.eta, ch.p_x, ch.p_y, ch.p_z
            ));
        }
        out
    }
}

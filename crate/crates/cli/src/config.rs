use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolArg {
    Offline,
    Online,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackArg {
    None,
    /// Offline: replace the reply with uniform random bits.
    ClassicalGuess,
    /// Offline: measure the purification register, given the bases.
    Purification,
    /// Online: closed-form optimal single-qubit forgery.
    OptimalForger,
    /// Online: forgery with the parameters found by the grid oracle.
    Grid,
    /// Online: forgery with parameters taken from the command line.
    Forger,
    /// Online: query the prover, Helstrom-measure, Bayes-optimal forgery.
    HelstromAdaptive,
    /// Online: query the prover, Helstrom-measure, forge in the guessed basis.
    HelstromNaive,
}

impl AttackArg {
    pub fn protocol(self) -> Option<ProtocolArg> {
        match self {
            AttackArg::None => None,
            AttackArg::ClassicalGuess | AttackArg::Purification => Some(ProtocolArg::Offline),
            _ => Some(ProtocolArg::Online),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceArg {
    Perfect,
    /// Bell-diagonal noise, weight split evenly over the three wrong states.
    Noisy,
    /// Coherent purification with the default branch state `|01>`.
    Purification,
}

/// Forger parameters for `--attack forger`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForgerArgs {
    pub rx: f64,
    pub rz: f64,
    pub rpx: f64,
    pub rpz: f64,
    pub q0: f64,
}

/// Everything that determines the outcome of a simulation run. Output paths
/// and the worker count are deliberately absent: they do not change results.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub protocol: ProtocolArg,
    pub attack: AttackArg,
    pub source: SourceArg,
    /// Challenge length `n`.
    pub challenge_bits: usize,
    /// Pairs per round: `m` offline, `k` online (responses have `2k` bits).
    pub bits: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub trials: u64,
    pub master_seed: u64,
    pub db_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forger: Option<ForgerArgs>,
}

pub const MAX_BITS: usize = 64;
pub const MAX_CHALLENGE_BITS: usize = 64;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(0.0..=0.5).contains(&self.delta) {
            return bad(format!("delta {} outside [0, 0.5]", self.delta));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if self.bits == 0 {
            return bad("bits must be at least 1".into());
        }
        let response_bits = match self.protocol {
            ProtocolArg::Offline => self.bits,
            ProtocolArg::Online => 2 * self.bits,
        };
        if response_bits > MAX_BITS {
            return bad(format!("responses of {response_bits} bits exceed the limit of {MAX_BITS}"));
        }
        if self.challenge_bits == 0 || self.challenge_bits > MAX_CHALLENGE_BITS {
            return bad(format!("challenge length must be in 1..={MAX_CHALLENGE_BITS}"));
        }
        if self.db_size == 0 {
            return bad("db-size must be at least 1".into());
        }
        if self.challenge_bits < 63 && (self.db_size as u128) > (1u128 << self.challenge_bits) {
            return bad(format!(
                "db-size {} exceeds the {} distinct challenges of length {}",
                self.db_size,
                1u128 << self.challenge_bits,
                self.challenge_bits
            ));
        }
        if let Some(p) = self.attack.protocol() {
            if p != self.protocol {
                return bad(format!("attack {:?} does not apply to the {:?} protocol", self.attack, self.protocol));
            }
        }
        if self.protocol == ProtocolArg::Online && self.source != SourceArg::Perfect {
            return bad("the online protocol prepares its own pairs; only --source perfect applies".into());
        }
        if self.attack == AttackArg::Purification && self.source != SourceArg::Purification {
            return bad("the purification attack needs --source purification".into());
        }
        if self.source == SourceArg::Perfect && self.epsilon != 0.0 {
            return bad("epsilon is only meaningful with a noisy or purification source".into());
        }
        match (self.attack, self.grid_resolution) {
            (AttackArg::Grid, None) => return bad("--attack grid needs --grid-resolution".into()),
            (AttackArg::Grid, Some(r)) if !(r > 0.0 && r <= 0.01) => {
                return bad(format!("grid resolution {r} outside (0, 0.01]"));
            }
            (AttackArg::Grid, _) => {}
            (_, Some(_)) => return bad("--grid-resolution only applies to --attack grid".into()),
            _ => {}
        }
        match (self.attack, self.forger) {
            (AttackArg::Forger, None) => return bad("--attack forger needs --rx --rz --rpx --rpz --q0".into()),
            (AttackArg::Forger, Some(_)) => {}
            (_, Some(_)) => return bad("forger parameters only apply to --attack forger".into()),
            _ => {}
        }
        Ok(())
    }
}

/// Child seed for trial `index`: the splitmix64 finaliser applied to
/// `master + (index + 1) * 0x9e3779b97f4a7c15` (wrapping arithmetic).
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

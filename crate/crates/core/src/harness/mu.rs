use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::trial_seed;
use crate::mu::{random_flat_channel, run_mu_transmission, run_sounding_session, MuError, SessionConfig};
use crate::tx::MuUser;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuSessionSpec {
    pub seed: u64,
    /// MCS of user position 0 and 1.
    pub mcs: [u8; 2],
    pub snr_db: f64,
    pub payload_octets: usize,
    pub sessions: usize,
    /// Per-entry CSI error power relative to the channel, dB. `None` is
    /// perfect CSI.
    pub csi_error_db: Option<f64>,
}

/// Outcome of sounding one random flat channel and sending one MU frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuSessionResult {
    pub session: usize,
    pub leakage_db: [f64; 2],
    pub delivered: [bool; 2],
    /// Subcarriers whose weights could not be formed.
    pub degenerate: usize,
}

fn run_session(spec: &MuSessionSpec, session: usize) -> Result<MuSessionResult, MuError> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(spec.seed, spec.mcs[0], spec.mcs[1] as usize, session));
    let channel = random_flat_channel(&mut rng);
    let cfg = SessionConfig { csi_error_db: spec.csi_error_db, ..SessionConfig::default() };
    let sounding = run_sounding_session(&channel, &cfg, &mut rng)?;
    let users: [MuUser; 2] = std::array::from_fn(|i| MuUser {
        mcs: spec.mcs[i],
        payload: (0..spec.payload_octets).map(|_| rng.random()).collect(),
    });
    let lead = rng.random_range(50..200);
    let out = run_mu_transmission(users.clone(), &sounding.steering, &channel, spec.snr_db, lead, &mut rng)?;
    Ok(MuSessionResult {
        session,
        leakage_db: out.leakage_db,
        delivered: std::array::from_fn(|i| out.delivered(i, &users[i].payload)),
        degenerate: sounding.degenerate.len(),
    })
}

/// Independent sessions, each on its own random channel.
pub fn mu_sessions(spec: &MuSessionSpec) -> Result<Vec<MuSessionResult>, MuError> {
    (0..spec.sessions).into_par_iter().map(|s| run_session(spec, s)).collect()
}

/// Fraction of (session, station) pairs that delivered their payload.
pub fn mu_pdr(results: &[MuSessionResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let ok: usize = results.iter().map(|r| r.delivered.iter().filter(|d| **d).count()).sum();
    ok as f64 / (2 * results.len()) as f64
}

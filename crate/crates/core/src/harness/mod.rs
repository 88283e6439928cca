//! Experiment drivers: PDR sweeps, MU-MIMO sessions, IQ capture files and
//! per-packet reports.

mod iqfile;
mod mu;
mod report;
mod sweep;
mod txspec;

pub use iqfile::{read_iq, read_iq_from, write_iq, write_iq_to, IqError, IqHeader, IQ_MAGIC, IQ_VERSION};
pub use mu::{mu_pdr, mu_sessions, MuSessionResult, MuSessionSpec};
pub use report::{decode_file, decode_streams, write_json_lines, CsiTone, PacketReport};
pub use sweep::{
    pdr_non_decreasing, pdr_sweep, snr_at_pdr, trial_seed, wilson_interval, write_csv, ChannelModel, SweepError,
    SweepFormat, SweepRow, SweepSpec, CSV_HEADER,
};
pub use txspec::TxSpec;

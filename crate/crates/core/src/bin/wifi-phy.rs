use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wifi_phy::diagnostics::{correlation_trace, write_trace_csv, TraceMode};
use wifi_phy::harness::{
    decode_file, mu_pdr, mu_sessions, pdr_sweep, write_csv, write_iq, write_json_lines, ChannelModel, MuSessionSpec,
    SweepFormat, SweepSpec, TxSpec,
};
use wifi_phy::rx::RxConfig;
use wifi_phy::sync::SyncConfig;

#[derive(Parser)]
#[command(name = "wifi-phy", version, about = "802.11a/g/n/ac 20 MHz baseband transceiver and simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PDR against SNR, one CSV row per (MCS, SNR) point.
    Sweep {
        #[arg(long, default_value = "legacy")]
        format: SweepFormat,
        /// Comma-separated list or inclusive range such as 0-7.
        #[arg(long, default_value = "0-7")]
        mcs: String,
        #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
        snr_start: f64,
        #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
        snr_stop: f64,
        #[arg(long, default_value_t = 1.0)]
        snr_step: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 500)]
        payload_bytes: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        cfo_hz: f64,
        #[arg(long, default_value = "awgn")]
        channel: ChannelModel,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads; all cores when absent. Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one frame, after the configured channel, to an IQ file.
    Tx {
        /// JSON transmit description.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode every packet in an IQ file.
    Rx {
        file: PathBuf,
        /// One JSON object per packet instead of a table.
        #[arg(long)]
        json: bool,
        /// User position to decode in MU frames.
        #[arg(long, default_value_t = 0)]
        user_position: usize,
        #[arg(long, default_value_t = SyncConfig::default().threshold)]
        threshold: f64,
        #[arg(long, default_value_t = SyncConfig::default().min_plateau)]
        min_plateau: usize,
    },
    /// Sound random flat 2x2 channels, steer a two-user frame and decode it
    /// at both stations.
    MuSession {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// MCS of both users, or of user 0 when --mcs2 is given.
        #[arg(long, default_value_t = 4)]
        mcs: u8,
        #[arg(long)]
        mcs2: Option<u8>,
        #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
        snr: f64,
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        #[arg(long, default_value_t = 500)]
        payload_bytes: usize,
        /// CSI error power relative to the channel, dB.
        #[arg(long, allow_negative_numbers = true)]
        csi_error_db: Option<f64>,
        /// JSON report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation trace of a clean frame as CSV.
    Trace {
        #[arg(long)]
        mode: TraceMode,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_mcs_list(s: &str) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u8 = a.trim().parse().map_err(|_| format!("bad MCS range {part:?}"))?;
                let b: u8 = b.trim().parse().map_err(|_| format!("bad MCS range {part:?}"))?;
                if b < a {
                    return Err(format!("empty MCS range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad MCS {part:?}"))?),
        }
    }
    if out.is_empty() {
        return Err("no MCS given".into());
    }
    Ok(out)
}

fn sink(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_spec(path: &PathBuf) -> Result<TxSpec, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Sweep {
            format,
            mcs,
            snr_start,
            snr_stop,
            snr_step,
            trials,
            payload_bytes,
            cfo_hz,
            channel,
            seed,
            threads,
            out,
        } => {
            let spec = SweepSpec {
                format,
                mcs: parse_mcs_list(&mcs)?,
                snr_db: SweepSpec::snr_range(snr_start, snr_stop, snr_step),
                trials,
                payload_octets: payload_bytes,
                cfo_hz,
                channel,
                seed,
            };
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
            let rows = pool.install(|| pdr_sweep(&spec))?;
            let mut w = sink(&out)?;
            write_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Tx { config, out } => {
            let spec = read_spec(&config)?;
            let (header, streams) = spec.capture()?;
            write_iq(&out, &header, &streams)?;
        }
        Command::Rx { file, json, user_position, threshold, min_plateau } => {
            let config = RxConfig {
                user_position,
                sync: SyncConfig { threshold, min_plateau, ..SyncConfig::default() },
                ..RxConfig::default()
            };
            let reports = decode_file(&file, &config)?;
            let mut w = sink(&None)?;
            if json {
                write_json_lines(&reports, &mut w)?;
            } else {
                writeln!(
                    w,
                    "{:>8} {:>8} {:>4} {:>6} {:>7} {:>10}",
                    "start", "format", "mcs", "crc", "length", "cfo_hz"
                )?;
                for r in &reports {
                    writeln!(
                        w,
                        "{:>8} {:>8} {:>4} {:>6} {:>7} {:>10.1}",
                        r.start,
                        r.format.to_string(),
                        r.mcs,
                        if r.crc_ok { "ok" } else { "fail" },
                        r.signaled_length,
                        r.cfo_hz
                    )?;
                }
            }
            w.flush()?;
        }
        Command::MuSession { seed, mcs, mcs2, snr, sessions, payload_bytes, csi_error_db, out } => {
            let spec = MuSessionSpec {
                seed,
                mcs: [mcs, mcs2.unwrap_or(mcs)],
                snr_db: snr,
                payload_octets: payload_bytes,
                sessions,
                csi_error_db,
            };
            let results = mu_sessions(&spec)?;
            let report = serde_json::json!({ "spec": spec, "pdr": mu_pdr(&results), "sessions": results });
            let mut w = sink(&out)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
        }
        Command::Trace { mode, config, out } => {
            let frame = read_spec(&config)?.frame()?;
            let mut w = sink(&out)?;
            write_trace_csv(&correlation_trace(&frame, mode), &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Blind audio watermarking designed to survive D/A - A/D conversion loops.
//!
//! Payload bits are embedded into the low-frequency sub-band of a K-level
//! Daubechies-2 wavelet decomposition by adjusting the relative energies of
//! consecutive coefficient groups — a relation that amplitude scaling cannot
//! disturb. Each frame starts with a 31-bit m-sequence synchronization code;
//! extraction locates the codes, measures the residual temporal scaling from
//! their spacing, resamples every payload region back to its nominal length,
//! and reads the bits without access to the original signal.
//!
//! ```
//! use wavemark::{embed, extract, EmbedConfig};
//!
//! let cfg = EmbedConfig::default();
//! let audio = wavemark::bench::tone_mixture(96_768, 44_100, 1);
//! let payload = wavemark::bench::random_payload(32, 2);
//!
//! let (marked, report) = embed(&audio, &payload, &cfg).unwrap();
//! assert!(report.snr_db.unwrap() >= 20.0);
//!
//! let recovered = extract(&marked, &cfg).unwrap();
//! assert_eq!(recovered.bits, payload);
//! ```
//!
//! The `examples/` directory has one runnable program per capability; the
//! `wavemark` binary exposes the same operations for batch use.

pub mod bench;
pub mod channel;
pub mod cli;
pub mod dwt;
pub mod embed;
pub mod error;
pub mod extract;
pub mod metrics;
pub mod sync;
pub mod wav;

pub use channel::{apply_attack, simulate_daad, AttackSpec, ChannelSpec};
pub use dwt::{forward_dwt, inverse_dwt, DwtPyramid};
pub use embed::{
    embed, embed_bit, embed_with_quality, embedding_strength, energy_diffs, group_energies,
    layout_frames, strength_cap, EmbedConfig, EmbedReport, FrameLayout, GroupEnergies,
    QualityModel, SnrFloor,
};
pub use error::{Error, Result};
pub use extract::{
    extract, extract_bit, extract_with, find_syncs, resynchronize, scaling_factor,
    ExtractOptions, ExtractReport, SyncHit,
};
pub use metrics::{ber, capacity, normalize_amplitude, snr, SnrDb};
pub use sync::{
    channel_bit_error_prob, false_negative_prob, false_positive_prob, hamming_distance, is_sync,
    SyncCode,
};
pub use wav::{read_wav, write_wav, AudioBuffer};

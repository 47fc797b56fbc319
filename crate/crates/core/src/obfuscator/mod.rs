//! Obfuscated Hamming-ball matching and seed release.
//!
//! Retrieval runs three steps: decode the probe to a candidate center, stop if
//! decoding failed, then open the point-function lock with the candidate and
//! unwrap the seed with the released payload.

mod encoding;
mod lock;
mod vault;

pub use encoding::{encode, encode_with_sample, Encoding};
pub use lock::{make_lock, make_lock_with, LockPayload, PointLock, DIGEST_BITS, HASH_ALG, KDF_LABEL};
pub use vault::{
    enroll, enroll_multi, AnyVault, LockedTemplate, MultiVault, VaultRecord, MAX_SEED_LEN, MIN_SEED_LEN,
    RECORD_VERSION,
};

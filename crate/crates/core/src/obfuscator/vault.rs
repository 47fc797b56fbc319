//! Stored vault records: encoding, lock and the wrapped wallet seed.

use std::path::Path;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{encode, Encoding};
use super::lock::{make_lock, LockPayload, PointLock, DIGEST_BITS, HASH_ALG, KDF_LABEL};
use crate::error::{Error, Result};
use crate::numtheory::PrimeSample;
use crate::params::{params_digest, SystemParams};
use crate::template::Template;

pub const RECORD_VERSION: u32 = 1;
pub const MIN_SEED_LEN: usize = 16;
pub const MAX_SEED_LEN: usize = 64;

/// One enrolled template: its encoding and the lock over its center.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockedTemplate {
    pub encoding: Encoding,
    pub lock: PointLock,
}

impl LockedTemplate {
    pub fn enroll<R: Rng + ?Sized>(center: &Template, params: &SystemParams, rng: &mut R) -> Result<(Self, LockPayload)> {
        let encoding = encode(center, params, rng)?;
        let (lock, payload) = make_lock(center, rng)?;
        Ok((LockedTemplate { encoding, lock }, payload))
    }

    /// Decode, then open the lock with the decoded center. `None` on any failure.
    pub fn unlock(&self, probe: &Template, r: usize) -> Result<Option<LockPayload>> {
        Ok(self.encoding.decode(probe, r)?.and_then(|center| self.lock.open(&center)))
    }

    fn check_shape(&self) -> Result<()> {
        self.encoding.check_shape()?;
        self.lock.check_shape()?;
        if 2 * self.lock.k != self.encoding.n() {
            return Err(Error::Malformed("lock width does not match template length".into()));
        }
        Ok(())
    }
}

fn check_seed(seed: &[u8]) -> Result<()> {
    if !(MIN_SEED_LEN..=MAX_SEED_LEN).contains(&seed.len()) {
        return Err(Error::InvalidSeed(format!(
            "seed is {} bytes, expected {MIN_SEED_LEN}..={MAX_SEED_LEN}",
            seed.len()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VaultRecord {
    pub r: usize,
    pub entry: LockedTemplate,
    pub wrapped_seed: Vec<u8>,
    pub params_digest: [u8; 64],
}

pub fn enroll<R: Rng + ?Sized>(center: &Template, seed: &[u8], params: &SystemParams, rng: &mut R) -> Result<VaultRecord> {
    check_seed(seed)?;
    let (entry, payload) = LockedTemplate::enroll(center, params, rng)?;
    Ok(VaultRecord {
        r: params.r,
        entry,
        wrapped_seed: payload.wrap(seed),
        params_digest: params.digest()?,
    })
}

impl VaultRecord {
    pub fn n(&self) -> usize {
        self.entry.encoding.n()
    }

    /// Errors only for malformed input; `Ok(None)` is the single, cause-blind
    /// rejection.
    pub fn retrieve_seed(&self, probe: &Template) -> Result<Option<Vec<u8>>> {
        self.check_integrity()?;
        if probe.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                actual: probe.len(),
            });
        }
        Ok(self.entry.unlock(probe, self.r)?.map(|b| b.wrap(&self.wrapped_seed)))
    }

    /// Whether this record was enrolled under `params`.
    pub fn check_params(&self, params: &SystemParams) -> Result<()> {
        if params.digest()? != self.params_digest {
            return Err(Error::ParamsMismatch);
        }
        Ok(())
    }

    fn check_integrity(&self) -> Result<()> {
        self.entry.check_shape()?;
        if self.wrapped_seed.is_empty() {
            return Err(Error::Malformed("empty wrapped seed".into()));
        }
        if params_digest(self.n(), self.r, &self.entry.encoding.q) != self.params_digest {
            return Err(Error::ParamsMismatch);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = RecordFile {
            version: RECORD_VERSION,
            n: self.n(),
            r: self.r,
            universe_size: Some(self.entry.encoding.sample.universe_size),
            primes: self.entry.encoding.sample.primes.clone(),
            q: self.entry.encoding.q.to_str_radix(10),
            c: self.entry.encoding.c.to_str_radix(10),
            lock: LockFile::from(&self.entry.lock),
            wrapped_seed_hex: hex::encode(&self.wrapped_seed),
            kdf: KDF_LABEL.into(),
            params_digest_hex: hex::encode(self.params_digest),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: RecordFile = serde_json::from_str(s)?;
        check_header(f.version, &f.kdf)?;
        let q = parse_decimal(&f.q, "q")?;
        let entry = LockedTemplate {
            encoding: Encoding {
                sample: parse_sample(f.primes, f.n, f.universe_size)?,
                q,
                c: parse_decimal(&f.c, "C")?,
            },
            lock: f.lock.try_into()?,
        };
        let record = VaultRecord {
            r: f.r,
            entry,
            wrapped_seed: decode_hex(&f.wrapped_seed_hex, "wrapped_seed_hex")?,
            params_digest: parse_digest(&f.params_digest_hex)?,
        };
        record.check_integrity()?;
        Ok(record)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        VaultRecord::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Several enrolled objects guarding one seed; the keystream key is the XOR of
/// every member's lock payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiVault {
    pub r: usize,
    pub members: Vec<LockedTemplate>,
    pub wrapped_seed: Vec<u8>,
    pub params_digest: [u8; 64],
}

pub fn enroll_multi<R: Rng + ?Sized>(
    centers: &[Template],
    seed: &[u8],
    params: &SystemParams,
    rng: &mut R,
) -> Result<MultiVault> {
    if centers.is_empty() {
        return Err(Error::InsufficientData("multi-object vault needs at least one template".into()));
    }
    check_seed(seed)?;
    let mut members = Vec::with_capacity(centers.len());
    let mut key: Option<LockPayload> = None;
    for c in centers {
        let (member, payload) = LockedTemplate::enroll(c, params, rng)?;
        key = Some(match key {
            None => payload,
            Some(k) => k.xor(&payload),
        });
        members.push(member);
    }
    let key = key.expect("nonempty");
    Ok(MultiVault {
        r: params.r,
        members,
        wrapped_seed: key.wrap(seed),
        params_digest: params.digest()?,
    })
}

impl MultiVault {
    pub fn m(&self) -> usize {
        self.members.len()
    }

    pub fn n(&self) -> usize {
        self.members[0].encoding.n()
    }

    /// Probes are matched to members positionally. Every member must unlock.
    pub fn retrieve_multi(&self, probes: &[Template]) -> Result<Option<Vec<u8>>> {
        self.check_integrity()?;
        if probes.len() != self.m() {
            return Err(Error::LengthMismatch {
                expected: self.m(),
                actual: probes.len(),
            });
        }
        if let Some(p) = probes.iter().find(|p| p.len() != self.n()) {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                actual: p.len(),
            });
        }
        let mut key: Option<LockPayload> = None;
        for (member, probe) in self.members.iter().zip(probes) {
            let Some(b) = member.unlock(probe, self.r)? else {
                return Ok(None);
            };
            key = Some(match key {
                None => b,
                Some(k) => k.xor(&b),
            });
        }
        Ok(key.map(|k| k.wrap(&self.wrapped_seed)))
    }

    pub fn check_params(&self, params: &SystemParams) -> Result<()> {
        if params.digest()? != self.params_digest {
            return Err(Error::ParamsMismatch);
        }
        Ok(())
    }

    fn check_integrity(&self) -> Result<()> {
        let first = self.members.first().ok_or_else(|| Error::Malformed("no members".into()))?;
        for m in &self.members {
            m.check_shape()?;
            if m.encoding.q != first.encoding.q || m.encoding.n() != first.encoding.n() {
                return Err(Error::Malformed("members disagree on n or q".into()));
            }
        }
        if self.wrapped_seed.is_empty() {
            return Err(Error::Malformed("empty wrapped seed".into()));
        }
        if params_digest(self.n(), self.r, &first.encoding.q) != self.params_digest {
            return Err(Error::ParamsMismatch);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let first = &self.members[0].encoding;
        let file = MultiFile {
            version: RECORD_VERSION,
            kind: MULTI_KIND.into(),
            n: self.n(),
            r: self.r,
            q: first.q.to_str_radix(10),
            members: self
                .members
                .iter()
                .map(|m| MemberFile {
                    universe_size: Some(m.encoding.sample.universe_size),
                    primes: m.encoding.sample.primes.clone(),
                    c: m.encoding.c.to_str_radix(10),
                    lock: LockFile::from(&m.lock),
                })
                .collect(),
            wrapped_seed_hex: hex::encode(&self.wrapped_seed),
            kdf: KDF_LABEL.into(),
            params_digest_hex: hex::encode(self.params_digest),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MultiFile = serde_json::from_str(s)?;
        check_header(f.version, &f.kdf)?;
        if f.kind != MULTI_KIND {
            return Err(Error::Malformed(format!("unexpected vault kind {:?}", f.kind)));
        }
        let q = parse_decimal(&f.q, "q")?;
        let members = f
            .members
            .into_iter()
            .map(|m| {
                Ok(LockedTemplate {
                    encoding: Encoding {
                        sample: parse_sample(m.primes, f.n, m.universe_size)?,
                        q: q.clone(),
                        c: parse_decimal(&m.c, "C")?,
                    },
                    lock: m.lock.try_into()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let vault = MultiVault {
            r: f.r,
            members,
            wrapped_seed: decode_hex(&f.wrapped_seed_hex, "wrapped_seed_hex")?,
            params_digest: parse_digest(&f.params_digest_hex)?,
        };
        vault.check_integrity()?;
        Ok(vault)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        MultiVault::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Either kind of stored vault, as read from disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyVault {
    Single(VaultRecord),
    Multi(MultiVault),
}

impl AnyVault {
    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        if value.get("kind").and_then(|k| k.as_str()) == Some(MULTI_KIND) {
            Ok(AnyVault::Multi(MultiVault::from_json(s)?))
        } else {
            Ok(AnyVault::Single(VaultRecord::from_json(s)?))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        AnyVault::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn m(&self) -> usize {
        match self {
            AnyVault::Single(_) => 1,
            AnyVault::Multi(v) => v.m(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            AnyVault::Single(v) => v.n(),
            AnyVault::Multi(v) => v.n(),
        }
    }

    pub fn retrieve(&self, probes: &[Template]) -> Result<Option<Vec<u8>>> {
        match self {
            AnyVault::Single(v) => match probes {
                [probe] => v.retrieve_seed(probe),
                _ => Err(Error::LengthMismatch {
                    expected: 1,
                    actual: probes.len(),
                }),
            },
            AnyVault::Multi(v) => v.retrieve_multi(probes),
        }
    }

    pub fn check_params(&self, params: &SystemParams) -> Result<()> {
        match self {
            AnyVault::Single(v) => v.check_params(params),
            AnyVault::Multi(v) => v.check_params(params),
        }
    }
}

const MULTI_KIND: &str = "multi";

#[derive(Serialize, Deserialize)]
struct LockFile {
    a_hex: String,
    u_hex: String,
    t_hex: String,
    h_hex: String,
    k: usize,
    h_bits: usize,
    hash_alg: String,
}

impl From<&PointLock> for LockFile {
    fn from(l: &PointLock) -> Self {
        use super::lock::to_fixed_be;
        LockFile {
            a_hex: hex::encode(to_fixed_be(&l.a, l.k)),
            u_hex: hex::encode(to_fixed_be(&l.u, l.k)),
            t_hex: hex::encode(to_fixed_be(&l.t, l.h_bits - l.k)),
            h_hex: hex::encode(&l.h),
            k: l.k,
            h_bits: l.h_bits,
            hash_alg: HASH_ALG.into(),
        }
    }
}

impl TryFrom<LockFile> for PointLock {
    type Error = Error;

    fn try_from(f: LockFile) -> Result<Self> {
        if f.hash_alg != HASH_ALG || f.h_bits != DIGEST_BITS {
            return Err(Error::Malformed(format!("unsupported lock hash {} / {} bits", f.hash_alg, f.h_bits)));
        }
        let big = |s: &str, what| decode_hex(s, what).map(|b| BigUint::from_bytes_be(&b));
        let lock = PointLock {
            a: big(&f.a_hex, "a_hex")?,
            u: big(&f.u_hex, "u_hex")?,
            t: big(&f.t_hex, "t_hex")?,
            h: decode_hex(&f.h_hex, "h_hex")?,
            k: f.k,
            h_bits: f.h_bits,
        };
        lock.check_shape()?;
        Ok(lock)
    }
}

#[derive(Serialize, Deserialize)]
struct RecordFile {
    version: u32,
    n: usize,
    r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    universe_size: Option<usize>,
    primes: Vec<u32>,
    q: String,
    #[serde(rename = "C")]
    c: String,
    lock: LockFile,
    wrapped_seed_hex: String,
    kdf: String,
    params_digest_hex: String,
}

#[derive(Serialize, Deserialize)]
struct MemberFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    universe_size: Option<usize>,
    primes: Vec<u32>,
    #[serde(rename = "C")]
    c: String,
    lock: LockFile,
}

#[derive(Serialize, Deserialize)]
struct MultiFile {
    version: u32,
    kind: String,
    n: usize,
    r: usize,
    q: String,
    members: Vec<MemberFile>,
    wrapped_seed_hex: String,
    kdf: String,
    params_digest_hex: String,
}

fn check_header(version: u32, kdf: &str) -> Result<()> {
    if version != RECORD_VERSION {
        return Err(Error::Malformed(format!("unsupported record version {version}")));
    }
    if kdf != KDF_LABEL {
        return Err(Error::Malformed(format!("unsupported kdf {kdf:?}")));
    }
    Ok(())
}

fn parse_decimal(s: &str, what: &str) -> Result<BigUint> {
    BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| Error::Malformed(format!("{what} is not a decimal integer")))
}

fn decode_hex(s: &str, what: &str) -> Result<Vec<u8>> {
    hex::decode(s).map_err(|e| Error::Malformed(format!("{what}: {e}")))
}

fn parse_digest(s: &str) -> Result<[u8; 64]> {
    decode_hex(s, "params_digest_hex")?
        .try_into()
        .map_err(|_| Error::Malformed("params digest must be 64 bytes".into()))
}

fn parse_sample(primes: Vec<u32>, n: usize, universe_size: Option<usize>) -> Result<PrimeSample> {
    if primes.len() != n {
        return Err(Error::Malformed(format!("{} primes for n = {n}", primes.len())));
    }
    PrimeSample::from_primes(primes, universe_size.unwrap_or(n))
}

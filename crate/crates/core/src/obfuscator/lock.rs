//! Point-function lock over the two template halves.
//!
//! For `c = c1 ‖ c2` (k-bit integers) the lock publishes `a`, `u = s + b`, `t`
//! and `h = H(s ‖ t)` where `b = c2 − a·c1`. A candidate opens the lock iff
//! `H(a·c1' + u − c2' ‖ t) = h`, and then yields `b = c2' − a·c1'`. All
//! arithmetic is modulo 2^k.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use sha2::{Digest, Sha512};

use crate::error::{Error, Result};
use crate::template::Template;

pub const HASH_ALG: &str = "SHA-512";
pub const DIGEST_BITS: usize = 512;
pub const KDF_LABEL: &str = "H(b_bytes ‖ 0x77726170 ‖ counter32_be)";
const KDF_TAG: [u8; 4] = *b"wrap";

/// Big-endian, left-padded to `ceil(bits / 8)` bytes.
pub(crate) fn to_fixed_be(v: &BigUint, bits: usize) -> Vec<u8> {
    let width = bits.div_ceil(8);
    let raw = if v.is_zero() { Vec::new() } else { v.to_bytes_be() };
    assert!(raw.len() <= width, "value wider than {bits} bits");
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(&raw);
    out
}

fn mask(bits: usize) -> BigUint {
    (BigUint::one() << bits) - 1u32
}

fn random_bits<R: RngCore + ?Sized>(bits: usize, rng: &mut R) -> BigUint {
    let mut buf = vec![0u8; bits.div_ceil(8)];
    rng.fill_bytes(&mut buf);
    BigUint::from_bytes_be(&buf) & mask(bits)
}

/// The payload `b` released by an opened lock.
#[derive(Clone, PartialEq, Eq)]
pub struct LockPayload {
    value: BigUint,
    k: usize,
}

impl LockPayload {
    pub fn new(value: BigUint, k: usize) -> Self {
        LockPayload { value: value & mask(k), k }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn width(&self) -> usize {
        self.k
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        to_fixed_be(&self.value, self.k)
    }

    pub fn xor(&self, other: &LockPayload) -> LockPayload {
        assert_eq!(self.k, other.k, "payload widths differ");
        LockPayload {
            value: &self.value ^ &other.value,
            k: self.k,
        }
    }

    /// SHA-512 counter-mode keystream keyed by the payload bytes.
    pub fn keystream(&self, len: usize) -> Vec<u8> {
        let key = self.to_bytes();
        let mut out = Vec::with_capacity(len + 64);
        let mut counter: u32 = 0;
        while out.len() < len {
            let mut h = Sha512::new();
            h.update(&key);
            h.update(KDF_TAG);
            h.update(counter.to_be_bytes());
            out.extend_from_slice(&h.finalize());
            counter += 1;
        }
        out.truncate(len);
        out
    }

    pub fn wrap(&self, data: &[u8]) -> Vec<u8> {
        data.iter().zip(self.keystream(data.len())).map(|(d, k)| d ^ k).collect()
    }
}

impl std::fmt::Debug for LockPayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LockPayload({} bits, redacted)", self.k)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointLock {
    pub a: BigUint,
    pub u: BigUint,
    pub t: BigUint,
    pub h: Vec<u8>,
    pub k: usize,
    pub h_bits: usize,
}

fn halves(c: &Template) -> Result<(BigUint, BigUint, usize)> {
    let n = c.len();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!("template length {n} is not even")));
    }
    let k = n / 2;
    if k >= DIGEST_BITS {
        return Err(Error::InvalidParams(format!("half width {k} must be below {DIGEST_BITS}")));
    }
    Ok((c.range_to_uint(0, k), c.range_to_uint(k, n), k))
}

fn lock_digest(s: &BigUint, t: &BigUint, k: usize) -> Vec<u8> {
    let mut h = Sha512::new();
    h.update(to_fixed_be(s, k));
    h.update(to_fixed_be(t, DIGEST_BITS - k));
    h.finalize().to_vec()
}

/// Locks `c` with fresh randomness. The slope `a` is drawn odd so that it is a
/// unit mod 2^k: changing either half of the candidate then always changes the
/// hashed value.
pub fn make_lock<R: RngCore + ?Sized>(c: &Template, rng: &mut R) -> Result<(PointLock, LockPayload)> {
    let (_, _, k) = halves(c)?;
    let a = random_bits(k, rng) | BigUint::one();
    let s = random_bits(k, rng);
    let t = random_bits(DIGEST_BITS - k, rng);
    make_lock_with(c, a, s, t)
}

/// Locks `c` with explicit `a`, `s` and `t`, each reduced to its width.
pub fn make_lock_with(c: &Template, a: BigUint, s: BigUint, t: BigUint) -> Result<(PointLock, LockPayload)> {
    let (c1, c2, k) = halves(c)?;
    let m = mask(k);
    let modulus = BigUint::one() << k;
    let a = a & &m;
    let s = s & &m;
    let t = t & mask(DIGEST_BITS - k);
    let b = (&c2 + &modulus - ((&a * &c1) & &m)) & &m;
    let u = (&s + &b) & &m;
    let h = lock_digest(&s, &t, k);
    Ok((
        PointLock {
            a,
            u,
            t,
            h,
            k,
            h_bits: DIGEST_BITS,
        },
        LockPayload::new(b, k),
    ))
}

impl PointLock {
    /// Returns the payload iff `candidate` lies on the locked line.
    pub fn open(&self, candidate: &Template) -> Option<LockPayload> {
        if candidate.len() != 2 * self.k {
            return None;
        }
        let k = self.k;
        let m = mask(k);
        let modulus = BigUint::one() << k;
        let c1 = candidate.range_to_uint(0, k);
        let c2 = candidate.range_to_uint(k, 2 * k);
        let ac1 = (&self.a * &c1) & &m;
        let w = (&ac1 + &self.u + &modulus - &c2) & &m;
        if lock_digest(&w, &self.t, k) != self.h {
            return None;
        }
        Some(LockPayload::new((&c2 + &modulus - ac1) & &m, k))
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        if self.h_bits != DIGEST_BITS || self.h.len() * 8 != DIGEST_BITS {
            return Err(Error::Malformed(format!("lock digest must be {DIGEST_BITS} bits")));
        }
        if self.k == 0 || self.k >= self.h_bits {
            return Err(Error::Malformed(format!("lock width {} out of range", self.k)));
        }
        if self.a.bits() as usize > self.k || self.u.bits() as usize > self.k || self.t.bits() as usize > self.h_bits - self.k {
            return Err(Error::Malformed("lock values exceed their widths".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Template {
        // c1 = 5, c2 = 9 at k = 4.
        "01011001".parse().unwrap()
    }

    #[test]
    fn toy_lock_arithmetic() {
        let (lock, b) = make_lock_with(&toy(), 3u32.into(), 7u32.into(), 0u32.into()).unwrap();
        assert_eq!(b.value(), &BigUint::from(10u32));
        assert_eq!(lock.u, BigUint::from(1u32));
        // a·c1 + u − c2 = 15 + 1 − 9 = 7 = s.
        assert_eq!(lock.h, lock_digest(&BigUint::from(7u32), &BigUint::zero(), 4));
        let opened = lock.open(&toy()).unwrap();
        assert_eq!(opened.value(), &BigUint::from(10u32));
    }

    #[test]
    fn zero_slope_releases_second_half() {
        let (lock, b) = make_lock_with(&toy(), 0u32.into(), 7u32.into(), 1u32.into()).unwrap();
        assert_eq!(b.value(), &BigUint::from(9u32));
        assert_eq!(lock.open(&toy()).unwrap(), b);
    }

    #[test]
    fn enrolled_template_always_opens() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = Template::random(512, &mut rng);
        let (lock, b) = make_lock(&c, &mut rng).unwrap();
        assert_eq!(lock.k, 256);
        assert_eq!(lock.h.len(), 64);
        for _ in 0..3 {
            assert_eq!(lock.open(&c).as_ref(), Some(&b));
        }
        for i in [0, 100, 255, 256, 511] {
            let mut x = c.clone();
            x.flip(i);
            assert!(lock.open(&x).is_none(), "bit {i}");
        }
        assert!(lock.open(&Template::zeros(510)).is_none());
    }

    #[test]
    fn odd_length_rejected() {
        assert!(make_lock(&Template::zeros(9), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn payload_bytes_and_keystream() {
        let b = LockPayload::new(BigUint::from(0x0102u32), 24);
        assert_eq!(b.to_bytes(), vec![0, 1, 2]);
        let ks = b.keystream(150);
        assert_eq!(ks.len(), 150);
        let mut h = Sha512::new();
        h.update([0u8, 1, 2]);
        h.update(*b"wrap");
        h.update(1u32.to_be_bytes());
        assert_eq!(&ks[64..128], &h.finalize()[..]);
        let data = b"seed material".to_vec();
        assert_eq!(b.wrap(&b.wrap(&data)), data);
    }
}

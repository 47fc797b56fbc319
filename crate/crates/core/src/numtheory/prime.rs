//! Small-prime universes, probabilistic primality and safe-prime search.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Random Miller-Rabin rounds; each round errs with probability at most 1/4.
pub const MR_ROUNDS: usize = 40;

const SIEVE_LIMIT: u32 = 1 << 18;
const WINDOW: usize = 1 << 16;
const EXHAUSTIVE_MAX_BITS: usize = 24;

/// Bases for which Miller-Rabin is exact below 2^64.
const DETERMINISTIC_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// All primes below `limit`.
pub fn primes_below(limit: u32) -> Vec<u32> {
    let limit = limit as usize;
    if limit < 3 {
        return Vec::new();
    }
    let mut composite = vec![false; limit];
    let mut out = Vec::new();
    for i in 2..limit {
        if !composite[i] {
            out.push(i as u32);
            let mut j = i * i;
            while j < limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// The first `size` odd primes: 3, 5, 7, 11, ...
pub fn odd_prime_universe(size: usize) -> Vec<u32> {
    let mut limit = 64u32;
    loop {
        let odd: Vec<u32> = primes_below(limit).into_iter().skip(1).collect();
        if odd.len() >= size {
            return odd[..size].to_vec();
        }
        limit = limit.checked_mul(2).expect("prime universe too large");
    }
}

/// The coordinate-to-prime binding of one encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeSample {
    pub primes: Vec<u32>,
    pub universe_size: usize,
}

impl PrimeSample {
    /// Validates a sample loaded from storage: odd, pairwise distinct and prime.
    pub fn from_primes(primes: Vec<u32>, universe_size: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &p in &primes {
            if p < 3 || p % 2 == 0 || !is_prime_u64(p as u64) {
                return Err(Error::Malformed(format!("{p} is not an odd prime")));
            }
            if !seen.insert(p) {
                return Err(Error::Malformed(format!("prime {p} repeated")));
            }
        }
        Ok(PrimeSample {
            primes,
            universe_size,
        })
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }
}

/// Uniform sample without replacement of `n` primes from the first
/// `universe_size` odd primes, in random order.
pub fn sample_primes<R: Rng + ?Sized>(n: usize, universe_size: usize, rng: &mut R) -> Result<PrimeSample> {
    if n > universe_size {
        return Err(Error::UniverseTooSmall {
            requested: n,
            universe: universe_size,
        });
    }
    let universe = odd_prime_universe(universe_size);
    let primes = index::sample(rng, universe_size, n)
        .into_iter()
        .map(|i| universe[i])
        .collect();
    Ok(PrimeSample {
        primes,
        universe_size,
    })
}

fn pow_mod_u64(base: u64, mut exp: u64, m: u64) -> u64 {
    let m128 = m as u128;
    let mut acc: u128 = 1 % m128;
    let mut b = (base % m) as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    acc as u64
}

/// Deterministic primality for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &DETERMINISTIC_BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &DETERMINISTIC_BASES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// One Miller-Rabin round; `true` means `a` witnesses compositeness of odd `n`.
fn mr_witness(a: &BigUint, n: &BigUint, n_minus_1: &BigUint, d: &BigUint, s: u64) -> bool {
    let mut x = a.modpow(d, n);
    if x.is_one() || &x == n_minus_1 {
        return false;
    }
    for _ in 1..s {
        x = &x * &x % n;
        if &x == n_minus_1 {
            return false;
        }
        if x.is_one() {
            return true;
        }
    }
    true
}

fn random_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    let bytes = (bound.bits() as usize).div_ceil(8) + 8;
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    BigUint::from_bytes_be(&buf) % bound
}

/// Miller-Rabin with base 2 plus `rounds` random bases. Exact below 2^64.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    if n.is_even() {
        return false;
    }
    for &p in &DETERMINISTIC_BASES {
        if (n % p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    if mr_witness(&BigUint::from(2u32), n, &n_minus_1, &d, s) {
        return false;
    }
    let span = n - 3u32;
    for _ in 0..rounds {
        let a = random_below(&span, rng) + 2u32;
        if mr_witness(&a, n, &n_minus_1, &d, s) {
            return false;
        }
    }
    true
}

/// `q` and `(q - 1) / 2` both pass [`is_probable_prime`].
pub fn is_safe_prime<R: RngCore + ?Sized>(q: &BigUint, rounds: usize, rng: &mut R) -> bool {
    if q < &BigUint::from(5u32) || q.is_even() {
        return false;
    }
    let half = q >> 1u32;
    is_probable_prime(&half, rounds, rng) && is_probable_prime(q, rounds, rng)
}

/// Safe-prime check whose random bases are derived from `q` itself, so the
/// answer is a pure function of `q`.
pub fn is_safe_prime_deterministic(q: &BigUint) -> bool {
    let mut seed = [0u8; 32];
    let bytes = q.to_bytes_le();
    for (i, b) in bytes.iter().enumerate() {
        seed[i % 32] ^= b.rotate_left((i / 32) as u32 % 8);
    }
    let mut rng = ChaCha20Rng::from_seed(seed);
    is_safe_prime(q, MR_ROUNDS, &mut rng)
}

/// Progress of a running safe-prime search.
#[derive(Clone, Copy, Debug, Default)]
pub struct SearchProgress {
    pub windows: u64,
    pub fermat_tests: u64,
}

pub fn generate_safe_prime<R: RngCore + ?Sized>(bits: usize, rng: &mut R) -> Result<BigUint> {
    generate_safe_prime_with_progress(bits, rng, |_| {})
}

/// Returns a safe prime `q` with exactly `bits` bits and `q ≡ 3 (mod 4)`.
///
/// Candidates `q' ≡ 5 (mod 6)` are sieved jointly for `q'` and `2q' + 1`
/// against primes below 2^18 before any modular exponentiation. The search is
/// sequential, so a seeded `rng` gives a reproducible result.
pub fn generate_safe_prime_with_progress<R, F>(bits: usize, rng: &mut R, mut progress: F) -> Result<BigUint>
where
    R: RngCore + ?Sized,
    F: FnMut(SearchProgress),
{
    if bits < 3 {
        return Err(Error::Domain(format!("no safe prime ≡ 3 (mod 4) has {bits} bits")));
    }
    if bits <= EXHAUSTIVE_MAX_BITS {
        return Ok(BigUint::from(small_safe_prime(bits as u32, rng)));
    }

    let half_bits = bits - 1;
    let sieve_primes: Vec<u32> = primes_below(SIEVE_LIMIT).into_iter().skip(2).collect();
    let two = BigUint::from(2u32);
    let mut stats = SearchProgress::default();

    loop {
        stats.windows += 1;
        let start = random_odd_start(half_bits, rng);
        let mut sieve = vec![true; WINDOW];
        for &p in &sieve_primes {
            let p64 = p as u64;
            let r = (&start % p).to_u64().unwrap_or(0);
            let inv6 = pow_mod_u64(6, p64 - 2, p64);
            // q' = start + 6i divisible by p
            let i0 = ((p64 - r) % p64) * inv6 % p64;
            // 2q' + 1 divisible by p, i.e. q' ≡ (p - 1) / 2
            let i1 = (((p64 - 1) / 2 + p64 - r) % p64) * inv6 % p64;
            for first in [i0, i1] {
                let mut i = first as usize;
                while i < WINDOW {
                    sieve[i] = false;
                    i += p as usize;
                }
            }
        }

        for (i, _) in sieve.iter().enumerate().filter(|(_, &keep)| keep) {
            let half = &start + BigUint::from(6 * i as u64);
            if half.bits() as usize != half_bits {
                break;
            }
            stats.fermat_tests += 1;
            if stats.fermat_tests % 256 == 0 {
                progress(stats);
            }
            if !two.modpow(&(&half - 1u32), &half).is_one() {
                continue;
            }
            let q: BigUint = (&half << 1u32) + 1u32;
            if !two.modpow(&(&q - 1u32), &q).is_one() {
                continue;
            }
            if is_probable_prime(&half, MR_ROUNDS, rng) && is_probable_prime(&q, MR_ROUNDS, rng) {
                progress(stats);
                return Ok(q);
            }
        }
        progress(stats);
    }
}

/// Random `q'` with exactly `half_bits` bits and `q' ≡ 5 (mod 6)`.
fn random_odd_start<R: RngCore + ?Sized>(half_bits: usize, rng: &mut R) -> BigUint {
    let top = BigUint::one() << (half_bits - 1);
    loop {
        let x = &top + random_below(&top, rng);
        let x = &x - (&x % 6u32) + 5u32;
        if x.bits() as usize == half_bits {
            return x;
        }
    }
}

fn small_safe_prime<R: RngCore + ?Sized>(bits: u32, rng: &mut R) -> u64 {
    let lo = 1u64 << (bits - 1);
    let hi = (1u64 << bits) - 1;
    let candidates: Vec<u64> = (lo..=hi)
        .filter(|q| q % 4 == 3 && is_prime_u64(*q) && is_prime_u64(q / 2))
        .collect();
    // Every bit length from 3 up has at least one such prime (7, 11, 23, 47, ...).
    candidates[rng.random_range(0..candidates.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn universe_starts_with_odd_primes() {
        assert_eq!(odd_prime_universe(8), vec![3, 5, 7, 11, 13, 17, 19, 23]);
        let u = odd_prime_universe(1024);
        assert_eq!(u.len(), 1024);
        assert_eq!(*u.last().unwrap(), 8167);
    }

    #[test]
    fn u64_primality_against_trial_division() {
        let trial = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d));
        for n in 0..5000u64 {
            assert_eq!(is_prime_u64(n), trial(n), "{n}");
        }
        // Strong pseudoprimes to several small bases.
        assert!(!is_prime_u64(3_215_031_751));
        assert!(!is_prime_u64(3_825_123_056_546_413_051));
        assert!(is_prime_u64(18_446_744_073_709_551_557));
    }

    #[test]
    fn big_primality() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // 2^127 - 1 is a Mersenne prime, 2^128 + 1 is not prime.
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_probable_prime(&m127, MR_ROUNDS, &mut rng));
        let f7 = (BigUint::one() << 128u32) + 1u32;
        assert!(!is_probable_prime(&f7, MR_ROUNDS, &mut rng));
        let product = &m127 * BigUint::from(18_446_744_073_709_551_557u64);
        assert!(!is_probable_prime(&product, MR_ROUNDS, &mut rng));
    }

    #[test]
    fn known_safe_primes() {
        assert!(is_safe_prime_deterministic(&BigUint::from(1019u32)));
        assert!(is_safe_prime_deterministic(&BigUint::from(7u32)));
        assert!(!is_safe_prime_deterministic(&BigUint::from(1021u32)));
        assert!(!is_safe_prime_deterministic(&BigUint::from(13u32)));
    }

    #[test]
    fn three_bit_safe_prime_is_seven() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            assert_eq!(generate_safe_prime(3, &mut rng).unwrap(), BigUint::from(7u32));
        }
        assert!(generate_safe_prime(2, &mut rng).is_err());
    }

    #[test]
    fn generated_safe_primes_have_exact_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for bits in [8usize, 10, 24, 25, 32, 64, 128, 256] {
            let q = generate_safe_prime(bits, &mut rng).unwrap();
            assert_eq!(q.bits() as usize, bits);
            assert_eq!(&q % 4u32, BigUint::from(3u32));
            assert!(is_safe_prime_deterministic(&q), "{bits}: {q}");
        }
    }

    #[test]
    fn seeded_search_is_reproducible() {
        let a = generate_safe_prime(160, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = generate_safe_prime(160, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covers_whole_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = sample_primes(8, 8, &mut rng).unwrap().primes;
        s.sort();
        assert_eq!(s, vec![3, 5, 7, 11, 13, 17, 19, 23]);
        assert!(sample_primes(9, 8, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_deterministic_when_seeded() {
        let a = sample_primes(512, 1024, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_primes(512, 1024, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let c = sample_primes(512, 1024, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let distinct: std::collections::HashSet<_> = a.primes.iter().collect();
        assert_eq!(distinct.len(), 512);
    }

    #[test]
    fn stored_sample_validation() {
        assert!(PrimeSample::from_primes(vec![3, 5, 7], 8).is_ok());
        assert!(PrimeSample::from_primes(vec![3, 9], 8).is_err());
        assert!(PrimeSample::from_primes(vec![3, 3], 8).is_err());
        assert!(PrimeSample::from_primes(vec![2], 8).is_err());
    }
}

//! Subset products modulo q and their inversion by rational reconstruction.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::prime::PrimeSample;
use crate::error::{Error, Result};
use crate::template::Template;

/// Multiplies small factors into `u64` chunks before touching the big integer.
fn product_of<I: IntoIterator<Item = u32>>(factors: I, modulus: Option<&BigUint>) -> BigUint {
    let mut acc = BigUint::one();
    let mut chunk: u64 = 1;
    for p in factors {
        match chunk.checked_mul(p as u64) {
            Some(c) => chunk = c,
            None => {
                acc *= chunk;
                if let Some(q) = modulus {
                    acc %= q;
                }
                chunk = p as u64;
            }
        }
    }
    acc *= chunk;
    if let Some(q) = modulus {
        acc %= q;
    }
    acc
}

/// `∏ p_i^{bits_i} mod q`.
pub fn subset_product(sample: &PrimeSample, bits: &Template, q: &BigUint) -> Result<BigUint> {
    if sample.len() != bits.len() {
        return Err(Error::LengthMismatch {
            expected: sample.len(),
            actual: bits.len(),
        });
    }
    let set = sample
        .primes
        .iter()
        .zip(bits.iter())
        .filter(|(_, b)| *b)
        .map(|(&p, _)| p);
    Ok(product_of(set, Some(q)))
}

pub fn mod_inverse(a: &BigUint, q: &BigUint) -> Result<BigUint> {
    if a.is_zero() {
        return Err(Error::NotInvertible);
    }
    a.modinv(q).ok_or(Error::NotInvertible)
}

/// A fixed set of primes with their product, for repeated smoothness tests.
#[derive(Clone, Debug)]
pub struct SmoothBasis {
    primes: Vec<u32>,
    product: BigUint,
}

impl SmoothBasis {
    pub fn new(primes: Vec<u32>) -> Self {
        let product = product_of(primes.iter().copied(), None);
        SmoothBasis { primes, product }
    }

    pub fn product(&self) -> &BigUint {
        &self.product
    }

    /// Whether `v` is a product of distinct basis primes. Assumes the basis
    /// itself has distinct entries, so its product is squarefree.
    pub fn divides_product(&self, v: &BigUint) -> bool {
        !v.is_zero() && v <= &self.product && (&self.product % v).is_zero()
    }

    /// Indices into the basis with `v = ∏ primes[i]`, or `None` when `v` has a
    /// prime factor outside the basis or a repeated factor.
    pub fn factor(&self, v: &BigUint) -> Option<Vec<usize>> {
        if v.is_zero() {
            return None;
        }
        if v.is_one() {
            return Some(Vec::new());
        }
        if v.gcd(&self.product) != *v {
            return None;
        }
        let mut rest = v.clone();
        let mut out = Vec::new();
        for (i, &p) in self.primes.iter().enumerate() {
            if rest.is_one() {
                break;
            }
            if (&rest % p).is_zero() {
                rest /= p;
                out.push(i);
            }
        }
        rest.is_one().then_some(out)
    }
}

/// Indices of `allowed` whose product is exactly `v`, or `None` (not smooth,
/// or not squarefree).
pub fn smooth_factor(v: &BigUint, allowed: &[u32]) -> Option<Vec<usize>> {
    SmoothBasis::new(allowed.to_vec()).factor(v)
}

/// One step of the extended Euclidean algorithm on `(q, D)` with
/// `numerator ≡ denominator · D (mod q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconstructionCandidate {
    pub numerator: BigUint,
    pub denominator: BigUint,
    pub step_index: usize,
}

/// Iterates the remainder sequence of `(q, D)`, yielding the steps whose
/// Bézout coefficient `t_j` is positive. Those are exactly the steps where
/// `r_j ≡ t_j · D (mod q)` holds with both sides nonnegative; the other half
/// satisfy `r_j ≡ -|t_j| · D` instead.
pub struct EuclidCandidates {
    r_prev: BigUint,
    r: BigUint,
    t_prev: BigInt,
    t: BigInt,
    step: usize,
}

impl EuclidCandidates {
    pub fn new(d: &BigUint, q: &BigUint) -> Self {
        EuclidCandidates {
            r_prev: q.clone(),
            r: d % q,
            t_prev: BigInt::zero(),
            t: BigInt::one(),
            step: 1,
        }
    }

    fn advance(&mut self) {
        let (quot, rem) = self.r_prev.div_rem(&self.r);
        let t_next = &self.t_prev - BigInt::from_biguint(Sign::Plus, quot) * &self.t;
        self.r_prev = std::mem::replace(&mut self.r, rem);
        self.t_prev = std::mem::replace(&mut self.t, t_next);
        self.step += 1;
    }
}

impl Iterator for EuclidCandidates {
    type Item = ReconstructionCandidate;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.r.is_zero() {
            let positive = self.t.is_positive();
            let out = positive.then(|| ReconstructionCandidate {
                numerator: self.r.clone(),
                denominator: self.t.magnitude().clone(),
                step_index: self.step,
            });
            self.advance();
            if out.is_some() {
                return out;
            }
        }
        None
    }
}

/// Coordinates to change in a probe to reach the encoded center.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Flips {
    /// Coordinates where the probe is 0 and the center is 1.
    pub raise: Vec<usize>,
    /// Coordinates where the probe is 1 and the center is 0.
    pub lower: Vec<usize>,
}

impl Flips {
    pub fn count(&self) -> usize {
        self.raise.len() + self.lower.len()
    }

    pub fn apply(&self, probe: &Template) -> Template {
        let mut out = probe.clone();
        for &i in &self.raise {
            out.set(i, true);
        }
        for &i in &self.lower {
            out.set(i, false);
        }
        out
    }
}

/// Recovers the flips taking `probe` to the center whose subset product is
/// `D · subset_product(probe)`.
///
/// Every positive-coefficient Euclid step is screened: the numerator must divide
/// the product of the primes at zero coordinates of the probe and the
/// denominator the product at one coordinates. The first screened candidate
/// that factors completely into fewer than `max_flips` primes is returned.
pub fn rational_reconstruct(
    d: &BigUint,
    q: &BigUint,
    sample: &PrimeSample,
    probe: &Template,
    max_flips: usize,
) -> Result<Option<Flips>> {
    if sample.len() != probe.len() {
        return Err(Error::LengthMismatch {
            expected: sample.len(),
            actual: probe.len(),
        });
    }
    if d.is_zero() || d >= q || !d.gcd(q).is_one() {
        return Err(Error::NotInvertible);
    }

    let (mut zero_coords, mut one_coords) = (Vec::new(), Vec::new());
    for (i, bit) in probe.iter().enumerate() {
        if bit {
            one_coords.push(i);
        } else {
            zero_coords.push(i);
        }
    }
    let basis_of = |coords: &[usize]| SmoothBasis::new(coords.iter().map(|&i| sample.primes[i]).collect());
    let raise_basis = basis_of(&zero_coords);
    let lower_basis = basis_of(&one_coords);

    for cand in EuclidCandidates::new(d, q) {
        // Denominators only grow along the sequence.
        if cand.denominator > *lower_basis.product() {
            break;
        }
        if !raise_basis.divides_product(&cand.numerator) || !lower_basis.divides_product(&cand.denominator) {
            continue;
        }
        let (Some(up), Some(down)) = (raise_basis.factor(&cand.numerator), lower_basis.factor(&cand.denominator))
        else {
            continue;
        };
        if up.len() + down.len() >= max_flips {
            continue;
        }
        return Ok(Some(Flips {
            raise: up.into_iter().map(|i| zero_coords[i]).collect(),
            lower: down.into_iter().map(|i| one_coords[i]).collect(),
        }));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::prime::{odd_prime_universe, sample_primes};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_sample() -> PrimeSample {
        PrimeSample::from_primes(vec![3, 5, 7, 11, 13, 17, 19, 23], 8).unwrap()
    }

    fn q1019() -> BigUint {
        BigUint::from(1019u32)
    }

    /// Straight multiplication, no chunking, no reduction until the end.
    fn naive_product(primes: &[u32], bits: &Template, q: &BigUint) -> BigUint {
        let mut acc = BigUint::one();
        for (i, &p) in primes.iter().enumerate() {
            if bits.get(i) {
                acc *= p;
            }
        }
        acc % q
    }

    #[test]
    fn subset_product_examples() {
        let s = toy_sample();
        let q = q1019();
        assert_eq!(subset_product(&s, &Template::zeros(8), &q).unwrap(), BigUint::one());
        let single: Template = "00010000".parse().unwrap();
        assert_eq!(subset_product(&s, &single, &q).unwrap(), BigUint::from(11u32));
        let c: Template = "10110010".parse().unwrap();
        assert_eq!(subset_product(&s, &c, &q).unwrap(), BigUint::from(313u32));
        assert!(subset_product(&s, &Template::zeros(7), &q).is_err());
    }

    #[test]
    fn subset_product_matches_naive_at_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample = sample_primes(512, 1024, &mut rng).unwrap();
        // Any modulus works for the product identity.
        let q = (BigUint::one() << 1791u32) + 12345u32;
        for _ in 0..20 {
            let bits = Template::random(512, &mut rng);
            assert_eq!(
                subset_product(&sample, &bits, &q).unwrap(),
                naive_product(&sample.primes, &bits, &q)
            );
        }
    }

    #[test]
    fn inverse_of_toy_product() {
        assert_eq!(mod_inverse(&BigUint::from(399u32), &q1019()).unwrap(), BigUint::from(853u32));
        assert!(mod_inverse(&BigUint::zero(), &q1019()).is_err());
        assert!(mod_inverse(&BigUint::from(6u32), &BigUint::from(9u32)).is_err());
    }

    #[test]
    fn smooth_factor_examples() {
        let allowed = odd_prime_universe(10);
        assert_eq!(smooth_factor(&BigUint::one(), &allowed), Some(vec![]));
        let f = smooth_factor(&BigUint::from(231u32), &allowed).unwrap();
        let primes: Vec<u32> = f.iter().map(|&i| allowed[i]).collect();
        assert_eq!(primes, vec![3, 7, 11]);
        assert_eq!(smooth_factor(&BigUint::from(9u32), &[3, 5, 7]), None);
        assert_eq!(smooth_factor(&BigUint::from(22u32), &[3, 5, 7, 11]), None);
        assert_eq!(smooth_factor(&BigUint::zero(), &[3]), None);
    }

    #[test]
    fn smooth_factor_agrees_with_trial_division() {
        let allowed = [3u32, 5, 7, 11, 13];
        for v in 1u32..20_000 {
            let mut rest = v;
            let mut expected = Some(Vec::new());
            for (i, &p) in allowed.iter().enumerate() {
                if rest % p == 0 {
                    rest /= p;
                    expected.as_mut().unwrap().push(i);
                    if rest % p == 0 {
                        expected = None;
                        break;
                    }
                }
            }
            if rest != 1 {
                expected = None;
            }
            assert_eq!(smooth_factor(&BigUint::from(v), &allowed), expected, "{v}");
        }
    }

    #[test]
    fn euclid_candidates_satisfy_congruence() {
        let q = BigUint::from(1_000_003u32);
        for d in [2u32, 11, 999_999, 123_457] {
            let d = BigUint::from(d);
            for c in EuclidCandidates::new(&d, &q) {
                assert_eq!(&c.numerator % &q, (&c.denominator * &d) % &q);
            }
        }
    }

    #[test]
    fn reconstruct_identity_is_zero_flips() {
        let probe: Template = "10110010".parse().unwrap();
        let flips = rational_reconstruct(&BigUint::one(), &q1019(), &toy_sample(), &probe, 2)
            .unwrap()
            .unwrap();
        assert_eq!(flips, Flips::default());
    }

    #[test]
    fn reconstruct_toy_single_raise() {
        let s = toy_sample();
        let q = q1019();
        let probe: Template = "10100010".parse().unwrap();
        let x = subset_product(&s, &probe, &q).unwrap();
        assert_eq!(x, BigUint::from(399u32));
        let d = BigUint::from(313u32) * mod_inverse(&x, &q).unwrap() % &q;
        assert_eq!(d, BigUint::from(11u32));
        let flips = rational_reconstruct(&d, &q, &s, &probe, 2).unwrap().unwrap();
        assert_eq!(flips, Flips { raise: vec![3], lower: vec![] });
        assert_eq!(flips.apply(&probe), "10110010".parse().unwrap());
    }

    #[test]
    fn reconstruct_rejects_bad_d() {
        let probe = Template::zeros(8);
        assert!(rational_reconstruct(&BigUint::zero(), &q1019(), &toy_sample(), &probe, 2).is_err());
        assert!(rational_reconstruct(&BigUint::from(1019u32), &q1019(), &toy_sample(), &probe, 2).is_err());
    }

    #[test]
    fn reconstruct_toy_exhaustive() {
        // Every (center, probe) pair at distance < 2 must be recovered exactly;
        // anything returned for farther pairs must still be sound.
        let s = toy_sample();
        let q = q1019();
        for c in 0u32..256 {
            let center = Template::from_bits(&(0..8).map(|i| c >> (7 - i) & 1 == 1).collect::<Vec<_>>());
            let cc = subset_product(&s, &center, &q).unwrap();
            for p in 0u32..256 {
                let probe = Template::from_bits(&(0..8).map(|i| p >> (7 - i) & 1 == 1).collect::<Vec<_>>());
                let x = subset_product(&s, &probe, &q).unwrap();
                let d = &cc * mod_inverse(&x, &q).unwrap() % &q;
                let got = rational_reconstruct(&d, &q, &s, &probe, 2).unwrap();
                let dist = (c ^ p).count_ones();
                if dist < 2 {
                    assert_eq!(got.map(|f| f.apply(&probe)), Some(center.clone()));
                } else if let Some(f) = got {
                    let moved = f.apply(&probe);
                    assert!(f.count() < 2);
                    assert_eq!(subset_product(&s, &moved, &q).unwrap(), cc);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inverse_law(a in 1u64..1_000_000_000, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = crate::numtheory::generate_safe_prime(96, &mut rng).unwrap();
            let a = BigUint::from(a);
            let inv = mod_inverse(&a, &q).unwrap();
            prop_assert!((a * inv % &q).is_one());
        }

        #[test]
        fn multiplicative_update_law(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = BigUint::from(1_000_000_007u64);
            let sample = sample_primes(24, 64, &mut rng).unwrap();
            let x = Template::random(24, &mut rng);
            let e = Template::random(24, &mut rng);
            let y = x.xor(&e).unwrap();
            let mut expected = subset_product(&sample, &x, &q).unwrap();
            for i in 0..24 {
                if e.get(i) {
                    let p = BigUint::from(sample.primes[i]);
                    expected = if x.get(i) { expected * mod_inverse(&p, &q).unwrap() } else { expected * p } % &q;
                }
            }
            prop_assert_eq!(subset_product(&sample, &y, &q).unwrap(), expected);
        }

        #[test]
        fn reconstruction_sound_and_complete(seed in any::<u64>(), weight in 0usize..6) {
            // 24 coordinates out of the first 64 odd primes (< 320); a 6-flip
            // product is below 2^50, so q = 2^61 - 1 leaves room for uniqueness.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = (BigUint::one() << 61u32) - 1u32;
            let sample = sample_primes(24, 64, &mut rng).unwrap();
            let center = Template::random(24, &mut rng);
            let mut probe = center.clone();
            for i in rand::seq::index::sample(&mut rng, 24, weight) {
                probe.flip(i);
            }
            let cc = subset_product(&sample, &center, &q).unwrap();
            let x = subset_product(&sample, &probe, &q).unwrap();
            let d = &cc * mod_inverse(&x, &q).unwrap() % &q;
            let flips = rational_reconstruct(&d, &q, &sample, &probe, 7).unwrap().expect("within radius");
            let moved = flips.apply(&probe);
            prop_assert_eq!(subset_product(&sample, &moved, &q).unwrap(), d * x % &q);
            prop_assert_eq!(moved, center);
        }
    }
}

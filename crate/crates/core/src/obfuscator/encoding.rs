use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numtheory::{mod_inverse, rational_reconstruct, sample_primes, subset_product, PrimeSample};
use crate::params::SystemParams;
use crate::template::{hamming, Template};

/// Published form of a template center: `C = ∏ p_i^{c_i} mod q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoding {
    pub sample: PrimeSample,
    pub q: BigUint,
    pub c: BigUint,
}

/// Encodes `center` under a freshly sampled prime binding.
pub fn encode<R: Rng + ?Sized>(center: &Template, params: &SystemParams, rng: &mut R) -> Result<Encoding> {
    params.ensure_usable()?;
    if center.len() != params.n {
        return Err(Error::LengthMismatch {
            expected: params.n,
            actual: center.len(),
        });
    }
    let sample = sample_primes(params.n, params.universe_size, rng)?;
    encode_with_sample(center, sample, params.q()?.clone())
}

/// Encodes `center` under a caller-chosen prime binding.
pub fn encode_with_sample(center: &Template, sample: PrimeSample, q: BigUint) -> Result<Encoding> {
    let c = subset_product(&sample, center, &q)?;
    Ok(Encoding { sample, q, c })
}

impl Encoding {
    pub fn n(&self) -> usize {
        self.sample.len()
    }

    /// Recovers the center from a probe strictly closer than `r`, or `None`.
    ///
    /// A returned template always reproduces `C` and lies within `r − 1` of the
    /// probe. For probes at distance `r` or more it is normally `None`, but a
    /// different vector with the same subset product may in principle come
    /// back; the point-function lock is the authoritative guard.
    pub fn decode(&self, probe: &Template, r: usize) -> Result<Option<Template>> {
        if probe.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                actual: probe.len(),
            });
        }
        let x = subset_product(&self.sample, probe, &self.q)?;
        let d = &self.c * mod_inverse(&x, &self.q)? % &self.q;
        let Some(flips) = rational_reconstruct(&d, &self.q, &self.sample, probe, r)? else {
            return Ok(None);
        };
        let candidate = flips.apply(probe);
        if subset_product(&self.sample, &candidate, &self.q)? != self.c || hamming(&candidate, probe)? >= r {
            return Ok(None);
        }
        Ok(Some(candidate))
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        if self.c.is_zero() || self.c >= self.q {
            return Err(Error::Malformed("C must satisfy 1 ≤ C < q".into()));
        }
        if self.sample.primes.iter().any(|&p| BigUint::from(p) >= self.q) {
            return Err(Error::Malformed("sample primes must be below q".into()));
        }
        Ok(())
    }
}

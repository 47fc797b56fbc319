//! Arbitrary-precision number theory for the subset-product encoding.

mod prime;
mod reconstruct;

pub use prime::{
    generate_safe_prime, generate_safe_prime_with_progress, is_prime_u64, is_probable_prime, is_safe_prime,
    is_safe_prime_deterministic, odd_prime_universe, primes_below, sample_primes, PrimeSample, SearchProgress,
    MR_ROUNDS,
};
pub use reconstruct::{
    mod_inverse, rational_reconstruct, smooth_factor, subset_product, EuclidCandidates, Flips,
    ReconstructionCandidate, SmoothBasis,
};

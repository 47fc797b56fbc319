//! System parameters, their validity conditions and the security accounting of
//! a Hamming-ball configuration.

use std::fmt;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha512};

use crate::error::{Error, Result};
use crate::numtheory::{self, odd_prime_universe, SearchProgress};

pub const PARAMS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemParams {
    pub n: usize,
    pub r: usize,
    pub lambda_target: u32,
    pub universe_size: usize,
    pub q_bits: usize,
    pub q: Option<BigUint>,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams::new(512, 140, 87, 1024)
    }
}

impl SystemParams {
    /// Parameters without a modulus; `q_bits` is derived from the universe.
    pub fn new(n: usize, r: usize, lambda_target: u32, universe_size: usize) -> Self {
        let mut p = SystemParams {
            n,
            r,
            lambda_target,
            universe_size,
            q_bits: 0,
            q: None,
        };
        p.q_bits = derive_q_bits(&p);
        p
    }

    /// Attaches a fixed modulus, overriding `q_bits` with its actual length.
    pub fn with_q(mut self, q: BigUint) -> Self {
        self.q_bits = q.bits() as usize;
        self.q = Some(q);
        self
    }

    pub fn q(&self) -> Result<&BigUint> {
        self.q
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("safe prime q has not been generated".into()))
    }

    /// Generates a `q_bits`-bit safe prime and stores it.
    pub fn generate_q<R, F>(&mut self, rng: &mut R, progress: F) -> Result<&BigUint>
    where
        R: RngCore + ?Sized,
        F: FnMut(SearchProgress),
    {
        let q = numtheory::generate_safe_prime_with_progress(self.q_bits, rng, progress)?;
        Ok(self.q.insert(q))
    }

    /// Half-template width used by the point-function lock.
    pub fn half_width(&self) -> usize {
        self.n / 2
    }

    /// Structural checks that must hold before anything is encoded.
    pub fn ensure_usable(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("n = {} must be even and positive", self.n)));
        }
        if self.r == 0 || 2 * self.r >= self.n {
            return Err(Error::InvalidParams(format!("radius r = {} must satisfy 0 < r < n/2", self.r)));
        }
        if self.universe_size < self.n {
            return Err(Error::InvalidParams(format!(
                "universe of {} primes cannot bind {} coordinates",
                self.universe_size, self.n
            )));
        }
        let q = self.q()?;
        if q <= &uniqueness_bound(self.r, self.universe_size) {
            return Err(Error::InvalidParams("q is too small for unique decoding".into()));
        }
        Ok(())
    }

    /// Digest binding a record to `(n, r, q)`.
    pub fn digest(&self) -> Result<[u8; 64]> {
        Ok(params_digest(self.n, self.r, self.q()?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ParamsFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ParamsFile>(s)?.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        SystemParams::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn params_digest(n: usize, r: usize, q: &BigUint) -> [u8; 64] {
    let mut h = Sha512::new();
    h.update(b"visual-vault/params/v1");
    h.update((n as u64).to_be_bytes());
    h.update((r as u64).to_be_bytes());
    h.update(q.to_str_radix(10).as_bytes());
    h.finalize().into()
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: u32,
    n: usize,
    r: usize,
    lambda_target: u32,
    universe_size: usize,
    q_bits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<String>,
}

impl From<&SystemParams> for ParamsFile {
    fn from(p: &SystemParams) -> Self {
        ParamsFile {
            version: PARAMS_VERSION,
            n: p.n,
            r: p.r,
            lambda_target: p.lambda_target,
            universe_size: p.universe_size,
            q_bits: p.q_bits,
            q: p.q.as_ref().map(|q| q.to_str_radix(10)),
        }
    }
}

impl TryFrom<ParamsFile> for SystemParams {
    type Error = Error;

    fn try_from(f: ParamsFile) -> Result<Self> {
        if f.version != PARAMS_VERSION {
            return Err(Error::Malformed(format!("unsupported params version {}", f.version)));
        }
        let q = f
            .q
            .map(|s| BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| Error::Malformed("q is not a decimal integer".into())))
            .transpose()?;
        Ok(SystemParams {
            n: f.n,
            r: f.r,
            lambda_target: f.lambda_target,
            universe_size: f.universe_size,
            q_bits: f.q_bits,
            q,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogBase {
    Natural,
    Ten,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Natural => "natural",
            LogBase::Ten => "base-10",
        })
    }
}

/// Largest radius admitted by `r ≤ n/2 − sqrt(log(2)·n·λ)`.
pub fn r1_bound(n: usize, lambda: f64, base: LogBase) -> Result<f64> {
    if n == 0 || lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Domain("r1 bound needs n > 0 and λ > 0".into()));
    }
    let bound = n as f64 / 2.0 - (base.log(2.0) * n as f64 * lambda).sqrt();
    if bound < 0.0 {
        return Err(Error::Domain(format!("λ = {lambda} admits no radius for n = {n}")));
    }
    Ok(bound)
}

/// Smallest radius for which the encoding hides its center:
/// `log(2·sqrt(2πe))·n / log(n·log n)`.
pub fn r2_bound(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain("r2 bound needs n ≥ 3".into()));
    }
    let n = n as f64;
    let c = 2.0 * (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt();
    Ok(c.ln() * n / (n * n.ln()).ln())
}

fn log2_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 64 {
        return v.to_f64().unwrap_or(f64::NAN).log2();
    }
    let shift = bits - 64;
    (v >> shift).to_f64().unwrap_or(f64::NAN).log2() + shift as f64
}

/// `Σ_{i=0}^{r} C(n, i)`, exactly.
pub fn ball_size(n: usize, r: usize) -> BigUint {
    let mut term = BigUint::one();
    let mut total = BigUint::one();
    for i in 1..=r.min(n) {
        term = term * BigUint::from(n - i + 1) / BigUint::from(i);
        total += &term;
    }
    total
}

/// Security bits of a random guess against a radius-`r` ball:
/// `−log2(|B(r)| / 2^n)`. The ball size is exact; only the final logarithm is
/// a float.
pub fn lambda_exact(n: usize, r: usize) -> Result<f64> {
    if r > n {
        return Err(Error::Domain(format!("radius {r} exceeds length {n}")));
    }
    Ok(n as f64 - log2_biguint(&ball_size(n, r)))
}

/// `2 · ∏(r − 1 largest universe primes) + 1`; any `q` at or above this (and
/// strictly greater than twice the product) decodes uniquely for every
/// possible prime sample.
pub fn uniqueness_bound(r: usize, universe_size: usize) -> BigUint {
    let universe = odd_prime_universe(universe_size);
    let take = r.saturating_sub(1).min(universe.len());
    let product = universe[universe.len() - take..]
        .iter()
        .fold(BigUint::one(), |acc, &p| acc * p);
    (product << 1u32) + 1u32
}

/// Bit length for `q`: the smallest multiple of 32 strictly above the bit
/// length of [`uniqueness_bound`], so every `q` of that length clears it.
pub fn derive_q_bits(params: &SystemParams) -> usize {
    let bits = uniqueness_bound(params.r, params.universe_size).bits() as usize;
    (bits / 32 + 1) * 32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Reported shortfall that does not invalidate the parameters.
    Warn,
    Info,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Warn => "WARN",
            CheckStatus::Info => "INFO",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub boundary: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub lambda_exact: Option<f64>,
}

impl ValidationReport {
    /// No check failed. Warnings do not count.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    /// No check failed or warned.
    pub fn passed_strict(&self) -> bool {
        self.checks
            .iter()
            .all(|c| matches!(c.status, CheckStatus::Pass | CheckStatus::Info))
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, status: CheckStatus, boundary: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            status,
            boundary: boundary.into(),
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {:<14} boundary: {:<28} {}", c.status, c.name, c.boundary, c.detail)?;
        }
        let verdict = if self.passed_strict() {
            "valid"
        } else if self.passed() {
            "valid with warnings"
        } else {
            "INVALID"
        };
        write!(f, "overall: {verdict}")
    }
}

fn pass_fail(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Evaluates every parameter condition. Deterministic: primality bases are
/// derived from `q`.
pub fn validate(params: &SystemParams) -> ValidationReport {
    use CheckStatus::*;
    let SystemParams { n, r, .. } = *params;
    let mut report = ValidationReport {
        checks: Vec::new(),
        lambda_exact: None,
    };

    report.push("length", pass_fail(n > 0 && n % 2 == 0), "n even, n > 0", format!("n = {n}"));
    report.push("radius", pass_fail(r > 0 && 2 * r < n), "0 < r < n/2", format!("r = {r}, n/2 = {}", n / 2));
    report.push(
        "universe",
        pass_fail(params.universe_size >= n),
        format!("universe_size ≥ {n}"),
        format!("universe_size = {}", params.universe_size),
    );

    match r2_bound(n) {
        Ok(b) => report.push("hiding (r2)", pass_fail(r as f64 > b), format!("r > {b:.3}"), format!("r = {r}")),
        Err(e) => report.push("hiding (r2)", Fail, "n ≥ 3", e.to_string()),
    }
    for base in [LogBase::Ten, LogBase::Natural] {
        let name = match base {
            LogBase::Ten => "r1 base-10",
            LogBase::Natural => "r1 natural",
        };
        match r1_bound(n, params.lambda_target as f64, base) {
            Ok(b) => {
                let holds = if r as f64 <= b { "holds" } else { "violated" };
                report.push(name, Info, format!("r ≤ {b:.3}"), format!("r = {r}, {holds}"));
            }
            Err(e) => report.push(name, Info, "-", e.to_string()),
        }
    }

    match &params.q {
        None => report.push("q present", Fail, "q generated", "missing"),
        Some(q) => {
            report.push("q present", Pass, "q generated", format!("{} bits", q.bits()));
            report.push(
                "q safe prime",
                pass_fail(numtheory::is_safe_prime_deterministic(q)),
                "q, (q-1)/2 prime",
                format!("{} Miller-Rabin rounds each", numtheory::MR_ROUNDS + 1),
            );
            let bound = uniqueness_bound(r, params.universe_size);
            report.push(
                "q uniqueness",
                pass_fail(q >= &bound),
                format!("q > 2·∏(top {} primes)", r.saturating_sub(1)),
                format!("bound {} bits", bound.bits()),
            );
            report.push(
                "q bits",
                pass_fail(q.bits() as usize == params.q_bits),
                format!("q_bits = {}", params.q_bits),
                format!("actual {} bits", q.bits()),
            );
        }
    }

    match lambda_exact(n, r) {
        Ok(lambda) => {
            report.lambda_exact = Some(lambda);
            let status = if lambda >= params.lambda_target as f64 { Pass } else { Warn };
            report.push(
                "lambda exact",
                status,
                format!("λ ≥ {}", params.lambda_target),
                format!("λ = {lambda:.4} bits"),
            );
        }
        Err(e) => report.push("lambda exact", Fail, "r ≤ n", e.to_string()),
    }
    report
}

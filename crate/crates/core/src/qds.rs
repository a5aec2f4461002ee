//! One-time universal₂ hashing signatures among three parties.
//!
//! A signer (Alice), a forwarder (Bob) and a verifier (Charlie) hold
//! XOR-correlated keys `X_a = X_b ^ X_c` (`p` bits) and `Y_a = Y_b ^ Y_c`
//! (`2p` bits). Alice hashes the message with an LFSR-based Toeplitz matrix
//! keyed by `X_a` and a fresh random irreducible polynomial, appends the
//! polynomial, and one-time-pads the result with `Y_a`. Bob and Charlie can
//! only check the signature after exchanging their key halves, at which point
//! each holds `X_a` and `Y_a`.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::gf2::Gf2Poly;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QdsError {
    #[error("security parameter p = {0} is too small (need p >= 2)")]
    InvalidDegree(usize),
    #[error("cannot hash an empty message")]
    EmptyMessage,
    #[error("{what}: expected {expected} bits, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("key bundle already used to sign a message")]
    KeysConsumed,
    #[error("coefficients do not describe an irreducible polynomial")]
    Reducible,
}

/// A monic irreducible polynomial of degree `p` over GF(2), stored as its
/// `p` low-order coefficients (`coefficients[i]` is the coefficient of `x^i`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrreduciblePoly {
    degree: usize,
    coefficients: BitString,
}

impl IrreduciblePoly {
    /// Validates the coefficient string; `None` when the polynomial it
    /// encodes is reducible or the degree is below 2.
    pub fn from_coefficients(coefficients: BitString) -> Option<Self> {
        let degree = coefficients.len();
        if degree < 2 {
            return None;
        }
        let poly = Gf2Poly::monic_from_low(degree, coefficients.iter());
        poly.is_irreducible().then_some(Self { degree, coefficients })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The `p`-bit string `I_a` carried in the signature.
    pub fn coefficients(&self) -> &BitString {
        &self.coefficients
    }

    pub fn to_gf2(&self) -> Gf2Poly {
        Gf2Poly::monic_from_low(self.degree, self.coefficients.iter())
    }
}

/// Samples a uniformly random irreducible polynomial of degree `p`.
///
/// Rejection sampling over candidates with a nonzero constant term; every
/// irreducible polynomial of degree `p >= 2` has one, so uniformity over the
/// irreducibles is preserved.
pub fn generate_irreducible<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<IrreduciblePoly, QdsError> {
    if p < 2 {
        return Err(QdsError::InvalidDegree(p));
    }
    if p <= 128 {
        // same draws as `BitString::random`, tested on machine words
        let mask = if p == 128 { u128::MAX } else { (1u128 << p) - 1 };
        loop {
            let words: Vec<u64> = (0..p.div_ceil(64)).map(|_| rng.random()).collect();
            let low = (words.iter().enumerate().fold(0u128, |acc, (i, &w)| acc | (u128::from(w) << (64 * i))) & mask) | 1;
            if Gf2Poly::is_irreducible_low(p, low) {
                let coefficients = BitString::from_words(&[low as u64, (low >> 64) as u64], p);
                return Ok(IrreduciblePoly { degree: p, coefficients });
            }
        }
    }
    loop {
        let mut candidate = BitString::random(p, rng);
        candidate.set(0, true);
        if let Some(poly) = IrreduciblePoly::from_coefficients(candidate) {
            return Ok(poly);
        }
    }
}

/// Computes `H · m` over GF(2) where column `j` of the `p × q` Toeplitz
/// matrix `H` is the LFSR state after `j` steps from `init_state`.
///
/// State bit 0 is the oldest. Each step shifts every bit one position toward
/// index 0 and sets the new last bit to the XOR of `state[i]` over all `i`
/// with coefficient `c_i = 1`.
pub fn lfsr_toeplitz_digest(
    message: &BitString,
    init_state: &BitString,
    poly: &IrreduciblePoly,
) -> Result<BitString, QdsError> {
    let p = poly.degree();
    if message.is_empty() {
        return Err(QdsError::EmptyMessage);
    }
    if init_state.len() != p {
        return Err(QdsError::LengthMismatch { what: "LFSR initial state", expected: p, found: init_state.len() });
    }
    let taps = poly.coefficients().to_words();
    let mut state = init_state.to_words();
    let mut digest = vec![0u64; state.len()];
    let last_word = (p - 1) / 64;
    let last_bit = (p - 1) % 64;
    for (j, bit) in message.iter().enumerate() {
        if bit {
            for (d, s) in digest.iter_mut().zip(&state) {
                *d ^= s;
            }
        }
        if j + 1 == message.len() {
            break;
        }
        let feedback = state.iter().zip(&taps).map(|(s, t)| (s & t).count_ones()).sum::<u32>() & 1;
        for w in 0..state.len() {
            let carry = state.get(w + 1).map_or(0, |next| next << 63);
            state[w] = (state[w] >> 1) | carry;
        }
        state[last_word] |= u64::from(feedback) << last_bit;
    }
    Ok(BitString::from_words(&digest, p))
}

/// The key material for one signature: Alice's `(x_a, y_a)`, Bob's
/// `(x_b, y_b)` and Charlie's `(x_c, y_c)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreePartyKeys {
    p: usize,
    x_a: BitString,
    x_b: BitString,
    x_c: BitString,
    y_a: BitString,
    y_b: BitString,
    y_c: BitString,
    consumed: bool,
}

impl ThreePartyKeys {
    /// Builds a bundle from the two partner halves, deriving Alice's keys.
    pub fn from_partner_keys(
        x_b: BitString,
        y_b: BitString,
        x_c: BitString,
        y_c: BitString,
    ) -> Result<Self, QdsError> {
        let p = x_b.len();
        if p < 2 {
            return Err(QdsError::InvalidDegree(p));
        }
        check_len("x_c", p, &x_c)?;
        check_len("y_b", 2 * p, &y_b)?;
        check_len("y_c", 2 * p, &y_c)?;
        Ok(Self { p, x_a: &x_b ^ &x_c, y_a: &y_b ^ &y_c, x_b, x_c, y_b, y_c, consumed: false })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Alice's keys `(x_a, y_a)`.
    pub fn signer(&self) -> (&BitString, &BitString) {
        (&self.x_a, &self.y_a)
    }

    /// Bob's keys `(x_b, y_b)`.
    pub fn forwarder(&self) -> (&BitString, &BitString) {
        (&self.x_b, &self.y_b)
    }

    /// Charlie's keys `(x_c, y_c)`.
    pub fn verifier(&self) -> (&BitString, &BitString) {
        (&self.x_c, &self.y_c)
    }

    /// What Bob and Charlie each hold after swapping key halves.
    pub fn combined(&self) -> CombinedKeys {
        CombinedKeys { k_x: &self.x_b ^ &self.x_c, k_y: &self.y_b ^ &self.y_c }
    }
}

fn check_len(what: &'static str, expected: usize, bits: &BitString) -> Result<(), QdsError> {
    if bits.len() == expected {
        Ok(())
    } else {
        Err(QdsError::LengthMismatch { what, expected, found: bits.len() })
    }
}

/// Samples Bob's and Charlie's halves uniformly and derives Alice's.
pub fn establish_key_bundle<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<ThreePartyKeys, QdsError> {
    if p < 2 {
        return Err(QdsError::InvalidDegree(p));
    }
    let x_b = BitString::random(p, rng);
    let x_c = BitString::random(p, rng);
    let y_b = BitString::random(2 * p, rng);
    let y_c = BitString::random(2 * p, rng);
    ThreePartyKeys::from_partner_keys(x_b, y_b, x_c, y_c)
}

/// `2p`-bit signature `(Dig1 || I_a) ^ Y_a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    bits: BitString,
}

impl Signature {
    /// Wraps arbitrary bits, e.g. a tampered or fabricated signature.
    pub fn from_bits(bits: BitString) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }
}

/// Keys `K_X = X_b ^ X_c`, `K_Y = Y_b ^ Y_c` reconstructed by a verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedKeys {
    pub k_x: BitString,
    pub k_y: BitString,
}

pub fn combine_partner_keys(
    x_b: &BitString,
    y_b: &BitString,
    x_c: &BitString,
    y_c: &BitString,
) -> Result<CombinedKeys, QdsError> {
    let p = x_b.len();
    check_len("x_c", p, x_c)?;
    check_len("y_b", 2 * p, y_b)?;
    check_len("y_c", 2 * p, y_c)?;
    Ok(CombinedKeys { k_x: x_b ^ x_c, k_y: y_b ^ y_c })
}

/// Signs `message` and marks the bundle consumed.
pub fn sign<R: Rng + ?Sized>(message: &[u8], keys: &mut ThreePartyKeys, rng: &mut R) -> Result<Signature, QdsError> {
    if keys.consumed {
        return Err(QdsError::KeysConsumed);
    }
    if message.is_empty() {
        return Err(QdsError::EmptyMessage);
    }
    let poly = generate_irreducible(keys.p, rng)?;
    let digest = lfsr_toeplitz_digest(&BitString::from_bytes_msb_first(message), &keys.x_a, &poly)?;
    let bits = &digest.concat(poly.coefficients()) ^ &keys.y_a;
    keys.consumed = true;
    Ok(Signature { bits })
}

/// Accepts iff the decrypted polynomial is irreducible and the recomputed
/// digest equals the decrypted one. Malformed input yields `false`.
pub fn verify(message: &[u8], sig: &Signature, combined: &CombinedKeys) -> bool {
    let p = combined.k_x.len();
    if p < 2 || combined.k_y.len() != 2 * p || sig.bits.len() != 2 * p || message.is_empty() {
        return false;
    }
    let decrypted = &sig.bits ^ &combined.k_y;
    let (expected, poly_bits) = decrypted.split_at(p);
    let Some(poly) = IrreduciblePoly::from_coefficients(poly_bits) else {
        return false;
    };
    match lfsr_toeplitz_digest(&BitString::from_bytes_msb_first(message), &combined.k_x, &poly) {
        Ok(actual) => actual == expected,
        Err(_) => false,
    }
}

/// Forgery probability `q / 2^(p-1)` for a `q`-bit message.
pub fn forgery_bound<T: Real>(p: u32, q: u128) -> T {
    let q = T::from_u128(q).unwrap_or_else(T::infinity);
    q * T::lit(2.0).powi(1 - p as i32)
}

/// Exact value of [`forgery_bound`].
pub fn forgery_bound_exact(p: u32, q: u128) -> BigRational {
    BigRational::new(BigInt::from(q), BigInt::from(1u8) << (p - 1) as usize)
}

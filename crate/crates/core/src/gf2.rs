//! Polynomial arithmetic over GF(2).
//!
//! Polynomials are packed little-endian into `u64` words: bit `i` of the
//! packed form is the coefficient of `x^i`.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Gf2Poly {
    words: Vec<u64>,
}

impl Gf2Poly {
    pub fn zero() -> Self {
        Self { words: Vec::new() }
    }

    pub fn one() -> Self {
        Self { words: vec![1] }
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Self { words: vec![2] }
    }

    pub fn from_words(words: Vec<u64>) -> Self {
        let mut poly = Self { words };
        poly.normalize();
        poly
    }

    /// Builds `x^degree + sum(low[i] x^i)` from the low-order coefficients.
    pub fn monic_from_low(degree: usize, low: impl IntoIterator<Item = bool>) -> Self {
        let mut words = vec![0u64; degree / 64 + 1];
        for (i, bit) in low.into_iter().enumerate().take(degree) {
            if bit {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        words[degree / 64] |= 1 << (degree % 64);
        Self::from_words(words)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn normalize(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.words == [1]
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let top = *self.words.last()?;
        Some((self.words.len() - 1) * 64 + 63 - top.leading_zeros() as usize)
    }

    pub fn coeff(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| (w >> (i % 64)) & 1 == 1)
    }

    pub fn add(&self, other: &Gf2Poly) -> Gf2Poly {
        let (long, short) = if self.words.len() >= other.words.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut words = long.words.clone();
        for (w, s) in words.iter_mut().zip(&short.words) {
            *w ^= s;
        }
        Self::from_words(words)
    }

    pub fn rem(&self, modulus: &Gf2Poly) -> Gf2Poly {
        let mut words = self.words.clone();
        reduce_in_place(&mut words, modulus);
        Self::from_words(words)
    }

    pub fn mul(&self, other: &Gf2Poly) -> Gf2Poly {
        let mut out = vec![0u64; self.words.len() + other.words.len()];
        for i in 0..self.words.len() * 64 {
            if self.coeff(i) {
                xor_shifted(&mut out, &other.words, i);
            }
        }
        Self::from_words(out)
    }

    pub fn square_mod(&self, modulus: &Gf2Poly) -> Gf2Poly {
        let mut out = Vec::with_capacity(self.words.len() * 2);
        for &w in &self.words {
            out.push(spread(w as u32));
            out.push(spread((w >> 32) as u32));
        }
        reduce_in_place(&mut out, modulus);
        Self::from_words(out)
    }

    pub fn gcd(&self, other: &Gf2Poly) -> Gf2Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a
    }

    /// Rabin's test: `f` of degree `p` is irreducible iff
    /// `x^(2^p) = x (mod f)` and `gcd(x^(2^(p/r)) - x, f) = 1` for every
    /// prime `r | p`.
    ///
    /// While squaring, `gcd(x^(2^i) - x, f)` is also checked for a few small `i <= p/2`;
    /// a nontrivial factor there means `f` has a factor of degree dividing `i`,
    /// which rejects most reducible inputs early.
    pub fn is_irreducible(&self) -> bool {
        match self.degree() {
            Some(p) if (2..=128).contains(&p) && self.coeff(0) => {
                let low = self.words.iter().take(2).enumerate().fold(0u128, |acc, (i, &w)| acc | (u128::from(w) << (64 * i)));
                let low = if p == 128 { low } else { low & !(1u128 << p) };
                small::is_irreducible(p, low)
            }
            _ => self.is_irreducible_generic(),
        }
    }

    /// Irreducibility of `x^p + low` for `2 <= p <= 128`, where `low` holds
    /// the coefficients below `x^p`.
    pub fn is_irreducible_low(p: usize, low: u128) -> bool {
        assert!((2..=128).contains(&p), "degree {p} outside 2..=128");
        assert!(p == 128 || low >> p == 0, "low coefficients overlap x^p");
        low & 1 == 1 && small::is_irreducible(p, low)
    }

    fn is_irreducible_generic(&self) -> bool {
        let Some(p) = self.degree() else {
            return false;
        };
        if p == 0 {
            return false;
        }
        if p == 1 {
            return true;
        }
        // x and x + 1 are the only linear factors
        if !self.coeff(0) || self.words.iter().map(|w| w.count_ones()).sum::<u32>() % 2 == 0 {
            return false;
        }
        let maximal_divisors = maximal_divisors(p);
        let x = Gf2Poly::x();
        let mut power = x.clone();
        for i in 1..=p {
            power = power.square_mod(self);
            let check = maximal_divisors.contains(&i) || early_exit(i, p);
            if check && i < p && !power.add(&x).gcd(self).is_one() {
                return false;
            }
        }
        power == x.rem(self)
    }
}

impl fmt::Debug for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(degree) = self.degree() else {
            return f.write_str("0");
        };
        let terms: Vec<String> = (0..=degree)
            .rev()
            .filter(|&i| self.coeff(i))
            .map(|i| match i {
                0 => "1".to_string(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            })
            .collect();
        f.write_str(&terms.join(" + "))
    }
}

/// Interleaves the 32 bits of `x` with zeros (the GF(2) square of a word).
fn spread(x: u32) -> u64 {
    let mut x = u64::from(x);
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

/// `target ^= src << shift`, growing `target` if needed.
fn xor_shifted(target: &mut Vec<u64>, src: &[u64], shift: usize) {
    let word_shift = shift / 64;
    let bit_shift = shift % 64;
    let needed = src.len() + word_shift + 1;
    if target.len() < needed {
        target.resize(needed, 0);
    }
    for (i, &w) in src.iter().enumerate() {
        target[i + word_shift] ^= w << bit_shift;
        if bit_shift != 0 {
            target[i + word_shift + 1] ^= w >> (64 - bit_shift);
        }
    }
}

fn reduce_in_place(words: &mut Vec<u64>, modulus: &Gf2Poly) {
    let m_deg = modulus.degree().expect("reduction modulo the zero polynomial");
    let total_bits = words.len() * 64;
    for i in (m_deg..total_bits).rev() {
        if (words[i / 64] >> (i % 64)) & 1 == 1 {
            xor_shifted(words, &modulus.words, i - m_deg);
        }
    }
    words.truncate(m_deg.div_ceil(64).max(1));
}

/// Steps at which the squaring loop also looks for small factors. Together
/// `x^(2^4) - x`, `x^(2^5) - x` and `x^(2^6) - x` contain every irreducible
/// of degree at most 6.
fn early_exit(i: usize, p: usize) -> bool {
    (4..=6).contains(&i) && 2 * i <= p
}

/// `p / r` for every prime `r` dividing `p`.
fn maximal_divisors(p: usize) -> Vec<usize> {
    prime_factors(p).into_iter().map(|r| p / r).collect()
}

/// Rabin's test for `x^p + low` with `p <= 128`, on machine integers.
mod small {
    use super::{early_exit, maximal_divisors, spread};

    /// 256-bit polynomial as `(hi, lo)`.
    type Wide = (u128, u128);

    fn bit(v: Wide, i: usize) -> bool {
        if i >= 128 {
            (v.0 >> (i - 128)) & 1 == 1
        } else {
            (v.1 >> i) & 1 == 1
        }
    }

    fn xor_shifted(v: &mut Wide, x: u128, shift: usize) {
        if shift == 0 {
            v.1 ^= x;
        } else if shift < 128 {
            v.1 ^= x << shift;
            v.0 ^= x >> (128 - shift);
        } else {
            v.0 ^= x << (shift - 128);
        }
    }

    fn degree(v: Wide) -> Option<usize> {
        if v.0 != 0 {
            Some(255 - v.0.leading_zeros() as usize)
        } else if v.1 != 0 {
            Some(127 - v.1.leading_zeros() as usize)
        } else {
            None
        }
    }

    /// `v mod (x^p + low)`.
    fn reduce(mut v: Wide, p: usize, low: u128) -> u128 {
        while let Some(d) = degree(v).filter(|&d| d >= p) {
            // x^d = x^(d-p) * x^p = x^(d-p) * low
            if d >= 128 {
                v.0 ^= 1 << (d - 128);
            } else {
                v.1 ^= 1 << d;
            }
            xor_shifted(&mut v, low, d - p);
        }
        v.1
    }

    fn square(a: u128) -> Wide {
        let words = [a as u64, (a >> 64) as u64];
        let lo = u128::from(spread(words[0] as u32)) | (u128::from(spread((words[0] >> 32) as u32)) << 64);
        let hi = u128::from(spread(words[1] as u32)) | (u128::from(spread((words[1] >> 32) as u32)) << 64);
        (hi, lo)
    }

    /// `v mod g` for a nonzero `g`.
    fn rem(mut v: Wide, g: u128) -> u128 {
        let dg = 127 - g.leading_zeros() as usize;
        while let Some(d) = degree(v).filter(|&d| d >= dg) {
            xor_shifted(&mut v, g, d - dg);
            debug_assert!(!bit(v, d));
        }
        v.1
    }

    /// Whether `gcd(x^p + low, g)` is 1, for `g` of degree below `p`.
    fn coprime(p: usize, low: u128, g: u128) -> bool {
        if g == 0 {
            return false;
        }
        let mut f: Wide = (0, low);
        xor_shifted(&mut f, 1, p);
        let (mut a, mut b) = (g, rem(f, g));
        while b != 0 {
            let r = rem((0, a), b);
            a = b;
            b = r;
        }
        a == 1
    }

    /// Byte-at-a-time reduction modulo `x^p + low` for `8 <= p <= 128`.
    struct Reducer {
        p: usize,
        mask: u128,
        /// `table[b] = b(x) * x^p mod f`
        table: [u128; 256],
    }

    impl Reducer {
        fn new(p: usize, low: u128) -> Self {
            let mask = if p == 128 { u128::MAX } else { (1u128 << p) - 1 };
            let mut table = [0u128; 256];
            table[1] = low;
            for k in 1..8 {
                let prev = table[1 << (k - 1)];
                let carry = (prev >> (p - 1)) & 1 == 1;
                table[1 << k] = ((prev << 1) & mask) ^ if carry { low } else { 0 };
            }
            for b in 3..256usize {
                if b & (b - 1) != 0 {
                    table[b] = table[b & (b - 1)] ^ table[b & b.wrapping_neg()];
                }
            }
            Self { p, mask, table }
        }

        fn reduce(&self, v: Wide) -> u128 {
            let p = self.p;
            let (excess, base) = if p == 128 { (v.0, v.1) } else { ((v.1 >> p) | (v.0 << (128 - p)), v.1 & self.mask) };
            // Horner over the bytes of `excess`, top byte first
            let mut acc = 0u128;
            for j in (0..(p - 1).div_ceil(8)).rev() {
                let byte = ((excess >> (8 * j)) & 0xff) as usize;
                let top = (acc >> (p - 8)) as usize;
                acc = ((acc << 8) & self.mask) ^ self.table[top ^ byte];
            }
            base ^ acc
        }
    }

    pub(super) fn is_irreducible(p: usize, low: u128) -> bool {
        debug_assert!((2..=128).contains(&p));
        // reject the linear factors x and x + 1 up front
        if low & 1 == 0 || low.count_ones() % 2 == 1 {
            return false;
        }
        let divisors = maximal_divisors(p);
        let reducer = (p >= 8).then(|| Reducer::new(p, low));
        let x = 2u128;
        let mut power = x;
        for i in 1..=p {
            let squared = square(power);
            power = match &reducer {
                Some(r) => r.reduce(squared),
                None => reduce(squared, p, low),
            };
            let check = divisors.contains(&i) || early_exit(i, p);
            if check && i < p && !coprime(p, low, power ^ x) {
                return false;
            }
        }
        // x mod f is x itself since p >= 2
        power == x
    }
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut factors = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            factors.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    factors
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(bits: u64) -> Gf2Poly {
        Gf2Poly::from_words(vec![bits])
    }

    /// Trial division by every polynomial of degree 1..=deg/2.
    fn irreducible_by_trial_division(f: u64) -> bool {
        let deg = 63 - f.leading_zeros() as usize;
        if deg == 0 {
            return false;
        }
        let f = poly(f);
        (2u64..(1 << (deg / 2 + 1))).all(|g| !f.rem(&poly(g)).is_zero())
    }

    #[test]
    fn rabin_matches_trial_division_up_to_degree_12() {
        for f in 2u64..(1 << 13) {
            assert_eq!(poly(f).is_irreducible(), irreducible_by_trial_division(f), "{:?}", poly(f));
        }
    }

    #[test]
    fn generic_and_word_paths_agree() {
        for f in 2u64..(1 << 11) {
            assert_eq!(poly(f).is_irreducible(), poly(f).is_irreducible_generic(), "{:?}", poly(f));
        }
        let ghash = Gf2Poly::from_words(vec![0b1000_0111, 0, 1]);
        assert!(ghash.is_irreducible_generic());
        // degree-129 polynomials only take the generic path
        let mut rng_state = 0x9e37_79b9_7f4a_7c15u64;
        for _ in 0..20 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = Gf2Poly::from_words(vec![rng_state | 1, rng_state.rotate_left(17)]);
            let p = Gf2Poly::from_words(vec![rng_state | 1, 0x0123_4567, 0]);
            assert_eq!(a.mul(&p).is_irreducible(), false);
        }
    }

    #[test]
    fn irreducible_counts_match_necklace_formula() {
        // number of monic irreducibles of degree d over GF(2)
        let expected = [2, 1, 2, 3, 6, 9, 18, 30, 56, 99];
        for (d, &count) in (1..=10).zip(expected.iter()) {
            let found = ((1u64 << d)..(1u64 << (d + 1)))
                .filter(|&f| poly(f).is_irreducible())
                .count();
            assert_eq!(found, count, "degree {d}");
        }
    }

    #[test]
    fn known_large_irreducibles() {
        // x^64 + x^4 + x^3 + x + 1 and the GHASH polynomial x^128 + x^7 + x^2 + x + 1
        assert!(Gf2Poly::from_words(vec![0b11011, 1]).is_irreducible());
        assert!(Gf2Poly::from_words(vec![0b1000_0111, 0, 1]).is_irreducible());
        // x^128 + x^7 + x^2 + x (divisible by x)
        assert!(!Gf2Poly::from_words(vec![0b1000_0110, 0, 1]).is_irreducible());
    }

    #[test]
    fn square_mod_agrees_with_mul_then_rem() {
        let m = Gf2Poly::from_words(vec![0b1000_0111, 0, 1]);
        let a = Gf2Poly::from_words(vec![0xdead_beef_1234_5678, 0x0f0f_0000_ffff_0001]);
        assert_eq!(a.square_mod(&m), a.mul(&a).rem(&m));
    }

    #[test]
    fn gcd_of_products() {
        let a = poly(0b111); // x^2 + x + 1
        let b = poly(0b1011); // x^3 + x + 1
        let c = poly(0b11); // x + 1
        assert_eq!(a.mul(&c).gcd(&b.mul(&c)), c);
        assert!(a.gcd(&b).is_one());
    }
}

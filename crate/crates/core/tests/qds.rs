mod common;

use common::dense_digest;
use proptest::prelude::*;
use qba_core::bits::BitString;
use qba_core::qds::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bools(bits: &BitString) -> Vec<bool> {
    bits.iter().collect()
}

#[test]
fn streaming_digest_matches_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let p = rng.random_range(2..=8);
        let q = rng.random_range(1..=32);
        let poly = generate_irreducible(p, &mut rng).unwrap();
        let init = BitString::random(p, &mut rng);
        let message = BitString::random(q, &mut rng);
        let digest = lfsr_toeplitz_digest(&message, &init, &poly).unwrap();
        assert_eq!(bools(&digest), dense_digest(&bools(&message), &bools(&init), &bools(poly.coefficients())));
    }
}

#[test]
fn streaming_digest_matches_dense_matrix_across_word_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in [63, 64, 65, 127, 128, 129] {
        let poly = generate_irreducible(p, &mut rng).unwrap();
        for q in [1, 2, 64, 65, 200] {
            let init = BitString::random(p, &mut rng);
            let message = BitString::random(q, &mut rng);
            let digest = lfsr_toeplitz_digest(&message, &init, &poly).unwrap();
            assert_eq!(bools(&digest), dense_digest(&bools(&message), &bools(&init), &bools(poly.coefficients())), "p = {p}, q = {q}");
        }
    }
}

#[test]
fn hand_computed_digest() {
    // x^3 + x + 1, state [1, 0, 0], message 1011 (MSB first):
    // columns 100, 001, 010, 101 (LSB-first rows), taking columns 0, 2, 3.
    let poly = IrreduciblePoly::from_coefficients(BitString::parse_binary("110").unwrap()).unwrap();
    let init = BitString::parse_binary("100").unwrap();
    let message = BitString::parse_binary("1011").unwrap();
    let digest = lfsr_toeplitz_digest(&message, &init, &poly).unwrap();
    assert_eq!(digest, BitString::parse_binary("011").unwrap());
}

#[test]
fn completeness_over_many_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..2_000 {
        let p = [16, 64, 128][i % 3];
        let mut keys = establish_key_bundle(p, &mut rng).unwrap();
        let len = rng.random_range(1..=64);
        let message: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let sig = sign(&message, &mut keys, &mut rng).unwrap();
        let (x_b, y_b) = keys.forwarder();
        let (x_c, y_c) = keys.verifier();
        let combined = combine_partner_keys(x_b, y_b, x_c, y_c).unwrap();
        assert_eq!(combined, keys.combined());
        assert!(verify(&message, &sig, &combined));
    }
}

#[test]
fn bundles_are_single_use() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut keys = establish_key_bundle(32, &mut rng).unwrap();
    sign(b"m1", &mut keys, &mut rng).unwrap();
    assert!(keys.is_consumed());
    assert_eq!(sign(b"m2", &mut keys, &mut rng), Err(QdsError::KeysConsumed));
}

#[test]
fn substituted_messages_are_rejected_within_bound() {
    let p = 16;
    let trials = 20_000u32;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut accepted = 0u32;
    for _ in 0..trials {
        let mut keys = establish_key_bundle(p, &mut rng).unwrap();
        let original: [u8; 8] = rng.random();
        let mut forged: [u8; 8] = rng.random();
        if forged == original {
            forged[0] ^= 1;
        }
        let sig = sign(&original, &mut keys, &mut rng).unwrap();
        if verify(&forged, &sig, &keys.combined()) {
            accepted += 1;
        }
    }
    let bound: f64 = forgery_bound(p as u32, 64);
    let rate = accepted as f64 / trials as f64;
    assert!(rate <= 2.0 * bound, "rate {rate} vs bound {bound}");
}

#[test]
fn fabricated_signatures_are_rejected_within_bound() {
    let p = 16;
    let trials = 20_000u32;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut accepted = 0u32;
    for _ in 0..trials {
        let keys = establish_key_bundle(p, &mut rng).unwrap();
        let fake = Signature::from_bits(BitString::random(2 * p, &mut rng));
        if verify(b"m2", &fake, &keys.combined()) {
            accepted += 1;
        }
    }
    let bound: f64 = forgery_bound(p as u32, 16);
    assert!((accepted as f64 / trials as f64) <= 2.0 * bound);
}

#[test]
fn malformed_inputs_do_not_verify() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut keys = establish_key_bundle(32, &mut rng).unwrap();
    let sig = sign(b"m1", &mut keys, &mut rng).unwrap();
    let combined = keys.combined();
    assert!(!verify(b"", &sig, &combined));
    let short = Signature::from_bits(BitString::zeros(63));
    assert!(!verify(b"m1", &short, &combined));
    let other = establish_key_bundle(16, &mut rng).unwrap().combined();
    assert!(!verify(b"m1", &sig, &other));
}

#[test]
fn signatures_serialize_losslessly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut keys = establish_key_bundle(128, &mut rng).unwrap();
    let sig = sign(b"ledger entry", &mut keys, &mut rng).unwrap();
    let text = serde_json::to_string(&sig).unwrap();
    let back: Signature = serde_json::from_str(&text).unwrap();
    assert_eq!(back, sig);
    assert!(verify(b"ledger entry", &back, &keys.combined()));
}

proptest! {
    #[test]
    fn any_message_round_trips(message in proptest::collection::vec(any::<u8>(), 1..256), seed in any::<u64>(), p in 2usize..160) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keys = establish_key_bundle(p, &mut rng).unwrap();
        let sig = sign(&message, &mut keys, &mut rng).unwrap();
        prop_assert!(verify(&message, &sig, &keys.combined()));
    }

    #[test]
    fn digest_is_linear_in_the_message(a in proptest::collection::vec(any::<bool>(), 1..100), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(2..=70);
        let poly = generate_irreducible(p, &mut rng).unwrap();
        let init = BitString::random(p, &mut rng);
        let a = BitString::from_bools(a);
        let b = BitString::random(a.len(), &mut rng);
        let sum = a.xor(&b).unwrap();
        let da = lfsr_toeplitz_digest(&a, &init, &poly).unwrap();
        let db = lfsr_toeplitz_digest(&b, &init, &poly).unwrap();
        prop_assert_eq!(lfsr_toeplitz_digest(&sum, &init, &poly).unwrap(), da.xor(&db).unwrap());
    }
}

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use zakharov::io::{
    blob_hash, config_hash, decode_field, decode_spacetime, encode_field, encode_spacetime,
    read_field, read_meta, sha256_hex, sidecar_path, write_field, Dtype, IoError, Manifest,
};
use zakharov::random::{gaussian_band, rng_for};
use zakharov::{make_grid, Grid, Repr, SpacetimeField, C64};

fn grid(d: usize, n: usize) -> Arc<Grid> {
    Arc::new(make_grid(d, n, 2.0 * PI, 8, (0.0, 1.0)).unwrap())
}

#[test]
fn hashes_match_reference_digests() {
    // digests from python hashlib and `git hash-object` in a sha256 repository
    assert_eq!(
        sha256_hex(b""),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
    assert_eq!(
        blob_hash(b""),
        "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
    );
    assert_eq!(
        blob_hash(b"hello\n"),
        "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
    );
}

#[test]
fn files_carry_a_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let g = grid(2, 16);
    let f = gaussian_band(&g, 0.0, 5.0, &mut rng_for(1, 0));
    let path = tmp.path().join("f.zkf");
    let (_, side) = write_field(&path, &f, Dtype::Complex128, Some("abc")).unwrap();
    assert_eq!(side, sidecar_path(&path));
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(&side).unwrap()).unwrap();
    assert_eq!(meta["config_hash"], "abc");
    assert_eq!(meta["n"], 16);
    assert_eq!(meta["sha256"], sha256_hex(&std::fs::read(&path).unwrap()));
    assert_eq!(read_field(&path).unwrap().max_abs_diff(&f), 0.0);
}

#[test]
fn malformed_files_are_rejected() {
    let g = grid(1, 16);
    let f = gaussian_band(&g, 0.0, 5.0, &mut rng_for(1, 0));
    let bytes = encode_field(&f, Dtype::Complex128);
    assert!(matches!(
        decode_field(&bytes[..bytes.len() - 3]),
        Err(IoError::Truncated { .. })
    ));
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(matches!(decode_field(&bad), Err(IoError::BadMagic)));
    assert!(matches!(
        decode_spacetime(&bytes),
        Err(IoError::Kind { .. })
    ));
    assert_eq!(read_meta(&bytes).unwrap().samples, 16);
}

#[test]
fn single_precision_rounds_once() {
    let g = grid(1, 32);
    let f = gaussian_band(&g, 0.0, 10.0, &mut rng_for(2, 0));
    let back = decode_field(&encode_field(&f, Dtype::Complex64)).unwrap();
    let peak = f.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(back.max_abs_diff(&f) <= peak * f32::EPSILON as f64);
}

#[test]
fn config_hash_ignores_insertion_order() {
    let mut a = BTreeMap::new();
    a.insert("n".to_string(), "32".to_string());
    a.insert("seed".to_string(), "1".to_string());
    let mut b = BTreeMap::new();
    b.insert("seed".to_string(), "1".to_string());
    b.insert("n".to_string(), "32".to_string());
    assert_eq!(config_hash("solve", &a), config_hash("solve", &b));
    assert_ne!(config_hash("solve", &a), config_hash("picard", &a));
    let m = Manifest::new("solve", a.clone());
    assert_eq!(m.config_hash, config_hash("solve", &a));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spacetime_round_trip(
        seed in 0u64..10_000,
        d in 1usize..=3,
        time_spectral in any::<bool>(),
    ) {
        let g = grid(d, 8);
        let mut rng = rng_for(seed, 0);
        let data = (0..g.spacetime_len())
            .map(|_| zakharov::random::complex_normal(&mut rng))
            .collect();
        let time = if time_spectral { Repr::Spectral } else { Repr::Physical };
        let u = SpacetimeField::from_vec(&g, data, time, Repr::Spectral).unwrap();
        let back = decode_spacetime(&encode_spacetime(&u, Dtype::Complex128)).unwrap();
        prop_assert_eq!(back.time_repr(), time);
        prop_assert_eq!(back.data(), u.data());
        prop_assert_eq!(back.grid().box_length(), g.box_length());
    }

    #[test]
    fn field_round_trip(v in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 64)) {
        let g = grid(1, 64);
        let data: Vec<C64> = v.iter().map(|&(a, b)| C64::new(a, b)).collect();
        let f = zakharov::Field::from_vec(&g, data, Repr::Physical).unwrap();
        let back = decode_field(&encode_field(&f, Dtype::Complex128)).unwrap();
        prop_assert_eq!(back.data(), f.data());
        prop_assert_eq!(back.repr(), Repr::Physical);
    }
}

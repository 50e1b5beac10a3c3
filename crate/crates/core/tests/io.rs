use corona_core::io::*;
use corona_core::metrics::Image;
use corona_core::net::{forward, init_random, load_weights, save_weights, ThresholdMode};
use corona_core::tensor::{MovieTensor, C64};
use corona_core::train::Provenance;
use corona_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

mod common;

fn f32_movie(shape: (usize, usize, usize), seed: u64) -> MovieTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MovieTensor::from_fn(shape, |_, _, _| {
        C64::new((rng.random::<f32>() - 0.5) as f64, (rng.random::<f32>() * 3.0) as f64)
    })
}

#[test]
fn hand_built_fixture() {
    // 1×1×2 '<c8' array [1+2j, -0.5+0j] assembled byte by byte
    let mut dict = b"{'descr': '<c8', 'fortran_order': False, 'shape': (1, 1, 2), }".to_vec();
    while !(10 + dict.len() + 1).is_multiple_of(64) {
        dict.push(b' ');
    }
    dict.push(b'\n');
    let mut bytes = b"\x93NUMPY\x01\x00".to_vec();
    bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    bytes.extend_from_slice(&dict);
    for v in [1.0f32, 2.0, -0.5, 0.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let (m, dtype) = decode_movie(&bytes, Path::new("fixture")).unwrap();
    assert_eq!(dtype, ComplexDtype::C8);
    assert_eq!(m.shape().as_tuple(), (1, 1, 2));
    assert_eq!(m.data(), &[C64::new(1.0, 2.0), C64::new(-0.5, 0.0)]);
    // our encoder produces exactly the same bytes
    assert_eq!(encode_movie(&m, ComplexDtype::C8), bytes);
}

#[test]
fn movie_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.npy");
    let m = f32_movie((4, 5, 3), 1);
    write_movie(&m, &p).unwrap();
    let back = read_movie(&p).unwrap();
    assert_eq!(back, m);
    let p2 = dir.path().join("m2.npy");
    write_movie(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let full = common::random_movie((2, 3, 3), &mut rng);
    write_movie_as(&full, &p, ComplexDtype::C16).unwrap();
    assert_eq!(read_movie(&p).unwrap(), full);
    assert_eq!(read_npy_header(&p).unwrap().descr, "<c16");
}

#[test]
fn malformed_movies_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r2.npy");
    write_real_array(&p, &[3, 4], &[0.0; 12]).unwrap();
    assert!(read_movie(&p).is_err());

    let m = f32_movie((2, 2, 2), 3);
    let mut bytes = encode_movie(&m, ComplexDtype::C8);
    // patch shape to rank 2 keeping header length
    let text = String::from_utf8_lossy(&bytes[10..]).into_owned();
    let at = text.find("(2, 2, 2)").unwrap();
    bytes[10 + at..10 + at + 9].copy_from_slice(b"(4, 2)   ");
    assert!(matches!(decode_movie(&bytes, Path::new("x")), Err(Error::Shape(_))));

    let mut bad = encode_movie(&m, ComplexDtype::C8);
    bad.truncate(bad.len() - 3);
    assert!(matches!(decode_movie(&bad, Path::new("x")), Err(Error::Format { .. })));
    assert!(decode_movie(b"not an npy file at all", Path::new("x")).is_err());
}

#[test]
fn real_array_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("img.npy");
    let data: Vec<f64> = (0..6).map(|i| i as f64 * -0.25).collect();
    write_real_array(&p, &[2, 3], &data).unwrap();
    assert_eq!(read_real_array(&p).unwrap(), (vec![2, 3], data));
}

#[test]
fn weights_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = init_random(4, 0.2, &mut rng).unwrap();
    net.layers[2].lambda_s = -1.25;
    let p = dir.path().join("w.bin");
    save_weights(&net, &p).unwrap();
    let back = load_weights(&p).unwrap();
    assert_eq!(back, net);
    let p2 = dir.path().join("w2.bin");
    save_weights(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());

    let d = common::random_movie((3, 8, 8), &mut rng);
    let (l0, s0) = forward(&d, &net).unwrap();
    let (l1, s1) = forward(&d, &back).unwrap();
    assert_eq!(l0, l1);
    assert_eq!(s0, s1);

    net.thresholds = ThresholdMode::Pinned { thr_l: 0.5, thr_s: 0.25 };
    assert_eq!(decode_weights(&encode_weights(&net)).unwrap(), net);
}

#[test]
fn weights_corruption() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = init_random(2, 0.2, &mut rng).unwrap();
    let bytes = encode_weights(&net);
    for cut in [0, 5, 12, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(decode_weights(&bytes[..cut]), Err(Error::Corrupt(_))), "cut {cut}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode_weights(&extra), Err(Error::Corrupt(_))));
    let mut v2 = bytes.clone();
    v2[8..12].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(decode_weights(&v2), Err(Error::Version { found: 2, expected: 1 })));
    let mut magic = bytes;
    magic[0] = b'X';
    assert!(matches!(decode_weights(&magic), Err(Error::Corrupt(_))));
}

#[test]
fn manifest_cross_checks_headers() {
    let dir = tempfile::tempdir().unwrap();
    let m = f32_movie((2, 3, 4), 6);
    for name in ["d.npy", "s.npy"] {
        write_movie(&m, &dir.path().join(name)).unwrap();
    }
    let mut man = DatasetManifest {
        samples: vec![ManifestSample {
            index: 0,
            seed: Some(7),
            provenance: Provenance::Simulated,
            shape: m.shape(),
            d: "d.npy".into(),
            l: None,
            s: Some("s.npy".into()),
        }],
    };
    man.save(dir.path()).unwrap();
    let back = DatasetManifest::load(dir.path()).unwrap();
    assert_eq!(back, man);
    let (d, l, s) = back.read_sample(dir.path(), 0).unwrap();
    assert_eq!(d, m);
    assert!(l.is_none());
    assert_eq!(s.unwrap(), m);

    man.samples[0].shape.frames = 3;
    assert!(man.validate(dir.path()).is_err());
    man.samples[0].shape.frames = 2;
    man.samples[0].l = Some("missing.npy".into());
    assert!(matches!(man.validate(dir.path()), Err(Error::Io { .. })));

    std::fs::write(dir.path().join(MANIFEST_FILE), r#"{"samples": [], "extra": 1}"#).unwrap();
    assert!(DatasetManifest::load(dir.path()).is_err());
}

#[test]
fn pgm_bytes() {
    let img = Image::new(2, 2, vec![-40.0, -20.0, 0.0, -100.0]).unwrap();
    let b = encode_pgm(&img, -40.0, 0.0).unwrap();
    let head = b"P5\n2 2\n255\n";
    assert_eq!(&b[..head.len()], head);
    assert_eq!(&b[head.len()..], &[0, 128, 255, 0]);
    assert!(encode_pgm(&img, 0.0, 0.0).is_err());
}

#[test]
fn jsonl_and_atomic_write() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("log.jsonl");
    let mut w = JsonlWriter::create(&p).unwrap();
    w.write(&serde_json::json!({"epoch": 1})).unwrap();
    w.write(&serde_json::json!({"epoch": 2})).unwrap();
    drop(w);
    let mut w = JsonlWriter::append(&p).unwrap();
    w.write(&serde_json::json!({"epoch": 3})).unwrap();
    let recs: Vec<serde_json::Value> = read_jsonl(&p).unwrap();
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[2]["epoch"], 3);

    let f = dir.path().join("a.txt");
    atomic_write(&f, b"one").unwrap();
    atomic_write(&f, b"two").unwrap();
    assert_eq!(std::fs::read(&f).unwrap(), b"two");
    let leftovers = std::fs::read_dir(dir.path()).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp")
    });
    assert_eq!(leftovers.count(), 0);
}

#[test]
fn json_reals_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let v: Vec<f64> = (0..2000)
        .map(|i| {
            let x: f64 = rng.random::<f64>() - 0.5;
            x * 10f64.powi(i % 40 - 20)
        })
        .collect();
    let p = dir.path().join("v.json");
    write_json(&p, &v).unwrap();
    let back: Vec<f64> = read_json(&p).unwrap();
    assert!(v.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
}

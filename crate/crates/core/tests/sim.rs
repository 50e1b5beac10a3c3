use corona_core::sim::*;
use corona_core::tensor::{Frame, MovieTensor, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> SimConfig {
    SimConfig {
        height: 32,
        width: 32,
        frames: 10,
        ..SimConfig::default()
    }
}

#[test]
fn zero_concentration_spawns_nothing() {
    let cfg = SimConfig {
        max_mb_concentration: 0.0,
        ..small()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(spawn_bubbles(&cfg, &mut rng).is_empty());
}

#[test]
fn default_cap_from_field_area() {
    let cfg = SimConfig::default();
    // 15.36 mm × 15.36 mm = 2.359296 cm²; 130 × 2.359296 = 306.7
    let area = (128.0 * 0.12 / 10.0f64).powi(2);
    assert!((cfg.area_cm2() - area).abs() < 1e-12);
    assert_eq!(cfg.max_bubbles(), (130.0 * area).floor() as usize);
    assert_eq!(cfg.max_bubbles(), 306);
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        assert!(spawn_bubbles(&cfg, &mut rng).len() <= 306);
    }
}

#[test]
fn spawning_is_seed_deterministic() {
    let cfg = SimConfig::default();
    let a = spawn_bubbles(&cfg, &mut ChaCha8Rng::seed_from_u64(9));
    let b = spawn_bubbles(&cfg, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
    for bub in &a {
        assert!(cfg.in_field(bub.position));
        assert!(bub.amplitude.re.is_finite() && bub.amplitude.im.is_finite());
    }
}

fn bubble(x: f64, y: f64, vx: f64, vy: f64) -> BubbleState {
    BubbleState {
        position: (x, y),
        velocity: (vx, vy),
        acceleration: (0.0, 0.0),
        amplitude: C64::new(1.0, -0.5),
    }
}

#[test]
fn straight_line_without_turns() {
    let b = bubble(1.0, 2.0, 0.3, -0.1);
    let n = advance_bubble(&b, &StepDraws::still());
    assert_eq!(n.position, (1.3, 1.9));
    assert_eq!(n.velocity, b.velocity);
}

#[test]
fn rotation_preserves_speed() {
    let mut b = bubble(1.0, 2.0, 0.3, -0.1);
    let speed = 0.1f64.hypot(0.3);
    for k in 0..50 {
        let d = StepDraws {
            theta: (k as f64 * 0.37).sin() * 0.5,
            ..StepDraws::still()
        };
        b = advance_bubble(&b, &d);
        let s = b.velocity.0.hypot(b.velocity.1);
        assert!((s - speed).abs() <= 1e-12 * speed);
    }
}

#[test]
fn amplitude_stays_in_jitter_interval() {
    let cfg = SimConfig {
        pixel_pitch: 1e6,
        ..small()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = vec![bubble(10.0, 10.0, 0.0, 0.0); 20];
    let mut cur = start.clone();
    for k in 1..=30 {
        cur = step_bubbles(&cur, &cfg, &mut rng);
        assert_eq!(cur.len(), 20);
        for (a, b) in cur.iter().zip(&start) {
            let r = a.amplitude.norm() / b.amplitude.norm();
            assert!(r >= 0.9f64.powi(k) * (1.0 - 1e-12) && r <= 1.1f64.powi(k) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn bubbles_leaving_field_are_dropped() {
    let cfg = small();
    let b = bubble(0.01, 1.0, -0.5, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = SimConfig {
        turn_range_deg: 0.0,
        accel_std: 0.0,
        ..cfg
    };
    assert!(step_bubbles(&[b], &cfg, &mut rng).is_empty());
}

#[test]
fn rasterization() {
    let cfg = small();
    assert!(rasterize_bubbles(&[], &cfg).data.iter().all(|z| z.norm() == 0.0));

    let p = cfg.pixel_pitch;
    let centre = bubble(5.5 * p, 7.5 * p, 0.0, 0.0);
    let f = rasterize_bubbles(&[centre], &cfg);
    assert_eq!(f.get(7, 5), centre.amplitude);
    assert_eq!(f.data.iter().filter(|z| z.norm() > 0.0).count(), 1);

    let mut other = bubble(5.2 * p, 7.9 * p, 0.0, 0.0);
    other.amplitude = C64::new(0.25, 2.0);
    let f = rasterize_bubbles(&[centre, other], &cfg);
    assert_eq!(f.get(7, 5), centre.amplitude + other.amplitude);

    let outside = bubble(-0.1, 0.5, 0.0, 0.0);
    assert!(rasterize_bubbles(&[outside], &cfg).data.iter().all(|z| z.norm() == 0.0));
}

fn lag1_corr(f: &Frame) -> f64 {
    let mag: Vec<f64> = f.data.iter().map(|z| z.norm()).collect();
    let mean = mag.iter().sum::<f64>() / mag.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for y in 0..f.height {
        for x in 0..f.width {
            let a = mag[y * f.width + x] - mean;
            den += a * a;
            if x + 1 < f.width {
                num += a * (mag[y * f.width + x + 1] - mean);
            }
        }
    }
    num / den
}

#[test]
fn tissue_base_is_deterministic_and_smooth() {
    let cfg = SimConfig::default();
    let a = gen_tissue_base(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
    let b = gen_tissue_base(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(a, b);

    let mean: f64 = (0..100u64)
        .map(|s| lag1_corr(&gen_tissue_base(&cfg, &mut ChaCha8Rng::seed_from_u64(s))))
        .sum::<f64>()
        / 100.0;
    assert!(mean >= 0.5, "mean lag-1 autocorrelation {mean}");
}

#[test]
fn zero_field_gives_zero_tissue() {
    let (h, w) = (16, 16);
    let field = Frame::zeros(h, w);
    let t = compose_tissue(&vec![1.0; h * w], &field, &vec![0.3; h * w], 11).unwrap();
    assert!(t.data.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn identity_flow_filters_keep_tissue() {
    let cfg = SimConfig {
        flow_perturb_std: 0.0,
        ..small()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t0 = gen_tissue_base(&cfg, &mut rng);
    let mut filters = FlowFilters::identity(4);
    let t1 = deform_tissue(&t0, &mut filters, &cfg, &mut rng);
    assert_eq!(t0, t1);
}

#[test]
fn flow_filters_stay_on_simplex() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut f = FlowFilters::uniform(4);
    for _ in 0..200 {
        f.update(0.1, 0.1, &mut rng);
        for k in &f.kernels {
            assert!(k.iter().all(|&v| v >= 0.0));
            assert!((k.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn deformed_blocks_come_from_candidates() {
    let cfg = SimConfig {
        height: 18,
        width: 22,
        ..small()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t0 = gen_tissue_base(&cfg, &mut rng);
    let mut filters = FlowFilters::uniform(4);
    let t1 = deform_tissue(&t0, &mut filters, &cfg, &mut rng);
    let cands: Vec<Frame> = filters.kernels.iter().map(|k| flow_correlate(&t0, k)).collect();
    for by in (0..cfg.height).step_by(FLOW_SIZE) {
        for bx in (0..cfg.width).step_by(FLOW_SIZE) {
            let matches = cands.iter().any(|c| {
                (by..(by + FLOW_SIZE).min(cfg.height))
                    .all(|y| (bx..(bx + FLOW_SIZE).min(cfg.width)).all(|x| c.get(y, x) == t1.get(y, x)))
            });
            assert!(matches, "block ({by}, {bx})");
        }
    }
}

#[test]
fn psf_properties() {
    let cfg = SimConfig::default();
    let (axial, lateral) = psf_taps(&cfg);
    let sa: f64 = 0.32 / 0.12;
    let sl: f64 = 0.14 / 0.12;
    assert_eq!(axial.len(), 2 * (3.0 * sa).ceil() as usize + 1);
    assert_eq!(lateral.len(), 2 * (3.0 * sl).ceil() as usize + 1);

    let mut imp = Frame::zeros(41, 41);
    imp.set(20, 20, C64::new(1.0, 0.0));
    let out = apply_psf(&imp, &cfg);
    let (ha, hl) = ((3.0 * sa).ceil() as i64, (3.0 * sl).ceil() as i64);
    let z: f64 = (-ha..=ha)
        .flat_map(|dy| (-hl..=hl).map(move |dx| (dy, dx)))
        .map(|(dy, dx)| (-((dy * dy) as f64) / (2.0 * sa * sa) - (dx * dx) as f64 / (2.0 * sl * sl)).exp())
        .sum();
    for dy in -ha..=ha {
        for dx in -hl..=hl {
            let want = (-((dy * dy) as f64) / (2.0 * sa * sa) - (dx * dx) as f64 / (2.0 * sl * sl)).exp() / z;
            let got = out.get((20 + dy) as usize, (20 + dx) as usize);
            assert!((got.re - want).abs() <= 1e-6 * want && got.im == 0.0);
        }
    }
    let total: C64 = out.sum();
    assert!((total.re - 1.0).abs() < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = gen_tissue_base(&SimConfig { height: 48, width: 48, ..cfg.clone() }, &mut rng);
    let mut padded = Frame::zeros(80, 80);
    for y in 0..48 {
        for x in 0..48 {
            padded.set(y + 16, x + 16, t.get(y, x));
        }
    }
    let blurred = apply_psf(&padded, &cfg);
    assert!((blurred.sum() - padded.sum()).norm() <= 1e-10 * padded.sum().norm());

    assert!(apply_psf(&Frame::zeros(8, 8), &cfg).data.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn psf_is_linear() {
    let cfg = small();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = gen_tissue_base(&cfg, &mut rng);
    let b = rasterize_bubbles(&spawn_bubbles(&cfg, &mut rng), &cfg);
    let sum = Frame::from_fn(32, 32, |y, x| a.get(y, x) + b.get(y, x));
    let lhs = apply_psf(&sum, &cfg);
    let pa = apply_psf(&a, &cfg);
    let pb = apply_psf(&b, &cfg);
    for i in 0..lhs.data.len() {
        let rhs = pa.data[i] + pb.data[i];
        assert!((lhs.data[i] - rhs).norm() <= 1e-12 * lhs.data[i].norm().max(1e-300) + 1e-15);
    }
}

#[test]
fn noiseless_bubble_free_mixture_is_tissue() {
    let cfg = SimConfig {
        noise_scale: 0.0,
        max_mb_concentration: 0.0,
        ..small()
    };
    let s = simulate(&cfg).unwrap();
    assert_eq!(s.d, s.l);
    assert!(s.s.norm() == 0.0 && s.n.norm() == 0.0);
}

#[test]
fn simulate_determinism_and_sum() {
    let cfg = SimConfig { seed: 77, ..small() };
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    let recomposed: MovieTensor = &(&a.l + &a.s) + &a.n;
    assert_eq!(recomposed, a.d);
    assert!(a.d.max_abs() <= 1.0 + 1e-15);
}

#[test]
fn tissue_to_bubble_ratio_is_enforced() {
    for db in [10.0, 30.0, 60.0] {
        let cfg = SimConfig {
            tissue_to_mb_db: db,
            seed: 3,
            ..small()
        };
        let s = simulate(&cfg).unwrap();
        if s.s.norm() == 0.0 {
            continue;
        }
        assert!((tissue_to_mb_ratio_db(&s) - db).abs() <= 0.1);
    }
}

#[test]
fn invalid_configs_rejected() {
    assert!(SimConfig { tissue_to_mb_db: 5.0, ..small() }.validate().is_err());
    assert!(SimConfig { frames: 0, ..small() }.validate().is_err());
    assert!(SimConfig { amp_jitter: (1.1, 0.9), ..small() }.validate().is_err());
    assert!(SimConfig { tissue_lpf: 10, ..small() }.validate().is_err());
}

#[test]
fn vessel_bubbles_fill_their_rows() {
    let cfg = SimConfig {
        free_bubbles: false,
        vessel: Some(VesselConfig {
            row_start: 10,
            row_end: 14,
            speed: 0.3,
            inflow: 2,
        }),
        ..small()
    };
    let s = simulate(&cfg).unwrap();
    let mask = cfg.vessel_mask().unwrap();
    let raw_outside: f64 = (0..cfg.frames)
        .map(|t| {
            s.s.frame(t)
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| !m)
                .map(|(z, _)| z.norm_sqr())
                .sum::<f64>()
        })
        .sum();
    // PSF spreads the vessel energy a few rows out, but most of it stays inside
    assert!(raw_outside < 0.5 * s.s.norm_sq());
    assert!(s.bubble_counts.iter().all(|&c| c <= cfg.max_bubbles()));
    assert!(s.bubble_counts.last().unwrap() > &0);
}

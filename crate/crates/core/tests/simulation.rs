use proptest::prelude::*;
use smlm_core::noise::{derive_seed, NoiseModel};
use smlm_core::psf::{gaussian_kernel, sigma_from_fwhm};
use smlm_core::simulate::{
    make_scenario, render_emitters_to_hr, simulate_frame, Emitter, EmitterList, TrainingConfig,
    TrainingSetGenerator,
};
use smlm_core::{
    add_gaussian_noise, noise_for_target_snr, snr_db, ForwardOperator, Image, ImageGrid, PsfModel,
    Sampling, Snr,
};

#[test]
fn snr_targets_are_met_on_scenario_frames() {
    for name in ["Test1a", "Test2a", "Test3a"] {
        let spec = make_scenario(name).unwrap();
        let op = spec.operator().unwrap();
        let clean = op
            .apply_forward(&render_emitters_to_hr(&spec.emitters, &spec.fov).unwrap())
            .unwrap();
        for target in [10.0, 12.0, 15.0] {
            let (_, noisy) = noise_for_target_snr(&clean, target, 99).unwrap();
            let got = snr_db(&clean, &noisy).unwrap().db().unwrap();
            assert!((got - target).abs() < 0.1, "{name} {target}: {got}");
        }
    }
}

#[test]
fn simulated_frame_has_requested_snr_and_is_reproducible() {
    let spec = make_scenario("Test2a").unwrap();
    let a = simulate_frame(&spec, 7).unwrap();
    let b = simulate_frame(&spec, 7).unwrap();
    let c = simulate_frame(&spec, 8).unwrap();
    assert_eq!(a.lr.values(), b.lr.values());
    assert_ne!(a.lr.values(), c.lr.values());
    assert!((snr_db(&a.lr_clean, &a.lr).unwrap().db().unwrap() - 15.0).abs() < 1e-9);
}

#[test]
fn identical_seeds_give_identical_noise() {
    let grid = ImageGrid::square(32, 25.0).unwrap();
    let zero = Image::zeros(grid);
    let n = NoiseModel::new(0.5, 1234).unwrap();
    let a = add_gaussian_noise(&zero, &n);
    let b = add_gaussian_noise(&zero, &n);
    assert!(a
        .values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
}

#[test]
fn block_sum_sampling_preserves_flux_of_centred_emitters() {
    let grid = ImageGrid::square(128, 25.0).unwrap();
    let psf = PsfModel::with_default_radius(sigma_from_fwhm(258.21), 25.0).unwrap();
    let op = ForwardOperator::with_sampling(grid, 4, psf, Sampling::BlockSum).unwrap();
    for (dr, dc) in [(0usize, 0usize), (1, 2), (3, 3)] {
        let mut x = Image::zeros(grid);
        x.set(62 + dr, 61 + dc, 1000.0);
        let lr = op.apply_forward(&x).unwrap();
        let ratio = lr.sum() / x.sum();
        assert!(ratio >= 0.999 && ratio <= 1.0 + 1e-12, "ratio {ratio}");
    }
    // Decimation keeps one pixel in L^2, so it does not conserve flux.
    let dec = ForwardOperator::new(grid, 4, psf).unwrap();
    let mut x = Image::zeros(grid);
    x.set(64, 64, 1000.0);
    let r = dec.apply_forward(&x).unwrap().sum() / 1000.0;
    assert!((r - 1.0 / 16.0).abs() < 0.01, "{r}");
}

#[test]
fn pair_scenarios_sit_in_one_column() {
    for (name, rows) in [("Test1a", 1usize), ("Test2a", 3)] {
        let spec = make_scenario(name).unwrap();
        let px: Vec<(usize, usize)> = spec
            .emitters
            .emitters
            .iter()
            .map(|e| spec.fov.pixel_of(e.x_nm, e.y_nm).unwrap())
            .collect();
        assert_eq!(px[0].1, px[1].1);
        assert_eq!(px[0].0.abs_diff(px[1].0), rows);
        assert!((spec.psf.fwhm_nm() - 258.21).abs() < 1e-9);
        assert_eq!(
            (spec.fov.width, spec.fov.height, spec.factor),
            (512, 512, 4)
        );
    }
    let ring = make_scenario("Test3a").unwrap();
    assert_eq!(ring.emitters.len(), 4);
}

#[test]
fn training_patches_match_their_source_images() {
    let cfg = TrainingConfig {
        k: 40,
        n_images: 3,
        image_side: 32,
        patch: 8,
        seed: 5,
        ..Default::default()
    };
    let gen = TrainingSetGenerator::new(cfg.clone()).unwrap();
    let sources: Vec<EmitterList> = gen.source_emitters().cloned().collect();
    let hr = ImageGrid::square(cfg.image_side * cfg.factor, cfg.hr_pixel_nm()).unwrap();
    for k in 0..cfg.k {
        let pair = gen.patch(k).unwrap();
        let side = cfg.patch * cfg.factor;
        assert_eq!((pair.input.width(), pair.target.width()), (side, side));
        let (r0, c0) = (pair.origin.0 * cfg.factor, pair.origin.1 * cfg.factor);
        let inside: f64 = sources[pair.image_index]
            .emitters
            .iter()
            .filter(|e| {
                let (r, c) = hr.pixel_of(e.x_nm, e.y_nm).unwrap();
                (r0..r0 + side).contains(&r) && (c0..c0 + side).contains(&c)
            })
            .map(|e| e.intensity)
            .sum();
        assert!((pair.target.sum() - inside).abs() <= 1e-9 * inside.max(1.0));
        for r in 0..side {
            for c in 0..side {
                if pair.target.get(r, c) != 0.0 {
                    let (lr_r, lr_c) = (r / cfg.factor, c / cfg.factor);
                    assert!(lr_r < cfg.patch && lr_c < cfg.patch);
                }
            }
        }
        // inputs are constant on every L x L block
        let v = pair.input.values();
        for r in 0..side {
            for c in 0..side {
                assert_eq!(
                    v[r * side + c],
                    v[(r / cfg.factor * cfg.factor) * side + c / cfg.factor * cfg.factor]
                );
            }
        }
    }
}

#[test]
fn training_set_is_reproducible() {
    let cfg = TrainingConfig {
        k: 10,
        n_images: 2,
        image_side: 32,
        patch: 8,
        ..Default::default()
    };
    let a: Vec<_> = TrainingSetGenerator::new(cfg.clone())
        .unwrap()
        .map(|p| p.unwrap())
        .collect();
    let b: Vec<_> = TrainingSetGenerator::new(cfg)
        .unwrap()
        .map(|p| p.unwrap())
        .collect();
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.input.values(), q.input.values());
        assert_eq!(p.target.values(), q.target.values());
    }
}

#[test]
fn out_of_field_emitters_are_rejected() {
    let grid = ImageGrid::square(8, 25.0).unwrap();
    let list = EmitterList::new(1, vec![Emitter::new(500.0, 10.0, 1.0)]).unwrap();
    assert!(render_emitters_to_hr(&list, &grid).is_err());
}

#[test]
fn zero_residual_has_infinite_snr() {
    let grid = ImageGrid::square(4, 25.0).unwrap();
    let x = Image::from_vec(grid, vec![1.0; 16]).unwrap();
    assert_eq!(snr_db(&x, &x).unwrap(), Snr::Infinite);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kernels_are_normalised_and_positive(sigma in 1.0f64..300.0, pixel in 5.0f64..100.0) {
        let psf = PsfModel::with_default_radius(sigma, pixel).unwrap();
        let k = gaussian_kernel(&psf, pixel).unwrap();
        let r = k.radius as isize;
        let mut total = 0.0;
        for dr in -r..=r {
            for dc in -r..=r {
                let v = k.at(dr, dc);
                prop_assert!(v >= 0.0);
                total += v;
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(k.at(0, 0) > 0.0);
    }

    #[test]
    fn snr_calibration_is_exact(target in -5.0f64..40.0, seed in any::<u64>()) {
        let grid = ImageGrid::square(16, 25.0).unwrap();
        let clean = Image::from_vec(grid, (0..256).map(|i| ((i % 17) as f64).sin().abs()).collect()).unwrap();
        let (_, noisy) = noise_for_target_snr(&clean, target, seed).unwrap();
        let got = snr_db(&clean, &noisy).unwrap().db().unwrap();
        prop_assert!((got - target).abs() < 1e-9);
    }
}

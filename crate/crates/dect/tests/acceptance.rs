//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N (<label>): pass` line (visible with `--nocapture`); the
//! harness result line mirrors it per test.
//!
//! Criteria 5 and 7 share one desk-scale experiment (64x64 grid, 90
//! angles x 128 detectors, Y0 = 1e5, 70 dB electronics noise, fixed
//! seed) computed once behind a lock.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dect_core::admm::{
    run_admm, toy_admm, update_nonneg_s, update_theta_c, AdmmConfig, AdmmState,
};
use dect_core::fbp::Filter;
use dect_core::geometry::{assemble_system_matrix, subsample_angles};
use dect_core::metrics::{
    material_clouds, psnr, ssim, PSNR_L_COMPTON, PSNR_L_PHOTOELECTRIC,
};
use dect_core::phantom::build_suitcase_phantom;
use dect_core::physics::{
    data_fidelity, forward_expected_counts, klein_nishina, photoelectric_basis,
    simulate_measurements, NoiseModel,
};
use dect_core::regularizers::{
    nlm_penalty_and_gradient, nlm_weight, soft_threshold, DifferenceOperator, NlmParams,
    NlmWeights,
};
use dect_core::ync::{decompose_ray, ync_reconstruct};
use dect_core::{DualSinogram, ImageGrid, ImagePair, ScanGeometry, Spectrum, SystemMatrix};

fn pass(n: usize, label: &str) {
    println!("criterion {n} ({label}): pass");
}

fn specs() -> (Spectrum, Spectrum) {
    (Spectrum::kramers(95.0).unwrap(), Spectrum::kramers(130.0).unwrap())
}

/// Noiseless log measurement for one ray under a spectrum.
fn log_measurement(ac: f64, ap: f64, spec: &Spectrum) -> f64 {
    let mut total = 0.0;
    for (&e, &w) in spec.energies().iter().zip(spec.weights()) {
        let f = klein_nishina(e).unwrap();
        let g = photoelectric_basis(e).unwrap();
        total += w * (-ac * f - ap * g).exp();
    }
    -total.ln()
}

/// Small random physical scene used by the gradient checks.
fn random_problem(
    rng: &mut ChaCha8Rng,
) -> (ImageGrid, SystemMatrix, ImagePair, DualSinogram) {
    let grid = ImageGrid::centered(8, 8, 1.0).unwrap();
    let geom = ScanGeometry::uniform(4, 4, 2.2, 0.0).unwrap();
    let a = assemble_system_matrix(&grid, &geom).unwrap();
    let n = grid.n_pixels();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.3)).collect();
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(500.0..8000.0)).collect();
    let truth = ImagePair::new(grid.clone(), c, p).unwrap();
    let (lo, hi) = specs();
    let y0 = 1e5;
    let counts_low = forward_expected_counts(&a, &truth, &lo, y0).unwrap();
    let counts_high = forward_expected_counts(&a, &truth, &hi, y0).unwrap();
    let noise = NoiseModel::from_snr_db(y0, 70.0, rng.gen()).unwrap();
    let sino = DualSinogram::from_counts(
        simulate_measurements(&counts_low, &noise),
        simulate_measurements(&counts_high, &noise),
        y0,
    )
    .unwrap();
    (grid, a, truth, sino)
}

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (lo, hi) = specs();
    for _ in 0..20 {
        let (grid, a, truth, sino) = random_problem(&mut rng);
        let n = grid.n_pixels();
        // Evaluate at a point away from the truth.
        let c: Vec<f64> = truth.c.iter().map(|&v| v * rng.gen_range(0.8..1.2)).collect();
        let p: Vec<f64> = truth.p.iter().map(|&v| v * rng.gen_range(0.8..1.2)).collect();
        let theta = ImagePair::new(grid.clone(), c.clone(), p.clone()).unwrap();
        let (_, gc, gp) = data_fidelity(&theta, &sino, &a, &lo, &hi).unwrap();

        let fd = |cv: &[f64], pv: &[f64]| -> f64 {
            let th = ImagePair::new(grid.clone(), cv.to_vec(), pv.to_vec()).unwrap();
            data_fidelity(&th, &sino, &a, &lo, &hi).unwrap().0
        };
        for _ in 0..4 {
            let k = rng.gen_range(0..n);
            // Compton channel.
            let eps = 1e-6 * (1.0 + c[k].abs());
            let (mut cp, mut cm) = (c.clone(), c.clone());
            cp[k] += eps;
            cm[k] -= eps;
            let num = (fd(&cp, &p) - fd(&cm, &p)) / (2.0 * eps);
            let rel = (gc[k] - num).abs() / num.abs().max(1e-8);
            assert!(rel <= 1e-5, "compton grad pixel {k}: {} vs {num}", gc[k]);
            // Photoelectric channel.
            let eps = 1e-3 * (1.0 + p[k].abs());
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp[k] += eps;
            pm[k] -= eps;
            let num = (fd(&c, &pp) - fd(&c, &pm)) / (2.0 * eps);
            let rel = (gp[k] - num).abs() / num.abs().max(1e-12);
            assert!(rel <= 1e-5, "pe grad pixel {k}: {} vs {num}", gp[k]);
        }

        // NLM penalty gradient against central differences.
        let reference: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.4)).collect();
        let params = NlmParams::new(0.1, 1, 2).unwrap();
        let weights = NlmWeights::compute(&reference, grid.nx, grid.ny, &params).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = nlm_penalty_and_gradient(&x, &weights, 0.7).unwrap();
        for _ in 0..4 {
            let k = rng.gen_range(0..n);
            let eps = 1e-6;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += eps;
            xm[k] -= eps;
            let fp = nlm_penalty_and_gradient(&xp, &weights, 0.7).unwrap().0;
            let fm = nlm_penalty_and_gradient(&xm, &weights, 0.7).unwrap().0;
            let num = (fp - fm) / (2.0 * eps);
            let rel = (g[k] - num).abs() / num.abs().max(1e-8);
            assert!(rel <= 1e-5, "nlm grad pixel {k}: {} vs {num}", g[k]);
        }
    }
    assert!(start.elapsed().as_secs() < 60, "criterion 1 exceeded 60 s");
    pass(1, "gradient correctness");
}

#[test]
fn criterion_2_nlm_oracle_equivalence() {
    let start = Instant::now();
    let (nx, ny) = (32, 32);
    let params = NlmParams::default();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(0.0..0.5)).collect();
        let img: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights = NlmWeights::compute(&reference, nx, ny, &params).unwrap();
        let fast = weights.smooth(&img).unwrap();
        // Naive quadruple-loop smoother.
        let m = params.search_half_width as isize;
        for r in 0..ny as isize {
            for c in 0..nx as isize {
                let k = (r * nx as isize + c) as usize;
                let mut num = 0.0;
                let mut den = 0.0;
                for dr in -m..=m {
                    for dc in -m..=m {
                        let (lr, lc) = (r + dr, c + dc);
                        if lr < 0 || lr >= ny as isize || lc < 0 || lc >= nx as isize {
                            continue;
                        }
                        let l = (lr * nx as isize + lc) as usize;
                        let w = nlm_weight(
                            &reference,
                            nx,
                            ny,
                            (r as usize, c as usize),
                            (lr as usize, lc as usize),
                            &params,
                        );
                        num += w * img[l];
                        den += w;
                    }
                }
                let naive = num / den;
                assert!(
                    (fast[k] - naive).abs() <= 1e-10,
                    "seed {seed} pixel {k}: {} vs {naive}",
                    fast[k]
                );
            }
        }
    }
    assert!(start.elapsed().as_secs() < 30, "criterion 2 exceeded 30 s");
    pass(2, "NLM oracle equivalence");
}

#[test]
fn criterion_3_prox_and_theta_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // Soft threshold against the piecewise formula.
    let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let kappa = 0.35;
    let st = soft_threshold(&xs, kappa);
    for (k, (&x, &y)) in xs.iter().zip(&st).enumerate() {
        let oracle = if x > kappa {
            x - kappa
        } else if x < -kappa {
            x + kappa
        } else {
            0.0
        };
        assert!((y - oracle).abs() <= 1e-7, "soft threshold {k}");
    }

    // Non-negativity projection.
    let c: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let eta: Vec<f64> = (0..64).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let s = update_nonneg_s(&c, &eta);
    for k in 0..64 {
        assert!((s[k] - (c[k] + eta[k]).max(0.0)).abs() <= 1e-7, "projection {k}");
    }

    // Theta update, nu = 0: closed form average of the two copies.
    let op = DifferenceOperator::new(8, 8);
    let n = op.n_pixels();
    let rand_vec = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let (t, s2) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
    let (eta_t, eta_s) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
    let (v, eta_v) = (rand_vec(&mut rng, 2 * n), rand_vec(&mut rng, 2 * n));
    let c0 = update_theta_c(&t, &s2, &v, &eta_t, &eta_s, &eta_v, &op, 0.0, 1e-12, None).unwrap();
    for k in 0..n {
        let oracle = ((t[k] - eta_t[k]) + (s2[k] - eta_s[k])) / 2.0;
        assert!((c0[k] - oracle).abs() <= 1e-7, "theta nu=0 pixel {k}");
    }

    // Theta update, nu > 0: dense Gaussian elimination on (2I + nu D^T D).
    let nu = 0.7;
    let c1 =
        update_theta_c(&t, &s2, &v, &eta_t, &eta_s, &eta_v, &op, nu, 1e-12, None).unwrap();
    let mut mat = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let de = op.apply(&e).unwrap();
        let dtde = op.apply_adjoint(&de).unwrap();
        for i in 0..n {
            mat[i][j] = if i == j { 2.0 } else { 0.0 } + nu * dtde[i];
        }
    }
    let mut rhs = vec![0.0; n];
    let ve: Vec<f64> = v.iter().zip(&eta_v).map(|(&a, &b)| a - b).collect();
    let dtv = op.apply_adjoint(&ve).unwrap();
    for k in 0..n {
        rhs[k] = (t[k] - eta_t[k]) + (s2[k] - eta_s[k]) + nu * dtv[k];
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()));
        let pivot = pivot.unwrap();
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = mat[row][col] / mat[col][col];
            for j in col..n {
                mat[row][j] -= f * mat[col][j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut dense = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in row + 1..n {
            acc -= mat[row][j] * dense[j];
        }
        dense[row] = acc / mat[row][row];
    }
    for k in 0..n {
        assert!(
            (c1[k] - dense[k]).abs() <= 1e-7,
            "theta nu>0 pixel {k}: {} vs {}",
            c1[k],
            dense[k]
        );
    }

    assert!(start.elapsed().as_secs() < 10, "criterion 3 exceeded 10 s");
    pass(3, "prox and theta oracles");
}

#[test]
fn criterion_4_decomposition_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (lo, hi) = specs();
    for trial in 0..100 {
        let ac = rng.gen_range(0.1..3.0);
        let ap = rng.gen_range(100.0..30_000.0);
        let ml = log_measurement(ac, ap, &lo);
        let mh = log_measurement(ac, ap, &hi);
        let (ac_hat, ap_hat, flagged) = decompose_ray(ml, mh, &lo, &hi);
        assert!(!flagged, "trial {trial} flagged");
        assert!(
            ((ac_hat - ac) / ac).abs() <= 1e-3,
            "trial {trial} a_c: {ac_hat} vs {ac}"
        );
        assert!(
            ((ap_hat - ap) / ap).abs() <= 1e-3,
            "trial {trial} a_p: {ap_hat} vs {ap}"
        );
    }
    assert!(start.elapsed().as_secs() < 30, "criterion 4 exceeded 30 s");
    pass(4, "decomposition round-trip");
}

/// Desk experiment shared by criteria 5 and 7.
struct DeskResults {
    psnr_p_admm: f64,
    psnr_p_noreg: f64,
    psnr_p_ync: f64,
    psnr_c_admm: f64,
    psnr_c_noreg: f64,
    psnr_c_ync: f64,
    /// (label, std_p of ADMM+NLM, std_p of YNC).
    cloud_std_p: Vec<(String, f64, f64)>,
    elapsed_s: f64,
}

fn desk_sinogram() -> (ImageGrid, ScanGeometry, ImagePair, DualSinogram) {
    let grid = ImageGrid::centered(64, 64, 0.625).unwrap();
    let geom = ScanGeometry::uniform(90, 128, 0.35, 0.0).unwrap();
    let (truth, _) = build_suitcase_phantom(&grid).unwrap();
    let a = assemble_system_matrix(&grid, &geom).unwrap();
    let (lo, hi) = specs();
    let y0 = 1e5;
    let counts_low = forward_expected_counts(&a, &truth, &lo, y0).unwrap();
    let counts_high = forward_expected_counts(&a, &truth, &hi, y0).unwrap();
    let seed = 7u64;
    let nl = NoiseModel::from_snr_db(y0, 70.0, seed).unwrap();
    let nh = NoiseModel::from_snr_db(y0, 70.0, seed.wrapping_add(0x9e37_79b9)).unwrap();
    let sino = DualSinogram::from_counts(
        simulate_measurements(&counts_low, &nl),
        simulate_measurements(&counts_high, &nh),
        y0,
    )
    .unwrap();
    (grid, geom, truth, sino)
}

/// Solver settings used for the desk comparisons: a longer schedule, an
/// NLM bandwidth matched to the Compton reconstruction's noise level,
/// small patches (the phantom's thinnest feature is ~3 pixels across, so
/// larger patches stop matching along it), and a weight that balances the
/// NLM pull against the data term at the photoelectric intensity scale.
fn desk_admm_config() -> AdmmConfig {
    AdmmConfig {
        max_outer: 100,
        lambda_nlm: 1e-2,
        nlm: NlmParams::new(0.02, 1, 5).unwrap(),
        ..AdmmConfig::default()
    }
}

fn desk_results() -> &'static DeskResults {
    static RESULTS: OnceLock<DeskResults> = OnceLock::new();
    RESULTS.get_or_init(|| {
        let start = Instant::now();
        let (grid, geom, truth, sino) = desk_sinogram();
        let a = assemble_system_matrix(&grid, &geom).unwrap();
        let (lo, hi) = specs();
        let timer = || 0.0;

        let ync = ync_reconstruct(&sino, &lo, &hi, &grid, &geom, &Filter::ramp_hann()).unwrap();

        let mut cfg_noreg = desk_admm_config();
        cfg_noreg.lambda_tv = 0.0;
        cfg_noreg.lambda_nlm = 0.0;
        let (noreg, _) =
            run_admm(&sino, &a, &lo, &hi, &grid, &geom, &cfg_noreg, None, &timer).unwrap();

        let cfg = desk_admm_config();
        let (admm, _) = run_admm(&sino, &a, &lo, &hi, &grid, &geom, &cfg, None, &timer).unwrap();

        let (_, scene) = build_suitcase_phantom(&grid).unwrap();
        let mut cloud_std_p = Vec::new();
        for label in ["water", "neoprene"] {
            let mask = scene.mask_by_label(label).unwrap();
            let masks = [(label, mask)];
            let st_admm = material_clouds(&admm, &masks).unwrap();
            let st_ync = material_clouds(&ync, &masks).unwrap();
            cloud_std_p.push((label.to_string(), st_admm[0].std_p, st_ync[0].std_p));
        }

        DeskResults {
            psnr_p_admm: psnr(&admm.p, &truth.p, PSNR_L_PHOTOELECTRIC).unwrap(),
            psnr_p_noreg: psnr(&noreg.p, &truth.p, PSNR_L_PHOTOELECTRIC).unwrap(),
            psnr_p_ync: psnr(&ync.p, &truth.p, PSNR_L_PHOTOELECTRIC).unwrap(),
            psnr_c_admm: psnr(&admm.c, &truth.c, PSNR_L_COMPTON).unwrap(),
            psnr_c_noreg: psnr(&noreg.c, &truth.c, PSNR_L_COMPTON).unwrap(),
            psnr_c_ync: psnr(&ync.c, &truth.c, PSNR_L_COMPTON).unwrap(),
            elapsed_s: start.elapsed().as_secs_f64(),
            cloud_std_p,
        }
    })
}

#[test]
fn criterion_5_table_ordering_at_desk_scale() {
    let r = desk_results();
    println!(
        "  PE PSNR: admm+nlm {:.2} dB, noreg {:.2} dB, ync {:.2} dB",
        r.psnr_p_admm, r.psnr_p_noreg, r.psnr_p_ync
    );
    println!(
        "  Compton PSNR: admm+nlm {:.2} dB, noreg {:.2} dB, ync {:.2} dB",
        r.psnr_c_admm, r.psnr_c_noreg, r.psnr_c_ync
    );
    assert!(
        r.psnr_p_admm >= r.psnr_p_noreg + 3.0,
        "PE: admm+nlm {} must beat noreg {} by 3 dB",
        r.psnr_p_admm,
        r.psnr_p_noreg
    );
    assert!(
        r.psnr_p_admm >= r.psnr_p_ync + 5.0,
        "PE: admm+nlm {} must beat ync {} by 5 dB",
        r.psnr_p_admm,
        r.psnr_p_ync
    );
    assert!(r.psnr_c_admm >= r.psnr_c_ync, "Compton: admm+nlm vs ync");
    assert!(r.psnr_c_noreg >= r.psnr_c_ync, "Compton: noreg vs ync");
    assert!(r.elapsed_s < 1800.0, "desk experiment exceeded 30 min");
    pass(5, "Table 1 ordering at desk scale");
}

#[test]
fn criterion_6_tv_benefit_under_sparse_view() {
    let start = Instant::now();
    let (grid, geom, truth, sino) = desk_sinogram();
    let (geom9, sino9) = subsample_angles(&geom, &sino, 10).unwrap();
    assert_eq!(geom9.n_angles(), 9);
    let a = assemble_system_matrix(&grid, &geom9).unwrap();
    let (lo, hi) = specs();
    let timer = || 0.0;

    let mut cfg_tv = desk_admm_config();
    cfg_tv.lambda_nlm = 0.0;
    cfg_tv.lambda_tv = 0.01;
    let mut cfg_off = cfg_tv.clone();
    cfg_off.lambda_tv = 0.0;

    let (with_tv, _) =
        run_admm(&sino9, &a, &lo, &hi, &grid, &geom9, &cfg_tv, None, &timer).unwrap();
    let (without, _) =
        run_admm(&sino9, &a, &lo, &hi, &grid, &geom9, &cfg_off, None, &timer).unwrap();
    let p_tv = psnr(&with_tv.c, &truth.c, PSNR_L_COMPTON).unwrap();
    let p_off = psnr(&without.c, &truth.c, PSNR_L_COMPTON).unwrap();
    println!("  sparse-view Compton PSNR: tv {p_tv:.2} dB, no tv {p_off:.2} dB");
    assert!(p_tv >= p_off, "TV must not hurt sparse-view Compton PSNR: {p_tv} vs {p_off}");
    assert!(start.elapsed().as_secs() < 1800, "criterion 6 exceeded 30 min");
    pass(6, "TV benefit under sparse view");
}

#[test]
fn criterion_7_material_cloud_improvement() {
    let r = desk_results();
    for (label, std_admm, std_ync) in &r.cloud_std_p {
        println!("  {label}: std_p admm+nlm {std_admm:.1}, ync {std_ync:.1}");
        assert!(
            *std_admm <= 0.5 * std_ync,
            "{label}: std_p {std_admm} must be at most half of YNC's {std_ync}"
        );
    }
    pass(7, "material cloud improvement");
}

#[test]
fn criterion_8_toy_admm_sanity() {
    let base = toy_admm(1.0, 200, 1e-8);
    assert!(base.iterations <= 200);
    assert!(base.primal_residual < 1e-8 && base.dual_residual < 1e-8);
    for w in [10.0, 0.1] {
        let r = toy_admm(w, 10_000, 1e-10);
        assert!(
            (r.x - base.x).abs() <= 1e-6 && (r.z - base.z).abs() <= 1e-6,
            "penalty {w} changed the optimum: {} vs {}",
            r.x,
            base.x
        );
    }
    pass(8, "toy ADMM sanity");
}

#[test]
fn criterion_9_metric_self_tests() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (nx, ny) = (24, 16);
    let img: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(0.0..1.0)).collect();

    // Identity SSIM.
    let s = ssim(&img, &img, nx, ny, 1.0).unwrap();
    assert!((s - 1.0).abs() <= 1e-12, "ssim(I, I) = {s}");

    // Constant offset of 0.1 with L = 1 gives exactly 20 dB.
    let shifted: Vec<f64> = img.iter().map(|&v| v + 0.1).collect();
    let db = psnr(&shifted, &img, 1.0).unwrap();
    assert!((db - 20.0).abs() <= 1e-9, "psnr offset case = {db}");

    // SSIM against an independent window-by-window oracle.
    let other: Vec<f64> = img.iter().map(|&v| 0.8 * v + 0.05).collect();
    let got = ssim(&other, &img, nx, ny, 1.0).unwrap();
    let l = 1.0;
    let (c1, c2) = ((0.01 * l) * (0.01 * l), (0.03 * l) * (0.03 * l));
    let mut total = 0.0;
    let mut windows = 0.0;
    let mut r0 = 0;
    while r0 < ny {
        let mut c0 = 0;
        let r1 = (r0 + 8).min(ny);
        while c0 < nx {
            let c1e = (c0 + 8).min(nx);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in r0..r1 {
                for c in c0..c1e {
                    xs.push(other[r * nx + c]);
                    ys.push(img[r * nx + c]);
                }
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let vx = xs.iter().map(|&x| (x - mx) * (x - mx)).sum::<f64>() / n;
            let vy = ys.iter().map(|&y| (y - my) * (y - my)).sum::<f64>() / n;
            let cov =
                xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum::<f64>() / n;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            windows += 1.0;
            c0 += 8;
        }
        r0 += 8;
    }
    let oracle = total / windows;
    assert!((got - oracle).abs() <= 1e-12, "ssim {got} vs oracle {oracle}");

    // Extra guard used elsewhere in the suite: PSNR of identical images.
    assert!(psnr(&img, &img, 1.0).unwrap().is_infinite());
    let _ = AdmmState::new(
        &ImagePair::zeros(ImageGrid::centered(8, 8, 1.0).unwrap()),
        &DifferenceOperator::new(8, 8),
    )
    .unwrap();
    pass(9, "metric self-tests");
}

//! Library results checked against independent numerical oracles.

use num_complex::Complex64;
use slabloc::arrival::{detect_toa_with, hamming_window, stft, tdoa_from_toas, StftParams, Threshold};
use slabloc::harness::{simulate_toas, VelocityProfile};
use slabloc::localize::{localize_hyperbolic, localize_so_tdoa, PreparedGrid};
use slabloc::plate::{
    derive_constants, envelope, envelope_max_toa, envelope_peak_time, group_velocity, perceived_velocity,
    stationary_frequency, wavenumber, PlateConstants, PlateMaterial, Pulse, PulseKind,
};
use slabloc::regions::{characteristic_vector, enumerate_regions, region_upper_bound, SensorArray};
use slabloc::synth::{synth_free, synth_free_envelope, SynthesisParams, TimeGrid, Waveform};
use slabloc::{Point, RoomGeometry};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A: f64 = 183.0;

fn plate(theta: f64) -> PlateConstants {
    PlateConstants::from_dispersion(A, 500.0, theta).unwrap()
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn concrete_slab_constants() {
    let c = derive_constants(&PlateMaterial::concrete_slab()).unwrap();
    // D = Eh³/(12(1−σ²)), a = √(D/ρh), γ = ϑ/(4√a)
    let d = 24e9 * 0.2f64.powi(3) / (12.0 * (1.0 - 0.04));
    let a = (d / (2500.0 * 0.2)).sqrt();
    assert!(rel(c.bending_stiffness, d) < 1e-12);
    assert!(rel(c.dispersion_a, a) < 1e-12);
    assert!((c.dispersion_a - 183.0).abs() < 1.0);
    assert!(rel(c.bending_stiffness, 1.667e7) < 1e-3);
    assert!(rel(c.loss_gamma, 1e-5 / (4.0 * a.sqrt())) < 1e-12);
    assert!(rel(c.loss_gamma, 1.848e-7) < 5e-3);
}

#[test]
fn wavenumber_matches_exact_quartic_root() {
    // D(1 − jϑω)k⁴ = ρhω²  ⇒  k = (ω² / (a²(1 − jϑω)))^(1/4), branch Re, Im > 0.
    let theta = 1e-5;
    let c = plate(theta);
    // first-order in ϑω: within 0.1% while ϑω ≤ 0.03, second-order error beyond
    for omega in [100.0, 1_000.0, 2_000.0, 3_000.0, 6_283.0, 10_000.0] {
        let eps = theta * omega;
        let tol = if eps <= 0.03 { 1e-3 } else { eps * eps };
        let k4 = Complex64::new(omega * omega / (A * A), 0.0) / Complex64::new(1.0, -theta * omega);
        let exact = (0..4)
            .map(|m| k4.powf(0.25) * Complex64::i().powi(m))
            .find(|k| k.re > 0.0 && k.im > 0.0)
            .unwrap();
        let k = wavenumber(omega, &c, theta);
        assert!(rel(k.real, exact.re) < tol, "k_R at {omega}");
        assert!(
            rel(k.imag, exact.im) < tol,
            "k_I at {omega}: {} vs {}",
            k.imag,
            exact.im
        );
    }
}

#[test]
fn group_velocity_by_finite_difference() {
    let c = plate(0.0);
    let omega = 2.0 * std::f64::consts::PI * 1000.0;
    // invert k_R = √(ω/a) to ω(k) = a k² and difference it
    let k0 = (omega / A).sqrt();
    let h = 1e-6 * k0;
    let cg = (A * (k0 + h).powi(2) - A * (k0 - h).powi(2)) / (2.0 * h);
    assert!(rel(group_velocity(omega, &c), cg) < 1e-8);
    assert!((cg - 2145.0).abs() < 1.0, "{cg}");
}

#[test]
fn envelope_argmax_over_distance() {
    let c = plate(1e-5);
    let t = 5.712e-3;
    let d_star = golden_max(|d| envelope(d, t, &c, 1e-5), 1.0, 40.0);
    assert!(rel(d_star, 10.0) < 5e-3, "{d_star}");
    assert!(rel(envelope_max_toa(d_star, &c, 1e-5).unwrap(), t) < 1e-6);
}

#[test]
fn stationary_frequency_from_phase_derivative() {
    let c = plate(1e-5);
    let (d, t) = (10.0, 5.712e-3);
    // Φ(ω) = k_R(ω) d − ωt
    let phi = |w: f64| (w / A).sqrt() * d - w * t;
    let dphi = |w: f64| (phi(w * (1.0 + 1e-7)) - phi(w * (1.0 - 1e-7))) / (2e-7 * w);
    let root = bisect(dphi, 100.0, 100_000.0);
    assert!(rel(stationary_frequency(d, t, &c), root) < 1e-5);
    assert!(rel(root, 4186.0) < 1e-3, "{root}");
}

#[test]
fn perceived_velocity_from_two_dimensional_search() {
    for theta in [1e-5, 1e-4] {
        let c = plate(theta);
        for d in [5.0, 10.0, 15.0, 20.0] {
            let cp = perceived_velocity(d, &c, theta).unwrap();
            let t = d / cp;
            // ∂A/∂d = 0 at (d, t): d is the argmax of A(·, t)
            let d_star = golden_max(|x| envelope(x, t, &c, theta), 0.2 * d, 5.0 * d);
            assert!(rel(d_star, d) < 5e-3, "theta {theta} d {d}: {d_star}");
        }
    }
    let c = plate(1e-5);
    assert!(rel(perceived_velocity(10.0, &c, 1e-5).unwrap(), 1751.0) < 1e-3);
    assert!(rel(10.0 / perceived_velocity(10.0, &c, 1e-5).unwrap(), 5.71e-3) < 1e-3);
}

fn simpson(f: impl Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

#[test]
fn pulse_spectra_match_quadrature() {
    let t_len = 2e-3;
    for kind in [PulseKind::F1, PulseKind::F1Derivative] {
        let pulse = Pulse::new(kind, t_len).unwrap();
        let mut x = 0.1;
        while x <= 20.0 {
            let omega = x / t_len;
            let numeric = simpson(
                |t| Complex64::from_polar(pulse.value(t), omega * t),
                0.0,
                t_len,
                4000,
            );
            let closed = pulse.spectrum(omega);
            assert!(
                (closed - numeric).norm() / numeric.norm() < 1e-3,
                "{kind:?} ωT={x}: {closed} vs {numeric}"
            );
            x += 0.1;
        }
        // the removable poles
        for x in [2.0 * std::f64::consts::PI, 4.0 * std::f64::consts::PI] {
            let omega = x / t_len;
            let numeric = simpson(
                |t| Complex64::from_polar(pulse.value(t), omega * t),
                0.0,
                t_len,
                4000,
            );
            assert!((pulse.spectrum(omega) - numeric).norm() / numeric.norm() < 1e-3);
        }
    }
}

/// Direct, unvectorized evaluation of the discrete sum, complex form.
fn direct_sum(d: f64, t: f64, c: &PlateConstants, theta: f64, f_max: f64, n: usize) -> Complex64 {
    let dw = 2.0 * std::f64::consts::PI * f_max / n as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let w = i as f64 * dw;
        let kr = (w / c.dispersion_a).sqrt();
        let ki = theta * w / 4.0 * kr;
        s += Complex64::from_polar(
            c.alpha_magnitude * w.sqrt() * (-ki * d).exp(),
            kr * d - w * t + std::f64::consts::FRAC_PI_4,
        );
    }
    s * dw
}

#[test]
fn synthesized_peak_time_matches_fine_oracle() {
    let theta = 1e-5;
    let c = plate(theta);
    let grid = TimeGrid::new(0.0, 20_000.0, 240).unwrap();
    let env = synth_free_envelope(10.0, &grid, &c, theta, &SynthesisParams::default()).unwrap();
    let t_impl = env.time(env.peak().0);

    // finer sum and 4x finer time grid, 2..8 ms
    let fine: Vec<(f64, f64)> = (0..480)
        .map(|k| {
            let t = 2e-3 + k as f64 / 80_000.0;
            (t, direct_sum(10.0, t, &c, theta, 10_000.0, 16_384).norm())
        })
        .collect();
    let t_oracle = fine
        .iter()
        .fold((0.0, 0.0), |b, &(t, v)| if v > b.1 { (t, v) } else { b })
        .0;
    assert!(
        (t_impl - t_oracle).abs() <= 1.5 / 20_000.0,
        "{t_impl} vs {t_oracle}"
    );
    // the sensor-fixed envelope maximum, not the locus time
    let law = envelope_peak_time(10.0, &c, theta).unwrap();
    assert!(rel(t_oracle, law) < 0.03, "{t_oracle} vs {law}");
    assert!(rel(law, 0.6f64.cbrt() * 5.712e-3) < 1e-3);
}

#[test]
fn implementation_matches_direct_sum_pointwise() {
    let theta = 1e-5;
    let c = plate(theta);
    let p = SynthesisParams::default();
    let grid = TimeGrid::new(0.0, 20_000.0, 200).unwrap();
    let w = synth_free(12.0, &grid, &c, theta, &p).unwrap();
    let scale = w.peak().1;
    for k in (0..200).step_by(7) {
        let oracle = direct_sum(12.0, grid.time(k), &c, theta, p.f_max, p.n_terms).re;
        assert!((w.samples[k] - oracle).abs() < 1e-9 * scale);
    }
}

#[test]
fn peak_amplitude_falls_with_distance() {
    let c = plate(1e-5);
    let grid = TimeGrid::new(0.0, 20_000.0, 800).unwrap();
    let peaks: Vec<f64> = [5.0, 10.0, 15.0, 20.0]
        .iter()
        .map(|&d| {
            synth_free(d, &grid, &c, 1e-5, &SynthesisParams::default())
                .unwrap()
                .peak()
                .1
        })
        .collect();
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
}

#[test]
fn threshold_onset_precedes_locus_time() {
    let c = plate(1e-5);
    let grid = TimeGrid::new(0.0, 20_000.0, 300).unwrap();
    let w = synth_free(10.0, &grid, &c, 1e-5, &SynthesisParams::default()).unwrap();
    let toa = detect_toa_with(&w, Threshold::FractionOfPeak(0.1)).unwrap().time;
    // dense scan
    let level = 0.1 * w.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scan = (0..w.len()).find(|&k| w.samples[k].abs() > level).unwrap();
    assert_eq!(toa, w.time(scan));
    assert!(toa < 5.71e-3);
}

#[test]
fn stft_energy_matches_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..20_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let w = Waveform::new(20_000.0, 0.0, x).unwrap();
    let params = StftParams::default();
    let s = stft(&w, params).unwrap();
    let gain: f64 = hamming_window(params.window_len).iter().map(|v| v * v).sum();
    let estimate = s.total_energy(params.fft_len) * params.hop() as f64 / (params.fft_len as f64 * gain);
    assert!(rel(estimate, energy) < 0.05, "{estimate} vs {energy}");
}

#[test]
fn triangle_bisectors_are_concurrent() {
    let room = RoomGeometry::new(100.0, 100.0).unwrap();
    let s = SensorArray::new(vec![
        Point::new(40.0, 42.0),
        Point::new(62.0, 45.0),
        Point::new(48.0, 63.0),
    ])
    .unwrap();
    let q = enumerate_regions(&room, &s, (300, 300)).unwrap().len();
    // three concurrent lines through the circumcentre: 6 sectors, not 7
    assert_eq!(q, 6);
    assert_eq!(region_upper_bound(3), 7);
}

#[test]
fn upper_bound_matches_line_arrangement_count() {
    for n in 2..12u64 {
        let o = n * (n - 1) / 2;
        assert_eq!(region_upper_bound(n as usize), o * (o + 1) / 2 + 1);
    }
    assert_eq!(region_upper_bound(5), 56);
}

#[test]
fn single_bit_flips_cost_at_most_one() {
    let room = RoomGeometry::new(8.0, 6.0).unwrap();
    let s = SensorArray::new(vec![
        Point::new(1.0, 1.2),
        Point::new(6.5, 0.8),
        Point::new(7.1, 5.0),
        Point::new(2.2, 4.6),
    ])
    .unwrap();
    let map = enumerate_regions(&room, &s, (160, 120)).unwrap();
    for r in map.regions() {
        for l in 0..r.codeword.len() {
            let mut z = r.codeword.clone();
            z.flip(l);
            let decoded = map.decode(&z).unwrap();
            assert!(decoded.distance <= 1);
            if decoded.distance == 1 {
                assert!(decoded.region_ids.contains(&r.id));
            }
        }
    }
}

fn paper_layout() -> (RoomGeometry, SensorArray) {
    let room = RoomGeometry::new(10.0, 10.0).unwrap();
    (room, SensorArray::lattice(&room, 3, 3, 1.0).unwrap())
}

/// Brute-force `argmin ‖ĉτ − d_p‖` with its own range-difference formula.
fn hyperbolic_oracle(tau: &[f64], c_hat: f64, sensors: &[Point], grid: &[Point]) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for (k, p) in grid.iter().enumerate() {
        let mut r = 0.0;
        let mut l = 0;
        for j in 1..sensors.len() {
            for i in 0..j {
                let dp = ((p.x - sensors[i].x).powi(2) + (p.y - sensors[i].y).powi(2)).sqrt()
                    - ((p.x - sensors[j].x).powi(2) + (p.y - sensors[j].y).powi(2)).sqrt();
                r += (c_hat * tau[l] - dp).powi(2);
                l += 1;
            }
        }
        if r < best.1 {
            best = (k, r);
        }
    }
    best.0
}

#[test]
fn hyperbolic_with_wrong_speed_moves_estimate() {
    let (room, sensors) = paper_layout();
    let grid = room.lattice(25, 25).unwrap();
    let src = Point::new(1.0, 3.0);
    let toas = simulate_toas(src, &sensors, &VelocityProfile::Constant { c0: 1000.0 }).unwrap();
    let tau = tdoa_from_toas(&toas).unwrap();
    let right = localize_hyperbolic(&tau, 1000.0, &sensors, &grid).unwrap();
    let wrong = localize_hyperbolic(&tau, 2000.0, &sensors, &grid).unwrap();
    assert_eq!(
        grid[hyperbolic_oracle(tau.values(), 1000.0, sensors.positions(), &grid)],
        right.estimate
    );
    assert_eq!(
        grid[hyperbolic_oracle(tau.values(), 2000.0, sensors.positions(), &grid)],
        wrong.estimate
    );
    assert!(src.distance(right.estimate) <= 0.5 * (2.0f64).sqrt() * 10.0 / 24.0 + 1e-9);
    assert_ne!(right.estimate, wrong.estimate);
    assert!(src.distance(wrong.estimate) > src.distance(right.estimate));
}

#[test]
fn hyperbolic_nearest_grid_point_has_lowest_residual() {
    let (room, sensors) = paper_layout();
    let grid = room.lattice(25, 25).unwrap();
    let prepared = PreparedGrid::new(&sensors, grid.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let src = Point::new(rng.random_range(0.2..9.8), rng.random_range(0.2..9.8));
        let toas = simulate_toas(src, &sensors, &VelocityProfile::Constant { c0: 800.0 }).unwrap();
        let tau = tdoa_from_toas(&toas).unwrap();
        let residuals = prepared.hyperbolic_residuals(&tau, 800.0).unwrap();
        let nearest = (0..grid.len())
            .min_by(|&a, &b| src.distance(grid[a]).total_cmp(&src.distance(grid[b])))
            .unwrap();
        let best = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
        // the minimizer is the nearest point or within one grid step of it
        let chosen = prepared.hyperbolic(&tau, 800.0).unwrap().estimate;
        assert!(residuals[nearest] >= best);
        assert!(chosen.distance(grid[nearest]) <= 10.0 / 24.0 * 2f64.sqrt() + 1e-9);
    }
}

#[test]
fn region_estimate_within_true_region_diameter() {
    let (room, sensors) = paper_layout();
    let map = enumerate_regions(&room, &sensors, (200, 200)).unwrap();
    let src = Point::new(1.0, 3.0);
    let profile = VelocityProfile::PowerLaw { a: A, theta: 1e-5 };
    let tau = tdoa_from_toas(&simulate_toas(src, &sensors, &profile).unwrap()).unwrap();
    let res = localize_so_tdoa(&tau, &map).unwrap();
    let truth = characteristic_vector(src, &sensors);
    let id = map.regions().iter().find(|r| r.codeword == truth).unwrap().id;
    assert_eq!(res.tied_regions, vec![id]);
    let labels = map.cell_labels().unwrap();
    let (nx, ny) = map.grid_resolution();
    let cells: Vec<Point> = (0..nx * ny)
        .filter(|&k| labels[k] as usize == id)
        .map(|k| map.cell_center(k % nx, k / nx))
        .collect();
    let diameter = cells
        .iter()
        .flat_map(|a| cells.iter().map(move |b| a.distance(*b)))
        .fold(0.0, f64::max);
    assert!(src.distance(res.estimate) <= diameter);
}

#[test]
fn power_law_arrival_exponent() {
    let p = VelocityProfile::PowerLaw { a: A, theta: 1e-5 };
    let ds: Vec<f64> = (0..40).map(|k| 1.0 + k as f64 * 19.0 / 39.0).collect();
    let xs: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = ds.iter().map(|d| (d / p.speed(*d).unwrap()).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 4.0 / 3.0).abs() < 1e-9, "{slope}");
}

#[test]
fn perceived_velocity_matches_power_law_profile() {
    let c = plate(1e-5);
    let p = VelocityProfile::PowerLaw { a: A, theta: 1e-5 };
    for d in [1.0, 5.0, 10.0, 20.0] {
        assert!(rel(p.speed(d).unwrap(), perceived_velocity(d, &c, 1e-5).unwrap()) < 1e-12);
    }
    assert!(rel(p.speed(10.0).unwrap(), 1751.0) < 1e-3);
}

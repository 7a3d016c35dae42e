use approx::assert_relative_eq;
use imbalance_lab::analytic::{analytic_error_report, Method, McOptions, Mode};
use imbalance_lab::model::{make_instance, ProblemInstance, Rho};
use imbalance_lab::special::q_function;
use imbalance_lab::tuners::*;

// Q(1.2/sqrt(101)), high precision
const MM_BINARY_BOUND: f64 = 0.45247746288453545822;

fn instance(d: usize, n: &[usize], s: &[f64]) -> ProblemInstance {
    make_instance(n.len(), d, n, s, 0).unwrap()
}

#[test]
fn balanced_instances_get_equal_margins_and_constant_offsets() {
    let inst = instance(10_000, &[30; 4], &[0.7; 4]);
    for rho in [Rho::Infinite, Rho::Finite(3.0)] {
        let d = ma_delta_star(&inst, rho);
        assert!(d.iter().all(|v| (v - d[0]).abs() <= 1e-14 * d[0]));
        let i = la_iota_star(&inst, rho);
        assert!(i.iter().all(|v| (v - i[0]).abs() <= 1e-12 * i[0].abs().max(1.0)));
    }
    // a constant offset leaves the max-margin predictions untouched
    let mc = McOptions { samples: 5_000, seed: 3 };
    let mm = method_coefficients(&inst, Method::Mm, &Schedule::Fixed(vec![]), Rho::Infinite).unwrap();
    let la = method_coefficients(&inst, Method::La, &Schedule::LaStarScaled(1.0), Rho::Infinite).unwrap();
    let a = analytic_error_report(&inst, &mm, Mode::FiniteD, mc).unwrap();
    let b = analytic_error_report(&inst, &la, Mode::FiniteD, mc).unwrap();
    assert_eq!(a.per_class_error, b.per_class_error);
}

#[test]
fn optimal_margins_scale_inversely_with_signal_times_size() {
    let n = [5, 50, 200];
    let s = [0.3, 0.9, 1.5];
    let inst = instance(10_000_000_000, &n, &s);
    let d = ma_delta_star(&inst, Rho::Infinite);
    for i in 0..3 {
        let want = (s[0] * n[0] as f64) / (s[i] * n[i] as f64);
        assert!((d[i] / d[0] / want - 1.0).abs() < 0.01, "class {i}");
    }
}

#[test]
fn optimal_offsets_grow_with_class_size() {
    let n = [5, 50, 200];
    let inst = instance(10_000_000_000, &n, &[0.8; 3]);
    let i = la_iota_star(&inst, Rho::Infinite);
    for k in 1..3 {
        let want = n[k] as f64 / n[0] as f64;
        assert!((i[k] / i[0] / want - 1.0).abs() < 0.01);
    }
}

#[test]
fn max_margin_bound_examples() {
    let n = [10, 1000];
    let s: Vec<f64> = n.iter().map(|&v| 1.2 / (v as f64).sqrt()).collect();
    let inst = instance(10_000, &n, &s);
    assert_relative_eq!(wcelb_mm(&inst, Rho::Infinite).unwrap(), MM_BINARY_BOUND, max_relative = 1e-12);
    assert_eq!(wcelb_mm(&inst, Rho::Finite(1.0)).unwrap(), 1.0);

    let bal = instance(10_000, &[40, 40], &[0.3, 0.3]);
    let want = q_function(0.3 * 20f64.sqrt());
    assert_relative_eq!(wcelb_mm(&bal, Rho::Infinite).unwrap(), want, max_relative = 1e-12);
    assert_relative_eq!(wcelb_mm(&bal, Rho::Finite(5.0)).unwrap(), want, max_relative = 1e-9);
}

#[test]
fn unit_margins_and_zero_offsets_give_the_max_margin_bound() {
    let inst = instance(100_000, &[4, 30, 90], &[0.5, 0.7, 0.4]);
    let mm = wcelb_mm(&inst, Rho::Infinite).unwrap();
    assert_relative_eq!(wcelb_ma(&inst, &[1.0; 3], Rho::Infinite).unwrap(), mm, max_relative = 1e-12);
    assert_relative_eq!(wcelb_la(&inst, &[0.0; 3], Rho::Infinite).unwrap(), mm, max_relative = 1e-12);
}

#[test]
fn tuned_margins_attain_the_optimal_bound() {
    let inst = instance(100_000, &[4, 30, 90, 150], &[0.5, 0.7, 0.4, 0.9]);
    for rho in [Rho::Infinite, Rho::Finite(2.0), Rho::Finite(300.0)] {
        let tuned = wcelb_ma_expansion(&inst, &ma_delta_star_expansion(&inst, rho), rho).unwrap();
        let opt = wcelb_ma_opt(&inst, rho);
        assert_relative_eq!(tuned, opt, max_relative = 1e-9);
        assert!(opt <= wcelb_mm(&inst, rho).unwrap() + 1e-15);
    }
}

#[test]
fn bias_branches_agree_for_equal_signals() {
    let inst = instance(100_000, &[3, 20, 70], &[0.6; 3]);
    assert_relative_eq!(wcelb_ma_opt(&inst, Rho::Infinite), wcelb_ma_opt(&inst, Rho::Finite(7.0)), max_relative = 1e-12);
}

#[test]
fn tuned_offsets_match_the_closed_form() {
    let inst = instance(100_000, &[4, 30, 90, 150], &[0.6; 4]);
    for r in [1.0, 10.0, 500.0] {
        let rho = Rho::Finite(r);
        let generic = wcelb_la_expansion(&inst, &la_iota_star_expansion(&inst, rho), rho).unwrap();
        assert_relative_eq!(wcelb_la_star(&inst, rho).unwrap(), generic, max_relative = 1e-9);
    }
}

#[test]
fn temperature_bound_with_unit_temperatures_is_max_margin() {
    let inst = instance(100_000, &[4, 30, 90], &[0.5, 0.7, 0.4]);
    assert_relative_eq!(wcelb_cdt(&inst, &[1.0; 3]), wcelb_mm(&inst, Rho::Infinite).unwrap(), max_relative = 1e-12);
}

#[test]
fn failure_construction() {
    let f = cdt_failure_instance(0.1, 3).unwrap();
    assert_eq!(f.n, vec![1, 473, 223066]);
    // s_y = 2 Q^{-1}(eps/c) / sqrt(N_y), with Q^{-1}(1/30) = 1.8339146358159143
    assert_relative_eq!(f.s[0], 2.0 * 1.8339146358159143, max_relative = 1e-12);
    assert_relative_eq!(f.s[1] * 473f64.sqrt(), f.s[0], max_relative = 1e-12);
    let inst = f.instance(1_000_000, 0).unwrap();
    assert!(wcelb_ma_opt(&inst, Rho::Infinite) <= 0.1);
    let worst = (0..=60)
        .map(|k| {
            let gamma = 3.0 * k as f64 / 60.0;
            let delta: Vec<f64> = f.n.iter().map(|&v| (v as f64).powf(-gamma)).collect();
            wcelb_cdt(&inst, &delta)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(worst >= 0.4, "{worst}");

    assert!(cdt_failure_instance(0.0, 3).is_err());
    assert!(cdt_failure_instance(0.5, 3).is_err());
    assert!(cdt_failure_instance(0.1, 1).is_err());
    assert!(cdt_failure_instance(0.01, 4).is_err());
}

#[test]
fn class_size_profiles() {
    let p = exp_longtail_profile(10, 500, 100.0).unwrap();
    assert_eq!(p[0], 5);
    assert!(p.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(endpoint_longtail_profile(10, 500, 100.0).unwrap(), CIFAR10_LONGTAIL_PRESET.to_vec());
    assert_eq!(endpoint_longtail_profile(4, 200, 1.0).unwrap(), vec![200; 4]);
    assert_eq!(endpoint_longtail_profile(2, 200, 4.0).unwrap(), vec![50, 200]);
    assert_eq!(exp_longtail_profile(2, 200, 4.0).unwrap(), vec![50, 100]);
    assert!(exp_longtail_profile(1, 100, 2.0).is_err());
    assert!(exp_longtail_profile(3, 100, 0.5).is_err());
    assert!(endpoint_longtail_profile(3, 0, 2.0).is_err());
    assert_eq!(CIFAR10_MODIFIED_PRESET[0], CIFAR10_LONGTAIL_PRESET[0]);
    assert_eq!(CIFAR10_MODIFIED_PRESET[9], CIFAR10_LONGTAIL_PRESET[9]);
}

#[test]
fn schedules() {
    let inst = instance(10_000, &[1, 10, 100], &[1.0; 3]);
    assert_eq!(Schedule::SizePower(1.0).values(&inst, Rho::Infinite), vec![1.0, 0.1, 0.01]);
    let log = Schedule::LogSize(2.0).values(&inst, Rho::Infinite);
    assert_relative_eq!(log[2], 2.0 * 100f64.ln());
    assert_eq!(log[0], 0.0);
    let frac = Schedule::SizeFraction(111.0).values(&inst, Rho::Infinite);
    assert_relative_eq!(frac[1], 10.0);
    let zero = Schedule::MaStarPower(0.0).values(&inst, Rho::Finite(1.0));
    assert_eq!(zero, vec![1.0; 3]);
    let json = serde_json::to_string(&Schedule::SizePower(0.5)).unwrap();
    assert_eq!(json, r#"{"kind":"size_power","value":0.5}"#);
}

#[test]
fn comparison_instances_follow_the_protocol() {
    for seed in 0..50 {
        let (inst, rho) = random_comparison_instance(seed, seed % 2 == 0);
        assert!((3..=10).contains(&inst.c));
        assert!(inst.n.iter().all(|&v| (1..=200).contains(&v)));
        assert!((100_000..=10_000_000).contains(&inst.d));
        assert!(inst.s.iter().all(|&v| (0.01..=1.0).contains(&v)));
        assert!((1.0..=1000.0).contains(&rho));
        if seed % 2 == 0 {
            assert!(inst.s.iter().all(|&v| v == inst.s[0]));
        }
        assert_eq!(random_comparison_instance(seed, seed % 2 == 0).0, inst);
    }
}

use metastab::dynamics::angular_usa_velocity;
use metastab::initgen::{gen_well_prepared, uniform_condition, validate_well_prepared};
use metastab::meanfield::integrate_meanfield;
use metastab::renorm::{merge_threshold, rescaled_velocity};
use metastab::scalar_oracles::{clustering_timescale, collapse_hitting_time, Forcing};
use metastab::{integrate, Configuration, IntegratorSpec, Model, Scheme};

/// Fixed-step RK4 on `u' = u (1 - u) e^{beta (u - 1)}`, linear interpolation at the crossing.
fn rk4_collapse(u0: f64, beta: f64, c: f64) -> f64 {
    let f = |u: f64| u * (1.0 - u) * (beta * (u - 1.0)).exp();
    let target = 1.0 - (-c * beta).exp();
    if u0 >= target {
        return 0.0;
    }
    let (mut t, mut u, h) = (0.0, u0, 1e-3);
    loop {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        let next = u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next >= target {
            return t + h * (target - u) / (next - u);
        }
        t += h;
        u = next;
    }
}

#[test]
fn collapse_time_matches_fixed_step_reference() {
    for (u0, beta, c) in [(0.9, 5.0, 0.5), (0.5, 3.0, 1.0), (0.99, 10.0, 0.3)] {
        let got = collapse_hitting_time(u0, beta, c, 1e-10).unwrap();
        let t = got.t.unwrap();
        let want = rk4_collapse(u0, beta, c);
        assert!((t - want).abs() < 1e-5 * want.max(1.0), "{u0} {beta} {c}: {t} vs {want}");
        assert!(got.bound >= t);
    }
}

#[test]
fn clustering_time_matches_closed_form() {
    // u' = -c log(beta) sin u integrates to log tan(u/2) = log tan(u0/2) - c log(beta) t.
    for (u0, beta, c) in [(1.0, 100.0, 1.0), (2.0, 50.0, 0.5), (0.3, 1e3, 2.0)] {
        let r = clustering_timescale(u0, beta, c, Forcing::None).unwrap();
        let s = (beta.ln() / beta).sqrt();
        let want = ((u0 / 2.0).tan().ln() - (s / 2.0).tan().ln()) / (c * beta.ln());
        assert!((r.t_beta.unwrap() - want).abs() < 1e-8);
    }
}

#[test]
fn forcing_shifts_clustering_time() {
    let base = clustering_timescale(1.0, 100.0, 1.0, Forcing::None).unwrap().t_beta.unwrap();
    let plus = clustering_timescale(1.0, 100.0, 1.0, Forcing::Plus { k: 1.0, kappa: 0.05 }).unwrap().t_beta.unwrap();
    let minus = clustering_timescale(1.0, 100.0, 1.0, Forcing::Minus { k: 1.0, kappa: 0.05 }).unwrap().t_beta.unwrap();
    assert!(minus < base && base < plus);
}

#[test]
fn rescaled_field_is_a_time_change() {
    let theta = [0.04, 0.08, 0.16, 0.32, 0.64];
    let w = [1.0; 5];
    let beta: f64 = 200.0;
    let gap = 0.04f64.max(merge_threshold(beta));
    let factor = beta.ln() * (beta * (1.0 - gap.cos())).exp();
    let a = rescaled_velocity(&theta, &w, beta);
    let b = angular_usa_velocity(&theta, &w, beta);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - factor * y).abs() < 1e-12 * factor.max(1.0) * (1.0 + y.abs()));
    }
}

#[test]
fn ladder_refused_at_moderate_beta_accepted_at_large() {
    let theta = gen_well_prepared(5, 0.02).unwrap().theta;
    for beta in [50.0, 100.0, 200.0] {
        let e = validate_well_prepared(&theta, beta, 1.5).unwrap_err();
        assert!(e.to_string().contains("t_2"), "{e}");
    }
    validate_well_prepared(&theta, 1e5, 1.5).unwrap();
}

#[test]
fn uniform_condition_needs_large_dimension() {
    assert!(!uniform_condition(380, 3, 1e6).holds);
    assert!(uniform_condition(2000, 3, 100.0).holds);
}

#[test]
fn atoms_move_like_particles() {
    let pts = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.6, 0.0, 0.8], vec![0.0, -0.6, 0.8]];
    let x = Configuration::new(3, pts, Some(vec![0.25; 4])).unwrap();
    let spec = IntegratorSpec::new(Scheme::Rk4Project, 0.01, 5.0);
    let a = integrate(&Model::sa(3.0), &x, &spec, &mut []).unwrap();
    let b = integrate_meanfield(&x, 3.0, &spec, None).unwrap();
    let last = (a.records.last().unwrap(), b.records.last().unwrap());
    for (p, q) in last.0.config.coords().iter().zip(last.1.atoms.coords()) {
        assert!((p - q).abs() < 1e-8);
    }
}

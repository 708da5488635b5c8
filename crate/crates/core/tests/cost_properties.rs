mod common;

use proptest::prelude::*;
use traffic_fw::cost::{edge_costs, hessian_diag, potential, FlowVector};
use traffic_fw::network::{Edge, Network};

fn arb_edge() -> impl Strategy<Value = Edge> {
    let coeff = prop_oneof![Just(0.0), 0.05f64..4.0];
    let power = prop_oneof![Just(0.0), Just(1.0), Just(4.0), 0.5f64..6.0];
    (0.1f64..50.0, 1.0f64..1e4, coeff, power).prop_map(|(t, c, b, p)| Edge::bpr(1, 2, t, c, b, p))
}

/// Edges with flows between 1% and 300% of capacity.
fn arb_loaded() -> impl Strategy<Value = (Network, Vec<f64>)> {
    prop::collection::vec((arb_edge(), 0.01f64..3.0), 1..12).prop_map(|v| {
        let flows = v.iter().map(|(e, r)| e.capacity * r).collect();
        let edges = v.into_iter().map(|(e, _)| e).collect();
        (Network::new(2, 2, 1, edges).unwrap(), flows)
    })
}

/// Relative tolerance plus the rounding noise of differencing costs of size `tau`.
fn hessian_tol(h: f64, tau: f64, step: f64) -> f64 {
    1e-5 * h.abs() + 4.0 * f64::EPSILON * tau.abs() / step
}

fn perturbed(f: &[f64], e: usize, delta: f64) -> Vec<f64> {
    let mut g = f.to_vec();
    g[e] += delta;
    g
}

proptest! {
    #[test]
    fn costs_are_the_potential_gradient((net, f) in arb_loaded(), pick in any::<prop::sample::Index>()) {
        let e = pick.index(f.len());
        let h = 1e-4 * f[e].max(1.0);
        let fd = (potential(&net, &perturbed(&f, e, h)).unwrap()
            - potential(&net, &perturbed(&f, e, -h)).unwrap()) / (2.0 * h);
        let tau = edge_costs(&net, &f).unwrap()[e];
        prop_assert!(common::rel_err(fd, tau) <= 1e-6, "fd {fd} tau {tau}");
    }

    #[test]
    fn hessian_is_the_cost_derivative((net, f) in arb_loaded(), pick in any::<prop::sample::Index>()) {
        let e = pick.index(f.len());
        let h = 1e-3 * f[e];
        let tau = edge_costs(&net, &f).unwrap()[e];
        let fd = (edge_costs(&net, &perturbed(&f, e, h)).unwrap()[e]
            - edge_costs(&net, &perturbed(&f, e, -h)).unwrap()[e]) / (2.0 * h);
        let hd = hessian_diag(&net, &f).unwrap()[e];
        prop_assert!((fd - hd).abs() <= hessian_tol(hd, tau, h), "fd {fd} h {hd}");
    }

    #[test]
    fn potential_is_convex_on_segments(
        (net, f) in arb_loaded(),
        scale in prop::collection::vec(0.0f64..3.0, 12),
        lambda in 0.0f64..1.0,
    ) {
        let g: Vec<f64> = f.iter().zip(&scale).map(|(x, s)| x * s).collect();
        let mid: Vec<f64> = f.iter().zip(&g).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let pf = potential(&net, &f).unwrap();
        let pg = potential(&net, &g).unwrap();
        let pm = potential(&net, &mid).unwrap();
        prop_assert!(pm <= lambda * pf + (1.0 - lambda) * pg + 1e-9 * pf.abs());
    }

    #[test]
    fn costs_are_monotone((net, f) in arb_loaded(), extra in prop::collection::vec(0.0f64..1e3, 12)) {
        let g: Vec<f64> = f.iter().zip(&extra).map(|(x, d)| x + d).collect();
        let tf = edge_costs(&net, &f).unwrap();
        let tg = edge_costs(&net, &g).unwrap();
        for (a, b) in tf.iter().zip(tg.iter()) {
            prop_assert!(a <= b);
        }
    }
}

#[test]
fn fixtures_pass_finite_difference_checks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for name in ["diamond", "braess"] {
        let (net, dm) = common::load(name);
        for _ in 0..50 {
            let f: FlowVector = common::random_feasible_flow(&net, &dm, &mut rng);
            let tau = edge_costs(&net, &f).unwrap();
            let hess = hessian_diag(&net, &f).unwrap();
            let e = rng.gen_range(0..net.edge_count());
            let h = 1e-4 * f[e].max(1.0);
            let up = perturbed(&f, e, h);
            let down = perturbed(&f, e, -h);
            if down[e] < 0.0 {
                continue;
            }
            let fd = (potential(&net, &up).unwrap() - potential(&net, &down).unwrap()) / (2.0 * h);
            assert!(common::rel_err(fd, tau[e]) <= 1e-6, "{name} edge {e}");
            if f[e] <= 0.0 {
                continue;
            }
            let h2 = 1e-3 * f[e];
            let fd2 = (edge_costs(&net, &perturbed(&f, e, h2)).unwrap()[e]
                - edge_costs(&net, &perturbed(&f, e, -h2)).unwrap()[e])
                / (2.0 * h2);
            assert!(
                (fd2 - hess[e]).abs() <= hessian_tol(hess[e], tau[e], h2),
                "{name} edge {e}: {fd2} vs {}",
                hess[e]
            );
        }
    }
}

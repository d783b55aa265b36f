use duplex_dof::dof::{self, PowerCoupling};
use duplex_dof::mimo::{ergodic_rate, McConfig};
use duplex_dof::model::{antenna_allocation, fd_splits, residual_si_power, sinr, DuplexMode, LinkBudget, SiParams};
use duplex_dof::region::{DofPoint, DofRegion};
use duplex_dof::search::{convex_hull, grid_maximin, region_contains, GridSpec};
use proptest::prelude::*;

const AC: DuplexMode = DuplexMode::AntennaConservedFD;
const RC: DuplexMode = DuplexMode::RfChainConservedFD;
const LAMBDAS: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 0.9, 1.0];

fn mode() -> impl Strategy<Value = DuplexMode> {
    prop_oneof![Just(AC), Just(RC)]
}

fn is_valid_region(r: &DofRegion) -> bool {
    let v = r.vertices();
    let first_quadrant = v.iter().all(|p| p.d_ab >= 0.0 && p.d_ba >= 0.0);
    let has_origin = r.contains(DofPoint::ORIGIN, 1e-12);
    let ccw = v.len() < 3
        || (0..v.len()).all(|i| {
            let (a, b, c) = (v[i], v[(i + 1) % v.len()], v[(i + 2) % v.len()]);
            (b.d_ab - a.d_ab) * (c.d_ba - a.d_ba) - (b.d_ba - a.d_ba) * (c.d_ab - a.d_ab) > -1e-12
        });
    first_quadrant && has_origin && ccw && convex_hull(v) == *r
}

proptest! {
    #[test]
    fn sinr_monotone(p in 0.0f64..1e6, dp in 1e-3f64..1e3, k in 0.1f64..10.0, n in 0.1f64..10.0, i in 0.0f64..10.0) {
        let base = sinr(&LinkBudget::new(p, k, 1.0).unwrap(), n, i);
        prop_assert!(sinr(&LinkBudget::new(p + dp, k, 1.0).unwrap(), n, i) > base || p + dp == p);
        prop_assert!(sinr(&LinkBudget::new(p, k * 2.0, 1.0).unwrap(), n, i) <= base);
        prop_assert!(sinr(&LinkBudget::new(p, k, 1.0).unwrap(), n * 2.0, i) <= base);
        prop_assert!(sinr(&LinkBudget::new(p, k, 1.0).unwrap(), n, i + 1.0) <= base);
    }

    #[test]
    fn full_cancellation_si_is_constant(p in 0.0f64..1e9, beta in 0.1f64..10.0, mu in 0.1f64..10.0) {
        let si = SiParams::new(1.0, beta, mu).unwrap();
        prop_assert!((residual_si_power(p, &si) - 1.0 / (beta * mu)).abs() < 1e-12);
    }

    #[test]
    fn antenna_split_budgets(n in 2usize..12, m in mode(), pick in 0usize..100) {
        let rx = 1 + pick % (n - 1);
        let s = antenna_allocation(n, m, Some(rx)).unwrap();
        match m {
            AC => prop_assert!(s.tx == n - rx && s.total_antennas_used == n),
            _ => prop_assert!(s.tx == 2 * n - 2 * rx && s.total_antennas_used == 2 * n - rx),
        }
        prop_assert!(antenna_allocation(n, m, Some(n)).is_err());
        prop_assert!(antenna_allocation(n, m, Some(0)).is_err());
    }

    #[test]
    fn two_way_point_clamps(n_a in 2usize..7, n_b in 2usize..7, m in mode(), lambda in 0.0f64..=1.0,
                            gamma in 0.01f64..10.0, ia in 0usize..10, ib in 0usize..10) {
        let sa = antenna_allocation(n_a, m, Some(1 + ia % (n_a - 1))).unwrap();
        let sb = antenna_allocation(n_b, m, Some(1 + ib % (n_b - 1))).unwrap();
        let si = SiParams::with_lambda(lambda).unwrap();
        let p = dof::twoway_fd_point(n_a, n_b, m, &sa, &sb, &PowerCoupling::new(gamma).unwrap(), &si).unwrap();
        let c = 1.0 - lambda;
        if 1.0 - gamma * c <= 0.0 { prop_assert_eq!(p.d_ab, 0.0); }
        if 1.0 - c / gamma <= 0.0 { prop_assert_eq!(p.d_ba, 0.0); }
        prop_assert!(p.d_ab >= 0.0 && p.d_ba >= 0.0);
        // the boundary is a sampled curve; allow the chord sagitta of the gamma grid
        prop_assert!(dof::twoway_fd_region(n_a, n_b, m, &si).unwrap().contains(p, 1e-5));
    }

    #[test]
    fn regions_are_valid(n_a in 1usize..7, n_b in 1usize..7, n_r in 1usize..9, m in mode(), li in 0usize..6) {
        let si = SiParams::with_lambda(LAMBDAS[li]).unwrap();
        prop_assert!(is_valid_region(&dof::twoway_hd_region(n_a, n_b).unwrap()));
        prop_assert!(is_valid_region(&dof::twoway_fd_region(n_a, n_b, m, &si).unwrap()));
        prop_assert!(is_valid_region(&dof::twr_fd_region(n_a, n_r, n_b, m, &si).unwrap()));
        let (upper, mac_bc) = dof::twr_hd_regions(n_a, n_r).unwrap();
        prop_assert!(is_valid_region(&upper) && is_valid_region(&mac_bc));
    }

    #[test]
    fn hull_idempotent_and_monotone(pts in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 0..12),
                                    extra in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 0..6)) {
        let s: Vec<DofPoint> = pts.iter().map(|&(a, b)| DofPoint::new(a, b).unwrap()).collect();
        let mut t = s.clone();
        t.extend(extra.iter().map(|&(a, b)| DofPoint::new(a, b).unwrap()));
        let hs = convex_hull(&s);
        let ht = convex_hull(&t);
        prop_assert_eq!(convex_hull(hs.vertices()), hs.clone());
        for v in hs.vertices() {
            prop_assert!(region_contains(&ht, *v, 1e-9));
        }
    }

    #[test]
    fn fd_relay_rate_grows_with_cancellation(seed in 0u64..1000) {
        let cfg = McConfig::new(200, seed, 64).unwrap();
        let spec = dof::ScenarioSpec::TwoHop { n_a: 2, n_r: 4, n_b: 2 };
        let p = 1e4;
        let relay = LinkBudget::normalized(p).unwrap().with_max_relay_power(p).unwrap();
        let b = duplex_dof::rates::NodeBudgets::relayed(LinkBudget::normalized(p).unwrap(), relay, LinkBudget::normalized(p).unwrap());
        let low = duplex_dof::rates::twohop_fd_rate(&spec, AC, &b, &SiParams::with_lambda(0.5).unwrap(), &cfg).unwrap();
        let high = duplex_dof::rates::twohop_fd_rate(&spec, AC, &b, &SiParams::with_lambda(1.0).unwrap(), &cfg).unwrap();
        prop_assert!(high.r_ab.mean_rate >= low.r_ab.mean_rate - 1e-12);
    }
}

#[test]
fn fd_relay_dof_matches_grid_for_all_triples() {
    for n_a in 1..=6 {
        for n_r in 2..=6 {
            for n_b in 1..=6 {
                for lambda in LAMBDAS {
                    for m in [AC, RC] {
                        let c = 1.0 - lambda;
                        let grid =
                            GridSpec::new(2, 2001, 1.0).unwrap().with_exact_points([(0.0, 1.0 / (2.0 - lambda))]);
                        let t_of = |r: usize| if m == RC { 2 * n_r - 2 * r } else { n_r - r };
                        let objective = |_t: f64, g: f64, r: usize| {
                            ((1.0 - g * c) * n_a.min(r) as f64).min(g * t_of(r).min(n_b) as f64)
                        };
                        let oracle = grid_maximin(objective, Some(n_r), &grid).unwrap().value;
                        let got =
                            dof::twohop_fd_dof(n_a, n_r, n_b, m, &SiParams::with_lambda(lambda).unwrap()).unwrap().dof;
                        // one gamma step times the largest slope of the objective
                        let step: f64 = 12.0 / 2000.0;
                        assert!(
                            got >= oracle - 1e-12 && got - oracle <= step.max(1e-3),
                            "({n_a},{n_r},{n_b}) {m} λ={lambda}: {got} vs {oracle}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn fd_relay_dof_is_attained_by_reported_split() {
    for n_a in 1..=6 {
        for n_r in 2..=8 {
            for n_b in 1..=6 {
                for lambda in LAMBDAS {
                    for m in [AC, RC] {
                        let d = dof::twohop_fd_dof(n_a, n_r, n_b, m, &SiParams::with_lambda(lambda).unwrap()).unwrap();
                        let (r, t, g) = (d.r_opt.unwrap(), d.t_opt.unwrap(), d.gamma_opt.unwrap());
                        assert!(fd_splits(n_r, m).iter().any(|s| s.rx == r && s.tx == t));
                        let value = ((1.0 - g * (1.0 - lambda)) * n_a.min(r) as f64).min(g * t.min(n_b) as f64);
                        assert!((value - d.dof).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn hd_relay_cases_agree_on_the_diagonal() {
    for n in 1..=12 {
        let d = dof::twohop_hd_dof(n, n, n).unwrap();
        let x = n as f64;
        // relay bottleneck vs the three ratio forms, which coincide at N_R = N_A = N_B
        for (tau, value) in [(0.5, x / 2.0), (x / (x + x), x * x / (x + x))] {
            assert!((d.tau_opt - tau).abs() < 1e-12 && (d.dof - value).abs() < 1e-12);
        }
    }
}

#[test]
fn crossover_matches_direct_comparison() {
    for n in 1..=6 {
        for lambda in LAMBDAS {
            let si = SiParams::with_lambda(lambda).unwrap();
            for m in [AC, RC] {
                let x = dof::twohop_crossover(n, m, &si).unwrap();
                for n_r in 2..=16 {
                    let wins = dof::twohop_fd_beats_hd(n, n_r, m, &si).unwrap();
                    let predicted = x.direct.is_some_and(|d| n_r >= d) || x.early_wins.contains(&n_r);
                    assert_eq!(wins, predicted, "N={n} N_R={n_r} {m} λ={lambda}");
                }
            }
        }
    }
}

#[test]
fn ac_two_way_sum_theorem() {
    for n_a in 1..=6 {
        for n_b in 1..=6 {
            for lambda in [0.0, 0.25, 0.5, 0.75, 0.9] {
                let r = dof::prop1_check(n_a, n_b, &SiParams::with_lambda(lambda).unwrap()).unwrap();
                assert!(r.holds && r.max_interior_sum <= r.bound + 1e-6, "({n_a},{n_b}) λ={lambda}: {r:?}");
            }
        }
    }
}

#[test]
fn rc_two_way_witness_theorem() {
    for n_a in [3, 6] {
        for n_b in [3, 6] {
            for lambda in [0.8, 0.9, 1.0] {
                let w = dof::prop2_witness(n_a, n_b, &SiParams::with_lambda(lambda).unwrap());
                assert!(w.is_some_and(|p| p.sum() > n_a.min(n_b) as f64), "({n_a},{n_b}) λ={lambda}");
            }
        }
    }
}

#[test]
fn monte_carlo_independent_of_thread_count() {
    let cfg = McConfig::new(3000, 5, 256).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ergodic_rate(3, 2, 100.0, &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

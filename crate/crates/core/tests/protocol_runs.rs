use drpp_core::protocol::{run_drpp, threshold_scan, verdict_flip, DrppConfig, Status};
use drpp_core::{Family, Graph};

fn fam(s: &str) -> (Graph, Family) {
    let f: Family = s.parse().unwrap();
    (f.build().unwrap(), f)
}

#[test]
fn path_of_three_at_ten_percent() {
    let (g, f) = fam("path:3");
    let res = run_drpp(&g, &DrppConfig::new(0.1, 10_000, 7), Some(&f)).unwrap();
    assert_eq!(res.status, Status::Ok);
    assert!(res.fidelity >= 0.99, "{res:?}");
    let expect = res.expected_fidelity.unwrap();
    assert!(expect >= 0.99);
    assert!(res.ci95[0] <= expect && expect <= res.ci95[1], "{res:?}");
    assert!(res.copies_consumed >= res.n_geo_plan as f64);
}

#[test]
fn fidelity_rises_with_pair_target() {
    let (g, f) = fam("star:4");
    let mut last = 0.0;
    for target in [0.9, 0.99, 0.999] {
        let mut cfg = DrppConfig::new(0.2, 4_000, 3);
        cfg.pair_target = target;
        let res = run_drpp(&g, &cfg, Some(&f)).unwrap();
        let expect = res.expected_fidelity.unwrap();
        assert!(expect > last, "target {target}: {expect} after {last}");
        assert!(res.ci95[0] <= expect && expect <= res.ci95[1]);
        last = expect;
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let (g, f) = fam("cycle:5");
    let cfg = DrppConfig::new(0.15, 3_000, 42);
    let run = |workers: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap()
            .install(|| run_drpp(&g, &cfg, Some(&f)).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    let mut other = cfg.clone();
    other.seed = 43;
    assert_ne!(
        one.fidelity,
        run_drpp(&g, &other, Some(&f)).unwrap().fidelity
    );
}

#[test]
fn scan_flips_between_purifiable_and_not() {
    let (g, f) = fam("path:3");
    let rows = threshold_scan(
        &g,
        &[0.0, 0.2, 0.28, 0.3, 0.4],
        &DrppConfig::new(0.0, 2_000, 1),
        Some(&f),
    )
    .unwrap();
    let verdicts: Vec<bool> = rows.iter().map(|r| r.purifiable).collect();
    assert_eq!(verdicts, vec![true, true, true, false, false]);
    assert_eq!(verdict_flip(&rows), Some((0.28, 0.3)));
    assert_eq!(rows[0].temperature_over_coupling, Some(0.0));
}

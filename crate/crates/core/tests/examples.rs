//! Every runnable example, executed as a test.

#[path = "../examples/quickstart.rs"]
mod quickstart;
#[path = "../examples/cost_illustration.rs"]
mod cost_illustration;
#[path = "../examples/compare_protocols.rs"]
mod compare_protocols;
#[path = "../examples/grad_check.rs"]
mod grad_check;
#[path = "../examples/robustness.rs"]
mod robustness;
#[path = "../examples/grid_search.rs"]
mod grid_search;
#[path = "../examples/bundle_io.rs"]
mod bundle_io;
#[path = "../examples/figures.rs"]
mod figures;

#[test]
fn quickstart_learns() {
    let r = quickstart::run_example().unwrap();
    assert!(r.micro_f1_mean > 0.5, "accuracy {}", r.micro_f1_mean);
}

#[test]
fn cost_illustration_matches_closed_form() {
    let (round, total) = cost_illustration::run_example().unwrap();
    assert_eq!(round, 20_480_000);
    assert_eq!(total, 8_192_000_000);
}

#[test]
fn compare_protocols_shows_a_large_gap() {
    assert!(compare_protocols::run_example().unwrap() > 1e3);
}

#[test]
fn grad_check_agrees() {
    assert!(grad_check::run_example().unwrap() < 1e-4);
}

#[test]
fn robustness_runs() {
    let (full, half, flaky) = robustness::run_example().unwrap();
    for acc in [full, half, flaky] {
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn grid_search_returns_the_minimum() {
    let r = grid_search::run_example().unwrap();
    assert_eq!(r.evaluated.len(), 4);
    assert!(r.evaluated.iter().all(|p| r.best_point.val_loss <= p.val_loss));
}

#[test]
fn bundle_io_round_trips() {
    assert!(bundle_io::run_example().unwrap());
}

#[test]
fn figures_are_written() {
    let paths = figures::run_example().unwrap();
    assert_eq!(paths.len(), 4);
    for p in paths {
        assert!(std::fs::read_to_string(p).unwrap().starts_with("Sno,node\n"));
    }
}

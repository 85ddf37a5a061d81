//! Acceptance suite at full size. Each test prints one PASS/FAIL line and
//! fails when its criterion does. Expect roughly a quarter hour on one core;
//! the simulator suites are shared between criteria 5, 6, 7 and 10.

use crystal::harness::acceptance::{self, Options};

fn check(id: u8) {
    let c = acceptance::run(id, &Options::default());
    println!("{c}");
    for k in &c.checks {
        println!("    {k}");
    }
    assert!(c.pass, "criterion {id} failed: {}", c.summary());
}

#[test]
fn criterion_01_committee_sizing() {
    check(1);
}

#[test]
fn criterion_02_withholding_probabilities() {
    check(2);
}

#[test]
fn criterion_03_double_spend_table() {
    check(3);
}

#[test]
fn criterion_04_selfish_mining() {
    check(4);
}

#[test]
fn criterion_05_withholding_impossible() {
    check(5);
}

#[test]
fn criterion_06_safety() {
    check(6);
}

#[test]
fn criterion_07_honest_progress() {
    check(7);
}

#[test]
fn criterion_08_offline_voters() {
    check(8);
}

#[test]
fn criterion_09_certificate_overhead() {
    check(9);
}

#[test]
fn criterion_10_determinism() {
    check(10);
}

mod common;

use common::lag1_autocorrelation;
use rql::model::{ExpStream, Parameters, Streams};
use rql::stats::ks_distance;

#[test]
fn exponential_draws_have_the_right_law() {
    let n = 100_000;
    for (rate, stream) in [(0.5, 0u64), (2.0, 1)] {
        let mut s = ExpStream::new(77, 3, stream, rate);
        let xs: Vec<f64> = (0..n).map(|_| s.next_draw()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // sd of the mean is 1 / (rate sqrt(n))
        assert!((mean * rate - 1.0).abs() < 5.0 / (n as f64).sqrt(), "mean {mean}");
        let ks = ks_distance(&xs, &|x: f64| 1.0 - (-rate * x).exp());
        assert!(ks < 0.01, "ks {ks}");
        let r1 = lag1_autocorrelation(&xs);
        assert!(r1.abs() < 4.0 / (n as f64).sqrt(), "lag-1 {r1}");
    }
}

#[test]
fn streams_are_independent() {
    let p = Parameters::new(1.0, 1.0, 1.0).unwrap();
    let s = Streams::generate(&p, 50_000, 50_000, 5).unwrap();
    let (a, b) = (s.interarrivals(), s.service_durations());
    let (ma, mb) = (a.iter().sum::<f64>() / 5e4, b.iter().sum::<f64>() / 5e4);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / 5e4;
    assert!(cov.abs() < 4.0 / 5e4f64.sqrt());
}

#[test]
fn replications_are_distinct_and_reproducible() {
    let p = Parameters::new(1.0, 2.0, 1.0).unwrap();
    let a = Streams::for_replication(&p, 9, 0, 10, 10).unwrap();
    let b = Streams::for_replication(&p, 9, 1, 10, 10).unwrap();
    let c = Streams::for_replication(&p, 9, 0, 10, 10).unwrap();
    assert_ne!(a.interarrivals(), b.interarrivals());
    assert_eq!(a.interarrivals(), c.interarrivals());
    assert!(a
        .interarrivals()
        .iter()
        .chain(a.service_durations())
        .all(|&x| x > 0.0 && x.is_finite()));
}

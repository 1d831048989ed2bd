use rdsnet_core::estimators::Measure;
use rdsnet_core::{Attribute, RdsConfig, StatTerm};
use rdsnet_ergm::{power_analysis, AttributeSpec, ErgmSpec, PowerOptions};

fn population(n: usize) -> ErgmSpec {
    // mean degree about 8
    let p = 8.0 / (n - 1) as f64;
    ErgmSpec::new(n, vec![StatTerm::Edges], vec![(p / (1.0 - p)).ln()])
        .with_attribute(AttributeSpec::new("veteran", &[("1", 0.3), ("0", 0.7)]))
}

fn veteran() -> Measure {
    Measure::Indicator {
        attribute: Attribute::Veteran,
        level: "1".into(),
    }
}

#[test]
fn needs_fifty_replicates() {
    let opts = PowerOptions {
        replicates: 49,
        ..Default::default()
    };
    assert!(power_analysis(&population(100), &[RdsConfig::default()], &veteran(), None, &opts).is_err());
}

#[test]
fn census_has_no_width_and_little_bias() {
    let n = 300;
    let census = RdsConfig {
        n_seeds: n,
        target_sample: n,
        ..RdsConfig::default()
    };
    let opts = PowerOptions {
        replicates: 50,
        populations: 50,
        bootstrap_replicates: 100,
        rng_seed: 2,
        ..Default::default()
    };
    let rows = power_analysis(&population(n), &[census], &veteran(), None, &opts).unwrap();
    let row = &rows[0];
    assert_eq!(row.estimates, 50);
    assert_eq!(row.ci_width, Some(0.0));
    assert!(row.bias.unwrap().abs() < 0.005, "{row:?}");
    assert_eq!(row.shortfall_rate, 0.0);
}

#[test]
fn unreachable_targets_are_flagged() {
    // density so low that recruitment dies out
    let spec = ErgmSpec::new(400, vec![StatTerm::Edges], vec![-9.0])
        .with_attribute(AttributeSpec::new("veteran", &[("1", 0.3), ("0", 0.7)]));
    let cfg = RdsConfig {
        target_sample: 300,
        ..RdsConfig::default()
    };
    let opts = PowerOptions {
        replicates: 50,
        bootstrap_replicates: 100,
        ..Default::default()
    };
    let rows = power_analysis(&spec, &[cfg], &veteran(), Some(0.3), &opts).unwrap();
    assert!(rows[0].flagged && rows[0].shortfall_rate > 0.5);
}

#[test]
fn wider_samples_give_narrower_intervals() {
    let grid: Vec<RdsConfig> = [100, 400]
        .iter()
        .map(|&t| RdsConfig {
            target_sample: t,
            ..RdsConfig::default()
        })
        .collect();
    let opts = PowerOptions {
        replicates: 50,
        bootstrap_replicates: 100,
        rng_seed: 4,
        ..Default::default()
    };
    let rows = power_analysis(&population(1000), &grid, &veteran(), None, &opts).unwrap();
    assert!(rows[1].ci_width.unwrap() < rows[0].ci_width.unwrap(), "{rows:?}");
    assert_eq!(
        rows,
        power_analysis(&population(1000), &grid, &veteran(), None, &opts).unwrap()
    );
}

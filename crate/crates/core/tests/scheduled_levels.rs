//! The structural and level-shift checks on a window where levels above 1
//! occur, so neither check is vacuous.

use corona_witness::farey_walk::Variant;
use corona_witness::zeta_builder::{
    build_levels, check_level_shift, check_structure, epsilon_scan, LevelConfig, WalkSchedule,
};

#[test]
fn scheduled_window_satisfies_structure_and_shift() {
    let mut config = LevelConfig::new(256, 4, Variant::Symmetrized);
    config.schedule = WalkSchedule::Quadratic(4);
    let table = build_levels(config).unwrap();
    let hist = table.interior_histogram();
    println!("interior levels {hist:?}");
    assert!(hist.keys().any(|&l| l > 1));

    let structure = check_structure(&table);
    println!(
        "structure: {} pairs, {} triples, {} violations",
        structure.pairs,
        structure.triples,
        structure.violations.len()
    );
    assert!(structure.pairs > 0);
    assert!(
        structure.violations.is_empty(),
        "{:?}",
        structure.violations.first()
    );

    let shift = check_level_shift(&table);
    println!(
        "level shift: {} checks, {} violations",
        shift.checked,
        shift.violations.len()
    );
    assert!(shift.checked > 0);
    assert!(
        shift.violations.is_empty(),
        "{:?}",
        shift.violations.first()
    );

    let scan = epsilon_scan(&table);
    assert_eq!(scan.skipped, 0);
    for c in &scan.cohorts {
        println!(
            "cohort {} count {} min {} median {} max {}",
            c.level, c.count, c.min, c.median, c.max
        );
    }
}

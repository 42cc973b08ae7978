use std::path::Path;

use splitlora::{MappingTable, Scenario, Strictness};

fn scenarios_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios"))
}

#[test]
fn shipped_fleet_matches_builtin() {
    let loaded =
        Scenario::load(&scenarios_dir().join("edge_fleet.json"), Strictness::Strict).unwrap();
    assert_eq!(loaded, Scenario::builtin());
    loaded.validate().unwrap();
}

#[test]
fn shipped_table_matches_default() {
    let table = MappingTable::from_csv_path(&scenarios_dir().join("cqi_64qam.csv")).unwrap();
    assert_eq!(table, MappingTable::default());
}

#[test]
fn scenario_can_reference_the_shipped_table() {
    let text = std::fs::read_to_string(scenarios_dir().join("edge_fleet.json")).unwrap();
    let with_table = text.replacen(
        "\"seed\": 42,",
        "\"seed\": 42,\n  \"mapping_table\": \"cqi_64qam.csv\",",
        1,
    );
    let scenario =
        Scenario::from_json_str(&with_table, scenarios_dir(), Strictness::Strict).unwrap();
    assert_eq!(scenario.table(), &MappingTable::default());
}

//! Scenario JSON. Fields mirror [`Scenario`]; unknown keys are rejected and
//! the scenario is validated on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::sim::Scenario;
use crate::Result;

pub fn save_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, scenario)?;
    w.write_all(b"\n")?;
    Ok(w.flush()?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let s: Scenario = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_scenario_suite;

    #[test]
    fn round_trip_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        for kind in ["static-room", "intersection"] {
            let s = generate_scenario_suite(kind, 1, 3).unwrap().remove(0);
            save_scenario(&path, &s).unwrap();
            assert_eq!(load_scenario(&path).unwrap(), s);
        }
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replacen('{', "{\"extra\": 1,", 1)).unwrap();
        assert!(load_scenario(&path).is_err());
    }
}

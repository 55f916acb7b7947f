//! Every file format on disk, written from a generated scenario and read
//! back.

use std::fs::File;
use std::io::BufWriter;

use occplan::grid::rasterize_ground_truth;
use occplan::io::bank_file::{load_bank, save_bank};
use occplan::io::grid_file::{load_costmap, load_occupancy, save_costmap, save_occupancy};
use occplan::io::scenario_file::{load_scenario, save_scenario};
use occplan::io::sweep_csv::{load_sweep_dir, save_sweep};
use occplan::io::trajectory_csv::{read_past, read_trajectory, write_past, write_trajectory};
use occplan::plan::{BankConfig, CostMap, TrajectoryBank};
use occplan::sim::{
    expert_trajectory, generate_scenario_suite, scenario_kind_names, simulate_sweep,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scenario_files_round_trip(kind in 0..scenario_kind_names().len(), seed in any::<u64>()) {
        let kind = scenario_kind_names()[kind];
        let s = generate_scenario_suite(kind, 1, seed).unwrap().remove(0);
        let dir = tempfile::tempdir().unwrap();

        let path = dir.path().join("scenario.json");
        save_scenario(&path, &s).unwrap();
        prop_assert_eq!(&load_scenario(&path).unwrap(), &s);

        let sweeps_dir = dir.path().join("sweeps");
        std::fs::create_dir(&sweeps_dir).unwrap();
        let sweeps: Vec<_> = (s.first_frame()..=s.last_frame()).map(|f| simulate_sweep(&s, f)).collect();
        for sw in &sweeps {
            save_sweep(&sweeps_dir, sw).unwrap();
        }
        prop_assert_eq!(&load_sweep_dir(&sweeps_dir).unwrap(), &sweeps);

        let expert = expert_trajectory(&s);
        let path = dir.path().join("expert.csv");
        write_trajectory(BufWriter::new(File::create(&path).unwrap()), &expert).unwrap();
        prop_assert_eq!(&read_trajectory(File::open(&path).unwrap()).unwrap(), &expert);

        let past = s.past_track();
        let path = dir.path().join("past.csv");
        write_past(BufWriter::new(File::create(&path).unwrap()), &past).unwrap();
        prop_assert_eq!(&read_past(File::open(&path).unwrap()).unwrap(), &past);

        // Probabilities are stored as f32; a hard grid is exact.
        let gt = rasterize_ground_truth(&s, &s.grid);
        let path = dir.path().join("gt.rswg");
        save_occupancy(&path, &gt).unwrap();
        let back = load_occupancy(&path).unwrap();
        prop_assert_eq!(back.geometry(), gt.geometry());
        prop_assert_eq!(back.hard(), gt.hard());
        prop_assert_eq!(back.probabilities(), gt.probabilities());

        let values = (0..s.grid.voxel_count()).map(|k| (k % 97) as f64 * 0.25 - 3.0).collect();
        let cost = CostMap::new(s.grid, values).unwrap();
        let path = dir.path().join("cost.rswg");
        save_costmap(&path, &cost).unwrap();
        prop_assert_eq!(&load_costmap(&path).unwrap(), &cost);

        let bank = TrajectoryBank::build(&[(past, expert)], &BankConfig::default(), s.frame_interval()).unwrap();
        let path = dir.path().join("bank.bin");
        save_bank(&path, &bank).unwrap();
        prop_assert_eq!(&load_bank(&path).unwrap(), &bank);
    }
}

//! Runs the bundled reference scenario under every controller and prints
//! the comparison table.

use slicelab::baselines::ControllerKind;
use slicelab::harness::{compare, ScenarioConfig};

fn main() {
    let table = compare(&ScenarioConfig::reference(), &ControllerKind::ALL)
        .expect("reference scenario runs");
    print!("{}", table.to_pretty());
}

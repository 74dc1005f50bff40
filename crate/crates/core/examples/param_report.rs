//! Trainable-parameter counts of every model under the default config.

use mgmu::pipeline::{cmd_params, RunConfig};

fn main() {
    for (name, n) in cmd_params(&RunConfig::default()) {
        println!("{name:<18} {n:>9}");
    }
}

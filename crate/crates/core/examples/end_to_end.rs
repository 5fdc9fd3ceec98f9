//! A complete experiment from a config string: three repeats written to disk,
//! then compared against a second configuration without phase 2.

use cpdp_bilevel::experiment::{compare_dirs, run, RunConfig};
use cpdp_bilevel::metrics::MetricId;

const CONFIG: &str = r#"
synth_projects = 4
synth_rows = 300
synth_features = 8
synth_shift = 2.5
seed = 100
repeats = 3
phase1_evaluations = 60
phase2_evaluations = 20
lower_evaluations = 4
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("cpdp-end-to-end");
    let with_phase2 = RunConfig::from_toml(CONFIG, "inline")?;
    let without_phase2 = RunConfig { phase2_evaluations: 0, ..with_phase2.clone() };

    let dirs = [root.join("full"), root.join("phase1-only")];
    for (cfg, dir) in [&with_phase2, &without_phase2].into_iter().zip(&dirs) {
        for o in run(cfg, dir, true)? {
            let best = o.result.selected().expect("non-empty archive");
            println!(
                "{}: seed {} best {} test auc {:.4} ({:.1}s)",
                dir.display(),
                o.result.metadata.seed,
                best.pipeline_id,
                best.metrics.auc,
                o.timing.wall_seconds
            );
        }
    }
    print!("\n{}", compare_dirs(&dirs, MetricId::Auc, 0.05)?.render());
    Ok(())
}

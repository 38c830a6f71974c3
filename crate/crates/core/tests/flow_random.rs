//! Randomized stateful exercise of the flow rules with full recounts after
//! every operation (a deeper, smaller-scale sibling of the acceptance
//! suite's bulk run).

mod common;

use common::FlowHarness;
use crowdnorm_core::Project;

#[test]
fn random_flow_small_scale_with_recounts() {
    for seed in [11u64, 29, 73] {
        let mut harness = FlowHarness::new(seed, 10, 12);
        for step in 0..2_000 {
            harness.step();
            if step % 200 == 0 {
                harness.full_check();
            }
        }
        harness.full_check();
        assert!(
            harness.violations.is_empty(),
            "seed {seed}: {:?}",
            harness.violations
        );
        assert!(harness.accepted_events > 500, "seed {seed} was too quiet");

        // The accumulated log replays to the identical state.
        let replayed = Project::replay(harness.project.log()).unwrap();
        assert_eq!(replayed, harness.project);
    }
}

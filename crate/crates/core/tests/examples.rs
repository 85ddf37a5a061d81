//! Every example runs to completion.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::run().expect("example runs");
        }
    };
}

example!(committee_sizing, "../examples/committee_sizing.rs");
example!(vrf_election, "../examples/vrf_election.rs");
example!(network_simulation, "../examples/network_simulation.rs");
example!(selfish_mining, "../examples/selfish_mining.rs");
example!(double_spend, "../examples/double_spend.rs");
example!(withholding, "../examples/withholding.rs");
example!(offline_voters, "../examples/offline_voters.rs");
example!(experiment_spec, "../examples/experiment_spec.rs");
example!(difficulty_retargeting, "../examples/difficulty_retargeting.rs");
example!(quick_verify, "../examples/quick_verify.rs");

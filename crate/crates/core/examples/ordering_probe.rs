//! Scratch probe: condition ordering on a few subjects (not part of the build).
use gestlab_core::architectures::ArchitectureKind;
use gestlab_core::classifiers::{Algorithm, ClassifierParams};
use gestlab_core::dataset::split_session;
use gestlab_core::evaluation::{run_condition, Condition, SynthesisSpec};
use gestlab_core::simgen::{generate_cohort, SimulatorConfig};
use std::time::Instant;

fn main() {
    let config = SimulatorConfig::default();
    let t0 = Instant::now();
    let cohort = generate_cohort(&config, 3).unwrap();
    eprintln!("cohort gen: {:?}", t0.elapsed());
    let params = ClassifierParams::default();

    for session in &cohort {
        let split = split_session(session).unwrap();
        eprintln!(
            "subject {}: train {} special {} test {}",
            session.subject_id, split.train.len(), split.special.len(), split.test.len()
        );
        for (name, condition) in [
            ("lower", Condition::Lower),
            ("aug  ", Condition::Augmented { synthesis: SynthesisSpec::AllPairs, augment: None }),
            ("upper", Condition::Upper),
        ] {
            let t = Instant::now();
            let report = run_condition(&split, &condition, ArchitectureKind::Parallel, Algorithm::Mlp, &params, 42).unwrap();
            eprintln!(
                "  {name}: singles {:.3} doubles {:.3} overall {:.3}  ({:?})",
                report.singles_acc, report.doubles_acc, report.overall_acc, t.elapsed()
            );
        }
    }
}

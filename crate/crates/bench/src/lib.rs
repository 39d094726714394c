//! Fixtures shared by the criterion benches.

use qfeedback::{BlochVector, CoupledState, EstParams, FeedbackLaw, PhysParams, SdeConfig, TargetState};

pub struct Fixture {
    pub phys: PhysParams,
    pub est: EstParams,
    pub law: FeedbackLaw,
    pub ic: CoupledState,
    pub cfg: SdeConfig,
}

/// The mismatched-filter scenario driven toward the excited pole.
pub fn fig1(t_final: f64) -> Fixture {
    Fixture {
        phys: PhysParams::new(0.3, 0.3, 1.3).expect("valid"),
        est: EstParams::new(0.5, 0.5, 1.5).expect("valid"),
        law: FeedbackLaw::power(TargetState::Excited, 10.0, 2.0),
        ic: CoupledState {
            actual: BlochVector::new_unchecked(1.0, 0.0, 0.0),
            estimate: BlochVector::new_unchecked(0.0, 1.0, 0.0),
        },
        cfg: SdeConfig {
            t_final,
            ..SdeConfig::default()
        },
    }
}

pub mod analysis;
pub mod entanglement;
pub mod error;
pub mod field;
pub mod momentum_reflection;
pub mod quadmath;
pub mod scattering;
pub mod wavepacket;

pub use error::{Error, Result};
pub use analysis::{linear_fit, resonance_table, sweep, LinearFit, SaturationMethod, SweepOutcome, SweepPlan, SweepRecord, SweepSink, SweepVariable};
pub use entanglement::{
    amplitude_matrix, entanglement_at, entanglement_curve, purity, saturated_k, saturation_time, AmplitudeMatrix, EntanglementPoint,
    GridKind, QuadSpec,
};
pub use field::{overlap_f, relative_table, FieldOptions, PartialAmplitudeTable};
pub use momentum_reflection::{asymptotic_point, reflected_amplitude, reflection_purity, Outgoing, ReflectionResult};
pub use scattering::{
    cross_section, find_resonance, phase_shift, time_delay, PotentialWell, ResonanceCriterion, ResonanceInfo, ResonanceSearch,
};
pub use wavepacket::{PacketPair, Particle, Vec3};

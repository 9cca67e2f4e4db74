//! Monte-Carlo exploration of the system semigroup on ∧^k ℝ^d.

mod cone;
mod orbit;
mod pointed;
mod sampling;
mod system;

pub use cone::{cone_from_convex, ConeGenerators, RAY_DUPLICATE, WHOLE_SPACE_PROBE};
pub use orbit::{
    attractor_direction, orbit_directions, search_seeds, OrbitCloud, Provenance, Refinement, Seed, SeedSource,
    ATTRACTOR_CONVERGENCE, MAX_DIRECTION_ERROR, MAX_STEP_NORM, UNDERFLOW_FLOOR,
};
pub use pointed::{
    nonpointedness_search, pointedness, HullTerm, NonPointedCertificate, NonPointedEvidence, Pointedness,
    ANTIPODAL_DELTA,
};
pub use sampling::{sample_control, sample_element, stream_rng, Budget, SPECIAL_TIMES, U_GRID};
pub use system::{inverse_system, ControlModel, Letter, SemigroupWord, SystemSpec};

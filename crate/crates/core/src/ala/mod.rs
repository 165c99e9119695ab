//! Annotation aggregation: consistency filtering against the ER reference
//! labels, EM estimation of annotator reliabilities, reliability-weighted
//! voting, and Cronbach's-alpha consistency reporting.

pub mod aggregate;
pub mod bundle;
pub mod cronbach;
pub mod em;

pub use aggregate::{aggregate_annotations, consistency_report, AnnotationReport, CronbachReport};
pub use bundle::{
    consistency_filter, load_bundles, save_bundles, AnnotationBundle, ConsistencyOutcome,
    ExpertLabel, MACHINE_ANNOTATOR,
};
pub use cronbach::cronbach_alpha;
pub use em::{em_reliability, posterior_step, weighted_vote, ReliabilityModel};

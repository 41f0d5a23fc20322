//! Spectra, exceptional points and skin-effect diagnostics for the
//! non-Hermitian Yao-Lee model and its K, Γ and DMI + field extensions.

pub mod eigen;
pub mod ep;
pub mod error;
pub mod model;
pub mod ribbon;

pub use eigen::{eig, min_singular_value, Spectrum};
pub use ep::{
    classify_degeneracy, ep_closed_form, ep_scan, fermi_arc_trace, skin_criterion, skin_criterion_any,
    ArcTrace, DegeneracyKind, DegeneracyReport, EpList, EpRecord, ScanOptions,
};
pub use error::{EigenError, EpError, ModelError, RibbonError};
pub use model::{
    a_functions, bloch_hamiltonian, closed_form_spectrum, effective_couplings, f_function,
    triangle_test, BlochMatrix, Coupling3, DmiVectors, EnergyScale, Extension, FlavourBondTable,
    MagParams, ModelConfig, Variant,
};
pub use ribbon::{
    build_ribbon, edge_mode_weights, localization_profile, nhse_summary, ribbon_spectrum, sweep, Boundary,
    Classifier, LocalizationClass, LocalizationRecord, NhseSummary, PbcCloud, RibbonSpec, SweepOptions,
    SweepResult,
};

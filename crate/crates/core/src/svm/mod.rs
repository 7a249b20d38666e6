//! Linear SVM: dual coordinate descent for the L1-hinge, L2-regularized
//! binary problem, one-vs-rest multi-class wrapper, feature standardization,
//! a JSON model file and the complexity sweep.

mod model_file;
mod ovr;
mod solver;
mod standardize;
mod sweep;

pub use model_file::{load_svm_model, save_svm_model, SvmModel, SVM_FORMAT_VERSION};
pub use ovr::{argmax_lowest, class_weights, train_ovr, LinearModel};
pub use solver::{
    primal_objective, train_binary, train_binary_weighted, BinarySolution, SvmConfig,
};
pub use standardize::Standardizer;
pub use sweep::{sweep_c, Selection, Sweep, SweepOptions, SweepRow, Unit, DEFAULT_C_LIST};

pub(crate) fn check_rows(x: &[Vec<f64>]) -> crate::Result<usize> {
    let Some(first) = x.first() else {
        return Err(crate::Error::data("no training rows"));
    };
    let d = first.len();
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(crate::Error::contract(format!(
            "row {i} has {} features, expected {d}",
            x[i].len()
        )));
    }
    Ok(d)
}

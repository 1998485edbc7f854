//! CSV writers.

use std::io::Write;

use crate::algebra::NAMES;
use crate::error::{Error, Result};
use crate::state::BASE_DIM;

use super::run::RunResult;

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("csv output: {e}"))
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.10e}")
    }
}

/// One row per probe pulse: `t_s, phi_mean_rad, phi_var_rad2, tau_gauss_s, flags`.
pub fn write_results<W: Write>(out: W, result: &RunResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "phi_mean_rad", "phi_var_rad2", "tau_gauss_s", "flags"])
        .map_err(csv_err)?;
    let tau = fmt(result.metadata.tau_gauss);
    for r in &result.records {
        w.write_record([fmt(r.t), fmt(r.phi_mean), fmt(r.phi_var), tau.clone(), r.flags()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Rotation angle and the covariance diagonal after each readout.
pub fn write_gamma_diagonal<W: Write>(out: W, result: &RunResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t_s".to_string(), "angle_rad".into(), "angle_var_rad2".into()];
    header.extend(["B_x", "B_y", "B_z"].iter().map(|s| format!("var_{s}")));
    header.extend(NAMES.iter().map(|s| format!("var_{}", s.to_uppercase())));
    w.write_record(&header).map_err(csv_err)?;
    for r in &result.records {
        let diag = r.gamma_diagonal.as_ref().ok_or_else(|| {
            Error::InvalidParameter("run was made without the gamma_diagonal toggle".into())
        })?;
        let mut row = vec![fmt(r.t), fmt(r.angle_mean), fmt(r.angle_var)];
        row.extend(diag.iter().take(BASE_DIM).map(|v| fmt(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

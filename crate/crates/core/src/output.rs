//! Run artifacts: `trajectory.csv`, `report.json` and `bands.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cascade::Trajectory;
use crate::diagnostics::operator_norm;
use crate::error::{Error, Result};
use crate::experiment::RunReport;

pub const TRAJECTORY_HEADER: &str = "t,j,h11,h12,h21,h22,det,sigma_max,gen_norm\n";
pub const BANDS_HEADER: &str = "j,grad_u_sup,omega_band_sup\n";

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    for sample in &traj.samples {
        let t = num(sample.state.t);
        for (j, (h, g)) in sample.state.h.iter().zip(&sample.rhs.generators).enumerate() {
            let [h11, h12, h21, h22] = h.to_array();
            let _ = writeln!(
                out,
                "{t},{j},{},{},{},{},{},{},{}",
                num(h11),
                num(h12),
                num(h21),
                num(h22),
                num(h.det()),
                num(operator_norm(h)),
                num(g.frobenius())
            );
        }
    }
    out
}

/// One row per band; `total` carries `N_estimate` and the summed node sups.
pub fn bands_csv(grad_u: &[f64], omega_sup: &[f64]) -> String {
    let mut out = String::from(BANDS_HEADER);
    let cell = |v: Option<&f64>| v.map_or(String::new(), |v| num(*v));
    for j in 0..grad_u.len().max(omega_sup.len()) {
        let _ = writeln!(out, "{j},{},{}", cell(grad_u.get(j)), cell(omega_sup.get(j)));
    }
    let _ = writeln!(
        out,
        "total,{},{}",
        num(grad_u.iter().sum()),
        num(omega_sup.iter().sum())
    );
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_trajectory(traj: &Trajectory, report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("trajectory.csv"), &trajectory_csv(traj))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write(&dir.join("report.json"), &(json + "\n"))?;
    write(
        &dir.join("bands.csv"),
        &bands_csv(&report.grad_u_band_norms, &report.band_vorticity_sup),
    )
}

//! Series and report files. Every file is written to a temporary sibling and
//! renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bathymetry::{total_height, Bathymetry};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// Environment variable overriding the output root.
pub const OUT_ROOT_ENV: &str = "PEREGRINE_OUT_ROOT";

pub fn out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Absolute paths are kept; relative ones resolve under [`out_root`].
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_root().join(path)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

/// Header of `diagnostics.csv` for the energy indices `s_list`.
pub fn diagnostics_header(s_list: &[f64]) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(s_list.iter().map(|s| format!("E_s{s}")));
    cols.extend(
        [
            "entropy_H",
            "orlicz",
            "min_h",
            "balance_residual",
            "ineq_slack",
            "sup_zeta",
            "sup_u",
            "sup_ux",
        ]
        .map(String::from),
    );
    cols.join(",")
}

/// `diagnostics.csv`: one row per completed step, 17 significant digits.
pub fn diagnostics_csv(traj: &Trajectory, s_list: &[f64]) -> String {
    let mut out = diagnostics_header(s_list);
    out.push('\n');
    for r in &traj.records {
        num(&mut out, r.t);
        for (_, e) in &r.energies {
            out.push(',');
            num(&mut out, *e);
        }
        for v in [
            r.entropy_h,
            r.orlicz,
            r.min_h,
            r.balance_residual,
            r.ineq_slack,
            r.sup_zeta,
            r.sup_u,
            r.sup_ux,
        ] {
            out.push(',');
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Snapshot file with columns `x,zeta,u,h`.
pub fn snapshot_csv(state: &crate::bathymetry::State, bath: &Bathymetry, eps: f64) -> Result<String> {
    let h = total_height(&state.zeta, bath, eps)?;
    let grid = state.grid();
    let mut out = String::from("x,zeta,u,h\n");
    for j in 0..grid.points() {
        for (i, v) in [grid.x(j), state.zeta.values()[j], state.u.values()[j], h.values()[j]]
            .into_iter()
            .enumerate()
        {
            if i > 0 {
                out.push(',');
            }
            num(&mut out, v);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn snapshot_name(step: usize) -> String {
    format!("t_{step:06}.csv")
}

/// Writes `diagnostics.csv`, `snapshots/t_<step>.csv` and `meta.json` into `dir`.
pub fn write_series<M: Serialize>(
    traj: &Trajectory,
    bath: &Bathymetry,
    s_list: &[f64],
    dir: &Path,
    meta: &M,
) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;
    write_atomic(&dir.join("diagnostics.csv"), diagnostics_csv(traj, s_list).as_bytes())?;
    for (state, step) in traj.snapshots.iter().zip(&traj.snapshot_steps) {
        let text = snapshot_csv(state, bath, traj.params.eps)?;
        write_atomic(&dir.join("snapshots").join(snapshot_name(*step)), text.as_bytes())?;
    }
    write_json(&dir.join("meta.json"), meta)
}

/// Parses a CSV written by this module into its header and numeric rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?
        .split(',')
        .map(String::from)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_schema() {
        assert_eq!(
            diagnostics_header(&[0.0, 1.0]),
            "t,E_s0,E_s1,entropy_H,orlicz,min_h,balance_residual,ineq_slack,sup_zeta,sup_u,sup_ux"
        );
        assert_eq!(diagnostics_header(&[0.5]).split(',').nth(1), Some("E_s0.5"));
    }

    #[test]
    fn numbers_round_trip() {
        let mut s = String::new();
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            s.clear();
            num(&mut s, v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a").join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}

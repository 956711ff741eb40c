//! Two-column plot files derived from the stage reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Rows of a CSV written by the pipeline, header checked.
fn read_csv(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|_| Error::Missing(path.display().to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::Format(format!("{}: expected header `{header}`", path.display())));
    }
    Ok(lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn num(path: &Path, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("{}: bad number `{s}`", path.display())))
}

fn write_dat(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut s = format!("# {header}\n");
    for (x, y) in rows {
        writeln!(s, "{x:.17e} {y:.17e}").unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

/// `ln s` against `ln m(s)` from `doubling.csv`.
pub fn mass_curve(doubling_csv: &Path, out: &Path) -> Result<()> {
    let rows = read_csv(doubling_csv, "radius,mass,slope")?;
    let mut pts = Vec::with_capacity(rows.len());
    for r in &rows {
        pts.push((num(doubling_csv, &r[0])?.ln(), num(doubling_csv, &r[1])?.ln()));
    }
    write_dat(out, "log_s log_m", &pts)
}

/// One file per `r` with the largest ratio over the family at each `τ`.
pub fn ratio_curves(carleman_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_csv(carleman_csv, "function,tau,r,lhs_group1,lhs_group2,rhs,ratio")?;
    // Keyed by the printed r so that files are named after the input.
    let mut by_r: BTreeMap<String, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for row in &rows {
        let tau = num(carleman_csv, &row[1])?;
        let q = num(carleman_csv, &row[6])?;
        if !q.is_finite() {
            continue;
        }
        let e = by_r.entry(row[2].clone()).or_default().entry(tau.to_bits()).or_insert((tau, q));
        e.1 = e.1.max(q);
    }
    let mut written = Vec::new();
    for (r, curve) in by_r {
        let mut pts: Vec<(f64, f64)> = curve.into_values().collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path = out_dir.join(format!("ratio_tau_r{r}.dat"));
        write_dat(&path, &format!("tau max_ratio (r = {r})"), &pts)?;
        written.push(path);
    }
    Ok(written)
}

/// Grid spacing against the extension residual from `convergence.csv`.
pub fn residual_curve(convergence_csv: &Path, out: &Path) -> Result<()> {
    let rows = read_csv(
        convergence_csv,
        "resolution,rows,h,extension_l2,extension_max,jump_second,solve_relative_residual",
    )?;
    let mut pts = Vec::with_capacity(rows.len());
    for r in &rows {
        pts.push((num(convergence_csv, &r[2])?, num(convergence_csv, &r[3])?));
    }
    write_dat(out, "h extension_l2", &pts)
}

/// Reads the reports in `reports` and writes every plot file into `out`.
pub fn emit_plot_data(reports: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mass = out.join("mass_loglog.dat");
    mass_curve(&reports.join("doubling.csv"), &mass)?;
    written.push(mass);
    written.extend(ratio_curves(&reports.join("carleman.csv"), out)?);
    let res = out.join("residual_resolution.dat");
    residual_curve(&reports.join("convergence.csv"), &res)?;
    written.push(res);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_radii_give_a_header_only_file() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("doubling.csv");
        fs::write(&csv, "radius,mass,slope\n").unwrap();
        let dat = dir.path().join("m.dat");
        mass_curve(&csv, &dat).unwrap();
        assert_eq!(fs::read_to_string(dat).unwrap(), "# log_s log_m\n");
    }

    #[test]
    fn missing_report_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_plot_data(dir.path(), dir.path()).unwrap_err();
        assert!(matches!(&err, Error::Missing(p) if p.ends_with("doubling.csv")), "{err}");
    }

    #[test]
    fn ratio_curves_split_by_radius() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("carleman.csv");
        fs::write(
            &csv,
            "function,tau,r,lhs_group1,lhs_group2,rhs,ratio\n\
             a,2,0.4,1,1,1,3\na,5,0.4,1,1,1,2\nb,2,0.4,1,1,1,4\na,2,0.8,1,1,1,1\na,5,0.8,1,1,1,nan\n",
        )
        .unwrap();
        let files = ratio_curves(&csv, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let text = fs::read_to_string(&files[0]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2.0") && lines[1].ends_with("4.00000000000000000e0"));
        assert_eq!(fs::read_to_string(&files[1]).unwrap().lines().count(), 2);
    }
}

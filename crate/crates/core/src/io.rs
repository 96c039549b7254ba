//! CSV and JSON writers for every result type. Floats are written in
//! scientific notation with 17 significant digits so they round-trip.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::dynamics::{DecayCurve, TransferCurve};
use crate::error::Result;
use crate::field::FieldMap;
use crate::geometry::DipoleArray;
use crate::spectrum::{AngleSweepRow, ModeSet, ScalingResult};
use crate::transport::{ModeCouplingTable, SweepPoint};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// One row per mode: `N, d, phi, m, J_over_Gamma0, Gamma_over_Gamma0`;
/// `m` is empty when the modes are unlabelled.
pub fn write_modes_csv(path: &Path, ms: &ModeSet, n: usize, d: f64, phi: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["N", "d", "phi", "m", "J_over_Gamma0", "Gamma_over_Gamma0"])?;
    for k in 0..ms.len() {
        let m = ms.labels.as_ref().map_or(String::new(), |l| l[k].to_string());
        w.write_record([n.to_string(), fmt_f64(d), fmt_f64(phi), m, fmt_f64(ms.shifts[k]), fmt_f64(ms.rates[k])])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_angle_sweep_csv(path: &Path, rows: &[AngleSweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["N", "d", "phi", "m", "J_over_Gamma0", "Gamma_over_Gamma0"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_f64(r.d),
            fmt_f64(r.phi),
            r.m.to_string(),
            fmt_f64(r.shift),
            fmt_f64(r.rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `N, d, Gamma_min, manifold`.
pub fn write_scaling_csv(path: &Path, res: &ScalingResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["N", "d", "Gamma_min", "manifold"])?;
    for r in &res.table {
        w.write_record([r.n.to_string(), fmt_f64(r.d), fmt_f64(r.gamma_min), r.manifold.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FitSummary<'a> {
    fits: &'a [crate::spectrum::XiFit],
    unfitted: &'a [f64],
    dropped: usize,
}

/// `{"fits": [{d, xi, r2, n_points}, …], "unfitted": [d, …], "dropped": k}`.
pub fn write_fits_json(path: &Path, res: &ScalingResult) -> Result<()> {
    write_json(path, &FitSummary { fits: &res.fits, unfitted: &res.unfitted, dropped: res.dropped })
}

/// Long format `t_Gamma0, value, kind`, one block per curve.
pub fn write_decay_csv(path: &Path, curves: &[&DecayCurve]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t_Gamma0", "value", "kind"])?;
    for c in curves {
        for (t, p) in c.times.iter().zip(&c.population) {
            w.write_record([fmt_f64(*t), fmt_f64(*p), c.kind.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fidelity and ring-2 population as `t_Gamma0, value, kind` with kinds
/// `fidelity` and `population`.
pub fn write_transfer_csv(path: &Path, curve: &TransferCurve) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t_Gamma0", "value", "kind"])?;
    for (kind, values) in [("fidelity", &curve.fidelity), ("population", &curve.population)] {
        for (t, v) in curve.times.iter().zip(values) {
            w.write_record([fmt_f64(*t), fmt_f64(*v), kind.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Square matrix with a header row of site indices and the row index first.
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["site".to_string()];
    header.extend((0..m.ncols()).map(|j| j.to_string()));
    w.write_record(&header)?;
    for (i, row) in m.rows().into_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_labelled_matrix(path: &Path, rows: &[i64], cols: &[i64], m: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["m1\\m2".to_string()];
    header.extend(cols.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for (r, row) in rows.iter().zip(m) {
        let mut rec = vec![r.to_string()];
        rec.extend(row.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<stem>_J.csv`, `<stem>_Gamma.csv` and `<stem>_eta.csv` into `dir`.
pub fn write_mode_table(dir: &Path, stem: &str, t: &ModeCouplingTable) -> Result<()> {
    write_labelled_matrix(&dir.join(format!("{stem}_J.csv")), &t.m1_values, &t.m2_values, &t.j)?;
    write_labelled_matrix(&dir.join(format!("{stem}_Gamma.csv")), &t.m1_values, &t.m2_values, &t.g)?;
    write_labelled_matrix(&dir.join(format!("{stem}_eta.csv")), &t.m1_values, &t.m2_values, &t.eta)
}

/// `x, eta_max`.
pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "eta_max"])?;
    for p in points {
        w.write_record([fmt_f64(p.x), fmt_f64(p.eta_max)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FieldSidecar<'a> {
    #[serde(flatten)]
    metadata: &'a crate::field::FieldMetadata,
    masked_indices: Vec<usize>,
}

/// `x, y, z, intensity` rows plus a JSON sidecar with the map metadata and
/// the indices of masked points.
pub fn write_field(csv_path: &Path, json_path: &Path, map: &FieldMap) -> Result<()> {
    let mut w = csv_writer(csv_path)?;
    w.write_record(["x", "y", "z", "intensity"])?;
    for (p, i) in map.points.iter().zip(&map.intensity) {
        w.write_record([fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]), fmt_f64(*i)])?;
    }
    w.flush()?;
    let masked_indices = map.masked.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k).collect();
    write_json(json_path, &FieldSidecar { metadata: &map.metadata, masked_indices })
}

#[derive(Serialize)]
struct SiteRecord {
    x: f64,
    y: f64,
    z: f64,
    ux_re: f64,
    ux_im: f64,
    uy_re: f64,
    uy_im: f64,
    uz_re: f64,
    uz_im: f64,
    ring: usize,
}

#[derive(Serialize)]
struct Layout<'a> {
    sites: Vec<SiteRecord>,
    rings: &'a [crate::geometry::Ring],
}

/// Site positions, complex orientations and ring blocks (lengths in λ0).
pub fn write_layout_json(path: &Path, array: &DipoleArray) -> Result<()> {
    let sites = array
        .positions()
        .iter()
        .zip(array.orientations())
        .zip(array.ring_membership())
        .map(|((p, u), &ring)| SiteRecord {
            x: p.x,
            y: p.y,
            z: p.z,
            ux_re: u.x.re,
            ux_im: u.x.im,
            uy_re: u.y.re,
            uy_im: u.y.im,
            uz_re: u.z.re,
            uz_im: u.z.im,
            ring,
        })
        .collect();
    write_json(path, &Layout { sites, rings: array.rings() })
}

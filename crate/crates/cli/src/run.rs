//! Executes a [`Plan`] into an output directory and records a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use nanoring::coupling::coupling_rates;
use nanoring::dynamics::{disorder_decay_study, transfer_fidelity_to, DecayCurve};
use nanoring::field::{farfield_map, plane_map, ring_mode_sets, superposition_state};
use nanoring::geometry::{build_ring, lhc_layout, two_ring_layout, DipoleArray};
use nanoring::io;
use nanoring::spectrum::{angle_sweep, diagonalize, effective_hamiltonian, min_decay_scan, ring_modes, Manifold};
use nanoring::transport::{coupling_table, efficiency_sweep};

use crate::config::{ConfigFile, Layout, MapSpec, Plan};

/// Tracks the files written so far so a failure manifest can list them.
pub struct Session {
    dir: PathBuf,
    files: Vec<String>,
}

impl Session {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    threads: usize,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    wall_time_s: f64,
    files: Vec<String>,
    config: &'a ConfigFile,
}

pub struct Outcome {
    pub files: Vec<String>,
    pub error: Option<nanoring::Error>,
}

/// Runs `plan` on a pool of `threads` workers. The echoed config is written
/// first and the manifest last, whether or not the computation succeeds.
pub fn execute(plan: &Plan, config: &ConfigFile, dir: &Path, threads: usize) -> nanoring::Result<Outcome> {
    let start = Instant::now();
    let mut session = Session::new(dir)?;
    io::write_json(&session.path("config.json"), config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| nanoring::Error::InvalidArgument(format!("thread pool: {e}")))?;
    let result = pool.install(|| run_plan(plan, &mut session));
    session.path("manifest.json");
    let mut files = session.files.clone();
    files.sort();
    let manifest = Manifest {
        command: config.command.as_deref().unwrap_or_default(),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed.unwrap_or(0),
        threads,
        status: if result.is_ok() { "ok" } else { "failed" },
        error: result.as_ref().err().map(|e| e.to_string()),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: files.clone(),
        config,
    };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(Outcome { files, error: result.err() })
}

fn run_plan(plan: &Plan, s: &mut Session) -> nanoring::Result<()> {
    match plan {
        Plan::Spectrum { spec, manifold } => {
            let ring = build_ring(spec)?;
            io::write_layout_json(&s.path("layout.json"), &ring)?;
            let c = coupling_rates(&ring)?;
            io::write_matrix_csv(&s.path("omega.csv"), &c.omega)?;
            io::write_matrix_csv(&s.path("gamma.csv"), &c.gamma)?;
            let ms = match manifold {
                Manifold::Single => ring_modes(spec)?,
                Manifold::Double => diagonalize(&effective_hamiltonian(&c, Manifold::Double)?)?,
            };
            io::write_modes_csv(&s.path("modes.csv"), &ms, spec.n_sites, spec.spacing, spec.pol.phi)
        }
        Plan::AngleSweep { spec, phis } => io::write_angle_sweep_csv(&s.path("angle_sweep.csv"), &angle_sweep(spec, phis)?),
        Plan::Scaling { ns, ds, manifold, pol } => {
            let res = min_decay_scan(ns, ds, *manifold, *pol)?;
            io::write_scaling_csv(&s.path("scaling.csv"), &res)?;
            io::write_fits_json(&s.path("fits.json"), &res)
        }
        Plan::Disorder { spec, kind, shifts, realizations, seed, times } => {
            #[derive(Serialize)]
            struct Entry<'a> {
                max_shift: f64,
                label: &'a str,
                n_realizations: usize,
                failed: usize,
            }
            #[derive(Serialize)]
            struct Summary<'a> {
                seed: u64,
                n_sites: usize,
                spacing: f64,
                pol: nanoring::PolSpec,
                kind: String,
                realizations: usize,
                n_times: usize,
                studies: Vec<Entry<'a>>,
            }
            io::write_layout_json(&s.path("layout.json"), &build_ring(spec)?)?;
            let mut curves: Vec<DecayCurve> = Vec::new();
            let mut summary = Summary {
                seed: *seed,
                n_sites: spec.n_sites,
                spacing: spec.spacing,
                pol: spec.pol,
                kind: kind.to_string(),
                realizations: *realizations,
                n_times: times.len(),
                studies: Vec::new(),
            };
            for shift in shifts {
                let study = disorder_decay_study(spec, *kind, shift.value, *realizations, *seed, times)?;
                if curves.is_empty() {
                    curves.push(study.reference.clone());
                }
                summary.studies.push(Entry {
                    max_shift: shift.value,
                    label: &shift.label,
                    n_realizations: study.curve.n_realizations,
                    failed: study.failed,
                });
                let mut curve = study.curve;
                curve.kind = format!("{kind}:{}", shift.label);
                curves.push(curve);
                let refs: Vec<&DecayCurve> = curves.iter().collect();
                io::write_decay_csv(&s.path("decay.csv"), &refs)?;
                io::write_json(&s.path("disorder.json"), &summary)?;
            }
            Ok(())
        }
        Plan::Transport { ring1, ring2, gap, m, target_m, dtheta, times } => {
            let sys = two_ring_layout(ring1, ring2, *gap)?;
            io::write_layout_json(&s.path("layout.json"), &sys)?;
            io::write_mode_table(&s.dir.clone(), "coupling", &coupling_table(&sys)?)?;
            for suffix in ["J", "Gamma", "eta"] {
                s.path(&format!("coupling_{suffix}.csv"));
            }
            let curve = transfer_fidelity_to(&sys, *m, *target_m, *dtheta, times)?;
            io::write_transfer_csv(&s.path("transfer.csv"), &curve)
        }
        Plan::Efficiency { ring1, ring2, xs, pol } => {
            io::write_sweep_csv(&s.path("efficiency.csv"), &efficiency_sweep(ring1, ring2, xs, *pol)?)
        }
        Plan::Field { layout, state, state_label, map } => {
            let array = build_layout(layout)?;
            io::write_layout_json(&s.path("layout.json"), &array)?;
            let sets = ring_mode_sets(&array)?;
            let psi = superposition_state(&array, &sets, state)?;
            let field = match map {
                MapSpec::Sphere { radius, n_theta, n_phi } => farfield_map(&array, &psi, *radius, *n_theta, *n_phi, state_label)?,
                MapSpec::Plane { z_offset, extent, n_x, n_y } => {
                    plane_map(&array, &psi, *z_offset, extent.unwrap_or_else(|| array.extent()), *n_x, *n_y, state_label)?
                }
            };
            io::write_field(&s.path("field.csv"), &s.path("field.json"), &field)
        }
    }
}

fn build_layout(layout: &Layout) -> nanoring::Result<DipoleArray> {
    match layout {
        Layout::Ring(spec) => build_ring(spec),
        Layout::TwoRing { ring1, ring2, gap } => two_ring_layout(ring1, ring2, *gap),
        Layout::Lhc { n_inner, n_outer, n_rings_outer, d, pol } => lhc_layout(*n_inner, *n_outer, *n_rings_outer, *d, *pol),
    }
}

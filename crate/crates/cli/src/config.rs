//! Experiment configuration: the on-disk schema, default injection and
//! validation into a typed [`Plan`].
//!
//! The same [`ConfigFile`] type is read from JSON, patched by command-line
//! flags and echoed into every output directory, so an echoed config can be
//! fed back verbatim.
//!
//! Grids are a number, a list, or text: `"4..16"` (integers, inclusive),
//! `"0..1.5:31"` (31 evenly spaced points), `"0.05,0.1"`, and for shifts
//! `"0.4d"` (a multiple of the spacing).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use nanoring::dynamics::{geometric_times, linear_times};
use nanoring::field::ModeChoice;
use nanoring::geometry::{DisorderKind, PolSpec, RingSpec};
use nanoring::spectrum::{Manifold, MANIFOLD2_MAX_SITES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    AngleSweep,
    Scaling,
    Disorder,
    Transport,
    Efficiency,
    Field,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Spectrum,
        Command::AngleSweep,
        Command::Scaling,
        Command::Disorder,
        Command::Transport,
        Command::Efficiency,
        Command::Field,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::AngleSweep => "angle-sweep",
            Command::Scaling => "scaling",
            Command::Disorder => "disorder",
            Command::Transport => "transport",
            Command::Efficiency => "efficiency",
            Command::Field => "field",
        }
    }

    /// Fields a command reads besides `command`, `seed`, `output_dir` and
    /// `threads`.
    fn fields(self) -> &'static [&'static str] {
        match self {
            Command::Spectrum => &["n", "d", "pol", "manifold"],
            Command::AngleSweep => &["n", "d", "pol", "phi"],
            Command::Scaling => &["n", "d", "pol", "manifold"],
            Command::Disorder => &["n", "d", "pol", "kind", "max_shift", "realizations", "t_min", "t_max", "n_times"],
            Command::Transport => &["n", "n2", "d", "pol", "gap", "m", "target_m", "dtheta", "t_max", "n_times"],
            Command::Efficiency => &["n", "n2", "d", "pol", "x"],
            Command::Field => &[
                "n",
                "n2",
                "d",
                "pol",
                "layout",
                "gap",
                "n_outer",
                "n_rings_outer",
                "state",
                "map",
                "radius",
                "z_offset",
                "extent",
                "resolution",
            ],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
            format!("unknown command '{s}' (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Num(f64),
    List(Vec<Scalar>),
    Text(String),
}

impl Grid {
    fn tokens(&self) -> Vec<Scalar> {
        match self {
            Grid::Num(x) => vec![Scalar::Num(*x)],
            Grid::List(v) => v.clone(),
            Grid::Text(s) => s.split(',').map(|t| Scalar::Text(t.to_string())).collect(),
        }
    }

    /// Expanded values; `spacing` resolves the `d` suffix.
    pub fn values(&self, spacing: Option<f64>) -> Result<Vec<f64>, String> {
        let mut out = Vec::new();
        for tok in self.tokens() {
            match tok {
                Scalar::Num(x) => out.push(x),
                Scalar::Text(t) => out.extend(parse_token(&t, spacing)?),
            }
        }
        if out.is_empty() {
            return Err("grid is empty".into());
        }
        Ok(out)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", s.trim()))
}

fn parse_token(tok: &str, spacing: Option<f64>) -> Result<Vec<f64>, String> {
    let tok = tok.trim();
    if tok.is_empty() {
        return Err("empty grid entry".into());
    }
    if let Some((a, rest)) = tok.split_once("..") {
        let (b, count) = match rest.split_once(':') {
            Some((b, k)) => (b, Some(k.trim().parse::<usize>().map_err(|_| format!("bad point count in '{tok}'"))?)),
            None => (rest, None),
        };
        let (a, b) = (parse_number(a)?, parse_number(b)?);
        if b < a {
            return Err(format!("range '{tok}' is descending"));
        }
        return match count {
            Some(0) => Err(format!("range '{tok}' has no points")),
            Some(1) => Ok(vec![a]),
            Some(k) => Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()),
            None if a.fract() == 0.0 && b.fract() == 0.0 => Ok((a as i64..=b as i64).map(|i| i as f64).collect()),
            None => Err(format!("range '{tok}' needs integer ends or a ':count'")),
        };
    }
    if let Some(mult) = tok.strip_suffix('d') {
        let d = spacing.ok_or_else(|| format!("'{tok}' uses the d suffix but no single spacing d is set"))?;
        return Ok(vec![parse_number(mult)? * d]);
    }
    Ok(vec![parse_number(tok)?])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threads {
    Count(usize),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "auto" => Ok(Threads::Auto(AutoTag::Auto)),
            t => t.parse().map(Threads::Count).map_err(|_| format!("threads must be a count or 'auto', got '{t}'")),
        }
    }
}

/// Every field is optional on disk; missing ones get defaults that are
/// reported by `validate` and written back in the echo.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Grid>,
    /// Second ring for two-ring systems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<Grid>,
    /// `transverse`, `tangential`, `radial`, `magic` or `tilted:<phi>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pol: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifold: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_shift: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_times: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_m: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtheta: Option<f64>,
    /// `ring`, `two-ring` or `lhc`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_outer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rings_outer: Option<usize>,
    /// Mode per ring, `super` or `sub`, comma separated; one entry applies
    /// to every ring.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    /// `sphere` or `plane`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<Threads>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    fn is_set(&self, field: &str) -> bool {
        serde_json::to_value(self).map(|v| v.get(field).is_some()).unwrap_or(false)
    }

    /// Fields that are set but not read by `cmd`.
    pub fn unused_fields(&self, cmd: Command) -> Vec<&'static str> {
        const ALL: &[&str] = &[
            "n",
            "n2",
            "d",
            "pol",
            "phi",
            "manifold",
            "kind",
            "max_shift",
            "realizations",
            "t_min",
            "t_max",
            "n_times",
            "gap",
            "x",
            "m",
            "target_m",
            "dtheta",
            "layout",
            "n_outer",
            "n_rings_outer",
            "state",
            "map",
            "radius",
            "z_offset",
            "extent",
            "resolution",
        ];
        ALL.iter().copied().filter(|f| self.is_set(f) && !cmd.fields().contains(f)).collect()
    }

    /// Fills every missing field `cmd` reads and returns `field = value`
    /// notes for the injected ones.
    pub fn inject_defaults(&mut self, cmd: Command) -> Vec<String> {
        let mut notes = Vec::new();
        fn fill<T: Serialize>(slot: &mut Option<T>, value: T, name: &str, notes: &mut Vec<String>) {
            if slot.is_none() {
                notes.push(format!("{name} = {}", serde_json::to_string(&value).unwrap_or_default()));
                *slot = Some(value);
            }
        }
        self.command.get_or_insert_with(|| cmd.name().to_string());
        fill(&mut self.seed, 0, "seed", &mut notes);
        fill(&mut self.output_dir, PathBuf::from(format!("nanoring-out/{cmd}")), "output_dir", &mut notes);
        fill(&mut self.threads, Threads::Auto(AutoTag::Auto), "threads", &mut notes);
        let uses = |f: &str| cmd.fields().contains(&f);
        if uses("pol") {
            fill(&mut self.pol, "transverse".into(), "pol", &mut notes);
        }
        if uses("manifold") {
            fill(&mut self.manifold, 1, "manifold", &mut notes);
        }
        match cmd {
            Command::AngleSweep => {
                fill(&mut self.phi, Grid::Text(format!("0..{}:31", std::f64::consts::FRAC_PI_2)), "phi", &mut notes);
            }
            Command::Disorder => {
                fill(&mut self.kind, "radial".into(), "kind", &mut notes);
                fill(&mut self.max_shift, Grid::Text("0.4d".into()), "max_shift", &mut notes);
                fill(&mut self.realizations, 100, "realizations", &mut notes);
                fill(&mut self.t_min, 1e-3, "t_min", &mut notes);
                fill(&mut self.t_max, 1e4, "t_max", &mut notes);
                fill(&mut self.n_times, 71, "n_times", &mut notes);
            }
            Command::Transport => {
                fill(&mut self.m, 1, "m", &mut notes);
                fill(&mut self.dtheta, 1.0, "dtheta", &mut notes);
                fill(&mut self.t_max, 100.0, "t_max", &mut notes);
                fill(&mut self.n_times, 2001, "n_times", &mut notes);
            }
            Command::Efficiency => {
                fill(&mut self.x, Grid::Text("0.05..1:20".into()), "x", &mut notes);
            }
            Command::Field => {
                fill(&mut self.layout, "ring".into(), "layout", &mut notes);
                fill(&mut self.state, "super".into(), "state", &mut notes);
                fill(&mut self.map, "sphere".into(), "map", &mut notes);
                let res = if self.map.as_deref() == Some("plane") { [101, 101] } else { [91, 72] };
                fill(&mut self.resolution, res, "resolution", &mut notes);
                if self.layout.as_deref() == Some("lhc") {
                    fill(&mut self.n_outer, 9, "n_outer", &mut notes);
                    fill(&mut self.n_rings_outer, 8, "n_rings_outer", &mut notes);
                }
            }
            _ => {}
        }
        notes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    Ring(RingSpec),
    TwoRing { ring1: RingSpec, ring2: RingSpec, gap: f64 },
    Lhc { n_inner: usize, n_outer: usize, n_rings_outer: usize, d: f64, pol: PolSpec },
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    Sphere { radius: Option<f64>, n_theta: usize, n_phi: usize },
    Plane { z_offset: f64, extent: Option<f64>, n_x: usize, n_y: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shift {
    pub value: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Spectrum { spec: RingSpec, manifold: Manifold },
    AngleSweep { spec: RingSpec, phis: Vec<f64> },
    Scaling { ns: Vec<usize>, ds: Vec<f64>, manifold: Manifold, pol: PolSpec },
    Disorder { spec: RingSpec, kind: DisorderKind, shifts: Vec<Shift>, realizations: usize, seed: u64, times: Vec<f64> },
    Transport { ring1: RingSpec, ring2: RingSpec, gap: f64, m: i64, target_m: i64, dtheta: f64, times: Vec<f64> },
    Efficiency { ring1: RingSpec, ring2: RingSpec, xs: Vec<f64>, pol: PolSpec },
    Field { layout: Layout, state: Vec<ModeChoice>, state_label: String, map: MapSpec },
}

pub fn parse_pol(s: &str) -> Result<PolSpec, String> {
    match s.trim() {
        "transverse" => Ok(PolSpec::transverse()),
        "tangential" => Ok(PolSpec::tangential()),
        "radial" => Ok(PolSpec::radial()),
        "magic" => Ok(PolSpec::magic()),
        t => {
            let phi = t
                .strip_prefix("tilted:")
                .ok_or_else(|| format!("unknown polarization '{t}' (transverse, tangential, radial, magic, tilted:<phi>)"))?;
            let pol = PolSpec::tilted(parse_number(phi)?);
            pol.validate().map_err(|e| e.to_string())?;
            Ok(pol)
        }
    }
}

/// Collects per-field errors so validation reports all of them at once.
#[derive(Default)]
struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn err(&mut self, field: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{field}: {msg}"));
    }

    fn ok<T>(&mut self, field: &str, r: Result<T, String>) -> Option<T> {
        r.map_err(|e| self.err(field, e)).ok()
    }

    fn required<'a, T>(&mut self, field: &str, v: &'a Option<T>) -> Option<&'a T> {
        if v.is_none() {
            self.err(field, "is required");
        }
        v.as_ref()
    }

    fn grid(&mut self, field: &str, g: &Option<Grid>, spacing: Option<f64>) -> Option<Vec<f64>> {
        let g = self.required(field, g)?;
        self.ok(field, g.values(spacing))
    }

    fn positive(&mut self, field: &str, xs: Vec<f64>) -> Option<Vec<f64>> {
        match xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            Some(x) => {
                self.err(field, format!("must be positive and finite, got {x}"));
                None
            }
            None => Some(xs),
        }
    }

    fn sites(&mut self, field: &str, xs: Vec<f64>) -> Option<Vec<usize>> {
        match xs.iter().find(|x| x.fract() != 0.0 || **x < 2.0) {
            Some(x) => {
                self.err(field, format!("site counts must be integers of at least 2, got {x}"));
                None
            }
            None => Some(xs.into_iter().map(|x| x as usize).collect()),
        }
    }

    fn single<T: Copy>(&mut self, field: &str, xs: Option<Vec<T>>) -> Option<T> {
        match xs?.as_slice() {
            [x] => Some(*x),
            v => {
                self.err(field, format!("expects a single value, got {}", v.len()));
                None
            }
        }
    }

    fn positive_scalar(&mut self, field: &str, v: Option<f64>) -> Option<f64> {
        let v = v?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.err(field, format!("must be positive and finite, got {v}"));
            None
        }
    }

    fn count(&mut self, field: &str, v: Option<usize>, min: usize) -> Option<usize> {
        let v = v?;
        if v < min {
            self.err(field, format!("must be at least {min}, got {v}"));
            return None;
        }
        Some(v)
    }
}

impl ConfigFile {
    /// Typed plan for `cmd`; call after [`ConfigFile::inject_defaults`].
    pub fn plan(&self, cmd: Command) -> Result<Plan, Vec<String>> {
        let mut c = Checker::default();
        if let Some(name) = &self.command {
            if name != cmd.name() {
                c.err("command", format!("config is for '{name}' but '{cmd}' was requested"));
            }
        }
        if let Some(Threads::Count(0)) = self.threads {
            c.err("threads", "must be at least 1");
        }
        let pol = self.pol.as_deref().and_then(|p| c.ok("pol", parse_pol(p)));
        let manifold = match self.manifold {
            Some(k) => c.ok("manifold", Manifold::try_from(k).map_err(|e| e.to_string())),
            None => None,
        };
        let ds = c.grid("d", &self.d, None).and_then(|v| c.positive("d", v));
        let ns = c.grid("n", &self.n, None).and_then(|v| c.sites("n", v));
        let plan = match cmd {
            Command::Scaling => {
                if let (Some(Manifold::Double), Some(ns)) = (manifold, &ns) {
                    if let Some(n) = ns.iter().find(|&&n| n > MANIFOLD2_MAX_SITES) {
                        c.err("n", format!("two-excitation spectra are limited to {MANIFOLD2_MAX_SITES} sites, got {n}"));
                    }
                }
                match (ns, ds, manifold, pol) {
                    (Some(ns), Some(ds), Some(manifold), Some(pol)) => Some(Plan::Scaling { ns, ds, manifold, pol }),
                    _ => None,
                }
            }
            _ => {
                let n = c.single("n", ns);
                let d = c.single("d", ds);
                let spec = match (n, d, pol) {
                    (Some(n), Some(d), Some(pol)) => Some(RingSpec::new(n, d, pol)),
                    _ => None,
                };
                self.single_ring_plan(cmd, &mut c, spec, manifold)
            }
        };
        match plan {
            Some(p) if c.errors.is_empty() => Ok(p),
            _ => {
                if c.errors.is_empty() {
                    c.errors.push("configuration is incomplete".into());
                }
                Err(c.errors)
            }
        }
    }

    fn second_ring(&self, c: &mut Checker, spec: &RingSpec) -> Option<RingSpec> {
        let n2 = self.n2.unwrap_or(spec.n_sites);
        if n2 < 2 {
            c.err("n2", format!("site counts must be at least 2, got {n2}"));
            return None;
        }
        Some(RingSpec { n_sites: n2, ..spec.clone() })
    }

    fn single_ring_plan(&self, cmd: Command, c: &mut Checker, spec: Option<RingSpec>, manifold: Option<Manifold>) -> Option<Plan> {
        let d = spec.as_ref().map(|s| s.spacing);
        match cmd {
            Command::Spectrum => {
                let (spec, manifold) = (spec?, manifold?);
                if manifold == Manifold::Double && spec.n_sites > MANIFOLD2_MAX_SITES {
                    c.err("n", format!("two-excitation spectra are limited to {MANIFOLD2_MAX_SITES} sites"));
                }
                Some(Plan::Spectrum { spec, manifold })
            }
            Command::AngleSweep => {
                let phis = c.grid("phi", &self.phi, None)?;
                if let Some(p) = phis.iter().find(|p| !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(*p)) {
                    c.err("phi", format!("angles must lie in [0, pi/2], got {p}"));
                }
                Some(Plan::AngleSweep { spec: spec?, phis })
            }
            Command::Disorder => {
                let kind = self.kind.as_deref().and_then(|k| c.ok("kind", k.parse::<DisorderKind>().map_err(|e| e.to_string())));
                let realizations = c.count("realizations", self.realizations, 1);
                let times = self.decay_times(c);
                let shifts = self.shifts(c, d);
                Some(Plan::Disorder {
                    spec: spec?,
                    kind: kind?,
                    shifts: shifts?,
                    realizations: realizations?,
                    seed: self.seed.unwrap_or(0),
                    times: times?,
                })
            }
            Command::Transport => {
                let spec = spec?;
                let ring2 = self.second_ring(c, &spec);
                let gap = c.positive_scalar("gap", Some(self.gap.unwrap_or(spec.spacing)));
                let dtheta = c.positive_scalar("dtheta", self.dtheta);
                let t_max = c.positive_scalar("t_max", self.t_max);
                let n_times = c.count("n_times", self.n_times, 2);
                let times = match (t_max, n_times) {
                    (Some(t), Some(k)) => c.ok("t_max", linear_times(t, k).map_err(|e| e.to_string())),
                    _ => None,
                };
                let m = self.m?;
                Some(Plan::Transport {
                    ring1: spec,
                    ring2: ring2?,
                    gap: gap?,
                    m,
                    target_m: self.target_m.unwrap_or(-m),
                    dtheta: dtheta?,
                    times: times?,
                })
            }
            Command::Efficiency => {
                let xs = c.grid("x", &self.x, None).and_then(|v| c.positive("x", v));
                let spec = spec?;
                let ring2 = self.second_ring(c, &spec)?;
                Some(Plan::Efficiency { pol: spec.pol, ring1: spec, ring2, xs: xs? })
            }
            Command::Field => self.field_plan(c, spec?),
            Command::Scaling => unreachable!("handled by plan"),
        }
    }

    fn decay_times(&self, c: &mut Checker) -> Option<Vec<f64>> {
        let t_min = c.positive_scalar("t_min", self.t_min)?;
        let t_max = c.positive_scalar("t_max", self.t_max)?;
        let n = c.count("n_times", self.n_times, 2)?;
        c.ok("t_max", geometric_times(t_min, t_max, n).map_err(|e| e.to_string()))
    }

    fn shifts(&self, c: &mut Checker, d: Option<f64>) -> Option<Vec<Shift>> {
        let tokens = c.required("max_shift", &self.max_shift)?.tokens();
        let mut out = Vec::new();
        for tok in tokens {
            let label = match &tok {
                Scalar::Num(x) => format!("{x}"),
                Scalar::Text(t) => t.trim().to_string(),
            };
            for value in c.ok("max_shift", Grid::List(vec![tok]).values(d))? {
                if !(value >= 0.0 && value.is_finite()) {
                    c.err("max_shift", format!("must be non-negative, got {value}"));
                    return None;
                }
                out.push(Shift { value, label: label.clone() });
            }
        }
        Some(out)
    }

    fn field_plan(&self, c: &mut Checker, spec: RingSpec) -> Option<Plan> {
        let layout = match self.layout.as_deref().unwrap_or("ring") {
            "ring" => Some(Layout::Ring(spec.clone())),
            "two-ring" => {
                let ring2 = self.second_ring(c, &spec);
                let gap = c.positive_scalar("gap", Some(self.gap.unwrap_or(spec.spacing)));
                Some(Layout::TwoRing { ring1: spec.clone(), ring2: ring2?, gap: gap? })
            }
            "lhc" => {
                let n_outer = c.count("n_outer", self.n_outer, 2);
                let n_rings_outer = c.count("n_rings_outer", self.n_rings_outer, 1);
                Some(Layout::Lhc {
                    n_inner: spec.n_sites,
                    n_outer: n_outer?,
                    n_rings_outer: n_rings_outer?,
                    d: spec.spacing,
                    pol: spec.pol,
                })
            }
            other => {
                c.err("layout", format!("unknown layout '{other}' (ring, two-ring, lhc)"));
                None
            }
        };
        let n_rings = match &layout {
            Some(Layout::Ring(_)) => 1,
            Some(Layout::TwoRing { .. }) => 2,
            Some(Layout::Lhc { n_rings_outer, .. }) => 1 + n_rings_outer,
            None => 0,
        };
        let state_label = self.state.clone().unwrap_or_else(|| "super".into());
        let choices: Result<Vec<ModeChoice>, String> =
            state_label.split(',').map(|s| s.trim().parse::<ModeChoice>().map_err(|e| e.to_string())).collect();
        let state = match c.ok("state", choices) {
            Some(v) if v.len() == 1 => Some(vec![v[0]; n_rings]),
            Some(v) if v.len() == n_rings || n_rings == 0 => Some(v),
            Some(v) => {
                c.err("state", format!("{} entries for {n_rings} rings", v.len()));
                None
            }
            None => None,
        };
        let [a, b] = self.resolution.unwrap_or([91, 72]);
        let map = match self.map.as_deref().unwrap_or("sphere") {
            "sphere" => {
                if a < 2 || b < 1 {
                    c.err("resolution", format!("sphere grid {a}x{b} is too small"));
                }
                if let Some(r) = self.radius {
                    c.positive_scalar("radius", Some(r));
                }
                Some(MapSpec::Sphere { radius: self.radius, n_theta: a, n_phi: b })
            }
            "plane" => {
                if a < 2 || b < 2 {
                    c.err("resolution", format!("plane grid {a}x{b} is too small"));
                }
                if let Some(e) = self.extent {
                    c.positive_scalar("extent", Some(e));
                }
                let z_offset = self.z_offset.unwrap_or(2.0 * spec.spacing);
                if !z_offset.is_finite() {
                    c.err("z_offset", "must be finite");
                }
                Some(MapSpec::Plane { z_offset, extent: self.extent, n_x: a, n_y: b })
            }
            other => {
                c.err("map", format!("unknown map '{other}' (sphere, plane)"));
                None
            }
        };
        Some(Plan::Field { layout: layout?, state: state?, state_label, map: map? })
    }
}

//! Declarative experiment runner: flat key=value configs, scheme dispatch,
//! CSV outputs and convergence studies.
//!
//! Config files are plain text, one `key = value` per line, `#` comments.
//! Dotted keys group related settings (`potential.kind`, `time.cfl_ratio`).
//! Every output file starts with the full config echo as `# key=value`
//! header lines, which is enough to re-run the experiment exactly.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::alt::{burgers_step, energy_scheme_step, interface_upwind_step, u_from_rho};
use crate::error::{Error, Result};
use crate::grid::{discretize, CartesianGrid, DiscreteMeasure, InitialDatum};
use crate::metrics::{error_vs_reference, fit_rate, ErrorCurve, Metric, RateFit};
use crate::oracle::{
    exact_two_dirac_newtonian, exact_two_dirac_quadlinear, sticky_integrate, ParticleSystem,
};
use crate::potential::{energy, Potential};
use crate::record::{DiagRow, RunRecord};
use crate::simplicial::{tri_run, NodeMeasure, TriangularMesh};
use crate::upwind::{cfl_margin, run, step, SchemeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Upwind,
    Interface,
    Energy,
    Simplicial,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Upwind => "upwind",
            SchemeKind::Interface => "interface",
            SchemeKind::Energy => "energy",
            SchemeKind::Simplicial => "simplicial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceKind {
    None,
    TwoDiracQuadlinear,
    TwoDiracNewtonian,
    Sticky { dt_fine: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtSpec {
    Explicit(f64),
    /// The value of `w_inf * sum_i dt / dx_i` to hold; must be below 1/2.
    CflRatio(f64),
}

#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub run_csv: Option<PathBuf>,
    pub error_csv: Option<PathBuf>,
    pub rate_csv: Option<PathBuf>,
    /// Path prefix; dumps land at `<prefix>_t<time>.csv`.
    pub field_dump: Option<PathBuf>,
    pub field_dump_times: Vec<f64>,
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    echo: Vec<(String, String)>,
    pub domain_min: Vec<f64>,
    pub domain_max: Vec<f64>,
    pub n_cells: Vec<usize>,
    pub mesh_file: Option<PathBuf>,
    pub dt_spec: DtSpec,
    pub t_final: f64,
    pub potential: Potential,
    pub initial: InitialDatum,
    pub scheme: SchemeKind,
    pub reference: ReferenceKind,
    pub track_energy: bool,
    pub outputs: Outputs,
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: '{s}' is not a cell count")))
        })
        .collect()
}

/// Parse atoms written as `x1,...,xd : mass ; x1,...,xd : mass ; ...`.
fn parse_atoms(v: &str) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut out = Vec::new();
    for part in v.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (pos, mass) = part.split_once(':').ok_or_else(|| {
            Error::Config(format!("initial.atoms: expected 'x1,..,xd:mass', got '{part}'"))
        })?;
        out.push((parse_f64_list("initial.atoms", pos)?, parse_f64("initial.atoms", mass.trim())?));
    }
    if out.is_empty() {
        return Err(Error::Config("initial.atoms: no atoms given".into()));
    }
    Ok(out)
}

fn built_in_datum(kind: &str) -> Result<InitialDatum> {
    match kind {
        "gaussian_pair" => Ok(InitialDatum::Density(Arc::new(|x: &[f64]| {
            (-20.0 * (x[0] - 0.5).powi(2)).exp() + (-20.0 * (x[0] + 0.5).powi(2)).exp()
        }))),
        "three_bumps" => Ok(InitialDatum::Density(Arc::new(|x: &[f64]| {
            let b = |cx: f64, cy: f64| {
                (-100.0 * ((x[0] - cx).powi(2) + (x[1] - cy).powi(2))).exp()
            };
            b(0.25, 0.3) + b(0.77, 0.7) + 0.9 * b(0.37, 0.62)
        }))),
        "box_difference" => Ok(InitialDatum::IndicatorBoxDifference {
            outer: (vec![0.2, 0.2], vec![0.8, 0.8]),
            inner: (vec![0.3, 0.3], vec![0.7, 0.7]),
            height: 5.0,
        }),
        other => Err(Error::Config(format!("initial.kind: unknown datum '{other}'"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let map = parse_kv(text)?;
        let echo: Vec<(String, String)> =
            map.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let get = |key: &str| map.get(key).map(|s| s.as_str());
        let require = |key: &str| {
            get(key).ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
        };

        let scheme = match require("scheme")? {
            "upwind" => SchemeKind::Upwind,
            "interface" => SchemeKind::Interface,
            "energy" => SchemeKind::Energy,
            "simplicial" => SchemeKind::Simplicial,
            other => return Err(Error::Config(format!("scheme: unknown scheme '{other}'"))),
        };

        let mesh_file = get("mesh.file").map(PathBuf::from);
        let (domain_min, domain_max, n_cells);
        if scheme == SchemeKind::Simplicial {
            if mesh_file.is_none() {
                return Err(Error::Config("mesh.file: required for the simplicial scheme".into()));
            }
            domain_min = Vec::new();
            domain_max = Vec::new();
            n_cells = Vec::new();
        } else {
            domain_min = parse_f64_list("domain.min", require("domain.min")?)?;
            domain_max = parse_f64_list("domain.max", require("domain.max")?)?;
            n_cells = parse_usize_list("grid.n", require("grid.n")?)?;
            if domain_min.len() != domain_max.len() || domain_min.len() != n_cells.len() {
                return Err(Error::Config(
                    "domain.min, domain.max, grid.n: lengths must match".into(),
                ));
            }
        }

        let dt_spec = match (get("time.dt"), get("time.cfl_ratio")) {
            (Some(v), None) => DtSpec::Explicit(parse_f64("time.dt", v)?),
            (None, Some(v)) => {
                let r = parse_f64("time.cfl_ratio", v)?;
                if scheme != SchemeKind::Simplicial && r >= 0.5 {
                    return Err(Error::Config(format!(
                        "time.cfl_ratio: {r} is not strictly below 1/2"
                    )));
                }
                if !(r > 0.0) || r > 1.0 {
                    return Err(Error::Config(format!("time.cfl_ratio: {r} out of range")));
                }
                DtSpec::CflRatio(r)
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config("time.dt, time.cfl_ratio: give exactly one".into()))
            }
            (None, None) => {
                return Err(Error::Config("time.dt or time.cfl_ratio: one is required".into()))
            }
        };
        let t_final = parse_f64("time.t_final", require("time.t_final")?)?;
        if !(t_final >= 0.0) {
            return Err(Error::Config(format!("time.t_final: {t_final} must be nonnegative")));
        }

        let p_param = get("potential.a").map(|v| parse_f64("potential.a", v)).transpose()?;
        let potential = Potential::from_kind(require("potential.kind")?, p_param)?;

        let initial = match require("initial.kind")? {
            "atoms" => InitialDatum::Atoms(parse_atoms(require("initial.atoms")?)?),
            other => built_in_datum(other)?,
        };

        let reference = match get("reference").unwrap_or("none") {
            "none" => ReferenceKind::None,
            "two_dirac_quadlinear" => ReferenceKind::TwoDiracQuadlinear,
            "two_dirac_newtonian" => ReferenceKind::TwoDiracNewtonian,
            "sticky" => ReferenceKind::Sticky {
                dt_fine: get("reference.dt_fine")
                    .map(|v| parse_f64("reference.dt_fine", v))
                    .transpose()?
                    .unwrap_or(1e-5),
            },
            other => return Err(Error::Config(format!("reference: unknown reference '{other}'"))),
        };

        let track_energy = match get("diagnostics.energy").unwrap_or("false") {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Config(format!(
                    "diagnostics.energy: expected true or false, got '{other}'"
                )))
            }
        };

        let outputs = Outputs {
            run_csv: get("output.run_csv").map(PathBuf::from),
            error_csv: get("output.error_csv").map(PathBuf::from),
            rate_csv: get("output.rate_csv").map(PathBuf::from),
            field_dump: get("output.field_dump").map(PathBuf::from),
            field_dump_times: get("output.field_dump_times")
                .map(|v| parse_f64_list("output.field_dump_times", v))
                .transpose()?
                .unwrap_or_default(),
            gnuplot: get("output.gnuplot").map(PathBuf::from),
        };

        Ok(ExperimentConfig {
            echo,
            domain_min,
            domain_max,
            n_cells,
            mesh_file,
            dt_spec,
            t_final,
            potential,
            initial,
            scheme,
            reference,
            track_energy,
            outputs,
        })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        ExperimentConfig::parse(&text)
    }

    pub fn grid(&self) -> Result<Arc<CartesianGrid>> {
        Ok(Arc::new(CartesianGrid::from_domain(
            &self.domain_min,
            &self.domain_max,
            &self.n_cells,
        )?))
    }

    /// Resolve the time step on a Cartesian grid; checks the strict 1/2-CFL
    /// margin when a global gradient bound exists.
    pub fn resolve_dt(&self, grid: &CartesianGrid) -> Result<f64> {
        match self.dt_spec {
            DtSpec::Explicit(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::Config(format!("time.dt: {dt} must be positive")));
                }
                if let Some(w_inf) = self.potential.w_inf() {
                    let margin = cfl_margin(grid, dt, w_inf);
                    if margin <= 0.0 {
                        return Err(Error::CflViolation { margin, w_inf, dt });
                    }
                }
                Ok(dt)
            }
            DtSpec::CflRatio(r) => {
                let w_inf = self.potential.w_inf().ok_or(Error::UnboundedGradient)?;
                let inv_sum: f64 = grid.dx().iter().map(|&h| 1.0 / h).sum();
                Ok(r / (w_inf * inv_sum))
            }
        }
    }

    fn header(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.echo {
            writeln!(out, "# {k}={v}").unwrap();
        }
        out
    }
}

/// Write a file atomically: the content lands under its final name only as
/// a whole, via a temp file in the same directory.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(content.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

fn run_csv(cfg: &ExperimentConfig, record: &RunRecord, dim: usize) -> String {
    let mut out = cfg.header();
    writeln!(out, "# scheme={}", record.scheme).unwrap();
    let coms: Vec<String> = (1..=dim).map(|i| format!("com_{i}")).collect();
    writeln!(out, "n,t,mass,{},second_moment,energy", coms.join(",")).unwrap();
    for row in &record.rows {
        let com: Vec<String> = row.com.iter().map(|&c| fmt_f64(c)).collect();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.n,
            fmt_f64(row.t),
            fmt_f64(row.mass),
            com.join(","),
            fmt_f64(row.second_moment),
            row.energy.map(fmt_f64).unwrap_or_default()
        )
        .unwrap();
    }
    out
}

fn error_csv(cfg: &ExperimentConfig, curve: &ErrorCurve) -> String {
    let mut out = cfg.header();
    writeln!(out, "# metric={:?}", curve.metric).unwrap();
    writeln!(out, "n,t,error").unwrap();
    for &(n, t, e) in &curve.points {
        writeln!(out, "{n},{},{}", fmt_f64(t), fmt_f64(e)).unwrap();
    }
    out
}

fn field_dump_csv(cfg: &ExperimentConfig, m: &DiscreteMeasure) -> String {
    let d = m.grid().dim();
    let mut out = cfg.header();
    let js: Vec<String> = (1..=d).map(|i| format!("J{i}")).collect();
    let xs: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(out, "{},{},weight", js.join(","), xs.join(",")).unwrap();
    for (idx, &w) in m.weights() {
        let j: Vec<String> = idx.iter().map(|v| v.to_string()).collect();
        let x: Vec<String> = m.grid().cell_center(idx).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{},{},{}", j.join(","), x.join(","), fmt_f64(w)).unwrap();
    }
    out
}

fn field_dump_path(prefix: &Path, t: f64) -> PathBuf {
    let stem = prefix.to_string_lossy();
    PathBuf::from(format!("{stem}_t{t:.6}.csv"))
}

fn gnuplot_script(dumps: &[(f64, PathBuf)]) -> String {
    let mut out = String::from(
        "set datafile separator ','\nset view map\nset size ratio -1\nset palette rgb 33,13,10\n",
    );
    for (t, path) in dumps {
        writeln!(
            out,
            "set title 't = {t}'\nsplot '{}' using 3:4:5 with points pt 5 ps 0.6 palette notitle\npause -1",
            path.display()
        )
        .unwrap();
    }
    out
}

/// The reference trajectory as a function of time, in 1D atom form. Sample
/// times must be non-decreasing for the sticky reference, which advances
/// one particle system incrementally.
fn reference_fn<'a>(
    cfg: &'a ExperimentConfig,
) -> Result<Option<Box<dyn Fn(f64) -> Vec<(f64, f64)> + 'a>>> {
    let initial_atoms = || -> Result<Vec<(Vec<f64>, f64)>> {
        match &cfg.initial {
            InitialDatum::Atoms(a) => Ok(a.clone()),
            _ => Err(Error::Config(
                "reference: two-dirac and sticky references require initial.kind=atoms".into(),
            )),
        }
    };
    match &cfg.reference {
        ReferenceKind::None => Ok(None),
        ReferenceKind::TwoDiracQuadlinear => Ok(Some(Box::new(|t| {
            exact_two_dirac_quadlinear(t).atoms_1d().expect("1D by construction")
        }))),
        ReferenceKind::TwoDiracNewtonian => {
            let atoms = initial_atoms()?;
            if atoms.len() != 2 || atoms[0].0.len() != 1 {
                return Err(Error::Config(
                    "reference: two_dirac_newtonian needs exactly two 1D atoms".into(),
                ));
            }
            let mut xs = [atoms[0].0[0], atoms[1].0[0]];
            xs.sort_by(f64::total_cmp);
            Ok(Some(Box::new(move |t| {
                exact_two_dirac_newtonian(t, xs[0], xs[1]).atoms_1d().expect("1D")
            })))
        }
        ReferenceKind::Sticky { dt_fine } => {
            let dt_fine = *dt_fine;
            let ps = ParticleSystem::new(initial_atoms()?)?;
            let p = cfg.potential.clone();
            let state = RefCell::new(ps);
            Ok(Some(Box::new(move |t| {
                let mut cur = state.borrow_mut();
                if t > cur.time {
                    // Advance incrementally: sample times arrive in order.
                    *cur = sticky_integrate(&cur, &p, t, dt_fine).expect("positive dt_fine");
                }
                cur.atoms_1d().expect("sticky reference is 1D")
            })))
        }
    }
}

/// The outcome of one experiment: the trajectory record and the error
/// curves against the reference (1D runs with a reference only).
pub struct ExperimentResult {
    pub record: RunRecord,
    pub error_w2: Option<ErrorCurve>,
    pub error_w1: Option<ErrorCurve>,
    pub final_measure: Option<DiscreteMeasure>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.scheme == SchemeKind::Simplicial {
        return run_simplicial(cfg);
    }
    let grid = cfg.grid()?;
    let dt = cfg.resolve_dt(&grid)?;
    let initial = discretize(&cfg.initial, &grid)?;
    let dim = grid.dim();

    let mut dump_times = cfg.outputs.field_dump_times.clone();
    dump_times.sort_by(f64::total_cmp);
    let dumps: RefCell<Vec<(f64, DiscreteMeasure)>> = RefCell::new(Vec::new());
    let next_dump = RefCell::new(0usize);
    let final_state: RefCell<Option<DiscreteMeasure>> = RefCell::new(None);
    let want_snapshots = dim == 1 && cfg.reference != ReferenceKind::None;

    let observer = |_n: usize, t: f64, m: &DiscreteMeasure| {
        let mut k = next_dump.borrow_mut();
        // A dump time is served by the first step reaching it.
        while *k < dump_times.len() && t + 1e-12 >= dump_times[*k] {
            dumps.borrow_mut().push((dump_times[*k], m.clone()));
            *k += 1;
        }
        *final_state.borrow_mut() = Some(m.clone());
    };

    let record = match cfg.scheme {
        SchemeKind::Upwind => {
            let state = SchemeState::initial(initial.clone(), &cfg.potential, cfg.track_energy);
            run(state, &cfg.potential, dt, cfg.t_final, want_snapshots, |s| {
                observer(s.n, s.t, &s.measure)
            })?
        }
        SchemeKind::Interface | SchemeKind::Energy => {
            run_interface_like(cfg, initial.clone(), dt, &observer)?
        }
        SchemeKind::Simplicial => unreachable!(),
    };

    let (mut error_w2, mut error_w1) = (None, None);
    if want_snapshots {
        if let (Some(snaps), Some(rf)) = (record.snapshots_1d.as_ref(), reference_fn(cfg)?) {
            // Evaluate the reference once per time; both metrics share the
            // values (the sticky reference only advances forward).
            let table: BTreeMap<u64, Vec<(f64, f64)>> =
                snaps.iter().map(|(t, _)| (t.to_bits(), rf(*t))).collect();
            let lookup = |t: f64| table[&t.to_bits()].clone();
            error_w2 = Some(error_vs_reference(snaps, lookup, Metric::W2)?);
            error_w1 = Some(error_vs_reference(snaps, lookup, Metric::W1)?);
        }
    }

    let final_measure = Some(final_state.borrow_mut().take().unwrap_or(initial));

    write_outputs(cfg, &record, dim, error_w2.as_ref(), &dumps.borrow())?;
    Ok(ExperimentResult { record, error_w2, error_w1, final_measure })
}

fn run_interface_like(
    cfg: &ExperimentConfig,
    initial: DiscreteMeasure,
    dt: f64,
    observer: &dyn Fn(usize, f64, &DiscreteMeasure),
) -> Result<RunRecord> {
    let n_steps = if cfg.t_final > 0.0 { (cfg.t_final / dt).ceil() as usize } else { 0 };
    let mut record = RunRecord::new(cfg.scheme.name());
    let one_d = initial.grid().dim() == 1;
    if one_d && cfg.reference != ReferenceKind::None {
        record.snapshots_1d = Some(Vec::with_capacity(n_steps + 1));
    }
    let mut m = initial;
    let row = |n: usize, m: &DiscreteMeasure| -> DiagRow {
        DiagRow {
            n,
            t: n as f64 * dt,
            mass: m.mass(),
            com: m.center_of_mass(),
            second_moment: m.second_moment(),
            energy: cfg.track_energy.then(|| energy(&m.atoms(), &cfg.potential)),
        }
    };
    observer(0, 0.0, &m);
    record.rows.push(row(0, &m));
    if let Some(snaps) = record.snapshots_1d.as_mut() {
        snaps.push((0.0, m.atoms_1d()?));
    }
    for n in 1..=n_steps {
        let start = std::time::Instant::now();
        m = match cfg.scheme {
            SchemeKind::Interface => interface_upwind_step(&m, &cfg.potential, dt)?,
            SchemeKind::Energy => energy_scheme_step(&m, &cfg.potential, dt)?,
            _ => unreachable!(),
        };
        record.wall_seconds_per_step.push(start.elapsed().as_secs_f64());
        observer(n, n as f64 * dt, &m);
        record.rows.push(row(n, &m));
        if let Some(snaps) = record.snapshots_1d.as_mut() {
            snaps.push((n as f64 * dt, m.atoms_1d()?));
        }
    }
    Ok(record)
}

fn run_simplicial(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mesh_path = cfg.mesh_file.as_ref().expect("validated at parse time");
    let mesh = Arc::new(TriangularMesh::load(mesh_path)?);
    let w_inf = cfg.potential.w_inf().ok_or(Error::UnboundedGradient)?;
    let dt = match cfg.dt_spec {
        DtSpec::Explicit(dt) => dt,
        DtSpec::CflRatio(r) => r * mesh.hbar() / w_inf,
    };
    if w_inf * dt > mesh.hbar() {
        return Err(Error::CflViolation { margin: mesh.hbar() - w_inf * dt, w_inf, dt });
    }
    let initial = match &cfg.initial {
        InitialDatum::Density(f) => NodeMeasure::from_density(Arc::clone(&mesh), &**f)?,
        InitialDatum::Atoms(atoms) => {
            // Each atom is assigned to its nearest mesh node.
            let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
            let mut total = 0.0;
            for (pos, mass) in atoms {
                if pos.len() != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, actual: pos.len() });
                }
                let nearest = (0..mesh.nodes().len())
                    .min_by(|&a, &b| {
                        let da = (mesh.node(a)[0] - pos[0]).hypot(mesh.node(a)[1] - pos[1]);
                        let db = (mesh.node(b)[0] - pos[0]).hypot(mesh.node(b)[1] - pos[1]);
                        da.total_cmp(&db)
                    })
                    .expect("mesh has nodes");
                *weights.entry(nearest).or_insert(0.0) += mass;
                total += mass;
            }
            for w in weights.values_mut() {
                *w /= total;
            }
            NodeMeasure::from_weights(mesh, weights)?
        }
        InitialDatum::IndicatorBoxDifference { .. } => {
            return Err(Error::Config(
                "initial.kind: box_difference is Cartesian-only; use a density".into(),
            ))
        }
    };
    let record = tri_run(initial, &cfg.potential, dt, cfg.t_final, |_, _, _| {})?;
    write_outputs(cfg, &record, 2, None, &[])?;
    Ok(ExperimentResult { record, error_w2: None, error_w1: None, final_measure: None })
}

fn write_outputs(
    cfg: &ExperimentConfig,
    record: &RunRecord,
    dim: usize,
    error: Option<&ErrorCurve>,
    dumps: &[(f64, DiscreteMeasure)],
) -> Result<()> {
    if let Some(path) = &cfg.outputs.run_csv {
        write_atomic(path, &run_csv(cfg, record, dim))?;
    }
    if let (Some(path), Some(curve)) = (&cfg.outputs.error_csv, error) {
        write_atomic(path, &error_csv(cfg, curve))?;
    }
    let mut written = Vec::new();
    if let Some(prefix) = &cfg.outputs.field_dump {
        for (t, m) in dumps {
            let path = field_dump_path(prefix, *t);
            write_atomic(&path, &field_dump_csv(cfg, m))?;
            written.push((*t, path));
        }
    }
    if let Some(path) = &cfg.outputs.gnuplot {
        write_atomic(path, &gnuplot_script(&written))?;
    }
    Ok(())
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    pub e_max_w2: f64,
    pub e_max_w1: f64,
    /// Log-log slope over the levels seen so far; NaN for the first level.
    pub slope_running: f64,
}

pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub fit: RateFit,
}

fn lsq_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, e) in points {
        let (lx, ly) = (x.ln(), e.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Run the configured 1D experiment at each refinement level, holding the
/// CFL ratio fixed, and fit the error rate.
pub fn convergence_study(base: &ExperimentConfig, levels: &[usize]) -> Result<StudyResult> {
    if levels.len() < 3 {
        return Err(Error::Config(format!(
            "study needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if base.reference == ReferenceKind::None {
        return Err(Error::Config("reference: a study needs a reference solution".into()));
    }
    if !matches!(base.dt_spec, DtSpec::CflRatio(_)) {
        return Err(Error::Config(
            "time.cfl_ratio: a study scales dt with dx and needs a ratio, not time.dt".into(),
        ));
    }
    if base.domain_min.len() != 1 {
        return Err(Error::Config("grid.n: studies are one-dimensional".into()));
    }
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut pairs_w2: Vec<(f64, f64)> = Vec::new();
    let mut pairs_w1: Vec<(f64, f64)> = Vec::new();
    for &n in levels {
        let mut cfg = base.clone();
        cfg.n_cells = vec![n];
        // Per-level outputs are the caller's business; only the merged
        // study CSV is written here.
        cfg.outputs = Outputs::default();
        let grid = cfg.grid()?;
        let dt = cfg.resolve_dt(&grid)?;
        let result = run_experiment(&cfg)?;
        let e2 = result
            .error_w2
            .as_ref()
            .ok_or_else(|| Error::Config("reference: study run produced no error curve".into()))?
            .e_max();
        let e1 = result.error_w1.as_ref().expect("paired with error_w2").e_max();
        pairs_w2.push((grid.dx_max(), e2));
        pairs_w1.push((grid.dx_max(), e1));
        let slope = if pairs_w2.len() >= 2 { lsq_slope(&pairs_w2) } else { f64::NAN };
        rows.push(StudyRow {
            n_cells: n,
            dx: grid.dx_max(),
            dt,
            e_max_w2: e2,
            e_max_w1: e1,
            slope_running: slope,
        });
    }
    let fit = fit_rate(&pairs_w2)?;
    if let Some(path) = &base.outputs.rate_csv {
        write_atomic(path, &study_csv(base, &rows))?;
    }
    Ok(StudyResult { rows, fit })
}

fn study_csv(cfg: &ExperimentConfig, rows: &[StudyRow]) -> String {
    let mut out = cfg.header();
    writeln!(out, "n_cells,dx,dt,e_max_w2,e_max_w1,slope_running").unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_cells,
            fmt_f64(r.dx),
            fmt_f64(r.dt),
            fmt_f64(r.e_max_w2),
            fmt_f64(r.e_max_w1),
            if r.slope_running.is_nan() { String::new() } else { fmt_f64(r.slope_running) }
        )
        .unwrap();
    }
    out
}

/// The three-atom configuration whose interaction energy grows under the
/// upwind scheme: weights `1 - p, p/2, p/2` at `0, e1, e2` with `W = |x|`.
pub fn counterexample_measure(p: f64) -> Result<DiscreteMeasure> {
    if !(0.5 < p && p < 1.0) {
        return Err(Error::Config(format!("p: {p} must lie in (1/2, 1)")));
    }
    let grid = Arc::new(CartesianGrid::new(vec![1.0, 1.0], vec![-4, -4], vec![4, 4])?);
    let mut w = BTreeMap::new();
    w.insert(vec![0, 0], 1.0 - p);
    w.insert(vec![1, 0], p / 2.0);
    w.insert(vec![0, 1], p / 2.0);
    DiscreteMeasure::from_weights(grid, w)
}

pub struct CounterexampleResult {
    /// `(dt, energy(rho^1) - energy(rho^0))` per requested step size.
    pub increases: Vec<(f64, f64)>,
    /// Richardson-extrapolated dt-coefficient from the finest pair.
    pub coefficient: f64,
    /// The closed-form target `(sqrt(2) - 1) p^2 (2p - 1)`.
    pub target: f64,
}

/// Measure the one-step energy increase of the upwind scheme on the
/// counterexample configuration and extract its dt-coefficient.
pub fn counterexample(p: f64, dts: &[f64]) -> Result<CounterexampleResult> {
    if dts.len() < 2 {
        return Err(Error::Config("dts: need at least two step sizes".into()));
    }
    let mut dts = dts.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    for pair in dts.windows(2) {
        if (pair[0] / pair[1] - 2.0).abs() > 1e-9 {
            return Err(Error::Config(
                "dts: step sizes must halve from one to the next".into(),
            ));
        }
    }
    let pot = Potential::AbsScaled(1.0);
    let m0 = counterexample_measure(p)?;
    let e0 = energy(&m0.atoms(), &pot);
    let mut increases = Vec::new();
    for &dt in &dts {
        let s1 = step(&SchemeState::initial(m0.clone(), &pot, false), &pot, dt)?;
        increases.push((dt, energy(&s1.measure.atoms(), &pot) - e0));
    }
    // With f(h) = c h + a h^2, (4 f(h/2) - f(h)) / h recovers c exactly.
    let k = increases.len();
    let (h, fh) = increases[k - 2];
    let (_, fh2) = increases[k - 1];
    let coefficient = (4.0 * fh2 - fh) / h;
    let target = (2.0f64.sqrt() - 1.0) * p * p * (2.0 * p - 1.0);
    Ok(CounterexampleResult { increases, coefficient, target })
}

pub struct BurgersCheckResult {
    pub steps: usize,
    pub max_deviation: f64,
}

/// Run the configured 1D problem with both the upwind scheme and the
/// induced scalar scheme and report the largest cell-wise deviation of the
/// primitive variables over the whole trajectory.
pub fn burgers_check(cfg: &ExperimentConfig) -> Result<BurgersCheckResult> {
    if !matches!(cfg.potential, Potential::HalfAbs) {
        return Err(Error::Config(
            "potential.kind: burgers-check requires half_abs (W = |x|/2)".into(),
        ));
    }
    let grid = cfg.grid()?;
    if grid.dim() != 1 {
        return Err(Error::Config("grid.n: burgers-check is one-dimensional".into()));
    }
    let dt = cfg.resolve_dt(&grid)?;
    let m0 = discretize(&cfg.initial, &grid)?;
    let n_steps = if cfg.t_final > 0.0 { (cfg.t_final / dt).ceil() as usize } else { 0 };
    let mut u = u_from_rho(&m0)?;
    let mut s = SchemeState::initial(m0, &cfg.potential, false);
    let mut max_dev: f64 = 0.0;
    for _ in 0..n_steps {
        u = burgers_step(&u, dt)?;
        s = step(&s, &cfg.potential, dt)?;
        let v = u_from_rho(&s.measure)?;
        for (a, b) in u.values.iter().zip(&v.values) {
            max_dev = max_dev.max((a - b).abs());
        }
    }
    Ok(BurgersCheckResult { steps: n_steps, max_deviation: max_dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const BASE_1D: &str = "\
scheme = upwind
domain.min = -0.5
domain.max = 0.5
grid.n = 100
time.cfl_ratio = 0.45
time.t_final = 0.1
potential.kind = quad_linear
initial.kind = atoms
initial.atoms = -0.25:0.5; 0.25:0.5
reference = two_dirac_quadlinear
";

    #[test]
    fn parse_basic_config() {
        let cfg = ExperimentConfig::parse(BASE_1D).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::Upwind);
        assert_eq!(cfg.n_cells, vec![100]);
        assert_eq!(cfg.dt_spec, DtSpec::CflRatio(0.45));
        assert_eq!(cfg.reference, ReferenceKind::TwoDiracQuadlinear);
        let grid = cfg.grid().unwrap();
        // quad_linear has w_inf = 4: dt = 0.45 / (4 * 100).
        assert_relative_eq!(cfg.resolve_dt(&grid).unwrap(), 0.45 * 0.01 / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_strict_ratio() {
        let text = BASE_1D.replace("time.cfl_ratio = 0.45", "time.cfl_ratio = 0.5");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("cfl_ratio"));
    }

    #[test]
    fn rejects_unknown_scheme_and_missing_keys() {
        let text = BASE_1D.replace("scheme = upwind", "scheme = magic");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = BASE_1D.replace("time.t_final = 0.1", "");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("t_final"));
    }

    #[test]
    fn zero_horizon_run_has_single_row() {
        let text = BASE_1D.replace("time.t_final = 0.1", "time.t_final = 0");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.record.rows.len(), 1);
        assert_eq!(out.error_w2.unwrap().points.len(), 1);
    }

    #[test]
    fn error_curve_is_produced_and_small() {
        let cfg = ExperimentConfig::parse(BASE_1D).unwrap();
        let out = run_experiment(&cfg).unwrap();
        let e = out.error_w2.unwrap();
        assert!(e.e_max() > 0.0 && e.e_max() < 0.1, "e_max = {}", e.e_max());
    }

    #[test]
    fn study_slope_near_half() {
        let mut cfg = ExperimentConfig::parse(BASE_1D).unwrap();
        cfg.t_final = 0.2;
        let study = convergence_study(&cfg, &[25, 50, 100, 200]).unwrap();
        assert!(study.rows[0].slope_running.is_nan());
        assert!(
            study.fit.slope > 0.3 && study.fit.slope < 0.8,
            "slope = {}",
            study.fit.slope
        );
    }

    #[test]
    fn counterexample_matches_closed_form() {
        let out = counterexample(0.75, &[1e-3, 5e-4, 2.5e-4]).unwrap();
        assert_relative_eq!(out.target, 0.11649756441743303, max_relative = 1e-12);
        assert!(
            (out.coefficient - out.target).abs() / out.target < 0.01,
            "coefficient {} vs target {}",
            out.coefficient,
            out.target
        );
    }

    #[test]
    fn burgers_check_zero_deviation() {
        let text = "\
scheme = upwind
domain.min = -1.25
domain.max = 1.25
grid.n = 200
time.cfl_ratio = 0.45
time.t_final = 0.3
potential.kind = half_abs
initial.kind = gaussian_pair
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let out = burgers_check(&cfg).unwrap();
        assert!(out.steps > 0);
        assert!(out.max_deviation < 1e-12, "deviation {}", out.max_deviation);
    }

    #[test]
    fn outputs_are_written_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let run_path = dir.path().join("run.csv");
        let err_path = dir.path().join("err.csv");
        let text = format!(
            "{BASE_1D}output.run_csv = {}\noutput.error_csv = {}\n",
            run_path.display(),
            err_path.display()
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        run_experiment(&cfg).unwrap();
        let run_text = std::fs::read_to_string(&run_path).unwrap();
        assert!(run_text.starts_with("# "));
        assert!(run_text.contains("n,t,mass,com_1,second_moment,energy"));
        assert!(!run_text.contains('\r'));
        let err_text = std::fs::read_to_string(&err_path).unwrap();
        assert!(err_text.contains("n,t,error"));
    }

    #[test]
    fn identical_configs_produce_identical_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut texts = Vec::new();
        for name in ["a.csv", "b.csv"] {
            let path = dir.path().join(name);
            let text = format!("{BASE_1D}output.run_csv = {}\n", path.display());
            let cfg = ExperimentConfig::parse(&text).unwrap();
            run_experiment(&cfg).unwrap();
            // Strip the header echo, which contains the differing path.
            let body: String = std::fs::read_to_string(&path)
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with('#'))
                .collect();
            texts.push(body);
        }
        assert_eq!(texts[0], texts[1]);
    }

    #[test]
    fn field_dumps_and_gnuplot() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("field");
        let gp = dir.path().join("plot.gp");
        let text = format!(
            "\
scheme = upwind
domain.min = 0,0
domain.max = 1,1
grid.n = 20,20
time.dt = 0.001
time.t_final = 0.01
potential.kind = exp_pointy
potential.a = 5
initial.kind = three_bumps
output.field_dump = {}
output.field_dump_times = 0,0.01
output.gnuplot = {}
",
            prefix.display(),
            gp.display()
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        run_experiment(&cfg).unwrap();
        let dump0 = std::fs::read_to_string(dir.path().join("field_t0.000000.csv")).unwrap();
        assert!(dump0.contains("J1,J2,x1,x2,weight"));
        let script = std::fs::read_to_string(&gp).unwrap();
        assert!(script.contains("field_t0.010000.csv"));
    }

    #[test]
    fn simplicial_config_runs() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("mesh.txt");
        let mesh = TriangularMesh::structured(0.0, 0.0, 0.1, 10, 10).unwrap();
        std::fs::write(&mesh_path, mesh.to_text()).unwrap();
        let text = format!(
            "\
scheme = simplicial
mesh.file = {}
time.cfl_ratio = 0.9
time.t_final = 0.05
potential.kind = abs_scaled
potential.a = 1
initial.kind = three_bumps
",
            mesh_path.display()
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert!(out.record.rows.len() > 1);
        let last = out.record.rows.last().unwrap();
        assert_relative_eq!(last.mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sticky_reference_error_curve() {
        let text = "\
scheme = upwind
domain.min = -1
domain.max = 1
grid.n = 100
time.cfl_ratio = 0.45
time.t_final = 0.2
potential.kind = abs_scaled
potential.a = 1
initial.kind = atoms
initial.atoms = -0.25:0.5; 0.25:0.5
reference = sticky
reference.dt_fine = 0.001
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let out = run_experiment(&cfg).unwrap();
        let e = out.error_w2.unwrap();
        assert!(e.e_max() < 0.05, "e_max = {}", e.e_max());
    }
}

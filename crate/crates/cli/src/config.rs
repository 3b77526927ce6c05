//! Run configuration: built-in example systems, system description files,
//! and command-line overrides.
//!
//! A system is either one of the built-in examples (which carry an
//! executable nonlinearity) or a TOML file describing the linear part, the
//! sampling box, and where the nonlinearity data comes from: `delta =
//! "zero"` for a purely linear plant, or `delta = "data"` plus a `samples`
//! path pointing at a previously recorded CSV.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use robsyn::model::ConstrainInput;
use robsyn::sampling::DeltaOracle;
use robsyn::sdp::SolverOptions;
use robsyn::synthesis::SynthesisConfig;
use serde::Deserialize;

use crate::commands::CliError;

/// Where sample responses come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleKind {
    Example1,
    Example2,
    /// Identically zero nonlinearity (linear plant).
    Zero,
    /// Pre-recorded samples; there is no executable nonlinearity.
    Data { samples: PathBuf },
}

impl OracleKind {
    pub fn id(&self) -> &'static str {
        match self {
            OracleKind::Example1 => "example1",
            OracleKind::Example2 => "example2",
            OracleKind::Zero => "zero",
            OracleKind::Data { .. } => "data",
        }
    }

    /// Executable form, if one exists. `nx` sizes the zero oracle.
    pub fn executable(&self, nx: usize) -> Option<Box<dyn DeltaOracle>> {
        executable_oracle(self.id(), nx)
    }
}

/// Look an executable nonlinearity up by id.
pub fn executable_oracle(id: &str, nx: usize) -> Option<Box<dyn DeltaOracle>> {
    match id {
        "example1" => Some(Box::new(|dx: &DVector<f64>, du: &DVector<f64>| {
            DVector::from_vec(vec![
                -dx[0] * dx[1] + du[0] * du[0],
                dx[0] * dx[0] - du[0] * du[0],
            ])
        })),
        "example2" => Some(Box::new(|dx: &DVector<f64>, _du: &DVector<f64>| {
            DVector::from_vec(vec![0.0, 9.8 * (dx[0].sin() - dx[0])])
        })),
        "zero" => Some(Box::new(move |_dx: &DVector<f64>, _du: &DVector<f64>| {
            DVector::zeros(nx)
        })),
        _ => None,
    }
}

/// Simulation settings for the verification command.
#[derive(Debug, Clone, Copy)]
pub struct SimSettings {
    pub dt: f64,
    pub t_final: f64,
    /// Initial conditions on the boundary of the certified region.
    pub initial_conditions: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 30.0, initial_conditions: 12 }
    }
}

/// Fully resolved run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub name: String,
    pub oracle: OracleKind,
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub u0: DVector<f64>,
    /// Half extents of the sampled state box.
    pub x_extent: Vec<f64>,
    /// Half extents of the sampled input box.
    pub u_extent: Vec<f64>,
    /// Grid point counts, states first then inputs.
    pub grid: Vec<usize>,
    pub synthesis: SynthesisConfig,
    pub sim: SimSettings,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b1.ncols()
    }

    pub fn grid_counts(&self) -> (Vec<usize>, Vec<usize>) {
        let (x, u) = self.grid.split_at(self.nx());
        (x.to_vec(), u.to_vec())
    }
}

/// Command-line overrides applied on top of a system's defaults.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub grid: Option<Vec<usize>>,
    pub r_grid: Option<Vec<f64>>,
    pub alpha0: Option<f64>,
    pub alpha_tol: Option<f64>,
    pub n_max: Option<usize>,
    pub constrain_input: Option<ConstrainInput>,
}

/// Resolve a `--system` argument plus overrides into a full configuration.
pub fn resolve(
    system: &str,
    overrides: &Overrides,
    out_dir: &Path,
) -> Result<RunConfig, CliError> {
    let mut config = match system {
        "example1" => example1(out_dir),
        "example2" => example2(out_dir),
        path => from_file(Path::new(path), out_dir)?,
    };

    if let Some(grid) = &overrides.grid {
        config.grid = grid.clone();
    }
    if let Some(r_grid) = &overrides.r_grid {
        config.synthesis.r_grid = r_grid.clone();
    }
    if overrides.alpha0.is_some() {
        config.synthesis.alpha0 = overrides.alpha0;
    }
    if let Some(tol) = overrides.alpha_tol {
        config.synthesis.alpha_rel_tol = tol;
    }
    if let Some(n_max) = overrides.n_max {
        config.synthesis.n_max = n_max;
    }
    if let Some(ci) = overrides.constrain_input {
        config.synthesis.constrain_input = ci;
    }

    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<(), CliError> {
    let nx = config.nx();
    let nu = config.nu();
    if config.x_extent.len() != nx || config.u_extent.len() != nu {
        return Err(CliError::Input(format!(
            "system '{}': extents cover {}+{} dimensions, dynamics have {}+{}",
            config.name,
            config.x_extent.len(),
            config.u_extent.len(),
            nx,
            nu
        )));
    }
    if config.grid.len() != nx + nu {
        return Err(CliError::Usage(format!(
            "grid needs {} counts (states then inputs), got {}",
            nx + nu,
            config.grid.len()
        )));
    }
    if config.grid.iter().any(|&c| c < 3 || c % 2 == 0) {
        return Err(CliError::Usage(
            "grid counts must be odd and at least 3 so the grid contains the equilibrium".into(),
        ));
    }
    if config.synthesis.r_grid.is_empty()
        || config.synthesis.r_grid.iter().any(|&r| !r.is_finite() || r <= 0.0)
    {
        return Err(CliError::Usage("r grid must be nonempty with positive entries".into()));
    }
    if let Some(a0) = config.synthesis.alpha0 {
        if !a0.is_finite() || a0 <= 0.0 {
            return Err(CliError::Usage("alpha0 must be positive".into()));
        }
    }
    if !(config.synthesis.alpha_rel_tol > 0.0 && config.synthesis.alpha_rel_tol < 1.0) {
        return Err(CliError::Usage("alpha tolerance must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Two-state plant with a bilinear/quadratic nonlinearity entering both
/// state equations; the input appears in the nonlinearity, so the input
/// constraint resolves to on.
fn example1(out_dir: &Path) -> RunConfig {
    let mut synthesis = SynthesisConfig::new(DMatrix::identity(2, 2), linspace(0.01, 0.5, 11));
    synthesis.constrain_input = ConstrainInput::Auto;
    RunConfig {
        name: "example1".into(),
        oracle: OracleKind::Example1,
        a: DMatrix::from_row_slice(2, 2, &[-0.1, 1.0, 0.0, -0.1]),
        b1: DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
        x0: DVector::zeros(2),
        u0: DVector::zeros(1),
        x_extent: vec![0.75, 0.75],
        u_extent: vec![0.55],
        grid: vec![31, 31, 31],
        synthesis,
        sim: SimSettings::default(),
        out_dir: out_dir.to_path_buf(),
    }
}

/// Inverted pendulum about the upright equilibrium; the nonlinearity
/// depends on the angle only, so the input constraint resolves to off and
/// the refinement rounds only polish the gain.
fn example2(out_dir: &Path) -> RunConfig {
    let mut synthesis = SynthesisConfig::new(DMatrix::identity(2, 2), vec![30.0]);
    synthesis.constrain_input = ConstrainInput::Off;
    RunConfig {
        name: "example2".into(),
        oracle: OracleKind::Example2,
        a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 9.8, -0.01]),
        b1: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        x0: DVector::zeros(2),
        u0: DVector::zeros(1),
        // The box corners pin the worst sampled sector ratio of
        // sin(x1) - x1 at |x1| = sqrt(2), and the largest certifiable
        // ellipsoid is the inscribed disk of that box.
        x_extent: vec![2.0_f64.sqrt(), 2.0_f64.sqrt()],
        u_extent: vec![30.0],
        grid: vec![31, 31, 3],
        synthesis,
        sim: SimSettings { t_final: 10.0, ..SimSettings::default() },
        out_dir: out_dir.to_path_buf(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    name: Option<String>,
    /// "zero" or "data".
    delta: String,
    /// Samples CSV, relative to the file; required when delta = "data".
    samples: Option<String>,
    dynamics: DynamicsSection,
    region: RegionSection,
    sampling: Option<SamplingSection>,
    synthesis: Option<SynthesisSection>,
    simulation: Option<SimulationSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsSection {
    a: Vec<Vec<f64>>,
    b1: Vec<Vec<f64>>,
    x0: Option<Vec<f64>>,
    u0: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSection {
    x_extent: Vec<f64>,
    u_extent: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingSection {
    grid: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthesisSection {
    r_grid: Option<Vec<f64>>,
    n_max: Option<usize>,
    constrain_input: Option<String>,
    alpha0: Option<f64>,
    alpha_tol: Option<f64>,
    growth: Option<f64>,
    v_floor: Option<f64>,
    w0: Option<Vec<Vec<f64>>>,
    sdp_tol: Option<f64>,
    sdp_max_iter: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    dt: Option<f64>,
    t_final: Option<f64>,
    initial_conditions: Option<usize>,
}

pub fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::Input(format!("matrix '{name}' is empty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input(format!("matrix '{name}' has ragged rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Input(format!("matrix '{name}' has non-finite entries")));
    }
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn from_file(path: &Path, out_dir: &Path) -> Result<RunConfig, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("system file not found: {}", path.display())));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let file: SystemFile = toml::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))?;

    let a = rows_to_matrix("a", &file.dynamics.a)?;
    let b1 = rows_to_matrix("b1", &file.dynamics.b1)?;
    let nx = a.nrows();
    let nu = b1.ncols();
    if a.ncols() != nx || b1.nrows() != nx {
        return Err(CliError::Input(format!(
            "dynamics shapes disagree: a is {}x{}, b1 is {}x{}",
            a.nrows(),
            a.ncols(),
            b1.nrows(),
            b1.ncols()
        )));
    }
    let x0 = DVector::from_vec(file.dynamics.x0.unwrap_or_else(|| vec![0.0; nx]));
    let u0 = DVector::from_vec(file.dynamics.u0.unwrap_or_else(|| vec![0.0; nu]));

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let oracle = match file.delta.as_str() {
        "zero" => OracleKind::Zero,
        "data" => {
            let rel = file.samples.ok_or_else(|| {
                CliError::Input(format!(
                    "{}: delta = \"data\" needs a samples path",
                    path.display()
                ))
            })?;
            OracleKind::Data { samples: base.join(rel) }
        }
        other => {
            return Err(CliError::Input(format!(
                "{}: unknown delta kind '{other}' (use \"zero\" or \"data\")",
                path.display()
            )))
        }
    };

    let grid = file
        .sampling
        .map(|s| s.grid)
        .unwrap_or_else(|| {
            let mut g = vec![31; nx];
            g.extend(std::iter::repeat(3).take(nu));
            g
        });

    let mut synthesis = SynthesisConfig::new(DMatrix::identity(nx, nx), vec![1.0]);
    if let Some(section) = file.synthesis {
        if let Some(w0) = section.w0 {
            synthesis.w0 = rows_to_matrix("w0", &w0)?;
        }
        if let Some(r_grid) = section.r_grid {
            synthesis.r_grid = r_grid;
        }
        if let Some(n_max) = section.n_max {
            synthesis.n_max = n_max;
        }
        if let Some(ci) = section.constrain_input {
            synthesis.constrain_input = parse_constrain_input(&ci)?;
        }
        if section.alpha0.is_some() {
            synthesis.alpha0 = section.alpha0;
        }
        if let Some(tol) = section.alpha_tol {
            synthesis.alpha_rel_tol = tol;
        }
        if let Some(growth) = section.growth {
            synthesis.alpha_growth = growth;
        }
        if let Some(v_floor) = section.v_floor {
            synthesis.v_floor = v_floor;
        }
        let mut sdp = SolverOptions::default();
        if let Some(tol) = section.sdp_tol {
            sdp.tol = tol;
        }
        if let Some(max_iter) = section.sdp_max_iter {
            sdp.max_iter = max_iter;
        }
        synthesis.sdp = sdp;
    }

    let mut sim = SimSettings::default();
    if let Some(section) = file.simulation {
        if let Some(dt) = section.dt {
            sim.dt = dt;
        }
        if let Some(t_final) = section.t_final {
            sim.t_final = t_final;
        }
        if let Some(count) = section.initial_conditions {
            sim.initial_conditions = count;
        }
    }

    let name = file.name.unwrap_or_else(|| {
        path.file_stem().map_or_else(|| "system".into(), |s| s.to_string_lossy().into_owned())
    });

    Ok(RunConfig {
        name,
        oracle,
        a,
        b1,
        x0,
        u0,
        x_extent: file.region.x_extent,
        u_extent: file.region.u_extent,
        grid,
        synthesis,
        sim,
        out_dir: out_dir.to_path_buf(),
    })
}

pub fn parse_constrain_input(s: &str) -> Result<ConstrainInput, CliError> {
    match s {
        "auto" => Ok(ConstrainInput::Auto),
        "on" => Ok(ConstrainInput::On),
        "off" => Ok(ConstrainInput::Off),
        other => Err(CliError::Usage(format!(
            "constrain-input must be auto, on, or off, got '{other}'"
        ))),
    }
}

pub fn constrain_input_id(ci: ConstrainInput) -> &'static str {
    match ci {
        ConstrainInput::Auto => "auto",
        ConstrainInput::On => "on",
        ConstrainInput::Off => "off",
    }
}

/// Parse `start:stop:count` (linear spacing, inclusive) or a bare value.
pub fn parse_r_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = |why: &str| CliError::Usage(format!("r-grid '{s}': {why}"));
    match parts.as_slice() {
        [single] => {
            let v: f64 = single.parse().map_err(|_| bad("not a number"))?;
            Ok(vec![v])
        }
        [start, stop, count] => {
            let start: f64 = start.parse().map_err(|_| bad("bad start"))?;
            let stop: f64 = stop.parse().map_err(|_| bad("bad stop"))?;
            let count: usize = count.parse().map_err(|_| bad("bad count"))?;
            if count == 0 {
                return Err(bad("count must be positive"));
            }
            if count == 1 && (start - stop).abs() > 0.0 {
                return Err(bad("a single point needs start = stop"));
            }
            Ok(linspace(start, stop, count))
        }
        _ => Err(bad("expected start:stop:count or a single value")),
    }
}

/// Parse comma-separated grid counts.
pub fn parse_grid(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("grid '{s}': '{p}' is not a count")))
        })
        .collect()
}

fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count)
        .map(|k| start + (stop - start) * (k as f64) / ((count - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_defaults_resolve() {
        let cfg = resolve("example1", &Overrides::default(), Path::new("out")).unwrap();
        assert_eq!(cfg.grid, vec![31, 31, 31]);
        assert_eq!(cfg.synthesis.r_grid.len(), 11);
        assert_eq!(cfg.synthesis.r_grid[0], 0.01);
        assert_eq!(cfg.synthesis.r_grid[10], 0.5);
        assert_eq!(cfg.nx(), 2);
        assert_eq!(cfg.nu(), 1);

        let cfg = resolve("example2", &Overrides::default(), Path::new("out")).unwrap();
        assert_eq!(cfg.synthesis.constrain_input, ConstrainInput::Off);
        assert_eq!(cfg.grid, vec![31, 31, 3]);
    }

    #[test]
    fn builtin_oracles_match_their_formulas() {
        let f = executable_oracle("example1", 2).unwrap();
        let dx = DVector::from_vec(vec![0.3, -0.2]);
        let du = DVector::from_vec(vec![0.4]);
        let d = f.eval(&dx, &du);
        assert_eq!(d[0], -(0.3 * -0.2) + 0.4 * 0.4);
        assert_eq!(d[1], 0.3 * 0.3 - 0.4 * 0.4);

        let f = executable_oracle("example2", 2).unwrap();
        let d = f.eval(&DVector::from_vec(vec![0.7, 9.0]), &DVector::from_vec(vec![3.0]));
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 9.8 * (0.7f64.sin() - 0.7));
    }

    #[test]
    fn missing_system_file_is_an_input_error_naming_the_path() {
        let err = resolve("no/such/system.toml", &Overrides::default(), Path::new("out"))
            .unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("no/such/system.toml"));
    }

    #[test]
    fn r_grid_syntax_round_trips() {
        assert_eq!(parse_r_grid("0.5").unwrap(), vec![0.5]);
        let grid = parse_r_grid("0.01:0.5:11").unwrap();
        assert_eq!(grid.len(), 11);
        assert!((grid[0] - 0.01).abs() < 1e-15);
        assert!((grid[10] - 0.5).abs() < 1e-15);
        assert!((grid[1] - grid[0] - 0.049).abs() < 1e-12);
        assert!(parse_r_grid("1:2").is_err());
        assert!(parse_r_grid("a:b:3").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let overrides = Overrides {
            grid: Some(vec![5, 5, 5]),
            r_grid: Some(vec![0.25]),
            alpha0: Some(0.1),
            alpha_tol: Some(0.05),
            n_max: Some(7),
            constrain_input: Some(ConstrainInput::On),
        };
        let cfg = resolve("example1", &overrides, Path::new("out")).unwrap();
        assert_eq!(cfg.grid, vec![5, 5, 5]);
        assert_eq!(cfg.synthesis.r_grid, vec![0.25]);
        assert_eq!(cfg.synthesis.alpha0, Some(0.1));
        assert_eq!(cfg.synthesis.alpha_rel_tol, 0.05);
        assert_eq!(cfg.synthesis.n_max, 7);
        assert_eq!(cfg.synthesis.constrain_input, ConstrainInput::On);
    }

    #[test]
    fn even_grid_counts_are_rejected() {
        let overrides = Overrides { grid: Some(vec![30, 31, 31]), ..Default::default() };
        let err = resolve("example1", &overrides, Path::new("out")).unwrap_err();
        assert_eq!(err.code(), 2);
    }

    #[test]
    fn system_file_parses_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plant.toml");
        std::fs::write(
            &path,
            r#"
delta = "zero"

[dynamics]
a = [[-1.0, 0.0], [0.0, -2.0]]
b1 = [[1.0], [0.5]]

[region]
x_extent = [1.0, 1.0]
u_extent = [2.0]

[synthesis]
r_grid = [2.0]
constrain_input = "off"
"#,
        )
        .unwrap();
        let cfg =
            resolve(path.to_str().unwrap(), &Overrides::default(), Path::new("out")).unwrap();
        assert_eq!(cfg.name, "plant");
        assert_eq!(cfg.oracle, OracleKind::Zero);
        assert_eq!(cfg.grid, vec![31, 31, 3]);
        assert_eq!(cfg.synthesis.r_grid, vec![2.0]);
        assert_eq!(cfg.synthesis.constrain_input, ConstrainInput::Off);
        assert_eq!(cfg.a[(1, 1)], -2.0);
    }

    #[test]
    fn data_systems_need_a_samples_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plant.toml");
        std::fs::write(
            &path,
            r#"
delta = "data"

[dynamics]
a = [[-1.0]]
b1 = [[1.0]]

[region]
x_extent = [1.0]
u_extent = [1.0]
"#,
        )
        .unwrap();
        let err = resolve(path.to_str().unwrap(), &Overrides::default(), Path::new("out"))
            .unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("samples"));
    }
}

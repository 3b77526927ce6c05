//! Grid sampling of the unknown nonlinearity, structure inference, and the
//! empirical per-channel gain bounds.
//!
//! The nonlinearity is available only as a point oracle
//! `delta(dx, du) in R^nx`. Sampling evaluates it on a tensor grid over a
//! box `X x U`, inference recovers which rows are active and which
//! coordinates drive them, and [`compute_gamma`] turns the samples that
//! fall inside a candidate region into per-channel gains
//! `gamma_i = max |w_i| / ||v_i||`.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{region_membership, BoxRegion, EllipsoidBallRegion, LftSystem, ModelError};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("grid count for {dim} must be an odd number >= 3, got {count}")]
    BadGridCount { dim: String, count: usize },
    #[error("grid spec has {got} counts, expected {expected} ({what})")]
    GridCounts { what: &'static str, expected: usize, got: usize },
    #[error("oracle returned {got} entries, expected {expected}")]
    OracleOutput { expected: usize, got: usize },
    #[error("oracle returned a non-finite value at dx = {dx:?}, du = {du:?}")]
    NonFinite { dx: Vec<f64>, du: Vec<f64> },
    #[error("oracle does not vanish at the equilibrium: |delta(0,0)| = {norm:.3e} exceeds 1e-12")]
    EquilibriumResidual { norm: f64 },
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("sample file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("samples do not form a complete tensor grid: {0}")]
    NotATensorGrid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no samples fall inside the candidate region")]
    EmptyRegion,
    #[error("channel {channel}: no retained sample has a driver vector above the floor; \
             the region is too small for the sampling grid")]
    NoRatioSamples { channel: usize },
    #[error("channel {channel}: |w| = {w:.3e} with ||v|| below the floor at dx = {dx:?}, du = {du:?}; \
             the gain is unbounded on this region")]
    UnboundedRatio { channel: usize, w: f64, dx: Vec<f64>, du: Vec<f64> },
}

/// Point oracle for the unknown nonlinearity, in deviation coordinates.
/// Implemented for any closure with the matching signature.
pub trait DeltaOracle {
    fn eval(&self, dx: &DVector<f64>, du: &DVector<f64>) -> DVector<f64>;
}

impl<F> DeltaOracle for F
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    fn eval(&self, dx: &DVector<f64>, du: &DVector<f64>) -> DVector<f64> {
        self(dx, du)
    }
}

/// One oracle evaluation.
#[derive(Debug, Clone)]
pub struct Sample {
    pub dx: DVector<f64>,
    pub du: DVector<f64>,
    pub delta: DVector<f64>,
}

/// Tensor-grid sample set. Points are stored in lexicographic index order
/// (state dimensions first, then input dimensions, last dimension fastest),
/// which the structure-inference pass relies on.
#[derive(Debug, Clone)]
pub struct SampleSet {
    x_box: BoxRegion,
    u_box: BoxRegion,
    x_values: Vec<Vec<f64>>,
    u_values: Vec<Vec<f64>>,
    points: Vec<Sample>,
}

impl SampleSet {
    pub fn nx(&self) -> usize {
        self.x_values.len()
    }

    pub fn nu(&self) -> usize {
        self.u_values.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Sample] {
        &self.points
    }

    pub fn x_box(&self) -> &BoxRegion {
        &self.x_box
    }

    pub fn u_box(&self) -> &BoxRegion {
        &self.u_box
    }

    /// Grid values along combined dimension `t` (states first, then inputs).
    fn axis_values(&self, t: usize) -> &[f64] {
        if t < self.nx() {
            &self.x_values[t]
        } else {
            &self.u_values[t - self.nx()]
        }
    }

    fn n_dims(&self) -> usize {
        self.nx() + self.nu()
    }

    /// Stride of combined dimension `t` in the lexicographic point order.
    fn stride(&self, t: usize) -> usize {
        (t + 1..self.n_dims()).map(|s| self.axis_values(s).len()).product()
    }

    /// Write the set as CSV with a `dx_*`, `du_*`, `delta_*` header. Values
    /// are printed with 17 significant digits so the round trip is exact.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), SamplingError> {
        let mut header = Vec::new();
        header.extend((1..=self.nx()).map(|i| format!("dx_{i}")));
        header.extend((1..=self.nu()).map(|i| format!("du_{i}")));
        header.extend((1..=self.nx()).map(|i| format!("delta_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p
                .dx
                .iter()
                .chain(p.du.iter())
                .chain(p.delta.iter())
                .map(|v| format!("{v:.16e}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Read a CSV produced by [`SampleSet::write_csv`] (or external data in
    /// the same layout). The rows must form a complete tensor grid; the
    /// grid values are recovered from the data itself.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, SamplingError> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or(SamplingError::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let header = header?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let nx = cols.iter().filter(|c| c.starts_with("dx_")).count();
        let nu = cols.iter().filter(|c| c.starts_with("du_")).count();
        let ndelta = cols.iter().filter(|c| c.starts_with("delta_")).count();
        if nx == 0 || ndelta != nx || cols.len() != 2 * nx + nu {
            return Err(SamplingError::Parse {
                line: 1,
                msg: format!("unexpected header `{header}`"),
            });
        }
        let mut points = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut vals = Vec::with_capacity(cols.len());
            for field in line.trim().split(',') {
                let v: f64 = field.trim().parse().map_err(|e| SamplingError::Parse {
                    line: idx + 1,
                    msg: format!("bad float `{field}`: {e}"),
                })?;
                vals.push(v);
            }
            if vals.len() != cols.len() {
                return Err(SamplingError::Parse {
                    line: idx + 1,
                    msg: format!("expected {} fields, got {}", cols.len(), vals.len()),
                });
            }
            points.push(Sample {
                dx: DVector::from_row_slice(&vals[..nx]),
                du: DVector::from_row_slice(&vals[nx..nx + nu]),
                delta: DVector::from_row_slice(&vals[nx + nu..]),
            });
        }
        Self::from_points(nx, nu, points)
    }

    /// Rebuild the tensor-grid bookkeeping from bare points.
    fn from_points(nx: usize, nu: usize, mut points: Vec<Sample>) -> Result<Self, SamplingError> {
        if points.is_empty() {
            return Err(SamplingError::NotATensorGrid("no data rows".into()));
        }
        let n_dims = nx + nu;
        let coord = |p: &Sample, t: usize| if t < nx { p.dx[t] } else { p.du[t - nx] };

        let mut values: Vec<Vec<f64>> = Vec::with_capacity(n_dims);
        for t in 0..n_dims {
            let mut vs: Vec<f64> = points.iter().map(|p| coord(p, t)).collect();
            vs.sort_by(|a, b| a.partial_cmp(b).expect("finite sample coordinates"));
            vs.dedup();
            values.push(vs);
        }
        let expected: usize = values.iter().map(Vec::len).product();
        if expected != points.len() {
            return Err(SamplingError::NotATensorGrid(format!(
                "{} rows but the coordinate values span a {} point grid",
                points.len(),
                expected
            )));
        }
        // Sort into lexicographic order and verify each grid node appears once.
        let index_of = |p: &Sample| -> Result<usize, SamplingError> {
            let mut idx = 0usize;
            for t in 0..n_dims {
                let v = coord(p, t);
                let pos = values[t]
                    .binary_search_by(|probe| probe.partial_cmp(&v).unwrap())
                    .map_err(|_| SamplingError::NotATensorGrid(format!(
                        "coordinate {v} not on the recovered axis {t}"
                    )))?;
                idx = idx * values[t].len() + pos;
            }
            Ok(idx)
        };
        let mut keyed: Vec<(usize, Sample)> = Vec::with_capacity(points.len());
        for p in points.drain(..) {
            keyed.push((index_of(&p)?, p));
        }
        keyed.sort_by_key(|(i, _)| *i);
        if keyed.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(SamplingError::NotATensorGrid("duplicate grid node".into()));
        }
        let points: Vec<Sample> = keyed.into_iter().map(|(_, p)| p).collect();

        let x_values = values[..nx].to_vec();
        let u_values = values[nx..].to_vec();
        let bounds = |vs: &[Vec<f64>]| -> Result<BoxRegion, ModelError> {
            let lower = DVector::from_iterator(vs.len(), vs.iter().map(|v| v[0]));
            let upper = DVector::from_iterator(vs.len(), vs.iter().map(|v| *v.last().unwrap()));
            BoxRegion::new(lower, upper)
        };
        Ok(Self {
            x_box: bounds(&x_values)?,
            u_box: bounds(&u_values)?,
            x_values,
            u_values,
            points,
        })
    }
}

fn grid_axis(lower: f64, upper: f64, count: usize, dim: &str) -> Result<Vec<f64>, SamplingError> {
    if count < 3 || count % 2 == 0 {
        return Err(SamplingError::BadGridCount { dim: dim.into(), count });
    }
    let span = upper - lower;
    Ok((0..count).map(|k| lower + span * (k as f64) / ((count - 1) as f64)).collect())
}

/// Evaluate the oracle on the tensor grid with `counts_x[i]` points along
/// state dimension `i` and `counts_u[j]` along input dimension `j`. Counts
/// must be odd and at least 3 so that a symmetric box grid contains the
/// equilibrium. The oracle must vanish at the equilibrium (within 1e-12)
/// and return finite values everywhere.
pub fn sample_grid(
    oracle: &dyn DeltaOracle,
    x_box: &BoxRegion,
    u_box: &BoxRegion,
    counts_x: &[usize],
    counts_u: &[usize],
) -> Result<SampleSet, SamplingError> {
    let nx = x_box.dim();
    let nu = u_box.dim();
    if counts_x.len() != nx {
        return Err(SamplingError::GridCounts { what: "state", expected: nx, got: counts_x.len() });
    }
    if counts_u.len() != nu {
        return Err(SamplingError::GridCounts { what: "input", expected: nu, got: counts_u.len() });
    }

    let zero_x = DVector::zeros(nx);
    let zero_u = DVector::zeros(nu);
    let at_origin = oracle.eval(&zero_x, &zero_u);
    if at_origin.len() != nx {
        return Err(SamplingError::OracleOutput { expected: nx, got: at_origin.len() });
    }
    let origin_norm = at_origin.norm();
    if !(origin_norm <= 1e-12) {
        return Err(SamplingError::EquilibriumResidual { norm: origin_norm });
    }

    let mut x_values = Vec::with_capacity(nx);
    for i in 0..nx {
        x_values.push(grid_axis(x_box.lower()[i], x_box.upper()[i], counts_x[i], &format!("x{}", i + 1))?);
    }
    let mut u_values = Vec::with_capacity(nu);
    for j in 0..nu {
        u_values.push(grid_axis(u_box.lower()[j], u_box.upper()[j], counts_u[j], &format!("u{}", j + 1))?);
    }

    let axis_len =
        |t: usize| if t < nx { x_values[t].len() } else { u_values[t - nx].len() };
    let total: usize = (0..nx + nu).map(axis_len).product();
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; nx + nu];
    for k in 0..total {
        // Decode k into the index tuple, last dimension fastest.
        let mut rem = k;
        for t in (0..nx + nu).rev() {
            idx[t] = rem % axis_len(t);
            rem /= axis_len(t);
        }
        let dx = DVector::from_iterator(nx, (0..nx).map(|t| x_values[t][idx[t]]));
        let du = DVector::from_iterator(nu, (0..nu).map(|t| u_values[t][idx[nx + t]]));
        let delta = oracle.eval(&dx, &du);
        if delta.len() != nx {
            return Err(SamplingError::OracleOutput { expected: nx, got: delta.len() });
        }
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(SamplingError::NonFinite {
                dx: dx.iter().copied().collect(),
                du: du.iter().copied().collect(),
            });
        }
        points.push(Sample { dx, du, delta });
    }

    Ok(SampleSet {
        x_box: x_box.clone(),
        u_box: u_box.clone(),
        x_values,
        u_values,
        points,
    })
}

/// Structure recovered from the samples: which state equations carry a
/// nonlinearity and which coordinates drive each one, together with the
/// selector realization `(B2, C_i, D_i)`.
#[derive(Debug, Clone)]
pub struct InferredStructure {
    /// State equations with a nonzero channel, ascending.
    pub nonzero_rows: Vec<usize>,
    /// Per channel, over the `nx + nu` combined coordinates.
    pub dependence: Vec<Vec<bool>>,
    pub b2: DMatrix<f64>,
    pub c: Vec<DMatrix<f64>>,
    pub d: Vec<DMatrix<f64>>,
}

impl InferredStructure {
    pub fn n_channels(&self) -> usize {
        self.nonzero_rows.len()
    }

    /// Combine the inferred realization with the known linear part.
    pub fn assemble_system(
        &self,
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        x0: DVector<f64>,
        u0: DVector<f64>,
    ) -> Result<LftSystem, ModelError> {
        LftSystem::new(a, b1, self.b2.clone(), self.c.clone(), self.d.clone(), x0, u0)
    }
}

/// Infer the channel structure from a tensor-grid sample set.
///
/// A state equation is active when some sample's `|delta_r|` exceeds
/// `zero_tol_rel` times the largest `|delta|` entry observed. Coordinate
/// `c` drives channel `i` exactly when two samples that differ only in
/// coordinate `c` produce different `delta_r` (beyond the same tolerance);
/// on a tensor grid it suffices to compare extremes along each grid line.
pub fn infer_structure(samples: &SampleSet, zero_tol_rel: f64) -> InferredStructure {
    let nx = samples.nx();
    let nu = samples.nu();
    let n_dims = nx + nu;

    let max_abs = samples
        .points
        .iter()
        .flat_map(|p| p.delta.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = zero_tol_rel * max_abs;

    let mut nonzero_rows: Vec<usize> = Vec::new();
    if max_abs > 0.0 {
        for r in 0..nx {
            if samples.points.iter().any(|p| p.delta[r].abs() > tol) {
                nonzero_rows.push(r);
            }
        }
    }

    let mut dependence = vec![vec![false; n_dims]; nonzero_rows.len()];
    for t in 0..n_dims {
        let count_t = samples.axis_values(t).len();
        let stride = samples.stride(t);
        // Walk every grid line along dimension t: lines start at indices
        // whose t-th digit is zero.
        for base in 0..samples.len() {
            if (base / stride) % count_t != 0 {
                continue;
            }
            for (ch, &row) in nonzero_rows.iter().enumerate() {
                if dependence[ch][t] {
                    continue;
                }
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for s in 0..count_t {
                    let v = samples.points[base + s * stride].delta[row];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi - lo > tol {
                    dependence[ch][t] = true;
                }
            }
            // Stop early once every channel is known to depend on t.
            if !dependence.is_empty() && dependence.iter().all(|d| d[t]) {
                break;
            }
        }
    }

    let n_w = nonzero_rows.len();
    let mut b2 = DMatrix::zeros(nx, n_w);
    let mut c = Vec::with_capacity(n_w);
    let mut d = Vec::with_capacity(n_w);
    for (ch, &row) in nonzero_rows.iter().enumerate() {
        b2[(row, ch)] = 1.0;
        let mut ci = DMatrix::zeros(nx + nu, nx);
        let mut di = DMatrix::zeros(nx + nu, nu);
        for t in 0..nx {
            if dependence[ch][t] {
                ci[(t, t)] = 1.0;
            }
        }
        for t in 0..nu {
            if dependence[ch][nx + t] {
                di[(nx + t, t)] = 1.0;
            }
        }
        c.push(ci);
        d.push(di);
    }

    InferredStructure { nonzero_rows, dependence, b2, c, d }
}

/// Empirical per-channel gains over a candidate region.
#[derive(Debug, Clone)]
pub struct NormBounds {
    pub gamma: Vec<f64>,
    /// Samples whose driver vector cleared the floor, per channel.
    pub n_used: Vec<usize>,
    pub region: EllipsoidBallRegion,
}

/// Compute `gamma_i = max |w_i| / ||v_i||` over the samples inside the
/// region, where `w_i` is the channel value and `v_i = C_i dx + D_i du`
/// its driver vector. Ratios are only formed when `||v_i|| >= v_floor`; a
/// sample with `||v_i||` below the floor but `|w_i|` above it makes the
/// gain unbounded and is an error, as is a channel with no usable sample.
pub fn compute_gamma(
    samples: &SampleSet,
    structure: &InferredStructure,
    region: &EllipsoidBallRegion,
    v_floor: f64,
) -> Result<NormBounds, SamplingError> {
    let n_w = structure.n_channels();
    let mut gamma = vec![0.0f64; n_w];
    let mut n_used = vec![0usize; n_w];
    let mut retained_any = false;

    for p in &samples.points {
        if !region_membership(region, &p.dx, &p.du) {
            continue;
        }
        retained_any = true;
        for i in 0..n_w {
            let v = &structure.c[i] * &p.dx + &structure.d[i] * &p.du;
            let v_norm = v.norm();
            let w = p.delta[structure.nonzero_rows[i]].abs();
            if v_norm >= v_floor {
                gamma[i] = gamma[i].max(w / v_norm);
                n_used[i] += 1;
            } else if w > v_floor {
                return Err(SamplingError::UnboundedRatio {
                    channel: i,
                    w,
                    dx: p.dx.iter().copied().collect(),
                    du: p.du.iter().copied().collect(),
                });
            }
        }
    }

    if !retained_any {
        return Err(SamplingError::EmptyRegion);
    }
    for i in 0..n_w {
        if n_used[i] == 0 {
            return Err(SamplingError::NoRatioSamples { channel: i });
        }
    }

    Ok(NormBounds { gamma, n_used, region: region.clone() })
}

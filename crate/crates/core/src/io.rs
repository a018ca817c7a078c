//! On-disk formats.
//!
//! Grid functions (`HGF1`): the 4-byte magic `HGF1`, a little-endian `u32`
//! header length, a UTF-8 JSON [`GridHeader`], then every value as a
//! little-endian `f64` in storage order (component-major; within a component
//! time-major, then lexicographic space).
//!
//! Corrector bundles (`HGB1`): magic, `u32` length, JSON [`BundleMeta`], then
//! one `HGF1` record per entry of `meta.fields` in that order.
//!
//! The CSV variants carry the same JSON header on a leading `# ` line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::{CorrectorSet, FluxMatrix, HomogenizedTensor};
use crate::coefficients::{CoefTensor, CoefficientField};
use crate::dual::DualCorrectorSet;
use crate::error::{HomogError, Result};
use crate::grid::{GridFunction, Scheme, SpaceTimeTorusGrid};
use crate::kernels::{KernelSample, SourceKind};

const GRID_MAGIC: &[u8; 4] = b"HGF1";
const BUNDLE_MAGIC: &[u8; 4] = b"HGB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub format: String,
    pub d: usize,
    pub n_space: usize,
    pub n_time: usize,
    /// Component tensor shape.
    pub shape: Vec<usize>,
    pub node_order: String,
    pub layout: String,
}

impl GridHeader {
    fn of(f: &GridFunction) -> Self {
        let g = f.grid();
        Self {
            format: "HGF1".into(),
            d: g.d(),
            n_space: g.n_space(),
            n_time: g.n_time(),
            shape: f.shape().to_vec(),
            node_order: "time-major".into(),
            layout: "component-major".into(),
        }
    }

    fn grid(&self) -> Result<SpaceTimeTorusGrid> {
        SpaceTimeTorusGrid::new(self.d, self.n_space, self.n_time)
    }

    fn value_count(&self) -> Result<usize> {
        let nodes = self.grid()?.node_count();
        Ok(nodes * self.shape.iter().product::<usize>())
    }
}

fn write_record<W: Write>(w: &mut W, magic: &[u8; 4], json: &[u8]) -> Result<()> {
    w.write_all(magic)?;
    let len = u32::try_from(json.len()).map_err(|_| HomogError::Format("header exceeds 4 GiB".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(json)?;
    Ok(())
}

fn read_record<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<Vec<u8>> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(HomogError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    Ok(json)
}

pub fn write_grid_function<W: Write>(w: &mut W, f: &GridFunction) -> Result<()> {
    write_record(w, GRID_MAGIC, &serde_json::to_vec(&GridHeader::of(f))?)?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_function<R: Read>(r: &mut R) -> Result<GridFunction> {
    let header: GridHeader = serde_json::from_slice(&read_record(r, GRID_MAGIC)?)?;
    let count = header.value_count()?;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridFunction::new(header.grid()?, header.shape, values)
}

pub fn save_grid_function(path: &Path, f: &GridFunction) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid_function(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_grid_function(path: &Path) -> Result<GridFunction> {
    read_grid_function(&mut BufReader::new(File::open(path)?))
}

/// One row per node: `node, s, y1[, y2], c0, c1, …`.
pub fn write_grid_function_csv<W: Write>(w: &mut W, f: &GridFunction) -> Result<()> {
    let g = f.grid();
    writeln!(w, "# {}", serde_json::to_string(&GridHeader::of(f))?)?;
    let mut cols = vec!["node".to_string(), "s".to_string()];
    cols.extend((1..=g.d()).map(|k| format!("y{k}")));
    cols.extend((0..f.n_components()).map(|c| format!("c{c}")));
    writeln!(w, "{}", cols.join(","))?;
    for node in 0..g.node_count() {
        let (y, s) = g.node_coords(node);
        let mut row = vec![node.to_string(), s.to_string()];
        row.extend(y.iter().map(|v| v.to_string()));
        row.extend((0..f.n_components()).map(|c| f.component(c)[node].to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_grid_function_csv<R: Read>(r: R) -> Result<GridFunction> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| HomogError::Format("empty CSV".into()))??;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| HomogError::Format("CSV must start with a '# {json}' header".into()))?;
    let header: GridHeader = serde_json::from_str(json)?;
    let grid = header.grid()?;
    lines.next().ok_or_else(|| HomogError::Format("missing column line".into()))??;
    let nodes = grid.node_count();
    let ncomp: usize = header.shape.iter().product();
    let skip = 2 + grid.d();
    let mut values = vec![0.0; nodes * ncomp];
    let mut seen = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != skip + ncomp {
            return Err(HomogError::Format(format!("row has {} fields, expected {}", fields.len(), skip + ncomp)));
        }
        let node: usize = fields[0]
            .parse()
            .map_err(|_| HomogError::Format(format!("bad node index {:?}", fields[0])))?;
        if node >= nodes {
            return Err(HomogError::Format(format!("node {node} out of range")));
        }
        for c in 0..ncomp {
            values[c * nodes + node] = fields[skip + c]
                .parse()
                .map_err(|_| HomogError::Format(format!("bad value {:?}", fields[skip + c])))?;
        }
        seen += 1;
    }
    if seen != nodes {
        return Err(HomogError::Format(format!("CSV has {seen} rows for {nodes} nodes")));
    }
    GridFunction::new(grid, header.shape, values)
}

/// JSON part of a corrector bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format: String,
    pub version: String,
    pub coefficient: CoefficientField,
    pub scheme: Scheme,
    pub a_hat: Vec<f64>,
    pub mu_check: f64,
    pub solve_residual: f64,
    #[serde(default)]
    pub harmonic_defect: Option<f64>,
    pub fields: Vec<String>,
}

/// Correctors, optionally with their dual correctors.
#[derive(Debug, Clone)]
pub struct CorrectorBundle {
    pub correctors: CorrectorSet,
    pub duals: Option<DualCorrectorSet>,
}

impl CorrectorBundle {
    pub fn meta(&self) -> BundleMeta {
        let c = &self.correctors;
        let mut fields: Vec<String> = ["chi", "grad_chi", "b"].iter().map(|s| s.to_string()).collect();
        if self.duals.is_some() {
            fields.extend(["f_pot", "phi", "grad_phi_spatial"].iter().map(|s| s.to_string()));
        }
        BundleMeta {
            format: "HGB1".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            coefficient: c.coefficient.clone(),
            scheme: c.scheme,
            a_hat: c.a_hat.a_hat.data().to_vec(),
            mu_check: c.a_hat.mu_check,
            solve_residual: c.solve_residual,
            harmonic_defect: self.duals.as_ref().map(|d| d.harmonic_defect),
            fields,
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_record(w, BUNDLE_MAGIC, &serde_json::to_vec(&self.meta())?)?;
        let c = &self.correctors;
        for f in [&c.chi, &c.grad_chi, &c.b_flux.b] {
            write_grid_function(w, f)?;
        }
        if let Some(d) = &self.duals {
            for f in [&d.f_pot, &d.phi, &d.grad_phi_spatial] {
                write_grid_function(w, f)?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let meta: BundleMeta = serde_json::from_slice(&read_record(r, BUNDLE_MAGIC)?)?;
        let mut fields = Vec::with_capacity(meta.fields.len());
        for _ in &meta.fields {
            fields.push(read_grid_function(r)?);
        }
        let take = |name: &str| -> Result<GridFunction> {
            meta.fields
                .iter()
                .position(|f| f == name)
                .map(|i| fields[i].clone())
                .ok_or_else(|| HomogError::Format(format!("bundle lacks field {name:?}")))
        };
        let field = &meta.coefficient;
        let a_hat = CoefTensor::from_data(field.d(), field.m(), meta.a_hat.clone())?;
        let correctors = CorrectorSet {
            chi: take("chi")?,
            grad_chi: take("grad_chi")?,
            a_hat: HomogenizedTensor::new(a_hat),
            b_flux: FluxMatrix { b: take("b")? },
            solve_residual: meta.solve_residual,
            scheme: meta.scheme,
            coefficient: field.clone(),
        };
        let duals = if meta.fields.iter().any(|f| f == "phi") {
            Some(DualCorrectorSet {
                f_pot: take("f_pot")?,
                phi: take("phi")?,
                grad_phi_spatial: take("grad_phi_spatial")?,
                harmonic_defect: meta.harmonic_defect.unwrap_or(0.0),
                scheme: meta.scheme,
            })
        } else {
            None
        };
        Ok(Self { correctors, duals })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }
}

/// Everything in a [`KernelSample`] except the sampled arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub version: String,
    pub epsilon: f64,
    pub pole: (f64, f64),
    pub adjoint: bool,
    pub source: SourceKind,
    pub half_width: f64,
    pub h: f64,
    pub k: f64,
    pub mollifier_width: f64,
    /// `grad_x` in the CSV sits at `x + grad_offset`.
    pub grad_offset: f64,
    pub times: Vec<f64>,
    pub n_x: usize,
    pub mass: Vec<f64>,
}

impl KernelMeta {
    pub fn of(s: &KernelSample) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            epsilon: s.epsilon,
            pole: s.pole,
            adjoint: s.adjoint,
            source: s.source,
            half_width: s.half_width,
            h: s.h,
            k: s.k,
            mollifier_width: s.mollifier_width,
            grad_offset: s.grad_offset,
            times: s.times.clone(),
            n_x: s.n_x(),
            mass: s.mass.clone(),
        }
    }
}

/// Columns `x, t, alpha, beta, value[, grad_x]`, time-major.
pub fn write_kernel_csv<W: Write>(w: &mut W, s: &KernelSample) -> Result<()> {
    let with_grad = s.grad.is_some();
    writeln!(w, "x,t,alpha,beta,value{}", if with_grad { ",grad_x" } else { "" })?;
    for (ti, t) in s.times.iter().enumerate() {
        let row = s.row(ti);
        let grad = s.grad_row(ti);
        for (p, x) in s.x.iter().enumerate() {
            write!(w, "{x},{t},0,0,{}", row[p])?;
            if let Some(g) = grad {
                write!(w, ",{}", g[p])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Write `<stem>.csv` and `<stem>.json`; returns both paths.
pub fn save_kernel_sample(stem: &Path, s: &KernelSample) -> Result<(PathBuf, PathBuf)> {
    let csv = stem.with_extension("csv");
    let json = stem.with_extension("json");
    let mut w = BufWriter::new(File::create(&csv)?);
    write_kernel_csv(&mut w, s)?;
    w.flush()?;
    std::fs::write(&json, serde_json::to_string_pretty(&KernelMeta::of(s))? + "\n")?;
    Ok((csv, json))
}

pub fn load_kernel_sample(stem: &Path) -> Result<KernelSample> {
    let meta: KernelMeta = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let reader = BufReader::new(File::open(stem.with_extension("csv"))?);
    let mut lines = reader.lines();
    let head = lines.next().ok_or_else(|| HomogError::Format("empty kernel CSV".into()))??;
    let with_grad = head.ends_with(",grad_x");
    let total = meta.times.len() * meta.n_x;
    let mut x = Vec::with_capacity(meta.n_x);
    let mut values = Vec::with_capacity(total);
    let mut grad = with_grad.then(|| Vec::with_capacity(total));
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.parse().map_err(|_| HomogError::Format(format!("bad number {v:?}"))))
            .collect::<Result<_>>()?;
        if f.len() != if with_grad { 6 } else { 5 } {
            return Err(HomogError::Format(format!("kernel row has {} fields", f.len())));
        }
        if x.len() < meta.n_x {
            x.push(f[0]);
        }
        values.push(f[4]);
        if let Some(g) = grad.as_mut() {
            g.push(f[5]);
        }
    }
    if values.len() != total {
        return Err(HomogError::Format(format!("kernel CSV has {} rows, expected {total}", values.len())));
    }
    Ok(KernelSample {
        epsilon: meta.epsilon,
        pole: meta.pole,
        adjoint: meta.adjoint,
        source: meta.source,
        times: meta.times,
        x,
        values,
        grad,
        grad_offset: meta.grad_offset,
        mass: meta.mass,
        half_width: meta.half_width,
        h: meta.h,
        k: meta.k,
        mollifier_width: meta.mollifier_width,
    })
}

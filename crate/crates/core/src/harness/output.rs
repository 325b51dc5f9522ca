//! Run artifacts: metrics CSV, PGM frames, the run manifest and plain-text final states.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fv_solver::{DensityField, MetricRow};
use crate::geometry::Grid;
use crate::transport_metrics::BoundReport;

use super::config::RunConfig;

pub const METRICS_HEADER: &str = "t,pop,mass,linf,tv,support_ok,evac_frac";

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.t,
            r.pop,
            r.mass,
            r.linf,
            r.tv,
            u8::from(r.support_ok),
            r.evac_frac
        );
    }
    s
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::Config("metrics file has an unexpected header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::Config(format!("malformed metrics row {}: {l}", n + 2));
            if f.len() != 7 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(MetricRow {
                t: num(f[0])?,
                pop: f[1].parse().map_err(|_| bad())?,
                mass: num(f[2])?,
                linf: num(f[3])?,
                tv: num(f[4])?,
                support_ok: match f[5] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad()),
                },
                evac_frac: num(f[6])?,
            })
        })
        .collect()
}

/// Binary greyscale image, top row = largest `y`, grey = `clamp(ρ/ρ_display)·255`.
pub fn pgm_bytes(rho: &DensityField, rho_display: f64) -> Vec<u8> {
    let g = rho.grid();
    let mut out = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let v = (rho.values()[g.idx(i, j)] / rho_display).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

pub fn frame_name(pop: usize, step: usize) -> String {
    format!("frame_{pop}_{step}.pgm")
}

/// Header `nx ny dx dy ox oy`, then one row of values per grid row (bottom row first).
pub fn state_text(rho: &DensityField) -> String {
    let g = rho.grid();
    let mut s = format!("{} {} {} {} {} {}\n", g.nx, g.ny, g.dx, g.dy, g.origin[0], g.origin[1]);
    for j in 0..g.ny {
        let row: Vec<String> = (0..g.nx).map(|i| format!("{}", rho.values()[g.idx(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_state(text: &str) -> Result<DensityField> {
    let mut tokens = text.split_whitespace();
    let bad = |m: &str| Error::Config(format!("state file: {m}"));
    let mut next = |what: &str| tokens.next().ok_or_else(|| bad(&format!("missing {what}")));
    let nx: usize = next("nx")?.parse().map_err(|_| bad("nx"))?;
    let ny: usize = next("ny")?.parse().map_err(|_| bad("ny"))?;
    let mut h = [0.0; 4];
    for v in h.iter_mut() {
        *v = next("header")?.parse().map_err(|_| bad("header"))?;
    }
    let grid = Grid::new(nx, ny, h[0], h[1], [h[2], h[3]])?;
    let vals: Vec<f64> = tokens
        .map(|t| t.parse::<f64>().map_err(|_| bad("value")))
        .collect::<Result<_>>()?;
    DensityField::new(grid, vals)
}

/// Manifest: config echo, crate version, every constant used in a bound report, and the reports.
pub fn manifest_toml(cfg: &RunConfig, label: &str, constants: &[(String, f64)], reports: &[BoundReport]) -> String {
    let mut root = toml::Table::new();
    let mut meta = toml::Table::new();
    meta.insert("crate_version".into(), env!("CARGO_PKG_VERSION").into());
    meta.insert("run".into(), label.into());
    root.insert("manifest".into(), toml::Value::Table(meta));
    root.insert(
        "config".into(),
        toml::Value::try_from(cfg).expect("config serializes"),
    );
    let mut consts = toml::Table::new();
    for (k, v) in constants.iter().chain(reports.iter().flat_map(|r| r.constants.iter())) {
        consts.insert(k.clone(), (*v).into());
    }
    root.insert("constants".into(), toml::Value::Table(consts));
    let bounds: Vec<toml::Value> = reports
        .iter()
        .map(|r| {
            let mut t = toml::Table::new();
            t.insert("name".into(), r.name.clone().into());
            t.insert("lhs".into(), r.lhs.into());
            t.insert("rhs".into(), r.rhs.into());
            t.insert("margin".into(), r.margin.into());
            t.insert("satisfied".into(), r.satisfied.into());
            t.insert(
                "constants".into(),
                toml::Value::Array(r.constants.iter().map(|(k, _)| k.clone().into()).collect()),
            );
            toml::Value::Table(t)
        })
        .collect();
    root.insert("bound".into(), toml::Value::Array(bounds));
    toml::to_string(&root).expect("manifest serializes")
}

pub(crate) fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

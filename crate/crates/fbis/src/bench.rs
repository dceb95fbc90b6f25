//! Monte-Carlo benchmark runner for the screening and iterative-selection tables.
//!
//! Replicate `r` of every cell trains on seed `seed_base + r`; Table 2 test sets
//! use seed `seed_base + r + TEST_SEED_OFFSET`. Replicates run on the current
//! rayon pool and are reduced in a fixed order, so results do not depend on
//! the number of threads.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fbis_core::datagen::{gen_example, Example, SimSpec};
use fbis_core::ifbis::{ifbis_run, IfbisConfig};
use fbis_core::metrics::{evaluate_selection, mean_and_se, mspe};
use fbis_core::screening::{marginal_scores, sis_rank, ScreeningConfig};

use crate::io::format_float;

pub const TEST_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub example: Example,
    pub rho: f64,
    pub sigma2: f64,
}

impl Cell {
    pub fn new(example: Example, rho: f64, sigma2: f64) -> Self {
        Cell { example, rho, sigma2 }
    }

    /// The four `(ρ, σ²)` combinations `{0, 0.5} × {1, 2}` for each example.
    pub fn full_grid(examples: &[Example]) -> Vec<Cell> {
        let mut grid = Vec::new();
        for &example in examples {
            for rho in [0.0, 0.5] {
                for sigma2 in [1.0, 2.0] {
                    grid.push(Cell::new(example, rho, sigma2));
                }
            }
        }
        grid
    }

    /// Parses `example:rho:sigma2[,example:rho:sigma2…]`, e.g. `2:0:1,3:0.5:2`.
    pub fn parse_grid(text: &str) -> Result<Vec<Cell>, String> {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|item| {
                let parts: Vec<&str> = item.trim().split(':').collect();
                let [ex, rho, sigma2] = parts.as_slice() else {
                    return Err(format!("grid cell {item:?} is not example:rho:sigma2"));
                };
                let example = ex
                    .parse::<u8>()
                    .ok()
                    .and_then(Example::from_number)
                    .ok_or_else(|| format!("unknown example {ex:?}"))?;
                let rho = rho.parse().map_err(|_| format!("bad rho {rho:?}"))?;
                let sigma2 = sigma2.parse().map_err(|_| format!("bad sigma2 {sigma2:?}"))?;
                Ok(Cell::new(example, rho, sigma2))
            })
            .collect()
    }

    fn spec(&self, n: usize, p: usize, seed: u64) -> SimSpec {
        SimSpec {
            example: self.example,
            n,
            p,
            rho: self.rho,
            sigma2: self.sigma2,
            seed,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ex{}({},{})", self.example.number(), self.rho, self.sigma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fbis,
    Sis,
    Ifbis,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fbis => "fbis",
            Method::Sis => "sis",
            Method::Ifbis => "ifbis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Config {
    pub grid: Vec<Cell>,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub top_k: usize,
    pub seed_base: u64,
    pub methods: Vec<Method>,
    pub screening: ScreeningConfig,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            grid: Cell::full_grid(&[Example::Ex1, Example::Ex2, Example::Ex3]),
            n: 400,
            p: 1000,
            reps: 100,
            top_k: 20,
            seed_base: 0,
            methods: vec![Method::Fbis, Method::Sis],
            screening: ScreeningConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Config {
    pub grid: Vec<Cell>,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub test_n: usize,
    pub seed_base: u64,
    pub ifbis: IfbisConfig,
}

impl Default for Table2Config {
    fn default() -> Self {
        Table2Config {
            grid: Cell::full_grid(&[Example::Ex1, Example::Ex2, Example::Ex3]),
            n: 400,
            p: 1000,
            reps: 100,
            test_n: 10_000,
            seed_base: 0,
            ifbis: IfbisConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub method: Method,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over `√reps`; 0 for a single replicate.
    pub se: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub reps: usize,
    pub cells: Vec<CellResult>,
    /// SHA-256 of the serialized configuration, seeds included.
    pub fingerprint: String,
}

impl BenchResult {
    pub fn get(&self, cell: Cell, method: Method, metric: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.cell == cell && c.method == method && c.metric == metric)
    }

    /// Long-format CSV: `example,rho,sigma2,method,metric,mean,se,reps`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["example", "rho", "sigma2", "method", "metric", "mean", "se", "reps"])?;
        for c in &self.cells {
            w.write_record([
                c.cell.example.number().to_string(),
                c.cell.rho.to_string(),
                c.cell.sigma2.to_string(),
                c.method.name().to_string(),
                c.metric.clone(),
                format_float(c.mean),
                format_float(c.se),
                c.values.len().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One human-readable line per cell.
    pub fn summary(&self) -> String {
        self.cells
            .iter()
            .map(|c| format!("{} {} {}: {:.3} ({:.3})\n", c.cell, c.method.name(), c.metric, c.mean, c.se))
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{cell} replicate {replicate}: {source}")]
pub struct BenchError {
    pub cell: String,
    pub replicate: usize,
    pub source: fbis_core::Error,
}

fn fingerprint<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn aggregate(cell: Cell, method: Method, metric: &str, values: Vec<f64>) -> CellResult {
    let (mean, se) = mean_and_se(&values);
    CellResult {
        cell,
        method,
        metric: metric.to_string(),
        mean,
        se,
        values,
    }
}

/// Runs `job` for every (cell, replicate) pair in parallel and returns the
/// outputs grouped by cell in replicate order.
fn run_grid<T, F>(grid: &[Cell], reps: usize, job: F) -> Result<Vec<Vec<T>>, BenchError>
where
    T: Send,
    F: Fn(Cell, usize) -> fbis_core::Result<T> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..reps).map(move |r| (c, r))).collect();
    let outputs: Vec<T> = jobs
        .par_iter()
        .map(|&(c, r)| {
            job(grid[c], r).map_err(|source| BenchError {
                cell: grid[c].to_string(),
                replicate: r,
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut grouped: Vec<Vec<T>> = (0..grid.len()).map(|_| Vec::with_capacity(reps)).collect();
    for ((c, _), out) in jobs.into_iter().zip(outputs) {
        grouped[c].push(out);
    }
    Ok(grouped)
}

fn captured(ranking: &[usize], top_k: usize, truth: &[usize]) -> f64 {
    let top = &ranking[..top_k.min(ranking.len())];
    truth.iter().filter(|j| top.contains(j)).count() as f64
}

/// Number of true variables among the `top_k` ranked by each method.
pub fn run_table1(cfg: &Table1Config) -> Result<BenchResult, BenchError> {
    let outputs = run_grid(&cfg.grid, cfg.reps, |cell, r| {
        let data = gen_example(&cell.spec(cfg.n, cfg.p, cfg.seed_base + r as u64))?;
        let truth = cell.example.truth();
        cfg.methods
            .iter()
            .map(|&m| {
                let ranking = match m {
                    Method::Fbis => marginal_scores(&data, &cfg.screening)?.ranking(),
                    Method::Sis => sis_rank(&data),
                    Method::Ifbis => return Err(fbis_core::Error::Unsupported("IFBIS has no ranking")),
                };
                Ok(captured(&ranking, cfg.top_k, &truth))
            })
            .collect::<fbis_core::Result<Vec<f64>>>()
    })?;
    let mut cells = Vec::new();
    for (cell, reps) in cfg.grid.iter().zip(outputs) {
        for (k, &m) in cfg.methods.iter().enumerate() {
            let values = reps.iter().map(|v| v[k]).collect();
            cells.push(aggregate(*cell, m, "captured", values));
        }
    }
    Ok(BenchResult {
        reps: cfg.reps,
        cells,
        fingerprint: fingerprint(cfg),
    })
}

/// IFBIS false positives, false negatives and test-set MSPE.
pub fn run_table2(cfg: &Table2Config) -> Result<BenchResult, BenchError> {
    let outputs = run_grid(&cfg.grid, cfg.reps, |cell, r| {
        let seed = cfg.seed_base + r as u64;
        let train = gen_example(&cell.spec(cfg.n, cfg.p, seed))?;
        let test = gen_example(&cell.spec(cfg.test_n, cfg.p, seed + TEST_SEED_OFFSET))?;
        let trace = ifbis_run(&train, &cfg.ifbis)?;
        let counts = evaluate_selection(&trace.final_set, &cell.example.truth(), cfg.p)?;
        let error = mspe(|t| trace.predict(&train, t, &cfg.ifbis), &test)?;
        Ok([counts.false_positives as f64, counts.false_negatives as f64, error])
    })?;
    let mut cells = Vec::new();
    for (cell, reps) in cfg.grid.iter().zip(outputs) {
        for (k, metric) in ["fp", "fn", "mspe"].into_iter().enumerate() {
            let values = reps.iter().map(|v| v[k]).collect();
            cells.push(aggregate(*cell, Method::Ifbis, metric, values));
        }
    }
    Ok(BenchResult {
        reps: cfg.reps,
        cells,
        fingerprint: fingerprint(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = Cell::parse_grid("2:0:1, 3:0.5:2").unwrap();
        assert_eq!(g, vec![Cell::new(Example::Ex2, 0.0, 1.0), Cell::new(Example::Ex3, 0.5, 2.0)]);
        assert!(Cell::parse_grid("4:0:1").is_err());
        assert!(Cell::parse_grid("1:0").is_err());
        assert_eq!(Cell::full_grid(&[Example::Ex1]).len(), 4);
    }

    #[test]
    fn empty_grid_is_empty_result() {
        let cfg = Table2Config {
            grid: Vec::new(),
            ..Table2Config::default()
        };
        let r = run_table2(&cfg).unwrap();
        assert!(r.cells.is_empty());
        assert_eq!(r.fingerprint.len(), 64);
    }

    #[test]
    fn single_replicate_has_zero_se() {
        let cfg = Table1Config {
            grid: vec![Cell::new(Example::Ex2, 0.0, 1.0)],
            n: 60,
            p: 20,
            reps: 1,
            top_k: 5,
            ..Table1Config::default()
        };
        let r = run_table1(&cfg).unwrap();
        assert_eq!(r.cells.len(), 2);
        assert!(r.cells.iter().all(|c| c.se == 0.0 && c.values.len() == 1));
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("example,rho,sigma2,method,metric,mean,se,reps\n2,0,1,fbis,captured,"));
    }
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::ChainConfig;
use super::McmcError;
use crate::stats;

const MAGIC: &[u8; 8] = b"SMKDRAWS";
const VERSION: u32 = 1;

/// Retained posterior draws: one row per retained iteration, chains stacked
/// in order, one column per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    data: Vec<f64>,
    n_chains: usize,
    pub config: ChainConfig,
    /// Post-burn-in Metropolis acceptance rate per block, averaged over chains.
    pub acceptance: BTreeMap<String, f64>,
    /// Free-form metadata attached by the producing model.
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    names: Vec<String>,
    n_rows: usize,
    n_chains: usize,
    config: ChainConfig,
    acceptance: BTreeMap<String, f64>,
    #[serde(default)]
    meta: serde_json::Value,
}

impl PosteriorDraws {
    pub fn new(
        names: Vec<String>,
        data: Vec<f64>,
        n_chains: usize,
        config: ChainConfig,
        acceptance: BTreeMap<String, f64>,
    ) -> Result<Self, McmcError> {
        if names.is_empty() || data.len() % names.len() != 0 {
            return Err(McmcError::Format(format!(
                "{} values do not fill {} columns",
                data.len(),
                names.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(McmcError::NonFiniteDraw {
                parameter: names[i % names.len()].clone(),
            });
        }
        Ok(PosteriorDraws {
            names,
            data,
            n_chains,
            config,
            acceptance,
            meta: serde_json::Value::Null,
        })
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.names.len()
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    pub fn rows_per_chain(&self) -> usize {
        self.n_rows() / self.n_chains.max(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|j| self.column_at(j))
    }

    pub fn column_at(&self, j: usize) -> Vec<f64> {
        self.data.iter().skip(j).step_by(self.n_params()).copied().collect()
    }

    /// Column values from a single chain.
    pub fn chain_column(&self, chain: usize, j: usize) -> Vec<f64> {
        let per = self.rows_per_chain();
        (chain * per..(chain + 1) * per).map(|i| self.row(i)[j]).collect()
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.column(name).map(|c| stats::mean(&c))
    }

    pub fn quantile(&self, name: &str, p: f64) -> Option<f64> {
        self.column(name).map(|c| stats::quantile(&c, p))
    }

    /// Column-wise posterior means in `names` order.
    pub fn means(&self) -> Vec<f64> {
        let p = self.n_params();
        let mut out = vec![0.0; p];
        for row in self.data.chunks(p) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let n = self.n_rows() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    fn header(&self) -> Header {
        Header {
            names: self.names.clone(),
            n_rows: self.n_rows(),
            n_chains: self.n_chains,
            config: self.config,
            acceptance: self.acceptance.clone(),
            meta: self.meta.clone(),
        }
    }

    fn from_header(h: Header, data: Vec<f64>) -> Result<Self, McmcError> {
        if data.len() != h.n_rows * h.names.len() {
            return Err(McmcError::Format(format!(
                "expected {} rows, found {}",
                h.n_rows,
                data.len() / h.names.len().max(1)
            )));
        }
        Ok(PosteriorDraws::new(h.names, data, h.n_chains, h.config, h.acceptance)?.with_meta(h.meta))
    }

    /// CSV with a leading `#`-prefixed JSON metadata line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), McmcError> {
        let mut w = BufWriter::new(w);
        let meta = serde_json::to_string(&self.header()).map_err(|e| McmcError::Format(e.to_string()))?;
        writeln!(w, "# {meta}")?;
        writeln!(w, "{}", self.names.join(","))?;
        for row in self.data.chunks(self.n_params()) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, McmcError> {
        let mut r = BufReader::new(r);
        let mut first = String::new();
        r.read_line(&mut first)?;
        let json = first
            .strip_prefix("# ")
            .ok_or_else(|| McmcError::Format("missing metadata line".into()))?;
        let header: Header = serde_json::from_str(json.trim()).map_err(|e| McmcError::Format(e.to_string()))?;
        let mut reader = csv::Reader::from_reader(r);
        let mut data = Vec::with_capacity(header.n_rows * header.names.len());
        for rec in reader.records() {
            let rec = rec.map_err(|e| McmcError::Format(e.to_string()))?;
            for field in rec.iter() {
                data.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| McmcError::Format(format!("bad value `{field}`")))?,
                );
            }
        }
        Self::from_header(header, data)
    }

    /// Binary layout: magic, u32 version, u64 header length, JSON header,
    /// then little-endian f64 values row by row.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<(), McmcError> {
        let mut w = BufWriter::new(w);
        let header = serde_json::to_vec(&self.header()).map_err(|e| McmcError::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self, McmcError> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(McmcError::Format("not a draws file".into()));
        }
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b)?;
        let version = u32::from_le_bytes(u32b);
        if version != VERSION {
            return Err(McmcError::Format(format!("unsupported draws version {version}")));
        }
        let mut u64b = [0u8; 8];
        r.read_exact(&mut u64b)?;
        let mut header = vec![0u8; u64::from_le_bytes(u64b) as usize];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header).map_err(|e| McmcError::Format(e.to_string()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(McmcError::Format("truncated value section".into()));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_header(header, data)
    }

    /// Saves as CSV when the extension is `csv`, binary otherwise.
    pub fn save(&self, path: &Path) -> Result<(), McmcError> {
        let f = File::create(path)?;
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(f)
        } else {
            self.write_binary(f)
        }
    }

    /// Loads either format, detected from the file's leading bytes.
    pub fn load(path: &Path) -> Result<Self, McmcError> {
        let mut f = File::open(path)?;
        let mut magic = [0u8; 8];
        let n = f.read(&mut magic)?;
        let f = File::open(path)?;
        if n == 8 && &magic == MAGIC {
            Self::read_binary(f)
        } else {
            Self::read_csv(f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PosteriorDraws {
        let cfg = ChainConfig {
            n_iterations: 10,
            burn_in: 4,
            thin: 2,
            n_chains: 2,
            seed: 3,
            adaptation_window: 5,
        };
        let data = vec![0.1, 1.0 / 3.0, -2.5e-300, 7.0, 1e10, 0.2, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let mut acc = BTreeMap::new();
        acc.insert("theta".to_string(), 0.31);
        PosteriorDraws::new(vec!["a".into(), "b".into()], data, 2, cfg, acc)
            .unwrap()
            .with_meta(serde_json::json!({"model": "toy"}))
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(PosteriorDraws::read_csv(&buf[..]).unwrap(), d);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(PosteriorDraws::read_binary(&buf[..]).unwrap(), d);
    }

    #[test]
    fn save_and_load_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample();
        for name in ["d.csv", "d.bin"] {
            let p = dir.path().join(name);
            d.save(&p).unwrap();
            assert_eq!(PosteriorDraws::load(&p).unwrap(), d);
        }
    }

    #[test]
    fn accessors() {
        let d = sample();
        assert_eq!(d.n_rows(), 6);
        assert_eq!(d.rows_per_chain(), 3);
        assert_eq!(d.column("b").unwrap(), vec![1.0 / 3.0, 7.0, 0.2, 4.0, 6.0, 8.0]);
        assert_eq!(d.chain_column(1, 0), vec![3.0, 5.0, 7.0]);
        assert!(d.column("zzz").is_none());
    }

    #[test]
    fn non_finite_rejected() {
        let cfg = ChainConfig::e0ns_default();
        let err = PosteriorDraws::new(vec!["x".into()], vec![f64::NAN], 1, cfg, BTreeMap::new()).unwrap_err();
        assert!(matches!(err, McmcError::NonFiniteDraw { .. }));
    }
}

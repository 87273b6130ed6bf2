//! Named, shape-tagged matrices in JSON:
//!
//! ```text
//! {"format":"speedhist-checkpoint","version":1,
//!  "arrays":[{"name":"encoder.0","shape":[5,32],"data":[...row-major...]}]}
//! ```
//!
//! Floats are written with round-trip precision, so a save/load cycle is
//! exact.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT: &str = "speedhist-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    arrays: Vec<Entry>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, array: &Array2<f64>) {
        self.arrays.push(Entry {
            name: name.into(),
            shape: [array.nrows(), array.ncols()],
            data: array.iter().copied().collect(),
        });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|e| e.name.as_str())
    }

    /// Looks up `name` and checks it has the expected shape.
    pub fn get(&self, name: &str, shape: (usize, usize)) -> Result<Array2<f64>> {
        let entry = self
            .arrays
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Config(format!("checkpoint has no array '{name}'")))?;
        if entry.shape != [shape.0, shape.1] {
            return Err(Error::Shape(format!(
                "checkpoint array '{name}' is {:?}, expected {:?}",
                entry.shape, shape
            )));
        }
        Array2::from_shape_vec(shape, entry.data.clone())
            .map_err(|e| Error::Shape(format!("checkpoint array '{name}': {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::json(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::json(path, e))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        for e in &ck.arrays {
            if e.shape[0] * e.shape[1] != e.data.len() {
                return Err(Error::Shape(format!(
                    "{}: array '{}' has {} values for shape {:?}",
                    path.display(),
                    e.name,
                    e.data.len(),
                    e.shape
                )));
            }
        }
        Ok(ck)
    }
}

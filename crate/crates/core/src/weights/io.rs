//! Flat binary serialization of conductance arrays: little-endian header
//! (u32 magic `0x434F4E44`, u32 rows, u32 cols) followed by `rows * cols`
//! f64 microsiemens values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::weights::ConductanceArray;

/// Magic number of the conductance file format.
pub const CONDUCTANCE_MAGIC: u32 = 0x434F_4E44;

/// Write an array; values are widened to f64 regardless of the scalar type.
pub fn write_conductance<F: Scalar, W: Write>(mut w: W, arr: &ConductanceArray<F>) -> Result<()> {
    w.write_u32::<LittleEndian>(CONDUCTANCE_MAGIC)?;
    w.write_u32::<LittleEndian>(arr.rows() as u32)?;
    w.write_u32::<LittleEndian>(arr.cols() as u32)?;
    for &v in arr.matrix().iter() {
        w.write_f64::<LittleEndian>(v.to_f64_c())?;
    }
    Ok(())
}

/// Read an array back; the generation record is not part of the format.
pub fn read_conductance<F: Scalar, R: Read>(mut r: R) -> Result<ConductanceArray<F>> {
    let magic = r.read_u32::<LittleEndian>()?;
    if magic != CONDUCTANCE_MAGIC {
        return Err(Error::BadFormat(format!(
            "bad conductance magic {magic:#010x}, expected {CONDUCTANCE_MAGIC:#010x}"
        )));
    }
    let rows = r.read_u32::<LittleEndian>()? as usize;
    let cols = r.read_u32::<LittleEndian>()? as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(F::from_f64_c(r.read_f64::<LittleEndian>()?));
    }
    let g = Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::BadFormat(format!("conductance shape: {e}")))?;
    ConductanceArray::from_matrix(g)
}

pub fn write_conductance_file<F: Scalar>(path: &Path, arr: &ConductanceArray<F>) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    write_conductance(&mut w, arr)?;
    w.flush()?;
    Ok(())
}

pub fn read_conductance_file<F: Scalar>(path: &Path) -> Result<ConductanceArray<F>> {
    let f = File::open(path)?;
    read_conductance(BufReader::new(f))
}

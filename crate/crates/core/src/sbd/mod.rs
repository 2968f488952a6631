//! Selected-basis diagonalization: the projected Hamiltonian over an
//! explicit configuration list, applied without storing matrix elements.

mod basis;
mod davidson;
mod matvec;
mod select;

use std::io::{BufRead, Write};

use thiserror::Error;

pub use basis::{DoubleLink, SingleLink, SpinTable, SubspaceBasis};
pub use davidson::{solve_ground_state, GroundStateResult, SolveTimings, SolverOptions};
pub(crate) use davidson::{dot, fix_sign};
pub use matvec::{apply_hamiltonian, apply_hamiltonian_into};
pub use select::{extend_basis, top_count, trim_by_amplitude, ExtendOptions, Keep};

use crate::configs::Configuration;

#[derive(Debug, Error)]
pub enum SbdError {
    #[error("configuration does not match the system: {0}")]
    SpecMismatch(String),
    #[error("empty basis")]
    EmptyBasis,
    #[error("Davidson did not converge: residual {:.3e} after {} iterations", .0.residual_norm, .0.iterations)]
    NoConvergence(Box<GroundStateResult>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SbdError {
    /// Best iterate of a failed solve.
    pub fn best_iterate(&self) -> Option<&GroundStateResult> {
        match self {
            SbdError::NoConvergence(r) => Some(r),
            _ => None,
        }
    }
}

/// Amplitudes aligned with a basis' configuration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubspaceVector {
    coeffs: Vec<f64>,
}

impl SubspaceVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        SubspaceVector { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        SubspaceVector { coeffs: vec![0.0; len] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs).sqrt()
    }
}

/// Writes `<alpha> <beta> <coefficient>` lines with 17 significant digits.
pub fn write_snapshot<W: Write>(basis: &SubspaceBasis, v: &SubspaceVector, mut out: W) -> std::io::Result<()> {
    let norb = basis.spec().norb;
    for (c, x) in basis.configs().iter().zip(v.coeffs()) {
        writeln!(out, "{} {:.16e}", c.to_text(norb), x)?;
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Vec<(Configuration, f64)>, SbdError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.is_empty() {
            continue;
        }
        let err = |message: String| SbdError::Parse { line: idx + 1, message };
        if parts.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", parts.len())));
        }
        let c = Configuration::parse(parts[0], parts[1]).map_err(|e| err(e.to_string()))?;
        let x: f64 = parts[2].parse().map_err(|_| err(format!("bad coefficient {:?}", parts[2])))?;
        out.push((c, x));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;

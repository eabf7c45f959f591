//! Dense complex matrices and partial-pivoting LU solves.
//!
//! Factorization is delegated to `faer`'s blocked LU; this module adds the
//! row-major storage used by assembly, pivot checks, residuals and the
//! growth factor.

use std::io::Write;
use std::path::Path;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::{Conj, Mat, Par};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for a {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise difference to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`,
    /// scaled by `scale`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix, scale: f64) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)] * scale;
            }
        }
    }

    /// Writes the binary dump: `"HBEM"`, `u32` rows, `u32` cols, 12 zero
    /// bytes, then little-endian row-major `(re, im)` pairs.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let rows = u32::try_from(self.rows).map_err(|_| Error::Dimension("too many rows for dump".into()))?;
        let cols = u32::try_from(self.cols).map_err(|_| Error::Dimension("too many columns for dump".into()))?;
        out.write_all(b"HBEM")?;
        out.write_all(&rows.to_le_bytes())?;
        out.write_all(&cols.to_le_bytes())?;
        out.write_all(&[0u8; 12])?;
        for z in &self.data {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a dump written by [`DenseMatrix::write_dump`].
    pub fn read_dump(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.len() < 24 || &bytes[0..4] != b"HBEM" {
            return Err(Error::Io(format!("{} is not a matrix dump", path.display())));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[24..];
        if body.len() != rows * cols * 16 {
            return Err(Error::Io(format!("{} has a truncated body", path.display())));
        }
        let data = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self { rows, cols, data })
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `PA = LU` with unit lower `L` and upper `U` stored in one matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Mat<Complex64>,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
    /// `max |U| / max |A|`.
    pub growth_factor: f64,
    /// Smallest pivot modulus relative to `max |A|`.
    pub min_pivot: f64,
    parallel: bool,
}

fn par(parallel: bool) -> Par {
    if parallel {
        Par::rayon(0)
    } else {
        Par::Seq
    }
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "right-hand side of length {} for dimension {n}",
                b.len()
            )));
        }
        let mut rhs = Mat::<Complex64>::from_fn(n, 1, |i, _| b[i]);
        let p = par(self.parallel);
        let mut mem = MemBuffer::new(solve::solve_in_place_scratch::<usize, Complex64>(n, 1, p));
        let perm = unsafe { faer::perm::PermRef::new_unchecked(&self.perm, &self.perm_inv, n) };
        solve::solve_in_place_with_conj(
            self.lu.as_ref(),
            self.lu.as_ref(),
            perm,
            Conj::No,
            rhs.as_mut(),
            p,
            MemStack::new(&mut mem),
        );
        Ok((0..n).map(|i| rhs[(i, 0)]).collect())
    }
}

/// Partial-pivoting LU of a square matrix.
///
/// Fails with the pivot index when a pivot is below `n·ε·max|A|`.
pub fn lu_factor(a: &DenseMatrix, parallel: bool) -> Result<LuFactors> {
    if a.rows != a.cols {
        return Err(Error::Dimension(format!(
            "LU of a non-square {}x{} matrix",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    if a.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Dimension("matrix has non-finite entries".into()));
    }
    let amax = a.max_abs();
    let mut lu = Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)]);
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let p = par(parallel);
    let mut mem = MemBuffer::new(factor::lu_in_place_scratch::<usize, Complex64>(
        n,
        n,
        p,
        Default::default(),
    ));
    factor::lu_in_place(
        lu.as_mut(),
        &mut perm,
        &mut perm_inv,
        p,
        MemStack::new(&mut mem),
        Default::default(),
    );
    let threshold = n as f64 * f64::EPSILON * amax;
    let mut umax: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        for i in 0..=j {
            umax = umax.max(lu[(i, j)].norm());
        }
        let piv = lu[(j, j)].norm();
        min_pivot = min_pivot.min(piv);
        if !(piv > threshold) {
            return Err(Error::SingularMatrix { pivot: j });
        }
    }
    Ok(LuFactors {
        lu,
        perm,
        perm_inv,
        growth_factor: if amax > 0.0 { umax / amax } else { f64::INFINITY },
        min_pivot: if amax > 0.0 { min_pivot / amax } else { 0.0 },
        parallel,
    })
}

/// Solves `Ax = b` serially.
pub fn lu_solve(a: &DenseMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if b.len() != a.rows {
        return Err(Error::Dimension(format!(
            "right-hand side of length {} for {} rows",
            b.len(),
            a.rows
        )));
    }
    lu_factor(a, false)?.solve(b)
}

/// `‖Ax − b‖∞ / (‖A‖∞ ‖x‖∞)`.
pub fn relative_residual(a: &DenseMatrix, x: &[Complex64], b: &[Complex64]) -> Result<f64> {
    let ax = a.matvec(x)?;
    let r = ax.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    let xn = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let denom = a.norm_inf() * xn;
    Ok(if denom > 0.0 { r / denom } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_solve() {
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.0)];
        assert_eq!(lu_solve(&DenseMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn permutation_solve() {
        let a = DenseMatrix::from_row_major(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let x = lu_solve(&a, &[c(2.0, 1.0), c(5.0, -1.0)]).unwrap();
        assert_eq!(x, vec![c(5.0, -1.0), c(2.0, 1.0)]);
    }

    #[test]
    fn random_system_residual() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) + if i == j { c(4.0, 0.0) } else { c(0.0, 0.0) }
        });
        let b: Vec<Complex64> = (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = lu_factor(&a, false).unwrap();
        let x = f.solve(&b).unwrap();
        assert!(relative_residual(&a, &x, &b).unwrap() <= 1e-10);
        assert!(f.growth_factor.is_finite() && f.growth_factor > 0.0);
        let again = lu_solve(&a, &b).unwrap();
        assert_eq!(x, again);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = DenseMatrix::from_row_major(
            3,
            3,
            vec![
                c(1.0, 0.0),
                c(2.0, 0.0),
                c(3.0, 0.0),
                c(2.0, 0.0),
                c(4.0, 0.0),
                c(6.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 1.0),
                c(0.0, 0.0),
            ],
        )
        .unwrap();
        match lu_solve(&a, &[c(1.0, 0.0); 3]) {
            Err(Error::SingularMatrix { pivot }) => assert_eq!(pivot, 2),
            other => panic!("{other:?}"),
        }
        assert!(lu_solve(&DenseMatrix::zeros(2, 3), &[c(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let a = DenseMatrix::from_fn(3, 2, |i, j| c(i as f64, -(j as f64) * 0.5));
        a.write_dump(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[0..4], b"HBEM");
        assert_eq!(bytes.len(), 24 + 6 * 16);
        assert_eq!(DenseMatrix::read_dump(&p).unwrap(), a);
    }
}

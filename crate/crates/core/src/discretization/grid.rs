//! Uniform periodic torus grid and real-valued fields on it.

use super::DiscretizationError;
use crate::scalar::{real, to_f64, Real};
use std::io::{Read, Write};
use std::path::Path;

/// Uniform grid on the torus [0, T)^d with N nodes per axis, N a power of two.
/// Nodes are x_i = i h, h = T/N; flat indices are node-major with axis 0
/// slowest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid<T: Real, const D: usize> {
    pub n: usize,
    pub side: T,
}

impl<T: Real, const D: usize> TorusGrid<T, D> {
    pub fn new(n: usize, side: T) -> Result<Self, DiscretizationError> {
        if n < 4 || !n.is_power_of_two() {
            return Err(DiscretizationError::BadGridSize(n));
        }
        if !(side > T::zero()) {
            return Err(DiscretizationError::BadSide(to_f64(side)));
        }
        Ok(Self { n, side })
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.side / real(self.n as f64)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n.pow(D as u32)
    }

    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; D] {
        let mut out = [0usize; D];
        let mut rem = flat;
        for k in (0..D).rev() {
            out[k] = rem % self.n;
            rem /= self.n;
        }
        out
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; D]) -> usize {
        let mut flat = 0usize;
        for k in 0..D {
            flat = flat * self.n + idx[k];
        }
        flat
    }

    /// Physical coordinates of a node.
    #[inline]
    pub fn coords(&self, flat: usize) -> [T; D] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut out = [T::zero(); D];
        for k in 0..D {
            out[k] = real::<T>(idx[k] as f64) * h;
        }
        out
    }

    /// Offset coordinates mapped per axis to [-T/2, T/2).
    #[inline]
    pub fn centered_offset(&self, flat: usize) -> [T; D] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let half = self.n / 2;
        let mut out = [T::zero(); D];
        for k in 0..D {
            let signed = if idx[k] >= half {
                idx[k] as i64 - self.n as i64
            } else {
                idx[k] as i64
            };
            out[k] = real::<T>(signed as f64) * h;
        }
        out
    }

    /// Flat index of the mirrored offset (-delta mod N per axis).
    #[inline]
    pub fn mirror(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        let mut out = [0usize; D];
        for k in 0..D {
            out[k] = (self.n - idx[k]) % self.n;
        }
        self.flat_index(out)
    }

    /// Shift a node by an integer offset, wrapping on the torus.
    #[inline]
    pub fn shift(&self, flat: usize, by: [i64; D]) -> usize {
        let idx = self.multi_index(flat);
        let mut out = [0usize; D];
        let n = self.n as i64;
        for k in 0..D {
            out[k] = (idx[k] as i64 + by[k]).rem_euclid(n) as usize;
        }
        self.flat_index(out)
    }
}

/// Real samples on a torus grid with the h^d-weighted L2 pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField<T: Real, const D: usize> {
    pub grid: TorusGrid<T, D>,
    pub values: Vec<T>,
}

impl<T: Real, const D: usize> DiscreteField<T, D> {
    pub fn zeros(grid: TorusGrid<T, D>) -> Self {
        Self {
            values: vec![T::zero(); grid.node_count()],
            grid,
        }
    }

    pub fn from_fn(grid: TorusGrid<T, D>, f: impl Fn([T; D]) -> T) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    /// Cell volume h^d.
    #[inline]
    pub fn cell_volume(&self) -> T {
        self.grid.spacing().powi(D as i32)
    }

    pub fn inner(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let mut acc = T::zero();
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            acc = acc + *a * *b;
        }
        acc * self.cell_volume()
    }

    pub fn norm_l2(&self) -> T {
        self.inner(self).sqrt()
    }

    /// h^d sum of (u_{i+shift} - u_i)^2: the translation modulus used by the
    /// compactness diagnostics.
    pub fn translation_modulus(&self, shift: [i64; D]) -> T {
        let mut acc = T::zero();
        for i in 0..self.values.len() {
            let j = self.grid.shift(i, shift);
            let d = self.values[j] - self.values[i];
            acc = acc + d * d;
        }
        acc * self.cell_volume()
    }

    /// Flat binary format: header (d: u32, N: u32, T: f64, eps: f64, all
    /// little endian), then N^d node-major f64 samples. `eps` is 0 for fields
    /// that do not belong to an eps-problem.
    pub fn write_binary(&self, path: &Path, eps: f64) -> Result<(), DiscretizationError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&(D as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&to_f64(self.grid.side).to_le_bytes())?;
        w.write_all(&eps.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&to_f64(*v).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<(Self, f64), DiscretizationError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        if d != D {
            return Err(DiscretizationError::Corrupt(format!(
                "dimension {d} in file, expected {D}"
            )));
        }
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let side = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let eps = f64::from_le_bytes(b8);
        let grid = TorusGrid::new(n, real(side))?;
        let count = grid.node_count();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            values.push(real::<T>(f64::from_le_bytes(b8)));
        }
        Ok((Self { grid, values }, eps))
    }

    /// CSV with node coordinates, for small grids.
    pub fn write_csv(&self, path: &Path) -> Result<(), DiscretizationError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header = String::new();
        for k in 0..D {
            header.push_str(&format!("x{k},"));
        }
        header.push_str("value\n");
        w.write_all(header.as_bytes())?;
        for i in 0..self.values.len() {
            let x = self.grid.coords(i);
            let mut line = String::new();
            for c in x.iter() {
                line.push_str(&format!("{},", to_f64(*c)));
            }
            line.push_str(&format!("{}\n", to_f64(self.values[i])));
            w.write_all(line.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(TorusGrid::<f64, 1>::new(3, 1.0).is_err());
        assert!(TorusGrid::<f64, 1>::new(24, 1.0).is_err());
        assert!(TorusGrid::<f64, 1>::new(8, -1.0).is_err());
        assert!(TorusGrid::<f64, 1>::new(8, 1.0).is_ok());
    }

    #[test]
    fn index_round_trip_2d() {
        let g = TorusGrid::<f64, 2>::new(8, 2.0).unwrap();
        for flat in 0..g.node_count() {
            assert_eq!(g.flat_index(g.multi_index(flat)), flat);
        }
        assert_eq!(g.shift(g.flat_index([7, 0]), [1, -1]), g.flat_index([0, 7]));
    }

    #[test]
    fn norms_match_hand_computation() {
        let g = TorusGrid::<f64, 1>::new(4, 2.0).unwrap();
        let f = DiscreteField {
            grid: g,
            values: vec![1.0, -1.0, 2.0, 0.0],
        };
        // h = 0.5, sum u^2 = 6 -> norm = sqrt(3).
        assert_relative_eq!(f.norm_l2(), 3.0_f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn translation_modulus_basics() {
        let g = TorusGrid::<f64, 1>::new(8, 8.0).unwrap();
        let f = DiscreteField::from_fn(g, |x| (std::f64::consts::TAU * x[0] / 8.0).sin());
        assert_eq!(f.translation_modulus([0]), 0.0);
        let fwd = f.translation_modulus([3]);
        let bwd = f.translation_modulus([-3]);
        assert_relative_eq!(fwd, bwd, max_relative = 1e-13);
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        let g = TorusGrid::<f64, 2>::new(4, 1.0).unwrap();
        let f = DiscreteField::from_fn(g, |x| x[0] + 10.0 * x[1]);
        f.write_binary(&path, 0.25).unwrap();
        let (back, eps) = DiscreteField::<f64, 2>::read_binary(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(eps, 0.25);
    }

    #[test]
    fn f32_fields_work() {
        let g = TorusGrid::<f32, 1>::new(8, 1.0f32).unwrap();
        let f = DiscreteField::from_fn(g, |x| x[0]);
        assert!(f.norm_l2() > 0.0);
    }
}

//! Discrete location universe: coordinates, the Euclidean metric, and
//! target subsets.
//!
//! Every privacy constraint in this crate is expressed in terms of the
//! pairwise distances held here. Distances are precomputed at
//! construction; a `LocationSet` is immutable afterwards and safe to
//! share across threads.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Maximum universe size accepted by constructors. Policy synthesis cost
/// grows quickly with the location count, so v1 caps it.
pub const MAX_LOCATIONS: usize = 400;

/// Dense 0-based index of a location within a [`LocationSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocationId(pub usize);

impl LocationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finite set of locations with kilometer coordinates and a precomputed
/// Euclidean distance matrix.
#[derive(Debug, Clone)]
pub struct LocationSet {
    coords: Vec<(f64, f64)>,
    dist: Vec<f64>, // row-major n x n
}

impl LocationSet {
    /// Builds a set from explicit kilometer coordinates.
    ///
    /// Coordinates must be finite and pairwise distinct.
    pub fn from_coords(coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("location set must be non-empty"));
        }
        if coords.len() > MAX_LOCATIONS {
            return Err(Error::invalid(format!(
                "location count {} exceeds cap {MAX_LOCATIONS}",
                coords.len()
            )));
        }
        for (i, &(x, y)) in coords.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::invalid(format!("non-finite coordinates for location {i}")));
            }
        }
        for i in 0..coords.len() {
            for j in (i + 1)..coords.len() {
                if coords[i] == coords[j] {
                    return Err(Error::invalid(format!(
                        "locations {i} and {j} share coordinates {:?}",
                        coords[i]
                    )));
                }
            }
        }
        let n = coords.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let dx = coords[i].0 - coords[j].0;
                let dy = coords[i].1 - coords[j].1;
                dist[i * n + j] = (dx * dx + dy * dy).sqrt();
            }
        }
        Ok(LocationSet { coords, dist })
    }

    /// Builds a `rows x cols` grid of square cells with side `cell_km`;
    /// locations sit at cell centroids, in row-major order.
    pub fn build_grid(rows: usize, cols: usize, cell_km: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        if !(cell_km.is_finite() && cell_km > 0.0) {
            return Err(Error::invalid("cell size must be a positive real"));
        }
        let mut coords = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                coords.push(((c as f64 + 0.5) * cell_km, (r as f64 + 0.5) * cell_km));
            }
        }
        Self::from_coords(coords)
    }

    /// Loads a set from a CSV file with header `id,x_km,y_km`.
    ///
    /// Ids must be exactly `0..n-1` (any row order); parse errors name
    /// the offending line.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }

    /// Parses the locations CSV format from a string.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty file, expected header id,x_km,y_km"))?;
        if header.trim_end_matches('\r').trim() != "id,x_km,y_km" {
            return Err(Error::parse(1, format!("bad header {header:?}, expected id,x_km,y_km")));
        }
        let mut rows: Vec<(usize, f64, f64)> = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let id: usize = fields
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing id column"))?
                .trim()
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad id: {e}")))?;
            let x: f64 = fields
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing x_km column"))?
                .trim()
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad x_km: {e}")))?;
            let y: f64 = fields
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing y_km column"))?
                .trim()
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad y_km: {e}")))?;
            if fields.next().is_some() {
                return Err(Error::parse(lineno, "too many columns"));
            }
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::parse(lineno, "non-finite coordinate"));
            }
            if rows.iter().any(|&(seen, _, _)| seen == id) {
                return Err(Error::parse(lineno, format!("duplicate id {id}")));
            }
            rows.push((id, x, y));
        }
        if rows.is_empty() {
            return Err(Error::parse(1, "no location rows"));
        }
        let n = rows.len();
        let mut coords = vec![None; n];
        for (id, x, y) in rows {
            if id >= n {
                return Err(Error::invalid(format!(
                    "location ids must be dense 0..{}, got {id}",
                    n - 1
                )));
            }
            coords[id] = Some((x, y));
        }
        let coords = coords.into_iter().map(|c| c.expect("dense ids")).collect();
        Self::from_coords(coords)
    }

    /// Writes the set back out in the locations CSV format.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("id,x_km,y_km\n");
        for (i, (x, y)) in self.coords.iter().enumerate() {
            out.push_str(&format!("{i},{x},{y}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = LocationId> {
        (0..self.len()).map(LocationId)
    }

    pub fn coords(&self, l: LocationId) -> Result<(f64, f64)> {
        self.check(l)?;
        Ok(self.coords[l.0])
    }

    /// Distance in kilometers between two locations.
    pub fn distance(&self, a: LocationId, b: LocationId) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dist[a.0 * self.len() + b.0])
    }

    /// Unchecked distance lookup by raw index. Callers guarantee
    /// `a, b < len()`.
    #[inline]
    pub fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.coords.len() + b]
    }

    fn check(&self, l: LocationId) -> Result<()> {
        if l.0 >= self.len() {
            return Err(Error::invalid(format!(
                "location id {} out of range (|L| = {})",
                l.0,
                self.len()
            )));
        }
        Ok(())
    }
}

/// Non-empty subset of locations that the platform wants covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSet {
    ids: Vec<LocationId>, // sorted, distinct
    n_locations: usize,
}

impl TargetSet {
    /// Validates and sorts the given ids against a universe of
    /// `n_locations` locations. Duplicates are errors.
    pub fn new(n_locations: usize, ids: impl IntoIterator<Item = LocationId>) -> Result<Self> {
        let mut ids: Vec<LocationId> = ids.into_iter().collect();
        ids.sort_unstable();
        if ids.is_empty() {
            return Err(Error::invalid("target set must be non-empty"));
        }
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate target location"));
        }
        if ids.last().unwrap().0 >= n_locations {
            return Err(Error::invalid(format!(
                "target {} outside universe of {n_locations} locations",
                ids.last().unwrap()
            )));
        }
        Ok(TargetSet { ids, n_locations })
    }

    pub fn from_indices(n_locations: usize, ids: &[usize]) -> Result<Self> {
        Self::new(n_locations, ids.iter().copied().map(LocationId))
    }

    #[inline]
    pub fn contains(&self, l: LocationId) -> bool {
        self.ids.binary_search(&l).is_ok()
    }

    pub fn ids(&self) -> &[LocationId] {
        &self.ids
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    /// Locations of the universe not in the target set.
    pub fn complement(&self) -> impl Iterator<Item = LocationId> + '_ {
        (0..self.n_locations).map(LocationId).filter(|l| !self.contains(*l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn single_cell_grid() {
        let ls = LocationSet::build_grid(1, 1, 1.0).unwrap();
        assert_eq!(ls.len(), 1);
        assert_eq!(ls.distance(LocationId(0), LocationId(0)).unwrap(), 0.0);
    }

    #[test]
    fn adjacent_centroids_one_km() {
        let ls = LocationSet::build_grid(1, 2, 1.0).unwrap();
        assert_eq!(ls.len(), 2);
        assert_close(ls.distance(LocationId(0), LocationId(1)).unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn grid_corner_to_corner() {
        let ls = LocationSet::build_grid(3, 3, 1.0).unwrap();
        let d = ls.distance(LocationId(0), LocationId(8)).unwrap();
        assert_close(d, 2.0 * std::f64::consts::SQRT_2, 1e-12);
    }

    #[test]
    fn grid_diagonal_pythagoras() {
        let ls = LocationSet::build_grid(2, 2, 1.0).unwrap();
        let d = ls.distance(LocationId(0), LocationId(3)).unwrap();
        assert_close(d, std::f64::consts::SQRT_2, 1e-12);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(LocationSet::build_grid(0, 3, 1.0).is_err());
        assert!(LocationSet::build_grid(3, 0, 1.0).is_err());
        assert!(LocationSet::build_grid(1, 1, 0.0).is_err());
    }

    #[test]
    fn grid_count_and_scaling() {
        for &(r, c) in &[(1usize, 4usize), (2, 3), (5, 5)] {
            let base = LocationSet::build_grid(r, c, 1.0).unwrap();
            assert_eq!(base.len(), r * c);
            let scaled = LocationSet::build_grid(r, c, 2.5).unwrap();
            for i in 0..base.len() {
                for j in 0..base.len() {
                    assert_close(scaled.d(i, j), 2.5 * base.d(i, j), 1e-12);
                }
            }
        }
    }

    #[test]
    fn metric_axioms_exhaustive() {
        let ls = LocationSet::build_grid(4, 5, 0.7).unwrap();
        let n = ls.len();
        for i in 0..n {
            assert_eq!(ls.d(i, i), 0.0);
            for j in 0..n {
                assert_eq!(ls.d(i, j), ls.d(j, i));
                if i != j {
                    assert!(ls.d(i, j) > 0.0);
                }
                for k in 0..n {
                    assert!(ls.d(i, k) <= ls.d(i, j) + ls.d(j, k) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn csv_collinear_points() {
        let text = "id,x_km,y_km\n0,0,0\n1,1,0\n2,2,0\n";
        let ls = LocationSet::parse_csv(text).unwrap();
        assert_close(ls.distance(LocationId(0), LocationId(2)).unwrap(), 2.0, 1e-12);
    }

    #[test]
    fn csv_duplicate_id_names_line() {
        let text = "id,x_km,y_km\n0,0,0\n0,1,0\n";
        match LocationSet::parse_csv(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_bad_header_and_columns() {
        assert!(LocationSet::parse_csv("id,x,y\n0,0,0\n").is_err());
        assert!(LocationSet::parse_csv("id,x_km,y_km\n0,0\n").is_err());
        assert!(LocationSet::parse_csv("id,x_km,y_km\n0,nan,0\n").is_err());
    }

    #[test]
    fn csv_random_roundtrip_matrix_properties() {
        // 25 scattered points: matrix must be symmetric with zero diagonal,
        // and every entry must match a fresh Euclidean computation.
        let mut text = String::from("id,x_km,y_km\n");
        let mut pts = Vec::new();
        let mut state = 0x9E3779B97F4A7C15u64;
        for i in 0..25 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x = ((state >> 16) & 0xFFFF) as f64 / 6553.6;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let y = ((state >> 16) & 0xFFFF) as f64 / 6553.6;
            text.push_str(&format!("{i},{x},{y}\n"));
            pts.push((x, y));
        }
        let ls = LocationSet::parse_csv(&text).unwrap();
        for i in 0..25 {
            assert_eq!(ls.d(i, i), 0.0);
            for j in 0..25 {
                assert_eq!(ls.d(i, j), ls.d(j, i));
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                assert_close(ls.d(i, j), (dx * dx + dy * dy).sqrt(), 1e-12);
            }
        }
    }

    #[test]
    fn targets_validated() {
        assert!(TargetSet::from_indices(5, &[]).is_err());
        assert!(TargetSet::from_indices(5, &[1, 1]).is_err());
        assert!(TargetSet::from_indices(5, &[5]).is_err());
        let t = TargetSet::from_indices(5, &[3, 1]).unwrap();
        assert!(t.contains(LocationId(1)) && t.contains(LocationId(3)));
        assert_eq!(t.complement().count(), 3);
    }
}

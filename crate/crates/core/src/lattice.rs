//! Voxel lattices and their neighbor graphs.
//!
//! Two voxels are neighbors when their Chebyshev distance is exactly one, so
//! an interior voxel has 8 neighbors on a 2D lattice and 26 on a 3D lattice.
//! Boundary voxels keep their reduced degree; nothing compensates for it.
//!
//! Full boxes enumerate voxels with `d1` varying fastest, then `d2`, then
//! `d3`. Predictor index `j` (0-based in code, 1-based in files) follows that
//! order, which the Kronecker design sampler in [`crate::simgen`] relies on.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::BoundScalar;

/// 1-based lattice coordinates of one voxel. `d3` is 1 on 2D lattices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelCoord {
    pub d1: u32,
    pub d2: u32,
    pub d3: u32,
}

impl VoxelCoord {
    pub fn new(d1: u32, d2: u32, d3: u32) -> Self {
        VoxelCoord { d1, d2, d3 }
    }

    pub fn planar(d1: u32, d2: u32) -> Self {
        VoxelCoord { d1, d2, d3: 1 }
    }

    #[inline]
    pub fn axis(&self, axis: usize) -> u32 {
        match axis {
            0 => self.d1,
            1 => self.d2,
            _ => self.d3,
        }
    }

    pub fn chebyshev(&self, other: &VoxelCoord) -> u32 {
        self.d1
            .abs_diff(other.d1)
            .max(self.d2.abs_diff(other.d2))
            .max(self.d3.abs_diff(other.d3))
    }

    /// L1 distance, the exponent of the simulated design correlation.
    pub fn manhattan(&self, other: &VoxelCoord) -> u32 {
        self.d1.abs_diff(other.d1) + self.d2.abs_diff(other.d2) + self.d3.abs_diff(other.d3)
    }
}

/// Voxels of a 2D or 3D lattice together with the neighbor edge set.
#[derive(Clone, Debug)]
pub struct LatticeGraph {
    dim: usize,
    extents: [usize; 3],
    coords: Vec<VoxelCoord>,
    /// CSR adjacency: neighbors of `j` are `adjacency[offsets[j]..offsets[j + 1]]`.
    offsets: Vec<usize>,
    adjacency: Vec<u32>,
    full_box: bool,
}

/// Builds the full `extents` box; `dim` must equal `extents.len()`.
pub fn build_lattice(extents: &[usize], dim: usize) -> Result<LatticeGraph> {
    if extents.len() != dim {
        return Err(Error::InvalidDimension(format!(
            "dim = {dim} but {} extents were given",
            extents.len()
        )));
    }
    LatticeGraph::grid(extents)
}

impl LatticeGraph {
    /// Full box lattice; the dimension is the number of extents.
    pub fn grid(extents: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidDimension(format!(
                "only 2D and 3D lattices are supported, got {dim} extents"
            )));
        }
        if let Some(axis) = extents.iter().position(|&e| e == 0) {
            return Err(Error::InvalidDimension(format!("extent of axis {} is zero", axis + 1)));
        }
        let e = [extents[0], extents[1], if dim == 3 { extents[2] } else { 1 }];
        let p = e[0] * e[1] * e[2];
        let mut coords = Vec::with_capacity(p);
        for d3 in 1..=e[2] {
            for d2 in 1..=e[1] {
                for d1 in 1..=e[0] {
                    coords.push(VoxelCoord::new(d1 as u32, d2 as u32, d3 as u32));
                }
            }
        }
        let index = |c: [i64; 3]| -> Option<u32> {
            if (0..3).all(|k| c[k] >= 1 && c[k] <= e[k] as i64) {
                let j = (c[0] - 1) as usize + e[0] * ((c[1] - 1) as usize + e[1] * (c[2] - 1) as usize);
                Some(j as u32)
            } else {
                None
            }
        };
        let (offsets, adjacency) = Self::adjacency_from(dim, &coords, index);
        Ok(LatticeGraph {
            dim,
            extents: e,
            coords,
            offsets,
            adjacency,
            full_box: true,
        })
    }

    /// Irregular mask: only the listed voxels exist, in the given predictor order.
    pub fn from_coords(dim: usize, coords: Vec<VoxelCoord>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidDimension(format!("dimension must be 2 or 3, got {dim}")));
        }
        if coords.is_empty() {
            return Err(Error::InvalidDimension("coordinate list is empty".into()));
        }
        let mut extents = [1usize; 3];
        let mut lookup = HashMap::with_capacity(coords.len());
        for (j, c) in coords.iter().enumerate() {
            if c.d1 == 0 || c.d2 == 0 || c.d3 == 0 {
                return Err(Error::InvalidDimension(format!(
                    "voxel {} has a zero coordinate; indices are 1-based",
                    j + 1
                )));
            }
            if dim == 2 && c.d3 != 1 {
                return Err(Error::InvalidDimension(format!(
                    "voxel {} has d3 = {} on a 2D lattice",
                    j + 1,
                    c.d3
                )));
            }
            if lookup.insert(*c, j as u32).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate coordinate ({}, {}, {})",
                    c.d1, c.d2, c.d3
                )));
            }
            for (k, e) in extents.iter_mut().enumerate() {
                *e = (*e).max(c.axis(k) as usize);
            }
        }
        let index = |c: [i64; 3]| -> Option<u32> {
            if c.iter().any(|&x| x < 1) {
                return None;
            }
            lookup
                .get(&VoxelCoord::new(c[0] as u32, c[1] as u32, c[2] as u32))
                .copied()
        };
        let (offsets, adjacency) = Self::adjacency_from(dim, &coords, index);
        let full_box = coords.len() == extents.iter().product::<usize>()
            && coords.iter().enumerate().all(|(j, c)| {
                let g = (c.d1 - 1) as usize
                    + extents[0] * ((c.d2 - 1) as usize + extents[1] * (c.d3 - 1) as usize);
                g == j
            });
        Ok(LatticeGraph {
            dim,
            extents,
            coords,
            offsets,
            adjacency,
            full_box,
        })
    }

    fn adjacency_from(
        dim: usize,
        coords: &[VoxelCoord],
        index: impl Fn([i64; 3]) -> Option<u32>,
    ) -> (Vec<usize>, Vec<u32>) {
        let dz: &[i64] = if dim == 3 { &[-1, 0, 1] } else { &[0] };
        let mut offsets = Vec::with_capacity(coords.len() + 1);
        let mut adjacency = Vec::with_capacity(coords.len() * if dim == 3 { 26 } else { 8 });
        offsets.push(0);
        for c in coords {
            let base = [c.d1 as i64, c.d2 as i64, c.d3 as i64];
            for &k in dz {
                for i in -1..=1i64 {
                    for h in -1..=1i64 {
                        if h == 0 && i == 0 && k == 0 {
                            continue;
                        }
                        if let Some(l) = index([base[0] + h, base[1] + i, base[2] + k]) {
                            adjacency.push(l);
                        }
                    }
                }
            }
            offsets.push(adjacency.len());
        }
        (offsets, adjacency)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-axis sizes of the bounding box (`extents[2] == 1` in 2D).
    pub fn extents(&self) -> [usize; 3] {
        self.extents
    }

    /// Number of voxels, i.e. predictors.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// True when the voxels fill their bounding box in canonical order.
    pub fn is_full_box(&self) -> bool {
        self.full_box
    }

    pub fn coords(&self) -> &[VoxelCoord] {
        &self.coords
    }

    pub fn coord(&self, j: usize) -> VoxelCoord {
        self.coords[j]
    }

    #[inline]
    pub fn neighbors(&self, j: usize) -> &[u32] {
        &self.adjacency[self.offsets[j]..self.offsets[j + 1]]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.offsets[j + 1] - self.offsets[j]
    }

    /// Number of unordered neighbor pairs |E|.
    pub fn n_edges(&self) -> usize {
        self.adjacency.len() / 2
    }

    /// Each unordered pair once, as `(j1, j2)` with `j1 < j2`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |j| {
            self.neighbors(j)
                .iter()
                .map(|&l| l as usize)
                .filter(move |&l| l > j)
                .map(move |l| (j, l))
        })
    }

    /// Predictor index of a coordinate, if present.
    pub fn index_of(&self, c: VoxelCoord) -> Option<usize> {
        if self.full_box {
            let e = self.extents;
            if c.d1 == 0 || c.d2 == 0 || c.d3 == 0 {
                return None;
            }
            let (d1, d2, d3) = ((c.d1 - 1) as usize, (c.d2 - 1) as usize, (c.d3 - 1) as usize);
            if d1 >= e[0] || d2 >= e[1] || d3 >= e[2] {
                return None;
            }
            Some(d1 + e[0] * (d2 + e[1] * d3))
        } else {
            self.coords.iter().position(|x| *x == c)
        }
    }
}

/// Neighbor pairs inside a full V×V square: 4V² − 6V + 2.
pub fn pair_count_square(v: u64) -> Result<u64> {
    if v == 0 {
        return Err(Error::InvalidArgument("side length V must be at least 1".into()));
    }
    Ok(4 * v * v + 2 - 6 * v)
}

/// Neighbor pairs inside a full V×V×V cube:
/// 13(V−2)³ + 51(V−2)² + 66(V−2) + 28, with V = 1 giving 0.
pub fn pair_count_cube(v: u64) -> Result<u64> {
    match v {
        0 => Err(Error::InvalidArgument("side length V must be at least 1".into())),
        1 => Ok(0),
        _ => {
            let m = v - 2;
            Ok(13 * m * m * m + 51 * m * m + 66 * m + 28)
        }
    }
}

/// `a'γ + γ'Bγ` for a fully selected V×V square: (a+8b)V² − 12bV + 4b.
pub fn ising_quadratic_square<S: BoundScalar>(v: u64, a: &S, b: &S) -> S {
    let vv = S::count(v);
    let eight = S::count(8);
    let twelve = S::count(12);
    let four = S::count(4);
    (a.clone() + eight * b.clone()) * vv.clone() * vv.clone() - twelve * b.clone() * vv + four * b.clone()
}

/// `a'γ + γ'Bγ` for a fully selected V×V×V cube:
/// (a+26b)(V−2)³ + 6(a+17b)(V−2)² + 12(a+11b)(V−2) + 8a + 56b.
pub fn ising_quadratic_cube<S: BoundScalar>(v: u64, a: &S, b: &S) -> S {
    let m = S::count(v) - S::count(2);
    let c = |k: u64| S::count(k);
    let m2 = m.clone() * m.clone();
    let m3 = m2.clone() * m.clone();
    (a.clone() + c(26) * b.clone()) * m3
        + c(6) * (a.clone() + c(17) * b.clone()) * m2
        + c(12) * (a.clone() + c(11) * b.clone()) * m
        + c(8) * a.clone()
        + c(56) * b.clone()
}

//! Numerical checks shared by the test suite and the command-line tool.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{Grid, GridSpec};
use crate::optimizer::{IterateRecord, Physics};
use crate::perimeter::{c_g_constant, perimeter_value, KernelSpec, TRUNCATION};

/// Finite-difference comparison of the descent field along random directions.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// `(finite difference, analytic)` directional derivative per direction.
    pub pairs: Vec<(f64, f64)>,
    pub max_rel_error: f64,
}

/// Checks `<d, delta> h^2` against central differences of `L` at inner
/// minimizers, at a random relaxed design with values in `[0.2, 0.8]`.
///
/// The perimeter subgradient is not a derivative on relaxed designs, so the
/// problem should be built with zero perimeter weight.
pub fn check_gradient<P: Physics<f64>>(phys: &P, directions: usize, step: f64, seed: u64) -> Result<GradientReport> {
    let grid = phys.grid();
    let n = grid.n_elems();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..0.8)).collect();
    let snap = phys.snapshot(&chi)?;
    let d = phys.descent_field(&chi, &snap)?;
    let eval = |x: &[f64]| -> Result<f64> {
        let s = phys.snapshot(x)?;
        Ok(phys.frozen_objective(&s, &s)?.total)
    };
    let mut pairs = Vec::with_capacity(directions);
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plus: Vec<f64> = chi.iter().zip(&dir).map(|(c, v)| c + step * v).collect();
        let minus: Vec<f64> = chi.iter().zip(&dir).map(|(c, v)| c - step * v).collect();
        let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * step);
        let exact = d.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() * grid.cell_area();
        let scale = fd.abs().max(exact.abs());
        let rel = if scale > 0.0 { (fd - exact).abs() / scale } else { 0.0 };
        worst = worst.max(rel);
        pairs.push((fd, exact));
    }
    Ok(GradientReport { pairs, max_rel_error: worst })
}

/// Indicator of the disk of radius `r` centred at `c`, sampled at cell centroids.
pub fn disk_field(grid: &Grid<f64>, c: [f64; 2], r: f64) -> Vec<f64> {
    (0..grid.n_elems())
        .map(|e| {
            let [x, y] = grid.centroid(e);
            if (x - c[0]).powi(2) + (y - c[1]).powi(2) <= r * r { 1.0 } else { 0.0 }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub eps: f64,
    /// Scaled nonlocal perimeter.
    pub scaled: f64,
    /// `scaled / (2 pi r)`.
    pub ratio: f64,
}

/// Scaled nonlocal perimeter `(C_G / eps) P` of a disk for each smoothing length.
pub fn sweep_epsilon(n: usize, radius: f64, eps: &[f64]) -> Result<Vec<SweepPoint>> {
    let grid = Grid::new(GridSpec::new(n, n, 1.0, 1.0))?;
    let chi = disk_field(&grid, [0.5, 0.5], radius);
    let c_g = c_g_constant(TRUNCATION);
    eps.iter()
        .map(|&e| {
            let k = KernelSpec::for_grid(&grid, e)?;
            let scaled = c_g / e * perimeter_value(&grid, &chi, &k)?;
            let ratio = if scaled == 0.0 { 0.0 } else { scaled / (2.0 * PI * radius) };
            Ok(SweepPoint { eps: e, scaled, ratio })
        })
        .collect()
}

/// Connected components of the material phase (`chi > 0.5`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    /// Component label per element, `None` for void.
    pub labels: Vec<Option<usize>>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Labels present among `elems`.
    pub fn touching(&self, elems: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = elems.iter().filter_map(|&e| self.labels[e]).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Flood fill with 8-connectivity (cells sharing a node are connected).
pub fn components(grid: &Grid<f64>, chi: &[f64]) -> Components {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut labels = vec![None; chi.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..chi.len() {
        if chi[start] <= 0.5 || labels[start].is_some() {
            continue;
        }
        let id = sizes.len();
        labels[start] = Some(id);
        queue.push_back(start);
        let mut size = 0;
        while let Some(e) = queue.pop_front() {
            size += 1;
            let (i, j) = (e % nx, e / nx);
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    let (x, y) = (i as isize + di, j as isize + dj);
                    if x < 0 || y < 0 || x >= nx as isize || y >= ny as isize {
                        continue;
                    }
                    let f = y as usize * nx + x as usize;
                    if chi[f] > 0.5 && labels[f].is_none() {
                        labels[f] = Some(id);
                        queue.push_back(f);
                    }
                }
            }
        }
        sizes.push(size);
    }
    Components { labels, sizes }
}

/// Elements having at least one node in `nodes`.
pub fn elements_at_nodes(grid: &Grid<f64>, nodes: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; grid.n_nodes()];
    for &n in nodes {
        mark[n] = true;
    }
    (0..grid.n_elems()).filter(|&e| grid.elem_nodes(e).iter().any(|&n| mark[n])).collect()
}

pub const HISTORY_HEADER: &str = "iter,L,J,perimeter,volume,r,trials";

/// One `history.csv` row. Values use the shortest round-trip representation,
/// so identical runs give identical bytes.
pub fn history_row(rec: &IterateRecord) -> String {
    format!(
        "{},{:e},{:e},{:e},{:e},{:e},{}",
        rec.iter, rec.l_total, rec.j_physical, rec.perimeter, rec.volume, rec.r, rec.trials
    )
}

pub fn history_csv(records: &[IterateRecord]) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", history_row(r));
    }
    s
}

//! Hidden label field over the site graph: Potts energy, ICM and an
//! exhaustive MAP oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::AdjacencyGraph;

/// Largest instance `brute_force_map` will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelField {
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelField {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Invalid(format!(
                "label {bad} outside 0..{n_classes}"
            )));
        }
        Ok(Self { labels, n_classes })
    }

    pub fn constant(len: usize, label: usize, n_classes: usize) -> Result<Self> {
        Self::new(vec![label; len], n_classes)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

/// Per-site, per-class costs (negative log-probabilities), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryCosts {
    n_classes: usize,
    costs: Vec<f64>,
}

impl UnaryCosts {
    pub fn new(n_classes: usize, costs: Vec<f64>) -> Result<Self> {
        if n_classes == 0 || !costs.len().is_multiple_of(n_classes) {
            return Err(Error::Shape(format!(
                "{} costs do not form rows of {n_classes} classes",
                costs.len()
            )));
        }
        if costs.iter().any(|c| c.is_nan()) {
            return Err(Error::Numerical("NaN unary cost".into()));
        }
        Ok(Self { n_classes, costs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("ragged unary rows".into()));
        }
        Self::new(k, rows.concat())
    }

    pub fn n_sites(&self) -> usize {
        self.costs.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, site: usize) -> &[f64] {
        &self.costs[site * self.n_classes..(site + 1) * self.n_classes]
    }

    /// Per-site argmin, ties toward the smallest label.
    pub fn argmin_labels(&self) -> LabelField {
        let labels = (0..self.n_sites()).map(|i| argmin(self.row(i))).collect();
        LabelField {
            labels,
            n_classes: self.n_classes,
        }
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (l, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = l;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub unary_total: f64,
    pub pairwise_total: f64,
    pub total: f64,
}

fn check_shapes(
    site_count: usize,
    graph: &AdjacencyGraph,
    unaries: &UnaryCosts,
    beta: f64,
) -> Result<()> {
    if graph.site_count() != site_count || unaries.n_sites() != site_count {
        return Err(Error::Shape(format!(
            "{site_count} labels, {} graph sites, {} unary rows",
            graph.site_count(),
            unaries.n_sites()
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    Ok(())
}

fn energy_of(
    labels: &[usize],
    graph: &AdjacencyGraph,
    unaries: &UnaryCosts,
    beta: f64,
) -> EnergyBreakdown {
    let mut unary_total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        unary_total += unaries.row(i)[l];
    }
    let disagreements = graph
        .pairs()
        .iter()
        .filter(|&&(a, b)| labels[a] != labels[b])
        .count();
    let pairwise_total = beta * disagreements as f64;
    EnergyBreakdown {
        unary_total,
        pairwise_total,
        total: unary_total + pairwise_total,
    }
}

/// `Σ_i unaries[i][x_i] + beta · #{(i, j) neighbors : x_i ≠ x_j}`.
pub fn potts_energy(
    labels: &LabelField,
    graph: &AdjacencyGraph,
    unaries: &UnaryCosts,
    beta: f64,
) -> Result<EnergyBreakdown> {
    check_shapes(labels.len(), graph, unaries, beta)?;
    if labels.n_classes != unaries.n_classes {
        return Err(Error::Shape(format!(
            "label field has {} classes, unaries have {}",
            labels.n_classes, unaries.n_classes
        )));
    }
    Ok(energy_of(&labels.labels, graph, unaries, beta))
}

fn sweep_in_place(
    labels: &mut [usize],
    graph: &AdjacencyGraph,
    unaries: &UnaryCosts,
    beta: f64,
) -> usize {
    let k = unaries.n_classes();
    let mut changed = 0;
    let mut local = vec![0.0; k];
    for i in 0..labels.len() {
        local.copy_from_slice(unaries.row(i));
        if beta > 0.0 {
            let neighbors = graph.neighbors_of(i);
            for (l, cost) in local.iter_mut().enumerate() {
                let disagree = neighbors.iter().filter(|&&j| labels[j] != l).count();
                *cost += beta * disagree as f64;
            }
        }
        let best = argmin(&local);
        if best != labels[i] {
            labels[i] = best;
            changed += 1;
        }
    }
    changed
}

/// One iterated-conditional-modes pass in site index order. Each site moves
/// to the label minimizing its local energy given the current neighbors.
pub fn icm_sweep(
    labels: &LabelField,
    graph: &AdjacencyGraph,
    unaries: &UnaryCosts,
    beta: f64,
) -> Result<(LabelField, usize)> {
    potts_energy(labels, graph, unaries, beta)?;
    let mut next = labels.clone();
    let changed = sweep_in_place(&mut next.labels, graph, unaries, beta);
    Ok((next, changed))
}

/// Repeats ICM sweeps until nothing changes or `max_sweeps` is reached.
pub fn map_labels(
    initial: &LabelField,
    graph: &AdjacencyGraph,
    unaries: &UnaryCosts,
    beta: f64,
    max_sweeps: usize,
) -> Result<LabelField> {
    if max_sweeps == 0 {
        return Err(Error::Invalid("max_sweeps must be at least 1".into()));
    }
    potts_energy(initial, graph, unaries, beta)?;
    let mut field = initial.clone();
    for _ in 0..max_sweeps {
        if sweep_in_place(&mut field.labels, graph, unaries, beta) == 0 {
            break;
        }
    }
    Ok(field)
}

/// Exact minimizer by enumeration; among equal energies the
/// lexicographically smallest labeling wins.
pub fn brute_force_map(
    graph: &AdjacencyGraph,
    unaries: &UnaryCosts,
    beta: f64,
) -> Result<(LabelField, f64)> {
    let n = unaries.n_sites();
    let k = unaries.n_classes();
    check_shapes(n, graph, unaries, beta)?;
    let size = (k as u64)
        .checked_pow(n as u32)
        .filter(|&s| s <= BRUTE_FORCE_LIMIT);
    if size.is_none() {
        return Err(Error::Invalid(format!(
            "{k}^{n} labelings exceed the enumeration limit of {BRUTE_FORCE_LIMIT}"
        )));
    }

    let mut current = vec![0usize; n];
    let mut best = current.clone();
    let mut best_energy = energy_of(&current, graph, unaries, beta).total;
    loop {
        // odometer with the last site fastest, so visits are in lexicographic order
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok((
                    LabelField {
                        labels: best,
                        n_classes: k,
                    },
                    best_energy,
                ));
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < k {
                break;
            }
            current[pos] = 0;
        }
        let e = energy_of(&current, graph, unaries, beta).total;
        if e < best_energy {
            best_energy = e;
            best.copy_from_slice(&current);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> AdjacencyGraph {
        AdjacencyGraph::from_pairs(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    fn ring(n: usize) -> AdjacencyGraph {
        AdjacencyGraph::from_pairs(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn energy_definition() {
        let g = path(2);
        let u = UnaryCosts::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let e = potts_energy(&LabelField::new(vec![0, 1], 2).unwrap(), &g, &u, 1.5).unwrap();
        assert_eq!(e.total, 1.5);
        assert_eq!(e.pairwise_total, 1.5);

        let u = UnaryCosts::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        let e = potts_energy(&LabelField::new(vec![1, 0], 2).unwrap(), &g, &u, 0.0).unwrap();
        assert_eq!(e.total, 5.0);
        let e = potts_energy(&LabelField::constant(2, 1, 2).unwrap(), &g, &u, 9.0).unwrap();
        assert_eq!(e.pairwise_total, 0.0);
        assert_eq!(e.total, e.unary_total + e.pairwise_total);
    }

    #[test]
    fn shape_errors() {
        let g = path(3);
        let u = UnaryCosts::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let labels = LabelField::constant(2, 0, 2).unwrap();
        assert!(matches!(
            potts_energy(&labels, &g, &u, 1.0),
            Err(Error::Shape(_))
        ));
        assert!(icm_sweep(&labels, &g, &u, 1.0).is_err());
        assert!(potts_energy(&labels, &path(2), &u, -1.0).is_err());
        assert!(LabelField::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn icm_decoupled_is_argmin() {
        let g = path(3);
        let u = UnaryCosts::from_rows(&[
            vec![3.0, 1.0, 2.0],
            vec![0.0, 0.0, 1.0],
            vec![5.0, 4.0, -1.0],
        ])
        .unwrap();
        let start = LabelField::constant(3, 2, 3).unwrap();
        let (field, changed) = icm_sweep(&start, &g, &u, 0.0).unwrap();
        assert_eq!(field.labels(), &[1, 0, 2]);
        assert_eq!(changed, 2);
        let (again, changed) = icm_sweep(&field, &g, &u, 0.0).unwrap();
        assert_eq!(again, field);
        assert_eq!(changed, 0);
    }

    #[test]
    fn strong_coupling_flattens_a_path() {
        // weak preference for (0, 1, 0)
        let g = path(3);
        let u = UnaryCosts::from_rows(&[vec![0.0, 0.1], vec![0.1, 0.0], vec![0.0, 0.1]]).unwrap();
        let (opt, energy) = brute_force_map(&g, &u, 5.0).unwrap();
        assert_eq!(opt.labels(), &[0, 0, 0]);
        assert!((energy - 0.1).abs() < 1e-15);
        // ICM from the unary argmin settles on a constant labeling
        let got = map_labels(&u.argmin_labels(), &g, &u, 5.0, 10).unwrap();
        assert!(got.labels().iter().all(|&l| l == got.labels()[0]));
        let e = potts_energy(&got, &g, &u, 5.0).unwrap().total;
        assert!(e >= energy);
    }

    #[test]
    fn brute_force_small_cases() {
        let g = AdjacencyGraph::from_pairs(1, []).unwrap();
        let u = UnaryCosts::from_rows(&[vec![3.0, 1.0, 2.0]]).unwrap();
        let (f, e) = brute_force_map(&g, &u, 1.0).unwrap();
        assert_eq!((f.labels(), e), (&[1usize][..], 1.0));

        let u = UnaryCosts::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let (f, e) = brute_force_map(&path(2), &u, 1.0).unwrap();
        assert_eq!((f.labels(), e), (&[0usize, 0][..], 0.0));
    }

    #[test]
    fn brute_force_ring_with_planted_alternation() {
        let g = ring(6);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                if i % 2 == 0 {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                }
            })
            .collect();
        let u = UnaryCosts::from_rows(&rows).unwrap();
        let (f, e) = brute_force_map(&g, &u, 0.1).unwrap();
        // unary minimum 0 everywhere, 6 disagreeing ring edges
        assert_eq!(f.labels(), &[0, 1, 0, 1, 0, 1]);
        let disagreements = g
            .pairs()
            .iter()
            .filter(|&&(a, b)| f.labels()[a] != f.labels()[b])
            .count();
        assert_eq!(disagreements, 6);
        assert!((e - (0.0 + 0.1 * 6.0)).abs() < 1e-12);
    }

    #[test]
    fn brute_force_guard() {
        let u = UnaryCosts::new(3, vec![0.0; 3 * 13]).unwrap();
        let g = AdjacencyGraph::from_pairs(13, []).unwrap();
        assert!(brute_force_map(&g, &u, 0.0).is_err());
        let u = UnaryCosts::new(2, vec![0.0; 2 * 19]).unwrap();
        let g = AdjacencyGraph::from_pairs(19, []).unwrap();
        assert!(brute_force_map(&g, &u, 0.0).is_ok());
    }

    #[test]
    fn map_labels_keeps_optimum_and_rejects_zero_sweeps() {
        let g = ring(4);
        let u = UnaryCosts::from_rows(&[
            vec![0.0, 2.0],
            vec![0.5, 0.0],
            vec![0.0, 2.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let (opt, _) = brute_force_map(&g, &u, 1.0).unwrap();
        assert_eq!(map_labels(&opt, &g, &u, 1.0, 5).unwrap(), opt);
        assert!(map_labels(&opt, &g, &u, 1.0, 0).is_err());
    }
}

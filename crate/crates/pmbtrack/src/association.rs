//! Global association: a rectangular cost matrix over measurements and
//! candidate explanations, solved exactly by shortest augmenting paths,
//! plus an exhaustive oracle for cross-checking on small instances.
//!
//! Rows are measurements. The first block of columns holds detection
//! hypotheses for existing objects; the trailing block holds one
//! first-detection column per measurement, finite only on its own row.
//! Misdetection is the baseline and does not appear as a column.

use crate::error::{Error, Result};
use crate::filter::{HypKind, LocalHypothesis};

/// Dense row-major cost matrix; `f64::INFINITY` marks forbidden pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    /// A matrix with every entry forbidden.
    pub fn infinite(rows: usize, cols: usize) -> Self {
        CostMatrix {
            rows,
            cols,
            costs: vec![f64::INFINITY; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols);
        self.costs[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols);
        self.costs[row * self.cols + col] = value;
    }
}

/// One minimum-cost global assignment: `assignment[m]` is the column
/// chosen for measurement row `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalHypothesis {
    pub assignment: Vec<usize>,
    pub total_cost: f64,
}

/// Lays detection and first-detection hypotheses into the assignment
/// matrix: `n_meas` rows, `n_objects + n_meas` columns. Misdetection
/// hypotheses are skipped; they are the implicit baseline of every column.
pub fn build_cost_matrix(hyps: &[LocalHypothesis], n_meas: usize, n_objects: usize) -> CostMatrix {
    let mut costs = CostMatrix::infinite(n_meas, n_objects + n_meas);
    for hyp in hyps {
        match hyp.kind {
            HypKind::Misdetection => {}
            HypKind::Detection => {
                let m = hyp
                    .measurement_index
                    .expect("detection hypothesis has a measurement");
                let j = hyp
                    .object_index
                    .expect("detection hypothesis has an object");
                costs.set(m, j, hyp.cost);
            }
            HypKind::FirstDetection => {
                let m = hyp
                    .measurement_index
                    .expect("first detection has a measurement");
                costs.set(m, n_objects + m, hyp.cost);
            }
        }
    }
    costs
}

/// Minimum-cost assignment of every row to a distinct column by shortest
/// augmenting paths with dual potentials. Deterministic: column scans run
/// in ascending index order with strict improvement, so ties resolve to
/// the lowest column index independent of input history.
pub fn solve_assignment(costs: &CostMatrix) -> Result<GlobalHypothesis> {
    let rows = costs.rows();
    let cols = costs.cols();
    if rows > cols {
        return Err(Error::InvalidArgument(
            "assignment needs at least as many columns as rows",
        ));
    }
    // 1-indexed arrays with a sentinel row/column 0.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut col_row = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        col_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let slack = costs.get(i0 - 1, j - 1) - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return Err(Error::InfeasibleAssignment(
                    "a measurement row has no feasible column",
                ));
            }
            for j in 0..=cols {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        // Flip the alternating path back to the sentinel.
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; rows];
    for j in 1..=cols {
        if col_row[j] != 0 {
            assignment[col_row[j] - 1] = j - 1;
        }
    }
    // The total is recomputed from the original entries, not the
    // potentials, so exact inputs produce exact totals.
    let mut total_cost = 0.0;
    for (row, &col) in assignment.iter().enumerate() {
        debug_assert!(costs.get(row, col).is_finite());
        total_cost += costs.get(row, col);
    }
    Ok(GlobalHypothesis {
        assignment,
        total_cost,
    })
}

/// Exhaustive minimum-cost assignment in lexicographic row order with an
/// admissible per-row lower bound for pruning. Exponential in the row
/// count; intended as an oracle for small instances. Ties keep the
/// lexicographically smallest assignment.
pub fn brute_force_assignment(costs: &CostMatrix) -> Result<GlobalHypothesis> {
    let rows = costs.rows();
    let cols = costs.cols();
    if rows > cols {
        return Err(Error::InvalidArgument(
            "assignment needs at least as many columns as rows",
        ));
    }
    let mut row_min = vec![f64::INFINITY; rows];
    for (row, min) in row_min.iter_mut().enumerate() {
        for col in 0..cols {
            *min = min.min(costs.get(row, col));
        }
    }
    if row_min.iter().any(|m| !m.is_finite()) {
        return Err(Error::InfeasibleAssignment(
            "a measurement row has no feasible column",
        ));
    }
    // bound[r] = least possible cost of completing rows r.. ignoring
    // column conflicts; admissible, so pruning on it is safe.
    let mut bound = vec![0.0f64; rows + 1];
    for row in (0..rows).rev() {
        bound[row] = bound[row + 1] + row_min[row];
    }
    let mut used = vec![false; cols];
    let mut current = Vec::with_capacity(rows);
    let mut best: Option<GlobalHypothesis> = None;
    search(costs, 0, 0.0, &bound, &mut used, &mut current, &mut best);
    best.ok_or(Error::InfeasibleAssignment("no complete assignment exists"))
}

fn search(
    costs: &CostMatrix,
    row: usize,
    partial: f64,
    bound: &[f64],
    used: &mut [bool],
    current: &mut Vec<usize>,
    best: &mut Option<GlobalHypothesis>,
) {
    if let Some(b) = &*best {
        // Strict comparison: equal-bound branches still run, so the first
        // lexicographic minimizer is the one that is kept.
        if partial + bound[row] > b.total_cost {
            return;
        }
    }
    if row == costs.rows() {
        if best.as_ref().is_none_or(|b| partial < b.total_cost) {
            *best = Some(GlobalHypothesis {
                assignment: current.clone(),
                total_cost: partial,
            });
        }
        return;
    }
    for col in 0..costs.cols() {
        if used[col] {
            continue;
        }
        let cost = costs.get(row, col);
        if !cost.is_finite() {
            continue;
        }
        used[col] = true;
        current.push(col);
        search(costs, row + 1, partial + cost, bound, used, current, best);
        current.pop();
        used[col] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{
        AuxState, BernoulliComponent, GaussianState, StateVec, TimeInvariantState, TrackId,
    };
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> CostMatrix {
        let mut m = CostMatrix::infinite(rows.len(), rows[0].len());
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    #[test]
    fn known_square_case_picks_the_diagonal() {
        let m = matrix(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let got = solve_assignment(&m).unwrap();
        assert_eq!(got.assignment, vec![0, 1]);
        assert_eq!(got.total_cost, 2.0);
        let oracle = brute_force_assignment(&m).unwrap();
        assert_eq!(oracle, got);
    }

    #[test]
    fn forbidden_entries_are_never_selected() {
        let inf = f64::INFINITY;
        // Column 1 is fully forbidden; row 0 is forced to column 2.
        let m = matrix(&[&[4.0, inf, 1.0], &[2.0, inf, 5.0]]);
        let got = solve_assignment(&m).unwrap();
        assert_eq!(got.assignment, vec![2, 0]);
        assert_eq!(got.total_cost, 3.0);
        assert_eq!(brute_force_assignment(&m).unwrap(), got);
    }

    #[test]
    fn infeasible_instances_are_reported() {
        let inf = f64::INFINITY;
        let m = matrix(&[&[inf, inf]]);
        assert!(matches!(
            solve_assignment(&m),
            Err(crate::Error::InfeasibleAssignment(_))
        ));
        assert!(matches!(
            brute_force_assignment(&m),
            Err(crate::Error::InfeasibleAssignment(_))
        ));
        // Finite rows that contend for one feasible column.
        let m = matrix(&[&[1.0, inf], &[2.0, inf]]);
        assert!(matches!(
            solve_assignment(&m),
            Err(crate::Error::InfeasibleAssignment(_))
        ));
        assert!(matches!(
            brute_force_assignment(&m),
            Err(crate::Error::InfeasibleAssignment(_))
        ));
        // More rows than columns can never assign every row.
        let m = matrix(&[&[1.0], &[2.0]]);
        assert!(solve_assignment(&m).is_err());
    }

    #[test]
    fn empty_matrix_solves_trivially() {
        let m = CostMatrix::infinite(0, 3);
        let got = solve_assignment(&m).unwrap();
        assert!(got.assignment.is_empty());
        assert_eq!(got.total_cost, 0.0);
        assert_eq!(brute_force_assignment(&m).unwrap(), got);
    }

    fn hypothesis(
        kind: HypKind,
        cost: f64,
        measurement_index: Option<usize>,
        object_index: Option<usize>,
    ) -> LocalHypothesis {
        LocalHypothesis {
            kind,
            cost,
            component: BernoulliComponent {
                existence: 1.0,
                density: GaussianState::new(
                    StateVec::zeros(),
                    crate::density::StateCov::identity(),
                ),
                aux: AuxState {
                    length: 1.0,
                    width: 1.0,
                    height: 1.0,
                    z: 0.0,
                },
                fixed: TimeInvariantState {
                    class: "car".into(),
                    track_id: TrackId { step: 0, index: 0 },
                },
                miss_count: 0,
                track_len: 0,
                score: 0.0,
            },
            measurement_index,
            object_index,
        }
    }

    #[test]
    fn built_matrix_has_the_block_shape() {
        // Two objects, three measurements. Measurement 0 gates both
        // objects, measurement 1 gates object 1, measurement 2 gates none.
        let hyps = vec![
            hypothesis(HypKind::Misdetection, 0.3, None, Some(0)),
            hypothesis(HypKind::Misdetection, 0.2, None, Some(1)),
            hypothesis(HypKind::Detection, 1.0, Some(0), Some(0)),
            hypothesis(HypKind::Detection, 1.5, Some(0), Some(1)),
            hypothesis(HypKind::Detection, 0.7, Some(1), Some(1)),
            hypothesis(HypKind::FirstDetection, 2.0, Some(0), None),
            hypothesis(HypKind::FirstDetection, 2.5, Some(1), None),
            hypothesis(HypKind::FirstDetection, 0.4, Some(2), None),
        ];
        let m = build_cost_matrix(&hyps, 3, 2);
        assert_eq!(m.rows(), 3);
        assert_eq!(m.cols(), 5);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.get(0, 2), 2.0);
        assert!(m.get(0, 3).is_infinite() && m.get(0, 4).is_infinite());
        assert!(m.get(1, 0).is_infinite());
        assert_eq!(m.get(1, 1), 0.7);
        assert_eq!(m.get(1, 3), 2.5);
        assert!(m.get(1, 2).is_infinite() && m.get(1, 4).is_infinite());
        assert!(m.get(2, 0).is_infinite() && m.get(2, 1).is_infinite());
        assert_eq!(m.get(2, 4), 0.4);

        let got = solve_assignment(&m).unwrap();
        assert_eq!(got.assignment, vec![0, 1, 4]);
        assert_eq!(got.total_cost, 1.0 + 0.7 + 0.4);
    }

    /// Random matrices in the measurement-by-explanations block shape with
    /// exact dyadic entries, so optimal totals compare with `==`.
    fn random_block_matrix(rng: &mut ChaCha8Rng) -> CostMatrix {
        let rows = rng.gen_range(1..=6usize);
        let objects = rng.gen_range(0..=10usize);
        let mut m = CostMatrix::infinite(rows, objects + rows);
        for r in 0..rows {
            for c in 0..objects {
                if rng.gen_bool(0.8) {
                    m.set(r, c, rng.gen_range(0..4096) as f64 / 1024.0);
                }
            }
            // The first-detection diagonal stays finite so every instance
            // is feasible.
            m.set(r, objects + r, rng.gen_range(0..4096) as f64 / 1024.0);
        }
        m
    }

    #[test]
    fn solver_matches_brute_force_exactly_on_dyadic_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..150 {
            let m = random_block_matrix(&mut rng);
            let fast = solve_assignment(&m).unwrap();
            let oracle = brute_force_assignment(&m).unwrap();
            assert_eq!(fast.total_cost, oracle.total_cost, "matrix {m:?}");
            // The fast assignment must itself be feasible: distinct
            // columns, finite entries, recomputable total.
            let mut seen = vec![false; m.cols()];
            let mut total = 0.0;
            for (r, &c) in fast.assignment.iter().enumerate() {
                assert!(!seen[c]);
                seen[c] = true;
                assert!(m.get(r, c).is_finite());
                total += m.get(r, c);
            }
            assert_eq!(total, fast.total_cost);
        }
    }

    #[test]
    fn solver_is_deterministic_across_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_block_matrix(&mut rng);
            let a = solve_assignment(&m).unwrap();
            let b = solve_assignment(&m).unwrap();
            assert_eq!(a, b);
        }
    }

    proptest! {
        /// Fully finite random matrices: the solver's assignment is a
        /// permutation into distinct columns and never beats the oracle.
        #[test]
        fn solver_total_is_optimal(
            rows in 1usize..=4,
            extra in 0usize..=3,
            seed in 0u64..1_000,
        ) {
            let cols = rows + extra;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = CostMatrix::infinite(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m.set(r, c, rng.gen_range(0.0..100.0f64));
                }
            }
            let fast = solve_assignment(&m).unwrap();
            let oracle = brute_force_assignment(&m).unwrap();
            prop_assert!((fast.total_cost - oracle.total_cost).abs() <= 1e-9 * (1.0 + oracle.total_cost.abs()));
            let mut seen = vec![false; cols];
            for &c in &fast.assignment {
                prop_assert!(!seen[c]);
                seen[c] = true;
            }
        }
    }
}

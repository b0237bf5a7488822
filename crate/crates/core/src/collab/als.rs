//! Alternating least squares on the observed entries of an interaction matrix.
//!
//! Each half-step solves, for every row `u` with observed columns `I_u`,
//! `(V_Iᵀ V_I + λ·|I_u|·I) x_u = V_Iᵀ r_u` and symmetrically for columns.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::matrix::InteractionMatrix;
use super::CollabError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlsParams {
    pub rank: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// Relative slack allowed when checking that the objective never rises.
const OBJECTIVE_SLACK: f64 = 1e-9;

const PIVOT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct AlsFactors {
    pub rank: usize,
    /// Row-major, `users × rank`.
    pub user_factors: Vec<f64>,
    /// Row-major, `items × rank`.
    pub item_factors: Vec<f64>,
    /// RMSE on observed entries, index 0 is the initialization.
    pub rmse_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

struct Csr {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn build(n_rows: usize, triples: impl Iterator<Item = (u32, u32, f64)>) -> Csr {
        let mut triples: Vec<(u32, u32, f64)> = triples.collect();
        triples.sort_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; n_rows + 1];
        for &(r, _, _) in &triples {
            offsets[r as usize + 1] += 1;
        }
        for i in 0..n_rows {
            offsets[i + 1] += offsets[i];
        }
        Csr {
            offsets,
            cols: triples.iter().map(|t| t.1).collect(),
            vals: triples.iter().map(|t| t.2).collect(),
        }
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    fn rows(&self) -> usize {
        self.offsets.len() - 1
    }
}

fn init_factors(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Vec<f64> {
    let scale = 1.0 / (rank as f64).sqrt();
    (0..n * rank).map(|_| rng.gen::<f64>() * scale).collect()
}

/// Solves every row of `csr` against the fixed factors `other`.
fn solve_side(
    csr: &Csr,
    other: &[f64],
    rank: usize,
    lambda: f64,
    side: &'static str,
) -> Result<Vec<f64>, CollabError> {
    let rows: Vec<Result<Vec<f64>, CollabError>> = (0..csr.rows())
        .into_par_iter()
        .map(|r| {
            let (cols, vals) = csr.row(r);
            let mut a = vec![0.0f64; rank * rank];
            let mut b = vec![0.0f64; rank];
            for (&c, &v) in cols.iter().zip(vals) {
                let y = &other[c as usize * rank..(c as usize + 1) * rank];
                for i in 0..rank {
                    let yi = y[i];
                    b[i] += v * yi;
                    let row = &mut a[i * rank..i * rank + i + 1];
                    for (slot, &yj) in row.iter_mut().zip(&y[..=i]) {
                        *slot += yi * yj;
                    }
                }
            }
            let reg = lambda * cols.len() as f64;
            for i in 0..rank {
                a[i * rank + i] += reg;
                for j in 0..i {
                    a[j * rank + i] = a[i * rank + j];
                }
            }
            let max_diag = (0..rank).map(|i| a[i * rank + i]).fold(0.0f64, f64::max);
            let chol = DMatrix::from_row_slice(rank, rank, &a)
                .cholesky()
                .ok_or(CollabError::SingularSolve { side, index: r })?;
            // Rounding can leave a tiny positive pivot on a rank-deficient system.
            let l = chol.l_dirty();
            if (0..rank).any(|i| l[(i, i)] * l[(i, i)] <= PIVOT_FLOOR * max_diag) {
                return Err(CollabError::SingularSolve { side, index: r });
            }
            let x = chol.solve(&DVector::from_vec(b));
            if x.iter().any(|v| !v.is_finite()) {
                return Err(CollabError::SingularSolve { side, index: r });
            }
            Ok(x.as_slice().to_vec())
        })
        .collect();
    let mut out = Vec::with_capacity(csr.rows() * rank);
    for row in rows {
        out.extend(row?);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns `(rmse, objective)` for the current factors.
fn evaluate(by_row: &Csr, by_col: &Csr, u: &[f64], v: &[f64], rank: usize, lambda: f64) -> (f64, f64) {
    let mut sse = 0.0;
    let mut n = 0usize;
    let mut reg = 0.0;
    for r in 0..by_row.rows() {
        let (cols, vals) = by_row.row(r);
        let x = &u[r * rank..(r + 1) * rank];
        for (&c, &val) in cols.iter().zip(vals) {
            let err = val - dot(x, &v[c as usize * rank..(c as usize + 1) * rank]);
            sse += err * err;
        }
        n += cols.len();
        reg += cols.len() as f64 * dot(x, x);
    }
    for c in 0..by_col.rows() {
        let y = &v[c * rank..(c + 1) * rank];
        reg += by_col.row(c).0.len() as f64 * dot(y, y);
    }
    ((sse / n.max(1) as f64).sqrt(), sse + lambda * reg)
}

/// Factorizes `matrix`. Deterministic for a given seed, including under rayon,
/// because every row solve is independent and results are gathered in order.
pub fn als_train(matrix: &InteractionMatrix, params: &AlsParams) -> Result<AlsFactors, CollabError> {
    if matrix.entries.is_empty() {
        return Err(CollabError::EmptyMatrix);
    }
    if params.rank == 0 {
        return Err(CollabError::InvalidParams("rank must be at least 1".into()));
    }
    if !(params.lambda >= 0.0) {
        return Err(CollabError::InvalidParams("lambda must be non-negative".into()));
    }
    let rank = params.rank;
    let by_row = Csr::build(matrix.users.len(), matrix.entries.iter().copied());
    let by_col = Csr::build(matrix.properties.len(), matrix.entries.iter().map(|&(r, c, v)| (c, r, v)));

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut u = init_factors(&mut rng, matrix.users.len(), rank);
    let mut v = init_factors(&mut rng, matrix.properties.len(), rank);

    let (rmse, objective) = evaluate(&by_row, &by_col, &u, &v, rank, params.lambda);
    let mut rmse_trace = vec![rmse];
    let mut objective_trace = vec![objective];
    for iteration in 1..=params.iterations {
        v = solve_side(&by_col, &u, rank, params.lambda, "item")?;
        u = solve_side(&by_row, &v, rank, params.lambda, "user")?;
        let (rmse, objective) = evaluate(&by_row, &by_col, &u, &v, rank, params.lambda);
        let before = *objective_trace.last().expect("trace starts non-empty");
        if objective > before + OBJECTIVE_SLACK * before.abs().max(1.0) {
            return Err(CollabError::ObjectiveIncreased { iteration, before, after: objective });
        }
        rmse_trace.push(rmse);
        objective_trace.push(objective);
    }
    Ok(AlsFactors { rank, user_factors: u, item_factors: v, rmse_trace, objective_trace })
}

//! Banded symmetric storage, banded Cholesky and a shift-invert Lanczos
//! solver for the generalized problem `K u = λ M u`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Reverse Cuthill–McKee ordering of a graph given by adjacency lists.
/// Returns `order[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_last = |start: usize| -> usize {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        last
    };
    while order.len() < n {
        let seed = (0..n)
            .filter(|v| !visited[*v])
            .min_by_key(|v| (adjacency[*v].len(), *v))
            .expect("unvisited vertex remains");
        // two sweeps toward a pseudo-peripheral start
        let start = bfs_last(bfs_last(seed));
        let start = if visited[start] { seed } else { start };
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|w| !visited[*w]).collect();
            next.sort_by_key(|w| (adjacency[*w].len(), *w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Symmetric matrix stored by its lower band: entry `(i, j)`, `i − bw ≤ j ≤ i`,
/// lives at `data[i·(bw+1) + (j + bw − i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let mut acc = 0.0;
            for j in lo..i {
                let a = row[j + self.bw - i];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc + row[self.bw] * x[i];
        }
    }

    /// `self − shift · other` on a common band.
    pub fn shifted(&self, shift: f64, other: &BandedSym) -> Result<BandedSym> {
        if self.n != other.n || self.bw != other.bw {
            return Err(Error::InvalidInput("shifted: operands have different shapes".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - shift * b).collect();
        Ok(BandedSym { n: self.n, bw: self.bw, data })
    }

    /// In-place Cholesky factor `L` with `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let w = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let k0 = lo.max(j.saturating_sub(bw));
                let mut s = l[i * w + j + bw - i];
                for k in k0..j {
                    s -= l[i * w + k + bw - i] * l[j * w + k + bw - j];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::SolverNonConvergence(format!("matrix not positive definite at row {i}")));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + j + bw - i] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, data: l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Solves `L Lᵀ x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.data[i * w + k + bw - i] * b[k];
            }
            b[i] = s / self.data[i * w + bw];
        }
        for i in (0..n).rev() {
            b[i] /= self.data[i * w + bw];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                b[k] -= self.data[i * w + k + bw - i] * b[i];
            }
        }
    }
}

/// Converged eigenpairs of `K u = λ M u`, ascending, `M`-orthonormal vectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub steps: usize,
    /// Largest relative residual estimate among the returned pairs.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(v, u)| *v += alpha * u);
}

/// Lowest `count` eigenpairs by Lanczos on `(K − σM)⁻¹ M` with full
/// `M`-reorthogonalization and Rayleigh–Ritz on the tridiagonal matrix.
///
/// A single Krylov sequence cannot see a second copy of a repeated
/// eigenvalue, so after convergence the search is restarted in the
/// `M`-orthogonal complement of the pairs found so far until it returns
/// nothing below the current `count`-th value.
pub fn lanczos_lowest(
    stiffness: &BandedSym,
    mass: &BandedSym,
    count: usize,
    shift: f64,
    seed: u64,
    tol: f64,
) -> Result<EigenPairs> {
    let n = stiffness.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!("requested {count} eigenpairs of a {n}-dimensional problem")));
    }
    let factor = stiffness.shifted(shift, mass)?.cholesky()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = Operator { factor: &factor, mass, shift, tol };
    let mut found = op.run(count, &mut rng, &[])?;
    while found.values.len() < n {
        let deflated = op.run(1, &mut rng, &found.vectors)?;
        let top = found.values[count - 1];
        if !(deflated.values[0] < top - tol * top.abs().max(1.0)) {
            found.steps += deflated.steps;
            break;
        }
        found.steps += deflated.steps;
        found.residual = found.residual.max(deflated.residual);
        let at = found.values.partition_point(|v| *v < deflated.values[0]);
        found.values.insert(at, deflated.values[0]);
        found.vectors.insert(at, deflated.vectors.into_iter().next().expect("one pair"));
        found.values.truncate(count);
        found.vectors.truncate(count);
    }
    Ok(found)
}

struct Operator<'a> {
    factor: &'a BandCholesky,
    mass: &'a BandedSym,
    shift: f64,
    tol: f64,
}

impl Operator<'_> {
    /// One Lanczos sequence kept `M`-orthogonal to `locked`.
    fn run(&self, count: usize, rng: &mut ChaCha8Rng, locked: &[Vec<f64>]) -> Result<EigenPairs> {
        let (mass, tol) = (self.mass, self.tol);
        let n = mass.dim();
        let free = n - locked.len();
        if count > free {
            return Err(Error::InvalidInput(format!("requested {count} eigenpairs of a {free}-dimensional subspace")));
        }
        let locked_m: Vec<Vec<f64>> = locked
            .iter()
            .map(|x| {
                let mut mx = vec![0.0; n];
                mass.mul_vec(x, &mut mx);
                mx
            })
            .collect();
        let max_steps = free.min(60 + 20 * count).min(400).max(count);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        for (b, mb) in locked.iter().zip(&locked_m) {
            let c = dot(&v, mb);
            axpy(-c, b, &mut v);
        }
        let mut mv = vec![0.0; n];
        mass.mul_vec(&v, &mut mv);
        let norm = dot(&v, &mv).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        mv.iter_mut().for_each(|x| *x /= norm);

        let mut basis: Vec<Vec<f64>> = vec![v];
        let mut mbasis: Vec<Vec<f64>> = vec![mv];
        let (mut alphas, mut betas): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut w = vec![0.0; n];
        let mut mw = vec![0.0; n];
        for step in 0..max_steps {
            w.copy_from_slice(&mbasis[step]);
            self.factor.solve(&mut w);
            let alpha = dot(&w, &mbasis[step]);
            axpy(-alpha, &basis[step], &mut w);
            if step > 0 {
                axpy(-betas[step - 1], &basis[step - 1], &mut w);
            }
            for _ in 0..2 {
                for (b, mb) in locked.iter().zip(&locked_m).chain(basis.iter().zip(&mbasis)) {
                    let c = dot(&w, mb);
                    axpy(-c, b, &mut w);
                }
            }
            alphas.push(alpha);
            mass.mul_vec(&w, &mut mw);
            let beta = dot(&w, &mw).max(0.0).sqrt();

            let m = alphas.len();
            let exhausted = beta <= 1e-14 * alpha.abs();
            if m >= count && (m % 5 == 0 || exhausted || step + 1 == max_steps) {
                let t = DMatrix::from_fn(m, m, |i, j| {
                    if i == j {
                        alphas[i]
                    } else if i + 1 == j {
                        betas[i]
                    } else if j + 1 == i {
                        betas[j]
                    } else {
                        0.0
                    }
                });
                let eig = SymmetricEigen::new(t);
                let mut idx: Vec<usize> = (0..m).collect();
                idx.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
                let chosen = &idx[..count];
                let residual = chosen
                    .iter()
                    .map(|&i| (beta * eig.eigenvectors[(m - 1, i)]).abs() / eig.eigenvalues[i].abs())
                    .fold(0.0, f64::max);
                if residual <= tol || exhausted {
                    let mut pairs: Vec<(f64, Vec<f64>)> = chosen
                        .iter()
                        .map(|&i| {
                            let theta = eig.eigenvalues[i];
                            let mut x = vec![0.0; n];
                            for (k, b) in basis.iter().enumerate() {
                                axpy(eig.eigenvectors[(k, i)], b, &mut x);
                            }
                            (self.shift + 1.0 / theta, x)
                        })
                        .collect();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let (values, vectors) = pairs.into_iter().unzip();
                    return Ok(EigenPairs { values, vectors, steps: m, residual });
                }
            }
            if exhausted {
                break;
            }
            betas.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            mw.iter_mut().for_each(|x| *x /= beta);
            basis.push(w.clone());
            mbasis.push(mw.clone());
        }
        Err(Error::SolverNonConvergence(format!("lanczos did not reach tolerance {tol:e} in {max_steps} steps")))
    }
}

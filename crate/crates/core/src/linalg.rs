//! Sparse SPD systems: CSR storage, Jacobi-preconditioned CG, and the
//! tridiagonal Thomas solve.

use crate::error::{HomogError, Result};

#[derive(Clone, Debug, Default)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Row-by-row builder; entries of a row may be pushed in any order and are
/// merged by column.
#[derive(Debug)]
pub struct CsrBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        CsrBuilder {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i].push((j, v));
    }

    pub fn build(self) -> Csr {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl Csr {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.cols[k] == j)
            .map_or(0.0, |k| self.vals[k])
    }

    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.apply(x, &mut ax);
        let r = norm(&ax.iter().zip(b).map(|(a, b)| b - a).collect::<Vec<_>>());
        let bn = norm(b);
        if bn == 0.0 {
            r
        } else {
            r / bn
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` to relative residual `tol`; returns `(x, residual, iterations)`.
pub fn pcg(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
    let n = a.n();
    let bn = norm(b);
    if bn == 0.0 {
        return Ok((vec![0.0; n], 0.0, 0));
    }
    let diag = a.diagonal();
    if let Some(d) = diag.iter().find(|d| !(**d > 0.0)) {
        return Err(HomogError::Numerical {
            msg: format!("non-positive diagonal entry {d}"),
            residual: f64::NAN,
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iters = 0;
    loop {
        let rn = norm(&r);
        if rn <= tol * bn {
            // confirm against the true residual
            let true_res = a.relative_residual(&x, b);
            if true_res <= tol {
                return Ok((x, true_res, iters));
            }
            a.apply(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
                z[i] = r[i] / diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if iters >= max_iter {
            return Err(HomogError::Numerical {
                msg: format!("CG did not converge in {max_iter} iterations"),
                residual: rn / bn,
            });
        }
        a.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iters += 1;
    }
}

/// Tridiagonal solve; `lower[i]` couples row `i` to `i-1`, `upper[i]` to `i+1`.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut m = diag[0];
    if m == 0.0 {
        return Err(HomogError::Numerical {
            msg: "singular tridiagonal system".into(),
            residual: f64::NAN,
        });
    }
    c[0] = upper[0] / m;
    d[0] = rhs[0] / m;
    for i in 1..n {
        m = diag[i] - lower[i] * c[i - 1];
        if m == 0.0 {
            return Err(HomogError::Numerical {
                msg: "singular tridiagonal system".into(),
                residual: f64::NAN,
            });
        }
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_on_laplacian() {
        let n = 50;
        let mut b = CsrBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        let a = b.build();
        let rhs = vec![1.0; n];
        let (x, res, _) = pcg(&a, &rhs, 1e-12, 1000).unwrap();
        assert!(res <= 1e-12);
        let lower: Vec<f64> = (0..n).map(|i| if i > 0 { -1.0 } else { 0.0 }).collect();
        let upper: Vec<f64> = (0..n).map(|i| if i + 1 < n { -1.0 } else { 0.0 }).collect();
        let y = thomas(&lower, &vec![2.0; n], &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn builder_merges_duplicates() {
        let mut b = CsrBuilder::new(2);
        b.add(0, 1, 1.0);
        b.add(0, 0, 2.0);
        b.add(0, 1, 0.5);
        b.add(1, 1, 3.0);
        let a = b.build();
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.diagonal(), vec![2.0, 3.0]);
    }
}

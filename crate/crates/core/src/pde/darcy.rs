use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const CG_TOLERANCE: f64 = 1e-8;

/// Iteration cap for the preconditioned CG: `50·n`, far above the
/// `O(n·√κ_a)` iterations the 5-point operator needs.
pub fn cg_iteration_cap(n: usize) -> usize {
    50 * n
}

/// 5-point operator `−∇·(a∇u)` on the interior nodes of an `n×n` grid with
/// homogeneous Dirichlet boundary nodes.
struct Operator {
    m: usize,
    // face coefficients / h² for the east and north faces of interior nodes
    east: Vec<f64>,
    west: Vec<f64>,
    north: Vec<f64>,
    south: Vec<f64>,
    diag: Vec<f64>,
}

impl Operator {
    fn new(a: &[f64], n: usize) -> Self {
        let m = n - 2;
        let h = 1.0 / (n - 1) as f64;
        let inv_h2 = 1.0 / (h * h);
        let at = |i: usize, j: usize| a[i * n + j];
        let face = |i1, j1, i2, j2| 0.5 * (at(i1, j1) + at(i2, j2)) * inv_h2;
        let mut op = Self {
            m,
            east: vec![0.0; m * m],
            west: vec![0.0; m * m],
            north: vec![0.0; m * m],
            south: vec![0.0; m * m],
            diag: vec![0.0; m * m],
        };
        for p in 0..m {
            for q in 0..m {
                let (i, j) = (p + 1, q + 1);
                let k = p * m + q;
                op.north[k] = face(i, j, i - 1, j);
                op.south[k] = face(i, j, i + 1, j);
                op.west[k] = face(i, j, i, j - 1);
                op.east[k] = face(i, j, i, j + 1);
                op.diag[k] = op.north[k] + op.south[k] + op.west[k] + op.east[k];
            }
        }
        op
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        for p in 0..m {
            for q in 0..m {
                let k = p * m + q;
                let mut v = self.diag[k] * x[k];
                if p > 0 {
                    v -= self.north[k] * x[k - m];
                }
                if p + 1 < m {
                    v -= self.south[k] * x[k + m];
                }
                if q > 0 {
                    v -= self.west[k] * x[k - 1];
                }
                if q + 1 < m {
                    v -= self.east[k] * x[k + 1];
                }
                y[k] = v;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `−∇·(a∇u) = f` on the unit square, `u = 0` on the boundary.
///
/// `a` and `f` are sampled on the `n×n` nodes `(i, j)/(n−1)`, boundary
/// included; face coefficients are arithmetic means of the two adjacent
/// nodal values. The SPD system is solved by Jacobi-preconditioned CG to a
/// relative residual of [`CG_TOLERANCE`].
pub fn solve_darcy(a: &Tensor, f: &Tensor) -> Result<Tensor> {
    let n = match a.shape() {
        [n1, n2] if n1 == n2 => *n1,
        s => {
            return Err(Error::invalid_shape(
                "solve_darcy",
                format!("expected a square grid, got {s:?}"),
            ))
        }
    };
    if f.shape() != a.shape() {
        return Err(Error::shape("solve_darcy", a.shape(), f.shape()));
    }
    if n < 3 {
        return Err(Error::invalid_shape(
            "solve_darcy",
            format!("grid {n}×{n} has no interior"),
        ));
    }
    if let Some(bad) = a.data().iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "darcy coefficient must be positive, found {bad}"
        )));
    }
    let op = Operator::new(a.data(), n);
    let m = n - 2;
    let b: Vec<f64> = (0..m * m)
        .map(|k| f.data()[(k / m + 1) * n + k % m + 1])
        .collect();

    let mut x = vec![0.0; m * m];
    let mut r = b.clone();
    let b_norm = dot(&b, &b).sqrt();
    let mut out = vec![0.0; n * n];
    if b_norm == 0.0 {
        return Tensor::new(&[n, n], out);
    }
    let mut z: Vec<f64> = r.iter().zip(&op.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m * m];
    let mut rz = dot(&r, &z);
    let cap = cg_iteration_cap(n);
    let mut residual = 1.0;
    let mut converged = false;
    for _ in 0..cap {
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..m * m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual < CG_TOLERANCE {
            converged = true;
            break;
        }
        for k in 0..m * m {
            z[k] = r[k] / op.diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..m * m {
            p[k] = z[k] + beta * p[k];
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations: cap,
            residual,
        });
    }
    for k in 0..m * m {
        out[(k / m + 1) * n + k % m + 1] = x[k];
    }
    Tensor::new(&[n, n], out)
}

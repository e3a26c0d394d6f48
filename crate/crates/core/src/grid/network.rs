//! Bus admittance matrix and polar power-injection equations.

use nalgebra::DMatrix;

use super::{Branch, SystemModel};
use crate::error::{Error, Result};

/// Row-compressed bus admittance matrix, indexed by internal bus position.
#[derive(Debug, Clone)]
pub struct Network {
    n: usize,
    diag_g: Vec<f64>,
    diag_b: Vec<f64>,
    /// Off-diagonal entries per row: (column, G, B).
    rows: Vec<Vec<(usize, f64, f64)>>,
}

impl Network {
    pub fn from_system(system: &SystemModel) -> Result<Network> {
        let n = system.buses.len();
        let mut net = Network {
            n,
            diag_g: vec![0.0; n],
            diag_b: vec![0.0; n],
            rows: vec![Vec::new(); n],
        };
        for br in &system.branches {
            let f = system
                .bus_index(br.from_bus)
                .ok_or_else(|| Error::InvalidModel(format!("unknown bus {}", br.from_bus)))?;
            let t = system
                .bus_index(br.to_bus)
                .ok_or_else(|| Error::InvalidModel(format!("unknown bus {}", br.to_bus)))?;
            net.add_branch(f, t, br);
        }
        Ok(net)
    }

    fn add_branch(&mut self, f: usize, t: usize, br: &Branch) {
        let r = br.effective_resistance();
        let x = br.reactance;
        let den = r * r + x * x;
        let (gs, bs) = (r / den, -x / den);
        let bh = 0.5 * br.shunt_susceptance;
        self.diag_g[f] += gs;
        self.diag_b[f] += bs + bh;
        self.diag_g[t] += gs;
        self.diag_b[t] += bs + bh;
        self.add_offdiag(f, t, -gs, -bs);
        self.add_offdiag(t, f, -gs, -bs);
    }

    fn add_offdiag(&mut self, i: usize, j: usize, g: f64, b: f64) {
        if let Some(e) = self.rows[i].iter_mut().find(|e| e.0 == j) {
            e.1 += g;
            e.2 += b;
        } else {
            self.rows[i].push((j, g, b));
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().map(|e| e.0)
    }

    /// Net active and reactive power leaving each bus into the network.
    pub fn injections(&self, v: &[f64], theta: &[f64], p: &mut [f64], q: &mut [f64]) {
        for k in 0..self.n {
            let vk = v[k];
            let mut pk = self.diag_g[k] * vk * vk;
            let mut qk = -self.diag_b[k] * vk * vk;
            for &(j, g, b) in &self.rows[k] {
                let (s, c) = (theta[k] - theta[j]).sin_cos();
                let vv = vk * v[j];
                pk += vv * (g * c + b * s);
                qk += vv * (g * s - b * c);
            }
            p[k] = pk;
            q[k] = qk;
        }
    }

    /// Full polar Jacobian of the injections, laid out as
    /// rows `[P_0..P_n, Q_0..Q_n]`, columns `[θ_0..θ_n, V_0..V_n]`.
    ///
    /// Entries are added into `jac` starting at (`row0`, `col0`).
    pub fn add_jacobian(
        &self,
        v: &[f64],
        theta: &[f64],
        jac: &mut DMatrix<f64>,
        row0: usize,
        col0: usize,
    ) {
        let n = self.n;
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        self.injections(v, theta, &mut p, &mut q);
        for k in 0..n {
            let (rp, rq) = (row0 + k, row0 + n + k);
            let (ct, cv) = (col0 + k, col0 + n + k);
            let vk = v[k];
            let (gkk, bkk) = (self.diag_g[k], self.diag_b[k]);
            jac[(rp, ct)] += -q[k] - bkk * vk * vk;
            jac[(rp, cv)] += p[k] / vk + gkk * vk;
            jac[(rq, ct)] += p[k] - gkk * vk * vk;
            jac[(rq, cv)] += q[k] / vk - bkk * vk;
            for &(j, g, b) in &self.rows[k] {
                let (s, c) = (theta[k] - theta[j]).sin_cos();
                let a = g * c + b * s;
                let d = g * s - b * c;
                jac[(rp, col0 + j)] += vk * v[j] * d;
                jac[(rp, col0 + n + j)] += vk * a;
                jac[(rq, col0 + j)] += -vk * v[j] * a;
                jac[(rq, col0 + n + j)] += vk * d;
            }
        }
    }

    /// Buses reachable from `start` through branches.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in self.neighbours(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sysfile::wscc9;

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let sys = wscc9();
        let net = Network::from_system(&sys).unwrap();
        let n = net.len();
        let v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
        let th: Vec<f64> = (0..n).map(|i| 0.05 * (i as f64).sin()).collect();
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        net.add_jacobian(&v, &th, &mut jac, 0, 0);

        let eval = |v: &[f64], th: &[f64]| {
            let mut p = vec![0.0; n];
            let mut q = vec![0.0; n];
            net.injections(v, th, &mut p, &mut q);
            [p, q].concat()
        };
        let h = 1e-7;
        for c in 0..2 * n {
            let (mut v1, mut t1) = (v.clone(), th.clone());
            let (mut v0, mut t0) = (v.clone(), th.clone());
            if c < n {
                t1[c] += h;
                t0[c] -= h;
            } else {
                v1[c - n] += h;
                v0[c - n] -= h;
            }
            let (f1, f0) = (eval(&v1, &t1), eval(&v0, &t0));
            for r in 0..2 * n {
                let fd = (f1[r] - f0[r]) / (2.0 * h);
                assert!(
                    (fd - jac[(r, c)]).abs() < 1e-6,
                    "J[{r},{c}] = {} vs fd {fd}",
                    jac[(r, c)]
                );
            }
        }
    }
}

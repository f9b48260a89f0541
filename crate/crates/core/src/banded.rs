//! Banded LU without pivoting. Only used on M-matrices (strictly diagonally
//! dominant rows), where elimination without pivoting is stable.

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + j + self.bw - i
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Factorises in place and solves `A x = b`, overwriting `b`.
    pub fn solve_in_place(mut self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * w + bw];
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let ik = i * w + k + bw - i;
                let l = self.data[ik];
                if l == 0.0 {
                    continue;
                }
                let l = l / pivot;
                self.data[ik] = l;
                let (head, tail) = self.data.split_at_mut(i * w);
                let row_k = &head[k * w..k * w + w];
                let row_i = &mut tail[..w];
                for j in k + 1..=last {
                    row_i[j + bw - i] -= l * row_k[j + bw - k];
                }
                b[i] -= l * b[k];
            }
        }
        for k in (0..n).rev() {
            let last = (k + bw).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last {
                s -= self.data[k * w + j + bw - k] * b[j];
            }
            b[k] = s / self.data[k * w + bw];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            a.add(i, i, 3.0);
            b[i] += 3.0 * x[i];
            if i > 0 {
                a.add(i, i - 1, -1.0);
                b[i] -= x[i - 1];
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.2);
                b[i] -= 1.2 * x[i + 1];
            }
        }
        a.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn wide_band_solve() {
        let (n, bw) = (40, 7);
        let mut a = BandMatrix::zeros(n, bw);
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            a.add(i, i, 5.0);
            b[i] += 5.0 * x[i];
            for j in [i.wrapping_sub(bw), i + bw, i.wrapping_sub(1)] {
                if j < n {
                    a.add(i, j, -1.0);
                    b[i] -= x[j];
                }
            }
        }
        a.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-11);
        }
    }
}

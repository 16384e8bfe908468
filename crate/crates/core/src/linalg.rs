//! Small dense linear algebra on row-major slices.

use crate::C64;
use alloc::vec;
use alloc::vec::Vec;

/// Determinant of a real `m x m` matrix by partial-pivot elimination.
pub fn det_real(a: &[f64], m: usize) -> f64 {
    let mut w: Vec<f64> = a[..m * m].to_vec();
    let mut det = 1.0;
    for c in 0..m {
        let mut p = c;
        for r in c + 1..m {
            if w[r * m + c].abs() > w[p * m + c].abs() {
                p = r;
            }
        }
        if w[p * m + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..m {
                w.swap(c * m + k, p * m + k);
            }
            det = -det;
        }
        let piv = w[c * m + c];
        det *= piv;
        for r in c + 1..m {
            let f = w[r * m + c] / piv;
            if f != 0.0 {
                for k in c..m {
                    w[r * m + k] -= f * w[c * m + k];
                }
            }
        }
    }
    det
}

/// Determinant of a complex `m x m` matrix.
pub fn det_complex(a: &[C64], m: usize) -> C64 {
    let mut w: Vec<C64> = a[..m * m].to_vec();
    let mut det = C64::new(1.0, 0.0);
    for c in 0..m {
        let mut p = c;
        for r in c + 1..m {
            if w[r * m + c].norm() > w[p * m + c].norm() {
                p = r;
            }
        }
        if w[p * m + c] == C64::new(0.0, 0.0) {
            return C64::new(0.0, 0.0);
        }
        if p != c {
            for k in 0..m {
                w.swap(c * m + k, p * m + k);
            }
            det = -det;
        }
        let piv = w[c * m + c];
        det *= piv;
        for r in c + 1..m {
            let f = w[r * m + c] / piv;
            for k in c..m {
                let t = w[c * m + k];
                w[r * m + k] -= f * t;
            }
        }
    }
    det
}

/// `r x r` complex identity.
pub fn identity(r: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); r * r];
    for i in 0..r {
        m[i * r + i] = C64::new(1.0, 0.0);
    }
    m
}

/// `c = a b` for `r x r` complex matrices.
pub fn matmul(a: &[C64], b: &[C64], r: usize, c: &mut [C64]) {
    for i in 0..r {
        for j in 0..r {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..r {
                s += a[i * r + k] * b[k * r + j];
            }
            c[i * r + j] = s;
        }
    }
}

/// Inverse of an `r x r` complex matrix by Gauss-Jordan; `None` if singular.
pub fn inverse(a: &[C64], r: usize) -> Option<Vec<C64>> {
    let mut w: Vec<C64> = a[..r * r].to_vec();
    let mut inv = identity(r);
    for c in 0..r {
        let mut p = c;
        for k in c + 1..r {
            if w[k * r + c].norm() > w[p * r + c].norm() {
                p = k;
            }
        }
        if w[p * r + c].norm() < 1e-300 {
            return None;
        }
        if p != c {
            for k in 0..r {
                w.swap(c * r + k, p * r + k);
                inv.swap(c * r + k, p * r + k);
            }
        }
        let piv = w[c * r + c].inv();
        for k in 0..r {
            w[c * r + k] *= piv;
            inv[c * r + k] *= piv;
        }
        for row in 0..r {
            if row != c {
                let f = w[row * r + c];
                if f != C64::new(0.0, 0.0) {
                    for k in 0..r {
                        let (t, s) = (w[c * r + k], inv[c * r + k]);
                        w[row * r + k] -= f * t;
                        inv[row * r + k] -= f * s;
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Max-modulus entry norm of a complex matrix.
pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_of_permutation_and_triangular() {
        let a = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(det_real(&a, 2), -1.0);
        let t = [2.0, 5.0, 7.0, 0.0, 3.0, 1.0, 0.0, 0.0, 4.0];
        assert!((det_real(&t, 3) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = [
            C64::new(1.0, 0.5),
            C64::new(0.2, 0.0),
            C64::new(-0.3, 0.1),
            C64::new(2.0, -1.0),
        ];
        let inv = inverse(&a, 2).unwrap();
        let mut p = [C64::new(0.0, 0.0); 4];
        matmul(&a, &inv, 2, &mut p);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i * 2 + j] - C64::new(e, 0.0)).norm() < 1e-13);
            }
        }
    }
}

//! Symmetric tridiagonal eigensolver that tracks only the first component
//! of each eigenvector, which is all a spectral measure at site 0 needs.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TridiagError {
    #[error("off-diagonal length {off} does not match diagonal length {diag}")]
    Shape { diag: usize, off: usize },
    #[error("QL iteration did not converge for eigenvalue {index}")]
    NoConvergence { index: usize },
}

/// Eigenvalues in ascending order and the matching squared first
/// components |v(0)|² (the spectral weights at site 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SiteZeroSpectrum {
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Implicit QL with Wilkinson shifts on the matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples sites i and i+1).
pub fn site_zero_spectrum(diag: &[f64], off: &[f64]) -> Result<SiteZeroSpectrum, TridiagError> {
    let n = diag.len();
    if n == 0 {
        return Ok(SiteZeroSpectrum { eigenvalues: vec![], weights: vec![] });
    }
    if off.len() + 1 != n {
        return Err(TridiagError::Shape { diag: n, off: off.len() });
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    // first row of the accumulated rotation matrix
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    let scale = d.iter().chain(e.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = f64::EPSILON * scale;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(TridiagError::NoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok(SiteZeroSpectrum {
        eigenvalues: order.iter().map(|&i| d[i]).collect(),
        weights: order.iter().map(|&i| z[i] * z[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn three_site_chain() {
        // b = (1, 1): eigenvalues -√2, 0, √2 with weights 1/4, 1/2, 1/4
        let s = site_zero_spectrum(&[0.0; 3], &[1.0, 1.0]).unwrap();
        let r2 = 2f64.sqrt();
        for (got, want) in s.eigenvalues.iter().zip([-r2, 0.0, r2]) {
            assert!((got - want).abs() < 1e-14);
        }
        for (got, want) in s.weights.iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_dense_symmetric_eigen() {
        let diag = [0.3, -1.2, 0.0, 2.5, 0.7, -0.4];
        let off = [1.1, 0.2, 3.0, 0.9, 1.7];
        let n = diag.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = diag[i];
            if i + 1 < n {
                a[(i, i + 1)] = off[i];
                a[(i + 1, i)] = off[i];
            }
        }
        let dense = a.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (dense.eigenvalues[k], dense.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let s = site_zero_spectrum(&diag, &off).unwrap();
        for (k, (lam, w)) in pairs.iter().enumerate() {
            assert!((s.eigenvalues[k] - lam).abs() < 1e-12);
            assert!((s.weights[k] - w).abs() < 1e-12);
        }
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(site_zero_spectrum(&[0.0, 0.0], &[]), Err(TridiagError::Shape { .. })));
        assert!(site_zero_spectrum(&[], &[]).unwrap().eigenvalues.is_empty());
        let one = site_zero_spectrum(&[2.0], &[]).unwrap();
        assert_eq!(one.eigenvalues, vec![2.0]);
        assert_eq!(one.weights, vec![1.0]);
    }
}

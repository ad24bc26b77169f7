use crate::assembly::StiffnessSystem;
use crate::linalg::{dot, norm2, CsrMatrix, SparseCholesky};
use crate::{Error, Result};

/// Required relative residual of a reference solve.
pub const REFERENCE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    /// Full-length displacement, prescribed values on constrained dofs.
    pub u: Vec<f64>,
    /// `‖K_ff u_f − b‖ / ‖b‖` on free dofs (absolute when `b = 0`).
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

fn residual(k_free: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = k_free.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

/// Direct sparse solve on the free dofs, refined until the residual bound
/// holds.
pub fn solve_reference(system: &StiffnessSystem, k_free: &CsrMatrix) -> Result<ReferenceSolution> {
    let b = system.effective_load();
    if b.is_empty() {
        return Ok(ReferenceSolution {
            u: system.expand(&[]),
            relative_residual: 0.0,
            refinement_steps: 0,
        });
    }
    let chol = SparseCholesky::factor(k_free).map_err(|e| {
        Error::Numerical(format!("reference factorization failed, the network may contain a mechanism: {e}"))
    })?;
    let mut x = chol.solve(&b);
    let b_norm = norm2(&b);
    let rel = |r: &[f64]| if b_norm > 0.0 { norm2(r) / b_norm } else { norm2(r) };
    let mut r = residual(k_free, &x, &b);
    let mut steps = 0;
    while rel(&r) > REFERENCE_RESIDUAL_TOL && steps < 3 {
        let dx = chol.solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        r = residual(k_free, &x, &b);
        steps += 1;
    }
    let relative_residual = rel(&r);
    if relative_residual > REFERENCE_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "reference residual {relative_residual:.3e} above {REFERENCE_RESIDUAL_TOL:.0e}"
        )));
    }
    Ok(ReferenceSolution {
        u: system.expand(&x),
        relative_residual,
        refinement_steps: steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeErrors {
    pub l2: f64,
    pub energy: f64,
}

/// `‖u − u_ms‖₂ / ‖u‖₂` and `‖u − u_ms‖_E / ‖u‖_E` with `‖v‖_E² = vᵀ K v`.
pub fn relative_errors(u: &[f64], u_ms: &[f64], k: &CsrMatrix) -> Result<RelativeErrors> {
    if u.len() != u_ms.len() || k.nrows() != u.len() {
        return Err(Error::Numerical("error norms need vectors of matching length".into()));
    }
    let e: Vec<f64> = u.iter().zip(u_ms).map(|(a, b)| a - b).collect();
    let u_l2 = norm2(u);
    let u_energy = dot(u, &k.mul_vec(u)).max(0.0).sqrt();
    if u_l2 == 0.0 || u_energy == 0.0 {
        return Err(Error::Numerical("relative error undefined for a zero reference solution".into()));
    }
    Ok(RelativeErrors {
        l2: norm2(&e) / u_l2,
        energy: dot(&e, &k.mul_vec(&e)).max(0.0).sqrt() / u_energy,
    })
}

/// Least-squares slope of `log(error)` against `log(H)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Mean squared residual of the log-log fit.
    pub residual_variance: f64,
    pub points: usize,
}

/// Fits `log e = slope · log H + intercept`. Rows with non-positive error
/// are skipped with a warning; at least three must remain.
pub fn fit_rate(h: &[f64], err: &[f64]) -> Result<RateFit> {
    assert_eq!(h.len(), err.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&hi, &ei) in h.iter().zip(err) {
        if ei > 0.0 && hi > 0.0 {
            xs.push(hi.ln());
            ys.push(ei.ln());
        } else {
            log::warn!("excluding row H = {hi} with error {ei} from the rate fit");
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::Numerical(format!("rate fit needs at least 3 positive rows, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("rate fit needs distinct H values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_variance = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok(RateFit {
        slope,
        intercept,
        residual_variance,
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let h = [0.25, 0.125, 0.0625, 0.03125];
        let e2: Vec<f64> = h.iter().map(|x| x * x).collect();
        let e1: Vec<f64> = h.iter().map(|x| 3.0 * x).collect();
        assert!((fit_rate(&h, &e2).unwrap().slope - 2.0).abs() <= 1e-12);
        assert!((fit_rate(&h, &e1).unwrap().slope - 1.0).abs() <= 1e-12);
        assert!(fit_rate(&h, &e1).unwrap().residual_variance < 1e-24);
    }

    #[test]
    fn zero_rows_are_excluded() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let e = [0.25, 0.0625, 0.0, 0.00390625];
        let fit = fit_rate(&h, &e).unwrap();
        assert_eq!(fit.points, 3);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit_rate(&h[..3], &e[..3]).is_err());
    }

    #[test]
    fn error_normalization() {
        let k = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 1.0)]);
        let u = [1.0, 2.0];
        let same = relative_errors(&u, &u, &k).unwrap();
        assert_eq!((same.l2, same.energy), (0.0, 0.0));
        let zero = relative_errors(&u, &[0.0, 0.0], &k).unwrap();
        assert!((zero.l2 - 1.0).abs() < 1e-15 && (zero.energy - 1.0).abs() < 1e-15);
        assert!(relative_errors(&[0.0, 0.0], &u, &k).is_err());
    }
}

use super::sparse::{dot, norm2, CsrMatrix};

pub struct MinresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned MINRES (Paige and Saunders) for symmetric `A` and symmetric
/// positive definite preconditioner `M`, given through `apply = M⁻¹`.
///
/// Stops once the true residual `‖b - A x‖₂` drops below `tol ‖b‖₂`.
pub fn minres(
    a: &CsrMatrix,
    b: &[f64],
    apply: impl Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> MinresOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return MinresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let true_residual = |x: &[f64]| {
        let ax = a.mul_vec(x);
        norm2(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>()) / bnorm
    };

    let mut r1 = b.to_vec();
    let mut y = apply(&r1);
    let beta1 = dot(&r1, &y).sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut rel = 1.0;

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = a.mul_vec(&v);
        if itn >= 2 {
            let f = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(yi, ri)| *yi -= f * ri);
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(yi, ri)| *yi -= f * ri);
        r1 = std::mem::replace(&mut r2, y.clone());
        y = apply(&r2);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::take(&mut w2);
        w2 = std::mem::take(&mut w);
        w = (0..n)
            .map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma)
            .collect();
        x.iter_mut().zip(&w).for_each(|(xi, wi)| *xi += phi * wi);

        // the recurrence estimates the residual in the M⁻¹ norm; confirm with
        // the true residual before stopping
        if phibar <= tol * beta1 || itn % 50 == 0 || beta == 0.0 {
            rel = true_residual(&x);
            if rel <= tol {
                return MinresOutcome {
                    x,
                    iterations: itn,
                    relative_residual: rel,
                    converged: true,
                };
            }
            if beta == 0.0 {
                break;
            }
        }
        if itn == max_iter {
            rel = true_residual(&x);
        }
    }
    let converged = rel <= tol;
    MinresOutcome {
        x,
        iterations: max_iter,
        relative_residual: rel,
        converged,
    }
}

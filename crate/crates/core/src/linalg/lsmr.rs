use super::{CsrMatrix, LinalgError, SparseSystem};

/// Result of a converged LSMR solve.
#[derive(Debug, Clone)]
pub struct LsmrSolution {
    pub x: Vec<f64>,
    /// True residual norm ‖b − A x‖₂ evaluated at exit.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solver options. Damping is fixed to zero: the systems assembled here are
/// plain least-squares problems.
#[derive(Debug, Clone, Copy)]
pub struct LsmrOptions {
    pub atol: f64,
    pub btol: f64,
    /// Iteration cap; `None` means `10 × n_cols`.
    pub max_iter: Option<usize>,
}

impl Default for LsmrOptions {
    fn default() -> Self {
        Self { atol: 1e-12, btol: 1e-12, max_iter: None }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Stable Givens rotation, returning `(c, s, r)`.
fn sym_ortho(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        (if a == 0.0 { 1.0 } else { a.signum() }, 0.0, a.abs())
    } else if a == 0.0 {
        (0.0, b.signum(), b.abs())
    } else if b.abs() > a.abs() {
        let tau = a / b;
        let s = b.signum() / (1.0 + tau * tau).sqrt();
        let c = s * tau;
        (c, s, b / s)
    } else {
        let tau = b / a;
        let c = a.signum() / (1.0 + tau * tau).sqrt();
        let s = c * tau;
        (c, s, a / c)
    }
}

/// Iterative least-squares solve of `min ‖A x − b‖₂` on the sparse system.
///
/// Returns the minimizer once both the residual-based and the normal-equation
/// stopping tests pass at the requested tolerances; hitting the iteration cap
/// yields [`LinalgError::DidNotConverge`] carrying the best iterate.
pub fn lsmr_solve(
    sys: &SparseSystem,
    atol: f64,
    btol: f64,
    max_iter: usize,
) -> Result<LsmrSolution, LinalgError> {
    assert!(max_iter >= 1, "max_iter must be at least 1");
    let a: CsrMatrix = sys.to_csr();
    let b = sys.rhs();
    let m = a.n_rows();
    let n = a.n_cols();

    let mut x = vec![0.0; n];
    let mut u = b.to_vec();
    let normb = norm2(&u);
    let mut beta = normb;
    let mut v = vec![0.0; n];
    let mut alpha = 0.0;
    if beta > 0.0 {
        for ui in u.iter_mut() {
            *ui /= beta;
        }
        a.add_tr_mul_vec(&u, &mut v);
        alpha = norm2(&v);
        if alpha > 0.0 {
            for vi in v.iter_mut() {
                *vi /= alpha;
            }
        }
    }
    if alpha * beta == 0.0 {
        // b is zero or already orthogonal to the range: x = 0 is the answer.
        return Ok(LsmrSolution { x, residual_norm: normb, iterations: 0 });
    }

    let mut zetabar = alpha * beta;
    let mut alphabar = alpha;
    let mut rho = 1.0f64;
    let mut rhobar = 1.0f64;
    let mut cbar = 1.0f64;
    let mut sbar = 0.0f64;

    let mut h = v.clone();
    let mut hbar = vec![0.0; n];

    // Residual-norm estimation state.
    let mut betadd = beta;
    let mut betad = 0.0f64;
    let mut rhodold = 1.0f64;
    let mut tautildeold = 0.0f64;
    let mut thetatilde = 0.0f64;
    let mut zeta = 0.0f64;
    let mut d = 0.0f64;

    let mut norm_a2 = alpha * alpha;
    let mut itn = 0usize;
    let mut converged = false;

    let mut scratch_m = vec![0.0; m];
    let mut scratch_n = vec![0.0; n];

    while itn < max_iter {
        itn += 1;

        // Golub-Kahan bidiagonalization step.
        scratch_m.iter_mut().for_each(|z| *z = 0.0);
        a.add_mul_vec(&v, &mut scratch_m);
        for i in 0..m {
            u[i] = scratch_m[i] - alpha * u[i];
        }
        beta = norm2(&u);
        if beta > 0.0 {
            for ui in u.iter_mut() {
                *ui /= beta;
            }
            scratch_n.iter_mut().for_each(|z| *z = 0.0);
            a.add_tr_mul_vec(&u, &mut scratch_n);
            for i in 0..n {
                v[i] = scratch_n[i] - beta * v[i];
            }
            alpha = norm2(&v);
            if alpha > 0.0 {
                for vi in v.iter_mut() {
                    *vi /= alpha;
                }
            }
        }

        // Plane rotations folding the bidiagonal into upper-triangular form.
        let rhoold = rho;
        let (c, s, rho_new) = sym_ortho(alphabar, beta);
        rho = rho_new;
        let thetanew = s * alpha;
        alphabar = c * alpha;

        let rhobarold = rhobar;
        let zetaold = zeta;
        let thetabar = sbar * rho;
        let (cbar_new, sbar_new, rhobar_new) = sym_ortho(cbar * rho, thetanew);
        cbar = cbar_new;
        sbar = sbar_new;
        rhobar = rhobar_new;
        zeta = cbar * zetabar;
        zetabar = -sbar * zetabar;

        // Update the search directions and the iterate.
        let hbar_scale = thetabar * rho / (rhoold * rhobarold);
        for i in 0..n {
            hbar[i] = h[i] - hbar_scale * hbar[i];
        }
        let step = zeta / (rho * rhobar);
        for i in 0..n {
            x[i] += step * hbar[i];
        }
        let h_scale = thetanew / rho;
        for i in 0..n {
            h[i] = v[i] - h_scale * h[i];
        }

        // Cheap recurrences estimating ‖r‖ and ‖Aᵀr‖.
        let betaacute = betadd; // chat = 1, shat = 0 with zero damping
        let betacheck = 0.0;
        let betahat = c * betaacute;
        betadd = -s * betaacute;

        let thetatildeold = thetatilde;
        let (ctildeold, stildeold, rhotildeold) = sym_ortho(rhodold, thetabar);
        thetatilde = stildeold * rhobar;
        rhodold = ctildeold * rhobar;
        betad = -stildeold * betad + ctildeold * betahat;

        tautildeold = (zetaold - thetatildeold * tautildeold) / rhotildeold;
        let taud = (zeta - thetatilde * tautildeold) / rhodold;
        d += betacheck * betacheck;
        let normr = (d + (betad - taud).powi(2) + betadd * betadd).sqrt();

        norm_a2 += beta * beta;
        let norm_a = norm_a2.sqrt();
        norm_a2 += alpha * alpha;

        let normar = zetabar.abs();
        let normx = norm2(&x);

        // Convergence tests from the reference algorithm.
        let test1 = normr / normb;
        let test2 = if norm_a * normr != 0.0 { normar / (norm_a * normr) } else { f64::INFINITY };
        let t1 = test1 / (1.0 + norm_a * normx / normb);
        let rtol = btol + atol * norm_a * normx / normb;

        if 1.0 + test2 <= 1.0
            || 1.0 + t1 <= 1.0
            || test2 <= atol
            || test1 <= rtol
            || normar == 0.0
        {
            converged = true;
            break;
        }
    }

    let residual_norm = norm2(&sys.residual(&x));
    if converged {
        Ok(LsmrSolution { x, residual_norm, iterations: itn })
    } else {
        Err(LinalgError::DidNotConverge { best: x, residual_norm, iterations: itn })
    }
}

/// [`lsmr_solve`] with the default tolerances (1e-12) and `10 × n_cols` cap.
pub fn lsmr_solve_default(sys: &SparseSystem) -> Result<LsmrSolution, LinalgError> {
    let opts = LsmrOptions::default();
    lsmr_solve(sys, opts.atol, opts.btol, opts.max_iter.unwrap_or(10 * sys.n_cols().max(1)))
}

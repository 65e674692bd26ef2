//! Building blocks of the convexified beamforming program.
//!
//! Complex beams are lifted to reals as `p = x + iy ↦ [x; y]`, so for a fixed
//! `u`, `Re(uᴴp) = u_rᵀx + u_iᵀy` and `Im(uᴴp) = u_rᵀy − u_iᵀx`.

use num_complex::Complex64;
use rsma_conic::{AffExpr, ConicProgram, Var};

use crate::error::{Error, Result};
use crate::linalg::{dot, CMat, CVec};

/// A complex N-vector of decision variables.
#[derive(Clone, Debug)]
pub struct CVar {
    pub re: Vec<Var>,
    pub im: Vec<Var>,
}

impl CVar {
    pub fn new(prog: &mut ConicProgram, n: usize) -> Self {
        Self { re: prog.add_vars(n), im: prog.add_vars(n) }
    }

    pub fn dim(&self) -> usize {
        self.re.len()
    }

    /// Real and imaginary parts of `uᴴp`.
    pub fn inner(&self, u: &[Complex64]) -> (AffExpr, AffExpr) {
        let mut re = AffExpr::zero();
        let mut im = AffExpr::zero();
        for (n, c) in u.iter().enumerate() {
            if c.re != 0.0 {
                re.add_term(self.re[n], c.re);
                im.add_term(self.im[n], c.re);
            }
            if c.im != 0.0 {
                re.add_term(self.im[n], c.im);
                im.add_term(self.re[n], -c.im);
            }
        }
        (re, im)
    }

    /// The 2N real coordinates.
    pub fn components(&self) -> Vec<AffExpr> {
        self.re.iter().chain(&self.im).map(|&v| v.into()).collect()
    }

    pub fn value(&self, x: &[f64]) -> CVec {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| Complex64::new(x[r.0], x[i.0]))
            .collect()
    }

    /// `self = p` as zero-cone rows.
    pub fn fix(&self, prog: &mut ConicProgram, p: &[Complex64]) {
        for (n, z) in p.iter().enumerate() {
            prog.equal_zero(AffExpr::from(self.re[n]) - z.re);
            prog.equal_zero(AffExpr::from(self.im[n]) - z.im);
        }
    }
}

/// Factored Hermitian PSD matrix `G = Σ_r f_r f_rᴴ`, so `pᴴGp = Σ_r |f_rᴴp|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramFactor {
    rows: Vec<CVec>,
}

impl GramFactor {
    pub fn rank_one(a: CVec) -> Self {
        Self { rows: vec![a] }
    }

    /// `bbᴴ + νI`
    pub fn with_identity(b: CVec, nu: f64) -> Self {
        let n = b.len();
        let mut rows = vec![b];
        if nu > 0.0 {
            let s = nu.sqrt();
            for i in 0..n {
                let mut e = crate::linalg::zeros(n);
                e[i] = Complex64::new(s, 0.0);
                rows.push(e);
            }
        }
        Self { rows }
    }

    pub fn quad(&self, p: &[Complex64]) -> f64 {
        self.rows.iter().map(|f| dot(f, p).norm_sqr()).sum()
    }

    pub fn to_matrix(&self) -> CMat {
        let n = self.rows[0].len();
        self.rows.iter().fold(CMat::zeros(n), |acc, f| acc.add(&CMat::outer(f, f)))
    }

    /// Real coordinates whose squares sum to `scale²·pᴴGp`.
    pub fn terms(&self, p: &CVar, scale: f64) -> Vec<AffExpr> {
        let mut out = Vec::with_capacity(2 * self.rows.len());
        for f in &self.rows {
            let (re, im) = p.inner(f);
            out.push(re * scale);
            out.push(im * scale);
        }
        out
    }

    /// Affine minorant of `pᴴGp` tangent at `p_prev`:
    /// `2Re((Gp_prev)ᴴp) − p_prevᴴGp_prev = Tr(G·W)` with `W` from
    /// [`rank_one_linearize`].
    pub fn linearize(&self, p: &CVar, p_prev: &[Complex64]) -> AffExpr {
        let mut out = AffExpr::zero();
        for f in &self.rows {
            let z = dot(f, p_prev);
            let (re, im) = p.inner(f);
            out += re * (2.0 * z.re) + im * (2.0 * z.im);
            out = out - z.norm_sqr();
        }
        out
    }
}

/// `w_prev·wᴴ + w·w_prevᴴ − w_prev·w_prevᴴ`: affine in `w`, Hermitian, and equal
/// to `wwᴴ` when `w = w_prev`.
pub fn rank_one_linearize(w_prev: &[Complex64], w: &[Complex64]) -> CMat {
    CMat::outer(w_prev, w)
        .add(&CMat::outer(w, w_prev))
        .sub(&CMat::outer(w_prev, w_prev))
}

/// `e^{c_prev}·(c − c_prev + 1)`, the tangent of `e^c` at `c_prev`; it never
/// exceeds `e^c`, so capping a quantity by it restricts the feasible set.
pub fn exp_taylor_upper(c: AffExpr, c_prev: f64) -> AffExpr {
    let s = c_prev.exp();
    (c - c_prev + 1.0) * s
}

fn check_beta(beta: f64) -> Result<f64> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must exceed 1 (got {beta})")));
    }
    Ok(2.0 * (beta / (beta - 1.0)).sqrt())
}

/// Rows `(Λ+Υ, 2√(β/(β−1))·Tr, Λ−Υ)` of the secrecy cone; membership in the
/// second-order cone is `ΥΛ ≥ β/(β−1)·Tr²` with `Λ, Υ ≥ 0`.
pub fn soc_secrecy_rows(tr: AffExpr, lambda: AffExpr, upsilon: AffExpr, beta: f64) -> Result<Vec<AffExpr>> {
    let k = check_beta(beta)?;
    Ok(vec![lambda.clone() + upsilon.clone(), tr * k, lambda - upsilon])
}

/// Emits `‖(2√(β/(β−1))·Tr, Λ−Υ)‖₂ ≤ Λ+Υ`.
pub fn soc_secrecy_block(prog: &mut ConicProgram, tr: AffExpr, lambda: AffExpr, upsilon: AffExpr, beta: f64) -> Result<()> {
    let mut rows = soc_secrecy_rows(tr, lambda, upsilon, beta)?;
    let head = rows.remove(0);
    prog.soc(head, rows);
    Ok(())
}

/// Epigraph pieces of the signal-to-leakage requirement `R_l − R_kl ≥ η`.
///
/// With `S_l`, `J_l` the useful and interfering received power at user `l`
/// (noise included in `J_l`) and `S_k`, `J_k` the same at eavesdropper `k`,
/// the requirement reads `(S_l + J_l)·J_k ≥ β·J_l·(S_k + J_k)`, which is
/// `ΥΛ ≥ β/(β−1)·S_l·S_k` for `Υ = S_l + (1−β)J_l` and `Λ = J_k + β/(β−1)·S_k`.
pub fn secrecy_lambda_upsilon(s_l: f64, j_l: f64, s_k: f64, j_k: f64, beta: f64) -> (f64, f64) {
    let b = beta / (beta - 1.0);
    (j_k + b * s_k, s_l + (1.0 - beta) * j_l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn lift_value(p: &[Complex64]) -> Vec<f64> {
        p.iter().map(|z| z.re).chain(p.iter().map(|z| z.im)).collect()
    }

    #[test]
    fn lifted_inner_product() {
        let mut prog = ConicProgram::new();
        let v = CVar::new(&mut prog, 2);
        let u = [c(0.3, -1.2), c(2.0, 0.5)];
        let p = [c(-0.7, 0.4), c(1.1, 0.9)];
        let (re, im) = v.inner(&u);
        let x = lift_value(&p);
        let z = dot(&u, &p);
        assert!((re.eval(&x) - z.re).abs() < 1e-14);
        assert!((im.eval(&x) - z.im).abs() < 1e-14);
        assert_eq!(v.value(&x), p.to_vec());
    }

    #[test]
    fn factor_terms_and_matrix_agree() {
        let mut prog = ConicProgram::new();
        let v = CVar::new(&mut prog, 3);
        let g = GramFactor::with_identity(vec![c(1.0, 0.5), c(-0.2, 0.0), c(0.0, 2.0)], 0.3);
        let p = [c(0.5, 0.5), c(1.0, -1.0), c(0.1, 0.0)];
        let x = lift_value(&p);
        let sq: f64 = g.terms(&v, 2.0).iter().map(|t| t.eval(&x).powi(2)).sum();
        assert!((sq - 4.0 * g.quad(&p)).abs() < 1e-12);
        assert!((g.to_matrix().quad_form(&p) - g.quad(&p)).abs() < 1e-12);
    }

    #[test]
    fn rank_one_examples() {
        let w = [c(1.0, 2.0), c(-0.5, 0.1)];
        assert!(rank_one_linearize(&w, &w).sub(&CMat::outer(&w, &w)).frobenius() < 1e-15);
        let z = [c(0.0, 0.0); 2];
        assert_eq!(rank_one_linearize(&z, &w).frobenius(), 0.0);
    }

    #[test]
    fn taylor_examples() {
        let mut prog = ConicProgram::new();
        let cv = prog.add_var();
        let e = exp_taylor_upper(cv.into(), 0.0);
        for c in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let b = e.eval(&[c]);
            assert!((b - (c + 1.0)).abs() < 1e-15);
            assert!(b <= f64::exp(c));
        }
        let e = exp_taylor_upper(cv.into(), 1.3);
        assert!((e.eval(&[1.3]) - 1.3f64.exp()).abs() <= 4.0 * f64::EPSILON * 1.3f64.exp());
    }

    #[test]
    fn soc_secrecy_boundary_example() {
        let rows = soc_secrecy_rows(AffExpr::constant(2.0), AffExpr::constant(4.0), AffExpr::constant(2.0), 2.0).unwrap();
        let v: Vec<f64> = rows.iter().map(|r| r.eval(&[])).collect();
        let tail = (v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!((tail - 6.0).abs() < 1e-14);
        assert_eq!(v[0], 6.0);
        assert!(soc_secrecy_rows(AffExpr::zero(), AffExpr::zero(), AffExpr::zero(), 1.0).is_err());
    }

    #[test]
    fn zero_cross_term_reduces_to_nonnegativity() {
        for &(l, u, inside) in &[(1.0, 2.0, true), (0.0, 0.0, true), (-1.0, 2.0, false), (3.0, -0.1, false)] {
            let rows = soc_secrecy_rows(AffExpr::zero(), AffExpr::constant(l), AffExpr::constant(u), 1.5).unwrap();
            let v: Vec<f64> = rows.iter().map(|r| r.eval(&[])).collect();
            assert_eq!((v[1] * v[1] + v[2] * v[2]).sqrt() <= v[0], inside, "Λ={l} Υ={u}");
        }
    }

    #[test]
    fn lambda_upsilon_encode_the_secrecy_margin() {
        // R_l − R_k ≥ η  ⇔  ΥΛ ≥ β/(β−1)·S_l·S_k
        let cases: [(f64, f64, f64, f64, f64); 3] = [(5.0, 1.0, 0.4, 2.0, 0.5), (1.0, 1.0, 3.0, 1.0, 0.3), (9.0, 0.5, 0.1, 0.2, 1.0)];
        for &(s_l, j_l, s_k, j_k, eta) in &cases {
            let beta = 2f64.powf(eta);
            let margin = ((1.0 + s_l / j_l).log2() - (1.0 + s_k / j_k).log2()) - eta;
            let (lam, ups) = secrecy_lambda_upsilon(s_l, j_l, s_k, j_k, beta);
            let hyper = ups * lam - beta / (beta - 1.0) * s_l * s_k;
            assert_eq!(margin >= 0.0, hyper >= 0.0, "{s_l} {j_l} {s_k} {j_k}");
        }
    }

    proptest! {
        #[test]
        fn linearization_is_tangent_minorant(
            f in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
            nu in 0.0f64..1.0,
            p in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
            q in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
        ) {
            let f: CVec = f.into_iter().map(|(a, b)| c(a, b)).collect();
            let p: CVec = p.into_iter().map(|(a, b)| c(a, b)).collect();
            let q: CVec = q.into_iter().map(|(a, b)| c(a, b)).collect();
            let g = GramFactor::with_identity(f, nu);
            let mut prog = ConicProgram::new();
            let v = CVar::new(&mut prog, 3);
            let lin = g.linearize(&v, &q);
            let at_p = lin.eval(&lift_value(&p));
            prop_assert!(at_p <= g.quad(&p) + 1e-10);
            prop_assert!((lin.eval(&lift_value(&q)) - g.quad(&q)).abs() < 1e-10);
            let tr = g.to_matrix().trace_prod(&rank_one_linearize(&q, &p));
            prop_assert!((tr.re - at_p).abs() < 1e-9);
            prop_assert!(rank_one_linearize(&q, &p).hermitian_defect() < 1e-14);
        }

        #[test]
        fn exp_tangent_is_lower_bound(cv in -20.0f64..20.0, cp in -20.0f64..20.0) {
            let e = exp_taylor_upper(AffExpr::constant(cv), cp).eval(&[]);
            prop_assert!(e <= cv.exp() * (1.0 + 1e-12));
        }
    }
}

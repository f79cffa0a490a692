//! Adaptive Simpson quadrature over a finite interval.
//!
//! The interval is first cut into equal panels so that narrow peaks are seen
//! by the initial sampling, then each panel is refined recursively with the
//! usual `|S2 - S1| <= 15 tol` acceptance and Richardson correction.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the local error estimates of accepted subintervals.
    pub error_estimate: f64,
    /// `integral of |f|` estimated from the initial panels; the tolerance
    /// is relative to this scale.
    pub scale: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSimpson {
    pub rel_tol: f64,
    pub max_depth: u32,
    pub panels: usize,
    /// Hard cap on integrand evaluations.
    pub max_evaluations: usize,
}

impl Default for AdaptiveSimpson {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_depth: 40, panels: 64, max_evaluations: 20_000_000 }
    }
}

struct Acc {
    value: f64,
    err: f64,
    unresolved: f64,
    evals: usize,
}

impl AdaptiveSimpson {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Quadrature> {
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(Error::Domain(format!("bad integration interval [{a}, {b}]")));
        }
        let panels = self.panels.max(1);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels);
        let mut scale = 0.0;
        let mut evals = 0;
        for i in 0..panels {
            let lo = a + width * i as f64;
            let hi = if i + 1 == panels { b } else { lo + width };
            let mid = 0.5 * (lo + hi);
            let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
            evals += 3;
            if !(flo.is_finite() && fmid.is_finite() && fhi.is_finite()) {
                return Err(Error::Numeric(format!("integrand is not finite near x = {mid}")));
            }
            scale += (hi - lo) / 6.0 * (flo.abs() + 4.0 * fmid.abs() + fhi.abs());
            nodes.push((lo, flo, mid, fmid, hi, fhi));
        }
        if scale == 0.0 {
            return Ok(Quadrature { value: 0.0, error_estimate: 0.0, scale, evaluations: evals });
        }

        let tol = self.rel_tol * scale;
        let mut acc = Acc { value: 0.0, err: 0.0, unresolved: 0.0, evals };
        for (lo, flo, mid, fmid, hi, fhi) in nodes {
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            let panel_tol = tol * (hi - lo) / (b - a);
            self.refine(&f, (lo, flo), (mid, fmid), (hi, fhi), whole, panel_tol, 0, &mut acc)?;
        }
        if acc.unresolved > tol {
            return Err(Error::Numeric(format!(
                "adaptive Simpson did not converge: unresolved error {:.3e} exceeds {:.3e} after depth {}",
                acc.unresolved, tol, self.max_depth
            )));
        }
        Ok(Quadrature { value: acc.value, error_estimate: acc.err, scale, evaluations: acc.evals })
    }

    #[allow(clippy::too_many_arguments)]
    fn refine<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
        acc: &mut Acc,
    ) -> Result<()> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = (f(lm), f(rm));
        acc.evals += 2;
        if acc.evals > self.max_evaluations {
            return Err(Error::Numeric(format!(
                "adaptive Simpson exceeded {} evaluations without converging",
                self.max_evaluations
            )));
        }
        if !(flm.is_finite() && frm.is_finite()) {
            return Err(Error::Numeric(format!("integrand is not finite near x = {m}")));
        }
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= 1 && delta.abs() <= 15.0 * tol {
            acc.value += left + right + delta / 15.0;
            acc.err += delta.abs() / 15.0;
            return Ok(());
        }
        if depth >= self.max_depth {
            acc.value += left + right + delta / 15.0;
            acc.err += delta.abs() / 15.0;
            acc.unresolved += delta.abs() / 15.0;
            return Ok(());
        }
        self.refine(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth + 1, acc)?;
        self.refine(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth + 1, acc)
    }
}

//! Composite Gauss-Legendre rules.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

pub(crate) fn gl8() -> &'static [(f64, f64)] {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8.try_into().unwrap()))
        .as_node_weight_pairs()
}

/// `∫_a^b f` with `panels` equal Gauss-Legendre panels.
pub(crate) fn panels(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        for &(x, wt) in gl8() {
            total += 0.5 * width * wt * f(lo + 0.5 * width * (x + 1.0));
        }
    }
    total
}

/// `∫_a^b f` in the variable `ln x`, panels of two e-folds.
pub(crate) fn log_panels(a: f64, b: f64, f: impl FnMut(f64) -> f64) -> f64 {
    log_panels_width(a, b, 2.0, f)
}

pub(crate) fn log_panels_width(a: f64, b: f64, efolds: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    if !(b > a) || !(a > 0.0) {
        return 0.0;
    }
    let (la, lb) = (a.ln(), b.ln());
    let count = ((lb - la) / efolds).ceil().max(1.0) as usize;
    panels(la, lb, count, |u| {
        let x = u.exp();
        x * f(x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_log_rules() {
        assert!((panels(0.0, 2.0, 3, |x| x.powi(5)) - 64.0 / 6.0).abs() < 1e-12);
        let v = log_panels(1e-3, 1e3, |x| 1.0 / (1.0 + x * x));
        let exact = 1e3f64.atan() - 1e-3f64.atan();
        assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
        let fine = log_panels_width(1e-3, 1e3, 0.5, |x| 1.0 / (1.0 + x * x));
        assert!((fine - exact).abs() < 1e-12, "{fine} vs {exact}");
    }
}

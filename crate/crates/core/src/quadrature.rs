//! Adaptive Simpson quadrature with interval bisection.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("subinterval cap of {cap} reached before meeting tolerance on [{a}, {b}]")]
    SubintervalCap { cap: usize, a: f64, b: f64 },
    #[error("integrand not finite at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subintervals: usize,
    /// Uniform panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subintervals: 1_000_000,
            initial_panels: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub subintervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

/// Integrate `f` over `[a, b]`; `a > b` yields the negated integral.
pub fn integrate<F>(f: F, a: f64, b: f64, config: &QuadratureConfig) -> Result<Quadrature, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            subintervals: 0,
        });
    }
    if a > b {
        let q = integrate(f, b, a, config)?;
        return Ok(Quadrature {
            value: -q.value,
            ..q
        });
    }

    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite(x))
        }
    };

    let panels = config.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let nodes: Vec<f64> = (0..=2 * panels)
        .map(|i| {
            if i == 2 * panels {
                b
            } else {
                a + 0.5 * width * i as f64
            }
        })
        .collect();
    let values = nodes.iter().map(|&x| eval(x)).collect::<Result<Vec<_>, _>>()?;

    let mut coarse = Sum::default();
    let mut stack = Vec::with_capacity(64);
    for p in 0..panels {
        let (i, j, k) = (2 * p, 2 * p + 1, 2 * p + 2);
        let whole = simpson(nodes[i], nodes[k], values[i], values[j], values[k]);
        coarse.add(whole);
        stack.push(Panel {
            a: nodes[i],
            b: nodes[k],
            fa: values[i],
            fm: values[j],
            fb: values[k],
            whole,
            tol: 0.0,
        });
    }
    let tol = config.abs_tol.max(config.rel_tol * coarse.value().abs());
    for panel in &mut stack {
        panel.tol = tol * (panel.b - panel.a) / (b - a);
    }
    stack.reverse();

    let mut sum = Sum::default();
    let mut error = 0.0;
    let mut count = panels;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = eval(lm)?;
        let frm = eval(rm)?;
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;
        if delta.abs() <= 15.0 * p.tol || m <= p.a || m >= p.b {
            sum.add(left + right + delta / 15.0);
            error += delta.abs() / 15.0;
            continue;
        }
        count += 1;
        if count > config.max_subintervals {
            return Err(QuadratureError::SubintervalCap {
                cap: config.max_subintervals,
                a,
                b,
            });
        }
        let half = 0.5 * p.tol;
        stack.push(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol: half,
        });
        stack.push(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol: half,
        });
    }

    Ok(Quadrature {
        value: sum.value(),
        error_estimate: error,
        subintervals: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, &QuadratureConfig::default()).unwrap();
        assert!((q.value - 0.0).abs() < 1e-14);
        let q = integrate(|x| x * x, 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((q.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn steep_integrand() {
        // ∫ 2/|x|³ dx from -3 to -0.2 = 1/0.04 - 1/9
        let q = integrate(|x: f64| 2.0 / x.abs().powi(3), -3.0, -0.2, &QuadratureConfig::default())
            .unwrap();
        let exact = 25.0 - 1.0 / 9.0;
        assert!(((q.value - exact) / exact).abs() < 1e-10, "{}", q.value);
    }

    #[test]
    fn reversed_bounds_negate() {
        let cfg = QuadratureConfig::default();
        let f = |x: f64| x.exp();
        let fwd = integrate(f, 0.0, 1.0, &cfg).unwrap().value;
        let bwd = integrate(f, 1.0, 0.0, &cfg).unwrap().value;
        assert_eq!(fwd, -bwd);
        assert!((fwd - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-30,
            rel_tol: 0.0,
            max_subintervals: 100,
            initial_panels: 4,
        };
        let err = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, QuadratureError::SubintervalCap { cap: 100, .. }));
    }

    #[test]
    fn non_finite_reported() {
        let err = integrate(|x: f64| 1.0 / x, 0.0, 1.0, &QuadratureConfig::default()).unwrap_err();
        assert_eq!(err, QuadratureError::NonFinite(0.0));
    }
}

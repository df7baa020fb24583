//! Summation and log-space helpers shared by the quadrature code.

/// Neumaier-compensated accumulator. Summation order is the caller's order,
/// so results are reproducible bit for bit.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum in fixed iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Compensated sum after sorting by descending magnitude.
pub fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    compensated_sum(terms)
}

/// Exponents below this are flushed to zero.
pub const FLUSH_EXPONENT: f64 = -700.0;

/// `exp(log_w) * g` for `g >= 0`, evaluated as `exp(log_w + ln g)` with
/// flush-to-zero, so a vanishing weight never multiplies an overflowing factor.
#[inline]
pub fn exp_weighted(log_w: f64, g: f64) -> f64 {
    if g == 0.0 || log_w == f64::NEG_INFINITY {
        return 0.0;
    }
    let e = log_w + g.ln();
    if e < FLUSH_EXPONENT {
        0.0
    } else {
        e.exp()
    }
}

/// Observed convergence order between two successive refinement levels.
pub fn observed_order(err_coarse: f64, err_fine: f64, refinement: f64) -> f64 {
    (err_coarse / err_fine).ln() / refinement.ln()
}

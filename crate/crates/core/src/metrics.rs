//! Accuracy, confusion and contingency tables, and McNemar's test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Actual x predicted counts over {absence = 0, presence = 1}.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(predictions: &[usize], labels: &[usize]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::usage(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let mut m = ConfusionMatrix::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (y, p) {
                (0, 0) => m.tn += 1,
                (0, _) => m.fp += 1,
                (_, 0) => m.fn_ += 1,
                _ => m.tp += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn correct(&self) -> u64 {
        self.tn + self.tp
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.correct() as f64 / self.total() as f64
    }

    /// Rows are actual classes, columns predicted: `[[tn, fp], [fn, tp]]`.
    pub fn as_rows(&self) -> [[u64; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }
}

/// Cross-tabulated correctness of two classifiers on the same samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// Both correct.
    pub a: u64,
    /// A correct, B wrong.
    pub b: u64,
    /// A wrong, B correct.
    pub c: u64,
    /// Both wrong.
    pub d: u64,
}

impl ContingencyTable {
    pub fn from_predictions(
        preds_a: &[usize],
        preds_b: &[usize],
        labels: &[usize],
    ) -> Result<Self> {
        if preds_a.len() != labels.len() || preds_b.len() != labels.len() {
            return Err(Error::usage(format!(
                "prediction lengths {} and {} do not match {} labels",
                preds_a.len(),
                preds_b.len(),
                labels.len()
            )));
        }
        let mut t = ContingencyTable::default();
        for ((pa, pb), y) in preds_a.iter().zip(preds_b).zip(labels) {
            match (pa == y, pb == y) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        Ok(t)
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn swapped(&self) -> Self {
        ContingencyTable {
            b: self.c,
            c: self.b,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub chi_squared: f64,
    pub p_value: f64,
    /// No discordant pairs; the statistic is defined as 0 and p as 1.
    pub degenerate: bool,
}

impl McNemar {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Continuity-corrected McNemar statistic `(|b - c| - 1)^2 / (b + c)` with
/// its chi-square (1 dof) tail probability.
pub fn mcnemar(table: &ContingencyTable) -> McNemar {
    let n = table.b + table.c;
    if n == 0 {
        return McNemar {
            chi_squared: 0.0,
            p_value: 1.0,
            degenerate: true,
        };
    }
    let diff = (table.b as f64 - table.c as f64).abs();
    let chi_squared = (diff - 1.0).powi(2) / n as f64;
    McNemar {
        chi_squared,
        p_value: chi2_sf_1dof(chi_squared),
        degenerate: false,
    }
}

/// Survival function of the chi-square distribution with one degree of
/// freedom: `P(X > x) = erfc(sqrt(x / 2))`.
pub fn chi2_sf_1dof(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    erfc((x / 2.0).sqrt())
}

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Complementary error function. A positive-term power series below 3 and
/// a continued fraction above; absolute error well under 1e-10.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        // erf(x) = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1*3*...*(2n+1))
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > sum * 1e-17 {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
        }
        return 1.0 - 2.0 * FRAC_1_SQRT_PI * (-x2).exp() * sum;
    }
    // erfc(x) = e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    // evaluated with the modified Lentz method.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI * (-x * x).exp() / f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_accuracy_from_counts() {
        let m = ConfusionMatrix {
            tn: 54_658,
            fp: 11_961,
            fn_: 11_776,
            tp: 55_006,
        };
        assert_eq!(m.total(), 133_401);
        assert_eq!(m.correct(), 109_664);
        assert!((m.accuracy() - 109_664.0 / 133_401.0).abs() < 1e-15);
        assert!((m.accuracy() - 0.822_063).abs() < 1e-6);
    }

    #[test]
    fn confusion_orientation() {
        let m = ConfusionMatrix::from_predictions(&[1, 0, 1, 1], &[0, 0, 1, 0]).unwrap();
        assert_eq!(m.as_rows(), [[1, 2], [0, 1]]);
    }

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 1, 0, 1];
        let m = ConfusionMatrix::from_predictions(&labels, &labels).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!((m.fp, m.fn_), (0, 0));
    }

    #[test]
    fn constant_predictor_on_balanced_data() {
        let labels = [0, 1, 0, 1, 0, 1];
        let m = ConfusionMatrix::from_predictions(&[1; 6], &labels).unwrap();
        assert_eq!(m.accuracy(), 0.5);
    }

    #[test]
    fn contingency_all_agree() {
        let y = [1, 0, 1, 1, 0];
        let t = ContingencyTable::from_predictions(&y, &y, &y).unwrap();
        assert_eq!(
            t,
            ContingencyTable {
                a: 5,
                b: 0,
                c: 0,
                d: 0
            }
        );
    }

    #[test]
    fn contingency_swap_symmetry() {
        let y = [1, 0, 1, 1, 0, 0];
        let pa = [1, 1, 1, 0, 0, 1];
        let pb = [0, 0, 1, 1, 1, 1];
        let ab = ContingencyTable::from_predictions(&pa, &pb, &y).unwrap();
        let ba = ContingencyTable::from_predictions(&pb, &pa, &y).unwrap();
        assert_eq!(ab.swapped(), ba);
        assert_eq!(ab.total(), 6);
    }

    #[test]
    fn contingency_length_mismatch() {
        assert!(ContingencyTable::from_predictions(&[1], &[1, 0], &[1, 0]).is_err());
    }

    #[test]
    fn mcnemar_table_discordants() {
        let r = mcnemar(&ContingencyTable {
            a: 101_443,
            b: 8_016,
            c: 6_819,
            d: 17_123,
        });
        assert!((r.chi_squared - 1196.0 * 1196.0 / 14_835.0).abs() < 1e-9);
        assert!((r.chi_squared - 96.4217).abs() < 1e-4);
        assert!(r.p_value < 1e-20 && r.p_value > 0.0);
        assert!(r.significant(0.05));
    }

    #[test]
    fn mcnemar_small_balanced() {
        let r = mcnemar(&ContingencyTable {
            a: 0,
            b: 5,
            c: 5,
            d: 0,
        });
        assert!((r.chi_squared - 0.1).abs() < 1e-15);
        assert!((r.p_value - 0.7518).abs() < 1e-4);
        assert!(!r.significant(0.05));
    }

    #[test]
    fn mcnemar_degenerate() {
        let r = mcnemar(&ContingencyTable {
            a: 3,
            b: 0,
            c: 0,
            d: 2,
        });
        assert_eq!((r.chi_squared, r.p_value, r.degenerate), (0.0, 1.0, true));
    }

    #[test]
    fn erfc_reference_points() {
        // 40-digit reference values.
        for (x, want) in [
            (0.5, 0.479_500_122_186_953_5),
            (-0.875, 1.784_075_061_059_859_7),
            (1.6, 0.023_651_616_655_355_984),
            (2.9, 4.109_787_809_945_886e-5),
            (3.0, 2.209_049_699_858_544e-5),
        ] {
            assert!((erfc(x) - want).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn erfc_against_statrs() {
        for i in 0..=800 {
            let x = -4.0 + i as f64 * 0.0125;
            let ours = erfc(x);
            let reference = statrs::function::erf::erfc(x);
            assert!(
                (ours - reference).abs() < 1e-10,
                "x={x}: {ours} vs {reference}"
            );
        }
        for x in [6.0, 7.0, 8.5, 10.0] {
            let rel = (erfc(x) / statrs::function::erf::erfc(x) - 1.0).abs();
            assert!(rel < 1e-10, "x={x} rel={rel}");
        }
    }

    #[test]
    fn erfc_against_quadrature() {
        // erfc(x) = 2/sqrt(pi) * int_x^inf e^{-t^2} dt, Simpson on [x, x + 10].
        fn simpson(x: f64) -> f64 {
            let n = 20_000;
            let h = 10.0 / n as f64;
            let f = |t: f64| (-t * t).exp();
            let mut s = f(x) + f(x + 10.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(x + i as f64 * h);
            }
            2.0 * FRAC_1_SQRT_PI * s * h / 3.0
        }
        for x in [0.0, 0.2236, 1.0, 2.5, 3.0, 3.5, 5.0] {
            assert!((erfc(x) - simpson(x)).abs() < 1e-12, "x={x}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn p_value_decreases_with_imbalance(n in 2u64..400, k in 0u64..200) {
                let k = k % n;
                let t1 = ContingencyTable { a: 0, b: k, c: n - k, d: 0 };
                let t2 = ContingencyTable { a: 0, b: k.saturating_sub(1), c: n - k + 1, d: 0 };
                let (d1, d2) = ((2 * k).abs_diff(n), (2 * k.saturating_sub(1)).abs_diff(n));
                let (p1, p2) = (mcnemar(&t1).p_value, mcnemar(&t2).p_value);
                if k >= 1 && d2 > d1 {
                    prop_assert!(p2 <= p1);
                } else if k >= 1 && d2 < d1 {
                    prop_assert!(p2 >= p1);
                }
            }
        }
    }
}

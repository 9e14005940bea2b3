use super::Bar;

/// Intraday-shape features from consecutive OHLC bars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcFeatures {
    /// Log-return of the daily low.
    pub r_low: f64,
    /// Position of the close below the high, centred: in [−0.5, 0.5].
    pub ch: f64,
    /// Body of the bar relative to its range: in [−1, 1].
    pub cohl: f64,
}

impl OhlcFeatures {
    pub fn zero() -> Self {
        OhlcFeatures {
            r_low: 0.0,
            ch: 0.0,
            cohl: 0.0,
        }
    }
}

/// `r_low = log L_t − log L_{t−1}`, `CH = (H−C)/(H−L) − 0.5`,
/// `COHL = (C−O)/(H−L)`. A bar with `H = L` has `CH = COHL = 0`.
pub fn ohlc_features(bar: &Bar, prev: &Bar) -> OhlcFeatures {
    let r_low = bar.low.ln() - prev.low.ln();
    let range = bar.high - bar.low;
    if range <= 0.0 {
        return OhlcFeatures { r_low, ch: 0.0, cohl: 0.0 };
    }
    OhlcFeatures {
        r_low,
        ch: (bar.high - bar.close) / range - 0.5,
        cohl: (bar.close - bar.open) / range,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bar(o: f64, h: f64, l: f64, c: f64) -> Bar {
        Bar { open: o, high: h, low: l, close: c }
    }

    #[test]
    fn worked_bar() {
        let f = ohlc_features(&bar(10.0, 12.0, 9.0, 11.0), &bar(10.0, 11.0, 9.5, 10.0));
        assert!((f.ch + 1.0 / 6.0).abs() < 1e-15);
        assert!((f.cohl - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.r_low, 9f64.ln() - 9.5f64.ln());
    }

    #[test]
    fn close_at_high_and_flat_body() {
        let prev = bar(1.0, 1.0, 1.0, 1.0);
        assert_eq!(ohlc_features(&bar(10.0, 12.0, 9.0, 12.0), &prev).ch, -0.5);
        assert_eq!(ohlc_features(&bar(10.0, 12.0, 9.0, 10.0), &prev).cohl, 0.0);
    }

    #[test]
    fn degenerate_bar_is_zero() {
        let f = ohlc_features(&bar(5.0, 5.0, 5.0, 5.0), &bar(4.0, 4.0, 4.0, 4.0));
        assert_eq!((f.ch, f.cohl), (0.0, 0.0));
        assert_eq!(f.r_low, 5f64.ln() - 4f64.ln());
    }

    proptest! {
        #[test]
        fn ranges_hold(low in 1.0f64..100.0, span in 0.0f64..50.0, a in 0.0f64..1.0, b in 0.0f64..1.0, pl in 1.0f64..100.0) {
            let high = low + span;
            let o = low + a * span;
            let c = low + b * span;
            let f = ohlc_features(&bar(o, high, low, c), &bar(pl, pl, pl, pl));
            prop_assert!(f.ch >= -0.5 - 1e-12 && f.ch <= 0.5 + 1e-12);
            prop_assert!(f.cohl >= -1.0 - 1e-12 && f.cohl <= 1.0 + 1e-12);
            prop_assert_eq!(f.r_low, low.ln() - pl.ln());
        }
    }
}

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::numerics::{Scalar, Tensor};
use crate::phy::RxGrid;
use crate::{Error, Result};

/// Splits each antenna into a real and an imaginary plane, ordered
/// `Re(y_0), Im(y_0), Re(y_1), Im(y_1), ...`, giving `[2 N_rx, F, S]`.
pub fn preprocess<T: Scalar>(rx: &RxGrid) -> Tensor<T> {
    let plane = rx.num_symbols * rx.num_subcarriers;
    let mut data = Vec::with_capacity(2 * rx.num_rx * plane);
    for r in 0..rx.num_rx {
        let ant = rx.antenna(r);
        data.extend(ant.iter().map(|y| T::of(y.re)));
        data.extend(ant.iter().map(|y| T::of(y.im)));
    }
    Tensor::from_vec(&[2 * rx.num_rx, rx.num_symbols, rx.num_subcarriers], data).expect("sized above")
}

/// Inverse of [`preprocess`].
pub fn reassemble(t: &Tensor<f64>) -> Result<RxGrid> {
    let &[c, f, s] = t.shape() else {
        return Err(Error::Shape(format!("expected [2 N_rx, F, S], got {:?}", t.shape())));
    };
    if c % 2 != 0 {
        return Err(Error::Shape(format!("odd channel count {c}")));
    }
    let plane = f * s;
    let mut data = Vec::with_capacity(c / 2 * plane);
    for pair in t.data().chunks_exact(2 * plane) {
        let (re, im) = pair.split_at(plane);
        data.extend(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)));
    }
    Ok(RxGrid { num_rx: c / 2, num_symbols: f, num_subcarriers: s, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn channel_order_and_round_trip() {
        let mut rng = seeded(4, 0);
        let data: Vec<Complex64> =
            (0..2 * 14 * 8).map(|_| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
        let rx = RxGrid { num_rx: 2, num_symbols: 14, num_subcarriers: 8, data };
        let t = preprocess::<f64>(&rx);
        assert_eq!(t.shape(), [4, 14, 8]);
        assert_eq!(t.data()[0], rx.data[0].re);
        assert_eq!(t.data()[112], rx.data[0].im);
        assert_eq!(t.data()[224], rx.data[112].re);
        assert_eq!(t.data()[336 + 5], rx.data[112 + 5].im);
        assert_eq!(reassemble(&t).unwrap(), rx);
    }
}

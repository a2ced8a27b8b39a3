//! Multiply-add counts of the dense-matrix 2D DWT and IDWT on `C` channels
//! of `M x N` data:
//! `4C(M^2 N + M N^2 / 2 - 3MN/4)` and `4C(M N^2 + M^2 N / 2 - 3MN/4) + 3`.

use crate::error::{Error, Result};

fn terms(m: u64, n: u64, c: u64) -> Result<(u128, u128, u128)> {
    if m == 0 || n == 0 || c == 0 || m % 2 == 1 || n % 2 == 1 || !(3 * m * n).is_multiple_of(4) {
        return Err(Error::NonIntegralResult { m, n });
    }
    let (m, n, c) = (m as u128, n as u128, c as u128);
    // 4C * (a + b/2 - 3mn/4) = C * (4a + 2b - 3mn)
    Ok((c, m * m * n, m * n * n))
}

fn narrow(v: u128, m: u64, n: u64) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::NonIntegralResult { m, n })
}

pub fn madd_dwt2d(m: u64, n: u64, c: u64) -> Result<u64> {
    let (c_, m2n, mn2) = terms(m, n, c)?;
    let mn = m as u128 * n as u128;
    narrow(c_ * (4 * m2n + 2 * mn2 - 3 * mn), m, n)
}

pub fn madd_idwt2d(m: u64, n: u64, c: u64) -> Result<u64> {
    let (c_, m2n, mn2) = terms(m, n, c)?;
    let mn = m as u128 * n as u128;
    narrow(c_ * (4 * mn2 + 2 * m2n - 3 * mn) + 3, m, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(madd_dwt2d(4, 4, 1).unwrap(), 336);
        assert_eq!(madd_idwt2d(4, 4, 1).unwrap(), 339);
        assert_eq!(madd_dwt2d(224, 224, 3).unwrap(), 201_858_048);
    }

    #[test]
    fn linear_in_channels() {
        for (m, n) in [(4, 4), (8, 6), (32, 224)] {
            for c in 1..5 {
                assert_eq!(madd_dwt2d(m, n, 2 * c).unwrap(), 2 * madd_dwt2d(m, n, c).unwrap());
                assert_eq!(madd_idwt2d(m, n, 2 * c).unwrap() - 3, 2 * (madd_idwt2d(m, n, c).unwrap() - 3));
            }
        }
    }

    #[test]
    fn odd_extent_rejected() {
        assert!(matches!(madd_dwt2d(3, 4, 1), Err(Error::NonIntegralResult { .. })));
        assert!(madd_idwt2d(4, 0, 1).is_err());
    }
}

//! Scalar-generic discounting and root-finding kernel.
//!
//! The routines here are generic over [`num_traits::Float`] so the same code
//! drives `f32` and `f64`; the rest of the crate instantiates them at
//! [`crate::Rate`] (`f64`). Money never enters this module as cents — callers
//! convert to the float scalar first.

use num_traits::Float;

/// Present value of dated flows: `sum(amount_t / (1 + rate)^t)`.
///
/// The caller guarantees `rate > -1`.
pub fn present_value<F: Float>(rate: F, flows: impl IntoIterator<Item = (u32, F)>) -> F {
    let one = F::one();
    flows.into_iter().fold(F::zero(), |acc, (year, amount)| {
        acc + amount / (one + rate).powi(year as i32)
    })
}

/// An interval on which a function changes sign (or sits exactly at zero
/// when `lo == hi`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket<F> {
    pub lo: F,
    pub hi: F,
}

/// Walk `[lo, hi]` in fixed steps and collect every subinterval where `f`
/// changes sign. Grid points are computed as `lo + k*step` (no accumulation
/// drift) with the final point clamped to `hi`.
pub fn scan_brackets<F: Float>(f: impl Fn(F) -> F, lo: F, hi: F, step: F) -> Vec<Bracket<F>> {
    let mut brackets = Vec::new();
    let mut k = 0u32;
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    if f_prev == F::zero() {
        brackets.push(Bracket { lo, hi: lo });
    }
    loop {
        k += 1;
        let mut x = lo + step * F::from(k).expect("step count fits in the scalar");
        if x >= hi {
            x = hi;
        }
        let fx = f(x);
        if fx == F::zero() {
            brackets.push(Bracket { lo: x, hi: x });
        } else if f_prev != F::zero() && (f_prev < F::zero()) != (fx < F::zero()) {
            brackets.push(Bracket { lo: x_prev, hi: x });
        }
        if x == hi {
            break;
        }
        x_prev = x;
        f_prev = fx;
    }
    brackets
}

/// Bisect a bracketing interval until its width is at most `x_tol` *and*
/// the midpoint residual is at most `f_tol` (or the scalar runs out of
/// resolution, whichever comes first). Exact zeros short-circuit.
pub fn bisect<F: Float>(f: impl Fn(F) -> F, bracket: Bracket<F>, x_tol: F, f_tol: F) -> F {
    let Bracket { mut lo, mut hi } = bracket;
    if lo == hi {
        return lo;
    }
    let mut f_lo = f(lo);
    if f_lo == F::zero() {
        return lo;
    }
    let two = F::one() + F::one();
    // 64 halvings of a 0.01-wide bracket are already past f64 resolution.
    for _ in 0..256 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == F::zero() || (hi - lo <= x_tol && f_mid.abs() <= f_tol) {
            return mid;
        }
        if (f_lo < F::zero()) != (f_mid < F::zero()) {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    (lo + hi) / two
}

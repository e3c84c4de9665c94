//! Instrumented flop counting.
//!
//! Every matrix routine in [`crate::linalg`] reports its multiply-add cost
//! here. Counting is off by default and switched on per thread by
//! [`measure`], so concurrent Monte-Carlo runs never see each other's totals.

use std::cell::Cell;

thread_local! {
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
    static COUNT: Cell<f64> = const { Cell::new(0.0) };
}

pub(crate) fn add(flops: f64) {
    ACTIVE.with(|a| {
        if a.get() {
            COUNT.with(|c| c.set(c.get() + flops));
        }
    });
}

/// Whether a [`measure`] scope is currently open on this thread.
pub fn is_enabled() -> bool {
    ACTIVE.with(|a| a.get())
}

/// Flops accumulated so far inside the innermost open scope, or zero when
/// instrumentation is off.
pub fn current() -> f64 {
    if is_enabled() {
        COUNT.with(|c| c.get())
    } else {
        0.0
    }
}

/// Runs `f` with instrumentation on and returns its result together with
/// the flops it performed. Scopes nest: an enclosing scope also sees the
/// inner count.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let was_active = ACTIVE.with(|a| a.replace(true));
    let outer = COUNT.with(|c| c.replace(0.0));
    let out = f();
    let inner = COUNT.with(|c| c.get());
    ACTIVE.with(|a| a.set(was_active));
    COUNT.with(|c| c.set(outer + if was_active { inner } else { 0.0 }));
    (out, inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disabled_counter_reads_zero() {
        add(10.0);
        assert_eq!(current(), 0.0);
        assert!(!is_enabled());
    }

    #[test]
    fn nested_scopes_accumulate() {
        let (_, outer) = measure(|| {
            add(3.0);
            let (_, inner) = measure(|| add(4.0));
            assert_eq!(inner, 4.0);
        });
        assert_eq!(outer, 7.0);
        assert!(!is_enabled());
    }
}

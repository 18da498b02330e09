use num_traits::Float;

/// Maps a reward symbol in `0..m` onto the evenly spaced grid spanning
/// `[-100, +100]`, flipping the sign when `negate` is set.
///
/// `s -> 100 * (2s - (m - 1)) / (m - 1)`
pub fn normalize_reward<F: Float>(symbol: u8, num_symbols: u32, negate: bool) -> F {
    debug_assert!(num_symbols >= 2 && u32::from(symbol) < num_symbols);
    let hundred = F::from(100.0).unwrap();
    let top = F::from(num_symbols - 1).unwrap();
    let s = F::from(symbol).unwrap();
    let r = hundred * (s + s - top) / top;
    if negate {
        -r
    } else {
        r
    }
}

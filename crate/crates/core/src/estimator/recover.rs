use nalgebra::DMatrix;

use super::WeightMatrix;
use crate::bdris::C64;
use crate::channel::AutocorrelationMatrix;

/// Autocorrelation estimate from trained weights.
///
/// With `S = W W^T` split into `n x n` blocks,
/// `G = factor * ((S11 + S22) / 2 + j (S21 - S12) / 2)`. `S` only depends on
/// `W` through `W W^T`, so the estimate ignores any right rotation of `W`,
/// which is how the unknown common phase of the channel drops out.
///
/// The leading pattern entry is always `1`, so its imaginary input is always
/// zero and weight row `n` is never trained. Row and column 0 are therefore
/// read from the `S11` and `S12` blocks alone (`G_0j = S_0j - j S_0,n+j`),
/// which agrees with the averaged form whenever `W` has the structure of a
/// real cascaded channel.
pub fn recover_autocorrelation(w: &WeightMatrix, normalization_factor: f64) -> AutocorrelationMatrix {
    let n = w.n_rows() / 2;
    let rows = w.rows();
    let s = |i: usize, j: usize| rows[i][0] * rows[j][0] + rows[i][1] * rows[j][1];
    let half = 0.5 * normalization_factor;
    let f = normalization_factor;
    let g = DMatrix::from_fn(n, n, |i, j| match (i, j) {
        (0, 0) => C64::new(f * s(0, 0), 0.0),
        (0, j) => C64::new(f * s(0, j), -f * s(0, n + j)),
        (i, 0) => C64::new(f * s(i, 0), f * s(0, n + i)),
        (i, j) => C64::new(
            half * (s(i, j) + s(n + i, n + j)),
            half * (s(n + i, j) - s(i, n + j)),
        ),
    });
    AutocorrelationMatrix::from_matrix(g).expect("square by construction")
}

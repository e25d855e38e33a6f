//! Float abstraction so the engine runs in f32 for training/inference and in
//! f64 for gradient-check tests.

use num_traits::Float;

/// Element type of tensors and network parameters.
///
/// The matrix-product primitive is routed to `matrixmultiply`, which picks
/// SIMD kernels at runtime; everything else in the engine is written against
/// this trait.
pub trait Scalar:
    Float + std::ops::AddAssign + std::ops::MulAssign + std::fmt::Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// C := alpha * A * B + beta * C for row-major strided matrices.
    ///
    /// # Safety contract (checked with debug assertions)
    /// The stride/extent combinations must stay within the given slices.
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

fn max_flat_index(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    let r = (rows as isize - 1) * rs;
    let c = (cols as isize - 1) * cs;
    debug_assert!(r >= 0 && c >= 0, "negative strides are not used here");
    (r + c) as usize + 1
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            #[inline(always)]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline(always)]
            fn to_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                debug_assert!(a.len() >= max_flat_index(m, k, rsa, csa));
                debug_assert!(b.len() >= max_flat_index(k, n, rsb, csb));
                debug_assert!(c.len() >= max_flat_index(m, n, rsc, csc));
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// C[m x n] := A[m x k] * B[k x n], all contiguous row-major.
pub fn matmul<T: Scalar>(c: &mut [T], a: &[T], b: &[T], m: usize, k: usize, n: usize) {
    T::gemm(
        m,
        k,
        n,
        T::one(),
        a,
        k as isize,
        1,
        b,
        n as isize,
        1,
        T::zero(),
        c,
        n as isize,
        1,
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        matmul(&mut c, &a, &b, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn gemm_transposed_view_accumulates() {
        // grad_w-style call: C[2x2] += A^T[2x3view] * B[3x2]
        let a = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]; // stored 3x2, viewed 2x3
        let b = [1.0f32, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [1.0f32; 4];
        f32::gemm(2, 3, 2, 1.0, &a, 1, 2, &b, 2, 1, 1.0, &mut c, 2, 1);
        // A^T = [1 3 5; 2 4 6]; A^T*B = [6 8; 8 10]; plus ones.
        assert_eq!(c, [7.0, 9.0, 9.0, 11.0]);
    }
}

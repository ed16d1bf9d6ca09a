//! Quadrature for radial integrals `∫ ξ^{N-1} h(ξ) dξ` on a node grid.
//!
//! Each cell integrates the radial factor exactly against the linear
//! interpolant of h: constants and linear integrands come out exact in every
//! dimension, smooth integrands converge at second order, and at N = 1 the
//! rule is the classical trapezoid. Integrands may jump at interior nodes
//! (piecewise weights); callers pass one-sided samples and each cell uses
//! the limits from inside itself.

use crate::real::Real;

/// `∫_a^b ξ^{N-1} dξ`.
pub fn radial_moment<T: Real>(a: T, b: T, dimension: u32) -> T {
    let n = dimension as i32;
    (b.powi(n) - a.powi(n)) / T::of_usize(dimension as usize)
}

/// `∫_a^b ξ^N dξ`, the next moment up; used for piecewise-linear integrands.
pub fn radial_moment_next<T: Real>(a: T, b: T, dimension: u32) -> T {
    let n = dimension as i32;
    (b.powi(n + 1) - a.powi(n + 1)) / T::of_usize(dimension as usize + 1)
}

/// Running integrals `I_j = ∫_0^{r_j} ξ^{N-1} h(ξ) dξ` over an increasing
/// node list starting at 0. `h_above[j]`/`h_below[j]` are the limits of h at
/// node j from the right/left; they differ only at jump nodes. Cell
/// `[r_j, r_{j+1}]` uses `h_above[j]` and `h_below[j+1]`.
///
/// Per cell `[a, b]` with h linear from `ha` to `hb`:
/// `∫_a^b ξ^{N-1} h dξ = ha M_N + (hb - ha) (M_{N+1} - a M_N) / (b - a)`,
/// `M_N`, `M_{N+1}` the exact moments from [`radial_moment`] and
/// [`radial_moment_next`]. The first cell starts at ξ = 0, where downstream
/// code divides the running integral by ξ^{N-1}; the moment rule keeps that
/// quotient finite and first-order accurate there.
pub fn cumulative_radial<T: Real>(
    nodes: &[T],
    h_above: &[T],
    h_below: &[T],
    dimension: u32,
) -> Vec<T> {
    let m = nodes.len();
    assert_eq!(h_above.len(), m);
    assert_eq!(h_below.len(), m);
    let mut out = vec![T::zero(); m];
    if m < 2 {
        return out;
    }
    for j in 0..m - 1 {
        let (a, b) = (nodes[j], nodes[j + 1]);
        let (ha, hb) = (h_above[j], h_below[j + 1]);
        let m_n = radial_moment(a, b, dimension);
        let m_next = radial_moment_next(a, b, dimension);
        let cell = ha * m_n + (hb - ha) * (m_next - a * m_n) / (b - a);
        out[j + 1] = out[j] + cell;
    }
    out
}

/// Running plain trapezoid `∫_{r_0}^{r_j} h` for continuous samples.
pub fn cumulative_trapezoid<T: Real>(nodes: &[T], h: &[T]) -> Vec<T> {
    let m = nodes.len();
    assert_eq!(h.len(), m);
    let mut out = vec![T::zero(); m];
    let two = T::of(2.0);
    for j in 0..m.saturating_sub(1) {
        out[j + 1] = out[j] + (nodes[j + 1] - nodes[j]) * (h[j] + h[j + 1]) / two;
    }
    out
}

/// Fixed-count composite trapezoid of a closure on `[a, b]`.
pub fn trapezoid_fn<T: Real>(f: impl Fn(T) -> T, a: T, b: T, cells: usize) -> T {
    if b <= a || cells == 0 {
        return T::zero();
    }
    let n = T::of_usize(cells);
    let h = (b - a) / n;
    let mut sum = (f(a) + f(b)) / T::of(2.0);
    for i in 1..cells {
        sum += f(a + h * T::of_usize(i));
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform(r: f64, m: usize) -> Vec<f64> {
        (0..=m).map(|i| r * i as f64 / m as f64).collect()
    }

    #[test]
    fn moments_match_closed_forms() {
        assert_relative_eq!(radial_moment(0.0, 2.0, 1), 2.0);
        assert_relative_eq!(radial_moment(1.0, 2.0, 2), 1.5);
        assert_relative_eq!(radial_moment(0.0, 2.0, 3), 8.0 / 3.0);
        assert_relative_eq!(radial_moment_next(0.0, 2.0, 1), 2.0);
        assert_relative_eq!(radial_moment_next(1.0, 2.0, 2), 7.0 / 3.0);
    }

    #[test]
    fn constant_integrand_is_exact_for_every_dimension() {
        for dim in 1..=4u32 {
            let nodes = uniform(2.0, 64);
            let h = vec![3.0; nodes.len()];
            let cum = cumulative_radial(&nodes, &h, &h, dim);
            for (j, &r) in nodes.iter().enumerate() {
                assert_relative_eq!(
                    cum[j],
                    3.0 * radial_moment(0.0, r, dim),
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn linear_integrand_is_exact() {
        // h(x) = 5x, N = 2: ∫_0^r x * 5x dx = 5 r^3 / 3, exact in every cell
        let nodes = vec![0.0, 0.25, 0.7, 1.3];
        let h: Vec<f64> = nodes.iter().map(|&x| 5.0 * x).collect();
        let cum = cumulative_radial(&nodes, &h, &h, 2);
        for (j, &r) in nodes.iter().enumerate() {
            assert_relative_eq!(cum[j], 5.0 * r.powi(3) / 3.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn smooth_integrand_converges_at_second_order() {
        let f = |x: f64| (1.5 * x).sin() + 2.0;
        let exact = {
            // ∫_0^2 x (sin(1.5x) + 2) dx, N = 2, by parts:
            let (a, b) = (0.0f64, 2.0f64);
            let anti = |x: f64| {
                (1.5 * x).sin() / (1.5 * 1.5) - x * (1.5 * x).cos() / 1.5 + x * x
            };
            anti(b) - anti(a)
        };
        let run = |m: usize| {
            let nodes = uniform(2.0, m);
            let h: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
            *cumulative_radial(&nodes, &h, &h, 2).last().unwrap()
        };
        let e1 = (run(100) - exact).abs();
        let e2 = (run(200) - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order > 1.8 && order < 2.2, "observed order {order}");
    }

    #[test]
    fn sided_samples_integrate_a_jump_exactly() {
        // h = 1 on [0,1), 3 on [1,2]; N = 1, node at the jump
        let nodes = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        let above: Vec<f64> = nodes.iter().map(|&x| if x < 1.0 { 1.0 } else { 3.0 }).collect();
        let below: Vec<f64> = nodes
            .iter()
            .map(|&x| if x <= 1.0 { 1.0 } else { 3.0 })
            .collect();
        let cum = cumulative_radial(&nodes, &above, &below, 1);
        assert_relative_eq!(*cum.last().unwrap(), 1.0 + 3.0, epsilon = 1e-14);
    }

    #[test]
    fn cumulative_trapezoid_matches_primitive() {
        let nodes = uniform(1.0, 128);
        let h: Vec<f64> = nodes.iter().map(|&x| x * x).collect();
        let cum = cumulative_trapezoid(&nodes, &h);
        assert_relative_eq!(*cum.last().unwrap(), 1.0 / 3.0, epsilon = 1e-4);
    }

    #[test]
    fn trapezoid_fn_on_cosine() {
        let v = trapezoid_fn(|x: f64| x.cos(), 0.0, 1.0, 4096);
        assert_relative_eq!(v, 1.0f64.sin(), epsilon = 1e-7);
    }
}

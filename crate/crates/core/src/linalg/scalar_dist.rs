use super::{op_norm, CMatrix, CScalar};

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const SEARCH_DIRECTIONS: usize = 8;
const COMPASS_DIRECTIONS: usize = 16;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
const MAX_CYCLES: usize = 200;

/// Minimizes a unimodal `f` on `[lo, hi]`; returns the abscissa and value.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `min_lambda ||c - lambda I||` and the minimizing scalar.
#[derive(Debug, Clone, Copy)]
pub struct ScalarDistance {
    pub lambda: CScalar,
    pub distance: f64,
}

/// Distance from `c` to the scalar multiples of the identity.
///
/// `lambda -> ||c - lambda I||` is convex on the complex plane. A compass
/// search from `trace(c)/n` (a fan of directions, rotated each time the step
/// is halved) does most of the work; it can stall on a ridge where several
/// singular values tie, so it is followed by golden-section line searches
/// cycled over a fixed fan in a small neighbourhood. The returned distance is
/// attained at the returned `lambda`, so it is never below the true minimum.
pub fn distance_to_scalars(c: &CMatrix, xtol: f64) -> ScalarDistance {
    let n = c.rows();
    let eval = |lambda: CScalar| op_norm(&(c - &CMatrix::scalar(n, lambda)), 1e-14);
    let mut lambda = if n == 0 {
        CScalar::new(0.0, 0.0)
    } else {
        c.trace() / n as f64
    };
    let mut best = eval(lambda);
    if best == 0.0 {
        return ScalarDistance {
            lambda,
            distance: 0.0,
        };
    }

    let mut step = best;
    let mut rotation = 0.0;
    while step > xtol * best.max(1.0) {
        let improved = (0..COMPASS_DIRECTIONS).find_map(|k| {
            let angle = rotation + std::f64::consts::TAU * k as f64 / COMPASS_DIRECTIONS as f64;
            let candidate = lambda + CScalar::from_polar(step, angle);
            let value = eval(candidate);
            (value < best).then_some((candidate, value))
        });
        match improved {
            Some((candidate, value)) => {
                lambda = candidate;
                best = value;
            }
            None => {
                step *= 0.5;
                rotation += GOLDEN_ANGLE;
            }
        }
    }

    let directions: Vec<CScalar> = (0..SEARCH_DIRECTIONS)
        .map(|k| CScalar::from_polar(1.0, std::f64::consts::PI * k as f64 / SEARCH_DIRECTIONS as f64))
        .collect();
    let mut radius = 1e-4 * best;
    for _ in 0..MAX_CYCLES {
        let before = best;
        let mut moved = 0.0_f64;
        for dir in &directions {
            let origin = lambda;
            let (t, value) = golden_section(|t| eval(origin + dir * t), -radius, radius, xtol);
            if value < best {
                best = value;
                lambda = origin + dir * t;
                moved = moved.max(t.abs());
            }
        }
        if before - best <= 1e-15 * before {
            break;
        }
        radius = radius.min((4.0 * moved).max(10.0 * xtol));
    }
    ScalarDistance {
        lambda,
        distance: best,
    }
}

/// Ceiling of a sizing quantity such as `ε^{-2}`.
///
/// Decimal inputs like `ε = 0.1` are not representable, so `0.1^{-2}` may land
/// a few ulps above the integer it stands for. Values within a relative
/// `1e-9` of an integer snap to that integer before the ceiling is taken.
pub(crate) fn ceil_count(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    }
}

pub(crate) fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Welford accumulator for mean and unbiased variance.
///
/// Constant input yields a mean equal to that constant and a variance of
/// exactly zero, which the degenerate-problem checks rely on.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Running {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Running {
    pub fn push(&mut self, y: f64) {
        self.count += 1;
        let delta = y - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (y - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }
}

/// Two-sided 99% standard normal quantile.
pub(crate) const Z_99: f64 = 2.575_829_303_548_900_4;

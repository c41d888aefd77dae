use super::{Matrix, Vector};

/// Exact accumulator for a sum of `f64` values.
///
/// Every finite double is an integer multiple of `2⁻¹⁰⁷⁴`, so the running
/// total is kept as a fixed-point integer in that unit, split into 32-bit
/// digits held in 64-bit slots (carries are resolved lazily). Adding is a
/// handful of integer operations and is exact; [`ExactSum::value`] rounds
/// the real total once, to nearest-even. The result therefore depends only
/// on the multiset of addends: any insertion order, any grouping into
/// partial accumulators merged later, gives the same bits.
#[derive(Debug, Clone)]
pub struct ExactSum {
    digits: [i64; DIGITS],
    // additions since the digits were last normalized
    pending: u32,
    // sum of non-finite addends, which fall outside exact arithmetic
    special: Option<f64>,
}

// Bit positions reach 2045 + 84; the extra slots absorb carries.
const DIGITS: usize = 68;
const DIGIT_BITS: u32 = 32;
const DIGIT_MASK: i64 = (1 << DIGIT_BITS) - 1;
// Each addition moves a slot by less than 2³²; normalize well before i64 overflow.
const MAX_PENDING: u32 = 1 << 29;

impl Default for ExactSum {
    fn default() -> Self {
        Self {
            digits: [0; DIGITS],
            pending: 0,
            special: None,
        }
    }
}

impl PartialEq for ExactSum {
    /// Equality of the represented real numbers.
    fn eq(&self, other: &Self) -> bool {
        let (mut a, mut b) = (self.clone(), other.clone());
        a.normalize();
        b.normalize();
        a.digits == b.digits && a.special.map(f64::to_bits) == b.special.map(f64::to_bits)
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        if !value.is_finite() {
            self.special = Some(self.special.map_or(value, |s| s + value));
            return;
        }
        let bits = value.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as u32;
        let fraction = bits & ((1 << 52) - 1);
        let (significand, shift) = if biased == 0 {
            (fraction, 0)
        } else {
            (fraction | (1 << 52), biased - 1)
        };
        if significand == 0 {
            return;
        }
        let idx = (shift / DIGIT_BITS) as usize;
        let wide = (significand as u128) << (shift % DIGIT_BITS);
        let parts = [
            (wide as i64) & DIGIT_MASK,
            ((wide >> 32) as i64) & DIGIT_MASK,
            (wide >> 64) as i64,
        ];
        if value < 0.0 {
            for (d, p) in self.digits[idx..idx + 3].iter_mut().zip(parts) {
                *d -= p;
            }
        } else {
            for (d, p) in self.digits[idx..idx + 3].iter_mut().zip(parts) {
                *d += p;
            }
        }
        self.pending += 1;
        if self.pending >= MAX_PENDING {
            self.normalize();
        }
    }

    /// Adds the exact value held by `other`.
    pub fn merge(&mut self, other: &ExactSum) {
        let mut other = other.clone();
        other.normalize();
        self.normalize();
        for (d, o) in self.digits.iter_mut().zip(other.digits) {
            *d += o;
        }
        self.pending = 2;
        if let Some(s) = other.special {
            self.add(s);
        }
    }

    // Moves carries up so every slot but the last lies in [0, 2³²).
    fn normalize(&mut self) {
        for i in 0..DIGITS - 1 {
            let carry = self.digits[i] >> DIGIT_BITS;
            self.digits[i] -= carry << DIGIT_BITS;
            self.digits[i + 1] += carry;
        }
        self.pending = 0;
    }

    /// The exact sum rounded to the nearest double (ties to even). A zero
    /// total is reported as `+0.0`.
    pub fn value(&self) -> f64 {
        if let Some(s) = self.special {
            return s;
        }
        let mut mag = self.digits;
        let mut normalized = ExactSum {
            digits: mag,
            pending: 0,
            special: None,
        };
        normalized.normalize();
        mag = normalized.digits;
        let negative = mag[DIGITS - 1] < 0;
        if negative {
            for d in mag.iter_mut() {
                *d = -*d;
            }
            let mut tmp = ExactSum {
                digits: mag,
                pending: 0,
                special: None,
            };
            tmp.normalize();
            mag = tmp.digits;
        }
        let Some(top) = mag.iter().rposition(|&d| d != 0) else {
            return 0.0;
        };
        let length = DIGIT_BITS as usize * top + (64 - (mag[top] as u64).leading_zeros()) as usize;
        let magnitude = if length <= 53 {
            // Below 2⁵³ units the total is exactly representable.
            let units = (mag[0] as u64) | ((mag[1] as u64) << 32);
            units as f64 * f64::from_bits(1)
        } else {
            // Top 64 bits of the total, plus whether anything below them is set.
            let (head, sticky) = if length < 64 {
                let units = (mag[0] as u64) | ((mag[1] as u64) << 32);
                (units << (64 - length), false)
            } else {
                let lo = length - 64;
                let idx = lo / DIGIT_BITS as usize;
                let off = lo % DIGIT_BITS as usize;
                let window = (0..3).fold(0u128, |acc, j| {
                    let d = mag.get(idx + j).copied().unwrap_or(0) as u128;
                    acc | (d << (32 * j))
                });
                let below = mag[..idx].iter().any(|&d| d != 0) || (mag[idx] & ((1i64 << off) - 1)) != 0;
                ((window >> off) as u64, below)
            };
            let mut mantissa = head >> 11;
            let rest = head & 0x7ff;
            let mut biased = length as u64 - 52;
            if rest > 0x400 || (rest == 0x400 && (sticky || mantissa & 1 == 1)) {
                mantissa += 1;
                if mantissa == 1 << 53 {
                    mantissa >>= 1;
                    biased += 1;
                }
            }
            if biased >= 0x7ff {
                f64::INFINITY
            } else {
                f64::from_bits((biased << 52) | (mantissa & ((1 << 52) - 1)))
            }
        };
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Entry-wise [`ExactSum`] over matrices of a fixed shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMatrixSum {
    rows: usize,
    cols: usize,
    // column-major, like `Matrix`
    entries: Vec<ExactSum>,
}

impl ExactMatrixSum {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![ExactSum::new(); rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn add_matrix(&mut self, m: &Matrix) {
        assert_eq!(m.shape(), (self.rows, self.cols), "shape mismatch in exact accumulation");
        for (acc, &v) in self.entries.iter_mut().zip(m.iter()) {
            acc.add(v);
        }
    }

    /// Adds the rank-one term `left · rightᵀ`, each entry rounded as the
    /// product `left[i] * right[j]`.
    pub fn add_outer(&mut self, left: &Vector, right: &[f64]) {
        assert_eq!(left.len(), self.rows, "outer product row mismatch");
        assert_eq!(right.len(), self.cols, "outer product column mismatch");
        for (j, &rj) in right.iter().enumerate() {
            let column = &mut self.entries[j * self.rows..(j + 1) * self.rows];
            for (acc, &li) in column.iter_mut().zip(left.iter()) {
                acc.add(li * rj);
            }
        }
    }

    pub fn merge(&mut self, other: &ExactMatrixSum) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in exact merge");
        for (acc, o) in self.entries.iter_mut().zip(&other.entries) {
            acc.merge(o);
        }
    }

    pub fn value(&self) -> Matrix {
        Matrix::from_iterator(self.rows, self.cols, self.entries.iter().map(ExactSum::value))
    }
}

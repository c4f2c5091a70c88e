//! Dense 4x4 solve with partial pivoting and a 1-norm condition estimate.

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Solution {
    pub x: [f64; 4],
    /// `||A||_1 ||A^-1||_1`, infinite for an exactly singular matrix.
    pub condition: f64,
}

struct Lu {
    a: [[f64; 4]; 4],
    perm: [usize; 4],
}

impl Lu {
    fn factor(mut a: [[f64; 4]; 4]) -> Option<Self> {
        let mut perm = [0, 1, 2, 3];
        for k in 0..4 {
            let pivot = (k..4)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .unwrap_or(k);
            if a[pivot][k] == 0.0 || !a[pivot][k].is_finite() {
                return None;
            }
            a.swap(k, pivot);
            perm.swap(k, pivot);
            for i in (k + 1)..4 {
                let m = a[i][k] / a[k][k];
                a[i][k] = m;
                for j in (k + 1)..4 {
                    a[i][j] -= m * a[k][j];
                }
            }
        }
        Some(Self { a, perm })
    }

    fn solve(&self, b: &[f64; 4]) -> [f64; 4] {
        let mut y = [0.0; 4];
        for i in 0..4 {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s -= self.a[i][j] * y[j];
            }
            y[i] = s;
        }
        let mut x = [0.0; 4];
        for i in (0..4).rev() {
            let mut s = y[i];
            for j in (i + 1)..4 {
                s -= self.a[i][j] * x[j];
            }
            x[i] = s / self.a[i][i];
        }
        x
    }
}

fn norm1(a: &[[f64; 4]; 4]) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn solve4(a: [[f64; 4]; 4], b: [f64; 4]) -> Solution {
    let Some(lu) = Lu::factor(a) else {
        return Solution {
            x: [f64::NAN; 4],
            condition: f64::INFINITY,
        };
    };
    let mut inv = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let col = lu.solve(&e);
        for i in 0..4 {
            inv[i][j] = col[i];
        }
    }
    let condition = norm1(&a) * norm1(&inv);
    Solution {
        x: lu.solve(&b),
        condition: if condition.is_finite() {
            condition
        } else {
            f64::INFINITY
        },
    }
}

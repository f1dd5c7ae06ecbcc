//! Nelder-Mead simplex moves, usable one step at a time.

/// Simplex of `d + 1` vertices kept sorted by objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Reflect,
    Expand,
    ContractOutside,
    ContractInside,
    Shrink,
}

impl Simplex {
    /// Evaluates every vertex.
    pub fn new(points: Vec<Vec<f64>>, f: &mut impl FnMut(&[f64]) -> f64) -> Self {
        let values = points.iter().map(|p| f(p)).collect();
        let mut s = Self { points, values };
        s.sort();
        s
    }

    /// Vertices with known values.
    pub fn from_parts(points: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let mut s = Self { points, values };
        s.sort();
        s
    }

    /// `x0` plus one vertex per axis offset by `step[i]`.
    pub fn around(x0: &[f64], step: &[f64], f: &mut impl FnMut(&[f64]) -> f64) -> Self {
        let mut points = vec![x0.to_vec()];
        for i in 0..x0.len() {
            let mut p = x0.to_vec();
            p[i] += step[i];
            points.push(p);
        }
        Self::new(points, f)
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.points = idx.iter().map(|&i| self.points[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    pub fn best(&self) -> (&[f64], f64) {
        (&self.points[0], self.values[0])
    }

    pub fn worst_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Replaces vertex `i` and restores the ordering.
    pub fn replace(&mut self, i: usize, point: Vec<f64>, value: f64) {
        self.points[i] = point;
        self.values[i] = value;
        self.sort();
    }

    /// Largest objective gap across vertices.
    pub fn spread(&self) -> f64 {
        self.worst_value() - self.values[0]
    }

    /// One Nelder-Mead iteration with standard coefficients. Every candidate
    /// goes through `project` before evaluation.
    pub fn step(&mut self, f: &mut impl FnMut(&[f64]) -> f64, project: &impl Fn(&mut [f64])) -> Move {
        let n = self.points.len() - 1;
        let d = self.points[0].len();
        let mut centroid = vec![0.0; d];
        for p in &self.points[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let worst = self.points[n].clone();
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect();
            project(&mut p);
            p
        };

        let xr = along(1.0);
        let fr = f(&xr);
        if fr < self.values[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            if fe < fr {
                self.replace(n, xe, fe);
                return Move::Expand;
            }
            self.replace(n, xr, fr);
            return Move::Reflect;
        }
        if fr < self.values[n - 1] {
            self.replace(n, xr, fr);
            return Move::Reflect;
        }
        if fr < self.values[n] {
            let xc = along(0.5);
            let fc = f(&xc);
            if fc <= fr {
                self.replace(n, xc, fc);
                return Move::ContractOutside;
            }
        } else {
            let xc = along(-0.5);
            let fc = f(&xc);
            if fc < self.values[n] {
                self.replace(n, xc, fc);
                return Move::ContractInside;
            }
        }
        let best = self.points[0].clone();
        for i in 1..=n {
            let mut p: Vec<f64> = best.iter().zip(&self.points[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            project(&mut p);
            self.values[i] = f(&p);
            self.points[i] = p;
        }
        self.sort();
        Move::Shrink
    }
}

/// Plain Nelder-Mead until the value spread drops below `tol` or `max_iter`
/// steps have been taken.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let mut s = Simplex::around(x0, step, &mut f);
    for _ in 0..max_iter {
        if s.spread() <= tol {
            break;
        }
        s.step(&mut f, &|_| {});
    }
    let (x, v) = s.best();
    (x.to_vec(), v)
}

use super::Var;

/// Affine expression `constant + Σ coef·x` over program variables.
///
/// Terms are kept sorted by variable and merged, with exact zeros dropped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    constant: f64,
    terms: Vec<(Var, f64)>,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant_expr(c: f64) -> Self {
        LinExpr {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(v: Var) -> Self {
        LinExpr {
            constant: 0.0,
            terms: vec![(v, 1.0)],
        }
    }

    pub fn term(v: Var, c: f64) -> Self {
        let mut e = Self::zero();
        e.add_term(v, c);
        e
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[(Var, f64)] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_term(&mut self, v: Var, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.binary_search_by_key(&v, |t| t.0) {
            Ok(i) => {
                self.terms[i].1 += c;
                if self.terms[i].1 == 0.0 {
                    self.terms.remove(i);
                }
            }
            Err(i) => self.terms.insert(i, (v, c)),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        if self.terms.is_empty() {
            self.terms = other
                .terms
                .iter()
                .map(|&(v, c)| (v, c * s))
                .filter(|t| t.1 != 0.0)
                .collect();
            return;
        }
        // merge two sorted lists
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let take_left = j >= other.terms.len()
                || (i < self.terms.len() && self.terms[i].0 < other.terms[j].0);
            let take_right = i >= self.terms.len()
                || (j < other.terms.len() && other.terms[j].0 < self.terms[i].0);
            if take_left {
                out.push(self.terms[i]);
                i += 1;
            } else if take_right {
                let c = other.terms[j].1 * s;
                if c != 0.0 {
                    out.push((other.terms[j].0, c));
                }
                j += 1;
            } else {
                let c = self.terms[i].1 + other.terms[j].1 * s;
                if c != 0.0 {
                    out.push((self.terms[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        self.terms = out;
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        let mut e = LinExpr::zero();
        e.add_scaled(self, s);
        e
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_keeps_sorted_and_cancels() {
        let mut a = LinExpr::term(Var(3), 1.0);
        a.add_term(Var(1), 2.0);
        let mut b = LinExpr::term(Var(1), 1.0);
        b.add_term(Var(5), 4.0);
        b.add_constant(1.5);
        a.add_scaled(&b, -2.0);
        assert_eq!(a.terms(), &[(Var(3), 1.0), (Var(5), -8.0)]);
        assert_eq!(a.constant(), -3.0);
        assert_eq!(a.eval(&[0.0, 9.0, 0.0, 2.0, 0.0, 1.0]), 2.0 - 8.0 - 3.0);
    }
}

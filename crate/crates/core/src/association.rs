//! Probabilistic data association between legacy potential scatterers (PSs)
//! and measurements by loopy belief propagation on the bipartite graph of
//! pairwise `psi(a_k, b_m)` factors.
//!
//! Every message `nu_{m->k}(a_k)` only distinguishes `a_k = m` from
//! `a_k != m`, and every `zeta_{k->m}(b_m)` only distinguishes `b_m = k` from
//! `b_m != k`, so each is stored as a pair `(at, other)`. Leave-one-out
//! products are formed with prefix/suffix sweeps, which costs `O(K M)` per
//! iteration and tolerates exact zeros.

use crate::error::{Error, Result};

/// Default convergence tolerance on normalized `nu` messages.
pub const DEFAULT_TOL: f64 = 1e-5;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Messages entering the association loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocInput {
    /// `K` rows of `beta(a_k)` for `a_k` in `0..=M`.
    pub beta: Vec<Vec<f64>>,
    /// `xi(b_m = 0)` per measurement; `xi(b_m >= 1)` is 1.
    pub xi0: Vec<f64>,
}

impl AssocInput {
    pub fn num_legacy(&self) -> usize {
        self.beta.len()
    }

    pub fn num_measurements(&self) -> usize {
        self.xi0.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.num_measurements();
        for (k, row) in self.beta.iter().enumerate() {
            if row.len() != m + 1 {
                return Err(Error::InvalidInput(format!("beta row {k} has {} entries, expected {}", row.len(), m + 1)));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput(format!("beta row {k} has a negative or non-finite entry")));
            }
            if !row.iter().any(|v| *v > 0.0) {
                return Err(Error::InvalidInput(format!("beta row {k} is identically zero")));
            }
        }
        if self.xi0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("xi0 has a negative or non-finite entry".into()));
        }
        Ok(())
    }
}

/// Messages leaving the association loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocOutput {
    /// `K` rows of `eta(a_k)`, each normalized to sum to one.
    pub eta: Vec<Vec<f64>>,
    /// `M` rows of `varsigma(b_m)` for `b_m` in `0..=K`, each normalized to
    /// sum to one.
    pub varsigma: Vec<Vec<f64>>,
    pub iterations_used: usize,
}

/// Two-valued message: value at the distinguished index and everywhere else.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pair {
    at: f64,
    other: f64,
}

/// Running product of `(other + t * at)` truncated to degree one in `t`.
#[derive(Debug, Clone, Copy)]
struct Poly {
    c0: f64,
    c1: f64,
}

impl Poly {
    const ONE: Poly = Poly { c0: 1.0, c1: 0.0 };

    fn times(self, other: f64, at: f64) -> Poly {
        Poly { c0: self.c0 * other, c1: self.c1 * other + self.c0 * at }
    }

    fn combine(self, rhs: Poly) -> Poly {
        Poly { c0: self.c0 * rhs.c0, c1: self.c1 * rhs.c0 + self.c0 * rhs.c1 }
    }
}

/// For each `i`, the product over `j != i` of `(other_j + t * at_j)`.
fn leave_one_out(items: &[(f64, f64)]) -> Vec<Poly> {
    let n = items.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Poly::ONE);
    for &(other, at) in items {
        let last = *prefix.last().expect("seeded");
        prefix.push(last.times(other, at));
    }
    let mut out = vec![Poly::ONE; n];
    let mut suffix = Poly::ONE;
    for i in (0..n).rev() {
        out[i] = prefix[i].combine(suffix);
        suffix = suffix.times(items[i].0, items[i].1);
    }
    out
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Runs iterative message passing until the largest change of any normalized
/// `nu` message drops below `tol`, or `max_iter` iterations have run.
pub fn run_association(input: &AssocInput, max_iter: usize, tol: f64) -> Result<AssocOutput> {
    input.validate()?;
    let k_len = input.num_legacy();
    let m_len = input.num_measurements();
    if k_len == 0 || m_len == 0 {
        return Ok(AssocOutput {
            eta: vec![vec![1.0; m_len + 1]; k_len],
            varsigma: vec![vec![1.0; k_len + 1]; m_len],
            iterations_used: 0,
        });
    }

    // nu[m][k]: measurement m to PS k; zeta[k][m]: PS k to measurement m.
    let mut nu = vec![vec![Pair { at: 1.0, other: 1.0 }; k_len]; m_len];
    let mut zeta = vec![vec![Pair { at: 1.0, other: 1.0 }; m_len]; k_len];
    let mut iterations = 0;
    let mut buf = Vec::with_capacity(k_len.max(m_len));

    while iterations < max_iter.max(1) {
        iterations += 1;
        let mut delta: f64 = 0.0;

        for m in 0..m_len {
            buf.clear();
            buf.extend((0..k_len).map(|k| (zeta[k][m].other, zeta[k][m].at)));
            for (k, poly) in leave_one_out(&buf).into_iter().enumerate() {
                // b_m = k forces a_k = m; any other b_m forbids it.
                let at = poly.c0;
                let other = input.xi0[m] * poly.c0 + poly.c1;
                let sum = at + m_len as f64 * other;
                let new =
                    if sum > 0.0 { Pair { at: at / sum, other: other / sum } } else { Pair { at: 0.0, other: 0.0 } };
                let old = nu[m][k];
                delta = delta.max((new.at - old.at).abs()).max((new.other - old.other).abs());
                nu[m][k] = new;
            }
        }

        for k in 0..k_len {
            let beta = &input.beta[k];
            buf.clear();
            buf.extend((0..m_len).map(|m| (nu[m][k].other, beta[m + 1] * nu[m][k].at)));
            for (m, poly) in leave_one_out(&buf).into_iter().enumerate() {
                let at = beta[m + 1] * poly.c0;
                let other = beta[0] * poly.c0 + poly.c1;
                let scale = at.max(other);
                zeta[k][m] = if scale > 0.0 {
                    Pair { at: at / scale, other: other / scale }
                } else {
                    Pair { at: 0.0, other: 0.0 }
                };
            }
        }

        if iterations > 1 && delta < tol {
            break;
        }
    }

    let eta = (0..k_len)
        .map(|k| {
            let items: Vec<(f64, f64)> = (0..m_len).map(|m| (nu[m][k].other, nu[m][k].at)).collect();
            let loo = leave_one_out(&items);
            let mut row = Vec::with_capacity(m_len + 1);
            row.push(items.iter().map(|(o, _)| o).product());
            row.extend((0..m_len).map(|m| items[m].1 * loo[m].c0));
            normalize(&mut row);
            row
        })
        .collect();
    let varsigma = (0..m_len)
        .map(|m| {
            let items: Vec<(f64, f64)> = (0..k_len).map(|k| (zeta[k][m].other, zeta[k][m].at)).collect();
            let loo = leave_one_out(&items);
            let mut row = Vec::with_capacity(k_len + 1);
            row.push(items.iter().map(|(o, _)| o).product());
            row.extend((0..k_len).map(|k| items[k].1 * loo[k].c0));
            normalize(&mut row);
            row
        })
        .collect();

    Ok(AssocOutput { eta, varsigma, iterations_used: iterations })
}

/// Approximate association marginals: `beta * eta` per PS and `xi * varsigma`
/// per measurement, each normalized.
pub fn bp_marginals(input: &AssocInput, output: &AssocOutput) -> Marginals {
    let a = input
        .beta
        .iter()
        .zip(&output.eta)
        .map(|(b, e)| {
            let mut row: Vec<f64> = b.iter().zip(e).map(|(x, y)| x * y).collect();
            normalize(&mut row);
            row
        })
        .collect();
    let b = input
        .xi0
        .iter()
        .zip(&output.varsigma)
        .map(|(xi0, s)| {
            let mut row = s.clone();
            row[0] *= xi0;
            normalize(&mut row);
            row
        })
        .collect();
    (a, b)
}

/// Largest problem the enumeration oracle accepts in either dimension.
pub const EXACT_LIMIT: usize = 8;

/// Association marginals: per legacy PS over `0..=M`, per measurement over `0..=K`.
pub type Marginals = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Exact marginals by enumerating every consistent association vector.
pub fn exact_association_marginals(input: &AssocInput) -> Result<Marginals> {
    input.validate()?;
    let k_len = input.num_legacy();
    let m_len = input.num_measurements();
    if k_len > EXACT_LIMIT || m_len > EXACT_LIMIT {
        return Err(Error::SizeLimit { k: k_len, m: m_len });
    }

    struct Walk<'a> {
        input: &'a AssocInput,
        assign: Vec<usize>,
        used: Vec<bool>,
        a_marg: Vec<Vec<f64>>,
        b_marg: Vec<Vec<f64>>,
    }

    impl Walk<'_> {
        fn visit(&mut self, k: usize, weight: f64) {
            if weight == 0.0 {
                return;
            }
            if k == self.assign.len() {
                let mut w = weight;
                for (m, used) in self.used.iter().enumerate() {
                    if !used {
                        w *= self.input.xi0[m];
                    }
                }
                let mut b = vec![0; self.used.len()];
                for (k, &a) in self.assign.iter().enumerate() {
                    self.a_marg[k][a] += w;
                    if a > 0 {
                        b[a - 1] = k + 1;
                    }
                }
                for (m, &bm) in b.iter().enumerate() {
                    self.b_marg[m][bm] += w;
                }
                return;
            }
            for a in 0..=self.used.len() {
                if a > 0 && self.used[a - 1] {
                    continue;
                }
                if a > 0 {
                    self.used[a - 1] = true;
                }
                self.assign[k] = a;
                let w = weight * self.input.beta[k][a];
                self.visit(k + 1, w);
                if a > 0 {
                    self.used[a - 1] = false;
                }
            }
        }
    }

    let mut walk = Walk {
        input,
        assign: vec![0; k_len],
        used: vec![false; m_len],
        a_marg: vec![vec![0.0; m_len + 1]; k_len],
        b_marg: vec![vec![0.0; k_len + 1]; m_len],
    };
    walk.visit(0, 1.0);
    walk.a_marg.iter_mut().for_each(|r| normalize(r));
    walk.b_marg.iter_mut().for_each(|r| normalize(r));
    Ok((walk.a_marg, walk.b_marg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn run(input: &AssocInput) -> AssocOutput {
        run_association(input, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn single_pair_matches_hand_enumeration() {
        // Feasible joint states: (a=0, b=0) with weight beta0 * xi0 and (a=1, b=1) with weight beta1.
        let (b0, b1, xi0) = (0.3, 2.0, 1.7);
        let input = AssocInput { beta: vec![vec![b0, b1]], xi0: vec![xi0] };
        let out = run(&input);
        let (a, b) = bp_marginals(&input, &out);
        let z = b0 * xi0 + b1;
        assert_abs_diff_eq!(a[0][0], b0 * xi0 / z, epsilon = 1e-12);
        assert_abs_diff_eq!(a[0][1], b1 / z, epsilon = 1e-12);
        assert_abs_diff_eq!(b[0][0], b0 * xi0 / z, epsilon = 1e-12);
        assert_abs_diff_eq!(b[0][1], b1 / z, epsilon = 1e-12);

        let (ea, eb) = exact_association_marginals(&input).unwrap();
        assert_abs_diff_eq!(ea[0][1], a[0][1], epsilon = 1e-12);
        assert_abs_diff_eq!(eb[0][0], b[0][0], epsilon = 1e-12);
    }

    #[test]
    fn no_detections_put_mass_on_zero() {
        let input = AssocInput { beta: vec![vec![1.0, 0.0, 0.0]; 3], xi0: vec![2.0, 0.5] };
        let out = run(&input);
        let (a, b) = bp_marginals(&input, &out);
        for row in &a {
            assert_abs_diff_eq!(row[0], 1.0, epsilon = 1e-12);
        }
        for row in &b {
            assert_abs_diff_eq!(row[0], 1.0, epsilon = 1e-12);
        }
        let (ea, _) = exact_association_marginals(&input).unwrap();
        assert_abs_diff_eq!(ea[1][0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_sides() {
        let out = run(&AssocInput { beta: vec![], xi0: vec![1.0, 3.0] });
        assert!(out.eta.is_empty());
        assert_eq!(out.varsigma, vec![vec![1.0], vec![1.0]]);

        let out = run(&AssocInput { beta: vec![vec![1.0], vec![2.0]], xi0: vec![] });
        assert_eq!(out.eta, vec![vec![1.0], vec![1.0]]);
        assert!(out.varsigma.is_empty());
    }

    #[test]
    fn symmetric_instance_is_uniform_over_feasible_values() {
        let input = AssocInput { beta: vec![vec![1.0, 1.0, 1.0]; 2], xi0: vec![1.0, 1.0] };
        let (a, b) = exact_association_marginals(&input).unwrap();
        for row in a.iter().chain(&b) {
            assert_abs_diff_eq!(row[1], row[2], epsilon = 1e-12);
        }
        let (ba, bb) = bp_marginals(&input, &run(&input));
        for (x, y) in ba.iter().flatten().chain(bb.iter().flatten()).zip(a.iter().flatten().chain(b.iter().flatten())) {
            assert_abs_diff_eq!(x, y, epsilon = 0.05);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let bad = AssocInput { beta: vec![vec![1.0, -1.0]], xi0: vec![1.0] };
        assert!(run_association(&bad, 10, 1e-5).is_err());
        let nan = AssocInput { beta: vec![vec![1.0, f64::NAN]], xi0: vec![1.0] };
        assert!(run_association(&nan, 10, 1e-5).is_err());
        let shape = AssocInput { beta: vec![vec![1.0]], xi0: vec![1.0] };
        assert!(run_association(&shape, 10, 1e-5).is_err());
        let big = AssocInput { beta: vec![vec![1.0; 2]; 9], xi0: vec![1.0] };
        assert_eq!(exact_association_marginals(&big), Err(Error::SizeLimit { k: 9, m: 1 }));
    }

    #[test]
    fn large_problem_stays_finite() {
        let k = 60;
        let m = 40;
        let beta: Vec<Vec<f64>> =
            (0..k).map(|i| (0..=m).map(|j| 1.0 + ((i * 7 + j * 13) % 11) as f64 * 100.0).collect()).collect();
        let input = AssocInput { beta, xi0: vec![3.0; m] };
        let out = run(&input);
        assert!(out.iterations_used <= DEFAULT_MAX_ITER);
        for v in out.eta.iter().flatten().chain(out.varsigma.iter().flatten()) {
            assert!(v.is_finite() && *v >= 0.0);
        }
    }

    fn instance(max_k: usize, max_m: usize) -> impl Strategy<Value = AssocInput> {
        (1..=max_k, 1..=max_m).prop_flat_map(|(k, m)| {
            let entry = -3.0..3.0f64;
            (
                proptest::collection::vec(proptest::collection::vec(entry.clone(), m + 1), k),
                proptest::collection::vec(entry, m),
            )
                .prop_map(|(beta, xi0)| AssocInput {
                    beta: beta.into_iter().map(|r| r.into_iter().map(|e| 10f64.powf(e)).collect()).collect(),
                    xi0: xi0.into_iter().map(|e| 10f64.powf(e)).collect(),
                })
        })
    }

    proptest! {
        #[test]
        fn tree_cases_are_exact(input in prop_oneof![instance(1, 6), instance(6, 1)]) {
            let out = run(&input);
            let (ba, bb) = bp_marginals(&input, &out);
            let (ea, eb) = exact_association_marginals(&input).unwrap();
            for (x, y) in ba.iter().flatten().chain(bb.iter().flatten()).zip(ea.iter().flatten().chain(eb.iter().flatten())) {
                prop_assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }

        #[test]
        fn row_scaling_is_invisible(input in instance(4, 4), row in 0usize..4, c in 1e-3..1e3f64) {
            let row = row % input.num_legacy();
            let mut scaled = input.clone();
            scaled.beta[row].iter_mut().for_each(|v| *v *= c);
            let (a1, b1) = bp_marginals(&input, &run(&input));
            let (a2, b2) = bp_marginals(&scaled, &run(&scaled));
            for (x, y) in a1.iter().flatten().chain(b1.iter().flatten()).zip(a2.iter().flatten().chain(b2.iter().flatten())) {
                prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }

        #[test]
        fn terminates_within_cap(input in instance(5, 5), cap in 1usize..50) {
            let out = run_association(&input, cap, 0.0).unwrap();
            prop_assert!(out.iterations_used <= cap);
        }
    }
}

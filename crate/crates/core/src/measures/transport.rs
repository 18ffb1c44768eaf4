//! Exact bounded-Lipschitz distance between finitely supported measures.
//!
//! For a signed measure `ν = μ1 − μ2` of zero mass and a split `a + b = 1`,
//! the supremum of `∫φ dν` over `|φ| ≤ a`, `Lip(φ) ≤ b` equals the optimal
//! transport cost of `ν` under the truncated metric `min(b d, 2a)`. That
//! value is concave in `a`, so the outer maximisation is a one-dimensional
//! cutting-plane search whose cuts come from the optimal plans.

/// Supply (positive) and demand (negative) masses with pairwise distances.
pub(crate) struct Problem {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    /// `dist[i * m + j]` between supply `i` and demand `j`.
    pub dist: Vec<f64>,
}

const MASS_EPS: f64 = 1e-15;

/// Optimal plan for the truncated cost at `a`, as the two coefficients of its
/// supporting line `a' ↦ 2a'·cut + (1 − a')·moved`.
struct Plan {
    value: f64,
    cut: f64,
    moved: f64,
}

impl Problem {
    fn cost(&self, a: f64, idx: usize) -> (f64, bool) {
        let t = (1.0 - a) * self.dist[idx];
        if t <= 2.0 * a {
            (t, true)
        } else {
            (2.0 * a, false)
        }
    }

    /// Successive shortest paths with potentials on the dense bipartite graph.
    fn solve(&self, a: f64) -> Plan {
        let n = self.supply.len();
        let m = self.demand.len();
        let cost: Vec<f64> = (0..n * m).map(|k| self.cost(a, k).0).collect();
        let mut flow = vec![0.0f64; n * m];
        let mut supply = self.supply.clone();
        let mut demand = self.demand.clone();
        let mut pot = vec![0.0f64; n + m];
        let mut dist = vec![f64::INFINITY; n + m];
        let mut done = vec![false; n + m];
        let mut pred = vec![usize::MAX; n + m];

        loop {
            let remaining: f64 = supply.iter().sum();
            if remaining <= MASS_EPS * n.max(1) as f64 {
                break;
            }
            dist.iter_mut().for_each(|d| *d = f64::INFINITY);
            done.iter_mut().for_each(|d| *d = false);
            pred.iter_mut().for_each(|p| *p = usize::MAX);
            for i in 0..n {
                if supply[i] > MASS_EPS {
                    dist[i] = 0.0;
                }
            }
            let mut target = usize::MAX;
            loop {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
                for v in 0..n + m {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                if u >= n && demand[u - n] > MASS_EPS {
                    target = u;
                    break;
                }
                if u < n {
                    let row = &cost[u * m..(u + 1) * m];
                    for j in 0..m {
                        let v = n + j;
                        if done[v] {
                            continue;
                        }
                        let rc = (row[j] + pot[u] - pot[v]).max(0.0);
                        let nd = best + rc;
                        if nd < dist[v] {
                            dist[v] = nd;
                            pred[v] = u;
                        }
                    }
                } else {
                    let j = u - n;
                    for i in 0..n {
                        if done[i] || flow[i * m + j] <= 0.0 {
                            continue;
                        }
                        let rc = (-cost[i * m + j] + pot[u] - pot[i]).max(0.0);
                        let nd = best + rc;
                        if nd < dist[i] {
                            dist[i] = nd;
                            pred[i] = u;
                        }
                    }
                }
            }
            if target == usize::MAX {
                break;
            }
            let reach = dist[target];
            for v in 0..n + m {
                pot[v] += dist[v].min(reach);
            }
            let mut amount = demand[target - n];
            let mut v = target;
            while pred[v] != usize::MAX {
                let u = pred[v];
                if u >= n {
                    amount = amount.min(flow[v * m + (u - n)]);
                }
                v = u;
            }
            amount = amount.min(supply[v]);
            let start = v;
            let mut v = target;
            while pred[v] != usize::MAX {
                let u = pred[v];
                if u < n {
                    flow[u * m + (v - n)] += amount;
                } else {
                    let f = &mut flow[v * m + (u - n)];
                    *f -= amount;
                    if *f < MASS_EPS {
                        *f = 0.0;
                    }
                }
                v = u;
            }
            supply[start] -= amount;
            demand[target - n] -= amount;
        }

        let mut plan = Plan {
            value: 0.0,
            cut: 0.0,
            moved: 0.0,
        };
        for (k, &f) in flow.iter().enumerate() {
            if f <= 0.0 {
                continue;
            }
            let (c, transported) = self.cost(a, k);
            plan.value += f * c;
            if transported {
                plan.moved += f * self.dist[k];
            } else {
                plan.cut += f;
            }
        }
        plan
    }

    /// `max_a V(a)` by Kelley's cutting planes on the concave value function.
    pub fn bl_value(&self) -> f64 {
        if self.supply.is_empty() || self.demand.is_empty() {
            return 0.0;
        }
        let total: f64 = self.supply.iter().sum();
        // (slope, intercept) of upper bounds on V.
        let mut lines: Vec<(f64, f64)> = vec![(2.0 * total, 0.0)];
        let mut best = 0.0f64;
        let mut a = 1.0 / 3.0;
        for _ in 0..200 {
            let plan = self.solve(a);
            best = best.max(plan.value);
            lines.push((2.0 * plan.cut - plan.moved, plan.moved));
            let (next, upper) = envelope_max(&lines);
            if upper - best <= 1e-13 * (1.0 + best) {
                break;
            }
            a = next;
        }
        best
    }
}

/// Maximiser and maximum over `[0, 1]` of the lower envelope of lines.
fn envelope_max(lines: &[(f64, f64)]) -> (f64, f64) {
    let env = |a: f64| {
        lines
            .iter()
            .map(|(s, c)| c + s * a)
            .fold(f64::INFINITY, f64::min)
    };
    let mut candidates = vec![0.0, 1.0];
    for (i, (s1, c1)) in lines.iter().enumerate() {
        for (s2, c2) in &lines[i + 1..] {
            if s1 != s2 {
                let a = (c2 - c1) / (s1 - s2);
                if (0.0..=1.0).contains(&a) {
                    candidates.push(a);
                }
            }
        }
    }
    candidates
        .into_iter()
        .map(|a| (a, env(a)))
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
}

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;

struct Closure<'a>(&'a dyn Fn(&[f64]) -> f64);

impl CostFunction for Closure<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

/// Nelder-Mead from `x0` with an axis-aligned initial simplex of size
/// `steps`. Returns the best point found and its cost.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], steps: &[f64], iters: u64) -> (Vec<f64>, f64) {
    let mut simplex = vec![x0.to_vec()];
    for (k, &s) in steps.iter().enumerate() {
        let mut p = x0.to_vec();
        p[k] += s;
        simplex.push(p);
    }
    let start = f(x0);
    let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-12) {
        Ok(s) => s,
        Err(_) => return (x0.to_vec(), start),
    };
    let run = Executor::new(Closure(f), solver).configure(|s| s.max_iters(iters)).run();
    match run {
        Ok(res) => {
            let best = res.state.best_param.clone().unwrap_or_else(|| x0.to_vec());
            let cost = res.state.best_cost;
            if cost <= start {
                (best, cost)
            } else {
                (x0.to_vec(), start)
            }
        }
        Err(_) => (x0.to_vec(), start),
    }
}

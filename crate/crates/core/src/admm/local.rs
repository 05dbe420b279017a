//! Per-transmitter subproblems: exact projections onto the local feasible
//! sets and accelerated projected gradient ascent on the augmented objective.

use crate::channel::TxId;
use crate::problem::{AllocationProblem, FEAS_TOL};
use crate::solver_exact::z_value;

/// Links and local constraints owned by one transmitter. The BS view also
/// owns the per-content BS caching variables.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockView {
    pub owner: TxId,
    /// Global link ids, ascending.
    pub links: Vec<usize>,
    pub r: Vec<f64>,
    pub y_min: Vec<f64>,
    /// Nonnegative value of the caching variable carried by each link
    /// (requester caching for D2D links, BS caching for cellular links).
    pub cache_gain: Vec<f64>,
    /// The block's spectrum total enters the shared uplink budget.
    pub shares_band: bool,
    /// Local spectrum budget (BS downlink).
    pub band_budget: Option<f64>,
    /// Local unicast limit (D2D transmitters).
    pub unicast_limit: Option<usize>,
    /// Content carried by each link, used by the BS caching constraints.
    pub link_content: Vec<usize>,
    pub content_sizes: Vec<f64>,
    pub cache_capacity_mb: f64,
}

impl BlockView {
    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Entries this block contributes to coupling rows: one assignment per
    /// link, then the band total when the band is shared.
    pub fn num_entries(&self) -> usize {
        self.links.len() + usize::from(self.shares_band)
    }

    fn owns_bs_cache(&self) -> bool {
        self.owner == TxId::Bs
    }

    /// Squared spectral norm of the coupling map.
    pub fn lipschitz(&self) -> f64 {
        if self.shares_band {
            (self.links.len() as f64).max(1.0)
        } else {
            1.0
        }
    }

    fn num_contents(&self) -> usize {
        if self.owns_bs_cache() {
            self.content_sizes.len()
        } else {
            0
        }
    }
}

/// Splits a problem into the BS block (if it has links) followed by one block
/// per D2D transmitter in ascending node id.
pub fn build_views(problem: &AllocationProblem) -> Vec<BlockView> {
    let sizes: Vec<f64> = problem.contents.iter().map(|c| c.size_mb).collect();
    let mut owners = vec![TxId::Bs];
    owners.extend(problem.d2d_transmitters().into_iter().map(TxId::Device));
    owners
        .into_iter()
        .filter_map(|owner| {
            let links: Vec<usize> =
                problem.links.iter().filter(|l| l.transmitter == owner).map(|l| l.link_id).collect();
            if links.is_empty() {
                return None;
            }
            let is_bs = owner == TxId::Bs;
            let cache_gain = links
                .iter()
                .map(|&l| if is_bs { problem.links[l].terms.cache_gain().max(0.0) } else { z_value(problem, l) })
                .collect();
            Some(BlockView {
                owner,
                r: links.iter().map(|&l| problem.links[l].terms.r).collect(),
                y_min: links.iter().map(|&l| problem.links[l].y_min).collect(),
                cache_gain,
                shares_band: !is_bs,
                band_budget: is_bs.then_some(problem.band_budget_dl),
                unicast_limit: (!is_bs).then_some(problem.unicast_limit),
                link_content: links.iter().map(|&l| problem.links[l].content).collect(),
                content_sizes: if is_bs { sizes.clone() } else { Vec::new() },
                cache_capacity_mb: problem.bs_cache_capacity_mb,
                links,
            })
        })
        .collect()
}

/// Relaxed decision variables of one block. `c` is the caching variable of
/// each link and `v` the BS caching level per content (empty for D2D blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBlock {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub c: Vec<f64>,
    pub v: Vec<f64>,
}

impl LocalBlock {
    pub fn zeros(view: &BlockView) -> Self {
        let n = view.num_links();
        Self { x: vec![0.0; n], y: vec![0.0; n], c: vec![0.0; n], v: vec![0.0; view.num_contents()] }
    }

    /// Values entering the coupling rows, in entry order.
    pub fn contributions(&self, view: &BlockView) -> Vec<f64> {
        let mut out = self.x.clone();
        if view.shares_band {
            out.push(self.y.iter().sum());
        }
        out
    }

    /// Linear part of the utility (no penalty).
    pub fn utility(&self, view: &BlockView) -> f64 {
        (0..view.num_links()).map(|i| view.r[i] * self.y[i] + view.cache_gain[i] * self.c[i]).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        [&self.x[..], &self.y, &self.c, &self.v].concat()
    }

    fn from_flat(flat: &[f64], n: usize) -> Self {
        Self {
            x: flat[..n].to_vec(),
            y: flat[n..2 * n].to_vec(),
            c: flat[2 * n..3 * n].to_vec(),
            v: flat[3 * n..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSettings {
    pub max_iters: usize,
    pub tol: f64,
}

/// Projects `(a, b, c)` onto `{0 <= x <= 1, y_min x <= y <= x, 0 <= w <= x}`,
/// with `w` pinned to zero when `cacheable` is false.
pub fn project_link(a: f64, b: f64, c: f64, y_min: f64, cacheable: bool) -> (f64, f64, f64) {
    // Half the derivative of the squared distance after eliminating y and w;
    // nondecreasing and piecewise linear in x.
    let psi = |x: f64| {
        let mut g = (x - a) + y_min * (y_min * x - b).max(0.0) - (b - x).max(0.0);
        if cacheable {
            g -= (c - x).max(0.0);
        }
        g
    };
    let x = if psi(0.0) >= 0.0 {
        0.0
    } else if psi(1.0) <= 0.0 {
        1.0
    } else {
        let mut points = vec![0.0, 1.0];
        let mut candidates = vec![b, b / y_min];
        if cacheable {
            candidates.push(c);
        }
        points.extend(candidates.into_iter().filter(|p| *p > 0.0 && *p < 1.0));
        points.sort_by(f64::total_cmp);
        let mut lo = (points[0], psi(points[0]));
        let mut root = 1.0;
        for &p in &points[1..] {
            let g = psi(p);
            if g >= 0.0 {
                root = if g == lo.1 { p } else { lo.0 - lo.1 * (p - lo.0) / (g - lo.1) };
                break;
            }
            lo = (p, g);
        }
        root.clamp(0.0, 1.0)
    };
    let y = b.clamp(y_min * x, x);
    let w = if cacheable { c.clamp(0.0, x) } else { 0.0 };
    (x, y, w)
}

/// Smallest `lambda >= 0` with `f(lambda) <= target` for nonincreasing
/// piecewise-linear `f` with `f(0) > target` and `f -> 0` at infinity.
fn root_decreasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut a, mut ga) = (0.0, f(0.0) - target);
    let mut b = 1.0;
    let mut gb = f(b) - target;
    while gb > 0.0 {
        a = b;
        ga = gb;
        b *= 2.0;
        gb = f(b) - target;
        if b > 1e12 {
            break;
        }
    }
    // Illinois variant of regula falsi; `fa`/`fb` are the damped end values.
    let (mut fa, mut fb) = (ga, gb);
    let mut side = 0i8;
    for _ in 0..200 {
        if gb >= -1e-14 || b - a <= 1e-15 * (1.0 + b) {
            break;
        }
        let mut m = (a * fb - b * fa) / (fb - fa);
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let gm = f(m) - target;
        if gm > 0.0 {
            a = m;
            fa = gm;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = m;
            gb = gm;
            fb = gm;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    b
}

fn project_links(view: &BlockView, p: &[f64], n: usize, shift_x: f64, shift_y: f64) -> (f64, f64) {
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in 0..n {
        let (x, y, _) = project_link(p[i] - shift_x, p[n + i] - shift_y, p[2 * n + i], view.y_min[i], view.cache_gain[i] > 0.0);
        sx += x;
        sy += y;
    }
    (sx, sy)
}

/// Projection onto the per-link cones together with the block's own
/// unicast limit or band budget.
fn project_cones(view: &BlockView, flat: &mut [f64]) {
    let n = view.num_links();
    let source = flat[..3 * n].to_vec();
    let mut shift = (0.0, 0.0);
    if let Some(limit) = view.unicast_limit {
        let limit = limit as f64;
        if project_links(view, &source, n, 0.0, 0.0).0 > limit {
            shift.0 = root_decreasing(|mu| project_links(view, &source, n, mu, 0.0).0, limit);
        }
    }
    if let Some(budget) = view.band_budget {
        if project_links(view, &source, n, 0.0, 0.0).1 > budget {
            shift.1 = root_decreasing(|l| project_links(view, &source, n, 0.0, l).1, budget);
        }
    }
    for i in 0..n {
        let (x, y, w) =
            project_link(source[i] - shift.0, source[n + i] - shift.1, source[2 * n + i], view.y_min[i], view.cache_gain[i] > 0.0);
        flat[i] = x;
        flat[n + i] = y;
        flat[2 * n + i] = w;
    }
}

/// Projects `(w_links, v)` onto `{w_l <= v_c(l), 0 <= v <= 1}` for one content
/// after shifting `v` down by `shift`.
fn project_group(w: &[f64], v: f64) -> f64 {
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut sum = v;
    let mut level = v;
    for (k, &wk) in sorted.iter().enumerate() {
        if level >= wk {
            break;
        }
        sum += wk;
        level = sum / (k as f64 + 2.0);
    }
    level.clamp(0.0, 1.0)
}

/// Projection onto the BS caching set `{w_l <= V_c, V in [0,1], sum s_c V_c <= cap}`.
fn project_cache(view: &BlockView, flat: &mut [f64], groups: &[Vec<usize>]) {
    let n = view.num_links();
    let m = view.content_sizes.len();
    let levels = |kappa: f64, flat: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|c| {
                let w: Vec<f64> = groups[c].iter().map(|&i| flat[2 * n + i]).collect();
                project_group(&w, flat[3 * n + c] - kappa * view.content_sizes[c])
            })
            .collect()
    };
    let used = |v: &[f64]| v.iter().zip(&view.content_sizes).map(|(v, s)| v * s).sum::<f64>();
    let mut v = levels(0.0, flat);
    if used(&v) > view.cache_capacity_mb {
        let kappa = root_decreasing(|k| used(&levels(k, flat)), view.cache_capacity_mb);
        v = levels(kappa, flat);
    }
    for c in 0..m {
        flat[3 * n + c] = v[c];
        for &i in &groups[c] {
            flat[2 * n + i] = flat[2 * n + i].min(v[c]);
        }
    }
}

/// Euclidean projection onto the block's local feasible set.
pub fn project_local(view: &BlockView, flat: &mut [f64]) {
    let n = view.num_links();
    if !view.owns_bs_cache() {
        project_cones(view, flat);
        return;
    }
    let m = view.content_sizes.len();
    let mut groups = vec![Vec::new(); m];
    for i in 0..n {
        if view.cache_gain[i] > 0.0 {
            groups[view.link_content[i]].push(i);
        }
    }
    let demand: f64 = (0..m).filter(|&c| !groups[c].is_empty()).map(|c| view.content_sizes[c]).sum();
    if demand <= view.cache_capacity_mb + FEAS_TOL {
        // Capacity cannot bind: V only has to dominate the caching levels.
        project_cones(view, flat);
        for c in 0..m {
            flat[3 * n + c] = groups[c].iter().map(|&i| flat[2 * n + i]).fold(0.0, f64::max);
        }
        return;
    }
    // Dykstra's alternating projections between the cone/budget set and the
    // caching set; both are exact projections.
    let len = flat.len();
    let (mut p, mut q) = (vec![0.0; len], vec![0.0; len]);
    let mut point = flat.to_vec();
    for _ in 0..500 {
        let mut a: Vec<f64> = point.iter().zip(&p).map(|(x, p)| x + p).collect();
        let before_a = a.clone();
        project_cones(view, &mut a);
        a[3 * n..].copy_from_slice(&before_a[3 * n..]);
        p = before_a.iter().zip(&a).map(|(u, v)| u - v).collect();
        let mut b: Vec<f64> = a.iter().zip(&q).map(|(x, q)| x + q).collect();
        let before_b = b.clone();
        project_cache(view, &mut b, &groups);
        q = before_b.iter().zip(&b).map(|(u, v)| u - v).collect();
        let change = b.iter().zip(&point).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        point = b;
        if change < 1e-12 {
            break;
        }
    }
    flat.copy_from_slice(&point);
}

/// Augmented local objective: linear utility minus the penalty pulling the
/// coupling entries toward `targets - duals`.
pub fn local_objective(view: &BlockView, block: &LocalBlock, duals: &[f64], targets: &[f64], rho: f64) -> f64 {
    let contrib = block.contributions(view);
    let penalty: f64 = contrib.iter().zip(targets.iter().zip(duals)).map(|(a, (z, u))| (a - z + u).powi(2)).sum();
    block.utility(view) - 0.5 * rho * penalty
}

fn gradient(view: &BlockView, flat: &[f64], t: &[f64], rho: f64, out: &mut [f64]) {
    let n = view.num_links();
    out.iter_mut().for_each(|g| *g = 0.0);
    let pull = if view.shares_band { rho * (flat[n..2 * n].iter().sum::<f64>() - t[n]) } else { 0.0 };
    for i in 0..n {
        out[i] = -rho * (flat[i] - t[i]);
        out[n + i] = view.r[i] - pull;
        out[2 * n + i] = view.cache_gain[i];
    }
}

/// Maximizes the augmented local objective over the block's local set by
/// projected gradient ascent with step `1 / (rho L_j)`, Nesterov momentum and
/// function-value restarts, warm-started from `warm`.
pub fn local_subproblem(
    view: &BlockView,
    duals: &[f64],
    targets: &[f64],
    rho: f64,
    settings: InnerSettings,
    warm: Option<&LocalBlock>,
) -> LocalBlock {
    let n = view.num_links();
    assert_eq!(duals.len(), view.num_entries(), "one dual per coupling entry");
    assert_eq!(targets.len(), view.num_entries(), "one target per coupling entry");
    let t: Vec<f64> = targets.iter().zip(duals).map(|(z, u)| z - u).collect();
    let step = 1.0 / (rho * view.lipschitz());
    let eval = |flat: &[f64]| local_objective(view, &LocalBlock::from_flat(flat, n), duals, targets, rho);

    let mut current = warm.map(LocalBlock::to_flat).unwrap_or_else(|| LocalBlock::zeros(view).to_flat());
    project_local(view, &mut current);
    let mut value = eval(&current);
    let mut previous = current.clone();
    let mut momentum = 1.0f64;
    let mut grad = vec![0.0; current.len()];
    for _ in 0..settings.max_iters {
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let probe: Vec<f64> = current.iter().zip(&previous).map(|(c, p)| c + beta * (c - p)).collect();
        gradient(view, &probe, &t, rho, &mut grad);
        let mut candidate: Vec<f64> = probe.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
        project_local(view, &mut candidate);
        let candidate_value = eval(&candidate);
        if candidate_value < value - 1e-12 * (1.0 + value.abs()) && momentum > 1.0 {
            // Momentum overshot: restart from the current iterate.
            momentum = 1.0;
            previous = current.clone();
            continue;
        }
        let change = candidate.iter().zip(&current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        previous = std::mem::replace(&mut current, candidate);
        value = candidate_value;
        momentum = next_momentum;
        if change < settings.tol {
            break;
        }
    }
    LocalBlock::from_flat(&current, n)
}

/// Largest violation of the projected-gradient fixed point `v = P(v + s grad)`,
/// with the gradient taken by central finite differences.
pub fn stationarity_residual(view: &BlockView, block: &LocalBlock, duals: &[f64], targets: &[f64], rho: f64) -> f64 {
    let n = view.num_links();
    let flat = block.to_flat();
    let h = 1e-6;
    let grad: Vec<f64> = (0..flat.len())
        .map(|k| {
            let (mut up, mut down) = (flat.clone(), flat.clone());
            up[k] += h;
            down[k] -= h;
            let f = |p: &[f64]| local_objective(view, &LocalBlock::from_flat(p, n), duals, targets, rho);
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect();
    let step = 1.0 / (rho * view.lipschitz());
    let mut moved: Vec<f64> = flat.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
    project_local(view, &mut moved);
    moved.iter().zip(&flat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

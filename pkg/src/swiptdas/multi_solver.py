"""Joint power / splitting-ratio optimization for multi-device networks.

Structure of the solver: an outer Dinkelbach iteration turns the EE ratio
into a sequence of parametric subtractive problems; each one is attacked
through its Lagrange dual over the per-port power duals (upsilon_i) and the
per-device harvesting duals (mu_k). The dual is minimized by the ellipsoid
method; every dual evaluation runs block-coordinate power sweeps at the
current splitting ratios followed by a closed-form ratio update, and reports
the constraint slacks as the subgradient. The dual-optimal primal can
slightly violate the constraints (the inner scheme is suboptimal), so the
returned point is re-projected: port totals scaled down to their caps, then
splitting ratios reduced just enough to restore the harvest floors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import MultiSolution, SolverStats, evaluate_multi

__all__ = [
    "DualVector",
    "EllipsoidState",
    "BcdWorkspace",
    "Subgradient",
    "NumericalFailure",
    "bcd_power_update",
    "alpha_update",
    "dual_value_and_subgradient",
    "ellipsoid_minimize",
    "solve_multi",
]


class NumericalFailure(RuntimeError):
    """Ellipsoid shape matrix lost positive definiteness (or similar)."""

    def __init__(self, message, center=None):
        super().__init__(message)
        self.center = center


def _vector(x, n, name):
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},)")
    return a


@dataclass(frozen=True)
class DualVector:
    """Non-negative multipliers: per-port power duals and harvest duals."""

    upsilon: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        ups = np.asarray(self.upsilon, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if ups.ndim != 1 or mu.ndim != 1:
            raise ValueError("dual components must be 1-D vectors")
        if np.any(ups < 0.0) or np.any(mu < 0.0):
            raise ValueError("dual components must be non-negative")
        object.__setattr__(self, "upsilon", ups)
        object.__setattr__(self, "mu", mu)

    @property
    def stacked(self):
        return np.concatenate([self.upsilon, self.mu])


@dataclass(frozen=True)
class EllipsoidState:
    """Search state: center, symmetric positive-definite shape matrix, count."""

    center: np.ndarray
    shape: np.ndarray
    iteration: int

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        P = np.asarray(self.shape, dtype=float)
        if P.shape != (c.size, c.size):
            raise ValueError("shape matrix must be square and match the center")
        if not np.allclose(P, P.T, rtol=0.0, atol=1e-8 * max(1.0, float(np.abs(P).max()))):
            raise ValueError("shape matrix must be symmetric")
        try:
            np.linalg.cholesky(0.5 * (P + P.T))
        except np.linalg.LinAlgError as exc:
            raise ValueError("shape matrix must be positive definite") from exc
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", P)


@dataclass(frozen=True)
class BcdWorkspace:
    """State carried between coordinate sweeps: D_i values, powers, ratios."""

    d_values: np.ndarray
    powers: np.ndarray
    alphas: np.ndarray


@dataclass(frozen=True)
class Subgradient:
    """Constraint-slack subgradient of the dual at a primal response."""

    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if not np.all(np.isfinite(c)):
            raise ValueError("subgradient components must be finite")
        object.__setattr__(self, "components", c)


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True, nogil=True)
def _bcd_multi(p, s, h, caps, alphas, dvals, kfac, sigma2, nearest, best,
               tol, max_sweeps):
    """Lexicographic Gauss-Seidel sweeps over (port, device) at fixed ratios.

    p is the (N, K) power matrix, s[k] the running decode sums; both are
    updated in place. Ports with D_i >= 0 saturate; the rest take the clamped
    interior point. Stops when the largest change in a sweep drops below
    `tol` [W]. Returns the sweep count.
    """
    n, kdev = h.shape
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        max_change = 0.0
        for i in range(n):
            di = dvals[i]
            for k in range(kdev):
                if di >= 0.0:
                    pn = caps[i]
                else:
                    ak = alphas[k]
                    if nearest and i != best[k]:
                        pn = 0.0
                    elif ak <= 0.0:
                        pn = 0.0
                    else:
                        hik = h[i, k]
                        if nearest:
                            x = -1.0 / (kfac * di) - sigma2 / (hik * ak)
                        else:
                            s_others = s[k] - hik * p[i, k]
                            x = (-1.0 / (kfac * di) - sigma2 / (hik * ak)
                                 - s_others / hik)
                        if x < 0.0:
                            x = 0.0
                        elif x > caps[i]:
                            x = caps[i]
                        pn = x
                d = pn - p[i, k]
                if d != 0.0:
                    s[k] += h[i, k] * d
                    if abs(d) > max_change:
                        max_change = abs(d)
                    p[i, k] = pn
        if max_change < tol:
            break
    return sweeps


@njit(cache=True, nogil=True)
def _two_step(p, s, alphas, h, caps, dvals, ups, mus, mu_scale, q, kfac,
              sigma2, zeta, update_alpha, nearest, best, rowsum, tot):
    """Dual evaluation: alternate BCD power sweeps and ratio updates until
    the pair stops moving.

    Iterating the two-step map to its fixed point from a canonical start
    (equal split at the caps, ratio one half) makes the inner response a pure
    function of the dual point. Warm-starting across dual points is tempting
    but selects among multiple fixed-point basins near optimal duals — the
    harvest term is linear in the powers, so ports whose net coefficient
    crosses zero flip between zero and the cap — and that history dependence
    keeps the outer ratio iteration from ever settling. `mus` holds the
    harvest duals in ellipsoid (scaled) units; the natural multiplier is
    mus[k] * mu_scale.
    """
    n, kdev = h.shape
    for i in range(n):
        for k in range(kdev):
            p[i, k] = caps[i] / kfac
    for k in range(kdev):
        acc = 0.0
        for i in range(n):
            acc += h[i, k] * p[i, k]
        s[k] = acc
    if update_alpha:
        for k in range(kdev):
            alphas[k] = 0.5
    total = 0
    for _ in range(200):
        for i in range(n):
            acc = -q - ups[i]
            for k in range(kdev):
                acc += mus[k] * mu_scale * zeta * (1.0 - alphas[k]) * h[i, k]
            dvals[i] = acc
        total += _bcd_multi(p, s, h, caps, alphas, dvals, kfac, sigma2,
                            nearest, best, 1e-8, 500)
        if not update_alpha:
            break
        for i in range(n):
            rs = 0.0
            for k in range(kdev):
                rs += p[i, k]
            rowsum[i] = rs
        max_da = 0.0
        for k in range(kdev):
            t = 0.0
            for i in range(n):
                t += h[i, k] * rowsum[i]
            tot[k] = t
            if nearest:
                decode = h[best[k], k] * p[best[k], k]
            else:
                decode = s[k]
            muk = mus[k] * mu_scale
            if decode <= 0.0 or muk <= 0.0 or t <= 0.0:
                a = 1.0
            else:
                a = 1.0 / (kfac * muk * zeta * t) - sigma2 / decode
                if a < 0.0:
                    a = 0.0
                elif a > 1.0:
                    a = 1.0
            da = a - alphas[k]
            if abs(da) > max_da:
                max_da = abs(da)
            alphas[k] = a
        if max_da < 1e-11:
            break
    return total


@njit(cache=True, nogil=True)
def _l2_eval(p, alphas, h, caps, e_min, ups, mus, mu_scale, q, kfac, sigma2,
             zeta, pc, nearest, best, g, rowsum, tot):
    """Lagrangian value at (p, alphas, duals) plus the slack subgradient.

    The harvest components of the subgradient are expressed in scaled units
    (slack times mu_scale) to match the scaled duals, leaving the products
    mus[k] * g[n+k] in natural units.
    """
    n, kdev = h.shape
    for i in range(n):
        rs = 0.0
        for k in range(kdev):
            rs += p[i, k]
        rowsum[i] = rs
    for k in range(kdev):
        t = 0.0
        for i in range(n):
            t += h[i, k] * rowsum[i]
        tot[k] = t
    rate = 0.0
    for k in range(kdev):
        if nearest:
            decode = h[best[k], k] * p[best[k], k]
        else:
            decode = 0.0
            for i in range(n):
                decode += h[i, k] * p[i, k]
        rate += math.log1p(alphas[k] * decode / sigma2)
    rate /= kfac
    ptot = pc
    for i in range(n):
        ptot += rowsum[i]
    val = rate - q * ptot
    for i in range(n):
        gi = caps[i] - rowsum[i]
        g[i] = gi
        val += ups[i] * gi
    for k in range(kdev):
        ek = zeta * (1.0 - alphas[k]) * tot[k]
        gk = (ek - e_min[k]) * mu_scale
        g[n + k] = gk
        val += mus[k] * gk
    return val


@njit(cache=True, nogil=True)
def _dual_solve(h, caps, e_min, q, kfac, sigma2, zeta, pc, nearest, best,
                update_alpha, center, radius, mu_scale, tol, max_iter,
                p, s, alphas, cand_p, cand_alphas, inc_p, inc_alphas,
                inc_ratio, inc_rate, inc_ptot):
    """Minimize the dual over the non-negative orthant by the ellipsoid method.

    The shape matrix is carried as a square-root factor L (P = L L^T), so the
    quadratic form g^T P g = ||L^T g||^2 stays non-negative under the rank-one
    downdate instead of losing definiteness to cancellation after thousands of
    cuts. `center` seeds the ellipsoid (clamped to the orthant) and receives
    the best dual found; p/s/alphas are warm primal state, left at the
    two-step response for that best dual.

    Every recovered primal along the search is also projected onto the
    feasible set, and the one with the best rate/power ratio better than the
    incoming incumbent (inc_ratio) is written to inc_p/inc_alphas. Returns
    (iterations, status, inc_ratio, inc_rate, inc_ptot) with status 1 when
    the factor degenerates to numerical rank deficiency.
    """
    n, kdev = h.shape
    m = n + kdev
    x = np.empty(m)
    for j in range(m):
        x[j] = center[j] if center[j] > 0.0 else 0.0
    L = np.zeros((m, m))
    for j in range(m):
        L[j, j] = radius
    g = np.empty(m)
    v = np.empty(m)
    pg = np.empty(m)
    rowsum = np.empty(n)
    tot = np.empty(kdev)
    dvals = np.empty(n)
    kappa = m / math.sqrt(m * m - 1.0)
    cfac = 1.0 - math.sqrt((m - 1.0) / (m + 1.0))
    best_val = np.inf
    best_x = x.copy()
    iters = 0
    status = 0
    for _ in range(max_iter):
        iters += 1
        jneg = -1
        xmin = 0.0
        for j in range(m):
            if x[j] < xmin:
                xmin = x[j]
                jneg = j
        if jneg >= 0:
            for j in range(m):
                g[j] = 0.0
            g[jneg] = -1.0
            is_obj = False
        else:
            _two_step(p, s, alphas, h, caps, dvals, x[:n], x[n:], mu_scale,
                      q, kfac, sigma2, zeta, update_alpha, nearest, best,
                      rowsum, tot)
            val = _l2_eval(p, alphas, h, caps, e_min, x[:n], x[n:], mu_scale,
                           q, kfac, sigma2, zeta, pc, nearest, best, g,
                           rowsum, tot)
            if val < best_val:
                best_val = val
                for j in range(m):
                    best_x[j] = x[j]
            for i in range(n):
                for k in range(kdev):
                    cand_p[i, k] = p[i, k]
            for k in range(kdev):
                cand_alphas[k] = alphas[k]
            okc, ratec, ptotc = _restore_and_rate(
                cand_p, cand_alphas, h, caps, e_min, kfac, sigma2, zeta, pc,
                nearest, best, update_alpha, rowsum, tot)
            if okc and ratec / ptotc > inc_ratio:
                inc_ratio = ratec / ptotc
                inc_rate = ratec
                inc_ptot = ptotc
                for i in range(n):
                    for k in range(kdev):
                        inc_p[i, k] = cand_p[i, k]
                for k in range(kdev):
                    inc_alphas[k] = cand_alphas[k]
            is_obj = True
        gpg = 0.0
        for b in range(m):
            acc = 0.0
            for a in range(m):
                acc += L[a, b] * g[a]
            v[b] = acc
            gpg += acc * acc
        if not (gpg > 0.0) or not np.isfinite(gpg):
            status = 1
            break
        denom = math.sqrt(gpg)
        if is_obj and denom < tol:
            break
        for a in range(m):
            acc = 0.0
            for b in range(m):
                acc += L[a, b] * v[b]
            pg[a] = acc
        c1 = 1.0 / ((m + 1.0) * denom)
        for j in range(m):
            x[j] -= c1 * pg[j]
        c2 = cfac / gpg
        for a in range(m):
            for b in range(m):
                L[a, b] = kappa * (L[a, b] - c2 * pg[a] * v[b])
    _two_step(p, s, alphas, h, caps, dvals, best_x[:n], best_x[n:], mu_scale,
              q, kfac, sigma2, zeta, update_alpha, nearest, best, rowsum, tot)
    for j in range(m):
        center[j] = best_x[j]
    return iters, status, inc_ratio, inc_rate, inc_ptot


@njit(cache=True, nogil=True)
def _restore_and_rate(p, alphas, h, caps, e_min, kfac, sigma2, zeta, pc,
                      nearest, best, update_alpha, rowsum, tot):
    """Project (p, alphas) onto the feasible set in place and price it.

    Rows over their cap are scaled down. A missed harvest floor is then met
    by lowering that device's ratio (joint schemes) or, at a pinned ratio, by
    blending every power toward the full-power equal split just far enough.
    Returns (ok, rate, ptot); ok is False when no ratio can reach the floor.
    """
    n, kdev = h.shape
    for i in range(n):
        rs = 0.0
        for k in range(kdev):
            rs += p[i, k]
        if rs > caps[i] and rs > 0.0:
            f = caps[i] / rs
            for k in range(kdev):
                p[i, k] *= f
            rs = caps[i]
        rowsum[i] = rs
    for k in range(kdev):
        t = 0.0
        for i in range(n):
            t += h[i, k] * rowsum[i]
        tot[k] = t
    ok = True
    if update_alpha:
        for k in range(kdev):
            if e_min[k] <= 0.0:
                continue
            if tot[k] <= 0.0:
                ok = False
                continue
            bound = 1.0 - e_min[k] / (zeta * tot[k])
            if bound < 0.0:
                alphas[k] = 0.0
                ok = False
            elif alphas[k] > bound:
                alphas[k] = bound
    else:
        tmax = 0.0
        for k in range(kdev):
            if e_min[k] <= 0.0:
                continue
            need = e_min[k] / (zeta * (1.0 - alphas[k]))
            if tot[k] >= need:
                continue
            full = 0.0
            for i in range(n):
                full += h[i, k] * caps[i]
            if full <= tot[k]:
                ok = False
                continue
            t = (need - tot[k]) / (full - tot[k])
            if t > tmax:
                tmax = t
        if tmax > 0.0:
            if tmax > 1.0:
                tmax = 1.0
                ok = False
            for i in range(n):
                share = caps[i] / kfac
                for k in range(kdev):
                    p[i, k] = (1.0 - tmax) * p[i, k] + tmax * share
            for i in range(n):
                rs = 0.0
                for k in range(kdev):
                    rs += p[i, k]
                rowsum[i] = rs
            for k in range(kdev):
                t = 0.0
                for i in range(n):
                    t += h[i, k] * rowsum[i]
                tot[k] = t
    rate = 0.0
    for k in range(kdev):
        if nearest:
            decode = h[best[k], k] * p[best[k], k]
        else:
            decode = 0.0
            for i in range(n):
                decode += h[i, k] * p[i, k]
        rate += math.log1p(alphas[k] * decode / sigma2)
    rate /= kfac
    ptot = pc
    for i in range(n):
        ptot += rowsum[i]
    return ok, rate, ptot


@njit(cache=True, nogil=True)
def _solve_multi_core(h, caps, e_min, kfac, sigma2, zeta, pc, nearest, best,
                      update_alpha, alpha_fixed, radius, mu_scale, ell_tol,
                      ell_max_iter, max_outer, dink_tol, seed_p, seed_alphas,
                      has_seed):
    """Dinkelbach outer loop; per ratio guess a full dual ellipsoid solve.

    The first dual solve starts from the zero dual with the full radius.
    Later solves re-center on the previous best dual and shrink the radius
    toward the observed dual movement (a trust region), keeping the search
    local once the ratio iteration settles.

    The ratio is updated from the best feasible primal seen so far: each
    recovered primal is projected onto the constraint set and kept when its
    rate/power ratio beats the incumbent. Raw recovered primals flip between
    Lagrangian-maximizer basins when duals sit near a knife edge, so their
    raw ratios oscillate; the restored incumbent is monotone, which lets the
    residual reach tolerance instead of chattering. An optional seed primal
    (seed_p, seed_alphas) enters the incumbent pool before the search.
    """
    n, kdev = h.shape
    p = np.empty((n, kdev))
    for i in range(n):
        for k in range(kdev):
            p[i, k] = caps[i] / kfac
    alphas = np.empty(kdev)
    a0 = 0.5 if update_alpha else alpha_fixed
    for k in range(kdev):
        alphas[k] = a0
    s = np.empty(kdev)
    for k in range(kdev):
        acc = 0.0
        for i in range(n):
            acc += h[i, k] * p[i, k]
        s[k] = acc
    rowsum = np.empty(n)
    tot = np.empty(kdev)
    best_p = p.copy()
    best_alphas = alphas.copy()
    ok, best_rate, best_ptot = _restore_and_rate(
        best_p, best_alphas, h, caps, e_min, kfac, sigma2, zeta, pc, nearest,
        best, update_alpha, rowsum, tot)
    best_ratio = best_rate / best_ptot if ok else -np.inf
    if has_seed:
        sp = seed_p.copy()
        sa = seed_alphas.copy()
        ok_s, rate_s, ptot_s = _restore_and_rate(
            sp, sa, h, caps, e_min, kfac, sigma2, zeta, pc, nearest, best,
            update_alpha, rowsum, tot)
        if ok_s and rate_s / ptot_s > best_ratio:
            best_ratio = rate_s / ptot_s
            best_rate = rate_s
            best_ptot = ptot_s
            for i in range(n):
                for k in range(kdev):
                    best_p[i, k] = sp[i, k]
            for k in range(kdev):
                best_alphas[k] = sa[k]
    m = n + kdev
    center = np.zeros(m)
    prev = np.zeros(m)
    q = best_ratio if has_seed and np.isfinite(best_ratio) else 0.0
    resid = np.inf
    converged = False
    total_ell = 0
    status = 0
    outer = 0
    r = radius
    cand_p = np.empty((n, kdev))
    cand_alphas = np.empty(kdev)
    for outer in range(1, max_outer + 1):
        for j in range(m):
            prev[j] = center[j]
        iters, st, best_ratio, best_rate, best_ptot = _dual_solve(
            h, caps, e_min, q, kfac, sigma2, zeta, pc, nearest, best,
            update_alpha, center, r, mu_scale, ell_tol, ell_max_iter, p, s,
            alphas, cand_p, cand_alphas, best_p, best_alphas, best_ratio,
            best_rate, best_ptot)
        total_ell += iters
        if st != 0:
            status = st
            break
        move = 0.0
        for j in range(m):
            d = center[j] - prev[j]
            move += d * d
        move = math.sqrt(move)
        r = min(radius, max(20.0 * move, 0.05))
        resid = abs(best_rate - q * best_ptot)
        if resid < dink_tol * max(1.0, q):
            converged = True
            break
        q = best_ratio
    return (best_p, best_alphas, q, center, outer, total_ell, resid,
            converged, status)


# ---------------------------------------------------------------------------
# public building blocks


def bcd_power_update(workspace, duals, q, scenario):
    """Run the coordinate power sweeps to their fixed point at fixed ratios.

    Returns a new workspace with refreshed D_i values and powers; the ratios
    are carried over unchanged.
    """
    params = scenario.params
    h = np.ascontiguousarray(scenario.gains)
    caps = np.ascontiguousarray(scenario.power_caps)
    alphas = np.asarray(workspace.alphas, dtype=float).copy()
    p = np.array(workspace.powers, dtype=float)
    if p.shape != h.shape:
        raise ValueError("workspace powers must match the gain matrix shape")
    kfac = float(scenario.n_devices)
    zeta = params.conversion_efficiency
    dvals = -q - np.asarray(duals.upsilon, dtype=float) + h @ (
        np.asarray(duals.mu, dtype=float) * zeta * (1.0 - alphas))
    s = (h * p).sum(axis=0)
    best = np.zeros(scenario.n_devices, dtype=np.int64)
    _bcd_multi(p, s, h, caps, alphas, dvals, kfac, params.noise_power,
               False, best, 1e-8, 500)
    return BcdWorkspace(d_values=dvals, powers=p, alphas=alphas)


def alpha_update(powers, duals, scenario):
    """Closed-form clamped splitting-ratio update at the given powers."""
    params = scenario.params
    h = np.asarray(scenario.gains, dtype=float)
    p = np.asarray(powers, dtype=float)
    if p.shape != h.shape:
        raise ValueError("powers must match the gain matrix shape")
    kfac = float(scenario.n_devices)
    zeta = params.conversion_efficiency
    mu = np.asarray(duals.mu, dtype=float)
    rowsum = p.sum(axis=1)
    tot = h.T @ rowsum
    decode = (h * p).sum(axis=0)
    out = np.ones(scenario.n_devices)
    for k in range(scenario.n_devices):
        if decode[k] > 0.0 and mu[k] > 0.0 and tot[k] > 0.0:
            a = 1.0 / (kfac * mu[k] * zeta * tot[k]) - params.noise_power / decode[k]
            out[k] = min(max(a, 0.0), 1.0)
    return out


def dual_value_and_subgradient(powers, alphas, duals, q, scenario):
    """Lagrangian value and constraint-slack subgradient at a primal point."""
    params = scenario.params
    h = np.asarray(scenario.gains, dtype=float)
    p = np.asarray(powers, dtype=float)
    a = np.asarray(alphas, dtype=float)
    caps = np.asarray(scenario.power_caps, dtype=float)
    e_min = np.asarray(scenario.min_harvest, dtype=float)
    kfac = float(scenario.n_devices)
    zeta = params.conversion_efficiency
    rowsum = p.sum(axis=1)
    tot = h.T @ rowsum
    decode = (h * p).sum(axis=0)
    rate = float(np.log1p(a * decode / params.noise_power).sum()) / kfac
    harvested = zeta * (1.0 - a) * tot
    cap_slack = caps - rowsum
    harvest_slack = harvested - e_min
    value = (rate - q * (float(rowsum.sum()) + params.circuit_power)
             + float(duals.upsilon @ cap_slack) + float(duals.mu @ harvest_slack))
    return value, Subgradient(np.concatenate([cap_slack, harvest_slack]))


def ellipsoid_minimize(oracle, dim, radius, tol=1e-6, max_iter=2000,
                       nonneg=True):
    """Minimize a convex function over the non-negative orthant.

    `oracle(x)` must return (value, subgradient). Negative components trigger
    feasibility cuts instead of oracle calls. Returns (best_x, best_value,
    final EllipsoidState, converged) where converged means the cut-normalized
    radius dropped below `tol` at an objective cut.
    """
    x = np.zeros(dim)
    factor = np.eye(dim) * radius
    best_val = np.inf
    best_x = x.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jneg = int(np.argmin(x))
        if nonneg and x[jneg] < 0.0:
            g = np.zeros(dim)
            g[jneg] = -1.0
            is_obj = False
        else:
            val, g = oracle(x)
            g = np.asarray(g, dtype=float)
            if val < best_val:
                best_val = float(val)
                best_x = x.copy()
            is_obj = True
        v = factor.T @ g
        gpg = float(v @ v)
        if not (gpg > 0.0 and np.isfinite(gpg)):
            raise NumericalFailure(
                "ellipsoid shape matrix lost positive definiteness",
                center=x.copy(),
            )
        denom = math.sqrt(gpg)
        if is_obj and denom < tol:
            converged = True
            break
        pg = factor @ v
        x = x - pg / (denom * (dim + 1.0))
        if dim == 1:
            factor = factor * 0.5
        else:
            kappa = dim / math.sqrt(dim * dim - 1.0)
            cfac = 1.0 - math.sqrt((dim - 1.0) / (dim + 1.0))
            factor = kappa * (factor - (cfac / gpg) * np.outer(pg, v))
    state = EllipsoidState(center=x, shape=factor @ factor.T, iteration=it)
    return best_x, best_val, state, converged


# ---------------------------------------------------------------------------
# restoration and the full solver


def _scale_rows_to_caps(p, caps):
    """Scale each port's power row down so its sum respects the cap."""
    rowsum = p.sum(axis=1)
    over = rowsum > caps
    if np.any(over):
        p[over] *= (caps[over] / rowsum[over])[:, None]


def _reduce_alphas_for_harvest(p, alphas, h, e_min, zeta):
    """Lower each ratio just enough to meet its harvest floor.

    Returns False when some floor is unreachable even at ratio 0.
    """
    tot = h.T @ p.sum(axis=1)
    ok = True
    for k in range(e_min.size):
        if e_min[k] <= 0.0:
            continue
        if tot[k] <= 0.0:
            ok = False
            continue
        bound = 1.0 - e_min[k] / (zeta * tot[k])
        if bound < 0.0:
            alphas[k] = 0.0
            ok = False
        elif alphas[k] > bound:
            alphas[k] = bound
    return ok


def _finish(p, alphas, scenario, stats, nearest_best=None):
    """Build a MultiSolution from restored powers/ratios, auditing feasibility."""
    params = scenario.params
    h = np.asarray(scenario.gains, dtype=float)
    caps = np.asarray(scenario.power_caps, dtype=float)
    e_min = np.asarray(scenario.min_harvest, dtype=float)
    zeta = params.conversion_efficiency
    kfac = float(scenario.n_devices)
    rowsum = p.sum(axis=1)
    tot = h.T @ rowsum
    harvested = zeta * (1.0 - alphas) * tot
    caps_ok = bool(np.all(rowsum <= caps + 1e-9))
    harvest_ok = bool(np.all(harvested >= e_min - 1e-9 * np.maximum(e_min, 1e-12)))
    if not (caps_ok and harvest_ok):
        return MultiSolution(
            powers=np.zeros_like(p),
            ps_ratios=np.zeros(scenario.n_devices),
            rates=np.zeros(scenario.n_devices),
            harvested=np.zeros(scenario.n_devices),
            ee=0.0,
            feasible=False,
            stats=stats,
        )
    if nearest_best is None:
        rates, harvested, ee = evaluate_multi(p, alphas, scenario)
    else:
        decode = h[nearest_best, np.arange(scenario.n_devices)] * \
            p[nearest_best, np.arange(scenario.n_devices)]
        rates = np.log1p(alphas * decode / params.noise_power) / kfac
        ee = float(rates.sum()) / (float(p.sum()) + params.circuit_power)
    return MultiSolution(
        powers=p,
        ps_ratios=alphas,
        rates=rates,
        harvested=harvested,
        ee=ee,
        feasible=True,
        stats=stats,
    )


def _infeasible_multi(scenario):
    return MultiSolution(
        powers=np.zeros((scenario.n_ports, scenario.n_devices)),
        ps_ratios=np.zeros(scenario.n_devices),
        rates=np.zeros(scenario.n_devices),
        harvested=np.zeros(scenario.n_devices),
        ee=0.0,
        feasible=False,
        stats=SolverStats(converged=True),
    )


_MU_SCALE = 1e3  # harvest duals searched in per-mW units (natural mu ~ 1e3)


def _run_core(scenario, nearest, best, update_alpha, alpha_fixed,
              ellipsoid_radius, ellipsoid_tol, ellipsoid_max_iter,
              max_outer, dinkelbach_tol, seed=None):
    params = scenario.params
    h = np.ascontiguousarray(scenario.gains)
    caps = np.ascontiguousarray(scenario.power_caps)
    e_min = np.ascontiguousarray(scenario.min_harvest)
    if seed is None:
        seed_p = np.zeros_like(h)
        seed_alphas = np.zeros(scenario.n_devices)
        has_seed = False
    else:
        seed_p = np.ascontiguousarray(seed[0])
        seed_alphas = np.ascontiguousarray(seed[1])
        has_seed = True
    out = _solve_multi_core(
        h, caps, e_min, float(scenario.n_devices), params.noise_power,
        params.conversion_efficiency, params.circuit_power, nearest, best,
        update_alpha, alpha_fixed, ellipsoid_radius, _MU_SCALE, ellipsoid_tol,
        ellipsoid_max_iter, max_outer, dinkelbach_tol, seed_p, seed_alphas,
        has_seed,
    )
    p, alphas, q, center, outer, total_ell, resid, converged, status = out
    if status != 0:
        raise NumericalFailure(
            "ellipsoid shape matrix lost positive definiteness",
            center=center.copy(),
        )
    stats = SolverStats(
        outer_iterations=outer,
        inner_iterations=total_ell,
        converged=converged,
        final_residual=resid,
    )
    return p, alphas, center, stats


def solve_multi(scenario, ellipsoid_radius=1e3, ellipsoid_tol=1e-6,
                ellipsoid_max_iter=2000, max_outer=50, dinkelbach_tol=1e-6,
                return_duals=False):
    """Jointly optimize powers and splitting ratios for EE across K devices.

    Infeasible when some device cannot meet its harvest floor even with every
    port at its cap and all power routed to the harvester; otherwise returns
    the restored solution (optionally together with the final duals).

    The search is seeded with the nearest-association solution (a feasible
    point of this problem, since it only restricts which port carries each
    device's data), so the result never falls below that restricted scheme.
    """
    params = scenario.params
    h = np.asarray(scenario.gains, dtype=float)
    caps = np.asarray(scenario.power_caps, dtype=float)
    e_min = np.asarray(scenario.min_harvest, dtype=float)
    zeta = params.conversion_efficiency
    if np.any(zeta * (h.T @ caps) < e_min):
        sol = _infeasible_multi(scenario)
        if return_duals:
            return sol, DualVector(np.zeros(scenario.n_ports),
                                   np.zeros(scenario.n_devices))
        return sol
    best_idx = np.argmax(np.asarray(scenario.gains), axis=0).astype(np.int64)
    try:
        seed_p, seed_alphas, _, _ = _run_core(
            scenario, True, best_idx, True, 0.5, ellipsoid_radius,
            ellipsoid_tol, ellipsoid_max_iter, max_outer, dinkelbach_tol,
        )
        seed = (seed_p, seed_alphas)
    except NumericalFailure:
        seed = None
    best = np.zeros(scenario.n_devices, dtype=np.int64)
    p, alphas, center, stats = _run_core(
        scenario, False, best, True, 0.5, ellipsoid_radius, ellipsoid_tol,
        ellipsoid_max_iter, max_outer, dinkelbach_tol, seed=seed,
    )
    p = np.array(p)
    alphas = np.array(alphas)
    _scale_rows_to_caps(p, np.ascontiguousarray(caps))
    _reduce_alphas_for_harvest(p, alphas, h, e_min, zeta)
    sol = _finish(p, alphas, scenario, stats)
    if return_duals:
        duals = DualVector(np.maximum(center[:scenario.n_ports], 0.0),
                           np.maximum(center[scenario.n_ports:], 0.0) * _MU_SCALE)
        return sol, duals
    return sol

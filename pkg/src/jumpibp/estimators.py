"""Monte Carlo harness: deterministic parallel expectations, two-sided
integration-by-parts checks, empirical characteristic functions and the
1-d density reconstruction.

Determinism contract: every path gets its own generator derived purely from
(seed, path index), per-path results are assembled in path order, and all
reductions run over that fixed array, so the outcome is byte-identical for any
worker count.
"""

import math
import multiprocessing
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import jets as jm
from .errors import Singular, TooManyRejections
from .jets import Jet
from .malliavin import ibp_weight
from .sde import JumpSdeSimulator

MAX_REJECTED_FRACTION = 0.10


def path_rng(seed, index):
    """Independent per-path generator; pure function of (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


# ---------------------------------------------------------------------------
# deterministic parallel map over path indices
# ---------------------------------------------------------------------------

_WORK = None


def _chunk_worker(bounds):
    start, stop = bounds
    return _WORK(start, stop)


def map_paths(row_fn, n, workers=1):
    """row_fn(start, stop) -> (stop-start, w) array; concatenated in path order."""
    workers = max(1, int(workers))
    if workers == 1 or n < 4 * workers:
        return row_fn(0, n)
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        return row_fn(0, n)
    global _WORK
    chunk = max(1, math.ceil(n / (4 * workers)))
    bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    _WORK = row_fn
    try:
        with ctx.Pool(workers) as pool:
            parts = pool.map(_chunk_worker, bounds)
    finally:
        _WORK = None
    return np.concatenate(parts, axis=0)


def default_workers():
    env = os.environ.get("JM_WORKERS")
    if env:
        return max(1, int(env))
    return 1


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------

@dataclass
class McEstimate:
    mean: float
    standard_error: float
    n_paths: int
    seed: int
    rejected_paths: int = 0

    @property
    def rejected_fraction(self):
        tot = self.n_paths + self.rejected_paths
        return self.rejected_paths / tot if tot else 0.0


def _estimate(values, ok, seed):
    n_ok = int(np.sum(ok))
    rejected = int(ok.size - n_ok)
    if ok.size and rejected / ok.size > MAX_REJECTED_FRACTION:
        raise TooManyRejections(f"{rejected}/{ok.size} paths rejected as Singular")
    vals = values[ok]
    mean = float(np.sum(vals) / n_ok) if n_ok else math.nan
    if n_ok >= 2:
        se = float(np.std(vals, ddof=1) / math.sqrt(n_ok))
    else:
        se = math.nan
    return McEstimate(mean, se, n_ok, seed, rejected)


@dataclass
class IbpReport:
    beta: tuple
    direct: McEstimate
    weighted: McEstimate
    rejected_paths: int

    @property
    def z_score(self):
        num = abs(self.direct.mean - self.weighted.mean)
        den = math.sqrt(self.direct.standard_error ** 2 + self.weighted.standard_error ** 2)
        return num / den if den > 0 else math.inf

    def passed(self, z_max=3.0):
        return self.z_score <= z_max


def mc_expectation(functional, model, cfg, n, seed, workers=1, value_only=False):
    """Mean/SE of functional(sim, path) over n independent paths."""
    if n < 2:
        raise ValueError("n must be >= 2")

    def rows(start, stop):
        sim = JumpSdeSimulator(model, cfg)
        out = np.empty((stop - start, 2))
        for i in range(start, stop):
            rng = path_rng(seed, i)
            path = sim.simulate(rng, value_only=value_only)
            try:
                out[i - start] = (functional(sim, path), 1.0)
            except Singular:
                out[i - start] = (np.nan, 0.0)
        return out

    data = map_paths(rows, n, workers)
    return _estimate(data[:, 0], data[:, 1] > 0, seed)


# ---------------------------------------------------------------------------
# duality and integration-by-parts checks
# ---------------------------------------------------------------------------

def default_f_builder(sim, path):
    return sim.regularize(path)[0]


def default_u_builder(sim, path, F):
    from .derivatives import weighted_derivative
    return weighted_derivative(F, path.weights, 1)


def duality_check(model, cfg, n, seed, f_builder=None, u_builder=None, workers=1):
    """Two-sided Monte Carlo of the D/delta duality; pass iff |z| <= 3."""
    from .derivatives import scalar_product, weighted_derivative
    from .malliavin import divergence
    f_builder = f_builder or default_f_builder
    u_builder = u_builder or default_u_builder

    def rows(start, stop):
        sim = JumpSdeSimulator(model, cfg)
        out = np.empty((stop - start, 3))
        for i in range(start, stop):
            rng = path_rng(seed, i)
            path = sim.simulate(rng)
            try:
                F = f_builder(sim, path)
                U = u_builder(sim, path, F)
                lnp = sim.log_density(path)
                side1 = float(scalar_product(weighted_derivative(F, path.weights, 1), U).value)
                side2 = float((F * divergence(U, path.weights, lnp)).value)
                out[i - start] = (side1, side2, 1.0)
            except Singular:
                out[i - start] = (np.nan, np.nan, 0.0)
        return out

    data = map_paths(rows, n, workers)
    ok = data[:, 2] > 0
    direct = _estimate(data[:, 0], ok, seed)
    weighted = _estimate(data[:, 1], ok, seed)
    return IbpReport((), direct, weighted, direct.rejected_paths)


def ibp_check(phi, beta, model, cfg, n, seed, G=None, workers=1, variance=None):
    """E[d_beta phi(F_M) G] versus E[phi(F_M) H_beta^q(F_M, G)]; pass iff |z| <= 3.

    phi takes a length-d list of jets (or floats wrapped in jets) and returns a
    scalar jet, so its partial derivatives come from the same jet machinery.
    """
    beta = tuple(beta)
    q = len(beta)
    if cfg.jet_order < q + 1:
        from dataclasses import replace
        cfg = replace(cfg, jet_order=q + 1)

    def rows(start, stop):
        sim = JumpSdeSimulator(model, cfg)
        out = np.empty((stop - start, 3))
        for i in range(start, stop):
            rng = path_rng(seed, i)
            path = sim.simulate(rng)
            try:
                F = sim.regularize(path, variance)
                lnp = sim.log_density(path)
                g_val = 1.0 if G is None else G(sim, path)
                w = ibp_weight(F, g_val, beta, path.weights, lnp)
                fvals = [float(np.asarray(c.value)) for c in F]
                probe = [Jet.coordinate(fvals[r], r, len(F), q) for r in range(len(F))]
                pj = phi(probe)
                direct = pj.partial(tuple(b - 1 for b in beta)) * \
                    (g_val if not isinstance(g_val, Jet) else float(g_val.value))
                weighted = float(pj.value) * w.value
                out[i - start] = (direct, weighted, 1.0)
            except Singular:
                out[i - start] = (np.nan, np.nan, 0.0)
        return out

    data = map_paths(rows, n, workers)
    ok = data[:, 2] > 0
    direct = _estimate(data[:, 0], ok, seed)
    weighted = _estimate(data[:, 1], ok, seed)
    return IbpReport(beta, direct, weighted, direct.rejected_paths)


# ---------------------------------------------------------------------------
# characteristic function and density reconstruction
# ---------------------------------------------------------------------------

def _regularized_values(model, cfg, n, seed, workers):
    def rows(start, stop):
        sim = JumpSdeSimulator(model, cfg)
        var = sim.regularization_variance()
        s = math.sqrt(var)
        out = np.empty((stop - start, model.d))
        for i in range(start, stop):
            rng = path_rng(seed, i)
            path = sim.simulate(rng, value_only=True)
            out[i - start] = [path.state_t[r] + s * path.delta[r] for r in range(model.d)]
        return out

    return map_paths(rows, n, workers)


def fourier_estimate(xi_grid, model, cfg, n, seed, workers=1):
    """|p_hat(xi)| of F_M with a delta-method standard error and the 1/sqrt(n) floor."""
    xi = np.atleast_2d(np.asarray(xi_grid, dtype=float))
    if xi.shape[0] == 1 and model.d == 1 and xi.shape[1] != 1:
        xi = xi.T
    F = _regularized_values(model, cfg, n, seed, workers)
    phase = F @ xi.T                      # (n, m)
    re = np.cos(phase)
    im = np.sin(phase)
    re_m, im_m = re.mean(axis=0), im.mean(axis=0)
    mod = np.hypot(re_m, im_m)
    cov_rr = re.var(axis=0, ddof=1) / n
    cov_ii = im.var(axis=0, ddof=1) / n
    cov_ri = np.array([np.cov(re[:, j], im[:, j], ddof=1)[0, 1] for j in range(xi.shape[0])]) / n
    safe = np.where(mod > 0, mod, 1.0)
    gr, gi = re_m / safe, im_m / safe
    se = np.sqrt(np.maximum(gr ** 2 * cov_rr + gi ** 2 * cov_ii + 2 * gr * gi * cov_ri, 0.0))
    return {
        "xi": xi,
        "modulus": mod,
        "se": se,
        "noise_floor": 1.0 / math.sqrt(n),
        "n": n,
        "seed": seed,
    }


def density_via_ibp(y_grid, model, cfg, n, seed, workers=1, width_scale=1e-3):
    """Pointwise density of the first component via a smoothed-Heaviside IBP."""
    if model.d != 1:
        raise ValueError("density reconstruction implemented for d = 1")
    from dataclasses import replace
    if cfg.jet_order < 2:
        cfg = replace(cfg, jet_order=2)

    def rows(start, stop):
        sim = JumpSdeSimulator(model, cfg)
        out = np.empty((stop - start, 3))
        for i in range(start, stop):
            rng = path_rng(seed, i)
            path = sim.simulate(rng)
            try:
                F = sim.regularize(path)
                lnp = sim.log_density(path)
                w = ibp_weight(F, 1.0, (1,), path.weights, lnp)
                out[i - start] = (float(F[0].value), w.value, 1.0)
            except Singular:
                out[i - start] = (np.nan, np.nan, 0.0)
        return out

    data = map_paths(rows, n, workers)
    ok = data[:, 2] > 0
    rejected = int(np.sum(~ok))
    if ok.size and rejected / ok.size > MAX_REJECTED_FRACTION:
        raise TooManyRejections(f"{rejected}/{ok.size} paths rejected")
    f_vals, h_vals = data[ok, 0], data[ok, 1]
    n_ok = f_vals.size
    eps = width_scale * float(np.std(f_vals))
    y = np.asarray(y_grid, dtype=float)
    est = np.empty(y.size)
    se = np.empty(y.size)
    for j, yj in enumerate(y):
        integrand = expit((f_vals - yj) / eps) * h_vals
        est[j] = float(np.sum(integrand) / n_ok)
        se[j] = float(np.std(integrand, ddof=1) / math.sqrt(n_ok))
    return {"y": y, "density": est, "se": se, "n": n_ok,
            "rejected": rejected, "seed": seed}

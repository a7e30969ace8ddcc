"""Simulation of the truncated jump SDE as a differentiable program.

Each path realises finitely many random coordinates: the Gaussian regulariser
(block 0) and one d-dimensional block per Poisson arrival.  The whole
trajectory is computed in jets over those coordinates, so every Malliavin
derivative downstream is exact for the simulated program.  Jump times are
conditioned on and never differentiated.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import quad

from . import jets as jm
from .derivatives import WeightField
from .errors import (CoordinateBudgetExceeded, DegenerateDensity,
                     NonInvertibleJump, OutsideSupport, QuadratureFailure,
                     SamplerFailure)
from .jets import MAX_COORDS, Jet
from .models import radial_tail_integral, sphere_area

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# smooth transition and bump
# ---------------------------------------------------------------------------

def _psi_ratio(u):
    """exp(-1/u) / (exp(-1/u) + exp(-1/(1-u))) for a jet or array strictly in (0, 1)."""
    if isinstance(u, Jet):
        pu = (-u.reciprocal()).exp()
        pv = (-(1.0 - u).reciprocal()).exp()
        return pu * (pu + pv).reciprocal()
    pu = np.exp(-1.0 / u)
    pv = np.exp(-1.0 / (1.0 - u))
    return pu / (pu + pv)


def smoothstep(u):
    """C-infinity monotone step: 0 for u <= 0, 1 for u >= 1, strictly increasing between."""
    if isinstance(u, Jet):
        uv = float(u.value)
        if uv <= 0.0:
            return Jet.constant(0.0, u.n, u.order)
        if uv >= 1.0:
            return Jet.constant(1.0, u.n, u.order)
        return _psi_ratio(u)
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    out[u >= 1.0] = 1.0
    band = (u > 0.0) & (u < 1.0)
    if np.any(band):
        out[band] = _psi_ratio(u[band])
    return out if out.ndim else float(out)


def _radius(z):
    """|z| for a list of jets or floats; exact smooth branch away from 0."""
    if len(z) == 1:
        return jm.jabs(z[0])
    s = z[0] * z[0]
    for c in z[1:]:
        s = s + c * c
    return jm.sqrt(s)


def mollified_indicator(z, M):
    """Radial smooth truncation: 1 on B_{M-1}, 0 outside B_{M+1}.

    Accepts a list of jets (one path amplitude) or a plain array of values.
    The flat branches return exact constants, so ghost amplitudes carry
    identically-zero weights.
    """
    if isinstance(z, (list, tuple)) and isinstance(z[0], Jet):
        r = float(_radius([jm.value_of(c) for c in z]))
        j0 = z[0]
        if r <= M - 1.0:
            return Jet.constant(1.0, j0.n, j0.order)
        if r >= M + 1.0:
            return Jet.constant(0.0, j0.n, j0.order)
        return smoothstep((M + 1.0 - _radius(z)) * 0.5)
    r = np.linalg.norm(np.asarray(z, dtype=float))
    return smoothstep((M + 1.0 - r) * 0.5)


@lru_cache(maxsize=None)
def _bump_lognorm(d):
    s = sphere_area(d)
    val, _ = quad(lambda r: math.exp(-1.0 / (1.0 - r * r)) * r ** (d - 1), 0.0, 1.0)
    return math.log(s * val)


def bump_logdensity(w, d):
    """ln of the unit-ball bump density at w (list of jets or floats), |w| < 1."""
    if isinstance(w[0], Jet):
        s = w[0] * w[0]
        for c in w[1:]:
            s = s + c * c
        return -(1.0 - s).reciprocal() - _bump_lognorm(d)
    s = float(sum(c * c for c in w))
    if s >= 1.0:
        raise OutsideSupport("bump evaluated outside the unit ball")
    return -1.0 / (1.0 - s) - _bump_lognorm(d)


def _sample_bump(rng, d):
    """Draw from the normalised bump by rejection from the uniform ball."""
    for _ in range(10000):
        w = rng.uniform(-1.0, 1.0, d)
        s = float(np.dot(w, w))
        if s >= 1.0:
            continue
        if rng.uniform() < math.exp(1.0 - 1.0 / (1.0 - s)):
            return w
    raise SamplerFailure("bump rejection sampler failed to accept")


def _gl_panels(a, b, panel_width=1.0, nodes=8):
    x, w = np.polynomial.legendre.leggauss(nodes)
    m = max(1, int(math.ceil((b - a) / panel_width)))
    edges = np.linspace(a, b, m + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        xs.append(mid + half * x)
        ws.append(half * w)
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# path record
# ---------------------------------------------------------------------------

@dataclass
class PathRecord:
    t: float
    d: int
    n: int
    order: int
    jump_count: int
    times: np.ndarray
    amplitudes: list              # per jump: list of d jets (or None for value-only runs)
    amplitude_values: np.ndarray  # (J, d)
    ghost: np.ndarray
    delta: list                   # d jets
    delta_values: np.ndarray
    states_pre: list              # X at T_k- (post-flow, pre-jump), jets
    state_values_pre: np.ndarray  # (J, d)
    state_t: list                 # jets at the horizon
    weights: Optional[WeightField]
    lambda_m: float


@dataclass
class FlowMatrices:
    Y_at_jumps: list      # post-jump tangent flow, one (d, d) per jump
    Yhat_at_jumps: list
    Y_t: np.ndarray
    Yhat_t: np.ndarray
    grad_z_cm: list       # (d, d) z-jacobian of c_M at each jump (None for ghosts)

    def inverse_gap(self):
        d = self.Y_t.shape[0]
        gap = np.max(np.abs(self.Yhat_t @ self.Y_t - np.eye(d)))
        for Y, Yh in zip(self.Y_at_jumps, self.Yhat_at_jumps):
            gap = max(gap, np.max(np.abs(Yh @ Y - np.eye(d))))
        return float(gap)


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------

class JumpSdeSimulator:
    """Owns the per-(model, config) caches and the path program."""

    def __init__(self, model, cfg):
        self.model = model
        self.cfg = cfg
        self.d = model.d
        self.R = cfg.M + 1.0
        self.mu_B = model.mu_of_ball(self.R)
        self.lambda_m = 2.0 * model.C_bar * self.mu_B
        self.z_star = np.zeros(model.d)
        self.z_star[0] = cfg.M + 3.0
        self._log_branch_norm = (math.log(2.0 * model.C_bar * self.mu_B)
                                 if model.C_bar > 0 and self.mu_B > 0 else None)
        self._theta_nodes = None
        self._u_m = None
        mean_jumps = self.lambda_m * cfg.t
        budget = self.d * (mean_jumps + 6.0 * math.sqrt(mean_jumps) + 1.0)
        if budget > MAX_COORDS:
            raise CoordinateBudgetExceeded(
                f"expected coordinate load {budget:.1f} exceeds the dense cap "
                f"{MAX_COORDS}; reduce M, t or the jump rate")

    # -- mixture density ----------------------------------------------------

    def _theta_quadrature(self):
        if self._theta_nodes is None:
            if self.d == 1:
                zs, ws = _gl_panels(-self.R, self.R, panel_width=1.0, nodes=8)
                wh = ws * np.array([self.model.h_radial(abs(z)) for z in zs])
                self._theta_nodes = ([zs], wh)
            elif self.d == 2:
                zs, ws = _gl_panels(-self.R, self.R, panel_width=1.0, nodes=8)
                zx, zy = np.meshgrid(zs, zs, indexing="ij")
                wx, wy = np.meshgrid(ws, ws, indexing="ij")
                mask = (zx ** 2 + zy ** 2) < self.R ** 2
                zx, zy, w2 = zx[mask], zy[mask], (wx * wy)[mask]
                rr = np.sqrt(zx ** 2 + zy ** 2)
                wh = w2 * np.array([self.model.h_radial(r) for r in rr])
                self._theta_nodes = ([zx, zy], wh)
            else:
                raise QuadratureFailure(
                    "fixed-node theta quadrature implemented for d <= 2; "
                    "declare gamma_ball_integral for higher dimension")
        return self._theta_nodes

    def theta(self, x):
        """theta_{M,gamma}(x) in [1/2, 1]; differentiable through fixed nodes.

        Batch-transparent: if the state components are batch jets, the nodes
        broadcast along a fresh trailing axis that is summed out again.
        """
        if self.model.C_bar <= 0 or self.mu_B <= 0:
            raise QuadratureFailure("theta undefined for a model with no jump part")
        inv_denom = 1.0 / (2.0 * self.model.C_bar * self.mu_B)
        if self.model.gamma_ball_integral is not None:
            integral = self.model.gamma_ball_integral(x, self.R)
        else:
            nodes, wh = self._theta_quadrature()
            xq = [c.batch_expand() if isinstance(c, Jet) else c for c in x]
            g = self.model.gamma(list(nodes), xq)
            if isinstance(g, Jet):
                integral = (g * wh).batch_sum(-1)
            else:
                integral = np.sum(np.asarray(g) * wh, axis=-1)
        return 1.0 - integral * inv_denom

    def q_logdensity(self, z, x):
        """ln q_M(z, x) on the active branch; OutsideSupport between the branches."""
        zv = np.array([float(np.asarray(jm.value_of(c))) for c in z])
        r = float(np.linalg.norm(zv))
        if r < self.R and self.model.h_radial(r) > 0.0:
            if self._log_branch_norm is None:
                raise OutsideSupport("jump branch empty for a model with no jumps")
            g = self.model.gamma(z, x)
            gv = float(np.asarray(jm.value_of(g)))
            if gv <= 0.0:
                raise DegenerateDensity("jump accepted where gamma vanishes")
            lp = jm.log(g) - self._log_branch_norm
            if self.model.log_h is not None:
                lp = lp + self.model.log_h(z)
            return lp
        wv = zv - self.z_star
        if float(np.linalg.norm(wv)) < 1.0:
            w = [c - s for c, s in zip(z, self.z_star)]
            return bump_logdensity(w, self.d) + jm.log(self.theta(x))
        raise OutsideSupport(f"amplitude {zv} in neither branch support")

    def sample_jump(self, xval, rng):
        """Draw from q_M(., x): thinning against Unif[0, 2 C_bar], ghosts to the bump."""
        if self.model.sample_base is None:
            raise SamplerFailure("model declares no base sampler for h | B_R")
        z = np.asarray(self.model.sample_base(rng, self.R), dtype=float)
        u = rng.uniform(0.0, 2.0 * self.model.C_bar)
        g = float(np.asarray(self.model.gamma(list(z), list(xval))))
        if u < g:
            return z, False
        return self.z_star + _sample_bump(rng, self.d), True

    # -- deterministic flow ---------------------------------------------------

    def flow(self, x, dt):
        """Classical RK4 with fixed step over one inter-jump interval."""
        if self.model.drift is None or dt <= 0.0:
            return list(x)
        h_max = self.cfg.step()
        m = max(1, int(math.ceil(dt / h_max)))
        h = dt / m
        g = self.model.drift
        for _ in range(m):
            k1 = g(x)
            k2 = g([x[r] + (0.5 * h) * k1[r] for r in range(self.d)])
            k3 = g([x[r] + (0.5 * h) * k2[r] for r in range(self.d)])
            k4 = g([x[r] + h * k3[r] for r in range(self.d)])
            x = [x[r] + (h / 6.0) * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
                 for r in range(self.d)]
        return x

    # -- path simulation ------------------------------------------------------

    def simulate(self, rng, value_only=False):
        """One path; the same draw sequence feeds the jet and value-only programs."""
        model, cfg, d = self.model, self.cfg, self.d
        J = int(rng.poisson(self.lambda_m * cfg.t)) if self.lambda_m > 0 else 0
        n = d * (J + 1)
        if n > MAX_COORDS:
            raise CoordinateBudgetExceeded(f"path needs {n} coordinates (cap {MAX_COORDS})")
        times = np.sort(rng.uniform(0.0, cfg.t, J))
        K = cfg.jet_order
        lift = not value_only

        if lift:
            x = [Jet.constant(model.x0[r], n, K) for r in range(d)]
        else:
            x = [float(model.x0[r]) for r in range(d)]

        amplitudes, states_pre, block_jets = [], [], []
        ghosts = np.zeros(J, dtype=bool)
        zvals = np.zeros((J, d))
        xvals_pre = np.zeros((J, d))
        prev = 0.0
        for k in range(1, J + 1):
            x = self.flow(x, times[k - 1] - prev)
            prev = times[k - 1]
            xval = np.array([float(np.asarray(jm.value_of(c))) for c in x])
            z, ghost = self.sample_jump(xval, rng)
            ghosts[k - 1] = ghost
            zvals[k - 1] = z
            xvals_pre[k - 1] = xval
            states_pre.append(list(x))
            if lift:
                zj = [Jet.coordinate(z[r], d * k + r, n, K) for r in range(d)]
            else:
                zj = [float(z[r]) for r in range(d)]
            amplitudes.append(zj)
            if ghost:
                if lift:
                    block_jets.append(Jet.constant(0.0, n, K))
                continue
            # the flat branches of the mollifier are exact constants, so the
            # common all-inside case skips the multiply entirely
            r_z = float(np.linalg.norm(z))
            if r_z >= cfg.M + 1.0:
                if lift:
                    block_jets.append(Jet.constant(0.0, n, K))
                continue
            phi = None if r_z <= cfg.M - 1.0 else \
                (mollified_indicator(zj, cfg.M) if lift else float(mollified_indicator(z, cfg.M)))
            if lift:
                block_jets.append(Jet.constant(1.0, n, K) if phi is None else phi)
            cm = model.c(zj, x)
            if phi is None:
                x = [x[r] + cm[r] for r in range(d)]
            else:
                x = [x[r] + cm[r] * phi for r in range(d)]
        x = self.flow(x, cfg.t - prev)

        delta_values = rng.standard_normal(d)
        if lift:
            delta = [Jet.coordinate(delta_values[r], r, n, K) for r in range(d)]
            # everything downstream differentiates the weights at most K-1 times
            weights = WeightField.from_blocks(d, block_jets, n, max(K - 1, 0))
        else:
            delta = [float(v) for v in delta_values]
            weights = None

        return PathRecord(
            t=cfg.t, d=d, n=n, order=K, jump_count=J, times=times,
            amplitudes=amplitudes, amplitude_values=zvals, ghost=ghosts,
            delta=delta, delta_values=delta_values,
            states_pre=states_pre, state_values_pre=xvals_pre,
            state_t=list(x), weights=weights, lambda_m=self.lambda_m)

    # -- density, regularisation ---------------------------------------------

    def _amplitude_batch(self, path, idx, K):
        """Coordinate jets of the selected jumps stacked into batch jets, per component."""
        d, n = path.d, path.n
        m = len(idx)
        out = []
        for r in range(d):
            terms = [np.ascontiguousarray(path.amplitude_values[idx, r])]
            if K >= 1:
                g = np.zeros((m, n))
                g[np.arange(m), d * (idx + 1) + r] = 1.0
                terms.append(g)
            for k in range(2, K + 1):
                terms.append(np.zeros((m,) + (n,) * k))
            out.append(Jet(n, terms))
        return out

    def log_density(self, path, order=None):
        """ln p of all coordinates: mixture terms plus the standard normal block.

        Jump terms are evaluated in two vectorised batches (accepted, ghost)
        using the recorded branch flags.  The default order is one below the
        path's jet order: the divergence differentiates ln p exactly once per
        level, so nothing downstream ever needs the full order.
        """
        if path.d != self.d:
            raise ValueError("path/model dimension mismatch")
        d = self.d
        K = max(path.order - 1, 1) if order is None else order
        delta = [c.truncate(K) for c in path.delta]
        gauss = delta[0] * delta[0]
        for c in delta[1:]:
            gauss = gauss + c * c
        lp = -0.5 * gauss - 0.5 * d * LOG_2PI
        ng = np.flatnonzero(~path.ghost)
        gi = np.flatnonzero(path.ghost)
        if ng.size:
            z_b = self._amplitude_batch(path, ng, K)
            x_b = [Jet.stack([path.states_pre[k][r].truncate(K) for k in ng])
                   for r in range(d)]
            g = self.model.gamma(z_b, x_b)
            if not np.all(np.asarray(jm.value_of(g)) > 0.0):
                raise DegenerateDensity("jump accepted where gamma vanishes")
            term = jm.log(g) - self._log_branch_norm
            if self.model.log_h is not None:
                term = term + self.model.log_h(z_b)
            lp = lp + term.batch_sum()
        if gi.size:
            z_b = self._amplitude_batch(path, gi, K)
            w = [z_b[r] - self.z_star[r] for r in range(d)]
            s = w[0] * w[0]
            for c in w[1:]:
                s = s + c * c
            bump = -(1.0 - s).reciprocal() - _bump_lognorm(d)
            x_b = [Jet.stack([path.states_pre[k][r].truncate(K) for k in gi])
                   for r in range(d)]
            term = bump + jm.log(self.theta(x_b))
            lp = lp + term.batch_sum()
        if not np.isfinite(float(np.asarray(lp.value))):
            raise DegenerateDensity("ln p not finite on a sampled path")
        return lp

    def u_m(self):
        """Regularisation variance t * int_{B_{M-1}^c} c_low^2 gamma_low dmu."""
        if self._u_m is None:
            m = self.model
            prof = lambda r: m.c_low(r) ** 2 * m.gamma_low(r) * m.h_radial(r)
            self._u_m = self.cfg.t * radial_tail_integral(prof, self.cfg.M - 1.0, self.d)
        return self._u_m

    def regularization_variance(self):
        if self.model.reg_variance_override is not None:
            return float(self.model.reg_variance_override)
        return self.u_m()

    def regularize(self, path, variance=None):
        """F_M = X_t + sqrt(U) Delta as a jet vector over all coordinates."""
        if variance is None:
            variance = self.regularization_variance()
        if variance < 0:
            raise ValueError("variance must be >= 0")
        if variance == 0.0:
            return list(path.state_t)
        s = math.sqrt(variance)
        return [path.state_t[r] + s * path.delta[r] for r in range(self.d)]

    def truncation_error(self, M=None, t=None):
        return truncation_error(self.model,
                                self.cfg.M if M is None else M,
                                self.cfg.t if t is None else t)

    # -- tangent flows ---------------------------------------------------------

    def _drift_jacobian(self, xval):
        xj = [Jet.coordinate(xval[r], r, self.d, 1) for r in range(self.d)]
        g = self.model.drift(xj)
        return np.array([[g[r].terms[1][s] for s in range(self.d)] for r in range(self.d)])

    def _cm_jacobians(self, zval, xval):
        """(grad_x c_M, grad_z c_M) at a jump, by order-1 jets in each slot."""
        d = self.d
        phi_val = float(mollified_indicator(np.asarray(zval), self.cfg.M))
        xj = [Jet.coordinate(xval[r], r, d, 1) for r in range(d)]
        cm_x = self.model.c([float(z) for z in zval], xj)
        Ax = phi_val * np.array([[cm_x[r].terms[1][s] for s in range(d)] for r in range(d)])
        zj = [Jet.coordinate(zval[r], r, d, 1) for r in range(d)]
        phi_j = mollified_indicator(zj, self.cfg.M)
        cm_z = [c * phi_j for c in self.model.c(zj, [float(v) for v in xval])]
        Az = np.array([[cm_z[r].terms[1][s] for s in range(d)] for r in range(d)])
        return Ax, Az

    def tangent_flows(self, path):
        """Y and its inverse along the path, propagated with the same RK4 grid."""
        d = self.d
        x = np.array(self.model.x0, dtype=float)
        Y = np.eye(d)
        Yh = np.eye(d)
        Y_at, Yh_at, grads = [], [], []

        def flow_to(x, Y, Yh, dt):
            if self.model.drift is None or dt <= 0:
                return x, Y, Yh
            m = max(1, int(math.ceil(dt / self.cfg.step())))
            h = dt / m
            for _ in range(m):
                def rhs(state):
                    xx, YY, YYh = state
                    xs = [float(v) for v in xx]
                    gv = np.array([float(c) for c in self.model.drift(xs)])
                    Jg = self._drift_jacobian(xx)
                    return gv, Jg @ YY, -YYh @ Jg
                s0 = (x, Y, Yh)
                k1 = rhs(s0)
                k2 = rhs(tuple(s0[i] + 0.5 * h * k1[i] for i in range(3)))
                k3 = rhs(tuple(s0[i] + 0.5 * h * k2[i] for i in range(3)))
                k4 = rhs(tuple(s0[i] + h * k3[i] for i in range(3)))
                x, Y, Yh = tuple(
                    s0[i] + (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
                    for i in range(3))
            return x, Y, Yh

        prev = 0.0
        for k in range(path.jump_count):
            x, Y, Yh = flow_to(x, Y, Yh, path.times[k] - prev)
            prev = path.times[k]
            if path.ghost[k]:
                grads.append(None)
            else:
                z = path.amplitude_values[k]
                Ax, Az = self._cm_jacobians(z, x)
                Mj = np.eye(d) + Ax
                if abs(np.linalg.det(Mj)) < 1e-12:
                    raise NonInvertibleJump("I + grad_x c_M singular at a jump")
                Y = Mj @ Y
                Yh = Yh @ np.linalg.inv(Mj)
                phi_val = float(mollified_indicator(z, self.cfg.M))
                cv = self.model.c(list(z), [float(v) for v in x])
                x = x + phi_val * np.array([float(c) for c in cv])
                grads.append(Az)
            Y_at.append(Y.copy())
            Yh_at.append(Yh.copy())
        x, Y, Yh = flow_to(x, Y, Yh, path.t - prev)
        return FlowMatrices(Y_at, Yh_at, Y, Yh, grads)

    def ad_flow_gap(self, path, flows=None):
        """Max gap between jet-propagated dX_t/dZ_k and the tangent-flow product."""
        if flows is None:
            flows = self.tangent_flows(path)
        d = self.d
        gap = 0.0
        for k in range(path.jump_count):
            block = slice(d * (k + 1), d * (k + 2))
            ad = np.array([np.asarray(path.state_t[r].terms[1])[block]
                           for r in range(d)])          # (r', r)
            if path.ghost[k]:
                gap = max(gap, float(np.max(np.abs(ad))))
                continue
            ref = flows.Y_t @ flows.Yhat_at_jumps[k] @ flows.grad_z_cm[k]
            gap = max(gap, float(np.max(np.abs(ad - ref))))
        return gap, flows.inverse_gap()


# ---------------------------------------------------------------------------
# shared-randomness truncation coupling (value level, rejection form)
# ---------------------------------------------------------------------------

def coupled_truncation_gap(model, cfg, M_star, n_paths, seed):
    """Mean |X^M_t - X^{M*}_t| under one driving Poisson stream (M_star > M)."""
    from .estimators import path_rng

    if M_star <= cfg.M:
        raise ValueError("M_star must exceed M")
    sim_hi = JumpSdeSimulator(model, replace(cfg, M=M_star))
    R_hi = M_star + 1.0
    lam = 2.0 * model.C_bar * model.mu_of_ball(R_hi)
    gaps = np.zeros(n_paths)
    for i in range(n_paths):
        rng = path_rng(seed, i)
        J = int(rng.poisson(lam * cfg.t))
        times = np.sort(rng.uniform(0.0, cfg.t, J))
        x_lo = [float(v) for v in model.x0]
        x_hi = [float(v) for v in model.x0]
        prev = 0.0
        for k in range(J):
            dt = times[k] - prev
            prev = times[k]
            x_lo = sim_hi.flow(x_lo, dt)
            x_hi = sim_hi.flow(x_hi, dt)
            z = np.asarray(model.sample_base(rng, R_hi), dtype=float)
            u = rng.uniform(0.0, 2.0 * model.C_bar)
            for x, M in ((x_lo, cfg.M), (x_hi, M_star)):
                g = float(np.asarray(model.gamma(list(z), list(x))))
                if u < g:
                    phi = float(mollified_indicator(z, M))
                    if phi > 0.0:
                        cv = model.c(list(z), x)
                        for r in range(model.d):
                            x[r] = x[r] + phi * float(cv[r])
        x_lo = sim_hi.flow(x_lo, cfg.t - prev)
        x_hi = sim_hi.flow(x_hi, cfg.t - prev)
        gaps[i] = math.sqrt(sum((a - b) ** 2 for a, b in zip(x_lo, x_hi)))
    return float(np.mean(gaps)), gaps


# ---------------------------------------------------------------------------
# spec-level convenience wrappers
# ---------------------------------------------------------------------------

def theta_m(x, model, cfg):
    return JumpSdeSimulator(model, cfg).theta(x)


def q_m_logdensity(z, x, model, cfg):
    return JumpSdeSimulator(model, cfg).q_logdensity(z, x)


def sample_jump(xval, model, cfg, rng):
    return JumpSdeSimulator(model, cfg).sample_jump(xval, rng)


def simulate_path(model, cfg, seed):
    return JumpSdeSimulator(model, cfg).simulate(np.random.default_rng(seed))


def regularize(path, variance, model, cfg):
    return JumpSdeSimulator(model, cfg).regularize(path, variance)


def u_m(model, cfg):
    return JumpSdeSimulator(model, cfg).u_m()


def path_log_density(path, model, cfg):
    return JumpSdeSimulator(model, cfg).log_density(path)


def tangent_flows(path, model, cfg):
    return JumpSdeSimulator(model, cfg).tangent_flows(path)


def truncation_error(model, M, t):
    """Coupling envelope eps_M = t e^{Ct} int_{|z|>M} c_bar gamma_bar dmu."""
    tail = radial_tail_integral(
        lambda r: model.c_bar(r) * model.gamma_bar(r) * model.h_radial(r), M, model.d)
    return t * math.exp(model.lipschitz_aggregate() * t) * tail

"""Operator suite on one realised path: D, sigma(F), gamma(F), delta, L and the
recursive integration-by-parts weights H_beta^q.

Everything here is per-path algebra on jets; expectations live in estimators.
"""

from dataclasses import dataclass, field

import numpy as np

from .derivatives import (WeightField, scalar_product, sobolev_norm,
                          sobolev_seminorm, weighted_derivative)
from .errors import DegenerateDensity, InsufficientOrder, Singular
from .jets import Jet

SINGULARITY_RTOL = 1e-12


def gradient(F, weights):
    """DF per component: D_{i}F = pi_i * d/dv_i F, a batch jet over coordinates."""
    if isinstance(F, Jet):
        return weighted_derivative(F, weights, 1)
    return [weighted_derivative(c, weights, 1) for c in F]


@dataclass
class CovarianceMatrix:
    sigma: np.ndarray          # d x d values
    det: float
    min_eigenvalue: float
    jets: list                 # d x d nested list of scalar jets
    grads: list                # DF^r batch jets, reusable downstream

    @property
    def d(self):
        return self.sigma.shape[0]

    def trace(self):
        return float(np.trace(self.sigma))

    def singularity_threshold(self):
        d = self.d
        return SINGULARITY_RTOL * (self.trace() / d) ** d


def covariance(F, weights):
    """Malliavin covariance sigma^{rr'} = <DF^r, DF^{r'}>_J with det and min eigenvalue."""
    comps = [F] if isinstance(F, Jet) else list(F)
    d = len(comps)
    grads = [weighted_derivative(c, weights, 1) for c in comps]
    jets = [[None] * d for _ in range(d)]
    vals = np.empty((d, d))
    for r in range(d):
        for s in range(r, d):
            j = scalar_product(grads[r], grads[s])
            jets[r][s] = j
            jets[s][r] = j
            vals[r, s] = vals[s, r] = float(j.value)
    eig = np.linalg.eigvalsh(vals)
    return CovarianceMatrix(vals, float(np.linalg.det(vals)), float(eig[0]), jets, grads)


def _det_jet(m):
    d = len(m)
    if d == 1:
        return m[0][0]
    if d == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if d == 3:
        return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
    raise NotImplementedError("jet determinants implemented for d <= 3")


def _adjugate_jet(m):
    d = len(m)
    if d == 1:
        one = Jet.constant(1.0, m[0][0].n, m[0][0].order)
        return [[one]]
    if d == 2:
        return [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
    if d == 3:
        def c(i, j):
            rows = [r for r in range(3) if r != i]
            cols = [s for s in range(3) if s != j]
            minor = (m[rows[0]][cols[0]] * m[rows[1]][cols[1]]
                     - m[rows[0]][cols[1]] * m[rows[1]][cols[0]])
            return minor if (i + j) % 2 == 0 else -minor
        return [[c(j, i) for j in range(3)] for i in range(3)]
    raise NotImplementedError("jet adjugates implemented for d <= 3")


@dataclass
class GammaMatrix:
    jets: list
    values: np.ndarray
    det_sigma: float


def inverse_covariance(cov):
    """gamma(F) = sigma^{-1}(F) as jets via adjugate/determinant; Singular below threshold."""
    thr = cov.singularity_threshold()
    if not np.isfinite(cov.det) or cov.det <= thr:
        raise Singular(f"det sigma = {cov.det:.3e} <= threshold {thr:.3e}")
    det = _det_jet(cov.jets)
    adj = _adjugate_jet(cov.jets)
    inv_det = det.reciprocal()
    jets = [[adj[r][s] * inv_det for s in range(cov.d)] for r in range(cov.d)]
    values = np.array([[float(jets[r][s].value) for s in range(cov.d)] for r in range(cov.d)])
    return GammaMatrix(jets, values, cov.det)


def divergence(U, weights, log_density):
    """delta(U) = -sum_i ( d/dv_i(pi_i U_i) + U_i pi_i d/dv_i ln p ), returned as a jet."""
    if log_density.order < 1 or U.order < 1:
        raise InsufficientOrder("divergence needs one derivative order of U and ln p")
    dW = weights.apply(U).diag_partial()
    dlnp = log_density.raw_partial_stack()
    inner = dW + weights.apply(U * dlnp)
    return -inner.batch_sum()


def ou_operator(F, weights, log_density):
    """L(F) = delta(DF), componentwise."""
    if isinstance(F, Jet):
        return divergence(gradient(F, weights), weights, log_density)
    return [divergence(g, weights, log_density) for g in gradient(F, weights)]


@dataclass
class IbpWeight:
    beta: tuple
    value: float
    jet: Jet
    lgamma_values: list = field(default_factory=list)


def _gamma_df_dirs(gamma, grads):
    """(gamma(F) DF)^r = sum_{r'} gamma^{r',r} DF^{r'} for each r."""
    d = len(grads)
    out = []
    for r in range(d):
        acc = gamma.jets[0][r] * grads[0]
        for rp in range(1, d):
            acc = acc + gamma.jets[rp][r] * grads[rp]
        out.append(acc)
    return out


def ibp_weight(F, G, beta, weights, log_density):
    """H_beta^q(F, G) by the recursion H_beta = H_{beta_1}(F, H_{(beta_2..)}(F, G)).

    F is a list of jets (or one jet); G a jet or scalar; beta uses 1-based
    component labels as in the multi-index convention.
    """
    comps = [F] if isinstance(F, Jet) else list(F)
    q = len(beta)
    for c in comps:
        c.require_order(q + 1)
    cov = covariance(comps, weights)
    gamma = inverse_covariance(cov)
    dirs = _gamma_df_dirs(gamma, cov.grads)
    n, order = comps[0].n, comps[0].order
    H = G if isinstance(G, Jet) else Jet.constant(float(G), n, order)
    for b in reversed(beta):
        r = b - 1
        if not 0 <= r < len(comps):
            raise ValueError(f"beta entry {b} outside 1..{len(comps)}")
        H = divergence(H * dirs[r], weights, log_density)
    return IbpWeight(tuple(beta), float(H.value), H)


def ibp_weight_expanded(F, G, beta, weights, log_density):
    """Same weight via the expanded form H_r(F,G) = G L^gamma_r(F) - <DG, (gamma DF)^r>.

    Kept as an independent route for the recursion-consistency checks.
    """
    comps = [F] if isinstance(F, Jet) else list(F)
    cov = covariance(comps, weights)
    gamma = inverse_covariance(cov)
    dirs = _gamma_df_dirs(gamma, cov.grads)
    lgam = [divergence(d_r, weights, log_density) for d_r in dirs]
    n, order = comps[0].n, comps[0].order
    H = G if isinstance(G, Jet) else Jet.constant(float(G), n, order)
    for b in reversed(beta):
        r = b - 1
        DG = weighted_derivative(H, weights, 1)
        H = H * lgam[r] - scalar_product(DG, dirs[r])
    return IbpWeight(tuple(beta), float(H.value), H,
                     lgamma_values=[float(l.value) for l in lgam])


def bound_report(F, G, beta, weights, log_density):
    """|H_beta^q| against the structural factor of the H^q bound (constant left free).

    Also reports the gamma-norm factor |gamma(F)|_l vs (1+|F|_{1,l+1}^{2d(l+1)})/det^{l+1}
    at l = 0.  Nothing is asserted; the constants are unspecified.
    """
    comps = [F] if isinstance(F, Jet) else list(F)
    d = len(comps)
    q = len(beta)
    w = ibp_weight(F, G, beta, weights, log_density)
    cov = covariance(comps, weights)
    gamma = inverse_covariance(cov)
    det = abs(cov.det)

    norm_G = sobolev_norm(G, weights, q) if isinstance(G, Jet) else abs(float(G))
    norm_F = sobolev_norm(comps, weights, q + 1)
    LF = ou_operator(comps, weights, log_density)
    norm_LF = sobolev_norm(LF, weights, q - 1) if q >= 1 else 0.0

    factor = (norm_G * (1.0 + norm_F) ** ((6 * d + 1) * q)
              * (1.0 + norm_LF ** q) / det ** (3 * q - 1))

    gamma_jets_flat = [gamma.jets[r][s] for r in range(d) for s in range(d)]
    gnorm = sobolev_norm(gamma_jets_flat, weights, 0)
    gfactor = (1.0 + sobolev_seminorm(comps, weights, 1) ** (2 * d)) / det

    return {
        "beta": tuple(beta),
        "H": w.value,
        "abs_H": abs(w.value),
        "factor": factor,
        "implied_constant": abs(w.value) / factor if factor > 0 else np.inf,
        "det_sigma": det,
        "norm_G_q": norm_G,
        "norm_F_q1": norm_F,
        "norm_LF_qm1": norm_LF,
        "gamma_norm_l0": gnorm,
        "gamma_factor_l0": gfactor,
        "gamma_implied_l0": gnorm / gfactor if gfactor > 0 else np.inf,
    }


def check_positive_density(log_density_value):
    if not np.isfinite(log_density_value):
        raise DegenerateDensity("ln p evaluated where p vanishes")

"""Weighted derivative tensors and Sobolev norms of simple functionals.

The weighted derivative of a functional multiplies each raw partial by the
localisation weight of that coordinate, D_i F = pi_i * d/dv_i F, and iterates:
D^k applies the newest index last, so the resulting tensors are generally not
symmetric when the weights themselves depend on the coordinates.
"""

import numpy as np

from .errors import InsufficientOrder
from .jets import MAX_COORDS, MAX_ORDER, Jet


class WeightField:
    """Per-coordinate smooth weights pi_i, stored stacked as one batch jet over i.

    Most sampled paths land in the flat branches of the mollifier, where every
    weight is an exact constant; ``smooth`` records whether any coordinate
    carries a non-trivial weight jet, and ``apply`` exploits the constant case.
    """

    def __init__(self, stacked, smooth=None):
        self.stacked = stacked
        self.n = stacked.n
        if smooth is None:
            smooth = stacked.order >= 1 and bool(np.any(stacked.terms[1]))
        self.smooth = smooth

    @classmethod
    def ones(cls, n, order):
        return cls(Jet.constant(np.ones(n), n, order), smooth=False)

    @classmethod
    def from_coordinate_jets(cls, jets):
        """One scalar jet per coordinate (gaussian weights are constant 1)."""
        return cls(Jet.stack(jets))

    @classmethod
    def from_blocks(cls, d, block_jets, n, order):
        """Gaussian block gets weight 1; jump block k >= 1 shares one jet across components."""
        rows = [Jet.constant(1.0, n, order)] * d
        for bj in block_jets:
            rows.extend([bj] * d)
        return cls(Jet.stack([r.truncate(order) for r in rows]))

    def coordinate_jet(self, i):
        return self.stacked.batch_get(i)

    def apply(self, G):
        """pi * G for a batch jet whose last batch axis runs over coordinates."""
        if not self.smooth:
            return G.scale_rows(self.stacked.terms[0])
        return self.stacked * G

    @property
    def values(self):
        return self.stacked.value


def _check_budget(n, k):
    if n > MAX_COORDS or k > MAX_ORDER:
        raise InsufficientOrder(
            f"dense tensors limited to {MAX_COORDS} coordinates and order {MAX_ORDER}; "
            f"got n={n}, k={k}")


def weighted_derivative(F, weights, k):
    """Apply the weighted derivative k times; returns a batch jet with k extra axes.

    The trailing batch axes index (alpha_1, ..., alpha_k) left to right.
    """
    _check_budget(F.n, k)
    if F.order < k:
        raise InsufficientOrder(f"jet order {F.order} < requested derivative order {k}")
    if k > 0 and weights.stacked.order < k - 1:
        raise InsufficientOrder(f"weight field order {weights.stacked.order} < {k - 1}")
    G = F
    for _ in range(k):
        G = weights.apply(G.raw_partial_stack())
    return G


class DerivTensor:
    """Value tensor of D^k F over ordered multi-indices; not symmetric in general."""

    def __init__(self, order, values, n):
        self.order = order
        self.values = values
        self.n = n

    def entry(self, alpha):
        return self.values[tuple(alpha)]

    def frobenius(self):
        return float(np.sqrt(np.sum(self.values ** 2)))


def derive_tensor(F, weights, k):
    G = weighted_derivative(F, weights, k)
    return DerivTensor(k, G.terms[0], F.n)


def _norm_terms(weights, l, components):
    """|D^k .| for k = 0..l, summed over components at fixed k (Frobenius in the indices)."""
    out = []
    for k in range(l + 1):
        if k == 0:
            sq = sum(np.sum(np.asarray(c.value) ** 2) for c in components)
        else:
            sq = 0.0
            for c in components:
                sq += np.sum(weighted_derivative(c, weights, k).terms[0] ** 2)
        out.append(np.sqrt(sq))
    return out


def sobolev_norm(F, weights, l):
    """|F|_l = sum_{k<=l} |D^k F|; vectors contribute the sum of component norms."""
    if isinstance(F, Jet):
        comps = [F]
    else:
        comps = list(F)
    for c in comps:
        if c.order < l:
            raise InsufficientOrder(f"jet order {c.order} < norm level {l}")
    if isinstance(F, Jet):
        return float(sum(_norm_terms(weights, l, [F])))
    # component norms use per-component Frobenius at every order, then sum
    return float(sum(sum(_norm_terms(weights, l, [c])) for c in comps))


def sobolev_seminorm(F, weights, l):
    """|F|_{1,l}: the gradient part only (orders 1..l)."""
    comps = [F] if isinstance(F, Jet) else list(F)
    tot = 0.0
    for c in comps:
        if c.order < l:
            raise InsufficientOrder(f"jet order {c.order} < norm level {l}")
        tot += sum(_norm_terms(weights, l, [c])[1:])
    return float(tot)


def process_norm(U, weights, l):
    """|U|_l for a simple process (batch jet over coordinates)."""
    if U.order < l:
        raise InsufficientOrder(f"jet order {U.order} < norm level {l}")
    out = 0.0
    G = U
    out += np.sqrt(np.sum(np.asarray(G.terms[0]) ** 2))
    for _ in range(l):
        G = weights.apply(G.raw_partial_stack())
        out += np.sqrt(np.sum(G.terms[0] ** 2))
    return float(out)


def scalar_product(U, V):
    """<U, V>_J = sum_i U_i V_i as a jet."""
    return (U * V).batch_sum()


def norm_inequality_margin(F, G, weights, l):
    """LHS/RHS/margin for the four product-scalar norm inequalities at level l.

    Uses U = DF, V = DG for the process form and H = F for the triple form.
    All four must come out with margin >= 0.
    """
    for j, need in ((F, l + 1), (G, l + 1)):
        if j.order < need:
            raise InsufficientOrder(f"need order {need} for level {l}")
    nf = [sobolev_norm(F, weights, k) for k in range(l + 1)]
    ng = [sobolev_norm(G, weights, k) for k in range(l + 1)]
    sf = [sobolev_seminorm(F, weights, k) for k in range(l + 2)]
    sg = [sobolev_seminorm(G, weights, k) for k in range(l + 2)]

    DF = weighted_derivative(F, weights, 1)
    DG = weighted_derivative(G, weights, 1)

    out = {}

    lhs = sobolev_norm(F * G, weights, l)
    rhs = 2.0 ** l * sum(nf[l1] * ng[l2]
                         for l1 in range(l + 1) for l2 in range(l + 1 - l1))
    out["prod"] = (lhs, rhs, rhs - lhs)

    lhs = sobolev_norm(scalar_product(DF, DG), weights, l)
    nu = [process_norm(DF, weights, k) for k in range(l + 1)]
    nv = [process_norm(DG, weights, k) for k in range(l + 1)]
    rhs = 2.0 ** l * sum(nu[l1] * nv[l2]
                         for l1 in range(l + 1) for l2 in range(l + 1 - l1))
    out["scalP"] = (lhs, rhs, rhs - lhs)

    rhs = 2.0 ** l * sum(sf[l1 + 1] * sg[l2 + 1]
                         for l1 in range(l + 1) for l2 in range(l + 1 - l1))
    out["scal1"] = (lhs, rhs, rhs - lhs)

    lhs3 = sobolev_norm(F * scalar_product(DF, DG), weights, l)
    rhs3 = 2.0 ** (2 * l) * sum(
        sf[l1 + 1] * sg[l2 + 1] * nf[l3]
        for l1 in range(l + 1)
        for l2 in range(l + 1 - l1)
        for l3 in range(l + 1 - l1 - l2))
    out["scal3"] = (lhs3, rhs3, rhs3 - lhs3)
    return out

"""Truncated multivariate Taylor arithmetic over the active random coordinates of a path.

A :class:`Jet` carries a value together with the symmetric raw partial-derivative
tensors of orders 1..K with respect to a fixed set of ``n`` coordinates.  Values may
be scalars or numpy arrays: every tensor has shape ``batch_shape + (n,)*k``, and all
arithmetic broadcasts over the batch axes.  That batch feature is what lets weight
fields, simple processes and quadrature rules run as single vectorised operations.

Jets are immutable after construction; never mutate ``terms`` in place.
"""

from functools import lru_cache
from itertools import combinations
from math import factorial

import numpy as np

from .errors import DomainError, InsufficientOrder

MAX_ORDER = 4
MAX_COORDS = 64


@lru_cache(maxsize=None)
def _split_perms(k, j):
    """Axis permutations for the Leibniz split of k raw axes into (j, k-j)."""
    perms = []
    for left in combinations(range(k), j):
        right = [t for t in range(k) if t not in left]
        src = [0] * k
        for i, t in enumerate(left):
            src[t] = i
        for i, t in enumerate(right):
            src[t] = j + i
        perms.append(tuple(src))
    return perms


def _set_partitions(elems):
    if not elems:
        yield []
        return
    head, rest = elems[0], elems[1:]
    for part in _set_partitions(rest):
        yield [(head,)] + part
        for i, block in enumerate(part):
            yield part[:i] + [(head,) + block] + part[i + 1:]


@lru_cache(maxsize=None)
def _partitions(k):
    """Set partitions of {0..k-1} as (block sizes, blocks, target->source permutation)."""
    out = []
    for part in _set_partitions(tuple(range(k))):
        blocks = sorted(tuple(sorted(b)) for b in part)
        src = [0] * k
        off = 0
        for block in blocks:
            for i, t in enumerate(block):
                src[t] = off + i
            off += len(block)
        out.append((tuple(len(b) for b in blocks), tuple(blocks), tuple(src)))
    return out


def _outer(a, pa, b, qb):
    """Outer product in the raw axes; batch axes broadcast."""
    if qb:
        a = a.reshape(a.shape + (1,) * qb)
    if pa:
        b = b.reshape(b.shape[: b.ndim - qb] + (1,) * pa + b.shape[b.ndim - qb:])
    return a * b


def _permute_raw(arr, k, perm):
    if perm == tuple(range(k)):
        return arr
    bnd = arr.ndim - k
    return np.transpose(arr, tuple(range(bnd)) + tuple(bnd + p for p in perm))


class Jet:
    __slots__ = ("n", "terms", "order")

    def __init__(self, n, terms):
        self.n = n
        self.terms = tuple(terms)
        self.order = len(self.terms) - 1

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value, n, order):
        value = np.asarray(value, dtype=float)
        terms = [value] + [np.zeros(value.shape + (n,) * k) for k in range(1, order + 1)]
        return cls(n, terms)

    @classmethod
    def coordinate(cls, value, index, n, order):
        """Identity jet of coordinate ``index``: first partial 1, all others 0."""
        if order < 0:
            raise InsufficientOrder("order must be >= 0")
        j = cls.constant(float(value), n, order)
        if order >= 1:
            g = j.terms[1].copy()
            g[index] = 1.0
            return cls(n, (j.terms[0], g) + j.terms[2:])
        return j

    @classmethod
    def coordinate_stack(cls, values, n, order):
        """Batch jet over all coordinates: value[i] with identity gradient."""
        values = np.asarray(values, dtype=float)
        terms = [values] + [np.zeros((n,) + (n,) * k) for k in range(1, order + 1)]
        if order >= 1:
            terms[1] = np.eye(n)
        return cls(n, terms)

    # -- inspection ---------------------------------------------------------

    @property
    def value(self):
        return self.terms[0]

    @property
    def batch_shape(self):
        return np.shape(self.terms[0])

    def partial(self, idx):
        """Raw symmetric partial for a multiset of coordinate indices."""
        idx = tuple(idx)
        if len(idx) > self.order:
            raise InsufficientOrder(f"order {self.order} jet has no order-{len(idx)} partials")
        return self.terms[len(idx)][(Ellipsis,) + idx]

    def partials_map(self, max_size=None):
        """Dict view {sorted multiset -> value}; only sensible for small n."""
        from itertools import combinations_with_replacement
        k_max = self.order if max_size is None else min(max_size, self.order)
        out = {}
        for k in range(1, k_max + 1):
            for idx in combinations_with_replacement(range(self.n), k):
                out[idx] = self.terms[k][(Ellipsis,) + idx]
        return out

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.n, self.terms[: order + 1])

    def require_order(self, order):
        if self.order < order:
            raise InsufficientOrder(f"need jet order >= {order}, have {self.order}")

    # -- batch manipulation -------------------------------------------------

    def raw_partial_stack(self):
        """All first raw partials as one extra trailing batch axis; order drops by 1."""
        self.require_order(1)
        return Jet(self.n, self.terms[1:])

    def raw_partial(self, i):
        """The jet of the raw partial with respect to coordinate ``i``."""
        self.require_order(1)
        bnd = np.ndim(self.terms[0])
        return Jet(self.n, [np.take(t, i, axis=bnd) for t in self.terms[1:]])

    def diag_partial(self):
        """For batch (..., n) jets: jet of d/dv_i applied to the i-th batch entry."""
        self.require_order(1)
        bnd = np.ndim(self.terms[0])
        out = []
        for t in self.terms[1:]:
            d = np.diagonal(t, axis1=bnd - 1, axis2=bnd)
            out.append(np.moveaxis(d, -1, bnd - 1))
        return Jet(self.n, out)

    def batch_sum(self, axis=-1):
        bnd = np.ndim(self.terms[0])
        ax = axis if axis >= 0 else bnd + axis
        return Jet(self.n, [np.sum(t, axis=ax) for t in self.terms])

    def batch_get(self, index):
        return Jet(self.n, [t[index] for t in self.terms])

    def batch_expand(self):
        """Insert a trailing batch axis of size 1 (for outer-product broadcasts)."""
        bnd = np.ndim(self.terms[0])
        out = []
        for k, t in enumerate(self.terms):
            t = np.asarray(t)
            out.append(t.reshape(t.shape[:bnd] + (1,) + t.shape[bnd:]))
        return Jet(self.n, out)

    def scale_rows(self, vec):
        """Multiply by a constant field indexed by the last batch axis."""
        vec = np.asarray(vec, dtype=float)
        return Jet(self.n, [t * vec.reshape(vec.shape + (1,) * k)
                            for k, t in enumerate(self.terms)])

    @classmethod
    def stack(cls, jets):
        """Stack scalar-batch jets into one batch jet along a new leading axis."""
        n = jets[0].n
        order = min(j.order for j in jets)
        terms = [np.stack([j.terms[k] for j in jets]) for k in range(order + 1)]
        return cls(n, terms)

    # -- arithmetic ---------------------------------------------------------

    def _binary_prep(self, other):
        if isinstance(other, Jet):
            if other.n != self.n:
                raise ValueError("jets over different coordinate sets")
            return other
        return None

    def __add__(self, other):
        o = self._binary_prep(other)
        if o is None:
            t0 = self.terms[0] + other
            if np.shape(t0) == self.batch_shape:
                return Jet(self.n, (t0,) + self.terms[1:])
            out = [t0]
            for k, t in enumerate(self.terms[1:], start=1):
                out.append(np.broadcast_to(t, np.shape(t0) + (self.n,) * k))
            return Jet(self.n, out)
        order = min(self.order, o.order)
        return Jet(self.n, [self.terms[k] + o.terms[k] for k in range(order + 1)])

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.n, [-t for t in self.terms])

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._binary_prep(other)
        if o is None:
            other = np.asarray(other, dtype=float)
            if other.ndim == 0:
                return Jet(self.n, [t * other for t in self.terms])
            return Jet(self.n, [_outer(other, 0, t, k) for k, t in enumerate(self.terms)])
        order = min(self.order, o.order)
        ft, gt = self.terms, o.terms
        if order <= 2:
            f0, g0 = ft[0], gt[0]
            out = [f0 * g0]
            if order >= 1:
                out.append(_outer(ft[1], 1, g0, 0) + _outer(f0, 0, gt[1], 1))
            if order >= 2:
                t = _outer(ft[1], 1, gt[1], 1)
                h2 = _outer(ft[2], 2, g0, 0) + _outer(f0, 0, gt[2], 2)
                h2 += t
                h2 += t.swapaxes(-1, -2)
                out.append(h2)
            return Jet(self.n, out)
        out = []
        for k in range(order + 1):
            acc = None
            for j in range(k + 1):
                base = _outer(ft[j], j, gt[k - j], k - j)
                for perm in _split_perms(k, j):
                    term = _permute_raw(base, k, perm)
                    acc = term.copy() if acc is None else acc + term
            out.append(acc)
        return Jet(self.n, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)):
            if p < 0:
                return self.reciprocal() ** (-p)
            k = int(p)
            if k == 0:
                return Jet.constant(np.ones(self.batch_shape), self.n, self.order)
            out = None
            acc = self
            while True:
                if k & 1:
                    out = acc if out is None else out * acc
                k >>= 1
                if not k:
                    return out
                acc = acc * acc
        return self.power(float(p))

    # -- composition --------------------------------------------------------

    def compose(self, coeffs):
        """Univariate composition from derivative values ``coeffs[j] = phi^(j)(value)``."""
        order = min(self.order, len(coeffs) - 1)
        ft = self.terms
        out = [np.asarray(coeffs[0], dtype=float) + np.zeros(self.batch_shape)]
        if order <= 2:
            if order >= 1:
                out.append(_outer(np.asarray(coeffs[1]), 0, ft[1], 1))
            if order >= 2:
                h2 = _outer(np.asarray(coeffs[1]), 0, ft[2], 2)
                h2 += _outer(np.asarray(coeffs[2]), 0, _outer(ft[1], 1, ft[1], 1), 2)
                out.append(h2)
            return Jet(self.n, out)
        for k in range(1, order + 1):
            acc = None
            for sizes, _blocks, perm in _partitions(k):
                prod = ft[sizes[0]]
                p = sizes[0]
                for s in sizes[1:]:
                    prod = _outer(prod, p, ft[s], s)
                    p += s
                term = _permute_raw(prod, k, perm)
                term = _outer(np.asarray(coeffs[len(sizes)], dtype=float), 0, term, k)
                acc = term.copy() if acc is None else acc + term
            out.append(acc)
        return Jet(self.n, out)

    def _value_checked(self, pred, what):
        v = self.terms[0]
        if np.ndim(v) == 0:
            if not pred(float(v)):
                raise DomainError(f"{what} evaluated outside domain")
            return v
        v = np.asarray(v)
        if not pred(v).all():
            raise DomainError(f"{what} evaluated outside domain")
        return v

    def exp(self):
        e = np.exp(self.terms[0])
        return self.compose([e] * (self.order + 1))

    def log(self):
        v = self._value_checked(lambda x: x > 0, "log")
        coeffs = [np.log(v)]
        for j in range(1, self.order + 1):
            coeffs.append((-1.0) ** (j - 1) * factorial(j - 1) / v ** j)
        return self.compose(coeffs)

    def reciprocal(self):
        v = self._value_checked(lambda x: x != 0, "1/x")
        coeffs = [1.0 / v]
        for j in range(1, self.order + 1):
            coeffs.append(coeffs[-1] * (-j) / v)
        return self.compose(coeffs)

    def sqrt(self):
        v = self._value_checked(lambda x: x > 0, "sqrt")
        coeffs = [np.sqrt(v)]
        for j in range(1, self.order + 1):
            coeffs.append(coeffs[-1] * (0.5 - (j - 1)) / v)
        return self.compose(coeffs)

    def power(self, p):
        v = self._value_checked(lambda x: x > 0, "x**p")
        coeffs = [v ** p]
        for j in range(1, self.order + 1):
            coeffs.append(coeffs[-1] * (p - (j - 1)) / v)
        return self.compose(coeffs)

    def sin(self):
        v = self.terms[0]
        cyc = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
        return self.compose([cyc[j % 4] for j in range(self.order + 1)])

    def cos(self):
        v = self.terms[0]
        cyc = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
        return self.compose([cyc[j % 4] for j in range(self.order + 1)])

    def tanh(self):
        v = np.tanh(self.terms[0])
        coeffs = [v, 1 - v ** 2]
        if self.order >= 2:
            coeffs.append(-2 * v * (1 - v ** 2))
        if self.order >= 3:
            coeffs.append((6 * v ** 2 - 2) * (1 - v ** 2))
        if self.order >= 4:
            coeffs.append((16 * v - 24 * v ** 3) * (1 - v ** 2))
        return self.compose(coeffs[: self.order + 1])

    def abs(self):
        """Smooth branch of |x| away from 0 (value-sign based; exact off 0)."""
        v = np.asarray(self.terms[0])
        if np.any(v == 0):
            raise DomainError("|x| not differentiable at 0")
        if v.ndim == 0:
            return self if v > 0 else -self
        return self * np.sign(v)

    def __repr__(self):
        return f"Jet(n={self.n}, order={self.order}, value={self.terms[0]!r})"


# -- module-level math that also accepts plain numbers/arrays ----------------

def _dispatch(name, np_name=None):
    np_fn = getattr(np, np_name or name)

    def fn(x):
        if isinstance(x, Jet):
            return getattr(x, name)()
        return np_fn(x)

    fn.__name__ = name
    return fn


exp = _dispatch("exp")
log = _dispatch("log")
sqrt = _dispatch("sqrt")
sin = _dispatch("sin")
cos = _dispatch("cos")
tanh = _dispatch("tanh")


def jabs(x):
    if isinstance(x, Jet):
        return x.abs()
    return np.abs(x)


def value_of(x):
    return x.terms[0] if isinstance(x, Jet) else x


def jet_lift(value, index, n, order):
    """Identity jet of one coordinate (spec operation name)."""
    return Jet.coordinate(value, index, n, order)

"""Model coefficients, bound envelopes and the built-in presets.

A model bundles the coefficient functions c, gamma, g, h together with the
radial bound profiles used by the tail quadratures, plus optional closed forms
that keep the hot paths cheap.  All coefficient callables are polymorphic: the
arguments are length-d sequences whose entries are either plain numbers/arrays
or jets, and they must return the same kind.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from . import jets as jm
from .errors import ConfigError, QuadratureFailure


def sphere_area(d):
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def ball_volume(d):
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def radial_tail_integral(profile, r_from, d=1):
    """integral over {|z| > r_from} of profile(|z|) dz for a radial integrand."""
    s = sphere_area(d)
    val, err = quad(lambda r: profile(r) * r ** (d - 1), r_from, np.inf,
                    limit=200, epsabs=0.0, epsrel=1e-10)
    if not np.isfinite(val) or err > 1e-6 * abs(val) + 1e-13:
        raise QuadratureFailure(f"tail integral from {r_from} unreliable (err={err:.2e})")
    return s * val


def radial_ball_integral(profile, r_to, d=1, r_from=0.0):
    s = sphere_area(d)
    val, err = quad(lambda r: profile(r) * r ** (d - 1), r_from, r_to, limit=200)
    if not np.isfinite(val):
        raise QuadratureFailure("ball integral failed")
    return s * val


@dataclass
class ModelSpec:
    name: str
    d: int
    c: Optional[Callable]                 # c(z, x) -> vector
    gamma: Optional[Callable]             # gamma(z, x) -> scalar, in [0, C_bar]
    drift: Optional[Callable]             # g(x) -> vector
    log_h: Optional[Callable]             # ln h(z) on jets; None means h == 1
    h_radial: Callable                    # radial density profile of mu
    c_bar: Callable                       # radial, >= |c|
    c_low: Callable                       # radial, lower envelope of |grad_z c|
    gamma_bar: Callable                   # radial, >= gamma
    gamma_low: Callable                   # radial, <= gamma
    C_bar: float
    x0: np.ndarray
    lip_aggregate: Optional[float] = None
    mu_ball: Optional[Callable] = None            # closed-form mu(B_R)
    gamma_ball_integral: Optional[Callable] = None  # (x, R) -> int_{B_R} gamma dmu
    sample_base: Optional[Callable] = None        # (rng, R) -> one draw from h|B_R
    h_support_rmin: float = 0.0
    reg_variance_override: Optional[float] = None
    regularity: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    default_M: float = 5.0
    default_t: float = 1.0

    def mu_of_ball(self, R):
        if self.mu_ball is not None:
            return self.mu_ball(R)
        return radial_ball_integral(self.h_radial, R, self.d, self.h_support_rmin)

    def lipschitz_aggregate(self):
        """Gronwall constant: int c_bar gamma_bar dmu + gamma_x1 int c_bar dmu + Lip(g)."""
        if self.lip_aggregate is not None:
            return self.lip_aggregate
        cg = radial_tail_integral(
            lambda r: self.c_bar(r) * self.gamma_bar(r) * self.h_radial(r), 0.0, self.d)
        cint = radial_tail_integral(
            lambda r: self.c_bar(r) * self.h_radial(r), 0.0, self.d)
        gx1 = self.params.get("gamma_x1", 0.0)
        lip_g = self.params.get("lip_g", 0.0)
        return cg + gx1 * cint + lip_g


@dataclass
class SimConfig:
    t: float = 1.0
    M: float = 5.0
    h_max: Optional[float] = None   # None -> 1e-3 * t
    jet_order: int = 2
    seed: int = 0

    def step(self):
        return self.h_max if self.h_max is not None else 1e-3 * self.t


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _uniform_base(rng, R):
    return np.array([rng.uniform(-R, R)])


def _gaussian_only(params):
    return ModelSpec(
        name="gaussian-only",
        d=1,
        c=None,
        gamma=None,
        drift=None,
        log_h=None,
        h_radial=lambda r: 1.0,
        c_bar=lambda r: 0.0,
        c_low=lambda r: 0.0,
        gamma_bar=lambda r: 0.0,
        gamma_low=lambda r: 0.0,
        C_bar=0.0,
        x0=np.array([params.get("x0", 0.3)]),
        mu_ball=lambda R: 2.0 * R,
        sample_base=_uniform_base,
        reg_variance_override=params.get("variance", 0.5),
        lip_aggregate=0.0,
        params=dict(params),
        default_M=5.0,
        default_t=1.0,
    )


def _exp_profile(r):
    return np.exp(-np.sqrt(1.0 + r * r))


def _example1_like(params, poly):
    """Shared body of the two constant-lower-gamma presets (mode b)."""
    b0 = params.get("beta0", 0.3)
    b1 = params.get("beta1", 0.1)
    g0 = params.get("gamma0", 0.4)
    p = params.get("p", 6.0)
    drift_scale = params.get("drift_scale", 0.2)

    if poly:
        def shape(z):
            return (1.0 + z * z) ** (-p / 2.0)

        def c_bar(r):
            return (b0 + b1) * 1.1 * (1.0 + r * r) ** (-p / 2.0)

        def c_low(r):
            return (b0 - b1) * p * r * r * (1.0 + r * r) ** (-p / 2.0 - 1.5)
    else:
        def shape(z):
            return jm.exp(-jm.sqrt(1.0 + z * z))

        def c_bar(r):
            return (b0 + b1) * 1.1 * np.exp(-np.sqrt(1.0 + r * r))

        def c_low(r):
            return (b0 - b1) * r * r / (1.0 + r * r) * np.exp(-np.sqrt(1.0 + r * r))

    def c(z, x):
        return [(b0 + b1 * jm.sin(x[0])) * shape(z[0])]

    def gamma(z, x):
        return g0 * (0.8 + 0.2 * jm.sin(x[0]))

    def drift(x):
        return [-drift_scale * jm.tanh(x[0])]

    if poly:
        reg = {"mode": "b", "theta": math.inf, "p1": p - 1.0, "p2": 2.0 * p - 1.0,
               "rho": 1.0, "paper_example": "poly-decay, constant lower rate"}
    else:
        reg = {"mode": "b", "theta": 0.6 * g0 * 2.0 / 2.0, "p1": math.inf,
               "p2": math.inf, "rho": 1.0, "a": 1.0,
               "paper_example": "exp-decay, constant lower rate"}

    return ModelSpec(
        name="example1-poly" if poly else "example1-exp",
        d=1,
        c=c,
        gamma=gamma,
        drift=drift,
        log_h=None,
        h_radial=lambda r: 1.0,
        c_bar=c_bar,
        c_low=c_low,
        gamma_bar=lambda r: g0,
        gamma_low=lambda r: 0.6 * g0,
        C_bar=g0,
        x0=np.array([params.get("x0", 0.2)]),
        mu_ball=lambda R: 2.0 * R,
        sample_base=_uniform_base,
        params=dict(params, gamma_x1=0.2 * g0, lip_g=drift_scale),
        regularity=reg,
        default_M=5.0,
        default_t=1.0,
    )


def _example2(params):
    """State-dependent exponential rate with integrable log-derivatives (mode a)."""
    b0 = params.get("beta0", 0.3)
    b1 = params.get("beta1", 0.1)
    a0 = params.get("alpha0", 1.0)
    a1 = params.get("alpha1", 0.5)
    drift_scale = params.get("drift_scale", 0.2)

    def c(z, x):
        return [(b0 + b1 * jm.sin(x[0])) * jm.exp(-jm.sqrt(1.0 + z[0] * z[0]))]

    def gamma(z, x):
        alpha = a0 + a1 * jm.sin(x[0])
        return jm.exp(-alpha / (1.0 + z[0] * z[0]))

    def drift(x):
        return [-drift_scale * jm.tanh(x[0])]

    abar, alow = a0 + a1, a0 - a1
    return ModelSpec(
        name="example2",
        d=1,
        c=c,
        gamma=gamma,
        drift=drift,
        log_h=None,
        h_radial=lambda r: 1.0,
        c_bar=lambda r: (b0 + b1) * 1.1 * np.exp(-np.sqrt(1.0 + r * r)),
        c_low=lambda r: (b0 - b1) * r * r / (1.0 + r * r) * np.exp(-np.sqrt(1.0 + r * r)),
        gamma_bar=lambda r: np.exp(-alow / (1.0 + r * r)),
        gamma_low=lambda r: np.exp(-abar / (1.0 + r * r)),
        C_bar=1.0,
        x0=np.array([params.get("x0", 0.2)]),
        mu_ball=lambda R: 2.0 * R,
        sample_base=_uniform_base,
        params=dict(params, gamma_x1=a1, lip_g=drift_scale),
        regularity={"mode": "a", "theta": 1.0, "a": 1.0,
                    "paper_example": "state-dependent rate, integrable log-derivative"},
        default_M=4.0,
        default_t=1.0,
    )


def _example3(params):
    """Levy-driven equation mapped to a finite-activity form by z = 1/y (mode b)."""
    rho = params.get("rho", 0.2)
    f0 = params.get("f0", 1.0)
    f1 = params.get("f1", 0.25)
    g0 = params.get("g0", 1.4)
    g1 = params.get("g1", 0.2)
    if not 0.0 < rho < 1.0:
        raise ConfigError("example3-levy requires 0 < rho < 1")

    def c(z, x):
        return [(f0 + f1 * jm.sin(x[0])) / z[0]]

    def gamma(z, x):
        return g0 + g1 * jm.cos(x[0])

    def log_h(z):
        return (rho - 1.0) * jm.log(jm.jabs(z[0]))

    def mu_ball(R):
        return 2.0 * (R ** rho - 1.0) / rho if R > 1.0 else 0.0

    def sample_base(rng, R):
        u = rng.uniform()
        r = (1.0 + u * (R ** rho - 1.0)) ** (1.0 / rho)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        return np.array([sign * r])

    def gamma_ball_integral(x, R):
        return (g0 + g1 * jm.cos(x[0])) * mu_ball(R)

    fbar, flow = f0 + f1, f0 - f1
    return ModelSpec(
        name="example3-levy",
        d=1,
        c=c,
        gamma=gamma,
        drift=None,
        log_h=log_h,
        h_radial=lambda r: r ** (rho - 1.0) if r >= 1.0 else 0.0,
        c_bar=lambda r: fbar / max(r, 1.0),
        c_low=lambda r: flow / r ** 2 if r >= 1.0 else 0.0,
        gamma_bar=lambda r: g0 + g1,
        gamma_low=lambda r: g0 - g1,
        C_bar=g0 + g1,
        x0=np.array([params.get("x0", 0.0)]),
        mu_ball=mu_ball,
        gamma_ball_integral=gamma_ball_integral,
        sample_base=sample_base,
        h_support_rmin=1.0,
        params=dict(params, gamma_x1=g1, lip_g=0.0),
        regularity={"mode": "b", "theta": math.inf, "p1": 1.0 - rho,
                    "p2": 2.0 - rho, "rho": rho,
                    "paper_example": "Levy-driven, bounded state-dependent rate"},
        default_M=8.0,
        default_t=1.0,
    )


PRESETS = {
    "gaussian-only": _gaussian_only,
    "example1-exp": lambda p: _example1_like(p, poly=False),
    "example1-poly": lambda p: _example1_like(p, poly=True),
    "example2": _example2,
    "example3-levy": _example3,
}


def make_model(preset, **params):
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
    return PRESETS[preset](params)


def load_config(doc):
    """Build (model, SimConfig) from a JSON document, file path or dict."""
    if isinstance(doc, str):
        with open(doc) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config parse error at line {exc.lineno}, "
                                  f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    coeff = doc.get("coefficients", {})
    if not isinstance(coeff, dict) or "preset" not in coeff:
        raise ConfigError("config field 'coefficients.preset' is required")
    model = make_model(coeff["preset"], **coeff.get("parameters", {}))
    if "d" in doc and int(doc["d"]) != model.d:
        raise ConfigError(f"field 'd': preset {model.name} has d={model.d}")
    cfg = SimConfig(
        t=float(doc.get("t", model.default_t)),
        M=float(doc.get("M", model.default_M)),
        h_max=(float(doc["h_max"]) if "h_max" in doc else None),
        jet_order=int(doc.get("jet_order", 2)),
        seed=int(doc.get("seed", 0)),
    )
    if cfg.t <= 0:
        raise ConfigError("field 't' must be positive")
    if cfg.M < 1:
        raise ConfigError("field 'M' must be >= 1")
    if not 0 <= cfg.jet_order <= 4:
        raise ConfigError("field 'jet_order' must be in 0..4")
    return model, cfg

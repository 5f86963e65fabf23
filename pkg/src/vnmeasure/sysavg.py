"""Average of the macroscopic factors over a GUE system observable.

The pair average weights ``<X(delta)>^N_f`` with the system's two-point
function ``R_2(a, a')``. Since the integrand depends on ``a - a'`` only, the
integral is done in rotated coordinates ``u = x - y``, ``v = x + y`` (unit
scale): the ``v`` integral of ``R_2`` is a polynomial times
``exp(-v^2/4)`` and is evaluated exactly by Gauss-Hermite, leaving an
adaptive Gauss-Legendre integral over ``u >= 0``.
"""

import dataclasses
import functools
import math

import numpy as np

from .analytic import (FactorKind, f_avg, gamma_avg, gamma_floor, purity_avg,
                       superfid_avg, superfid_floor)
from .ensembles import EnsembleConfig, gue_batch
from .quadrature import QuadratureError, integrate
from .specfun import ALPHA_MAX, KernelContext, StabilityError, r2_correlation

__all__ = [
    "QuadratureSpec", "CurveRequest", "FactorCurve", "gap_density",
    "gap_cutoff", "system_average_point", "system_average_curve",
    "factor_floor", "pair_sampler", "QuadratureError",
]

F_NEGLIGIBLE = 1e-15


@dataclasses.dataclass(frozen=True)
class QuadratureSpec:
    order: int = 20
    panels: int = 8
    rtol: float = 1e-9

    def __post_init__(self):
        if not 0 < self.rtol <= 1e-3:
            raise ValueError("quadrature tolerance must lie in (0, 1e-3]")
        if self.order < 2 or self.panels < 1:
            raise ValueError("need order >= 2 and panels >= 1")


@dataclasses.dataclass(frozen=True)
class CurveRequest:
    config: EnsembleConfig
    kind: FactorKind
    power: int
    t_grid: tuple
    quadrature: QuadratureSpec = QuadratureSpec()

    def __post_init__(self):
        object.__setattr__(self, "kind", FactorKind.parse(self.kind))
        grid = tuple(float(t) for t in self.t_grid)
        if any(t < 0 for t in grid) or any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("t_grid must be non-negative and ascending")
        object.__setattr__(self, "t_grid", grid)
        if self.power < 0:
            raise ValueError("power must be non-negative")


@dataclasses.dataclass(frozen=True)
class FactorCurve:
    """Values of an averaged factor on a grid of ``g t``."""

    g_t: np.ndarray
    values: np.ndarray
    floor: float
    stderr: np.ndarray = None


def gap_cutoff(d_S):
    """Upper end of the ``u = x - y`` domain in unit-scale variables."""
    return 4.0 * math.sqrt(d_S) + 12.0


@functools.lru_cache(maxsize=None)
def _hermite_rule(n):
    s, w = np.polynomial.hermite.hermgauss(n)
    return s, w * np.exp(s * s)


def gap_density(d_S, u):
    """``W(u) = (1/2) integral of R_2((v+u)/2, (v-u)/2) dv``.

    Integrates to ``d_S (d_S - 1)`` over the real line.
    """
    ctx = KernelContext(d_S)
    s, w = _hermite_rule(2 * d_S + 8)
    u = np.asarray(u, dtype=float)
    v = 2.0 * s
    x = 0.5 * (v[None, :] + u.reshape(-1, 1))
    y = 0.5 * (v[None, :] - u.reshape(-1, 1))
    vals = r2_correlation(ctx, x, y) @ w
    return vals.reshape(u.shape)


def _purity(config):
    return purity_avg(config.measure, config.d)


def factor_floor(config, kind, power):
    """Long-time value ``floor^power`` of the averaged factor."""
    kind = FactorKind.parse(kind)
    p = _purity(config)
    base = gamma_floor(config.d, p) if kind is FactorKind.DECOHERENCE else superfid_floor(config.d, p)
    return base ** power


def _single_factor(config, kind):
    d = config.d
    p = _purity(config)
    avg = gamma_avg if kind is FactorKind.DECOHERENCE else superfid_avg
    floor = gamma_floor(d, p) if kind is FactorKind.DECOHERENCE else superfid_floor(d, p)
    if abs(f_avg(d, ALPHA_MAX)) > F_NEGLIGIBLE:
        limit = None
    else:
        limit = ALPHA_MAX

    def factor(delta):
        delta = np.abs(delta)
        out = np.full(delta.shape, floor)
        inside = delta <= ALPHA_MAX
        if limit is None and not inside.all():
            raise StabilityError(f"f_avg not negligible beyond |delta|={ALPHA_MAX} for d={d}")
        if inside.any():
            out[inside] = avg(d, p, delta[inside])
        return out
    return factor


def system_average_point(config, kind, power, g_t, quadrature=QuadratureSpec()):
    """Average of ``<X(delta)>^power`` over system level pairs at time ``g_t / g``."""
    kind = FactorKind.parse(kind)
    if config.d_S < 2:
        raise ValueError("system average needs d_S >= 2")
    factor = _single_factor(config, kind)
    t = g_t / config.g
    inv_sqrt_s = 1.0 / math.sqrt(config.eta_S)
    inv_sqrt_e = 1.0 / math.sqrt(config.eta_E)

    def integrand(u):
        delta = (u * inv_sqrt_s) * t * inv_sqrt_e
        return gap_density(config.d_S, u) * factor(delta) ** power

    value, _ = integrate(integrand, 0.0, gap_cutoff(config.d_S),
                         rtol=quadrature.rtol, order=quadrature.order,
                         panels=quadrature.panels)
    return 2.0 * value / (config.d_S * (config.d_S - 1.0))


def system_average_curve(req):
    """Evaluate :func:`system_average_point` on every ``g t`` of ``req``."""
    values = np.array([system_average_point(req.config, req.kind, req.power, gt,
                                            req.quadrature)
                       for gt in req.t_grid])
    return FactorCurve(g_t=np.array(req.t_grid), values=values,
                       floor=factor_floor(req.config, req.kind, req.power))


def pair_sampler(config, kind, power, g_t):
    """Monte Carlo route: average over all level pairs of sampled system spectra."""
    kind = FactorKind.parse(kind)
    factor = _single_factor(config, kind)
    d_S = config.d_S
    iu = np.triu_indices(d_S, 1)

    def sampler(rng, size):
        a = np.linalg.eigvalsh(gue_batch(rng, size, d_S, config.eta_S))
        gaps = (a[:, :, None] - a[:, None, :])[:, iu[0], iu[1]]
        t = g_t / config.g
        delta = gaps * t / math.sqrt(config.eta_E)
        return np.mean(factor(delta) ** power, axis=1)
    return sampler

"""Closed-form ensemble averages of the single-apparatus factors.

All functions taking ``delta`` accept the dimensionless gap-time
``delta = (a - a') t / sqrt(eta_E)`` as a scalar or an array and are even
in it. Purity arguments are floats in ``[1/d, 1]`` or :class:`Purity`.
"""

import dataclasses
import enum
import math
from fractions import Fraction

import numpy as np

from .ensembles import Measure
from .specfun import ALPHA_MAX, N_MAX, StabilityError, laguerre_table

__all__ = [
    "FactorKind", "PuritySource", "Purity", "delta_tilde", "purity_avg",
    "f_avg", "f_avg_partial", "p_poly", "p_coefficients", "gamma_avg",
    "superfid_avg", "gamma_floor", "superfid_floor", "macro_gamma",
    "macro_superfid", "shorttime_macro", "TauScales", "tau_scales",
    "ansatz_gamma", "ansatz_superfid",
]

PURITY_SLACK = 1e-10


class FactorKind(enum.Enum):
    DECOHERENCE = "decoherence"
    SUPERFIDELITY = "superfidelity"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"decoherence": cls.DECOHERENCE, "dec": cls.DECOHERENCE,
                   "gamma": cls.DECOHERENCE, "superfidelity": cls.SUPERFIDELITY,
                   "superfid": cls.SUPERFIDELITY, "fid": cls.SUPERFIDELITY}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown factor kind {value!r}") from None


class PuritySource(enum.Enum):
    SAMPLED = "sampled"
    HS_AVERAGE = "hs"
    BURES_AVERAGE = "bures"
    FIXED = "fixed"


@dataclasses.dataclass(frozen=True)
class Purity:
    value: float
    source: PuritySource = PuritySource.FIXED

    @classmethod
    def average(cls, measure, d):
        measure = Measure.parse(measure)
        source = (PuritySource.HS_AVERAGE if measure is Measure.HILBERT_SCHMIDT
                  else PuritySource.BURES_AVERAGE)
        return cls(purity_avg(measure, d), source)

    def check(self, d):
        return _purity(self, d)


def _purity(purity, d):
    p = float(purity.value if isinstance(purity, Purity) else purity)
    if not (1.0 / d - PURITY_SLACK <= p <= 1.0 + PURITY_SLACK):
        raise ValueError(f"purity {p} outside [1/{d}, 1]")
    return p


def _check_d(d):
    if int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d!r}")
    if d > N_MAX:
        raise StabilityError(f"d={d} exceeds the supported maximum {N_MAX}")
    return int(d)


def _as_delta(delta):
    arr = np.abs(np.asarray(delta, dtype=float))
    if arr.size and np.max(arr) > ALPHA_MAX:
        raise StabilityError(f"|delta| exceeds {ALPHA_MAX}")
    return arr


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def delta_tilde(gap, t, eta_E):
    """Dimensionless gap-time ``(a - a') t / sqrt(eta_E)``."""
    return gap * t / math.sqrt(eta_E)


def purity_avg(measure, d):
    """Mean purity of a random ``d``-dimensional state (HS or Bures)."""
    measure = Measure.parse(measure)
    if measure is Measure.HILBERT_SCHMIDT:
        return 2.0 * d / (d * d + 1.0)
    return (5.0 * d * d + 1.0) / (2.0 * d * (d * d + 2.0))


class _Compensated:
    """Neumaier summation, elementwise over arrays."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, term):
        t = self.total + term
        big = np.abs(self.total) >= np.abs(term)
        self.comp += np.where(big, (self.total - t) + term, (term - t) + self.total)
        self.total = t

    def value(self):
        return self.total + self.comp


def _pair_sums(d, delta, damped):
    """Return the two double sums over ``n < m`` that make up ``p`` (or ``f``).

    With ``damped`` each Laguerre value carries ``exp(-delta^2/2)`` so the
    sums are those of ``f`` directly; otherwise they are those of ``p``.
    """
    x = delta * delta
    scale = np.exp(-0.5 * x) if damped else np.ones_like(x)
    diag = laguerre_table(d - 1, 0, x) * scale

    first = _Compensated(x.shape)
    running = np.zeros_like(x)
    for m in range(1, d):
        running = running + diag[m - 1]
        first.add(diag[m] * running)

    second = _Compensated(x.shape)
    for k in range(1, d):
        power = delta ** k
        lag = laguerre_table(d - 1 - k, k, x)
        for n in range(d - k):
            ratio = math.exp(0.5 * (math.lgamma(n + 1) - math.lgamma(n + k + 1)))
            j = ratio * power * lag[n] * scale
            second.add(j * j)
    return first.value(), second.value()


def f_avg(d, delta):
    """GUE average of ``sum_{m<n} cos(delta (zeta_n - zeta_m))``.

    Evaluated as ``sum_{n<m} [J_nn J_mm - |J_nm|^2]`` so every term stays
    bounded by one; equal to ``p(d, delta) exp(-delta^2)``.
    """
    d = _check_d(d)
    dl = _as_delta(delta)
    first, second = _pair_sums(d, dl, damped=True)
    return _out(first - second, delta)


def f_avg_partial(d, delta):
    """Same quantity as :func:`f_avg` with the ``L_n L_m`` sum collapsed.

    Uses ``sum_{m<=M} L_m^(a) = L_M^(a+1)``; an independent evaluation route.
    """
    d = _check_d(d)
    dl = _as_delta(delta)
    x = dl * dl
    scale = np.exp(-0.5 * x)
    l0 = laguerre_table(d - 1, 0, x) * scale
    l1 = laguerre_table(d - 1, 1, x) * scale
    head = l1[d - 1] * l1[d - 2] - np.sum(l0[: d - 1] * l1[: d - 1], axis=0)
    _, second = _pair_sums(d, dl, damped=True)
    return _out(head - second, delta)


def p_poly(d, delta):
    """Polynomial factor ``p(d, delta) = f_avg(d, delta) exp(delta^2)``."""
    d = _check_d(d)
    dl = _as_delta(delta)
    first, second = _pair_sums(d, dl, damped=False)
    val = first - second
    if not np.all(np.isfinite(val)):
        raise StabilityError(f"p({d}, delta) overflows; reduce d * delta^2")
    return _out(val, delta)


def p_coefficients(d):
    """Exact rational coefficients ``c_j`` of ``p(d, delta) = sum c_j delta^(2j)``.

    Built from the explicit binomial double sums, independently of any
    Laguerre evaluation.
    """
    d = int(d)
    coeffs = [Fraction(0)] * (2 * d)
    fact = [math.factorial(i) for i in range(2 * d)]
    for n in range(d - 1):
        for m in range(n + 1, d):
            for k in range(n + 1):
                for l in range(m + 1):
                    e = n + m - k - l
                    c = Fraction(math.comb(n, k) * math.comb(m, l) * (-1) ** e,
                                 fact[n - k] * fact[m - l])
                    coeffs[e] += c
                for l in range(n + 1):
                    e = n + m - k - l
                    c = Fraction(math.comb(n, k) * math.comb(m, l) * (-1) ** (k + l),
                                 fact[m - k] * fact[n - l])
                    coeffs[e] -= c
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def gamma_floor(d, purity):
    """Long-time value ``(1 + purity) / (d + 1)`` of the decoherence average."""
    return (1.0 + _purity(purity, d)) / (d + 1.0)


def superfid_floor(d, purity):
    """Long-time value of the super-fidelity average (adds the linear entropy)."""
    p = _purity(purity, d)
    return (1.0 - p) + (1.0 + p) / (d + 1.0)


def gamma_avg(d, purity, delta):
    """GUE/Haar average of the single-copy decoherence factor."""
    d = _check_d(d)
    p = _purity(purity, d)
    f = f_avg(d, delta)
    return gamma_floor(d, p) + f * (2.0 * (d - p) / (d * (d * d - 1.0)))


def superfid_avg(d, purity, delta):
    """GUE/Haar average of the single-copy super-fidelity."""
    d = _check_d(d)
    p = _purity(purity, d)
    f = f_avg(d, delta)
    return superfid_floor(d, p) + f * (2.0 * (d * p - 1.0) / (d * (d * d - 1.0)))


def macro_gamma(d, purity, delta, n_uno):
    """Average of the product over ``n_uno`` i.i.d. unobserved copies."""
    return gamma_avg(d, purity, delta) ** n_uno


def macro_superfid(d, purity, delta, n_mac):
    """Average super-fidelity bound of one macrofraction of ``n_mac`` copies."""
    return superfid_avg(d, purity, delta) ** n_mac


def shorttime_macro(d, purity, delta, n_f, kind):
    """Gaussian short-time approximation of the macroscopic factors."""
    kind = FactorKind.parse(kind)
    p = _purity(purity, d)
    rate = (d - p) if kind is FactorKind.DECOHERENCE else (d * p - 1.0)
    dl = np.asarray(delta, dtype=float)
    return _out(np.exp(-n_f * dl * dl * rate), delta)


def ansatz_gamma(d, purity, delta):
    """Single-Gaussian upper envelope of :func:`gamma_avg`."""
    p = _purity(purity, d)
    dl = np.asarray(delta, dtype=float)
    val = gamma_floor(d, p) + (d - p) / (d + 1.0) * np.exp(-(d + 1.0) * dl * dl)
    return _out(val, delta)


def ansatz_superfid(d, purity, delta):
    """Single-Gaussian upper envelope of :func:`superfid_avg`."""
    p = _purity(purity, d)
    dl = np.asarray(delta, dtype=float)
    val = superfid_floor(d, p) + (d * p - 1.0) / (d + 1.0) * np.exp(-(d + 1.0) * dl * dl)
    return _out(val, delta)


@dataclasses.dataclass(frozen=True)
class TauScales:
    tau_dec: float
    tau_fid: float
    eta_E: float
    d: int

    def tau_pair(self, a, a_prime):
        """Gaussian decay time of the single-pair factors for levels ``a, a'``."""
        gap = abs(a - a_prime)
        if gap == 0:
            return math.inf
        return math.sqrt(self.eta_E) / (math.sqrt(self.d + 1.0) * gap)

    @property
    def ratio(self):
        return self.tau_fid / self.tau_dec


def tau_scales(config):
    """Decoherence and record-formation timescales for ``config``.

    Times are absolute; multiply by ``config.g`` for units of ``1/g``.
    """
    p = purity_avg(config.measure, config.d)
    g2 = config.g ** 2

    def tau(count, rate):
        if count == 0 or rate <= 0:
            return math.inf
        return (8.0 * g2 * count * config.d_S * rate) ** -0.5

    return TauScales(tau_dec=tau(config.N_uno, config.d - p),
                     tau_fid=tau(config.N_mac, config.d * p - 1.0),
                     eta_E=config.eta_E, d=config.d)

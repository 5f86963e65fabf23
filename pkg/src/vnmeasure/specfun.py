"""Special functions behind the GUE eigenvalue averages.

Conventions:

* ``He_n`` are the probabilist Hermite polynomials (monic, weight
  ``exp(-x^2/2)``).
* ``phi_n(x) = exp(-x^2/4) He_n(x) / sqrt(sqrt(2 pi) n!)`` are the
  oscillator wavefunctions, orthonormal on the real line.
* ``L_n^(alpha)`` is the associated Laguerre polynomial with leading
  coefficient ``(-1)^n / n!``.

Stability envelope: wavefunction index below :data:`N_MAX`, ``|x| <=``
:data:`X_MAX`, displacement ``|alpha| <=`` :data:`ALPHA_MAX`. Inputs outside
raise :class:`StabilityError`.
"""

import dataclasses
import math

import numpy as np

__all__ = [
    "StabilityError", "N_MAX", "X_MAX", "ALPHA_MAX", "hermite_he",
    "oscillator_phi", "oscillator_table", "laguerre", "laguerre_table",
    "laguerre_series", "displacement_overlap", "KernelContext", "kernel_K",
    "r2_correlation",
]

N_MAX = 64
X_MAX = 48.0
ALPHA_MAX = 20.0

_PHI0 = (2.0 * math.pi) ** -0.25
_I_POWERS = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


class StabilityError(ValueError):
    """Argument outside the documented stability envelope."""


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if x.size and np.max(np.abs(x)) > X_MAX:
        raise StabilityError(f"|x| exceeds {X_MAX}")
    return x


def _unwrap(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _unwrap2(value, x, y):
    return float(value) if np.ndim(x) == 0 and np.ndim(y) == 0 else value


def hermite_he(n, x):
    """Probabilist Hermite polynomial ``He_n(x)`` by three-term recurrence."""
    if n < 0:
        raise ValueError("n must be non-negative")
    xa = np.asarray(x, dtype=float)
    prev = np.ones_like(xa)
    if n == 0:
        return _unwrap(prev, x)
    cur = xa.copy()
    for k in range(1, n):
        prev, cur = cur, xa * cur - k * prev
    return _unwrap(cur, x)


def oscillator_table(d, x):
    """Rows ``phi_0(x) .. phi_{d-1}(x)``, shape ``(d,) + shape(x)``.

    Uses the normalized recurrence
    ``phi_{n+1} = (x phi_n - sqrt(n) phi_{n-1}) / sqrt(n+1)``, which never
    forms ``He_n`` or ``n!`` separately.
    """
    if d < 1 or d > N_MAX:
        raise StabilityError(f"number of wavefunctions must be in [1, {N_MAX}]")
    xa = _check_x(x)
    out = np.empty((d,) + xa.shape)
    out[0] = _PHI0 * np.exp(-0.25 * xa * xa)
    if d > 1:
        out[1] = xa * out[0]
    for n in range(1, d - 1):
        out[n + 1] = (xa * out[n] - math.sqrt(n) * out[n - 1]) / math.sqrt(n + 1)
    return out


def oscillator_phi(n, x):
    """Oscillator wavefunction ``phi_n(x)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return _unwrap(oscillator_table(n + 1, x)[n], x)


def laguerre_table(nmax, alpha, x):
    """Rows ``L_0^(alpha)(x) .. L_nmax^(alpha)(x)`` by forward recurrence."""
    if nmax < 0 or alpha < 0:
        raise ValueError("need nmax >= 0 and alpha >= 0")
    xa = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + xa.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 1.0 + alpha - xa
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + 1 + alpha - xa) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def laguerre(n, alpha, x):
    """Associated Laguerre polynomial ``L_n^(alpha)(x)``."""
    if int(alpha) != alpha:
        raise ValueError("only integer Laguerre order is supported")
    return _unwrap(laguerre_table(n, int(alpha), x)[n], x)


def laguerre_series(n, alpha, x):
    """``L_n^(alpha)(x)`` from its explicit binomial sum, exactly summed.

    Slower than :func:`laguerre`; kept as an independent evaluation route.
    """
    x = float(x)
    terms = [math.comb(n + alpha, n - k) * (-x) ** k / math.factorial(k)
             for k in range(n + 1)]
    return math.fsum(terms)


def displacement_overlap(n, m, alpha):
    """``J_{n,m}(alpha) = integral of phi_n(x) phi_m(x) exp(i alpha x) dx``.

    Closed form ``exp(-alpha^2/2) sqrt(n!/m!) (i alpha)^(m-n) L_n^(m-n)(alpha^2)``
    with ``m >= n``; the integral is symmetric in ``n, m``.
    """
    if n < 0 or m < 0:
        raise ValueError("indices must be non-negative")
    if m < n:
        n, m = m, n
    k = m - n
    if k >= N_MAX or abs(alpha) > ALPHA_MAX:
        raise StabilityError(f"J_{{{n},{m}}}({alpha}) outside envelope")
    alpha = float(alpha)
    a2 = alpha * alpha
    log_mag = -0.5 * a2 + 0.5 * (math.lgamma(n + 1) - math.lgamma(m + 1))
    lag = laguerre_table(n, k, a2)[n]
    real = math.exp(log_mag) * alpha ** k * float(lag)
    return _I_POWERS[k % 4] * real


@dataclasses.dataclass
class KernelContext:
    """Per-thread scratch for the GUE kernel with ``d`` wavefunctions."""

    d: int

    def __post_init__(self):
        if self.d < 1 or self.d > N_MAX:
            raise StabilityError(f"kernel dimension must be in [1, {N_MAX}]")

    def table(self, x):
        return oscillator_table(self.d, x)


def kernel_K(ctx, x, y):
    """Christoffel-Darboux kernel ``K(x, y) = sum_j phi_j(x) phi_j(y)``."""
    px = ctx.table(x)
    py = ctx.table(y)
    px, py = np.broadcast_arrays(px, py)
    return _unwrap2(np.sum(px * py, axis=0), x, y)


def r2_correlation(ctx, x, y):
    """Unit-scale GUE two-point function ``K(x,x) K(y,y) - K(x,y)^2``.

    Normalized so that its integral over the plane is ``d (d - 1)``. Summed
    as ``sum_{j<k} (phi_j(x) phi_k(y) - phi_k(x) phi_j(y))^2`` (Lagrange's
    identity), which is non-negative term by term and keeps full relative
    accuracy as ``y -> x``.
    """
    px = ctx.table(x)
    py = ctx.table(y)
    out = np.zeros(np.broadcast_shapes(px.shape[1:], py.shape[1:]))
    for j in range(ctx.d - 1):
        minor = px[j] * py[j + 1:] - px[j + 1:] * py[j]
        out += np.sum(minor * minor, axis=0)
    return _unwrap2(out, x, y)

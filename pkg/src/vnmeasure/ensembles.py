"""Random matrix ensembles: GUE observables, Haar unitaries, mixed states.

Scalar samplers (:func:`sample_gue`, :func:`sample_haar_unitary`,
:func:`sample_state`) return validated immutable objects. The ``*_batch``
variants return raw stacked arrays and are what the Monte Carlo loops use.

GUE convention: density proportional to ``exp(-(eta/2) tr H^2)``, so the
diagonal has variance ``1/eta`` and each of the real and imaginary parts of
an off-diagonal entry has variance ``1/(2 eta)``.
"""

import dataclasses
import enum
import json
import math

import numpy as np

__all__ = [
    "Measure", "EnsembleConfig", "HermitianObservable", "DensityMatrix",
    "sample_gue", "sample_haar_unitary", "sample_state", "ginibre_batch",
    "gue_batch", "haar_batch", "state_batch", "pure_state_batch",
    "purity_batch", "semicircle_radius", "semicircle_pdf", "semicircle_cdf",
    "spectral_ks",
]

NEG_EIG_CLAMP = 1e-10


class Measure(enum.Enum):
    HILBERT_SCHMIDT = "hs"
    BURES = "bures"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"hs": cls.HILBERT_SCHMIDT, "hilbertschmidt": cls.HILBERT_SCHMIDT,
                   "bures": cls.BURES, "bu": cls.BURES}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown state measure {value!r}") from None


@dataclasses.dataclass(frozen=True)
class EnsembleConfig:
    """Dimensions, scales and apparatus counts of one measurement ensemble.

    ``N_obs = M * N_mac`` and ``N = N_uno + N_obs`` are derived, so the
    count invariants hold by construction.
    """

    d: int = 2
    d_S: int = 2
    eta_E: float = 1.0
    eta_S: float = 1.0
    N_uno: int = 1
    M: int = 1
    N_mac: int = 1
    measure: Measure = Measure.BURES
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure.parse(self.measure))
        if self.d < 2 or self.d_S < 2:
            raise ValueError(f"d and d_S must be >= 2, got d={self.d}, d_S={self.d_S}")
        if not (self.eta_E > 0 and self.eta_S > 0):
            raise ValueError("eta_E and eta_S must be positive")
        if self.N_uno < 0 or self.M < 1 or self.N_mac < 1:
            raise ValueError("need N_uno >= 0, M >= 1, N_mac >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")

    @property
    def N_obs(self):
        return self.M * self.N_mac

    @property
    def N(self):
        return self.N_uno + self.N_obs

    @property
    def g(self):
        """Effective coupling strength ``1/sqrt(eta_S eta_E)``."""
        return 1.0 / math.sqrt(self.eta_S * self.eta_E)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["measure"] = self.measure.value
        out["N_obs"] = self.N_obs
        out["N"] = self.N
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        n_obs = data.pop("N_obs", None)
        n_tot = data.pop("N", None)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if n_obs is not None and n_obs != cfg.N_obs:
            raise ValueError(f"N_obs={n_obs} inconsistent with M*N_mac={cfg.N_obs}")
        if n_tot is not None and n_tot != cfg.N:
            raise ValueError(f"N={n_tot} inconsistent with N_uno+N_obs={cfg.N}")
        return cfg

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclasses.dataclass(frozen=True, eq=False)
class HermitianObservable:
    """Hermitian matrix with its cached eigen-decomposition."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    scale: float = 1.0

    @classmethod
    def from_matrix(cls, matrix, scale=1.0):
        h = np.asarray(matrix, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {h.shape}")
        h = 0.5 * (h + h.conj().T)
        w, v = np.linalg.eigh(h)
        for arr in (h, w, v):
            arr.setflags(write=False)
        return cls(h, w, v, float(scale))

    @classmethod
    def diagonal(cls, eigenvalues, scale=1.0):
        """Observable that is diagonal in the computational basis."""
        w = np.asarray(eigenvalues, dtype=float)
        order = np.argsort(w, kind="stable")
        d = len(w)
        v = np.eye(d, dtype=complex)[:, order]
        h = np.diag(w).astype(complex)
        w = w[order]
        for arr in (h, w, v):
            arr.setflags(write=False)
        return cls(h, w, v, float(scale))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def propagator(self, s):
        """``exp(-1j * s * H)`` from the cached eigen-decomposition."""
        v = self.eigenvectors
        return (v * np.exp(-1j * s * self.eigenvalues)) @ v.conj().T


@dataclasses.dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive semi-definite, unit-trace matrix with cached purity."""

    matrix: np.ndarray
    purity: float

    @classmethod
    def from_matrix(cls, matrix):
        rho = np.asarray(matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {rho.shape}")
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if not tr > 0:
            raise ValueError("density matrix must have positive trace")
        rho = rho / tr
        w, v = np.linalg.eigh(rho)
        if w[0] < -NEG_EIG_CLAMP:
            raise ValueError(f"matrix is not positive semi-definite (min eigenvalue {w[0]:.3g})")
        if w[0] < 0:
            w = np.clip(w, 0.0, None)
            w /= w.sum()
            rho = (v * w) @ v.conj().T
            rho = 0.5 * (rho + rho.conj().T)
        purity = float(np.sum(np.abs(rho) ** 2))
        rho.setflags(write=False)
        return cls(rho, purity)

    @classmethod
    def pure(cls, vector):
        psi = np.asarray(vector, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, d):
        return cls.from_matrix(np.eye(d) / d)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def linear_entropy(self):
        return 1.0 - self.purity


def _check_dim(d):
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


def ginibre_batch(rng, n, d):
    """``n`` complex Ginibre matrices with standard normal real/imag parts."""
    return rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))


def gue_batch(rng, n, d, eta=1.0):
    """Stack of ``n`` GUE matrices, shape ``(n, d, d)``."""
    if not eta > 0:
        raise ValueError(f"GUE scale eta must be positive, got {eta}")
    a = ginibre_batch(rng, n, d)
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    return h / math.sqrt(eta)


def haar_batch(rng, n, d):
    """Stack of ``n`` Haar unitaries (QR of Ginibre with phase correction)."""
    z = ginibre_batch(rng, n, d)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phases = diag / np.abs(diag)
    return q * phases[..., None, :]


def state_batch(rng, n, d, measure):
    """Stack of ``n`` random mixed states under the given measure."""
    measure = Measure.parse(measure)
    g = ginibre_batch(rng, n, d)
    if measure is Measure.BURES:
        u = haar_batch(rng, n, d)
        g = (np.eye(d) + u) @ g
    rho = g @ np.conj(np.swapaxes(g, -1, -2))
    tr = np.trace(rho, axis1=-2, axis2=-1).real
    rho = rho / tr[:, None, None]
    return 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))


def pure_state_batch(rng, n, d):
    """Stack of ``n`` Haar-random pure-state projectors."""
    psi = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    return psi[:, :, None] * np.conj(psi[:, None, :])


def purity_batch(rho):
    return np.sum(np.abs(rho) ** 2, axis=(-2, -1))


def sample_gue(d, eta, rng):
    """Draw one GUE observable of dimension ``d`` and scale ``eta``."""
    d = _check_dim(d)
    if not eta > 0:
        raise ValueError(f"GUE scale eta must be positive, got {eta}")
    return HermitianObservable.from_matrix(gue_batch(rng, 1, d, eta)[0], scale=eta)


def sample_haar_unitary(d, rng):
    d = _check_dim(d)
    return haar_batch(rng, 1, d)[0]


def sample_state(d, measure, rng):
    """Draw one mixed state under the Hilbert-Schmidt or Bures measure."""
    d = _check_dim(d)
    return DensityMatrix.from_matrix(state_batch(rng, 1, d, measure)[0])


def semicircle_radius(d, eta):
    """Edge ``2 sqrt(d / eta)`` of the GUE spectral density."""
    return 2.0 * math.sqrt(d / eta)


def semicircle_pdf(x, radius):
    x = np.asarray(x, dtype=float)
    inside = np.clip(radius * radius - x * x, 0.0, None)
    return 2.0 * np.sqrt(inside) / (math.pi * radius * radius)


def semicircle_cdf(x, radius):
    x = np.clip(np.asarray(x, dtype=float), -radius, radius)
    r2 = radius * radius
    return 0.5 + (x * np.sqrt(r2 - x * x) / r2 + np.arcsin(x / radius)) / math.pi


def spectral_ks(eigenvalues, radius):
    """Kolmogorov-Smirnov distance between pooled eigenvalues and the semicircle."""
    x = np.sort(np.ravel(eigenvalues))
    n = x.size
    cdf = semicircle_cdf(x, radius)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(n) / n
    return float(max(upper.max(), lower.max()))

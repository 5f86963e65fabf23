"""Per-realization factors and the seeded parallel estimator.

The single-realization functions (:func:`decoherence_factor`,
:func:`hs_overlap`, ...) work on validated objects. The ``*_sampler``
factories build vectorized ``sampler(rng, size)`` callables for
:func:`estimate`, which draws ``size`` i.i.d. realizations per call.

Unit-scale convention for the samplers: ``B`` is drawn with ``eta = 1`` and
the phase is ``delta * lambda``, which is the same as using ``B`` at scale
``eta_E`` with ``delta = gap * t / sqrt(eta_E)``.
"""

import concurrent.futures
import dataclasses

import numpy as np

from .analytic import FactorKind
from .ensembles import (DensityMatrix, HermitianObservable, Measure, gue_batch,
                        haar_batch, pure_state_batch, purity_batch, state_batch)
from .streams import stream

__all__ = [
    "CHUNK", "Realization", "Estimate", "decoherence_factor", "hs_overlap",
    "superfidelity", "fidelity", "realization_macro", "estimate", "draw",
    "purity_sampler", "factor_sampler", "f_sampler", "haar_conditional_sampler",
    "factor_values",
]

CHUNK = 4096
IMAG_RESIDUE = 1e-9
Z_RESOLUTION = 64 * np.finfo(float).eps


@dataclasses.dataclass(frozen=True)
class Realization:
    """One apparatus copy: observable, initial state, level gap and time."""

    B: HermitianObservable
    rho0: DensityMatrix
    gap: float
    t: float

    def rotated_state(self):
        v = self.B.eigenvectors
        return v.conj().T @ self.rho0.matrix @ v

    @property
    def phase(self):
        return self.gap * self.t


@dataclasses.dataclass(frozen=True)
class Estimate:
    mean: object
    stderr: object
    n: int

    def z_score(self, expected):
        """``(mean - expected) / stderr`` with ``0/0`` read as 0.

        Differences at floating-point resolution of the compared values
        count as exact agreement.
        """
        mean = np.asarray(self.mean, dtype=float)
        expected = np.asarray(expected, dtype=float)
        diff = mean - expected
        scale = np.maximum(np.abs(mean), np.abs(expected))
        diff = np.where(np.abs(diff) <= Z_RESOLUTION * scale, 0.0, diff)
        se = np.asarray(self.stderr, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, diff / np.where(se > 0, se, 1.0),
                         np.where(diff == 0, 0.0, np.copysign(np.inf, diff)))
        return float(z) if z.ndim == 0 else z


def _rho(x):
    return x.matrix if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _purity(x):
    return x.purity if isinstance(x, DensityMatrix) else float(np.sum(np.abs(x) ** 2))


def decoherence_factor(r):
    """``|tr(exp(-i gap B t) rho0)|^2`` for one copy."""
    diag = np.diagonal(r.rotated_state()).real
    amp = np.sum(np.exp(-1j * r.phase * r.B.eigenvalues) * diag)
    return float(min(max(abs(amp) ** 2, 0.0), 1.0))


def hs_overlap(r):
    """``tr(rho_a(t) rho_a'(t))``, which depends on ``a - a'`` only."""
    rt = r.rotated_state()
    lam = r.B.eigenvalues
    cos = np.cos(r.phase * (lam[:, None] - lam[None, :]))
    return float(np.sum(np.abs(rt) ** 2 * cos))


def superfidelity(rho, sigma):
    """``tr(rho sigma) + sqrt((1 - tr rho^2)(1 - tr sigma^2))``."""
    overlap = np.vdot(_rho(rho), _rho(sigma)).real
    ent = max((1.0 - _purity(rho)) * (1.0 - _purity(sigma)), 0.0)
    return float(overlap + np.sqrt(ent))


def _psd_sqrt(m):
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho, sigma):
    """Uhlmann-Jozsa fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    s = _psd_sqrt(_rho(rho))
    inner = s @ _rho(sigma) @ s
    if np.abs(np.trace(inner).imag) > IMAG_RESIDUE:
        raise ValueError("fidelity kernel has a non-negligible imaginary trace")
    mu = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(mu, 0.0, None))) ** 2)


def realization_macro(rs, kind):
    """Product of per-copy factors over the copies ``rs``.

    ``kind`` selects the decoherence factor or the per-copy super-fidelity
    ``G(rho_a(t), rho_a'(t)) = tr(rho_a rho_a') + S_lin(rho0)``.
    """
    kind = FactorKind.parse(kind)
    out = 1.0
    for r in rs:
        if kind is FactorKind.DECOHERENCE:
            out *= decoherence_factor(r)
        else:
            out *= hs_overlap(r) + r.rho0.linear_entropy
    return out


def _chunk_stats(values):
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=0)
    m2 = np.sum((values - mean) ** 2, axis=0)
    return values.shape[0], mean, m2


def _merge(a, b):
    """Chan et al. pairwise update of (count, mean, M2) accumulators."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), sa + sb + delta * delta * (na * nb / n)


def _run_chunks(sampler, n, seed, workers, fn):
    sizes = [min(CHUNK, n - start) for start in range(0, n, CHUNK)]

    def job(i):
        return fn(sampler(stream(seed, i), sizes[i]))

    if workers <= 1 or len(sizes) == 1:
        return [job(i) for i in range(len(sizes))]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes))))


def estimate(sampler, n, seed, workers=1):
    """Mean and standard error of ``sampler`` over ``n`` realizations.

    Realizations are drawn in fixed chunks of :data:`CHUNK`; chunk ``i`` uses
    sub-stream ``i`` of ``seed`` and accumulators are merged in chunk order,
    so the result does not depend on ``workers``.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    parts = _run_chunks(sampler, int(n), seed, workers, _chunk_stats)
    acc = parts[0]
    for part in parts[1:]:
        acc = _merge(acc, part)
    count, mean, m2 = acc
    stderr = np.sqrt(m2 / (count - 1) / count)
    if np.ndim(mean) == 0:
        return Estimate(float(mean), float(stderr), count)
    return Estimate(mean, stderr, count)


def draw(sampler, n, seed, workers=1):
    """All ``n`` sampled values, in stream order."""
    parts = _run_chunks(sampler, int(n), seed, workers, np.asarray)
    return np.concatenate(parts, axis=0)


def purity_sampler(d, measure):
    measure = Measure.parse(measure)

    def sampler(rng, size):
        return purity_batch(state_batch(rng, size, d, measure))
    return sampler


def _initial_states(rng, size, d, state):
    if state == "pure":
        return pure_state_batch(rng, size, d)
    return state_batch(rng, size, d, state)


def factor_values(lam, rho_rot, deltas, kind):
    """Per-realization factors from eigenvalues and eigenbasis-rotated states.

    ``lam`` has shape ``(n, d)``, ``rho_rot`` ``(n, d, d)``; returns
    ``(n, len(deltas))``.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if kind is FactorKind.DECOHERENCE:
        diag = np.diagonal(rho_rot, axis1=1, axis2=2).real
        phases = np.exp(-1j * deltas[None, :, None] * lam[:, None, :])
        amp = np.einsum("ntj,nj->nt", phases, diag)
        return np.clip(np.abs(amp) ** 2, 0.0, 1.0)
    weights = np.abs(rho_rot) ** 2
    gaps = lam[:, :, None] - lam[:, None, :]
    overlap = np.einsum("njk,tnjk->nt", weights,
                        np.cos(deltas[:, None, None, None] * gaps[None]))
    s_lin = 1.0 - np.sum(weights, axis=(1, 2))
    return overlap + s_lin[:, None]


def factor_sampler(d, state, deltas, kind):
    """Sampler of single-copy factors over GUE ``B`` and random ``rho0``.

    ``state`` is a :class:`Measure` (or its name) or ``"pure"`` for
    Haar-random pure states. Each draw yields one value per entry of
    ``deltas``.
    """
    kind = FactorKind.parse(kind)
    if state != "pure":
        state = Measure.parse(state)

    def sampler(rng, size):
        b = gue_batch(rng, size, d)
        rho = _initial_states(rng, size, d, state)
        lam, vec = np.linalg.eigh(b)
        rho_rot = np.conj(np.swapaxes(vec, 1, 2)) @ rho @ vec
        return factor_values(lam, rho_rot, deltas, kind)
    return sampler


def f_sampler(d, deltas):
    """Sampler of ``sum_{m<n} cos(delta (zeta_n - zeta_m))`` on unit-scale GUE."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))

    def sampler(rng, size):
        lam = np.linalg.eigvalsh(gue_batch(rng, size, d))
        amp = np.exp(-1j * deltas[None, :, None] * lam[:, None, :]).sum(axis=2)
        return 0.5 * (np.abs(amp) ** 2 - d)
    return sampler


def haar_conditional_sampler(eigenvalues, rho0, delta):
    """Decoherence factor with fixed spectrum and Haar-random eigenbasis."""
    lam = np.asarray(eigenvalues, dtype=float)
    rho = _rho(rho0)
    d = len(lam)

    def sampler(rng, size):
        u = haar_batch(rng, size, d)
        rho_rot = np.conj(np.swapaxes(u, 1, 2)) @ rho @ u
        lam_b = np.broadcast_to(lam, (size, d))
        return factor_values(lam_b, rho_rot, [delta], FactorKind.DECOHERENCE)[:, 0]
    return sampler

"""Distance-to-SBS bound, concentration experiment and microscale states.

The microscale part materializes the partially reduced state of the system
and the observed apparatus copies block by block in the pointer basis of
the system observable. It is only built for tiny Hilbert spaces.
"""

import dataclasses
import math

import numpy as np

from .analytic import FactorKind, gamma_floor, purity_avg, superfid_floor
from .ensembles import DensityMatrix, gue_batch, state_batch
from .montecarlo import draw, factor_values

__all__ = [
    "MICRO_MAX_DIM", "SbsBoundTerms", "epsilon_bound",
    "epsilon_average_asymptote", "bound_terms_from_floors", "HoeffdingRow",
    "hoeffding_bound", "epsilon_proxy_sampler", "hoeffding_experiment",
    "MicroState", "micro_evolve", "micro_offdiag_norm", "sbs_state",
    "trace_distance",
]

MICRO_MAX_DIM = 64
_TOL = 1e-10


@dataclasses.dataclass(frozen=True, eq=False)
class SbsBoundTerms:
    """Inputs of the SBS distance bound for one system state.

    ``gamma_uno[a, a']`` is the collective decoherence factor and
    ``fid_mac[a, a', mac]`` the fidelity bound of each macrofraction.
    """

    p: np.ndarray
    c: np.ndarray
    gamma_uno: np.ndarray
    fid_mac: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        c = np.abs(np.asarray(self.c))
        d_s = p.size
        gamma = np.asarray(self.gamma_uno, dtype=float)
        fid = np.asarray(self.fid_mac, dtype=float)
        if fid.ndim == 2:
            fid = fid[:, :, None]
        if c.shape != (d_s, d_s) or gamma.shape != (d_s, d_s) or fid.shape[:2] != (d_s, d_s):
            raise ValueError("bound terms must be indexed by level pairs of one system")
        if np.any(p < -_TOL) or abs(p.sum() - 1.0) > _TOL:
            raise ValueError("p must be a probability vector")
        if np.any(c > np.sqrt(np.outer(p, p)) + _TOL):
            raise ValueError("|c_aa'| exceeds sqrt(p_a p_a')")
        for name, arr in (("gamma_uno", gamma), ("fid_mac", fid)):
            if np.any(arr < -_TOL) or np.any(arr > 1.0 + _TOL):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "gamma_uno", np.clip(gamma, 0.0, 1.0))
        object.__setattr__(self, "fid_mac", np.clip(fid, 0.0, 1.0))

    @property
    def d_S(self):
        return self.p.size


def epsilon_bound(terms):
    """Upper bound on the trace distance to the nearest SBS state.

    ``sum_{a != a'} [|c_aa'| sqrt(Gamma_aa') + sqrt(p_a p_a') sum_mac sqrt(F_aa'^mac)]``
    """
    off = ~np.eye(terms.d_S, dtype=bool)
    deco = terms.c * np.sqrt(terms.gamma_uno)
    dist = np.sqrt(np.outer(terms.p, terms.p)) * np.sqrt(terms.fid_mac).sum(axis=2)
    return float(np.sum((deco + dist)[off]))


def bound_terms_from_floors(config, p, c):
    """Terms with every pair factor set to its long-time average power."""
    pur = purity_avg(config.measure, config.d)
    d_s = len(p)
    gamma = np.full((d_s, d_s), gamma_floor(config.d, pur) ** config.N_uno)
    fid = np.full((d_s, d_s, config.M), superfid_floor(config.d, pur) ** config.N_mac)
    np.fill_diagonal(gamma, 1.0)
    return SbsBoundTerms(p=p, c=c, gamma_uno=gamma, fid_mac=fid)


def epsilon_average_asymptote(config):
    """Worst-case long-time bound ``d_S (d_S-1) [G_f^(N_uno/2) + M F_f^(N_mac/2)]``.

    Uses ``p_a, |c_aa'| <= 1`` and the floors of the averaged single-copy
    factors.
    """
    pur = purity_avg(config.measure, config.d)
    g = gamma_floor(config.d, pur) ** (config.N_uno / 2.0)
    f = superfid_floor(config.d, pur) ** (config.N_mac / 2.0)
    return config.d_S * (config.d_S - 1) * (g + config.M * f)


@dataclasses.dataclass(frozen=True)
class HoeffdingRow:
    delta: float
    empirical_prob: float
    bound: float

    @property
    def ok(self):
        return self.empirical_prob <= self.bound


def hoeffding_bound(delta):
    return 2.0 * math.exp(-2.0 * delta * delta)


def epsilon_proxy_sampler(config, g_t):
    """Sampler of the per-realization bound, clipped to ``[0, 1]``.

    Each draw takes fresh apparatus observables and states for all ``N``
    copies, a fresh system spectrum and a fresh system state.
    """
    d, d_s = config.d, config.d_S
    n_uno, n_mac, m = config.N_uno, config.N_mac, config.M
    iu = np.triu_indices(d_s, 1)
    t = g_t / config.g

    def copy_factors(rng, size, deltas, kind):
        # one fresh copy per sample; returns its factor for every level pair
        b = gue_batch(rng, size, d, config.eta_E)
        rho = state_batch(rng, size, d, config.measure)
        lam, vec = np.linalg.eigh(b)
        rho_rot = np.conj(np.swapaxes(vec, 1, 2)) @ rho @ vec
        out = np.empty(deltas.shape)
        for j in range(deltas.shape[1]):
            phase = deltas[:, j][:, None] * lam
            out[:, j] = factor_values(phase, rho_rot, [1.0], kind)[:, 0]
        return out

    def sampler(rng, size):
        a = np.linalg.eigvalsh(gue_batch(rng, size, d_s, config.eta_S))
        gaps = (a[:, :, None] - a[:, None, :])[:, iu[0], iu[1]]
        rho_s = state_batch(rng, size, d_s, config.measure)
        p = np.diagonal(rho_s, axis1=1, axis2=2).real
        c = np.abs(rho_s[:, iu[0], iu[1]])
        deltas = gaps * t
        gamma = np.ones_like(deltas)
        for _ in range(n_uno):
            gamma *= copy_factors(rng, size, deltas, FactorKind.DECOHERENCE)
        sqrt_fid = np.zeros_like(deltas)
        for _ in range(m):
            fid = np.ones_like(deltas)
            for _ in range(n_mac):
                fid *= copy_factors(rng, size, deltas, FactorKind.SUPERFIDELITY)
            sqrt_fid += np.sqrt(np.clip(fid, 0.0, 1.0))
        pp = np.sqrt(p[:, iu[0]] * p[:, iu[1]])
        eps = 2.0 * np.sum(c * np.sqrt(gamma) + pp * sqrt_fid, axis=1)
        return np.clip(eps, 0.0, 1.0)
    return sampler


def hoeffding_experiment(config, g_t, n_samples, delta_grid, workers=1):
    """Empirical deviation probabilities of the clipped bound vs ``2 exp(-2 delta^2)``.

    ``g_t`` is the time in units of ``1/g``. The sampled phases use
    ``B`` at scale ``eta_E`` and ``t = g_t / g``.
    """
    if n_samples < 100:
        raise ValueError(f"need at least 100 samples, got {n_samples}")
    values = draw(epsilon_proxy_sampler(config, g_t), n_samples,
                  config.master_seed, workers)
    dev = np.abs(values - values.mean())
    return [HoeffdingRow(float(delta), float(np.mean(dev >= delta)), hoeffding_bound(delta))
            for delta in delta_grid]


@dataclasses.dataclass(frozen=True, eq=False)
class MicroState:
    """Explicit state of the system and the observed copies."""

    d_S: int
    d: int
    n_obs: int
    n_uno: int
    state: np.ndarray

    def block(self, a, b):
        """Block ``<a| . |b>`` acting on the observed copies."""
        n = self.d ** self.n_obs
        return self.state[a * n:(a + 1) * n, b * n:(b + 1) * n]


def _kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def micro_evolve(A, Bs, rho0S, rho0s, t, n_uno):
    """Partially reduced state at time ``t``, assembled block by block.

    ``A`` must be diagonal; its eigenbasis is the pointer basis. The first
    ``n_uno`` entries of ``Bs``/``rho0s`` are traced out, the rest are kept
    in order.
    """
    if len(Bs) != len(rho0s):
        raise ValueError("need one initial state per apparatus observable")
    if not 0 <= n_uno <= len(Bs):
        raise ValueError("n_uno out of range")
    mat = np.asarray(A.matrix)
    if np.max(np.abs(mat - np.diag(np.diag(mat)))) > _TOL:
        raise ValueError("system observable must be supplied in diagonal form")
    levels = np.diag(mat).real
    d_s = levels.size
    rho_s = rho0S.matrix if isinstance(rho0S, DensityMatrix) else np.asarray(rho0S)
    states = [r.matrix if isinstance(r, DensityMatrix) else np.asarray(r) for r in rho0s]
    n_obs = len(Bs) - n_uno
    d = Bs[0].dim if Bs else 1
    dim = d_s * d ** n_obs
    if dim > MICRO_MAX_DIM:
        raise ValueError(f"micro state dimension {dim} exceeds {MICRO_MAX_DIM}")

    props = [[B.propagator(a * t) for a in levels] for B in Bs]
    n = d ** n_obs
    out = np.zeros((dim, dim), dtype=complex)
    for a in range(d_s):
        for b in range(d_s):
            coeff = rho_s[a, b]
            for k in range(n_uno):
                coeff *= np.trace(props[k][a] @ states[k] @ props[k][b].conj().T)
            blk = _kron_all(props[k][a] @ states[k] @ props[k][b].conj().T
                            for k in range(n_uno, len(Bs)))
            out[a * n:(a + 1) * n, b * n:(b + 1) * n] = coeff * blk
    return MicroState(d_S=d_s, d=d, n_obs=n_obs, n_uno=n_uno, state=out)


def _trace_norm(m):
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def micro_offdiag_norm(state):
    """Half the trace norm of the pointer-basis off-diagonal blocks."""
    off = state.state.copy()
    n = state.d ** state.n_obs
    for a in range(state.d_S):
        off[a * n:(a + 1) * n, a * n:(a + 1) * n] = 0.0
    return 0.5 * _trace_norm(off)


def sbs_state(p, conditional_states, copies):
    """``sum_a p_a |a><a| (x) rho_a^(x copies)``."""
    d_s = len(p)
    blocks = [_kron_all([np.asarray(conditional_states[a])] * copies) for a in range(d_s)]
    n = blocks[0].shape[0]
    out = np.zeros((d_s * n, d_s * n), dtype=complex)
    for a in range(d_s):
        out[a * n:(a + 1) * n, a * n:(a + 1) * n] = p[a] * blocks[a]
    return out


def trace_distance(rho, sigma):
    rho = rho.state if isinstance(rho, MicroState) else rho
    sigma = sigma.state if isinstance(sigma, MicroState) else sigma
    return 0.5 * _trace_norm(np.asarray(rho) - np.asarray(sigma))

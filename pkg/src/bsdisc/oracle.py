"""Brute-force verification engine on a truncated Fock space.

Everything here is deliberately literal: a pure signal-idler input is pushed
through the beam-splitter isometry amplitude by amplitude, the environment is
traced out as a finite sum, and error probability / fidelity / Chernoff
quantities are evaluated by dense Hermitian linear algebra.  The point is
independence from the series machinery in :mod:`bsdisc.nds`, which is
validated against these routines.

Basis convention: joint kets are labelled ``(idler_occupation,
signal_occupation)`` tuples and ordered lexicographically, idler first.  Debug
dumps (``dump_state``) are NumPy ``.npz`` archives holding the matrix under
``matrix`` and the basis labels under ``idler`` / ``signal`` integer arrays,
row ``i`` labelling basis index ``i``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    ChannelPair,
    NumericalError,
    ResourceLimitError,
    SignalDistribution,
)

__all__ = [
    "PureInputSpec",
    "DenseState",
    "propagate",
    "trace_norm_pe",
    "uhlmann_fidelity",
    "q_of_s_dense",
    "coherent_input_spec",
    "dump_state",
]

DEFAULT_DIM_CAP = 4096

_HERMITICITY_TOL = 1e-13
_TRACE_TOL = 1e-12
_PSD_FLOOR = -1e-12
_CLAMP_BUDGET = 1e-10
# eigenvalues below KERNEL_REL * lambda_max count as the kernel for s=0 / s=1
_KERNEL_REL = 1e-13


@dataclass(frozen=True)
class PureInputSpec:
    """Pure signal-idler input state in the photon-number representation.

    ``amplitudes`` maps ``(idler_occupation, signal_occupation)`` to a complex
    amplitude.  ``declared_tail`` is the squared-amplitude mass outside the
    stored support (nonzero for truncated infinite states such as coherent or
    two-mode squeezed inputs).
    """

    amplitudes: Mapping[tuple[tuple[int, ...], tuple[int, ...]], complex]
    cutoff: int
    declared_tail: float = 0.0

    def __post_init__(self):
        if not self.amplitudes:
            raise ValueError("empty amplitude map")
        sig_widths = {len(s) for _, s in self.amplitudes}
        idl_widths = {len(i) for i, _ in self.amplitudes}
        if len(sig_widths) != 1 or len(idl_widths) != 1:
            raise ValueError("inconsistent mode counts across amplitudes")
        for idl, sig in self.amplitudes:
            if any(n < 0 for n in idl) or any(n < 0 for n in sig):
                raise ValueError("occupations must be nonnegative")
            if any(n > self.cutoff for n in sig):
                raise ValueError(
                    f"signal occupation {sig} exceeds declared cutoff {self.cutoff}"
                )
        norm = math.fsum(abs(a) ** 2 for a in self.amplitudes.values())
        if abs(norm + self.declared_tail - 1.0) > 1e-10:
            raise ValueError(
                f"squared amplitudes ({norm}) plus declared tail "
                f"({self.declared_tail}) must equal 1"
            )

    @property
    def signal_modes(self) -> int:
        return len(next(iter(self.amplitudes))[1])

    @classmethod
    def from_nds(cls, d: SignalDistribution) -> "PureInputSpec":
        """Canonical purification of a number-diagonal signal distribution.

        One auxiliary idler mode is used, its occupation indexing the Schmidt
        branch; error quantities do not depend on this choice.
        """
        amps: dict[tuple[tuple[int, ...], tuple[int, ...]], complex] = {}
        for j, (occ, p) in enumerate(d.support()):
            if p > 0.0:
                amps[((j,), occ)] = complex(math.sqrt(p))
        cutoff = max(max(occ) for _, occ in amps) if amps else 0
        return cls(amplitudes=amps, cutoff=cutoff, declared_tail=d.tail_mass)


@dataclass(frozen=True)
class DenseState:
    """Density operator on an explicit joint idler+signal number basis."""

    matrix: np.ndarray
    basis: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    declared_tail: float = 0.0

    def __post_init__(self):
        m = self.matrix
        if m.shape != (len(self.basis), len(self.basis)):
            raise ValueError("matrix shape does not match basis size")
        if np.max(np.abs(m - m.conj().T)) > _HERMITICITY_TOL:
            raise NumericalError("density matrix is not Hermitian within 1e-13")
        trace = float(np.real(np.trace(m)))
        if abs(trace + self.declared_tail - 1.0) > _TRACE_TOL:
            raise NumericalError(
                f"trace {trace} inconsistent with declared tail {self.declared_tail}"
            )
        if float(np.min(np.linalg.eigvalsh(m))) < _PSD_FLOOR:
            raise NumericalError("density matrix has eigenvalues below -1e-12")

    @property
    def dim(self) -> int:
        return len(self.basis)


def _binom_sqrt(n: int, k: int) -> float:
    return math.sqrt(math.comb(n, k))


def _propagation_amplitude(n, k, c: ChannelPair, hypothesis: int) -> complex:
    """Isometry amplitude for scattering signal occupation n to environment k."""
    if hypothesis == 0:
        r, t, theta = c.r0, c.t0, c.theta0
    else:
        r, t, theta = c.r1, c.t1, c.theta1
    amp = 1.0
    total = 0
    for n_m, k_m in zip(n, k):
        total += n_m
        # r**0 must survive r == 0, hence the explicit zero handling
        surv = n_m - k_m
        f = _binom_sqrt(n_m, k_m)
        f *= r**surv if surv else 1.0
        f *= t**k_m if k_m else 1.0
        amp *= f
    if amp == 0.0:
        return 0.0
    return amp * cmath.exp(1j * total * theta)


def _env_occupations(n):
    """All environment occupations k <= n, lexicographic."""
    if not n:
        yield ()
        return
    head, rest = n[0], n[1:]
    for k0 in range(head + 1):
        for tail in _env_occupations(rest):
            yield (k0,) + tail


def propagate(
    spec: PureInputSpec,
    c: ChannelPair,
    hypothesis: int,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> DenseState:
    """Exact channel output state for one hypothesis.

    Builds the joint pure state over idler x signal x environment, then traces
    the environment out as a finite sum of projectors (one per environment
    occupation).  The basis is the full set of occupation pairs reachable from
    the input support, shared by both hypotheses.
    """
    if hypothesis not in (0, 1):
        raise ValueError("hypothesis must be 0 or 1")

    entries = sorted(spec.amplitudes.items())
    reachable = set()
    for (idl, sig), _amp in entries:
        for k in _env_occupations(sig):
            reachable.add((idl, tuple(n - kk for n, kk in zip(sig, k))))
    basis = tuple(sorted(reachable))
    if len(basis) > dim_cap:
        raise ResourceLimitError(
            f"Hilbert dimension {len(basis)} exceeds cap {dim_cap}"
        )
    index = {b: i for i, b in enumerate(basis)}

    # component of the joint state attached to each environment occupation
    components: dict[tuple[int, ...], np.ndarray] = {}
    for (idl, sig), amp in entries:
        for k in _env_occupations(sig):
            a = _propagation_amplitude(sig, k, c, hypothesis)
            if a == 0.0:
                continue
            vec = components.get(k)
            if vec is None:
                vec = np.zeros(len(basis), dtype=complex)
                components[k] = vec
            out = tuple(n - kk for n, kk in zip(sig, k))
            vec[index[(idl, out)]] += amp * a

    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    for k in sorted(components):
        v = components[k]
        rho += np.outer(v, v.conj())
    return DenseState(matrix=rho, basis=basis, declared_tail=spec.declared_tail)


def _aligned(rho0: DenseState, rho1: DenseState):
    """Embed two states into a common (union) basis."""
    if rho0.basis == rho1.basis:
        return rho0.matrix, rho1.matrix
    basis = tuple(sorted(set(rho0.basis) | set(rho1.basis)))
    index = {b: i for i, b in enumerate(basis)}

    def embed(state):
        out = np.zeros((len(basis), len(basis)), dtype=complex)
        rows = [index[b] for b in state.basis]
        out[np.ix_(rows, rows)] = state.matrix
        return out

    return embed(rho0), embed(rho1)


def trace_norm_pe(
    rho0: DenseState,
    rho1: DenseState,
    prior0: float = 0.5,
    prior1: float = 0.5,
) -> float:
    """Minimum discrimination error 1/2 - ||prior0 rho0 - prior1 rho1||_1 / 2."""
    m0, m1 = _aligned(rho0, rho1)
    eigs = np.linalg.eigvalsh(prior0 * m0 - prior1 * m1)
    return 0.5 - 0.5 * float(np.sum(np.abs(eigs)))


def _clamped_eigh(matrix: np.ndarray):
    """Hermitian eigendecomposition with negative eigenvalues clamped to zero.

    Rejects the instance if clamping moves the trace by more than the
    soundness budget.
    """
    vals, vecs = np.linalg.eigh(matrix)
    clamped = np.sum(np.abs(vals[vals < 0.0]))
    if clamped > _CLAMP_BUDGET:
        raise NumericalError(
            f"eigenvalue clamping would change the trace by {clamped:g}"
        )
    return np.maximum(vals, 0.0), vecs


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Principal square root of a PSD matrix via spectral decomposition.

    Eigenvalues within roundoff of zero are zeroed first; otherwise their
    square roots would inject O(sqrt(eps)) spurious support directions.
    """
    vals, vecs = _clamped_eigh(matrix)
    kernel_tol = _KERNEL_REL * float(np.max(vals)) if vals.size else 0.0
    vals = np.where(vals > kernel_tol, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def uhlmann_fidelity(rho0: DenseState, rho1: DenseState) -> float:
    """Jozsa-Uhlmann fidelity (tr sqrt(sqrt(rho0) rho1 sqrt(rho0)))**2.

    Evaluated as the squared nuclear norm of sqrt(rho1) @ sqrt(rho0), which
    is the same quantity but avoids squaring the inner matrix and keeps full
    double precision.
    """
    m0, m1 = _aligned(rho0, rho1)
    singular = np.linalg.svd(_psd_sqrt(m1) @ _psd_sqrt(m0), compute_uv=False)
    root = float(np.sum(singular))
    return min(1.0, root * root)


def _fractional_power(matrix: np.ndarray, s: float) -> np.ndarray:
    """matrix**s with the support convention 0**0 = 0 on the kernel."""
    vals, vecs = _clamped_eigh(matrix)
    kernel_tol = _KERNEL_REL * float(np.max(vals)) if vals.size else 0.0
    powered = np.where(vals > kernel_tol, vals, 0.0)
    if s == 0.0:
        powered = np.where(powered > 0.0, 1.0, 0.0)
    else:
        powered = powered**s
    return (vecs * powered) @ vecs.conj().T


def q_of_s_dense(rho0: DenseState, rho1: DenseState, s: float) -> float:
    """tr[rho0**s rho1**(1-s)] with zero-eigenvalue directions excluded.

    At s = 0 or 1 this is the overlap of one state with the other's support
    projector, which is strictly below 1 whenever the supports differ.
    """
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"s must lie in [0, 1], got {s}")
    m0, m1 = _aligned(rho0, rho1)
    a = _fractional_power(m0, s)
    b = _fractional_power(m1, 1.0 - s)
    return float(np.real(np.trace(a @ b)))


def coherent_input_spec(Ns: float, cutoff: int) -> PureInputSpec:
    """Single-mode coherent probe of energy ``Ns``, truncated at ``cutoff``.

    Amplitudes are Poissonian; the discarded mass is declared as the spec's
    truncation tail.
    """
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    amps: dict[tuple[tuple[int, ...], tuple[int, ...]], complex] = {}
    log_ns = math.log(Ns) if Ns > 0.0 else None
    masses = []
    for n in range(cutoff + 1):
        if Ns == 0.0:
            a = 1.0 if n == 0 else 0.0
        else:
            a = math.exp(0.5 * (n * log_ns - Ns) - 0.5 * math.lgamma(n + 1))
        if a > 0.0:
            amps[((), (n,))] = complex(a)
            masses.append(a * a)
    tail = max(0.0, 1.0 - math.fsum(masses))
    return PureInputSpec(amplitudes=amps, cutoff=cutoff, declared_tail=tail)


def dump_state(state: DenseState, path) -> None:
    """Write a state to ``path`` as a .npz archive (see module docstring)."""
    idler = np.array([b[0] for b in state.basis], dtype=np.int64)
    signal = np.array([b[1] for b in state.basis], dtype=np.int64)
    np.savez(
        path,
        matrix=state.matrix,
        idler=idler.reshape(len(state.basis), -1),
        signal=signal.reshape(len(state.basis), -1),
        declared_tail=np.float64(state.declared_tail),
    )

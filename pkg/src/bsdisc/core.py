"""Domain types and input-agnostic bounds for beam-splitter channel discrimination.

A channel hypothesis is a lossy beam splitter with reflectance ``R`` and phase
``theta`` acting on the signal modes, with vacuum entering the idle port.  The
quantities defined here depend on the probe only through its total signal
photon-number distribution, so they bound the performance of *every* probe
state with that distribution.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

__all__ = [
    "UnsupportedRegimeError",
    "TruncationError",
    "ResourceLimitError",
    "NumericalError",
    "CertifiedValue",
    "ChannelPair",
    "SignalDistribution",
    "SeriesControl",
    "BoundBracket",
    "thermal_mode_distribution",
    "total_photon_distribution",
    "overlap_lower_bound",
    "pe_lower_from_fidelity",
    "universal_pe_lower_bound",
    "qcb_exponent_upper_bound",
]

# Stored probabilities smaller than this are folded into the tail certificate.
PROB_FLUSH = 1e-300

_NORMALIZATION_TOL = 1e-12


class UnsupportedRegimeError(ValueError):
    """A quantity was requested outside the parameter regime where it is defined."""


class TruncationError(RuntimeError):
    """A series enumeration hit its term budget before reaching the requested tail.

    Carries the partial tail certificate so callers can decide whether the
    partial result is still useful.
    """

    def __init__(self, message, terms_emitted=0, residual0=math.inf, residual1=math.inf):
        super().__init__(message)
        self.terms_emitted = terms_emitted
        self.residual0 = residual0
        self.residual1 = residual1


class ResourceLimitError(RuntimeError):
    """A computation would exceed a configured resource guard (e.g. matrix dimension)."""


class NumericalError(RuntimeError):
    """A numerical routine produced results outside its soundness tolerances."""


@dataclass(frozen=True)
class CertifiedValue:
    """A float together with a rigorous bound on its absolute error.

    ``error`` accounts for declared input truncation and any series tails cut
    during evaluation; it does not model floating-point roundoff.
    """

    value: float
    error: float = 0.0

    def __post_init__(self):
        if self.error < 0.0 or math.isnan(self.error):
            raise ValueError(f"error bound must be nonnegative, got {self.error}")

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class ChannelPair:
    """The two beam-splitter hypotheses under discrimination.

    Reflectances are ordered ``R0 <= R1``.  Field reflectivities ``r_b``,
    transmissivities ``t_b`` and the phase difference ``delta`` are derived
    read-only properties.
    """

    R0: float
    R1: float
    theta0: float = 0.0
    theta1: float = 0.0
    prior0: float = 0.5
    prior1: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.R0 <= 1.0) or not (0.0 <= self.R1 <= 1.0):
            raise ValueError(f"reflectances must lie in [0, 1], got ({self.R0}, {self.R1})")
        if self.R0 > self.R1:
            raise ValueError(f"expected R0 <= R1, got R0={self.R0} > R1={self.R1}")
        if not (0.0 <= self.prior0 <= 1.0) or not (0.0 <= self.prior1 <= 1.0):
            raise ValueError("priors must lie in [0, 1]")
        if abs(self.prior0 + self.prior1 - 1.0) > _NORMALIZATION_TOL:
            raise ValueError(
                f"priors must sum to 1, got {self.prior0} + {self.prior1}"
            )
        for name in ("theta0", "theta1"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def r0(self) -> float:
        return math.sqrt(self.R0)

    @property
    def r1(self) -> float:
        return math.sqrt(self.R1)

    @property
    def T0(self) -> float:
        return 1.0 - self.R0

    @property
    def T1(self) -> float:
        return 1.0 - self.R1

    @property
    def t0(self) -> float:
        return math.sqrt(self.T0)

    @property
    def t1(self) -> float:
        return math.sqrt(self.T1)

    @property
    def delta(self) -> float:
        """Phase difference theta1 - theta0 between the two hypotheses."""
        return self.theta1 - self.theta0

    @property
    def photon_overlap(self) -> float:
        """Per-photon purification overlap r0*r1 + t0*t1.

        Equals 1 exactly when the channels are identical apart from phase.
        """
        return self.r0 * self.r1 + self.t0 * self.t1

    @property
    def equal_priors(self) -> bool:
        return self.prior0 == self.prior1

    @property
    def degenerate(self) -> bool:
        """True when both hypotheses are the same channel (R0=R1, delta=0)."""
        return self.R0 == self.R1 and self.delta == 0.0


def _clean_scalar_dist(probs: Mapping[int, float]) -> tuple[dict[int, float], float]:
    """Validate a single-mode photon-number distribution.

    Returns the cleaned mapping and the probability mass flushed to the tail
    (entries below ``PROB_FLUSH``).
    """
    cleaned: dict[int, float] = {}
    flushed = 0.0
    for n, p in probs.items():
        if not isinstance(n, int) or n < 0:
            raise ValueError(f"photon numbers must be nonnegative integers, got {n!r}")
        if p < 0.0 or math.isnan(p):
            raise ValueError(f"probabilities must be nonnegative, got p[{n}]={p}")
        if p < PROB_FLUSH:
            flushed += p
        else:
            cleaned[n] = p
    return cleaned, flushed


@dataclass(frozen=True)
class SignalDistribution:
    """Multimode signal photon-number distribution of a number-diagonal probe.

    Supports two storage forms: an explicit sparse map from occupation vectors
    to probabilities, and a product of per-mode scalar distributions (expanded
    lazily).  ``tail_mass`` certifies the probability mass lying outside the
    stored support, so every derived series carries a propagated error bound
    instead of a silent truncation.
    """

    modes: int
    tail_mass: float = 0.0
    sparse_probs: Mapping[tuple[int, ...], float] | None = None
    factors: tuple[Mapping[int, float], ...] | None = None
    tail_energy_bound: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("need at least one signal mode")
        if (self.sparse_probs is None) == (self.factors is None):
            raise ValueError("exactly one of sparse_probs / factors must be given")
        if self.tail_mass < -_NORMALIZATION_TOL:
            raise ValueError("tail_mass must be nonnegative")
        stored = self.stored_mass
        if abs(stored + self.tail_mass - 1.0) > _NORMALIZATION_TOL:
            raise ValueError(
                f"stored mass {stored} plus tail {self.tail_mass} must equal 1"
            )

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_sparse(cls, probs, modes=None, tail_mass=0.0, tail_energy_bound=None):
        """Build from an explicit map occupation-vector -> probability."""
        cleaned: dict[tuple[int, ...], float] = {}
        flushed = 0.0
        width = modes
        for occ, p in probs.items():
            occ = tuple(int(n) for n in occ)
            if width is None:
                width = len(occ)
            if len(occ) != width:
                raise ValueError("all occupation vectors must have the same length")
            if any(n < 0 for n in occ):
                raise ValueError(f"occupations must be nonnegative, got {occ}")
            if p < 0.0 or math.isnan(p):
                raise ValueError(f"probabilities must be nonnegative, got p[{occ}]={p}")
            if p < PROB_FLUSH:
                flushed += p
            else:
                cleaned[occ] = cleaned.get(occ, 0.0) + p
        if width is None:
            raise ValueError("empty distribution")
        return cls(
            modes=width,
            tail_mass=tail_mass + flushed,
            sparse_probs=cleaned,
            tail_energy_bound=tail_energy_bound,
        )

    @classmethod
    def from_product(cls, factors: Sequence[Mapping[int, float]], tail_energy_bound=None):
        """Build from per-mode scalar distributions; per-mode tails multiply out.

        Each factor may sum to less than 1, the shortfall being that mode's
        certified tail.
        """
        if len(factors) < 1:
            raise ValueError("need at least one factor")
        cleaned = []
        for probs in factors:
            probs, _flushed = _clean_scalar_dist(probs)
            if not probs:
                raise ValueError("a factor lost all stored mass")
            cleaned.append(probs)
        stored = math.prod(math.fsum(f.values()) for f in cleaned)
        if stored > 1.0 + _NORMALIZATION_TOL:
            raise ValueError(f"stored product mass {stored} exceeds 1")
        return cls(
            modes=len(cleaned),
            tail_mass=max(0.0, 1.0 - stored),
            factors=tuple(cleaned),
            tail_energy_bound=tail_energy_bound,
        )

    @classmethod
    def fock(cls, occupation: Sequence[int]) -> "SignalDistribution":
        """Deterministic occupation (a multimode number state's signal statistics)."""
        return cls.from_sparse({tuple(occupation): 1.0})

    @classmethod
    def vacuum(cls, modes: int = 1) -> "SignalDistribution":
        return cls.fock((0,) * modes)

    # -- accessors ----------------------------------------------------------

    @property
    def is_product(self) -> bool:
        return self.factors is not None

    @property
    def stored_mass(self) -> float:
        if self.sparse_probs is not None:
            return math.fsum(self.sparse_probs.values())
        return math.prod(math.fsum(f.values()) for f in self.factors)

    def support(self) -> Iterator[tuple[tuple[int, ...], float]]:
        """Iterate stored (occupation, probability) pairs in lexicographic order.

        For the product form this expands the full cartesian support; callers
        working at scale should use the per-mode ``factors`` directly.
        """
        if self.sparse_probs is not None:
            yield from sorted(self.sparse_probs.items())
            return

        def rec(prefix, acc, remaining):
            if not remaining:
                yield prefix, acc
                return
            head, *rest = remaining
            for n in sorted(head):
                yield from rec(prefix + (n,), acc * head[n], rest)

        yield from rec((), 1.0, list(self.factors))

    def max_occupation(self) -> tuple[int, ...]:
        """Componentwise maximum stored occupation (bounding box of the support)."""
        if self.sparse_probs is not None:
            if not self.sparse_probs:
                return (0,) * self.modes
            return tuple(
                max(occ[m] for occ in self.sparse_probs) for m in range(self.modes)
            )
        return tuple(max(f) for f in self.factors)

    def mean_energy(self) -> CertifiedValue:
        """Mean total signal photon number over the stored support.

        The error bound is exact (0) for fully stored distributions, the
        declared ``tail_energy_bound`` when one was certified at construction,
        and infinite otherwise.
        """
        if self.sparse_probs is not None:
            value = math.fsum(p * sum(occ) for occ, p in self.sparse_probs.items())
        else:
            # sum of per-mode means, weighted by the other modes' stored mass
            masses = [math.fsum(f.values()) for f in self.factors]
            total = math.prod(masses)
            value = 0.0
            for i, f in enumerate(self.factors):
                mean_i = math.fsum(n * p for n, p in f.items())
                value += mean_i * total / masses[i]
        if self.tail_mass <= 0.0:
            err = 0.0
        elif self.tail_energy_bound is not None:
            err = self.tail_energy_bound
        else:
            err = math.inf
        return CertifiedValue(value, err)


@dataclass(frozen=True)
class SeriesControl:
    """Knobs for certified series evaluation."""

    tail_tolerance: float = 1e-12
    max_terms: int = 200_000
    s_tolerance: float = 1e-10

    def __post_init__(self):
        if self.tail_tolerance <= 0.0:
            raise ValueError("tail_tolerance must be positive")
        if self.max_terms <= 0:
            raise ValueError("max_terms must be positive")
        if self.s_tolerance <= 0.0:
            raise ValueError("s_tolerance must be positive")


_BRACKET_SOURCES = ("fidelity", "chernoff", "exact")


@dataclass(frozen=True)
class BoundBracket:
    """Lower/upper bracket on an average error probability.

    ``source`` records which bound family produced the binding upper edge:
    ``"exact"`` when the bracket collapses to an exactly computed value,
    ``"chernoff"`` when a Chernoff-type bound is tighter than the fidelity
    bound, ``"fidelity"`` otherwise.
    """

    lower: float
    upper: float
    source: str

    def __post_init__(self):
        if self.source not in _BRACKET_SOURCES:
            raise ValueError(f"source must be one of {_BRACKET_SOURCES}")
        if not (-1e-15 <= self.lower <= self.upper <= 0.5 + 1e-15):
            raise ValueError(
                f"bracket must satisfy 0 <= lower <= upper <= 1/2, got "
                f"[{self.lower}, {self.upper}]"
            )


def thermal_mode_distribution(mean: float, tail_tol: float = 1e-13):
    """Truncated Bose-Einstein (geometric) photon-number distribution.

    Returns ``(probs, tail_energy)``: the stored mapping whose geometric tail
    is below ``tail_tol``, and a closed-form bound on the mean photon number
    carried by the discarded tail.
    """
    if mean < 0.0:
        raise ValueError("mean photon number must be nonnegative")
    if mean == 0.0:
        return {0: 1.0}, 0.0
    q = mean / (mean + 1.0)
    # smallest K with q^(K+1) < tail_tol
    cutoff = max(0, math.ceil(math.log(tail_tol) / math.log(q)) - 1)
    probs = {}
    w = 1.0 / (mean + 1.0)
    for n in range(cutoff + 1):
        probs[n] = w
        w *= q
    # sum_{n>K} n q^n (1-q) = q^{K+1} ((K+1)(1-q) + q) / (1-q)
    tail_energy = q ** (cutoff + 1) * ((cutoff + 1) * (1.0 - q) + q) / (1.0 - q)
    return probs, tail_energy


# ---------------------------------------------------------------------------
# input-agnostic operations
# ---------------------------------------------------------------------------


def total_photon_distribution(d: SignalDistribution) -> tuple[dict[int, float], float]:
    """Reduce a multimode distribution to the distribution of the total count.

    Returns ``(p_total, tail)`` where ``tail`` is the input's certified tail
    mass; the stored probabilities and the tail sum to 1.
    """
    if d.sparse_probs is not None:
        out: dict[int, float] = {}
        for occ, p in sorted(d.sparse_probs.items()):
            out[sum(occ)] = out.get(sum(occ), 0.0) + p
        return dict(sorted(out.items())), d.tail_mass

    # iterated convolution of the per-mode distributions
    acc = {0: 1.0}
    for f in d.factors:
        nxt: dict[int, float] = {}
        for a, pa in sorted(acc.items()):
            for b, pb in sorted(f.items()):
                nxt[a + b] = nxt.get(a + b, 0.0) + pa * pb
        acc = nxt
    return dict(sorted(acc.items())), d.tail_mass


def overlap_lower_bound(d: SignalDistribution, c: ChannelPair) -> CertifiedValue:
    """Squared purification overlap of the two channel outputs.

    This is a lower bound on the output-state fidelity of *any* probe whose
    signal statistics are ``d``, and is tight for number-diagonal probes when
    the hypotheses differ only in reflectance.  Depends on ``d`` only through
    the total photon-number distribution.
    """
    p_total, tail = total_photon_distribution(d)
    mu = c.photon_overlap
    delta = c.delta
    re = []
    im = []
    for n, p in p_total.items():
        z = p * (mu**n) * cmath.exp(1j * n * delta)
        re.append(z.real)
        im.append(z.imag)
    s = complex(math.fsum(re), math.fsum(im))
    mag = abs(s)
    value = min(1.0, mag * mag)
    # each omitted term has magnitude <= its probability
    err = 2.0 * mag * tail + tail * tail
    return CertifiedValue(value, err)


def pe_lower_from_fidelity(fidelity: float) -> float:
    """Error-probability lower bound (1 - sqrt(1 - F)) / 2 from a fidelity F."""
    if not (0.0 <= fidelity <= 1.0):
        raise ValueError(f"fidelity must lie in [0, 1], got {fidelity}")
    return 0.5 * (1.0 - math.sqrt(1.0 - fidelity))


def universal_pe_lower_bound(Ns: float, c: ChannelPair) -> float:
    """Energy-only lower bound on the error probability at zero phase contrast.

    Valid for every probe of mean signal energy ``Ns``; follows from convexity
    of x -> mu^x, which fails when the hypotheses differ in phase, so a
    nonzero ``delta`` is rejected.
    """
    if c.delta != 0.0:
        raise UnsupportedRegimeError(
            "the energy-only lower bound requires identical channel phases"
        )
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    mu = c.photon_overlap
    min_fidelity = mu ** (2.0 * Ns) if mu > 0.0 else (1.0 if Ns == 0.0 else 0.0)
    return pe_lower_from_fidelity(min(1.0, min_fidelity))


def qcb_exponent_upper_bound(Ns: float, c: ChannelPair) -> float:
    """Cap on any per-copy Chernoff exponent at per-copy signal energy ``Ns``.

    Returns ``-2 * Ns * ln(mu)``.  Identical channels give 0 (no exponent is
    achievable); perfectly distinguishable channels (mu = 0) give ``inf``.
    """
    if c.delta != 0.0:
        raise UnsupportedRegimeError(
            "the exponent cap requires identical channel phases"
        )
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    mu = c.photon_overlap
    if mu == 0.0:
        return math.inf
    return -2.0 * Ns * math.log(mu)

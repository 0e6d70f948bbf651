"""Closed-form and semi-analytic performance of the named probe families.

Three transmitter families admit fast paths: single-mode coherent states (the
optimal classical probes), multimode number states (whose outputs commute, so
photon counting plus a threshold is optimal), and tensor products of two-mode
squeezed vacuum pairs ("EPR" probes, evaluated through per-pair closed forms).

All reflectance-only formulas here assume zero phase contrast between the
hypotheses; number-state results are phase-independent because the output
states are diagonal in the number basis either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    ChannelPair,
    NumericalError,
    SignalDistribution,
    UnsupportedRegimeError,
    pe_lower_from_fidelity,
    thermal_mode_distribution,
)

__all__ = [
    "FockInput",
    "EprInput",
    "EprCoefficients",
    "coherent_pe",
    "coherent_chernoff",
    "fock_count_distribution",
    "fock_threshold",
    "fock_pe",
    "fock_chernoff",
    "fock_special_pe",
    "gain",
    "epr_coeffs",
    "epr_q_of_s",
    "epr_chernoff",
    "epr_fidelity",
    "epr_pe_lower",
    "epr_bhattacharyya_limit",
    "epr_signal_distribution",
]


@dataclass(frozen=True)
class FockInput:
    """A multimode number-state probe, described by its occupation."""

    occupation: tuple[int, ...]

    def __post_init__(self):
        if not self.occupation:
            raise ValueError("need at least one mode")
        if any(n < 0 or not isinstance(n, int) for n in self.occupation):
            raise ValueError("occupations must be nonnegative integers")

    @property
    def Ns(self) -> int:
        return sum(self.occupation)

    def distribution(self) -> SignalDistribution:
        return SignalDistribution.fock(self.occupation)


@dataclass(frozen=True)
class EprInput:
    """M two-mode squeezed vacuum pairs with total signal energy Ns."""

    M: int
    Ns: float

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("need at least one signal-idler pair")
        if self.Ns < 0.0:
            raise ValueError("signal energy must be nonnegative")

    @property
    def N(self) -> float:
        """Per-pair mean signal photon number."""
        return self.Ns / self.M


def _require_zero_delta(c: ChannelPair, what: str) -> None:
    if c.delta != 0.0:
        raise UnsupportedRegimeError(f"{what} requires identical channel phases")


# ---------------------------------------------------------------------------
# coherent states
# ---------------------------------------------------------------------------


def coherent_pe(Ns: float, c: ChannelPair) -> float:
    """Exact error probability of the single-mode coherent probe |sqrt(Ns)>.

    The two outputs are pure coherent states, so the two-pure-state Helstrom
    formula applies; this also equals the best performance of any classical
    (positive-P) probe of the same energy.
    """
    _require_zero_delta(c, "the coherent-state closed form")
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    overlap = math.exp(-((c.r1 - c.r0) ** 2) * Ns)
    return 0.5 * (1.0 - math.sqrt(1.0 - overlap))


def coherent_chernoff(Ns: float, c: ChannelPair) -> tuple[float, float]:
    """Chernoff bound and exponent for the coherent probe.

    Returns ``(bound, exponent)`` with bound = exp(-exponent * Ns) / 2 and
    exponent = (r1 - r0)**2.
    """
    _require_zero_delta(c, "the coherent-state Chernoff bound")
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    exponent = (c.r1 - c.r0) ** 2
    return 0.5 * math.exp(-exponent * Ns), exponent


# ---------------------------------------------------------------------------
# number states
# ---------------------------------------------------------------------------


def _binomial_pmf(n: int, p: float) -> list[float]:
    """Binomial(n, p) pmf by up/down recurrence from the mode.

    Stable for n up to ~1e4; extreme-tail entries may underflow to 0, which
    is below the library-wide probability flush threshold anyway.
    """
    if n == 0:
        return [1.0]
    if p <= 0.0:
        return [1.0] + [0.0] * n
    if p >= 1.0:
        return [0.0] * n + [1.0]
    pmf = [0.0] * (n + 1)
    mode = min(n, int((n + 1) * p))
    log_mode = (
        math.lgamma(n + 1)
        - math.lgamma(mode + 1)
        - math.lgamma(n - mode + 1)
        + mode * math.log(p)
        + (n - mode) * math.log1p(-p)
    )
    pmf[mode] = math.exp(log_mode)
    ratio = p / (1.0 - p)
    for t in range(mode, n):
        pmf[t + 1] = pmf[t] * ((n - t) / (t + 1)) * ratio
    for t in range(mode, 0, -1):
        pmf[t - 1] = pmf[t] * (t / (n - t + 1)) / ratio
    return pmf


def _check_integer_energy(Ns) -> int:
    n = round(Ns)
    if abs(Ns - n) > 1e-9 or n < 0:
        raise ValueError(f"number-state probes need integer Ns >= 0, got {Ns}")
    return int(n)


def fock_count_distribution(f: FockInput, c: ChannelPair, hypothesis: int) -> list[float]:
    """Distribution of the total reflected photon count T under one hypothesis.

    Each of the Ns photons survives independently with probability R_b, so T
    is Binomial(Ns, R_b) no matter how the photons are split across modes.
    Returns ``pmf`` with ``pmf[T]`` for T = 0..Ns.
    """
    if hypothesis not in (0, 1):
        raise ValueError("hypothesis must be 0 or 1")
    return _binomial_pmf(f.Ns, c.R0 if hypothesis == 0 else c.R1)


def fock_threshold(Ns: float, c: ChannelPair) -> float:
    """Count threshold equivalent to the likelihood-ratio rule: say 1 iff T >= T*."""
    if not (0.0 < c.R0 < c.R1 < 1.0):
        raise ValueError("the threshold form needs 0 < R0 < R1 < 1")
    return Ns * math.log(c.T0 / c.T1) / math.log(c.R1 * c.T0 / (c.R0 * c.T1))


def fock_pe(Ns, c: ChannelPair) -> float:
    """Exact error probability of any Ns-photon number-state probe.

    Photon counting plus the threshold rule is the optimal measurement; ties
    at T = T* decide hypothesis 1.  Identical reflectances give exactly 1/2;
    boundary reflectances are served by :func:`fock_special_pe`.
    """
    n = _check_integer_energy(Ns)
    if c.R0 == c.R1:
        return 0.5
    if not (0.0 < c.R0 < c.R1 < 1.0):
        raise ValueError("use fock_special_pe at boundary reflectances")
    cut = math.ceil(fock_threshold(n, c))
    pmf0 = _binomial_pmf(n, c.R0)
    pmf1 = _binomial_pmf(n, c.R1)
    miss = math.fsum(pmf0[max(0, cut):])          # said 1, was 0
    false_rest = math.fsum(pmf1[: max(0, cut)])   # said 0, was 1
    return 0.5 * (miss + false_rest)


def _fock_exponent(c: ChannelPair) -> tuple[float, float]:
    """Number-state Chernoff exponent and minimising s, boundary limits included."""
    if c.R0 == c.R1:
        return 0.0, 0.5
    if c.R0 == 0.0 and c.R1 == 1.0:
        return math.inf, 0.5
    if c.R0 == 0.0:
        # rho0 is pure vacuum; Q(s) -> T1^(1-s), minimised at s = 0
        return -math.log(c.T1), 0.0
    if c.R1 == 1.0:
        # rho1 is pure; Q(s) -> R0^s, minimised at s = 1
        return -math.log(c.R0), 1.0
    s = math.log(
        (-c.R1 * math.log(c.R0 / c.R1)) / (c.T1 * math.log(c.T0 / c.T1))
    ) / math.log(c.T0 * c.R1 / (c.T1 * c.R0))
    s = min(1.0, max(0.0, s))
    q1 = c.R0**s * c.R1 ** (1.0 - s) + c.T0**s * c.T1 ** (1.0 - s)
    return -math.log(q1), s


def fock_chernoff(Ns, c: ChannelPair) -> tuple[float, float, float]:
    """Chernoff bound for number-state probes: ``(bound, exponent, s_star)``.

    The bound is (R0^s R1^(1-s) + T0^s T1^(1-s))^Ns / 2 at the analytic
    optimum s.  Valid for interior reflectances (R0 > 0 and R1 < 1); the
    boundary cases collapse to the exact results of :func:`fock_special_pe`.
    """
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    if c.R0 == 0.0 or c.R1 == 1.0:
        raise ValueError("the classical Chernoff form needs R0 > 0 and R1 < 1")
    exponent, s = _fock_exponent(c)
    return 0.5 * math.exp(-exponent * Ns), exponent, s


def fock_special_pe(Ns, c: ChannelPair) -> float:
    """Exact number-state error probability at boundary reflectances.

    Target detection (R0 = 0): declare the target present iff any photon
    returns, giving T1**Ns / 2.  Ideal memory (R1 = 1): declare hypothesis 1
    iff all Ns photons return, giving R0**Ns / 2, which saturates the
    fidelity bound exactly.
    """
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    if c.R0 == 0.0:
        return 0.5 * c.T1**Ns
    if c.R1 == 1.0:
        return 0.5 * c.R0**Ns
    raise ValueError("fock_special_pe needs R0 = 0 (detection) or R1 = 1 (ideal memory)")


def gain(c: ChannelPair) -> float:
    """Ratio of number-state to coherent-state Chernoff exponents.

    Defined as 1 at R0 = R1 by continuity (both exponents vanish there).
    """
    if c.R0 == c.R1:
        return 1.0
    num, _s = _fock_exponent(c)
    cs = (c.r1 - c.r0) ** 2
    return num / cs


# ---------------------------------------------------------------------------
# EPR (two-mode squeezed vacuum) probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EprCoefficients:
    """Coefficients of the per-pair Chernoff-type quantity Q(s) = 1/(C a^s - D b^s)."""

    alpha: float
    beta: float
    C: float
    D: float

    def q1_of_s(self, s: float) -> float:
        """Single-pair Q(s)."""
        return 1.0 / (self.C * self.alpha**s - self.D * self.beta**s)


def epr_coeffs(e: EprInput, c: ChannelPair) -> EprCoefficients:
    """Closed-form coefficients of the per-pair Q(s) for an EPR probe.

    Requires a lossy hypothesis 1 (T1 > 0); the ideal-memory limit is served
    by the dedicated branch in :func:`epr_chernoff`.  The structural
    inequalities alpha <= beta and C > D are validated.
    """
    _require_zero_delta(c, "the EPR closed forms")
    if c.T1 == 0.0:
        raise UnsupportedRegimeError(
            "T1 = 0 degenerates beta; use the ideal-memory branch of epr_chernoff"
        )
    N = e.N
    alpha = (c.T0 * N + 1.0) / (c.T1 * N + 1.0)
    beta = c.T0 / c.T1
    C = ((1.0 - c.r0 * c.r1) * N + 1.0) ** 2 / (c.T0 * N + 1.0)
    D = c.T1 * N
    if alpha > beta * (1.0 + 1e-12) or C <= D:
        raise NumericalError(
            f"EPR coefficient inequalities violated: alpha={alpha}, beta={beta}, "
            f"C={C}, D={D}"
        )
    return EprCoefficients(alpha=alpha, beta=beta, C=C, D=D)


def epr_q_of_s(e: EprInput, c: ChannelPair, s: float) -> float:
    """Closed-form Q(s) of the M-pair EPR probe (per-pair value to the M-th power)."""
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"s must lie in [0, 1], got {s}")
    _require_zero_delta(c, "the EPR closed forms")
    if c.T1 == 0.0:
        # hypothesis 1 is the identity: only the no-loss block survives
        N = e.N
        u = (1.0 - c.r0) * N + 1.0
        q1 = (c.T0 * N + 1.0) ** (1.0 - s) / (u * u)
        return math.exp(e.M * math.log(q1))
    coeffs = epr_coeffs(e, c)
    return math.exp(-e.M * math.log(1.0 / coeffs.q1_of_s(s)))


def epr_chernoff(e: EprInput, c: ChannelPair) -> tuple[float, float]:
    """EPR Chernoff bound ``(bound, s_star)`` from the convexity case analysis.

    Q'(0) >= 0 puts the minimum at s = 0; otherwise the stationary point is
    solved in closed form and clamped to 1 when it lands outside the interval.
    The ideal-memory case (T1 = 0) is minimised at s = 1.
    """
    _require_zero_delta(c, "the EPR Chernoff bound")
    if e.N == 0.0:
        return 0.5, 0.0
    if c.T1 == 0.0:
        u = (1.0 - c.r0) * e.N + 1.0
        return 0.5 * math.exp(-2.0 * e.M * math.log(u)), 1.0
    coeffs = epr_coeffs(e, c)
    c_ln_alpha = coeffs.C * math.log(coeffs.alpha)
    d_ln_beta = coeffs.D * math.log(coeffs.beta)
    if d_ln_beta >= c_ln_alpha:
        s_star = 0.0
    else:
        s_star = math.log(c_ln_alpha / d_ln_beta) / math.log(coeffs.beta / coeffs.alpha)
        s_star = min(1.0, s_star)
    den = coeffs.C * coeffs.alpha**s_star - coeffs.D * coeffs.beta**s_star
    return 0.5 * math.exp(-e.M * math.log(den)), s_star


def epr_fidelity(e: EprInput, c: ChannelPair) -> float:
    """Output fidelity of the M-pair EPR probe, ((1 - r0r1 - t0t1) N + 1)^(-2M)."""
    _require_zero_delta(c, "the EPR fidelity closed form")
    shrink = (1.0 - c.r0 * c.r1 - c.t0 * c.t1) * e.N
    return math.exp(-2.0 * e.M * math.log1p(shrink))


def epr_pe_lower(e: EprInput, c: ChannelPair) -> float:
    """Fidelity-based lower bound on the EPR probe's error probability."""
    return pe_lower_from_fidelity(epr_fidelity(e, c))


def _bhattacharyya_log1p_arg(N: float, c: ChannelPair) -> float:
    """1/Q(1/2) - 1 per pair, evaluated without cancellation for small N.

    1/Q(1/2) = C sqrt(alpha) - D sqrt(beta) = u**2 / v - w with
    u = (1 - r0 r1) N + 1, v = sqrt((T0 N + 1)(T1 N + 1)), w = N sqrt(T0 T1);
    every O(1) piece cancels analytically below, leaving an O(N) expression.
    """
    one_minus = 1.0 - c.r0 * c.r1
    u2_minus_1 = N * (2.0 * one_minus + one_minus * one_minus * N)
    v = math.sqrt((c.T0 * N + 1.0) * (c.T1 * N + 1.0))
    v_minus_1 = N * ((c.T0 + c.T1) + c.T0 * c.T1 * N) / (1.0 + v)
    w = N * math.sqrt(c.T0 * c.T1)
    return (u2_minus_1 - (v_minus_1 * (w + 1.0) + w)) / v


def epr_bhattacharyya_limit(
    Ns: float, c: ChannelPair, tol: float = 1e-10, max_doublings: int = 200
) -> float:
    """Infinite-pair limit of the EPR Bhattacharyya bound at fixed total energy.

    Evaluates B_M = [Q(1/2) per pair at N = Ns/M]^M / 2 over M = 2^j and
    Richardson-extrapolates the O(1/M) convergence, stopping once successive
    iterates differ by less than ``tol``.
    """
    _require_zero_delta(c, "the EPR Bhattacharyya limit")
    if Ns < 0.0:
        raise ValueError("signal energy must be nonnegative")
    if Ns == 0.0:
        return 0.5

    def b_of(M: float) -> float:
        return 0.5 * math.exp(-M * math.log1p(_bhattacharyya_log1p_arg(Ns / M, c)))

    prev = b_of(1.0)
    for j in range(1, max_doublings + 1):
        cur = b_of(float(2**j))
        if abs(cur - prev) < tol:
            return min(0.5, max(0.0, 2.0 * cur - prev))
        prev = cur
    raise NumericalError(
        f"Bhattacharyya limit did not converge; last iterates {prev}, {cur}"
    )


def epr_signal_distribution(
    N: float, modes: int = 1, tail_tol: float = 1e-16
) -> SignalDistribution:
    """Signal photon statistics of M EPR pairs: product of thermal marginals.

    The default stored tail is far below the library's series tolerances so
    that block series on this distribution match the closed forms to better
    than 1e-12; quantities with probabilities in denominators (Q(s) near
    s = 1) are the binding constraint.
    """
    probs, tail_energy = thermal_mode_distribution(N, tail_tol)
    tail_single = max(0.0, 1.0 - math.fsum(probs.values()))
    energy_bound = modes * tail_energy + N * modes * (modes - 1) * tail_single
    return SignalDistribution.from_product(
        [probs] * modes, tail_energy_bound=energy_bound
    )

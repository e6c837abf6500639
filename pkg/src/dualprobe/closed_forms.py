"""Closed-form expectation values on resonance, used as oracles.

Three exact solutions of the master equation are implemented for delta = 0:
the full-secular weak-decoherence form, and the purely transversal /
purely longitudinal forms that remain valid at arbitrarily strong
decoherence.  Each solution is available both as a numerically stable
evaluator (a single complex-arithmetic path across the oscillating and
overdamped regimes) and as an :class:`ExpTermSet` decomposition into
decaying (co)sines for the effective-rate machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolve import TimeSeries
from .operators import SystemParams
from .redfield import DecoherenceRates


class RegimeError(ValueError):
    """Raised when parameters leave the validity regime of a formula."""


@dataclass(frozen=True)
class ExpTerm:
    """One contribution c * exp(-decay t) * cos/sin(frequency t)."""

    coefficient: float
    decay: float
    frequency: float
    phase: str = "cos"

    def __post_init__(self) -> None:
        if self.phase not in ("cos", "sin"):
            raise ValueError(f"phase must be 'cos' or 'sin', got {self.phase!r}")
        if self.decay < -1e-12 or self.frequency < -1e-12:
            raise ValueError("decay rates and frequencies must be nonnegative")

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        osc = np.cos(self.frequency * t) if self.phase == "cos" else np.sin(self.frequency * t)
        return self.coefficient * np.exp(-self.decay * t) * osc

    @property
    def is_constant(self) -> bool:
        return self.decay == 0.0 and self.frequency == 0.0 and self.phase == "cos"


@dataclass(frozen=True)
class ExpTermSet:
    """A signal written as a finite sum of decaying oscillations."""

    terms: tuple[ExpTerm, ...]

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        total = np.zeros_like(t)
        for term in self.terms:
            total = total + term.evaluate(t)
        return total

    @property
    def constant(self) -> float:
        return sum(term.coefficient for term in self.terms if term.is_constant)

    def transient_terms(self) -> tuple[ExpTerm, ...]:
        return tuple(term for term in self.terms if not term.is_constant)


def _merge_modes(modes: list[tuple[complex, complex]], drop_tol: float = 1e-14) -> list[tuple[complex, complex]]:
    merged: list[tuple[complex, complex]] = []
    for amp, rate in modes:
        for i, (a0, r0) in enumerate(merged):
            if abs(rate - r0) < 1e-9 * (1.0 + abs(r0)):
                merged[i] = (a0 + amp, r0)
                break
        else:
            merged.append((amp, rate))
    scale = max((abs(a) for a, _ in merged), default=1.0)
    return [(a, r) for a, r in merged if abs(a) > drop_tol * max(scale, 1.0)]


def _terms_from_modes(modes: list[tuple[complex, complex]]) -> tuple[ExpTerm, ...]:
    """Convert sum(a_j exp(z_j t)) with conjugate-paired modes to real terms."""
    merged = _merge_modes(modes)
    terms: list[ExpTerm] = []
    used = [False] * len(merged)
    for i, (amp, rate) in enumerate(merged):
        if used[i]:
            continue
        if abs(rate.imag) < 1e-9:
            if abs(amp.imag) > 1e-9 * (1.0 + abs(amp)):
                raise ValueError("real mode with complex amplitude; modes are not conjugate-paired")
            terms.append(ExpTerm(amp.real, max(0.0, -rate.real), 0.0, "cos"))
            used[i] = True
            continue
        if rate.imag < 0:
            continue  # handled together with its conjugate partner
        partner = None
        for j, (amp_j, rate_j) in enumerate(merged):
            if not used[j] and j != i and abs(rate_j - rate.conjugate()) < 1e-9 * (1.0 + abs(rate)):
                partner = j
                break
        if partner is None:
            raise ValueError("unpaired oscillatory mode; signal would be complex")
        amp_c = merged[partner][0]
        if abs(amp_c - amp.conjugate()) > 1e-8 * (1.0 + abs(amp)):
            raise ValueError("oscillatory mode amplitudes are not conjugate")
        used[i] = used[partner] = True
        gamma = max(0.0, -rate.real)
        omega = rate.imag
        c_cos = 2.0 * amp.real
        c_sin = -2.0 * amp.imag
        if abs(c_cos) > 1e-14:
            terms.append(ExpTerm(c_cos, gamma, omega, "cos"))
        if abs(c_sin) > 1e-14:
            terms.append(ExpTerm(c_sin, gamma, omega, "sin"))
    return tuple(terms)


def _sinhc(z: np.ndarray) -> np.ndarray:
    """sinh(z)/z, entire in z."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    z2 = z[small] ** 2
    out[small] = 1.0 + z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0 * (1.0 + z2 / 72.0)))
    zb = z[~small]
    out[~small] = np.sinh(zb) / zb
    return out


def _coshm1(z: np.ndarray) -> np.ndarray:
    """(cosh(z) - 1)/z^2, entire in z."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    z2 = z[small] ** 2
    out[small] = 0.5 * (1.0 + z2 / 12.0 * (1.0 + z2 / 30.0 * (1.0 + z2 / 56.0)))
    zb = z[~small]
    out[~small] = (np.cosh(zb) - 1.0) / zb**2
    return out


def _real_series(times: np.ndarray, values: np.ndarray, label: str) -> TimeSeries:
    values = np.asarray(values)
    if np.abs(values.imag).max(initial=0.0) > 1e-10:
        raise ValueError(f"{label}: closed form produced imaginary residue")
    return TimeSeries(np.asarray(times, dtype=float), values.real)


def _require_resonance(params: SystemParams) -> None:
    if abs(params.delta) > 1e-9:
        raise RegimeError("closed forms are derived on resonance (delta = 0)")
    if params.g <= 0:
        raise RegimeError("closed forms need g > 0")


def _coupling_fractions(params: SystemParams) -> tuple[float, float, float, float]:
    g1s, g2s = params.g1**2, params.g2**2
    g2_tot = params.g**2
    return g1s, g2s, g2_tot, g2_tot**2


# ---------------------------------------------------------------------------
# weak decoherence (full secular), arbitrary gamma_1 and gamma_phi


def weak_decoherence_terms(params: SystemParams, rates: DecoherenceRates) -> dict[str, ExpTermSet]:
    """Term decomposition of the full-secular solution at delta = 0."""
    _require_resonance(params)
    rates.validate()
    g1s, g2s, gsq, g4 = _coupling_fractions(params)
    g = params.g
    c1, cphi = rates.gamma_1, rates.gamma_phi

    q1 = (
        ExpTerm((g2s**2 - g1s**2 - 2 * g1s * g2s) / g4, 0.0, 0.0),
        ExpTerm(g1s**2 / g4, c1 / 2.0, 0.0),
        ExpTerm(4 * g1s * g2s / g4, c1 / 4.0 + cphi, 2.0 * g),
        ExpTerm(g1s**2 / g4, c1 / 2.0 + cphi, 4.0 * g),
    )
    q2 = (
        ExpTerm(-(g1s**2 + g2s**2) / g4, 0.0, 0.0),
        ExpTerm(g1s * g2s / g4, c1 / 2.0, 0.0),
        ExpTerm(-4 * g1s * g2s / g4, c1 / 4.0 + cphi, 2.0 * g),
        ExpTerm(g1s * g2s / g4, c1 / 2.0 + cphi, 4.0 * g),
    )
    tls = (
        ExpTerm(-1.0, 0.0, 0.0),
        ExpTerm(g1s / gsq, c1 / 2.0, 0.0),
        ExpTerm(-g1s / gsq, c1 / 2.0 + cphi, 4.0 * g),
    )
    return {"sz_q1": ExpTermSet(q1), "sz_q2": ExpTermSet(q2), "sz_tls": ExpTermSet(tls)}


def weak_decoherence_two_qubit(params: SystemParams, rates: DecoherenceRates,
                               times) -> dict[str, TimeSeries]:
    """Full-secular expectation values <sz> for Q1, Q2 and the TLS."""
    times = np.asarray(times, dtype=float)
    terms = weak_decoherence_terms(params, rates)
    return {name: TimeSeries(times, ts.evaluate(times)) for name, ts in terms.items()}


# ---------------------------------------------------------------------------
# purely transversal bath coupling (gamma_phi = 0), any gamma_1


def transversal_two_qubit(params: SystemParams, gamma_1: float, times) -> dict[str, TimeSeries]:
    """Relaxation-only solution, valid on both sides of gamma_1 = 8 g.

    The hyperbolic functions are evaluated through entire auxiliary
    functions of mu = sqrt(gamma_1^2 - 64 g^2), so the crossover at
    mu = 0 is a removable point handled by the same code path.
    """
    _require_resonance(params)
    if gamma_1 < 0:
        raise ValueError("gamma_1 must be nonnegative")
    times = np.asarray(times, dtype=float)
    g1s, g2s, gsq, g4 = _coupling_fractions(params)
    g = params.g
    c = gamma_1
    mu = np.sqrt(complex(c**2 - 64.0 * gsq))

    e_quarter = np.exp(-c * times / 4.0)
    e_half = np.exp(-c * times / 2.0)
    bracket_quarter = np.cosh(mu * times / 4.0) + c * (times / 4.0) * _sinhc(mu * times / 4.0)
    bracket_half = (1.0 + c * (times / 2.0) * _sinhc(mu * times / 2.0)
                    + (c**2 - 32.0 * gsq) * (times / 2.0) ** 2 * _coshm1(mu * times / 2.0))

    amp_mid = 4.0 * g1s * g2s / g4
    q1 = ((g2s**2 - g1s**2 - 2 * g1s * g2s) / g4
          + amp_mid * e_quarter * bracket_quarter
          + (2.0 * g1s**2 / g4) * e_half * bracket_half)
    q2 = (-(g1s**2 + g2s**2) / g4
          - amp_mid * e_quarter * bracket_quarter
          + (2.0 * g1s * g2s / g4) * e_half * bracket_half)
    tls = -1.0 + 8.0 * g1s * times**2 * _sinhc(mu * times / 4.0) ** 2 * e_half

    return {"sz_q1": _real_series(times, q1, "sz_q1"),
            "sz_q2": _real_series(times, q2, "sz_q2"),
            "sz_tls": _real_series(times, tls, "sz_tls")}


def transversal_terms(params: SystemParams, gamma_1: float) -> dict[str, ExpTermSet]:
    """Exponential-mode decomposition of the transversal solution.

    Undefined exactly at the threshold gamma_1 = 8 g, where the mode pair
    degenerates; use :func:`transversal_two_qubit` to evaluate there.
    """
    _require_resonance(params)
    if gamma_1 < 0:
        raise ValueError("gamma_1 must be nonnegative")
    g1s, g2s, gsq, g4 = _coupling_fractions(params)
    c = gamma_1
    mu_sq = c**2 - 64.0 * gsq
    if abs(mu_sq) < 1e-9:
        raise RegimeError("mode decomposition is singular at gamma_1 = 8 g; "
                          "evaluate the closed form instead")
    mu = np.sqrt(complex(mu_sq))

    def chain(const: float, pure_half: float, amp_quarter: float, amp_half: float) -> ExpTermSet:
        modes: list[tuple[complex, complex]] = []
        if pure_half:
            modes.append((complex(pure_half), complex(-c / 2.0)))
        for sign in (+1.0, -1.0):
            modes.append((0.5 * amp_quarter * (1.0 + sign * c / mu), -c / 4.0 + sign * mu / 4.0))
            modes.append((0.5 * amp_half * (c**2 - 32.0 * gsq + sign * c * mu) / mu**2,
                          -c / 2.0 + sign * mu / 2.0))
        terms = (ExpTerm(const, 0.0, 0.0),) + _terms_from_modes(modes)
        return ExpTermSet(terms)

    q1 = chain((g2s**2 - g1s**2 - 2 * g1s * g2s) / g4,
               -64.0 * g1s**2 / (mu_sq * gsq),
               4.0 * g1s * g2s / g4,
               2.0 * g1s**2 / g4)
    q2 = chain(-(g1s**2 + g2s**2) / g4,
               -64.0 * g1s * g2s / (mu_sq * gsq),
               -4.0 * g1s * g2s / g4,
               2.0 * g1s * g2s / g4)

    tls_modes: list[tuple[complex, complex]] = [(complex(-64.0 * g1s / mu_sq), complex(-c / 2.0))]
    for sign in (+1.0, -1.0):
        tls_modes.append((32.0 * g1s / mu_sq + 0.0j, -c / 2.0 + sign * mu / 2.0))
    tls = ExpTermSet((ExpTerm(-1.0, 0.0, 0.0),) + _terms_from_modes(tls_modes))
    return {"sz_q1": q1, "sz_q2": q2, "sz_tls": tls}


# ---------------------------------------------------------------------------
# purely longitudinal bath coupling (gamma_1 = 0), any gamma_phi


def longitudinal_two_qubit(params: SystemParams, gamma_phi: float, times) -> dict[str, TimeSeries]:
    """Dephasing-only solution, valid on both sides of gamma_phi = 4 g.

    Pure dephasing traps TLS population: <sz_tls> settles at -g2^2/g^2.
    """
    _require_resonance(params)
    if gamma_phi < 0:
        raise ValueError("gamma_phi must be nonnegative")
    times = np.asarray(times, dtype=float)
    g1s, g2s, gsq, g4 = _coupling_fractions(params)
    cphi = gamma_phi
    mu2 = np.sqrt(complex(cphi**2 - 4.0 * gsq))
    mu3 = np.sqrt(complex(cphi**2 - 16.0 * gsq))

    decay = np.exp(-cphi * times)
    br2 = np.cosh(mu2 * times) + cphi * times * _sinhc(mu2 * times)
    br3 = np.cosh(mu3 * times) + cphi * times * _sinhc(mu3 * times)

    q1 = ((-2 * g1s * g2s + g2s**2) / g4
          + decay * (g1s / g4) * (4.0 * g2s * br2 + g1s * br3))
    q2 = (-(g1s**2 - g1s * g2s + g2s**2) / g4
          + decay * (g1s * g2s / g4) * (-4.0 * br2 + br3))
    tls = -g2s / gsq - decay * (g1s / gsq) * br3

    return {"sz_q1": _real_series(times, q1, "sz_q1"),
            "sz_q2": _real_series(times, q2, "sz_q2"),
            "sz_tls": _real_series(times, tls, "sz_tls")}


def longitudinal_terms(params: SystemParams, gamma_phi: float) -> dict[str, ExpTermSet]:
    """Exponential-mode decomposition of the longitudinal solution."""
    _require_resonance(params)
    if gamma_phi < 0:
        raise ValueError("gamma_phi must be nonnegative")
    g1s, g2s, gsq, g4 = _coupling_fractions(params)
    cphi = gamma_phi
    mu2_sq = cphi**2 - 4.0 * gsq
    mu3_sq = cphi**2 - 16.0 * gsq
    if abs(mu2_sq) < 1e-9 or abs(mu3_sq) < 1e-9:
        raise RegimeError("mode decomposition is singular at gamma_phi = 2 g or 4 g; "
                          "evaluate the closed form instead")
    mu2 = np.sqrt(complex(mu2_sq))
    mu3 = np.sqrt(complex(mu3_sq))

    def hyperbolic_pair(amp: float, mu: complex) -> list[tuple[complex, complex]]:
        return [(0.5 * amp * (1.0 + sign * cphi / mu), -cphi + sign * mu)
                for sign in (+1.0, -1.0)]

    q1_modes = (hyperbolic_pair(4.0 * g1s * g2s / g4, mu2)
                + hyperbolic_pair(g1s**2 / g4, mu3))
    q2_modes = (hyperbolic_pair(-4.0 * g1s * g2s / g4, mu2)
                + hyperbolic_pair(g1s * g2s / g4, mu3))
    tls_modes = hyperbolic_pair(-g1s / gsq, mu3)

    q1 = ExpTermSet((ExpTerm((-2 * g1s * g2s + g2s**2) / g4, 0.0, 0.0),)
                    + _terms_from_modes(q1_modes))
    q2 = ExpTermSet((ExpTerm(-(g1s**2 - g1s * g2s + g2s**2) / g4, 0.0, 0.0),)
                    + _terms_from_modes(q2_modes))
    tls = ExpTermSet((ExpTerm(-g2s / gsq, 0.0, 0.0),) + _terms_from_modes(tls_modes))
    return {"sz_q1": q1, "sz_q2": q2, "sz_tls": tls}


# ---------------------------------------------------------------------------
# single-qubit special case (g2 = 0)


def single_qubit_weak(params: SystemParams, rates: DecoherenceRates, times) -> dict[str, TimeSeries]:
    """Weak-decoherence single-qubit solution: population swaps at 4 g1."""
    _require_resonance(params)
    rates.validate()
    times = np.asarray(times, dtype=float)
    g1 = params.g1
    if g1 <= 0:
        raise RegimeError("single-qubit solution needs g1 > 0")
    c1, cphi = rates.gamma_1, rates.gamma_phi
    envelope = np.exp(-(c1 / 2.0 + cphi) * times) * np.cos(4.0 * g1 * times)
    relax = np.exp(-c1 * times / 2.0)
    return {"sz_q1": TimeSeries(times, -1.0 + relax + envelope),
            "sz_tls": TimeSeries(times, -1.0 + relax - envelope)}


def single_qubit_transversal(params: SystemParams, gamma_1: float, times) -> TimeSeries:
    """Relaxation-only single-qubit solution; threshold at gamma_1 = 8 g1."""
    lone = SystemParams(omega_q=params.omega_q, delta=params.delta, g1=params.g1, g2=0.0)
    return transversal_two_qubit(lone, gamma_1, times)["sz_q1"]


# ---------------------------------------------------------------------------
# detuned-regime frequencies and the dispersive limit


def oscillation_frequencies(params: SystemParams) -> tuple[float, float, float]:
    """The three oscillation frequencies of the detuned two-qubit signal.

    (s - |delta|, s + |delta|, 2 s) with s = sqrt(delta^2 + 4 g^2); the two
    lower entries merge at 2 g on resonance.
    """
    params.validate()
    s = params.splitting
    d = abs(params.delta)
    return (s - d, s + d, 2.0 * s)


@dataclass(frozen=True)
class DispersiveParameters:
    """Lower oscillation frequency and its decay in the dispersive regime."""

    omega_low_exact: float
    omega_low_approx: float
    gamma_low_approx: float


def dispersive_parameters(params: SystemParams, rates: DecoherenceRates) -> DispersiveParameters:
    """Mediated qubit-qubit coupling for |delta| > 2 g.

    The exact lower frequency is sqrt(delta^2 + 4 g^2) - |delta|; expanding
    in g/|delta| gives 2 g^2/|delta| with decay g^2 (gamma_1 + 12 gamma_phi)
    / (6 delta^2).
    """
    params.validate()
    rates.validate()
    d = abs(params.delta)
    g = params.g
    if d <= 2.0 * g * (1.0 + 1e-9):
        raise RegimeError(f"|delta| = {d:g} is not in the dispersive regime (> 2 g = {2 * g:g})")
    return DispersiveParameters(
        omega_low_exact=params.splitting - d,
        omega_low_approx=2.0 * g**2 / d,
        gamma_low_approx=g**2 * (rates.gamma_1 + 12.0 * rates.gamma_phi) / (6.0 * d**2),
    )


def analytic_solution(params: SystemParams, rates: DecoherenceRates, times) -> dict[str, TimeSeries]:
    """Dispatch to the closed form covering the given rates.

    Pure relaxation and pure dephasing use the strong-regime-capable
    solutions; mixed rates fall back to the full-secular weak form, which
    requires gamma_1 < 8 g and gamma_phi < 4 g.
    """
    rates.validate()
    if rates.gamma_phi == 0.0:
        return transversal_two_qubit(params, rates.gamma_1, times)
    if rates.gamma_1 == 0.0:
        return longitudinal_two_qubit(params, rates.gamma_phi, times)
    g = params.g
    if rates.gamma_1 >= 8.0 * g or rates.gamma_phi >= 4.0 * g:
        raise RegimeError("no closed form covers mixed strong decoherence; "
                          "use a numerical engine")
    return weak_decoherence_two_qubit(params, rates, times)

"""Scalar diagnostics: effective decay rates, oscillation strength,
trace-distance Markovianity and steady-state entanglement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .closed_forms import ExpTerm, ExpTermSet, RegimeError
from .evolve import Trajectory, evolve, trace_distance
from .operators import (
    PAULI_Y,
    SystemParams,
    basis_state,
    density_matrix,
    partial_trace,
    restrict_single_excitation,
)
from .redfield import DecoherenceRates, SecularMode, Superoperator, build_generator

#: terms oscillating slower than this (units of g = 1) count as pure decays
OSCILLATORY_FREQUENCY_CUTOFF = 0.1


class UndefinedRateError(ValueError):
    """No purely decaying terms are left to define an effective rate."""


class UnsettledTrajectoryError(ValueError):
    """Trajectory too short for an asymptotics-based diagnostic."""


class EffectiveRateMode(Enum):
    PLAIN = "plain"
    AVERAGE = "average"
    ENVELOPE_UPPER = "envelope_upper"
    ENVELOPE_LOWER = "envelope_lower"


def _split_terms(terms: ExpTermSet) -> tuple[list[ExpTerm], list[ExpTerm]]:
    pure, oscillating = [], []
    for term in terms.transient_terms():
        if term.frequency >= OSCILLATORY_FREQUENCY_CUTOFF:
            oscillating.append(term)
        else:
            if term.phase == "sin":
                raise ValueError("slow sine term cannot be classified as a pure decay")
            pure.append(term)
    return pure, oscillating


def effective_decay_rate(terms: ExpTermSet, mode: EffectiveRateMode) -> float:
    """Single rate summarizing a multi-exponential transient.

    Matches the integral and the initial value of the transient:
    gamma_eff = sum(c_j) / sum(c_j / gamma_j).  PLAIN requires a purely
    decaying term set; AVERAGE drops oscillating terms; the ENVELOPE modes
    replace each oscillation by +-1 and use coefficient magnitudes.
    Constant terms are ignored.
    """
    pure, oscillating = _split_terms(terms)
    if mode is EffectiveRateMode.PLAIN and oscillating:
        raise ValueError("plain mode is defined only for non-oscillatory term sets")
    if not pure and not (oscillating and mode in (EffectiveRateMode.ENVELOPE_UPPER,
                                                  EffectiveRateMode.ENVELOPE_LOWER)):
        if mode in (EffectiveRateMode.PLAIN, EffectiveRateMode.AVERAGE):
            raise UndefinedRateError("no purely decaying terms")

    num = sum(t.coefficient for t in pure)
    den = 0.0
    for t in pure:
        if t.decay <= 0:
            raise UndefinedRateError("pure term with zero decay rate")
        den += t.coefficient / t.decay
    if mode in (EffectiveRateMode.ENVELOPE_UPPER, EffectiveRateMode.ENVELOPE_LOWER):
        sign = 1.0 if mode is EffectiveRateMode.ENVELOPE_UPPER else -1.0
        for t in oscillating:
            if t.decay <= 0:
                raise UndefinedRateError("oscillating term with zero decay rate")
            num += sign * abs(t.coefficient)
            den += sign * abs(t.coefficient) / t.decay
    if den == 0.0:
        raise UndefinedRateError("transient integrates to zero")
    return num / den


def effective_rate_transversal(params: SystemParams, gamma_1: float) -> float:
    """Closed-form strong-relaxation rate 16 g^2 (g1^2 + 2 g2^2) G1 /
    (16 g^2 g1^2 + (g1^2 + 4 g2^2) G1^2)."""
    g1s, g2s = params.g1**2, params.g2**2
    gsq = params.g**2
    return (16.0 * gsq * (g1s + 2.0 * g2s) * gamma_1
            / (16.0 * gsq * g1s + (g1s + 4.0 * g2s) * gamma_1**2))


def effective_rate_longitudinal(params: SystemParams, gamma_phi: float) -> float:
    """Closed-form strong-dephasing rate 8 g^2 (g1^2 + 4 g2^2) /
    ((g1^2 + 16 g2^2) Gphi)."""
    g1s, g2s = params.g1**2, params.g2**2
    gsq = params.g**2
    return 8.0 * gsq * (g1s + 4.0 * g2s) / ((g1s + 16.0 * g2s) * gamma_phi)


def effective_rate_strong(params: SystemParams, rates: DecoherenceRates, channel: str) -> float:
    """Strong-decoherence effective rate for a pure bath channel.

    ``channel`` is "transversal" (needs gamma_1 > 8 g, gamma_phi = 0) or
    "longitudinal" (needs gamma_phi > 4 g, gamma_1 = 0).  Both rates
    decrease with stronger decoherence: the TLS dynamics is blocked and
    energy loss slows down.
    """
    params.validate()
    rates.validate()
    g = params.g
    if channel == "transversal":
        if rates.gamma_phi != 0.0 or rates.gamma_1 <= 8.0 * g:
            raise RegimeError("transversal closed form needs gamma_1 > 8 g and gamma_phi = 0")
        return effective_rate_transversal(params, rates.gamma_1)
    if channel == "longitudinal":
        if rates.gamma_1 != 0.0 or rates.gamma_phi <= 4.0 * g:
            raise RegimeError("longitudinal closed form needs gamma_phi > 4 g and gamma_1 = 0")
        return effective_rate_longitudinal(params, rates.gamma_phi)
    raise ValueError(f"unknown channel {channel!r}")


class RateRegime(Enum):
    WEAK = "weak"
    INTERMEDIATE = "intermediate"
    STRONG = "strong"


def rate_regime(params: SystemParams, rates: DecoherenceRates) -> RateRegime:
    """Reliability band of the average effective rate.

    Between roughly (2 g, 1 g) and the exact thresholds (8 g, 4 g) the
    first half-oscillation dominates and a single rate describes the decay
    poorly; beyond the thresholds the strong-decoherence forms apply.
    """
    g = params.g
    if rates.gamma_1 >= 8.0 * g or rates.gamma_phi >= 4.0 * g:
        return RateRegime.STRONG
    if rates.gamma_1 >= 2.0 * g or rates.gamma_phi >= 1.0 * g:
        return RateRegime.INTERMEDIATE
    return RateRegime.WEAK


def threshold_points(g: float = 1.0) -> tuple[tuple[float, float], tuple[float, float]]:
    """Exact oscillation/decay boundary crossings on the two rate axes:
    (gamma_1, gamma_phi) = (8 g, 0) and (0, 4 g)."""
    return ((8.0 * g, 0.0), (0.0, 4.0 * g))


# ---------------------------------------------------------------------------
# oscillation strength


def _excess_tls_excitation(traj: Trajectory) -> np.ndarray:
    obs = traj.observables
    return obs["sz_tls"].values - (obs["sz_q1"].values + obs["sz_q2"].values)


def oscillation_strength(traj: Trajectory, settle_tol: float = 1e-6) -> float:
    """Maximum excess of TLS excitation over both qubits combined.

    The asymptotic value of sz_tls - (sz_q1 + sz_q2) is subtracted so the
    measure is well defined for g1 != g2, and the result is clamped at
    zero; for g1 = g2 the baseline vanishes and the paperless definition is
    recovered.  Requires a settled trajectory (relative drift < settle_tol
    over the final 10%).
    """
    expr = _excess_tls_excitation(traj)
    scale = max(1.0, float(expr.max() - expr.min()))
    tail = expr[int(0.9 * expr.size):]
    if tail.size < 2 or (tail.max() - tail.min()) > settle_tol * scale:
        raise UnsettledTrajectoryError(
            "expression has not settled; extend t_max before measuring M")
    return float(max(0.0, (expr - expr[-1]).max()))


def _initial_state(restricted: bool, label: str = "udd") -> np.ndarray:
    state = basis_state(label)
    if restricted:
        state = restrict_single_excitation(state)
    return density_matrix(state)


def _settle_time_guess(params: SystemParams, rates: DecoherenceRates) -> float:
    g = params.g
    candidates = []
    if rates.gamma_1 > 0:
        candidates += [rates.gamma_1 / 2.0, rates.gamma_1 / 4.0 + rates.gamma_phi]
        if rates.gamma_1 > 8.0 * g:
            candidates.append(16.0 * g**2 / rates.gamma_1)
    if rates.gamma_phi > 0:
        candidates.append(rates.gamma_phi)
        if rates.gamma_phi > 4.0 * g:
            candidates.append(4.0 * g**2 / rates.gamma_phi)
    slowest = min(candidates) if candidates else 0.0
    if slowest <= 0:
        return 20.0 / max(g, 1e-12)
    return min(max(20.0 / max(g, 1e-12), 16.0 / slowest), 4000.0)


def oscillation_strength_for_rates(params: SystemParams, rates: DecoherenceRates, *,
                                   engine: str = "redfield",
                                   secular: SecularMode = SecularMode.NONE,
                                   subspace: str = "single_excitation",
                                   max_doublings: int = 6) -> float:
    """Propagate the canonical initial state and measure M, extending the
    horizon until the excess-excitation signal has settled."""
    gen = build_generator(params, rates=rates, engine=engine, secular=secular,
                          subspace=subspace)
    rho0 = _initial_state(gen.eig.restricted)
    t_max = _settle_time_guess(params, rates)
    for _ in range(max_doublings):
        n_steps = max(4096, int(t_max / 0.02))
        traj = evolve(gen, rho0, t_max, n_steps, store_states=False)
        try:
            return oscillation_strength(traj)
        except UnsettledTrajectoryError:
            t_max *= 2.0
    n_steps = max(4096, int(t_max / 0.02))
    return oscillation_strength(evolve(gen, rho0, t_max, n_steps, store_states=False))


@dataclass
class ThresholdMap:
    """log10 of the oscillation strength over a (gamma_1, gamma_phi) grid."""

    gamma_1: np.ndarray
    gamma_phi: np.ndarray
    log10_m: np.ndarray  # shape (len(gamma_1), len(gamma_phi)), -inf for M <= 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            header = ["gamma_1\\gamma_phi"] + [f"{g:.12g}" for g in self.gamma_phi]
            fh.write(",".join(header) + "\n")
            for i, g1 in enumerate(self.gamma_1):
                row = [f"{g1:.12g}"] + [f"{v:.12g}" for v in self.log10_m[i]]
                fh.write(",".join(row) + "\n")


def _threshold_cell(args) -> float:
    g1, g2, omega_q, gamma_1, gamma_phi, engine, subspace = args
    params = SystemParams(omega_q=omega_q, delta=0.0, g1=g1, g2=g2)
    m = oscillation_strength_for_rates(params, DecoherenceRates(gamma_1, gamma_phi),
                                       engine=engine, subspace=subspace)
    return math.log10(m) if m > 0 else -math.inf


def threshold_map(gamma_1_values, gamma_phi_values, *, g1: float = 1.0 / math.sqrt(2.0),
                  g2: float = 1.0 / math.sqrt(2.0), omega_q: float = 1000.0,
                  engine: str = "redfield", subspace: str = "single_excitation",
                  parallel: int = 1) -> ThresholdMap:
    """Oscillation-strength map over a rate grid (full tensor, no secular).

    Cells are independent; ``parallel`` > 1 distributes them over worker
    processes while keeping grid order.
    """
    gamma_1_values = np.asarray(gamma_1_values, dtype=float)
    gamma_phi_values = np.asarray(gamma_phi_values, dtype=float)
    cells = [(g1, g2, omega_q, float(c1), float(cp), engine, subspace)
             for c1 in gamma_1_values for cp in gamma_phi_values]
    if parallel > 1:
        import multiprocessing as mp

        with mp.Pool(parallel) as pool:
            flat = pool.map(_threshold_cell, cells)
    else:
        flat = [_threshold_cell(c) for c in cells]
    grid = np.array(flat).reshape(gamma_1_values.size, gamma_phi_values.size)
    return ThresholdMap(gamma_1=gamma_1_values, gamma_phi=gamma_phi_values, log10_m=grid)


def decay_crossing(gammas: np.ndarray, log10_m: np.ndarray, floor: float = -10.0) -> float | None:
    """First grid value along a map axis where M has dropped below 10^floor."""
    gammas = np.asarray(gammas, dtype=float)
    log10_m = np.asarray(log10_m, dtype=float)
    below = log10_m < floor
    for k in range(1, gammas.size):
        if below[k] and not below[k - 1]:
            return float(gammas[k])
    return None


# ---------------------------------------------------------------------------
# Markovianity via the trace distance of the reduced two-qubit states


@dataclass
class MarkovianityResult:
    delta_d_up: float          # first rise of D(t), in D units
    intervals: list[tuple[float, float]]
    initial_distance: float

    @property
    def normalized(self) -> float:
        return self.delta_d_up / self.initial_distance if self.initial_distance else 0.0

    def to_dict(self) -> dict:
        return {"delta_D_up": self.delta_d_up,
                "delta_D_up_normalized": self.normalized,
                "initial_distance": self.initial_distance,
                "intervals": [[a, b] for a, b in self.intervals]}


def markovianity(gen: Superoperator, rho_a: np.ndarray | None = None,
                 rho_b: np.ndarray | None = None, t_max: float = 20.0,
                 n_steps: int = 8192) -> MarkovianityResult:
    """Trace-distance analysis of the reduced two-qubit dynamics.

    Both initial states (default |ud>, |du> on the qubits with the TLS in
    its ground state) are propagated, the TLS is traced out, and every
    interval of increasing distinguishability is reported.  Any increase
    signals non-Markovian backflow; the first rise equals
    exp(-pi G1 / sqrt(64 g^2 - G1^2)) x D(0) for pure equal-coupling
    relaxation below threshold.
    """
    restricted = gen.eig.restricted
    if rho_a is None:
        rho_a = _initial_state(restricted, "udd")
    if rho_b is None:
        rho_b = _initial_state(restricted, "dud")
    traj_a = evolve(gen, rho_a, t_max, n_steps)
    traj_b = evolve(gen, rho_b, t_max, n_steps)
    dist = np.array([
        trace_distance(partial_trace(sa, (0, 1), restricted=restricted),
                       partial_trace(sb, (0, 1), restricted=restricted))
        for sa, sb in zip(traj_a.states, traj_b.states)
    ])
    times = traj_a.times
    rising = np.diff(dist) > 1e-10 * max(dist[0], 1e-30)

    intervals: list[tuple[float, float]] = []
    k = 0
    while k < rising.size:
        if rising[k]:
            start = k
            while k < rising.size and rising[k]:
                k += 1
            intervals.append((float(times[start]), float(times[k])))
        else:
            k += 1
    if intervals:
        t0, t1 = intervals[0]
        i0, i1 = int(np.searchsorted(times, t0)), int(np.searchsorted(times, t1))
        delta = float(dist[i1] - dist[i0])
    else:
        delta = 0.0
    return MarkovianityResult(delta_d_up=delta, intervals=intervals,
                              initial_distance=float(dist[0]))


# ---------------------------------------------------------------------------
# entanglement of the steady state


def concurrence(rho_2q: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = np.asarray(rho_2q, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("concurrence is defined for two-qubit states")
    yy = np.kron(PAULI_Y, PAULI_Y)
    rho_tilde = yy @ rho.conj() @ yy
    evals = np.linalg.eigvals(rho @ rho_tilde)
    lams = np.sqrt(np.clip(np.sort(evals.real)[::-1], 0.0, None))
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


def entanglement_of_formation(arg) -> float:
    """EoF from a two-qubit state or directly from a concurrence value."""
    c = float(arg) if np.isscalar(arg) else concurrence(arg)
    if not 0.0 <= c <= 1.0 + 1e-12:
        raise ValueError(f"concurrence {c} outside [0, 1]")
    c = min(c, 1.0)
    x = 0.5 * (1.0 + math.sqrt(1.0 - c * c))
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x))


def dark_state(g1: float, g2: float) -> np.ndarray:
    """Two-qubit dark state (g2 |ud> - g1 |du>)/g, decoupled from the TLS."""
    g = math.hypot(g1, g2)
    if g == 0:
        raise ValueError("dark state undefined for g = 0")
    vec = np.zeros(4, dtype=complex)
    vec[1] = g2 / g   # |ud>
    vec[2] = -g1 / g  # |du>
    return vec


@dataclass
class DarkStateMetrics:
    dark_concurrence: float
    steady_state: np.ndarray
    eof: float


def dark_state_metrics(g1: float, g2: float) -> DarkStateMetrics:
    """Stray entanglement left behind by relaxation through the TLS.

    Starting from |ud>, everything but the dark-state fraction g2^2/g^2
    relaxes to the ground state, so the long-time two-qubit state is
    w |D><D| + (1 - w) |dd><dd|.  The dark state itself carries
    concurrence 2 g1 g2 / g^2.
    """
    g = math.hypot(g1, g2)
    if g == 0:
        raise ValueError("couplings must not both vanish")
    dark = dark_state(g1, g2)
    weight = (g2 / g) ** 2
    ground = np.zeros(4, dtype=complex)
    ground[3] = 1.0
    steady = weight * density_matrix(dark) + (1.0 - weight) * density_matrix(ground)
    return DarkStateMetrics(
        dark_concurrence=2.0 * g1 * g2 / g**2,
        steady_state=steady,
        eof=entanglement_of_formation(steady),
    )

"""Time evolution under a vectorized generator and trajectory observables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .operators import PAULI_Z, restrict_single_excitation, spin_operator
from .redfield import DecoherenceRates, Superoperator


@dataclass(frozen=True)
class TimeSeries:
    """A real signal on a time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if not (np.isfinite(t).all() and np.isfinite(v).all()):
            raise ValueError("non-finite entries in time series")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        steps = np.diff(self.times)
        if steps.size and np.abs(steps - steps[0]).max() > 1e-9 * max(steps[0], 1e-30):
            raise ValueError("time grid is not uniform")
        return float(steps[0]) if steps.size else 0.0


def _observable_ops(n_spins: int, restricted: bool) -> dict[str, np.ndarray]:
    names = {3: ("sz_q1", "sz_q2", "sz_tls"), 2: ("sz_q1", "sz_tls")}[n_spins]
    ops = {}
    for site, name in enumerate(names):
        op = spin_operator(PAULI_Z, site, n_spins)
        if restricted:
            op = restrict_single_excitation(op, n_spins)
        ops[name] = op
    return ops


@dataclass
class Trajectory:
    """Evolved states on a uniform grid plus the sigma_z expectation values."""

    times: np.ndarray
    observables: dict[str, TimeSeries]
    states: np.ndarray | None = None  # (n_times, d, d) lab-frame, optional

    def series(self, name: str) -> TimeSeries:
        return self.observables[name]

    def to_csv(self, path) -> None:
        """Write `t,sz_q1,sz_q2,sz_tls` with 12 significant digits."""
        names = [n for n in ("sz_q1", "sz_q2", "sz_tls") if n in self.observables]
        cols = [self.times] + [self.observables[n].values for n in names]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(["t"] + names) + "\n")
            for row in zip(*cols):
                fh.write(",".join(f"{x:.12g}" for x in row) + "\n")


def evolve(gen: Superoperator, rho0: np.ndarray, t_max: float, n_steps: int = 4096,
           store_states: bool = True) -> Trajectory:
    """Propagate rho0 with the matrix exponential of the generator.

    One dense exponential of gen*dt is computed and applied repeatedly, so
    every grid point is exact for the time-independent generator.  The grid
    holds ``n_steps + 1`` samples including t = 0 and t = t_max.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    if not np.isfinite(gen.matrix).all():
        raise ValueError("generator contains non-finite entries")
    if t_max <= 0:
        raise ValueError("t_max must be positive")

    dt = t_max / n_steps
    step = expm(gen.matrix * dt)
    coords = np.empty((n_steps + 1, gen.dim**2), dtype=complex)
    coords[0] = gen.vec_state(rho0)
    v = coords[0]
    for k in range(1, n_steps + 1):
        v = step @ v
        coords[k] = v

    times = np.linspace(0.0, t_max, n_steps + 1)
    obs_rows = {name: gen.observable_row(op)
                for name, op in _observable_ops(gen.eig.n_spins, gen.eig.restricted).items()}
    observables = {}
    for name, row in obs_rows.items():
        vals = coords @ row
        if np.abs(vals.imag).max() > 1e-8:
            raise ValueError(f"observable {name} has imaginary part {np.abs(vals.imag).max():.2e}")
        observables[name] = TimeSeries(times, vals.real)

    states = None
    if store_states:
        d = gen.dim
        rho_eig = np.zeros((n_steps + 1, d, d), dtype=complex)
        rho_eig[:, gen.rows, gen.cols] = coords
        vecs = gen.eig.vectors
        states = np.einsum("ab,tbc,dc->tad", vecs, rho_eig, vecs.conj())
    return Trajectory(times=times, observables=observables, states=states)


def expectation(rho: np.ndarray, obs: np.ndarray) -> float:
    """Re Tr(rho obs) for a Hermitian observable; rejects large imaginary parts."""
    rho = np.asarray(rho, dtype=complex)
    obs = np.asarray(obs, dtype=complex)
    if rho.shape != obs.shape:
        raise ValueError("dimension mismatch between state and observable")
    value = complex(np.trace(rho @ obs))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ValueError(f"expectation value has imaginary residue {value.imag:.2e}")
    return value.real


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Tr sqrt((rho_a - rho_b)^2) = sum of |eigenvalues| of the difference.

    This follows the convention without the 1/2 prefactor, so orthogonal
    pure states are at distance 2.
    """
    rho_a = np.asarray(rho_a, dtype=complex)
    rho_b = np.asarray(rho_b, dtype=complex)
    if rho_a.shape != rho_b.shape:
        raise ValueError("states must share a dimension")
    diff = rho_a - rho_b
    return float(np.abs(np.linalg.eigvalsh(diff)).sum())


def default_t_max(params, rates: DecoherenceRates) -> float:
    """Default horizon: max(20/g, 10 / slowest positive decay rate).

    The candidate rates cover the weak-regime exponents and the slowed
    (quantum-Zeno) scales appearing beyond the strong-decoherence
    thresholds.
    """
    g = params.g
    g1, gp = rates.gamma_1, rates.gamma_phi
    candidates = [g1 / 2.0, g1 / 4.0 + gp, g1 / 2.0 + gp]
    if g1 > 8.0 * g > 0:
        candidates.append(16.0 * g**2 / g1)
    if gp > 4.0 * g > 0:
        candidates.append(8.0 * g**2 / gp)
    positive = [c for c in candidates if c > 0]
    slowest = min(positive) if positive else 0.0
    t = 20.0 / g if g > 0 else 20.0
    if slowest > 0:
        t = max(t, 10.0 / slowest)
    return t

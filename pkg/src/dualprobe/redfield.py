"""Vectorized evolution generators: Redfield tensor and Lindblad equivalent.

Density matrices are vectorized in the order "all diagonal elements first,
then off-diagonals row-major", which turns the full secular approximation
into a literal block operation on the generator matrix.  Generators are
assembled in the Hamiltonian eigenbasis; the :class:`Superoperator` carries
the basis change so callers can work with lab-frame states throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .operators import (
    PAULI_Z,
    SIGMA_MINUS,
    BathCoupling,
    EigenSystem,
    SpectralFunction,
    SystemParams,
    bath_coupling_operator,
    build_hamiltonian,
    eigensystem,
    restrict_single_excitation,
    spin_operator,
)


class SecularMode(Enum):
    """Secular treatment of the generator: keep everything or decouple
    density-matrix elements whose free frequencies differ."""

    NONE = "none"
    FULL = "full"


@dataclass(frozen=True)
class DecoherenceRates:
    """Phenomenological TLS rates: relaxation gamma_1, pure dephasing gamma_phi.

    For the uncoupled TLS, gamma_1 is the excited-population decay rate and
    2*gamma_phi the extra decay of the two off-diagonal elements.
    """

    gamma_1: float
    gamma_phi: float

    def validate(self) -> None:
        if not (math.isfinite(self.gamma_1) and math.isfinite(self.gamma_phi)):
            raise ValueError("non-finite rates")
        if self.gamma_1 < 0 or self.gamma_phi < 0:
            raise ValueError("rates must be nonnegative")


def rates_from_coupling(bath: BathCoupling, omega_q: float = 1000.0) -> DecoherenceRates:
    """gamma_1 = v_perp^2 C(2 omega_q), gamma_phi = v_par^2 C(0).

    ``omega_q`` is kept in the signature for clarity; the flat two-point
    spectrum makes C(2 omega_q) independent of its exact value.
    """
    bath.validate()
    del omega_q
    return DecoherenceRates(gamma_1=bath.v_perp**2 * bath.spectral.c_split,
                            gamma_phi=bath.v_par**2 * bath.spectral.c_zero)


def vectorization_order(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices (n_I, m_I) of the density-matrix element at slot I."""
    rows = list(range(dim))
    cols = list(range(dim))
    for i in range(dim):
        for j in range(dim):
            if i != j:
                rows.append(i)
                cols.append(j)
    return np.array(rows), np.array(cols)


@dataclass
class Superoperator:
    """Evolution generator acting on vectorized density matrices.

    ``matrix`` is expressed in the eigenbasis carried by ``eig`` using the
    diagonals-first element order; ``vec_state``/``unvec_state`` convert
    lab-frame density matrices to and from that representation.
    """

    matrix: np.ndarray
    eig: EigenSystem
    secular: SecularMode = SecularMode.NONE
    rows: np.ndarray = field(init=False)
    cols: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.rows, self.cols = vectorization_order(self.dim)

    @property
    def dim(self) -> int:
        return self.eig.dim

    def vec_state(self, rho_lab: np.ndarray) -> np.ndarray:
        rho_lab = np.asarray(rho_lab, dtype=complex)
        if rho_lab.shape != (self.dim, self.dim):
            raise ValueError(f"state has shape {rho_lab.shape}, expected {(self.dim, self.dim)}")
        v = self.eig.vectors
        rho_eig = v.conj().T @ rho_lab @ v
        return rho_eig[self.rows, self.cols]

    def unvec_state(self, coords: np.ndarray) -> np.ndarray:
        rho_eig = np.zeros((self.dim, self.dim), dtype=complex)
        rho_eig[self.rows, self.cols] = coords
        v = self.eig.vectors
        return v @ rho_eig @ v.conj().T

    def observable_row(self, obs_lab: np.ndarray) -> np.ndarray:
        """Row vector w with <O>(t) = Re (w . coords(t))."""
        v = self.eig.vectors
        obs_eig = v.conj().T @ np.asarray(obs_lab, dtype=complex) @ v
        return obs_eig[self.cols, self.rows]

    def trace_row(self) -> np.ndarray:
        w = np.zeros(self.dim**2, dtype=complex)
        w[: self.dim] = 1.0
        return w

    def element_frequencies(self) -> np.ndarray:
        return self.eig.energies[self.rows] - self.eig.energies[self.cols]


def _spectral_matrix(eig: EigenSystem, spectral: SpectralFunction) -> np.ndarray:
    """C(omega_ab) evaluated by sector bookkeeping.

    Frequencies inside one excitation sector are of order delta, g and read
    C(0); frequencies between adjacent sectors sit near +-2 omega_q.  Only
    emission (sector decreasing along the transition) carries weight; the
    absorption side C(-2 omega_q) vanishes in the low-temperature limit.
    """
    diff = eig.sector_difference()
    c = np.zeros_like(diff, dtype=float)
    c[diff == 0] = spectral.c_zero
    c[diff == 1] = spectral.c_split
    return c


def _redfield_dissipator(s_eig: np.ndarray, c_matrix: np.ndarray) -> np.ndarray:
    """Four-index tensor R[n, m, n', m'] of the damping part.

    R = L1 + L2 - L3 - L4 with
      L1[n,m,n',m'] = s[m',m] s[n,n'] C(w_{n'n}) / 2
      L2[n,m,n',m'] = s[n,n'] s[m',m] C(w_{m'm}) / 2
      L3[n,m,n',m'] = delta_{m m'} sum_k s[n,k] s[k,n'] C(w_{n'k}) / 2
      L4[n,m,n',m'] = delta_{n n'} sum_k s[k,m] s[m',k] C(w_{m'k}) / 2
    """
    half_c = 0.5 * c_matrix
    dim = s_eig.shape[0]
    eye = np.eye(dim)
    t1 = np.einsum("pm,nq,qn->nmqp", s_eig, s_eig, half_c)
    t2 = np.einsum("nq,pm,pm->nmqp", s_eig, s_eig, half_c)
    m1 = np.einsum("nk,kq,qk->nq", s_eig, s_eig, half_c)
    m2 = np.einsum("km,pk,pk->mp", s_eig, s_eig, half_c)
    t3 = np.einsum("nq,mp->nmqp", m1, eye)
    t4 = np.einsum("mp,nq->nmqp", m2, eye)
    return t1 + t2 - t3 - t4


def _secular_mask(freqs: np.ndarray, scale: float) -> np.ndarray:
    """Keep couplings only between elements rotating at the same frequency."""
    tol = 1e-9 * (1.0 + scale)
    return (np.abs(freqs[:, None] - freqs[None, :]) <= tol).astype(float)


def _assemble(eig: EigenSystem, dissipator: np.ndarray, mode: SecularMode) -> Superoperator:
    dim = eig.dim
    rows, cols = vectorization_order(dim)
    omega = eig.frequency_matrix()
    matrix = dissipator[rows[:, None], cols[:, None], rows[None, :], cols[None, :]].astype(complex)
    if mode is SecularMode.FULL:
        freqs = omega[rows, cols]
        matrix *= _secular_mask(freqs, float(np.abs(eig.energies).max()))
    matrix[np.diag_indices(dim**2)] += -1j * omega[rows, cols]
    return Superoperator(matrix=matrix, eig=eig, secular=mode)


def build_redfield_tensor(eig: EigenSystem, s_op: np.ndarray, spectral: SpectralFunction,
                          mode: SecularMode = SecularMode.NONE) -> Superoperator:
    """Bloch-Redfield generator from an eigensystem and the bath coupling.

    ``s_op`` is the system side of the TLS-bath coupling expressed in the
    eigenbasis.  ``mode=FULL`` zeroes the population/coherence blocks and
    all couplings between coherences at distinct frequencies.
    """
    spectral.validate()
    s_eig = np.asarray(s_op, dtype=complex)
    if s_eig.shape != (eig.dim, eig.dim):
        raise ValueError("coupling operator dimension mismatch")
    c_matrix = _spectral_matrix(eig, spectral)
    dissipator = _redfield_dissipator(s_eig, c_matrix)
    return _assemble(eig, dissipator, mode)


def _lindblad_dissipator(collapse: list[tuple[float, np.ndarray]], dim: int) -> np.ndarray:
    """Sum of gamma * (L . L^dag - {L^dag L, .}/2) as a 4-index tensor."""
    total = np.zeros((dim, dim, dim, dim), dtype=complex)
    eye = np.eye(dim)
    for gamma, op in collapse:
        # (L rho L^dag)_{nm} = L[n,n'] conj(L[m,m']) rho_{n'm'}
        sandwich = np.einsum("nq,mp->nmqp", op, op.conj())
        ldl = op.conj().T @ op
        anti = 0.5 * (np.einsum("nq,mp->nmqp", ldl, eye) + np.einsum("pm,nq->nmqp", ldl, eye))
        total += gamma * (sandwich - anti)
    return total


def build_lindblad_generator(eig_or_h, rates: DecoherenceRates,
                             mode: SecularMode = SecularMode.NONE, *,
                             params: SystemParams | None = None,
                             n_spins: int | None = None,
                             restricted: bool | None = None) -> Superoperator:
    """Lindblad generator with phenomenological TLS rates.

    The collapse channels are the TLS lowering operator at rate gamma_1 and
    sigma_z on the TLS at rate gamma_phi (so uncoupled off-diagonals decay
    at gamma_1/2 + 2 gamma_phi).  Accepts a prebuilt :class:`EigenSystem`
    or a bare Hamiltonian.
    """
    rates.validate()
    if isinstance(eig_or_h, EigenSystem):
        eig = eig_or_h
    else:
        eig = eigensystem(np.asarray(eig_or_h), params, n_spins=n_spins, restricted=restricted)

    tls = eig.n_spins - 1
    lower_lab = spin_operator(SIGMA_MINUS, tls, eig.n_spins)
    dephase_lab = spin_operator(PAULI_Z, tls, eig.n_spins)
    if eig.restricted:
        lower_lab = restrict_single_excitation(lower_lab, eig.n_spins)
        dephase_lab = restrict_single_excitation(dephase_lab, eig.n_spins)
    v = eig.vectors
    collapse = [(rates.gamma_1, v.conj().T @ lower_lab @ v),
                (rates.gamma_phi, v.conj().T @ dephase_lab @ v)]
    dissipator = _lindblad_dissipator(collapse, eig.dim)
    return _assemble(eig, dissipator, mode)


def build_generator(params: SystemParams, *, bath: BathCoupling | None = None,
                    rates: DecoherenceRates | None = None, engine: str = "redfield",
                    secular: SecularMode = SecularMode.NONE,
                    subspace: str = "single_excitation") -> Superoperator:
    """One-stop construction of an evolution generator for the chain.

    ``engine`` is "redfield" or "lindblad"; exactly one of ``bath`` /
    ``rates`` must be given (rates are converted to an equivalent bath for
    the Redfield engine).  ``subspace`` selects the full 8-dim space or the
    ground + single-excitation block.
    """
    params.validate()
    if (bath is None) == (rates is None):
        raise ValueError("specify exactly one of bath= or rates=")
    if subspace not in ("full", "single_excitation"):
        raise ValueError(f"unknown subspace {subspace!r}")
    restricted = subspace == "single_excitation"

    h = build_hamiltonian(params)
    s_lab = None
    if engine == "redfield":
        if bath is None:
            bath = BathCoupling.from_rates(rates.gamma_1, rates.gamma_phi)
        s_lab = bath_coupling_operator(bath, 3)
    elif engine == "lindblad":
        if rates is None:
            rates = rates_from_coupling(bath)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    if restricted:
        h = restrict_single_excitation(h)
        if s_lab is not None:
            s_lab = restrict_single_excitation(s_lab)
    eig = eigensystem(h, params, n_spins=3, restricted=restricted)

    if engine == "redfield":
        s_eig = eig.vectors.conj().T @ s_lab @ eig.vectors
        return build_redfield_tensor(eig, s_eig, bath.spectral, mode=secular)
    return build_lindblad_generator(eig, rates, mode=secular)

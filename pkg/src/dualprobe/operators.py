"""Pauli/tensor algebra and Hamiltonians for the qubit-qubit-TLS chain.

Basis convention, fixed for the whole package: product states are ordered
|Q1, Q2, TLS> with the excited state (up) listed first for every subsystem,
so the index of a basis state is ``4*q1 + 2*q2 + tls`` with 0 = up and
1 = down.  The global ground state |ddd> therefore sits at index 7 and the
canonical initial state |udd> (qubit 1 excited) at index 3.

All rates and frequencies are quoted in units of the combined coupling
g = sqrt(g1^2 + g2^2); setting g = 1 fixes the scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |down><up|
IDENTITY_2 = np.eye(2, dtype=complex)

# Ground + single-excitation basis, in the documented order
# {|ddd>, |udd>, |dud>, |ddu>} for three spins and {|dd>, |ud>, |du>} for two.
SINGLE_EXCITATION_INDICES = {3: (7, 3, 5, 6), 2: (3, 1, 2)}

#: index of |udd> in the full space and in the restricted basis
INITIAL_STATE_INDEX_FULL = 3
INITIAL_STATE_INDEX_RESTRICTED = 1


@dataclass(frozen=True)
class SystemParams:
    """Hamiltonian parameters: qubit splitting, TLS detuning, couplings.

    ``omega_q`` is half the qubit level splitting, ``delta`` the relative
    qubit-TLS detuning and ``g1``, ``g2`` the transversal coupling
    strengths of the two qubits to the TLS.
    """

    omega_q: float = 1000.0
    delta: float = 0.0
    g1: float = 1.0 / math.sqrt(2.0)
    g2: float = 1.0 / math.sqrt(2.0)

    @property
    def g(self) -> float:
        return math.hypot(self.g1, self.g2)

    @property
    def splitting(self) -> float:
        """Hybridized single-excitation splitting sqrt(delta^2 + 4 g^2)."""
        return math.sqrt(self.delta**2 + 4.0 * self.g**2)

    @property
    def subspace_separation_ok(self) -> bool:
        """True when omega_q dominates all other scales (>= 100x)."""
        return self.omega_q >= 100.0 * max(abs(self.delta), self.g)

    def validate(self) -> None:
        values = (self.omega_q, self.delta, self.g1, self.g2)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite system parameters: {values}")
        if self.g1 < 0 or self.g2 < 0:
            raise ValueError("coupling strengths g1, g2 must be nonnegative")
        if self.omega_q <= 0:
            raise ValueError("omega_q must be positive")


@dataclass(frozen=True)
class SpectralFunction:
    """Flat two-point bath spectrum: C(0) and C(2 omega_q).

    The bath enters only through these two values; the spectrum is assumed
    constant on the small scales delta and g.  The low-temperature limit
    C(-2 omega_q) = 0 is built into the tensor construction.
    """

    c_zero: float = 1.0
    c_split: float = 1.0

    def validate(self) -> None:
        if not (math.isfinite(self.c_zero) and math.isfinite(self.c_split)):
            raise ValueError("non-finite spectral values")
        if self.c_zero < 0 or self.c_split < 0:
            raise ValueError("spectral function values must be nonnegative")


@dataclass(frozen=True)
class BathCoupling:
    """TLS-bath coupling strengths and the bath spectrum.

    ``v_perp`` multiplies sigma_x on the TLS (energy exchange with the
    bath), ``v_par`` multiplies sigma_z (pure dephasing).
    """

    v_perp: float = 0.0
    v_par: float = 0.0
    spectral: SpectralFunction = SpectralFunction()

    def validate(self) -> None:
        if not (math.isfinite(self.v_perp) and math.isfinite(self.v_par)):
            raise ValueError("non-finite bath couplings")
        if self.v_perp < 0 or self.v_par < 0:
            raise ValueError("bath couplings must be nonnegative")
        self.spectral.validate()

    @classmethod
    def from_rates(cls, gamma_1: float, gamma_phi: float) -> "BathCoupling":
        """Bath coupling reproducing phenomenological rates exactly.

        Uses unit spectral values so gamma_1 = v_perp^2 C(2 omega_q) and
        gamma_phi = v_par^2 C(0) hold with v = sqrt(rate).
        """
        if gamma_1 < 0 or gamma_phi < 0:
            raise ValueError("rates must be nonnegative")
        return cls(v_perp=math.sqrt(gamma_1), v_par=math.sqrt(gamma_phi),
                   spectral=SpectralFunction(1.0, 1.0))


def spin_operator(op: np.ndarray, site: int, n_spins: int) -> np.ndarray:
    """Embed a single-spin operator at ``site`` into the n-spin product space."""
    if not 0 <= site < n_spins:
        raise ValueError(f"site {site} outside 0..{n_spins - 1}")
    out = np.ones((1, 1), dtype=complex)
    for k in range(n_spins):
        out = np.kron(out, op if k == site else IDENTITY_2)
    return out


def flip_flop(site_a: int, site_b: int, n_spins: int) -> np.ndarray:
    """Transversal exchange sigma_x sigma_x + sigma_y sigma_y between two sites."""
    return (spin_operator(PAULI_X, site_a, n_spins) @ spin_operator(PAULI_X, site_b, n_spins)
            + spin_operator(PAULI_Y, site_a, n_spins) @ spin_operator(PAULI_Y, site_b, n_spins))


def excitation_numbers(n_spins: int) -> np.ndarray:
    """Excitation count of each product basis state (up = excited = bit 0)."""
    dim = 2**n_spins
    idx = np.arange(dim)
    ones = np.array([bin(i).count("1") for i in idx])
    return n_spins - ones


def build_hamiltonian(params: SystemParams) -> np.ndarray:
    """Full 8x8 Hamiltonian of the Q1-TLS-Q2 chain.

    H = w_q sz^Q1 + w_q sz^Q2 + (w_q + delta) sz^TLS
        + g1 (sx^Q1 sx^TLS + sy^Q1 sy^TLS) + g2 (sx^Q2 sx^TLS + sy^Q2 sy^TLS)

    The exchange terms conserve total excitation number, so H is block
    diagonal over excitation sectors.
    """
    params.validate()
    h = (params.omega_q * spin_operator(PAULI_Z, 0, 3)
         + params.omega_q * spin_operator(PAULI_Z, 1, 3)
         + (params.omega_q + params.delta) * spin_operator(PAULI_Z, 2, 3)
         + params.g1 * flip_flop(0, 2, 3)
         + params.g2 * flip_flop(1, 2, 3))
    return h


def build_single_qubit_hamiltonian(params: SystemParams) -> np.ndarray:
    """4x4 Hamiltonian of one qubit coupled to the TLS (g2 ignored).

    Basis |Q1, TLS> with the same up-first ordering.
    """
    params.validate()
    return (params.omega_q * spin_operator(PAULI_Z, 0, 2)
            + (params.omega_q + params.delta) * spin_operator(PAULI_Z, 1, 2)
            + params.g1 * flip_flop(0, 1, 2))


def bath_coupling_operator(bath: BathCoupling, n_spins: int = 3) -> np.ndarray:
    """System side of the TLS-bath coupling, v_perp sx^TLS + v_par sz^TLS."""
    bath.validate()
    tls = n_spins - 1
    return bath.v_perp * spin_operator(PAULI_X, tls, n_spins) + bath.v_par * spin_operator(PAULI_Z, tls, n_spins)


def _check_hermitian(h: np.ndarray, tol: float = 1e-10) -> None:
    scale = max(1.0, float(np.abs(h).max()))
    if np.abs(h - h.conj().T).max() > tol * scale:
        raise ValueError("operator is not Hermitian")


@dataclass(frozen=True)
class EigenSystem:
    """Sector-labelled orthonormal eigensystem of a chain Hamiltonian.

    States are sorted by (excitation sector, energy); for the coupled chain
    this reproduces the conventional numbering |1>..|8>.  ``restricted``
    marks eigensystems of the ground + single-excitation block.
    """

    energies: np.ndarray
    vectors: np.ndarray  # orthonormal columns
    sectors: np.ndarray
    n_spins: int
    restricted: bool

    @property
    def dim(self) -> int:
        return self.energies.size

    def frequency_matrix(self) -> np.ndarray:
        """omega_nm = E_n - E_m."""
        return self.energies[:, None] - self.energies[None, :]

    def sector_difference(self) -> np.ndarray:
        return self.sectors[:, None] - self.sectors[None, :]


def _sector_labels(dim: int, n_spins: int, restricted: bool) -> np.ndarray:
    if restricted:
        return np.array([0] + [1] * (dim - 1))
    return excitation_numbers(n_spins)


def _infer_space(dim: int, n_spins: int | None, restricted: bool | None) -> tuple[int, bool]:
    if n_spins is None and restricted is None:
        # 4 could be either three spins restricted or two spins full; the
        # three-spin chain is the primary object, so that reading wins.
        defaults = {8: (3, False), 4: (3, True), 3: (2, True), 2: (1, False)}
        if dim not in defaults:
            raise ValueError(f"cannot infer spin content for dimension {dim}")
        return defaults[dim]
    if n_spins is None or restricted is None:
        raise ValueError("pass both n_spins and restricted, or neither")
    expected = n_spins + 1 if restricted else 2**n_spins
    if dim != expected:
        raise ValueError(f"dimension {dim} inconsistent with n_spins={n_spins}, restricted={restricted}")
    return n_spins, restricted


def analytic_eigenstates(params: SystemParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form eigensystem of the full chain (normalized columns).

    Returns (energies, vectors, sectors) in the conventional order
    |1>..|8>.  Requires g > 0; the dark combinations are ill-defined for
    g1 = g2 = 0.
    """
    params.validate()
    if params.g == 0:
        raise ValueError("analytic eigenstates need g1 + g2 > 0")
    wq, d, g1, g2 = params.omega_q, params.delta, params.g1, params.g2
    s = params.splitting
    g = params.g

    def basis(i: int) -> np.ndarray:
        v = np.zeros(8, dtype=complex)
        v[i] = 1.0
        return v

    # product indices: |udd>=3, |dud>=5, |ddu>=6, |uud>=1, |udu>=2, |duu>=4
    raw = [
        (-3 * wq - d, basis(7), 0),
        (-wq - s, 2 * g1 * basis(3) + 2 * g2 * basis(5) + (d - s) * basis(6), 1),
        (-wq - d, -g2 * basis(3) + g1 * basis(5), 1),
        (-wq + s, 2 * g1 * basis(3) + 2 * g2 * basis(5) + (d + s) * basis(6), 1),
        (wq - s, (-d - s) * basis(1) + 2 * g2 * basis(2) + 2 * g1 * basis(4), 2),
        (wq + d, -g1 * basis(2) + g2 * basis(4), 2),
        (wq + s, (-d + s) * basis(1) + 2 * g2 * basis(2) + 2 * g1 * basis(4), 2),
        (3 * wq + d, basis(0), 3),
    ]
    energies = np.array([e for e, _, _ in raw])
    vectors = np.column_stack([v / np.linalg.norm(v) for _, v, _ in raw])
    sectors = np.array([s_ for _, _, s_ in raw])
    return energies, vectors, sectors


def eigensystem(h: np.ndarray, params: SystemParams | None = None, *,
                n_spins: int | None = None, restricted: bool | None = None) -> EigenSystem:
    """Diagonalize a chain Hamiltonian, labelling excitation sectors.

    States are ordered by (sector, energy).  When ``params`` are supplied
    and g > 0, the numeric eigenvectors are phase-aligned to the analytic
    forms, which pins the dark-state sign convention.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    _check_hermitian(h)
    dim = h.shape[0]
    n_spins, restricted = _infer_space(dim, n_spins, restricted)

    energies, vectors = np.linalg.eigh(h)
    sector_diag = _sector_labels(dim, n_spins, restricted)
    sectors = np.array([int(round(float(np.real(v.conj() @ (sector_diag * v)))))
                        for v in vectors.T])
    order = np.lexsort((energies, sectors))
    energies, vectors, sectors = energies[order], vectors[:, order], sectors[order]

    reference = None
    if params is not None and params.g > 0 and n_spins == 3:
        ref_e, ref_v, ref_s = analytic_eigenstates(params)
        if restricted:
            keep = ref_s <= 1
            ref_v = ref_v[np.array(SINGLE_EXCITATION_INDICES[3]), :][:, keep]
        reference = ref_v
    for k in range(dim):
        col = vectors[:, k]
        if reference is not None and k < reference.shape[1]:
            overlap = complex(reference[:, k].conj() @ col)
        else:
            overlap = col[int(np.argmax(np.abs(col)))]
        if abs(overlap) > 1e-12:
            vectors[:, k] = col * (overlap.conjugate() / abs(overlap))
    # real symmetric input gives real eigenvectors after phase fixing
    if np.abs(vectors.imag).max() < 1e-12:
        vectors = vectors.real.astype(complex)
    return EigenSystem(energies=energies, vectors=vectors, sectors=sectors,
                       n_spins=n_spins, restricted=restricted)


def restrict_single_excitation(arr: np.ndarray, n_spins: int = 3) -> np.ndarray:
    """Project onto the ground + single-excitation basis.

    Accepts a state vector or an operator / density matrix in the full
    product space and returns its restriction in the documented order
    (ground state first).
    """
    idx = np.array(SINGLE_EXCITATION_INDICES[n_spins])
    arr = np.asarray(arr)
    if arr.ndim == 1:
        return arr[idx]
    if arr.ndim == 2:
        return arr[np.ix_(idx, idx)]
    raise ValueError("expected a vector or a matrix")


def embed_restricted(arr: np.ndarray, n_spins: int = 3) -> np.ndarray:
    """Inverse of :func:`restrict_single_excitation` (zero padding)."""
    idx = np.array(SINGLE_EXCITATION_INDICES[n_spins])
    dim = 2**n_spins
    arr = np.asarray(arr)
    if arr.ndim == 1:
        out = np.zeros(dim, dtype=arr.dtype)
        out[idx] = arr
        return out
    if arr.ndim == 2:
        out = np.zeros((dim, dim), dtype=arr.dtype)
        out[np.ix_(idx, idx)] = arr
        return out
    raise ValueError("expected a vector or a matrix")


def partial_trace(rho: np.ndarray, keep, n_spins: int | None = None,
                  restricted: bool = False) -> np.ndarray:
    """Reduced density matrix over the kept subsystems.

    ``keep`` lists subsystem indices (0 = Q1, 1 = Q2, 2 = TLS) in the order
    they should appear in the output.  Restricted-space states are embedded
    into the full product space first.
    """
    rho = np.asarray(rho, dtype=complex)
    if restricted:
        n_spins = n_spins or 3
        rho = embed_restricted(rho, n_spins)
    if n_spins is None:
        n_spins = int(round(math.log2(rho.shape[0])))
    if rho.shape != (2**n_spins, 2**n_spins):
        raise ValueError(f"state dimension {rho.shape} is not a {n_spins}-spin matrix")
    keep = list(keep)
    if any(not 0 <= k < n_spins for k in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid subsystem selection {keep} for {n_spins} spins")

    tensor = rho.reshape((2,) * (2 * n_spins))
    traced = [k for k in range(n_spins) if k not in keep]
    for k in sorted(traced, reverse=True):
        tensor = np.trace(tensor, axis1=k, axis2=k + tensor.ndim // 2)
    # axes now follow the original ordering of the kept sites
    kept_sorted = sorted(keep)
    perm = [kept_sorted.index(k) for k in keep]
    n = len(keep)
    tensor = tensor.transpose(tuple(perm) + tuple(n + p for p in perm))
    return tensor.reshape(2**n, 2**n)


def basis_state(label: str, n_spins: int = 3) -> np.ndarray:
    """Product state from a label like 'udd' (u = excited, d = ground)."""
    if len(label) != n_spins or any(c not in "ud" for c in label):
        raise ValueError(f"bad basis label {label!r}")
    idx = 0
    for c in label:
        idx = 2 * idx + (0 if c == "u" else 1)
    v = np.zeros(2**n_spins, dtype=complex)
    v[idx] = 1.0
    return v


def density_matrix(state: np.ndarray) -> np.ndarray:
    """Projector onto a pure state."""
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())

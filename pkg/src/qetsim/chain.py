"""Nearest-neighbor qubit chains: energy densities, measurement protocols.

A chain is defined by per-site on-site operators, interaction channels
(one shared 2x2 operator per site per channel plus per-bond couplings) and
per-site constant shifts.  The energy density at site ``n`` is the on-site
piece plus half of each adjacent bond, so the densities sum to the full
Hamiltonian.  After :func:`normalize` every density has zero ground-state
expectation and the Hamiltonian is nonnegative with ground eigenvalue zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator

from . import core
from .core import (
    GroundState,
    InvariantViolation,
    LocalOperator,
    PovmMeasurement,
    StateVector,
    apply_local,
    hermitize,
)

DENSE_SITE_LIMIT = 12


@dataclass(frozen=True, eq=False)
class Channel:
    """One interaction channel: a site operator reused by both adjacent bonds."""

    y_ops: tuple[np.ndarray, ...]
    couplings: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class EnergyDensityTerm:
    """Assembled semi-local energy density at one site."""

    site: int
    x_op: LocalOperator
    interactions: tuple[tuple[int, float, float], ...]  # (channel, g_left, g_right)
    operator: LocalOperator


@dataclass(frozen=True, eq=False)
class ChainModel:
    n_sites: int
    boundary: str
    x_ops: tuple[np.ndarray, ...]
    channels: tuple[Channel, ...]
    shifts: tuple[float, ...]

    def __post_init__(self):
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be open or periodic, not {self.boundary!r}")
        if self.n_sites < 2:
            raise ValueError("a chain needs at least two sites")
        if self.boundary == "periodic" and self.n_sites < 3:
            raise ValueError("periodic chains need at least three sites")
        if len(self.x_ops) != self.n_sites or len(self.shifts) != self.n_sites:
            raise ValueError("per-site data length mismatch")
        x_ops = tuple(hermitize(np.asarray(m, dtype=complex)) for m in self.x_ops)
        channels = []
        for ch in self.channels:
            if len(ch.y_ops) != self.n_sites or len(ch.couplings) != self.n_bonds:
                raise ValueError("channel data length mismatch")
            channels.append(Channel(
                tuple(hermitize(np.asarray(m, dtype=complex)) for m in ch.y_ops),
                tuple(float(g) for g in ch.couplings),
            ))
        object.__setattr__(self, "x_ops", x_ops)
        object.__setattr__(self, "channels", tuple(channels))
        object.__setattr__(self, "shifts", tuple(float(s) for s in self.shifts))

    @property
    def n_bonds(self) -> int:
        return self.n_sites if self.boundary == "periodic" else self.n_sites - 1

    def bond_sites(self, bond: int) -> tuple[int, int]:
        return bond, (bond + 1) % self.n_sites

    def _left_bond(self, n: int) -> int | None:
        if self.boundary == "periodic":
            return (n - 1) % self.n_sites
        return n - 1 if n >= 1 else None

    def _right_bond(self, n: int) -> int | None:
        if self.boundary == "periodic":
            return n
        return n if n <= self.n_sites - 2 else None

    def separation(self, a: int, b: int) -> int:
        d = abs(a - b)
        if self.boundary == "periodic":
            return min(d, self.n_sites - d)
        return d

    def region(self, n: int) -> tuple[int, ...]:
        """Sites whose densities contribute to the local energy around n."""
        if self.boundary == "periodic":
            sites = {(n - 1) % self.n_sites, n, (n + 1) % self.n_sites}
        else:
            sites = {m for m in (n - 1, n, n + 1) if 0 <= m < self.n_sites}
        return tuple(sorted(sites))

    def term(self, n: int) -> EnergyDensityTerm:
        """Energy density at site n: on-site operator plus half of each bond."""
        if not 0 <= n < self.n_sites:
            raise ValueError(f"site {n} out of range")
        support = set(self.region(n))
        support = tuple(sorted(support))
        pos = {s: i for i, s in enumerate(support)}
        dim = 2 ** len(support)
        mat = np.zeros((dim, dim), dtype=complex)

        def place(factors: dict[int, np.ndarray]) -> np.ndarray:
            mats = [factors.get(s, np.eye(2, dtype=complex)) for s in support]
            return core.kron_all(*mats)

        mat += place({n: self.x_ops[n] - self.shifts[n] * np.eye(2)})
        interactions = []
        for j, ch in enumerate(self.channels):
            lb, rb = self._left_bond(n), self._right_bond(n)
            g_left = ch.couplings[lb] if lb is not None else 0.0
            g_right = ch.couplings[rb] if rb is not None else 0.0
            if lb is not None:
                a, b = self.bond_sites(lb)
                mat += 0.5 * g_left * place({a: ch.y_ops[a], b: ch.y_ops[b]})
            if rb is not None:
                a, b = self.bond_sites(rb)
                mat += 0.5 * g_right * place({a: ch.y_ops[a], b: ch.y_ops[b]})
            interactions.append((j, g_left, g_right))
        op = LocalOperator(support, hermitize(mat))
        x_local = LocalOperator((n,), self.x_ops[n] - self.shifts[n] * np.eye(2))
        return EnergyDensityTerm(n, x_local, tuple(interactions), op)

    @cached_property
    def terms(self) -> tuple[EnergyDensityTerm, ...]:
        return tuple(self.term(n) for n in range(self.n_sites))

    @cached_property
    def _h_pieces(self) -> tuple[LocalOperator, ...]:
        """Site and bond operators whose sum is the Hamiltonian."""
        pieces = []
        for n in range(self.n_sites):
            pieces.append(LocalOperator(
                (n,), self.x_ops[n] - self.shifts[n] * np.eye(2)))
        for ch in self.channels:
            for bond in range(self.n_bonds):
                a, b = self.bond_sites(bond)
                mat = ch.couplings[bond] * np.kron(ch.y_ops[a], ch.y_ops[b])
                pieces.append(LocalOperator((a, b), mat))
        return tuple(pieces)

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        """Dense Hamiltonian, real when possible (up to 12 sites)."""
        if self.n_sites > DENSE_SITE_LIMIT:
            raise ValueError(
                f"dense Hamiltonian limited to {DENSE_SITE_LIMIT} sites; "
                "use apply_hamiltonian / linear_operator"
            )
        dim = 2**self.n_sites
        total = sp.csr_matrix((dim, dim), dtype=complex)

        def embedded(factors: dict[int, np.ndarray]) -> sp.csr_matrix:
            acc = sp.identity(1, dtype=complex, format="csr")
            for site in range(self.n_sites):
                blk = factors.get(site)
                if blk is None:
                    acc = sp.kron(acc, sp.identity(2, dtype=complex,
                                                   format="csr"), format="csr")
                else:
                    acc = sp.kron(acc, sp.csr_matrix(blk), format="csr")
            return acc

        for n in range(self.n_sites):
            total = total + embedded(
                {n: self.x_ops[n] - self.shifts[n] * np.eye(2)})
        for ch in self.channels:
            for bond in range(self.n_bonds):
                a, b = self.bond_sites(bond)
                total = total + embedded(
                    {a: ch.couplings[bond] * ch.y_ops[a], b: ch.y_ops[b]})
        dense = np.asarray(total.todense())
        if np.abs(dense.imag).max() == 0.0:
            dense = dense.real.copy()
        return dense

    def apply_hamiltonian(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(2**self.n_sites, dtype=complex)
        for piece in self._h_pieces:
            out += apply_local(piece, vec, self.n_sites)
        return out

    def linear_operator(self) -> LinearOperator:
        dim = 2**self.n_sites
        return LinearOperator((dim, dim), matvec=self.apply_hamiltonian,
                              dtype=complex)

    @cached_property
    def ground(self) -> GroundState:
        if self.n_sites <= DENSE_SITE_LIMIT:
            return core.ground_state(self.hamiltonian)
        return core.ground_state(self.linear_operator())

    def term_expectation(self, n: int, amplitudes: np.ndarray) -> float:
        op = self.terms[n].operator
        val = np.vdot(amplitudes, apply_local(op, amplitudes, self.n_sites))
        return float(val.real)


def normalize(model: ChainModel) -> ChainModel:
    """Shift each on-site operator so all densities average to zero.

    The returned model has ground eigenvalue zero within 1e-9 and
    ``<g|T_n|g> = 0`` within 1e-9 for every site.
    """
    gs = model.ground
    if gs.degenerate:
        raise InvariantViolation(
            f"degenerate ground state (gap {gs.gap:.3g}); normalization undefined"
        )
    amp = gs.state.amplitudes
    eps = [model.term_expectation(n, amp) for n in range(model.n_sites)]
    shifted = replace(
        model, shifts=tuple(s + e for s, e in zip(model.shifts, eps))
    )
    # H only changes by a multiple of the identity: reuse the spectral data.
    drop = math.fsum(eps)
    if "hamiltonian" in model.__dict__:
        ham = model.hamiltonian - drop * np.eye(2**model.n_sites,
                                                dtype=model.hamiltonian.dtype)
        shifted.__dict__["hamiltonian"] = ham
    shifted.__dict__["ground"] = GroundState(
        gs.energy - drop, gs.state, gs.gap, gs.degenerate
    )
    for n in range(shifted.n_sites):
        resid = shifted.term_expectation(n, amp)
        if abs(resid) > 1e-9:
            raise InvariantViolation(
                f"density at site {n} still averages {resid!r} after the shift"
            )
    if abs(shifted.ground.energy) > 1e-9:
        raise InvariantViolation(
            f"ground eigenvalue {shifted.ground.energy!r} after normalization"
        )
    return shifted


@dataclass(frozen=True, eq=False)
class DensityWitness:
    epsilon_minus: float
    witness_state: StateVector
    factorization_broken: bool
    probe_site: int


def negative_density_witness(model: ChainModel, n: int,
                             probe_site: int | None = None,
                             probe_matrix: np.ndarray | None = None
                             ) -> DensityWitness:
    """Lowest eigenvalue of the density at ``n`` and a state attaining it.

    When the ground state is entangled across the probe (broken two-point
    factorization) the lowest eigenvalue is strictly negative; for separable
    ground states a nonnegative value is returned with the flag cleared.
    """
    term = model.terms[n]
    vals, vecs = np.linalg.eigh(term.operator.matrix)
    eps_minus = float(vals[0])
    local_vec = vecs[:, 0]
    full = np.zeros(2**model.n_sites, dtype=complex)
    k = term.operator.n_support
    for idx in range(2**k):
        amp = local_vec[idx]
        if amp == 0:
            continue
        g_idx = 0
        for pos, site in enumerate(term.operator.support):
            bit = (idx >> (k - 1 - pos)) & 1
            g_idx |= bit << (model.n_sites - 1 - site)
        full[g_idx] = amp
    witness = StateVector(model.n_sites, full / np.linalg.norm(full))

    if probe_site is None:
        if n + 2 < model.n_sites:
            probe_site = n + 2
        elif n - 2 >= 0:
            probe_site = n - 2
        else:
            probe_site = (n + 2) % model.n_sites
    if model.separation(n, probe_site) <= 1:
        raise ValueError(f"probe site {probe_site} is adjacent to site {n}")
    gs = model.ground
    amp = gs.state.amplitudes
    probe = LocalOperator(
        (probe_site,),
        core.PAULI_Z if probe_matrix is None else probe_matrix)
    t_amp = apply_local(term.operator, amp, model.n_sites)
    joint = np.vdot(amp, apply_local(probe, t_amp, model.n_sites))
    t_only = np.vdot(amp, t_amp)
    o_only = np.vdot(amp, apply_local(probe, amp, model.n_sites))
    broken = abs(joint - t_only * o_only) > 1e-8
    return DensityWitness(eps_minus, witness, broken, probe_site)


@dataclass(frozen=True, eq=False)
class ChainProtocolSpec:
    site_a: int
    site_b: int
    measurement: PovmMeasurement
    g_b: LocalOperator
    theta: float

    def __post_init__(self):
        if self.measurement.site != self.site_a:
            raise ValueError("measurement must act at site_a")
        if self.g_b.support != (self.site_b,):
            raise ValueError("g_b must act at site_b")
        if not self.g_b.is_hermitian():
            raise ValueError("g_b must be Hermitian")


@dataclass(frozen=True, eq=False)
class ChainOutcomeRecord:
    alpha: float
    probability: float
    post_measurement: StateVector
    post_operation: StateVector


@dataclass(frozen=True, eq=False)
class ChainProtocolResult:
    e_a: float
    e_b: float
    theta: float
    outcomes: tuple[ChainOutcomeRecord, ...]
    site_energies: tuple[float, ...]
    local_energy_b: float


def _check_separation(model: ChainModel, site_a: int, site_b: int) -> None:
    for site in (site_a, site_b):
        if not 0 <= site < model.n_sites:
            raise ValueError(f"site {site} out of range for {model.n_sites} sites")
    sep = model.separation(site_a, site_b)
    if sep < 3:
        raise ValueError(
            f"sites {site_a} and {site_b} are {sep} apart; the local energy "
            "regions overlap and the protocol bookkeeping breaks down"
        )
    if sep < 5:
        warnings.warn(
            f"separation {sep} < 5: semi-local commutation holds but the "
            "theory assumes a wider gap", stacklevel=3)


def _bounded_unitary(g_b: LocalOperator, angle: float) -> np.ndarray:
    """exp(-i angle G) for a Hermitian 2x2 generator."""
    vals, vecs = np.linalg.eigh(g_b.matrix)
    return (vecs * np.exp(-1j * angle * vals)) @ vecs.conj().T


def run_protocol(model: ChainModel, spec: ChainProtocolSpec) -> ChainProtocolResult:
    """Measure at A, rotate at B by the announced label; verify both routes.

    Input energy is computed from the local densities around A and checked
    against the global expectation; output energy is computed both from the
    post-operation state and from the B-side density route, which must agree
    within 1e-10.
    """
    _check_separation(model, spec.site_a, spec.site_b)
    gs = model.ground
    if gs.degenerate:
        raise InvariantViolation("degenerate ground state; protocol undefined")
    g = gs.state.amplitudes
    n = model.n_sites
    region_a = model.region(spec.site_a)
    region_b = model.region(spec.site_b)

    e_a_local = 0.0
    e_a_global = 0.0
    records = []
    branches = []
    rotated_branches = []
    for label, mop in spec.measurement.operators:
        branch = apply_local(mop, g, n)
        p = float(np.vdot(branch, branch).real)
        branches.append(branch)
        e_a_global += np.vdot(branch, model.apply_hamiltonian(branch)).real
        for m in region_a:
            e_a_local += model.term_expectation(m, branch)
        u = LocalOperator((spec.site_b,), _bounded_unitary(spec.g_b, label * spec.theta))
        rotated = apply_local(u, branch, n)
        rotated_branches.append((label, p, rotated))
        if p > core.PROB_FLOOR:
            records.append(ChainOutcomeRecord(
                label, p,
                StateVector(n, branch / math.sqrt(p)),
                StateVector(n, rotated / math.sqrt(p)),
            ))
    if abs(e_a_local - e_a_global) > 1e-10:
        raise InvariantViolation(
            f"input energy is not localized around A: local {e_a_local!r} "
            f"vs global {e_a_global!r}"
        )
    e_a = e_a_local

    # densities away from A must stay exactly at zero after the measurement
    for m in range(model.n_sites):
        if model.separation(m, spec.site_a) >= 2:
            val = sum(model.term_expectation(m, branch) for branch in branches)
            if abs(val) > 1e-10:
                raise InvariantViolation(
                    f"measurement excited the density at site {m}: {val!r}"
                )

    total_after = 0.0
    local_b = 0.0
    site_energies = np.zeros(model.n_sites)
    for _, _, rotated in rotated_branches:
        total_after += np.vdot(rotated, model.apply_hamiltonian(rotated)).real
        for m in range(model.n_sites):
            site_energies[m] += model.term_expectation(m, rotated)
    local_b = float(sum(site_energies[m] for m in region_b))
    e_b_state_route = e_a - total_after

    # independent route through the measurement elements
    e_b_density_route = 0.0
    for label, mop in spec.measurement.operators:
        pi_op = LocalOperator((spec.site_a,),
                              mop.matrix.conj().T @ mop.matrix)
        u = _bounded_unitary(spec.g_b, label * spec.theta)
        w = apply_local(LocalOperator((spec.site_b,), u), g, n)
        hw = np.zeros_like(w)
        for m in region_b:
            hw += apply_local(model.terms[m].operator, w, n)
        hw = apply_local(LocalOperator((spec.site_b,), u.conj().T), hw, n)
        e_b_density_route -= np.vdot(apply_local(pi_op, g, n), hw).real
    if abs(e_b_state_route - e_b_density_route) > 1e-10:
        raise InvariantViolation(
            f"output-energy routes disagree: {e_b_state_route!r} vs "
            f"{e_b_density_route!r}"
        )
    e_b = e_b_state_route
    if abs(local_b + e_b) > 1e-10:
        raise InvariantViolation(
            f"local energy at B is {local_b!r}, expected {-e_b!r}"
        )
    return ChainProtocolResult(
        float(e_a), float(e_b), spec.theta, tuple(records),
        tuple(float(v) for v in site_energies), local_b,
    )


def _local_energy_operator(model: ChainModel, site: int) -> LocalOperator:
    """Sum of the densities around ``site`` as one local operator."""
    sites = set()
    for m in model.region(site):
        sites.update(model.terms[m].operator.support)
    union = tuple(sorted(sites))
    pos = {s: i for i, s in enumerate(union)}
    k = len(union)
    mat = np.zeros((2**k, 2**k), dtype=complex)
    for m in model.region(site):
        op = model.terms[m].operator
        inner = LocalOperator(tuple(pos[s] for s in op.support), op.matrix)
        mat += core.embed_local(inner, k)
    return LocalOperator(union, hermitize(mat))


def eta_xi(model: ChainModel, sigma_a: LocalOperator,
           sigma_b: LocalOperator) -> tuple[float, float]:
    """Correlation and fluctuation coefficients of the qubit-chain output.

    ``eta`` is the ground-state correlation of the measured component at A
    with the velocity of the generator at B, computed both from the local
    energy around B and from the full Hamiltonian (the two must agree within
    1e-10); ``xi`` is the positive fluctuation term of the generator at B.
    """
    for name, op in (("sigma_a", sigma_a), ("sigma_b", sigma_b)):
        if not (op.is_hermitian() and op.is_involution()):
            raise ValueError(f"{name} must be a Hermitian involution")
    return _eta_xi_general(model, sigma_a, sigma_b)


def _eta_xi_general(model: ChainModel, d_a: LocalOperator,
                    g_b: LocalOperator) -> tuple[float, float]:
    site_a = d_a.support[0]
    site_b = g_b.support[0]
    _check_separation(model, site_a, site_b)
    gs = model.ground
    g = gs.state.amplitudes
    n = model.n_sites

    h_b_loc = _local_energy_operator(model, site_b)
    pos = {s: i for i, s in enumerate(h_b_loc.support)}
    g_inner = core.embed_local(
        LocalOperator((pos[site_b],), g_b.matrix), h_b_loc.n_support)
    comm = 1j * (h_b_loc.matrix @ g_inner - g_inner @ h_b_loc.matrix)
    gdot_local = LocalOperator(h_b_loc.support, comm)
    w = apply_local(gdot_local, g, n)
    eta_local = np.vdot(g, apply_local(d_a, w, n))

    w2 = apply_local(g_b, g, n)
    w2 = 1j * (model.apply_hamiltonian(w2)
               - apply_local(g_b, model.apply_hamiltonian(g), n))
    eta_full = np.vdot(g, apply_local(d_a, w2, n))
    if abs(eta_local - eta_full) > 1e-10:
        raise InvariantViolation(
            f"generator velocity differs between the local and full routes: "
            f"{eta_local!r} vs {eta_full!r}"
        )
    if abs(eta_local.imag) > 1e-10:
        raise InvariantViolation(f"eta has imaginary part {eta_local.imag!r}")
    eta = float(eta_local.real)

    w3 = apply_local(g_b, g, n)
    xi_val = np.vdot(w3, model.apply_hamiltonian(w3))
    if abs(xi_val.imag) > 1e-10:
        raise InvariantViolation(f"xi has imaginary part {xi_val.imag!r}")
    return eta, float(xi_val.real)


def qubit_closed_form(eta: float, xi: float, theta: float) -> float:
    """Output energy of the involution protocol at angle ``theta``."""
    return 0.5 * eta * math.sin(2 * theta) - 0.5 * xi * (1 - math.cos(2 * theta))


def optimal_angle(eta: float, xi: float) -> tuple[float, float]:
    """Maximizing angle and maximal output; requires ``xi > 0``."""
    if xi <= 0:
        raise ValueError(f"xi must be positive, got {xi}")
    theta = 0.5 * math.atan2(eta, xi)
    return theta, 0.5 * (math.hypot(eta, xi) - xi)


def measurement_bias_operator(m: PovmMeasurement) -> LocalOperator:
    """Label-weighted sum of the measurement elements (Hermitian)."""
    mat = np.zeros((2, 2), dtype=complex)
    for label, op in m.operators:
        mat += label * (op.matrix.conj().T @ op.matrix)
    return LocalOperator((m.site,), hermitize(mat))


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * (i + 0.5) / count
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def best_teleportable_energy(model: ChainModel, measurement: PovmMeasurement,
                             sites: tuple[int, ...] | None = None,
                             n_directions: int = 192) -> tuple[float, int]:
    """Best closed-form output over extraction sites and generator axes.

    Only valid for binary measurements with labels +1/-1, where the
    involution closed form applies exactly.
    """
    labels = sorted(measurement.labels)
    if labels != [-1.0, 1.0]:
        raise ValueError("closed-form maximization needs labels -1 and +1")
    d_a = measurement_bias_operator(measurement)
    if sites is None:
        sites = tuple(s for s in range(model.n_sites)
                      if model.separation(s, measurement.site) >= 3)
    if not sites:
        raise ValueError("no extraction site is far enough from the measurement")
    gs = model.ground
    g = gs.state.amplitudes
    n = model.n_sites
    h_g = model.apply_hamiltonian(g)
    best = -math.inf
    best_site = sites[0]
    dirs = np.vstack([np.eye(3), _fibonacci_sphere(n_directions)])
    paulis = (core.PAULI_X, core.PAULI_Y, core.PAULI_Z)
    for site in sites:
        etas = np.zeros(3)
        for i, pm in enumerate(paulis):
            op = LocalOperator((site,), pm)
            w = apply_local(op, g, n)
            w = 1j * (model.apply_hamiltonian(w) - apply_local(op, h_g, n))
            etas[i] = np.vdot(g, apply_local(d_a, w, n)).real
        xi_mat = np.zeros((3, 3))
        ws = [apply_local(LocalOperator((site,), pm), g, n) for pm in paulis]
        hws = [model.apply_hamiltonian(w) for w in ws]
        for i in range(3):
            for j in range(3):
                xi_mat[i, j] = np.vdot(ws[i], hws[j]).real
        xi_mat = 0.5 * (xi_mat + xi_mat.T)
        for u in dirs:
            eta_u = float(etas @ u)
            xi_u = float(u @ xi_mat @ u)
            if xi_u <= 0:
                continue
            val = 0.5 * (math.hypot(eta_u, xi_u) - xi_u)
            if val > best:
                best, best_site = val, site
    return best, best_site


def _euler_unitary(angles) -> np.ndarray:
    a, b, c = angles
    rz1 = np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    ry = np.array([[math.cos(b / 2), -math.sin(b / 2)],
                   [math.sin(b / 2), math.cos(b / 2)]], dtype=complex)
    rz2 = np.diag([np.exp(-0.5j * c), np.exp(0.5j * c)])
    return rz1 @ ry @ rz2


def _kraus_pair(params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two 2x2 Kraus operators from 16 reals, complete by construction."""
    raw = params.reshape(8, 2)
    stacked = raw[0::2] + 1j * raw[1::2]
    q, _ = np.linalg.qr(stacked)
    return q[:2, :], q[2:, :]


@dataclass(frozen=True, eq=False)
class ResidualEnergyResult:
    e_r: float
    e_a: float
    e_b_max: float | None
    search_space: str
    coolers: tuple[tuple[float, tuple[float, ...]], ...]
    converged: bool


def residual_energy(model: ChainModel, site_a: int, measurement: PovmMeasurement,
                    search_space: str = "unitary", n_starts: int = 16,
                    seed: int = 7) -> ResidualEnergyResult:
    """Minimal energy left after label-dependent local cooling at A.

    The minimization runs a coarse grid plus derivative-free local descent
    from seeded starts, independently per measurement label (the objective
    separates).  The result upper-bounds the true minimum over channels, so
    the ordering ``E_B <= E_r <= E_A`` is certified before returning.
    """
    if search_space not in ("unitary", "kraus2"):
        raise ValueError(f"unknown search space {search_space!r}")
    if measurement.site != site_a:
        raise ValueError("measurement must act at site_a")
    gs = model.ground
    g = gs.state.amplitudes
    n = model.n_sites
    rng = np.random.default_rng(seed)

    e_a = 0.0
    e_r = 0.0
    coolers = []
    converged = True
    for label, mop in measurement.operators:
        branch = apply_local(mop, g, n)
        p = float(np.vdot(branch, branch).real)
        e_a += np.vdot(branch, model.apply_hamiltonian(branch)).real
        if p < core.PROB_FLOOR:
            continue
        psi = branch / math.sqrt(p)

        if search_space == "unitary":
            def objective(params, psi=psi):
                u = LocalOperator((site_a,), _euler_unitary(params))
                w = apply_local(u, psi, n)
                return float(np.vdot(w, model.apply_hamiltonian(w)).real)
            n_params = 3
            grid = [np.array([a, b, c])
                    for a in np.linspace(0, 2 * math.pi, 4, endpoint=False)
                    for b in np.linspace(0, math.pi, 4)
                    for c in np.linspace(0, 2 * math.pi, 4, endpoint=False)]
        else:
            def objective(params, psi=psi):
                k1, k2 = _kraus_pair(params)
                val = 0.0
                for kmat in (k1, k2):
                    w = apply_local(LocalOperator((site_a,), kmat), psi, n)
                    val += np.vdot(w, model.apply_hamiltonian(w)).real
                return float(val)
            n_params = 16
            ident = np.zeros(16)
            ident[0] = ident[5] = 1.0  # stacked identity Kraus pair
            grid = [ident]

        starts = grid + [rng.uniform(0, 2 * math.pi, n_params)
                         for _ in range(n_starts)]
        starts.sort(key=objective)
        best = math.inf
        best_params = starts[0]
        for start in starts[:max(4, n_starts // 2)]:
            res = minimize(objective, start, method="Nelder-Mead",
                           options={"xatol": 1e-9, "fatol": 1e-12,
                                    "maxiter": 4000})
            if res.fun < best:
                best = float(res.fun)
                best_params = np.asarray(res.x)
            converged = converged and bool(res.success)
        e_r += p * best
        coolers.append((label, tuple(float(v) for v in best_params)))

    e_b_max = None
    labels = sorted(measurement.labels)
    if labels == [-1.0, 1.0]:
        try:
            e_b_max, _ = best_teleportable_energy(model, measurement)
        except ValueError:
            e_b_max = None
    if e_r > e_a + 1e-12:
        raise InvariantViolation(
            f"cooling search ended above the input energy: {e_r!r} > {e_a!r}"
        )
    if e_b_max is not None and e_b_max > e_r + 1e-9:
        raise InvariantViolation(
            f"teleportable energy {e_b_max!r} exceeds the residual {e_r!r}"
        )
    return ResidualEnergyResult(float(e_r), float(e_a), e_b_max,
                                search_space, tuple(coolers), converged)


@dataclass(frozen=True, eq=False)
class DistributionResult:
    e_a: float
    entries: tuple[tuple[int, float, float], ...]  # (site, theta, energy)
    total_extracted: float
    residual_total: float


def energy_distribution(model: ChainModel, site_a: int,
                        measurement: PovmMeasurement,
                        sites: tuple[int, ...],
                        thetas: tuple[float, ...] | str = "auto",
                        g_ops: tuple[LocalOperator, ...] | None = None
                        ) -> DistributionResult:
    """Simultaneous label-dependent extraction at several sites.

    Every extraction region must be disjoint from the others and from the
    measured site.  The per-site energies sum to the drop of the total,
    which can never exceed the input energy.
    """
    if measurement.site != site_a:
        raise ValueError("measurement must act at site_a")
    sites = tuple(sites)
    if len(set(sites)) != len(sites):
        raise ValueError("extraction sites must be distinct")
    for s in sites + (site_a,):
        if not 0 <= s < model.n_sites:
            raise ValueError(f"site {s} out of range for {model.n_sites} sites")
    for i, s in enumerate(sites):
        if model.separation(s, site_a) < 3:
            raise ValueError(f"site {s} overlaps the measured region")
        for t in sites[i + 1:]:
            if model.separation(s, t) < 3:
                raise ValueError(f"extraction regions at {s} and {t} overlap")
        if model.separation(s, site_a) < 5:
            warnings.warn(f"extraction site {s} is closer than 5 to the "
                          "measurement", stacklevel=2)
    if g_ops is None:
        g_ops = tuple(LocalOperator((s,), core.PAULI_Y) for s in sites)
    if len(g_ops) != len(sites):
        raise ValueError("need one generator per extraction site")
    for s, op in zip(sites, g_ops):
        if op.support != (s,) or not op.is_hermitian():
            raise ValueError(f"generator for site {s} must be Hermitian at {s}")

    if thetas == "auto":
        resolved = []
        d_a = measurement_bias_operator(measurement)
        if sorted(measurement.labels) != [-1.0, 1.0]:
            raise ValueError("automatic angles need labels -1 and +1")
        for s, op in zip(sites, g_ops):
            eta, xi = _eta_xi_general(model, d_a, op)
            resolved.append(optimal_angle(eta, xi)[0])
        thetas = tuple(resolved)
    else:
        thetas = tuple(float(t) for t in thetas)
        if len(thetas) != len(sites):
            raise ValueError("need one angle per extraction site")

    gs = model.ground
    g = gs.state.amplitudes
    n = model.n_sites
    e_a = 0.0
    site_energy = {s: 0.0 for s in sites}
    residual_total = 0.0
    for label, mop in measurement.operators:
        branch = apply_local(mop, g, n)
        e_a += np.vdot(branch, model.apply_hamiltonian(branch)).real
        w = branch
        for s, op, theta in zip(sites, g_ops, thetas):
            u = LocalOperator((s,), _bounded_unitary(op, label * theta))
            w = apply_local(u, w, n)
        residual_total += np.vdot(w, model.apply_hamiltonian(w)).real
        for s in sites:
            for m in model.region(s):
                site_energy[s] += model.term_expectation(m, w)
    entries = tuple((s, float(t), -site_energy[s])
                    for s, t in zip(sites, thetas))
    total = float(sum(e for _, _, e in entries))
    if abs((e_a - residual_total) - total) > 1e-10:
        raise InvariantViolation(
            f"per-site energies sum to {total!r} but the total dropped by "
            f"{e_a - residual_total!r}"
        )
    if total > e_a + 1e-10:
        raise InvariantViolation(
            f"extracted {total!r} exceeds the input energy {e_a!r}"
        )
    return DistributionResult(float(e_a), entries, total, float(residual_total))


def random_chain_model(n_sites: int, rng: np.random.Generator,
                       boundary: str = "periodic", n_channels: int = 1,
                       max_tries: int = 20) -> ChainModel:
    """Random nondegenerate qubit chain for property tests."""
    for _ in range(max_tries):
        x_ops = []
        for _ in range(n_sites):
            a, b, c = rng.uniform(-1.0, 1.0, size=3)
            x_ops.append(a * core.PAULI_Z + b * core.PAULI_X + c * core.PAULI_Y)
        channels = []
        for _ in range(n_channels):
            u = rng.standard_normal(3)
            u /= np.linalg.norm(u)
            y = u[0] * core.PAULI_X + u[1] * core.PAULI_Y + u[2] * core.PAULI_Z
            n_bonds = n_sites if boundary == "periodic" else n_sites - 1
            couplings = rng.uniform(0.3, 1.0, size=n_bonds) * rng.choice([-1.0, 1.0],
                                                                         size=n_bonds)
            channels.append(Channel(tuple(y for _ in range(n_sites)),
                                    tuple(couplings)))
        model = ChainModel(n_sites, boundary, tuple(x_ops), tuple(channels),
                           tuple(0.0 for _ in range(n_sites)))
        if not model.ground.degenerate:
            return normalize(model)
    raise RuntimeError("could not draw a nondegenerate random chain")


def load_chain_model(path) -> ChainModel:
    """Parse the plain-text chain definition format.

    Grammar (one ``key = value`` per line, ``#`` comments)::

        n_sites  = 8
        boundary = periodic            # open | periodic
        x        = -1*z                # on-site operator, all sites
        x[3]     = -1*z + 0.2*x        # optional per-site override
        bond     = x ; -1.0            # channel: site operator ; coupling
        bond     = y ; 0.1, 0.2, ...   # or one coupling per bond

    Operator expressions combine ``1``, ``x``, ``y``, ``z`` with real
    coefficients.
    """
    text = open(path, "r", encoding="utf-8").read()
    n_sites = None
    boundary = "open"
    x_default = None
    x_overrides: dict[int, np.ndarray] = {}
    bonds: list[tuple[int, np.ndarray, list[float] | float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "n_sites":
                n_sites = int(value)
            elif key == "boundary":
                boundary = value
            elif key == "x":
                x_default = core.parse_pauli_expression(value)
            elif key.startswith("x[") and key.endswith("]"):
                x_overrides[int(key[2:-1])] = core.parse_pauli_expression(value)
            elif key == "bond":
                parts = [p.strip() for p in value.split(";")]
                if len(parts) != 2:
                    raise ValueError("bond needs 'operator ; coupling'")
                y = core.parse_pauli_expression(parts[0])
                gs = [float(v) for v in parts[1].split(",")]
                bonds.append((lineno, y, gs[0] if len(gs) == 1 else gs))
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if n_sites is None:
        raise ValueError(f"{path}: missing n_sites")
    if x_default is None and not x_overrides:
        raise ValueError(f"{path}: missing on-site operator 'x'")
    if x_default is None:
        x_default = np.zeros((2, 2), dtype=complex)
    x_ops = tuple(x_overrides.get(s, x_default) for s in range(n_sites))
    n_bonds = n_sites if boundary == "periodic" else n_sites - 1
    channels = []
    for lineno, y, gs in bonds:
        if isinstance(gs, float):
            couplings = tuple(gs for _ in range(n_bonds))
        else:
            if len(gs) != n_bonds:
                raise ValueError(
                    f"{path}: line {lineno}: expected {n_bonds} couplings, "
                    f"got {len(gs)}"
                )
            couplings = tuple(gs)
        channels.append(Channel(tuple(y for _ in range(n_sites)), couplings))
    return ChainModel(n_sites, boundary, x_ops, tuple(channels),
                      tuple(0.0 for _ in range(n_sites)))

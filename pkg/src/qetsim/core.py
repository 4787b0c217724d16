"""Finite-dimensional qubit toolkit: states, operators, measurements, spectra.

Conventions
-----------
Site 0 is the most significant bit of the amplitude index, so a basis state
``|b_0 b_1 ... b_{N-1}>`` has index ``sum(b_s << (N-1-s))`` and operators on
ordered sites compose by plain ``numpy.kron``.  All tolerances follow a three
level scheme: 1e-12 for construction invariants, 1e-10 for algebraic
identities, 1e-9 for eigensolver residuals.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

ATOL_CONSTRUCT = 1e-12
ATOL_ALGEBRA = 1e-10
ATOL_RESIDUAL = 1e-9
GAP_DEGENERATE = 1e-8
PROB_FLOOR = 1e-14

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = {"1": PAULI_I, "x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


class InvariantViolation(RuntimeError):
    """A numerical identity that must hold by construction failed."""


class EigensolverError(RuntimeError):
    """Extremal eigensolver did not converge to the requested residual."""


def kron_all(*mats: np.ndarray) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def hermitize(matrix: np.ndarray, atol: float = ATOL_CONSTRUCT) -> np.ndarray:
    """Symmetrize a nominally Hermitian matrix, rejecting real asymmetry."""
    anti = matrix - matrix.conj().T
    if np.abs(anti).max() > atol:
        raise ValueError(
            f"matrix is not Hermitian within {atol:g} "
            f"(antisymmetric part {np.abs(anti).max():.3g})"
        )
    return 0.5 * (matrix + matrix.conj().T)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state of ``n_sites`` qubits, unit norm within 1e-12."""

    n_sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if self.n_sites < 1 or amp.shape != (2**self.n_sites,):
            raise ValueError(
                f"need 2**{self.n_sites} amplitudes, got shape {amp.shape}"
            )
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > ATOL_CONSTRUCT:
            raise ValueError(f"state norm {norm!r} deviates from 1 beyond 1e-12")
        amp = amp.copy()
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_amplitudes(cls, amplitudes: np.ndarray) -> "StateVector":
        amp = np.asarray(amplitudes, dtype=complex)
        n = int(round(math.log2(amp.size)))
        nrm = np.linalg.norm(amp)
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(n, amp / nrm)


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """Operator acting on an ordered tuple of sites, identity elsewhere."""

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        if len(set(support)) != len(support):
            raise ValueError(f"support {support} has repeated sites")
        mat = np.asarray(self.matrix)
        dim = 2 ** len(support)
        if mat.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {mat.shape} does not match support of {len(support)} sites"
            )
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", mat)

    @property
    def n_support(self) -> int:
        return len(self.support)

    def dagger(self) -> "LocalOperator":
        return LocalOperator(self.support, self.matrix.conj().T)

    def is_hermitian(self, atol: float = ATOL_ALGEBRA) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= atol)

    def is_unitary(self, atol: float = ATOL_ALGEBRA) -> bool:
        dim = self.matrix.shape[0]
        return bool(
            np.abs(self.matrix.conj().T @ self.matrix - np.eye(dim)).max() <= atol
        )

    def is_involution(self, atol: float = ATOL_ALGEBRA) -> bool:
        dim = self.matrix.shape[0]
        return bool(np.abs(self.matrix @ self.matrix - np.eye(dim)).max() <= atol)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, PSD, unit-trace operator on a labeled site subset."""

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        mat = np.asarray(self.matrix, dtype=complex)
        dim = 2 ** len(support)
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} mismatches support {support}")
        if np.abs(mat - mat.conj().T).max() > ATOL_CONSTRUCT:
            raise ValueError("density matrix is not Hermitian within 1e-12")
        if abs(np.trace(mat).real - 1.0) > ATOL_CONSTRUCT:
            raise ValueError(f"trace {np.trace(mat).real!r} deviates from 1")
        if np.linalg.eigvalsh(mat).min() < -1e-10:
            raise ValueError("density matrix has an eigenvalue below -1e-10")
        mat = 0.5 * (mat + mat.conj().T)
        mat.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityOperator":
        amp = state.amplitudes
        return cls(tuple(range(state.n_sites)), np.outer(amp, amp.conj()))


@dataclass(frozen=True, eq=False)
class PovmMeasurement:
    """Generalized measurement at one site: operators M(alpha), sum M^t M = I."""

    site: int
    operators: tuple[tuple[float, LocalOperator], ...]

    def __post_init__(self):
        ops = tuple((label, op) for label, op in self.operators)
        if not 1 <= len(ops) <= 8:
            raise ValueError("between 1 and 8 measurement outcomes are supported")
        total = np.zeros((2, 2), dtype=complex)
        for _, op in ops:
            if op.support != (self.site,):
                raise ValueError(
                    f"operator support {op.support} must be ({self.site},)"
                )
            total += op.matrix.conj().T @ op.matrix
        if np.abs(total - np.eye(2)).max() > ATOL_ALGEBRA:
            raise ValueError(
                "completeness violated: sum M^t M deviates from identity by "
                f"{np.abs(total - np.eye(2)).max():.3g}"
            )
        object.__setattr__(self, "operators", ops)

    @property
    def labels(self) -> tuple[float, ...]:
        return tuple(label for label, _ in self.operators)


def _axis_order(support: tuple[int, ...], n_total: int) -> list[int]:
    rest = [s for s in range(n_total) if s not in support]
    return list(support) + rest


def embed_local(op: LocalOperator, n_total: int) -> np.ndarray:
    """Full-space matrix acting as ``op`` on its support and identity elsewhere."""
    if any(s < 0 or s >= n_total for s in op.support):
        raise ValueError(f"support {op.support} out of range for {n_total} sites")
    k = op.n_support
    rest = n_total - k
    full = np.kron(op.matrix, np.eye(2**rest, dtype=op.matrix.dtype))
    if k == n_total and op.support == tuple(range(n_total)):
        return full
    order = _axis_order(op.support, n_total)
    inv = np.argsort(order)
    tens = full.reshape((2,) * (2 * n_total))
    perm = list(inv) + [n_total + i for i in inv]
    return tens.transpose(perm).reshape(2**n_total, 2**n_total)


def apply_local(op: LocalOperator, amplitudes: np.ndarray, n_total: int) -> np.ndarray:
    """Apply a local operator to a full-space amplitude vector, matrix free."""
    if any(s < 0 or s >= n_total for s in op.support):
        raise ValueError(f"support {op.support} out of range for {n_total} sites")
    k = op.n_support
    psi = np.asarray(amplitudes).reshape((2,) * n_total)
    gate = op.matrix.reshape((2,) * (2 * k))
    out = np.tensordot(gate, psi, axes=(list(range(k, 2 * k)), list(op.support)))
    order = _axis_order(op.support, n_total)
    return out.transpose(np.argsort(order)).reshape(-1)


def expectation_local(op: LocalOperator, state: StateVector) -> complex:
    return np.vdot(state.amplitudes, apply_local(op, state.amplitudes, state.n_sites))


@dataclass(frozen=True, eq=False)
class GroundState:
    """Lowest eigenpair with spectral-gap degeneracy flag."""

    energy: float
    state: StateVector
    gap: float
    degenerate: bool


def _check_hermitian_probe(H, dim: int) -> None:
    rng = np.random.default_rng(711)
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    y = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    lhs = np.vdot(x, H @ y)
    rhs = np.vdot(H @ x, y)
    scale = max(1.0, abs(lhs), abs(rhs))
    if abs(lhs - rhs) > 1e-8 * scale:
        raise ValueError("operator fails the Hermiticity probe <x|Hy> = <Hx|y>")


def ground_state(H) -> GroundState:
    """Lowest eigenvalue and eigenvector of a Hermitian operator.

    Dense Hermitian eigendecomposition for dimensions up to 4096 (12 sites);
    a Krylov extremal eigensolver with matrix-free application beyond that.
    Accepts a dense ndarray or a ``scipy.sparse.linalg.LinearOperator``.
    """
    if isinstance(H, np.ndarray):
        dim = H.shape[0]
        if np.abs(H - H.conj().T).max() > ATOL_ALGEBRA:
            raise ValueError("Hamiltonian is not Hermitian within 1e-10")
        if dim <= 4096:
            if dim >= 512:
                vals, vecs = sla.eigh(H, subset_by_index=(0, 1))
            else:
                vals, vecs = np.linalg.eigh(H)
            energy = float(vals[0])
            vec = vecs[:, 0].astype(complex)
            gap = float(vals[1] - vals[0]) if dim > 1 else math.inf
        else:
            return _ground_state_krylov(H, dim)
    else:
        dim = H.shape[0]
        _check_hermitian_probe(H, dim)
        return _ground_state_krylov(H, dim)
    residual = np.linalg.norm(H @ vec - energy * vec)
    if residual > ATOL_RESIDUAL:
        raise EigensolverError(f"dense eigensolver residual {residual:.3g} > 1e-9")
    n = int(round(math.log2(dim)))
    return GroundState(energy, StateVector(n, vec / np.linalg.norm(vec)),
                       gap, gap < GAP_DEGENERATE)


def _ground_state_krylov(H, dim: int) -> GroundState:
    try:
        vals, vecs = spla.eigsh(H, k=2, which="SA", tol=1e-12, maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvalues.size:
            vec = exc.eigenvectors[:, 0]
            res = np.linalg.norm(H @ vec - exc.eigenvalues[0] * vec)
            raise EigensolverError(
                f"Krylov eigensolver did not converge (residual {res:.3g})"
            ) from exc
        raise EigensolverError("Krylov eigensolver did not converge") from exc
    order = np.argsort(vals)
    energy = float(vals[order[0]])
    vec = vecs[:, order[0]].astype(complex)
    gap = float(vals[order[1]] - vals[order[0]])
    residual = np.linalg.norm(H @ vec - energy * vec)
    if residual > ATOL_RESIDUAL:
        raise EigensolverError(f"Krylov eigensolver residual {residual:.3g} > 1e-9")
    n = int(round(math.log2(dim)))
    return GroundState(energy, StateVector(n, vec / np.linalg.norm(vec)),
                       gap, gap < GAP_DEGENERATE)


def expectation(state, op: np.ndarray):
    """``<psi|O|psi>`` or ``Tr[rho O]``; tiny imaginary parts are truncated."""
    op = np.asarray(op)
    if isinstance(state, StateVector):
        if op.shape[0] != state.amplitudes.size:
            raise ValueError("operator dimension does not match the state")
        val = np.vdot(state.amplitudes, op @ state.amplitudes)
    elif isinstance(state, DensityOperator):
        if op.shape[0] != state.matrix.shape[0]:
            raise ValueError("operator dimension does not match the state")
        val = np.trace(state.matrix @ op)
    else:
        raise TypeError(f"expected StateVector or DensityOperator, got {type(state)}")
    if abs(val.imag) < ATOL_ALGEBRA:
        return float(val.real)
    return complex(val)


def reduced_density(state: StateVector, keep: tuple[int, ...]) -> DensityOperator:
    """Partial trace of a pure state down to the ``keep`` sites."""
    keep = tuple(keep)
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(s < 0 or s >= state.n_sites for s in keep):
        raise ValueError(f"keep sites {keep} out of range")
    rest = [s for s in range(state.n_sites) if s not in keep]
    psi = state.amplitudes.reshape((2,) * state.n_sites)
    psi = psi.transpose(list(keep) + rest).reshape(2 ** len(keep), -1)
    rho = psi @ psi.conj().T
    return DensityOperator(keep, rho)


def partial_trace(rho: DensityOperator, keep: tuple[int, ...]) -> DensityOperator:
    """Reduced density operator on ``keep``, a subset of ``rho.support``."""
    keep = tuple(keep)
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(s not in rho.support for s in keep):
        raise ValueError(f"keep {keep} is not a subset of support {rho.support}")
    n = len(rho.support)
    pos = {site: i for i, site in enumerate(rho.support)}
    keep_ax = [pos[s] for s in keep]
    rest_ax = [i for i in range(n) if i not in keep_ax]
    tens = rho.matrix.reshape((2,) * (2 * n))
    perm = keep_ax + rest_ax + [n + i for i in keep_ax] + [n + i for i in rest_ax]
    tens = tens.transpose(perm)
    dk, dr = 2 ** len(keep_ax), 2 ** len(rest_ax)
    tens = tens.reshape(dk, dr, dk, dr)
    out = np.einsum("arbr->ab", tens)
    return DensityOperator(keep, out)


def von_neumann_entropy(rho: DensityOperator) -> float:
    """Entropy -Tr[rho ln rho] in nats; eigenvalues below 1e-14 contribute 0."""
    vals = np.linalg.eigvalsh(rho.matrix)
    vals = vals[vals > 1e-14]
    return float(-np.sum(vals * np.log(vals)))


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    label: float
    probability: float
    state: StateVector


@dataclass(frozen=True, eq=False)
class MeasurementResult:
    outcomes: tuple[MeasurementOutcome, ...]
    dropped: tuple[float, ...]


def apply_measurement(state: StateVector, m: PovmMeasurement) -> MeasurementResult:
    """All outcomes (label, probability, normalized post state) of a POVM.

    Outcomes with probability below 1e-14 are omitted and reported in
    ``dropped``.  Probabilities sum to one within 1e-10.
    """
    outcomes = []
    dropped = []
    total = 0.0
    for label, op in m.operators:
        branch = apply_local(op, state.amplitudes, state.n_sites)
        p = float(np.vdot(branch, branch).real)
        total += p
        if p < PROB_FLOOR:
            dropped.append(label)
            continue
        outcomes.append(
            MeasurementOutcome(label, p, StateVector(state.n_sites, branch / math.sqrt(p)))
        )
    if abs(total - 1.0) > ATOL_ALGEBRA:
        raise InvariantViolation(f"outcome probabilities sum to {total!r}, not 1")
    return MeasurementResult(tuple(outcomes), tuple(dropped))


def time_evolve(state: StateVector, H: np.ndarray, t: float) -> StateVector:
    """``exp(-i t H)|psi>`` by full spectral decomposition (up to 12 sites)."""
    H = np.asarray(H)
    if H.shape[0] > 4096:
        raise ValueError("dense spectral evolution is limited to 12 sites")
    if np.abs(H - H.conj().T).max() > ATOL_ALGEBRA:
        raise ValueError("Hamiltonian is not Hermitian within 1e-10")
    vals, vecs = np.linalg.eigh(H)
    phases = np.exp(-1j * vals * t)
    out = vecs @ (phases * (vecs.conj().T @ state.amplitudes))
    norm = np.linalg.norm(out)
    if abs(norm - 1.0) > ATOL_ALGEBRA:
        raise InvariantViolation(f"evolution changed the norm to {norm!r}")
    return StateVector(state.n_sites, out / norm)


def pauli_component(u, site: int) -> LocalOperator:
    """The spin component u . sigma at ``site`` for a unit 3-vector u."""
    u = np.asarray(u, dtype=float)
    if u.shape != (3,):
        raise ValueError("direction must be a 3-vector")
    if abs(np.linalg.norm(u) - 1.0) > ATOL_CONSTRUCT:
        raise ValueError(f"direction norm {np.linalg.norm(u)!r} deviates from 1")
    mat = u[0] * PAULI_X + u[1] * PAULI_Y + u[2] * PAULI_Z
    return LocalOperator((site,), hermitize(mat))


def projective_pauli_measurement(u, site: int) -> PovmMeasurement:
    """Projective measurement of u . sigma at ``site`` with outcomes +1/-1."""
    comp = pauli_component(u, site)
    ops = []
    for alpha in (1.0, -1.0):
        proj = 0.5 * (np.eye(2) + alpha * comp.matrix)
        ops.append((alpha, LocalOperator((site,), proj)))
    return PovmMeasurement(site, tuple(ops))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_state(n_sites: int, rng: np.random.Generator) -> StateVector:
    v = rng.standard_normal(2**n_sites) + 1j * rng.standard_normal(2**n_sites)
    return StateVector(n_sites, v / np.linalg.norm(v))


_PAULI_TERM = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+)?)\s*\*?\s*(1|id|x|y|z)\s*$"
)


def parse_pauli_expression(text: str) -> np.ndarray:
    """Parse ``"a*z + b*x"`` style expressions into a 2x2 matrix.

    Symbols: ``1`` (or ``id``), ``x``, ``y``, ``z``.  Coefficients are real.
    """
    expr = text.strip()
    if not expr:
        raise ValueError("empty operator expression")
    chunks = re.split(r"(?=[+-])", expr.replace(" ", ""))
    mat = np.zeros((2, 2), dtype=complex)
    seen = False
    for chunk in chunks:
        if not chunk:
            continue
        match = _PAULI_TERM.match(chunk)
        if match is None:
            raise ValueError(f"cannot parse operator term {chunk!r} in {text!r}")
        coef_text, sym = match.groups()
        if coef_text in ("", "+"):
            coef = 1.0
        elif coef_text == "-":
            coef = -1.0
        else:
            coef = float(coef_text)
        mat += coef * PAULIS["1" if sym == "id" else sym]
        seen = True
    if not seen:
        raise ValueError(f"no terms found in operator expression {text!r}")
    return mat

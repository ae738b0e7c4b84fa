"""Exact finite-dimensional quantum mechanics for desk-scale Bell tests.

Dense states, observables and channels over small composite Hilbert spaces
(product dimension capped at 64), plus the specific constructions the rest
of the package needs: the Bell singlet, phase observables with +/-1 outcomes,
the Bell-state projector that heralds entanglement swapping, broadcast
(cloning) Kraus operators, and an auxiliary-level detector model in which
outcome rates may depend on the local choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_DIM = 64            # largest composite dimension accepted anywhere
CONSTRUCT_ATOL = 1e-12  # construction-time invariant tolerance
CHECK_ATOL = 1e-10      # tolerance for derived checks (completeness, positivity)

OBSERVABLE = "hermitian_observable"
UNITARY = "unitary"
KRAUS = "kraus"
PROJECTOR = "projector"
_KINDS = (OBSERVABLE, UNITARY, KRAUS, PROJECTOR)


class DegeneratePovmError(ValueError):
    """All POVM outcomes have numerically zero probability on the given state."""


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"subsystem dims must be positive, got {dims}")
    total = math.prod(dims)
    if total > MAX_DIM:
        raise ValueError(f"composite dimension {total} exceeds the configured maximum {MAX_DIM}")
    return dims


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QState:
    """Pure state |psi> on a composite system with subsystem dimensions ``dims``."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]
    basis_labels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        if amps.size != math.prod(dims):
            raise ValueError(f"amplitude length {amps.size} != product(dims) {math.prod(dims)}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > CONSTRUCT_ATOL:
            raise ValueError(f"state norm {norm!r} differs from 1 beyond {CONSTRUCT_ATOL}")
        if self.basis_labels is not None:
            labels = tuple(tuple(str(s) for s in sub) for sub in self.basis_labels)
            if tuple(len(sub) for sub in labels) != dims:
                raise ValueError("basis_labels shape does not match dims")
            object.__setattr__(self, "basis_labels", labels)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)

    def amplitude(self, indices: Sequence[int]) -> complex:
        """Amplitude of the basis element with per-subsystem ``indices``."""
        if len(indices) != len(self.dims):
            raise ValueError(f"expected {len(self.dims)} basis indices, got {len(indices)}")
        flat = 0
        for d, k in zip(self.dims, indices):
            if not 0 <= k < d:
                raise ValueError(f"basis index {k} out of range for dim {d}")
            flat = flat * d + k
        return complex(self.amplitudes[flat])


@dataclass(frozen=True)
class DensityMatrix:
    """Positive, Hermitian, trace-one state matrix on subsystem dims ``dims``."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = _check_dims(self.dims)
        total = math.prod(dims)
        mat = _frozen(np.asarray(self.matrix))
        if mat.shape != (total, total):
            raise ValueError(f"matrix shape {mat.shape} != ({total}, {total})")
        if np.max(np.abs(mat - mat.conj().T)) > CONSTRUCT_ATOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > CONSTRUCT_ATOL:
            raise ValueError(f"density matrix trace {tr!r} differs from 1")
        if float(np.min(np.linalg.eigvalsh(mat))) < -1e-10:
            raise ValueError("density matrix has an eigenvalue below -1e-10")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)


@dataclass(frozen=True)
class QOperator:
    """Operator with a declared kind; rectangular matrices are allowed for kind=kraus.

    ``dims`` are the output-space subsystem dimensions; ``dims_in`` defaults to
    ``dims`` and only differs for broadcast-style Kraus operators.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    kind: str
    dims_in: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        dims = _check_dims(self.dims)
        dims_in = dims if self.dims_in is None else _check_dims(self.dims_in)
        mat = _frozen(np.asarray(self.matrix))
        shape = (math.prod(dims), math.prod(dims_in))
        if mat.shape != shape:
            raise ValueError(f"matrix shape {mat.shape} != {shape}")
        if dims_in != dims and self.kind != KRAUS:
            raise ValueError(f"kind {self.kind!r} requires a square operator")
        if self.kind == OBSERVABLE:
            if np.max(np.abs(mat - mat.conj().T)) > CONSTRUCT_ATOL:
                raise ValueError("observable is not Hermitian within tolerance")
        elif self.kind == UNITARY:
            if np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0]))) > CONSTRUCT_ATOL:
                raise ValueError("operator is not unitary within tolerance")
        elif self.kind == PROJECTOR:
            if np.max(np.abs(mat @ mat - mat)) > CONSTRUCT_ATOL or np.max(np.abs(mat - mat.conj().T)) > CONSTRUCT_ATOL:
                raise ValueError("operator is not an orthogonal projector within tolerance")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "dims_in", dims_in)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)


@dataclass(frozen=True)
class Povm:
    """Complete set of (outcome_label, Kraus operator) pairs on one input space."""

    elements: tuple[tuple[object, QOperator], ...]

    def __post_init__(self):
        elements = tuple((label, op) for label, op in self.elements)
        if not elements:
            raise ValueError("POVM needs at least one element")
        dims_in = elements[0][1].dims_in
        total = math.prod(dims_in)
        acc = np.zeros((total, total), dtype=complex)
        for label, op in elements:
            if op.kind != KRAUS:
                raise ValueError(f"POVM element {label!r} must have kind={KRAUS!r}")
            if op.dims_in != dims_in:
                raise ValueError("POVM elements act on different input spaces")
            acc += op.matrix.conj().T @ op.matrix
        if np.max(np.abs(acc - np.eye(total))) > CHECK_ATOL:
            raise ValueError("POVM is not complete: sum K^dag K != identity")
        object.__setattr__(self, "elements", elements)

    @property
    def dims_in(self) -> tuple[int, ...]:
        return self.elements[0][1].dims_in

    def labels(self) -> tuple[object, ...]:
        return tuple(label for label, _ in self.elements)


# ---------------------------------------------------------------------------
# constructions


def basis_state(dims: Sequence[int], indices: Sequence[int], basis_labels=None) -> QState:
    """Computational basis ket |indices> on the given subsystem dims."""
    dims = tuple(dims)
    amps = np.zeros(math.prod(dims), dtype=complex)
    flat = 0
    for d, k in zip(dims, indices):
        flat = flat * d + int(k)
    amps[flat] = 1.0
    return QState(amps, dims, basis_labels)


def identity(dims: Sequence[int]) -> QOperator:
    """Identity operator (kind=unitary) on the given dims."""
    dims = tuple(dims)
    return QOperator(np.eye(math.prod(dims)), dims, UNITARY)


def tensor(a, b):
    """Kronecker product of two QStates or two QOperators of the same kind."""
    if isinstance(a, QState) and isinstance(b, QState):
        labels = None
        if a.basis_labels is not None and b.basis_labels is not None:
            labels = a.basis_labels + b.basis_labels
        return QState(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims, labels)
    if isinstance(a, QOperator) and isinstance(b, QOperator):
        if a.kind != b.kind:
            raise ValueError(f"tensor of mixed operator kinds {a.kind!r} and {b.kind!r}")
        return QOperator(np.kron(a.matrix, b.matrix), a.dims + b.dims, a.kind,
                         dims_in=a.dims_in + b.dims_in)
    raise TypeError("tensor expects two QStates or two QOperators")


PLUS_MINUS = ("+", "-")  # basis order: |+> is index 0, |-> is index 1


def bell_singlet() -> QState:
    """Two-qubit singlet (|+-> - |-+>)/sqrt(2) in the (++, +-, -+, --) basis."""
    amps = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / math.sqrt(2.0)
    return QState(amps, (2, 2), (PLUS_MINUS, PLUS_MINUS))


def phase_observable(phi: float) -> QOperator:
    """Two-level observable exp(i*phi)|+><-| + exp(-i*phi)|-><+| with outcomes +/-1."""
    if not math.isfinite(phi):
        raise ValueError("phase angle must be finite")
    e = complex(math.cos(phi), math.sin(phi))
    mat = np.array([[0.0, e], [e.conjugate(), 0.0]], dtype=complex)
    return QOperator(mat, (2,), OBSERVABLE)


def phase_eigenvector(phi: float, outcome: int) -> np.ndarray:
    """Eigenvector of phase_observable(phi) for outcome +1 or -1."""
    if outcome not in (1, -1):
        raise ValueError("outcome must be +1 or -1")
    e = complex(math.cos(phi), -math.sin(phi))
    return np.array([1.0, outcome * e], dtype=complex) / math.sqrt(2.0)


def phase_measurement(phi: float) -> Povm:
    """Projective POVM of phase_observable(phi); outcome labels +1 then -1."""
    elements = []
    for outcome in (1, -1):
        v = phase_eigenvector(phi, outcome)
        elements.append((outcome, QOperator(np.outer(v, v.conj()), (2,), KRAUS)))
    return Povm(tuple(elements))


def measurement_basis_unitary(phi: float) -> QOperator:
    """Unitary mapping the +/-1 eigenvectors of phase_observable(phi) to |+>, |->."""
    rows = [phase_eigenvector(phi, 1).conj(), phase_eigenvector(phi, -1).conj()]
    return QOperator(np.array(rows), (2,), UNITARY)


def singlet_correlator(phi_i: float, phi_j: float) -> float:
    """Closed-form two-party correlator -cos(phi_i - phi_j) of the singlet."""
    return -math.cos(phi_i - phi_j)


def swap_projector() -> QOperator:
    """Rank-1 projector onto the traveling-mode Bell state; outcome 1 heralds a pair."""
    phi = bell_singlet().amplitudes
    return QOperator(np.outer(phi, phi.conj()), (2, 2), PROJECTOR)


def broadcast_kraus(x: int, m: int, dim: int) -> QOperator:
    """Kraus operator |x,x,...,x><x| copying a readout into m registers."""
    if m < 1:
        raise ValueError("copy count m must be >= 1")
    if not 0 <= x < dim:
        raise ValueError(f"outcome {x} out of range for dim {dim}")
    out_total = dim ** m
    if out_total > MAX_DIM:
        raise ValueError(f"broadcast output dimension {out_total} exceeds the configured maximum {MAX_DIM}")
    mat = np.zeros((out_total, dim), dtype=complex)
    row = x * (out_total - 1) // (dim - 1) if dim > 1 else 0  # index of |x,x,...,x>
    mat[row, x] = 1.0
    return QOperator(mat, (dim,) * m, KRAUS, dims_in=(dim,))


def broadcast_povm(m: int, dim: int) -> Povm:
    """The complete broadcast POVM {K_x} for all outcomes of a dim-level readout."""
    return Povm(tuple((x, broadcast_kraus(x, m, dim)) for x in range(dim)))


# ---------------------------------------------------------------------------
# composite-space plumbing


def embed_operator(op: QOperator, sites: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Matrix of ``op`` acting on ``sites`` of a composite space, identity elsewhere."""
    dims = tuple(dims)
    sites = tuple(int(s) for s in sites)
    if op.dims_in != op.dims:
        raise ValueError("only square operators can be embedded")
    if tuple(dims[s] for s in sites) != op.dims:
        raise ValueError(f"operator dims {op.dims} do not match sites {sites} of {dims}")
    if len(set(sites)) != len(sites):
        raise ValueError("sites must be distinct")
    n = len(dims)
    rest = [i for i in range(n) if i not in sites]
    perm = list(sites) + rest
    rest_dim = math.prod(dims[i] for i in rest) if rest else 1
    full = np.kron(op.matrix, np.eye(rest_dim))
    inv = np.argsort(perm)
    axes = [dims[p] for p in perm]
    tens = full.reshape(axes + axes)
    tens = tens.transpose(list(inv) + [n + i for i in inv])
    total = math.prod(dims)
    return tens.reshape(total, total)


def expectation(obs: Sequence[tuple[QOperator, Sequence[int]]], rho: DensityMatrix) -> float:
    """Quantum expectation Tr(A B ... Z rho) of operators on disjoint subsystems.

    ``obs`` is a sequence of (operator, subsystem indices) pairs; overlapping
    subsystems are rejected since the product would not be setting-independent.
    """
    seen: set[int] = set()
    full = np.eye(rho.dim, dtype=complex)
    for op, sites in obs:
        sites = tuple(int(s) for s in sites)
        if seen & set(sites):
            raise ValueError(f"operators overlap on subsystems {sorted(seen & set(sites))}")
        seen |= set(sites)
        full = full @ embed_operator(op, sites, rho.dims)
    value = complex(np.trace(full @ rho.matrix))
    if abs(value.imag) > CHECK_ATOL:
        raise ValueError(f"expectation has imaginary residue {value.imag!r}")
    return value.real


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the ``keep`` subsystems (in their original order)."""
    keep = tuple(int(k) for k in keep)
    n = len(rho.dims)
    traced = [i for i in range(n) if i not in keep]
    tens = rho.matrix.reshape(rho.dims + rho.dims)
    for i in sorted(traced, reverse=True):
        tens = np.trace(tens, axis1=i, axis2=i + tens.ndim // 2)
    kept_dims = tuple(rho.dims[k] for k in keep)
    total = math.prod(kept_dims) if kept_dims else 1
    return DensityMatrix(tens.reshape(total, total), kept_dims)


def born_probabilities(rho: DensityMatrix, povm: Povm) -> np.ndarray:
    """Outcome probabilities Tr(K rho K^dag) in declared POVM order."""
    if povm.dims_in != rho.dims:
        raise ValueError(f"POVM input dims {povm.dims_in} do not match state dims {rho.dims}")
    probs = []
    for _, op in povm.elements:
        post = op.matrix @ rho.matrix @ op.matrix.conj().T
        probs.append(max(float(np.trace(post).real), 0.0))
    return np.asarray(probs)


def sample_index(probs: np.ndarray, rand: float) -> int:
    """Inverse-CDF outcome index in declared order; ties fall to the first live index."""
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, rand, side="right"))
    if idx >= len(probs):  # float dust at the top of the CDF
        live = np.nonzero(probs > 1e-14)[0]
        idx = int(live[-1])
    return idx


def born_sample(rho: DensityMatrix, povm: Povm, rand: float) -> tuple[object, DensityMatrix]:
    """Draw one outcome by the Born rule and return (label, renormalized post-state).

    ``rand`` is a uniform variate in [0, 1); the draw is deterministic given it.
    """
    if not 0.0 <= rand < 1.0:
        raise ValueError("rand must lie in [0, 1)")
    probs = born_probabilities(rho, povm)
    if np.all(probs < 1e-14):
        raise DegeneratePovmError("every POVM outcome has probability < 1e-14")
    idx = sample_index(probs, rand)
    label, op = povm.elements[idx]
    post = op.matrix @ rho.matrix @ op.matrix.conj().T
    post = post / np.trace(post).real
    return label, DensityMatrix(post, op.dims)


# ---------------------------------------------------------------------------
# auxiliary-level detector anomaly model (choice-dependent detection)


@dataclass(frozen=True)
class AnomalySetup:
    """Local model with n_aux auxiliary levels per party.

    A choice j rotates the measurement basis by phases[j] and, when j < n_aux,
    swaps auxiliary levels 0 and j (otherwise the aux rotation is the identity,
    the paper's "null operation" variant). The detector then fires with
    probability aux_efficiency[k] for aux level k (default 1.0), and outcome 1
    means "detector fired on +"; a miss or a "-" both count as outcome 0.
    """

    n_aux: int
    phases: Mapping[int, float]
    aux_efficiency: Mapping[int, float]

    def __post_init__(self):
        if self.n_aux < 1:
            raise ValueError("n_aux must be >= 1")
        if 2 * self.n_aux > MAX_DIM:
            raise ValueError("auxiliary dimension too large")
        phases = dict(self.phases)
        for j, phi in phases.items():
            if not math.isfinite(phi):
                raise ValueError(f"phase for choice {j} is not finite")
        eff = {int(k): float(v) for k, v in self.aux_efficiency.items()}
        for k, v in eff.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"aux efficiency for level {k} must lie in [0, 1]")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "aux_efficiency", eff)

    def efficiency(self, level: int) -> float:
        return self.aux_efficiency.get(level, 1.0)

    def aux_target(self, choice: int) -> int:
        return choice if 0 <= choice < self.n_aux else 0


def _aux_swap(n: int, target: int) -> np.ndarray:
    mat = np.eye(n, dtype=complex)
    if target != 0:
        mat[0, 0] = mat[target, target] = 0.0
        mat[0, target] = mat[target, 0] = 1.0
    return mat


def _anomaly_local_unitary(setup: AnomalySetup, choice: int) -> np.ndarray:
    if choice not in setup.phases:
        raise ValueError(f"choice {choice} has no phase in the anomaly setup")
    u_pm = measurement_basis_unitary(setup.phases[choice]).matrix
    return np.kron(u_pm, _aux_swap(setup.n_aux, setup.aux_target(choice)))


def _anomaly_amplitudes(setup: AnomalySetup, choice_a: int, choice_b: int | None) -> np.ndarray:
    """Post-rotation amplitudes on (pm_a, aux_a, pm_b, aux_b); B untouched if choice_b is None."""
    n = setup.n_aux
    psi = np.zeros((2, n, 2, n), dtype=complex)
    psi[0, 0, 1, 0] = 1.0 / math.sqrt(2.0)   # |+0, -0>
    psi[1, 0, 0, 0] = -1.0 / math.sqrt(2.0)  # -|-0, +0>
    u_a = _anomaly_local_unitary(setup, choice_a)
    u_b = np.eye(2 * n) if choice_b is None else _anomaly_local_unitary(setup, choice_b)
    full = np.kron(u_a, u_b)
    return (full @ psi.reshape(-1)).reshape(2, n, 2, n)


def anomaly_outcome_prob(setup: AnomalySetup, choice: int, outcome: int) -> float:
    """Single-party probability of ``outcome`` in {0, 1} given the local choice."""
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    psi = _anomaly_amplitudes(setup, choice, None)
    weights = np.sum(np.abs(psi) ** 2, axis=(2, 3))  # p(pm_a, aux_a)
    p_one = sum(setup.efficiency(k) * float(weights[0, k]) for k in range(setup.n_aux))
    return p_one if outcome == 1 else 1.0 - p_one


def anomaly_joint_prob(setup: AnomalySetup, choice_a: int, choice_b: int,
                       outcome_a: int, outcome_b: int) -> float:
    """Two-party joint probability of outcomes in {0, 1} for the given choices."""
    for outcome in (outcome_a, outcome_b):
        if outcome not in (0, 1):
            raise ValueError("outcomes must be 0 or 1")
    psi = _anomaly_amplitudes(setup, choice_a, choice_b)
    weights = np.abs(psi) ** 2  # p(pm_a, aux_a, pm_b, aux_b)
    n = setup.n_aux
    total = 0.0
    for ka in range(n):
        fa = setup.efficiency(ka)
        for kb in range(n):
            fb = setup.efficiency(kb)
            # outcome 1 requires pm=+ (index 0) and a firing detector
            pa = {1: fa * weights[0, ka, :, :], 0: (1 - fa) * weights[0, ka, :, :] + weights[1, ka, :, :]}
            cell = pa[outcome_a]
            if outcome_b == 1:
                total += fb * float(cell[0, kb])
            else:
                total += (1 - fb) * float(cell[0, kb]) + float(cell[1, kb])
    return total

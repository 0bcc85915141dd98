"""
Dense linear algebra for states and channels on at most three qubits.

Conventions used throughout the package:

* Qubit 0 is the most significant tensor factor: a two-qubit basis state
  ``|b0 b1>`` has index ``2*b0 + b1``.
* Vectorization is column stacking: ``vec(M)[i + d*j] = M[i, j]``. With it,
  ``vec(A X B) = (B.T kron A) vec(X)``, the trace is ``vec(I) . vec(X)`` and a
  channel with Kraus operators ``K`` has superoperator ``sum(conj(K) kron K)``.
"""
import string
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from dcrb.exceptions import ParameterError

MAX_QUBITS = 3

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
TP_TOL = 1e-10
EQUALITY_TOL = 1e-12

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
# control on the first target, data on the second
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)

PAULIS = (I2, X, Y, Z)


def n_qubits_for_dim(dim: int) -> int:
    """Number of qubits for a power-of-two dimension"""
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise ParameterError(f"Dimension {dim} is not a power of two")
    return n


def is_unitary(matrix: np.ndarray, tol: float = TP_TOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.allclose(matrix.conj().T @ matrix, np.eye(matrix.shape[0]), atol=tol))


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization of a raw matrix"""
    return np.asarray(matrix, dtype=np.complex128).reshape(-1, order="F")


def unvec(vector: np.ndarray) -> np.ndarray:
    """Inverse of vec for a raw vector of length d**2"""
    vector = np.asarray(vector, dtype=np.complex128).reshape(-1)
    dim = int(round(np.sqrt(vector.size)))
    if dim * dim != vector.size:
        raise ParameterError(f"Vector of length {vector.size} is not a vectorized square matrix")
    return vector.reshape(dim, dim, order="F")


class DensityMatrix:
    """Validated, immutable density matrix on up to MAX_QUBITS qubits."""

    def __init__(self, elements: np.ndarray, validate: bool = True):
        arr = np.array(elements, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ParameterError(f"Density matrix must be square, got shape {arr.shape}")
        self._n_qubits = n_qubits_for_dim(arr.shape[0])
        if self._n_qubits > MAX_QUBITS:
            raise ParameterError(f"At most {MAX_QUBITS} qubits are supported, got {self._n_qubits}")
        if validate:
            _check_state(arr)
        arr.setflags(write=False)
        self._elements = arr

    @classmethod
    def from_statevector(cls, psi: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ParameterError("Zero state vector")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, bits: Union[str, Sequence[int]]) -> "DensityMatrix":
        """Computational basis projector, e.g. basis("01")"""
        bits = [int(b) for b in bits]
        index = int("".join(str(b) for b in bits), 2) if bits else 0
        dim = 2 ** len(bits)
        arr = np.zeros((dim, dim), dtype=np.complex128)
        arr[index, index] = 1.0
        return cls(arr)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    @property
    def elements(self) -> np.ndarray:
        return self._elements

    @property
    def dim(self) -> int:
        return self._elements.shape[0]

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    def purity(self) -> float:
        return float(np.real(np.trace(self._elements @ self._elements)))

    def fidelity_with_pure(self, psi: Sequence[complex]) -> float:
        psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return float(np.real(psi.conj() @ self._elements @ psi))

    def allclose(self, other: "DensityMatrix", atol: float = EQUALITY_TOL) -> bool:
        return self.dim == other.dim and bool(np.allclose(self._elements, other._elements, atol=atol))

    def __repr__(self) -> str:
        return f"<DensityMatrix(n_qubits={self._n_qubits})>"


def _check_state(arr: np.ndarray) -> None:
    if not np.allclose(arr, arr.conj().T, atol=HERMITIAN_TOL):
        raise ParameterError("Density matrix is not Hermitian")
    trace = np.trace(arr)
    if abs(trace - 1.0) > TRACE_TOL:
        raise ParameterError(f"Density matrix trace is {trace.real:.12g}, expected 1")
    min_eig = np.linalg.eigvalsh((arr + arr.conj().T) / 2).min()
    if min_eig < -PSD_TOL:
        raise ParameterError(f"Density matrix is not positive semidefinite (min eigenvalue {min_eig:.3g})")


def vectorize(rho: DensityMatrix) -> np.ndarray:
    """Column-stacked vector of length dim**2"""
    return vec(rho.elements)


def unvectorize(vector: np.ndarray) -> DensityMatrix:
    return DensityMatrix(unvec(vector))


class KrausChannel:
    """Completely positive trace-preserving map given by its Kraus operators."""

    def __init__(self, operators: Iterable[np.ndarray]):
        ops = tuple(np.array(op, dtype=np.complex128) for op in operators)
        if not ops:
            raise ParameterError("A Kraus channel needs at least one operator")
        dim = ops[0].shape[0]
        for op in ops:
            if op.shape != (dim, dim):
                raise ParameterError("Kraus operators must share one square shape")
            op.setflags(write=False)
        completeness = sum(op.conj().T @ op for op in ops)
        if not np.allclose(completeness, np.eye(dim), atol=TP_TOL):
            raise ParameterError("Kraus operators do not sum to the identity")
        self._operators = ops
        self._n_qubits = n_qubits_for_dim(dim)

    @classmethod
    def identity(cls, n_qubits: int = 1) -> "KrausChannel":
        return cls([np.eye(2**n_qubits, dtype=np.complex128)])

    @classmethod
    def from_unitary(cls, unitary: np.ndarray) -> "KrausChannel":
        return cls([unitary])

    @property
    def operators(self) -> Tuple[np.ndarray, ...]:
        return self._operators

    @property
    def dim(self) -> int:
        return self._operators[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Channel that applies self first and other second"""
        if other.dim != self.dim:
            raise ParameterError("Cannot compose channels of different dimension")
        return KrausChannel(b @ a for a in self._operators for b in other._operators)

    def to_superop(self) -> "Superoperator":
        return Superoperator.from_kraus(self)

    def __repr__(self) -> str:
        return f"<KrausChannel(n_qubits={self._n_qubits}, operators={len(self._operators)})>"


class Superoperator:
    """Column-stacked matrix of a linear map on dim x dim matrices."""

    def __init__(self, elements: np.ndarray):
        arr = np.array(elements, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ParameterError(f"Superoperator must be square, got shape {arr.shape}")
        dim = int(round(np.sqrt(arr.shape[0])))
        if dim * dim != arr.shape[0]:
            raise ParameterError(f"Superoperator size {arr.shape[0]} is not a square")
        arr.setflags(write=False)
        self._elements = arr
        self._dim = dim

    @classmethod
    def identity(cls, dim: int) -> "Superoperator":
        return cls(np.eye(dim * dim, dtype=np.complex128))

    @classmethod
    def from_unitary(cls, unitary: np.ndarray) -> "Superoperator":
        unitary = np.asarray(unitary, dtype=np.complex128)
        return cls(np.kron(unitary.conj(), unitary))

    @classmethod
    def from_kraus(cls, channel: Union[KrausChannel, Sequence[np.ndarray]]) -> "Superoperator":
        ops = channel.operators if isinstance(channel, KrausChannel) else channel
        return cls(sum(np.kron(np.conj(op), op) for op in ops))

    @property
    def elements(self) -> np.ndarray:
        return self._elements

    @property
    def dim(self) -> int:
        return self._dim

    def is_trace_preserving(self, tol: float = TP_TOL) -> bool:
        identity = vec(np.eye(self._dim))
        return bool(np.allclose(identity @ self._elements, identity, atol=tol))

    def compose(self, first: "Superoperator") -> "Superoperator":
        """self after first: the matrix product self @ first"""
        if first.dim != self._dim:
            raise ParameterError("Cannot compose superoperators of different dimension")
        return Superoperator(self._elements @ first._elements)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return self.compose(other)

    def power(self, exponent: int) -> "Superoperator":
        return Superoperator(np.linalg.matrix_power(self._elements, exponent))

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        if rho.dim != self._dim:
            raise ParameterError(f"State of dimension {rho.dim} does not match superoperator ({self._dim})")
        out = unvec(self._elements @ vectorize(rho))
        return DensityMatrix((out + out.conj().T) / 2)

    def allclose(self, other: "Superoperator", atol: float = EQUALITY_TOL) -> bool:
        return self._dim == other._dim and bool(np.allclose(self._elements, other._elements, atol=atol))

    def __repr__(self) -> str:
        return f"<Superoperator(dim={self._dim})>"


def _pauli_strings(n_qubits: int) -> Iterable[np.ndarray]:
    ops: list = [np.ones((1, 1), dtype=np.complex128)]
    for _ in range(n_qubits):
        ops = [np.kron(a, p) for a in ops for p in PAULIS]
    return ops


def _check_depolarizing_parameter(q: float, n_qubits: int) -> float:
    q = float(q)
    lower = 1.0 / (1.0 - 4**n_qubits)
    if not (lower - EQUALITY_TOL <= q <= 1.0 + EQUALITY_TOL):
        raise ParameterError(f"Depolarizing parameter {q} outside [{lower:.6g}, 1] for {n_qubits} qubit(s)")
    return q


def depolarizing_superop(q: float, n_qubits: int = 1) -> Superoperator:
    """D_q(X) = q X + (1 - q) Tr[X] I / 2**n"""
    q = _check_depolarizing_parameter(q, n_qubits)
    dim = 2**n_qubits
    identity = vec(np.eye(dim))
    return Superoperator(q * np.eye(dim * dim) + (1.0 - q) / dim * np.outer(identity, identity))


def depolarizing_kraus(q: float, n_qubits: int = 1) -> KrausChannel:
    """Pauli-mixture Kraus form of depolarizing_superop(q, n_qubits)"""
    q = _check_depolarizing_parameter(q, n_qubits)
    count = 4**n_qubits
    weights = np.full(count, (1.0 - q) / count)
    weights[0] += q
    weights = np.clip(weights, 0.0, None)
    return KrausChannel(np.sqrt(w) * p for w, p in zip(weights, _pauli_strings(n_qubits)) if w > 0)


def amplitude_damping_kraus(gamma: float) -> KrausChannel:
    gamma = float(gamma)
    if not (0.0 <= gamma <= 1.0):
        raise ParameterError(f"gamma must be in [0, 1], got {gamma}")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=np.complex128)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=np.complex128)
    return KrausChannel([k0, k1])


def phase_damping_kraus(coherence: float) -> KrausChannel:
    """Pure dephasing that multiplies off-diagonal elements by `coherence`"""
    coherence = float(coherence)
    if not (0.0 <= coherence <= 1.0):
        raise ParameterError(f"coherence factor must be in [0, 1], got {coherence}")
    return KrausChannel([
        np.sqrt((1 + coherence) / 2) * I2,
        np.sqrt((1 - coherence) / 2) * Z,
    ])


def embed_operator(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Full 2**n operator acting as `op` on `targets` (in that order) and identity elsewhere"""
    targets = list(targets)
    k = len(targets)
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (2**k, 2**k):
        raise ParameterError(f"Operator of shape {op.shape} does not act on {k} qubit(s)")
    if len(set(targets)) != k or any(t < 0 or t >= n_qubits for t in targets):
        raise ParameterError(f"Invalid targets {targets} for {n_qubits} qubit(s)")
    if targets == list(range(n_qubits)):
        return op.copy()
    rest = [q for q in range(n_qubits) if q not in targets]
    full = np.kron(op, np.eye(2 ** len(rest)))
    order = targets + rest
    inv = list(np.argsort(order))
    tensor = full.reshape([2] * (2 * n_qubits))
    tensor = tensor.transpose(inv + [n_qubits + p for p in inv])
    return tensor.reshape(2**n_qubits, 2**n_qubits)


def partial_trace_array(arr: np.ndarray, keep: Sequence[int], n_qubits: int) -> np.ndarray:
    """Partial trace of a raw (not necessarily normalized) matrix"""
    keep = sorted(set(keep))
    letters = string.ascii_letters
    rows = list(letters[:n_qubits])
    cols = list(letters[n_qubits:2 * n_qubits])
    for q in range(n_qubits):
        if q not in keep:
            cols[q] = rows[q]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    tensor = np.asarray(arr, dtype=np.complex128).reshape([2] * (2 * n_qubits))
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, tensor)
    dim = 2 ** len(keep)
    return reduced.reshape(dim, dim)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    if not keep:
        raise ParameterError("partial_trace needs at least one qubit to keep")
    if any(q < 0 or q >= rho.n_qubits for q in keep):
        raise ParameterError(f"Invalid qubit index in {keep} for {rho.n_qubits} qubit(s)")
    return DensityMatrix(partial_trace_array(rho.elements, keep, rho.n_qubits))


def apply_kraus(rho: DensityMatrix, ch: KrausChannel, targets: Sequence[int]) -> DensityMatrix:
    targets = list(targets)
    if len(targets) != ch.n_qubits:
        raise ParameterError(
            f"Channel acts on {ch.n_qubits} qubit(s) but {len(targets)} target(s) were given"
        )
    out = np.zeros_like(rho.elements)
    for op in ch.operators:
        full = embed_operator(op, targets, rho.n_qubits)
        out += full @ rho.elements @ full.conj().T
    return DensityMatrix((out + out.conj().T) / 2)


def superop_from_map(
    fn: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: Optional[int] = None
) -> np.ndarray:
    """Column-stacked matrix of a linear map, built from its action on matrix units"""
    dim_out = dim_in if dim_out is None else dim_out
    columns = []
    for index in range(dim_in * dim_in):
        unit = np.zeros(dim_in * dim_in, dtype=np.complex128)
        unit[index] = 1.0
        image = np.asarray(fn(unvec(unit)), dtype=np.complex128)
        if image.shape != (dim_out, dim_out):
            raise ParameterError(f"Map returned shape {image.shape}, expected ({dim_out}, {dim_out})")
        columns.append(vec(image))
    return np.stack(columns, axis=1)


def average_gate_error(channel: Union[Superoperator, KrausChannel]) -> float:
    """1 - average gate fidelity with respect to the identity"""
    superop = channel.to_superop() if isinstance(channel, KrausChannel) else channel
    dim = superop.dim
    process_fidelity = np.real(np.trace(superop.elements)) / dim**2
    return float(1.0 - (dim * process_fidelity + 1.0) / (dim + 1.0))


def superop_tensor(first: Superoperator, second: Superoperator) -> Superoperator:
    """Superoperator of first (x) second, first acting on the more significant factor"""
    da, db = first.dim, second.dim
    phi_a = first.elements.reshape(da, da, da, da, order="F")
    phi_b = second.elements.reshape(db, db, db, db, order="F")

    def act(matrix: np.ndarray) -> np.ndarray:
        blocks = matrix.reshape(da, db, da, db)
        out = np.einsum("ijkl,mnpq,kplq->imjn", phi_a, phi_b, blocks)
        return out.reshape(da * db, da * db)

    return Superoperator(superop_from_map(act, da * db))

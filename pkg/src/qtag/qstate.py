"""
State-vector core for the tagging simulator.

Registers hold between one and three qubits. Qubit 0 is the most significant
index of the amplitude vector (numpy ``kron`` ordering). Operations that act on
a register consume it and return its successor; touching a consumed register
raises QuantumStateError.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
MAX_QUBITS = 3

_SQRT2_INV = 1 / math.sqrt(2)


class QuantumStateError(ValueError):
    """Raised for invalid register operations"""
    pass


class PureRegister:
    """Normalized amplitude vector over 1-3 qubits"""

    __slots__ = ("_amplitudes", "_consumed")

    def __init__(self, amplitudes: Sequence[complex]):
        vec = np.array(amplitudes, dtype=complex).reshape(-1)
        size = vec.size
        num_qubits = size.bit_length() - 1
        if size < 2 or (1 << num_qubits) != size:
            raise QuantumStateError(f"Amplitude vector length must be a power of two >= 2, got {size}")
        if num_qubits > MAX_QUBITS:
            raise QuantumStateError(f"Registers hold at most {MAX_QUBITS} qubits, got {num_qubits}")
        if not np.all(np.isfinite(vec)):
            raise QuantumStateError("Amplitudes must be finite")

        norm = float(np.vdot(vec, vec).real)
        if abs(norm - 1.0) > TOLERANCE:
            raise QuantumStateError(f"Register is not normalized (sum |a|^2 = {norm:.12f})")

        vec.setflags(write=False)
        self._amplitudes = vec
        self._consumed = False

    @property
    def num_qubits(self) -> int:
        return self._amplitudes.size.bit_length() - 1

    @property
    def amplitudes(self) -> np.ndarray:
        """Read-only view of the amplitude vector"""
        return self._amplitudes

    @property
    def consumed(self) -> bool:
        return self._consumed

    def take(self) -> np.ndarray:
        """Consume the register and hand back its amplitudes."""
        if self._consumed:
            raise QuantumStateError("Register has already been consumed")
        self._consumed = True
        return self._amplitudes

    def to_text(self) -> str:
        """Debug dump as a list of (re, im) pairs."""
        pairs = ", ".join(f"({a.real!r}, {a.imag!r})" for a in self._amplitudes)
        return f"[{pairs}]"

    @classmethod
    def from_text(cls, text: str) -> "PureRegister":
        body = text.strip().lstrip("[").rstrip("]")
        values: List[complex] = []
        for chunk in body.split(")"):
            chunk = chunk.strip().lstrip(",").strip().lstrip("(")
            if not chunk:
                continue
            re_part, im_part = (float(v) for v in chunk.split(","))
            values.append(complex(re_part, im_part))
        return cls(values)

    def __repr__(self) -> str:
        state = "consumed" if self._consumed else "live"
        return f"PureRegister(num_qubits={self.num_qubits}, {state})"


class PauliCorrection(str, Enum):
    """Teleportation corrections"""
    I = "I"
    X = "X"
    Z = "Z"
    XZ = "XZ"

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self]


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI_MATRICES: Dict[PauliCorrection, np.ndarray] = {
    PauliCorrection.I: np.eye(2, dtype=complex),
    PauliCorrection.X: _X,
    PauliCorrection.Z: _Z,
    PauliCorrection.XZ: _X @ _Z,
}


class BellOutcome(Enum):
    """Bell-basis outcomes, valued by their two classical bits (phase, parity)"""
    PHI_PLUS = (0, 0)
    PSI_PLUS = (0, 1)
    PHI_MINUS = (1, 0)
    PSI_MINUS = (1, 1)

    @property
    def bits(self) -> Tuple[int, int]:
        return self.value


# Amplitude tensors [q_a, q_b] of the four Bell states.
_BELL_TENSORS: Dict[BellOutcome, np.ndarray] = {
    BellOutcome.PHI_PLUS: np.array([[1, 0], [0, 1]], dtype=complex) * _SQRT2_INV,
    BellOutcome.PSI_PLUS: np.array([[0, 1], [1, 0]], dtype=complex) * _SQRT2_INV,
    BellOutcome.PHI_MINUS: np.array([[1, 0], [0, -1]], dtype=complex) * _SQRT2_INV,
    BellOutcome.PSI_MINUS: np.array([[0, 1], [-1, 0]], dtype=complex) * _SQRT2_INV,
}

# Corrections for a singlet resource from make_singlet().
TELEPORT_CORRECTIONS: Dict[BellOutcome, PauliCorrection] = {
    BellOutcome.PSI_MINUS: PauliCorrection.I,
    BellOutcome.PSI_PLUS: PauliCorrection.Z,
    BellOutcome.PHI_MINUS: PauliCorrection.X,
    BellOutcome.PHI_PLUS: PauliCorrection.XZ,
}


class BasisAction(str, Enum):
    """Effect of conjugating a measurement basis by a Pauli"""
    PRESERVED_SAME = "preserved_same"
    PRESERVED_FLIPPED = "preserved_flipped"
    NOT_PRESERVED = "not_preserved"


def state_vector_from_bloch(axis: Sequence[float]) -> np.ndarray:
    """Amplitudes cos(theta/2)|0> + e^{i phi} sin(theta/2)|1> for a Bloch axis."""
    x, y, z = (float(v) for v in axis)
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x)
    return np.array(
        [math.cos(theta / 2), complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2)],
        dtype=complex,
    )


def bloch_vector_of(vec: np.ndarray) -> np.ndarray:
    """Bloch vector of a normalized single-qubit amplitude vector."""
    a, b = vec[0], vec[1]
    cross = np.conj(a) * b
    return np.array([2 * cross.real, 2 * cross.imag, abs(a) ** 2 - abs(b) ** 2])


@dataclass(frozen=True)
class MeasBasis:
    """Projective qubit basis; outcome 0 is the +axis eigenstate"""
    axis: Tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.axis) != 3 or not all(math.isfinite(v) for v in self.axis):
            raise QuantumStateError(f"Basis axis must be a finite 3-vector, got {self.axis}")
        norm = math.sqrt(sum(v * v for v in self.axis))
        if abs(norm - 1.0) > TOLERANCE:
            raise QuantumStateError(f"Basis axis must have unit norm, got {norm:.12f}")
        object.__setattr__(self, "axis", tuple(float(v) for v in self.axis))

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "MeasBasis":
        """Build a basis from any non-zero 3-vector by normalizing it."""
        arr = np.asarray(vector, dtype=float)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise QuantumStateError("Cannot build a basis from the zero vector")
        return cls(tuple(float(v) for v in arr / norm))

    @classmethod
    def from_state(cls, reg: PureRegister) -> "MeasBasis":
        """Basis whose outcome 0 projects onto the given single-qubit state."""
        if reg.num_qubits != 1:
            raise QuantumStateError("A basis can only be built from a single-qubit state")
        return cls.from_vector(bloch_vector_of(reg.amplitudes))

    def vectors(self) -> Tuple[np.ndarray, np.ndarray]:
        """Amplitude vectors (e0, e1) of the two basis states."""
        return (
            state_vector_from_bloch(self.axis),
            state_vector_from_bloch(tuple(-v for v in self.axis)),
        )

    def flipped(self) -> "MeasBasis":
        return MeasBasis(tuple(-v for v in self.axis))


B0 = MeasBasis((0.0, 0.0, 1.0))
B1 = MeasBasis((1.0, 0.0, 0.0))
B2 = MeasBasis((0.0, 1.0, 0.0))

_SIN_PI_3 = math.sin(math.pi / 3)
_COS_PI_3 = math.cos(math.pi / 3)
B0_PRIME = MeasBasis((0.0, 0.0, 1.0))
B1_PRIME = MeasBasis((_SIN_PI_3, 0.0, _COS_PI_3))
B2_PRIME = MeasBasis((0.0, _SIN_PI_3, _COS_PI_3))

PAULI_BASES: Tuple[MeasBasis, ...] = (B0, B1, B2)
PRIMED_BASES: Tuple[MeasBasis, ...] = (B0_PRIME, B1_PRIME, B2_PRIME)

# State lists as Bloch axes: both eigenstates of every listed basis.
PAULI_STATE_AXES: Tuple[Tuple[float, float, float], ...] = tuple(
    axis for basis in PAULI_BASES for axis in (basis.axis, basis.flipped().axis)
)
PRIMED_STATE_AXES: Tuple[Tuple[float, float, float], ...] = tuple(
    axis for basis in PRIMED_BASES for axis in (basis.axis, basis.flipped().axis)
)


def state_from_bloch(axis: Sequence[float]) -> PureRegister:
    return PureRegister(state_vector_from_bloch(axis))


def ket(label: str) -> PureRegister:
    """Named single-qubit states: 0, 1, +, -, +i, -i."""
    axes = {
        "0": (0.0, 0.0, 1.0),
        "1": (0.0, 0.0, -1.0),
        "+": (1.0, 0.0, 0.0),
        "-": (-1.0, 0.0, 0.0),
        "+i": (0.0, 1.0, 0.0),
        "-i": (0.0, -1.0, 0.0),
    }
    if label not in axes:
        raise QuantumStateError(f"Unknown state label: {label}")
    return state_from_bloch(axes[label])


def bloch_vector(reg: PureRegister) -> np.ndarray:
    if reg.num_qubits != 1:
        raise QuantumStateError("Bloch vectors are defined for single-qubit registers only")
    return bloch_vector_of(reg.amplitudes)


def sample_uniform_bloch(rng: np.random.Generator) -> PureRegister:
    """Haar-random pure qubit, i.e. uniform on the Bloch sphere."""
    draws = rng.standard_normal(4)
    vec = np.array([complex(draws[0], draws[1]), complex(draws[2], draws[3])])
    return PureRegister(vec / np.linalg.norm(vec))


def sample_uniform_axis(rng: np.random.Generator) -> Tuple[float, float, float]:
    draws = rng.standard_normal(3)
    draws = draws / np.linalg.norm(draws)
    return (float(draws[0]), float(draws[1]), float(draws[2]))


def canonical_hemisphere(axis: Sequence[float]) -> Tuple[float, float, float]:
    """Pick the representative of an antipodal pair with z >= 0 (ties: x, then y)."""
    x, y, z = (float(v) for v in axis)
    for component in (z, x, y):
        if component > 0:
            return (x, y, z)
        if component < 0:
            return (-x, -y, -z)
    return (x, y, z)


def sample_hemisphere_basis(rng: np.random.Generator) -> MeasBasis:
    return MeasBasis(canonical_hemisphere(sample_uniform_axis(rng)))


def make_singlet() -> PureRegister:
    """(|01> - |10>)/sqrt(2)"""
    return PureRegister([0.0, _SQRT2_INV, -_SQRT2_INV, 0.0])


def tensor(*registers: PureRegister) -> PureRegister:
    """Joint register of the inputs, which are consumed."""
    total = sum(reg.num_qubits for reg in registers)
    if total > MAX_QUBITS:
        raise QuantumStateError(f"Joint register would hold {total} qubits (max {MAX_QUBITS})")
    vec = np.ones(1, dtype=complex)
    for reg in registers:
        vec = np.kron(vec, reg.take())
    return PureRegister(vec)


def _check_index(reg: PureRegister, qubit_index: int) -> None:
    if not 0 <= qubit_index < reg.num_qubits:
        raise QuantumStateError(
            f"Qubit index {qubit_index} out of range for a {reg.num_qubits}-qubit register"
        )


def _successor(vec: np.ndarray) -> Optional[PureRegister]:
    """Normalize a projected amplitude tensor; None when no qubits remain."""
    flat = vec.reshape(-1)
    if flat.size == 1:
        return None
    return PureRegister(flat / np.linalg.norm(flat))


def outcome_probability(reg: PureRegister, basis: MeasBasis) -> float:
    """Born probability of outcome 0 for a single-qubit register (non-consuming)."""
    if reg.num_qubits != 1:
        raise QuantumStateError("outcome_probability expects a single-qubit register")
    e0, _ = basis.vectors()
    return float(min(1.0, abs(np.vdot(e0, reg.amplitudes)) ** 2))


def measure_qubit(
    reg: PureRegister,
    qubit_index: int,
    basis: MeasBasis,
    rng: np.random.Generator,
) -> Tuple[int, Optional[PureRegister]]:
    """
    Projectively measure one qubit and factor it out of the register.

    Args:
        reg: Register to measure (consumed)
        qubit_index: Qubit to measure
        basis: Measurement basis
        rng: Random source for the Born-rule draw

    Returns:
        (outcome, post-measurement register of the remaining qubits or None)

    Raises:
        QuantumStateError: If the index is out of range
    """
    _check_index(reg, qubit_index)
    n = reg.num_qubits
    state = reg.take().reshape([2] * n)
    e0, e1 = basis.vectors()

    projected0 = np.tensordot(np.conj(e0), state, axes=([0], [qubit_index]))
    p0 = min(1.0, max(0.0, float(np.vdot(projected0, projected0).real)))
    outcome = 0 if rng.random() < p0 else 1
    projected = projected0 if outcome == 0 else np.tensordot(np.conj(e1), state, axes=([0], [qubit_index]))
    return outcome, _successor(projected)


def bell_measure(
    reg: PureRegister,
    q_a: int,
    q_b: int,
    rng: np.random.Generator,
) -> Tuple[BellOutcome, Optional[PureRegister]]:
    """
    Project two qubits onto the Bell basis.

    Returns:
        (Bell outcome, register of the remaining qubits or None)

    Raises:
        QuantumStateError: On equal or out-of-range indices
    """
    if q_a == q_b:
        raise QuantumStateError("Bell measurement needs two distinct qubits")
    _check_index(reg, q_a)
    _check_index(reg, q_b)
    n = reg.num_qubits
    state = reg.take().reshape([2] * n)

    projections = []
    for outcome, bell in _BELL_TENSORS.items():
        projected = np.tensordot(np.conj(bell), state, axes=([0, 1], [q_a, q_b]))
        projections.append((outcome, projected, float(np.vdot(projected, projected).real)))

    draw = rng.random()
    cumulative = 0.0
    chosen = projections[-1]
    for entry in projections:
        cumulative += entry[2]
        if draw < cumulative:
            chosen = entry
            break
    outcome, projected, _ = chosen
    return outcome, _successor(projected)


def correction_for(outcome: BellOutcome) -> PauliCorrection:
    return TELEPORT_CORRECTIONS[outcome]


def apply_pauli(reg: PureRegister, qubit_index: int, pauli: PauliCorrection) -> PureRegister:
    """Apply a Pauli to one qubit; consumes reg."""
    _check_index(reg, qubit_index)
    n = reg.num_qubits
    state = reg.take().reshape([2] * n)
    rotated = np.tensordot(pauli.matrix, state, axes=([1], [qubit_index]))
    return PureRegister(np.moveaxis(rotated, 0, qubit_index).reshape(-1))


def conjugated_axis(pauli: PauliCorrection, basis: MeasBasis) -> np.ndarray:
    """Bloch axis of the basis after conjugation by the Pauli."""
    e0, _ = basis.vectors()
    return bloch_vector_of(pauli.matrix @ e0)


def basis_action(pauli: PauliCorrection, basis: MeasBasis) -> BasisAction:
    image = conjugated_axis(pauli, basis)
    axis = np.asarray(basis.axis)
    if np.allclose(image, axis, rtol=0.0, atol=TOLERANCE):
        return BasisAction.PRESERVED_SAME
    if np.allclose(image, -axis, rtol=0.0, atol=TOLERANCE):
        return BasisAction.PRESERVED_FLIPPED
    return BasisAction.NOT_PRESERVED


def nearest_pauli_basis(basis: MeasBasis) -> MeasBasis:
    """The coordinate axis (with sign) closest to the basis axis."""
    axis = np.asarray(basis.axis)
    index = int(np.argmax(np.abs(axis)))
    unit = [0.0, 0.0, 0.0]
    unit[index] = 1.0 if axis[index] >= 0 else -1.0
    return MeasBasis(tuple(unit))


def projective_test(reg: PureRegister, target: PureRegister, rng: np.random.Generator) -> bool:
    """Project reg onto target; True (pass) with probability |<target|reg>|^2."""
    if reg.num_qubits != 1 or target.num_qubits != 1:
        raise QuantumStateError("projective_test expects single-qubit registers")
    outcome, _ = measure_qubit(reg, 0, MeasBasis.from_state(target), rng)
    return outcome == 0


def fidelity(a: PureRegister, b: PureRegister) -> float:
    """|<a|b>|^2; insensitive to global phase."""
    if a.num_qubits != b.num_qubits:
        raise QuantumStateError(
            f"Dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits"
        )
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))

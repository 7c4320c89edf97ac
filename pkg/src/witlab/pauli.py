"""Signed Pauli strings.

The phase is stored as a power of ``i`` (0, 1, 2, 3 for +1, +i, -1, -i), so
products stay exactly inside the phase group. Position 0 is the leftmost
letter and corresponds to qubit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

LETTERS = "IXYZ"

# (a, b) -> (power of i, letter) for the single-qubit product a*b
_PRODUCT = {
    ("I", "I"): (0, "I"), ("I", "X"): (0, "X"), ("I", "Y"): (0, "Y"), ("I", "Z"): (0, "Z"),
    ("X", "I"): (0, "X"), ("X", "X"): (0, "I"), ("X", "Y"): (1, "Z"), ("X", "Z"): (3, "Y"),
    ("Y", "I"): (0, "Y"), ("Y", "X"): (3, "Z"), ("Y", "Y"): (0, "I"), ("Y", "Z"): (1, "X"),
    ("Z", "I"): (0, "Z"), ("Z", "X"): (1, "Y"), ("Z", "Y"): (3, "X"), ("Z", "Z"): (0, "I"),
}  # fmt: skip

_PHASE_TEXT = {0: "", 1: "i", 2: "-", 3: "-i"}
_PHASE_VALUE = {0: 1, 1: 1j, 2: -1, 3: -1j}

_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(letter: str) -> np.ndarray:
    return _MATRICES[letter].copy()


@dataclass(frozen=True)
class PauliString:
    letters: str
    phase_exp: int = 0

    def __post_init__(self):
        letters = self.letters.upper()
        if any(c not in LETTERS for c in letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    @classmethod
    def parse(cls, text: str) -> PauliString:
        """Parse ``"-ZYIIII"``, ``"+iXZ"``, ``"-iY"`` or a bare word."""
        s = text.strip().replace("−", "-")
        exp = 0
        if s.startswith("+"):
            s = s[1:]
        elif s.startswith("-"):
            exp, s = 2, s[1:]
        if s.startswith("i") or s.startswith("j"):
            exp, s = exp + 1, s[1:]
        return cls(s, exp)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls("I" * n)

    @classmethod
    def single(cls, n: int, position: int, letter: str) -> PauliString:
        word = ["I"] * n
        word[position] = letter
        return cls("".join(word))

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def phase(self) -> complex:
        return _PHASE_VALUE[self.phase_exp]

    @property
    def is_hermitian(self) -> bool:
        return self.phase_exp in (0, 2)

    @property
    def weight(self) -> int:
        return weight(self)

    def __mul__(self, other: PauliString) -> PauliString:
        return pauli_mul(self, other)

    def __neg__(self) -> PauliString:
        return PauliString(self.letters, self.phase_exp + 2)

    def scaled(self, exp: int) -> PauliString:
        """Multiply by ``i**exp``."""
        return PauliString(self.letters, self.phase_exp + exp)

    def unsigned(self) -> PauliString:
        return PauliString(self.letters)

    def commutes(self, other: PauliString) -> bool:
        _check_lengths(self, other)
        clashes = sum(a != "I" and b != "I" and a != b for a, b in zip(self.letters, other.letters))
        return clashes % 2 == 0

    def transpose_sign(self) -> int:
        """Sign s with P^T = s P (Y is the only antisymmetric letter)."""
        return -1 if self.letters.count("Y") % 2 else 1

    def restrict(self, positions: Iterable[int]) -> str:
        return "".join(self.letters[p] for p in positions)

    def to_matrix(self) -> np.ndarray:
        out = np.array([[self.phase]], dtype=complex)
        for c in self.letters:
            out = np.kron(out, _MATRICES[c])
        return out

    def __str__(self) -> str:
        return _PHASE_TEXT[self.phase_exp] + self.letters

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"


def _check_lengths(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise ValueError(f"length mismatch: {a.n} vs {b.n}")


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    _check_lengths(a, b)
    exp = a.phase_exp + b.phase_exp
    out = []
    for p, q in zip(a.letters, b.letters):
        e, letter = _PRODUCT[(p, q)]
        exp += e
        out.append(letter)
    return PauliString("".join(out), exp)


def weight(p: PauliString) -> int:
    """Number of non-identity letters."""
    return sum(c != "I" for c in p.letters)


def identify_pauli(matrix: np.ndarray, tol: float = 1e-9) -> PauliString | None:
    """Return the signed Pauli string equal to ``matrix``, or None.

    Only used for small dense checks: the cost is 4**n traces.
    """
    dim = matrix.shape[0]
    n = int(round(np.log2(dim)))
    from itertools import product

    for word in product(LETTERS, repeat=n):
        p = PauliString("".join(word))
        c = np.trace(p.to_matrix().conj().T @ matrix) / dim
        if abs(abs(c) - 1) < tol:
            for exp, value in _PHASE_VALUE.items():
                if abs(c - value) < tol:
                    return p.scaled(exp)
            return None
    return None

"""Walsh code book and code-index bit mapping.

Rows of the Sylvester-Hadamard matrix are numbered from 1. Only rows
1, 5, 9, ..., 1 + 4(M - 1) with M = P2 / 4 are used for index modulation:
they are the rows that stay constant over every aligned group of four
entries, which is what keeps the tag's reflected signal orthogonal to the
direct-link symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


def sylvester_hadamard(order: int) -> np.ndarray:
    """Sylvester-Hadamard matrix of the given power-of-two order, as int8."""
    if order < 1 or order & (order - 1):
        raise InvalidParameterError(f"Hadamard order must be a power of two, got {order}")
    H = np.ones((1, 1), dtype=np.int8)
    while H.shape[0] < order:
        H = np.block([[H, H], [H, -H]])
    return H


def is_blockwise_constant(row, group: int = 4) -> bool:
    """True when every aligned group of ``group`` consecutive entries is equal."""
    row = np.asarray(row)
    if row.size % group:
        return False
    blocks = row.reshape(-1, group)
    return bool(np.all(blocks == blocks[:, :1]))


@dataclass(frozen=True)
class WalshBook:
    order: int
    rows: np.ndarray
    selected_indices: tuple[int, ...]

    @property
    def M(self) -> int:
        return len(self.selected_indices)

    @property
    def m_c(self) -> int:
        return self.M.bit_length() - 1

    def row(self, a: int) -> np.ndarray:
        """Walsh code ``a`` (one-based row number)."""
        if not 1 <= a <= self.order:
            raise InvalidParameterError(f"row {a} outside 1..{self.order}")
        return self.rows[a - 1]

    @property
    def selected_rows(self) -> np.ndarray:
        """``(M, P2)`` array of the selected codes, in index order."""
        return self.rows[np.asarray(self.selected_indices) - 1]


def build(P2: int) -> WalshBook:
    if P2 < 4 or P2 & (P2 - 1):
        raise InvalidParameterError(f"P2 must be a power of two >= 4, got {P2}")
    rows = sylvester_hadamard(P2)
    rows.setflags(write=False)
    selected = tuple(1 + 4 * n for n in range(P2 // 4))
    return WalshBook(order=P2, rows=rows, selected_indices=selected)


def bits_to_index(bits, book: WalshBook) -> int:
    """Map ``m_c`` index bits (MSB first) to the one-based code number ``1 + 4 v``."""
    bits = [int(b) for b in bits]
    if len(bits) != book.m_c:
        raise InvalidParameterError(f"expected {book.m_c} index bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise InvalidParameterError(f"index bits must be 0/1, got {bits}")
    v = 0
    for b in bits:
        v = (v << 1) | b
    return 1 + 4 * v


def index_to_bits(a: int, book: WalshBook) -> list[int]:
    if a not in book.selected_indices:
        raise InvalidParameterError(f"code {a} is not one of {book.selected_indices}")
    v = (a - 1) // 4
    return [(v >> (book.m_c - 1 - i)) & 1 for i in range(book.m_c)]


def position_bits(positions, m_c: int) -> np.ndarray:
    """Vectorized zero-based code positions -> ``(..., m_c)`` MSB-first bit array."""
    positions = np.asarray(positions)
    shifts = np.arange(m_c - 1, -1, -1)
    return (positions[..., None] >> shifts) & 1


def bits_position(bits) -> np.ndarray:
    """Inverse of :func:`position_bits` over the last axis."""
    bits = np.asarray(bits, dtype=np.int64)
    m_c = bits.shape[-1]
    weights = 1 << np.arange(m_c - 1, -1, -1)
    return (bits * weights).sum(axis=-1)

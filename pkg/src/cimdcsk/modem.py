"""CIM-DCSK direct link, tag modulator, both receivers and the SR-DCSK benchmark.

Frame layout
------------
A direct-link symbol is ``P1 + P2`` replicas of one length-L chaotic sequence
``x``: ``P1`` reference replicas followed by ``P2`` replicas multiplied by
``b * w[a, p]`` where ``w[a]`` is the selected Walsh code. Because the selected
codes are constant over aligned groups of four, the frame splits into
``(P1 + P2) / 4`` blocks of the form ``k * [x, x, x, x]``.

The tag reflects each block as ``zeta * k * [x, -x, b' x, -b' x]``, which is
orthogonal to the incident block. The backscatter receiver differences
neighbouring replicas, which cancels the direct signal, and correlates the two
differences.

The core functions accept leading batch dimensions so the harness can process
thousands of symbols per call; the per-symbol operations wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import walsh
from .errors import InvalidParameterError


@dataclass(frozen=True)
class SystemParams:
    """One CIM-DCSK-AmBC configuration.

    Parameters
    ----------
    P1 : int
        Reference replicas per symbol, a positive multiple of 4.
    P2 : int
        Information replicas per symbol and Walsh code length; a power of two >= 4.
    L : int
        Chips per replica.
    zeta : float
        Tag reflecting coefficient (amplitude), in (0, 1].
    """

    P1: int
    P2: int
    L: int
    zeta: float = 1.0

    def __post_init__(self):
        if self.P1 <= 0 or self.P1 % 4:
            raise InvalidParameterError(f"P1 must be a positive multiple of 4, got {self.P1}")
        if self.P2 < 4 or self.P2 & (self.P2 - 1):
            raise InvalidParameterError(f"P2 must be a power of two >= 4, got {self.P2}")
        if self.L < 1:
            raise InvalidParameterError(f"L must be >= 1, got {self.L}")
        if not 0.0 < self.zeta <= 1.0:
            raise InvalidParameterError(f"zeta must lie in (0, 1], got {self.zeta}")

    @classmethod
    def from_beta(cls, P1: int, P2: int, beta: int, zeta: float = 1.0) -> "SystemParams":
        if beta % (P1 + P2):
            raise InvalidParameterError(f"beta={beta} is not divisible by P1+P2={P1 + P2}")
        return cls(P1, P2, beta // (P1 + P2), zeta)

    @property
    def M(self) -> int:
        return self.P2 // 4

    @property
    def m_c(self) -> int:
        return self.M.bit_length() - 1

    @property
    def beta(self) -> int:
        return (self.P1 + self.P2) * self.L

    @property
    def replicas(self) -> int:
        return self.P1 + self.P2

    @property
    def blocks(self) -> int:
        """Backscatter bits per symbol, (P1 + P2) / 4."""
        return (self.P1 + self.P2) // 4

    @property
    def direct_bits(self) -> int:
        return 1 + self.m_c

    @property
    def total_bits(self) -> int:
        return self.direct_bits + self.blocks


@dataclass(frozen=True)
class DirectSymbol:
    modulated_bit: int  # b_l in {-1, +1}
    index_bits: tuple[int, ...]
    index: int  # one-based Walsh row a_l
    chips: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class BackscatterSymbol:
    bits: tuple[int, ...]  # b'_{l,delta} in {-1, +1}
    chips: np.ndarray = field(repr=False)


def _check_bits(bits, name):
    bits = np.asarray(bits)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise InvalidParameterError(f"{name} must contain only 0/1 values")
    return bits.astype(np.int64)


def _replica_view(chips: np.ndarray, replicas: int, name: str = "signal") -> np.ndarray:
    chips = np.asarray(chips, dtype=float)
    n = chips.shape[-1]
    if n % replicas:
        raise InvalidParameterError(f"{name} length {n} is not a multiple of {replicas} replicas")
    return chips.reshape(chips.shape[:-1] + (replicas, n // replicas))


def _require_length(chips, expected: int, name: str = "signal"):
    n = np.shape(chips)[-1]
    if n != expected:
        raise InvalidParameterError(f"{name} has {n} chips, expected {expected}")


def spread(signs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Lay out ``signs[..., r] * x[..., :]`` replica after replica."""
    signs = np.asarray(signs, dtype=float)
    x = np.asarray(x, dtype=float)
    out = signs[..., :, None] * x[..., None, :]
    return out.reshape(out.shape[:-2] + (-1,))


def apply_replica_pattern(chips: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    """Multiply each replica-length segment of ``chips`` by one pattern entry."""
    pattern = np.asarray(pattern, dtype=float)
    view = _replica_view(chips, pattern.shape[-1])
    out = view * pattern[..., :, None]
    return out.reshape(out.shape[:-2] + (-1,))


# -- CIM-DCSK direct link ----------------------------------------------------


def direct_replica_signs(mod_bits, positions, params: SystemParams, book: walsh.WalshBook):
    """Replica signs ``[1]*P1 + b * w[a]`` for zero-based code positions."""
    b = 2.0 * np.asarray(mod_bits, dtype=float) - 1.0
    codes = book.selected_rows[np.asarray(positions)]
    ref = np.ones(b.shape + (params.P1,))
    return np.concatenate([ref, b[..., None] * codes], axis=-1)


def cim_modulate(mod_bit, index_bits, x, params: SystemParams, book: walsh.WalshBook | None = None) -> DirectSymbol:
    """Build one direct-link symbol from its modulated bit and index bits."""
    book = book or walsh.build(params.P2)
    x = np.asarray(x, dtype=float)
    if x.shape != (params.L,):
        raise InvalidParameterError(f"chaotic sequence has shape {x.shape}, expected ({params.L},)")
    if mod_bit not in (0, 1):
        raise InvalidParameterError(f"mod_bit must be 0 or 1, got {mod_bit}")
    index_bits = tuple(int(v) for v in index_bits)
    a = walsh.bits_to_index(index_bits, book)
    signs = direct_replica_signs(mod_bit, (a - 1) // 4, params, book)
    chips = spread(signs, x)
    chips.setflags(write=False)
    return DirectSymbol(2 * int(mod_bit) - 1, index_bits, a, chips)


def direct_statistics(r, params: SystemParams, book: walsh.WalshBook) -> np.ndarray:
    """Correlator outputs ``I_n`` for every selected code, shape ``(..., M)``."""
    view = _replica_view(r, params.replicas)
    ref = view[..., : params.P1, :].sum(axis=-2)
    info = view[..., params.P1 :, :]
    despread = np.einsum("mp,...pl->...ml", book.selected_rows.astype(float), info)
    return np.einsum("...l,...ml->...m", ref, despread)


def decide_direct(I: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Code-index and sign decisions from correlator outputs.

    Returns zero-based code positions (ties go to the lowest) and 0/1
    modulated bits (a zero statistic decides 1).
    """
    I = np.asarray(I)
    positions = np.argmax(np.abs(I), axis=-1)
    chosen = np.take_along_axis(I, positions[..., None], axis=-1)[..., 0]
    return positions, (chosen >= 0).astype(np.int64)


def direct_receive(r, params: SystemParams, book: walsh.WalshBook | None = None) -> tuple[list[int], int]:
    book = book or walsh.build(params.P2)
    _require_length(r, params.beta)
    r = np.asarray(r, dtype=float)
    if r.ndim != 1:
        raise InvalidParameterError("direct_receive takes a single symbol")
    position, mod_bit = decide_direct(direct_statistics(r, params, book))
    index_bits = walsh.index_to_bits(1 + 4 * int(position), book)
    return index_bits, int(mod_bit)


# -- tag and backscatter link ------------------------------------------------


def tag_pattern(bs_bits, zeta: float) -> np.ndarray:
    """Per-replica reflection gains ``zeta * [1, -1, b', -b']`` for each block."""
    bp = 2.0 * np.asarray(bs_bits, dtype=float) - 1.0
    one = np.ones_like(bp)
    pattern = np.stack([one, -one, bp, -bp], axis=-1)
    return zeta * pattern.reshape(pattern.shape[:-2] + (-1,))


def tag_modulate(incident, bs_bits, params: SystemParams) -> BackscatterSymbol:
    """Reflect an incident direct-link symbol, adding one bit per four-replica block."""
    chips = incident.chips if isinstance(incident, DirectSymbol) else np.asarray(incident, dtype=float)
    _require_length(chips, params.beta, "incident signal")
    bs_bits = _check_bits(bs_bits, "backscatter bits")
    if bs_bits.shape != (params.blocks,):
        raise InvalidParameterError(f"expected {params.blocks} backscatter bits, got {bs_bits.size}")
    out = apply_replica_pattern(chips, tag_pattern(bs_bits, params.zeta))
    out.setflags(write=False)
    return BackscatterSymbol(tuple(int(v) for v in 2 * bs_bits - 1), out)


def backscatter_statistics(r, params: SystemParams) -> np.ndarray:
    """Decision variables ``D_delta`` for every block, shape ``(..., blocks)``."""
    view = _replica_view(r, params.replicas)
    blocks = view.reshape(view.shape[:-2] + (params.blocks, 4, params.L))
    ref = blocks[..., 0, :] - blocks[..., 1, :]
    info = blocks[..., 2, :] - blocks[..., 3, :]
    return np.sum(ref * info, axis=-1)


def backscatter_receive(r, params: SystemParams) -> list[int]:
    _require_length(r, params.beta)
    D = backscatter_statistics(r, params)
    return [int(v) for v in (D >= 0)]


# -- SR-DCSK-AmBC benchmark --------------------------------------------------


@dataclass(frozen=True)
class SrParams:
    """Short-reference DCSK benchmark: one length-R reference plus P replicas.

    The tag uses the information replicas as two halves of alternating-sign
    reflections, so P must be a multiple of 4. The reference slot is not
    reflected.
    """

    beta: int
    P: int
    zeta: float = 1.0

    def __post_init__(self):
        if self.P <= 0 or self.P % 4:
            raise InvalidParameterError(f"P must be a positive multiple of 4, got {self.P}")
        if self.beta <= 0 or self.beta % (1 + self.P):
            raise InvalidParameterError(f"beta={self.beta} is not divisible by 1+P={1 + self.P}")
        if not 0.0 < self.zeta <= 1.0:
            raise InvalidParameterError(f"zeta must lie in (0, 1], got {self.zeta}")

    @property
    def R(self) -> int:
        return self.beta // (1 + self.P)

    @property
    def replicas(self) -> int:
        return 1 + self.P

    direct_bits = 1
    blocks = 1
    total_bits = 2


def sr_replica_signs(mod_bits, P: int) -> np.ndarray:
    b = 2.0 * np.asarray(mod_bits, dtype=float) - 1.0
    return np.concatenate([np.ones(b.shape + (1,)), np.repeat(b[..., None], P, axis=-1)], axis=-1)


def sr_tag_pattern(bs_bits, zeta: float, P: int) -> np.ndarray:
    """Reflection gains ``[0, +,-,+,-..., b'(+,-,+,-...)] * zeta`` over 1 + P slots."""
    if P % 4:
        raise InvalidParameterError(f"P must be a multiple of 4, got {P}")
    bp = 2.0 * np.asarray(bs_bits, dtype=float) - 1.0
    alt = np.resize([1.0, -1.0], P // 2)
    first = np.broadcast_to(alt, bp.shape + (P // 2,))
    second = bp[..., None] * alt
    ref = np.zeros(bp.shape + (1,))
    return zeta * np.concatenate([ref, first, second], axis=-1)


def sr_modulate(mod_bit, x, P: int) -> np.ndarray:
    """One benchmark symbol ``[x, b x, ..., b x]`` with P information replicas."""
    if mod_bit not in (0, 1):
        raise InvalidParameterError(f"mod_bit must be 0 or 1, got {mod_bit}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidParameterError("reference must be a 1-D chaotic sequence")
    return spread(sr_replica_signs(mod_bit, P), x)


def sr_tag_modulate(incident, bs_bit, zeta: float, P: int) -> np.ndarray:
    if bs_bit not in (0, 1):
        raise InvalidParameterError(f"bs_bit must be 0 or 1, got {bs_bit}")
    if not 0.0 < zeta <= 1.0:
        raise InvalidParameterError(f"zeta must lie in (0, 1], got {zeta}")
    return apply_replica_pattern(incident, sr_tag_pattern(bs_bit, zeta, P))


def sr_statistics(r, R: int, P: int) -> tuple[np.ndarray, np.ndarray]:
    """Direct and backscatter decision variables of the benchmark receiver."""
    view = _replica_view(r, 1 + P)
    if view.shape[-1] != R:
        raise InvalidParameterError(f"signal holds replicas of {view.shape[-1]} chips, expected {R}")
    ref = view[..., 0, :]
    info = view[..., 1:, :]
    direct = np.sum(ref * info.sum(axis=-2), axis=-1)
    alt = np.resize([1.0, -1.0], P // 2)
    first = np.einsum("p,...pl->...l", alt, info[..., : P // 2, :])
    second = np.einsum("p,...pl->...l", alt, info[..., P // 2 :, :])
    return direct, np.sum(first * second, axis=-1)


def sr_receive(r, R: int, P: int) -> tuple[int, int]:
    _require_length(r, R * (1 + P))
    direct, back = sr_statistics(r, R, P)
    return int(direct >= 0), int(back >= 0)

"""Constant-amplitude reference sequences and cyclic-shift preamble pools.

The uplink reference signal is a polyphase sequence whose elements all have
magnitude ``1/sqrt(N)``.  For prime length ``N`` the family has two properties
this package relies on:

* periodic autocorrelation of one root is zero at every nonzero lag, so
  cyclic shifts of one root are exactly orthogonal over short delay windows;
* the periodic cross-correlation between two distinct roots has constant
  magnitude ``1/sqrt(N)`` at every lag.

A preamble pool enumerates root/shift combinations deterministically (all
shifts of the first root, then all shifts of the second, and so on) and maps
user indices onto pool entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import CapacityError, ConfigurationError, ShapeError

__all__ = [
    "ZcSequence",
    "PreamblePool",
    "generate_zc",
    "cyclic_shift",
    "build_pool",
    "periodic_correlation",
]


@dataclass(frozen=True)
class ZcSequence:
    """A single-root constant-amplitude reference sequence.

    Attributes
    ----------
    length : int
        Sequence length ``N`` (number of reference-signal samples).
    root : int
        Root index, an integer in ``1 .. N - 1``.
    samples : numpy.ndarray
        Complex vector of shape ``(N,)``.  Every element has magnitude
        ``1/sqrt(N)``, so the whole sequence has unit energy.
    """

    length: int
    root: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        if self.samples.shape != (self.length,):
            raise ShapeError(
                f"sequence of length {self.length} has samples of shape "
                f"{self.samples.shape}"
            )


@dataclass(frozen=True)
class PreamblePool:
    """A deterministic pool of reference sequences built from root sequences.

    Entries are ordered root-major: every cyclic shift of the first base
    root, then every shift of the second, and so on.  Entries of one root
    differ by multiples of ``shift_size`` samples, so for prime length they
    are orthogonal over any delay window shorter than ``shift_size``.

    Attributes
    ----------
    sequences : tuple of numpy.ndarray
        Pool entries ``p_1 .. p_Q``, each a complex vector of length ``N``.
    shift_size : int
        Minimum cyclic-shift separation between same-root entries.  Callers
        combining the pool with a multipath channel must keep the channel's
        delay-spread length strictly below this value.
    roots : tuple of int
        Root of each pool entry.
    shifts : tuple of int
        Cyclic shift of each pool entry.
    assignment : mapping
        User index (0-based) to pool index.  Defaults to the identity over
        the first ``num_users`` entries.
    """

    sequences: tuple
    shift_size: int
    roots: tuple
    shifts: tuple
    assignment: Mapping[int, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.sequences)

    @property
    def length(self) -> int:
        return len(self.sequences[0])

    def sequence_for_user(self, user: int) -> np.ndarray:
        """Return the pool entry assigned to ``user``."""
        if user not in self.assignment:
            raise ConfigurationError(f"user {user} has no assigned sequence")
        return self.sequences[self.assignment[user]]


def generate_zc(length: int, root: int) -> ZcSequence:
    """Generate a single-root constant-amplitude sequence.

    Element ``j`` (1-based, ``j = 1 .. N``) equals
    ``exp(-i * pi * root * j * (j + 1) / N) / sqrt(N)``.

    Parameters
    ----------
    length : int
        Sequence length ``N``, at least 2.  Prime lengths give the ideal
        correlation properties; composite lengths are permitted.
    root : int
        Root index in ``1 .. N - 1``.

    Returns
    -------
    ZcSequence
    """
    if length < 2:
        raise ConfigurationError(f"sequence length must be >= 2, got {length}")
    if not 1 <= root <= length - 1:
        raise ConfigurationError(
            f"root must lie in 1..{length - 1}, got {root}"
        )
    j = np.arange(1, length + 1, dtype=np.float64)
    phase = -np.pi * root * j * (j + 1.0) / length
    samples = np.exp(1j * phase) / np.sqrt(length)
    return ZcSequence(length=length, root=root, samples=samples)


def cyclic_shift(seq: np.ndarray, shift: int) -> np.ndarray:
    """Cyclically advance a vector: ``out[j] = seq[(j + shift) mod N]``.

    The shift is normalized modulo the length, so any integer is accepted.
    Energy is preserved exactly.
    """
    seq = np.asarray(seq)
    if seq.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {seq.shape}")
    return np.roll(seq, -int(shift))


def periodic_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-lag periodic cross-correlation ``c[s] = sum_j a[j] * conj(b[(j+s) mod N])``.

    Computed by FFT; equals the brute-force double loop to rounding error.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}")
    # c[s] = sum_j a[j] conj(b[j+s]) = IDFT(conj(DFT(a)) * DFT(b)) conjugated
    return np.conj(np.fft.ifft(np.conj(np.fft.fft(a)) * np.fft.fft(b))) * 1.0


def build_pool(
    base: Sequence[ZcSequence],
    shift_size: int,
    pool_size: int,
    num_users: int | None = None,
) -> PreamblePool:
    """Build a preamble pool by cyclically shifting base root sequences.

    Each base root contributes ``floor(N / shift_size)`` entries at shifts
    ``0, shift_size, 2*shift_size, ...``; the pool takes the first
    ``pool_size`` entries in root-major order.

    Parameters
    ----------
    base : sequence of ZcSequence
        Base root sequences, all of one length.
    shift_size : int
        Cyclic-shift separation between same-root entries; must be positive.
        Choose it strictly greater than the channel delay-spread length so
        that same-root entries stay orthogonal over the delay window.
    pool_size : int
        Number of entries Q to generate.
    num_users : int, optional
        Number of users to assign (identity assignment over the first
        ``num_users`` entries).  Defaults to ``pool_size``.

    Raises
    ------
    CapacityError
        If the roots and shift budget cannot supply ``pool_size`` entries,
        or more users than entries are requested.
    """
    if not base:
        raise ConfigurationError("at least one base sequence is required")
    length = base[0].length
    if any(s.length != length for s in base):
        raise ConfigurationError("all base sequences must share one length")
    if shift_size < 1:
        raise ConfigurationError(f"shift_size must be positive, got {shift_size}")
    if pool_size < 1:
        raise ConfigurationError(f"pool_size must be positive, got {pool_size}")

    shifts_per_root = length // shift_size
    capacity = len(base) * shifts_per_root
    if pool_size > capacity:
        raise CapacityError(
            f"requested {pool_size} sequences but {len(base)} root(s) with "
            f"shift size {shift_size} over length {length} supply only "
            f"{capacity}"
        )

    if num_users is None:
        num_users = pool_size
    if num_users > pool_size:
        raise CapacityError(
            f"cannot assign {num_users} users to a pool of {pool_size}"
        )

    sequences: list[np.ndarray] = []
    roots: list[int] = []
    shifts: list[int] = []
    for root_seq in base:
        for q in range(shifts_per_root):
            if len(sequences) == pool_size:
                break
            shift = q * shift_size
            sequences.append(cyclic_shift(root_seq.samples, shift))
            roots.append(root_seq.root)
            shifts.append(shift)
        if len(sequences) == pool_size:
            break

    assignment = {k: k for k in range(num_users)}
    return PreamblePool(
        sequences=tuple(sequences),
        shift_size=shift_size,
        roots=tuple(roots),
        shifts=tuple(shifts),
        assignment=assignment,
    )

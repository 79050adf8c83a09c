"""Ranks, pseudo-observations, the boundary weight function and RNG streams.

Everything downstream works on ranks: a raw sample is validated, ranked
column by column and (optionally) rescaled to pseudo-observations ``R / n``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, TypeVar

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionError, SampleError, TieError

T = TypeVar("T")

_UINT64 = 2**64


class TiePolicy(str, Enum):
    ERROR = "error"
    STABLE = "stable"


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_id)``.

    Streams are backed by the counter-based Philox generator keyed on both
    numbers, so a given pair always produces the same variates regardless of
    which thread consumes it or in which order. Do not share one generator
    between threads; derive a child stream per task with :meth:`child`.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) < _UINT64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")

    def generator(self) -> np.random.Generator:
        key = int(self.master_seed) | (int(self.stream_id) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream number ``index`` (e.g. a replicate index)."""
        mixed = np.random.SeedSequence([int(self.stream_id), int(index), 0x5EED]).generate_state(
            1, np.uint64
        )[0]
        return RngStream(self.master_seed, int(mixed))

    def named(self, label: str) -> "RngStream":
        """Sub-stream keyed on a text label, e.g. ``"null"`` or ``"quadrature"``."""
        code = int.from_bytes(label.encode("utf-8")[:8].ljust(8, b"\0"), "little")
        mixed = np.random.SeedSequence([int(self.stream_id), code, 0x1ABE1]).generate_state(
            1, np.uint64
        )[0]
        return RngStream(self.master_seed, int(mixed))


def as_generator(rng: RngStream | np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(0 if rng is None else int(rng)).generator()


def as_stream(rng: RngStream | int | None) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(0 if rng is None else int(rng))


def map_replicates(
    func: Callable[[int, RngStream], T],
    count: int,
    rng: RngStream,
    threads: int = 1,
    chunk_size: int = 64,
) -> list[T]:
    """Evaluate ``func(i, rng.child(i))`` for ``i < count``, in index order.

    Each replicate owns its stream, so the output does not depend on
    ``threads``.
    """
    if threads <= 1 or count <= chunk_size:
        return [func(i, rng.child(i)) for i in range(count)]

    def run_chunk(start: int) -> list[T]:
        stop = min(start + chunk_size, count)
        return [func(i, rng.child(i)) for i in range(start, stop)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        chunks = list(pool.map(run_chunk, range(0, count, chunk_size)))
    return [value for chunk in chunks for value in chunk]


def check_sample(X) -> np.ndarray:
    """Validate a raw sample: 2-D, finite, at least one row and two columns."""
    try:
        X = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=1)
    except ValueError as exc:
        raise SampleError(str(exc)) from exc
    if X.shape[1] < 2:
        raise DimensionError(f"need at least 2 columns, got {X.shape[1]}")
    return X


@dataclass(frozen=True)
class RankMatrix:
    """Column-wise ranks in ``1..n`` with a per-column tie flag."""

    ranks: np.ndarray
    tie_flag: tuple[bool, ...]

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @property
    def d(self) -> int:
        return self.ranks.shape[1]

    @property
    def has_ties(self) -> bool:
        return any(self.tie_flag)

    @classmethod
    def from_ranks(cls, ranks) -> "RankMatrix":
        """Wrap an integer matrix that is already a rank matrix."""
        ranks = np.asarray(ranks)
        if ranks.ndim != 2:
            raise DimensionError("rank matrix must be two-dimensional")
        ranks = ranks.astype(np.int64)
        n = ranks.shape[0]
        if ranks.min() < 1 or ranks.max() > n:
            raise ValueError(f"ranks must lie in 1..{n}")
        expected = np.arange(1, n + 1)
        flags = tuple(not np.array_equal(np.sort(col), expected) for col in ranks.T)
        ranks.setflags(write=False)
        return cls(ranks, flags)


def compute_ranks(X, tie_policy: TiePolicy | str = TiePolicy.ERROR) -> RankMatrix:
    """Rank each column of ``X``.

    With ``tie_policy="stable"`` equal values are ranked by row order and the
    column's tie flag is set; with ``"error"`` any duplicate raises
    :class:`TieError`.
    """
    X = check_sample(X)
    policy = TiePolicy(tie_policy)
    n, d = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    ranks = np.empty((n, d), dtype=np.int64)
    flags = []
    for j in range(d):
        ranks[order[:, j], j] = np.arange(1, n + 1)
        sorted_col = X[order[:, j], j]
        tied = bool(np.any(sorted_col[1:] == sorted_col[:-1]))
        if tied and policy is TiePolicy.ERROR:
            raise TieError(f"column {j} contains tied values")
        flags.append(tied)
    ranks.setflags(write=False)
    return RankMatrix(ranks, tuple(flags))


def pseudo_observations(ranks: RankMatrix) -> np.ndarray:
    """Pseudo-observations ``R / n``."""
    return ranks.ranks / float(ranks.n)


def weight_g(u) -> np.ndarray | float:
    """Boundary weight ``min_j { u_j ∧ max_{k≠j} (1 - u_k) }``.

    Vectorised over leading axes; the last axis holds the ``d >= 2``
    coordinates. It vanishes when some ``u_j = 0`` or when all coordinates
    but one equal 1.
    """
    u = np.asarray(u, dtype=float)
    d = u.shape[-1] if u.ndim else 0
    if d < 2:
        raise DimensionError(f"weight function needs d >= 2, got d={d}")
    comp = 1.0 - u
    # max over k != j is the largest complement unless j holds it, then the runner-up
    top2 = -np.partition(-comp, 1, axis=-1)[..., :2]
    argtop = np.argmax(comp, axis=-1)
    idx = np.arange(d)
    other_max = np.where(idx == argtop[..., None], top2[..., 1:2], top2[..., 0:1])
    g = np.min(np.minimum(u, other_max), axis=-1)
    return float(g) if g.ndim == 0 else g


def simplex_to_weights(t) -> np.ndarray:
    """Append the implied last coordinate ``t_d = 1 - sum(t)``.

    Tiny negative rounding residue (sum up to 1 + 1e-12) is clamped to 0.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("simplex coordinates must be non-negative")
    rest = 1.0 - t.sum(axis=-1, keepdims=True)
    if np.any(rest < -1e-12):
        raise ValueError("simplex coordinates must sum to at most 1")
    return np.concatenate([t, np.clip(rest, 0.0, None)], axis=-1)


def sample_simplex_uniform(rng: RngStream | np.random.Generator, d: int, size: int | None = None):
    """Uniform point(s) on the unit simplex, as the first ``d - 1`` coordinates.

    Drawn as normalised standard-exponential spacings.
    """
    if d < 2:
        raise DimensionError(f"simplex sampling needs d >= 2, got {d}")
    gen = as_generator(rng)
    shape = (d,) if size is None else (size, d)
    e = gen.standard_exponential(shape)
    w = e / e.sum(axis=-1, keepdims=True)
    return w[..., : d - 1]


def read_sample_csv(path: str, delimiter: str = ",") -> np.ndarray:
    """Read a numeric CSV sample; a non-numeric first row is taken as header.

    Blank, NaN or infinite cells are rejected with :class:`SampleError`.
    """
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for line_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                if line_no == 1 and not rows:
                    continue
                raise SampleError(f"{path}:{line_no}: non-numeric or blank cell") from None
            if not all(math.isfinite(v) for v in values):
                raise SampleError(f"{path}:{line_no}: NaN or infinite value")
            if rows and len(values) != len(rows[0]):
                raise SampleError(f"{path}:{line_no}: expected {len(rows[0])} columns")
            rows.append(values)
    if not rows:
        raise SampleError(f"{path}: no data rows")
    return check_sample(np.array(rows))


def write_rows_csv(path_or_buf, header: Sequence[str], rows, comments: Sequence[str] = ()):
    """Write ``rows`` under ``header``, preceded by ``# ...`` comment lines."""
    own = isinstance(path_or_buf, str)
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)

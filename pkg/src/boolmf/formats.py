"""Text formats, ratings/image ingestion and the message histogram.

Formats (all 0-based, ``\\n`` line endings, ASCII):

dense matrix
    ``M N`` then ``M`` lines of exactly ``N`` characters from ``{0,1}``.
sparse triplets
    ``M N`` then one ``m n v`` line per observed cell.
ratings log
    MovieLens ``u.data`` layout: ``user<TAB>item<TAB>rating<TAB>timestamp``.
bitmap
    plain PBM (``P1``); 1 is black.
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .core import as_bool_matrix
from .engine import TABLES
from .errors import BoolMFError, FormatError
from .model import Observation

__all__ = [
    "read_dense", "write_dense", "format_dense",
    "read_triplets", "parse_observations", "write_triplets", "format_triplets",
    "read_pbm", "write_pbm",
    "load_observation",
    "RatingsLog", "read_ratings", "ingest_ratings", "split_observation",
    "message_histogram",
    "write_sweep_csv", "write_marginals_csv", "write_histogram_csv",
]


_INT = re.compile(r"0|[1-9][0-9]*")


def _is_int(tok):
    return _INT.fullmatch(tok) is not None


def _lines(path):
    with open(path, "r", encoding="ascii", newline="") as fh:
        text = fh.read()
    if "\r" in text:
        raise FormatError("carriage returns are not allowed", path=path)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _header(lines, path):
    if not lines:
        raise FormatError("missing 'M N' header", 1, path)
    parts = lines[0].split(" ")
    if len(parts) != 2 or not all(_is_int(p) for p in parts):
        raise FormatError("header must be 'M N' with two nonnegative integers", 1, path)
    return int(parts[0]), int(parts[1])


def format_dense(Z) -> str:
    Z = as_bool_matrix(Z, copy=False)
    M, N = Z.shape
    body = "".join("".join("1" if v else "0" for v in row) + "\n" for row in Z)
    return f"{M} {N}\n{body}"


def write_dense(path, Z):
    Path(path).write_text(format_dense(Z), encoding="ascii")


def read_dense(path) -> np.ndarray:
    lines = _lines(path)
    M, N = _header(lines, path)
    if len(lines) != M + 1:
        raise FormatError(f"expected {M} matrix rows, found {len(lines) - 1}", path=path)
    Z = np.zeros((M, N), dtype=np.uint8)
    for i, line in enumerate(lines[1:]):
        if len(line) != N or line.strip("01"):
            raise FormatError(f"row must be exactly {N} characters of 0/1", i + 2, path)
        Z[i] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0")
    return as_bool_matrix(Z, copy=False)


def format_triplets(obs: Observation) -> str:
    M, N = obs.shape
    out = io.StringIO()
    out.write(f"{M} {N}\n")
    for m, n, v in obs:
        out.write(f"{m} {n} {v}\n")
    return out.getvalue()


def write_triplets(path, obs: Observation):
    Path(path).write_text(format_triplets(obs), encoding="ascii")


def read_triplets(path) -> Observation:
    lines = _lines(path)
    M, N = _header(lines, path)
    rows, cols, vals = [], [], []
    seen = set()
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if len(parts) != 3 or not all(_is_int(p) for p in parts):
            raise FormatError("expected 'm n v' with nonnegative integers", i, path)
        m, n, v = (int(p) for p in parts)
        if m >= M or n >= N:
            raise FormatError(f"cell ({m}, {n}) outside the {M}x{N} grid", i, path)
        if v not in (0, 1):
            raise FormatError("value must be 0 or 1", i, path)
        if (m, n) in seen:
            raise FormatError(f"duplicate cell ({m}, {n})", i, path)
        seen.add((m, n))
        rows.append(m)
        cols.append(n)
        vals.append(v)
    return Observation((M, N), rows, cols, vals)


parse_observations = read_triplets


def _pbm_tokens(text, path):
    tokens = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.split("#", 1)[0]
        for tok in line.split():
            tokens.append((tok, lineno))
    return tokens


def read_pbm(path) -> np.ndarray:
    """Plain PBM bitmap as an ``height x width`` Boolean matrix."""
    text = Path(path).read_text(encoding="ascii")
    tokens = _pbm_tokens(text, path)
    if not tokens or tokens[0][0] != "P1":
        raise FormatError("not a plain PBM file (magic 'P1')", 1, path)
    if len(tokens) < 3 or not tokens[1][0].isdigit() or not tokens[2][0].isdigit():
        raise FormatError("missing width/height", tokens[0][1], path)
    width, height = int(tokens[1][0]), int(tokens[2][0])
    bits = []
    for tok, lineno in tokens[3:]:
        if tok.strip("01"):
            raise FormatError(f"invalid pixel token {tok!r}", lineno, path)
        bits.extend(tok)
    if len(bits) != width * height:
        raise FormatError(f"expected {width * height} pixels, found {len(bits)}", path=path)
    Z = np.array([int(b) for b in bits], dtype=np.uint8).reshape(height, width)
    return as_bool_matrix(Z, copy=False)


def write_pbm(path, Z):
    Z = as_bool_matrix(Z, copy=False)
    M, N = Z.shape
    body = "".join(" ".join("1" if v else "0" for v in row) + "\n" for row in Z)
    Path(path).write_text(f"P1\n{N} {M}\n{body}", encoding="ascii")


def load_observation(path) -> Observation:
    """Read a ``.pbm`` bitmap or a dense matrix (fully observed), or a triplet file.

    Dense and triplet text are told apart by the first data line: a single
    token means dense rows.
    """
    path = Path(path)
    if path.suffix.lower() == ".pbm":
        return Observation.full(read_pbm(path))
    lines = _lines(path)
    M, N = _header(lines, path)
    if len(lines) > 1 and len(lines[1].split(" ")) == 1 and M > 0:
        return Observation.full(read_dense(path))
    return read_triplets(path)


@dataclass(frozen=True)
class RatingsLog:
    users: Tuple[str, ...]
    items: Tuple[str, ...]
    ratings: Tuple[float, ...]

    def __len__(self):
        return len(self.ratings)


def read_ratings(path) -> RatingsLog:
    users, items, ratings = [], [], []
    for i, line in enumerate(_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 4:
            raise FormatError("expected 4 tab-separated fields: user item rating timestamp",
                              i, path)
        try:
            r = float(parts[2])
        except ValueError:
            raise FormatError(f"rating {parts[2]!r} is not a number", i, path) from None
        if not math.isfinite(r):
            raise FormatError("rating must be finite", i, path)
        users.append(parts[0])
        items.append(parts[1])
        ratings.append(r)
    return RatingsLog(tuple(users), tuple(items), tuple(ratings))


def _dense_ids(ids):
    index = {}
    out = np.empty(len(ids), dtype=np.int64)
    for i, key in enumerate(ids):
        out[i] = index.setdefault(key, len(index))
    return out, len(index)


def split_observation(obs: Observation, alpha: float, seed):
    """Uniform random split of the observed cells into ``(train, test)``.

    ``round(alpha * |Omega|)`` cells go to train; both parts keep the
    original entry order.
    """
    if not 0.0 < alpha < 1.0:
        raise BoolMFError("observe fraction must lie in (0, 1)")
    n = len(obs)
    rng = np.random.default_rng(seed)
    train_mask = np.zeros(n, dtype=bool)
    train_mask[rng.permutation(n)[: int(round(alpha * n))]] = True

    def part(mask):
        return Observation(obs.shape, obs.rows[mask], obs.cols[mask], obs.values[mask])

    return part(train_mask), part(~train_mask)


def ingest_ratings(log: RatingsLog, alpha: float, seed):
    """Binarize ratings (1 iff strictly above the global mean) and split.

    Users become rows and items columns, numbered in first-seen order.
    Returns ``(train, test)``.
    """
    if len(log) == 0:
        raise BoolMFError("empty ratings log")
    rows, M = _dense_ids(log.users)
    cols, N = _dense_ids(log.items)
    r = np.array(log.ratings)
    values = (r > r.mean()).astype(np.uint8)
    full = Observation((M, N), rows, cols, values)
    return split_observation(full, alpha, seed)


def message_histogram(state, bins: int, table: str = "ahat") -> List[Tuple[float, float, int]]:
    """Equal-width histogram of one message table (``ahat`` by default) over its ``[min, max]``.

    Bins are closed on the right, so a value on an interior edge counts in
    the lower bin; the minimum falls in the first bin. A constant table is
    widened to ``[v - 0.5, v + 0.5]``.
    """
    if bins < 1:
        raise BoolMFError("bins must be >= 1")
    if table not in TABLES:
        raise BoolMFError(f"unknown message table {table!r}; choose from {TABLES}")
    v = np.asarray(getattr(state, table), dtype=np.float64).ravel()
    if v.size == 0:
        lo, hi = -0.5, 0.5
    else:
        lo, hi = float(v.min()), float(v.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(np.searchsorted(edges, v, side="left") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def _g6(x):
    return f"{x:.6g}"


def write_sweep_csv(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["K", "obs_fraction", "mean_error", "std_error", "mean_iters"])
    for r in rows:
        w.writerow([r.K, _g6(r.obs_fraction), _g6(r.mean_error), _g6(r.std_error),
                    _g6(r.mean_iters)])


def write_marginals_csv(fh, gamma, header: Sequence[str]):
    """One row per cell of ``gamma``; ``header`` is ``("m","k","gamma")`` or ``("k","n","gamma")``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    gamma = np.asarray(gamma)
    for i in range(gamma.shape[0]):
        for j in range(gamma.shape[1]):
            w.writerow([i, j, repr(float(gamma[i, j]))])


def write_histogram_csv(fh, tables):
    """``tables`` is a sequence of ``(iteration, histogram)`` pairs."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["iteration", "bin_lo", "bin_hi", "count"])
    for it, hist in tables:
        for lo, hi, count in hist:
            w.writerow([it, repr(lo), repr(hi), count])

"""Per-sample k-bit encoders and their channel descriptions.

Two families are provided:

* the group-partition encoder for hypercube features: the d coordinates are
  split into groups of at most k-1, each sample transmits its group's
  coordinates plus the label, and the receiver can decode those bits exactly;

* explicit (possibly stochastic) channels q_m(x, y) = P(M = m | x, y) over a
  finite feature support, which is the representation the Fisher-information
  machinery consumes.

Deterministic encoders expose one-hot channel rows, so everything downstream
treats both families uniformly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DistributionSpec, LabeledSample

__all__ = [
    "Message",
    "Quantizer",
    "TableQuantizer",
    "FunctionQuantizer",
    "GroupAssignment",
    "make_group_partition",
    "encode_group",
    "decode_group",
    "label_only_quantizer",
    "uniform_quantizer",
    "stochastic_quantizer_from_table",
    "group_encoder_quantizer",
    "load_channel_csv",
    "save_channel_csv",
]

_ROW_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class Message:
    """A k-bit message: an integer in [0, 2^k)."""

    m: int
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("bit budget k must be >= 1")
        if not 0 <= self.m < (1 << self.k):
            raise ValueError(f"message {self.m} does not fit in {self.k} bits")


def _label_index(y: int) -> int:
    if y == -1:
        return 0
    if y == 1:
        return 1
    raise ValueError(f"label must be -1 or +1, got {y!r}")


class Quantizer:
    """Channel from labeled samples to k-bit messages.

    Subclasses implement ``channel_row(x, y)``, the length-2^k probability
    vector of messages given the input.  ``sample_message`` draws a message
    from that row; for deterministic encoders the row is one-hot.
    """

    def __init__(self, k: int, mode: str):
        if k < 1:
            raise ValueError("bit budget k must be >= 1")
        if mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown mode {mode!r}")
        self.k = int(k)
        self.mode = mode

    @property
    def n_messages(self) -> int:
        return 1 << self.k

    def channel_row(self, x, y: int) -> np.ndarray:
        raise NotImplementedError

    def sample_message(self, x, y: int, rng: np.random.Generator) -> Message:
        row = self.channel_row(x, y)
        if self.mode == "deterministic":
            m = int(np.argmax(row))
        else:
            m = int(rng.choice(row.size, p=row))
        return Message(m, self.k)


class FunctionQuantizer(Quantizer):
    """Deterministic quantizer defined by an encoding function (x, y) -> m."""

    def __init__(self, k: int, encode: Callable[[np.ndarray, int], int]):
        super().__init__(k, "deterministic")
        self._encode = encode

    def encode(self, x, y: int) -> Message:
        return Message(int(self._encode(np.asarray(x, dtype=float), y)), self.k)

    def channel_row(self, x, y: int) -> np.ndarray:
        row = np.zeros(self.n_messages)
        row[self.encode(x, y).m] = 1.0
        return row


class TableQuantizer(Quantizer):
    """Stochastic channel given by an explicit table over a finite support.

    ``table[i, j, m]`` is P(M = m | x = support[i], y = (-1, +1)[j]).  Rows
    are accepted when they sum to 1 within 1e-9 and then normalized exactly,
    so the stored channel is a true probability table.
    """

    def __init__(self, support: np.ndarray, table: np.ndarray, k: int):
        super().__init__(k, "stochastic")
        support = np.atleast_2d(np.asarray(support, dtype=float))
        table = np.array(table, dtype=float)
        if table.shape != (support.shape[0], 2, self.n_messages):
            raise ValueError(
                f"table shape {table.shape} does not match "
                f"({support.shape[0]}, 2, {self.n_messages})"
            )
        for i in range(support.shape[0]):
            for j, y in enumerate((-1, 1)):
                row = table[i, j]
                if np.any(row < 0):
                    raise ValueError(
                        f"negative channel probability at x index {i}, y={y}"
                    )
                total = float(row.sum())
                if abs(total - 1.0) > _ROW_TOL:
                    raise ValueError(
                        f"channel row at x index {i}, y={y} sums to "
                        f"{total!r}, expected 1 within {_ROW_TOL}"
                    )
                if abs(total - 1.0) > 1e-12:
                    table[i, j] = row / total
        self.support = support
        self.table = table
        self._index = {self._key(x): i for i, x in enumerate(support)}

    @staticmethod
    def _key(x: np.ndarray) -> bytes:
        return np.ascontiguousarray(np.asarray(x, dtype=float)).tobytes()

    def channel_row(self, x, y: int) -> np.ndarray:
        key = self._key(x)
        if key not in self._index:
            raise ValueError("feature vector is not in the quantizer's support")
        return self.table[self._index[key], _label_index(y)]


# ---------------------------------------------------------------------------
# Group-partition scheme.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupAssignment:
    """Partition of the coordinates into groups plus sample routing.

    ``groups`` lists 0-based coordinate indices; group sizes are at most
    k - 1 so one message can carry a group's coordinates and the label.
    Sample i is routed to group (i mod n_groups), so group loads differ by
    at most one.
    """

    d: int
    k: int
    groups: tuple[tuple[int, ...], ...]
    n_samples: int

    def __post_init__(self):
        seen: set[int] = set()
        for group in self.groups:
            if len(group) > self.k - 1:
                raise ValueError(f"group {group} exceeds size k-1 = {self.k - 1}")
            seen.update(group)
        if seen != set(range(self.d)):
            raise ValueError("groups must partition the coordinate set exactly")
        if sum(len(g) for g in self.groups) != self.d:
            raise ValueError("groups overlap")

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def group_of_sample(self, sample_index: int) -> int:
        if sample_index < 0:
            raise ValueError("sample index must be nonnegative")
        return sample_index % self.n_groups

    def samples_of_group(self, group_id: int) -> list[int]:
        return list(range(group_id, self.n_samples, self.n_groups))

    def group_load(self, group_id: int) -> int:
        m = self.n_groups
        return (self.n_samples - group_id - 1) // m + 1 if group_id < self.n_samples else 0


def make_group_partition(d: int, k: int, n: int) -> GroupAssignment:
    """Split {0,...,d-1} into ceil(d/(k-1)) consecutive groups of size <= k-1.

    When (k-1) | d every group has exactly k-1 coordinates; otherwise the
    last group is smaller.  Samples are assigned round-robin by index.
    """
    if k < 2:
        raise ValueError("k must be >= 2: one bit carries the label, the rest a group")
    if d < 1:
        raise ValueError("d must be >= 1")
    if n < 0:
        raise ValueError("n must be nonnegative")
    size = k - 1
    groups = tuple(
        tuple(range(start, min(start + size, d))) for start in range(0, d, size)
    )
    return GroupAssignment(d=d, k=k, groups=groups, n_samples=n)


def encode_group(sample, assignment: GroupAssignment, sample_index: int) -> Message:
    """Pack the sample's group coordinates and label into one k-bit message.

    Bit layout (fixed): bit 0 holds (y+1)/2; bits 1..g hold (x_j+1)/2 for the
    group's coordinates in ascending index order; higher bits are zero.
    """
    if isinstance(sample, LabeledSample):
        x, y = sample.x, sample.y
    else:
        x, y = sample
        x = np.asarray(x, dtype=float)
    if x.shape != (assignment.d,):
        raise ValueError(f"sample has shape {x.shape}, expected ({assignment.d},)")
    group = assignment.groups[assignment.group_of_sample(sample_index)]
    m = _label_index(y)
    for bit, j in enumerate(group, start=1):
        v = x[j]
        if v == 1.0:
            m |= 1 << bit
        elif v != -1.0:
            raise ValueError(
                f"coordinate {j} is {v!r}; the group encoder needs +/-1 features"
            )
    return Message(m, assignment.k)


def decode_group(msg: Message, assignment: GroupAssignment,
                 group_id: int) -> tuple[np.ndarray, int]:
    """Invert :func:`encode_group`: recover (group coordinate values, label)."""
    if not 0 <= group_id < assignment.n_groups:
        raise ValueError(f"group id {group_id} out of range")
    group = assignment.groups[group_id]
    if msg.k != assignment.k:
        raise ValueError(f"message carries k={msg.k}, assignment has k={assignment.k}")
    if msg.m >> (len(group) + 1):
        raise ValueError(
            f"message {msg.m} sets bits beyond the {len(group)} group coordinates"
        )
    y = 1 if msg.m & 1 else -1
    values = np.array([1.0 if (msg.m >> bit) & 1 else -1.0
                       for bit in range(1, len(group) + 1)])
    return values, y


def group_encoder_quantizer(assignment: GroupAssignment, group_id: int) -> FunctionQuantizer:
    """The deterministic channel used by machines assigned to one group."""
    if not 0 <= group_id < assignment.n_groups:
        raise ValueError(f"group id {group_id} out of range")
    group = assignment.groups[group_id]

    def encode(x: np.ndarray, y: int) -> int:
        m = _label_index(y)
        for bit, j in enumerate(group, start=1):
            if x[j] == 1.0:
                m |= 1 << bit
            elif x[j] != -1.0:
                raise ValueError(
                    f"coordinate {j} is {x[j]!r}; the group encoder needs +/-1 features"
                )
        return m

    return FunctionQuantizer(assignment.k, encode)


# ---------------------------------------------------------------------------
# Baseline channels.
# ---------------------------------------------------------------------------


def label_only_quantizer(k: int = 1) -> FunctionQuantizer:
    """Transmit only the label: m = (y+1)/2, features discarded."""
    return FunctionQuantizer(k, lambda x, y: _label_index(y))


def uniform_quantizer(dist: DistributionSpec, k: int) -> TableQuantizer:
    """Channel with q_m = 2^-k everywhere: messages carry no information."""
    points, _ = dist.support()
    n_msg = 1 << k
    table = np.full((points.shape[0], 2, n_msg), 1.0 / n_msg)
    return TableQuantizer(points, table, k)


def stochastic_quantizer_from_table(support, table, k: int) -> TableQuantizer:
    """Validate an explicit channel table and wrap it as a quantizer."""
    return TableQuantizer(np.asarray(support, dtype=float),
                          np.asarray(table, dtype=float), k)


# ---------------------------------------------------------------------------
# Channel table CSV interchange (columns: x-index, y, m, probability).
# ---------------------------------------------------------------------------


def save_channel_csv(quantizer: TableQuantizer, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x-index", "y", "m", "probability"])
        for i in range(quantizer.support.shape[0]):
            for j, y in enumerate((-1, 1)):
                for m in range(quantizer.n_messages):
                    writer.writerow([i, y, m, repr(float(quantizer.table[i, j, m]))])


def load_channel_csv(path, support, k: int) -> TableQuantizer:
    """Read a channel table; the x-index column refers to rows of ``support``."""
    support = np.atleast_2d(np.asarray(support, dtype=float))
    table = np.zeros((support.shape[0], 2, 1 << k))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            i = int(row["x-index"])
            j = _label_index(int(row["y"]))
            m = int(row["m"])
            table[i, j, m] = float(row["probability"])
    return TableQuantizer(support, table, k)

"""Dataset ingestion, synthetic generation, and deterministic splits.

CSV is the single on-disk format: ``edges.csv`` with header ``src,dst`` and
``nodes.csv`` with header ``id,s,y,f1,...,fF``. Labels may be empty
(unlabeled, stored as 0 internally); the sensitive attribute may not.
Floats are written in the shortest round-trip decimal form, so
save-then-load reproduces a dataset bit-exactly.

All randomness flows through numpy's PCG64 generator seeded by
``SeedSequence``. The synthetic generator uses ``SeedSequence(seed,
spawn_key=(attempt,))`` per connectivity retry and draws, in fixed order,
the edge uniforms (full n x n square, upper triangle used), the label
uniforms (n), and the feature normals (n x F); this pins the generated
bytes across runs and across implementations that follow the same recipe.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, DomainError, EmptyCell, EmptyGroup, FairfiltError,
                     GenerationFailure, NonBinarySensitive, ParseError)
from .graph import Graph, _freeze, build_graph


@dataclass(frozen=True)
class SignalSet:
    """Node-aligned signals: sensitive attribute, labels, features.

    ``y`` is 0 where the label is missing; ``y_mask`` exposes the observed
    entries.
    """

    s: np.ndarray
    y: np.ndarray
    features: np.ndarray

    @property
    def y_mask(self) -> np.ndarray:
        return self.y != 0

    @property
    def n(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True)
class Dataset:
    """A graph with its signals and a provenance descriptor."""

    graph: Graph
    signals: SignalSet
    provenance: str


def _make_signals(n: int, s, y, features) -> SignalSet:
    s = np.asarray(s, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    features = np.asarray(features, dtype=np.float64)
    if s.shape != (n,) or y.shape != (n,):
        raise DimensionMismatch("signal lengths must equal the node count")
    if features.ndim != 2 or features.shape[0] != n:
        raise DimensionMismatch(f"features shape {features.shape} incompatible with n={n}")
    if not np.all(np.isin(s, (-1, 1))):
        raise DomainError("sensitive attribute entries must be -1 or 1")
    if not (np.any(s == 1) and np.any(s == -1)):
        raise EmptyGroup("sensitive attribute has a single group")
    if not np.all(np.isin(y, (-1, 0, 1))):
        raise DomainError("labels must be -1, 1, or 0 (missing)")
    return SignalSet(s=_freeze(s), y=_freeze(y), features=_freeze(features))


def load_dataset(edges_path, nodes_path) -> Dataset:
    """Load a dataset from an edge CSV and a node CSV.

    Node ids must be the contiguous range 0..n-1 (any row order); the
    resulting arrays are ordered by id.
    """
    edges = []
    with open(edges_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["src", "dst"]:
            raise ParseError(edges_path, 1, "expected header 'src,dst'")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(edges_path, line_no, f"expected 2 columns, got {len(row)}")
            try:
                edges.append((int(row[0]), int(row[1])))
            except ValueError:
                raise ParseError(edges_path, line_no, f"non-integer endpoint in {row!r}")

    rows = {}
    n_features = None
    with open(nodes_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["id", "s", "y"]:
            raise ParseError(nodes_path, 1, "expected header starting 'id,s,y'")
        feature_names = [h.strip() for h in header[3:]]
        expected = [f"f{k}" for k in range(1, len(feature_names) + 1)]
        if feature_names != expected:
            raise ParseError(nodes_path, 1,
                             f"feature columns must be f1..f{len(feature_names)}")
        n_features = len(feature_names)
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3 + n_features:
                raise ParseError(nodes_path, line_no,
                                 f"expected {3 + n_features} columns, got {len(row)}")
            try:
                node = int(row[0])
            except ValueError:
                raise ParseError(nodes_path, line_no, f"non-integer id {row[0]!r}")
            if node in rows:
                raise ParseError(nodes_path, line_no, f"duplicate id {node}")
            try:
                s_val = int(row[1])
            except ValueError:
                raise ParseError(nodes_path, line_no, f"non-integer s {row[1]!r}")
            if s_val not in (-1, 1):
                raise NonBinarySensitive(nodes_path, line_no, s_val)
            y_text = row[2].strip()
            if y_text == "":
                y_val = 0
            else:
                try:
                    y_val = int(y_text)
                except ValueError:
                    raise ParseError(nodes_path, line_no, f"non-integer y {row[2]!r}")
                if y_val not in (-1, 1):
                    raise ParseError(nodes_path, line_no, f"label must be -1, 1 or empty")
            try:
                feats = [float(x) for x in row[3:]]
            except ValueError:
                raise ParseError(nodes_path, line_no, "non-numeric feature value")
            rows[node] = (s_val, y_val, feats)

    n = len(rows)
    if n == 0:
        raise ParseError(nodes_path, 2, "no node rows")
    if sorted(rows) != list(range(n)):
        raise ParseError(nodes_path, 1, "node ids must be contiguous 0..n-1")

    s = np.array([rows[i][0] for i in range(n)], dtype=np.int64)
    y = np.array([rows[i][1] for i in range(n)], dtype=np.int64)
    features = np.array([rows[i][2] for i in range(n)], dtype=np.float64).reshape(n, n_features)
    graph = build_graph(edges, n)
    return Dataset(graph=graph, signals=_make_signals(n, s, y, features),
                   provenance=f"csv:{nodes_path}")


def save_dataset(dataset: Dataset, edges_path, nodes_path) -> None:
    """Write a dataset back to the two-CSV format, round-trip exact."""
    with open(edges_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for i, j in dataset.graph.edges:
            writer.writerow([i, j])
    signals = dataset.signals
    n_features = signals.features.shape[1]
    with open(nodes_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "s", "y"] + [f"f{k}" for k in range(1, n_features + 1)])
        for node in range(signals.n):
            y_val = signals.y[node]
            writer.writerow(
                [node, int(signals.s[node]), "" if y_val == 0 else int(y_val)]
                + [repr(float(x)) for x in signals.features[node]])


@dataclass(frozen=True)
class SbmSpec:
    """Two-block homophilic benchmark generator parameters.

    ``label_align`` is the probability that a node's label equals its
    group's latent label; ``feature_snr`` is the class-mean separation over
    the unit noise scale.
    """

    size_neg: int
    size_pos: int
    p_intra: float
    p_inter: float
    label_align: float = 0.8
    n_features: int = 4
    feature_snr: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.size_neg < 2 or self.size_pos < 2:
            raise DomainError("group sizes must be >= 2")
        for name in ("p_intra", "p_inter", "label_align"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if self.n_features < 1:
            raise DomainError("need at least one feature")
        if self.feature_snr < 0.0:
            raise DomainError("feature_snr must be nonnegative")


def _is_connected(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    reached = np.zeros(n, dtype=bool)
    frontier = np.zeros(n, dtype=bool)
    frontier[0] = True
    while frontier.any():
        reached |= frontier
        frontier = (adjacency[frontier].any(axis=0)) & ~reached
    return bool(reached.all())


def generate_sbm(spec: SbmSpec) -> Dataset:
    """Generate a connected two-block graph with aligned labels and features.

    Group membership defines the sensitive attribute (first block -1,
    second +1). Retries up to 10 reseeded attempts when the sampled graph
    is disconnected or has isolated nodes, then raises GenerationFailure.
    """
    n = spec.size_neg + spec.size_pos
    s = np.concatenate([np.full(spec.size_neg, -1, dtype=np.int64),
                        np.full(spec.size_pos, 1, dtype=np.int64)])
    same = np.equal.outer(s, s)
    prob = np.where(same, spec.p_intra, spec.p_inter)

    last_reason = "unknown"
    for attempt in range(10):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=spec.seed, spawn_key=(attempt,))))
        uniforms = rng.random((n, n))
        upper = np.triu(uniforms < prob, k=1)
        src, dst = np.nonzero(upper)
        flips = rng.random(n) >= spec.label_align
        y = np.where(flips, -s, s).astype(np.int64)
        features = (y[:, None] * (spec.feature_snr / 2.0)
                    + rng.standard_normal((n, spec.n_features)))
        try:
            graph = build_graph(list(zip(src.tolist(), dst.tolist())), n)
        except FairfiltError as exc:
            last_reason = str(exc)
            continue
        if not _is_connected(graph.adjacency):
            last_reason = "graph disconnected"
            continue
        signals = _make_signals(n, s, y, features)
        return Dataset(graph=graph, signals=signals,
                       provenance=f"sbm:seed={spec.seed},attempt={attempt}")
    raise GenerationFailure(f"no valid graph after 10 attempts (last: {last_reason})")


def _allocate(count: int, fractions) -> list[int]:
    """Largest-remainder allocation of ``count`` items over the fractions."""
    raw = [f * count for f in fractions]
    base = [int(np.floor(r)) for r in raw]
    short = count - sum(base)
    order = sorted(range(len(fractions)), key=lambda k: raw[k] - base[k], reverse=True)
    for k in order[:short]:
        base[k] += 1
    return base


def split(dataset: Dataset, fractions, seed: int, stratify: bool = False):
    """Deterministic (train, val, test) index split.

    With ``stratify`` the split is computed per (s, y) cell and every
    nonempty cell sends at least one node to train; EmptyCell is raised if
    a nonzero-fraction part would end up entirely empty.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise DomainError("need three nonnegative fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DomainError(f"fractions must sum to 1, got {sum(fractions)}")
    n = dataset.graph.n
    rng = np.random.default_rng(seed)

    if not stratify:
        perm = rng.permutation(n)
        sizes = _allocate(n, fractions)
        cut1, cut2 = sizes[0], sizes[0] + sizes[1]
        return (np.sort(perm[:cut1]), np.sort(perm[cut1:cut2]), np.sort(perm[cut2:]))

    signals = dataset.signals
    parts: list[list[int]] = [[], [], []]
    keys = sorted({(int(sv), int(yv)) for sv, yv in zip(signals.s, signals.y)})
    train_fraction = fractions[0]
    for key in keys:
        members = np.nonzero((signals.s == key[0]) & (signals.y == key[1]))[0]
        members = members[rng.permutation(members.shape[0])]
        sizes = _allocate(members.shape[0], fractions)
        if train_fraction > 0.0 and sizes[0] == 0:
            donor = int(np.argmax(sizes))
            sizes[donor] -= 1
            sizes[0] += 1
        cursor = 0
        for part, size in zip(parts, sizes):
            part.extend(members[cursor:cursor + size].tolist())
            cursor += size
    for part, fraction in zip(parts, fractions):
        if fraction > 0.0 and not part:
            raise EmptyCell(f"no nodes left for a fraction-{fraction} part")
    return tuple(np.sort(np.asarray(part, dtype=np.int64)) for part in parts)

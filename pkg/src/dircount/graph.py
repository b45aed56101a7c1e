"""Directed graphs, deterministic labellings and their path languages.

A graph is stored with dense integer ids: vertices ``0..|Q|-1`` and edges
``0..|A|-1`` in document order, which also fixes the coordinate order of
occurrence vectors. Names are kept only for reporting.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

Word = tuple[int, ...]


class GraphError(ValueError):
    """Raised for malformed or structurally invalid graphs."""


@dataclass(frozen=True)
class DirectedGraph:
    source: tuple[int, ...]
    goal: tuple[int, ...]
    vertex_names: tuple[str, ...]
    edge_names: tuple[str, ...] = ()

    def __post_init__(self):
        nq, na = len(self.vertex_names), len(self.source)
        if nq < 1:
            raise GraphError("graph needs at least one vertex")
        if na < 1:
            raise GraphError("graph needs at least one edge")
        if len(self.goal) != na:
            raise GraphError("source and goal maps have different lengths")
        for a, (s, t) in enumerate(zip(self.source, self.goal)):
            if not (0 <= s < nq and 0 <= t < nq):
                raise GraphError(f"edge {a} has an endpoint outside 0..{nq - 1}")
        if not self.edge_names:
            object.__setattr__(self, "edge_names", tuple(f"a{i + 1}" for i in range(na)))
        elif len(self.edge_names) != na:
            raise GraphError("edge name table has the wrong length")

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Sequence[tuple[int, int]]) -> "DirectedGraph":
        return cls(
            source=tuple(int(s) for s, _ in edges),
            goal=tuple(int(t) for _, t in edges),
            vertex_names=tuple(f"q{i + 1}" for i in range(num_vertices)),
        )

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_names)

    @property
    def num_edges(self) -> int:
        return len(self.source)

    @cached_property
    def out_edges(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for a, s in enumerate(self.source):
            out[s].append(a)
        return tuple(tuple(v) for v in out)

    def adjacency(self) -> np.ndarray:
        """Integer matrix M[q, q'] = number of edges q -> q'."""
        m = np.zeros((self.num_vertices, self.num_vertices), dtype=np.int64)
        for s, t in zip(self.source, self.goal):
            m[s, t] += 1
        return m

    def vertex_id(self, key: str | int) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.num_vertices:
                raise GraphError(f"no vertex with id {key}")
            return int(key)
        if key in self.vertex_names:
            return self.vertex_names.index(key)
        if key.isdigit() and int(key) < self.num_vertices:
            return int(key)
        raise GraphError(f"unknown vertex {key!r}")


@dataclass(frozen=True)
class LabelledGraph:
    """A graph with a deterministic (right-resolving) surjective labelling."""

    base: DirectedGraph
    labels: tuple[str, ...]
    labelling: tuple[int, ...]

    def __post_init__(self):
        if len(self.labelling) != self.base.num_edges:
            raise GraphError("labelling must assign one label per edge")
        nb = len(self.labels)
        if any(not 0 <= b < nb for b in self.labelling):
            raise GraphError("label id out of range")
        if set(self.labelling) != set(range(nb)):
            raise GraphError("labelling is not surjective")
        for q, out in enumerate(self.base.out_edges):
            seen: dict[int, int] = {}
            for a in out:
                b = self.labelling[a]
                if b in seen:
                    raise GraphError(
                        f"nondeterministic labelling: edges {self.base.edge_names[seen[b]]} and "
                        f"{self.base.edge_names[a]} leave {self.base.vertex_names[q]} "
                        f"with label {self.labels[b]}"
                    )
                seen[b] = a

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def projection(self) -> np.ndarray:
        """Matrix of pi: E -> F, shape (|B|, |A|), entries 0/1."""
        m = np.zeros((self.num_labels, self.base.num_edges), dtype=np.int64)
        for a, b in enumerate(self.labelling):
            m[b, a] = 1
        return m


@dataclass(frozen=True)
class PeriodData:
    """Period p and the phase class of each vertex in Z/pZ."""

    p: int
    phase: tuple[int, ...]

    def classes(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.p)]
        for q, j in enumerate(self.phase):
            out[j].append(q)
        return out

    def reachable_class(self, q: int, n: int) -> np.ndarray:
        """Indicator of Q_n^q: vertices reachable from q by lengths = n mod p."""
        target = (self.phase[q] + n) % self.p
        return np.array([float(j == target) for j in self.phase])


# --- parsing -----------------------------------------------------------------

def parse_graph(document: str | bytes | dict[str, Any]) -> DirectedGraph | LabelledGraph:
    """Build a graph from the JSON graph format.

    ``{"vertices": ["q1", ...], "edges": [{"id": "a1", "from": "q1", "to": "q1",
    "label": "b1"}, ...]}``. Labels must be present on all edges or on none.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise GraphError(f"malformed graph document: {exc}") from exc
    if not isinstance(document, dict):
        raise GraphError("graph document must be a JSON object")
    vertices = document.get("vertices")
    edges = document.get("edges")
    if not isinstance(vertices, list) or not isinstance(edges, list):
        raise GraphError("graph document needs 'vertices' and 'edges' lists")
    names = [str(v) for v in vertices]
    if len(set(names)) != len(names):
        raise GraphError("duplicate vertex names")
    index = {v: i for i, v in enumerate(names)}

    def endpoint(e: dict[str, Any], key: str) -> int:
        if key not in e:
            raise GraphError(f"edge {e.get('id', '?')} lacks '{key}'")
        v = e[key]
        if isinstance(v, bool):
            raise GraphError(f"bad vertex reference {v!r}")
        if isinstance(v, int):
            if not 0 <= v < len(names):
                raise GraphError(f"edge {e.get('id', '?')} references missing vertex id {v}")
            return v
        if str(v) not in index:
            raise GraphError(f"edge {e.get('id', '?')} references unknown vertex {v!r}")
        return index[str(v)]

    src, dst, edge_names, labels = [], [], [], []
    for k, e in enumerate(edges):
        if not isinstance(e, dict):
            raise GraphError("each edge must be an object")
        src.append(endpoint(e, "from"))
        dst.append(endpoint(e, "to"))
        edge_names.append(str(e.get("id", f"a{k + 1}")))
        labels.append(e.get("label"))
    if len(set(edge_names)) != len(edge_names):
        raise GraphError("duplicate edge ids")
    base = DirectedGraph(tuple(src), tuple(dst), tuple(names), tuple(edge_names))
    present = [lab is not None for lab in labels]
    if not any(present):
        return base
    if not all(present):
        raise GraphError("labels must be given on every edge or on none")
    label_names: list[str] = []
    for lab in labels:
        if str(lab) not in label_names:
            label_names.append(str(lab))
    return LabelledGraph(base, tuple(label_names), tuple(label_names.index(str(x)) for x in labels))


def load_graph(path: str | Path) -> DirectedGraph | LabelledGraph:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise GraphError(f"cannot read graph file {path}: {exc}") from exc
    return parse_graph(text)


def graph_to_dict(g: DirectedGraph | LabelledGraph) -> dict[str, Any]:
    base = g.base if isinstance(g, LabelledGraph) else g
    edges = []
    for a in range(base.num_edges):
        e = {
            "id": base.edge_names[a],
            "from": base.vertex_names[base.source[a]],
            "to": base.vertex_names[base.goal[a]],
        }
        if isinstance(g, LabelledGraph):
            e["label"] = g.labels[g.labelling[a]]
        edges.append(e)
    return {"vertices": list(base.vertex_names), "edges": edges}


def base_graph(g: DirectedGraph | LabelledGraph) -> DirectedGraph:
    return g.base if isinstance(g, LabelledGraph) else g


# --- structure -----------------------------------------------------------------

def _reachable(g: DirectedGraph, start: int, reverse: bool = False) -> set[int]:
    succ: list[list[int]] = [[] for _ in range(g.num_vertices)]
    for s, t in zip(g.source, g.goal):
        if reverse:
            succ[t].append(s)
        else:
            succ[s].append(t)
    seen = {start}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def unreachable_pair(g: DirectedGraph) -> tuple[int, int] | None:
    """Some ordered pair (q, q') with no path q -> q', or None."""
    fwd = _reachable(g, 0)
    for q in range(g.num_vertices):
        if q not in fwd:
            return (0, q)
    back = _reachable(g, 0, reverse=True)
    for q in range(g.num_vertices):
        if q not in back:
            return (q, 0)
    return None


def is_connected(g: DirectedGraph) -> bool:
    """Strong connectivity: every vertex reaches every other vertex."""
    return unreachable_pair(g) is None


def require_connected(g: DirectedGraph) -> None:
    pair = unreachable_pair(g)
    if pair is not None:
        q, qq = pair
        raise GraphError(
            f"graph is not strongly connected: no path from "
            f"{g.vertex_names[q]} to {g.vertex_names[qq]}"
        )


def compute_period(g: DirectedGraph) -> PeriodData:
    """Period and phase map via BFS potentials.

    Tree edges get potential difference 1; p is the gcd of the discrepancies
    on the remaining edges, and phases are potentials mod p.
    """
    require_connected(g)
    pot = [-1] * g.num_vertices
    pot[0] = 0
    todo = deque([0])
    while todo:
        v = todo.popleft()
        for a in g.out_edges[v]:
            w = g.goal[a]
            if pot[w] < 0:
                pot[w] = pot[v] + 1
                todo.append(w)
    p = 0
    for s, t in zip(g.source, g.goal):
        p = math.gcd(p, abs(pot[s] + 1 - pot[t]))
    return PeriodData(p=p, phase=tuple(x % p for x in pot))


def is_cyclic(g: DirectedGraph) -> bool:
    """Every vertex has out-degree exactly one."""
    return all(len(out) == 1 for out in g.out_edges)


# --- words -------------------------------------------------------------------

def _reach_table(g: DirectedGraph, n: int, target: int) -> list[list[bool]]:
    # can[k][v]: some path of length exactly k from v ends at target
    can = [[v == target for v in range(g.num_vertices)]]
    for _ in range(n):
        prev = can[-1]
        can.append([any(prev[g.goal[a]] for a in g.out_edges[v]) for v in range(g.num_vertices)])
    return can


def enumerate_paths(g: DirectedGraph, n: int, q: int, q_prime: int,
                    first_edges: Sequence[int] | None = None) -> Iterator[Word]:
    """Yield every path of length n from q to q_prime, lexicographically.

    Branches that cannot reach q_prime in the remaining number of steps are
    cut using a precomputed reachability table. ``first_edges`` restricts the
    first step (used to split the work).
    """
    if n < 0:
        raise ValueError("length must be nonnegative")
    if n == 0:
        if q == q_prime:
            yield ()
        return
    can = _reach_table(g, n, q_prime)
    if not can[n][q]:
        return
    starts = g.out_edges[q] if first_edges is None else [a for a in g.out_edges[q] if a in set(first_edges)]
    path: list[int] = []
    stack: list[Iterator[int]] = [iter(starts)]
    while stack:
        depth = len(path)
        remaining = n - depth - 1
        for a in stack[-1]:
            if can[remaining][g.goal[a]]:
                path.append(a)
                if remaining == 0:
                    yield tuple(path)
                    path.pop()
                    continue
                stack.append(iter(g.out_edges[g.goal[a]]))
                break
        else:
            stack.pop()
            if path:
                path.pop()


def is_admissible(w: Sequence[int], g: DirectedGraph) -> bool:
    if any(not 0 <= a < g.num_edges for a in w):
        return False
    return all(g.goal[a] == g.source[b] for a, b in zip(w, w[1:]))


def occurrence(w: Sequence[int], g: DirectedGraph) -> tuple[int, ...]:
    """Occurrence vector: how many times each edge appears in w."""
    if not is_admissible(w, g):
        raise GraphError(f"word {tuple(w)} is not a path in the graph")
    counts = [0] * g.num_edges
    for a in w:
        counts[a] += 1
    return tuple(counts)


def project_word(w: Sequence[int], lg: LabelledGraph) -> tuple[int, ...]:
    """Label sequence of a path."""
    return tuple(lg.labelling[a] for a in w)


def path_count_matrix(g: DirectedGraph, n: int) -> list[list[int]]:
    """Exact |W_n^{q,q'}| as Python ints (entries of M^n)."""
    m = g.adjacency().tolist()
    k = g.num_vertices
    out = [[int(i == j) for j in range(k)] for i in range(k)]
    for _ in range(n):
        out = [[sum(out[i][l] * m[l][j] for l in range(k)) for j in range(k)] for i in range(k)]
    return out


def full_shift(k: int) -> DirectedGraph:
    """One vertex with k loops."""
    return DirectedGraph(
        source=(0,) * k, goal=(0,) * k, vertex_names=("q",),
        edge_names=tuple(f"a{i + 1}" for i in range(k)),
    )


def cycle(p: int) -> DirectedGraph:
    """Directed p-cycle."""
    return DirectedGraph.from_edges(p, [(i, (i + 1) % p) for i in range(p)])


@dataclass(frozen=True)
class EdgeSubgraph:
    """A strongly connected piece of a graph, with ids into the parent."""

    graph: DirectedGraph
    vertices: tuple[int, ...]
    edges: tuple[int, ...]


def edge_components(g: DirectedGraph, edges: Sequence[int]) -> tuple[list[EdgeSubgraph], list[int]]:
    """Strongly connected components of the subgraph spanned by ``edges``.

    Returns the components that carry at least one edge, and the edges that
    join two different components (empty when ``edges`` is the support of a
    circulation).
    """
    edges = sorted(set(edges))
    succ: dict[int, set[int]] = {}
    pred: dict[int, set[int]] = {}
    for a in edges:
        succ.setdefault(g.source[a], set()).add(g.goal[a])
        pred.setdefault(g.goal[a], set()).add(g.source[a])

    def reach(start: int, nbrs: dict[int, set[int]]) -> set[int]:
        seen, todo = {start}, [start]
        while todo:
            for w in nbrs.get(todo.pop(), ()):
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen

    comp_of: dict[int, int] = {}
    members: list[list[int]] = []
    for v in sorted(set(succ) | set(pred)):
        if v in comp_of:
            continue
        scc = sorted(reach(v, succ) & reach(v, pred))
        for w in scc:
            comp_of[w] = len(members)
        members.append(scc)
    inner: list[list[int]] = [[] for _ in members]
    crossing = []
    for a in edges:
        cs, ct = comp_of[g.source[a]], comp_of[g.goal[a]]
        if cs == ct:
            inner[cs].append(a)
        else:
            crossing.append(a)
    out = []
    for verts, comp_edges in zip(members, inner):
        if not comp_edges:
            continue
        local = {v: i for i, v in enumerate(verts)}
        sub = DirectedGraph(
            source=tuple(local[g.source[a]] for a in comp_edges),
            goal=tuple(local[g.goal[a]] for a in comp_edges),
            vertex_names=tuple(g.vertex_names[v] for v in verts),
            edge_names=tuple(g.edge_names[a] for a in comp_edges),
        )
        out.append(EdgeSubgraph(graph=sub, vertices=tuple(verts), edges=tuple(comp_edges)))
    return out, crossing


def restrict_labels(lg: LabelledGraph, piece: EdgeSubgraph) -> tuple[LabelledGraph, tuple[int, ...]]:
    """Labelled graph on a piece, with labels renumbered; also returns the
    parent label id of each new label."""
    used = sorted({lg.labelling[a] for a in piece.edges})
    local = {b: i for i, b in enumerate(used)}
    sub = LabelledGraph(
        base=piece.graph,
        labels=tuple(lg.labels[b] for b in used),
        labelling=tuple(local[lg.labelling[a]] for a in piece.edges),
    )
    return sub, tuple(used)

"""Peer graph, gradient measurements and error-free spanning-tree averaging."""
from collections import deque

from common import *
from errors import ErrorModel, draw_error, draw_errors
from exceptions import DisconnectedGraphError, InputError
from objective import Objective, Problem

Edge = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected connected peer graph with a deterministic BFS spanning tree."""

    N: int
    edges: frozenset
    neighbor_sets: Tuple[frozenset, ...]
    tree_edges: frozenset
    tree_neighbor_sets: Tuple[frozenset, ...]
    is_complete: bool
    tree_order: Tuple[int, ...] = field(repr=False)
    tree_parent: Tuple[int, ...] = field(repr=False)
    adjacency: NDArray[np.bool_] = field(repr=False)

    def has_edge(self, i: int, j: int) -> bool:
        """True when peers i and j are neighbors."""
        return bool(self.adjacency[i, j])

    @property
    def indcomp_messages(self) -> int:
        """Vector messages sent in one gradient-exchange round."""
        return 2 * len(self.edges)

    @property
    def intsync_messages(self) -> int:
        """Vector messages sent by one tree averaging (reduce then broadcast)."""
        return 2 * (self.N - 1)


def _normalize(N: int, edges: Iterable[Sequence[int]]) -> frozenset:
    normalized = set()
    for edge in edges:
        i, j = int(edge[0]), int(edge[1])
        if not (0 <= i < N and 0 <= j < N):
            raise InputError(f"edge ({i}, {j}) has an endpoint outside 0..{N - 1}")
        if i == j:
            raise InputError(f"self-loop at node {i} is not allowed")
        normalized.add((min(i, j), max(i, j)))
    return frozenset(normalized)


def build_topology(N: int, edges: Optional[Iterable[Sequence[int]]] = None) -> Topology:
    """Validate a graph and compute its spanning tree.

    ``edges=None`` builds the complete graph. The tree comes from a BFS rooted
    at node 0 that visits neighbors in ascending index order.
    """
    if N < 2:
        raise InputError(f"a peer network needs at least 2 nodes, got {N}")
    if edges is None:
        edges = [(i, j) for i in range(N) for j in range(i + 1, N)]
    edge_set = _normalize(N, edges)

    neighbors: List[set] = [set() for _ in range(N)]
    for i, j in edge_set:
        neighbors[i].add(j)
        neighbors[j].add(i)

    parent = [-1] * N
    seen = [False] * N
    seen[0] = True
    order: List[int] = []
    queue = deque([0])
    while queue:
        node = queue.popleft()
        order.append(node)
        for nxt in sorted(neighbors[node]):
            if not seen[nxt]:
                seen[nxt] = True
                parent[nxt] = node
                queue.append(nxt)

    unreachable = [i for i in range(N) if not seen[i]]
    if unreachable:
        raise DisconnectedGraphError(unreachable)

    tree_edges = frozenset((min(i, p), max(i, p)) for i, p in enumerate(parent) if p >= 0)
    tree_neighbors: List[set] = [set() for _ in range(N)]
    for i, j in tree_edges:
        tree_neighbors[i].add(j)
        tree_neighbors[j].add(i)

    adjacency = np.zeros((N, N), dtype=bool)
    for i, j in edge_set:
        adjacency[i, j] = adjacency[j, i] = True
    adjacency.setflags(write=False)

    return Topology(
        N=N,
        edges=edge_set,
        neighbor_sets=tuple(frozenset(s) for s in neighbors),
        tree_edges=tree_edges,
        tree_neighbor_sets=tuple(frozenset(s) for s in tree_neighbors),
        is_complete=len(edge_set) == N * (N - 1) // 2,
        tree_order=tuple(order),
        tree_parent=tuple(parent),
        adjacency=adjacency,
    )


def ring_edges(N: int) -> List[Edge]:
    """Edges of the cycle 0-1-...-(N-1)-0."""
    return [(i, (i + 1) % N) for i in range(N)] if N > 2 else [(0, 1)]


def path_edges(N: int) -> List[Edge]:
    """Edges of the path 0-1-...-(N-1)."""
    return [(i, i + 1) for i in range(N - 1)]


def load_edge_list(path: Path) -> List[Edge]:
    """Read ``i j`` pairs (0-based), one per line; ``#`` starts a comment."""
    edges: List[Edge] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise InputError(f"{path}:{lineno}: node indices must be integers") from None
    return edges


def resolve_topology(name: str, N: int) -> Topology:
    """Build a topology from ``complete``, ``ring``, ``path`` or an edge-list file."""
    name = name.strip()
    if name == "complete":
        return build_topology(N)
    if name == "ring":
        return build_topology(N, ring_edges(N))
    if name == "path":
        return build_topology(N, path_edges(N))
    return build_topology(N, load_edge_list(Path(name)))


def measure(
    topology: Topology,
    problem: Problem,
    model: ErrorModel,
    receiver: int,
    source: int,
    x_source: Vector,
    k: int,
    trial: int,
) -> Vector:
    """Gradient measurement h_ij that ``receiver`` holds for ``source``.

    A peer knows its own gradient exactly; a neighbor's gradient arrives with
    a bounded error; a non-neighbor contributes nothing.
    """
    x_source = np.asarray(x_source, dtype=np.float64)
    if x_source.shape != (problem.n,):
        raise InputError(f"x_source has shape {x_source.shape}, expected ({problem.n},)")
    component: Objective = problem.components[source]
    grad = component.gradient(x_source)
    if receiver == source:
        return grad
    if not topology.has_edge(receiver, source):
        return np.zeros(problem.n)
    return grad + draw_error(model, receiver, source, k, trial, problem.n, value=grad)


def measure_all(
    topology: Topology,
    problem: Problem,
    model: ErrorModel,
    X: Matrix,
    k: int,
    trial: int,
) -> Tuple[Matrix, int]:
    """Summed measurements h_i = sum_j h_ij for every peer, plus the round's messages."""
    G = problem.component_gradients(X)
    E = draw_errors(model, k, trial, topology.N, problem.n, values=G, mask=topology.adjacency)
    weights = (topology.adjacency | np.eye(topology.N, dtype=bool)).astype(np.float64)
    H = (weights[:, :, None] * G[None, :, :]).sum(axis=1) + E.sum(axis=1)
    return H, topology.indcomp_messages


def tree_average(topology: Topology, values: Sequence[Vector]) -> Tuple[Vector, int]:
    """Exact mean of the peers' vectors via reduce-to-root and broadcast on the tree."""
    if len(values) != topology.N:
        raise InputError(f"expected {topology.N} vectors, got {len(values)}")
    stacked = [np.asarray(v, dtype=np.float64) for v in values]
    shape = stacked[0].shape
    if any(v.shape != shape for v in stacked):
        raise InputError("all vectors must share one dimension")

    sums = [v.copy() for v in stacked]
    counts = [1] * topology.N
    for node in reversed(topology.tree_order):
        parent = topology.tree_parent[node]
        if parent >= 0:
            sums[parent] += sums[node]
            counts[parent] += counts[node]
    root = topology.tree_order[0]
    mean = sums[root] / counts[root]
    return mean, topology.intsync_messages

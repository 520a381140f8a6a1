"""Peer objectives, aggregate constants and the exact optimum.

Each peer i holds f_i(x) = x^T A_i x + c_i^T x with A_i symmetric positive
definite; the network minimizes f = sum_i f_i.
"""
from common import *
from exceptions import InputError, InternalError
from keys import STREAM_INSTANCE, derive_key, keyed_generator

SYMMETRY_RTOL: float = 1e-12
PD_FLOOR: float = 1e-8
PD_SHIFT: float = 1e-6


class Objective(Protocol):
    """What a single peer objective exposes to a pairwise measurement.

    Only quadratic components ship. :class:`Problem` and the vectorized round
    in ``network.measure_all`` use the stacked quadratic matrices directly.
    """

    ell: float
    L: float

    def value(self, x: Vector) -> float: ...

    def gradient(self, x: Vector) -> Vector: ...


def _check_matrix(A: Matrix) -> Matrix:
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InputError(f"expected a non-empty square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise InputError("matrix is not symmetric")
    return A


def component_constants(A: Matrix) -> Tuple[float, float]:
    """Return (ell_i, L_i) = (2 lambda_min(A), 2 lambda_max(A))."""
    A = _check_matrix(A)
    eigenvalues = np.linalg.eigvalsh(A)
    if eigenvalues[0] <= 0.0:
        raise InputError(
            f"matrix is not positive definite (lambda_min = {eigenvalues[0]:.3e})"
        )
    return 2.0 * float(eigenvalues[0]), 2.0 * float(eigenvalues[-1])


@dataclass(frozen=True, eq=False)
class QuadraticComponent:
    """One peer objective f_i(x) = x^T A x + c^T x with constants ell_i, L_i."""

    A: Matrix
    c: Vector
    ell: float
    L: float

    @classmethod
    def from_matrix(cls, A: Matrix, c: Vector) -> "QuadraticComponent":
        """Validate A and compute its strong-convexity and smoothness constants."""
        A = _check_matrix(A)
        c = np.array(c, dtype=np.float64).reshape(-1)
        if c.shape[0] != A.shape[0]:
            raise InputError(f"c has length {c.shape[0]}, expected {A.shape[0]}")
        ell, L = component_constants(A)
        A.setflags(write=False)
        c.setflags(write=False)
        return cls(A=A, c=c, ell=ell, L=L)

    @property
    def n(self) -> int:
        """Dimension of the decision variable."""
        return int(self.A.shape[0])

    def calculus(self, x: Vector) -> Tuple[float, Vector]:
        """Value and gradient in one pass."""
        return component_calculus(self, x)

    def value(self, x: Vector) -> float:
        """f_i(x)."""
        return self.calculus(x)[0]

    def gradient(self, x: Vector) -> Vector:
        """grad f_i(x)."""
        return self.calculus(x)[1]


def component_calculus(comp: QuadraticComponent, x: Vector) -> Tuple[float, Vector]:
    """Evaluate (f_i(x), grad f_i(x)) = (x^T A x + c^T x, 2 A x + c)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (comp.n,):
        raise InputError(f"x has shape {x.shape}, expected ({comp.n},)")
    Ax = comp.A @ x
    return float(x @ Ax + comp.c @ x), 2.0 * Ax + comp.c


@dataclass(frozen=True, eq=False)
class Problem:
    """The N-component sum objective with aggregate constants and optimum."""

    components: Tuple[QuadraticComponent, ...]
    n: int
    N: int
    L: float
    ell: float
    x_star: Vector
    f_star: float
    A_stack: NDArray[np.float64] = field(repr=False)
    c_stack: Matrix = field(repr=False)
    A_sum: Matrix = field(repr=False)
    c_sum: Vector = field(repr=False)

    def value(self, x: Vector) -> float:
        """f(x) summed over the components."""
        return float(sum(comp.value(x) for comp in self.components))

    def component_gradients(self, X: Matrix) -> Matrix:
        """Row j is grad f_j evaluated at row j of X (the copy held by peer j)."""
        return 2.0 * np.einsum("jab,jb->ja", self.A_stack, X) + self.c_stack

    def gradient(self, x: Vector) -> Vector:
        """Gradient 2 (sum A) x + sum c of f at x."""
        return 2.0 * (self.A_sum @ np.asarray(x, dtype=np.float64)) + self.c_sum

    def full_gradients(self, X: Matrix) -> Matrix:
        """Row i is grad f evaluated at row i of X."""
        return 2.0 * (np.asarray(X, dtype=np.float64) @ self.A_sum) + self.c_sum

    def gap(self, x: Vector) -> float:
        """f(x) - f* computed as (x - x*)^T (sum A)(x - x*), free of cancellation."""
        d = np.asarray(x, dtype=np.float64) - self.x_star
        return float(d @ self.A_sum @ d)

    def gaps(self, X: Matrix) -> Vector:
        """Row-wise :meth:`gap` of a stack of copies."""
        D = np.asarray(X, dtype=np.float64) - self.x_star
        return np.einsum("ia,ab,ib->i", D, self.A_sum, D)


def problem_summary(components: Sequence[QuadraticComponent]) -> Problem:
    """Aggregate constants and solve (2 sum A_i) x = -sum c_i for the optimum."""
    components = tuple(components)
    if not components:
        raise InputError("a problem needs at least one component")
    n = components[0].n
    if any(comp.n != n for comp in components):
        raise InputError("all components must share the same dimension")

    A_stack = np.stack([comp.A for comp in components])
    c_stack = np.stack([comp.c for comp in components])
    A_sum = A_stack.sum(axis=0)
    c_sum = c_stack.sum(axis=0)
    try:
        x_star = np.linalg.solve(2.0 * A_sum, -c_sum)
    except np.linalg.LinAlgError as exc:
        raise InternalError(f"aggregate matrix is singular: {exc}") from exc

    f_star = float(x_star @ A_sum @ x_star + c_sum @ x_star)
    for array in (A_stack, c_stack, A_sum, c_sum, x_star):
        array.setflags(write=False)
    return Problem(
        components=components,
        n=n,
        N=len(components),
        L=float(sum(comp.L for comp in components)),
        ell=float(min(comp.ell for comp in components)),
        x_star=x_star,
        f_star=f_star,
        A_stack=A_stack,
        c_stack=c_stack,
        A_sum=A_sum,
        c_sum=c_sum,
    )


def random_instance(n: int, N: int, seed: int, rows: Optional[int] = None) -> Problem:
    """Draw A_i = B_i^T B_i and c_i with standard-normal entries.

    B_i is ``rows`` x n (square by default). A component whose smallest
    eigenvalue falls below 1e-8 is shifted by 1e-6 * I.
    """
    rows = n if rows is None else rows
    if n < 1 or N < 1 or rows < 1:
        raise InputError(f"invalid instance size n={n}, N={N}, rows={rows}")
    key = derive_key(seed, STREAM_INSTANCE)
    components = []
    for i in range(N):
        gen = keyed_generator(key, (0, i, 0, 0))
        B = gen.standard_normal((rows, n))
        c = gen.standard_normal(n)
        A = B.T @ B
        A = 0.5 * (A + A.T)
        if np.linalg.eigvalsh(A)[0] < PD_FLOOR:
            A = A + PD_SHIFT * np.eye(n)
        components.append(QuadraticComponent.from_matrix(A, c))
    return problem_summary(components)


def _fmt(values: Iterable[float]) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def dump_problem(problem: Problem, path: Path) -> None:
    """Write the problem as a line-oriented text snapshot."""
    lines = ["# igd-sync problem: n N, then per component n rows of A and one row c"]
    lines.append(f"{problem.n} {problem.N}")
    for comp in problem.components:
        lines.extend(_fmt(row) for row in comp.A)
        lines.append(_fmt(comp.c))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_problem(path: Path) -> Problem:
    """Read a snapshot written by :func:`dump_problem`."""
    rows = [
        line.split()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    try:
        n, N = int(rows[0][0]), int(rows[0][1])
        values = [[float(v) for v in row] for row in rows[1:]]
    except (IndexError, ValueError) as exc:
        raise InputError(f"malformed problem file {path}: {exc}") from exc
    if len(values) != N * (n + 1) or any(len(row) != n for row in values):
        raise InputError(f"problem file {path} does not match header n={n} N={N}")

    components = []
    for i in range(N):
        block = values[i * (n + 1) : (i + 1) * (n + 1)]
        components.append(QuadraticComponent.from_matrix(np.array(block[:n]), np.array(block[n])))
    return problem_summary(components)

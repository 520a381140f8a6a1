"""Bounded measurement errors on exchanged gradients.

Every error vector is a pure function of its key: ``(seed, trial, receiver,
source, k)``, or ``(seed, trial, source, k)`` when errors are shared by all
receivers of a source. The quantizer mode is deterministic and depends on the
transmitted value instead of the key.
"""
from common import *
from exceptions import InputError, InternalError
from keys import SHARED_SLOT, STREAM_MEASUREMENT, derive_key, keyed_generator

QUANTIZER_RTOL: float = 1e-12


class ErrorMode(Enum):
    """How the bounded errors are generated."""

    NONE = "none"
    BALL = "ball"
    SPHERE = "sphere"
    SHARED = "shared"
    QUANTIZER = "quant"

    @classmethod
    def parse(cls, name: str) -> "ErrorMode":
        """Accept the CLI short names and the long names."""
        aliases = {"shared_per_source": "shared", "quantizer": "quant"}
        key = aliases.get(name.strip().lower(), name.strip().lower())
        try:
            return cls(key)
        except ValueError:
            choices = "|".join(mode.value for mode in cls)
            raise InputError(f"unknown error mode {name!r}, expected {choices}") from None


@dataclass(frozen=True)
class ErrorModel:
    """Error generation mode, norm bound and base key."""

    mode: ErrorMode = ErrorMode.BALL
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.epsilon >= 0.0 or not math.isfinite(self.epsilon):
            raise InputError(f"epsilon must be a finite non-negative real, got {self.epsilon}")

    @property
    def is_silent(self) -> bool:
        """True when every error is exactly zero."""
        return self.mode is ErrorMode.NONE or self.epsilon == 0.0


def quantize(v: Vector, epsilon: float) -> Vector:
    """Round every coordinate to the nearest multiple of 2*eps/sqrt(n).

    Ties round away from zero. The per-coordinate error is at most half a grid
    step, so the error norm is at most eps.
    """
    if not epsilon > 0.0:
        raise InputError(f"quantizer needs epsilon > 0, got {epsilon}")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 1:
        raise InputError(f"quantizer expects a non-empty vector, got shape {v.shape}")
    step = 2.0 * epsilon / math.sqrt(v.shape[0])
    scaled = v / step
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5) * step
    excess = float(np.linalg.norm(rounded - v))
    if excess > epsilon * (1.0 + QUANTIZER_RTOL):
        raise InternalError(f"quantization error {excess!r} exceeds eps={epsilon!r}")
    return rounded


def _fit_within(vec: Vector, epsilon: float) -> Vector:
    """Shrink ``vec`` until its computed norm is at most epsilon."""
    norm = float(np.linalg.norm(vec))
    if norm <= epsilon:
        return vec
    vec = vec * (epsilon / norm)
    while float(np.linalg.norm(vec)) > epsilon:
        vec = vec * (1.0 - 2.0**-50)
    return vec


def pair_index(receiver: int, source: int) -> int:
    """Slot of the ordered pair in a round's error layout.

    Slots do not depend on the network size: the pairs among peers 0..N-1
    fill slots 0..N^2-1.
    """
    if receiver >= source:
        return receiver * receiver + receiver + source
    return source * source + receiver


def _round_vectors(model: ErrorModel, k: int, trial: int, count: int, n: int) -> Matrix:
    """The first ``count`` keyed error vectors of round k, in slot order.

    Directions and magnitudes come from two counter streams of the round, so a
    shorter draw is a prefix of a longer one.
    """
    key = derive_key(model.seed, STREAM_MEASUREMENT, trial)
    slot = SHARED_SLOT if model.mode is ErrorMode.SHARED else 0
    eps = model.epsilon
    directions = keyed_generator(key, (0, k, slot, 0)).standard_normal((count, n))
    if model.mode is ErrorMode.SPHERE:
        magnitudes = np.full(count, eps)
    else:
        magnitudes = eps * keyed_generator(key, (0, k, slot, 1)).random(count)
    norms = np.linalg.norm(directions, axis=1)
    degenerate = norms == 0.0
    vectors = directions * (magnitudes / np.where(degenerate, 1.0, norms))[:, None]
    vectors[degenerate] = 0.0
    for row in np.flatnonzero(np.linalg.norm(vectors, axis=1) > eps):
        vectors[row] = _fit_within(vectors[row], eps)
    return vectors


def _quantizer_error(value: Optional[Vector], epsilon: float) -> Vector:
    if value is None:
        raise InputError("quantizer errors need the transmitted value")
    value = np.asarray(value, dtype=np.float64)
    return _fit_within(quantize(value, epsilon) - value, epsilon)


def draw_error(
    model: ErrorModel,
    receiver: int,
    source: int,
    k: int,
    trial: int,
    n: int,
    value: Optional[Vector] = None,
) -> Vector:
    """Error added to grad f_source when ``receiver`` measures it at iteration k.

    ``value`` is the transmitted gradient and is only consulted by the
    quantizer, whose error is quantize(value) - value.
    """
    if receiver == source:
        raise InputError("errors are only defined between distinct peers")
    if k < 0:
        raise InputError(f"iteration index must be non-negative, got {k}")
    if model.is_silent:
        return np.zeros(n)
    if model.mode is ErrorMode.QUANTIZER:
        return _quantizer_error(value, model.epsilon)
    index = source if model.mode is ErrorMode.SHARED else pair_index(receiver, source)
    return _round_vectors(model, k, trial, index + 1, n)[index]


def draw_errors(
    model: ErrorModel,
    k: int,
    trial: int,
    N: int,
    n: int,
    values: Optional[Matrix] = None,
    mask: Optional[NDArray[np.bool_]] = None,
) -> NDArray[np.float64]:
    """All errors of one round as an (N, N, n) block indexed [receiver, source].

    Entries equal :func:`draw_error` exactly; the diagonal and the pairs
    outside ``mask`` are zero. In shared mode one vector per source is drawn
    and reused for every receiver.
    """
    if k < 0:
        raise InputError(f"iteration index must be non-negative, got {k}")
    block = np.zeros((N, N, n))
    if model.is_silent:
        return block
    if model.mode is ErrorMode.QUANTIZER:
        if values is None:
            raise InputError("quantizer errors need the transmitted values")
        for source in range(N):
            block[:, source] = _quantizer_error(values[source], model.epsilon)
    elif model.mode is ErrorMode.SHARED:
        block[:] = _round_vectors(model, k, trial, N, n)[None, :, :]
    else:
        receivers, sources = np.indices((N, N))
        slots = np.where(
            receivers >= sources,
            receivers * receivers + receivers + sources,
            sources * sources + receivers,
        )
        block[:] = _round_vectors(model, k, trial, N * N, n)[slots]
    block[np.arange(N), np.arange(N)] = 0.0
    if mask is not None:
        block[~np.asarray(mask, dtype=bool)] = 0.0
    return block

"""Pretty good measurement construction and Born-rule scoring.

Training states are grouped by class into quantum centroids (uniform
mixtures of the encoded pure states), optionally lifted to n tensor copies.
The pretty good measurement for the resulting ensemble is the family

    E_i = sigma^{-1/2} p_i rho_i sigma^{-1/2},

with sigma the prior-weighted mixture and the inverse square root taken in
the Moore-Penrose sense. Completing with the kernel projector split evenly
across classes, F_i = E_i + P_ker(sigma) / l, yields a true l-outcome POVM,
and a sample scores f_i = tr(F_i rho_x). Classification picks the smallest
index among the maximizing scores.

Two engines produce identical scores. The dense engine materialises the
F_i and is only viable while (d+1)^n stays small. The gram engine never
leaves the span of the m training states: with weights w_j = p_{label_j} /
m_{label_j} and G_{jk} = sqrt(w_j w_k) (psi_j . psi_k)^n, the overlap vector
v_j = sqrt(w_j) (psi_j . psi_x)^n gives

    f_i = sum_{j: label_j = i} (G^{-1/2} v)_j^2  +  (1/l) (1 - v^T G^+ v),

so the cost scales with m and d regardless of the copy count.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .encoding import EncodingConfig, NormalizerParams, encode, fit_encode
from .errors import (
    DimMismatch,
    EmptyClass,
    InvalidFeature,
    InvalidOperator,
    LabelOutOfRange,
)
from .operators import (
    DENSE_DIM_LIMIT,
    RANK_TOL,
    eig_sym,
    pinv_sqrt,
    symmetrize,
    tensor_power,
)

#: Scores are rounded to this many decimal digits before any argmax or tie
#: comparison, so near-ties resolve identically across platforms.
SCORE_DECIMALS = 12

#: Magnitudes below this are flushed to zero inside stable powers.
_POWER_FLUSH = 1e-300

PRIOR_MODES = ("uniform", "empirical", "explicit")


def stable_power(c, n: int) -> np.ndarray:
    """Elementwise ``c ** n`` computed as ``sign(c)^n * exp(n * log|c|)``.

    Avoids the intermediate overflow/underflow drift of repeated
    multiplication for large n; magnitudes below 1e-300 flush to zero.
    """
    if n < 1:
        raise ValueError(f"exponent must be a positive integer, got {n!r}")
    c = np.asarray(c, dtype=float)
    mag = np.abs(c)
    small = mag < _POWER_FLUSH
    out = np.exp(n * np.log(np.where(small, 1.0, mag)))
    if n % 2 == 1:
        out = out * np.sign(c)
    return np.where(small, 0.0, out)


def round_scores(f) -> np.ndarray:
    """Round scores to :data:`SCORE_DECIMALS` digits for reproducible ties."""
    return np.round(np.asarray(f, dtype=float), SCORE_DECIMALS)


def argmax_smallest(f) -> int:
    """Index of the largest rounded score, smallest index winning ties."""
    return int(np.argmax(round_scores(f)))


@dataclass(frozen=True, eq=False)
class LabeledStateSet:
    """Encoded training set: unit-norm state rows with integer class labels.

    Classes are indices ``0 .. n_classes - 1`` and every class must occur at
    least once. ``class_counts[i]`` is the number of training states with
    label i.
    """

    states: np.ndarray
    labels: np.ndarray
    n_classes: int
    class_counts: np.ndarray = field(init=False)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        labels = np.asarray(self.labels)
        if states.ndim != 2 or states.shape[0] < 1:
            raise InvalidOperator(f"expected a nonempty state matrix, got shape {states.shape}")
        if labels.shape != (states.shape[0],):
            raise DimMismatch(
                f"{states.shape[0]} states but label shape {labels.shape}"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            raise LabelOutOfRange(f"labels must be integers, got dtype {labels.dtype}")
        if self.n_classes < 1:
            raise LabelOutOfRange(f"need at least one class, got {self.n_classes}")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise LabelOutOfRange(
                f"labels must lie in [0, {self.n_classes}), "
                f"got range [{labels.min()}, {labels.max()}]"
            )
        norms = np.linalg.norm(states, axis=1)
        off = np.abs(norms - 1.0)
        if off.max() > 1e-10:
            bad = int(np.argmax(off))
            raise InvalidOperator(
                f"state {bad} has norm {norms[bad]!r}, expected 1 within 1e-10"
            )
        counts = np.bincount(labels, minlength=self.n_classes)
        missing = np.flatnonzero(counts == 0)
        if missing.size:
            raise EmptyClass(f"class {int(missing[0])} has no training states")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", labels.astype(np.int64))
        object.__setattr__(self, "class_counts", counts.astype(np.int64))

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True, eq=False)
class Priors:
    """Class prior distribution: strictly positive, sums to one."""

    mode: str
    values: np.ndarray

    def __post_init__(self):
        if self.mode not in PRIOR_MODES:
            raise InvalidOperator(f"unknown prior mode {self.mode!r}, expected one of {PRIOR_MODES}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InvalidOperator(f"priors must be a nonempty vector, got shape {values.shape}")
        if not np.all(values > 0.0):
            raise InvalidOperator("priors must be strictly positive")
        total = float(values.sum())
        if abs(total - 1.0) > 1e-12:
            raise InvalidOperator(f"priors must sum to 1 within 1e-12, got {total!r}")
        object.__setattr__(self, "values", values)


def uniform_priors(n_classes: int) -> Priors:
    """Equal prior 1/l for each of the l classes."""
    return Priors(mode="uniform", values=np.full(n_classes, 1.0 / n_classes))


def empirical_priors(class_counts) -> Priors:
    """Class-frequency priors m_i / m."""
    counts = np.asarray(class_counts, dtype=float)
    return Priors(mode="empirical", values=counts / counts.sum())


def explicit_priors(values) -> Priors:
    """User-supplied priors, validated for positivity and normalization."""
    return Priors(mode="explicit", values=np.asarray(values, dtype=float))


def make_priors(mode: str, train: LabeledStateSet) -> Priors:
    """Build priors of the requested mode from a training set."""
    if mode == "uniform":
        return uniform_priors(train.n_classes)
    if mode == "empirical":
        return empirical_priors(train.class_counts)
    raise InvalidOperator(f"prior mode {mode!r} needs explicit values")


@dataclass(frozen=True, eq=False)
class ClassEnsemble:
    """Per-class density operators with their priors and the copy count."""

    reps: np.ndarray
    priors: Priors
    copies: int


def quantum_centroid(states) -> np.ndarray:
    """Uniform mixture of pure states: ``(1/m) sum_j psi_j psi_j^T``.

    The result has unit trace and is PSD; it is generally mixed even though
    every input is pure.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[0] < 1:
        raise EmptyClass("a class centroid needs at least one state")
    return symmetrize(states.T @ states / states.shape[0])


def copies_centroid(states, n: int, dense_dim_limit: int = DENSE_DIM_LIMIT) -> np.ndarray:
    """Centroid of the n-copy lifts ``(1/m) sum_j (psi_j^{tensor n})(...)^T``.

    This is the mean of lifted pure states, which differs from the n-fold
    tensor power of the single-copy centroid as soon as the class is mixed.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[0] < 1:
        raise EmptyClass("a class centroid needs at least one state")
    if n == 1:
        return quantum_centroid(states)
    lifted = np.stack([tensor_power(row, n, dense_dim_limit) for row in states])
    return quantum_centroid(lifted)


def mixture(ensemble: ClassEnsemble) -> np.ndarray:
    """Prior-weighted average state ``sigma = sum_i p_i rho_i``."""
    reps = np.asarray(ensemble.reps, dtype=float)
    p = ensemble.priors.values
    if reps.ndim != 3 or reps.shape[0] != p.shape[0]:
        raise DimMismatch(
            f"{p.shape[0]} priors but representative array of shape {reps.shape}"
        )
    return symmetrize(np.einsum("i,iab->ab", p, reps))


def build_ensemble(
    train: LabeledStateSet,
    priors: Priors | None = None,
    copies: int = 1,
    dense_dim_limit: int = DENSE_DIM_LIMIT,
) -> ClassEnsemble:
    """Form the per-class (lifted) centroids and attach priors."""
    if priors is None:
        priors = uniform_priors(train.n_classes)
    if priors.values.shape[0] != train.n_classes:
        raise DimMismatch(
            f"{priors.values.shape[0]} priors for {train.n_classes} classes"
        )
    reps = np.stack(
        [
            copies_centroid(train.states[train.labels == i], copies, dense_dim_limit)
            for i in range(train.n_classes)
        ]
    )
    return ClassEnsemble(reps=reps, priors=priors, copies=copies)


@dataclass(frozen=True, eq=False)
class DensePgmModel:
    """Explicit POVM ``F_i`` acting on the n-copy space of dimension dim^n.

    ``dim`` is the single-copy state dimension; test states are lifted to
    n copies before scoring. ``encoding``/``normalizer`` are None for models
    fitted directly on states rather than on raw features.
    """

    povm: np.ndarray
    priors: Priors
    copies: int
    dim: int
    encoding: EncodingConfig | None = None
    normalizer: NormalizerParams | None = None

    engine = "dense"

    @property
    def n_classes(self) -> int:
        return self.povm.shape[0]


@dataclass(frozen=True, eq=False)
class GramPgmModel:
    """Measurement held in factored form over the m training states.

    ``M`` is the inverse square root and ``P`` the pseudoinverse of the
    weighted overlap matrix G, both restricted to its image; the kernel
    completion enters scoring through ``1 - v^T P v``.
    """

    train_states: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    n_classes: int
    priors: Priors
    copies: int
    M: np.ndarray
    P: np.ndarray
    encoding: EncodingConfig | None = None
    normalizer: NormalizerParams | None = None

    engine = "gram"

    @property
    def dim(self) -> int:
        return self.train_states.shape[1]


def build_dense_pgm(
    train: LabeledStateSet,
    priors: Priors | None = None,
    copies: int = 1,
    rank_tol: float = RANK_TOL,
    dense_dim_limit: int = DENSE_DIM_LIMIT,
) -> DensePgmModel:
    """Construct the POVM explicitly: ``F_i = S p_i rho_i S + P_ker / l``.

    ``S`` is the Moore-Penrose inverse square root of the mixture. The
    completeness defect ``sum_i F_i - I`` vanishes by construction because
    ``S sigma S`` is exactly the image projector.
    """
    ensemble = build_ensemble(train, priors, copies, dense_dim_limit)
    sigma = mixture(ensemble)
    dec = pinv_sqrt(sigma, rank_tol)
    s = dec.inv_sqrt
    l = train.n_classes
    povm = np.stack(
        [
            symmetrize(s @ (ensemble.priors.values[i] * ensemble.reps[i]) @ s) + dec.ker / l
            for i in range(l)
        ]
    )
    return DensePgmModel(
        povm=povm, priors=ensemble.priors, copies=copies, dim=train.dim
    )


def build_gram_pgm(
    train: LabeledStateSet,
    priors: Priors | None = None,
    copies: int = 1,
    rank_tol: float = RANK_TOL,
) -> GramPgmModel:
    """Construct the measurement in the span of the training states.

    Builds G_{jk} = sqrt(w_j w_k) (psi_j . psi_k)^n and derives both
    ``M = G^{-1/2}`` and ``P = G^+`` from one eigendecomposition so the
    score formula's projector and kernel terms stay mutually consistent.
    """
    if priors is None:
        priors = uniform_priors(train.n_classes)
    if priors.values.shape[0] != train.n_classes:
        raise DimMismatch(
            f"{priors.values.shape[0]} priors for {train.n_classes} classes"
        )
    if copies < 1:
        raise ValueError(f"copy count must be a positive integer, got {copies!r}")
    weights = priors.values[train.labels] / train.class_counts[train.labels]
    sqw = np.sqrt(weights)
    overlaps = train.states @ train.states.T
    gram = sqw[:, None] * stable_power(overlaps, copies) * sqw[None, :]
    dec = eig_sym(gram)
    w = np.clip(dec.eigenvalues, 0.0, None)
    keep = w > rank_tol * float(w[-1])
    vs = dec.eigenvectors[:, keep]
    m_mat = symmetrize((vs * w[keep] ** -0.5) @ vs.T)
    p_mat = symmetrize((vs * 1.0 / w[keep]) @ vs.T)
    return GramPgmModel(
        train_states=train.states,
        labels=train.labels,
        weights=weights,
        n_classes=train.n_classes,
        priors=priors,
        copies=copies,
        M=m_mat,
        P=p_mat,
    )


def attach_pipeline(model, config: EncodingConfig, params: NormalizerParams):
    """Return a copy of the model carrying the feature-to-state pipeline."""
    return replace(model, encoding=config, normalizer=params)


def score_states(model, states) -> np.ndarray:
    """Born-rule scores for already-encoded unit states, one row per sample.

    Returns an array of shape ``(k, n_classes)``; each row sums to one and
    is entrywise in [0, 1] up to round-off.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise DimMismatch(f"expected a 2-d state array, got shape {states.shape}")
    if states.shape[1] != model.dim:
        raise DimMismatch(
            f"state dimension {states.shape[1]} does not match model dimension {model.dim}"
        )
    if not np.all(np.isfinite(states)):
        raise InvalidFeature("state entries must be finite")
    if isinstance(model, DensePgmModel):
        if states.shape[0] == 0:
            return np.zeros((0, model.n_classes))
        lifted = np.stack([tensor_power(row, model.copies) for row in states])
        return np.einsum("ka,iab,kb->ki", lifted, model.povm, lifted)
    v = np.sqrt(model.weights)[:, None] * stable_power(
        model.train_states @ states.T, model.copies
    )
    u = model.M @ v
    scores = np.zeros((states.shape[0], model.n_classes))
    usq = u * u
    for i in range(model.n_classes):
        scores[:, i] = usq[model.labels == i].sum(axis=0)
    kernel_mass = 1.0 - np.sum(v * (model.P @ v), axis=0)
    return scores + kernel_mass[:, None] / model.n_classes


def _to_states(model, x_batch) -> np.ndarray:
    if model.encoding is None:
        return np.asarray(x_batch, dtype=float)
    return encode(x_batch, model.encoding, model.normalizer)


def score(model, x) -> np.ndarray:
    """Score one raw feature vector (or state, for pipeline-free models)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimMismatch(f"expected a single feature vector, got shape {x.shape}")
    return score_states(model, _to_states(model, x[None, :]))[0]


def classify(model, x) -> int:
    """Predicted class for one sample: smallest index among maximal scores."""
    return argmax_smallest(score(model, x))


def predict_batch(model, x_batch):
    """Classify a batch; returns ``(labels, scores)`` in input order."""
    x_batch = np.asarray(x_batch, dtype=float)
    if x_batch.ndim != 2:
        raise DimMismatch(f"expected a 2-d feature array, got shape {x_batch.shape}")
    if x_batch.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, model.n_classes))
    scores = score_states(model, _to_states(model, x_batch))
    labels = np.argmax(round_scores(scores), axis=1).astype(np.int64)
    return labels, scores


@dataclass(frozen=True)
class PgmConfig:
    """Everything needed to fit a classifier from raw features."""

    encoding: EncodingConfig = EncodingConfig()
    copies: int = 1
    prior_mode: str = "uniform"
    engine: str = "auto"
    rank_tol: float = RANK_TOL

    def __post_init__(self):
        if self.engine not in ("auto", "dense", "gram"):
            raise InvalidOperator(
                f"unknown engine {self.engine!r}, expected auto, dense or gram"
            )
        if self.prior_mode not in ("uniform", "empirical"):
            raise InvalidOperator(
                f"unknown prior mode {self.prior_mode!r}, expected uniform or empirical"
            )
        if not isinstance(self.copies, int) or self.copies < 1:
            raise ValueError(f"copy count must be a positive integer, got {self.copies!r}")


def fit_pgm(features, labels, n_classes: int, config: PgmConfig = PgmConfig()):
    """Fit the full pipeline on raw features and return a scoring model.

    Fits the normalizer on the given features, encodes them, builds the
    measurement with the configured engine (``auto`` picks dense only while
    the lifted dimension stays within the dense limit), and attaches the
    pipeline so that :func:`score` accepts raw feature vectors.
    """
    states, params = fit_encode(features, config.encoding)
    train = LabeledStateSet(states=states, labels=labels, n_classes=n_classes)
    priors = make_priors(config.prior_mode, train)
    engine = config.engine
    if engine == "auto":
        lifted_dim = float(train.dim) ** config.copies
        engine = "dense" if lifted_dim <= DENSE_DIM_LIMIT else "gram"
    if engine == "dense":
        model = build_dense_pgm(train, priors, config.copies, config.rank_tol)
    else:
        model = build_gram_pgm(train, priors, config.copies, config.rank_tol)
    return attach_pipeline(model, config.encoding, params)

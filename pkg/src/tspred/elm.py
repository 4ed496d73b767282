"""Extreme learning machine with per-neuron activation selection.

Hidden weights and biases come from outside (random draws or an
optimizer); only the output weights are fitted, by the minimal-norm
least-squares solve through the Moore-Penrose pseudoinverse.
"""

from dataclasses import dataclass

import numpy as np

from .features import apply_standardization

ACT_OFF = 0
ACT_SIGMOID = 1
ACT_LINEAR = 2


class ElmError(Exception):
    pass


class ShapeMismatchError(ElmError):
    pass


@dataclass(frozen=True)
class ElmArchitecture:
    """Hidden layer: L×n input weights, L biases, L activation codes."""

    input_weights: np.ndarray   # (L, n)
    biases: np.ndarray          # (L,)
    activations: np.ndarray     # (L,), codes in {0, 1, 2}

    def __post_init__(self):
        w = np.array(self.input_weights, dtype=float, ndmin=2)
        b = np.array(self.biases, dtype=float)
        cf = np.array(self.activations, dtype=int)
        if w.shape[0] != b.shape[0] or w.shape[0] != cf.shape[0]:
            raise ShapeMismatchError("inconsistent hidden-layer sizes")
        if not np.all(np.isin(cf, (ACT_OFF, ACT_SIGMOID, ACT_LINEAR))):
            raise ElmError("activation codes must be 0, 1 or 2")
        for arr in (w, b, cf):
            arr.setflags(write=False)
        object.__setattr__(self, "input_weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "activations", cf)

    @property
    def hidden_size(self):
        return int(self.biases.shape[0])

    @property
    def input_dim(self):
        return int(self.input_weights.shape[1])

    @property
    def effective_hidden_size(self):
        """Neurons with a non-zero activation code."""
        return int(np.count_nonzero(self.activations != ACT_OFF))


def activation(code, v):
    """Per-neuron activation: 0 → off, 1 → sigmoid, 2 → identity."""
    if code == ACT_OFF:
        return np.zeros_like(np.asarray(v, dtype=float))
    if code == ACT_SIGMOID:
        return _sigmoid(np.asarray(v, dtype=float))
    if code == ACT_LINEAR:
        return np.asarray(v, dtype=float)
    raise ElmError(f"unknown activation code {code}")


def _sigmoid(v):
    # piecewise form avoids overflow in exp for large |v|
    out = np.empty_like(v, dtype=float)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def hidden_matrix(arch, x):
    """N×L hidden-layer outputs for the sample matrix x (N×n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != arch.input_dim:
        raise ShapeMismatchError(
            f"input dim {x.shape[1]} != architecture dim {arch.input_dim}")
    pre = x @ arch.input_weights.T + arch.biases
    h = np.zeros_like(pre)
    cf = arch.activations
    sig = cf == ACT_SIGMOID
    lin = cf == ACT_LINEAR
    if np.any(sig):
        h[:, sig] = _sigmoid(pre[:, sig])
    if np.any(lin):
        h[:, lin] = pre[:, lin]
    return h


def pseudoinverse(h):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below 1e-12 · max(N, L) · s_max are treated as zero.
    """
    h = np.atleast_2d(np.asarray(h, dtype=float))
    u, s, vt = np.linalg.svd(h, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((h.shape[1], h.shape[0]))
    cutoff = 1e-12 * max(h.shape) * s[0]
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


@dataclass(frozen=True)
class ElmModel:
    """Trained classifier: architecture plus output weights.

    `feature_mask` echoes which columns of the full feature space the
    architecture consumes; `means`/`stds` carry the standardization
    statistics needed at inference time (None for pre-standardized use).
    """

    architecture: ElmArchitecture
    output_weights: np.ndarray      # (L,)
    feature_mask: np.ndarray = None  # (n_full,) booleans
    means: np.ndarray = None
    stds: np.ndarray = None

    def __post_init__(self):
        beta = np.array(self.output_weights, dtype=float)
        if beta.shape != (self.architecture.hidden_size,):
            raise ShapeMismatchError("output-weight length != hidden size")
        if not np.all(np.isfinite(beta)):
            raise ElmError("non-finite output weights")
        beta.setflags(write=False)
        object.__setattr__(self, "output_weights", beta)
        if self.feature_mask is not None:
            mask = np.array(self.feature_mask, dtype=bool)
            mask.setflags(write=False)
            object.__setattr__(self, "feature_mask", mask)


def train(arch, x, y):
    """Minimal-norm least-squares fit of the output weights: β = H†·y."""
    y = np.asarray(y, dtype=float)
    h = hidden_matrix(arch, x)
    if y.shape != (h.shape[0],):
        raise ShapeMismatchError("target length != sample count")
    beta = pseudoinverse(h) @ y
    return ElmModel(architecture=arch, output_weights=beta)


def predict_score(model, x):
    """Raw decision score(s); the sign is the class, the value ranks."""
    h = hidden_matrix(model.architecture, x)
    scores = h @ model.output_weights
    return scores if np.ndim(x) == 2 else float(scores[0])


def predict_label(model, x):
    """+1 when the score is >= 0 (tie at exactly 0 counts stable)."""
    scores = np.atleast_1d(predict_score(model, x))
    labels = np.where(scores >= 0.0, 1, -1)
    return labels if np.ndim(x) == 2 else int(labels[0])


def predict_full(model, x_full):
    """Score raw full-dimension rows: standardize, mask, then score."""
    x_full = np.atleast_2d(np.asarray(x_full, dtype=float))
    if model.feature_mask is None:
        raise ElmError("model carries no feature mask")
    if x_full.shape[1] != model.feature_mask.shape[0]:
        raise ShapeMismatchError(
            f"expected {model.feature_mask.shape[0]} features, "
            f"got {x_full.shape[1]}")
    if model.means is not None:
        x_full = apply_standardization(x_full, model.means, model.stds)
    return predict_score(model, x_full[:, model.feature_mask])


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _vector_line(name, values):
    return name + " " + " ".join(repr(float(v)) for v in values)


def save_model(model, path):
    arch = model.architecture
    lines = [
        f"hidden {arch.hidden_size}",
        f"input_dim {arch.input_dim}",
        _vector_line("biases", arch.biases),
        "activations " + " ".join(str(int(c)) for c in arch.activations),
        _vector_line("beta", model.output_weights),
    ]
    for i in range(arch.hidden_size):
        lines.append(_vector_line("w", arch.input_weights[i]))
    if model.feature_mask is not None:
        lines.append("mask " + " ".join(
            "1" if m else "0" for m in model.feature_mask))
    if model.means is not None:
        lines.append(_vector_line("means", model.means))
        lines.append(_vector_line("stds", model.stds))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    fields = {"w": []}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            tokens = ln.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "w":
                fields["w"].append([float(v) for v in tokens[1:]])
            else:
                fields[tokens[0]] = tokens[1:]
    try:
        arch = ElmArchitecture(
            input_weights=np.array(fields["w"], dtype=float),
            biases=np.array([float(v) for v in fields["biases"]]),
            activations=np.array([int(v) for v in fields["activations"]]))
        mask = None
        if "mask" in fields:
            mask = np.array([v == "1" for v in fields["mask"]])
        means = stds = None
        if "means" in fields:
            means = np.array([float(v) for v in fields["means"]])
            stds = np.array([float(v) for v in fields["stds"]])
        return ElmModel(
            architecture=arch,
            output_weights=np.array([float(v) for v in fields["beta"]]),
            feature_mask=mask, means=means, stds=stds)
    except (KeyError, ValueError) as exc:
        raise ElmError(f"malformed model file {path}: {exc}") from exc

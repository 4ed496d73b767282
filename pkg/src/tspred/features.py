"""Feature extraction, labeling, and knowledge-base assembly.

A sample is a 9-instant synchrophasor window taken at 60 samples/s from
the fault-clearing instant, combining per-generator dynamic quantities in
the center-of-inertia (COI) frame with prefault static quantities. Labels
follow the sign of 360° minus the largest pairwise rotor-angle excursion.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

STABLE = 1
UNSTABLE = -1

WINDOW_SAMPLES = 9
WINDOW_RATE_HZ = 60.0
INSTABILITY_THRESHOLD_DEG = 360.0

_CONSTANT_SIGMA = 1e-12


class FeatureError(Exception):
    """Base class for knowledge-base failures."""


class WindowOutOfRangeError(FeatureError):
    """Trajectory ends before the measurement window does."""


class DegenerateDatasetError(FeatureError):
    """Not enough samples (or classes) for the requested operation."""


def label_trajectory(trajectory):
    """+1 (stable) iff the largest pairwise angle gap stays below 360°.

    A gap of exactly 360° counts as unstable; conservative for a
    protection trigger.
    """
    gaps = np.ptp(trajectory.delta_deg, axis=1)
    return STABLE if float(np.max(gaps)) < INSTABILITY_THRESHOLD_DEG \
        else UNSTABLE


def feature_dimension(n_generators):
    """9·(4G + 2) window features plus 2G prefault statics."""
    return WINDOW_SAMPLES * (4 * n_generators + 2) + 2 * n_generators


def feature_names(n_generators):
    names = []
    for k in range(WINDOW_SAMPLES):
        for i in range(n_generators):
            names += [
                f"w{k}_g{i}_angle_coi",
                f"w{k}_g{i}_speed_coi",
                f"w{k}_g{i}_acc_power",
                f"w{k}_g{i}_kinetic",
            ]
        names += [f"w{k}_max_angle_gap", f"w{k}_coi_speed"]
    for i in range(n_generators):
        names += [f"static_g{i}_pm", f"static_g{i}_angle0_coi"]
    return names


def extract_features(trajectory):
    """Feature vector for one trajectory (see feature_names for layout).

    Window instants are t_clear + k/60 for k = 0..8, mapped to the
    integration grid by nearest-point selection.
    """
    f0 = trajectory.f0
    t_clear = trajectory.scenario.clearing_time(f0)
    dt = trajectory.time[1] - trajectory.time[0]
    t_end = trajectory.time[-1]
    window_end = t_clear + (WINDOW_SAMPLES - 1) / WINDOW_RATE_HZ
    if window_end > t_end + dt / 2:
        raise WindowOutOfRangeError(
            f"trajectory ends at {t_end:.4f}s, window needs "
            f"{window_end:.4f}s")

    h = trajectory.inertia
    total_h = h.sum()
    omega0 = 2.0 * np.pi * f0

    idx0 = int(round(t_clear / dt))
    values = []
    for k in range(WINDOW_SAMPLES):
        idx = min(int(round((t_clear + k / WINDOW_RATE_HZ) / dt)),
                  len(trajectory.time) - 1)
        delta = trajectory.delta_deg[idx]
        speed = trajectory.speed_dev[idx]
        coi_angle = float(h @ delta) / total_h
        coi_speed = float(h @ speed) / total_h
        acc = trajectory.pm - trajectory.pe[idx]
        kinetic = h * speed ** 2 / omega0
        for i in range(trajectory.n_generators):
            values += [delta[i] - coi_angle, speed[i] - coi_speed,
                       acc[i], kinetic[i]]
        values += [float(np.ptp(delta)), coi_speed]

    delta0 = trajectory.delta_deg[0]
    coi0 = float(h @ delta0) / total_h
    for i in range(trajectory.n_generators):
        values += [trajectory.pm[i], delta0[i] - coi0]

    vec = np.array(values)
    if not np.all(np.isfinite(vec)):
        raise FeatureError("non-finite feature value")
    return vec


@dataclass(frozen=True)
class KnowledgeBase:
    """Labeled feature matrix plus standardization state and provenance."""

    samples: np.ndarray        # (N, n)
    labels: np.ndarray         # (N,), values in {+1, -1}
    names: list
    seed: int
    provenance: str = ""
    means: np.ndarray = None   # set once standardized
    stds: np.ndarray = None
    constant_features: tuple = ()

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        labels = np.array(self.labels, dtype=int)
        if samples.shape[0] != labels.shape[0]:
            raise FeatureError("sample/label count mismatch")
        if samples.shape[1] != len(self.names):
            raise FeatureError("feature-name count mismatch")
        if not np.all(np.isin(labels, (STABLE, UNSTABLE))):
            raise FeatureError("labels must be +1 or -1")
        samples.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self):
        return int(self.samples.shape[0])

    @property
    def n_features(self):
        return int(self.samples.shape[1])

    @property
    def standardized(self):
        return self.means is not None


def standardize(kb, train_indices=None):
    """Z-score each feature; statistics from the training rows only.

    Uses the sample standard deviation (N−1 divisor). Columns whose
    training standard deviation is below 1e-12 are mapped to all zeros
    and reported in `constant_features`.
    """
    if kb.n_samples < 2:
        raise DegenerateDatasetError("need at least 2 samples")
    rows = np.arange(kb.n_samples) if train_indices is None \
        else np.asarray(train_indices)
    train = kb.samples[rows]
    means = train.mean(axis=0)
    stds = train.std(axis=0, ddof=1)
    constant = stds < _CONSTANT_SIGMA
    safe = np.where(constant, 1.0, stds)
    z = (kb.samples - means) / safe
    z[:, constant] = 0.0
    return replace(
        kb, samples=z, means=means, stds=stds,
        constant_features=tuple(kb.names[j]
                                for j in np.nonzero(constant)[0]))


def apply_standardization(x, means, stds):
    """Standardize raw rows with stored statistics (inference path)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    constant = stds < _CONSTANT_SIGMA
    safe = np.where(constant, 1.0, stds)
    z = (x - means) / safe
    z[:, constant] = 0.0
    return z


@dataclass(frozen=True)
class SplitIndex:
    train: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "train", _frozen_int(self.train))
        object.__setattr__(self, "test", _frozen_int(self.test))


def _frozen_int(arr):
    out = np.array(arr, dtype=int)
    out.setflags(write=False)
    return out


def split_train_test(kb, train_fraction, seed):
    """Stratified random train/test split, reproducible from the seed."""
    if not 0 < train_fraction < 1:
        raise ValueError("train fraction must be in (0, 1)")
    n = kb.n_samples
    n_train = int(round(train_fraction * n))
    rng = np.random.default_rng(seed)
    classes = [np.nonzero(kb.labels == c)[0] for c in (STABLE, UNSTABLE)]
    counts = [len(c) for c in classes]
    if min(counts) == 0:
        raise DegenerateDatasetError("both classes must be present")
    if min(counts) >= 2 and not 2 <= n_train <= n - 2:
        raise DegenerateDatasetError("split leaves one side empty")
    # proportional allocation, largest remainder makes the total exact
    quotas = [train_fraction * c for c in counts]
    takes = [int(q) for q in quotas]
    remainders = sorted(range(2), key=lambda i: quotas[i] - takes[i],
                        reverse=True)
    for i in remainders:
        if sum(takes) >= n_train:
            break
        takes[i] += 1
    for i, c in enumerate(counts):
        if c >= 2:
            takes[i] = min(max(takes[i], 1), c - 1)
    train_parts, test_parts = [], []
    for cls_idx, take in zip(classes, takes):
        perm = rng.permutation(cls_idx)
        train_parts.append(perm[:take])
        test_parts.append(perm[take:])
    return SplitIndex(train=np.sort(np.concatenate(train_parts)),
                      test=np.sort(np.concatenate(test_parts)),
                      seed=seed)


def kfold_partition(labels, k, seed):
    """K disjoint folds, stratified by label, sizes differing by ≤ 1."""
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise ValueError("need k >= 2 folds")
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} samples")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    cursor = 0
    for c in (STABLE, UNSTABLE):
        members = np.nonzero(labels == c)[0]
        for idx in rng.permutation(members):
            folds[cursor % k].append(int(idx))
            cursor += 1
    return [np.array(sorted(f), dtype=int) for f in folds]


def build_knowledge_base(trajectories, n_generators, seed, provenance=""):
    """Assemble raw (unstandardized) samples from simulated trajectories."""
    names = feature_names(n_generators)
    rows, labels = [], []
    for traj in trajectories:
        if traj.n_generators != n_generators:
            raise FeatureError("trajectory generator count mismatch")
        rows.append(extract_features(traj))
        labels.append(label_trajectory(traj))
    kb = KnowledgeBase(samples=np.array(rows), labels=np.array(labels),
                       names=names, seed=seed, provenance=provenance)
    if len(set(kb.labels.tolist())) < 2:
        raise DegenerateDatasetError(
            "knowledge base contains a single class")
    return kb


# ---------------------------------------------------------------------------
# CSV + sidecar persistence
# ---------------------------------------------------------------------------

def save_knowledge_base(kb, csv_path, sidecar_path):
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f_{j}" for j in range(kb.n_features)])
        for label, row in zip(kb.labels, kb.samples):
            writer.writerow([f"{label:+d}"] + [repr(float(v)) for v in row])
    lines = [f"seed {kb.seed}",
             f"standardized {'true' if kb.standardized else 'false'}",
             f"provenance {kb.provenance}"]
    if kb.constant_features:
        lines.append("constant_features " + ",".join(kb.constant_features))
    for j, name in enumerate(kb.names):
        mean = repr(float(kb.means[j])) if kb.standardized else "-"
        std = repr(float(kb.stds[j])) if kb.standardized else "-"
        lines.append(f"feature {j} {name} {mean} {std}")
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_knowledge_base(csv_path, sidecar_path):
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "label":
            raise FeatureError(f"{csv_path}: bad header")
        labels, rows = [], []
        for rec in reader:
            labels.append(int(rec[0]))
            rows.append([float(v) for v in rec[1:]])
    seed = 0
    provenance = ""
    standardized = False
    constant = ()
    names = [None] * (len(header) - 1)
    means = np.full(len(names), np.nan)
    stds = np.full(len(names), np.nan)
    with open(sidecar_path, encoding="utf-8") as fh:
        for ln in fh:
            tokens = ln.strip().split(None, 1)
            if not tokens:
                continue
            key = tokens[0]
            rest = tokens[1] if len(tokens) > 1 else ""
            if key == "seed":
                seed = int(rest)
            elif key == "standardized":
                standardized = rest.strip() == "true"
            elif key == "provenance":
                provenance = rest
            elif key == "constant_features":
                constant = tuple(rest.split(","))
            elif key == "feature":
                j, name, mean, std = rest.split()
                j = int(j)
                names[j] = name
                if mean != "-":
                    means[j] = float(mean)
                    stds[j] = float(std)
    kb = KnowledgeBase(
        samples=np.array(rows), labels=np.array(labels), names=names,
        seed=seed, provenance=provenance,
        means=means if standardized else None,
        stds=stds if standardized else None,
        constant_features=constant)
    return kb

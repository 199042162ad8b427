"""Sequence datasets: container types, the on-disk format, and a planted
synthetic generator.

A sequence is a d x n matrix whose columns are time-ordered feature vectors.
Columns have unit Euclidean norm and non-negative entries (the feature space
of ReLU-activated encoders); all sequences of a dataset share d. Containers
are immutable after construction and safe to share between threads.

On disk a dataset is a directory holding ``manifest.json`` with fields
``dim``, ``num_classes``, ``normalize`` and ``sequences`` (a list of
``{id, label, file}``), plus one CSV per sequence with n rows of d
comma-separated values (row t = frame t, no header).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError

UNIT_NORM_TOL = 1e-9


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureSequence:
    """One ordered sequence: a (d, n) feature matrix, class label, and id."""

    features: np.ndarray
    label: int
    id: str = ""

    def __post_init__(self):
        feats = _readonly(self.features)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a d x n matrix with d, n >= 1")
        if not np.isfinite(feats).all():
            raise ValueError("non-finite values in feature matrix")
        if (feats < 0).any():
            raise ValueError("feature entries must be non-negative")
        norms = np.linalg.norm(feats, axis=0)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise ValueError("feature columns must have unit Euclidean norm")
        if int(self.label) < 0:
            raise ValueError("label must be a non-negative integer")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label", int(self.label))

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def length(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class Dataset:
    """A labelled collection of sequences sharing the feature dimension."""

    sequences: tuple[FeatureSequence, ...]
    num_classes: int
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for seq in self.sequences:
            if seq.dim != self.dim:
                raise ValueError(
                    f"dimension mismatch: sequence {seq.id!r} has d={seq.dim}, "
                    f"dataset has d={self.dim}"
                )
            if seq.label >= self.num_classes:
                raise ValueError(
                    f"label {seq.label} out of range for {self.num_classes} classes"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)


def sequence_mean(seq: FeatureSequence) -> np.ndarray:
    """Column average of the sequence, (1/n) * sum_t x_t."""
    return seq.features.mean(axis=1)


# ---------------------------------------------------------------------------
# disk format
# ---------------------------------------------------------------------------

def save_matrix_csv(path, a: np.ndarray) -> None:
    """Row-major CSV, no header, full float64 round-trip precision."""
    np.savetxt(path, np.atleast_2d(np.asarray(a, dtype=float)),
               delimiter=",", fmt="%.17g")


def load_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def load_dataset(path) -> Dataset:
    """Load a dataset directory (or a manifest file directly).

    With ``normalize`` true in the manifest, columns are rescaled to unit
    norm at load time; otherwise unnormalized columns are rejected.
    Raises ``ValueError`` on dimension mismatches, out-of-range labels,
    negative or non-finite values, and ``OSError`` on missing files.
    """
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("dim", "num_classes", "normalize", "sequences"):
        if key not in manifest:
            raise ValueError(f"manifest missing required field {key!r}")
    dim = int(manifest["dim"])
    normalize = bool(manifest["normalize"])
    base = manifest_path.parent
    sequences = []
    for entry in manifest["sequences"]:
        raw = load_matrix_csv(base / entry["file"])  # (n, d)
        feats = raw.T
        if not np.isfinite(feats).all():
            raise ValueError(f"non-finite values in sequence {entry['id']!r}")
        if feats.shape[0] != dim:
            raise ValueError(
                f"dimension mismatch: sequence {entry['id']!r} has "
                f"d={feats.shape[0]}, manifest says d={dim}"
            )
        if normalize:
            norms = np.linalg.norm(feats, axis=0)
            if (norms == 0).any():
                raise ValueError(
                    f"cannot normalize zero column in sequence {entry['id']!r}"
                )
            feats = feats / norms
        sequences.append(
            FeatureSequence(feats, label=int(entry["label"]), id=str(entry["id"]))
        )
    return Dataset(tuple(sequences), int(manifest["num_classes"]), dim)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset directory that ``load_dataset`` reads back exactly
    (per-entry error below 1e-12; in practice bit-identical)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, seq in enumerate(dataset.sequences):
        fname = f"seq_{i:05d}.csv"
        save_matrix_csv(path / fname, seq.features.T)
        entries.append({"id": seq.id, "label": seq.label, "file": fname})
    manifest = {
        "dim": dataset.dim,
        "num_classes": dataset.num_classes,
        "normalize": False,
        "sequences": entries,
    }
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the planted-sequence generator.

    ``snr`` interpolates between pure noise (0) and pure planted signal (1).
    Each class owns a ``signal_dim``-dimensional non-negative orthonormal
    basis (disjoint coordinate supports, so the ReLU is transparent); the
    planted coefficient ramps from ``coeff_start`` to ``coeff_end`` across
    frames, so the fraction of each frame's energy inside the class
    subspace grows with t. Noise is a per-sequence static clutter vector
    (shared distractor directions plus a dense floor over all coordinates,
    class-independent) mixed with per-frame jitter.
    """

    dim: int
    signal_dim: int
    num_classes: int
    sequences_per_class: int
    frames_per_sequence: int
    snr: float
    coeff_start: float = 0.06
    coeff_end: float = 0.5
    coeff_shape: float = 1.0  # <1 concave ramp (fast early growth), >1 convex
    background_weight: float = 0.85
    distractor_weight: float = 0.5
    alias_weight: float = 3.0
    alias_spikes: int = 3  # signal coordinates hit per sequence; 0 = all
    clutter_floor: float = 0.4
    num_distractors: int = 2
    # temporally-evolving clutter: the noise magnitude decays across the
    # sequence (class-independently), so only the planted direction carries
    # a *growing* energy trend
    noise_ramp_start: float = 1.15
    noise_ramp_end: float = 0.85


def make_synthetic(cfg: SyntheticConfig, seed) -> Dataset:
    """Deterministic planted dataset; a pure function of (cfg, seed)."""
    if cfg.signal_dim > cfg.dim:
        raise ValueError("signal_dim (planted dimension) may not exceed dim")
    if not 0.0 <= cfg.snr <= 1.0:
        raise ValueError("snr must lie in [0, 1]")
    for name in ("dim", "signal_dim", "num_classes", "sequences_per_class",
                 "frames_per_sequence"):
        if getattr(cfg, name) < 1:
            raise ValueError(f"{name} must be >= 1")

    rng = np.random.default_rng(seed)
    d, ks, ncls = cfg.dim, cfg.signal_dim, cfg.num_classes
    n = cfg.frames_per_sequence

    # one coordinate per planted direction, cycling when d is tight
    perm = rng.permutation(d)
    bases = []
    for c in range(ncls):
        basis = np.zeros((d, ks))
        for j in range(ks):
            basis[perm[(c * ks + j) % d], j] = 1.0
        bases.append(basis)
    signal_coords = perm[:min(ncls * ks, d)]
    noise_coords = perm[min(ncls * ks, d):]

    ndis = min(cfg.num_distractors, noise_coords.size)
    distractors = np.zeros((d, ndis))
    for j in range(ndis):
        v = np.zeros(d)
        v[noise_coords] = rng.uniform(0.2, 1.0, noise_coords.size)
        distractors[:, j] = v / np.linalg.norm(v)

    ramp = np.linspace(0.0, 1.0, n) ** cfg.coeff_shape
    alphas = cfg.coeff_start + (cfg.coeff_end - cfg.coeff_start) * ramp
    noise_scales = np.linspace(cfg.noise_ramp_start, cfg.noise_ramp_end, n)

    def unit(v):
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise NumericalError("degenerate all-zero synthetic component")
        return v / nrm

    sequences = []
    for c in range(ncls):
        for s in range(cfg.sequences_per_class):
            w = rng.uniform(0.3, 1.0, ks)
            w /= np.linalg.norm(w)
            signal_dir = bases[c] @ w  # unit, non-negative
            def draw_background():
                # clutter aliasing the signal coordinates of *random* classes,
                # drawn class-independently, plus distractors and a dense
                # floor: keeps frame-level class margins small and pooled
                # means confusable
                clutter = np.zeros(d)
                if ndis:
                    clutter = cfg.distractor_weight * unit(
                        distractors @ rng.uniform(0.5, 1.0, ndis))
                alias = np.zeros(d)
                if 0 < cfg.alias_spikes < signal_coords.size:
                    hit = rng.choice(signal_coords, cfg.alias_spikes,
                                     replace=False)
                    alias[hit] = rng.uniform(0.5, 1.0, cfg.alias_spikes)
                else:
                    alias[signal_coords] = rng.uniform(0.0, 1.0,
                                                       signal_coords.size)
                floor = unit(rng.uniform(0.0, 1.0, d))
                return unit(clutter + cfg.alias_weight * unit(alias)
                            + cfg.clutter_floor * floor)

            # the clutter drifts from one direction to another across the
            # sequence, so no fixed direction tracks it
            bg_head = draw_background()
            bg_tail = draw_background()
            frames = np.empty((d, n))
            for t in range(n):
                s = t / (n - 1) if n > 1 else 0.0
                background = unit((1.0 - s) * bg_head + s * bg_tail)
                jitter = unit(np.abs(rng.standard_normal(d)))
                noise = noise_scales[t] * unit(
                    cfg.background_weight * background
                    + (1.0 - cfg.background_weight) * jitter)
                pre = cfg.snr * alphas[t] * signal_dir + (1.0 - cfg.snr) * noise
                pre = np.maximum(pre, 0.0)
                nrm = np.linalg.norm(pre)
                if nrm == 0:
                    raise NumericalError("degenerate all-zero synthetic frame")
                frames[:, t] = pre / nrm
            sequences.append(
                FeatureSequence(frames, label=c, id=f"class{c}_seq{s}")
            )
    return Dataset(tuple(sequences), ncls, d)


def planted_basis(cfg: SyntheticConfig, seed, label: int) -> np.ndarray:
    """Re-derive the planted basis of one class for a given (cfg, seed).

    Repeats only the seeded draws that precede basis construction, so it is
    consistent with ``make_synthetic`` by construction.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(cfg.dim)
    basis = np.zeros((cfg.dim, cfg.signal_dim))
    for j in range(cfg.signal_dim):
        basis[perm[(label * cfg.signal_dim + j) % cfg.dim], j] = 1.0
    return basis

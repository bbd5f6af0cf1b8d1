"""Corpus handling: annotation filtering, manifests, loading, and a
synthetic feature corpus with an additive class cue for desk-scale work.

Manifest files are tab-separated, one record per line:
    id <TAB> speaker <TAB> label-or-annotations <TAB> feature-path <TAB> frames
The label column holds either a resolved label ("angry"/"neutral") or a
comma-separated annotator list to be resolved by filter_annotations.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ManifestError
from .features import read_feature_header, read_features, write_features

ANGRY_NAME = "angry"
NEUTRAL_NAME = "neutral"
TASK_LABELS = (ANGRY_NAME, NEUTRAL_NAME)


@dataclass
class UtteranceRecord:
    id: str
    speaker: str
    annotations: list
    label: str | None
    feature_path: str | None = None
    n_frames: int = 0


def filter_annotations(records):
    """Resolve labels by annotator consensus and keep only task labels.

    Excluded: three or more distinct annotation labels; no label chosen by
    at least two annotators (including ties); consensus label outside
    {angry, neutral}. Returns (included, exclusion log of (id, reason)).
    """
    included = []
    excluded = []
    for rec in records:
        if not rec.annotations:
            raise ConfigError(f"record {rec.id} has no annotations")
        distinct = set(rec.annotations)
        if len(distinct) >= 3:
            excluded.append((rec.id, f"{len(distinct)} distinct labels"))
            continue
        counts = {lab: rec.annotations.count(lab) for lab in distinct}
        top = max(counts.values())
        winners = [lab for lab, c in counts.items() if c == top]
        if top < 2 or len(winners) > 1:
            excluded.append((rec.id, "no two-annotator consensus"))
            continue
        label = winners[0]
        if label not in TASK_LABELS:
            excluded.append((rec.id, f"consensus label {label!r} outside task"))
            continue
        included.append(UtteranceRecord(rec.id, rec.speaker, list(rec.annotations),
                                        label, rec.feature_path, rec.n_frames))
    return included, excluded


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    n_utterances: int = 1000
    n_speakers: int = 10
    min_frames: int = 100
    max_frames: int = 300
    cue_onset_min: float = 0.0
    cue_onset_max: float = 0.3   # fraction of the utterance length
    cue_frames: int = 30
    cue_magnitude: float = 3.0   # in units of noise_std
    noise_std: float = 1.0
    speaker_std: float = 0.5
    angry_prior: float = 0.5
    dim: int = 33
    seed: int = 0

    def __post_init__(self):
        if self.n_utterances < 1 or self.n_speakers < 1:
            raise ConfigError("need at least one utterance and one speaker")
        if not 1 <= self.min_frames <= self.max_frames:
            raise ConfigError("bad frame range")
        if not 0.0 <= self.cue_onset_min <= self.cue_onset_max <= 1.0:
            raise ConfigError("bad cue onset range")
        worst_onset = int(np.ceil(self.cue_onset_max * self.min_frames))
        if worst_onset + self.cue_frames > self.min_frames:
            raise ConfigError(
                f"cue of {self.cue_frames} frames starting at fraction "
                f"{self.cue_onset_max} cannot fit in {self.min_frames} frames")


@dataclass
class LoadedUtterance:
    id: str
    speaker: str
    label: int            # heads.ANGRY / heads.NEUTRAL
    frames: np.ndarray    # (n, dim) float64


def synth_corpus(cfg):
    """Generate the synthetic corpus in memory; deterministic per seed.

    Every utterance is iid Gaussian noise plus a per-speaker constant
    offset; angry utterances additionally carry cue_magnitude * noise_std
    along a fixed random unit direction on frames [onset, onset+cue_frames).
    """
    rng = np.random.default_rng(cfg.seed)
    direction = rng.normal(size=cfg.dim)
    direction /= np.linalg.norm(direction)
    offsets = rng.normal(scale=cfg.speaker_std, size=(cfg.n_speakers, cfg.dim))
    utts = []
    for i in range(cfg.n_utterances):
        spk = int(rng.integers(cfg.n_speakers))
        label = 1 if rng.random() < cfg.angry_prior else 0
        n = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
        onset_frac = rng.uniform(cfg.cue_onset_min, cfg.cue_onset_max)
        onset = int(np.ceil(onset_frac * n))
        frames = rng.normal(scale=cfg.noise_std, size=(n, cfg.dim))
        frames += offsets[spk]
        if label == 1:
            frames[onset:onset + cfg.cue_frames] += cfg.cue_magnitude * cfg.noise_std * direction
        utts.append(LoadedUtterance(id=f"utt{i:05d}", speaker=f"spk{spk:02d}",
                                    label=label, frames=frames))
    return utts


def generate_synthetic(cfg, out_dir):
    """Write the synthetic corpus as feature files plus a manifest; returns
    the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = os.path.join(out_dir, "manifest.tsv")
    lines = []
    for utt in synth_corpus(cfg):
        rel = f"{utt.id}.efea"
        write_features(os.path.join(out_dir, rel), utt.frames)
        name = ANGRY_NAME if utt.label == 1 else NEUTRAL_NAME
        lines.append(f"{utt.id}\t{utt.speaker}\t{name}\t{rel}\t{utt.frames.shape[0]}")
    with open(manifest, "w") as f:
        f.write("\n".join(lines) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def load_manifest(path):
    """Parse a manifest into UtteranceRecords (no filesystem checks)."""
    records = []
    try:
        f = open(path)
    except OSError as e:
        raise ManifestError(f"cannot open manifest {path}: {e}") from None
    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ManifestError(f"{path}:{lineno}: expected 5 tab-separated "
                                    f"fields, got {len(parts)}")
            uid, speaker, labels, rel, n_frames = parts
            try:
                n = int(n_frames)
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: bad frame count "
                                    f"{n_frames!r}") from None
            annotations = [s.strip() for s in labels.split(",") if s.strip()]
            label = annotations[0] if len(annotations) == 1 and annotations[0] in TASK_LABELS else None
            records.append(UtteranceRecord(uid, speaker, annotations, label, rel, n))
    return records


def validate_manifest(records, root):
    """Check feature files exist, dims agree, speakers and ids are sane."""
    seen = set()
    dim = None
    for rec in records:
        if rec.id in seen:
            raise ManifestError(f"duplicate utterance id {rec.id!r}")
        seen.add(rec.id)
        if not rec.speaker:
            raise ManifestError(f"record {rec.id}: empty speaker id")
        path = os.path.join(root, rec.feature_path)
        if not os.path.exists(path):
            raise ManifestError(f"record {rec.id}: missing feature file {path}")
        d, n = read_feature_header(path)
        if dim is None:
            dim = d
        elif d != dim:
            raise ManifestError(f"record {rec.id}: dim {d} != corpus dim {dim}")
        if rec.n_frames and n != rec.n_frames:
            raise ManifestError(f"record {rec.id}: manifest says {rec.n_frames} "
                                f"frames, file has {n}")
    return dim


def load_corpus(manifest_path, root=None):
    """Manifest -> list of LoadedUtterance with float64 frames. Records whose
    label column is an unresolved annotation list are resolved first."""
    root = root if root is not None else os.path.dirname(manifest_path)
    records = load_manifest(manifest_path)
    unresolved = [r for r in records if r.label is None]
    if unresolved:
        resolved, _ = filter_annotations(records)
        records = resolved
    validate_manifest(records, root)
    corpus = []
    for rec in records:
        frames = read_features(os.path.join(root, rec.feature_path)).astype(np.float64)
        corpus.append(LoadedUtterance(rec.id, rec.speaker,
                                      1 if rec.label == ANGRY_NAME else 0, frames))
    return corpus

"""Synthetic multi-speaker, multi-rendition prosody corpus.

Each rendition is a full (T, 3) PAF matrix for one sentence by one actor.
Raw streams are generated in plausible physical units (Hz, dB-ish, seconds)
by a parametric process in which phone identity, style, speaker identity and
per-rendition global factors (level offsets, accent amplitude, declination,
speaking rate) all leave a measurable footprint, so conditioning on any of
them is learnable and renditions of one sentence differ in ways a
sentence-level latent can capture.

Test sentences carry multiple renditions by distinct actors; that is what
makes simulated feature-transplant control possible downstream.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .paf import STREAMS

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
CORPUS_FILE = "corpus.jsonl"
STATS_FILE = "speaker_stats.json"

# Within-sentence variation yardsticks per raw stream (measured on the desk
# profile); per-rendition level offsets scale relative to these through
# profile.actor_offset_scale.
_WITHIN = np.array([18.7, 1.45, 0.014])


class CorpusError(ValueError):
    pass


class CorpusFormatError(CorpusError):
    """A persisted corpus file failed to parse or validate."""


@dataclass(frozen=True)
class CorpusProfile:
    sentences: int = 240
    speakers: int = 8
    styles: int = 3
    test_sentences: int = 20
    val_sentences: int = 20
    renditions_per_test: int = 8
    # Train sentences each get this many renditions by a single actor, so
    # content alone cannot identify the target and the latent has to carry
    # the rendition-level variation.
    renditions_per_train: int = 3
    t_min: int = 10
    t_max: int = 24
    phone_vocab: int = 40
    f0_energy_corr: float = 0.6
    actor_offset_scale: float = 0.5
    noise_scale: float = 1.0

    @classmethod
    def desk(cls) -> "CorpusProfile":
        return cls()

    @classmethod
    def paper(cls) -> "CorpusProfile":
        """Counts mirroring the full-scale collection protocol: 30 actors,
        10 renditions per test sentence, ~80-phone sentences."""
        return cls(sentences=26000, speakers=30, styles=7, test_sentences=182,
                   val_sentences=800, renditions_per_test=10, t_min=60, t_max=100,
                   phone_vocab=60)

    def validate(self) -> None:
        if self.renditions_per_test > self.speakers:
            raise CorpusError(
                f"infeasible profile: {self.renditions_per_test} renditions per test "
                f"sentence but only {self.speakers} speakers")
        if self.test_sentences + self.val_sentences >= self.sentences:
            raise CorpusError("infeasible profile: no sentences left for training")
        if not (1 <= self.t_min <= self.t_max):
            raise CorpusError(f"infeasible length range [{self.t_min}, {self.t_max}]")
        if self.renditions_per_train < 1:
            raise CorpusError("train sentences need at least one rendition")
        if not (0.0 <= self.f0_energy_corr <= 1.0):
            raise CorpusError("f0/energy correlation must lie in [0, 1]")


@dataclass(frozen=True)
class SentenceSpec:
    sentence_id: str
    phone_ids: tuple[int, ...]
    style_id: int
    token_flags: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.phone_ids)


@dataclass
class Rendition:
    sentence_id: str
    actor_id: int
    paf: np.ndarray  # (T, 3), stream order f0/energy/duration
    normalized: bool = False


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    renditions_per_test: int

    def of(self, sentence_id: str) -> str:
        if sentence_id in self._lookup():
            return self._lookup()[sentence_id]
        raise KeyError(sentence_id)

    def _lookup(self) -> dict[str, str]:
        if not hasattr(self, "_cache"):
            object.__setattr__(self, "_cache", {
                **{s: "train" for s in self.train},
                **{s: "val" for s in self.val},
                **{s: "test" for s in self.test},
            })
        return self._cache


@dataclass
class Corpus:
    sentences: dict[str, SentenceSpec]
    renditions: list[Rendition]
    split: CorpusSplit
    profile: CorpusProfile | None = None

    def renditions_for(self, sentence_id: str) -> list[Rendition]:
        return [r for r in self.renditions if r.sentence_id == sentence_id]

    def rendition(self, sentence_id: str, actor_id: int) -> Rendition:
        for r in self.renditions:
            if r.sentence_id == sentence_id and r.actor_id == actor_id:
                return r
        raise KeyError(f"no rendition of {sentence_id} by actor {actor_id}")

    def split_renditions(self, name: str) -> list[Rendition]:
        ids = set(getattr(self.split, name))
        return [r for r in self.renditions if r.sentence_id in ids]

    def speaker_ids(self) -> list[int]:
        return sorted({r.actor_id for r in self.renditions})

    def style_ids(self) -> list[int]:
        return sorted({s.style_id for s in self.sentences.values()})

    def phone_vocab(self) -> int:
        if self.profile is not None:
            return self.profile.phone_vocab
        return max(max(s.phone_ids) for s in self.sentences.values()) + 1


@dataclass(frozen=True)
class TransplantPair:
    sentence_id: str
    driving_actor: int
    target_speaker: int


def _gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _smooth_noise(rng: np.random.Generator, t: int, sigma: float) -> np.ndarray:
    white = rng.normal(0.0, 1.0, size=t + 8)
    sm = np.convolve(white, _gaussian_kernel(2.0, 4), mode="same")[4:4 + t]
    sd = sm.std()
    if sd < 1e-9:
        return np.zeros(t)
    return sm / sd * sigma


@dataclass
class _Traits:
    """Frozen per-corpus latent parameters of the generative process."""
    phone_f0: np.ndarray
    phone_en: np.ndarray
    phone_logdur: np.ndarray
    phone_stress: np.ndarray
    style_pitch_range: np.ndarray
    style_en_shift: np.ndarray
    style_rate_shift: np.ndarray
    style_accent_density: np.ndarray
    spk_f0_base: np.ndarray
    spk_en_base: np.ndarray
    spk_accent_amp: np.ndarray
    spk_declination: np.ndarray
    spk_lograte: np.ndarray


def _draw_traits(rng: np.random.Generator, profile: CorpusProfile) -> _Traits:
    v, s, a = profile.phone_vocab, profile.styles, profile.speakers
    return _Traits(
        phone_f0=rng.normal(0.0, 4.0, v),
        phone_en=rng.normal(0.0, 1.2, v),
        phone_logdur=rng.normal(0.0, 0.10, v),
        # Stress propensity is a phone property, so accent placement is a
        # deterministic function of the phone sequence and style: models can
        # learn contour structure for unseen sentences.
        phone_stress=rng.random(v),
        style_pitch_range=rng.uniform(0.6, 1.6, s),
        style_en_shift=rng.uniform(-2.5, 2.5, s),
        style_rate_shift=rng.uniform(-0.15, 0.15, s),
        style_accent_density=rng.uniform(0.25, 0.5, s),
        spk_f0_base=rng.uniform(110.0, 250.0, a),
        spk_en_base=rng.uniform(58.0, 68.0, a),
        # Shape traits stay narrow: renditions should differ mostly through
        # per-rendition factors, which is what a transplanted latent can carry.
        spk_accent_amp=rng.uniform(0.9, 1.1, a),
        spk_declination=rng.uniform(14.0, 20.0, a),
        spk_lograte=rng.normal(0.0, 0.05, a),
    )


def _token_flags(rng: np.random.Generator, t: int) -> tuple[str, ...]:
    flags = [""] * t
    flags[0] = "start"
    flags[-1] = "end"
    pos = 0
    while True:
        pos += int(rng.integers(2, 6))
        if pos >= t - 1:
            break
        flags[pos] = "word" if rng.random() > 0.25 else "punct"
    for i in range(1, t - 1):
        if flags[i] == "" and rng.random() < 0.04:
            flags[i] = "sil"
    return tuple(flags)


def _render(rng: np.random.Generator, sent: SentenceSpec, actor: int,
            accent: np.ndarray, traits: _Traits, profile: CorpusProfile) -> np.ndarray:
    t = sent.length
    phones = np.asarray(sent.phone_ids)
    style = sent.style_id
    ns = profile.noise_scale
    lvl = profile.actor_offset_scale * _WITHIN

    ramp = (np.arange(t) / (t - 1) - 0.5) if t > 1 else np.zeros(1)

    lvl_f0 = rng.normal(0.0, lvl[0])
    acc_mult = max(0.2, 1.0 + rng.normal(0.0, 0.3))
    decl_mult = max(0.1, 1.0 + rng.normal(0.0, 0.3))
    lvl_en = rng.normal(0.0, lvl[1])
    rate_tweak = rng.normal(0.0, 0.18)

    f0 = (traits.spk_f0_base[actor] + lvl_f0
          + traits.spk_accent_amp[actor] * acc_mult * traits.style_pitch_range[style] * 25.0 * accent
          - traits.spk_declination[actor] * decl_mult * ramp
          + traits.phone_f0[phones]
          + _smooth_noise(rng, t, 0.8 * ns)
          + rng.normal(0.0, 0.5 * ns, t))

    dev = f0 - f0.mean()
    sd = dev.std()
    zdev = dev / sd if sd > 1e-9 else np.zeros(t)
    c = profile.f0_energy_corr
    indep = _smooth_noise(rng, t, 1.0) + rng.normal(0.0, 0.4, t)
    isd = indep.std()
    zindep = indep / isd if isd > 1e-9 else np.zeros(t)
    energy = (traits.spk_en_base[actor] + traits.style_en_shift[style] + lvl_en
              + traits.phone_en[phones]
              + 1.5 * c * zdev + 0.5 * np.sqrt(max(0.0, 1.0 - c * c)) * zindep)

    logdur = (np.log(0.085)
              + traits.phone_logdur[phones]
              + traits.spk_lograte[actor] + traits.style_rate_shift[style] + rate_tweak
              + 0.10 * accent
              + _smooth_noise(rng, t, 0.025 * ns)
              + rng.normal(0.0, 0.015 * ns, t))
    if t >= 2:
        logdur[-1] += 0.38
        logdur[-2] += 0.16
    dur = np.exp(logdur)

    return np.column_stack([f0, energy, dur])


def generate_corpus(seed: int, profile: CorpusProfile | None = None) -> Corpus:
    """Deterministically generate sentences, renditions and the split."""
    profile = profile or CorpusProfile.desk()
    profile.validate()
    rng = np.random.default_rng(seed)
    traits = _draw_traits(rng, profile)

    sentences: dict[str, SentenceSpec] = {}
    accents: dict[str, np.ndarray] = {}
    width = max(4, len(str(profile.sentences - 1)))
    for i in range(profile.sentences):
        sid = f"s{i:0{width}d}"
        t = int(rng.integers(profile.t_min, profile.t_max + 1))
        phone_ids = tuple(int(p) for p in rng.integers(0, profile.phone_vocab, t))
        style = int(rng.integers(0, profile.styles))
        sentences[sid] = SentenceSpec(sid, phone_ids, style, _token_flags(rng, t))
        density = traits.style_accent_density[style]
        stressed = traits.phone_stress[list(phone_ids)] > (1.0 - density)
        if not stressed.any():
            stressed[int(np.argmax(traits.phone_stress[list(phone_ids)]))] = True
        positions = np.where(stressed)[0]
        prof = np.zeros(t)
        for p in positions:
            prof += np.exp(-0.5 * ((np.arange(t) - p) / 1.2) ** 2)
        accents[sid] = prof

    order = rng.permutation(profile.sentences)
    ids = list(sentences)
    test_ids = tuple(ids[i] for i in sorted(order[:profile.test_sentences]))
    val_ids = tuple(ids[i] for i in sorted(
        order[profile.test_sentences:profile.test_sentences + profile.val_sentences]))
    train_ids = tuple(ids[i] for i in sorted(
        order[profile.test_sentences + profile.val_sentences:]))
    split = CorpusSplit(train_ids, val_ids, test_ids, profile.renditions_per_test)

    renditions: list[Rendition] = []
    for sid in ids:
        sent = sentences[sid]
        if sid in test_ids:
            actors = sorted(int(a) for a in
                            rng.permutation(profile.speakers)[:profile.renditions_per_test])
        elif sid in val_ids:
            actors = [int(rng.integers(0, profile.speakers))]
        else:
            actor = int(rng.integers(0, profile.speakers))
            actors = [actor] * profile.renditions_per_train
        for actor in actors:
            paf = _render(rng, sent, actor, accents[sid], traits, profile)
            renditions.append(Rendition(sid, actor, paf))

    return Corpus(sentences, renditions, split, profile)


# --- per-speaker normalisation -------------------------------------------

def compute_speaker_stats(corpus: Corpus) -> dict[int, dict[str, dict[str, float]]]:
    """Mean/std per speaker and stream, from training renditions only."""
    per_speaker: dict[int, list[np.ndarray]] = {}
    for r in corpus.split_renditions("train"):
        per_speaker.setdefault(r.actor_id, []).append(r.paf)
    stats: dict[int, dict[str, dict[str, float]]] = {}
    for spk in sorted(per_speaker):
        block = np.concatenate(per_speaker[spk], axis=0)
        mean = block.mean(axis=0)
        std = block.std(axis=0)
        if (std <= 0).any():
            raise CorpusError(f"degenerate stream for speaker {spk}: zero variance")
        stats[spk] = {s: {"mean": float(mean[i]), "std": float(std[i])}
                      for i, s in enumerate(STREAMS)}
    return stats


def stats_arrays(stats: dict, speaker: int) -> tuple[np.ndarray, np.ndarray]:
    if speaker not in stats:
        raise CorpusError(f"no normalisation stats for speaker {speaker}")
    entry = stats[speaker]
    mean = np.array([entry[s]["mean"] for s in STREAMS])
    std = np.array([entry[s]["std"] for s in STREAMS])
    return mean, std


def normalize_renditions(renditions: list[Rendition], stats: dict) -> list[Rendition]:
    """Per-speaker (x - mean) / std; flips the normalisation tag."""
    out = []
    for r in renditions:
        if r.normalized:
            raise CorpusError(f"rendition {r.sentence_id}/{r.actor_id} already normalised")
        mean, std = stats_arrays(stats, r.actor_id)
        out.append(Rendition(r.sentence_id, r.actor_id, (r.paf - mean) / std, normalized=True))
    return out


def denormalize_paf(paf: np.ndarray, stats: dict, speaker: int) -> np.ndarray:
    mean, std = stats_arrays(stats, speaker)
    return paf * std + mean


def normalized_corpus(corpus: Corpus, stats: dict) -> Corpus:
    return Corpus(corpus.sentences, normalize_renditions(corpus.renditions, stats),
                  corpus.split, corpus.profile)


# --- persistence ----------------------------------------------------------

def save_corpus(corpus: Corpus, path: str | Path,
                stats: dict | None = None) -> None:
    """Write the rendition file and stats file under directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lines = []
    for r in corpus.renditions:
        if r.normalized:
            raise CorpusError("only raw corpora are persisted; denormalise first")
        sent = corpus.sentences[r.sentence_id]
        record = {
            "format_version": FORMAT_VERSION,
            "sentence_id": r.sentence_id,
            "actor_id": r.actor_id,
            "style_id": sent.style_id,
            "phone_ids": list(sent.phone_ids),
            "paf": [[float(x) for x in row] for row in r.paf],
            "split": corpus.split.of(r.sentence_id),
            "token_flags": list(sent.token_flags),
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    (path / CORPUS_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    if stats is None:
        stats = compute_speaker_stats(corpus)
    payload = {
        "format_version": FORMAT_VERSION,
        "renditions_per_test": corpus.split.renditions_per_test,
        "speakers": {str(k): stats[k] for k in sorted(stats)},
    }
    (path / STATS_FILE).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_stats(path: str | Path) -> dict[int, dict]:
    payload = json.loads(Path(path, STATS_FILE).read_text(encoding="utf-8"))
    if payload.get("format_version") != FORMAT_VERSION:
        raise CorpusFormatError(
            f"stats file format version {payload.get('format_version')} != {FORMAT_VERSION}")
    return {int(k): v for k, v in payload["speakers"].items()}


_REQUIRED_FIELDS = ("format_version", "sentence_id", "actor_id", "style_id",
                    "phone_ids", "paf", "split", "token_flags")


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    text = Path(path, CORPUS_FILE).read_text(encoding="utf-8")
    sentences: dict[str, SentenceSpec] = {}
    renditions: list[Rendition] = []
    split_of: dict[str, str] = {}
    for idx, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"record {idx}: malformed JSON ({e})") from None
        for fieldname in _REQUIRED_FIELDS:
            if fieldname not in record:
                raise CorpusFormatError(f"record {idx}: missing field {fieldname!r}")
        if record["format_version"] != FORMAT_VERSION:
            raise CorpusFormatError(
                f"record {idx}: format version {record['format_version']} != {FORMAT_VERSION}")
        sid = record["sentence_id"]
        paf = np.array(record["paf"], dtype=np.float64)
        if paf.ndim != 2 or paf.shape[1] != 3 or paf.shape[0] != len(record["phone_ids"]):
            raise CorpusFormatError(f"record {idx}: paf shape {paf.shape} does not match "
                                    f"{len(record['phone_ids'])} phones")
        if not np.isfinite(paf).all():
            raise CorpusFormatError(f"record {idx}: non-finite PAF value")
        if (paf[:, 2] <= 0).any():
            raise CorpusFormatError(f"record {idx}: non-positive raw duration")
        spec = SentenceSpec(sid, tuple(record["phone_ids"]), record["style_id"],
                            tuple(record["token_flags"]))
        if sid in sentences and sentences[sid] != spec:
            raise CorpusFormatError(f"record {idx}: sentence {sid} disagrees with earlier records")
        sentences[sid] = spec
        split_of[sid] = record["split"]
        renditions.append(Rendition(sid, record["actor_id"], paf))

    groups: dict[str, list[str]] = {"train": [], "val": [], "test": []}
    for sid in sentences:
        name = split_of[sid]
        if name not in groups:
            raise CorpusFormatError(f"sentence {sid}: unknown split {name!r}")
        groups[name].append(sid)
    test_counts = {sid: sum(1 for r in renditions if r.sentence_id == sid)
                   for sid in groups["test"]}
    r_count = min(test_counts.values()) if test_counts else 0
    split = CorpusSplit(tuple(sorted(groups["train"])), tuple(sorted(groups["val"])),
                        tuple(sorted(groups["test"])), r_count)
    return Corpus(sentences, renditions, split)


# --- transplant enumeration ----------------------------------------------

def transplant_pairs(corpus: Corpus, seed: int = 0) -> list[TransplantPair]:
    """All ordered (driving_actor, target_speaker) pairs per test sentence,
    driving != target, in an order shuffled deterministically by ``seed``."""
    pairs: list[TransplantPair] = []
    for sid in corpus.split.test:
        actors = sorted(r.actor_id for r in corpus.renditions_for(sid))
        if len(actors) < 2:
            log.warning("transplant: sentence %s has %d rendition(s), skipped", sid, len(actors))
            continue
        for a in actors:
            for b in actors:
                if a != b:
                    pairs.append(TransplantPair(sid, a, b))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    return [pairs[i] for i in order]

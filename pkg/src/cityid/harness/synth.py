"""Seeded synthetic stand-in for the city and urban-sound corpora.

Every sound class owns a frequency band. Even classes are harmonic stacks
(upper partials of a class-specific fundamental placed inside the band),
odd classes are band-limited noise; each class also has its own amplitude
modulation rate. A city is a categorical distribution over classes, and
each city soundtrack strings together events drawn from it on top of a
quiet broadband background.

Layout written under ``out_dir``::

    urbansound/audio/fold<k>/<fsID>-<classID>-0-<n>.wav
    urbansound/metadata.csv          (UrbanSound8K columns)
    cities/audio/<city>_<n>.wav
    cities/manifest.csv              (path, city)
    cities/events.csv                (soundtrack, class, onset_s, offset_s)
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..audio_io import write_wav
from ..errors import InvalidSpec
from ..semantic import URBAN_CLASSES
from .manifests import CITIES, URBANSOUND_COLUMNS

F_LOW, F_HIGH = 150.0, 14000.0


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 10
    n_cities: int = 6
    videos_per_city: int = 30
    seed: int = 0
    duration_range: tuple = (4.0, 8.0)
    exemplars_per_class: int = 8
    exemplar_duration_range: tuple = (1.5, 4.0)
    sample_rate: int = 44100
    # 1.0 keeps class bands disjoint; smaller values widen bands until they overlap
    orthogonality: float = 1.0
    background_level: float = 0.01
    event_duration_range: tuple = (0.6, 2.0)
    city_concentration: float = 0.7  # probability mass on a city's two signature classes

    def validate(self):
        if not 2 <= self.n_classes <= len(URBAN_CLASSES):
            raise InvalidSpec(f"n_classes must be in [2, {len(URBAN_CLASSES)}]")
        if not 1 <= self.n_cities <= len(CITIES):
            raise InvalidSpec(f"n_cities must be in [1, {len(CITIES)}]")
        if self.n_cities > len(list(itertools.combinations(range(self.n_classes), 2))):
            raise InvalidSpec("too many cities for distinct signature pairs")
        lo, hi = self.duration_range
        if not 2.0 <= lo <= hi <= 90.0:
            raise InvalidSpec("soundtrack durations must lie within [2, 90] s")
        elo, ehi = self.exemplar_duration_range
        if not 0.1 <= elo <= ehi:
            raise InvalidSpec("bad exemplar duration range")
        if self.videos_per_city < 1 or self.exemplars_per_class < 1:
            raise InvalidSpec("counts must be positive")
        if not 0.0 < self.orthogonality <= 1.0:
            raise InvalidSpec("orthogonality must be in (0, 1]")
        if not 0.0 <= self.city_concentration <= 1.0:
            raise InvalidSpec("city_concentration must be in [0, 1]")
        return self

    @property
    def class_names(self) -> tuple:
        return URBAN_CLASSES[: self.n_classes]

    @property
    def city_names(self) -> tuple:
        return CITIES[: self.n_cities]


@dataclass(frozen=True)
class SynthCorpus:
    root: Path
    urbansound_manifest: Path
    urbansound_audio: Path
    city_manifest: Path
    event_log: Path
    city_distributions: dict


class SoundBank:
    """Renders class-specific sounds; deterministic given the spec."""

    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.sr = spec.sample_rate
        k = spec.n_classes
        log_edges = np.linspace(np.log(F_LOW), np.log(F_HIGH), k + 1)
        step = log_edges[1] - log_edges[0]
        centres = (log_edges[:-1] + log_edges[1:]) / 2
        half = min(0.35 * step / spec.orthogonality, (log_edges[-1] - log_edges[0]) / 2)
        self.bands = [(float(np.exp(c - half)), float(np.exp(c + half))) for c in centres]
        self.am_rates = [(i % 5) * 2.5 for i in range(k)]

    def render(self, class_index: int, n: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.bands[class_index]
        t = np.arange(n) / self.sr
        if class_index % 2 == 0:
            # partials n0*f0 .. (n0+3)*f0 spanning the band
            n0 = max(1, int(np.ceil(3 * lo / (hi - lo))))
            f0 = lo / n0
            x = np.zeros(n)
            for h in range(n0, n0 + 4):
                f = h * f0 * (1.0 + 0.002 * rng.standard_normal())
                if f < self.sr / 2:
                    x += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) / (1 + h - n0)
        else:
            spec = np.fft.rfft(rng.standard_normal(n))
            freqs = np.fft.rfftfreq(n, 1.0 / self.sr)
            spec[(freqs < lo) | (freqs > hi)] = 0.0
            x = np.fft.irfft(spec, n)
        rate = self.am_rates[class_index]
        if rate > 0:
            x *= 0.55 + 0.45 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
        # 10 ms raised-cosine fades
        fade = min(n // 2, int(0.01 * self.sr))
        if fade:
            ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
            x[:fade] *= ramp
            x[n - fade:] *= ramp[::-1]
        peak = np.max(np.abs(x))
        return x / peak if peak > 0 else x

    def background(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.spec.background_level * rng.standard_normal(n)


def city_distributions(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """(n_cities, n_classes) categorical distributions; each city has a distinct signature pair."""
    pairs = list(itertools.combinations(range(spec.n_classes), 2))
    chosen = rng.choice(len(pairs), size=spec.n_cities, replace=False)
    dists = np.empty((spec.n_cities, spec.n_classes))
    for m, p in enumerate(chosen):
        signature = np.zeros(spec.n_classes)
        signature[list(pairs[p])] = 0.5
        rest = rng.dirichlet(np.ones(spec.n_classes))
        dists[m] = spec.city_concentration * signature + (1 - spec.city_concentration) * rest
    return dists


def render_soundtrack(bank: SoundBank, dist: np.ndarray, duration_s: float, rng: np.random.Generator):
    """Events drawn from ``dist`` laid end to end (with short gaps) over background noise.

    Returns (samples, [(class_index, onset_s, offset_s), ...]).
    """
    sr = bank.sr
    n = int(round(duration_s * sr))
    x = bank.background(n, rng)
    events = []
    pos = int(rng.uniform(0.0, 0.3) * sr)
    lo, hi = bank.spec.event_duration_range
    while pos < n - int(0.2 * sr):
        c = int(rng.choice(len(dist), p=dist))
        length = min(int(rng.uniform(lo, hi) * sr), n - pos)
        x[pos:pos + length] += rng.uniform(0.3, 0.8) * bank.render(c, length, rng)
        events.append((c, pos / sr, (pos + length) / sr))
        pos += length + int(rng.uniform(0.0, 0.3) * sr)
    return np.clip(x, -1.0, 1.0), events


def render_dominant_soundtrack(bank: SoundBank, class_index: int, duration_s: float, rng: np.random.Generator,
                               dominant_fraction: float = 0.1):
    """A steady quiet bed of the other classes plus one loud burst of ``class_index``.

    The bed is stationary so that, after per-class standardization over
    time, only the burst stands out.
    """
    sr = bank.sr
    n = int(round(duration_s * sr))
    x = bank.background(n, rng)
    events = []
    for c in range(bank.spec.n_classes):
        if c != class_index:
            x += rng.uniform(0.02, 0.06) * bank.render(c, n, rng)
            events.append((c, 0.0, n / sr))
    length = int(dominant_fraction * n)
    onset = int(rng.uniform(0.1, 0.9 - dominant_fraction) * n)
    x[onset:onset + length] += 0.8 * bank.render(class_index, length, rng)
    events.append((class_index, onset / sr, (onset + length) / sr))
    return np.clip(x, -1.0, 1.0), events


def generate_synthetic_corpus(spec: SynthSpec, out_dir) -> SynthCorpus:
    spec.validate()
    root = Path(out_dir)
    us_audio = root / "urbansound" / "audio"
    city_audio = root / "cities" / "audio"
    us_audio.mkdir(parents=True, exist_ok=True)
    city_audio.mkdir(parents=True, exist_ok=True)

    seeds = np.random.SeedSequence(spec.seed).spawn(3)
    exemplar_rng, city_rng, track_rng = (np.random.default_rng(s) for s in seeds)
    bank = SoundBank(spec)
    sr = spec.sample_rate

    us_rows = []
    elo, ehi = spec.exemplar_duration_range
    for c, name in enumerate(spec.class_names):
        for i in range(spec.exemplars_per_class):
            n = int(round(exemplar_rng.uniform(elo, ehi) * sr))
            x = bank.background(n, exemplar_rng) + exemplar_rng.uniform(0.4, 0.8) * bank.render(c, n, exemplar_rng)
            fs_id = 1000 * (c + 1) + i
            fold = i % 10 + 1
            fname = f"{fs_id}-{c}-0-{i}.wav"
            (us_audio / f"fold{fold}").mkdir(exist_ok=True)
            write_wav(us_audio / f"fold{fold}" / fname, np.clip(x, -1, 1), sr)
            us_rows.append([fname, fs_id, "0.0", f"{n / sr:.6f}", 1, fold, c, name])
    us_manifest = root / "urbansound" / "metadata.csv"
    with open(us_manifest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(URBANSOUND_COLUMNS)
        w.writerows(us_rows)

    dists = city_distributions(spec, city_rng)
    city_rows, event_rows = [], []
    dlo, dhi = spec.duration_range
    for m, city in enumerate(spec.city_names):
        for v in range(spec.videos_per_city):
            track = f"{city.replace(' ', '_').lower()}_{v:03d}"
            x, events = render_soundtrack(bank, dists[m], track_rng.uniform(dlo, dhi), track_rng)
            write_wav(city_audio / f"{track}.wav", x, sr)
            city_rows.append([f"audio/{track}.wav", city])
            event_rows += [[track, spec.class_names[c], f"{on:.6f}", f"{off:.6f}"] for c, on, off in events]
    city_manifest = root / "cities" / "manifest.csv"
    with open(city_manifest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "city"])
        w.writerows(city_rows)
    event_log = root / "cities" / "events.csv"
    with open(event_log, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["soundtrack", "class", "onset_s", "offset_s"])
        w.writerows(event_rows)

    return SynthCorpus(
        root, us_manifest, us_audio, city_manifest, event_log,
        {city: dict(zip(spec.class_names, map(float, dists[m]))) for m, city in enumerate(spec.city_names)},
    )


def generate_dominant_probes(spec: SynthSpec, out_dir, n_probes: int = 20, duration_s: float = 20.0,
                             seed: int | None = None) -> list:
    """Soundtracks with one dominant class each, cycling through the classes.

    Writes ``probes/probe_<n>.wav``, ``probes/manifest.csv`` (path,
    dominant_class) and ``probes/events.csv``. Returns [(path, class_name)].
    """
    spec.validate()
    if n_probes < 1 or duration_s <= 0:
        raise InvalidSpec("probes need n_probes >= 1 and a positive duration")
    root = Path(out_dir) / "probes"
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed if seed is None else seed, 0x70726F6265]))
    bank = SoundBank(spec)
    probes, event_rows = [], []
    for i in range(n_probes):
        c = i % spec.n_classes
        name = f"probe_{i:03d}"
        x, events = render_dominant_soundtrack(bank, c, duration_s, rng)
        path = root / f"{name}.wav"
        write_wav(path, x, spec.sample_rate)
        probes.append((path, spec.class_names[c]))
        event_rows += [[name, spec.class_names[k], f"{on:.6f}", f"{off:.6f}"] for k, on, off in events]
    with open(root / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "dominant_class"])
        w.writerows([[p.name, cls] for p, cls in probes])
    with open(root / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["soundtrack", "class", "onset_s", "offset_s"])
        w.writerows(event_rows)
    return probes


def read_event_log(path) -> dict:
    """soundtrack -> [(class, onset_s, offset_s), ...]"""
    out: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["soundtrack"], []).append((row["class"], float(row["onset_s"]), float(row["offset_s"])))
    return out


def spec_dict(spec: SynthSpec) -> dict:
    return asdict(spec)

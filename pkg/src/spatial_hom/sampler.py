"""Synthetic detection events drawn exactly from the joint density.

Each event draws ``dk`` from the envelope C (the marginal over outcomes) and
then the outcome from ``p(B | dk) = (1 + nu cos(dk dx)) / 2``.

Randomness is counter based: event block ``b`` of a batch seeded with ``s``
uses a Philox stream keyed by ``(s, b)``, so blocks can be generated in any
order or in parallel with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detection import BUCKET, RESOLVING, SINGLE_CAMERA, DetectorModel, SceneParams
from .errors import InvalidParameterError, NoDataError, ParseError
from .wavepacket import MomentumDistribution, envelope, make_gaussian

BLOCK_SIZE = 1 << 16
_MASK64 = (1 << 64) - 1


def stream(seed: int, *counter: int) -> np.random.Generator:
    """Independent generator for ``(seed, *counter)``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(c) for c in counter))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit seed of sub-run ``index`` (e.g. one Monte Carlo trial)."""
    ss = np.random.SeedSequence(int(master_seed) & _MASK64, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class DetectionEvent:
    dk: float
    x: str
    lost: bool = False


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Columnar event storage; ``dk`` is NaN for bucket-mode events."""

    dk: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    lost: np.ndarray = field(repr=False)
    seed: int
    scene: SceneParams
    detector: DetectorModel

    @property
    def n_requested(self) -> int:
        return int(self.dk.size)

    @property
    def n_used(self) -> int:
        return int(self.dk.size - np.count_nonzero(self.lost))

    @property
    def events(self) -> list[DetectionEvent]:
        return [DetectionEvent(float(d), str(x), bool(l))
                for d, x, l in zip(self.dk, self.x, self.lost)]

    def counts(self) -> tuple[int, int]:
        """(n_A, n_B) over non-lost events."""
        used = self.x[~self.lost]
        return int(np.count_nonzero(used == "A")), int(np.count_nonzero(used == "B"))

    def same_events(self, other: "SampleSet") -> bool:
        return (np.array_equal(self.dk, other.dk, equal_nan=True)
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.lost, other.lost))


def sample_event(rng: np.random.Generator, scene: SceneParams) -> DetectionEvent:
    dk, bunched = _draw(rng, scene, 1)
    return DetectionEvent(float(dk[0]), "B" if bunched[0] else "A")


def _draw(rng: np.random.Generator, scene: SceneParams, n: int):
    dk = scene.envelope.sample(rng, n)
    p_b = 0.5 * (1.0 + scene.nu * np.cos(dk * scene.delta_x))
    return dk, rng.random(n) < p_b


def _block(seed: int, b: int, n: int, scene: SceneParams, det: DetectorModel):
    rng = stream(seed, b)
    dk, bunched = _draw(rng, scene, n)
    lost = np.zeros(n, dtype=bool)
    if det.mode == SINGLE_CAMERA:
        # Bunched pairs reach the single camera's port half of the time.
        on_camera = rng.random(n) < 0.5
        lost |= ~(bunched & on_camera)
    if det.mode != BUCKET:
        lo, hi = det.k_range
        lost |= (dk < lo) | (dk > hi)
        if det.snap:
            edges = det.pixel_edges()
            idx = np.clip(np.searchsorted(edges, dk, side="right") - 1, 0, edges.size - 2)
            dk = np.where(lost, dk, 0.5 * (edges[idx] + edges[idx + 1]))
    else:
        dk = np.full(n, np.nan)
    return dk, np.where(bunched, "B", "A"), lost


def sample_batch(n: int, seed: int, scene: SceneParams, detector: DetectorModel,
                 workers: int = 1) -> SampleSet:
    """``n`` independent events; identical arguments give identical output.

    Events outside the detector range are kept and marked lost.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    sizes = [min(BLOCK_SIZE, n - start) for start in range(0, n, BLOCK_SIZE)]
    args = [(seed, b, size, scene, detector) for b, size in enumerate(sizes)]
    if workers > 1 and len(args) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(lambda a: _block(*a), args))
    else:
        blocks = [_block(*a) for a in args]
    dk = np.concatenate([b[0] for b in blocks])
    x = np.concatenate([b[1] for b in blocks])
    lost = np.concatenate([b[2] for b in blocks])
    return SampleSet(dk, x, lost, int(seed), scene, detector)


def sample_pairs(n: int, seed: int, scene: SceneParams, dist: MomentumDistribution):
    """Validation sampler working on the individual momenta.

    Draws k and k' independently from ``dist`` and the outcome given
    ``k - k'``; returns ``(k, kp, x)``.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    rng = stream(seed, 0)
    k = dist.sample(rng, n)
    kp = dist.sample(rng, n)
    p_b = 0.5 * (1.0 + scene.nu * np.cos((k - kp) * scene.delta_x))
    return k, kp, np.where(rng.random(n) < p_b, "B", "A")


# -- CSV ------------------------------------------------------------------

def write_events_csv(samples: SampleSet, path, extra: dict | None = None) -> None:
    det = samples.detector
    meta = {
        "seed": samples.seed,
        "nu": repr(samples.scene.nu),
        "delta_x": repr(samples.scene.delta_x),
        "sigma_k": repr(samples.scene.sigma_k),
        "mode": det.mode,
        "k_lo": repr(det.k_range[0]),
        "k_hi": repr(det.k_range[1]),
        "pixel_dk": repr(det.pixel_dk) if det.pixel_dk is not None else "",
        "snap": int(det.snap),
    }
    if extra:
        meta.update(extra)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write("event_index,dk,x,lost\n")
        for i, (d, x, l) in enumerate(zip(samples.dk.tolist(), samples.x, samples.lost)):
            fh.write(f"{i},{d!r},{x},{int(l)}\n")


def read_events_csv(path, envelope_override=None) -> SampleSet:
    """Parse an events file written by :func:`write_events_csv`.

    The scene is rebuilt from the metadata (Gaussian envelope unless
    ``envelope_override`` is given).
    """
    meta: dict[str, str] = {}
    dk, xs, lost = [], [], []
    header_seen = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line.replace(" ", "") != "event_index,dk,x,lost":
                    raise ParseError(f"unexpected header {line!r}", lineno)
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError("expected 4 columns", lineno)
            try:
                int(parts[0])
                d = float(parts[1])
                flag = int(parts[3])
            except ValueError:
                raise ParseError(f"malformed row {line!r}", lineno) from None
            if parts[2] not in ("A", "B") or flag not in (0, 1):
                raise ParseError(f"malformed row {line!r}", lineno)
            dk.append(d)
            xs.append(parts[2])
            lost.append(bool(flag))
    if not dk:
        raise NoDataError(f"{Path(path).name} contains no events")
    if not header_seen:
        raise ParseError(f"{Path(path).name}: missing header row")
    try:
        sigma_k = float(meta["sigma_k"])
        scene = SceneParams(float(meta["delta_x"]), float(meta["nu"]),
                            envelope_override or envelope(make_gaussian(sigma_k)))
        pixel = meta.get("pixel_dk", "")
        detector = DetectorModel(
            meta.get("mode", RESOLVING),
            float(pixel) if pixel else None,
            (float(meta.get("k_lo", "-inf")), float(meta.get("k_hi", "inf"))),
            None,
            bool(int(meta.get("snap", "0"))),
        )
        seed = int(meta.get("seed", "0"))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad or missing metadata: {exc}") from None
    return SampleSet(np.array(dk, dtype=float), np.array(xs, dtype="<U1"),
                     np.array(lost, dtype=bool), seed, scene, detector)

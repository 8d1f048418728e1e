"""Eye-movement event detection and group-level gaze statistics.

Fixations are detected with a dispersion-threshold (I-DT) scheme over gaze
*direction* angles, so head translation does not masquerade as saccades.
The exact algorithm (matched verbatim by the brute-force oracle in tests):

1. advance ``i`` past invalid samples;
2. grow ``j`` from ``i`` until ``t[j] - t[i] >= min_fixation_s``; if an
   invalid sample is hit first, restart after it; if the sequence ends
   first, stop (no later window can reach the duration either);
3. if the window's dispersion exceeds ``dispersion_deg``, advance ``i`` by
   one and retry;
4. otherwise keep extending ``j`` while the next sample is valid and the
   dispersion stays within the threshold; emit the window and restart at
   ``j + 1``.

Dispersion of a window is the maximum pairwise angle (degrees) between its
gaze directions. Angular speed is the central finite difference
``angle(dir[i-1], dir[i+1]) / (t[i+1] - t[i-1])`` smoothed with a 3-sample
moving average; samples next to invalid ones get no speed estimate.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .gaze_core import GazeSequence, Recording

DEFAULT_DISPERSION_DEG = 1.5
DEFAULT_MIN_FIXATION_S = 0.1
DEFAULT_DEPTH_THRESHOLD_M = 1.0  # <= threshold -> movement-related

KIND_MOVEMENT = "movement-related"
KIND_EXPLORATORY = "exploratory"


@dataclass
class FixationEvent:
    start_s: float
    end_s: float
    centroid_g2d: np.ndarray  # mean 2D gaze over the event, in [0,1]^2
    mean_depth_m: float
    kind: str  # movement-related | exploratory (depth-threshold rule)
    mean_dir3d: np.ndarray  # normalized mean gaze direction
    start_index: int
    end_index: int

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def _angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.degrees(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0))))


def detect_fixations(
    seq: GazeSequence,
    dispersion_deg: float = DEFAULT_DISPERSION_DEG,
    min_fixation_s: float = DEFAULT_MIN_FIXATION_S,
    depth_threshold_m: float = DEFAULT_DEPTH_THRESHOLD_M,
) -> list[FixationEvent]:
    """Non-overlapping fixation events ordered by start time.

    Samples outside every event are saccade or invalid time. An all-invalid
    sequence yields an empty list.
    """
    if dispersion_deg <= 0:
        raise ConfigError("dispersion_deg must be > 0")
    if min_fixation_s <= 0:
        raise ConfigError("min_fixation_s must be > 0")

    t = seq.times
    dirs = seq.dir3d
    valid = seq.valid
    n = len(seq)
    events: list[FixationEvent] = []

    i = 0
    while i < n:
        if not valid[i]:
            i += 1
            continue
        # grow to the minimum duration
        j = i
        restart = None
        while t[j] - t[i] < min_fixation_s:
            j += 1
            if j >= n:
                restart = n  # tail too short; later windows are shorter still
                break
            if not valid[j]:
                restart = j + 1
                break
        if restart is not None:
            if restart >= n:
                break
            i = restart
            continue

        # incremental max-pairwise-angle dispersion
        window = [dirs[k] for k in range(i, j + 1)]
        disp = 0.0
        for a in range(len(window)):
            for b in range(a + 1, len(window)):
                disp = max(disp, _angle_deg(window[a], window[b]))
        if disp > dispersion_deg:
            i += 1
            continue

        while j + 1 < n and valid[j + 1]:
            cand = dirs[j + 1]
            new_disp = disp
            for w in window:
                new_disp = max(new_disp, _angle_deg(w, cand))
            if new_disp > dispersion_deg:
                break
            window.append(cand)
            disp = new_disp
            j += 1

        sl = slice(i, j + 1)
        mean_dir = dirs[sl].mean(axis=0)
        mean_dir = mean_dir / np.linalg.norm(mean_dir)
        mean_depth = float(seq.depth_m[sl].mean())
        events.append(
            FixationEvent(
                start_s=float(t[i]),
                end_s=float(t[j]),
                centroid_g2d=np.clip(seq.g2d[sl].mean(axis=0), 0.0, 1.0),
                mean_depth_m=mean_depth,
                kind=KIND_MOVEMENT if mean_depth <= depth_threshold_m else KIND_EXPLORATORY,
                mean_dir3d=mean_dir,
                start_index=i,
                end_index=j,
            )
        )
        i = j + 1
    return events


@dataclass
class SummaryStats:
    count: int
    mean: float | None = None
    median: float | None = None
    p90: float | None = None

    @classmethod
    def of(cls, values) -> "SummaryStats":
        values = np.asarray(list(values), dtype=float)
        if len(values) == 0:
            return cls(count=0)
        return cls(
            count=int(len(values)),
            mean=float(values.mean()),
            median=float(np.median(values)),
            p90=float(np.percentile(values, 90)),
        )


@dataclass
class SaccadeStats:
    count: int
    amplitude_deg: SummaryStats
    peak_speed_deg_s: SummaryStats
    amplitudes: list[float]
    peak_speeds: list[float]


def angular_speed_series(seq: GazeSequence) -> np.ndarray:
    """Smoothed angular speed per sample (deg/s); NaN where undefined."""
    t = seq.times
    dirs = seq.dir3d
    valid = seq.valid
    n = len(seq)
    raw = np.full(n, np.nan)
    for i in range(1, n - 1):
        if valid[i - 1] and valid[i] and valid[i + 1]:
            raw[i] = _angle_deg(dirs[i - 1], dirs[i + 1]) / (t[i + 1] - t[i - 1])
    smooth = np.full(n, np.nan)
    for i in range(n):
        lo, hi = max(0, i - 1), min(n, i + 2)
        w = raw[lo:hi]
        if np.all(np.isfinite(w)):
            smooth[i] = w.mean()
    return smooth


def saccade_stats(seq: GazeSequence, fixations: list[FixationEvent]) -> SaccadeStats:
    """Per-saccade angular amplitude and peak speed between fixation pairs."""
    if len(fixations) < 2:
        empty = SummaryStats(count=0)
        return SaccadeStats(0, empty, empty, [], [])
    speeds = angular_speed_series(seq)
    amplitudes = []
    peaks = []
    for a, b in zip(fixations, fixations[1:]):
        amplitudes.append(_angle_deg(a.mean_dir3d, b.mean_dir3d))
        window = speeds[a.end_index : b.start_index + 1]
        finite = window[np.isfinite(window)]
        peaks.append(float(finite.max()) if len(finite) else float("nan"))
    peaks_ok = [p for p in peaks if np.isfinite(p)]
    return SaccadeStats(
        count=len(amplitudes),
        amplitude_deg=SummaryStats.of(amplitudes),
        peak_speed_deg_s=SummaryStats.of(peaks_ok),
        amplitudes=[float(a) for a in amplitudes],
        peak_speeds=peaks_ok,
    )


# ---------------------------------------------------------------------------
# group reports


def _validate_roi_spec(roi_spec: dict) -> dict[str, tuple[float, float, float, float]]:
    rois = {}
    for name, rect in roi_spec.items():
        try:
            u0, v0, u1, v1 = (float(x) for x in rect)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"ROI '{name}': rect must be [u0, v0, u1, v1] ({e})") from e
        if not (u1 > u0 and v1 > v0):
            raise ConfigError(f"ROI '{name}': rect must have positive extent")
        rois[name] = (u0, v0, u1, v1)
    return rois


def _roi_of(point: np.ndarray, rois: dict) -> str:
    for name, (u0, v0, u1, v1) in rois.items():
        if u0 <= point[0] < u1 and v0 <= point[1] < v1:
            return name
    return "none"


@dataclass
class GazeStatsReport:
    groups: dict  # group label -> aggregate dict
    n_recordings: int
    params: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def group_report(
    recordings: list[Recording],
    labels: list,
    roi_spec: dict | None = None,
    dispersion_deg: float = DEFAULT_DISPERSION_DEG,
    min_fixation_s: float = DEFAULT_MIN_FIXATION_S,
    depth_threshold_m: float = DEFAULT_DEPTH_THRESHOLD_M,
) -> GazeStatsReport:
    """Per-group gaze statistics (groups = unique labels, e.g. skill class).

    Aggregates are order-independent within a group: permuting recordings
    inside a group leaves the report unchanged.
    """
    if len(labels) != len(recordings):
        raise ConfigError("labels must align with recordings")
    rois = _validate_roi_spec(roi_spec) if roi_spec else {}

    by_group: dict = {}
    for rec, label in zip(recordings, labels):
        by_group.setdefault(label, []).append(rec)

    groups = {}
    for label in sorted(by_group, key=str):
        recs = by_group[label]
        fix_counts, durations, amplitudes, peak_speeds = [], [], [], []
        depths, variances, kind_counts = [], [], {KIND_MOVEMENT: 0, KIND_EXPLORATORY: 0}
        kind_switches = []
        transitions: dict[str, int] = {}
        for rec in recs:
            events = detect_fixations(
                rec.gaze, dispersion_deg, min_fixation_s, depth_threshold_m
            )
            sac = saccade_stats(rec.gaze, events)
            fix_counts.append(len(events))
            durations.extend(e.duration_s for e in events)
            amplitudes.extend(sac.amplitudes)
            peak_speeds.extend(sac.peak_speeds)
            valid = rec.gaze.valid
            depths.extend(rec.gaze.depth_m[valid].tolist())
            pts = rec.gaze.fix3d[valid]
            if len(pts) > 1:
                variances.append(float(np.trace(np.cov(pts.T))))
            switches = 0
            for a, b in zip(events, events[1:]):
                if a.kind != b.kind:
                    switches += 1
            kind_switches.append(switches)
            for e in events:
                kind_counts[e.kind] += 1
            if rois:
                labels_seq = [_roi_of(e.centroid_g2d, rois) for e in events]
                for a, b in zip(labels_seq, labels_seq[1:]):
                    key = f"{a}->{b}"
                    transitions[key] = transitions.get(key, 0) + 1

        # sort pooled values so aggregation is exactly permutation-invariant
        for pooled in (fix_counts, durations, amplitudes, peak_speeds, depths,
                       variances, kind_switches):
            pooled.sort()

        groups[str(label)] = {
            "n_recordings": len(recs),
            "fixation_count": dataclasses.asdict(SummaryStats.of(fix_counts)),
            "fixation_duration_s": dataclasses.asdict(SummaryStats.of(durations)),
            "saccade_amplitude_deg": dataclasses.asdict(SummaryStats.of(amplitudes)),
            "saccade_peak_speed_deg_s": dataclasses.asdict(SummaryStats.of(peak_speeds)),
            "gaze_depth_m": dataclasses.asdict(SummaryStats.of(depths)),
            "fix3d_variance_m2": dataclasses.asdict(SummaryStats.of(variances)),
            "fixation_kinds": dict(kind_counts),
            "kind_switches_per_recording": dataclasses.asdict(
                SummaryStats.of(kind_switches)
            ),
            "roi_transitions": dict(sorted(transitions.items())),
            "distributions": {
                "fixation_duration_s": [float(d) for d in durations],
                "saccade_amplitude_deg": [float(a) for a in amplitudes],
                "gaze_depth_m": [float(d) for d in depths],
            },
        }

    return GazeStatsReport(
        groups=groups,
        n_recordings=len(recordings),
        params={
            "dispersion_deg": dispersion_deg,
            "min_fixation_s": min_fixation_s,
            "depth_threshold_m": depth_threshold_m,
            "roi_spec": {k: list(v) for k, v in rois.items()},
        },
    )


def write_report(report: GazeStatsReport, out_dir: str | Path) -> None:
    """Emit report.json plus static histogram PNGs per distribution."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as f:
        json.dump(report.to_dict(), f, indent=1)
        f.write("\n")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    metrics = ["fixation_duration_s", "saccade_amplitude_deg", "gaze_depth_m"]
    for metric in metrics:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, agg in report.groups.items():
            values = agg["distributions"][metric]
            if values:
                ax.hist(values, bins=30, alpha=0.55, label=f"group {label}")
        ax.set_xlabel(metric)
        ax.set_ylabel("count")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / f"{metric}_hist.png", dpi=110)
        plt.close(fig)

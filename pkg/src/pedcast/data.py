"""Trajectory ingestion and scene windowing.

Raw trajectory files are parsed into per-frame records, down-sampled,
and cut into fixed-length scene windows (8 observed + 12 future steps by
default, stride 1). Finite-difference kinematics and deterministic
synthetic scenarios (for oracle-based tests) live here too.

File grammar (ETH/UCY style): one record per line,
``frame_id ped_id x y`` separated by whitespace. SDD annotation files are
reduced to the same quadruple (bounding-box centers, lost boxes dropped)
before parsing.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError

T_OBS = 8
T_PRED = 12

ETHUCY_SCENES = ("eth", "hotel", "univ", "zara1", "zara2")
SDD_TRAIN_VIDEOS = 31
SDD_TEST_VIDEOS = 17

SYNTHETIC_KINDS = ("linear", "turn", "crossing", "still")


class ParseError(ValueError):
    """Malformed trajectory file line."""


class DuplicateRecordError(ParseError):
    """Two records share the same (frame_id, ped_id)."""


@dataclass(frozen=True, order=True)
class TrackRecord:
    ped_id: int
    frame_id: int
    x: float
    y: float


@dataclass(eq=False)
class SceneWindow:
    """One fixed-length slice of a scene.

    Every listed pedestrian is present at all t_obs + t_pred steps.
    obs: (n, t_obs, 2) absolute positions; fut: (n, t_pred, 2); dt in seconds.
    """

    ped_ids: list
    obs: np.ndarray
    fut: np.ndarray
    dt: float

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=np.float64)
        self.fut = np.asarray(self.fut, dtype=np.float64)
        n = len(self.ped_ids)
        if n < 1:
            raise ValueError("a scene window needs at least one pedestrian")
        if self.obs.ndim != 3 or self.obs.shape[0] != n or self.obs.shape[2] != 2:
            raise ValueError(f"obs must be (n, t_obs, 2), got {self.obs.shape}")
        if self.fut.ndim != 3 or self.fut.shape[0] != n or self.fut.shape[2] != 2:
            raise ValueError(f"fut must be (n, t_pred, 2), got {self.fut.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n_peds(self):
        return len(self.ped_ids)

    @property
    def t_obs(self):
        return self.obs.shape[1]

    @property
    def t_pred(self):
        return self.fut.shape[1]


@dataclass(eq=False)
class KinematicChannels:
    """Position/velocity/acceleration sequences, each (n, T, 2).

    velocities[t] = (positions[t] - positions[t-1]) / dt for t >= 1 with
    velocities[0] = velocities[1]; accelerations analogous over velocities.
    """

    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray


def windows_equal(a: SceneWindow, b: SceneWindow) -> bool:
    return (
        list(a.ped_ids) == list(b.ped_ids)
        and a.dt == b.dt
        and np.array_equal(a.obs, b.obs)
        and np.array_equal(a.fut, b.fut)
    )


def _parse_number(token, line_no, what):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"line {line_no}: non-numeric {what} {token!r}") from None


def _parse_id(token, line_no, what):
    value = _parse_number(token, line_no, what)
    if not float(value).is_integer():
        raise ParseError(f"line {line_no}: {what} must be an integer, got {token!r}")
    return int(value)


def parse_records(text, format="ethucy"):
    """Parse a trajectory stream into records sorted by (ped_id, frame_id).

    `text` is a string or an iterable of lines. Both supported formats use
    the quadruple grammar (frame_id, ped_id, x, y); SDD annotation files
    must be reduced first (see reduce_sdd_annotations).
    """
    if format not in ("ethucy", "sdd"):
        raise ConfigError(f"unknown trajectory format '{format}'")
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = list(text)
    records = []
    seen = set()
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"line {line_no}: expected 4 fields (frame ped x y), got {len(parts)}")
        frame_id = _parse_id(parts[0], line_no, "frame_id")
        ped_id = _parse_id(parts[1], line_no, "ped_id")
        x = _parse_number(parts[2], line_no, "x")
        y = _parse_number(parts[3], line_no, "y")
        key = (frame_id, ped_id)
        if key in seen:
            raise DuplicateRecordError(f"line {line_no}: duplicate record for frame {frame_id}, ped {ped_id}")
        seen.add(key)
        records.append(TrackRecord(ped_id=ped_id, frame_id=frame_id, x=x, y=y))
    records.sort()
    return records


def reduce_sdd_annotations(text):
    """Reduce raw SDD annotation lines to the quadruple grammar.

    Input columns: track_id xmin ymin xmax ymax frame lost occluded generated label.
    Boxes flagged lost are dropped; positions are bounding-box centers in pixels.
    """
    out = []
    lines = text.splitlines() if isinstance(text, str) else list(text)
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 9:
            raise ParseError(f"line {line_no}: expected >= 9 SDD annotation columns, got {len(parts)}")
        track = _parse_id(parts[0], line_no, "track_id")
        xmin = _parse_number(parts[1], line_no, "xmin")
        ymin = _parse_number(parts[2], line_no, "ymin")
        xmax = _parse_number(parts[3], line_no, "xmax")
        ymax = _parse_number(parts[4], line_no, "ymax")
        frame = _parse_id(parts[5], line_no, "frame")
        lost = _parse_id(parts[6], line_no, "lost")
        if lost:
            continue
        cx = (xmin + xmax) / 2.0
        cy = (ymin + ymax) / 2.0
        out.append(f"{frame} {track} {cx!r} {cy!r}")
    return "\n".join(out)


def write_records(records) -> str:
    """Serialize records in the ETH/UCY text format (exact float round trip)."""
    lines = [f"{r.frame_id} {r.ped_id} {r.x!r} {r.y!r}" for r in sorted(records, key=lambda r: (r.frame_id, r.ped_id))]
    return "\n".join(lines) + ("\n" if lines else "")


def downsample(records, every: int):
    """Keep every `every`-th frame of the sorted unique frame sequence."""
    if every < 1:
        raise ConfigError(f"downsample factor must be >= 1, got {every}")
    if every == 1:
        return list(records)
    frames = sorted({r.frame_id for r in records})
    keep = set(frames[::every])
    return [r for r in records if r.frame_id in keep]


def build_windows(records, t_obs=T_OBS, t_pred=T_PRED, stride=1, dt=0.4):
    """Cut records into scene windows with a sliding window over frames.

    A window at frame offset s spans the 20 (t_obs + t_pred) consecutive
    entries of the global sorted frame sequence starting at s; it contains
    exactly the pedestrians with a record at all of those frames. Spans with
    non-uniform frame spacing (recording gaps) and windows with zero
    pedestrians are dropped.
    """
    if t_obs <= 0 or t_pred <= 0:
        raise ConfigError(f"t_obs and t_pred must be positive, got {t_obs}, {t_pred}")
    if stride <= 0:
        raise ConfigError(f"stride must be positive, got {stride}")
    length = t_obs + t_pred
    frames = sorted({r.frame_id for r in records})
    by_ped = {}
    for r in records:
        by_ped.setdefault(r.ped_id, {})[r.frame_id] = (r.x, r.y)
    windows = []
    for start in range(0, len(frames) - length + 1, stride):
        span = frames[start:start + length]
        steps = {b - a for a, b in zip(span, span[1:])}
        if len(steps) != 1:
            continue
        ped_ids = [p for p in sorted(by_ped) if all(f in by_ped[p] for f in span)]
        if not ped_ids:
            continue
        track = np.array([[by_ped[p][f] for f in span] for p in ped_ids], dtype=np.float64)
        windows.append(SceneWindow(ped_ids=ped_ids, obs=track[:, :t_obs], fut=track[:, t_obs:], dt=dt))
    return windows


def records_from_windows(windows, frame_block=1000):
    """Serialize windows back to records, one disjoint frame block per window.

    Window w occupies frames [w*frame_block, w*frame_block + len); the gap
    between blocks breaks the uniform frame spacing, so re-windowing the
    records reproduces exactly the input windows.
    """
    records = []
    for w, window in enumerate(windows):
        length = window.t_obs + window.t_pred
        if frame_block < length + 2:
            raise ValueError("frame_block must exceed the window length plus one")
        track = np.concatenate([window.obs, window.fut], axis=1)
        for i, ped in enumerate(window.ped_ids):
            for t in range(length):
                records.append(TrackRecord(
                    ped_id=int(ped),
                    frame_id=w * frame_block + t,
                    x=float(track[i, t, 0]),
                    y=float(track[i, t, 1]),
                ))
    records.sort()
    return records


def _pad_diff(seq, dt):
    # seq: (n, T, 2); first difference with first-element replication
    n, t, _ = seq.shape
    if t < 2:
        return np.zeros_like(seq)
    d = (seq[:, 1:] - seq[:, :-1]) / dt
    return np.concatenate([d[:, :1], d], axis=1)


def kinematics(window: SceneWindow, span: str) -> KinematicChannels:
    """Finite-difference kinematic channels over the observed or future span."""
    if span == "obs":
        pos = window.obs
    elif span == "fut":
        pos = window.fut
    else:
        raise ValueError(f"span must be 'obs' or 'fut', got {span!r}")
    vel = _pad_diff(pos, window.dt)
    acc = _pad_diff(vel, window.dt)
    return KinematicChannels(positions=pos.copy(), velocities=vel, accelerations=acc)


def count_long_tracks(records, min_len=T_OBS + T_PRED):
    """Count pedestrians with at least `min_len` consecutive frames present.

    Consecutive means adjacent in the global sorted frame sequence.
    """
    frames = sorted({r.frame_id for r in records})
    index = {f: i for i, f in enumerate(frames)}
    by_ped = {}
    for r in records:
        by_ped.setdefault(r.ped_id, []).append(index[r.frame_id])
    count = 0
    for idxs in by_ped.values():
        idxs.sort()
        run = best = 1
        for a, b in zip(idxs, idxs[1:]):
            run = run + 1 if b == a + 1 else 1
            best = max(best, run)
        if best >= min_len:
            count += 1
    return count


def leave_one_out_split(scene_names, held_out):
    """Split scene names into (train, test) with one held-out scene."""
    lookup = {str(n).lower(): n for n in scene_names}
    key = str(held_out).lower()
    if key not in lookup:
        raise ConfigError(f"held-out scene '{held_out}' not among scenes {sorted(lookup)}")
    train = [n for n in scene_names if str(n).lower() != key]
    return train, [lookup[key]]


def sdd_split(video_names):
    """Deterministic 31/17 train/test partition of the SDD video list."""
    expected = SDD_TRAIN_VIDEOS + SDD_TEST_VIDEOS
    if len(video_names) != expected:
        raise ConfigError(f"SDD split expects {expected} video names, got {len(video_names)}")
    if len(set(video_names)) != len(video_names):
        raise ConfigError("SDD video names must be unique")
    ordered = sorted(video_names)
    return ordered[:SDD_TRAIN_VIDEOS], ordered[SDD_TRAIN_VIDEOS:]


def _headings_to_track(start, speed, headings, dt):
    # headings[t] is the direction of the displacement into step t (t = 1..L-1)
    pos = [np.asarray(start, dtype=np.float64)]
    for theta in headings:
        step = speed * dt * np.array([math.cos(theta), math.sin(theta)])
        pos.append(pos[-1] + step)
    return np.stack(pos)


def generate_synthetic(kind, n_ped, seed, dt=0.4, t_obs=T_OBS, t_pred=T_PRED, n_windows=1):
    """Deterministic synthetic scene windows for oracle-based testing.

    linear: constant-velocity motion (future extrapolates the observed
    velocity exactly). still: zero displacement. turn: straight motion with
    a small observable curvature over steps 4..8, then an exact 90-degree
    direction change at step 10 (direction matches the curvature sign).
    crossing: two groups on intersecting paths; each pedestrian swerves
    30 degrees away from the nearest opposing pedestrian from step 10 on,
    so the swerve direction is a function of neighbor geometry.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ConfigError(f"unknown synthetic kind '{kind}' (choose from {SYNTHETIC_KINDS})")
    if n_ped < 1:
        raise ConfigError(f"n_ped must be >= 1, got {n_ped}")
    rng = np.random.default_rng(seed)
    length = t_obs + t_pred
    windows = []
    for _ in range(n_windows):
        tracks = _synthetic_tracks(kind, n_ped, rng, dt, length)
        windows.append(SceneWindow(
            ped_ids=list(range(1, n_ped + 1)),
            obs=tracks[:, :t_obs],
            fut=tracks[:, t_obs:],
            dt=dt,
        ))
    return windows


def _synthetic_tracks(kind, n_ped, rng, dt, length):
    tracks = np.zeros((n_ped, length, 2))
    if kind == "still":
        for i in range(n_ped):
            tracks[i, :] = rng.uniform(-5.0, 5.0, size=2)
        return tracks

    if kind == "linear":
        # Start and per-step displacement are quantized to a 2^-20 grid so the
        # cumulative sums stay exact in float64 and every displacement is
        # bitwise constant (a constant-velocity extrapolation reproduces the
        # future exactly).
        quantum = 2.0 ** -20
        for i in range(n_ped):
            start = np.round(rng.uniform(-5.0, 5.0, size=2) / quantum) * quantum
            speed = rng.uniform(0.8, 1.6)
            theta = rng.uniform(0.0, 2.0 * math.pi)
            step = np.round(speed * dt * _unit(theta) / quantum) * quantum
            for t in range(length):
                tracks[i, t] = start + t * step
        return tracks

    if kind == "turn":
        drift = math.radians(4.0)
        for i in range(n_ped):
            start = rng.uniform(-5.0, 5.0, size=2)
            speed = rng.uniform(0.8, 1.6)
            theta = rng.uniform(0.0, 2.0 * math.pi)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            headings = []
            for t in range(1, length):
                if t <= 4:
                    headings.append(theta)
                elif t <= 8:
                    headings.append(theta + sign * drift * (t - 4))
                elif t == 9:
                    headings.append(theta + sign * drift * 4)
                else:
                    headings.append(theta + sign * drift * 4 + sign * math.pi / 2.0)
            tracks[i] = _headings_to_track(start, speed, headings, dt)
        return tracks

    # crossing: group A moves along +x, group B along +y; paths meet near the
    # origin around step 10, where each pedestrian swerves away from the
    # nearest member of the other group.
    n_a = (n_ped + 1) // 2
    speed = 1.25
    base = speed * dt * 10  # distance covered by step 10
    starts = np.zeros((n_ped, 2))
    base_heading = np.zeros(n_ped)
    group = np.zeros(n_ped, dtype=int)
    for i in range(n_ped):
        lane = rng.uniform(-1.0, 1.0)
        along = rng.uniform(-0.5, 0.5)
        if i < n_a:
            starts[i] = (-base + along, lane)
            base_heading[i] = 0.0
            group[i] = 0
        else:
            starts[i] = (lane, -base + along)
            base_heading[i] = math.pi / 2.0
            group[i] = 1
    swerve = np.zeros(n_ped)
    for i in range(n_ped):
        others = [j for j in range(n_ped) if group[j] != group[i]]
        if not others:
            continue
        # position at the last observed step (index 7) under straight motion
        p_i = starts[i] + speed * dt * 7 * _unit(base_heading[i])
        nearest = min(others, key=lambda j: np.sum((starts[j] + speed * dt * 7 * _unit(base_heading[j]) - p_i) ** 2))
        p_j = starts[nearest] + speed * dt * 7 * _unit(base_heading[nearest])
        v = _unit(base_heading[i])
        rel = p_j - p_i
        cross = v[0] * rel[1] - v[1] * rel[0]
        swerve[i] = -math.pi / 6.0 if cross > 0 else math.pi / 6.0
    for i in range(n_ped):
        headings = [base_heading[i] if t < 10 else base_heading[i] + swerve[i] for t in range(1, length)]
        tracks[i] = _headings_to_track(starts[i], speed, headings, dt)
    return tracks


def _unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def load_scene_file(path, format="ethucy", downsample_every=1):
    """Read, optionally reduce (SDD), parse, and down-sample one scene file."""
    with open(path) as fh:
        text = fh.read()
    if format == "sdd":
        text = reduce_sdd_annotations(text)
    records = parse_records(text, format=format)
    return downsample(records, downsample_every)

"""Session records and the line-oriented text interchange format.

A session is one contiguous recording: ``L`` instances at strictly increasing
times, each carrying a ``D``-dimensional feature vector and optionally a
binary label, plus ``M`` event timestamps reported for the session as a
whole.  Event timestamps are noisy marks produced by an annotator; they are
not aligned to instances, which is the whole point of this package.

File format (UTF-8 text, one session per file, extension ``.session``)::

    session <id> L=<L> M=<M> D=<D> labels=<0|1>
    t <time> <f_1> ... <f_D> [<y>]      (exactly L lines)
    z <time>                            (exactly M lines)

Floats are written with ``repr`` so a save/load round trip is exact.  Event
lines may be unsorted on disk; they are sorted on ingest.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LoadError",
    "Session",
    "Dataset",
    "load_dataset",
    "save_dataset",
    "median_spacing",
]

SESSION_SUFFIX = ".session"

_ID_PATTERN = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*\Z")


class LoadError(Exception):
    """A session file is malformed; the message names file and line."""


def _positions(values: np.ndarray, what: str, sid: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"session {sid!r}: non-finite {what}")


@dataclass(frozen=True, eq=False)
class Session:
    """One recording: features and times per instance, plus event marks.

    ``true_labels`` is evaluation-only ground truth and may be absent.
    Instances must be in strictly increasing time order; event times are
    sorted on construction.
    """

    session_id: str
    instance_times: np.ndarray
    features: np.ndarray
    event_times: np.ndarray
    true_labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not _ID_PATTERN.match(self.session_id):
            raise ValueError(f"invalid session_id {self.session_id!r}")
        times = np.asarray(self.instance_times, dtype=np.float64)
        feats = np.asarray(self.features, dtype=np.float64)
        events = np.sort(np.asarray(self.event_times, dtype=np.float64))
        if times.ndim != 1 or times.size < 1:
            raise ValueError(f"session {self.session_id!r}: need at least one instance")
        if feats.ndim != 2 or feats.shape[0] != times.size or feats.shape[1] < 1:
            raise ValueError(
                f"session {self.session_id!r}: features must be (L, D) with "
                f"L={times.size}, got shape {feats.shape}"
            )
        if events.ndim != 1:
            raise ValueError(f"session {self.session_id!r}: event_times must be 1-D")
        _positions(times, "instance_times", self.session_id)
        _positions(feats, "features", self.session_id)
        _positions(events, "event_times", self.session_id)
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError(
                f"session {self.session_id!r}: instance_times not strictly increasing"
            )
        labels = self.true_labels
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (times.size,):
                raise ValueError(
                    f"session {self.session_id!r}: true_labels length "
                    f"{labels.shape} does not match L={times.size}"
                )
            if not np.isin(labels, (0, 1)).all():
                raise ValueError(f"session {self.session_id!r}: labels must be 0/1")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
        for arr in (times, feats, events):
            arr.setflags(write=False)
        object.__setattr__(self, "instance_times", times)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "event_times", events)
        object.__setattr__(self, "true_labels", labels)

    @property
    def num_instances(self) -> int:
        return self.instance_times.size

    @property
    def num_events(self) -> int:
        return self.event_times.size

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.true_labels is not None

    def with_events(self, event_times: np.ndarray) -> "Session":
        """Copy of this session with the event list replaced."""
        return Session(
            session_id=self.session_id,
            instance_times=self.instance_times,
            features=self.features,
            event_times=np.asarray(event_times, dtype=np.float64),
            true_labels=self.true_labels,
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of sessions sharing one feature dimension."""

    sessions: tuple[Session, ...]
    feature_dim: int = field(default=0)

    def __post_init__(self) -> None:
        sessions = tuple(self.sessions)
        if not sessions:
            raise ValueError("dataset must contain at least one session")
        dim = sessions[0].feature_dim
        for s in sessions:
            if s.feature_dim != dim:
                raise ValueError(
                    f"inconsistent feature_dim: session {s.session_id!r} has "
                    f"D={s.feature_dim}, expected {dim}"
                )
        ids = [s.session_id for s in sessions]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate session ids: {dup}")
        object.__setattr__(self, "sessions", sessions)
        object.__setattr__(self, "feature_dim", dim)

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self):
        return iter(self.sessions)

    def __getitem__(self, index: int) -> Session:
        return self.sessions[index]

    @property
    def has_labels(self) -> bool:
        return all(s.has_labels for s in self.sessions)

    @property
    def total_instances(self) -> int:
        return sum(s.num_instances for s in self.sessions)

    @property
    def total_events(self) -> int:
        return sum(s.num_events for s in self.sessions)

    def subset(self, indices) -> "Dataset":
        """Dataset restricted to the given session positions, in given order."""
        return Dataset(tuple(self.sessions[i] for i in indices))


def median_spacing(data: Dataset | Session) -> float:
    """Median gap between consecutive instance times, pooled over sessions."""
    sessions = data.sessions if isinstance(data, Dataset) else (data,)
    gaps = [np.diff(s.instance_times) for s in sessions if s.num_instances > 1]
    if not gaps:
        return 1.0
    return float(np.median(np.concatenate(gaps)))


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def _parse_header(path: Path, line: str) -> tuple[str, int, int, int, bool]:
    parts = line.split()
    if len(parts) != 6 or parts[0] != "session":
        raise LoadError(
            f"{path}:1: header must be "
            f"'session <id> L=<L> M=<M> D=<D> labels=<0|1>', got {line!r}"
        )
    sid = parts[1]
    values: dict[str, int] = {}
    for token, key in zip(parts[2:], ("L", "M", "D", "labels")):
        prefix = key + "="
        if not token.startswith(prefix):
            raise LoadError(f"{path}:1: expected '{key}=<int>', got {token!r}")
        try:
            values[key] = int(token[len(prefix):])
        except ValueError:
            raise LoadError(f"{path}:1: bad integer in {token!r}") from None
    if values["L"] < 1 or values["M"] < 0 or values["D"] < 1:
        raise LoadError(f"{path}:1: need L >= 1, M >= 0, D >= 1")
    if values["labels"] not in (0, 1):
        raise LoadError(f"{path}:1: labels flag must be 0 or 1")
    return sid, values["L"], values["M"], values["D"], bool(values["labels"])


def _parse_float(path: Path, lineno: int, token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise LoadError(f"{path}:{lineno}: bad {what} {token!r}") from None
    if not math.isfinite(value):
        raise LoadError(f"{path}:{lineno}: non-finite {what} {token!r}")
    return value


def _parse_session_file(path: Path) -> Session:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise LoadError(f"{path}:1: empty file")
    sid, L, M, D, labeled = _parse_header(path, lines[0])

    expected = 1 + L + M
    body = lines[1:]
    if len(body) < L + M:
        raise LoadError(
            f"{path}:{len(lines)}: expected {expected} lines "
            f"(header + {L} instances + {M} events), found {len(lines)}"
        )
    for extra_index, extra in enumerate(body[L + M:], start=expected + 1):
        if extra.strip():
            raise LoadError(f"{path}:{extra_index}: trailing content {extra!r}")

    width = 2 + D + (1 if labeled else 0)
    times = np.empty(L)
    feats = np.empty((L, D))
    labels = np.empty(L, dtype=np.int64) if labeled else None
    for row in range(L):
        lineno = 2 + row
        parts = body[row].split()
        if not parts or parts[0] != "t":
            raise LoadError(f"{path}:{lineno}: expected instance line 't ...'")
        if len(parts) != width:
            raise LoadError(
                f"{path}:{lineno}: expected {width} fields on instance line, "
                f"got {len(parts)}"
            )
        times[row] = _parse_float(path, lineno, parts[1], "time")
        for col in range(D):
            feats[row, col] = _parse_float(path, lineno, parts[2 + col], "feature")
        if labeled:
            if parts[-1] not in ("0", "1"):
                raise LoadError(f"{path}:{lineno}: label must be 0 or 1, got {parts[-1]!r}")
            labels[row] = int(parts[-1])
        if row > 0 and times[row] <= times[row - 1]:
            raise LoadError(f"{path}:{lineno}: instance_times not strictly increasing")

    events = np.empty(M)
    for row in range(M):
        lineno = 2 + L + row
        parts = body[L + row].split()
        if len(parts) != 2 or parts[0] != "z":
            raise LoadError(f"{path}:{lineno}: expected event line 'z <time>'")
        events[row] = _parse_float(path, lineno, parts[1], "time")

    try:
        return Session(sid, times, feats, events, labels)
    except ValueError as exc:
        raise LoadError(f"{path}: {exc}") from None


def load_dataset(path) -> Dataset:
    """Load a dataset from a directory of ``*.session`` files (or one file).

    Files are read in sorted name order.  Any malformed content raises
    :class:`LoadError` naming the offending file and line.
    """
    root = Path(path)
    if root.is_dir():
        files = sorted(root.glob("*" + SESSION_SUFFIX))
        if not files:
            raise LoadError(f"{root}: no {SESSION_SUFFIX} files found")
    elif root.is_file():
        files = [root]
    else:
        raise LoadError(f"{root}: no such file or directory")
    sessions = [_parse_session_file(f) for f in files]
    try:
        return Dataset(tuple(sessions))
    except ValueError as exc:
        raise LoadError(f"{root}: {exc}") from None


def _format_session(session: Session) -> str:
    labeled = session.has_labels
    out = [
        f"session {session.session_id} L={session.num_instances} "
        f"M={session.num_events} D={session.feature_dim} labels={int(labeled)}"
    ]
    for i in range(session.num_instances):
        fields = [repr(float(v)) for v in session.features[i]]
        line = f"t {float(session.instance_times[i])!r} " + " ".join(fields)
        if labeled:
            line += f" {int(session.true_labels[i])}"
        out.append(line)
    for z in session.event_times:
        out.append(f"z {float(z)!r}")
    return "\n".join(out) + "\n"


def save_dataset(dataset: Dataset, path) -> list[Path]:
    """Write one ``<session_id>.session`` file per session; returns paths."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for session in dataset:
        target = root / (session.session_id + SESSION_SUFFIX)
        target.write_text(_format_session(session), encoding="utf-8")
        written.append(target)
    return written

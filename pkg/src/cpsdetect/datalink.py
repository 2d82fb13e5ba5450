"""Physical and cyber operating-state data links and their fusion.

Physical snapshots carry grid measurements per electrical component, cyber
snapshots carry three network indicators per communication device. The
index table couples a component to the IP of its communication device, and
:func:`fuse_links` joins both sides window by window into a single ordered
link of :class:`FusedRecord` rows.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    InvalidConfigError,
    InvalidStatsError,
    InvalidTimingError,
    UnmappedDeviceError,
)

CYBER_FEATURES = ("r_dr", "r_pr", "w_th")


@dataclass(frozen=True)
class PhysicalSnapshot:
    device_id: str
    timestamp: float
    attributes: tuple[float, ...]


@dataclass(frozen=True)
class LinkPacketStats:
    link_id: str
    packets_sent: int
    packets_lost: int
    loss_threshold: float


@dataclass(frozen=True)
class PacketTiming:
    packet_id: str
    send_time: float
    receive_time: float


@dataclass(frozen=True)
class CyberSnapshot:
    device_ip: str
    timestamp: float
    delay_ratio: float
    loss_ratio: float
    threat_degree: float

    @property
    def indicators(self) -> tuple[float, float, float]:
        return (self.delay_ratio, self.loss_ratio, self.threat_degree)


@dataclass(frozen=True)
class IndexEntry:
    area: str
    line: str
    component_id: str
    ip: str


@dataclass(frozen=True)
class IndexTable:
    rows: tuple[IndexEntry, ...]

    def __post_init__(self):
        comps = [r.component_id for r in self.rows]
        ips = [r.ip for r in self.rows]
        if len(set(comps)) != len(comps):
            raise InvalidConfigError("index table: duplicate component_id")
        if len(set(ips)) != len(ips):
            raise InvalidConfigError("index table: duplicate ip")

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[str]]) -> "IndexTable":
        return cls(tuple(IndexEntry(*map(str, r)) for r in rows))

    def by_component(self) -> dict[str, IndexEntry]:
        return {r.component_id: r for r in self.rows}

    def by_ip(self) -> dict[str, IndexEntry]:
        return {r.ip: r for r in self.rows}


@dataclass(frozen=True)
class WindowConfig:
    period: float = 1.0
    alpha: float = 1.0
    dedup_tolerance: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidConfigError("window period must be > 0")
        if not 0 < self.alpha <= 1:
            raise InvalidConfigError("window alpha must lie in (0, 1]")
        if self.dedup_tolerance < 0:
            raise InvalidConfigError("dedup tolerance must be >= 0")

    def window_of(self, t: float) -> int | None:
        """Window index of timestamp ``t``, or None when ``t`` falls outside ε."""
        w = math.floor(t / self.period)
        offset = t - w * self.period
        if offset >= self.period - self.alpha * self.period:
            return w
        return None


@dataclass(frozen=True)
class FusedRecord:
    timestamp: float
    area: str
    line: str
    component_id: str
    ip: str
    features: tuple[float, ...]
    repeat_count: int = 1
    label: str | None = None


@dataclass(frozen=True)
class StateDataLink:
    """Ordered, immutable sequence of fused records."""

    records: tuple[FusedRecord, ...]
    dropped: int = 0
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        widths = {len(r.features) for r in self.records}
        if len(widths) > 1:
            raise InvalidConfigError(f"ragged feature widths in link: {sorted(widths)}")
        ts = [r.timestamp for r in self.records]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise InvalidConfigError("link records must be sorted by timestamp")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def width(self) -> int:
        return len(self.records[0].features) if self.records else 0

    def features(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, 0))
        return np.array([r.features for r in self.records], dtype=float)

    def weights(self) -> np.ndarray:
        return np.array([r.repeat_count for r in self.records], dtype=float)

    def labels(self) -> list[str | None]:
        return [r.label for r in self.records]

    def with_labels(self, labels: Sequence[str | None]) -> "StateDataLink":
        if len(labels) != len(self.records):
            raise InvalidConfigError("label count does not match record count")
        recs = tuple(replace(r, label=lab) for r, lab in zip(self.records, labels))
        return replace(self, records=recs)


def compute_delay_ratio(stats: Sequence[LinkPacketStats]) -> float:
    """Mean absolute deviation of per-link loss fraction from its threshold, x100."""
    if not stats:
        raise EmptyInputError("delay ratio needs at least one link")
    total = 0.0
    for s in stats:
        if s.packets_sent <= 0:
            raise InvalidStatsError(f"link {s.link_id}: packets_sent must be >= 1")
        if s.packets_lost < 0 or s.packets_lost > s.packets_sent:
            raise InvalidStatsError(f"link {s.link_id}: packets_lost out of range")
        total += abs(s.packets_lost / s.packets_sent - s.loss_threshold)
    return total / len(stats) * 100.0


def compute_loss_ratio(timings: Sequence[PacketTiming]) -> float:
    """Mean packet latency (receive minus send), x100."""
    if not timings:
        raise EmptyInputError("loss ratio needs at least one packet")
    total = 0.0
    for p in timings:
        if p.receive_time < p.send_time:
            raise InvalidTimingError(f"packet {p.packet_id}: received before it was sent")
        total += p.receive_time - p.send_time
    return total / len(timings) * 100.0


def compute_threat_degree(group: Sequence[float]) -> float:
    """Mean absolute deviation of alarm threat degrees within one IP group, x100."""
    if len(group) == 0:
        raise EmptyInputError("threat degree needs at least one alarm")
    w = np.asarray(group, dtype=float)
    if not np.all(np.isfinite(w)):
        raise InvalidStatsError("threat degrees must be finite")
    return float(np.abs(w - w.mean()).sum() / w.size * 100.0)


def cyber_snapshot(
    ip: str,
    timestamp: float,
    stats: Sequence[LinkPacketStats],
    timings: Sequence[PacketTiming],
    alarms: Sequence[float],
) -> CyberSnapshot:
    return CyberSnapshot(
        device_ip=ip,
        timestamp=timestamp,
        delay_ratio=compute_delay_ratio(stats),
        loss_ratio=compute_loss_ratio(timings),
        threat_degree=compute_threat_degree(alarms),
    )


def fuse_links(
    physical: Sequence[PhysicalSnapshot],
    cyber: Sequence[CyberSnapshot],
    index: IndexTable,
    window: WindowConfig,
) -> StateDataLink:
    """Join physical and cyber rows sharing an index entry and a sampling window.

    Within one (window, index entry) cell the rows of each side are taken in
    timestamp order and paired positionally; surplus rows on either side and
    rows outside the sampling window are dropped and counted.
    """
    by_comp = index.by_component()
    by_ip = index.by_ip()
    bad_comp = {p.device_id for p in physical if p.device_id not in by_comp}
    bad_ip = {c.device_ip for c in cyber if c.device_ip not in by_ip}
    if bad_comp or bad_ip:
        raise UnmappedDeviceError(bad_comp, bad_ip)

    widths = {len(p.attributes) for p in physical}
    if len(widths) > 1:
        raise InvalidConfigError(f"physical snapshots have ragged widths: {sorted(widths)}")

    phys_cells = defaultdict(list)
    cyber_cells = defaultdict(list)
    dropped = 0
    for i, p in enumerate(physical):
        w = window.window_of(p.timestamp)
        if w is None:
            dropped += 1
            continue
        phys_cells[(w, p.device_id)].append((p.timestamp, i, p))
    for i, c in enumerate(cyber):
        w = window.window_of(c.timestamp)
        if w is None:
            dropped += 1
            continue
        cyber_cells[(w, by_ip[c.device_ip].component_id)].append((c.timestamp, i, c))

    out = []
    for key in set(phys_cells) | set(cyber_cells):
        ps = sorted(phys_cells.get(key, []), key=lambda e: (e[0], e[1]))
        cs = sorted(cyber_cells.get(key, []), key=lambda e: (e[0], e[1]))
        n = min(len(ps), len(cs))
        dropped += len(ps) + len(cs) - 2 * n
        entry = by_comp[key[1]]
        for (tp, ip_, p), (_, ic, c) in zip(ps[:n], cs[:n]):
            rec = FusedRecord(
                timestamp=tp,
                area=entry.area,
                line=entry.line,
                component_id=entry.component_id,
                ip=entry.ip,
                features=tuple(float(v) for v in p.attributes) + c.indicators,
            )
            out.append((tp, ip_, ic, rec))
    out.sort(key=lambda e: e[:3])

    h = widths.pop() if widths else 0
    names = tuple(f"attr_{j + 1}" for j in range(h)) + CYBER_FEATURES
    return StateDataLink(tuple(e[3] for e in out), dropped=dropped, feature_names=names)


def compress_repeats(link: StateDataLink, tolerance: float = 0.0) -> StateDataLink:
    """Collapse runs of consecutive near-identical records into their first member.

    A run continues while the next record's features differ from the run's
    first record by at most ``tolerance`` in every component. The survivor's
    repeat_count becomes the summed count of the run.
    """
    if tolerance < 0:
        raise InvalidConfigError("tolerance must be >= 0")
    out: list[FusedRecord] = []
    head = None
    count = 0
    for rec in link.records:
        if head is not None and _within(head.features, rec.features, tolerance):
            count += rec.repeat_count
            continue
        if head is not None:
            out.append(replace(head, repeat_count=count))
        head, count = rec, rec.repeat_count
    if head is not None:
        out.append(replace(head, repeat_count=count))
    return replace(link, records=tuple(out))


def _within(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))

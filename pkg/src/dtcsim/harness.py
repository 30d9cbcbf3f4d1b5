"""Repetition driver: build overlays, pick roots and faults, run, aggregate."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from statistics import fmean
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .baselines import alm_broadcast, simple_flood
from .can import CanNetwork, build_can
from .chord import ChordNetwork, build_chord
from .dtc import Arc, AreaSpec, CanBox, FaultModel, TreeStats, chord_scope, span_multi_tree, span_tree
from .hashspace import SCALE, Box, ContractViolation, Rng, derive_seed

OVERLAYS = ("can", "chord")
ALGORITHMS = ("dtc", "alm", "flood")
HIST_LABELS = ("0-1", "2-3", "4-5", "6-7", "8-9", "10-11", "12-13", ">=14")


class ConfigError(ContractViolation):
    """An invalid or unsupported simulation configuration."""


@dataclass(frozen=True)
class SimConfig:
    overlay: str = "can"
    n: int = 2000
    d: int = 10
    seed: int = 0
    repetitions: int = 30
    malicious_fraction: float = 0.0
    algorithm: str = "dtc"
    area: Optional[AreaSpec] = None  # None spans the whole space
    split_roots: int = 1
    ring_bits: int = 64

    def __post_init__(self) -> None:
        if self.overlay not in OVERLAYS:
            raise ConfigError(f"unknown overlay {self.overlay!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "alm" and self.overlay != "can":
            raise ConfigError("ALM is defined on CAN only")
        if self.n < 1 or self.d < 1 or self.repetitions < 1 or self.split_roots < 1:
            raise ConfigError("n, d, repetitions and split_roots must be positive")
        if not 0 <= self.malicious_fraction < 1:
            raise ConfigError("malicious_fraction must lie in [0, 1)")
        if self.algorithm != "dtc" and (self.area is not None or self.split_roots != 1):
            raise ConfigError("areas and split roots apply to DTC only")
        if self.area is not None:
            kind = Arc if self.overlay == "chord" else CanBox
            if not isinstance(self.area, kind):
                raise ConfigError(f"{self.overlay} needs a {kind.__name__} area")
            if isinstance(self.area, CanBox) and self.area.box.dims != self.d:
                raise ConfigError("area dimension does not match d")

    @property
    def label(self) -> str:
        if self.algorithm == "dtc":
            return "DTC-CAN" if self.overlay == "can" else "DTC-Chord"
        if self.algorithm == "alm":
            return "ALM"
        return "Flooding" if self.overlay == "can" else "Flooding-Chord"


@dataclass
class RepetitionResult:
    in_area: int
    total_messages: int
    histogram: List[int]
    depth_histogram: Dict[int, int]
    mean_depth: float
    max_depth: int
    unreached: int
    malicious: int

    @property
    def overhead(self) -> float:
        return self.total_messages / self.in_area - 1

    @property
    def unreached_fraction(self) -> float:
        return self.unreached / self.in_area


@dataclass
class AggregateMetrics:
    config: SimConfig
    reps: List[RepetitionResult] = field(repr=False)

    def _mean(self, attr: str) -> float:
        return fmean(getattr(r, attr) for r in self.reps)

    @property
    def histogram(self) -> List[float]:
        return [fmean(r.histogram[i] for r in self.reps) for i in range(len(HIST_LABELS))]

    @property
    def depth_histogram(self) -> Dict[int, float]:
        depths = sorted({k for r in self.reps for k in r.depth_histogram})
        return {k: fmean(r.depth_histogram.get(k, 0) for r in self.reps) for k in depths}

    @property
    def total_messages(self) -> float:
        return self._mean("total_messages")

    @property
    def in_area(self) -> float:
        return self._mean("in_area")

    @property
    def overhead(self) -> float:
        return self._mean("overhead")

    @property
    def unreached_fraction(self) -> float:
        return self._mean("unreached_fraction")

    @property
    def mean_depth(self) -> float:
        return self._mean("mean_depth")

    @property
    def max_depth(self) -> int:
        return max(r.max_depth for r in self.reps)


def receive_histogram(stats: TreeStats) -> List[int]:
    """Nodes per receive-count bin: 0-1, 2-3, ..., 12-13, 14 or more."""
    hist = [0] * len(HIST_LABELS)
    for v in stats.in_area:
        hist[min(stats.receive_count.get(v, 0) // 2, len(HIST_LABELS) - 1)] += 1
    return hist


def summarize(stats: TreeStats) -> RepetitionResult:
    reached = [stats.depth[v] for v in stats.in_area if v in stats.depth]
    dh: Dict[int, int] = {}
    for dep in reached:
        dh[dep] = dh.get(dep, 0) + 1
    return RepetitionResult(
        in_area=len(stats.in_area),
        total_messages=stats.total_messages,
        histogram=receive_histogram(stats),
        depth_histogram=dict(sorted(dh.items())),
        mean_depth=fmean(reached) if reached else 0.0,
        max_depth=max(reached, default=0),
        unreached=len(stats.unreached),
        malicious=len(stats.malicious & stats.in_area),
    )


# ---------------------------------------------------------------------------
# per-repetition pieces; each is a pure function of (config, repetition index)


def network_seed(cfg: SimConfig, rep: int) -> int:
    return derive_seed(cfg.seed, "net", cfg.overlay, cfg.n, cfg.d if cfg.overlay == "can" else 0, rep)


def build_network(cfg: SimConfig, rep: int) -> Union[CanNetwork, ChordNetwork]:
    rng = Rng(network_seed(cfg, rep))
    if cfg.overlay == "can":
        return build_can(cfg.n, cfg.d, rng)
    return build_chord(cfg.n, rng, cfg.ring_bits)


def split_area(area: AreaSpec, parts: int) -> List[AreaSpec]:
    """Cut an area into ``parts`` disjoint pieces.

    Arcs are cut into near-equal sub-arcs.  Boxes are bisected recursively
    along their longest side (lowest index first), the way CAN zones split,
    so pieces of a dyadic area line up with zone borders.
    """
    if isinstance(area, Arc):
        cuts = [area.length * i // parts for i in range(parts + 1)]
        return [Arc(area.start + a, b - a) for a, b in zip(cuts, cuts[1:]) if b > a]

    def bisect(box: Box, k: int) -> List[Box]:
        if k == 1:
            return [box]
        j = max(range(box.dims), key=lambda i: (box.extent[i], -i))
        half = box.extent[j] // 2
        if half == 0:
            raise ConfigError("area too small to split")
        left = Box(box.origin, box.extent[:j] + (half,) + box.extent[j + 1:])
        right_origin = box.origin[:j] + ((box.origin[j] + half) % SCALE,) + box.origin[j + 1:]
        right = Box(right_origin, box.extent[:j] + (box.extent[j] - half,) + box.extent[j + 1:])
        return bisect(left, k // 2) + bisect(right, k - k // 2)

    return [CanBox(b) for b in bisect(area.box.normalized(), parts)]


def pick_root(net, area: Optional[AreaSpec], rng: Rng) -> Tuple[int, Optional[AreaSpec]]:
    """Root and effective area for one tree.

    On CAN the root is a uniformly chosen node meeting the area.  On Chord
    the tree starts at the first node of the arc; for the whole ring the
    arc starts at a uniformly chosen node.
    """
    if isinstance(net, ChordNetwork):
        if area is None:
            root = rng.choice(net.ids)
            return root, Arc(root, net.size)
        return chord_scope(net, area)[0], area
    if area is None:
        return rng.choice(sorted(net)), None
    return rng.choice(sorted(net.zones_in(area.box))), area


def draw_faults(cfg: SimConfig, net, roots: Sequence[int], rep: int) -> FaultModel:
    """``round(f * n)`` malicious nodes, uniform over the non-root nodes."""
    k = round(cfg.malicious_fraction * cfg.n)
    if k == 0:
        return FaultModel(frozenset())
    excluded = set(roots)
    pool = [v for v in sorted(net) if v not in excluded]
    rng = Rng(derive_seed(cfg.seed, "faults", cfg.malicious_fraction, rep))
    return FaultModel(frozenset(rng.sample(pool, min(k, len(pool)))))


def run_repetition(cfg: SimConfig, rep: int, net=None) -> Tuple[TreeStats, RepetitionResult]:
    """One repetition; ``net`` may be passed in if already built for (cfg, rep)."""
    if net is None:
        net = build_network(cfg, rep)
    rng = Rng(derive_seed(cfg.seed, "root", rep))
    if cfg.algorithm != "dtc":
        root, _ = pick_root(net, None, rng)
        faults = draw_faults(cfg, net, [root], rep)
        algo = alm_broadcast if cfg.algorithm == "alm" else simple_flood
        stats = algo(net, root, faults)
        return stats, summarize(stats)
    area = cfg.area
    if cfg.split_roots == 1:
        root, area = pick_root(net, area, rng)
        faults = draw_faults(cfg, net, [root], rep)
        stats = span_tree(net, root, area, faults)
        return stats, summarize(stats)
    if area is None:
        area = Arc(rng.choice(net.ids), net.size) if isinstance(net, ChordNetwork) else CanBox(Box.whole(net.dims))
    plan = [pick_root(net, sub, rng) for sub in split_area(area, cfg.split_roots)]
    faults = draw_faults(cfg, net, [r for r, _ in plan], rep)
    stats = span_multi_tree(net, plan, faults)
    return stats, summarize(stats)


def run(cfg: SimConfig) -> AggregateMetrics:
    return AggregateMetrics(cfg, [run_repetition(cfg, i)[1] for i in range(cfg.repetitions)])


def malicious_sweep(base: SimConfig, fractions: Sequence[float],
                    algorithms: Sequence[Tuple[str, str]] = (("can", "dtc"), ("chord", "dtc"), ("can", "alm"))
                    ) -> Dict[str, List[AggregateMetrics]]:
    """Unreached fraction per algorithm and malicious fraction.

    Each overlay is built once per repetition and shared by every fraction
    and algorithm; results equal those of :func:`run` on the same configs.
    """
    for f in fractions:
        if not 0 <= f <= 0.9:
            raise ConfigError("fractions must lie in [0, 0.9]")
    configs = {(ov, al, f): replace(base, overlay=ov, algorithm=al, malicious_fraction=f)
               for ov, al in algorithms for f in fractions}
    reps: Dict[Tuple[str, str, float], List[RepetitionResult]] = {k: [] for k in configs}
    for i in range(base.repetitions):
        nets = {}
        for (ov, al, f), cfg in configs.items():
            if ov not in nets:
                nets[ov] = build_network(cfg, i)
            reps[(ov, al, f)].append(run_repetition(cfg, i, nets[ov])[1])
    out: Dict[str, List[AggregateMetrics]] = {}
    for ov, al in algorithms:
        label = configs[(ov, al, fractions[0])].label
        out[label] = [AggregateMetrics(configs[(ov, al, f)], reps[(ov, al, f)]) for f in fractions]
    return out

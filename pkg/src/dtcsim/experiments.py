"""Named reproduction scenarios, CSV output and the prefix-search demo."""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from statistics import fmean
from typing import Callable, Dict, Iterable, List, Mapping, Sequence, Tuple

import yaml

from .can import CanNetwork, build_can
from .dtc import Arc, CanBox, CoverageReport, TreeStats, collect_responses, span_tree
from .harness import (HIST_LABELS, ConfigError, SimConfig, build_network, malicious_sweep, run,
                      run_repetition)
from .hashspace import SCALE, Box, ContractViolation, Rng, derive_seed
from .prefixmap import (DEFAULT_CHARSET, PrefixArea, PrefixCodec, expected_nodes_in_area, key_to_point,
                        matches, prefix_to_area)

OUT_ENV = "DTCSIM_OUT"
SCENARIOS = ("table2", "fig4a", "fig4b", "fig5-absolute", "fig5-relative", "fig6", "table1", "prefix-demo", "custom")
SWEEP_KEYS = ("sizes", "dims", "fractions", "keys", "queries")

FIG5_SIZES = (200, 500, 1000, 2000, 5000, 10000, 20000)
FIG6_FRACTIONS = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


# ---------------------------------------------------------------------------
# CSV


@dataclass
class CsvReport:
    name: str
    header: List[str]
    rows: List[List[object]] = field(default_factory=list)

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([fmt(x) for x in row])
        return buf.getvalue()

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir) / f"{self.name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.render())
        return path


def fmt(x: object) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, (float, Fraction)):
        return f"{float(x):.4f}"
    return str(x)


# ---------------------------------------------------------------------------
# scenario plumbing


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    overrides: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.name!r}; choose from {', '.join(SCENARIOS)}")
        known = {f.name for f in fields(SimConfig)} | set(SWEEP_KEYS)
        bad = sorted(set(self.overrides) - known)
        if bad:
            raise ConfigError(f"unknown config keys: {', '.join(bad)}")

    def config(self, **base) -> SimConfig:
        """Scenario defaults, overridden by user values (sweep keys excluded)."""
        merged = dict(base)
        merged.update({k: v for k, v in self.overrides.items() if k not in SWEEP_KEYS})
        try:
            return SimConfig(**merged)
        except TypeError as e:
            raise ConfigError(f"bad config value: {e}") from None

    def sweep(self, key: str, default: Sequence) -> List:
        value = self.overrides.get(key, default)
        if isinstance(value, (str, bytes)) or not isinstance(value, Iterable):
            raise ConfigError(f"{key} must be a list")
        return list(value)


def _with(cfg: SimConfig, **kw) -> SimConfig:
    return replace(cfg, **kw)


TABLE2_SET = (("can", "dtc"), ("can", "flood"), ("can", "alm"), ("chord", "dtc"))


def table2(spec: ScenarioSpec) -> List[CsvReport]:
    base = spec.config(n=2000, d=10, repetitions=30)
    results = [run(_with(base, overlay=o, algorithm=a)) for o, a in TABLE2_SET]
    rep = CsvReport("table2", ["messages_received"] + [_col(m.config.label) for m in results])
    for i, label in enumerate(HIST_LABELS):
        rep.rows.append([label] + [m.histogram[i] for m in results])
    rep.rows.append(["sum"] + [m.total_messages for m in results])
    return [rep]


def _col(label: str) -> str:
    return label.lower().replace("-", "_")


def _depth_scenario(spec: ScenarioSpec, name: str, d: int, algorithms) -> List[CsvReport]:
    base = spec.config(n=20000, d=d, repetitions=30)
    results = [run(_with(base, overlay=o, algorithm=a)) for o, a in algorithms]
    hists = [m.depth_histogram for m in results]
    top = max(max(h) for h in hists)
    rep = CsvReport(name, ["hops"] + [_col(m.config.label) for m in results])
    for k in range(top + 1):
        rep.rows.append([k] + [h.get(k, 0.0) for h in hists])
    summary = CsvReport(f"{name}_summary", ["algorithm", "mean_depth", "max_depth", "total_messages"])
    for m in results:
        summary.rows.append([m.config.label, m.mean_depth, m.max_depth, m.total_messages])
    return [rep, summary]


def fig4a(spec: ScenarioSpec) -> List[CsvReport]:
    return _depth_scenario(spec, "fig4a", 5, (("can", "dtc"), ("can", "alm"), ("can", "flood")))


def fig4b(spec: ScenarioSpec) -> List[CsvReport]:
    return _depth_scenario(spec, "fig4b", 10, (("can", "dtc"), ("can", "alm"), ("can", "flood"), ("chord", "dtc")))


def overhead_rows(spec: ScenarioSpec, dims: Sequence[int], sizes: Sequence[int]) -> List[Tuple[int, int, float, float]]:
    """(d, n, mean ALM messages, mean DTC-CAN messages) per configuration."""
    out = []
    for d in dims:
        for n in sizes:
            base = spec.config(n=n, d=d, repetitions=30)
            alm = run(_with(base, algorithm="alm"))
            dtc = run(_with(base, algorithm="dtc"))
            out.append((d, n, alm.total_messages, dtc.total_messages))
    return out


def fig5_absolute(spec: ScenarioSpec) -> List[CsvReport]:
    rows = overhead_rows(spec, spec.sweep("dims", (5, 10, 15, 20)), spec.sweep("sizes", FIG5_SIZES))
    rep = CsvReport("fig5_absolute", ["d", "n", "alm_messages", "dtc_can_messages", "extra_messages"])
    rep.rows = [[d, n, a, b, a - b] for d, n, a, b in rows]
    return [rep]


def fig5_relative(spec: ScenarioSpec) -> List[CsvReport]:
    rows = overhead_rows(spec, spec.sweep("dims", (5, 10, 15)), spec.sweep("sizes", FIG5_SIZES))
    rep = CsvReport("fig5_relative", ["d", "n", "above_threshold", "relative_overhead"])
    rep.rows = [[d, n, n >= 2 ** d, a / b - 1] for d, n, a, b in rows]
    return [rep]


@dataclass
class SplitRootResult:
    roots: int
    in_area: float
    gap_fraction: float
    unreached_fraction: float


def split_root_study(base: SimConfig, area: CanBox, parts: int) -> Tuple[SplitRootResult, SplitRootResult]:
    """Single tree versus ``parts`` disjoint sub-trees over the same area.

    Both variants see the same network, faults and repetitions.  The gap is
    the share of the area whose responses never reach a root.
    """
    out = []
    for k in (1, parts):
        cfg = _with(base, overlay="can", algorithm="dtc", area=area, split_roots=k)
        gaps, unreached, sizes = [], [], []
        for i in range(cfg.repetitions):
            net = build_network(cfg, i)
            stats, rep = run_repetition(cfg, i, net)
            gaps.append(float(collect_responses(stats, net, area).gap_fraction))
            unreached.append(rep.unreached_fraction)
            sizes.append(rep.in_area)
        out.append(SplitRootResult(k, fmean(sizes), fmean(gaps), fmean(unreached)))
    return out[0], out[1]


def fig6(spec: ScenarioSpec) -> List[CsvReport]:
    base = spec.config(n=20000, d=10, repetitions=30)
    fractions = spec.sweep("fractions", FIG6_FRACTIONS)
    curves = malicious_sweep(base, fractions)
    rep = CsvReport("fig6", ["malicious_fraction"] + [_col(k) + "_unreached" for k in curves])
    for i, f in enumerate(fractions):
        rep.rows.append([float(f)] + [curves[k][i].unreached_fraction for k in curves])
    # split roots: a quarter of a 16000-node CAN holds about 4000 nodes
    split_base = _with(base, n=16000)
    area = CanBox(Box((0,) * base.d, (SCALE // 2, SCALE // 2) + (SCALE,) * (base.d - 2)))
    mit = CsvReport("fig6_split_roots", ["malicious_fraction", "roots", "in_area", "gap_fraction",
                                         "unreached_fraction"])
    for f in (0.01, 0.1):
        for r in split_root_study(_with(split_base, malicious_fraction=f), area, 10):
            mit.rows.append([f, r.roots, r.in_area, r.gap_fraction, r.unreached_fraction])
    return [rep, mit]


def table1(spec: ScenarioSpec) -> List[CsvReport]:
    n = spec.overrides.get("n", 10 ** 6)
    f1 = PrefixCodec(split_factor=1)
    f3 = PrefixCodec(split_factor=3)
    rep = CsvReport("table1", ["prefix_length", "nodes_in_area", "share_factor1_pct", "share_factor3_pct"])
    for length in range(11):
        p = "A" * length
        a1 = prefix_to_area(f1, p)
        a3 = prefix_to_area(f3, p)
        rep.rows.append([length, expected_nodes_in_area(n, a1), f"{float(a1.share) * 100:.6g}",
                         f"{float(a3.share) * 100:.6g}"])
    return [rep]


# ---------------------------------------------------------------------------
# prefix search over a populated CAN


@dataclass
class SearchResult:
    prefix: str
    area: PrefixArea
    root: int
    matches: List[str]
    stats: TreeStats
    coverage: CoverageReport

    @property
    def messages(self) -> int:
        return self.stats.total_messages

    @property
    def nodes_in_area(self) -> int:
        return len(self.stats.in_area)


class PrefixIndex:
    """A CAN holding object names placed by a :class:`PrefixCodec`."""

    def __init__(self, n: int, keys: Iterable[str], codec: PrefixCodec, d: int = 2, seed: int = 0):
        if n < 1:
            raise ContractViolation("the network needs at least one node")
        self.codec = codec
        self.seed = seed
        self.net: CanNetwork = build_can(n, d, Rng(derive_seed(seed, "prefix-net", n, d)))
        self.store: Dict[int, List[str]] = {}
        self.keys: List[str] = []
        for k in keys:
            k = k.strip()
            if not k:
                continue
            self.keys.append(k)
            self.store.setdefault(self.net.owner(key_to_point(codec, k, d)), []).append(k)

    def search(self, prefix: str) -> SearchResult:
        self.codec.indices(prefix)  # rejects illegal symbols
        area = prefix_to_area(self.codec, prefix)
        box = CanBox(area.in_dims(self.net.dims))
        rng = Rng(derive_seed(self.seed, "prefix-root", prefix.upper()))
        root = rng.choice(sorted(self.net.zones_in(box.box)))
        stats = span_tree(self.net, root, box)
        coverage = collect_responses(stats, self.net, box)
        found = sorted(k for v in coverage.responded for k in matches(self.codec, self.store.get(v, ()), prefix))
        return SearchResult(prefix, area, root, found, stats, coverage)


def prefix_search_demo(n: int, keys: Iterable[str], query_prefix: str, split_factor=1, d: int = 2,
                       seed: int = 0) -> SearchResult:
    return PrefixIndex(n, keys, PrefixCodec(split_factor=split_factor), d, seed).search(query_prefix)


def random_keys(rng: Rng, count: int, charset: str = DEFAULT_CHARSET, min_len: int = 3, max_len: int = 10) -> List[str]:
    return ["".join(rng.choice(charset) for _ in range(min_len + rng.below(max_len - min_len + 1)))
            for _ in range(count)]


def random_prefixes(rng: Rng, keys: Sequence[str], count: int, charset: str = DEFAULT_CHARSET) -> List[str]:
    """Half drawn from stored keys, half free-form (possibly matching nothing)."""
    out = []
    for i in range(count):
        if i % 2 == 0:
            k = rng.choice(keys)
            out.append(k[: 1 + rng.below(min(len(k), 6))])
        else:
            out.append("".join(rng.choice(charset) for _ in range(1 + rng.below(4))))
    return out


def prefix_demo(spec: ScenarioSpec) -> List[CsvReport]:
    seed = spec.config().seed
    n = spec.overrides.get("n", 1000)
    d = spec.overrides.get("d", 2)
    rng = Rng(derive_seed(seed, "prefix-demo"))
    keys = random_keys(rng, int(spec.overrides.get("keys", 10000)))
    prefixes = random_prefixes(rng, keys, int(spec.overrides.get("queries", 100)))
    rep = CsvReport("prefix_demo", ["split_factor", "prefix", "matches", "oracle_matches", "exact",
                                    "nodes_in_area", "messages"])
    for sf in ("0.5", "1", "3"):
        index = PrefixIndex(n, keys, PrefixCodec(split_factor=sf), d, seed)
        for p in prefixes:
            res = index.search(p)
            oracle = sorted(matches(index.codec, keys, p))
            rep.rows.append([sf, p, len(res.matches), len(oracle), res.matches == oracle,
                             res.nodes_in_area, res.messages])
    return [rep]


def custom(spec: ScenarioSpec) -> List[CsvReport]:
    m = run(spec.config())
    cfg = m.config
    rep = CsvReport("custom", ["algorithm", "n", "d", "repetitions", "malicious_fraction", "split_roots",
                               "in_area", "total_messages", "overhead", "mean_depth", "max_depth",
                               "unreached_fraction"] + [f"hist_{h}" for h in HIST_LABELS])
    rep.rows.append([cfg.label, cfg.n, cfg.d, cfg.repetitions, cfg.malicious_fraction, cfg.split_roots,
                     m.in_area, m.total_messages, m.overhead, m.mean_depth, m.max_depth,
                     m.unreached_fraction] + m.histogram)
    return [rep]


RUNNERS: Dict[str, Callable[[ScenarioSpec], List[CsvReport]]] = {
    "table2": table2,
    "fig4a": fig4a,
    "fig4b": fig4b,
    "fig5-absolute": fig5_absolute,
    "fig5-relative": fig5_relative,
    "fig6": fig6,
    "table1": table1,
    "prefix-demo": prefix_demo,
    "custom": custom,
}


def run_scenario(spec: ScenarioSpec) -> List[CsvReport]:
    return RUNNERS[spec.name](spec)


# ---------------------------------------------------------------------------
# config files


def parse_area(value, d: int, overlay: str):
    if value is None or value == "full":
        return None
    if not isinstance(value, Mapping):
        raise ConfigError("area must be 'full' or a mapping")
    if overlay == "chord":
        try:
            return Arc(int(value["start"]), int(value["length"]))
        except KeyError as e:
            raise ConfigError(f"chord area needs {e.args[0]!r}") from None
    try:
        box = Box.of([Fraction(str(x)) for x in value["origin"]], [Fraction(str(x)) for x in value["extent"]])
    except KeyError as e:
        raise ConfigError(f"CAN area needs {e.args[0]!r}") from None
    if box.dims != d:
        raise ConfigError("area dimension does not match d")
    return CanBox(box)


def load_config(path) -> Dict[str, object]:
    """Read a YAML config; returns the override mapping (``scenario`` and ``out`` included)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config {path}: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    if "area" in data:
        data["area"] = parse_area(data["area"], int(data.get("d", 10)), str(data.get("overlay", "can")))
    return data


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "results"))

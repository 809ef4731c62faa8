"""Experiment configuration, batch orchestration and output files.

A configuration is one JSON document. Example::

    {
      "name": "sec6-batch",
      "n": 20,
      "graph": {"generator": {"density": 0.2, "per_trial": true}},
      "topology": {"mode": "static"},
      "variant": "no-oscillation",
      "initial_states": {"uniform": [1, 50]},
      "trials": 1000,
      "seed": 6,
      "outputs": {"csv": "trials.csv", "summary": "summary.json"}
    }

``graph`` is either ``{"generator": {...}}``, ``{"file": path}``,
``{"builtin": "four-node"}`` or an inline ``{"n": .., "edges": [..]}`` document.
``topology.mode`` is ``static``, ``window_union`` (``window_l``,
``duplication``) or ``iid`` (``members``: a count for a random edge partition,
or a list of graph documents, plus optional ``probabilities``).
Relative paths resolve against the directory of the config file.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .graph import (
    Digraph,
    TopologySchedule,
    four_node_digraph,
    is_strongly_connected,
    random_strongly_connected,
    split_collection,
)
from .protocol import Variant
from .randomness import ScriptedChoice, ScriptedSource, SplitMix64, derive_seed, trial_seed
from .simulation import TrialConfig, TrialRecord, run_batch, write_summary_csv, write_trace

PRESETS = ("example1", "fig3-static", "fig3-dynamic", "sec6-batch")

_GRAPH_KEY = 0x6A
_STATES_KEY = 0x1A
_TOPOLOGY_KEY = 0x70


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""

    def __init__(self, field_name: str, problem: str) -> None:
        super().__init__(f"{field_name}: {problem}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    name: str
    n: int
    graph: dict
    topology: dict = field(default_factory=lambda: {"mode": "static"})
    variant: Variant = Variant.NO_OSCILLATION
    initial_states: dict = field(default_factory=lambda: {"uniform": [1, 50]})
    trials: int = 1
    seed: int = 0
    max_rounds: Optional[int] = None
    stability_window: Optional[int] = None
    require_absorbed: bool = False
    observe_after: int = 0
    script: Optional[list] = None
    outputs: dict = field(default_factory=dict)
    parallelism: int = 1
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Optional[Path] = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        for key in doc:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for key in ("name", "n", "graph"):
            if key not in doc:
                raise ConfigError(key, "required field is missing")
        kwargs = dict(doc)
        try:
            kwargs["variant"] = Variant(doc.get("variant", Variant.NO_OSCILLATION.value))
        except ValueError:
            raise ConfigError("variant", f"expected one of {[v.value for v in Variant]}") from None
        cfg = cls(**kwargs, base_dir=Path(base_dir) if base_dir else Path.cwd())
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"not valid JSON ({exc})") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def validate(self) -> None:
        def need_int(name: str, value: Any, lo: int) -> None:
            if not isinstance(value, int) or isinstance(value, bool) or value < lo:
                raise ConfigError(name, f"expected an integer >= {lo}, got {value!r}")

        need_int("n", self.n, 2)
        need_int("trials", self.trials, 1)
        need_int("seed", self.seed, 0)
        need_int("parallelism", self.parallelism, 1)
        need_int("observe_after", self.observe_after, 0)
        if self.max_rounds is not None:
            need_int("max_rounds", self.max_rounds, 1)
        if self.stability_window is not None:
            need_int("stability_window", self.stability_window, 1)
        if not isinstance(self.graph, dict):
            raise ConfigError("graph", "expected an object")
        gen = self.graph.get("generator")
        if gen is not None:
            d = gen.get("density", 0.2)
            if not isinstance(d, (int, float)) or not 0 <= d <= 1:
                raise ConfigError("graph.generator.density", f"expected a number in [0, 1], got {d!r}")
        elif not {"file", "builtin", "edges"} & self.graph.keys():
            raise ConfigError("graph", "expected one of 'generator', 'file', 'builtin' or an inline digraph")
        if self.graph.get("builtin") not in (None, "four-node"):
            raise ConfigError("graph.builtin", f"unknown builtin {self.graph['builtin']!r}")
        mode = self.topology.get("mode", "static")
        if mode not in ("static", "window_union", "iid"):
            raise ConfigError("topology.mode", f"expected static, window_union or iid, got {mode!r}")
        if mode == "window_union":
            need_int("topology.window_l", self.topology.get("window_l"), 1)
        if mode == "iid" and "members" not in self.topology:
            raise ConfigError("topology.members", "required for the iid mode")
        init = self.initial_states
        if "values" in init:
            vals = init["values"]
            if not isinstance(vals, list) or len(vals) != self.n or not all(isinstance(v, int) for v in vals):
                raise ConfigError("initial_states.values", f"expected {self.n} integers")
        elif "uniform" in init:
            rng = init["uniform"]
            if not (isinstance(rng, list) and len(rng) == 2 and all(isinstance(v, int) for v in rng) and rng[0] <= rng[1]):
                raise ConfigError("initial_states.uniform", "expected [lo, hi] integers with lo <= hi")
        else:
            raise ConfigError("initial_states", "expected 'values' or 'uniform'")

    def path(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    ref = resources.files("quantavg") / "presets" / f"{name}.json"
    with resources.as_file(ref) as p:
        return ExperimentConfig.load(p)


def initial_states(cfg: ExperimentConfig) -> tuple[int, ...]:
    """Initial states, sampled once and shared by every trial."""
    if "values" in cfg.initial_states:
        return tuple(cfg.initial_states["values"])
    lo, hi = cfg.initial_states["uniform"]
    rng = SplitMix64(derive_seed(cfg.seed, _STATES_KEY))
    return tuple(lo + rng.below(hi - lo + 1) for _ in range(cfg.n))


def _graph_for(cfg: ExperimentConfig, trial: int) -> Digraph:
    spec = cfg.graph
    if "generator" in spec:
        gen = spec["generator"]
        key = trial if gen.get("per_trial", False) else 0
        g = random_strongly_connected(cfg.n, float(gen.get("density", 0.2)), derive_seed(cfg.seed, _GRAPH_KEY, key))
    elif "builtin" in spec:
        g = four_node_digraph()
    elif "file" in spec:
        g = Digraph.load(cfg.path(spec["file"]))
    else:
        g = Digraph.from_dict(spec)
    if g.n != cfg.n:
        raise ConfigError("graph", f"digraph has {g.n} nodes but n = {cfg.n}")
    if not is_strongly_connected(g):
        raise ConfigError("graph", "digraph is not strongly connected")
    return g


def _schedule_for(cfg: ExperimentConfig, g: Digraph, trial: int) -> TopologySchedule:
    topo = cfg.topology
    mode = topo.get("mode", "static")
    if mode == "static":
        return TopologySchedule.static(g)
    if mode == "window_union":
        return TopologySchedule.window_union(g, int(topo["window_l"]), float(topo.get("duplication", 0.0)))
    members = topo["members"]
    if isinstance(members, int):
        return split_collection(g, members, derive_seed(cfg.seed, _TOPOLOGY_KEY, trial))
    graphs = [Digraph.from_dict(m) for m in members]
    probs = topo.get("probabilities") or [1.0 / len(graphs)] * len(graphs)
    try:
        return TopologySchedule.iid(graphs, probs)
    except ValueError as exc:
        raise ConfigError("topology.members", str(exc)) from None


def _script(cfg: ExperimentConfig) -> Optional[tuple[ScriptedChoice, ...]]:
    if cfg.script is None:
        return None
    records = cfg.script
    if isinstance(records, str):
        records = json.loads(cfg.path(records).read_text())
    try:
        src = ScriptedSource.from_records(records)
    except ValueError as exc:
        raise ConfigError("script", str(exc)) from None
    return tuple(ScriptedChoice(k, node, piece, t) for (k, node, piece), t in sorted(src.script.items()))


def build_trials(cfg: ExperimentConfig) -> list[TrialConfig]:
    y0 = initial_states(cfg)
    script = _script(cfg)
    trials = []
    for i in range(cfg.trials):
        g = _graph_for(cfg, i)
        trials.append(TrialConfig(
            schedule=_schedule_for(cfg, g, i), y0=y0, variant=cfg.variant,
            seed=trial_seed(cfg.seed, i), max_rounds=cfg.max_rounds,
            stability_window=cfg.stability_window,
            topology_seed=derive_seed(cfg.seed, _TOPOLOGY_KEY, i), trial_id=i,
            script=script, require_absorbed=cfg.require_absorbed, observe_after=cfg.observe_after,
        ))
    return trials


def _stats(values: list[int]) -> dict:
    if not values:
        return {"mean": None, "median": None, "max": None}
    return {"mean": statistics.fmean(values), "median": statistics.median(values), "max": max(values)}


def summarize(cfg: ExperimentConfig, records: list[TrialRecord]) -> dict:
    conv = [r.convergence_round for r in records if r.convergence_round is not None]
    stab = [r.stabilization_round for r in records if r.stabilization_round is not None]
    first = records[0].target
    return {
        "name": cfg.name,
        "n": cfg.n,
        "variant": cfg.variant.value,
        "mode": cfg.topology.get("mode", "static"),
        "trials": len(records),
        "initial_states": list(initial_states(cfg)),
        "q": f"{first.q.numerator}/{first.q.denominator}",
        "floor_q": first.floor_q,
        "ceil_q": first.ceil_q,
        "converged": sum(r.converged for r in records),
        "failures": sum(r.failed for r in records),
        "nonconverged": sum(not r.converged for r in records),
        "convergence_round": _stats(conv),
        "stabilization_round": _stats(stab),
        "errors": sorted({r.error for r in records if r.error}),
    }


@dataclass
class ExperimentResult:
    summary: dict
    records: list[TrialRecord]

    @property
    def all_converged(self) -> bool:
        return self.summary["nonconverged"] == 0


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> ExperimentResult:
    """Run every trial of ``cfg`` and write the configured outputs.

    Output paths come from ``cfg.outputs`` (``csv``, ``trace``, ``summary``);
    ``out_dir`` supplies defaults ``trials.csv`` and ``summary.json`` there.
    """
    records = run_batch(build_trials(cfg), cfg.parallelism)
    summary = summarize(cfg, records)
    outputs = dict(cfg.outputs)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs.setdefault("csv", "trials.csv")
        outputs.setdefault("summary", "summary.json")
        resolve = lambda p: Path(p) if Path(p).is_absolute() else out_dir / p
    else:
        resolve = cfg.path
    if outputs.get("csv"):
        with open(resolve(outputs["csv"]), "w", newline="") as fh:
            write_summary_csv(records, fh)
    if outputs.get("trace"):
        with open(resolve(outputs["trace"]), "w") as fh:
            for r in records:
                write_trace(r, fh)
    if outputs.get("summary"):
        resolve(outputs["summary"]).write_text(json.dumps(summary, indent=2) + "\n")
    return ExperimentResult(summary, records)


def with_overrides(cfg: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Copy of ``cfg`` with non-None overrides applied and re-validated."""
    changed = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    changed.validate()
    return changed

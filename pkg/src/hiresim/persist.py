"""JSON configuration codec and the on-disk results bundle.

A config file is one JSON object whose keys mirror :class:`MarketConfig`,
plus optional ``policy`` and ``subsidy`` selections.  Omitted keys take the
baseline defaults, so ``{}`` is a complete config.

Results are a ``manifest.json`` and one CSV per table.  Floats are written
with 17 significant digits so every value round-trips exactly.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from hiresim import __version__, backend
from hiresim.engine import check_pairing, effective_config
from hiresim.metrics import AggregateStats
from hiresim.model import ConfigError, GroupSpec, MarketConfig

_GROUP_KEYS = {"label", "count", "mu_x", "sigma_x", "theta", "n0"}
_SELECTION_KEYS = {"policy", "subsidy"}
_INT_FIELDS = {"d", "N", "K_F", "seed"}
_FLOAT_FIELDS = {"sigma_eps", "sigma_eta", "lambda_reg", "delta", "a_hybrid"}


@dataclass(frozen=True)
class Selection:
    """Policy and subsidy named in a config file, if any."""

    policy: str | None = None
    subsidy: str | None = None


def _int(path: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected an integer, got {json.dumps(v)}")
    return v


def _num(path: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {json.dumps(v)}")
    return float(v)


def _vec(path: str, v) -> tuple[float, ...]:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (float(v),)
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}: expected a nonempty list of numbers")
    return tuple(_num(f"{path}[{i}]", x) for i, x in enumerate(v))


def _group(i: int, obj) -> GroupSpec:
    p = f"groups[{i}]"
    if not isinstance(obj, dict):
        raise ConfigError(f"{p}: expected an object")
    unknown = sorted(set(obj) - _GROUP_KEYS)
    if unknown:
        raise ConfigError(f"{p}.{unknown[0]}: unknown field")
    missing = sorted({"count", "mu_x", "sigma_x", "theta"} - set(obj))
    if missing:
        raise ConfigError(f"{p}.{missing[0]}: required field missing")
    label = obj.get("label", f"group{i + 1}")
    if not isinstance(label, str):
        raise ConfigError(f"{p}.label: expected a string")
    return GroupSpec(
        label=label,
        count=_int(f"{p}.count", obj["count"]),
        mu_x=_vec(f"{p}.mu_x", obj["mu_x"]),
        sigma_x=_num(f"{p}.sigma_x", obj["sigma_x"]),
        theta=_vec(f"{p}.theta", obj["theta"]),
        n0=_int(f"{p}.n0", obj.get("n0", 0)),
    )


def config_from_dict(obj) -> tuple[MarketConfig, Selection]:
    if not isinstance(obj, dict):
        raise ConfigError("<root>: config must be a JSON object")
    known = {f.name for f in fields(MarketConfig)} | _SELECTION_KEYS
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field")
    kw = {}
    for k, v in obj.items():
        if k in _SELECTION_KEYS:
            continue
        if k in _INT_FIELDS:
            kw[k] = _int(k, v)
        elif k in _FLOAT_FIELDS:
            kw[k] = _num(k, v)
        elif k == "S_bound":
            kw[k] = None if v is None else _num(k, v)
        elif k == "radius_variant":
            if not isinstance(v, str):
                raise ConfigError(f"{k}: expected a string")
            kw[k] = v
        elif k == "groups":
            if not isinstance(v, list):
                raise ConfigError("groups: expected a list of group objects")
            kw[k] = tuple(_group(i, g) for i, g in enumerate(v))
    sel = Selection(obj.get("policy"), obj.get("subsidy"))
    for k in _SELECTION_KEYS:
        if getattr(sel, k) is not None and not isinstance(getattr(sel, k), str):
            raise ConfigError(f"{k}: expected a string")
    cfg = MarketConfig(**kw)
    if sel.policy is not None:
        check_selection(cfg, sel.policy, sel.subsidy or "none")
    return cfg, sel


def check_selection(cfg: MarketConfig, policy: str, subsidy: str) -> None:
    """Reject unknown or incompatible policy/subsidy choices as config errors."""
    try:
        pol = check_pairing(cfg, policy, subsidy)
    except KeyError:
        raise ConfigError(f"subsidy: unknown rule {subsidy!r}") from None
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"policy: {e}") from None
    effective_config(cfg, pol)


def parse_config(source: str | os.PathLike) -> tuple[MarketConfig, Selection]:
    """Read a config from a path, or from inline JSON text starting with ``{``."""
    text = str(source)
    if not text.lstrip().startswith("{") and (isinstance(source, os.PathLike) or text.strip()):
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"<file>: cannot read {path}: {e.strerror or e}") from None
    if not text.strip():
        return MarketConfig(), Selection()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"<root>: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return config_from_dict(obj)


def config_to_dict(cfg: MarketConfig, selection: Selection | None = None) -> dict:
    out = {}
    for f in fields(MarketConfig):
        v = getattr(cfg, f.name)
        if f.name == "groups":
            v = [
                {"label": g.label, "count": g.count, "mu_x": list(g.mu_x), "sigma_x": g.sigma_x,
                 "theta": list(g.theta), "n0": g.n0}
                for g in v
            ]
        out[f.name] = v
    if selection is not None:
        for k in ("policy", "subsidy"):
            if getattr(selection, k) is not None:
                out[k] = getattr(selection, k)
    return out


def serialize_config(cfg: MarketConfig, selection: Selection | None = None) -> str:
    """Canonical JSON text; ``parse_config`` inverts it exactly."""
    return json.dumps(config_to_dict(cfg, selection), indent=2, sort_keys=True) + "\n"


def content_hash(data: bytes | str) -> str:
    """Git blob hash of ``data``."""
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool,)):
        return str(int(v))
    if isinstance(v, int) or (hasattr(v, "dtype") and v.dtype.kind in "iu"):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        return buf.getvalue()


@dataclass
class ResultsBundle:
    manifest: dict
    tables: dict[str, Table]


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def series_table(entries: list[tuple[str, AggregateStats]], name: str) -> Table | None:
    """Long-format table of one cumulative series for every labelled batch."""
    t = Table(["round", "policy", "mean", "p5", "p95"])
    for label, st in entries:
        s = st.series.get(name)
        if s is None:
            continue
        for r, m, lo, hi in zip(st.rounds, s.mean, s.p5, s.p95):
            t.rows.append([int(r), label, m, lo, hi])
    return t if t.rows else None


SUMMARY_COLUMNS = [
    "policy", "subsidy", "runs", "regret_mean", "regret_ci", "subsidy_mean", "subsidy_ci",
    "initial_cost_mean", "budget_mean", "u2s_regret_mean", "u2s_regret_ci", "pu_freq", "pu_ci",
    "coverage_freq", "implements_failures",
]


def summary_row(policy: str, subsidy: str, st: AggregateStats) -> list:
    """Final-round statistics; CIs are two standard errors, PU refers to the last group."""
    def final(name):
        s = st.series.get(name)
        if s is None:
            return None, None
        return s.mean[-1], s.final_halfwidth(st.R)

    reg, reg_ci = final("regret")
    sub, sub_ci = final("subsidy")
    u2s, u2s_ci = final("u2s_regret")
    return [
        policy, subsidy, st.R, reg, reg_ci, sub, sub_ci, st.initial_cost_mean,
        st.initial_cost_mean + sub, u2s, u2s_ci, st.pu_freq[-1], st.pu_ci[-1],
        st.coverage_freq, st.implements_failures,
    ]


def _manifest(kind: str, cfg: MarketConfig, selection: Selection | None, R: int, started: str,
              extra: dict | None = None) -> dict:
    text = serialize_config(cfg, selection)
    m = {
        "tool": "hiresim",
        "version": __version__,
        "command": kind,
        "config": json.loads(text),
        "config_hash": content_hash(text),
        "seed": cfg.seed,
        "runs": R,
        "backend": backend.name(),
        "started_at": started,
        "finished_at": _now(),
    }
    if extra:
        m.update(extra)
    return m


def simulate_bundle(cfg: MarketConfig, policy: str, subsidy: str, stats: AggregateStats,
                    started: str | None = None) -> ResultsBundle:
    label = policy
    tables = {}
    for name in ("regret", "subsidy", "u2s_regret", "c2s_regret"):
        t = series_table([(label, stats)], name)
        if t is not None:
            tables[f"{name}.csv"] = t
    summary = Table(list(SUMMARY_COLUMNS), [summary_row(policy, subsidy, stats)])
    tables["summary.csv"] = summary
    sel = Selection(policy, subsidy)
    return ResultsBundle(_manifest("simulate", cfg, sel, stats.R, started or _now()), tables)


def _sweep_value(name: str, cfg: MarketConfig, policy: str):
    if name == "k1":
        return cfg.groups[0].count
    if name == "sigma_eta2":
        return cfg.sigma_eta**2
    if name == "n0_total":
        return effective_config(cfg, policy).n0_total
    raise KeyError(name)


def preset_bundle(result, started: str | None = None) -> ResultsBundle:
    """Tables for a :class:`~hiresim.presets.PresetResult`."""
    p = result.preset
    tables: dict[str, Table] = {}
    sweep = p.sweep.name if p.sweep else None
    labels = [(e.arm.label, e.stats) for e in result.entries]
    for name in p.series:
        t = series_table(labels, name)
        if t is not None:
            tables[f"{name}.csv"] = t

    lead = [sweep] if sweep else []
    summary = Table(lead + list(SUMMARY_COLUMNS))
    one_arm = len(p.arms) == 1 and not p.fixed_arms
    pu = Table(lead + ([] if one_arm else ["policy"]) + ["freq", "ci_halfwidth", "runs"])
    for e in result.entries:
        v = [_sweep_value(sweep, e.config, e.arm.policy)] if sweep else []
        summary.rows.append(v + summary_row(e.arm.policy, e.arm.subsidy, e.stats))
        pu.rows.append(v + ([] if one_arm else [e.arm.label])
                       + [e.stats.pu_freq[-1], e.stats.pu_ci[-1], e.stats.R])
    if sweep:
        tables["pu_frequency.csv"] = pu
    tables["summary.csv"] = summary
    extra = {
        "preset": {
            "name": p.name,
            "arms": [a.label for a in p.arms],
            "fixed_arms": [a.label for a in p.fixed_arms],
            "sweep": None if p.sweep is None else {"name": p.sweep.name, "values": list(p.sweep.values)},
            "notes": p.notes,
        }
    }
    return ResultsBundle(_manifest("preset", p.base, None, result.R, started or _now(), extra), tables)


def emit_results(bundle: ResultsBundle, out_dir: str | os.PathLike) -> list[Path]:
    """Write every table and the manifest; existing files are overwritten."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        hashes = {}
        for name, table in sorted(bundle.tables.items()):
            text = table.to_csv()
            path = out / name
            path.write_text(text)
            hashes[name] = content_hash(text)
            written.append(path)
        manifest = dict(bundle.manifest, files=hashes)
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        written.append(path)
    except OSError as e:
        raise OSError(f"cannot write results to {e.filename or out}: {e.strerror or e}") from e
    return written

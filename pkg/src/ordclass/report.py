"""Run configurations, reports and their text renderings."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datasets import BUNDLED
from .errors import DataError
from .exact import exact_posterior, mdp_exact_posterior, top_n
from .mcmc import McmcConfig, run_chain
from .model import Hyperparams, OrderedDataset, prepare_dataset
from .ward import cut, ward_linkage, within_ss

SCHEMA_VERSION = "1.0"
METHODS = ("exact", "mdp-exact", "mcmc-m1", "mcmc-m2", "ward")
PLOT_KINDS = ("histogram", "dendrogram", "k-bar")


@dataclass
class RunConfig:
    data: str
    methods: tuple[str, ...] = ("exact",)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    iterations: int = 10_000
    burn_in: int = 1_000
    seed: int = 1
    q: float = 0.5
    shuffle: bool = True
    k: int = 2
    top: int = 5
    column: str | None = None
    scale: float = 1.0

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if not self.methods or unknown:
            raise ValueError(f"unknown method(s) {unknown}; expected one of {METHODS}")
        if not (math.isfinite(self.scale) and self.scale != 0):
            raise ValueError("scale must be finite and non-zero")
        if self.top < 1:
            raise ValueError("top must be >= 1")
        if any(m.startswith("mcmc") for m in self.methods):
            self.mcmc_config("m1")  # validates iteration settings up front

    def mcmc_config(self, scheme: str) -> McmcConfig:
        return McmcConfig(
            scheme=scheme,
            iterations=self.iterations,
            burn_in=self.burn_in,
            seed=self.seed,
            q=self.q,
            shuffle=self.shuffle,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


def _parse_lines(text: str) -> list[float]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            out.append(float(s))
        except ValueError:
            raise DataError(f"parse error at line {lineno}: {s!r}") from None
    return out


def _parse_csv(text: str, column: str) -> list[float]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or column not in reader.fieldnames:
        raise DataError(f"column {column!r} not found")
    out = []
    # header is line 1
    for lineno, row in enumerate(reader, start=2):
        cell = (row[column] or "").strip()
        if not cell:
            continue
        try:
            out.append(float(cell))
        except ValueError:
            raise DataError(f"parse error at line {lineno}: {cell!r}") from None
    return out


def ingest(source: str, column: str | None = None, scale: float = 1.0) -> OrderedDataset:
    """Load a bundled dataset by name, or read a text/CSV file."""
    if source in BUNDLED and not Path(source).exists():
        raw = list(BUNDLED[source])
    else:
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read {source}: {exc.strerror or exc}") from None
        raw = _parse_csv(text, column) if column else _parse_lines(text)
    if not raw:
        raise DataError("no observations")
    try:
        return prepare_dataset([v * scale for v in raw])
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _k_probs(arr) -> dict[str, float]:
    return {str(k + 1): float(p) for k, p in enumerate(arr)}


def _run_exact(ds, cfg):
    post = exact_posterior(ds, cfg.hyper)
    return {
        "k_probs": _k_probs(post.k_marginal),
        "top": [{"composition": list(c.parts), "prob": p} for c, p in top_n(post, cfg.top)],
        "n_configurations": len(post),
        "log_norm_const": post.log_norm_const,
    }


def _run_mdp(ds, cfg):
    post = mdp_exact_posterior(ds, cfg.hyper, n_top=cfg.top)
    return {
        "k_probs": _k_probs(post.k_marginal),
        "top": [
            {"partition": [[i + 1 for i in b] for b in part.blocks], "prob": p}
            for part, p in post.top_partitions
        ],
        "n_configurations": post.count,
        "log_norm_const": post.log_norm_const,
    }


def _run_mcmc(ds, cfg, scheme):
    s = run_chain(ds, cfg.hyper, cfg.mcmc_config(scheme))
    top = list(s.comp_frequencies.items())[: cfg.top]
    return {
        "k_probs": _k_probs(s.k_estimates),
        "top": [{"composition": list(c.parts), "prob": f} for c, f in top],
        "acceptance": s.acceptance,
        "samples": s.samples,
        "burn_in": cfg.burn_in,
        "seed": cfg.seed,
        "scheme": scheme,
    }


def _run_ward(ds, cfg):
    if not 1 <= cfg.k <= ds.n:
        raise ValueError(f"k must lie in 1..{ds.n}, got {cfg.k}")
    dend = ward_linkage(ds.values)
    flat = cut(dend, cfg.k)
    return {
        "k": cfg.k,
        "clusters": [[i + 1 for i in c] for c in flat.clusters],
        "sizes": list(flat.sizes),
        "composition": list(flat.composition.parts) if flat.composition else None,
        "within_ss": within_ss(ds.values, flat.clusters),
        "monotone": dend.is_monotone(),
        "dendrogram": dend.to_dict(),
    }


def run(cfg: RunConfig) -> dict:
    """Execute every requested method on one dataset and assemble a report."""
    ds = ingest(cfg.data, cfg.column, cfg.scale)
    results, timing = {}, {}
    for method in cfg.methods:
        t0 = time.perf_counter()
        if method == "exact":
            results[method] = _run_exact(ds, cfg)
        elif method == "mdp-exact":
            results[method] = _run_mdp(ds, cfg)
        elif method == "ward":
            results[method] = _run_ward(ds, cfg)
        else:
            results[method] = _run_mcmc(ds, cfg, method.split("-")[1])
        timing[method] = time.perf_counter() - t0
    for res in results.values():
        if "k_probs" in res:
            res["k_prob_sum"] = math.fsum(res["k_probs"].values())
    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "dataset": {
            "source": cfg.data,
            "n": ds.n,
            "min": float(ds.values[0]),
            "max": float(ds.values[-1]),
            "scale": cfg.scale,
            "values": ds.values.tolist(),
        },
        "results": results,
        "timing": timing,
    }


# -- rendering ---------------------------------------------------------------


def _fmt_prob(p: float | None) -> str:
    if not p:
        return "--"
    return f"{p:.5f}" if p >= 1e-5 else f"{p:.2e}"


def _k_methods(report: dict) -> list[str]:
    return [m for m, r in report["results"].items() if "k_probs" in r]


def format_table(report: dict) -> str:
    ds = report["dataset"]
    lines = [f"data: {ds['source']}  n={ds['n']}  min={ds['min']:g}  max={ds['max']:g}"]
    methods = _k_methods(report)
    if methods:
        visited = [int(k) for m in methods for k, p in report["results"][m]["k_probs"].items() if p > 0]
        kmax = max(visited, default=1)
        header = f"{'k':>3} " + "".join(f"{m:>14}" for m in methods)
        lines += ["", header, "-" * len(header)]
        for k in range(1, kmax + 1):
            row = [report["results"][m]["k_probs"].get(str(k)) for m in methods]
            lines.append(f"{k:>3} " + "".join(f"{_fmt_prob(p):>14}" for p in row))
    for m, res in report["results"].items():
        lines.append("")
        if m == "ward":
            lines.append(f"ward: k={res['k']} sizes={tuple(res['sizes'])} within_ss={res['within_ss']:.6g}")
            for c in res["clusters"]:
                lines.append(f"  [{', '.join(f'y{i}' for i in c)}]")
            if not res["monotone"]:
                lines.append("  warning: merge costs are not monotone")
            continue
        lines.append(f"{m}: top configurations")
        for item in res["top"]:
            conf = item.get("composition") or item.get("partition")
            lines.append(f"  {_fmt_prob(item['prob']):>10}  {conf}")
        if "acceptance" in res:
            acc = ", ".join(f"{k}={v:.4f}" for k, v in res["acceptance"].items())
            lines.append(f"  acceptance: {acc}  samples={res['samples']} seed={res['seed']}")
    return "\n".join(lines) + "\n"


def format_csv(report: dict) -> str:
    methods = _k_methods(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if methods:
        w.writerow(["k", *methods])
        kmax = max(len(report["results"][m]["k_probs"]) for m in methods)
        for k in range(1, kmax + 1):
            w.writerow([k, *(repr(report["results"][m]["k_probs"].get(str(k), "")) for m in methods)])
    if "ward" in report["results"]:
        res = report["results"]["ward"]
        w.writerow(["cluster", "members"])
        for i, c in enumerate(res["clusters"], start=1):
            w.writerow([i, " ".join(map(str, c))])
    return buf.getvalue()


def format_json(report: dict, timing: bool = True) -> str:
    if not timing:
        report = {k: v for k, v in report.items() if k != "timing"}
    return json.dumps(report, indent=2) + "\n"


def render(report: dict, fmt: str, timing: bool = True) -> str:
    if fmt == "json":
        return format_json(report, timing)
    if fmt == "csv":
        return format_csv(report)
    return format_table(report)


def emit_plot_data(report: dict, kind: str, fmt: str = "csv") -> str:
    """Plot series (no rendering) for a histogram, the Ward dendrogram, or k bars."""
    if kind == "histogram":
        values = np.asarray(report["dataset"]["values"])
        counts, edges = np.histogram(values, bins="sturges")
        rows = [
            {"left": float(a), "right": float(b), "count": int(c)}
            for a, b, c in zip(edges[:-1], edges[1:], counts)
        ]
        cols = ["left", "right", "count"]
    elif kind == "dendrogram":
        if "ward" not in report["results"]:
            raise ValueError("analysis does not provide this plot")
        rows = [dict(step=i + 1, **m) for i, m in enumerate(report["results"]["ward"]["dendrogram"]["merges"])]
        cols = ["step", "left", "right", "cost", "size"]
    elif kind == "k-bar":
        methods = _k_methods(report)
        if not methods:
            raise ValueError("analysis does not provide this plot")
        rows = [
            {"method": m, "k": int(k), "prob": p}
            for m in methods
            for k, p in report["results"][m]["k_probs"].items()
        ]
        cols = ["method", "k", "prob"]
    else:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    if fmt == "json":
        return json.dumps({"kind": kind, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()

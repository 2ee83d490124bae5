"""Command-line surface: load edge-list datasets, release noisy statistics,
fit, run simulation designs, and report inference.

Subcommands and exit codes
--------------------------
``stats``     dataset summary (node count, degree five-number summary, p, z*)
``release``   write noisy sufficient statistics as JSON
``fit``       solve the moment equations; exit code 3 when the estimate does
              not exist (the JSON is still written with exists=false)
``infer``     confidence intervals / bias correction for a stored fit
``simulate``  run a Monte-Carlo design from a TOML or JSON file

0 = success, 1 = usage error, 2 = data error, 3 = non-existence (fit only).

Node ids in edge files are arbitrary integer or string labels; they are
mapped to contiguous indices in sorted order and the mapping is emitted with
every output so estimates can be traced back.  Flags such as ``--pairs``
always take original labels.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .estimator import FitConfig, FitResult, fisher_v, fit, h_matrix
from .inference import build_report
from .model import Network, num_pairs, sufficient_stats
from .release import PrivacyBudget, ReleasedStats, release
from .simulate import SimDesign, epsilon_of, run_design

__all__ = ["DatasetSpec", "LoadedNetwork", "load_network", "load_design", "main"]

COVARIATE_RULES = ("match", "product", "none")


class DataError(Exception):
    """Unreadable or inconsistent input data (exit code 2)."""


@dataclass(frozen=True)
class DatasetSpec:
    """Where and how to read a network dataset."""

    edge_file: Path
    attr_file: Optional[Path] = None
    covariate_rule: str = "none"
    drop_isolated: bool = False
    zero_indexed: bool = False

    def __post_init__(self):
        if self.covariate_rule not in COVARIATE_RULES:
            raise ValueError(f"covariate rule must be one of {COVARIATE_RULES}")


@dataclass
class LoadedNetwork:
    """A parsed dataset: the network plus label bookkeeping."""

    network: Network
    labels: list
    attr_names: list = field(default_factory=list)
    self_loops_dropped: int = 0
    duplicate_edges: int = 0
    isolated_dropped: list = field(default_factory=list)

    def index_of(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DataError(f"unknown node label {label!r}") from None

    def label_map_dict(self) -> dict:
        return {"labels": [_label_out(x) for x in self.labels]}


def _parse_label(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return token


def _label_out(label):
    return label if isinstance(label, int) else str(label)


def _read_edges(path: Path):
    """Parse an edge list; returns (edge set over labels, labels seen, counters)."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read edge file {path}: {exc}") from None
    edges = set()
    seen = set()
    self_loops = 0
    duplicates = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected two node ids, got {raw!r}")
        u, v = _parse_label(parts[0]), _parse_label(parts[1])
        seen.add(u)
        seen.add(v)
        if u == v:
            self_loops += 1
            continue
        key = (u, v) if _label_key(u) <= _label_key(v) else (v, u)
        if key in edges:
            duplicates += 1
        else:
            edges.add(key)
    if not seen:
        raise DataError(f"{path}: no edges found")
    return edges, seen, self_loops, duplicates


def _label_key(label):
    # ints sort before strings, each within their own kind
    return (0, label, "") if isinstance(label, int) else (1, 0, label)


def _read_attrs(path: Path):
    import csv as _csv

    try:
        with open(path, newline="") as fh:
            rows = list(_csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read attribute file {path}: {exc}") from None
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DataError(f"{path}: need a node id column plus attribute columns")
    attrs = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
        attrs[_parse_label(row[0])] = [c.strip() for c in row[1:]]
    return header[1:], attrs


def load_network(spec: DatasetSpec) -> LoadedNetwork:
    """Read, clean and assemble a dataset into a Network.

    Multi-edges collapse to one, self-loops are dropped (counted), isolated
    nodes are optionally removed, and pair covariates are built per the rule:
    ``match`` gives +1/-1 for equal/unequal attributes, ``product`` multiplies
    numeric attributes, ``none`` yields p = 0.
    """
    edges, seen, self_loops, duplicates = _read_edges(spec.edge_file)
    labels = sorted(seen, key=_label_key)
    degree = {lab: 0 for lab in labels}
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    isolated = [lab for lab in labels if degree[lab] == 0]
    if spec.drop_isolated and isolated:
        labels = [lab for lab in labels if degree[lab] > 0]
    n = len(labels)
    if n < 2:
        raise DataError("fewer than two non-isolated nodes")
    index = {lab: k for k, lab in enumerate(labels)}

    attr_names: list = []
    covariates = np.zeros((num_pairs(n), 0))
    if spec.covariate_rule != "none":
        if spec.attr_file is None:
            raise DataError(f"covariate rule {spec.covariate_rule!r} needs --attrs")
        attr_names, attrs = _read_attrs(spec.attr_file)
        unknown = [lab for lab in attrs if lab not in degree]
        if unknown:
            raise DataError(f"attribute file has unknown node ids: {unknown[:5]}")
        missing = [lab for lab in labels if lab not in attrs]
        if missing:
            raise DataError(f"missing attributes for nodes: {missing[:5]}")
        p = len(attr_names)
        covariates = np.empty((num_pairs(n), p))
        table = [attrs[lab] for lab in labels]
        if spec.covariate_rule == "product":
            try:
                numeric = np.array([[float(v) for v in row] for row in table])
            except ValueError as exc:
                raise DataError(f"product covariates need numeric attributes: {exc}")
        i_idx, j_idx = np.triu_indices(n, 1)
        for t in range(p):
            if spec.covariate_rule == "match":
                col = np.array([row[t] for row in table], dtype=object)
                covariates[:, t] = np.where(col[i_idx] == col[j_idx], 1.0, -1.0)
            else:
                covariates[:, t] = numeric[i_idx, t] * numeric[j_idx, t]

    adjacency = np.zeros(num_pairs(n), dtype=bool)
    for u, v in edges:
        if u not in index or v not in index:
            continue  # endpoints alongside dropped isolated nodes cannot occur
        a, b = sorted((index[u], index[v]))
        adjacency[n * a - a * (a + 1) // 2 + (b - a - 1)] = True
    return LoadedNetwork(
        network=Network(n=n, adjacency=adjacency, covariates=covariates),
        labels=labels,
        attr_names=attr_names,
        self_loops_dropped=self_loops,
        duplicate_edges=duplicates,
        isolated_dropped=[_label_out(x) for x in isolated] if spec.drop_isolated else [],
    )


def load_design(path: Path) -> SimDesign:
    """Read a simulation design from TOML or JSON (pairs are 1-based labels)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read design file {path}: {exc}") from None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from None
    else:
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{path}: invalid TOML: {exc}") from None
    if "pairs" in data:
        data["pairs"] = [[i - 1, j - 1] for i, j in data["pairs"]]
    try:
        return SimDesign.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad design: {exc}") from None


# ---------------------------------------------------------------------------
# subcommand implementations


def _write(text: str, output: Optional[str]):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dataset_from_args(args) -> LoadedNetwork:
    spec = DatasetSpec(
        edge_file=Path(args.edges),
        attr_file=Path(args.attrs) if args.attrs else None,
        covariate_rule=args.covariates,
        drop_isolated=args.drop_isolated,
        zero_indexed=args.zero_indexed,
    )
    return load_network(spec)


def _json_dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _cmd_stats(args) -> int:
    loaded = _dataset_from_args(args)
    net = loaded.network
    stats = sufficient_stats(net)
    d = stats.d
    qs = np.percentile(d, [25, 50, 75])
    payload = {
        "n": net.n,
        "edges": net.edge_count(),
        "p": net.p,
        "z_star": net.z_star,
        "degree_min": int(d.min()),
        "degree_q1": float(qs[0]),
        "degree_median": float(qs[1]),
        "degree_q3": float(qs[2]),
        "degree_max": int(d.max()),
        "self_loops_dropped": loaded.self_loops_dropped,
        "duplicate_edges": loaded.duplicate_edges,
        "isolated_dropped": loaded.isolated_dropped,
        "attr_names": loaded.attr_names,
        **loaded.label_map_dict(),
    }
    _write(_json_dumps(payload), args.output)
    return 0


def _resolve_epsilon(args, n: int) -> float:
    if args.epsilon is not None and args.epsilon_rule is not None:
        raise DataError("give either --epsilon or --epsilon-rule, not both")
    if args.epsilon is not None:
        if args.epsilon <= 0:
            raise DataError("epsilon must be positive")
        return args.epsilon
    if args.epsilon_rule is not None:
        return epsilon_of(args.epsilon_rule, n)
    raise DataError("one of --epsilon or --epsilon-rule is required")


def _cmd_release(args) -> int:
    loaded = _dataset_from_args(args)
    net = loaded.network
    stats = sufficient_stats(net)
    budget = PrivacyBudget(epsilon=_resolve_epsilon(args, net.n), k=args.k)
    rng = np.random.default_rng(args.seed)
    out = release(stats, budget, z_star=net.z_star, rng=rng, seed=args.seed)
    payload = out.to_dict()
    payload.update(loaded.label_map_dict())
    _write(_json_dumps(payload), args.output)
    return 0


def _cmd_fit(args) -> int:
    loaded = _dataset_from_args(args)
    net = loaded.network
    if args.no_privacy == (args.released is not None):
        raise DataError("exactly one of --released or --no-privacy is required")
    if args.no_privacy:
        target = sufficient_stats(net)
    else:
        try:
            target = ReleasedStats.from_json(Path(args.released).read_text())
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot load released stats: {exc}") from None
        if target.n != net.n:
            raise DataError(
                f"released stats are for n={target.n}, dataset has n={net.n}"
            )
        if target.p != net.p:
            raise DataError(
                f"released stats carry p={target.p}, dataset covariates have p={net.p}"
            )
    config = FitConfig(
        beta_tol=args.beta_tol,
        gamma_tol=args.gamma_tol,
        max_inner_iters=args.max_inner,
        max_outer_iters=args.max_outer,
    )
    result = fit(target, net.covariates, config)
    payload = result.to_dict(include_matrices=args.matrices)
    payload.update(loaded.label_map_dict())
    _write(_json_dumps(payload), args.output)
    return 0 if result.exists else 3


def _parse_pairs(text: str, loaded: LoadedNetwork):
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 2:
            raise DataError(f"bad pair {chunk!r}; expected 'u,v'")
        pairs.append(tuple(loaded.index_of(_parse_label(p)) for p in parts))
    return pairs


def _cmd_infer(args) -> int:
    loaded = _dataset_from_args(args)
    net = loaded.network
    try:
        stored = FitResult.from_json(Path(args.fit).read_text())
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load fit result: {exc}") from None
    if not stored.exists:
        raise DataError("stored fit reports exists=false; nothing to infer")
    if stored.beta_hat.shape[0] != net.n:
        raise DataError("stored fit does not match dataset size")
    params = stored.params
    if stored.v_matrix is None:
        stored.v_matrix = fisher_v(params, net.covariates)
    if stored.h_matrix is None:
        stored.h_matrix = h_matrix(params, net.covariates)
    pairs = _parse_pairs(args.pairs, loaded) if args.pairs else []
    report = build_report(
        stored,
        net.covariates,
        level=args.level,
        pairs=pairs,
        bias_correct_flag=not args.no_bias_correct,
    )
    if args.format == "csv":
        _write(report.to_csv(), args.output)
    else:
        payload = report.to_dict()
        payload.update(loaded.label_map_dict())
        _write(_json_dumps(payload), args.output)
    return 0


def _cmd_simulate(args) -> int:
    design = load_design(Path(args.design))
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        design = SimDesign.from_dict({**design.to_dict(), **overrides})
    table = run_design(design, threads=args.threads)
    prefix = args.output_prefix
    Path(prefix + ".json").write_text(table.to_json() + "\n")
    Path(prefix + ".csv").write_text(table.to_csv())
    Path(prefix + "_qq.csv").write_text(table.qq_csv())
    sys.stdout.write(
        f"wrote {prefix}.json, {prefix}.csv, {prefix}_qq.csv "
        f"(nonexistence {table.nonexistence_pct:.2f}%)\n"
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _add_dataset_args(sub):
    sub.add_argument("--edges", required=True, help="edge list file ('u v' per line)")
    sub.add_argument("--attrs", help="node attribute CSV (id column first)")
    sub.add_argument(
        "--covariates",
        choices=COVARIATE_RULES,
        default="none",
        help="pair covariate construction rule",
    )
    sub.add_argument("--drop-isolated", action="store_true")
    sub.add_argument(
        "--zero-indexed",
        action="store_true",
        help="edge files use 0-based integer ids (informational; labels are remapped)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpbeta", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("stats", help="summarize a dataset")
    _add_dataset_args(sp)
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_stats)

    sp = subs.add_parser("release", help="release noisy sufficient statistics")
    _add_dataset_args(sp)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--epsilon-rule", choices=("logn_n16", "logn_n14"))
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_release)

    sp = subs.add_parser("fit", help="fit the model from released statistics")
    _add_dataset_args(sp)
    sp.add_argument("--released", help="ReleasedStats JSON from the release command")
    sp.add_argument("--no-privacy", action="store_true", help="fit the exact statistics")
    sp.add_argument("--beta-tol", type=float, default=1e-8)
    sp.add_argument("--gamma-tol", type=float, default=1e-8)
    sp.add_argument("--max-inner", type=int, default=5000)
    sp.add_argument("--max-outer", type=int, default=100)
    sp.add_argument("--matrices", action="store_true", help="include V and H in JSON")
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_fit)

    sp = subs.add_parser("infer", help="intervals and bias correction for a fit")
    _add_dataset_args(sp)
    sp.add_argument("--fit", required=True, help="FitResult JSON")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--pairs", help="contrasts as 'u,v;u,v' using original labels")
    sp.add_argument("--no-bias-correct", action="store_true")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_infer)

    sp = subs.add_parser("simulate", help="run a Monte-Carlo design file")
    sp.add_argument("--design", required=True, help="SimDesign TOML or JSON")
    sp.add_argument("--replications", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--output-prefix", default="simtable")
    sp.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every command validates its configuration first, writes data-only outputs
(CSV and JSON) into ``--out``, and embeds the resolved configuration and the
artifact version in each file.  Failures print an error object as JSON on
stdout and exit with a nonzero status.
"""

from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParameterError, SubspaceESDError

EXIT_ERROR = 2
EXIT_CHECK_FAILED = 3


def artifact_version() -> str:
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# ---------------------------------------------------------------- output helpers


class Writer:
    def __init__(self, out: Path, config: dict):
        self.out = out
        self.config = config
        self.version = artifact_version()
        self.files: list[str] = []

    def _provenance(self) -> dict:
        return {"run_config": self.config, "version": self.version}

    def json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        path.write_text(json.dumps({**self._provenance(), **payload}, indent=2, default=_jsonable))
        self.files.append(name)
        return path

    def csv(self, name: str, header: list[str], rows) -> Path:
        """CSV with a leading ``#`` comment line holding the provenance JSON."""
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self._provenance(), default=_jsonable) + "\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow(row)
        self.files.append(name)
        return path

    def matrix(self, name: str, M) -> Path:
        path = self.out / name
        np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g",
                   header=json.dumps(self._provenance(), default=_jsonable))
        self.files.append(name)
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def read_matrix(path) -> np.ndarray:
    """``.npy`` or comma-separated text (``#`` comments allowed)."""
    path = Path(path)
    if not path.is_file():
        raise ParameterError(f"no such file: {path}")
    if path.suffix == ".npy":
        return np.atleast_2d(np.load(path))
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", ndmin=2))
    except ValueError as exc:
        raise ParameterError(f"{path}: not a numeric matrix ({exc})") from None


def read_vector(path) -> np.ndarray:
    return read_matrix(path).ravel()


# ---------------------------------------------------------------- commands


def _budget(cfg):
    from .linalg import IterationBudget

    return IterationBudget(cfg["power_epsilon"], cfg["max_iters"])


def cmd_esd(cfg: dict, out: Writer) -> dict:
    from .linalg import covariance
    from .subspace import get_esd, max_distance_oracle

    A, B = read_matrix(cfg["a"]), read_matrix(cfg["b"])
    if cfg["kind"] == "data":
        A, B = covariance(A), covariance(B)
    res = get_esd(A, B, _budget(cfg), epsilon=cfg["epsilon"], seed=cfg["seed"],
                  literal_b_deflation=cfg["literal_b_deflation"])
    payload = res.to_dict()
    header = ["k", "theta_deg", "sigma_max", "sigma_min", "iterations_a", "iterations_b"]
    rows = [[r.k, r.theta_deg, r.sigma_max, r.sigma_min, r.iterations_a, r.iterations_b] for r in res.trace]
    if cfg["oracle"]:
        orc = max_distance_oracle(A, B)
        diag = orc.table.diagonal()
        rel = abs(res.theta_max_deg - orc.theta_max_deg) / orc.theta_max_deg if orc.theta_max_deg > 0 else 0.0
        payload["oracle"] = {
            "k_a": orc.k_a,
            "k_b": orc.k_b,
            "theta_max_deg": orc.theta_max_deg,
            "relative_error": rel,
        }
        header += ["oracle_theta_deg", "abs_error_deg", "relative_error"]
        for row in rows:
            t = float(diag[row[0] - 1])
            err = abs(row[1] - t)
            # relative error is meaningless for angles at rounding level
            row += [t, err, err / t if t > 1e-6 else ""]
    out.json("esd.json", payload)
    out.csv("esd_trace.csv", header, rows)
    return {"esd": res.esd, "theta_max_deg": res.theta_max_deg}


def _simulation_data(sc, seed: int) -> np.ndarray:
    from .ingest import synth_caida

    if sc.data == "caida":
        if sc.n_nodes < 5:
            raise ParameterError("caida-shaped data needs n_nodes >= 5 (size bins plus 4 protocol bins)")
        return synth_caida(seed, n_intervals=sc.n_samples, n_size_bins=sc.n_nodes - 4)
    if sc.data == "gaussian":
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.arange(1, sc.n_nodes + 1)
        return scale[:, None] * rng.standard_normal((sc.n_nodes, sc.n_samples))
    raise ParameterError(f"unknown scenario data {sc.data!r}")


def cmd_simulate(cfg: dict, out: Writer) -> dict:
    from .distnet import Scenario, SimMetrics, eval_pc_estimate, get_esd_d, init_states, load_scenario
    from .distnet import power_iteration_d, stack_rows
    from .linalg import covariance, exact_eigendecomposition
    from .subspace import get_esd

    if cfg["scenario"]:
        sc = load_scenario(cfg["scenario"])
    else:
        sc = Scenario(n_nodes=cfg["n_nodes"], attach=cfg["attach"], seed=cfg["seed"], n_samples=cfg["n_samples"],
                      data=cfg["data"])
    out.config["scenario_resolved"] = sc.to_dict()
    graph = sc.build_graph()
    X = _simulation_data(sc, sc.seed)
    budget, consensus = sc.iteration_budget(), sc.consensus_config()

    x, x_hat = stack_rows(init_states(X))
    truth = exact_eigendecomposition(covariance(X))[0]
    metrics = SimMetrics(graph.n_nodes)
    pc, metrics = power_iteration_d(x, x_hat, graph, budget, consensus, seed=sc.seed, metrics=metrics)
    rows = []
    for i, (v, msgs) in enumerate(zip(pc.history, pc.messages), start=1):
        bias, mse = eval_pc_estimate(v, truth)
        rows.append([i, bias, mse, msgs])
    out.csv("pc_convergence.csv", ["iteration", "projection_bias", "mse", "messages_cumulative"], rows)
    bias, mse = eval_pc_estimate(pc.entries, truth)

    law = sum(r * d for r, d in metrics.round_log)
    checks = {"message_law": law == metrics.messages_total}
    payload = {
        "graph": {"n_nodes": graph.n_nodes, "n_edges": graph.n_edges, "max_degree": graph.max_degree,
                  "lambda2": graph.second_eigenvalue()},
        "power_iteration": {"iterations": pc.iterations, "converged": pc.converged, "projection_bias": bias,
                            "mse": mse, "warning": pc.warning, "metrics": metrics.to_dict(),
                            "messages_by_law": law},
    }
    if not cfg["skip_esd"]:
        half = X.shape[1] // 2
        Xa, Xb = X[:, :half], X[:, half:]
        d = get_esd_d(Xa, Xb, graph, budget, consensus, epsilon=sc.stop_epsilon, seed=sc.seed)
        c = get_esd(covariance(Xa), covariance(Xb), budget, epsilon=sc.stop_epsilon, seed=sc.seed)
        elaw = sum(r * dg for r, dg in d.metrics.round_log)
        payload["esd"] = {**d.to_dict(), "centralized": {"esd": c.esd, "theta_max_deg": c.theta_max_deg},
                          "messages_by_law": elaw}
        # bit-identical under the exact test double; within the consensus tolerance otherwise
        tol = 0.0 if consensus.mode == "exact" else cfg["agree_tol_deg"]
        checks["all_nodes_agree"] = d.agree_within(tol)
        checks["esd_message_law"] = elaw == d.metrics.messages_total
    payload["checks"] = checks
    out.json("simulate.json", payload)
    return {"checks": checks, "mse": mse, "projection_bias": bias}


def _detect_inputs(cfg):
    from .ingest import synth_kyoto

    if cfg["train"] or cfg["test"]:
        if not (cfg["train"] and cfg["test"]):
            raise ParameterError("--train and --test go together")
        train, test = read_matrix(cfg["train"]), read_matrix(cfg["test"])
        labels = read_vector(cfg["labels"]).astype(bool) if cfg["labels"] else None
        if labels is not None and labels.size != test.shape[1]:
            raise ParameterError(f"{labels.size} labels for {test.shape[1]} test windows")
        return train, test, labels
    corpus = synth_kyoto(cfg["seed"], cfg["n_windows"])
    return corpus.train, corpus.test, corpus.labels


def cmd_detect(cfg: dict, out: Writer) -> dict:
    from .detect import (
        NormalSubspace,
        choose_k_distance,
        choose_k_variance,
        hit_rate_at_fa,
        residual_scores,
        roc,
        separation_interval,
        training_spectrum,
    )
    from .linalg import covariance

    train, test, labels = _detect_inputs(cfg)
    if train.shape[0] != test.shape[0]:
        raise ParameterError(f"train has {train.shape[0]} features, test {test.shape[0]}")
    lam, V = training_spectrum(train)
    mu = train.mean(axis=1)
    k_var = choose_k_variance(lam, cfg["variance_pct"])
    k_dist = choose_k_distance(covariance(train), covariance(test), _budget(cfg), epsilon=cfg["epsilon"],
                               seed=cfg["seed"])
    k = k_var if cfg["method"] == "variance" else k_dist
    sub = NormalSubspace(V[:, :k], k, cfg["method"], lam[:k])
    scores = residual_scores(test, sub, mu)
    train_scores = residual_scores(train, sub, mu)
    threshold = 0.5 * (float(np.quantile(train_scores, 0.99)) + float(np.median(scores)))
    rate = labels.astype(float) if labels is not None else np.full(scores.size, np.nan)

    out.csv("residuals.csv", ["window_id", "residual", "anomalous_rate", "k_used", "method"],
            ([i, s, r, k, cfg["method"]] for i, (s, r) in enumerate(zip(scores, rate))))
    payload = {"k_used": k, "method": cfg["method"], "k_variance": k_var, "k_distance": k_dist,
               "default_threshold": threshold, "n_windows": int(scores.size)}
    if labels is not None:
        pts = roc(scores, labels)
        out.csv("roc.csv", ["threshold", "hit_rate", "false_alarm_rate"],
                ([p.threshold, p.hit_rate, p.false_alarm_rate] for p in pts))
        sweep = []
        for kk in range(1, train.shape[0] + 1):
            s = residual_scores(test, NormalSubspace(V[:, :kk], kk), mu)
            thr, hit = hit_rate_at_fa(s, labels, cfg["fa_target"])
            sweep.append([kk, thr, hit, separation_interval(s, labels) is not None])
        out.csv("hit_rate_vs_k.csv", ["k", "threshold", "hit_rate", "perfectly_separable"], sweep)
        thr, hit = hit_rate_at_fa(scores, labels, cfg["fa_target"])
        plateau = [row[0] for row in sweep if row[2] == 1.0]
        payload.update(
            {
                "hit_rate_at_fa": {"fa_target": cfg["fa_target"], "threshold": thr, "hit_rate": hit},
                "separation_interval": separation_interval(scores, labels),
                "full_hit_k": plateau,
            }
        )
    out.json("detect.json", payload)
    return {"k_used": k, "separation_interval": payload.get("separation_interval")}


def cmd_bench(cfg: dict, out: Writer) -> dict:
    from .bench import loglog_slope, run_bench

    rows = run_bench(cfg["sizes"], cfg["reps"], cfg["seed"], _budget(cfg))
    header = list(rows[0].to_dict())
    out.csv("bench.csv", header, ([r.to_dict()[h] for h in header] for r in rows))
    sizes = [r.n for r in rows]
    summary = {
        "rows": [r.to_dict() for r in rows],
        "ratio_at_largest": rows[-1].ratio,
        "slope_get_esd": loglog_slope(sizes, [r.t_get_esd for r in rows]) if len(rows) > 1 else None,
        "slope_full_eigh": loglog_slope(sizes, [r.t_full_eigh for r in rows]) if len(rows) > 1 else None,
    }
    out.json("bench.json", summary)
    return {"ratio_at_largest": summary["ratio_at_largest"]}


def cmd_synth(cfg: dict, out: Writer) -> dict:
    from .ingest import (
        kyoto_schema,
        packet_histograms,
        save_schema,
        synth_caida,
        synth_connections,
        synth_kyoto,
        synth_packets,
        write_connections,
    )

    kind, seed = cfg["kind"], cfg["seed"]
    if kind == "kyoto":
        c = synth_kyoto(seed, cfg["n_windows"])
        out.matrix("train.csv", c.train)
        out.matrix("test.csv", c.test)
        out.matrix("labels.csv", c.labels.astype(int)[:, None])
        info = {"n_features": int(c.train.shape[0]), "n_windows": int(c.train.shape[1]),
                "anomalous_windows": int(c.labels.sum())}
    elif kind == "caida":
        X = synth_caida(seed, n_intervals=cfg["n_windows"])
        out.matrix("histograms.csv", X)
        info = {"n_bins": int(X.shape[0]), "n_intervals": int(X.shape[1])}
    elif kind == "connections":
        schema = kyoto_schema()
        n = write_connections(synth_connections(seed, cfg["n_records"]), out.out / "connections.tsv", schema)
        save_schema(schema, out.out / "connections.schema.json")
        out.files += ["connections.tsv", "connections.schema.json"]
        info = {"n_records": n}
    else:  # packets
        hists = packet_histograms(synth_packets(seed, cfg["n_records"], duration_s=1.0))
        out.matrix("histograms.csv", np.column_stack([h.counts for h in hists]))
        info = {"n_intervals": len(hists)}
    out.json("synth.json", info)
    return info


def cmd_spoof(cfg: dict, out: Writer) -> dict:
    from .detect import spoof_scenario

    sc = spoof_scenario(cfg["n"], cfg["seed"], cfg["n_samples"])
    out.matrix("sigma_before.csv", sc.sigma_before)
    out.matrix("sigma_after.csv", sc.sigma_after)
    out.matrix("data_before.csv", sc.data_before)
    out.matrix("data_after.csv", sc.data_after)
    info = {"n": cfg["n"], "eigenvalues": sc.eigenvalues.tolist()}
    out.json("spoof.json", info)
    return {"n": cfg["n"]}


COMMANDS = {
    "esd": cmd_esd,
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "bench": cmd_bench,
    "synth": cmd_synth,
    "spoof": cmd_spoof,
}


# ---------------------------------------------------------------- parsing


def _sizes(text: str) -> list[int]:
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty size list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subspace-esd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solver=True):
        sp.add_argument("--out", required=True, help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--config", help="JSON file whose keys override the flags")
        if solver:
            sp.add_argument("--epsilon", type=float, default=0.01, help="getESD stop threshold")
            sp.add_argument("--power-epsilon", type=float, default=1e-9)
            sp.add_argument("--max-iters", type=int, default=1000)

    sp = sub.add_parser("esd", help="effective subspace dimension of two covariance matrices")
    common(sp)
    sp.add_argument("--a", required=True, help="first covariance (or data) matrix")
    sp.add_argument("--b", required=True, help="second covariance (or data) matrix")
    sp.add_argument("--kind", choices=("cov", "data"), default="cov")
    sp.add_argument("--oracle", action="store_true", help="cross-check against the exhaustive search")
    sp.add_argument("--literal-b-deflation", action="store_true")

    sp = sub.add_parser("simulate", help="distributed power iteration and getESD over a gossip graph")
    common(sp, solver=False)
    sp.add_argument("--scenario", help="scenario JSON")
    sp.add_argument("--n-nodes", type=int, default=79)
    sp.add_argument("--attach", type=int, default=2)
    sp.add_argument("--n-samples", type=int, default=2400)
    sp.add_argument("--data", choices=("caida", "gaussian"), default="caida")
    sp.add_argument("--skip-esd", action="store_true", help="only run the first distributed PC")
    sp.add_argument("--agree-tol-deg", type=float, default=1e-3,
                    help="allowed spread of node angles under inexact consensus")

    sp = sub.add_parser("detect", help="projection-residual detection with ROC and k sweep")
    common(sp)
    sp.add_argument("--train")
    sp.add_argument("--test")
    sp.add_argument("--labels")
    sp.add_argument("--n-windows", type=int, default=400, help="synthetic corpus size when no files are given")
    sp.add_argument("--method", choices=("variance", "distance"), default="distance")
    sp.add_argument("--variance-pct", type=float, default=0.995)
    sp.add_argument("--fa-target", type=float, default=0.01)

    sp = sub.add_parser("bench", help="runtime of the residual pipelines")
    common(sp)
    sp.add_argument("--sizes", type=_sizes, default=[100, 500, 1000, 2000, 5000])
    sp.add_argument("--reps", type=int, default=5)

    sp = sub.add_parser("synth", help="write a synthetic corpus")
    common(sp, solver=False)
    sp.add_argument("--kind", choices=("kyoto", "caida", "connections", "packets"), default="kyoto")
    sp.add_argument("--n-windows", type=int, default=400)
    sp.add_argument("--n-records", type=int, default=1000)

    sp = sub.add_parser("spoof", help="write the spoofing scenario fixture")
    common(sp, solver=False)
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--n-samples", type=int, default=2000)
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "config"}
    if args.config:
        path = Path(args.config)
        try:
            override = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config {path}: {exc}") from None
        if not isinstance(override, dict):
            raise ParameterError("config file must hold a JSON object")
        override = {k.replace("-", "_"): v for k, v in override.items()}
        unknown = set(override) - set(cfg)
        if unknown:
            raise ParameterError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(override)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    def positive(key, strict=True):
        if key in cfg and cfg[key] is not None and not (cfg[key] > 0 if strict else cfg[key] >= 0):
            raise ParameterError(f"{key} must be {'> 0' if strict else '>= 0'}")

    for key in ("power_epsilon", "max_iters", "reps", "n_windows", "n_records", "n_samples", "n_nodes", "n"):
        positive(key)
    if "epsilon" in cfg and not 0 < cfg["epsilon"] < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    if "variance_pct" in cfg and not 0 < cfg["variance_pct"] <= 1:
        raise ParameterError("variance_pct must lie in (0, 1]")
    if "fa_target" in cfg and not 0 <= cfg["fa_target"] <= 1:
        raise ParameterError("fa_target must lie in [0, 1]")
    if cfg.get("method") not in (None, "variance", "distance"):
        raise ParameterError("method must be 'variance' or 'distance'")
    for key in ("a", "b", "train", "test", "labels", "scenario"):
        if cfg.get(key) and not Path(cfg[key]).is_file():
            raise ParameterError(f"{key}: no such file {cfg[key]}")
    if "sizes" in cfg:
        sizes = cfg["sizes"]
        cfg["sizes"] = _sizes(",".join(map(str, sizes)) if isinstance(sizes, (list, tuple)) else sizes)
        if min(cfg["sizes"]) < 9:
            raise ParameterError("bench sizes must be >= 9")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        out_dir = Path(cfg["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = Writer(out_dir, cfg)
        summary = COMMANDS[cfg["command"]](cfg, writer)
    except (SubspaceESDError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        err = {"status": "error", "command": args.command, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err))
        return EXIT_ERROR
    checks = summary.get("checks", {}) if isinstance(summary, dict) else {}
    ok = all(checks.values())
    print(json.dumps({"status": "ok" if ok else "check_failed", "command": cfg["command"],
                      "files": writer.files, **summary}, default=_jsonable))
    return 0 if ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())

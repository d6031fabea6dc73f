"""mcvc command line: pipeline stages and calibration sweeps.

Stages communicate only through their declared artifacts (store dir,
plans.json, videovecs.bin + manifest, graph.bin, clusters.json,
report.json), so every subcommand can also be run standalone. Runs are
deterministic for a fixed (store, config, seed) regardless of --threads.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import combine as combine_mod
from . import dedup as dedup_mod
from . import metrics as metrics_mod
from . import multicut, simgraph, synth
from .combine import CombineParams, VideoVecRecord
from .embstore import EmbeddingStore, read_store, write_store
from .frameselect import SelectionParams, SelectionPlan, build_plan

logger = logging.getLogger("mcvc")

DEFAULT_CALS = [round(i / 10, 1) for i in range(1, 10)]


class StageError(RuntimeError):
    """Pipeline stage failure; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        import tomllib  # py >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _pick(cli_value, config: dict, key: str, default):
    """Flag beats config file beats built-in default."""
    if cli_value is not None:
        return cli_value
    if key in config:
        return config[key]
    return default


def _require(value, name: str):
    if value is None:
        raise ValueError(f"--{name} is required (flag or config key)")
    return value


def _write_json(path: Path | str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _read_json(path: Path | str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _parse_cals(text: str) -> list[float]:
    cals = [float(tok) for tok in text.split(",") if tok.strip()]
    if not cals:
        raise ValueError("no calibration values given")
    for cal in cals:
        if not (0.0 < cal < 1.0):
            raise ValueError(f"cal {cal} outside (0, 1)")
    return cals


def _cal_tag(cal: float) -> str:
    return f"{cal:g}"


# ---------------------------------------------------------------------------
# pipeline stages (also used standalone by the subcommands)
# ---------------------------------------------------------------------------

def stage_select(store: EmbeddingStore, params: SelectionParams,
                 mode: str) -> list[SelectionPlan]:
    return [build_plan(entry, store, params, mode) for entry in store.manifest]


def stage_combine(store: EmbeddingStore, plans: Sequence[SelectionPlan],
                  params: CombineParams, threads: int = 1
                  ) -> tuple[list[VideoVecRecord], np.ndarray]:
    """Combine each planned video's frames into one vector.

    Videos whose plan selected no frames are dropped with a warning.
    Per-video work is independent; results are assembled in manifest
    order, so the output is identical for any thread count.
    """
    by_id = {v.video_id: v for v in store.manifest}
    jobs = []
    for plan in plans:
        entry = by_id.get(plan.video_id)
        if entry is None:
            raise ValueError(f"plan references unknown video {plan.video_id!r}")
        if not plan.indices:
            logger.warning("video %s: no valid frames selected, dropping", plan.video_id)
            continue
        frames = {rec.index: rec for rec in entry.frames}
        try:
            records = [frames[i] for i in plan.indices]
        except KeyError as exc:
            raise ValueError(f"plan for {plan.video_id} references missing frame {exc}") from exc
        jobs.append((entry, records))

    needs_conf = params.method in ("max_confidence", "weighted_confidence")

    def run(job):
        entry, records = job
        F = store.matrix[[r.embedding_row for r in records]].astype(np.float64)
        conf = None
        if needs_conf:
            missing = [r.index for r in records if r.confidence is None]
            if missing:
                raise ValueError(
                    f"method {params.method!r} needs confidences but video "
                    f"{entry.video_id} lacks them for frames {missing[:5]}")
            conf = np.array([r.confidence for r in records])
        return combine_mod.combine(F, params, conf, video_id=entry.video_id)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            embeddings = list(pool.map(run, jobs))
    else:
        embeddings = [run(job) for job in jobs]

    records_out = []
    matrix = np.zeros((len(embeddings), store.dim), dtype=np.float32)
    for row, (emb, (entry, recs)) in enumerate(zip(embeddings, jobs)):
        matrix[row] = emb.vector.astype(np.float32)
        records_out.append(VideoVecRecord(
            video_id=entry.video_id,
            posted_at=entry.posted_at.isoformat(),
            row=row, method=params.method, n_frames=len(recs),
        ))
    return records_out, matrix


def stage_cluster(graph: simgraph.CostGraph) -> multicut.SolveResult:
    return multicut.solve(graph)


def clusters_payload(records: Sequence[VideoVecRecord],
                     result: multicut.SolveResult) -> dict:
    labels = result.clustering.labels
    return {
        "solver": result.solver,
        "objective": result.objective,
        "n_clusters": result.clustering.n_clusters,
        "cluster_sizes": result.clustering.sizes(),
        "assignments": {rec.video_id: int(labels[rec.row]) for rec in records},
    }


def labels_from_clusters(payload: dict, records: Sequence[VideoVecRecord]) -> np.ndarray:
    assignments = payload["assignments"]
    try:
        return np.array([assignments[rec.video_id] for rec in records], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"clusters file lacks an assignment for video {exc}") from exc


def sweep_row(cal: float, result: multicut.SolveResult,
              report: metrics_mod.MetricsReport) -> dict:
    """One summary line per calibration, mirroring the ablation table columns."""
    sizes = result.clustering.sizes()
    return {
        "cal": cal,
        "clusters": report.n_clusters,
        "largest": report.largest,
        "avg_size": report.mean_size,
        "median": report.median_size,
        "singletons_pct": report.singleton_ratio * 100.0,
        "top10_pct": report.top10_coverage * 100.0,
        "top20_pct": metrics_mod.coverage_topk(sizes, 20) * 100.0,
        "clusters_80pct": metrics_mod.clusters_for_coverage(sizes, 0.8),
        "gini": report.gini,
        "overall": report.overall,
    }


def _format_sweep_table(rows: list[dict]) -> str:
    header = ["cal", "clusters", "largest", "avg_size", "median",
              "singletons%", "top10%", "top20%", "#cl80%", "gini", "overall"]
    lines = ["  ".join(f"{h:>10}" for h in header)]
    for r in rows:
        lines.append("  ".join([
            f"{r['cal']:>10g}", f"{r['clusters']:>10d}", f"{r['largest']:>10d}",
            f"{r['avg_size']:>10.2f}", f"{r['median']:>10.1f}",
            f"{r['singletons_pct']:>10.2f}", f"{r['top10_pct']:>10.2f}",
            f"{r['top20_pct']:>10.2f}", f"{r['clusters_80pct']:>10d}",
            f"{r['gini']:>10.3f}", f"{r['overall']:>10.3f}",
        ]))
    return "\n".join(lines)


def run_sweep(records: Sequence[VideoVecRecord], matrix: np.ndarray,
              cals: Sequence[float], out_dir: Path, threads: int = 1) -> list[dict]:
    """Cluster the same vectors at every calibration; one clusters file per
    cal plus a summary table."""
    sims = simgraph.cosine_matrix(matrix.astype(np.float64))

    def run_one(cal: float):
        graph = simgraph.calibrate(sims, cal)
        result = stage_cluster(graph)
        report = metrics_mod.metrics_report(matrix, result.clustering.labels)
        return result, report

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = list(pool.map(run_one, cals))
    else:
        solved = [run_one(cal) for cal in cals]

    rows = []
    for cal, (result, report) in zip(cals, solved):
        tag = _cal_tag(cal)
        _write_json(out_dir / f"clusters_cal{tag}.json", clusters_payload(records, result))
        _write_json(out_dir / f"report_cal{tag}.json", report.to_dict())
        rows.append(sweep_row(cal, result, report))
    rows.sort(key=lambda r: r["cal"])
    _write_json(out_dir / "sweep_summary.json", {"rows": rows})
    return rows


def run_pipeline(store_dir: Path, out_dir: Path, *, mode: str = "static",
                 selection: Optional[SelectionParams] = None,
                 combine_params: Optional[CombineParams] = None,
                 cal: Optional[float] = None, cals: Optional[Sequence[float]] = None,
                 threads: int = 1, skip_dedup: bool = False) -> dict:
    """Full pipeline over a store; returns the artifact paths written.

    Exactly one of cal / cals decides between a single clustering run and
    a calibration sweep. Duplicates are removed before selection unless
    skip_dedup is set.
    """
    if (cal is None) == (cals is None):
        raise StageError("config", "exactly one of cal or cals must be given")
    selection = selection or SelectionParams()
    combine_params = combine_params or CombineParams()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict = {}

    try:
        store = read_store(store_dir)
    except Exception as exc:
        raise StageError("store", str(exc)) from exc
    logger.info("store: %d videos, %d frame rows, dim=%d",
                len(store.manifest), store.rows, store.dim)

    if skip_dedup:
        working = store
    else:
        try:
            report = dedup_mod.dedup_store(store)
        except Exception as exc:
            raise StageError("dedup", str(exc)) from exc
        _write_json(out_dir / "dedup.json", report.to_dict())
        artifacts["dedup"] = out_dir / "dedup.json"
        keep = report.originals
        working = EmbeddingStore(
            manifest=[v for v in store.manifest if v.video_id in keep],
            dim=store.dim, matrix=store.matrix, backbone_tag=store.backbone_tag)
        logger.info("dedup: %d originals, %d duplicates",
                    len(report.originals), len(report.duplicates))

    try:
        plans = stage_select(working, selection, mode)
    except Exception as exc:
        raise StageError("select", str(exc)) from exc
    _write_json(out_dir / "plans.json", {
        "mode": mode,
        "params": vars(selection),
        "plans": [p.to_dict() for p in plans],
    })
    artifacts["plans"] = out_dir / "plans.json"

    try:
        records, matrix = stage_combine(working, plans, combine_params, threads)
    except Exception as exc:
        raise StageError("combine", str(exc)) from exc
    if matrix.shape[0] == 0:
        raise StageError("combine", "no videos survived frame selection")
    vec_path = out_dir / "videovecs.bin"
    combine_mod.write_video_vectors(vec_path, records, matrix)
    artifacts["videovecs"] = vec_path
    logger.info("combine: %d video vectors via %s", matrix.shape[0], combine_params.method)

    if cal is not None:
        try:
            graph = simgraph.build_cost_graph(matrix.astype(np.float64), cal)
        except Exception as exc:
            raise StageError("graph", str(exc)) from exc
        simgraph.write_graph(out_dir / "graph.bin", graph)
        artifacts["graph"] = out_dir / "graph.bin"

        try:
            result = stage_cluster(graph)
        except Exception as exc:
            raise StageError("cluster", str(exc)) from exc
        _write_json(out_dir / "clusters.json", clusters_payload(records, result))
        artifacts["clusters"] = out_dir / "clusters.json"
        logger.info("cluster: %d clusters, objective %.6f",
                    result.clustering.n_clusters, result.objective)

        try:
            report = metrics_mod.metrics_report(matrix, result.clustering.labels)
        except Exception as exc:
            raise StageError("metrics", str(exc)) from exc
        _write_json(out_dir / "report.json", report.to_dict())
        artifacts["report"] = out_dir / "report.json"
    else:
        try:
            rows = run_sweep(records, matrix, list(cals), out_dir, threads)
        except Exception as exc:
            raise StageError("sweep", str(exc)) from exc
        artifacts["sweep_summary"] = out_dir / "sweep_summary.json"
        logger.info("sweep:\n%s", _format_sweep_table(rows))
    return artifacts


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_synth(args, config) -> int:
    out = Path(_pick(args.out, config, "out", "store"))
    store, labels = synth.make_planted_store(
        n_videos=_pick(args.videos, config, "videos", 200),
        n_clusters=_pick(args.clusters, config, "clusters", 4),
        dim=_pick(args.dim, config, "dim", 32),
        seed=_pick(args.seed, config, "seed", 0),
        frames_min=_pick(args.frames_min, config, "frames_min", 4),
        frames_max=_pick(args.frames_max, config, "frames_max", 8),
    )
    write_store(store, out)
    _write_json(out / "truth.json", {
        v.video_id: int(lab) for v, lab in zip(store.manifest, labels)})
    logger.info("wrote synthetic store (%d videos) to %s", len(store.manifest), out)
    return 0


def _cmd_dedup(args, config) -> int:
    store = read_store(_require(_pick(args.store, config, "store", None), "store"))
    report = dedup_mod.dedup_store(store, black_threshold=args.black_threshold)
    _write_json(_pick(args.out, config, "out", "dedup.json"), report.to_dict())
    logger.info("%d originals, %d duplicates", len(report.originals), len(report.duplicates))
    return 0


def _select_params(args, config) -> SelectionParams:
    return SelectionParams(
        fps=_pick(args.fps, config, "fps", 1.0),
        n_min=_pick(args.n_min, config, "n_min", 4),
        n_max=_pick(args.n_max, config, "n_max", 100),
    )


def _cmd_select(args, config) -> int:
    store = read_store(_require(_pick(args.store, config, "store", None), "store"))
    mode = _pick(args.mode, config, "mode", "static")
    params = _select_params(args, config)
    plans = stage_select(store, params, mode)
    _write_json(_pick(args.out, config, "out", "plans.json"), {
        "mode": mode, "params": vars(params), "plans": [p.to_dict() for p in plans]})
    return 0


def _combine_params(args, config) -> CombineParams:
    return CombineParams(
        method=_pick(args.method, config, "method", "average"),
        tau=_pick(args.tau, config, "tau", None),
        radius=_pick(args.radius, config, "radius", 1),
    )


def _cmd_combine(args, config) -> int:
    store = read_store(_require(_pick(args.store, config, "store", None), "store"))
    plans_doc = _read_json(args.plans)
    plans = [SelectionPlan(p["video_id"], p["mode"], p["indices"], p["skipped"])
             for p in plans_doc["plans"]]
    records, matrix = stage_combine(store, plans, _combine_params(args, config),
                                    threads=args.threads or 1)
    combine_mod.write_video_vectors(_pick(args.out, config, "out", "videovecs.bin"),
                                    records, matrix)
    return 0


def _cmd_graph(args, config) -> int:
    _, matrix = combine_mod.read_video_vectors(args.videovecs)
    cal = _pick(args.cal, config, "cal", 0.7)
    graph = simgraph.build_cost_graph(matrix.astype(np.float64), cal)
    simgraph.write_graph(_pick(args.out, config, "out", "graph.bin"), graph)
    return 0


def _cmd_cluster(args, config) -> int:
    graph = simgraph.read_graph(args.graph)
    result = stage_cluster(graph)
    if args.videovecs:
        records, _ = combine_mod.read_video_vectors(args.videovecs)
        if len(records) != graph.n:
            raise ValueError(f"graph has {graph.n} nodes but manifest lists {len(records)} videos")
    else:
        records = [VideoVecRecord(str(i), "", i, "?", 0) for i in range(graph.n)]
    _write_json(_pick(args.out, config, "out", "clusters.json"),
                clusters_payload(records, result))
    logger.info("%d clusters, objective %.6f", result.clustering.n_clusters, result.objective)
    return 0


def _cmd_metrics(args, config) -> int:
    records, matrix = combine_mod.read_video_vectors(args.videovecs)
    payload = _read_json(args.clusters)
    labels = labels_from_clusters(payload, records)
    report = metrics_mod.metrics_report(matrix, labels)
    _write_json(_pick(args.out, config, "out", "report.json"), report.to_dict())
    logger.info("overall score %.3f over %d clusters", report.overall, report.n_clusters)
    return 0


def _side_report(matrix: np.ndarray, labels: np.ndarray, years: np.ndarray) -> dict:
    temporal = metrics_mod.chi_square_temporal(labels, years).to_dict()
    if np.unique(labels).size >= 2:
        centroids = metrics_mod.centroid_similarity(matrix, labels).to_dict()
    else:
        centroids = None
    return {"temporal": temporal, "centroids": centroids}


def _cmd_compare(args, config) -> int:
    records, matrix = combine_mod.read_video_vectors(args.videovecs)
    labels_a = labels_from_clusters(_read_json(args.a), records)
    labels_b = labels_from_clusters(_read_json(args.b), records)
    years = np.array([int(rec.posted_at[:4]) for rec in records])
    percent, rows_a, cols_b = metrics_mod.overlap_matrix(labels_a, labels_b)
    out = {
        "vi": metrics_mod.variation_of_information(labels_a, labels_b),
        "overlap": {"matrix": percent.tolist(), "rows_a": rows_a, "cols_b": cols_b},
        "a": _side_report(matrix, labels_a, years),
        "b": _side_report(matrix, labels_b, years),
    }
    _write_json(_pick(args.out, config, "out", "comparison.json"), out)
    logger.info("VI = %.4f", out["vi"])
    return 0


def _cmd_sweep(args, config) -> int:
    store = read_store(_require(_pick(args.store, config, "store", None), "store"))
    out_dir = Path(_pick(args.out, config, "out", "sweep"))
    out_dir.mkdir(parents=True, exist_ok=True)
    mode = _pick(args.mode, config, "mode", "static")
    plans = stage_select(store, _select_params(args, config), mode)
    records, matrix = stage_combine(store, plans, _combine_params(args, config),
                                    threads=args.threads or 1)
    if args.cals:
        cals = _parse_cals(args.cals)
    else:
        cals = [float(c) for c in config.get("cals", DEFAULT_CALS)]
    rows = run_sweep(records, matrix, cals, out_dir, threads=args.threads or 1)
    print(_format_sweep_table(rows))
    return 0


def _cmd_pipeline(args, config) -> int:
    cal = _pick(args.cal, config, "cal", None)
    cals = _parse_cals(args.cals) if args.cals else config.get("cals")
    if cal is None and cals is None:
        cal = 0.7
    run_pipeline(
        Path(_require(_pick(args.store, config, "store", None), "store")),
        Path(_pick(args.out, config, "out", "out")),
        mode=_pick(args.mode, config, "mode", "static"),
        selection=_select_params(args, config),
        combine_params=_combine_params(args, config),
        cal=cal, cals=cals,
        threads=args.threads or int(config.get("threads", 1)),
        skip_dedup=bool(_pick(args.no_dedup or None, config, "no_dedup", False)),
    )
    return 0


def _common_flags() -> argparse.ArgumentParser:
    # shared by the main parser and every subcommand so the flags are
    # accepted on either side of the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="TOML config file; flags override its keys")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for per-video and per-cal work")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for synthetic data")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output file or directory (stage-dependent)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="mcvc",
        description="Cluster videos by visual theme via minimum-cost multicut",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=lambda **kw: argparse.ArgumentParser(parents=[common], **kw))

    p = sub.add_parser("synth", help="generate a planted-cluster store")
    p.add_argument("--videos", type=int)
    p.add_argument("--clusters", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--frames-min", type=int, dest="frames_min")
    p.add_argument("--frames-max", type=int, dest="frames_max")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("dedup", help="mark duplicate videos by boundary-frame hashes")
    p.add_argument("--store")
    p.add_argument("--black-threshold", type=float, default=dedup_mod.DEFAULT_BLACK_THRESHOLD)
    p.set_defaults(func=_cmd_dedup)

    p = sub.add_parser("select", help="plan which frames to use per video")
    p.add_argument("--store")
    p.add_argument("--mode", choices=["static", "dynamic"])
    p.add_argument("--fps", type=float)
    p.add_argument("--n-min", type=int, dest="n_min")
    p.add_argument("--n-max", type=int, dest="n_max")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("combine", help="aggregate frame embeddings per video")
    p.add_argument("--store")
    p.add_argument("--plans", required=True)
    p.add_argument("--method", choices=list(combine_mod.METHODS))
    p.add_argument("--tau", type=float)
    p.add_argument("--radius", type=int)
    p.set_defaults(func=_cmd_combine)

    p = sub.add_parser("graph", help="build the calibrated cost graph")
    p.add_argument("--videovecs", required=True)
    p.add_argument("--cal", type=float)
    p.set_defaults(func=_cmd_graph)

    p = sub.add_parser("cluster", help="solve the multicut on a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--videovecs", help="video manifest for id mapping")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("metrics", help="score one clustering")
    p.add_argument("--videovecs", required=True)
    p.add_argument("--clusters", required=True)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("compare", help="compare two clusterings of the same videos")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--videovecs", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="cluster across a calibration grid")
    p.add_argument("--store")
    p.add_argument("--cals", help="comma-separated list, default 0.1..0.9")
    p.add_argument("--mode", choices=["static", "dynamic"])
    p.add_argument("--method", choices=list(combine_mod.METHODS))
    p.add_argument("--tau", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--fps", type=float)
    p.add_argument("--n-min", type=int, dest="n_min")
    p.add_argument("--n-max", type=int, dest="n_max")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("pipeline", help="run dedup, select, combine, graph, cluster, metrics")
    p.add_argument("--store")
    p.add_argument("--mode", choices=["static", "dynamic"])
    p.add_argument("--method", choices=list(combine_mod.METHODS))
    p.add_argument("--tau", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--fps", type=float)
    p.add_argument("--n-min", type=int, dest="n_min")
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--cal", type=float)
    p.add_argument("--cals", help="comma-separated list: run a sweep instead")
    p.add_argument("--no-dedup", action="store_true", dest="no_dedup")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    # SUPPRESS defaults: fill in whatever was not given on either side
    for name, default in (("config", None), ("threads", None), ("seed", None),
                          ("out", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(args.config)
    except Exception as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, config)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

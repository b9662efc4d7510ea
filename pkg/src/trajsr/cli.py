"""Command-line pipeline: gen -> degrade -> train -> reconstruct / mapmatch -> eval -> report.

Every command accepts ``--config FILE``, ``--seed N`` and ``--out DIR``. Any
failure prints exactly one line, ``error: <kind>: <message>``, to stderr and
exits with status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, degrade, metrics, plots, roadnet, trajgen
from .config import PipelineConfig, load_config
from .errors import ConfigError, InvalidArgument, LoadError, TrajSRError
from .mapmatch import map_match
from .model import Checkpoint, reconstruct_many, train
from .seeding import derive_seed
from .trajectory import Trajectory, load_jsonl, save_jsonl

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # keep usage mistakes on the same one-line contract as runtime errors
        sys.stderr.write(f"error: usage: {message}\n")
        sys.exit(1)


# ---------------------------------------------------------------- helpers


def _apply_threads() -> None:
    raw = os.environ.get("TRAJSR_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"TRAJSR_THREADS must be a positive integer, got {raw!r}")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _require_file(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"no {what} given")
    if not Path(path).is_file():
        raise LoadError(f"{what} not found: {path}")
    return Path(path)


def _graph(cfg: PipelineConfig) -> roadnet.RoadGraph:
    return roadnet.load_graph_file(_require_file(cfg.graph, "graph file"))


def _read(path, what: str = "trajectory file") -> list[Trajectory]:
    return load_jsonl(_require_file(Path(path), what))


def _out_path(cfg: PipelineConfig, explicit: str | None, default_name: str) -> Path:
    path = Path(explicit) if explicit else cfg.out_dir / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _by_id(trajs: list[Trajectory]) -> dict[str, Trajectory]:
    out = {}
    for t in trajs:
        if t.id in out:
            raise InvalidArgument(f"duplicate trajectory id {t.id!r}")
        out[t.id] = t
    return out


def _pair_up(first: list[Trajectory], second: list[Trajectory], names=("degraded", "original")):
    ref = _by_id(second)
    pairs = []
    for t in first:
        if t.id not in ref:
            raise InvalidArgument(f"trajectory {t.id!r} from the {names[0]} set has no {names[1]} counterpart")
        pairs.append((t, ref[t.id]))
    return pairs


def _hexgrid(cfg: PipelineConfig, g: roadnet.RoadGraph) -> degrade.HexGrid:
    return degrade.HexGrid(g.frame, cfg.degrade.hex_edge_m())


def _stem(path: str) -> str:
    name = Path(path).name
    return name[:-6] if name.endswith(".jsonl") else Path(name).stem


# ---------------------------------------------------------------- commands


def cmd_grid(cfg: PipelineConfig, args) -> int:
    g = roadnet.grid_graph(args.rows, args.cols, args.spacing_m, origin=(args.origin_lat, args.origin_lon))
    path = _out_path(cfg, args.output, "graph.json")
    with open(path, "w") as fh:
        g.dump(fh)
    print(f"wrote {len(g)} nodes, {g.n_edges} edges to {path}")
    return 0


def cmd_gen(cfg: PipelineConfig, args) -> int:
    g = _graph(cfg)
    if cfg.gen.bbox is not None:
        bbox = cfg.gen.bbox
    else:
        lo, hi = g.bbox()
        bbox = (tuple(lo), tuple(hi))
    gen = trajgen.GenConfig(bbox=bbox, n_traj=cfg.gen.n_traj, speed_mps=cfg.gen.speed_mps,
                            dt_s=cfg.gen.dt_s, max_len=cfg.gen.max_len, seed=derive_seed(cfg.seed, "gen"))
    trajs = trajgen.generate_dataset(g, gen)
    path = _out_path(cfg, None, "trajectories.jsonl")
    save_jsonl(trajs, path)
    (la0, lo0), (la1, lo1) = bbox
    print(f"generated {len(trajs)} trajectories in bbox ({la0:.6f}, {lo0:.6f}) - ({la1:.6f}, {lo1:.6f})")
    print(f"wrote {path}")
    if len(trajs) >= 3:
        parts = trajgen.split_dataset(trajs, cfg.split, seed=derive_seed(cfg.seed, "split"))
        for name, part in zip(("train", "val", "test"), parts):
            save_jsonl(part, cfg.out_dir / f"{name}.jsonl")
        print("split train/val/test: " + "/".join(str(len(p)) for p in parts))
    return 0


def cmd_degrade(cfg: PipelineConfig, args) -> int:
    trajs = _read(args.input)
    kind = cfg.degrade.kind
    if kind == "hex":
        if cfg.graph is None:
            raise ConfigError("hex degradation anchors its grid on the road graph; set paths.graph or --graph")
        grid = _hexgrid(cfg, _graph(cfg))
        out = [degrade.truncate_trajectory(grid, t) for t in trajs]
        detail = f"hex edge {grid.edge_len_m:g} m"
    elif kind == "round":
        out = [degrade.round_coords(t, cfg.degrade.decimals) for t in trajs]
        detail = f"{cfg.degrade.decimals} decimals"
    else:
        frame = _graph(cfg).frame if cfg.graph is not None else None
        out = [degrade.add_noise(t, cfg.degrade.sigma_m, derive_seed(cfg.seed, f"noise:{t.id}"), frame)
               for t in trajs]
        detail = f"sigma {cfg.degrade.sigma_m:g} m"
    path = _out_path(cfg, args.output, f"{_stem(args.input)}.{kind}.jsonl")
    save_jsonl(out, path)
    print(f"degraded {len(out)} trajectories ({kind}, {detail}) -> {path}")
    return 0


def cmd_train(cfg: PipelineConfig, args) -> int:
    g = _graph(cfg)
    pairs = _pair_up(_read(args.degraded), _read(args.original))
    mc = cfg.model_config()
    hexgrid = _hexgrid(cfg, g) if cfg.degrade.kind == "hex" else None
    ckpt = train(g, pairs, mc, hexgrid)
    path = _out_path(cfg, args.output, "model.ckpt")
    ckpt.save(path)
    first = ckpt.training_log[0] if ckpt.training_log else float("nan")
    last = ckpt.training_log[-1] if ckpt.training_log else float("nan")
    print(f"trained on {len(pairs)} pairs for {mc.epochs} epochs; loss {first:.4f} -> {last:.4f}")
    print(f"wrote {path}")
    return 0


def cmd_reconstruct(cfg: PipelineConfig, args) -> int:
    ckpt = Checkpoint.load(_require_file(Path(args.checkpoint), "checkpoint"))
    g = _graph(cfg)
    out = reconstruct_many(ckpt, g, _read(args.input))
    path = _out_path(cfg, args.output, f"{_stem(args.input)}.reconstructed.jsonl")
    save_jsonl(out, path)
    print(f"reconstructed {len(out)} trajectories -> {path}")
    return 0


def cmd_mapmatch(cfg: PipelineConfig, args) -> int:
    g = _graph(cfg)
    params = cfg.hmm_params()
    out = [map_match(g, t, params) for t in _read(args.input)]
    path = _out_path(cfg, args.output, f"{_stem(args.input)}.matched.jsonl")
    save_jsonl(out, path)
    print(f"map-matched {len(out)} trajectories -> {path}")
    return 0


def _parse_candidate(item: str) -> tuple[str, str]:
    label, sep, path = item.partition("=")
    if not sep:
        label, path = _stem(item), item
    if not label or not path:
        raise InvalidArgument(f"candidate must look like LABEL=FILE, got {item!r}")
    return label, path


def cmd_eval(cfg: PipelineConfig, args) -> int:
    ref = _read(args.reference, "reference file")
    reports = []
    for item in args.candidate:
        label, path = _parse_candidate(item)
        pairs = _pair_up(_read(path, "candidate file"), ref, ("candidate", "reference"))
        reports.append(metrics.evaluate(pairs, bins=cfg.bins_km, label=label))
    jpath = _out_path(cfg, args.output, "eval.json")
    with open(jpath, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")
    cpath = jpath.with_suffix(".csv")
    with open(cpath, "w") as fh:
        fh.write(metrics.EvalReport.CSV_HEADER + "\n")
        for r in reports:
            fh.write(r.csv_row() + "\n")
    for r in reports:
        print(f"{r.label}: mean {r.mean_km:.3f} km, median {r.median_km:.3f} km, p85 {r.p85_km:.3f} km (n={r.n})")
    print(f"wrote {jpath} and {cpath}")
    return 0


def _load_reports(path) -> list[metrics.EvalReport]:
    with open(_require_file(Path(path), "evaluation file")) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path}: malformed JSON: {exc}") from None
    items = doc if isinstance(doc, list) else [doc]
    try:
        return [metrics.EvalReport.from_dict(d) for d in items]
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{path}: not an evaluation report ({exc})") from None


def cmd_report(cfg: PipelineConfig, args) -> int:
    reports = [r for p in args.eval for r in _load_reports(p)]
    if not reports:
        raise InvalidArgument("no evaluation reports given")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    table = metrics.render_table(reports)
    (out / "table.md").write_text(table)
    (out / "histogram.svg").write_text(plots.histogram_svg(reports))
    written = ["table.md", "histogram.svg"]
    layers = [(name, getattr(args, name)) for name in ("original", "degraded", "matched", "reconstructed")
              if getattr(args, name)]
    if layers:
        chosen = []
        for name, path in layers:
            found = _by_id(_read(path))
            tid = args.traj_id or next(iter(found), None)
            if tid not in found:
                raise InvalidArgument(f"trajectory {tid!r} not found in {path}")
            chosen.append((name, found[tid]))
        (out / "overlay.svg").write_text(plots.overlay_svg(chosen))
        written.append("overlay.svg")
    sys.stdout.write(table)
    print("wrote " + ", ".join(str(out / w) for w in written))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML pipeline configuration")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides paths.out_dir)")
    common.add_argument("--graph", help="road graph JSON (overrides paths.graph)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    hexopts = argparse.ArgumentParser(add_help=False)
    hexopts.add_argument("--level", type=int, help="hex resolution level (default 7)")
    hexopts.add_argument("--edge-m", type=float, help="hex edge length in metres (overrides --level)")

    p = _Parser(prog="trajsr", description="Trajectory super-resolution pipeline.")
    p.add_argument("--version", action="version", version=f"trajsr {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("grid", parents=[common], help="write a synthetic grid road graph")
    s.add_argument("--rows", type=int, default=20)
    s.add_argument("--cols", type=int, default=20)
    s.add_argument("--spacing-m", type=float, default=200.0)
    s.add_argument("--origin-lat", type=float, default=39.9)
    s.add_argument("--origin-lon", type=float, default=116.4)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("gen", parents=[common], help="generate synthetic trajectories")
    s.add_argument("--n-traj", type=int)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("degrade", parents=[common, hexopts], help="hex-snap, round or noise a trajectory file")
    s.add_argument("input")
    s.add_argument("--kind", choices=["hex", "round", "noise"])
    s.add_argument("--decimals", type=int)
    s.add_argument("--sigma-m", type=float)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("train", parents=[common, hexopts], help="train the super-resolution model")
    s.add_argument("--degraded", required=True)
    s.add_argument("--original", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("reconstruct", parents=[common], help="refine degraded trajectories with a checkpoint")
    s.add_argument("input")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("mapmatch", parents=[common, hexopts], help="HMM map-matching baseline")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_mapmatch)

    s = sub.add_parser("eval", parents=[common], help="Fréchet evaluation against a reference file")
    s.add_argument("--reference", required=True)
    s.add_argument("--candidate", action="append", required=True, metavar="LABEL=FILE")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", parents=[common], help="Markdown table and SVG figures from eval files")
    s.add_argument("eval", nargs="+")
    s.add_argument("--traj-id")
    for name in ("original", "degraded", "matched", "reconstructed"):
        s.add_argument(f"--{name}", help=f"{name} trajectories for the overlay figure")
    s.set_defaults(func=cmd_report)
    return p


def _effective_config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, out_dir=Path(args.out) if args.out else None,
                             graph=Path(args.graph) if args.graph else None)
    deg = cfg.degrade
    over = {}
    for flag, key in (("kind", "kind"), ("level", "level"), ("edge_m", "edge_len_m"),
                      ("decimals", "decimals"), ("sigma_m", "sigma_m")):
        val = getattr(args, flag, None)
        if val is not None:
            over[key] = val
    if "level" in over and "edge_len_m" not in over:
        over["edge_len_m"] = None
    if over:
        from dataclasses import replace

        cfg = replace(cfg, degrade=replace(deg, **over))
    if getattr(args, "n_traj", None) is not None:
        from dataclasses import replace

        cfg = replace(cfg, gen=replace(cfg.gen, n_traj=args.n_traj))
    if getattr(args, "epochs", None) is not None:
        cfg = cfg.with_overrides(model={**cfg.model, "epochs": args.epochs})
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        _apply_threads()
        cfg = _effective_config(args)
        from .config import validate

        validate(cfg)
        return args.func(cfg, args)
    except TrajSRError as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"error: {exc.kind}: {msg}\n")
    except OSError as exc:
        sys.stderr.write(f"error: io: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": ") + "\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())

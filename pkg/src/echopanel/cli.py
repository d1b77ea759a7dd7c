"""``echopanel`` command line entry point.

Exit codes: 0 on success, 2 on usage errors, 1 on processing errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import energetics as en
from . import gridplan as gp
from . import report, sigproc, store, surfacegen, synthlab, workflow
from .errors import EchoPanelError, ParameterError
from .filterbank import FilterBank, apply, build_filterbank, verify_tight_frame
from .mesh import check_mesh, close_panel, to_obj
from .signals import Environment, atomic_write_bytes, read_signal, write_f32, write_signal

FORMATS = ("csv", "json", "svg", "pgm", "obj", "f32", "wav")
GENERATIVE = {"surface gen"}


class UsageError(Exception):
    pass


def _emit(text, out=None):
    """Write to ``out`` atomically, or print to stdout."""
    if out is None or str(out) == "-":
        sys.stdout.write(text if isinstance(text, str) else text.decode())
    else:
        atomic_write_bytes(out, text.encode() if isinstance(text, str) else text)


def _fmt(args, default):
    return getattr(args, "format", None) or default


def _grid(args) -> gp.MeasurementGrid:
    if getattr(args, "grid", None):
        try:
            return gp.MeasurementGrid.from_dict(json.loads(Path(args.grid).read_text()))
        except FileNotFoundError:
            raise UsageError(f"grid file {args.grid} not found") from None
    return gp.build_grid()


def _combos(grid, args):
    combos = gp.enumerate_combinations(grid)
    lim = getattr(args, "max_combinations", None)
    return combos[:lim] if lim else combos


# --- subcommands ---------------------------------------------------------------

def cmd_sweep(args):
    s = sigproc.generate_sweep(args.f0, args.f1, args.duration, args.fs)
    write_signal(args.o, s)


def cmd_process(args):
    env = Environment(temperature_c=args.temp)
    rec = read_signal(args.recording)
    sweep = read_signal(args.sweep, "sweep")
    foam = read_signal(args.foam)
    ir = sigproc.process_pipeline(rec, sweep, foam, env, window_s=args.window)
    write_signal(args.o, ir)


def cmd_fb(args):
    if args.action == "build":
        fb = build_filterbank(args.fs, args.n)
        print(f"tight-frame deviation {verify_tight_frame(fb):.3e}", file=sys.stderr)
        _emit(fb.to_json(), args.o)
    elif args.action == "plot":
        fb = FilterBank.from_json(Path(args.fb).read_text()) if args.fb else build_filterbank(args.fs, args.n)
        _emit(report.filterbank_svg(fb), args.o)
    else:
        if not args.ir or not args.o:
            raise UsageError("fb apply needs --ir and -o")
        ir = read_signal(args.ir, "impulse_response")
        bands = apply(build_filterbank(ir.sample_rate, args.n), ir)
        out = Path(args.o)
        for label, sig in zip(bands.labels, bands.bands):
            write_f32(out / f"band_{label}.f32", sig)


def cmd_energy(args):
    prof = workflow.tnce_table(workflow.read_processed_dir(args.panel), workflow.read_processed_dir(args.flat))
    text = report.tnce_json(prof) if _fmt(args, "csv") == "json" else report.tnce_csv(prof)
    _emit(text, args.o)


def cmd_grid(args):
    if args.action == "plan":
        grid = gp.build_grid(jitter=args.jitter, seed=args.seed)
        text = grid.to_csv() if _fmt(args, "json") == "csv" else grid.to_json()
        _emit(text, args.o or "grid.json")
        print(f"{len(grid)} points, {len(gp.enumerate_combinations(grid))} combinations", file=sys.stderr)
        return
    if args.freq is None:
        raise UsageError(f"grid {args.action} needs --freq")
    grid = _grid(args)
    combos = gp.enumerate_combinations(grid)
    c = sigproc.speed_of_sound(args.temp)
    if args.action == "fresnel":
        lo, hi = gp.fresnel_extremes(grid, combos, args.freq, c)
        res = {"frequency_hz": args.freq, "min_minor_diameter_mm": lo, "max_minor_diameter_mm": hi}
        if _fmt(args, "json") == "csv":
            text = "frequency_hz,min_minor_diameter_mm,max_minor_diameter_mm\n" + f"{args.freq!r},{lo!r},{hi!r}\n"
        else:
            text = json.dumps(res, indent=1) + "\n"
        _emit(text, args.o)
    else:
        if args.layer is not None:
            combos = gp.layer_combinations(grid, combos, args.layer)
        cov = gp.coverage_map(grid, combos, args.freq, c, args.resolution)
        print(f"covered fraction {cov.fraction:.4f}", file=sys.stderr)
        fmt = _fmt(args, "csv" if args.o and str(args.o).endswith(".csv") else "pgm")
        _emit(cov.to_csv() if fmt == "csv" else cov.to_pgm(), args.o or "coverage.pgm")


def _panel_number(args):
    if args.number is not None:
        return args.number
    name = Path(args.o).name
    return int(name) if name.isdigit() else None


def cmd_surface(args):
    if args.action == "adapt":
        if not args.history:
            raise UsageError("surface adapt needs --history")
        data = json.loads(Path(args.history).read_text())
        history = [(r.get("params"), r["tnce"]) for r in data["runs"]]
        steps, d = surfacegen.adapt_step_sizes(history, data.get("steps", {}), tuple(args.thresholds))
        steps = steps if isinstance(steps, dict) else [float(x) for x in steps]
        _emit(json.dumps({"mean_distance": d, "steps": steps}, indent=1, sort_keys=True) + "\n", args.o)
        return
    if not args.o:
        raise UsageError("surface gen needs -o")
    p0 = surfacegen.TypologyParams.default(args.typology, args.seed)
    if args.macro_only:
        p0 = p0.macro_only()
    p1 = None
    if args.typology1:
        p1 = surfacegen.TypologyParams.default(args.typology1, args.seed + 1)
    s0, s1 = surfacegen.generate_panel(p0, p1, _panel_number(args), args.resolution)
    v, f = close_panel(s0, s1)
    rep = check_mesh(v, f)
    if not rep.ok:
        raise EchoPanelError(f"generated mesh failed checks: {rep}")
    out = Path(args.o)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(out / "mesh.obj", to_obj(v, f, f"panel {s0.panel_id} / {s1.panel_id}"))
    meta = {"sides": {s0.panel_id: s0.meta["params"], s1.panel_id: s1.meta["params"]}}
    atomic_write_bytes(out / "params.json", (json.dumps(meta, indent=1, sort_keys=True) + "\n").encode())
    print(f"{s0.panel_id} {s1.panel_id}: {len(v)} vertices, {len(f)} faces", file=sys.stderr)


def cmd_synth(args):
    grid = _grid(args)
    combos = _combos(grid, args)
    if args.panel == "flat":
        panel, default_id = synthlab.ScenePanel.flat(args.r), "Flat"
    elif args.panel == "absorber":
        panel, default_id = synthlab.ScenePanel.absorber(), "Foam"
    else:
        raise UsageError(f"unknown panel model {args.panel}")
    pid = args.id or default_id
    env = Environment(temperature_c=args.temp)
    sweep = sigproc.generate_sweep(duration=args.duration, sample_rate=args.fs)
    root = Path(args.o)
    root.mkdir(parents=True, exist_ok=True)
    store.save_grid(root, grid)
    write_f32(root / "sweep.f32", sweep)
    rec = store.PanelRecord(pid, params={"synthetic": args.panel, "reflection": panel.reflection},
                            ambient=[(0.0, env)])
    # the absorber reference is recorded once per root, by the first run that needs it
    have_foam = set()
    if "Foam" in store.list_panels(root):
        have_foam = set(store.read_index(root, "Foam").get("raw", []))
    need_foam = pid != "Foam" and any(c.key not in have_foam for c in combos)
    foam_writer = None
    if need_foam:
        foam_rec = workflow.load_panel_meta(root, "Foam") if have_foam else store.PanelRecord("Foam", ambient=[(0.0, env)])
        foam_writer = store.PanelWriter(root, foam_rec)
    try:
        with store.PanelWriter(root, rec) as w:
            for m in synthlab.synth_panel_dataset(grid, combos, panel, env, sweep, args.ir_len):
                key = m.combination.key
                w.add("raw", key, m.recording)
                if foam_writer is not None and key not in have_foam:
                    foam_writer.add("raw", key, m.foam_recording)
    finally:
        if foam_writer is not None:
            foam_writer.close()
    print(f"{pid}: {len(combos)} combinations under {root}", file=sys.stderr)


def cmd_dataset(args):
    root = args.root
    if args.action == "ls":
        rows = []
        for pid in store.list_panels(root):
            idx = store.read_index(root, pid)
            rows.append({"panel": pid, "raw": len(idx.get("raw", [])), "processed": len(idx.get("processed", []))})
        if _fmt(args, "csv") == "json":
            _emit(json.dumps(rows, indent=1) + "\n", args.o)
        else:
            _emit("panel,raw,processed\n" + "".join(f"{r['panel']},{r['raw']},{r['processed']}\n" for r in rows), args.o)
    elif args.action == "verify":
        res = store.verify_dataset(root)
        _emit(json.dumps(res, indent=1) + "\n", args.o)
        return 0 if res["ok"] else 1
    elif args.action == "augment":
        rec = store.load_panel(root, _need_panel(args))
        views = store.augment(rec, store.load_grid(root))
        out = [{"symmetry": v.symmetry.name, "mapping": v.mapping} for v in views]
        _emit(json.dumps({"base_id": rec.panel_id, "views": out}, indent=1) + "\n", args.o)
    elif args.action == "process":
        pids = [_need_panel(args)] if args.panel else [p for p in store.list_panels(root)]
        for pid in pids:
            n = len(workflow.process_panel(root, pid, args.threads))
            print(f"{pid}: {n} processed", file=sys.stderr)
    elif args.action == "profile":
        pids = [_need_panel(args)] if args.panel else store.list_panels(root)
        for pid in pids:
            if pid == "Foam":
                continue
            n = len(workflow.profile_panel(root, pid))
            print(f"{pid}: {n} profiles", file=sys.stderr)


def _need_panel(args):
    if not args.panel:
        raise UsageError(f"dataset {args.action} needs --panel")
    return args.panel


def cmd_plot(args):
    grid = store.load_grid(args.root)
    rec = store.load_panel(args.root, args.panel)
    flat = store.require_reference(args.root, "Flat")
    if not rec.profiles or not flat.profiles:
        raise EchoPanelError(f"panel {args.panel} or Flat has no profiles; run `dataset profile` first")
    rel = workflow.relative_to_flat(rec.profiles, flat.profiles)
    profiles = {gp.Combination.from_key(k): v for k, v in rel.items()}
    missing = {gp.Combination.from_key(k) for k in rec.missing}
    profiles = {k: v for k, v in profiles.items() if k not in missing}
    agg = "mean" if args.mic is None else None
    rep = en.grid_report(profiles, grid, args.mic, args.floor, args.ceil, aggregate=agg)
    _emit(report.grid_svg(rep), args.o or "grid.svg")


def cmd_report(args):
    panels = [p for p in args.panels.split(",") if p]
    if not panels:
        raise UsageError("report compare needs --panels")
    profs = {}
    for pid in panels:
        rec = store.load_panel(args.root, pid)
        if not rec.profiles:
            raise EchoPanelError(f"panel {pid} has no profiles")
        profs[pid] = rec.profiles
    rows = workflow.compare_table(profs, args.percentile, args.aggregate)
    sys.stdout.write(report.compare_csv(rows, args.percentile, decimals=1))
    if args.o:
        if _fmt(args, "csv") == "json":
            data = [{"panel": r["panel"], "bands_db": [float(x) for x in r["bands_db"]],
                     "total_db": float(r["total_db"])} for r in rows]
            _emit(json.dumps(data, indent=1) + "\n", args.o)
        else:
            _emit(report.compare_csv(rows, args.percentile), args.o)


# --- parser --------------------------------------------------------------------

def _common(top=False):
    # separate instances: argparse shares action objects with parents
    kw = {} if top else {"default": argparse.SUPPRESS}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, help="random seed (echoed to stderr)", **({"default": None} if top else kw))
    p.add_argument("--threads", type=int, help="worker threads for batch stages", **({"default": 1} if top else kw))
    p.add_argument("--format", choices=FORMATS, help="output format", **({"default": None} if top else kw))
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="echopanel", description="Acoustic panel measurement toolkit.",
                                 parents=[_common(top=True)])
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=fn)
        return p

    p = add("sweep", cmd_sweep, "generate the excitation sweep")
    p.add_argument("--f0", type=float, default=2000.0)
    p.add_argument("--f1", type=float, default=40000.0)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--fs", type=int, default=96000)
    p.add_argument("-o", required=True)

    p = add("process", cmd_process, "recording to cropped reflection impulse response")
    p.add_argument("--recording", required=True)
    p.add_argument("--sweep", required=True)
    p.add_argument("--foam", required=True)
    p.add_argument("--temp", type=float, default=sigproc.REFERENCE_TEMPERATURE)
    p.add_argument("--window", type=float, default=sigproc.CROP_WINDOW)
    p.add_argument("-o", required=True)

    p = add("fb", cmd_fb, "filterbank build, plot or apply")
    p.add_argument("action", choices=("build", "plot", "apply"))
    p.add_argument("--fs", type=float, default=96000)
    p.add_argument("--n", type=int, default=65536, help="analysis length")
    p.add_argument("--fb", help="filterbank JSON for plot")
    p.add_argument("--ir", help="impulse response for apply")
    p.add_argument("-o")

    p = add("energy", cmd_energy, "TNCE per combination of a panel against Flat")
    p.add_argument("--panel", required=True, help="panel directory with processed IRs")
    p.add_argument("--flat", required=True, help="Flat reference directory")
    p.add_argument("-o")

    p = add("grid", cmd_grid, "measurement grid planning")
    p.add_argument("action", choices=("plan", "fresnel", "coverage"))
    p.add_argument("--grid", help="grid JSON (default: built-in layout)")
    p.add_argument("--freq", type=float)
    p.add_argument("--temp", type=float, default=sigproc.REFERENCE_TEMPERATURE)
    p.add_argument("--layer", type=int)
    p.add_argument("--resolution", type=float, default=2.0, help="coverage raster cell, mm")
    p.add_argument("--jitter", type=float, default=0.0, help="point jitter, mm (uses --seed)")
    p.add_argument("-o")

    p = add("surface", cmd_surface, "panel surface generation")
    p.add_argument("action", choices=("gen", "adapt"))
    p.add_argument("--typology", choices=surfacegen.TYPOLOGIES, default="flemish_bond")
    p.add_argument("--typology1", choices=surfacegen.TYPOLOGIES, help="typology of side 1")
    p.add_argument("--number", type=int, help="panel number (default: from -o name)")
    p.add_argument("--resolution", type=float, default=5.0)
    p.add_argument("--macro-only", action="store_true")
    p.add_argument("--history", help="runs JSON for adapt")
    p.add_argument("--thresholds", type=float, nargs=2, default=(0.05, 0.5))
    p.add_argument("-o")

    p = add("synth", cmd_synth, "synthetic recordings for a dataset root")
    p.add_argument("--panel", choices=("flat", "absorber"), default="flat")
    p.add_argument("--r", type=float, default=1.0, help="reflection coefficient")
    p.add_argument("--grid")
    p.add_argument("--id", help="panel id (default Flat or Foam)")
    p.add_argument("--temp", type=float, default=sigproc.REFERENCE_TEMPERATURE)
    p.add_argument("--duration", type=float, default=0.1, help="sweep duration, s")
    p.add_argument("--fs", type=int, default=96000)
    p.add_argument("--ir-len", type=int, default=synthlab.DEFAULT_IR_LEN)
    p.add_argument("--max-combinations", type=int)
    p.add_argument("-o", required=True)

    p = add("dataset", cmd_dataset, "dataset listing, checks, augmentation and batch processing")
    p.add_argument("action", choices=("ls", "verify", "augment", "process", "profile"))
    p.add_argument("--root", required=True)
    p.add_argument("--panel")
    p.add_argument("-o")

    p = add("plot", cmd_plot, "SVG plots")
    p.add_argument("what", choices=("grid",))
    p.add_argument("--root", required=True)
    p.add_argument("--panel", required=True)
    p.add_argument("--mic", type=int, help="microphone point id (omit for the per-point mean)")
    p.add_argument("--floor", type=float, default=en.DB_FLOOR)
    p.add_argument("--ceil", type=float, default=en.DB_CEIL)
    p.add_argument("-o")

    p = add("report", cmd_report, "comparison tables")
    p.add_argument("what", choices=("compare",))
    p.add_argument("--root", required=True)
    p.add_argument("--panels", required=True, help="comma-separated panel ids")
    p.add_argument("--percentile", type=float, default=90.0)
    p.add_argument("--aggregate", choices=("tail_mean", "value"), default="tail_mean")
    p.add_argument("-o")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # exits 2 on usage errors
    key = f"{args.command} {getattr(args, 'action', '')}".strip()
    if key in GENERATIVE and args.seed is None:
        ap.error(f"{key} needs --seed")
    if args.seed is not None or key in GENERATIVE or getattr(args, "jitter", 0):
        print(f"seed={args.seed}", file=sys.stderr)
    if args.seed is None:
        args.seed = 0
    try:
        rc = args.func(args)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"echopanel: error: {e}", file=sys.stderr)
        return 2
    except (EchoPanelError, OSError, ValueError) as e:
        print(f"echopanel: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``synthgen run <config> [args...] [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from synthgen.config import ModuleEntry, load_config, resolve_module_config, substitute_args, with_global
from synthgen.errors import SynthgenError
from synthgen.modules import ContainerWriter
from synthgen.pipeline import build_pipeline, initial_state, run_pipeline

log = logging.getLogger("synthgen")


def make_parsers() -> tuple[argparse.ArgumentParser, argparse.ArgumentParser]:
    parser = argparse.ArgumentParser(prog="synthgen", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("command", choices=["run"], help="subcommand")

    run = argparse.ArgumentParser(prog="synthgen run", description="execute a pipeline config")
    run.add_argument("config", help="config file (.json or .yaml, JSON content)")
    run.add_argument("args", nargs="*", help="values for <args:0>, <args:1>, ...")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--export-png", action="store_true", help="also write PNG previews")
    run.add_argument("--dry-run", action="store_true", help="skip renderers and writer")
    run.add_argument("--threads", type=int, default=0, help="render threads (0 = all cores)")
    return parser, run


def run(config_path: str, args: list[str], *, seed: int | None = None, export_png: bool = False,
        dry_run: bool = False, threads: int = 0, out=None) -> int:
    out = out or sys.stdout
    started = time.perf_counter()
    try:
        doc = substitute_args(load_config(config_path), args)
        if seed is not None:
            doc = with_global(doc, seed=seed)
        modules = build_pipeline(doc)
        if not any(isinstance(m, ContainerWriter) for m in modules):
            modules.append(ContainerWriter(resolve_module_config(doc, ModuleEntry("writer.ContainerWriter"))))
        state = initial_state(doc, dry_run=dry_run, export_png=export_png, threads=threads)
        if dry_run:
            print("planned module order:", file=out)
            for i, module in enumerate(modules):
                tag = " (skipped)" if module.renders or module.writes else ""
                print(f"  {i}: {module.name}{tag}", file=out)
        state = run_pipeline(modules, state)
    except (SynthgenError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print("module timings:", file=out)
    for name, seconds in state.timings:
        print(f"  {name:<28s} {seconds:8.3f} s", file=out)
    images = sum(len(group) for group in state.pending_frames.values())
    print(f"keyframes: {len(state.scene.keyframes)}  images: {images}  "
          f"containers: {len(state.written)}  total: {time.perf_counter() - started:.2f} s", file=out)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, run_parser = make_parsers()
    try:
        top, _ = parser.parse_known_args(argv)
        rest = [a for a in argv if a not in ("-v", "--verbose")]
        rest.remove(top.command)
        ns = run_parser.parse_intermixed_args(rest)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if top.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not Path(ns.config).is_file():
        run_parser.print_usage(sys.stderr)
        print(f"synthgen run: error: config file not found: {ns.config}", file=sys.stderr)
        return 2
    return run(ns.config, ns.args, seed=ns.seed, export_png=ns.export_png,
               dry_run=ns.dry_run, threads=ns.threads)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit status: 0 when the property holds or the synthesis succeeds, 1 when it
fails (a certificate or witness is printed), 2 for input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .boundedness import check_nupbr_loc, dsv_statistic_sup, sup_table
from .deflator import (MODES, PipelineError, synth_deflator_dsv, synth_deflator_nupbr,
                       pasting_pipeline, verify_smd)
from .ext import fmt
from .gsm import compare_projection
from .io import (Instance, InstanceError, deflator_from_record, deflator_to_record, digest,
                 dumps, instance_to_record, load_instance)
from .process_sets import (SamplingError, cemetery_structure, classify, recipe_to_record,
                           sample_closure)
from .theorem_lab import (DEFAULT_GALLERY, GALLERY_NAMES, check_theorem_equivalences, fuzz,
                          gallery_instance)
from .tree import TreeError


class InputError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    instance: str | None = None
    digest: str | None = None
    verdicts: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    status: int = 0

    def to_record(self) -> dict:
        rec = {"command": self.command, "instance": self.instance, "digest": self.digest,
               "status": self.status, "verdicts": self.verdicts, "witnesses": self.witnesses,
               "values": self.values}
        if self.timings:
            rec["timings"] = self.timings
        return rec

    def render_human(self) -> str:
        lines = [f"{self.command}: {self.instance or '-'}" + (f" [{self.digest}]" if self.digest else "")]
        for section in ("verdicts", "witnesses", "values", "timings"):
            data = getattr(self, section)
            if not data:
                continue
            lines.append(f"{section}:")
            lines += _human_lines(data, 1)
        lines.append(f"exit status: {self.status}")
        return "\n".join(lines)


def _human_lines(data, depth: int) -> list[str]:
    pad = "  " * depth
    out = []
    if isinstance(data, dict):
        for k, v in data.items():
            if isinstance(v, (dict, list)) and v:
                out.append(f"{pad}{k}:")
                out += _human_lines(v, depth + 1)
            else:
                out.append(f"{pad}{k}: {_scalar(v)}")
    else:
        for item in data:
            if isinstance(item, dict):
                out.append(pad + ", ".join(f"{k}={_scalar(v)}" for k, v in item.items()))
            else:
                out.append(pad + _scalar(item))
    return out


def _scalar(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return str(v)


def _values(p) -> dict:
    return {n: fmt(p[n]) for n in p.tree.ids}


def _times(st) -> dict:
    return {leaf: fmt(v) for leaf, v in st.values.items()}


def resolve_instance(ref: str) -> Instance:
    if ref.startswith("gallery:"):
        try:
            return gallery_instance(ref[len("gallery:"):])
        except (KeyError, ValueError) as exc:
            raise InputError(exc.args[0]) from None
    try:
        return load_instance(ref)
    except (InstanceError, TreeError) as exc:
        raise InputError(str(exc)) from None


def _write(target: str, text: str) -> None:
    if target == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(target).write_text(text + "\n")


def _xhat(inst: Instance):
    if inst.xhat is not None:
        return inst.xhat
    c = classify(inst.gens)
    if c.witness is None:
        raise InputError("instance has no dominating process")
    return c.witness


# -- commands ----------------------------------------------------------------


def cmd_classify(args, inst: Instance, rep: RunReport) -> None:
    c = classify(inst.gens)
    cs = cemetery_structure(inst.gens)
    rep.verdicts = {"kind": c.kind, "absorbing": cs.absorbing}
    if c.witness is not None:
        rep.witnesses["dominating"] = _values(c.witness)
    rep.values = {"T~": _times(cs.Ttilde), "ladder": [_times(r.hitting) for r in cs.ladder]}


def cmd_check_nupbr(args, inst: Instance, rep: RunReport) -> None:
    v = check_nupbr_loc(inst.gens)
    rep.verdicts["NUPBR_loc"] = v.holds
    if not v.holds:
        rep.witnesses = {"t": v.time, "node": v.node}
        rep.status = 1
    rep.values["sup"] = sup_table(inst.gens, v.profile)


def cmd_check_dsv(args, inst: Instance, rep: RunReport) -> None:
    xhat = _xhat(inst)
    try:
        r = dsv_statistic_sup(inst.gens, xhat)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rep.verdicts["DSV"] = r.holds
    rep.values = {"T^": _times(r.Thatt), "anchors": r.anchors,
                  "statistic": {k: fmt(v) for k, v in r.statistic.items()}, "sup": fmt(r.sup)}
    if not r.holds:
        rep.witnesses["leaf"] = next(k for k, v in r.statistic.items() if fmt(v) == "inf")
        rep.status = 1


def cmd_synth(args, inst: Instance, rep: RunReport) -> None:
    try:
        res = (synth_deflator_nupbr(inst.gens) if args.mode == "nupbr"
               else synth_deflator_dsv(inst.gens, _xhat(inst)))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.emit_lp:
        _write(args.emit_lp, res.lp.to_text())
    rep.verdicts["feasible"] = res.feasible
    rep.values["delta"] = fmt(res.delta)
    if res.feasible:
        rec = deflator_to_record(res.deflator)
        rep.values["Y"] = rec["Y"]
        rep.values["mode"] = rec["mode"]
        if args.emit:
            _write(args.emit, dumps(rec))
    else:
        rep.witnesses["certificate"] = {k: fmt(v) for k, v in sorted(res.certificate.items())}
        rep.status = 1


def cmd_verify_smd(args, inst: Instance, rep: RunReport) -> None:
    try:
        rec = json.loads(Path(args.deflator).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{args.deflator}: {exc}") from None
    try:
        defl = deflator_from_record(inst.tree, rec)
    except InstanceError as exc:
        raise InputError(f"{args.deflator}: {exc}") from None
    samples = sample_closure(inst.gens, args.depth, args.seed)
    mode = args.mode or defl.support_mode
    xhat = _xhat(inst) if mode == MODES[2] else None
    r = verify_smd(inst.gens, defl.Y, mode, samples, delta=defl.delta, xhat=xhat)
    rep.verdicts["SMD"] = r.ok
    rep.values = {"mode": mode, "checked processes": r.checked}
    if not r.ok:
        rep.witnesses["violations"] = [{"check": c, "node": n, "lhs": fmt(a), "rhs": fmt(b)}
                                       for c, n, a, b in r.violations]
        rep.status = 1


def cmd_closure_sample(args, inst: Instance, rep: RunReport) -> None:
    try:
        samples = sample_closure(inst.gens, args.depth, args.seed, count=args.count)
    except SamplingError as exc:
        rep.witnesses["error"] = str(exc)
        rep.status = 1
        return
    recs = [{"recipe": recipe_to_record(s.recipe), "value": _values(s.value)} for s in samples]
    rep.values = {"count": len(recs), "depth": args.depth, "seed": args.seed}
    if args.emit:
        _write(args.emit, dumps(recs))
    else:
        rep.values["samples"] = [r["value"] for r in recs]


def cmd_pipeline(args, inst: Instance, rep: RunReport) -> None:
    try:
        res = pasting_pipeline(inst.gens)
    except PipelineError as exc:
        rep.verdicts["constructed"] = False
        rep.witnesses["precondition"] = str(exc)
        rep.status = 1
        return
    ok = verify_smd(inst.gens, res.deflator.Y, res.deflator.support_mode).ok
    rep.verdicts = {"constructed": True, "verified": ok, "monotone": res.monotone}
    rep.values = {"delta": fmt(res.deflator.delta), "Y": _values(res.deflator.Y),
                  "stages": [{"rung": s.rung, "refined nodes": len(s.tree.ids),
                              "delta": fmt(s.delta), "projected": _values(s.projected)}
                             for s in res.stages]}
    if args.emit:
        _write(args.emit, dumps(deflator_to_record(res.deflator)))
    rep.status = 0 if ok else 1


def cmd_gsm(args, inst: Instance, rep: RunReport) -> None:
    if not inst.raw:
        raise InputError("instance has no raw processes")
    names = list(inst.raw) if args.all else [args.process or next(iter(inst.raw))]
    for name in names:
        if name not in inst.raw:
            raise InputError(f"unknown raw process {name!r}")
        c = compare_projection(inst.tree, inst.raw[name])
        rep.verdicts[name] = {"gsm": c.gsm, "projection_supermartingale": c.projection_supermartingale}
        rep.values[name] = {
            "projection": _values(c.projection),
            "table": [{"s": r.s, "t": r.t, "atom": r.atom, "E[Z_t/Z_s; A]": fmt(r.lhs),
                       "P(A)": fmt(r.rhs), "ok": r.holds} for r in c.gsm_verdict.table]}
        if c.gsm_verdict.witness is not None:
            w = c.gsm_verdict.witness
            rep.witnesses[name] = {"s": w.s, "t": w.t, "atom": w.atom}
        if not c.gsm:
            rep.status = 1


def cmd_verify_theorems(args, inst: Instance | None, rep: RunReport) -> None:
    targets = [inst] if inst is not None else [gallery_instance(n) for n in DEFAULT_GALLERY]
    all_ok = True
    for it in targets:
        r = check_theorem_equivalences(it.gens)
        rep.verdicts[it.name] = {"(1)": r.statements["1"].holds, "(2)": r.statements["2"].holds,
                                 "(3)": r.statements["3"].holds, "(4)": r.statements["4"].holds,
                                 "absorbing": r.absorbing, "consistent": r.consistent}
        rep.witnesses[it.name] = {k: s.witness for k, s in r.statements.items()}
        all_ok &= r.consistent
    if args.fuzz:
        f = fuzz(args.fuzz, args.seed, args.out)
        rep.values["fuzz"] = {"instances": f.instances, "absorbing": f.absorbing,
                              "trips": len(f.trips),
                              "combinations": {",".join("TF"[not b] for b in k): v
                                               for k, v in sorted(f.combinations.items())}}
        all_ok &= f.ok
    rep.status = 0 if all_ok else 1


def cmd_gallery(args, rep: RunReport) -> None:
    if not args.name:
        rep.values["available"] = list(GALLERY_NAMES)
        return
    inst = resolve_instance("gallery:" + args.name)
    rep.instance, rep.digest = inst.name, digest(inst)
    rec = instance_to_record(inst)
    if args.emit:
        _write(args.emit, dumps(rec))
    else:
        rep.values["instance"] = rec


COMMANDS = {
    "classify": cmd_classify, "check-nupbr": cmd_check_nupbr, "check-dsv": cmd_check_dsv,
    "synth-deflator": cmd_synth, "verify-smd": cmd_verify_smd,
    "closure-sample": cmd_closure_sample, "pasting-pipeline": cmd_pipeline, "gsm-check": cmd_gsm,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forkconvex", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "machine"), default="human")
    common.add_argument("--timings", action="store_true", help="include wall-clock timings")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help, instance=True):
        sp = sub.add_parser(name, help=help, parents=[common])
        if instance:
            sp.add_argument("instance", help="instance JSON path or gallery:NAME")
        return sp

    add("classify", "SP / SPD / SPP classification and cemetery times")
    add("check-nupbr", "exact NUPBR_loc verdict with per-node sup")
    add("check-dsv", "dynamic share viability for the dominating process")
    sp = add("synth-deflator", "exact LP synthesis of a supermartingale deflator")
    sp.add_argument("--mode", choices=("nupbr", "dsv"), default="nupbr")
    sp.add_argument("--emit-lp", metavar="PATH", help="write the LP as text ('-' for stdout)")
    sp.add_argument("--emit", metavar="PATH", help="write the deflator file")
    sp = add("verify-smd", "verify a deflator file against the instance")
    sp.add_argument("--deflator", required=True, metavar="PATH")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp = add("closure-sample", "seeded closure elements with their recipes")
    sp.add_argument("--depth", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=16)
    sp.add_argument("--emit", metavar="PATH", help="write recipes and values ('-' for stdout)")
    sp = add("pasting-pipeline", "ladder-localised deflator construction")
    sp.add_argument("--emit", metavar="PATH", help="write the deflator file")
    sp = add("gsm-check", "generalised supermartingale check of a raw process")
    sp.add_argument("--process", help="raw process name (default: the first one)")
    sp.add_argument("--all", action="store_true", help="check every raw process")
    sp = add("verify-theorems", "equivalence matrix on the gallery or one instance", instance=False)
    sp.add_argument("instance", nargs="?", help="instance JSON path or gallery:NAME")
    sp.add_argument("--fuzz", type=int, default=0, metavar="N")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", metavar="DIR", help="directory for counterexample files")
    sp = add("gallery", "list gallery instances or dump one", instance=False)
    sp.add_argument("name", nargs="?")
    sp.add_argument("--emit", metavar="PATH")
    return p


def run(argv=None) -> tuple[RunReport, int]:
    parser = build_parser()
    args = parser.parse_args(argv)
    rep = RunReport(args.command)
    start = time.perf_counter()
    try:
        if args.command == "gallery":
            cmd_gallery(args, rep)
        else:
            inst = resolve_instance(args.instance) if args.instance else None
            if inst is not None:
                rep.instance, rep.digest = inst.name, digest(inst)
            if args.command == "verify-theorems":
                cmd_verify_theorems(args, inst, rep)
            else:
                COMMANDS[args.command](args, inst, rep)
    except InputError as exc:
        rep.status = 2
        rep.witnesses["error"] = str(exc)
    if args.timings:
        rep.timings["seconds"] = f"{time.perf_counter() - start:.3f}"
    text = dumps(rep.to_record()) if args.format == "machine" else rep.render_human()
    stream = sys.stderr if rep.status == 2 and args.format == "human" else sys.stdout
    print(text, file=stream)
    return rep, rep.status


def main(argv=None) -> int:
    try:
        _, status = run(argv)
    except SystemExit as exc:  # argparse usage errors
        return 2 if exc.code not in (0, None) else 0
    return status


if __name__ == "__main__":
    sys.exit(main())

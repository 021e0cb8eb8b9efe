"""Command-line front end for the simulated cluster.

Exit codes: 0 ok, 2 usage, 3 field, 4 code construction / indexing,
5 cluster or repair, 6 integrity, 7 MDS check failed, 8 linear algebra.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from . import alignment, cluster
from .codes import verify_mds
from .errors import CodingError

EXIT_MDS_FAILED = 7


def _node_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated node numbers, got {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdsrepair", description="MDS erasure coding with optimal-bandwidth repair")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="ingest a file into n chunk files")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--q", type=int, default=257)
    e.add_argument("--construction", default="explicit2", choices=["random", "explicit2", "explicit3", "tensor"])
    e.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("fail", help="mark a node as failed")
    f.add_argument("--dir", required=True)
    f.add_argument("--node", type=int, required=True)

    r = sub.add_parser("repair", help="rebuild a failed node")
    r.add_argument("--dir", required=True)
    r.add_argument("--node", type=int, required=True)
    r.add_argument("--report", choices=["json", "text"], default="text")

    d = sub.add_parser("decode", help="reconstruct the original file")
    d.add_argument("--dir", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--nodes", type=_node_list, default=None)

    v = sub.add_parser("verify-mds", help="check every k-subset of the cluster's code")
    v.add_argument("--dir", required=True)

    a = sub.add_parser("align-demo", help="print a verified alignment instance")
    a.add_argument("--N", type=int, default=3)
    a.add_argument("--q", type=int, default=7)
    a.add_argument("--preset", default="permutation", choices=["eigen", *alignment.PRESETS])
    a.add_argument("--seed", type=int, default=0)
    return p


def _text_report(node: int, m) -> str:
    lines = [
        f"repaired node {node} over {m.stripes} stripes",
        f"downloaded {m.total_downloaded} symbols ({m.downloaded_units:.4g} node units per stripe)",
        f"read {m.total_accessed} symbol cells from disk",
        f"cut-set optimum {m.optimum_symbols}, trivial repair {m.trivial_symbols}",
        f"optimal: {'yes' if m.optimal else 'no'}",
    ]
    for j in sorted(m.downloaded):
        lines.append(f"  node {j}: sent {m.downloaded[j]}, read {m.accessed.get(j, 0)}")
    return "\n".join(lines)


def _print_instance(inst) -> None:
    print(f"N={inst.N} L={inst.L} q={inst.q} verified={alignment.verify_instance(inst)}")
    for i, (H, V) in enumerate(zip(inst.H, inst.V), start=1):
        print(f"H{i} =")
        for row in H.tolist():
            print("  " + " ".join(f"{v:>3}" for v in row))
        print(f"V{i} =")
        for row in V.tolist():
            print("  " + " ".join(f"{v:>3}" for v in row))


def run(args: argparse.Namespace) -> int:
    if args.command == "encode":
        c = cluster.ingest(args.inp, args.n, args.k, args.q, args.construction, args.seed, args.out)
        m = c.manifest
        print(f"wrote {m.n} chunks, {m.stripe_count} stripes of {m.k}x{m.L} symbols, {m.file_length} bytes")
    elif args.command == "fail":
        c = cluster.fail(cluster.open_cluster(args.dir), args.node)
        print(f"node {args.node} failed; down: {sorted(c.failed)}")
    elif args.command == "repair":
        metrics = cluster.repair_node(cluster.open_cluster(args.dir), args.node)
        if args.report == "json":
            print(json.dumps({"node": args.node, **metrics.as_dict()}, indent=2))
        else:
            print(_text_report(args.node, metrics))
    elif args.command == "decode":
        out = cluster.reconstruct(cluster.open_cluster(args.dir), args.out, args.nodes)
        print(f"wrote {out}")
    elif args.command == "verify-mds":
        c = cluster.open_cluster(args.dir)
        report = verify_mds(c.code)
        print(f"({c.n}, {c.k}) over F_{c.code.q}: {report.subsets_checked} subsets checked, "
              f"{'MDS' if report.verified else 'NOT MDS, fails on ' + str(report.failing_subset)}")
        if not report.verified:
            return EXIT_MDS_FAILED
    elif args.command == "align-demo":
        if args.preset == "eigen":
            if args.N != 2:
                print("error: the eigen preset builds the N = 2, L = 2 instance only", file=sys.stderr)
                return 2
            inst = alignment.solve_problem1(args.q, args.seed)
        else:
            inst = alignment.solve_problem2(args.N, args.q, args.preset, args.seed)
        _print_instance(inst)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except CodingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

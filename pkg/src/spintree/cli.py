"""
Command-line front end.

    spintree build        network JSON for a tree, modified tree or concatenation
    spintree simulate     run a protocol and report its fidelity
    spintree sweep        resonance sweep over n as CSV
    spintree linktime     singlet-link transfer time of a concatenated network
    spintree oracle-check compare sector and full-space evolution

Exit codes: 0 ok, 2 usage/config error, 3 runtime/model error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .analytic import resonance_omega
from .dynamics import (
    ExcitationState,
    OracleSizeError,
    SectorLeakError,
    evolve,
    full_space_evolve,
    sector_hamiltonian,
)
from .network import (
    NetworkSpec,
    Wiring,
    attach_sender_aux,
    build_binary_tree,
    build_bt2_aux,
    build_modified_bt2,
    concatenate_trees,
    link_ports,
    parse_label,
)
from .protocol import (
    NoPerfectTransferError,
    bt2_protocol,
    concatenated_protocol,
    link_transfer,
    oracle_check_protocol,
    port_singlet,
    run_protocol,
    steps_from_list,
    steps_to_list,
)
from .sweep import SWEEP_COLUMNS, fit_decay_exponent, resonance_sweep

ORACLE_TOL = 1e-9
CLAIMED_GAMMA = 1.0


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x}")
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    def cell(v: Any) -> str:
        if v is None:
            return ""
        if isinstance(v, float):
            return fmt_float(v)
        return str(v)

    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(cell(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# Config resolution
# --------------------------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _one_of(section: Mapping, inline_key: str, name: str) -> bool:
    """True for a builder directive, False for an inline document."""
    has_builder = "builder" in section
    has_inline = inline_key in section
    if has_builder == has_inline:
        raise ConfigError(f"{name} section needs exactly one of 'builder' or inline '{inline_key}'")
    return has_builder


def _wirings(raw) -> list[Wiring]:
    try:
        return [Wiring(int(s), int(b), int(d)) for s, b, d in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"wirings must be [src, leaf, dst] triples: {exc}") from exc


def build_network(section: Mapping) -> NetworkSpec:
    if not isinstance(section, Mapping):
        raise ConfigError("network section must be an object")
    if not _one_of(section, "nodes", "network"):
        return NetworkSpec.from_dict(section)
    kind = section["builder"]
    j0 = float(section.get("j0", 1.0))
    omega = float(section.get("omega", resonance_omega(math.sqrt(2.0) * j0)))
    if kind == "bt2+aux":
        return build_bt2_aux(j0, omega)
    if kind == "tree":
        net = build_binary_tree(int(section.get("order", 2)), j0, omega)
        return attach_sender_aux(net, j0, omega) if section.get("with_aux") else net
    if kind == "modified-bt2":
        return build_modified_bt2(j0, omega)
    if kind == "concatenated":
        return concatenate_trees(_wirings(section.get("wirings", [[0, 1, 1]])), j0, omega, section.get("link_j"))
    raise ConfigError(f"unknown network builder {kind!r}")


def _protocol_directive(cfg: Mapping) -> Mapping | None:
    if "protocol" in cfg:
        return cfg["protocol"]
    net = cfg.get("network", {})
    # protocol parameters may ride along on the network directive
    kind = net.get("builder") if isinstance(net, Mapping) else None
    if kind == "bt2+aux":
        return {"builder": "bt2", "n": net.get("n", 8), "leaf": net.get("leaf", 1)}
    if kind == "concatenated":
        return {
            "builder": "concatenated",
            "n": net.get("n", 8),
            "route": net.get("route", [[0, 1], [1, 1]]),
            "trap_final": net.get("trap_final", False),
        }
    return None


def resolve_run(cfg: Mapping):
    if "network" not in cfg:
        raise ConfigError("config needs a 'network' section")
    net = build_network(cfg["network"])
    section = _protocol_directive(cfg)
    if section is None:
        raise ConfigError("config needs a 'protocol' section")
    if not isinstance(section, Mapping):
        raise ConfigError("protocol section must be an object")
    if not _one_of(section, "steps", "protocol"):
        try:
            steps = steps_from_list(section["steps"])
            initial = ExcitationState.from_dict(net.nodes, section["initial"])
            target = ExcitationState.from_dict(net.nodes, section["target"])
        except KeyError as exc:
            raise ConfigError(f"inline protocol is missing {exc}") from exc
        return net, initial, steps, target
    kind = section["builder"]
    n = section.get("n", 8)
    if kind == "bt2":
        if "(0,0)" not in net or "(0,1)" not in net:
            raise ConfigError("bt2 protocol needs an order-2 tree with sender aux")
        j0 = net.coupling("(0,0)", "(0,1)")
        p = bt2_protocol(int(section.get("leaf", 1)), int(n), j0)
        if p.network.nodes != net.nodes:
            raise ConfigError("bt2 protocol needs an order-2 tree with sender aux")
        return net, p.initial, p.steps, p.target
    if kind == "concatenated":
        route = [(int(t), int(b)) for t, b in section.get("route", [[0, 1], [1, 1]])]
        n_arg = int(n) if isinstance(n, (int, float)) else [int(x) for x in n]
        initial, steps, target = concatenated_protocol(net, route, n_arg, bool(section.get("trap_final", False)))
        return net, initial, steps, target
    raise ConfigError(f"unknown protocol builder {kind!r}")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _parse_wire(text: str) -> Wiring:
    try:
        s, b, d = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected SRC:LEAF:DST, got {text!r}") from None
    return Wiring(s, b, d)


def cmd_build(args: argparse.Namespace) -> int:
    j0 = args.j0
    omega = args.omega if args.omega is not None else resonance_omega(math.sqrt(2.0) * j0)
    if args.wire:
        net = concatenate_trees(args.wire, j0, omega, args.link_j)
    elif args.modified_bt2:
        net = build_modified_bt2(j0, omega)
    elif args.tree is not None:
        net = build_binary_tree(args.tree, j0, omega)
        if args.with_aux:
            net = attach_sender_aux(net, j0, omega)
    else:
        raise ConfigError("choose one of --tree, --modified-bt2 or --wire")
    _emit(dumps(net.to_dict()) + "\n", args.out)
    return 0


def _route_wirings(route: Sequence[tuple[int, int]]) -> list[Wiring]:
    return [Wiring(t, b, nxt) for (t, b), (nxt, _) in zip(route, route[1:])]


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if args.config is None:
        if args.route:
            cfg = {
                "network": {
                    "builder": "concatenated",
                    "j0": args.j0,
                    "wirings": [list(w) for w in (args.wire or _route_wirings(args.route))],
                },
                "protocol": {"builder": "concatenated", "route": args.route, "n": args.n},
            }
        else:
            cfg = {"network": {"builder": "bt2+aux", "j0": args.j0, "n": args.n, "leaf": args.leaf}}
    net, initial, steps, target = resolve_run(cfg)
    report = run_protocol(net, initial, steps, target)
    doc = {"nodes": len(net), "steps": steps_to_list(steps)}
    doc.update(report.to_dict())
    if args.oracle:
        dev, leak = oracle_check_protocol(net, initial, steps)
        doc["oracle"] = {"max_deviation": dev, "max_leak": leak, "tolerance": ORACLE_TOL}
        if dev > ORACLE_TOL:
            _emit(dumps(doc) + "\n", args.out)
            print(f"error: oracle deviation {dev:.3e} exceeds {ORACLE_TOL:g}", file=sys.stderr)
            return 3

    output = cfg.get("output", {}) if isinstance(cfg.get("output", {}), Mapping) else {}
    fmt = args.format or output.get("format", "json")
    out = args.out or output.get("path")
    if fmt == "csv":
        header = ["fidelity", "infidelity", "amplitude_re", "amplitude_im", "elapsed_model_time", "min_step_norm", "max_step_norm"]
        norms = report.per_step_norms or [initial.norm()]
        row = [report.fidelity, 1.0 - report.fidelity, report.amplitude.real, report.amplitude.imag,
               report.elapsed_model_time, min(norms), max(norms)]
        _emit(_csv(header, [row]), out)
    elif fmt == "json":
        _emit(dumps(doc) + "\n", out)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.max_n < 0:
        raise ConfigError("--max-n must be >= 0")
    rows = resonance_sweep(args.max_n, args.numeric_cap, args.j0)
    _emit(_csv(SWEEP_COLUMNS, [r.as_tuple() for r in rows]), args.out)
    summary = {"max_n": args.max_n, "claimed_gamma": CLAIMED_GAMMA}
    for key, col in (("gamma_analytic", "infidelity"), ("gamma_exact", "exact_infidelity")):
        try:
            summary[key] = fit_decay_exponent([getattr(r, col) for r in rows])
        except ValueError:
            summary[key] = None
    print("sweep summary: " + json.dumps(summary), file=sys.stderr)
    return 0


def _default_link_network(j0: float) -> NetworkSpec:
    return concatenate_trees([Wiring(0, 1, 1)], j0, resonance_omega(math.sqrt(2.0) * j0))


def cmd_linktime(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    net = build_network(cfg["network"]) if "network" in cfg else _default_link_network(args.j0)
    links = [n for n in net.nodes if _is_link(n)]
    link = args.link or cfg.get("link") or (links[0] if links else None)
    if link is None or link not in net:
        raise ConfigError("network has no singlet link")
    (o_site, o_aux), (i_site, i_aux) = link_ports(net, link)
    res = link_transfer(net, port_singlet(net.nodes, o_site, o_aux), port_singlet(net.nodes, i_site, i_aux))
    doc = {
        "link": link,
        "out_port": [o_site, o_aux],
        "in_port": [i_site, i_aux],
        "time": res.time,
        "amplitude_modulus": abs(res.amplitude),
    }
    _emit(dumps(doc) + "\n", args.out)
    return 0


def _is_link(label: str) -> bool:
    try:
        return parse_label(label).is_link
    except ValueError:
        return False


def _random_state(nodes: Sequence[str], rng: np.random.Generator) -> ExcitationState:
    v = rng.normal(size=len(nodes) + 1) + 1j * rng.normal(size=len(nodes) + 1)
    v /= np.linalg.norm(v)
    return ExcitationState(tuple(nodes), v[0], v[1:])


def oracle_compare(net: NetworkSpec, samples: int, seed: int, t_max: float = 20.0) -> dict:
    """Sector vs full-space evolution on ``samples`` random (state, t) pairs."""
    rng = np.random.default_rng(seed)
    h = sector_hamiltonian(net)
    dev = leak = 0.0
    for _ in range(samples):
        state = _random_state(net.nodes, rng)
        t = float(rng.uniform(-t_max, t_max))
        fast = evolve(h, state, t)
        ref, lk = full_space_evolve(net, state, t)
        dev = max(dev, abs(ref.vacuum - fast.vacuum), float(np.abs(ref.amps - fast.amps).max()))
        leak = max(leak, lk)
    return {"nodes": len(net), "samples": samples, "seed": seed, "max_deviation": dev,
            "max_leak": leak, "tolerance": ORACLE_TOL, "ok": dev <= ORACLE_TOL}


def cmd_oracle_check(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if "network" in cfg:
        net = build_network(cfg["network"])
    else:
        net = build_bt2_aux(args.j0, resonance_omega(math.sqrt(2.0) * args.j0))
    doc = oracle_compare(net, args.samples, args.seed)
    _emit(dumps(doc) + "\n", args.out)
    return 0 if doc["ok"] else 3


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _route_stage(text: str) -> tuple[int, int]:
    try:
        t, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TREE:LEAF, got {text!r}") from None
    return t, b


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spintree", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--j0", type=float, default=1.0, help="tree coupling (default 1)")
        p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("build", help="emit a network as JSON")
    common(p)
    p.add_argument("--tree", type=int, help="binary tree of this order")
    p.add_argument("--with-aux", action="store_true", help="attach the sender auxiliary")
    p.add_argument("--modified-bt2", action="store_true", help="order-2 tree with leaf auxiliaries")
    p.add_argument("--wire", type=_parse_wire, action="append", metavar="SRC:LEAF:DST",
                   help="concatenate modified trees; repeatable")
    p.add_argument("--link-j", type=float, help="singlet-link coupling (default j0)")
    p.add_argument("--omega", type=float, help="uniform local field (default: resonance value)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("simulate", help="run a protocol and report its fidelity")
    common(p)
    p.add_argument("config", nargs="?", help="run config JSON")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--leaf", type=int, default=1)
    p.add_argument("--route", type=_route_stage, action="append", metavar="TREE:LEAF",
                   help="concatenated route stage; repeatable")
    p.add_argument("--wire", type=_parse_wire, action="append", metavar="SRC:LEAF:DST")
    p.add_argument("--oracle", action="store_true", help="cross-check every evolution in the full space")
    p.add_argument("--format", choices=("json", "csv"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="resonance sweep as CSV")
    common(p)
    p.add_argument("--max-n", type=int, required=True)
    p.add_argument("--numeric-cap", type=int, default=200,
                   help="simulate the protocol for n up to this value (default 200)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("linktime", help="singlet-to-singlet transfer time across a link")
    common(p)
    p.add_argument("config", nargs="?")
    p.add_argument("--link", help="link spin label (default: first link)")
    p.set_defaults(func=cmd_linktime)

    p = sub.add_parser("oracle-check", help="sector vs full-space evolution")
    common(p)
    p.add_argument("config", nargs="?")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SectorLeakError, NoPerfectTransferError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError, OracleSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

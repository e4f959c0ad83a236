"""Command-line workflows: system ingestion, built-in systems, reports.

System documents are JSON with explicit per-subsystem dimensions and
1-based block keys; see ``parse_system``.  All analysis commands write
deterministic output: identical inputs and seeds give byte-identical CSV
files, including under parallel sweeps.

Exit codes: 0 analysis completed (resilient over the checked set),
2 destabilizing witness or negative verdict found, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sysmod
from typing import Sequence

import numpy as np

from .certify import Assumption1Result, SdpSettings, SdpSolverError, assumption1_check, solve_g
from .model import AttackStrategy, BlockSystem, BlockShapeError, closed_loop, validate
from .pathfollow import (
    NoZeroCrossingError,
    PathFollowError,
    PathSettings,
    PathTrace,
    k_attack_from_ranking,
    path_follow,
    rank_channels,
)
from .resilience import (
    NominalUnstableError,
    channels,
    enumerate_attacks,
    exhaustive_verdict,
    resilience_index,
    sweep_attacks,
    worst_attack,
)
from .spectra import spectral_abscissa

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WITNESS = 2


class SystemDocumentError(ValueError):
    """A system document is syntactically or semantically malformed."""


# ---------------------------------------------------------------------------
# Document format


def parse_system(text: str) -> BlockSystem:
    """Parse a JSON system document into a validated BlockSystem.

    Expected shape::

        {
          "name": "example",
          "subsystems": [{"n": 2, "m": 2}, ...],
          "A_blocks": {"1,1": [[...], ...], ...},
          "B_blocks": {"1": [[...], ...], ...},
          "K_blocks": {"2,3": [[...], ...], ...}
        }

    Block keys are 1-based.  Off-diagonal A blocks and any K blocks may be
    omitted and default to zero; diagonal A blocks are required, as are B
    blocks for subsystems with m > 0.

    Raises
    ------
    SystemDocumentError
        With line/column for syntax errors, or naming the malformed block.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemDocumentError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise SystemDocumentError("document root must be an object")
    subs = doc.get("subsystems")
    if not isinstance(subs, list) or not subs:
        raise SystemDocumentError("'subsystems' must be a nonempty list")
    try:
        state_dims = tuple(int(s["n"]) for s in subs)
        input_dims = tuple(int(s["m"]) for s in subs)
    except (KeyError, TypeError) as exc:
        raise SystemDocumentError("each subsystem needs integer fields 'n' and 'm'") from exc
    n_sub = len(subs)

    def block_key(i: int, j: int) -> str:
        return f"{i + 1},{j + 1}"

    def fetch(table: dict, key: str, rows: int, cols: int, label: str, required: bool):
        if key not in table:
            if required:
                raise SystemDocumentError(f"missing required block {label}")
            return np.zeros((rows, cols))
        try:
            arr = np.array(table[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise SystemDocumentError(f"block {label} is not a numeric array") from exc
        if rows * cols == 0 and arr.size == 0:
            return arr.reshape(rows, cols)
        if arr.shape != (rows, cols):
            raise SystemDocumentError(
                f"block {label} expected shape {(rows, cols)}, got {arr.shape}")
        return arr

    a_table = doc.get("A_blocks", {}) or {}
    b_table = doc.get("B_blocks", {}) or {}
    k_table = doc.get("K_blocks", {}) or {}

    a_blocks = [
        [fetch(a_table, block_key(i, j), state_dims[i], state_dims[j],
               f"A[{i + 1},{j + 1}]", required=(i == j))
         for j in range(n_sub)]
        for i in range(n_sub)
    ]
    b_blocks = [
        fetch(b_table, str(i + 1), state_dims[i], input_dims[i],
              f"B_{i + 1}", required=(input_dims[i] > 0))
        for i in range(n_sub)
    ]
    k_blocks = [
        [fetch(k_table, block_key(i, j), input_dims[i], state_dims[j],
               f"K[{i + 1},{j + 1}]", required=False)
         for j in range(n_sub)]
        for i in range(n_sub)
    ]
    built = BlockSystem.from_blocks(state_dims, input_dims, a_blocks, b_blocks, k_blocks)
    try:
        validate(built)
    except BlockShapeError as exc:
        raise SystemDocumentError(str(exc)) from exc
    return built


def serialize_system(sys: BlockSystem, name: str = "") -> str:
    """Render a BlockSystem as a document that reparses bit-identically."""
    doc = {
        "name": name,
        "subsystems": [
            {"n": int(n), "m": int(m)}
            for n, m in zip(sys.state_dims, sys.input_dims)
        ],
        "A_blocks": {
            f"{i + 1},{j + 1}": sys.a_blocks[i][j].tolist()
            for i in range(sys.n_subsystems) for j in range(sys.n_subsystems)
        },
        "B_blocks": {
            str(i + 1): sys.b_blocks[i].tolist() for i in range(sys.n_subsystems)
        },
        "K_blocks": {
            f"{i + 1},{j + 1}": sys.k_blocks[i][j].tolist()
            for i in range(sys.n_subsystems) for j in range(sys.n_subsystems)
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Built-in systems


def _motivating() -> BlockSystem:
    e1 = np.array([[-3.0, -1.0], [12.0, 2.0]])
    e2 = np.array([[-3.0, 1.0], [-12.0, 2.0]])
    zero = np.zeros((2, 2))
    eye = np.eye(2)
    # The gain relations pin A so that the nominal closed loop is
    # [E1 E2 -E1; E1 E2 -2E1; -E1 E2 2E1] and the fully decentralized one
    # is blockdiag(E1, E2, 2E1).
    a_blocks = [[0.5 * e1, zero, zero], [zero, 0.5 * e2, zero], [zero, zero, e1]]
    b_blocks = [eye, eye, eye]
    k_blocks = [
        [0.5 * e1, e2, -e1],
        [e1, 0.5 * e2, -2.0 * e1],
        [-e1, e2, e1],
    ]
    return BlockSystem.from_blocks((2, 2, 2), (2, 2, 2), a_blocks, b_blocks, k_blocks)


def _random_system(seed: int, n_sub: int) -> BlockSystem:
    rng = np.random.default_rng(seed)
    state_dims = tuple(int(d) for d in rng.integers(1, 4, size=n_sub))
    input_dims = tuple(int(d) for d in rng.integers(1, 3, size=n_sub))
    a_blocks = [[rng.normal(scale=0.5, size=(state_dims[i], state_dims[j]))
                 for j in range(n_sub)] for i in range(n_sub)]
    b_blocks = [rng.normal(scale=1.0, size=(state_dims[i], input_dims[i]))
                for i in range(n_sub)]
    k_blocks = [[rng.normal(scale=0.4, size=(input_dims[i], state_dims[j]))
                 for j in range(n_sub)] for i in range(n_sub)]
    sys0 = BlockSystem.from_blocks(state_dims, input_dims, a_blocks, b_blocks, k_blocks)
    sigma = spectral_abscissa(closed_loop(sys0, AttackStrategy.all_ones(n_sub)))
    shift = sigma + 0.1
    a_shifted = [
        [a_blocks[i][j] - (shift * np.eye(state_dims[i]) if i == j else 0.0)
         for j in range(n_sub)]
        for i in range(n_sub)
    ]
    return BlockSystem.from_blocks(state_dims, input_dims, a_shifted, b_blocks, k_blocks)


def builtin(name: str) -> BlockSystem:
    """Built-in systems: ``motivating`` or ``random:<seed>:<N>``.

    ``motivating`` is the three-bus demonstration system whose nominal and
    fully decentralized closed loops are both stable yet a single channel
    loss destabilizes it.  ``random:<seed>:<N>`` is a seeded N-subsystem
    system whose nominal closed loop is shifted to a spectral abscissa of
    exactly -0.1; calls with the same name are bit-identical.
    """
    if name == "motivating":
        return _motivating()
    if name.startswith("random:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected random:<seed>:<N>, got {name!r}")
        try:
            seed, n_sub = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ValueError(f"expected integer seed and size in {name!r}") from exc
        if n_sub < 1:
            raise ValueError("random system needs at least one subsystem")
        return _random_system(seed, n_sub)
    raise ValueError(f"unknown built-in system {name!r}")


def load_system(path: str) -> BlockSystem:
    """Load from a document file, or resolve a built-in name."""
    if path == "motivating" or path.startswith("random:"):
        return builtin(path)
    with open(path, "r", encoding="utf-8") as handle:
        return parse_system(handle.read())


# ---------------------------------------------------------------------------
# Attack syntax and CSV schemas


def parse_attack_spec(spec: str, n_sub: int) -> AttackStrategy:
    """Parse "i<-j[,i<-j...]" (attack the channel from j into i)."""
    pairs = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if "<-" not in token:
            raise ValueError(f"bad channel token {token!r}, expected 'i<-j'")
        dst_text, src_text = token.split("<-", 1)
        try:
            dst, src = int(dst_text), int(src_text)
        except ValueError as exc:
            raise ValueError(f"bad channel token {token!r}") from exc
        if not (1 <= dst <= n_sub and 1 <= src <= n_sub) or dst == src:
            raise ValueError(f"channel {token!r} out of range for N = {n_sub}")
        pairs.append((dst, src))
    if not pairs:
        raise ValueError("empty attack specification")
    return AttackStrategy.attacking(n_sub, pairs)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _channels_label(strategy: AttackStrategy) -> str:
    return ";".join(f"{dst}<-{src}" for dst, src in strategy.attacked_channels)


def write_attacks_csv(path: str, rows) -> None:
    """Rows: (k, strategy, spec_abscissa, g_value, destabilizing, index)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", "channels", "spec_abscissa", "g_value", "destabilizing", "index"])
        for k, strategy, sigma, g_value, destab, index in rows:
            writer.writerow([
                _fmt(k), _channels_label(strategy), _fmt(sigma),
                _fmt(g_value), _fmt(destab), _fmt(index),
            ])


def write_trace_csv(path: str, trace: PathTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = ["iter", "gamma", "grad_norm"] + [f"alpha_{ch}" for ch in trace.channels]
        writer.writerow(header)
        for k, it in enumerate(trace.iterates):
            row = [str(k), _fmt(it.gamma), _fmt(it.grad_norm)]
            row += [_fmt(float(it.alpha.alpha[ch.dst - 1, ch.src - 1]))
                    for ch in trace.channels]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_check(args) -> int:
    system = load_system(args.file)
    chans = channels(system)
    if args.full:
        if len(chans) > 20:
            print(f"error: --full needs <= 20 channels, system has {len(chans)}")
            return EXIT_ERROR
        k_max = len(chans)
    else:
        k_max = args.max_k if args.max_k is not None else 1
        k_max = min(k_max, len(chans))
    if args.out:
        # Full sweep so the CSV covers every checked strategy.
        rows = []
        witness = None
        for k in range(k_max + 1):
            for report in sweep_attacks(system, k, jobs=args.jobs):
                rows.append((k, report.strategy, report.spec_abscissa,
                             None, report.destabilizing, None))
                if witness is None and report.destabilizing:
                    witness = report
        write_attacks_csv(args.out, rows)
        n_checked = len(rows)
    else:
        verdict = exhaustive_verdict(system, k_max, jobs=args.jobs)
        witness = verdict.witness
        n_checked = verdict.n_checked
    if witness is None:
        print(f"resilient over all {n_checked} strategies with <= {k_max} "
              f"attacked channels")
        return EXIT_OK
    label = _channels_label(witness.strategy) or "(nominal)"
    print(f"destabilizing witness: channels [{label}] "
          f"spectral abscissa {witness.spec_abscissa:.6g} "
          f"({n_checked} strategies checked)")
    return EXIT_WITNESS


def _cmd_worst(args) -> int:
    system = load_system(args.file)
    report = worst_attack(system, args.k, jobs=args.jobs)
    label = _channels_label(report.strategy) or "(nominal)"
    print(f"worst {args.k}-channel attack: [{label}] "
          f"spectral abscissa {report.spec_abscissa:.6g} "
          f"destabilizing={str(report.destabilizing).lower()}")
    if args.out:
        write_attacks_csv(args.out, [(args.k, report.strategy, report.spec_abscissa,
                                      None, report.destabilizing, None)])
    return EXIT_WITNESS if report.destabilizing else EXIT_OK


def _cmd_index(args) -> int:
    system = load_system(args.file)
    settings = SdpSettings(lambda_p=args.lambda_p)
    rows = []
    worst_hit = False
    if args.attack:
        strategy = parse_attack_spec(args.attack, system.n_subsystems)
        value = resilience_index(system, strategy, settings)
        sigma = spectral_abscissa(closed_loop(system, strategy))
        g_value = solve_g(system, strategy, settings).t_star
        k = len(strategy.attacked_channels)
        rows.append((k, strategy, sigma, g_value, sigma >= -1e-9, value))
        print(f"index [{_channels_label(strategy)}] = {value:.6g}")
        worst_hit = value == 0.0
    else:
        if args.all_k < 1:
            print("error: --all-k must be at least 1", file=_sysmod.stderr)
            return EXIT_ERROR
        for k in range(1, args.all_k + 1):
            for strategy in enumerate_attacks(system, k):
                value = resilience_index(system, strategy, settings)
                sigma = spectral_abscissa(closed_loop(system, strategy))
                g_value = solve_g(system, strategy, settings).t_star
                rows.append((k, strategy, sigma, g_value, sigma >= -1e-9, value))
                worst_hit = worst_hit or value == 0.0
        print(f"computed indices for {len(rows)} strategies "
              f"(k = 1..{args.all_k}); minimum {min(r[5] for r in rows):.6g}")
    if args.out:
        write_attacks_csv(args.out, rows)
    return EXIT_WITNESS if worst_hit else EXIT_OK


def _cmd_path(args) -> int:
    system = load_system(args.file)
    settings = PathSettings(step=args.step, tol=args.tol, max_iter=args.max_iter,
                            sdp=SdpSettings(lambda_p=args.lambda_p))
    trace = path_follow(system, settings, restarts=args.multi_start, seed=args.seed)
    last = trace.iterates[-1]
    print(f"status {trace.terminal_status} after {len(trace.iterates)} iterates; "
          f"terminal objective {last.gamma:.6g}")
    if trace.terminal_status == "hit_zero":
        print(f"objective reached zero at iterate {trace.k_star}: "
              "a destabilizing direction exists in the relaxed strategy set")
    else:
        print("no destabilizing direction found along the ascent path "
              "(this is not a resilience certificate)")
    if args.out:
        write_trace_csv(args.out, trace)
    return EXIT_OK


def _cmd_rank(args) -> int:
    system = load_system(args.file)
    settings = PathSettings(step=args.step, tol=args.tol, max_iter=args.max_iter,
                            sdp=SdpSettings(lambda_p=args.lambda_p))
    trace = path_follow(system, settings, restarts=args.multi_start, seed=args.seed)
    try:
        ranking = rank_channels(trace)
    except NoZeroCrossingError as exc:
        print(f"error: {exc}")
        return EXIT_ERROR
    print("criticality ranking (most critical first):")
    for pos, (ch, value) in enumerate(ranking.entries, start=1):
        print(f"  {pos}. {ch}  availability {value:.6g}")
    exit_code = EXIT_OK
    if args.validate:
        print("replaying ranked k-attacks:")
        rows = []
        any_destab = False
        for k in range(1, min(8, len(ranking)) + 1):
            strategy = k_attack_from_ranking(ranking, k)
            sigma = spectral_abscissa(closed_loop(system, strategy))
            destab = sigma >= -1e-9
            any_destab = any_destab or destab
            rows.append((k, strategy, sigma, None, destab, None))
            print(f"  k={k}: [{_channels_label(strategy)}] abscissa {sigma:+.6g}")
        if args.out:
            write_attacks_csv(args.out, rows)
        if any_destab:
            exit_code = EXIT_WITNESS
    elif args.out:
        write_trace_csv(args.out, trace)
    return exit_code


def _cmd_demo(args) -> int:
    if args.name != "motivating":
        print(f"error: unknown demo {args.name!r}")
        return EXIT_ERROR
    system = builtin("motivating")
    nominal = spectral_abscissa(closed_loop(system, AttackStrategy.all_ones(3)))
    decentral = spectral_abscissa(closed_loop(
        system, AttackStrategy(np.eye(3) + 0.0)))
    print("three-bus demonstration system")
    print(f"  nominal closed loop abscissa:        {nominal:+.4f} (stable)")
    print(f"  fully decentralized abscissa:        {decentral:+.4f} (stable)")
    report = worst_attack(system, 1)
    print(f"  worst single-channel attack:         [{_channels_label(report.strategy)}] "
          f"abscissa {report.spec_abscissa:+.4f}")
    print("  losing one remote channel destabilizes an otherwise stable design.")
    return EXIT_OK


def _cmd_assumption(args) -> int:
    system = load_system(args.file)
    chans = channels(system)
    k_max = min(args.k, len(chans))
    strategies = []
    for k in range(k_max + 1):
        strategies.extend(enumerate_attacks(system, k))
    settings = SdpSettings(lambda_p=args.lambda_p)
    try:
        result: Assumption1Result = assumption1_check(system, strategies, settings)
    except SdpSolverError as exc:
        print(f"error: {exc}")
        return EXIT_ERROR
    if result.holds:
        print(f"joint-certificate check holds over all {len(strategies)} strategies "
              f"with <= {k_max} attacked channels")
        return EXIT_OK
    i, j = result.failing_pair
    label_i = _channels_label(strategies[i]) or "(nominal)"
    label_j = _channels_label(strategies[j]) or "(nominal)"
    print(f"no joint certificate for pair [{label_i}] and [{label_j}]")
    return EXIT_WITNESS


# ---------------------------------------------------------------------------
# Parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(_sysmod.stderr)
        raise SystemExit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridres",
                     description="Resilience analysis of structured controllers "
                                 "under channel-loss attacks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_sdp=True):
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized options")
        p.add_argument("--out", default=None, help="CSV output path")
        if with_sdp:
            p.add_argument("--lambda-p", dest="lambda_p", type=float, default=1.0,
                           help="spectral cap on Lyapunov certificates")

    p_check = sub.add_parser("check", help="sweep attacks up to a channel budget")
    p_check.add_argument("file")
    p_check.add_argument("--max-k", type=int, default=None)
    p_check.add_argument("--full", action="store_true",
                         help="enumerate every subset (needs <= 20 channels)")
    common(p_check)
    p_check.set_defaults(func=_cmd_check)

    p_worst = sub.add_parser("worst", help="worst k-channel attack")
    p_worst.add_argument("file")
    p_worst.add_argument("--k", type=int, required=True)
    common(p_worst)
    p_worst.set_defaults(func=_cmd_worst)

    p_index = sub.add_parser("index", help="resilience index of attacks")
    p_index.add_argument("file")
    group = p_index.add_mutually_exclusive_group(required=True)
    group.add_argument("--attack", help='channel list "i<-j[,i<-j...]"')
    group.add_argument("--all-k", dest="all_k", type=int,
                       help="index every attack with 1..K channels")
    common(p_index)
    p_index.set_defaults(func=_cmd_index)

    def path_args(p):
        p.add_argument("file")
        p.add_argument("--step", type=float, default=0.05)
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=500)
        p.add_argument("--multi-start", dest="multi_start", type=int, default=0)
        common(p)

    p_path = sub.add_parser("path", help="gradient ascent over relaxed strategies")
    path_args(p_path)
    p_path.set_defaults(func=_cmd_path)

    p_rank = sub.add_parser("rank", help="channel criticality ranking")
    path_args(p_rank)
    p_rank.add_argument("--validate", action="store_true",
                        help="replay ranked k-attacks and report abscissas")
    p_rank.set_defaults(func=_cmd_rank)

    p_demo = sub.add_parser("demo", help="run a built-in demonstration")
    p_demo.add_argument("name")
    p_demo.set_defaults(func=_cmd_demo)

    p_assume = sub.add_parser("assumption",
                              help="pairwise joint-certificate check over small attacks")
    p_assume.add_argument("file")
    p_assume.add_argument("--k", type=int, required=True)
    common(p_assume)
    p_assume.set_defaults(func=_cmd_assumption)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SystemDocumentError, BlockShapeError, ValueError,
            NominalUnstableError, SdpSolverError, OSError) as exc:
        print(f"error: {exc}", file=_sysmod.stderr)
        return EXIT_ERROR
    except PathFollowError as exc:
        print(f"error: ascent aborted: {exc}", file=_sysmod.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())

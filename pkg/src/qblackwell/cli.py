"""Command-line surface with stable JSON formats and exit codes.

Exit codes: 0 success (including a feasible garble-check verdict);
3 infeasible (garble-check only); 4 indeterminate / no result;
2 input validation failure; 1 internal error.  Results go to stdout (or
``--out``), logs to stderr; every float is printed with 12 significant
digits.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import blackwell, channels, discrimination, eavesdrop
from .numerics import ValidationError
from .sdp import SdpIndeterminateError

log = logging.getLogger("qblackwell")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_INDETERMINATE = 4


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v) for v in obj]
    return obj


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _emit(payload: dict, out_path):
    payload.setdefault("format", 1)
    text = json.dumps(_round_floats(payload), indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _load_channel(path):
    return channels.channel_from_json(_load_json(path))


def _load_ensemble(path):
    return discrimination.ensemble_from_json(_load_json(path))


# ---------------------------------------------------------------------------
# Command handlers: each returns (payload, exit_code)
# ---------------------------------------------------------------------------

def _cmd_channel(args):
    if args.action == "choi":
        ch = _load_channel(args.channel)
        return channels.state_to_json(channels.choi(ch)), EXIT_OK
    if args.action == "apply":
        ch = _load_channel(args.channel)
        rho = channels.state_from_json(_load_json(args.state))
        if rho.dim == ch.dim:
            out = channels.apply(ch, rho)
        else:
            out = channels.apply_to_subsystem(ch, rho, args.subsystem)
        return channels.state_to_json(out), EXIT_OK
    if args.action == "compose":
        a = _load_channel(args.a)
        b = _load_channel(args.b)
        return channels.channel_to_json(channels.compose(a, b)), EXIT_OK
    raise ValidationError(f"unknown channel action {args.action!r}")


def _cmd_discriminate(args):
    ens = _load_ensemble(args.ensemble)
    if args.channel:
        res = discrimination.discriminate_through_channel(
            ens, _load_channel(args.channel), tol=args.tol, method=args.method
        )
    else:
        res = discrimination.min_error_discriminate(ens, tol=args.tol, method=args.method)
    payload = {
        "p_max": res.p_max,
        "povm": discrimination.povm_to_json(res.povm),
        "dual_trace": float(res.dual.trace().real),
    }
    return payload, EXIT_OK


def _cmd_payoff(args):
    ch = _load_channel(args.channel)
    m = blackwell.hermitian_set_from_json(_load_json(args.operators))
    res = blackwell.payoff_max_choi(ch, m, tol=args.tol)
    return {
        "value": res.value,
        "povm": discrimination.povm_to_json(res.povm),
    }, EXIT_OK


def _cmd_transform(args):
    m = blackwell.hermitian_set_from_json(_load_json(args.operators))
    eps = args.epsilon if args.epsilon == "auto" else float(args.epsilon)
    dims = None
    if args.dims:
        parts = [int(x) for x in args.dims.split(",")]
        if len(parts) != 2:
            raise ValidationError(f"--dims expects 'D,d_anc', got {args.dims!r}")
        dims = tuple(parts)
    res = blackwell.hermitians_to_ensemble(m, epsilon=eps, dims=dims)
    payload = discrimination.ensemble_to_json(res.ensemble)
    payload["lambda_min"] = res.lambda_min
    payload["epsilon_used"] = res.epsilon_used
    return payload, EXIT_OK


def _cmd_garble_check(args):
    a = _load_channel(args.a)
    b = _load_channel(args.b)
    res = blackwell.garble_check(a, b, tol=args.tol)
    payload = blackwell.garble_result_to_json(res)
    code = {
        blackwell.FEASIBLE: EXIT_OK,
        blackwell.INFEASIBLE: EXIT_INFEASIBLE,
        blackwell.INDETERMINATE: EXIT_INDETERMINATE,
    }[res.status]
    return payload, code


def _cmd_compare(args):
    a = _load_channel(args.a)
    b = _load_channel(args.b)
    rep = blackwell.compare(a, b, tol=args.tol, restarts=args.restarts, seed=args.seed)
    code = EXIT_INDETERMINATE if rep.verdict == blackwell.VERDICT_INDETERMINATE else EXIT_OK
    return blackwell.comparison_to_json(rep), code


def _cmd_witness(args):
    a = _load_channel(args.a)
    b = _load_channel(args.b)
    w = blackwell.find_witness(
        a, b, k=args.k, d_anc=args.d_anc, restarts=args.restarts,
        seed=args.seed, tol=args.tol,
    )
    if w is None:
        return {"found": False}, EXIT_OK
    payload = {"found": True}
    payload.update(blackwell.witness_to_json(w))
    return payload, EXIT_OK


def _cmd_eve_demo(args):
    scenario = eavesdrop.scenario_from_json(_load_json(args.scenario), tol=args.tol)
    rep = eavesdrop.simulate(scenario, tol=args.tol)
    return eavesdrop.report_to_json(rep), EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qblackwell",
        description="Quantum Blackwell order: garbling feasibility and "
        "minimum-error discrimination toolkit",
    )
    parser.add_argument("--out", help="write the JSON result to this file")
    parser.add_argument("--tol", type=float, default=1e-7,
                        help="numerical tolerance (default 1e-7)")
    parser.add_argument("-v", "--verbose", action="store_true")
    # The same options are accepted after the command name; values given
    # there win over the top-level ones (SUPPRESS keeps the top-level
    # defaults when the per-command flag is absent).
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p_channel = sub.add_parser("channel", parents=[common],
                               help="Choi matrices, application, composition")
    chsub = p_channel.add_subparsers(dest="action", required=True)
    p_choi = chsub.add_parser("choi", parents=[common])
    p_choi.add_argument("--channel", required=True)
    p_apply = chsub.add_parser("apply", parents=[common])
    p_apply.add_argument("--channel", required=True)
    p_apply.add_argument("--state", required=True)
    p_apply.add_argument("--subsystem", type=int, default=1,
                         help="1-based factor to act on when the state is composite")
    p_compose = chsub.add_parser("compose", parents=[common])
    p_compose.add_argument("--a", required=True, help="outer channel (applied second)")
    p_compose.add_argument("--b", required=True, help="inner channel (applied first)")

    p_disc = sub.add_parser("discriminate", parents=[common], help="minimum-error discrimination")
    p_disc.add_argument("--ensemble", required=True)
    p_disc.add_argument("--channel", help="optional channel on the system factor")
    p_disc.add_argument("--method", choices=("auto", "sdp", "helstrom"), default="auto")

    p_payoff = sub.add_parser("payoff", parents=[common], help="maximum payoff of a Hermitian set")
    p_payoff.add_argument("--channel", required=True)
    p_payoff.add_argument("--operators", required=True)

    p_transform = sub.add_parser("transform", parents=[common], help="Hermitian set -> ensemble")
    p_transform.add_argument("--operators", required=True)
    p_transform.add_argument("--epsilon", default="auto")
    p_transform.add_argument("--dims", help="'D,d_anc' when the split is not square")

    p_garble = sub.add_parser("garble-check", parents=[common], help="does E with a = E o b exist?")
    p_garble.add_argument("--a", required=True)
    p_garble.add_argument("--b", required=True)

    p_compare = sub.add_parser("compare", parents=[common], help="two-sided comparison with witnesses")
    p_compare.add_argument("--a", required=True)
    p_compare.add_argument("--b", required=True)
    p_compare.add_argument("--restarts", type=int, default=8)
    p_compare.add_argument("--seed", type=int, default=0)

    p_witness = sub.add_parser("witness", parents=[common], help="search a distinguishability witness")
    p_witness.add_argument("--a", required=True)
    p_witness.add_argument("--b", required=True)
    p_witness.add_argument("--k", type=int, default=2)
    p_witness.add_argument("--d-anc", type=int, default=None)
    p_witness.add_argument("--restarts", type=int, default=8)
    p_witness.add_argument("--seed", type=int, default=0)

    p_eve = sub.add_parser("eve-demo", parents=[common], help="eavesdropper detection simulation")
    p_eve.add_argument("--scenario", required=True)
    return parser


_HANDLERS = {
    "channel": _cmd_channel,
    "discriminate": _cmd_discriminate,
    "payoff": _cmd_payoff,
    "transform": _cmd_transform,
    "garble-check": _cmd_garble_check,
    "compare": _cmd_compare,
    "witness": _cmd_witness,
    "eve-demo": _cmd_eve_demo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        payload, code = _HANDLERS[args.command](args)
    except ValidationError as exc:
        log.error("invalid input: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SdpIndeterminateError as exc:
        _emit({"error": str(exc), "status": "indeterminate"}, args.out)
        return EXIT_INDETERMINATE
    except eavesdrop.GapNotFoundError as exc:
        _emit({"error": str(exc), "status": "no-gap"}, args.out)
        return EXIT_INDETERMINATE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    _emit(payload, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())

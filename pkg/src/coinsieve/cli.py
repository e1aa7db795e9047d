"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 success, 1 usage error, 2 precondition violation, 3 budget
exhausted (the partial report is still written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys

import sympy

from coinsieve import bounds, expsum, poly_square, sieve_lab
from coinsieve.errors import BudgetExceeded, DomainError
from coinsieve.measure import BiasedBitMeasure, TernaryCoeffDist, is_exact, parse_prob
from coinsieve.reporting import to_csv, to_json

EXIT_USAGE, EXIT_DOMAIN, EXIT_BUDGET = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so main() controls the exit code."""

    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# -- argument parsing helpers ------------------------------------------------


def parse_real(text: str) -> float:
    """Decimal, fraction or a simple radical such as ``1/sqrt3`` or ``2/sqrt(5)``."""
    s = str(text).strip().replace(" ", "")
    if not re.fullmatch(r"[0-9./()+\-*a-z]+", s) or re.search(r"[a-z]", re.sub(r"sqrt", "", s)):
        raise DomainError(f"cannot parse real number {text!r}")
    s = re.sub(r"sqrt(\d+(?:\.\d+)?)", r"sqrt(\1)", s)
    try:
        value = sympy.sympify(s, rational=True)
        return float(value.evalf(30))
    except (sympy.SympifyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot parse real number {text!r}") from exc


def _int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text) -> list[float]:
    if isinstance(text, list):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"expected comma-separated numbers, got {text!r}") from exc


def _measure(args) -> BiasedBitMeasure:
    return BiasedBitMeasure(int(args.m), parse_prob(str(args.rho)))


def _dist(args) -> TernaryCoeffDist:
    m = int(getattr(args, "m", 0) or 0)
    if args.probs is not None:
        parts = str(args.probs).split(",")
        if len(parts) != 3:
            raise DomainError("--probs needs three values P(-1),P(0),P(+1)")
        return TernaryCoeffDist(*(parse_prob(p) for p in parts), m)
    if args.t is not None:
        return TernaryCoeffDist.with_max(parse_prob(str(args.t)), m)
    raise DomainError("give the coefficient law with --probs or --t")


def _prob_text(p) -> str:
    return str(p) if is_exact(p) else repr(float(p))


# -- subcommands -------------------------------------------------------------
# Each returns (params, rows, summary, partial).


def cmd_mass(args):
    meas = _measure(args)
    atoms = meas.popcount_masses()
    rows = [{"popcount": ell, "atoms": math.comb(meas.m, ell), "atom_mass": a,
             "class_mass": math.comb(meas.m, ell) * a} for ell, a in enumerate(atoms)]
    summary = {"total": sum(r["class_mass"] for r in rows)}
    if args.n is not None:
        summary["n"] = args.n
        summary["point_mass"] = meas.point_mass(args.n)
    return {"m": meas.m, "rho": _prob_text(meas.rho)}, rows, summary, False


def cmd_sample(args):
    meas = _measure(args)
    draws = meas.sample(args.seed, args.count)
    rows = [{"index": i, "n": n} for i, n in enumerate(draws)]
    return {"m": meas.m, "rho": _prob_text(meas.rho), "count": args.count,
            "seed": args.seed}, rows, {}, False


def cmd_rq(args):
    meas = _measure(args)
    est = expsum.remainder_term(args.q, meas, args.precision_bits)
    row = {"q": args.q, "m": meas.m, "rq": est.value, "abs_rq": est.abs_value,
           "error_bound": est.error_bound, "method": est.method,
           "sign_certified": est.sign_certified}
    if meas.exact:
        row["rq_exact"] = expsum.exact_remainder(args.q, meas)
    params = {"q": args.q, "m": meas.m, "rho": _prob_text(meas.rho),
              "precision_bits": args.precision_bits}
    return params, [row], {}, False


def cmd_sweep(args):
    meas = _measure(args)
    rep = sieve_lab.sweep_remainders(meas, args.q_max, args.precision_bits, args.threads,
                                     q_min=args.q_min, work_budget=args.work_budget)
    rows = []
    for r in rep.records:
        row = {"q": r.q, "ord2": r.ord2, "abs_rq": r.abs_rq, "error_bound": r.error_bound,
               "cumulative": r.cumulative}
        if meas.exact:
            row["rq_exact"] = r.rq_exact
        rows.append(row)
    params = {"m": meas.m, "rho": _prob_text(meas.rho), "q_min": args.q_min,
              "q_max": args.q_max, "precision_bits": args.precision_bits}
    summary = {"count": len(rows), "cumulative_sum": rep.cumulative_sum,
               "q_cutoff": rep.q_cutoff}
    return params, rows, summary, rep.partial


def cmd_exponent(args):
    rho = parse_prob(str(args.rho))
    m_list = _int_list(args.m)
    out = sieve_lab.estimate_sieving_exponent(rho, m_list, args.epsilon, args.q_budget,
                                              args.precision_bits)
    rows = [{"m": r.m, "alpha_hat": r.alpha_hat, "q_star": r.q_star, "q_cutoff": r.q_cutoff,
             "capped": r.capped} for r in out]
    params = {"rho": _prob_text(rho), "m": ",".join(map(str, m_list)), "epsilon": args.epsilon,
              "precision_bits": args.precision_bits}
    return params, rows, {}, False


def cmd_pseudoprimes(args):
    meas = _measure(args)
    rows = []
    for r in _int_list(args.r):
        res = sieve_lab.pseudoprime_mass(meas, r, args.method, args.samples, args.seed)
        rows.append({"r": r, "mass": res.value, "scaled": res.scaled,
                     "std_error": res.std_error, "method": res.method})
    return {"m": meas.m, "rho": _prob_text(meas.rho)}, rows, {}, False


def cmd_legendre(args):
    meas = _measure(args)
    res = sieve_lab.legendre_sieve_demo(meas, args.z, args.precision_bits)
    row = {"z": res.z, "primes": " ".join(map(str, res.primes)), "main_term": res.main_term,
           "remainder_sum": res.remainder_sum, "estimate": res.estimate,
           "error_budget": res.error_budget, "exact": res.exact,
           "within_budget": abs(float(res.main_term) - float(res.exact)) <= res.error_budget}
    return {"m": meas.m, "rho": _prob_text(meas.rho), "z": args.z}, [row], {}, False


def cmd_lemmas(args):
    rows = []
    for sweep in (bounds.power_bound_sweep(args.samples, args.seed, args.out_of_regime),
                  bounds.shift_bound_sweep(args.samples, args.seed, args.out_of_regime)):
        rows.append({"name": sweep.name, "samples": sweep.samples,
                     "violations": sweep.violations, "worst": sweep.worst})
    return {"samples": args.samples, "seed": args.seed,
            "out_of_regime": args.out_of_regime}, rows, {}, False


def cmd_integral(args):
    rows = []
    for h in _int_list(args.h):
        for delta in _float_list(args.delta):
            quad, closed = bounds.product_integral_identity(h, delta)
            rows.append({"h": h, "delta": delta, "quadrature": quad, "closed_form": closed,
                         "abs_diff": abs(quad - closed)})
    return {"h": str(args.h), "delta": str(args.delta)}, rows, {}, False


def cmd_chain(args):
    rho = parse_prob(str(args.rho))
    rows = []
    for Q in _int_list(args.Q):
        params = bounds.BoundParams.for_chain(rho, args.delta, Q, args.t)
        rep = bounds.holder_chain_diagnostic(rho, Q, params)
        row = {"Q": Q, "m": rep.m, "h": params.h, "t": params.t_holder, "gamma": params.gamma}
        row.update(dict(rep.chain))
        row.update({"target": rep.target, "ordered": all(rep.ordered),
                    "final_ok": rep.final_ok,
                    "regime_violations": "; ".join(rep.regime_violations)})
        rows.append(row)
    return {"rho": _prob_text(rho), "delta": args.delta}, rows, {}, False


def cmd_entropy(args):
    c = parse_real(args.c)
    t = poly_square.solve_entropy_threshold(c)
    row = {"c": c, "t": t, "residual": poly_square.entropy_map(t) - c}
    return {"c": str(args.c)}, [row], {}, False


def cmd_rate(args):
    dist = _dist(args)
    if args.p is not None:
        rb = poly_square.rate_bound(dist, args.r, args.p)
        two = rb
    else:
        rb = poly_square.optimize_rate(dist, args.r)
        two = poly_square.optimize_rate(dist, args.r, two_term=True)
    row = {"r": args.r, "p": rb.p, "q": rb.q, "per_digit_rate": rb.per_digit_rate,
           "total_bound": rb.total_bound, "exponent_c": rb.exponent_c,
           "two_term_p": two.p, "two_term_rate": two.two_term_rate,
           "two_term_total": two.two_term_total}
    return {"probs": ",".join(_prob_text(p) for p in dist.probs)}, [row], {}, False


def cmd_claim(args):
    dist = _dist(args)
    rep = poly_square.claim_bound(dist, args.B, args.dp_budget)
    row = {"B": rep.B, "r": rep.r, "per_digit_rate": rep.per_digit_rate,
           "total_bound": rep.total_bound, "exact_union": rep.exact_union,
           "k_cutoff": rep.k_cutoff, "two_term_rate": rep.two_term_rate,
           "hoelder_p": rep.hoelder_p, "exponent_c": rep.exponent_c,
           "set_size_bound": rep.set_size_bound, "exact_event": rep.exact_event}
    params = {"m": dist.m, "probs": ",".join(_prob_text(p) for p in dist.probs), "B": args.B}
    return params, [row], {}, rep.partial


def cmd_mc_squares(args):
    dist = _dist(args)
    k_max = args.k_max if args.k_max is not None else 2 * args.B
    res = poly_square.monte_carlo_square_divisor(dist, args.B, k_max, args.samples, args.seed,
                                                 args.threads)
    rows = [{"samples": n, "hits": h, "estimate": h / n} for n, h in res.trace]
    summary = {"estimate": res.estimate, "std_error": res.std_error, "samples": res.samples}
    params = {"m": dist.m, "probs": ",".join(_prob_text(p) for p in dist.probs), "B": args.B,
              "k_max": k_max, "seed": args.seed}
    return params, rows, summary, False


# -- parser ------------------------------------------------------------------


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision-bits", type=int, default=128)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker count; never changes the output")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--config", help="JSON file of option defaults")


def _coin(p, m_type=int):
    p.add_argument("--rho", required=True, help='P(digit 0); "3/4" is exact, "0.75" is float')
    p.add_argument("--m", type=m_type, required=True)


def _ternary(p):
    p.add_argument("--probs", help="P(-1),P(0),P(+1)")
    p.add_argument("--t", help="P(0); the rest split evenly between -1 and +1")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coinsieve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        _common(p)
        return p

    p = add("mass", cmd_mass, "atom and popcount-class masses")
    _coin(p)
    p.add_argument("--n", type=int)

    p = add("sample", cmd_sample, "seeded draws from the measure")
    _coin(p)
    p.add_argument("--count", type=int, default=10)

    p = add("rq", cmd_rq, "one remainder term R_q")
    _coin(p)
    p.add_argument("--q", type=int, required=True)

    p = add("sweep", cmd_sweep, "|R_q| over odd squarefree q")
    _coin(p)
    p.add_argument("--q-max", type=int, required=True)
    p.add_argument("--q-min", type=int, default=3)
    p.add_argument("--work-budget", type=int)

    p = add("exponent", cmd_exponent, "empirical sieving exponent")
    _coin(p, m_type=str)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--q-budget", type=int)

    p = add("pseudoprimes", cmd_pseudoprimes, "mass of integers with at most r prime factors")
    _coin(p)
    p.add_argument("--r", default="1,2,3")
    p.add_argument("--method", choices=("auto", "exact", "sampling"), default="auto")
    p.add_argument("--samples", type=int, default=100_000)

    p = add("legendre", cmd_legendre, "small inclusion-exclusion sieve")
    _coin(p)
    p.add_argument("--z", type=int, required=True)

    p = add("lemmas", cmd_lemmas, "random property checks of the power and shift inequalities")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--out-of-regime", action="store_true")

    p = add("integral312", cmd_integral, "doubling-product integral against its closed form")
    p.add_argument("--h", default="1,2,4,8,12")
    p.add_argument("--delta", default="0.01,0.1,0.3")

    p = add("chain", cmd_chain, "Hoelder chain diagnostic for q ~ Q")
    p.add_argument("--rho", required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--Q", default="32")
    p.add_argument("--t", type=int)

    p = add("entropy", cmd_entropy, "solve t^t (1-t)^(1-t) = c")
    p.add_argument("--c", required=True, help='e.g. "0.9" or "1/sqrt3"')

    p = add("rate", cmd_rate, "Hoelder per-digit rate bound")
    _ternary(p)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--p", type=float, help="fixed exponent (default: optimised)")

    p = add("claim", cmd_claim, "rate bound next to the exact square-divisor union")
    _ternary(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--dp-budget", type=int, default=50_000_000)

    p = add("mc-squares", cmd_mc_squares, "Monte Carlo square-divisor frequency")
    _ternary(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--k-max", type=int)
    p.add_argument("--samples", type=int, default=100_000)
    return parser


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse argv with option defaults taken from ``--config``; explicit flags win."""
    path = _config_path(argv)
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    choices = parser._subparsers._group_actions[0].choices
    if path is not None and command in choices:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise DomainError("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items() if k != "command"}
        sub = choices[command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise DomainError(f"unknown config keys for {command}: {', '.join(unknown)}")
        for action in sub._actions:
            if action.dest in cfg:
                action.required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def _emit(args, params, rows, summary, partial):
    if args.format == "json":
        text = to_json(args.command, params, rows, summary, partial)
    else:
        text = to_csv(rows, partial)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        if args.threads < 1:
            raise DomainError("--threads must be >= 1")
        params, rows, summary, partial = args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"coinsieve: precondition violated: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except BudgetExceeded as exc:
        print(f"coinsieve: budget exhausted: {exc}", file=sys.stderr)
        partial_rows = exc.partial if isinstance(exc.partial, list) else []
        _emit(args, {}, partial_rows, {}, True)
        return EXIT_BUDGET
    _emit(args, params, rows, summary, partial)
    if partial:
        print("coinsieve: budget exhausted, partial results written", file=sys.stderr)
        return EXIT_BUDGET
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line entry point.

Every command writes data (CSV or JSON) to ``--out`` or stdout. Exit codes:
0 on success, 2 on invalid input, 3 when a property check on the generated
data fails. Output is a deterministic function of the flags, including
``--seed``; no environment variable supplies a default seed.

CSV headers
-----------
decompose     ``k,m,lower,upper,weight,weight_rational``
fisher-curve  ``theta,r,lower,upper``
mse-curve     ``theta,phi,var_unconditioned``
em-sim        ``replicate,k,p_k,p_true``
fit           ``k,p_k``
rb-compare    ``family,theta,estimator,analytic,empirical,standard_error,n``
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

import numpy as np

from . import em, estimators, fisher, simkit
from .chi2 import MixingPMF
from .dyadic import decompose, is_maximal_member

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VIOLATION = 3


class PropertyViolation(Exception):
    """Generated data failed a check; carries the rendered output."""

    def __init__(self, problems: list[str], text: str):
        super().__init__("; ".join(problems))
        self.problems = problems
        self.text = text


def _exact(value: str) -> Fraction:
    # decimal strings are read exactly, so "0.75" is 3/4 and "0.1" is not dyadic
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from exc


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- commands ------------------------------------------------------------


def cmd_decompose(args) -> str:
    mix = decompose(args.a, args.b, args.eps).sorted()
    bad = [f"{d} fails the maximality predicate" for d in mix.descriptors() if not is_maximal_member(d, args.a, args.b)]
    if args.format == "csv":
        text = _csv(
            ["k", "m", "lower", "upper", "weight", "weight_rational"],
            [[d.k, d.m, str(d.lower), str(d.upper), f"{float(w):.17g}", str(Fraction(w))] for d, w in mix],
        )
    else:
        obj = {"a": str(args.a), "b": str(args.b), "eps": str(args.eps), **mix.to_json_obj()}
        text = _json(obj)
    if bad:
        raise PropertyViolation(bad, text)
    return text


def cmd_fisher_curve(args) -> str:
    if not 0 < args.theta_min < args.theta_max:
        raise ValueError("need 0 < theta-min < theta-max")
    if args.spacing == "log":
        grid = np.geomspace(args.theta_min, args.theta_max, args.points)
    else:
        grid = np.linspace(args.theta_min, args.theta_max, args.points)
    rows = fisher.fisher_curve(grid, args.tol)
    problems = fisher.check_curve(rows, agreement=10 * args.tol)
    if args.format == "csv":
        text = fisher.curve_to_csv(rows)
    else:
        text = _json(
            {
                "tol": args.tol,
                "rows": [
                    {"theta": r.theta, "r": r.r_from_s, "r_tanh": r.r, "s": r.s, "lower": r.lower, "upper": r.upper}
                    for r in rows
                ],
            }
        )
    if problems:
        raise PropertyViolation(problems, text)
    return text


def cmd_mse_curve(args) -> str:
    rows = estimators.rb_variance_curve(args.resolution)
    problems = [f"phi({th}) = {phi} exceeds theta^2/3" for th, phi, var in rows if phi > var]
    problems += [
        f"phi({th}) = {phi} is not zero at a power of two"
        for th, phi, _ in rows
        if th.numerator == 1 and phi != 0
    ]
    if args.format == "csv":
        text = estimators.curve_to_csv(rows)
    else:
        text = _json(
            {
                "resolution": args.resolution,
                "rows": [
                    {"theta": str(th), "phi": str(phi), "var_unconditioned": str(var), "phi_float": float(phi)}
                    for th, phi, var in rows
                ],
            }
        )
    if problems:
        raise PropertyViolation(problems, text)
    return text


def _fit_report(state: em.EMState) -> list[str]:
    gains = np.diff(state.trace)
    if gains.size and gains.min() < -1e-10:
        return [f"loglik decreased by {-gains.min():.3g}"]
    return []


def cmd_em_sim(args) -> str:
    if args.experiment == "poisson2":
        truth = MixingPMF.poisson(2.0)
    else:
        truth = MixingPMF.geometric(0.5 if args.variant == "sqrt2w" else 1.0 / 3.0)
    config = em.EMConfig(max_iterations=args.max_iterations, loglik_tolerance=args.tol)
    reps, problems = [], []
    for i in range(args.replicates):
        gen = simkit.RngStream(args.seed, i).generator()
        if args.experiment == "poisson2":
            xs = em.simulate_poisson_experiment(args.n, 2.0, gen)
        else:
            xs = em.simulate_deconvolution_experiment(args.n, gen, args.variant)
        state = em.fit(xs, config)
        tv = state.weights.total_variation(truth)
        problems += [f"replicate {i}: {p}" for p in _fit_report(state)]
        if args.max_tv is not None and tv > args.max_tv:
            problems.append(f"replicate {i}: total variation {tv:.4f} exceeds {args.max_tv}")
        reps.append((state, tv))
    if args.format == "csv":
        rows = []
        for i, (state, _) in enumerate(reps):
            size = max(state.p.size, truth.masses.size)
            fitted, true = state.weights.padded(size), truth.padded(size)
            rows += [[i, k, repr(float(fitted[k])), repr(float(true[k]))] for k in range(size)]
        text = _csv(["replicate", "k", "p_k", "p_true"], rows)
    else:
        text = _json(
            {
                "experiment": args.experiment,
                "variant": args.variant if args.experiment == "geometric" else None,
                "n": args.n,
                "seed": args.seed,
                "config": {"max_iterations": config.max_iterations, "loglik_tolerance": config.loglik_tolerance},
                "true_pmf": truth.masses.tolist(),
                "replicates": [
                    {"replicate": i, "total_variation": tv, **state.to_json_obj()} for i, (state, tv) in enumerate(reps)
                ],
            }
        )
    if problems:
        raise PropertyViolation(problems, text)
    return text


def cmd_fit(args) -> str:
    xs = em.load_sample(args.input)
    config = em.EMConfig(max_iterations=args.max_iterations, loglik_tolerance=args.tol)
    state = em.fit(xs, config)
    if args.format == "csv":
        text = em.pmf_to_csv(state.weights)
    else:
        text = _json({"n": int(xs.size), "support_bound": em.support_bound(xs), **state.to_json_obj()})
    problems = _fit_report(state)
    if problems:
        raise PropertyViolation(problems, text)
    return text


def _mc_entries(family: str, theta, analytic: dict, reports: dict) -> list[dict]:
    return [
        {
            "family": family,
            "theta": float(theta),
            "estimator": name,
            "analytic": analytic[name],
            "empirical": reports[name].estimate,
            "standard_error": reports[name].standard_error,
            "n": reports[name].n,
            "within_3se": reports[name].within(analytic[name]),
        }
        for name in ("unconditioned", "conditioned")
    ]


def cmd_rb_compare(args) -> str:
    theta = args.theta
    if not theta > 0:
        raise ValueError("theta must be positive")
    cond, uncond = estimators.classical_mse(float(theta))
    entries = _mc_entries(
        "classical",
        theta,
        {"unconditioned": uncond, "conditioned": cond},
        estimators.classical_monte_carlo(float(theta), args.n, args.seed),
    )
    if theta < 1:
        phi = estimators.rb_variance(theta)
        entries += _mc_entries(
            "uniform",
            theta,
            {"unconditioned": float(theta) ** 2 / 3.0, "conditioned": float(phi)},
            estimators.uniform_monte_carlo(theta, args.n, args.seed),
        )
    if args.format == "csv":
        keys = ["family", "theta", "estimator", "analytic", "empirical", "standard_error", "n"]
        text = _csv(keys, [[e[k] for k in keys] for e in entries])
    else:
        text = _json({"seed": args.seed, "results": entries})
    return text


# -- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmixrep", description="Discrete mixture representations: data generators and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help, fmt="csv"):
        p = sub.add_parser(name, help=help)
        p.add_argument("--format", choices=("csv", "json"), default=fmt)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.set_defaults(func=func)
        return p

    p = add("decompose", cmd_decompose, "split unif(a, b) into dyadic uniforms", fmt="json")
    p.add_argument("--a", type=_exact, required=True)
    p.add_argument("--b", type=_exact, required=True)
    p.add_argument("--eps", type=_exact, default=Fraction(0), help="allowed residual mass (0 needs dyadic endpoints)")

    p = add("fisher-curve", cmd_fisher_curve, "theta * i_F(theta) with its bounds")
    p.add_argument("--theta-min", type=float, default=0.01)
    p.add_argument("--theta-max", type=float, default=50.0)
    p.add_argument("--points", type=_positive_int, default=100)
    p.add_argument("--tol", type=float, default=fisher.DEFAULT_TOL)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")

    p = add("mse-curve", cmd_mse_curve, "exact Rao-Blackwell variance on a dyadic grid")
    p.add_argument("--resolution", type=int, default=12)

    em_defaults = em.EMConfig()

    p = add("em-sim", cmd_em_sim, "simulate and fit the mixing pmf", fmt="json")
    p.add_argument("--experiment", choices=("poisson2", "geometric"), required=True)
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--replicates", type=_positive_int, default=1)
    p.add_argument("--variant", choices=("sqrt2w", "2sqrtw"), default="sqrt2w", help="law of Z in the geometric experiment")
    p.add_argument("--max-iterations", type=_positive_int, default=em_defaults.max_iterations)
    p.add_argument("--tol", type=float, default=em_defaults.loglik_tolerance)
    p.add_argument("--max-tv", type=float, default=None, help="exit 3 if any replicate is farther from the truth")
    p.add_argument("--seed", type=int, default=0)

    p = add("fit", cmd_fit, "fit the mixing pmf to observations read from a file", fmt="json")
    p.add_argument("--input", required=True, help="text file with one positive observation per line")
    p.add_argument("--max-iterations", type=_positive_int, default=em_defaults.max_iterations)
    p.add_argument("--tol", type=float, default=em_defaults.loglik_tolerance)

    p = add("rb-compare", cmd_rb_compare, "Monte Carlo MSE before and after conditioning", fmt="json")
    p.add_argument("--theta", type=_exact, required=True)
    p.add_argument("--n", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        text = args.func(args)
    except PropertyViolation as exc:
        _emit(exc.text, args.out)
        for p in exc.problems:
            print(f"dmixrep: {p}", file=sys.stderr)
        return EXIT_VIOLATION
    except (ValueError, OSError) as exc:
        print(f"dmixrep: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(text, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: bind config files to module operations.

Config files are TOML with the sections below; flags override file values.

    [model.offspring]               # and [model.immigration]
    kind = "geometric"              # "geometric" | "poisson" | "explicit"
    param = 0.5                     # success probability / Poisson rate
    # pmf = [0.25, 0.5, 0.25]       # explicit kind only
    # pmf_truncation = 4096

    [increments]                    # optional; MC studies only
    kind = "shifted-pareto"         # | "gaussian" | "truncated-discrete"
    alpha = 2.5                     # shifted-pareto
    x_m = 1.0                       # shifted-pareto scale
    # sigma0_sq = 1.0               # gaussian
    # pmf = [0.5, 0.5]              # truncated-discrete

    [experiment]
    study = "thm11_harmonic"
    n_grid = [100, 200, 400]
    r_values = [1.0, 2.0, 3.0]      # thm11
    # eps_kind = "power"            # "power" | "log" | "fixed"
    # eps_exponent = 0.4
    # eps_coeff = 1.0
    # fixed_eps = 0.5               # shorthand for eps_kind = "fixed"
    paths = 100000
    seed = 42
    # n_star = 1024
    # K = 500
    # j_max = 64

Exit codes: 0 success, 2 config parse error, 3 domain error (its name is
printed), 4 convergence trend flagged FAILED. The environment variable
GWI_THREADS caps the Monte Carlo worker count.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from . import __version__
from .exact import (
    NonConvergent,
    QuadratureFailure,
    ZeroSurvival,
    brute_force_law,
    harmonic_moment_integral,
    harmonic_moment_sum,
    law_of_Zn,
    write_harmonic_csv,
    write_law_csv,
)
from .experiments import ExperimentConfig, Study, run_study
from .limits import (
    EpsilonSpec,
    LimitConstants,
    ModelRequired,
    MomentCondition,
    OutOfScope,
    classify_regime,
    upsilon,
    write_constants_csv,
    I_constant,
)
from .model import (
    CriticalityViolation,
    DegenerateLaw,
    DistributionSpec,
    PeriodicSupport,
    validate_condition_A,
)
from .series import (
    NegativeCoefficient,
    TruncationOverflow,
    iterate_pgf,
    linear_fractional_oracle,
)
from .simulate import IncrementLaw, estimate_large_deviation, write_mc_csv

_DOMAIN_ERRORS = (
    CriticalityViolation, DegenerateLaw, PeriodicSupport, ZeroSurvival,
    QuadratureFailure, NonConvergent, ModelRequired, OutOfScope,
    TruncationOverflow, NegativeCoefficient, ValueError, ArithmeticError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_TREND = 4


def _load_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _spec_from_config(section: dict) -> DistributionSpec:
    kind = section["kind"]
    trunc = int(section.get("pmf_truncation", 4096))
    if kind == "explicit":
        return DistributionSpec.explicit(section["pmf"], pmf_truncation=trunc)
    if kind == "geometric":
        return DistributionSpec.geometric(float(section["param"]), pmf_truncation=trunc)
    if kind == "poisson":
        return DistributionSpec.poisson(float(section["param"]), pmf_truncation=trunc)
    raise KeyError(f"unknown distribution kind {kind!r}")


def _model_from_config(cfg: dict):
    section = cfg["model"]
    return validate_condition_A(_spec_from_config(section["offspring"]),
                                _spec_from_config(section["immigration"]))


def _law_from_config(cfg: dict) -> IncrementLaw | None:
    section = cfg.get("increments")
    if section is None:
        return None
    kind = section["kind"]
    if kind == "shifted-pareto":
        return IncrementLaw.shifted_pareto(float(section["alpha"]),
                                           float(section.get("x_m", 1.0)))
    if kind == "gaussian":
        return IncrementLaw.gaussian(float(section.get("sigma0_sq", 1.0)))
    if kind == "truncated-discrete":
        return IncrementLaw.truncated_discrete(section["pmf"])
    raise KeyError(f"unknown increment kind {kind!r}")


def _eps_from_config(section: dict, args) -> EpsilonSpec | None:
    if getattr(args, "eps", None) is not None:
        return EpsilonSpec.fixed(args.eps)
    if getattr(args, "eps_exponent", None) is not None:
        return EpsilonSpec.power(args.eps_exponent,
                                 coeff=float(section.get("eps_coeff", 1.0)))
    if "fixed_eps" in section:
        return EpsilonSpec.fixed(float(section["fixed_eps"]))
    if "eps_kind" in section or "eps_exponent" in section:
        kind = section.get("eps_kind", "power")
        coeff = float(section.get("eps_coeff", 1.0))
        if kind == "fixed":
            return EpsilonSpec.fixed(coeff)
        exponent = float(section["eps_exponent"])
        if kind == "log":
            return EpsilonSpec.log_law(exponent, coeff=coeff)
        return EpsilonSpec.power(exponent, coeff=coeff)
    return None


def _cmd_law(args) -> int:
    model = _model_from_config(_load_toml(args.config))
    law = law_of_Zn(model, args.n, args.K)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"law_n{args.n}.csv"
    write_law_csv(law, path)
    print(f"law n={args.n} K={law.K} survival={law.survival!r} "
          f"tail_mass={law.tail_mass!r} -> {path}")
    return EXIT_OK


def _cmd_harmonic(args) -> int:
    model = _model_from_config(_load_toml(args.config))
    n_grid = [int(x) for x in args.n_grid.split(",")]
    r_values = [float(x) for x in args.r.split(",")]
    rows = []
    for n in n_grid:
        for r in r_values:
            if args.route == "sum":
                value = harmonic_moment_sum(law_of_Zn(model, n, args.K), r)
            else:
                value = harmonic_moment_integral(model, n, r)
            rows.append((n, r, value))
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "harmonic.csv"
    write_harmonic_csv(rows, path)
    print(f"harmonic rows={len(rows)} route={args.route} -> {path}")
    return EXIT_OK


def _cmd_constants(args) -> int:
    rows = [("upsilon", args.sigma, args.gamma, args.sigma0sq, args.alpha,
             upsilon(args.sigma, args.sigma0sq, args.gamma))]
    rows.append(("I(sigma,sigma)", args.sigma, args.gamma, args.sigma0sq, None,
                 I_constant(args.sigma, args.sigma, args.gamma)))
    if args.alpha is not None:
        consts = LimitConstants(sigma=args.sigma, gamma=args.gamma,
                                sigma0_sq=args.sigma0sq, alpha=args.alpha,
                                a=args.tail_a)
        if consts.rho is not None:
            rows.append(("rho", args.sigma, args.gamma, args.sigma0sq,
                         args.alpha, consts.rho))
        if args.alpha - 1.0 < args.sigma:
            rows.append(("I(alpha-1,sigma)", args.sigma, args.gamma,
                         args.sigma0sq, args.alpha,
                         I_constant(args.alpha - 1.0, args.sigma, args.gamma)))
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "constants.csv"
    write_constants_csv(rows, path)
    for row in rows:
        print(f"{row[0]} = {row[5]!r}")
    return EXIT_OK


def _cmd_classify(args) -> int:
    if args.alpha is not None:
        consts = LimitConstants(sigma=args.sigma, gamma=args.gamma,
                                sigma0_sq=args.sigma0sq, alpha=args.alpha,
                                a=args.tail_a)
        condition = MomentCondition.TAIL
    else:
        consts = LimitConstants(sigma=args.sigma, gamma=args.gamma,
                                sigma0_sq=args.sigma0sq)
        condition = MomentCondition.FINITE
    if args.eps is not None:
        eps = EpsilonSpec.fixed(args.eps)
    elif args.eps_log_power is not None:
        eps = EpsilonSpec.log_law(args.eps_log_power, coeff=args.eps_coeff)
    else:
        eps = EpsilonSpec.power(args.eps_exponent, coeff=args.eps_coeff)
    report = classify_regime(consts, eps, condition, q_value=args.q_value)
    tau = "" if report.tau is None else f" tau={report.tau!r}"
    print(f"regime={report.regime.value}{tau} scaling={report.scaling} "
          f"limit={report.limit_value!r}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _load_toml(args.config)
    model = _model_from_config(cfg)
    law = _law_from_config(cfg)
    if law is None:
        raise KeyError("simulate requires an [increments] section")
    est = estimate_large_deviation(model, law, args.n, args.eps, args.paths,
                                   args.seed)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "mc.csv"
    write_mc_csv([(args.n, args.eps, est.paths, est.hits, est.probability,
                   est.std_error, est.seed)], path)
    print(f"simulate n={args.n} eps={args.eps!r} paths={est.paths} "
          f"p_hat={est.probability!r} std_err={est.std_error!r} -> {path}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    cfg = _load_toml(args.config)
    model = _model_from_config(cfg)
    law = _law_from_config(cfg)
    section = cfg.get("experiment", {})
    study = Study(section["study"])
    config = ExperimentConfig(
        study=study,
        model=model,
        law=law,
        n_grid=tuple(int(n) for n in section["n_grid"]),
        r_values=tuple(float(r) for r in section.get("r_values", [])),
        eps=_eps_from_config(section, args),
        paths=args.paths if args.paths is not None else int(section.get("paths", 100_000)),
        seed=args.seed if args.seed is not None else int(section.get("seed", 0)),
        n_star=int(section.get("n_star", 1024)),
        K=section.get("K"),
        j_max=int(section.get("j_max", 64)),
        output_path=args.output_dir or section.get("output_path", "."),
    )
    result = run_study(config)
    worst = max(row.rel_error for row in result.rows)
    status = "FAILED" if result.failed else "ok"
    print(f"{study.value} rows={len(result.rows)} worst_rel_error={worst!r} "
          f"trend={status} -> {result.csv_path}")
    return EXIT_TREND if result.failed else EXIT_OK


def _cmd_oracle_check(args) -> int:
    model = _model_from_config(_load_toml(args.config))
    worst_pmf = 0.0
    for n in range(1, 6):
        series_law = law_of_Zn(model, n, args.K)
        direct_law = brute_force_law(model, n, args.K)
        worst_pmf = max(worst_pmf, float(
            abs(series_law.pmf - direct_law.pmf).max()))
    print(f"law routes: max |pmf difference| = {worst_pmf!r} (n <= 5, K={args.K})")
    ok = worst_pmf <= 1e-12
    if model.offspring.kind == "geometric" and model.offspring.param == 0.5:
        trace = iterate_pgf(model, 50, 256)
        worst_lf = max(abs(float(trace.f_at_zero[k])
                           - linear_fractional_oracle(model.gamma, k, 0.0))
                       for k in range(51))
        print(f"linear-fractional oracle: max |f_k(0) difference| = {worst_lf!r}")
        ok = ok and worst_lf <= 1e-9
    if not ok:
        raise ArithmeticError("oracle agreement beyond tolerance")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwilab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("law", help="pmf of the population at step n")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=int, default=4096)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(fn=_cmd_law)

    p = sub.add_parser("harmonic", help="harmonic moment table")
    p.add_argument("--config", required=True)
    p.add_argument("--n-grid", required=True, help="comma separated")
    p.add_argument("--r", required=True, help="comma separated")
    p.add_argument("--route", choices=("integral", "sum"), default="integral")
    p.add_argument("--K", type=int, default=4096)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(fn=_cmd_harmonic)

    p = sub.add_parser("constants", help="limit constants table")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--sigma0sq", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tail-a", type=float, default=1.0)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(fn=_cmd_constants)

    p = sub.add_parser("classify", help="decay-regime classification")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--sigma0sq", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tail-a", type=float, default=1.0)
    p.add_argument("--eps", type=float, help="fixed epsilon")
    p.add_argument("--eps-exponent", type=float, help="power-law exponent")
    p.add_argument("--eps-log-power", type=float, help="log-law exponent")
    p.add_argument("--eps-coeff", type=float, default=1.0)
    p.add_argument("--q-value", type=float)
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("simulate", help="Monte Carlo deviation probability")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("experiment", help="run a configured study")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--eps", type=float, help="override: fixed epsilon")
    p.add_argument("--eps-exponent", type=float, help="override: power exponent")
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("oracle-check", help="cross-check the exact-law routes")
    p.add_argument("--config", required=True)
    p.add_argument("--K", type=int, default=256)
    p.set_defaults(fn=_cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, KeyError, TypeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except tomllib.TOMLDecodeError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except _DOMAIN_ERRORS as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

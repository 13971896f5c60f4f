"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 input validation failure, 3 numeric
failure.  Every randomized subcommand requires an explicit --seed; no
environment variable is consulted, so a command line is a complete record of
the run.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .amip import sosie
from .core import (
    Z_975,
    NumericalError,
    QoiSpec,
    ValidationError,
    resolve_qoi_preset,
    validate_index_set,
)
from .crosscheck import run_cross_checks
from .estimator import influence_estimates
from .harness import (
    coverage_experiment,
    default_alpha_grid,
    interpolation_experiment,
    oracle_mean_sd,
    soi_coverage_experiment,
    verdict,
)
from .oracles import (
    NormalGammaModel,
    NormalMeansModel,
    NormalModel,
    normal_drop_errors,
    normal_gamma_influence,
    normal_gamma_posterior,
    normal_gamma_sigma_nn,
    normal_means_drop_errors,
    normal_means_error_bound,
    normal_means_posterior_lambda,
    normal_means_weighted_posterior,
    normal_weighted_posterior,
)
from .report import (
    file_digest,
    format_float,
    ingest_bundle,
    render_document,
    render_table,
    write_bundle_csv,
)
from .resample import (
    BootstrapConfig,
    amip_deltas,
    ci_for_amip,
    ci_for_posterior_mean,
    ci_for_sum_of_influence,
    quantile,
    replicate_influences,
    substream_seed,
)
from .samplers import (
    SamplerConfig,
    lag1_autocorrelation,
    sample_metropolis,
    sample_normal_exact,
    sample_normal_gamma_exact,
    sample_normal_means_exact,
)

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_VALIDATION = 2
_EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2 for usage errors; this tool uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> np.ndarray:
    try:
        values = [float(f) for f in text.split(",") if f.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"bad numeric list {text!r}: {exc}") from None
    if not values:
        raise ValidationError(f"empty numeric list {text!r}")
    return np.asarray(values)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(f) for f in text.split(",") if f.strip() != "")
    except ValueError as exc:
        raise ValidationError(f"bad integer list {text!r}: {exc}") from None
    if not values:
        raise ValidationError(f"empty integer list {text!r}")
    return values


def _parse_alphas(spec: str, n_obs: int) -> tuple[float, ...]:
    """Either a comma list, `default`, or `start:stop:log10[:count]`."""
    if spec == "default":
        return default_alpha_grid(n_obs)
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (3, 4) or parts[2] != "log10":
            raise ValidationError(
                f"bad alpha grid {spec!r}; expected start:stop:log10[:count] or a comma list"
            )
        try:
            start, stop = float(parts[0]), float(parts[1])
            count = int(parts[3]) if len(parts) == 4 else 10
        except ValueError as exc:
            raise ValidationError(f"bad alpha grid {spec!r}: {exc}") from None
        if not (0.0 < start < 1.0 and 0.0 < stop < 1.0 and start < stop and count >= 2):
            raise ValidationError(f"alpha grid {spec!r} must satisfy 0 < start < stop < 1, count >= 2")
        return tuple(float(a) for a in np.power(10.0, np.linspace(math.log10(start), math.log10(stop), count)))
    alphas = tuple(float(a) for a in _float_list(spec))
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValidationError(f"alpha {a} must lie strictly between 0 and 1")
    return alphas


def _resolve_qoi(args, bundle) -> QoiSpec:
    z = Z_975 if args.z is None else args.z
    if args.qoi is not None:
        if args.c1 is not None or args.c2 is not None:
            raise ValidationError("give either --qoi or --c1/--c2, not both")
        return resolve_qoi_preset(args.qoi, bundle, z=z)
    if args.c1 is None and args.c2 is None:
        raise ValidationError("a QoI is required: --qoi sign|sig|both, or --c1 and --c2")
    c1 = 0.0 if args.c1 is None else args.c1
    c2 = 0.0 if args.c2 is None else args.c2
    return QoiSpec(c1=c1, c2=c2, z=z)


def _phi_full(bundle, qoi: QoiSpec) -> float:
    g = bundle.g_values
    mean = float(g.mean())
    centered = g - mean
    sd = float(np.sqrt((centered * centered).mean()))
    return qoi.c1 * mean + qoi.c2 * sd


def _qoi_block(qoi: QoiSpec) -> dict:
    return {"preset": qoi.preset, "c1": qoi.c1, "c2": qoi.c2, "z": qoi.z}


def _bootstrap_block(cfg: BootstrapConfig) -> dict:
    return {"B": cfg.B, "L": cfg.L, "eta": cfg.eta, "mode": cfg.mode}


def _bootstrap_config(args) -> BootstrapConfig:
    return BootstrapConfig(
        seed=args.seed,
        B=args.bootstrap_reps,
        L=args.block_length,
        eta=args.eta,
        mode=args.mode,
    )


def _emit(text: str, output: str) -> None:
    if output == "-":
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _build_model(args):
    if args.model == "normal":
        return NormalModel(x=_float_list(args.x), sigma=args.sigma)
    if args.model == "normal-means":
        return NormalMeansModel(
            x=_float_list(args.x),
            group=np.asarray(_int_list(args.groups)),
            sigma=args.sigma,
            tau=args.tau,
        )
    return NormalGammaModel(
        x=_float_list(args.x), prior_shape=args.prior_shape, prior_rate=args.prior_rate
    )


def _sampler_kind(args) -> str:
    sampler = getattr(args, "sampler", "exact")
    if sampler == "metropolis":
        if args.model != "normal":
            raise ValidationError("the metropolis sampler is only available for the normal model")
        return "metropolis"
    return {
        "normal": "normal_exact",
        "normal-means": "normal_means_exact",
        "normal-gamma": "normal_gamma_exact",
    }[args.model]


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_influence(args) -> int:
    bundle = ingest_bundle(args.bundle)
    qoi = _resolve_qoi(args, bundle)
    psi = influence_estimates(bundle, qoi)
    if args.format == "json":
        doc = {
            "tool_version": __version__,
            "input_digest": file_digest(args.bundle),
            "qoi": _qoi_block(qoi),
            "influences": [float(v) for v in psi],
        }
        _emit(render_document(doc), args.output)
    else:
        rows = [{"n": n + 1, "psi_hat": float(v)} for n, v in enumerate(psi)]
        _emit(render_table(rows, ["n", "psi_hat"]), args.output)
    return _EXIT_OK


def _cmd_amip(args) -> int:
    bundle = ingest_bundle(args.bundle)
    qoi = _resolve_qoi(args, bundle)
    alphas = _parse_alphas(args.alphas, bundle.n_obs)
    psi = influence_estimates(bundle, qoi)
    results = [sosie(psi, a) for a in alphas]
    if args.format == "json":
        doc = {
            "tool_version": __version__,
            "input_digest": file_digest(args.bundle),
            "qoi": _qoi_block(qoi),
            "results": [
                {
                    "alpha": r.alpha,
                    "budget": r.budget,
                    "delta_hat": r.delta_hat,
                    "dropped": list(r.dropped),
                }
                for r in results
            ],
        }
        _emit(render_document(doc), args.output)
    else:
        rows = [
            {
                "alpha": r.alpha,
                "budget": r.budget,
                "delta_hat": r.delta_hat,
                "dropped": ";".join(str(i) for i in r.dropped),
            }
            for r in results
        ]
        _emit(render_table(rows, ["alpha", "budget", "delta_hat", "dropped"]), args.output)
    return _EXIT_OK


def _cmd_ci(args) -> int:
    bundle = ingest_bundle(args.bundle)
    cfg = _bootstrap_config(args)
    doc = {
        "tool_version": __version__,
        "input_digest": file_digest(args.bundle),
        "target": args.target,
    }
    if args.target == "mean":
        interval = ci_for_posterior_mean(bundle, cfg)
    else:
        qoi = _resolve_qoi(args, bundle)
        doc["qoi"] = _qoi_block(qoi)
        if args.target == "amip":
            if args.alpha is None:
                raise ValidationError("--alpha is required for the amip target")
            doc["alpha"] = args.alpha
            interval = ci_for_amip(bundle, qoi, args.alpha, cfg)
        else:
            if args.indices is None:
                raise ValidationError("--indices is required for the soi target")
            idx = validate_index_set(_int_list(args.indices), bundle.n_obs)
            doc["indices"] = list(idx)
            interval = ci_for_sum_of_influence(bundle, qoi, idx, cfg)
    doc["bootstrap"] = _bootstrap_block(cfg)
    doc["seed"] = args.seed
    doc["lb"] = interval.lb
    doc["ub"] = interval.ub
    _emit(render_document(doc), args.output)
    return _EXIT_OK


def _cmd_audit(args) -> int:
    bundle = ingest_bundle(args.bundle)
    qoi = _resolve_qoi(args, bundle)
    phi_full = _phi_full(bundle, qoi)
    if args.alpha is not None and args.alphas is not None:
        raise ValidationError("give either --alpha or --alphas, not both")
    if args.alpha is not None:
        alphas = tuple(sorted(set(args.alpha)))
    elif args.alphas is not None:
        alphas = tuple(sorted(set(_parse_alphas(args.alphas, bundle.n_obs))))
    else:
        alphas = default_alpha_grid(bundle.n_obs)
    cfg = _bootstrap_config(args)

    psi_hat = influence_estimates(bundle, qoi)
    psi_star = replicate_influences(bundle, qoi, cfg)
    rows = []
    for alpha in alphas:
        solved = sosie(psi_hat, alpha)
        deltas = amip_deltas(psi_star, solved.budget)
        lb = quantile(deltas, (1.0 - cfg.eta) / 2.0)
        ub = quantile(deltas, (1.0 + cfg.eta) / 2.0)
        v = verdict(phi_full, _IntervalShim(lb, ub))
        rows.append(
            {
                "alpha": solved.alpha,
                "budget": solved.budget,
                "delta_hat": solved.delta_hat,
                "dropped": solved.dropped,
                "lb": lb,
                "ub": ub,
                "verdict": v.outcome,
            }
        )

    if args.figures is not None:
        from .figures import render_audit_figure

        os.makedirs(args.figures, exist_ok=True)
        render_audit_figure(rows, args.figures, cfg.eta)

    if args.format == "csv":
        flat = [dict(r, dropped=";".join(str(i) for i in r["dropped"])) for r in rows]
        _emit(
            render_table(flat, ["alpha", "budget", "delta_hat", "dropped", "lb", "ub", "verdict"]),
            args.output,
        )
    else:
        doc = {
            "tool_version": __version__,
            "input_digest": file_digest(args.bundle),
            "qoi": dict(_qoi_block(qoi), phi_full=phi_full),
            "results": [
                {
                    "alpha": r["alpha"],
                    "budget": r["budget"],
                    "delta_hat": r["delta_hat"],
                    "dropped": list(r["dropped"]),
                    "lb": r["lb"],
                    "ub": r["ub"],
                    "verdict": r["verdict"],
                }
                for r in rows
            ],
            "bootstrap": _bootstrap_block(cfg),
            "seed": args.seed,
        }
        _emit(render_document(doc), args.output)
    return _EXIT_OK


class _IntervalShim:
    """verdict() needs only lb/ub; avoids materializing replicate arrays twice."""

    def __init__(self, lb: float, ub: float):
        self.lb = lb
        self.ub = ub


def _cmd_oracle(args) -> int:
    lines = []
    model = _build_model(args)
    if args.model == "normal":
        mean, var = normal_weighted_posterior(model, np.ones(model.n_obs))
        lines.append(("posterior_mean", mean))
        lines.append(("posterior_sd", math.sqrt(var)))
        if args.drop is not None:
            err = normal_drop_errors(model, _int_list(args.drop))
            lines.append(("err_first", err.err_first))
            lines.append(("err_zeroth", err.err_zeroth))
    elif args.model == "normal-means":
        w = np.ones(model.n_obs)
        mean = normal_means_weighted_posterior(model, w)
        lam = normal_means_posterior_lambda(model, w)
        lines.append(("posterior_mean", mean))
        lines.append(("posterior_sd", 1.0 / math.sqrt(lam)))
        if args.drop is not None:
            drop = _int_list(args.drop)
            rep = normal_means_drop_errors(model, drop)
            lines.append(("err_first", rep.direct.err_first))
            lines.append(("err_zeroth", rep.direct.err_zeroth))
            lines.append(("lemma_err_first", rep.lemma_decomposition.err_first))
            lines.append(("lemma_err_zeroth", rep.lemma_decomposition.err_zeroth))
            lines.append(("lemma_diff_first", rep.diff_first))
            lines.append(("lemma_diff_zeroth", rep.diff_zeroth))
            lines.append(("condition_holds", rep.condition))
            try:
                lines.append(("error_bound", normal_means_error_bound(model, drop)))
            except ValidationError as exc:
                lines.append(("error_bound", f"unavailable ({exc})"))
    else:
        post = normal_gamma_posterior(model)
        lines.append(("posterior_shape", post.shape))
        lines.append(("posterior_rate", post.rate))
        lines.append(("posterior_mean", post.mean_location))
        if args.obs is not None:
            lines.append(("influence", normal_gamma_influence(model, args.obs)))
            lines.append(("sigma_nn", normal_gamma_sigma_nn(model, args.obs)))
    text = "".join(
        f"{key}={format_float(v) if isinstance(v, float) else v}\n" for key, v in lines
    )
    _emit(text, args.output)
    return _EXIT_OK


def _cmd_sample(args) -> int:
    model = _build_model(args)
    kind = _sampler_kind(args)
    cfg = SamplerConfig(
        draws=args.draws,
        seed=args.seed,
        kind=kind,
        step_scale=args.step_scale,
        burn_in=args.burn_in,
    )
    sampler = {
        "normal_exact": sample_normal_exact,
        "metropolis": sample_metropolis,
        "normal_means_exact": sample_normal_means_exact,
        "normal_gamma_exact": sample_normal_gamma_exact,
    }[kind]
    bundle = sampler(model, cfg)
    if args.output == "-":
        write_bundle_csv(sys.stdout, bundle)
    else:
        write_bundle_csv(args.output, bundle)
    if kind == "metropolis":
        r1 = lag1_autocorrelation(bundle.g_values)
        print(f"lag-1 autocorrelation: {r1:.4f}", file=sys.stderr)
    return _EXIT_OK


def _coverage_common(args, experiment) -> int:
    model = _build_model(args)
    kind = _sampler_kind(args)
    sampler_cfg = SamplerConfig(
        draws=args.draws,
        seed=substream_seed(args.seed, 0),
        kind=kind,
        step_scale=getattr(args, "step_scale", None),
        burn_in=getattr(args, "burn_in", 0),
    )
    bootstrap_cfg = BootstrapConfig(
        seed=substream_seed(args.seed, 1),
        B=args.bootstrap_reps,
        L=args.block_length,
        eta=args.eta,
        mode=args.mode,
    )
    alphas = None if args.alphas is None else _parse_alphas(args.alphas, model.n_obs)
    kwargs = dict(
        sampler_cfg=sampler_cfg,
        bootstrap_cfg=bootstrap_cfg,
        alphas=alphas,
        J=args.chains,
        z=args.z,
        threads=args.threads,
    )
    if experiment is soi_coverage_experiment and args.indices is not None:
        kwargs["index_set"] = _int_list(args.indices)
    report = experiment(model, args.qoi, **kwargs)

    if args.figures is not None:
        from .figures import render_coverage_figure

        os.makedirs(args.figures, exist_ok=True)
        filename = (
            "soi_coverage.png" if experiment is soi_coverage_experiment else "coverage.png"
        )
        render_coverage_figure(report.records, args.figures, filename, bootstrap_cfg.eta)

    if args.format == "json":
        doc = {
            "tool_version": __version__,
            "qoi_preset": args.qoi,
            "chains": args.chains,
            "draws_per_chain": report.draws_per_chain,
            "bootstrap": _bootstrap_block(bootstrap_cfg),
            "seed": args.seed,
            "records": [
                {
                    "alpha": rec.alpha,
                    "ground_truth_delta": rec.ground_truth_delta,
                    "coverage_point": rec.coverage_point,
                    "coverage_lb": None if rec.coverage_interval is None else rec.coverage_interval[0],
                    "coverage_ub": None if rec.coverage_interval is None else rec.coverage_interval[1],
                    "selected": list(rec.selected),
                    "note": rec.note,
                }
                for rec in report.records
            ],
            "averaged_influences": [float(v) for v in report.averaged_influences],
        }
        _emit(render_document(doc), args.output)
    else:
        rows = []
        for rec in report.records:
            if rec.coverage_point is None:
                rows.append({"alpha": rec.alpha, "quantity": "note", "value": rec.note})
                continue
            rows.append({"alpha": rec.alpha, "quantity": "ground_truth_delta", "value": rec.ground_truth_delta})
            rows.append({"alpha": rec.alpha, "quantity": "coverage_point", "value": rec.coverage_point})
            rows.append({"alpha": rec.alpha, "quantity": "coverage_lb", "value": rec.coverage_interval[0]})
            rows.append({"alpha": rec.alpha, "quantity": "coverage_ub", "value": rec.coverage_interval[1]})
        _emit(render_table(rows, ["alpha", "quantity", "value"]), args.output)
    return _EXIT_OK


def _cmd_coverage(args) -> int:
    return _coverage_common(args, coverage_experiment)


def _cmd_soi_coverage(args) -> int:
    return _coverage_common(args, soi_coverage_experiment)


def _cmd_interpolate(args) -> int:
    model = _build_model(args)
    qoi = None
    if args.c1 is not None or args.c2 is not None:
        qoi = QoiSpec(
            c1=0.0 if args.c1 is None else args.c1,
            c2=0.0 if args.c2 is None else args.c2,
            z=Z_975 if args.z is None else args.z,
        )
    report = interpolation_experiment(model, qoi=qoi, alpha_star=args.alpha_star)

    if args.figures is not None:
        from .figures import render_interpolation_figure

        os.makedirs(args.figures, exist_ok=True)
        render_interpolation_figure(report, args.figures)

    if args.format == "json":
        doc = {
            "tool_version": __version__,
            "alpha_star": report.alpha_star,
            "dropped": list(report.dropped),
            "zeta_grid": list(report.zeta_grid),
            "refit": list(report.refit),
            "linear": list(report.linear),
        }
        _emit(render_document(doc), args.output)
    else:
        rows = []
        for z, refit, linear in zip(report.zeta_grid, report.refit, report.linear):
            rows.append({"zeta": z, "quantity": "refit", "value": refit})
            rows.append({"zeta": z, "quantity": "linear", "value": linear})
        _emit(render_table(rows, ["zeta", "quantity", "value"]), args.output)
    return _EXIT_OK


def _cmd_cross_check(args) -> int:
    rows = run_cross_checks(seed=args.seed)
    width = max(len(r.name) for r in rows)
    lines = []
    for r in rows:
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{status}  {r.name.ljust(width)}  {r.detail}")
    n_pass = sum(r.passed for r in rows)
    lines.append(f"{n_pass}/{len(rows)} checks passed")
    _emit("\n".join(lines) + "\n", args.output)
    return _EXIT_OK if n_pass == len(rows) else _EXIT_NUMERIC


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def _add_output_args(p, default_format: str) -> None:
    p.add_argument("--output", default="-", help="output file (default: stdout)")
    p.add_argument(
        "--format",
        choices=("csv", "json"),
        default=default_format,
        help=f"output format (default: {default_format})",
    )


def _add_qoi_args(p) -> None:
    p.add_argument("--qoi", choices=("sign", "sig", "both"), help="QoI preset")
    p.add_argument("--c1", type=float, help="custom QoI: coefficient on the posterior mean")
    p.add_argument("--c2", type=float, help="custom QoI: coefficient on the posterior sd")
    p.add_argument("--z", type=float, default=None, help="normal quantile for sig/both (default 1.96)")


def _add_bootstrap_args(p) -> None:
    p.add_argument("--eta", type=float, default=0.95, help="nominal interval level (default 0.95)")
    p.add_argument("--block-length", type=int, default=10, dest="block_length", help="block length L (default 10)")
    p.add_argument("--bootstrap-reps", type=int, default=200, dest="bootstrap_reps", help="replicates B (default 200)")
    p.add_argument("--mode", choices=("iid", "block"), default="block", help="resampling mode (default block)")
    p.add_argument("--seed", type=int, required=True, help="bootstrap seed (required; no environment fallback)")


def _add_model_subparsers(sub, configure) -> None:
    normal = sub.add_parser("normal", help="normal location model with known sigma")
    normal.add_argument("--x", required=True, help="comma-separated observations")
    normal.add_argument("--sigma", type=float, required=True, help="known observation sd")
    normal.set_defaults(model="normal")
    configure(normal)

    means = sub.add_parser("normal-means", help="grouped means model")
    means.add_argument("--x", required=True, help="comma-separated observations")
    means.add_argument("--groups", required=True, help="comma-separated integer group labels")
    means.add_argument("--sigma", type=float, required=True, help="within-group sd")
    means.add_argument("--tau", type=float, required=True, help="between-group sd")
    means.set_defaults(model="normal-means")
    configure(means)

    gamma = sub.add_parser("normal-gamma", help="normal location with gamma precision prior")
    gamma.add_argument("--x", required=True, help="comma-separated observations")
    gamma.add_argument("--prior-shape", type=float, required=True, dest="prior_shape")
    gamma.add_argument("--prior-rate", type=float, required=True, dest="prior_rate")
    gamma.set_defaults(model="normal-gamma")
    configure(gamma)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dropaudit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dropaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("influence", help="estimate per-observation influences from a bundle")
    p.add_argument("bundle", help="draw-bundle CSV file")
    _add_qoi_args(p)
    _add_output_args(p, "csv")
    p.set_defaults(func=_cmd_influence)

    p = sub.add_parser("amip", help="worst-case drop effect per alpha")
    p.add_argument("bundle")
    p.add_argument("--alphas", default="default", help="comma list, start:stop:log10[:count], or 'default'")
    _add_qoi_args(p)
    _add_output_args(p, "csv")
    p.set_defaults(func=_cmd_amip)

    p = sub.add_parser("ci", help="bootstrap confidence interval for one target")
    p.add_argument("bundle")
    p.add_argument("--target", choices=("amip", "soi", "mean"), required=True)
    p.add_argument("--alpha", type=float, help="drop fraction (amip target)")
    p.add_argument("--indices", help="comma-separated 1-based index set (soi target)")
    _add_qoi_args(p)
    _add_bootstrap_args(p)
    _add_output_args(p, "json")
    p.set_defaults(func=_cmd_ci)

    p = sub.add_parser("audit", help="full pipeline: influences, drop effects, intervals, verdicts")
    p.add_argument("bundle")
    p.add_argument("--alpha", type=float, action="append", help="single drop fraction (repeatable)")
    p.add_argument("--alphas", help="comma list, start:stop:log10[:count], or 'default'")
    p.add_argument("--threads", type=int, default=None, help="worker cap; never changes results")
    p.add_argument("--figures", default=None, metavar="DIR", help="also render figures into DIR")
    _add_qoi_args(p)
    _add_bootstrap_args(p)
    _add_output_args(p, "json")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("oracle", help="closed-form posteriors and drop errors")
    model_sub = p.add_subparsers(dest="model", required=True, parser_class=_Parser)

    def _configure_oracle(mp):
        if mp.get_default("model") in ("normal", "normal-means"):
            mp.add_argument("--drop", help="comma-separated 1-based indices to drop")
        else:
            mp.add_argument("--obs", type=int, help="1-based observation for influence and sigma_nn")
        _add_output_args(mp, "csv")
        mp.set_defaults(func=_cmd_oracle)

    _add_model_subparsers(model_sub, _configure_oracle)

    p = sub.add_parser("sample", help="draw a bundle from a conjugate model and write it as CSV")
    model_sub = p.add_subparsers(dest="model", required=True, parser_class=_Parser)

    def _configure_sample(mp):
        mp.add_argument("--draws", type=int, required=True, help="number of draws S")
        mp.add_argument("--seed", type=int, required=True)
        if mp.get_default("model") == "normal":
            mp.add_argument("--sampler", choices=("exact", "metropolis"), default="exact")
            mp.add_argument("--step-scale", type=float, default=None, dest="step_scale")
            mp.add_argument("--burn-in", type=int, default=0, dest="burn_in")
        else:
            mp.set_defaults(sampler="exact", step_scale=None, burn_in=0)
        mp.add_argument("--output", default="-", help="bundle CSV path (default: stdout)")
        mp.set_defaults(func=_cmd_sample)

    _add_model_subparsers(model_sub, _configure_sample)

    for name, handler in (("coverage", _cmd_coverage), ("soi-coverage", _cmd_soi_coverage)):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} experiment on a conjugate model")
        model_sub = p.add_subparsers(dest="model", required=True, parser_class=_Parser)

        def _configure_coverage(mp, handler=handler, name=name):
            mp.add_argument("--qoi", choices=("sign", "sig", "both"), required=True)
            mp.add_argument("--z", type=float, default=None)
            mp.add_argument("--alphas", default=None, help="defaults to the 10-point grid plus 1/N")
            mp.add_argument("--chains", type=int, default=200, help="independent chains J (default 200)")
            mp.add_argument("--draws", type=int, default=2000, help="draws per chain (default 2000)")
            mp.add_argument("--threads", type=int, default=None, help="worker cap; never changes results")
            mp.add_argument("--figures", default=None, metavar="DIR")
            if mp.get_default("model") == "normal":
                mp.add_argument("--sampler", choices=("exact", "metropolis"), default="exact")
                mp.add_argument("--step-scale", type=float, default=None, dest="step_scale")
                mp.add_argument("--burn-in", type=int, default=0, dest="burn_in")
            if name == "soi-coverage":
                mp.add_argument("--indices", default=None, help="fixed 1-based index set to audit at every alpha")
            _add_bootstrap_args(mp)
            _add_output_args(mp, "csv")
            mp.set_defaults(func=handler)

        _add_model_subparsers(model_sub, _configure_coverage)

    p = sub.add_parser("interpolate", help="exact refit vs linear prediction along the drop path")
    model_sub = p.add_subparsers(dest="model", required=True, parser_class=_Parser)

    def _configure_interpolate(mp):
        mp.add_argument("--alpha-star", type=float, default=0.05, dest="alpha_star")
        mp.add_argument("--c1", type=float, default=None, help="custom QoI (default: posterior mean)")
        mp.add_argument("--c2", type=float, default=None)
        mp.add_argument("--z", type=float, default=None)
        mp.add_argument("--figures", default=None, metavar="DIR")
        _add_output_args(mp, "csv")
        mp.set_defaults(func=_cmd_interpolate)

    _add_model_subparsers(model_sub, _configure_interpolate)

    p = sub.add_parser("cross-check", help="run every oracle-vs-estimator comparison")
    p.add_argument("--seed", type=int, default=0)
    _add_output_args(p, "csv")
    p.set_defaults(func=_cmd_cross_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"dropaudit: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except NumericalError as exc:
        print(f"dropaudit: numeric failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC
    except OSError as exc:
        print(f"dropaudit: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

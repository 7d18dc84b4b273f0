"""Command-line interface: rdlab calibrate|sample|plot|lineup|infer|montecarlo|serve|aggregate."""

from __future__ import annotations

import argparse
import json
import sys

from . import montecarlo
from .dgp import (
    Dgp,
    read_dataset_csv,
    read_microdata_csv,
    sample_dataset,
)
from .econometrics import rot_second_derivative_bound
from .plotting import GraphicalParams, render_lineup, render_rd_plot


def _load_dgp(path: str) -> Dgp:
    with open(path, "r", encoding="utf-8") as fh:
        return Dgp.from_json(fh.read())


def cmd_calibrate(args) -> int:
    micro = read_microdata_csv(args.input, args.cutoff, args.semi_discrete)
    from .dgp import calibrate_dgp

    cef_kind = {"quintic": "piecewise_quintic", "local-linear": "local_linear"}[args.cef]
    noise = {"homoskedastic": "homoskedastic", "fan-yao": "fan_yao"}[args.noise]
    dgp = calibrate_dgp(
        micro, cef_kind=cef_kind, noise_model=noise, seed=args.seed,
        source_name=args.input,
        normalization="single" if args.single_scale else "per_side",
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dgp.to_json(indent=2))
    diag = {
        "dgp_id": dgp.dgp_id,
        "n": dgp.n,
        "sigma": dgp.sigma,
        "variance_ratio": dgp.variance_ratio(),
    }
    print(json.dumps(diag))
    return 0


def cmd_sample(args) -> int:
    dgp = _load_dgp(args.dgp)
    ds = sample_dataset(dgp, args.d, args.seed)
    out = ds.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return 0


def _gamma_from_args(args) -> GraphicalParams:
    fit_order = None
    if args.fit_lines:
        fit_order = args.fit_order if args.fit_order is not None else 4
    return GraphicalParams(
        bin_selector=args.bins,
        spacing=args.spacing,
        fit_line_order=fit_order,
        vertical_line=args.vline,
        y_scale=args.yscale,
    )


def cmd_plot(args) -> int:
    ds = read_dataset_csv(args.input)
    graph = render_rd_plot(ds, _gamma_from_args(args))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(graph.svg)
    print(json.dumps(graph.summary))
    return 0


def cmd_lineup(args) -> int:
    dgp = _load_dgp(args.dgp)
    ds = read_dataset_csv(args.input)
    svg, answer = render_lineup(ds, dgp, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    answer_doc = {"row": answer[0], "col": answer[1]}
    if args.answer_out:
        with open(args.answer_out, "w", encoding="utf-8") as fh:
            json.dump(answer_doc, fh)
    else:
        print(json.dumps(answer_doc))
    return 0


def cmd_infer(args) -> int:
    ds = read_dataset_csv(args.input)
    c_t = None
    if args.method == "ak":
        c_t = (
            rot_second_derivative_bound(ds)
            if args.ct in (None, "auto")
            else float(args.ct)
        )
    if args.method == "ik" and args.crit is not None:
        from .econometrics import ik_test

        result = ik_test(ds, level=args.level, critical_value=args.crit)
    else:
        result = montecarlo.run_method(args.method, ds, level=args.level, c_t=c_t)
    print(json.dumps(result.to_dict()))
    return 0


def cmd_montecarlo(args) -> int:
    dgp = _load_dgp(args.dgp)
    out = montecarlo.simulate_tests(
        dgp, args.method, args.d, args.reps, args.seed, level=args.level
    )
    del out["estimates"], out["t_stats"]
    print(json.dumps(out))
    return 0


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib  # python >= 3.11
        except ImportError:  # pragma: no cover
            try:
                import tomli as tomllib
            except ImportError:
                raise SystemExit("TOML support needs python>=3.11 or tomli; use JSON")
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _demo_study(master_seed: int, participants: int = 3):
    """A small two-arm study over eleven synthetic DGPs."""
    from .experiment import Payment, StudyConfig, create_study
    from .synthetic import example_dgp

    kinds = ["flat", "linear", "mild", "curved", "skewed"]
    dgps = [
        example_dgp(kinds[i % len(kinds)], n=150, seed=100 + i) for i in range(11)
    ]
    config = StudyConfig(
        arms=(
            GraphicalParams(bin_selector="mv", spacing="even"),
            GraphicalParams(bin_selector="imse", spacing="even"),
        ),
        dgp_ids=tuple(d.dgp_id for d in dgps),
        participants_per_arm=participants,
        payment=Payment(),
        magnitude_elicitation=False,
    )
    return create_study(config, master_seed, dgps)


def build_serve_host(args):
    """Resolve the study host for `serve` (also used by tests directly)."""
    from .experiment import StudyHost

    if args.demo:
        host = StudyHost()
        study = _demo_study(args.master_seed, participants=args.demo_participants)
        host.add(study)
        print(json.dumps({"study_id": study.study_id, "pool_size": len(study.pool)}),
              flush=True)
        return host
    if args.config:
        from .experiment import EventLog, StudyConfig, create_study

        doc = _load_config_file(args.config)
        dgps = [_load_dgp(p) for p in doc["dgp_files"]]
        config = StudyConfig.from_dict(
            {**doc, "dgp_ids": doc.get("dgp_ids") or [d.dgp_id for d in dgps]}
        )
        log = EventLog(args.events) if args.events else None
        host = StudyHost()
        study = create_study(config, doc.get("master_seed", args.master_seed), dgps, log=log)
        host.add(study)
        print(json.dumps({"study_id": study.study_id, "pool_size": len(study.pool)}),
              flush=True)
        return host
    if args.events:
        host = StudyHost.load_from_events(args.events)
        for sid in host.studies:
            print(json.dumps({"study_id": sid}), flush=True)
        return host
    raise SystemExit("serve needs --demo, --config, or --events")


def _listen_address(args) -> tuple[str, int]:
    """CLI flags win; otherwise the RDLAB_LISTEN env var (host:port)."""
    import os

    host, port = args.host, args.port
    env = os.environ.get("RDLAB_LISTEN")
    if env:
        env_host, _, env_port = env.rpartition(":")
        if host is None:
            host = env_host or "127.0.0.1"
        if port is None and env_port:
            port = int(env_port)
    return host or "127.0.0.1", port if port is not None else 8765


def cmd_serve(args) -> int:
    import uvicorn

    from .experiment import create_app

    host_obj = build_serve_host(args)
    app = create_app(host_obj)
    listen_host, listen_port = _listen_address(args)
    uvicorn.run(app, host=listen_host, port=listen_port, log_level="warning")
    return 0


def cmd_aggregate(args) -> int:
    from .experiment import StudyHost

    host = StudyHost.load_from_events(args.events)
    for study in host.studies.values():
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(study.export_csv())
        print(json.dumps(study.aggregate()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="calibrate a DGP from microdata CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--cutoff", type=float, required=True)
    p.add_argument("--semi-discrete", action="store_true", dest="semi_discrete")
    p.add_argument("--cef", choices=["quintic", "local-linear"], default="quintic")
    p.add_argument("--noise", choices=["homoskedastic", "fan-yao"], default="homoskedastic")
    p.add_argument("--single-scale", action="store_true", dest="single_scale",
                   help="normalize both sides by one shared factor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sample", help="sample a dataset from a DGP")
    p.add_argument("--dgp", required=True)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("plot", help="render an RD binned scatter plot")
    p.add_argument("--input", required=True)
    p.add_argument("--bins", choices=["imse", "mv"], default="mv")
    p.add_argument("--spacing", choices=["even", "quantile"], default="even")
    p.add_argument("--fit-lines", action="store_true", dest="fit_lines")
    p.add_argument("--fit-order", type=int, default=None, dest="fit_order")
    p.add_argument("--vline", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--yscale", choices=["default", "doubled"], default="default")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("lineup", help="hide real data among null simulations")
    p.add_argument("--dgp", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--answer-out", dest="answer_out")
    p.set_defaults(func=cmd_lineup)

    p = sub.add_parser("infer", help="run a discontinuity test on a dataset CSV")
    p.add_argument("--method", choices=["pq", "ik", "cct", "ak"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--ct", default=None, help="AK curvature bound or 'auto'")
    p.add_argument("--crit", type=float, default=None,
                   help="override critical t-value (ik)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("montecarlo", help="simulate a test's rejection rate")
    p.add_argument("--dgp", required=True)
    p.add_argument("--method", choices=["pq", "ik", "cct", "ak"], required=True)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.05)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("serve", help="run the experiment HTTP service")
    p.add_argument("--config", help="study config JSON/TOML")
    p.add_argument("--events", help="event log path (JSON lines)")
    p.add_argument("--demo", action="store_true", help="serve a small demo study")
    p.add_argument("--demo-participants", type=int, default=3)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--host", default=None,
                   help="listen host (default RDLAB_LISTEN or 127.0.0.1)")
    p.add_argument("--port", type=int, default=None,
                   help="listen port (default RDLAB_LISTEN or 8765)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("aggregate", help="aggregate results from an event log")
    p.add_argument("--events", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_aggregate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

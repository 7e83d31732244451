"""Command-line front end.

A thin client over the embedding service: flags are packed into request
models and posted either to an in-process application instance (default) or
to a remote server given with --server. Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import httpx


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=300.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # starlette warns about its httpx-based TestClient
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(server: str | None, path: str, payload: dict) -> dict:
    try:
        with _client(server) as client:
            resp = client.post(path, json=payload)
    except httpx.HTTPError as e:
        raise click.ClickException(f"cannot reach service: {e}")
    if resp.status_code == 400:
        body = resp.json()
        raise click.ClickException(f"{body.get('error')}: {body.get('detail')}")
    if resp.status_code == 422:
        raise click.UsageError(f"invalid request: {resp.text}")
    if resp.status_code != 200:
        raise click.ClickException(f"service returned {resp.status_code}: {resp.text}")
    return resp.json()


def _read_predictor(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise click.UsageError(f"cannot read predictor file: {e}")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise click.ClickException(f"ParseError: {path} is not valid JSON ({e})")
    if not isinstance(obj, dict):
        raise click.ClickException(f"ParseError: {path} must hold a JSON object")
    return obj


def _read_inputs(spec: str):
    """Either an input count or a path to a JSON file of [lo, hi] pairs."""
    try:
        return int(spec)
    except ValueError:
        pass
    try:
        text = Path(spec).read_text()
    except OSError as e:
        raise click.UsageError(f"--inputs must be a count or a readable bounds file: {e}")
    try:
        pairs = json.loads(text)
    except json.JSONDecodeError as e:
        raise click.ClickException(f"ParseError: bounds file {spec} is not valid JSON ({e})")
    return pairs


def _comma_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise click.UsageError(f"{flag} expects a comma-separated list of numbers, got {text!r}")


_server_option = click.option("--server", default=None, metavar="URL", help="Remote service URL (defaults to in-process).")
_formulation_option = click.option(
    "--formulation", type=click.Choice(["full", "reduced", "graybox"]), default="full"
)
_relu_option = click.option(
    "--relu", type=click.Choice(["nonsmooth", "bigm", "sos1", "quadratic"]), default="nonsmooth"
)


@click.group()
def main() -> None:
    """Embed trained predictors into optimization models."""


@main.command()
@click.option("--predictor", "predictor_path", required=True, metavar="PATH")
@click.option("--inputs", "inputs_spec", required=True, metavar="N|BOUNDS_FILE")
@_formulation_option
@_relu_option
@click.option("--out", "out_path", required=True, metavar="PATH")
@click.option("--format", "fmt", type=click.Choice(["lp", "json"]), default="json")
@click.option("--no-hessian", is_flag=True, help="Register gray-box oracles without Hessians.")
@_server_option
def embed(predictor_path, inputs_spec, formulation, relu, out_path, fmt, no_hessian, server):
    """Embed a predictor and write the model artifact."""
    data = _post(
        server,
        "/embed",
        {
            "predictor": _read_predictor(predictor_path),
            "inputs": _read_inputs(inputs_spec),
            "formulation": formulation,
            "relu": relu,
            "format": fmt,
            "with_hessian": not no_hessian,
        },
    )
    Path(out_path).write_text(data["artifact"])
    click.echo(f"vars={data['vars']} cons={data['cons']} outputs={data['outputs']}")


@main.command()
@click.option("--predictor", "predictor_path", required=True, metavar="PATH")
@click.option("--inputs", "inputs_spec", required=True, metavar="N|BOUNDS_FILE")
@_formulation_option
@_relu_option
@click.option("--samples", type=int, default=100, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_server_option
@click.pass_context
def check(ctx, predictor_path, inputs_spec, formulation, relu, samples, tol, seed, server):
    """Verify witness feasibility and output agreement on sampled points."""
    data = _post(
        server,
        "/check",
        {
            "predictor": _read_predictor(predictor_path),
            "inputs": _read_inputs(inputs_spec),
            "formulation": formulation,
            "relu": relu,
            "samples": samples,
            "tol": tol,
            "seed": seed,
        },
    )
    click.echo(f"max_violation={_fmt(data['max_violation'])}")
    click.echo(f"max_output_error={_fmt(data['max_output_error'])}")
    if not data["ok"]:
        ctx.exit(1)


@main.command()
@click.option("--predictor", "predictor_path", required=True, metavar="PATH")
@click.option("--inputs", "inputs_spec", required=True, metavar="N|BOUNDS_FILE")
@_server_option
def bounds(predictor_path, inputs_spec, server):
    """Print propagated output intervals, one line per output."""
    data = _post(
        server,
        "/bounds",
        {"predictor": _read_predictor(predictor_path), "inputs": _read_inputs(inputs_spec)},
    )
    for lo, hi in data["intervals"]:
        click.echo(f"[{_fmt(lo)}, {_fmt(hi)}]")


@main.command()
@click.option("--predictor", "predictor_path", required=True, metavar="PATH")
@click.option("--x", "x_spec", required=True, metavar="V1,V2,...")
@click.option("--eval", "do_eval", is_flag=True)
@click.option("--jac", "do_jac", is_flag=True)
@click.option("--hess", "do_hess", is_flag=True)
@click.option("--lambda", "lam_spec", default=None, metavar="L1,L2,...")
@_server_option
def oracle(predictor_path, x_spec, do_eval, do_jac, do_hess, lam_spec, server):
    """Evaluate the gray-box oracle: value, Jacobian, or Hessian-of-Lagrangian."""
    picked = [m for m, on in (("eval", do_eval), ("jac", do_jac), ("hess", do_hess)) if on]
    if len(picked) != 1:
        raise click.UsageError("pass exactly one of --eval, --jac, --hess")
    mode = picked[0]
    if mode == "hess" and lam_spec is None:
        raise click.UsageError("--hess requires --lambda")
    payload = {
        "predictor": _read_predictor(predictor_path),
        "x": _comma_floats(x_spec, "--x"),
        "mode": mode,
    }
    if lam_spec is not None:
        payload["lam"] = _comma_floats(lam_spec, "--lambda")
    data = _post(server, "/oracle", payload)
    for row in data["rows"]:
        click.echo(" ".join(_fmt(v) for v in row))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve(host, port):
    """Run the embedding service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()

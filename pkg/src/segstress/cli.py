"""`segstress` command line: a thin client of the workbench API.

With --server (or SEGSTRESS_SERVER) requests go to a running service;
otherwise the service is instantiated in-process and driven through its
ASGI interface, so every command takes the same path through request
validation and routing either way.  `segstress serve` runs the service
for multi-client use.
"""
from __future__ import annotations

import json
import shlex
import sys
import time

import click
import httpx


class ApiClient:
    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from starlette.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        return self._unwrap(resp)

    def get(self, path: str) -> dict | list:
        return self._unwrap(self._client.get(path))

    @staticmethod
    def _unwrap(resp: httpx.Response) -> dict:
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except Exception:
                detail = resp.text
            raise click.ClickException(f"API error {resp.status_code}: {detail}")
        return resp.json()


pass_client = click.make_pass_decorator(ApiClient)


@click.group()
@click.option(
    "--server",
    envvar="SEGSTRESS_SERVER",
    default=None,
    help="Workbench service URL; omit to run the service in-process.",
)
@click.pass_context
def main(ctx, server):
    """Segmentation-robustness workbench."""
    if ctx.invoked_subcommand != "serve":
        ctx.obj = ApiClient(server)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8237, show_default=True)
def serve(host, port):
    """Run the workbench API server."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--n-images", default=200, show_default=True)
@click.option("--width", default=128, show_default=True)
@click.option("--height", default=128, show_default=True)
@click.option("--n-cells", default=30, show_default=True)
@click.option("--radius-min", default=3.0, show_default=True)
@click.option("--radius-max", default=6.0, show_default=True)
@click.option("--contrast", default=1.0, show_default=True)
@click.option("--noise-sigma", default=0.0, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--name", default="synthetic", show_default=True)
@pass_client
def synth(client, out_dir, n_images, width, height, n_cells, radius_min, radius_max,
          contrast, noise_sigma, seed, name):
    """Generate a synthetic dataset (tensor files + manifest)."""
    resp = client.post(
        "/synth/generate",
        {
            "out_dir": out_dir,
            "n_images": n_images,
            "width": width,
            "height": height,
            "n_cells": n_cells,
            "radius_min": radius_min,
            "radius_max": radius_max,
            "contrast": contrast,
            "noise_sigma": noise_sigma,
            "seed": seed,
            "name": name,
        },
    )
    click.echo(
        f"wrote {resp['n_images']} images ({resp['total_cells']} cells) -> "
        f"{resp['manifest_path']}"
    )


@main.command()
@click.option("--in", "mask_in", required=True, type=click.Path(exists=True))
@click.option("--out", "mask_out", required=True, type=click.Path())
@click.option("--missing", default=0.0, show_default=True, help="Fraction of cells to erase.")
@click.option("--kmax", default=0, show_default=True, help="Kernel pool cap (0/3/5/7/9).")
@click.option("--seed", default=42, show_default=True)
@click.option("--connectivity", default=8, show_default=True)
@click.option("--relabel", is_flag=True, help="Run connected-component labelling first.")
@pass_client
def corrupt(client, mask_in, mask_out, missing, kmax, seed, connectivity, relabel):
    """Corrupt an instance mask: erase cells, then erode/dilate survivors."""
    resp = client.post(
        "/corruption/apply",
        {
            "mask_in": mask_in,
            "mask_out": mask_out,
            "missing_fraction": missing,
            "k_max": kmax,
            "seed": seed,
            "connectivity": connectivity,
            "relabel": relabel,
        },
    )
    click.echo(
        f"{resp['cells_before']} cells -> {resp['cells_after']} cells; wrote "
        f"{resp['mask_out']}"
    )


@main.command()
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--threshold", default=0.5, show_default=True)
@pass_client
def evaluate(client, pred_dir, gt_dir, out_csv, threshold):
    """Per-image metrics for a directory of predictions vs ground truth."""
    resp = client.post(
        "/metrics/evaluate",
        {"pred_dir": pred_dir, "gt_dir": gt_dir, "out_csv": out_csv,
         "threshold": threshold},
    )
    mean = ", ".join(f"{k}={v:.3f}" for k, v in resp["mean"].items())
    click.echo(f"{resp['n_images']} images; mean {mean}; wrote {resp['out_csv']}")


@main.command()
@click.option("--results", "results_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@pass_client
def report(client, results_dir, out_dir):
    """Render tables and SVG figures for an experiment directory."""
    resp = client.post("/report/render", {"results_dir": results_dir, "out_dir": out_dir})
    for f in resp["files"]:
        click.echo(f)


@main.command("validate-segmenter")
@click.option("--cmd", required=True, help="Segmenter command (quoted, shell-style).")
@click.option("--workdir", required=True, type=click.Path())
@click.option("--n-patches", default=64, show_default=True)
@click.option("--channels", default=6, show_default=True)
@click.option("--patch-size", default=128, show_default=True)
@click.option("--epochs", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--timeout", "timeout_s", default=3600.0, show_default=True)
@pass_client
def validate_segmenter_cmd(client, cmd, workdir, n_patches, channels, patch_size,
                           epochs, seed, timeout_s):
    """Protocol conformance check for any segmenter command."""
    resp = client.post(
        "/segmenters/validate",
        {
            "cmd": shlex.split(cmd),
            "workdir": workdir,
            "n_patches": n_patches,
            "channels": channels,
            "patch_size": patch_size,
            "epochs": epochs,
            "seed": seed,
            "timeout_s": timeout_s,
        },
    )
    if not resp["ok"]:
        raise click.ClickException(f"protocol violation: {resp['report'].get('error')}")
    click.echo(json.dumps(resp["report"], indent=2))


def _run_experiment(client: ApiClient, kind: str, config_path: str, out_dir: str,
                    wait: bool, poll_interval: float):
    config = json.loads(open(config_path).read())
    job = client.post(f"/experiments/{kind}", {"config": config, "out_dir": out_dir})
    click.echo(f"job {job['job_id']} submitted ({kind})")
    if not wait:
        return
    while True:
        job = client.get(f"/jobs/{job['job_id']}")
        if job["state"] in ("done", "failed"):
            break
        time.sleep(poll_interval)
    if job["state"] == "failed":
        raise click.ClickException(f"experiment failed:\n{job['error']}")
    click.echo(f"done; results in {job['out_dir']}")
    summary = job.get("summary") or {}
    if kind in ("sweep-mc", "sweep-uo"):
        for p in summary.get("points", []):
            label = p.get("label", p["point"])
            click.echo(f"  {label}: dsc={p['aggregate']['dsc']:.3f}")
    elif kind == "transfer":
        for level in summary.get("levels", []):
            d = level["deltas"]["dsc"]["delta"]
            click.echo(f"  missing={level['fraction']:.0%}: ddsc={d:+.3f}")
    elif kind == "bootstrap":
        click.echo(
            f"  initial dsc={summary.get('initial_dsc', float('nan')):.3f} "
            f"best={summary.get('best_dsc', float('nan')):.3f} "
            f"(iteration {summary.get('best_iteration')})"
        )


_EXPERIMENT_HELP = {
    "sweep-mc": "Missing-cell corruption sweep (train per fraction, test pristine).",
    "sweep-uo": "Under/over-segmentation sweep over kernel caps.",
    "transfer": "Single- vs multi-dataset training, evaluated on the second dataset.",
    "bootstrap": "Iterative self-training from heavily corrupted ground truth.",
}


def _experiment_command(kind: str):
    @main.command(kind, help=_EXPERIMENT_HELP[kind])
    @click.option("--config", "config_path", required=True, type=click.Path(exists=True))
    @click.option("--out", "out_dir", required=True, type=click.Path())
    @click.option("--no-wait", is_flag=True, help="Submit and return the job id.")
    @click.option("--poll-interval", default=2.0, show_default=True)
    @pass_client
    def _cmd(client, config_path, out_dir, no_wait, poll_interval):
        _run_experiment(client, kind, config_path, out_dir, not no_wait, poll_interval)

    _cmd.__name__ = kind.replace("-", "_")
    return _cmd


sweep_mc = _experiment_command("sweep-mc")
sweep_uo = _experiment_command("sweep-uo")
transfer = _experiment_command("transfer")
bootstrap = _experiment_command("bootstrap")


@main.command()
@click.argument("job_id", required=False)
@pass_client
def jobs(client, job_id):
    """List jobs, or show one job's state."""
    if job_id:
        click.echo(json.dumps(client.get(f"/jobs/{job_id}"), indent=2))
    else:
        for job in client.get("/jobs"):
            click.echo(f"{job['job_id']}  {job['kind']:<10} {job['state']:<8} {job['out_dir']}")


if __name__ == "__main__":
    sys.exit(main())

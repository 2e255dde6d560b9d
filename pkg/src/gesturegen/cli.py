"""Command-line client.

Every command is a thin HTTP call against the service app: in-process by
default, or a remote instance via --server. Set DIM_GESTURE_THREADS to cap
file-level parallelism during prepare/eval.
"""

from __future__ import annotations

import json
import sys

import click
import httpx

from . import __version__


def _post_in_process(path: str, payload: dict) -> httpx.Response:
    """Serve the request against the app directly; no socket, no server."""
    import asyncio

    from .service import create_app

    async def call():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, timeout=None,
                                     base_url="http://gesturegen") as client:
            return await client.post(path, json=payload)

    return asyncio.run(call())


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server is None:
        response = _post_in_process(path, payload)
    else:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            body = response.json()
            message = f"{body.get('error', 'error')}: {body.get('detail', body)}"
        except ValueError:
            message = response.text.strip()
        click.echo(f"error: {message}", err=True)
        sys.exit(1)
    return response.json()


@click.group()
@click.version_option(__version__)
@click.option("--server", default=None, metavar="URL",
              help="Base URL of a running service; default is in-process.")
@click.pass_context
def main(ctx, server):
    """Speech-driven gesture generation toolkit."""
    ctx.obj = server


@main.command()
@click.option("--bvh-dir", required=True, help="Directory of .bvh files.")
@click.option("--wav-dir", required=True, help="Directory of stem-paired .wav files.")
@click.option("--out", "out_dir", required=True, help="Output corpus directory.")
@click.option("--clip-s", default=20.0, show_default=True, help="Clip length in seconds.")
@click.option("--fps", default=20, show_default=True, help="Target gesture frame rate.")
@click.option("--sample-rate", default=16000, show_default=True)
@click.pass_obj
def prepare(server, bvh_dir, wav_dir, out_dir, clip_s, fps, sample_rate):
    """Convert a paired BVH/WAV corpus into training clips."""
    data = _post(server, "/prepare", {
        "bvh_dir": bvh_dir, "wav_dir": wav_dir, "out_dir": out_dir,
        "clip_s": clip_s, "fps": fps, "sample_rate": sample_rate})
    for message in data["skipped"]:
        click.echo(f"warning: {message}", err=True)
    click.echo(f"prepared {data['clips']} clips -> {data['manifest_path']}")


@main.command()
@click.option("--config", "config_path", default=None,
              help="JSON config file; defaults apply when omitted.")
@click.option("--data-dir", required=True, help="Prepared corpus directory.")
@click.option("--out", "out_dir", required=True, help="Run output directory.")
@click.option("--resume-from", default=None, help="Checkpoint to continue from.")
@click.pass_obj
def train(server, config_path, data_dir, out_dir, resume_from):
    """Train the diffusion model on a prepared corpus."""
    payload = {"data_dir": data_dir, "out_dir": out_dir,
               "resume_from": resume_from}
    if config_path is not None:
        try:
            payload["config"] = json.loads(open(config_path).read())
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: ConfigError: {config_path}: {exc}", err=True)
            sys.exit(1)
    data = _post(server, "/train", payload)
    click.echo(f"trained {data['steps']} steps, final loss "
               f"{data['final_loss']:.6f}")
    click.echo(f"checkpoint: {data['checkpoint_path']}")
    click.echo(f"loss log: {data['csv_path']}")


@main.command()
@click.option("--checkpoint", required=True, help="Checkpoint file from train.")
@click.option("--wav", default=None, help="Speech audio to condition on.")
@click.option("--features", default=None,
              help="DIMF feature file standing in for the wav.")
@click.option("--out", "out_path", required=True, help="Output .bvh path.")
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def sample(server, checkpoint, wav, features, out_path, seed):
    """Generate a full-sequence gesture BVH from raw audio."""
    data = _post(server, "/sample", {
        "checkpoint": checkpoint, "wav": wav, "features": features,
        "out_path": out_path, "seed": seed})
    if data["resampled"]:
        click.echo("notice: audio was resampled to the model rate", err=True)
    click.echo(f"wrote {data['frames']} frames at {data['fps']} fps "
               f"-> {data['out_path']}")


@main.command("eval")
@click.option("--real-dir", required=True, help="Directory of reference .dimg clips.")
@click.option("--gen-dir", required=True, help="Directory of generated .dimg clips.")
@click.option("--wav-dir", default=None,
              help="Stem-paired wavs for BeatAlign; omitted skips the metric.")
@click.option("--out-csv", default=None, help="Write the report CSV here.")
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.pass_obj
def eval_cmd(server, real_dir, gen_dir, wav_dir, out_csv, config_path):
    """Objective metrics between two clip directories."""
    data = _post(server, "/eval", {
        "real_dir": real_dir, "gen_dir": gen_dir, "wav_dir": wav_dir,
        "out_csv": out_csv, "config_path": config_path})
    click.echo(f"fgd_raw {data['fgd_raw']:.4f}")
    click.echo(f"fgd_feature {data['fgd_feature']:.4f}")
    if data["beat_align"] is not None:
        click.echo(f"beat_align {data['beat_align']:.2f}")
    if data.get("report_path"):
        click.echo(f"report: {data['report_path']}")


@main.command()
@click.option("--variant", default="mamba2", show_default=True,
              type=click.Choice(["mamba2", "mamba1", "convse", "attention"]))
@click.option("--lengths", default="200,400,800,1600", show_default=True,
              help="Comma-separated sequence lengths.")
@click.option("--repeats", default=5, show_default=True)
@click.option("--no-sampling", is_flag=True,
              help="Skip the sampling-loop timing, report forward only.")
@click.option("--out-csv", default=None, help="Write timings CSV here.")
@click.pass_obj
def bench(server, variant, lengths, repeats, no_sampling, out_csv):
    """Parameter count and wall-clock scaling for a model variant."""
    try:
        length_list = [int(part) for part in lengths.split(",") if part]
    except ValueError:
        click.echo(f"error: ConfigError: bad --lengths {lengths!r}", err=True)
        sys.exit(1)
    data = _post(server, "/bench", {
        "variant": variant, "lengths": length_list, "repeats": repeats,
        "include_sampling": not no_sampling, "out_csv": out_csv})
    rows = data["rows"]
    if rows:
        click.echo(f"{variant}: {rows[0]['parameters']} parameters")
    for row in rows:
        sample_part = ("" if row["sample_ms"] is None
                       else f"  sample {row['sample_ms']:.1f} ms")
        click.echo(f"L={row['length']:>5}  forward {row['forward_ms']:.1f} ms"
                   + sample_part)


@main.command("export-features")
@click.option("--check", "check_path", default=None, metavar="FILE",
              help="Validate a DIMF feature file.")
@click.pass_obj
def export_features(server, check_path):
    """Validate DIMF feature files (exporting runs in the companion tool)."""
    if check_path is None:
        click.echo("error: ConfigError: feature export runs in the companion "
                   "exporter package; use --check FILE to validate DIMF files",
                   err=True)
        sys.exit(2)
    data = _post(server, "/features/check", {"path": check_path})
    click.echo(f"{check_path}: ok ({data['frames']} frames x "
               f"{data['channels']} channels at {data['frame_rate_hz']:g} Hz)")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()

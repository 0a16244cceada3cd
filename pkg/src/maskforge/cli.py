"""Command-line entry points: serve the annotation UI backend, run SLIC in
batch over a directory, and validate mask/checkpoint integrity."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .errors import MaskForgeError
from .persistence import (
    SUPPORTED_EXTENSIONS,
    load_image,
    load_masks,
    read_checkpoint,
)
from .superpixel import SlicParams, compute_slic


@click.group()
def main():
    """Image annotation engine: per-class binary masks over an image folder."""


@main.command()
@click.option("--dir", "root_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--classes", required=True,
              help="Comma-separated class names, e.g. 'defect,scratch'.")
@click.option("--bind", default="127.0.0.1:8000", show_default=True,
              help="HOST:PORT to listen on.")
@click.option("--masks-dir", default=None, type=click.Path(file_okay=False),
              help="Write masks/checkpoint here instead of next to the images.")
def serve(root_dir, classes, bind, masks_dir):
    """Serve the HTTP annotation API over an image directory."""
    from .service import serve as run_service

    names = [c.strip() for c in classes.split(",") if c.strip()]
    if not names:
        raise click.BadParameter("need at least one class name", param_hint="--classes")
    try:
        run_service(root_dir, names, bind_address=bind, masks_dir=masks_dir)
    except MaskForgeError as e:
        raise click.ClickException(f"{e.code}: {e}")


def _images_in(directory: Path) -> list[Path]:
    return sorted(
        (p for p in directory.iterdir()
         if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS),
        key=lambda p: p.name,
    )


@main.command("batch-slic")
@click.option("--dir", "root_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--k", default=200, show_default=True, help="Superpixel count.")
@click.option("--m", default=10.0, show_default=True, help="Compactness.")
@click.option("--iters", default=10, show_default=True, help="Iterations.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def batch_slic(root_dir, k, m, iters, out_dir):
    """Compute SLIC labels for every image; one 16-bit PNG per image."""
    root = Path(root_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = _images_in(root)
    if not images:
        raise click.ClickException(f"no supported images in {root}")
    failures = 0
    for path in images:
        try:
            record = load_image(path)
            spmap = compute_slic(record, SlicParams(k=k, m=m, iterations=iters))
            if spmap.region_count > 65535:
                raise MaskForgeError("more than 65535 regions")
            target = out / f"{path.stem}__slic.png"
            labels = spmap.labels.astype(np.uint16)
            Image.fromarray(labels).save(target, format="PNG")
            click.echo(f"{path.name}: {spmap.region_count} regions -> {target.name}")
        except MaskForgeError as e:
            failures += 1
            click.echo(f"{path.name}: FAILED ({e})", err=True)
    if failures:
        sys.exit(1)


@main.command()
@click.option("--dir", "root_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
def validate(root_dir):
    """Check mask files and the checkpoint for integrity."""
    root = Path(root_dir)
    problems = 0

    try:
        cp = read_checkpoint(root)
    except MaskForgeError as e:
        click.echo(f"checkpoint: FAILED ({e})", err=True)
        cp = None
        problems += 1
    else:
        if cp is None:
            click.echo("checkpoint: absent")
        else:
            click.echo(f"checkpoint: ok ({cp.completed_count} completed)")

    images = _images_in(root)
    names = {p.name for p in images}
    if cp is not None:
        for done in cp.completed:
            if done not in names:
                click.echo(f"checkpoint: completed image {done!r} missing from folder",
                           err=True)
                problems += 1

    for path in images:
        try:
            record = load_image(path)
            masks = load_masks(path.stem, (record.width, record.height), root)
        except MaskForgeError as e:
            click.echo(f"{path.name}: FAILED ({e})", err=True)
            problems += 1
            continue
        if masks.layers:
            classes = ", ".join(sorted(masks.layers))
            click.echo(f"{path.name}: ok ({len(masks.layers)} masks: {classes})")
        else:
            click.echo(f"{path.name}: ok (no masks)")

    if problems:
        click.echo(f"{problems} problem(s) found", err=True)
        sys.exit(1)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()

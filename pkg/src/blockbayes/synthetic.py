"""Procedural grayscale face corpus laid out like the ORL database.

Each subject gets a fixed identity (head shape, skin tone, hair texture,
eyes, glasses, mouth); each image of that subject perturbs pose, lighting,
expression and sensor noise.  Images are 92x112 on a dark background and are
written as ``<out>/s<N>/<i>.pgm``.

Run ``python -m blockbayes.synthetic OUT_DIR`` to materialise a corpus.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imageio import GrayImage, write_pgm

WIDTH, HEIGHT = 92, 112


@dataclass(frozen=True)
class Identity:
    face_w: float
    face_h: float
    skin: float
    hair: float
    hair_line: float
    hair_freq: float
    eye_y: float
    eye_gap: float
    eye_size: float
    glasses: bool
    mouth_w: float
    nose_len: float
    cheek_texture: float
    background: float


def sample_identity(rng: np.random.Generator) -> Identity:
    return Identity(
        face_w=rng.uniform(26, 36),
        face_h=rng.uniform(36, 46),
        skin=rng.uniform(110, 200),
        hair=rng.uniform(15, 120),
        hair_line=rng.uniform(-0.95, -0.45),
        hair_freq=rng.uniform(0.2, 1.4),
        eye_y=rng.uniform(-0.35, -0.1),
        eye_gap=rng.uniform(9, 15),
        eye_size=rng.uniform(2.0, 4.5),
        glasses=bool(rng.random() < 0.4),
        mouth_w=rng.uniform(6, 14),
        nose_len=rng.uniform(6, 14),
        cheek_texture=rng.uniform(0, 25),
        background=rng.uniform(5, 45),
    )


def render_face(ident: Identity, rng: np.random.Generator) -> np.ndarray:
    """One 112x92 uint8 image of ``ident`` with random nuisance variation."""
    yy, xx = np.mgrid[0:HEIGHT, 0:WIDTH].astype(np.float64)
    cx = WIDTH / 2 + rng.normal(0, 2.5)
    cy = HEIGHT / 2 + 4 + rng.normal(0, 2.5)
    scale = rng.uniform(0.94, 1.06)
    fw, fh = ident.face_w * scale, ident.face_h * scale
    u = (xx - cx) / fw
    v = (yy - cy) / fh

    img = np.full((HEIGHT, WIDTH), ident.background)
    img += 6.0 * np.sin(yy / 9.0 + rng.uniform(0, 6.3))

    head = u**2 + v**2 <= 1.0
    shade = 1.0 - 0.25 * (u**2 + v**2) + rng.normal(0, 0.05) * u
    img[head] = (ident.skin * shade)[head]
    img[head] += ident.cheek_texture * np.sin(xx * 1.3 + yy * 0.7)[head] * (np.abs(u) > 0.45)[head]

    # hair: textured cap above the hair line plus a rim around the head
    hair_mask = (u**2 + (v * 0.95) ** 2 <= 1.12) & ((v < ident.hair_line) | ~head)
    hair_mask &= v < 0.2
    stripes = np.sin(xx * ident.hair_freq + 0.4 * yy) * 18.0
    img[hair_mask] = ident.hair + stripes[hair_mask]

    closed = rng.random() < 0.2
    ey = cy + ident.eye_y * fh
    for side in (-1, 1):
        ex = cx + side * ident.eye_gap * scale
        d2 = ((xx - ex) / (ident.eye_size * 1.6)) ** 2 + ((yy - ey) / ident.eye_size) ** 2
        if closed:
            img[(np.abs(yy - ey) < 0.8) & (np.abs(xx - ex) < ident.eye_size * 1.6)] = 40
        else:
            img[d2 <= 1.0] = 235
            img[((xx - ex) ** 2 + (yy - ey) ** 2) <= (ident.eye_size * 0.55) ** 2] = 20
        img[(np.abs(yy - (ey - ident.eye_size * 1.8)) < 1.0) & (np.abs(xx - ex) < ident.eye_size * 2)] = ident.hair
        if ident.glasses:
            ring = np.abs(np.sqrt((xx - ex) ** 2 + (yy - ey) ** 2) - ident.eye_size * 2.4) < 0.9
            img[ring] = 10
    if ident.glasses:
        img[(np.abs(yy - ey) < 0.7) & (np.abs(xx - cx) < ident.eye_gap * scale - ident.eye_size * 2.4)] = 10

    nose = (np.abs(xx - cx) < 1.5) & (yy > ey + 2) & (yy < ey + 2 + ident.nose_len)
    img[nose] *= 0.8

    my = ey + ident.nose_len + 10 + rng.normal(0, 1)
    smile = rng.random() < 0.5
    mouth_h = 2.5 if smile else 1.2
    mouth = ((xx - cx) / ident.mouth_w) ** 2 + ((yy - my) / mouth_h) ** 2 <= 1.0
    img[mouth] = 60 if smile else 90

    gain = rng.uniform(0.8, 1.2)
    bias = rng.normal(0, 10)
    img = img * gain + bias + rng.normal(0, 6.0, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_corpus(out_dir, subjects: int = 5, images: int = 10, seed: int = 0) -> list[Path]:
    """Write ``subjects`` x ``images`` PGM files; returns the written paths."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    written = []
    for s in range(1, subjects + 1):
        ident = sample_identity(rng)
        folder = out / f"s{s}"
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(1, images + 1):
            path = folder / f"{i}.pgm"
            write_pgm(path, GrayImage.from_array(render_face(ident, rng)))
            written.append(path)
    return written


def main(argv=None):
    parser = argparse.ArgumentParser(description="Write a synthetic ORL-style face corpus.")
    parser.add_argument("out_dir")
    parser.add_argument("--subjects", type=int, default=5)
    parser.add_argument("--images", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    paths = make_corpus(args.out_dir, args.subjects, args.images, args.seed)
    print(f"wrote {len(paths)} images to {args.out_dir}")


if __name__ == "__main__":
    main()

"""Shared helpers for the demo scripts: an output folder and an SVG writer."""

from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "out" / "demos"


def save(name, text):
    OUT.mkdir(parents=True, exist_ok=True)
    p = OUT / name
    p.write_text(text)
    print("wrote", p)
    return p

"""Reward-map and trajectory rendering as binary PGM/PPM images.

Plain netpbm formats keep golden-file tests byte-exact.  Scalar maps are
min-max normalized so the minimum lands on 0 and the maximum on 255; a
constant map renders mid-gray (128) with a warning.
"""

from __future__ import annotations

import warnings

import numpy as np

from .grid import Trajectory

TRAJ_COLOR = (255, 0, 0)  # visited path cells
TERMINAL_COLOR = (0, 255, 255)  # stopping cell


def normalize_u8(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        warnings.warn("constant map rendered as mid-gray", stacklevel=2)
        return np.full(arr.shape, 128, dtype=np.uint8)
    return np.rint((arr - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_pgm(path, arr) -> None:
    """Grayscale binary PGM (P5, maxval 255) of a min-max normalized map."""
    data = normalize_u8(arr)
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_ppm(path, rgb) -> None:
    """Color binary PPM (P6, maxval 255); ``rgb`` is (3, rows, cols) uint8."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    _, rows, cols = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(np.moveaxis(rgb, 0, 2).tobytes())


def trajectory_overlay(color_planes, traj: Trajectory) -> np.ndarray:
    """Color map (3, rows, cols in [0,1]) with the trajectory painted on:
    visited cells pure red, the terminal cell pure cyan."""
    rgb = np.rint(np.clip(color_planes, 0.0, 1.0) * 255.0).astype(np.uint8)
    for r, c in traj.cells():
        rgb[:, r, c] = TRAJ_COLOR
    term = traj.terminal
    rgb[:, term.row, term.col] = TERMINAL_COLOR
    return rgb

"""Dataset manifests and model checkpoints on disk.

A dataset directory holds one JSON-lines manifest plus one tensor file per
array.  Manifest lines carry, per sample: id, tensor paths for features and
imu (and optionally the ground-truth cost), the trajectory as a list of
[row, col, action_code] with codes 0..4 = up, down, left, right, end
(5..8 reserved for the diagonal extension), the terminal cell, the AEC
label (or null) and the split tag.

A checkpoint is a single file: one JSON header line naming the model and
its geometry, followed by one tensor record per layer in manifest order.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import DataFormatError
from .grid import Action, GridMdp, GridSpec, State, Trajectory, validate_trajectory
from .models import FeatureStack, ImuWindow, make_model
from .synth import SynthSample
from .tensorio import read_record, read_tensor, write_record, write_tensor

MANIFEST_NAME = "manifest.jsonl"
CHECKPOINT_FORMAT = "travckpt-1"


def trajectory_to_codes(traj: Trajectory) -> list:
    return [[s.row, s.col, int(a)] for s, a in traj.steps]


def trajectory_from_codes(codes, terminal, aec=None) -> Trajectory:
    steps = []
    for row, col, code in codes:
        steps.append((State.path(int(row), int(col)), Action(int(code))))
    term = State.goal(int(terminal[0]), int(terminal[1]))
    return Trajectory(steps=steps, terminal=term, aec=aec)


def save_dataset(dirpath, samples) -> None:
    """Write tensor files (float32) and the manifest; overwrites existing
    files so reruns are byte-identical."""
    os.makedirs(dirpath, exist_ok=True)
    lines = []
    for s in samples:
        stem = f"sample_{s.sample_id:05d}"
        feat_name = f"{stem}_features.trav"
        imu_name = f"{stem}_imu.trav"
        write_tensor(os.path.join(dirpath, feat_name), s.features.planes.astype(np.float32))
        write_tensor(os.path.join(dirpath, imu_name), s.imu.samples.astype(np.float32))
        entry = {
            "id": s.sample_id,
            "features": feat_name,
            "imu": imu_name,
            "trajectory": trajectory_to_codes(s.trajectory),
            "terminal": [s.trajectory.terminal.row, s.trajectory.terminal.col],
            "aec": s.trajectory.aec,
            "split": s.split,
            "gt_cost": None,
        }
        if s.gt_cost is not None:
            gt_name = f"{stem}_gtcost.trav"
            write_tensor(os.path.join(dirpath, gt_name), s.gt_cost.astype(np.float32))
            entry["gt_cost"] = gt_name
        lines.append(json.dumps(entry, sort_keys=True))
    with open(os.path.join(dirpath, MANIFEST_NAME), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(dirpath):
    """Read a dataset directory back into SynthSamples.

    Every manifest line is parsed independently; a bad line raises
    DataFormatError naming its 1-based line number.
    """
    manifest = os.path.join(dirpath, MANIFEST_NAME)
    if not os.path.exists(manifest):
        raise DataFormatError(f"no {MANIFEST_NAME} in {dirpath}")
    samples = []
    mdp_cache = {}
    with open(manifest) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
                feat = read_tensor(os.path.join(dirpath, entry["features"])).astype(np.float64)
                imu = read_tensor(os.path.join(dirpath, entry["imu"])).astype(np.float64)
                gt = None
                if entry.get("gt_cost"):
                    gt = read_tensor(os.path.join(dirpath, entry["gt_cost"])).astype(np.float64)
                traj = trajectory_from_codes(entry["trajectory"], entry["terminal"], entry.get("aec"))
                features = FeatureStack(feat)
                shape = (features.rows, features.cols)
                if shape not in mdp_cache:
                    mdp_cache[shape] = GridMdp(GridSpec(rows=shape[0], cols=shape[1]))
                violation = validate_trajectory(mdp_cache[shape], traj)
                if violation is not None:
                    raise DataFormatError(
                        f"invalid trajectory at step {violation.index}: {violation.reason}"
                    )
                samples.append(
                    SynthSample(
                        sample_id=int(entry["id"]),
                        features=features,
                        imu=ImuWindow(imu),
                        trajectory=traj,
                        gt_cost=gt,
                        split=entry["split"],
                    )
                )
            except (KeyError, ValueError, OSError) as err:
                raise DataFormatError(f"manifest line {lineno}: {err}") from err
    return samples


def save_checkpoint(path, model, gamma: float) -> None:
    header = {
        "format": CHECKPOINT_FORMAT,
        "model": model.kind,
        "rows": model.rows,
        "cols": model.cols,
        "imu_len": model.imu_len,
        "gamma": gamma,
        "layers": [name for name, _ in model.params.manifest],
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for name, _shape in model.params.manifest:
            write_record(fh, model.params.view(name))


def load_checkpoint(path):
    """Rebuild the model from a checkpoint; returns (model, gamma)."""
    with open(path, "rb") as fh:
        raw = fh.readline()
        try:
            header = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise DataFormatError(f"bad checkpoint header: {err}") from err
        if header.get("format") != CHECKPOINT_FORMAT:
            raise DataFormatError(f"unknown checkpoint format {header.get('format')!r}")
        model = make_model(header["model"], header["rows"], header["cols"], header["imu_len"])
        for name in header["layers"]:
            arr = read_record(fh)
            view = model.params.view(name)
            if arr.shape != view.shape:
                raise DataFormatError(
                    f"layer {name}: stored shape {arr.shape} != expected {view.shape}"
                )
            view[:] = arr
    return model, float(header["gamma"])

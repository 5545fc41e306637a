"""Single-file checkpoint container.

Layout: 8-byte magic, little-endian u32 format version, u64 header length,
UTF-8 JSON header, then a raw blob section.  The header carries iteration,
seeds, config and network specs, plus one entry per tensor (group, name,
dtype, shape, offset, byte count); blobs are raw little-endian array bytes.
Writes go to a temp file renamed into place, so readers never see a partial
checkpoint.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import torch

MAGIC = b"PSRCKPT\x00"
FORMAT_VERSION = 1

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class CheckpointError(Exception):
    pass


def _tensor_bytes(t: torch.Tensor) -> tuple[str, bytes]:
    arr = t.detach().cpu().numpy()
    dt = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}.get(arr.dtype.name)
    if dt is None:
        raise CheckpointError(f"unsupported tensor dtype {arr.dtype}")
    return dt, np.ascontiguousarray(arr).astype(_DTYPES[dt]).tobytes()


def _optimizer_payload(opt: torch.optim.Optimizer) -> tuple[dict, dict]:
    """Split optimizer state into JSON-serializable scalars and tensor blobs."""
    sd = opt.state_dict()
    meta = {"param_groups": [], "steps": {}}
    blobs = {}
    for group in sd["param_groups"]:
        g = {k: v for k, v in group.items() if k != "params"}
        g["betas"] = list(g.get("betas", ()))
        g["params"] = group["params"]
        meta["param_groups"].append(g)
    for idx, pstate in sd["state"].items():
        for key, val in pstate.items():
            if key == "step":
                meta["steps"][str(idx)] = float(val)
            elif isinstance(val, torch.Tensor):
                blobs[f"{idx}.{key}"] = val
    return meta, blobs


def _restore_optimizer(opt: torch.optim.Optimizer, meta: dict, tensors: dict) -> None:
    sd = opt.state_dict()
    groups = []
    for g in meta["param_groups"]:
        g = dict(g)
        if "betas" in g:
            g["betas"] = tuple(g["betas"])
        groups.append(g)
    state = {}
    for idx_str, step in meta["steps"].items():
        idx = int(idx_str)
        entry = {"step": torch.tensor(step)}
        for key in ("exp_avg", "exp_avg_sq", "max_exp_avg_sq"):
            blob = tensors.get(f"{idx}.{key}")
            if blob is not None:
                entry[key] = blob
        state[idx] = entry
    sd = {"state": state, "param_groups": groups}
    opt.load_state_dict(sd)


def save_checkpoint(state, path) -> None:
    """Serialize a TrainState; see module docstring for the layout."""
    path = Path(path)
    header = {
        "iteration": state.iteration,
        "seeds": {"data": state.cfg.seed, "init": state.cfg.init_seed},
        "config": state.cfg.to_dict(),
        "specs": {
            "generator": state.generator.spec.to_dict(),
            "t1": state.t1.spec.to_dict(),
            "t2": state.t2.spec.to_dict(),
        },
        "loss_history": list(state.loss_history),
        "tensors": [],
        "optimizers": {},
    }
    blob_parts = []
    offset = 0

    def add_tensor(group: str, name: str, t: torch.Tensor):
        nonlocal offset
        dt, raw = _tensor_bytes(t)
        header["tensors"].append({
            "group": group, "name": name, "dtype": dt,
            "shape": list(t.shape), "offset": offset, "nbytes": len(raw),
        })
        blob_parts.append(raw)
        offset += len(raw)

    for net_name in ("generator", "t1", "t2"):
        module = getattr(state, net_name)
        for pname, tensor in module.state_dict().items():
            add_tensor(net_name, pname, tensor)
    for opt_name in ("opt_g", "opt_t1", "opt_t2"):
        opt = getattr(state, opt_name)
        meta, blobs = _optimizer_payload(opt)
        header["optimizers"][opt_name] = meta
        for bname, tensor in blobs.items():
            add_tensor(opt_name, bname, tensor)

    header_bytes = json.dumps(header).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", FORMAT_VERSION))
            fh.write(struct.pack("<Q", len(header_bytes)))
            fh.write(header_bytes)
            for part in blob_parts:
                fh.write(part)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint container")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: format version {version}, this build reads {FORMAT_VERSION}"
            )
        (hlen,) = struct.unpack("<Q", fh.read(8))
        raw = fh.read(hlen)
        if len(raw) != hlen:
            raise CheckpointError(f"{path}: truncated header")
        return json.loads(raw.decode("utf-8"))


def load_checkpoint(path):
    """Rebuild a TrainState exactly (parameters, moments, iteration, seeds)."""
    from ..models.critic import Critic
    from ..models.generator import Generator
    from ..models.specs import CriticSpec, GeneratorSpec
    from .config import TrainConfig
    from .loop import TrainState, make_optimizer

    path = Path(path)
    header = read_header(path)
    # locate the blob section from the on-disk header length (a json
    # round-trip is not byte-stable)
    with open(path, "rb") as fh:
        fh.seek(12)
        (hlen,) = struct.unpack("<Q", fh.read(8))
        base_offset = 8 + 4 + 8 + hlen
        blob_tensors: dict[tuple[str, str], torch.Tensor] = {}
        for entry in header["tensors"]:
            fh.seek(base_offset + entry["offset"])
            raw = fh.read(entry["nbytes"])
            if len(raw) != entry["nbytes"]:
                raise CheckpointError(f"{path}: truncated blob {entry['group']}.{entry['name']}")
            arr = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"]).copy()
            blob_tensors[(entry["group"], entry["name"])] = torch.from_numpy(arr)

    cfg = TrainConfig.from_dict(header["config"])
    generator = Generator(GeneratorSpec.from_dict(header["specs"]["generator"]))
    t1 = Critic(CriticSpec.from_dict(header["specs"]["t1"]))
    t2 = Critic(CriticSpec.from_dict(header["specs"]["t2"]))
    for net_name, module in (("generator", generator), ("t1", t1), ("t2", t2)):
        sd = {name: blob_tensors[(net_name, name)]
              for (group, name) in blob_tensors if group == net_name}
        module.load_state_dict(sd)
    opt_g = make_optimizer(generator, cfg)
    opt_t1 = make_optimizer(t1, cfg)
    opt_t2 = make_optimizer(t2, cfg)
    for opt_name, opt in (("opt_g", opt_g), ("opt_t1", opt_t1), ("opt_t2", opt_t2)):
        tensors = {name: blob_tensors[(group, name)]
                   for (group, name) in blob_tensors if group == opt_name}
        _restore_optimizer(opt, header["optimizers"][opt_name], tensors)
    state = TrainState(
        iteration=header["iteration"], cfg=cfg,
        generator=generator, t1=t1, t2=t2,
        opt_g=opt_g, opt_t1=opt_t1, opt_t2=opt_t2,
    )
    state.loss_history.extend(header.get("loss_history", []))
    return state


def find_latest_checkpoint(directory) -> Path | None:
    directory = Path(directory)
    if not directory.is_dir():
        return None
    candidates = sorted(directory.glob("ckpt_*.ckpt"))
    return candidates[-1] if candidates else None

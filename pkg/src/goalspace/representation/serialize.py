"""Versioned binary container for embedding models and goal policies.

Layout (all integers little-endian)::

    magic        8 bytes   b"GSPCMDL\\0"
    version      uint32
    n_sections   uint32
    section*     tag (16 bytes, NUL padded ASCII)
                 header length (uint32) + UTF-8 JSON header
                 raw little-endian float64 arrays, in header order

The JSON header carries the variant tag, the dimensions and the name and
shape of every array that follows it.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from goalspace.goal_policy import GoalPolicy, KdeModel
from goalspace.representation.base import Variant
from goalspace.representation.flows import RadialFlowParams
from goalspace.representation.isomap import IsomapModel
from goalspace.representation.linear import PCAModel
from goalspace.representation.neural import NeuralModel
from goalspace.representation.nn import DenseNet

MAGIC = b"GSPCMDL\x00"
VERSION = 1


def _pack_section(tag: str, meta: dict, arrays: dict) -> bytes:
    names = list(arrays)
    meta = dict(meta, arrays=[[n, list(np.shape(arrays[n]))] for n in names])
    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    out = [tag.encode("ascii").ljust(16, b"\x00"), struct.pack("<I", len(header)), header]
    for n in names:
        out.append(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())
    return b"".join(out)


def _unpack_sections(raw: bytes):
    if raw[:8] != MAGIC:
        raise ValueError("not a goalspace model file")
    version, n_sections = struct.unpack_from("<II", raw, 8)
    if version != VERSION:
        raise ValueError(f"unsupported model file version {version}")
    pos = 16
    sections = {}
    for _ in range(n_sections):
        tag = raw[pos:pos + 16].rstrip(b"\x00").decode("ascii")
        (hlen,) = struct.unpack_from("<I", raw, pos + 16)
        pos += 20
        meta = json.loads(raw[pos:pos + hlen].decode("utf-8"))
        pos += hlen
        arrays = {}
        for name, shape in meta.pop("arrays"):
            size = int(np.prod(shape)) if shape else 1
            arrays[name] = np.frombuffer(raw, dtype="<f8", count=size, offset=pos) \
                .reshape(shape).astype(float)
            pos += 8 * size
        sections[tag] = (meta, arrays)
    return sections


def _model_section(model):
    meta = {"variant": model.variant.value, "latent_dim": model.latent_dim}
    if isinstance(model, PCAModel):
        arrays = {"mean": model.mean, "components": model.components,
                  "eigenvalues": model.eigenvalues}
    elif isinstance(model, IsomapModel):
        meta["kappa"] = model.kappa
        arrays = {"train_data": model.train_data, "embedding": model.embedding,
                  "eigenvalues": model.eigenvalues}
    elif isinstance(model, NeuralModel):
        net = model.net
        meta.update(input_dim=net.input_dim, hidden=list(net.hidden),
                    variational=net.variational)
        arrays = {k: v for k, v in sorted(net.params.items())}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    meta["input_dim"] = model.input_dim
    return _pack_section("embedding", meta, arrays)


def _policy_section(policy: GoalPolicy):
    meta = {"kind": policy.kind, "dim": policy.dim}
    arrays = {}
    if policy.kind == "kde":
        meta["regularized"] = policy.kde.regularized
        arrays = {"samples": policy.kde.samples, "bandwidth": policy.kde.bandwidth,
                  "cholesky": policy.kde.cholesky}
    elif policy.kind == "uniform":
        meta.update(low=policy.low, high=policy.high)
    return _pack_section("goal_policy", meta, arrays)


def dumps(model=None, policy: GoalPolicy | None = None) -> bytes:
    sections = []
    if model is not None:
        sections.append(_model_section(model))
    if policy is not None:
        sections.append(_policy_section(policy))
    return MAGIC + struct.pack("<II", VERSION, len(sections)) + b"".join(sections)


def _build_model(meta, arrays):
    v = Variant.parse(meta["variant"])
    l = meta["latent_dim"]
    if v is Variant.PCA:
        return PCAModel(l, arrays["mean"], arrays["components"], arrays["eigenvalues"])
    if v is Variant.ISOMAP:
        return IsomapModel(l, meta["kappa"], arrays["train_data"], arrays["embedding"],
                           arrays["eigenvalues"])
    params = {k: a for k, a in arrays.items()}
    net = DenseNet(meta["input_dim"], l, tuple(meta["hidden"]), meta["variational"],
                   params=params)
    flows = RadialFlowParams.from_dict(params) if v is Variant.RFVAE else None
    return NeuralModel(v, l, net, flows)


def _build_policy(meta, arrays):
    if meta["kind"] == "kde":
        kde = KdeModel(arrays["samples"], arrays["bandwidth"], arrays["cholesky"],
                       meta.get("regularized", False))
        return GoalPolicy("kde", meta["dim"], kde)
    if meta["kind"] == "uniform":
        return GoalPolicy.uniform(meta["dim"], meta["low"], meta["high"])
    return GoalPolicy.gaussian_prior(meta["dim"])


def loads(raw: bytes):
    """Returns ``(model or None, policy or None)``."""
    sections = _unpack_sections(raw)
    model = _build_model(*sections["embedding"]) if "embedding" in sections else None
    policy = _build_policy(*sections["goal_policy"]) if "goal_policy" in sections else None
    return model, policy


def save_model(path, model=None, policy: GoalPolicy | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model, policy))


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())

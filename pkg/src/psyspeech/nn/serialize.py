"""Versioned JSON snapshots of named tensors."""

import json

import numpy as np

from .networks import ARCHITECTURES

FORMAT = "psyspeech-params"
VERSION = 1


def network_to_dict(net):
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": net.kind,
        "seed": net.seed,
        "arch": net.arch,
        "tensors": {
            k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
            for k, v in sorted(net.params.items())
        },
    }


def network_from_dict(d):
    if d.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} snapshot")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported snapshot version {d.get('version')}")
    cls = ARCHITECTURES[d["kind"]]
    net = cls(seed=d["seed"], **d["arch"])
    params = {}
    for k, t in d["tensors"].items():
        params[k] = np.array(t["data"], dtype=np.float64).reshape(t["shape"])
    if set(params) != set(net.params):
        raise ValueError("snapshot tensors do not match architecture")
    net.params = params
    return net


def dumps(net):
    return json.dumps(network_to_dict(net), sort_keys=True)


def loads(text):
    return network_from_dict(json.loads(text))


def save(net, path):
    from ..io import atomic_write_text

    atomic_write_text(path, dumps(net) + "\n")


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def write_loss_curve(losses, path):
    from ..io import atomic_write_text

    rows = ["epoch,loss"] + [f"{i},{float(v)!r}" for i, v in enumerate(losses)]
    atomic_write_text(path, "\n".join(rows) + "\n")

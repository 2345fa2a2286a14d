"""
On-disk layout of a network:

    spec.json      the NetworkSpec
    weights.json   the manifest: one {name, shape, dtype, offset, nbytes} entry per tensor
    weights.bin    the concatenated little-endian tensor payloads (C order)
"""

from typing import Dict, Any, List
from collections import OrderedDict
import json
import os
import numpy as np
import torch
from errors import MissingArtifactError, TruncationError
from network.specs import NetworkSpec
from network.parameters import Parameters

SPEC_FILE = "spec.json"
MANIFEST_FILE = "weights.json"
BLOB_FILE = "weights.bin"

_TORCH_TO_NUMPY = {torch.float32: "<f4", torch.float64: "<f8"}


def save_spec(spec: NetworkSpec, directory: str) -> str:
    path = os.path.join(directory, SPEC_FILE)
    with open(path, "w") as fd:
        fd.write(spec.to_json() + "\n")
    return path


def load_spec(directory: str) -> NetworkSpec:
    path = os.path.join(directory, SPEC_FILE)
    if not os.path.isfile(path):
        raise MissingArtifactError(path, "network spec")
    with open(path, "r") as fd:
        return NetworkSpec.from_dict(json.load(fd))


def save_parameters(params: Parameters, directory: str) -> str:
    """
    Write the weights blob and its manifest.
    :return: the path of the manifest.
    """
    manifest: List[Dict[str, Any]] = []
    offset = 0
    with open(os.path.join(directory, BLOB_FILE), "wb") as fd:
        for name, tensor in params.items():
            dtype = _TORCH_TO_NUMPY[tensor.dtype]
            payload = np.ascontiguousarray(tensor.detach().cpu().numpy().astype(dtype)).tobytes()
            fd.write(payload)
            manifest.append({'name': name, 'shape': list(tensor.shape), 'dtype': dtype,
                             'offset': offset, 'nbytes': len(payload)})
            offset += len(payload)
    path = os.path.join(directory, MANIFEST_FILE)
    with open(path, "w") as fd:
        json.dump({'seed': params.seed, 'tensors': manifest}, fd, indent=2)
        fd.write("\n")
    return path


def load_parameters(directory: str) -> Parameters:
    manifest_path = os.path.join(directory, MANIFEST_FILE)
    blob_path = os.path.join(directory, BLOB_FILE)
    for path in (manifest_path, blob_path):
        if not os.path.isfile(path):
            raise MissingArtifactError(path, "weights")
    with open(manifest_path, "r") as fd:
        manifest = json.load(fd)
    with open(blob_path, "rb") as fd:
        blob = fd.read()
    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    for entry in manifest['tensors']:
        end = entry['offset'] + entry['nbytes']
        if end > len(blob):
            raise TruncationError(blob_path, end, len(blob))
        array = np.frombuffer(blob, dtype=entry['dtype'], count=entry['nbytes'] // np.dtype(entry['dtype']).itemsize,
                              offset=entry['offset']).reshape(entry['shape'])
        tensors[entry['name']] = torch.from_numpy(array.astype(array.dtype.newbyteorder("="), copy=True))
    return Parameters(tensors, manifest.get('seed'))

""" **archive.py** reads and writes named-tensor archives.

All RAEG checkpoints (generator, discriminator, classifiers, trainer state) use one binary layout:
    
    offset 0   : the magic bytes b"RAEG1"
    offset 5   : manifest length N, unsigned 64-bit little-endian integer
    offset 13  : N bytes of UTF-8 JSON manifest
    offset 13+N: data section, the raw little-endian bytes of every tensor, concatenated

The manifest is a JSON object
    
    {
        "format_version": 1,
        "kind": "generator" | "discriminator" | "classifier" | "trainer" | ...,
        "config": {...},
        "metadata": {...},
        "tensors": {name: {"dtype": "<f4", "shape": [...], "offset": int, "nbytes": int}, ...}
    }

where tensor offsets are relative to the start of the data section.
"""
import raeg
import json
import numpy
import pathlib
import struct
import torch


MAGIC = b"RAEG1"

FORMAT_VERSION = 1

_HEADER = struct.Struct("<Q")


def write_archive(path, tensors, kind, config = None, metadata = None):
    """ Write `tensors`, a mapping from names to `torch.Tensor`, to `path`. """
    path = pathlib.Path(path)
    
    raeg.helpers.mkdir_p(path.parent)
    
    entries = {}
    
    chunks = []
    
    offset = 0
    
    for name, tensor in tensors.items():
    
        array = numpy.ascontiguousarray(tensor.detach().cpu().numpy())
        
        array = array.astype(array.dtype.newbyteorder("<"), copy = False)
        
        data = array.tobytes()
        
        entries[name] = {
            "dtype": array.dtype.str,
            "shape": list(array.shape),
            "offset": offset,
            "nbytes": len(data)}
            
        chunks.append(data)
        
        offset += len(data)
    
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config if config is not None else {},
        "metadata": metadata if metadata is not None else {},
        "tensors": entries}
        
    manifest_bytes = json.dumps(manifest, sort_keys = True).encode("utf-8")
    
    with open(str(path), "wb") as archive_file:
    
        archive_file.write(MAGIC)
        
        archive_file.write(_HEADER.pack(len(manifest_bytes)))
        
        archive_file.write(manifest_bytes)
        
        for data in chunks:
        
            archive_file.write(data)


def read_manifest(path):
    """ Read only the manifest of the archive at `path`. """
    manifest, _ = _read(path, load_tensors = False)
    
    return manifest


def read_archive(path, kind = None):
    """ Read an archive, returning `(manifest, tensors)`.
    
    If `kind` is given, the manifest must declare the same kind.
    Raises `raeg.errors.CheckpointError` for any malformed archive.
    """
    manifest, tensors = _read(path, load_tensors = True)
    
    if (kind is not None) and (manifest.get("kind") != kind):
    
        raise raeg.errors.CheckpointError(
            "Archive " + str(path) + " holds a '" + str(manifest.get("kind")) + "', expected a '" + kind + "'")
    
    return manifest, tensors


def _read(path, load_tensors):
    
    try:
    
        with open(str(path), "rb") as archive_file:
        
            content = archive_file.read()
            
    except OSError as error:
    
        raise raeg.errors.CheckpointError("Cannot read archive " + str(path) + ": " + str(error))
    
    if content[:len(MAGIC)] != MAGIC:
    
        raise raeg.errors.CheckpointError("Not a RAEG archive (bad magic): " + str(path))
    
    start = len(MAGIC) + _HEADER.size
    
    if len(content) < start:
    
        raise raeg.errors.CheckpointError("Truncated archive header: " + str(path))
    
    manifest_length = _HEADER.unpack(content[len(MAGIC):start])[0]
    
    try:
    
        manifest = json.loads(content[start:start + manifest_length].decode("utf-8"))
        
    except (UnicodeDecodeError, ValueError) as error:
    
        raise raeg.errors.CheckpointError("Corrupt manifest in " + str(path) + ": " + str(error))
    
    for key in ("format_version", "kind", "config", "metadata", "tensors"):
    
        if key not in manifest:
        
            raise raeg.errors.CheckpointError("Corrupt manifest in " + str(path) + ": missing '" + key + "'")
    
    if manifest["format_version"] != FORMAT_VERSION:
    
        raise raeg.errors.CheckpointError(
            "Unsupported archive format version " + str(manifest["format_version"])
            + " (expected " + str(FORMAT_VERSION) + ") in " + str(path))
    
    if not load_tensors:
    
        return manifest, None
    
    data = content[start + manifest_length:]
    
    tensors = {}
    
    for name, entry in manifest["tensors"].items():
    
        end = entry["offset"] + entry["nbytes"]
        
        if end > len(data):
        
            raise raeg.errors.CheckpointError("Tensor '" + name + "' is truncated in " + str(path))
        
        array = numpy.frombuffer(data[entry["offset"]:end], dtype = numpy.dtype(entry["dtype"]))
        
        tensors[name] = torch.from_numpy(array.reshape(entry["shape"]).copy())
    
    return manifest, tensors


def load_state_dict(module, tensors, path = ""):
    """ Copy `tensors` into `module`, requiring exactly the same set of names. 
    
    Raises `raeg.errors.CheckpointError` naming any missing or unexpected tensor.
    """
    expected = set(module.state_dict().keys())
    
    found = set(tensors.keys())
    
    missing = sorted(expected - found)
    
    if missing:
    
        raise raeg.errors.CheckpointError("Missing tensors in " + str(path) + ": " + ", ".join(missing))
    
    unexpected = sorted(found - expected)
    
    if unexpected:
    
        raise raeg.errors.CheckpointError("Unexpected tensors in " + str(path) + ": " + ", ".join(unexpected))
    
    module.load_state_dict(tensors, strict = True)

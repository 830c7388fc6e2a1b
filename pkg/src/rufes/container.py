"""Versioned array container used for tagger and pair-scorer parameters.

A zip of ``.npy`` members plus a ``meta.json``. Members are written in sorted
order with a fixed timestamp so identical contents produce identical bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


class ContainerError(ValueError):
    pass


def save_container(path: str | Path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    header = {"format_version": FORMAT_VERSION, "kind": kind, "meta": meta}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr(zipfile.ZipInfo("meta.json", _EPOCH), json.dumps(header, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.require(arrays[name], requirements="C"), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"arrays/{name}.npy", _EPOCH), buf.getvalue())


def load_container(path: str | Path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        zf = zipfile.ZipFile(path)
    except (zipfile.BadZipFile, FileNotFoundError) as exc:
        raise ContainerError(f"{path}: {exc}") from None
    with zf:
        header = json.loads(zf.read("meta.json"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ContainerError(f"{path}: unsupported format version {header.get('format_version')}")
        if header.get("kind") != kind:
            raise ContainerError(f"{path}: holds a {header.get('kind')!r}, expected {kind!r}")
        arrays = {}
        for name in zf.namelist():
            if name.startswith("arrays/") and name.endswith(".npy"):
                arrays[name[len("arrays/") : -len(".npy")]] = np.lib.format.read_array(
                    io.BytesIO(zf.read(name)), allow_pickle=False)
    return header["meta"], arrays

"""Python access to the specuq core: problems, samples, moments and studies."""

import csv
import io
import json

from ._specuq import (
    Problem as _Problem,
    SpecuqError,
    align,
    config_hash as _config_hash,
    default_config as _default_config,
    git_blob_hash,
    mesh_info,
)

__all__ = [
    "Problem",
    "SpecuqError",
    "align",
    "config_hash",
    "default_config",
    "git_blob_hash",
    "mesh_info",
    "read_csv",
]


def default_config():
    return json.loads(_default_config())


def config_hash(config):
    return _config_hash(json.dumps(config or {}))


def read_csv(text):
    """Split a rendered table into ({metadata}, [row dicts])."""
    meta, body = {}, []
    for line in io.StringIO(text, newline=""):
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value
        else:
            body.append(line)
    rows = list(csv.DictReader(io.StringIO("".join(body), newline="")))
    return meta, rows


class Problem(_Problem):
    def __init__(self, config=None, **overrides):
        cfg = dict(config or {})
        cfg.update(overrides)
        super().__init__(json.dumps(cfg))

    def _study(self, runner):
        text, summary, ok = runner()
        meta, rows = read_csv(text)
        return {"csv": text, "metadata": meta, "rows": rows, "summary": json.loads(summary), "slopes_ok": ok}

    def study_det(self):
        return self._study(super().study_det)

    def study_mc(self):
        return self._study(super().study_mc)

    def study_exp(self):
        return self._study(super().study_exp)
